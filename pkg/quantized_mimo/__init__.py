"""Quantized massive MIMO downlink: RZF precoding under DAC and ADC quantization."""

__version__ = '1.0.0'

from .asymptotics import (
    asymptotic_siqnr,
    optimal_beta_closed_form,
    optimal_beta_numeric,
    solve_xi_toeplitz,
    sum_rate_per_antenna,
)
from .channel import CorrelationModel, exp_toeplitz, sample_channel
from .constants import Backends, ExperimentKinds, PrecoderKinds, RhoPolicies
from .errors import (
    ConfigError,
    DegenerateInputError,
    ExperimentError,
    QuantizedMimoError,
    SingularChannelError,
    SolverError,
)
from .experiments import beta_table, load_spec, run_experiment
from .montecarlo import check_large_system_convergence, simulate_ber, simulate_siqnr
from .precoding import build_precoder, conventional_rho, optimal_rho
from .quant import QuantizerModel, distortion_factor, lloyd_max_codebook
from .types import (
    AsymptoticPoint,
    AsymptoticSolution,
    ExperimentSpec,
    MonteCarloReport,
    PrecoderSpec,
    SystemConfig,
)
from .verify import run_checks

__all__ = [
    'asymptotic_siqnr',
    'optimal_beta_closed_form',
    'optimal_beta_numeric',
    'solve_xi_toeplitz',
    'sum_rate_per_antenna',
    'CorrelationModel',
    'exp_toeplitz',
    'sample_channel',
    'Backends',
    'ExperimentKinds',
    'PrecoderKinds',
    'RhoPolicies',
    'ConfigError',
    'DegenerateInputError',
    'ExperimentError',
    'QuantizedMimoError',
    'SingularChannelError',
    'SolverError',
    'beta_table',
    'load_spec',
    'run_experiment',
    'check_large_system_convergence',
    'simulate_ber',
    'simulate_siqnr',
    'build_precoder',
    'conventional_rho',
    'optimal_rho',
    'QuantizerModel',
    'distortion_factor',
    'lloyd_max_codebook',
    'AsymptoticPoint',
    'AsymptoticSolution',
    'ExperimentSpec',
    'MonteCarloReport',
    'PrecoderSpec',
    'SystemConfig',
    'run_checks',
]
