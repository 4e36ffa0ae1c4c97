"""Constants for the quantized massive MIMO library."""

import math

# Distortion factors of the optimal non-uniform quantizer, indexed by bit depth
DISTORTION_TABLE = {
    1: 0.3634,
    2: 0.1175,
    3: 0.03454,
    4: 0.009497,
    5: 0.002499,
}

# High-resolution approximation rho ~ HIGH_RES_COEFF * 2^(-2b), used past the table
HIGH_RES_COEFF = math.pi * math.sqrt(3.0) / 2.0

# Lloyd-Max construction
LLOYD_MAX_MAX_BITS = 8
LLOYD_MAX_MAX_ITERATIONS = 10_000
LLOYD_MAX_TOLERANCE = 1e-10

# Fixed-point solver for xi
XI_DAMPING = 0.5
XI_MAX_ITERATIONS = 100_000
XI_TOLERANCE = 1e-12

# Normalized regularization standing in for the ZF (rho -> 0) and MRC (rho -> inf) limits
ZF_RHO = 1e-8
MRC_RHO = 1e8

# Optimal user loading search interval margin
BETA_SEARCH_MARGIN = 1e-4
BETA_SEARCH_TOLERANCE = 1e-6

# Monte-Carlo engine
NOISE_VAR = 1.0
ZF_RESAMPLE_CAP = 10
PILOT_LENGTH = 100
DEFAULT_TRIALS = 100
FULL_TRIALS = 500
DEFAULT_SYMBOLS = 10_000
FULL_SYMBOLS = 100_000
DEFAULT_SEED = 20180104

# Output files
METADATA_SUFFIX = '.meta.json'
METADATA_PATH = lambda out: f"{out}{METADATA_SUFFIX}"

# Exit codes of the command-line surface
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2

# Precoder kinds
class PrecoderKinds:
    """Linear precoder families."""
    RZF = 'rzf'
    ZF = 'zf'
    MRC = 'mrc'

# Regularization policies of a simulated system
class RhoPolicies:
    """How the normalized regularization parameter is chosen."""
    OPTIMAL = 'optimal'
    CONVENTIONAL = 'conventional'
    ZF = 'zf'
    MRC = 'mrc'

    ALL = (OPTIMAL, CONVENTIONAL, ZF, MRC)

# Quantization backends used by the BER simulation
class Backends:
    """Quantizer realizations for the link simulation."""
    HARD = 'hard'
    SURROGATE = 'surrogate'

    ALL = (HARD, SURROGATE)

# Experiment kinds
class ExperimentKinds:
    """Experiment kinds understood by the runner."""
    SWEEP_RHO = 'sweep_rho'
    SWEEP_BETA = 'sweep_beta'
    RATE_VS_SNR = 'rate_vs_snr'
    BER_VS_SNR = 'ber_vs_snr'
    BETA_TABLE = 'beta_table'
    VERIFY = 'verify'

    ALL = (SWEEP_RHO, SWEEP_BETA, RATE_VS_SNR, BER_VS_SNR, BETA_TABLE, VERIFY)

# Variables an experiment may sweep (SystemConfig and AsymptoticPoint fields)
SWEEPABLE = (
    'n_antennas', 'n_users', 'gamma0_db', 'b_da', 'b_ad', 'nu', 'eta',
    'trials', 'beta', 'rho',
)

# Grid axes of the user-loading lookup table
BETA_TABLE_AXES = ('gamma0_db', 'b_da', 'b_ad', 'eta', 'nu')

_AXIS_COLUMNS = ['series_variable', 'series_value', 'sweep_variable', 'sweep_value']

# CSV column contract per experiment kind
COLUMNS = {
    ExperimentKinds.SWEEP_RHO: _AXIS_COLUMNS + [
        'gamma0_db', 'gamma0', 'beta', 'nu', 'rho_da', 'rho_ad', 'rho',
        'xi', 'e12', 'e22', 'gamma', 'rate', 'rho_star', 'rho_argmax',
        'mc_mean_siqnr', 'mc_std_err', 'mc_trials',
    ],
    ExperimentKinds.SWEEP_BETA: _AXIS_COLUMNS + [
        'gamma0_db', 'gamma0', 'beta', 'nu', 'rho_da', 'rho_ad', 'eta',
        'policy', 'rho', 'xi', 'gamma', 'rate', 'sum_rate', 'rho_star',
        'beta_star', 'sum_rate_max',
    ],
    ExperimentKinds.RATE_VS_SNR: _AXIS_COLUMNS + [
        'gamma0_db', 'gamma0', 'beta', 'nu', 'rho_da', 'rho_ad', 'policy',
        'rho', 'rho_star', 'gamma', 'rate', 'mc_mean_siqnr', 'mc_std_err',
        'mc_mean_rate', 'mc_rate_std_err', 'mc_trials',
    ],
    ExperimentKinds.BER_VS_SNR: _AXIS_COLUMNS + [
        'gamma0_db', 'gamma0', 'beta', 'nu', 'rho_da', 'rho_ad', 'policy',
        'backend', 'rho', 'ber', 'ber_std_err', 'n_bits', 'mc_mean_siqnr',
    ],
    ExperimentKinds.BETA_TABLE: [
        'gamma0_db', 'gamma0', 'b_da', 'b_ad', 'rho_da', 'rho_ad', 'eta',
        'nu', 'beta_star_numeric', 'sum_rate_numeric',
        'beta_star_closed_form', 'sum_rate_closed_form',
    ],
}
