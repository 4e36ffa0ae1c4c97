"""Type definitions for the quantized massive MIMO library."""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .constants import (
    BETA_TABLE_AXES,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    NOISE_VAR,
    SWEEPABLE,
    ExperimentKinds,
    PrecoderKinds,
    RhoPolicies,
)
from .errors import ConfigError
from .utils import Bits, db_to_linear, parse_bits


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """
    One downlink channel draw.

    Attributes:
        h: M x N channel matrix H = H_iid R^(1/2).
        h_iid: M x N matrix of i.i.d. unit-variance complex Gaussian entries.
        n_antennas: Number of transmit antennas N.
        n_users: Number of users M.
        nu: Correlation coefficient the draw was made with.
    """
    h: np.ndarray = field(repr=False)
    h_iid: np.ndarray = field(repr=False)
    n_antennas: int
    n_users: int
    nu: float


@dataclass(frozen=True)
class PrecoderSpec:
    """
    Linear precoder selection.

    Attributes:
        kind: One of PrecoderKinds.
        power_budget: Total transmit power P.
        alpha: Regularization parameter; required (and positive) for RZF only.
    """
    kind: str
    power_budget: float
    alpha: Optional[float] = None

    def __post_init__(self):
        _require(self.kind in (PrecoderKinds.RZF, PrecoderKinds.ZF, PrecoderKinds.MRC),
                 f"Unknown precoder kind: {self.kind!r}")
        _require(self.power_budget > 0, f"power_budget must be positive, got {self.power_budget}")
        if self.kind == PrecoderKinds.RZF:
            _require(self.alpha is not None and self.alpha > 0,
                     f"RZF needs a positive alpha, got {self.alpha!r}")

    @classmethod
    def rzf(cls, alpha: float, power_budget: float) -> 'PrecoderSpec':
        return cls(PrecoderKinds.RZF, power_budget, alpha)

    @classmethod
    def zf(cls, power_budget: float) -> 'PrecoderSpec':
        return cls(PrecoderKinds.ZF, power_budget)

    @classmethod
    def mrc(cls, power_budget: float) -> 'PrecoderSpec':
        return cls(PrecoderKinds.MRC, power_budget)


@dataclass(frozen=True, eq=False)
class PrecodedSystem:
    """
    A precoder applied to a concrete channel.

    Attributes:
        p: N x M precoding matrix, Tr(P P^H) equal to the power budget.
        c: Power normalization constant.
        channel: The realization the precoder was built for.
        spec: The precoder selection.
    """
    p: np.ndarray = field(repr=False)
    c: float
    channel: ChannelRealization
    spec: PrecoderSpec

    @property
    def p_diag(self) -> np.ndarray:
        """Diagonal of P P^H."""
        return np.sum(np.abs(self.p) ** 2, axis=1)

    @property
    def effective_channel(self) -> np.ndarray:
        """M x M matrix H P."""
        return self.channel.h @ self.p


@dataclass(frozen=True)
class AsymptoticPoint:
    """
    Large-system operating point.

    The pilot length per user and the coherence interval only enter
    through eta = N * tau / T.

    Attributes:
        beta: User loading ratio M/N in (0, 1].
        gamma0: Linear SNR P / sigma^2.
        rho_da: DAC distortion factor in [0, 1).
        rho_ad: ADC distortion factor in [0, 1).
        nu: Correlation coefficient in [0, 1).
        eta: Pilot overhead factor.
        rho: Normalized regularization alpha / N; None selects the optimum.
    """
    beta: float
    gamma0: float
    rho_da: float = 0.0
    rho_ad: float = 0.0
    nu: float = 0.0
    eta: float = 1.0
    rho: Optional[float] = None

    def __post_init__(self):
        _require(0.0 < self.beta <= 1.0, f"beta must lie in (0, 1], got {self.beta}")
        _require(self.gamma0 >= 0.0 and math.isfinite(self.gamma0),
                 f"gamma0 must be a finite nonnegative linear SNR, got {self.gamma0}")
        _require(0.0 <= self.rho_da < 1.0, f"rho_da must lie in [0, 1), got {self.rho_da}")
        _require(0.0 <= self.rho_ad < 1.0, f"rho_ad must lie in [0, 1), got {self.rho_ad}")
        _require(0.0 <= self.nu < 1.0, f"nu must lie in [0, 1), got {self.nu}")
        _require(self.eta > 0.0, f"eta must be positive, got {self.eta}")
        _require(self.rho is None or self.rho > 0.0, f"rho must be positive, got {self.rho}")

    def with_rho(self, rho: Optional[float]) -> 'AsymptoticPoint':
        return replace(self, rho=rho)


@dataclass(frozen=True)
class AsymptoticSolution:
    """
    Deterministic equivalents at one operating point.

    Attributes:
        point: The operating point, with rho resolved.
        xi: Solution of the fixed-point equation.
        e12: Spectral moment E{lambda / [rho(1+xi) + beta lambda]^2}.
        e22: Spectral moment E{lambda^2 / [rho(1+xi) + beta lambda]^2}.
        gamma: Asymptotic SIQNR.
        rate: log2(1 + gamma) in bits per channel use.
        sum_rate_per_antenna: beta (1 - eta beta) rate.
    """
    point: AsymptoticPoint
    xi: float
    e12: float
    e22: float
    gamma: float
    rate: float
    sum_rate_per_antenna: float

    @property
    def identity_residual(self) -> float:
        """|xi (1 - beta E22) - rho (1+xi)^2 E12 - beta E22|."""
        beta, rho = self.point.beta, self.point.rho
        return abs(self.xi * (1.0 - beta * self.e22) - rho * (1.0 + self.xi) ** 2 * self.e12 - beta * self.e22)


@dataclass(frozen=True)
class SystemConfig:
    """
    Finite-size simulation scenario.

    Attributes:
        n_antennas: Number of transmit antennas N.
        n_users: Number of users M (at most N).
        gamma0_db: SNR in dB.
        b_da: DAC resolution in bits, or math.inf.
        b_ad: ADC resolution in bits, or math.inf.
        nu: Correlation coefficient in [0, 1).
        policy: Regularization policy, one of RhoPolicies.
        trials: Number of channel realizations.
        seed: Master seed.
        eta: Pilot overhead factor.
    """
    n_antennas: int
    n_users: int
    gamma0_db: float
    b_da: Bits = math.inf
    b_ad: Bits = math.inf
    nu: float = 0.0
    policy: str = RhoPolicies.OPTIMAL
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'b_da', parse_bits(self.b_da))
        object.__setattr__(self, 'b_ad', parse_bits(self.b_ad))
        for name in ('n_antennas', 'n_users', 'trials'):
            value = getattr(self, name)
            _require(not isinstance(value, bool) and int(value) == value and value >= 1,
                     f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        _require(self.n_users <= self.n_antennas,
                 f"n_users ({self.n_users}) must not exceed n_antennas ({self.n_antennas})")
        _require(math.isfinite(self.gamma0_db), f"gamma0_db must be finite, got {self.gamma0_db}")
        _require(0.0 <= self.nu < 1.0, f"nu must lie in [0, 1), got {self.nu}")
        _require(self.policy in RhoPolicies.ALL, f"Unknown rho policy: {self.policy!r}")
        _require(int(self.seed) == self.seed and self.seed >= 0, f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, 'seed', int(self.seed))
        _require(self.eta > 0.0, f"eta must be positive, got {self.eta}")

    @property
    def beta(self) -> float:
        return self.n_users / self.n_antennas

    @property
    def gamma0(self) -> float:
        return db_to_linear(self.gamma0_db)

    @property
    def power(self) -> float:
        """Transmit power budget; the noise variance is fixed so P = gamma0."""
        return self.gamma0 * NOISE_VAR

    @property
    def rho_da(self) -> float:
        from .quant import distortion_factor
        return distortion_factor(self.b_da)

    @property
    def rho_ad(self) -> float:
        from .quant import distortion_factor
        return distortion_factor(self.b_ad)

    def point(self, rho: Optional[float] = None) -> AsymptoticPoint:
        """Large-system point with the same ratios as this scenario."""
        return AsymptoticPoint(beta=self.beta, gamma0=self.gamma0, rho_da=self.rho_da, rho_ad=self.rho_ad,
                               nu=self.nu, eta=self.eta, rho=rho)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_antennas': self.n_antennas,
            'n_users': self.n_users,
            'gamma0_db': self.gamma0_db,
            'b_da': self.b_da,
            'b_ad': self.b_ad,
            'nu': self.nu,
            'policy': self.policy,
            'trials': self.trials,
            'seed': self.seed,
            'eta': self.eta,
        }


@dataclass(frozen=True)
class MonteCarloReport:
    """
    Empirical statistics of a finite-size simulation.

    Attributes:
        mean_siqnr: SIQNR averaged over users and trials.
        siqnr_std_err: Standard error of mean_siqnr over trials.
        mean_rate: log2(1 + SIQNR) averaged over users and trials.
        mean_rate_std_err: Standard error of mean_rate over trials.
        asymptotic_reference: Deterministic equivalent for the same scenario.
        relative_gap: |mean_siqnr - reference gamma| / reference gamma.
        trials: Number of channel realizations.
        seed: Master seed.
        resampled: Number of singular channel draws that were redrawn.
        ber: Bit error rate, when a link simulation was run.
        ber_std_err: Binomial standard error of ber.
        n_bits: Number of detected bits behind ber.
    """
    mean_siqnr: float
    siqnr_std_err: float
    mean_rate: float
    mean_rate_std_err: float
    asymptotic_reference: AsymptoticSolution
    relative_gap: float
    trials: int
    seed: int
    resampled: int = 0
    ber: Optional[float] = None
    ber_std_err: Optional[float] = None
    n_bits: int = 0


@dataclass(frozen=True)
class LargeSystemDiagnostics:
    """
    Finite-size checks of the large-system limits used by the analysis.

    Attributes:
        xi: Deterministic equivalent of the quadratic form.
        quadratic_form_mean: Mean of h_k^T (H_k^H H_k + alpha I)^-1 h_k^* over users and trials.
        quadratic_form_gap: Relative gap between the two.
        diag_max_deviation: Largest relative deviation of the trial-averaged diag(P P^H) from P/N.
        diag_mean_deviation: Mean relative deviation of the trial-averaged diag(P P^H) from P/N.
        c_squared_mean: Mean empirical squared normalization constant.
        c_squared_limit: Large-system limit of c^2.
        c_squared_gap: Relative gap between the two.
        trials: Number of realizations.
    """
    xi: float
    quadratic_form_mean: float
    quadratic_form_gap: float
    diag_max_deviation: float
    diag_mean_deviation: float
    c_squared_mean: float
    c_squared_limit: float
    c_squared_gap: float
    trials: int


def _expand_values(variable: str, raw: Any) -> List[Any]:
    if isinstance(raw, Mapping):
        try:
            start, stop = float(raw['start']), float(raw['stop'])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Range for {variable!r} needs numeric start and stop: {e}")
        scale = raw.get('scale', 'linear')
        if 'num' in raw:
            num = int(raw['num'])
            _require(num >= 1, f"Range for {variable!r} needs num >= 1")
            if scale == 'log':
                _require(start > 0 and stop > 0, f"Log range for {variable!r} needs positive bounds")
                return [float(v) for v in np.geomspace(start, stop, num)]
            _require(scale == 'linear', f"Unknown range scale {scale!r}")
            return [float(v) for v in np.linspace(start, stop, num)]
        if 'step' in raw:
            step = float(raw['step'])
            _require(step != 0 and (stop - start) / step >= 0, f"Range for {variable!r} has an invalid step")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [float(start + i * step) for i in range(count)]
        raise ConfigError(f"Range for {variable!r} needs 'num' or 'step'")
    if isinstance(raw, (list, tuple)):
        return list(raw)
    return [raw]


@dataclass(frozen=True)
class SweepAxis:
    """
    One experiment axis.

    Attributes:
        variable: SystemConfig or AsymptoticPoint field being varied.
        values: Values in sweep order.
    """
    variable: str
    values: Tuple[Any, ...]

    def __post_init__(self):
        _require(self.variable in SWEEPABLE, f"Cannot sweep {self.variable!r}; choose one of {SWEEPABLE}")
        _require(len(self.values) > 0, f"Sweep over {self.variable!r} is empty")
        if self.variable in ('b_da', 'b_ad'):
            object.__setattr__(self, 'values', tuple(parse_bits(v) for v in self.values))
        else:
            object.__setattr__(self, 'values', tuple(self.values))

    @classmethod
    def from_config(cls, raw: Mapping[str, Any]) -> 'SweepAxis':
        """
        Build an axis from a config section.

        Args:
            raw: Mapping with 'variable' and either 'values' (a list) or a
                range mapping with start/stop and num or step.

        Returns:
            SweepAxis instance.

        Raises:
            ConfigError: If the section is malformed.
        """
        if not isinstance(raw, Mapping) or 'variable' not in raw:
            raise ConfigError(f"Axis section needs a 'variable' key, got {raw!r}")
        source = raw.get('values', raw.get('range'))
        if source is None:
            raise ConfigError(f"Axis {raw['variable']!r} needs 'values' or 'range'")
        return cls(variable=str(raw['variable']), values=tuple(_expand_values(raw['variable'], source)))


@dataclass(frozen=True)
class ExperimentSpec:
    """
    A named, reproducible experiment.

    Attributes:
        name: Experiment name.
        kind: One of ExperimentKinds.
        base: Scenario every sweep point starts from.
        sweep: X-axis; required for all kinds except beta_table and verify.
        series: Optional curve axis (one curve per value).
        options: Kind-specific settings (rho_grid, monte_carlo, policies, backend, n_symbols, grid).
        output: CSV path, or None.
    """
    name: str
    kind: str
    base: SystemConfig
    sweep: Optional[SweepAxis] = None
    series: Optional[SweepAxis] = None
    options: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None

    def __post_init__(self):
        _require(bool(self.name), "Experiment name must not be empty")
        _require(self.kind in ExperimentKinds.ALL, f"Unknown experiment kind: {self.kind!r}")
        needs_sweep = self.kind not in (ExperimentKinds.BETA_TABLE, ExperimentKinds.VERIFY)
        _require(not needs_sweep or self.sweep is not None, f"Experiment kind {self.kind!r} needs a sweep axis")
        if self.kind == ExperimentKinds.BETA_TABLE:
            grid = self.options.get('grid', {})
            _require(isinstance(grid, Mapping), "beta_table grid must be a mapping")
            unknown = set(grid) - set(BETA_TABLE_AXES)
            _require(not unknown, f"beta_table grid has unknown axes: {sorted(unknown)}")
