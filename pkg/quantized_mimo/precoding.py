"""Linear precoders, power normalization, optimal regularization and per-realization SIQNR."""

import logging
import math

import numpy as np
from scipy import linalg

from .constants import MRC_RHO, ZF_RHO, PrecoderKinds, RhoPolicies
from .errors import ConfigError, SingularChannelError
from .types import ChannelRealization, PrecodedSystem, PrecoderSpec

logger = logging.getLogger(__name__)

# Largest condition number of H H^H accepted by the zero-forcing precoder
ZF_MAX_CONDITION = 1e12


def _as_realization(h) -> ChannelRealization:
    if isinstance(h, ChannelRealization):
        return h
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    m, n = h.shape
    return ChannelRealization(h=h, h_iid=h, n_antennas=n, n_users=m, nu=float('nan'))


def _right_solve(gram: np.ndarray, h: np.ndarray) -> np.ndarray:
    # H^H G^-1 for Hermitian positive definite G, via G^-1 H
    factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    return linalg.cho_solve(factor, h, check_finite=False).conj().T


def build_precoder(h, spec: PrecoderSpec) -> PrecodedSystem:
    """
    Build a power-normalized linear precoder for a channel.

    RZF uses c (H^H H + alpha I)^-1 H^H, evaluated as c H^H (H H^H + alpha I)^-1
    so that only an M x M Hermitian system is factored. ZF uses the
    normalized pseudo-inverse and MRC the normalized conjugate channel.
    Every kind satisfies Tr(P P^H) = power_budget.

    Args:
        h: M x N channel matrix, or a ChannelRealization.
        spec: Precoder selection.

    Returns:
        PrecodedSystem holding P and c.

    Raises:
        SingularChannelError: If ZF is requested for a rank-deficient channel.
    """
    channel = _as_realization(h)
    h = channel.h
    m = h.shape[0]

    if spec.kind == PrecoderKinds.MRC:
        unnormalized = h.conj().T
    else:
        gram = h @ h.conj().T
        if spec.kind == PrecoderKinds.ZF:
            condition = np.linalg.cond(gram)
            if not np.isfinite(condition) or condition > ZF_MAX_CONDITION:
                raise SingularChannelError(f"Channel is rank deficient for ZF (condition number {condition:.3e})")
        else:
            gram = gram + spec.alpha * np.eye(m)
        try:
            unnormalized = _right_solve(gram, h)
        except linalg.LinAlgError as e:
            raise SingularChannelError(f"Channel Gram matrix could not be factored: {e}")

    energy = float(np.real(np.vdot(unnormalized, unnormalized)))
    if energy <= 0.0:
        raise SingularChannelError("Precoder has zero energy; the channel is all zeros")
    c = math.sqrt(spec.power_budget / energy)
    return PrecodedSystem(p=c * unnormalized, c=c, channel=channel, spec=spec)


def equivalent_snr(gamma0: float, rho_da: float) -> float:
    """
    SNR seen through the transmit DACs, (1 - rho_da) gamma0 / (rho_da gamma0 + 1).

    Args:
        gamma0: Linear SNR.
        rho_da: DAC distortion factor.

    Returns:
        Equivalent linear SNR.

    Raises:
        ConfigError: If rho_da is outside [0, 1) or gamma0 is not positive.
    """
    if not 0.0 <= rho_da < 1.0:
        raise ConfigError(f"rho_da must lie in [0, 1), got {rho_da}")
    if gamma0 <= 0.0:
        raise ConfigError(f"gamma0 must be positive, got {gamma0}")
    return (1.0 - rho_da) * gamma0 / (rho_da * gamma0 + 1.0)


def optimal_rho(beta: float, gamma0: float, rho_da: float) -> float:
    """
    Normalized regularization maximizing the asymptotic SIQNR.

    The optimum does not depend on the transmit correlation nor on the
    ADC resolution. The matching RZF parameter is alpha = rho * N.

    Args:
        beta: User loading ratio.
        gamma0: Linear SNR.
        rho_da: DAC distortion factor.

    Returns:
        (rho_da gamma0 + 1) beta / ((1 - rho_da) gamma0).

    Raises:
        ConfigError: If an argument is out of range.
    """
    if beta <= 0.0:
        raise ConfigError(f"beta must be positive, got {beta}")
    return beta / equivalent_snr(gamma0, rho_da)


def conventional_rho(beta: float, gamma0: float) -> float:
    """
    Regularization sigma^2 M / (P N) = beta / gamma0 that ignores the DACs.

    Raises:
        ConfigError: If beta or gamma0 is not positive.
    """
    if beta <= 0.0 or gamma0 <= 0.0:
        raise ConfigError(f"beta and gamma0 must be positive, got {beta} and {gamma0}")
    return beta / gamma0


def policy_rho(policy: str, beta: float, gamma0: float, rho_da: float) -> float:
    """
    Normalized regularization selected by a policy.

    ZF and MRC map to very small and very large rho respectively, which
    is how they enter the large-system formulas.

    Args:
        policy: One of RhoPolicies.
        beta: User loading ratio.
        gamma0: Linear SNR.
        rho_da: DAC distortion factor.

    Returns:
        Normalized regularization parameter.

    Raises:
        ConfigError: If the policy is unknown.
    """
    if policy == RhoPolicies.OPTIMAL:
        return optimal_rho(beta, gamma0, rho_da)
    if policy == RhoPolicies.CONVENTIONAL:
        return conventional_rho(beta, gamma0)
    if policy == RhoPolicies.ZF:
        return ZF_RHO
    if policy == RhoPolicies.MRC:
        return MRC_RHO
    raise ConfigError(f"Unknown rho policy: {policy!r}")


def policy_precoder(policy: str, n_antennas: int, beta: float, gamma0: float, rho_da: float,
                    power_budget: float) -> PrecoderSpec:
    """
    Precoder a policy stands for at N antennas.

    Optimal and conventional policies build RZF with alpha = rho N; ZF and
    MRC build the exact limiting precoders.

    Raises:
        ConfigError: If the policy is unknown.
    """
    if policy == RhoPolicies.ZF:
        return PrecoderSpec.zf(power_budget)
    if policy == RhoPolicies.MRC:
        return PrecoderSpec.mrc(power_budget)
    return PrecoderSpec.rzf(policy_rho(policy, beta, gamma0, rho_da) * n_antennas, power_budget)


def exact_siqnr(system: PrecodedSystem, rho_da: float, rho_ad: float, noise_var: float) -> np.ndarray:
    """
    Per-user SIQNR of a precoded realization with Bussgang-modeled converters.

    The DAC noise covariance is rho_da diag(P P^H). The ADC noise variance
    of user k is rho_ad (1 - rho_ad) times the power the user receives
    from the linear signal part, the DAC noise and the thermal noise. DAC
    and ADC distortions are treated as mutually uncorrelated.

    Args:
        system: Precoded realization.
        rho_da: DAC distortion factor.
        rho_ad: ADC distortion factor.
        noise_var: Thermal noise variance sigma^2.

    Returns:
        SIQNR of each of the M users.

    Raises:
        ConfigError: If a distortion factor or the noise variance is out of range.
    """
    if not 0.0 <= rho_da < 1.0 or not 0.0 <= rho_ad < 1.0:
        raise ConfigError(f"Distortion factors must lie in [0, 1), got {rho_da} and {rho_ad}")
    if noise_var <= 0.0:
        raise ConfigError(f"noise_var must be positive, got {noise_var}")

    h = system.channel.h
    gains = np.abs(system.effective_channel) ** 2
    desired = np.diag(gains)
    total = np.sum(gains, axis=1)
    dac = (np.abs(h) ** 2) @ (rho_da * system.p_diag)

    linear = (1.0 - rho_ad) ** 2
    adc = rho_ad * (1.0 - rho_ad) * ((1.0 - rho_da) * total + dac + noise_var)
    numerator = linear * (1.0 - rho_da) * desired
    denominator = linear * (1.0 - rho_da) * (total - desired) + linear * dac + adc + linear * noise_var
    return numerator / denominator
