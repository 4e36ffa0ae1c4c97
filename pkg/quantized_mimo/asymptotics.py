"""Deterministic equivalents: the xi fixed point, spectral moments, asymptotic SIQNR and user loading."""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .constants import (
    BETA_SEARCH_MARGIN,
    BETA_SEARCH_TOLERANCE,
    XI_DAMPING,
    XI_MAX_ITERATIONS,
    XI_TOLERANCE,
    RhoPolicies,
)
from .errors import ConfigError, DegenerateInputError, SolverError
from .precoding import optimal_rho, policy_rho
from .types import AsymptoticPoint, AsymptoticSolution

logger = logging.getLogger(__name__)

# Relative agreement required between independent evaluations of the same quantity
CROSS_CHECK_TOLERANCE = 1e-9


def _check_rho_beta(rho: float, beta: float) -> None:
    if not rho > 0.0:
        raise ConfigError(f"rho must be positive, got {rho}")
    if not beta > 0.0:
        raise ConfigError(f"beta must be positive, got {beta}")


def _solve_fixed_point(rhs: Callable[[float], float], upper: float, label: str) -> float:
    """
    Solve xi = rhs(xi) on (0, upper].

    Damped iteration from the upper bound; when the residual stops
    shrinking, or cannot reach the tolerance within the iteration cap,
    the bracketing root finder takes over.
    """
    xi = upper
    previous = math.inf
    for iteration in range(1, XI_MAX_ITERATIONS + 1):
        target = rhs(xi)
        residual = abs(xi - target)
        tolerance = XI_TOLERANCE * max(1.0, xi)
        if residual == 0.0:
            return xi
        if residual >= previous:
            logger.debug("%s fixed point stalled at iteration %d; bracketing", label, iteration)
            break
        if math.isfinite(previous):
            ratio = residual / previous
            # distance to the root is residual * damping / (1 - ratio) for a contraction
            error = residual * XI_DAMPING / (1.0 - ratio)
            if max(residual, error) <= tolerance:
                logger.debug("%s fixed point converged in %d iterations (xi=%.6g)", label, iteration, xi)
                return xi
            needed = math.log(tolerance / max(residual, error)) / math.log(ratio)
            if iteration > 10 and needed > XI_MAX_ITERATIONS - iteration:
                logger.debug("%s fixed point contracts at %.6f per step; bracketing", label, ratio)
                break
        previous = residual
        xi = (1.0 - XI_DAMPING) * xi + XI_DAMPING * target

    try:
        root = optimize.brentq(lambda x: x - rhs(x), 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                               maxiter=1000)
    except (ValueError, RuntimeError) as e:
        raise SolverError(f"{label} fixed point did not converge: {e}")
    if abs(root - rhs(root)) > 1e3 * XI_TOLERANCE * max(1.0, root):
        raise SolverError(f"{label} fixed point residual too large at xi={root}")
    return root


def solve_xi_spectrum(rho: float, beta: float, spectrum: Sequence[float]) -> float:
    """
    Solve xi = E_lambda{lambda (1+xi) / (rho (1+xi) + beta lambda)} for a finite spectrum.

    Args:
        rho: Normalized regularization.
        beta: User loading ratio.
        spectrum: Eigenvalues of the transmit correlation (mean 1).

    Returns:
        The unique positive solution.

    Raises:
        ConfigError: If rho or beta is not positive or the spectrum is empty or negative.
        SolverError: If the fixed point cannot be located.
    """
    _check_rho_beta(rho, beta)
    lam = np.asarray(spectrum, dtype=float)
    if lam.size == 0 or np.any(lam < 0) or not np.any(lam > 0):
        raise ConfigError("Spectrum must be nonempty, nonnegative and not all zero")

    def rhs(xi: float) -> float:
        return float(np.mean(lam / (rho + beta * lam / (1.0 + xi))))

    return _solve_fixed_point(rhs, float(np.mean(lam)) / rho, 'spectrum')


def spectral_moments(rho: float, beta: float, xi: float, spectrum: Sequence[float]) -> Tuple[float, float]:
    """
    E12 and E22 of a finite spectrum at a solved xi.

    Returns:
        (E{lambda / d^2}, E{lambda^2 / d^2}) with d = rho (1+xi) + beta lambda.
    """
    lam = np.asarray(spectrum, dtype=float)
    denominator = (rho * (1.0 + xi) + beta * lam) ** 2
    return float(np.mean(lam / denominator)), float(np.mean(lam ** 2 / denominator))


def xi_uncorrelated(rho: float, beta: float) -> float:
    """
    Positive root of xi = (1+xi) / (rho (1+xi) + beta).

    Args:
        rho: Normalized regularization.
        beta: User loading ratio.

    Returns:
        1/2 [sqrt((1-beta)^2/rho^2 + 2(1+beta)/rho + 1) + (1-beta)/rho - 1].

    Raises:
        ConfigError: If rho or beta is not positive.
    """
    _check_rho_beta(rho, beta)
    excess = (1.0 - beta) ** 2 / rho ** 2 + 2.0 * (1.0 + beta) / rho
    # sqrt(1 + excess) - 1 without cancellation for large rho
    return 0.5 * (excess / (math.sqrt(1.0 + excess) + 1.0) + (1.0 - beta) / rho)


def solve_xi_toeplitz(rho: float, beta: float, nu: float) -> Tuple[float, float, float]:
    """
    xi, E12 and E22 for the exponential Toeplitz correlation in the large-N limit.

    With a = rho (1+nu^2) + beta (1-nu^2)/(1+xi) and b = -2 rho nu the
    fixed point reads xi = (1-nu^2) / sqrt(a^2 - b^2), and both moments
    have closed forms in a and b.

    Args:
        rho: Normalized regularization.
        beta: User loading ratio.
        nu: Correlation coefficient in [0, 1).

    Returns:
        (xi, e12, e22).

    Raises:
        ConfigError: If an argument is out of range.
        SolverError: If a^2 <= b^2 or the fixed point cannot be located.
    """
    _check_rho_beta(rho, beta)
    if not 0.0 <= nu < 1.0:
        raise ConfigError(f"nu must lie in [0, 1), got {nu}")
    if nu == 0.0:
        xi = xi_uncorrelated(rho, beta)
        moment = 1.0 / (rho * (1.0 + xi) + beta) ** 2
        return xi, moment, moment

    scale = 1.0 - nu ** 2

    def discriminant(xi: float) -> Tuple[float, float]:
        load = beta * scale / (1.0 + xi)
        a = rho * (1.0 + nu ** 2) + load
        # a^2 - b^2 = (a - b)(a + b) with b = -2 rho nu
        return a, (rho * (1.0 + nu) ** 2 + load) * (rho * (1.0 - nu) ** 2 + load)

    def rhs(xi: float) -> float:
        return scale / math.sqrt(discriminant(xi)[1])

    xi = _solve_fixed_point(rhs, 1.0 / rho, 'toeplitz')
    a, disc = discriminant(xi)
    if disc <= 0.0:
        raise SolverError(f"Toeplitz discriminant is not positive ({disc}) at rho={rho}, beta={beta}, nu={nu}")
    b = -2.0 * rho * nu
    common = (1.0 + xi) ** 2 * disc ** 1.5
    e12 = scale * (a * (1.0 + nu ** 2) - b * (-2.0 * nu)) / common
    e22 = a * scale ** 2 / common
    return xi, e12, e22


def _siqnr_formula(rho: float, beta: float, gamma0: float, rho_da: float, rho_ad: float,
                   xi: float, e12: float, e22: float) -> float:
    grown = (1.0 + xi) ** 2 * e12
    effective = xi * (e22 + rho / beta * grown)
    numerator = (1.0 - rho_ad) * (1.0 - rho_da) * effective * gamma0
    denominator = (rho_ad * (1.0 - rho_da) * effective * gamma0 + rho_da * grown * gamma0
                   + (1.0 - rho_da) * e22 * gamma0 + grown)
    return numerator / denominator


def gamma_uncorrelated(beta: float, rho: float, gamma0: float, rho_da: float, rho_ad: float) -> float:
    """
    Asymptotic SIQNR for an uncorrelated channel, written in terms of xi only.

    Args:
        beta: User loading ratio.
        rho: Normalized regularization.
        gamma0: Linear SNR.
        rho_da: DAC distortion factor.
        rho_ad: ADC distortion factor.

    Returns:
        Asymptotic SIQNR.
    """
    xi = xi_uncorrelated(rho, beta)
    grown = (1.0 + xi) ** 2
    effective = xi * (1.0 + rho / beta * grown)
    numerator = (1.0 - rho_ad) * (1.0 - rho_da) * effective * gamma0
    denominator = (rho_ad * (1.0 - rho_da) * effective * gamma0 + rho_da * grown * gamma0
                   + (1.0 - rho_da) * gamma0 + grown)
    return numerator / denominator


def _relative_gap(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def asymptotic_siqnr(point: AsymptoticPoint, spectrum: Optional[Sequence[float]] = None) -> AsymptoticSolution:
    """
    Asymptotic SIQNR and rates of RZF precoding at one operating point.

    The Toeplitz closed forms are used unless an explicit spectrum is
    given. For an uncorrelated channel the result is cross-checked against
    the uncorrelated closed form.

    Args:
        point: Operating point; rho None selects the optimal regularization.
        spectrum: Optional correlation eigenvalues replacing the Toeplitz model.

    Returns:
        AsymptoticSolution with the resolved point.

    Raises:
        SolverError: If xi cannot be solved or the cross-check fails.
    """
    if point.rho is None:
        point = point.with_rho(optimal_rho(point.beta, point.gamma0, point.rho_da))
    rho, beta = point.rho, point.beta

    if spectrum is None:
        xi, e12, e22 = solve_xi_toeplitz(rho, beta, point.nu)
    else:
        xi = solve_xi_spectrum(rho, beta, spectrum)
        e12, e22 = spectral_moments(rho, beta, xi, spectrum)

    gamma = _siqnr_formula(rho, beta, point.gamma0, point.rho_da, point.rho_ad, xi, e12, e22)
    if spectrum is None and point.nu == 0.0:
        closed = gamma_uncorrelated(beta, rho, point.gamma0, point.rho_da, point.rho_ad)
        if _relative_gap(gamma, closed) > CROSS_CHECK_TOLERANCE:
            raise SolverError(f"Uncorrelated SIQNR cross-check failed: {gamma} vs {closed}")

    rate = math.log2(1.0 + gamma)
    return AsymptoticSolution(
        point=point,
        xi=xi,
        e12=e12,
        e22=e22,
        gamma=gamma,
        rate=rate,
        sum_rate_per_antenna=beta * (1.0 - point.eta * beta) * rate,
    )


def optimal_siqnr_and_rate(point: AsymptoticPoint) -> Tuple[float, float]:
    """
    SIQNR and per-user rate at the optimal regularization.

    At the optimum the SIQNR collapses to (1 - rho_ad) xi / (1 + rho_ad xi).

    Args:
        point: Operating point; its rho is ignored.

    Returns:
        (gamma_star, rate) with rate = log2((1 + xi) / (1 + rho_ad xi)).

    Raises:
        SolverError: If the collapsed form disagrees with the full formula.
    """
    solution = asymptotic_siqnr(point.with_rho(None))
    xi, rho_ad = solution.xi, point.rho_ad
    gamma_star = (1.0 - rho_ad) * xi / (1.0 + rho_ad * xi)
    if _relative_gap(gamma_star, solution.gamma) > CROSS_CHECK_TOLERANCE:
        raise SolverError(f"Optimal SIQNR cross-check failed: {gamma_star} vs {solution.gamma}")
    return gamma_star, math.log2((1.0 + xi) / (1.0 + rho_ad * xi))


def sum_rate_per_antenna(point: AsymptoticPoint) -> float:
    """
    Sum rate per antenna including the pilot overhead, at the optimal regularization.

    Returns:
        beta (1 - eta beta) R; nonpositive when eta beta >= 1.
    """
    _, rate = optimal_siqnr_and_rate(point)
    return point.beta * (1.0 - point.eta * point.beta) * rate


def sum_rate_for_policy(point: AsymptoticPoint, policy: str) -> float:
    """
    Sum rate per antenna when the regularization follows a policy.

    Args:
        point: Operating point; its rho is ignored.
        policy: One of RhoPolicies.

    Returns:
        beta (1 - eta beta) log2(1 + gamma).
    """
    if policy == RhoPolicies.OPTIMAL:
        return sum_rate_per_antenna(point)
    rho = policy_rho(policy, point.beta, point.gamma0, point.rho_da)
    return asymptotic_siqnr(point.with_rho(rho)).sum_rate_per_antenna


def optimal_beta_numeric(point: AsymptoticPoint, policy: str = RhoPolicies.OPTIMAL) -> Tuple[float, float]:
    """
    User loading ratio maximizing the sum rate per antenna.

    A bounded scalar search runs over (margin, min(1, 1/eta) - margin).

    Args:
        point: Operating point; its beta and rho are ignored.
        policy: Regularization policy applied at every candidate beta.

    Returns:
        (beta_star, maximal sum rate per antenna).

    Raises:
        DegenerateInputError: If the objective is flat (e.g. zero SNR).
    """
    upper = min(1.0, 1.0 / point.eta) - BETA_SEARCH_MARGIN
    lower = BETA_SEARCH_MARGIN
    if point.gamma0 <= 0.0 or upper <= lower:
        raise DegenerateInputError(f"Sum rate is identically zero for gamma0={point.gamma0}, eta={point.eta}")

    def objective(beta: float) -> float:
        return -sum_rate_for_policy(AsymptoticPoint(
            beta=beta, gamma0=point.gamma0, rho_da=point.rho_da, rho_ad=point.rho_ad,
            nu=point.nu, eta=point.eta), policy)

    samples = [objective(b) for b in np.linspace(lower, upper, 5)]
    if max(samples) - min(samples) <= 0.0:
        raise DegenerateInputError("Sum rate objective is flat over the user loading range")

    result = optimize.minimize_scalar(objective, bounds=(lower, upper), method='bounded',
                                      options={'xatol': BETA_SEARCH_TOLERANCE})
    beta_star = float(result.x)
    if min(beta_star - lower, upper - beta_star) < 10 * BETA_SEARCH_TOLERANCE:
        logger.warning("Optimal user loading %.6f sits on the search boundary", beta_star)
    return beta_star, float(-result.fun)


def optimal_beta_closed_form(gamma0: float, rho_da: float, rho_ad: float, eta: float) -> float:
    """
    Low-SNR closed form of the optimal user loading for uncorrelated channels.

    The closed form keeps only the first-order rate term, so as gamma0 -> 0
    it tends to sqrt(2) times the numeric optimum of sum_rate_per_antenna
    while the two still share the sqrt(gamma0) scaling.

    Args:
        gamma0: Linear SNR (intended for gamma0 << 1).
        rho_da: DAC distortion factor.
        rho_ad: ADC distortion factor.
        eta: Pilot overhead factor.

    Returns:
        Positive root of eta beta^2 + 2 eta k beta - k = 0 with k = gamma0 (1+rho_ad)(1-rho_da).
    """
    if eta <= 0.0:
        raise ConfigError(f"eta must be positive, got {eta}")
    k = gamma0 * (1.0 + rho_ad) * (1.0 - rho_da)
    return -k + math.sqrt(k ** 2 + k / eta)


def low_snr_rate(beta: float, gamma0: float, rho_da: float, rho_ad: float) -> float:
    """
    First-order low-SNR per-user rate for uncorrelated channels.

    Returns:
        log2((beta + (1-rho_da) gamma0) / (beta + rho_ad (1-rho_da) gamma0)).
    """
    if beta <= 0.0:
        raise ConfigError(f"beta must be positive, got {beta}")
    scaled = (1.0 - rho_da) * gamma0
    return math.log2((beta + scaled) / (beta + rho_ad * scaled))


def rate_loss_per_energy(beta: float, rho_da: float, rho_ad: float) -> float:
    """
    Low-SNR limit of the ADC-induced rate loss divided by gamma0.

    Returns:
        rho_ad (1 - rho_da) / (beta ln 2).
    """
    if beta <= 0.0:
        raise ConfigError(f"beta must be positive, got {beta}")
    return rho_ad * (1.0 - rho_da) / (beta * math.log(2.0))


def rate_loss_quotient(beta: float, gamma0: float, rho_da: float, rho_ad: float) -> float:
    """
    Rate loss of finite-resolution ADCs against ideal ADCs, divided by gamma0.

    Returns:
        (R(rho_ad = 0) - R(rho_ad)) / gamma0 with the low-SNR rate.
    """
    if gamma0 <= 0.0:
        raise ConfigError(f"gamma0 must be positive, got {gamma0}")
    return (low_snr_rate(beta, gamma0, rho_da, 0.0) - low_snr_rate(beta, gamma0, rho_da, rho_ad)) / gamma0


def xi_derivative(rho: float, beta: float, xi: float, e12: float, e22: float) -> float:
    """d xi / d rho = -(1+xi)^2 E12 / (1 - beta E22)."""
    return -(1.0 + xi) ** 2 * e12 / (1.0 - beta * e22)


def c_squared_limit(power: float, beta: float, xi: float, e12: float, e22: float) -> float:
    """
    Large-system limit of the squared RZF normalization constant.

    Returns:
        -P (1+xi)^2 / (beta d xi/d rho) = P (1 - beta E22) / (beta E12).
    """
    return power * (1.0 - beta * e22) / (beta * e12)
