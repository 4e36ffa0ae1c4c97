"""Quantization distortion factors, Lloyd-Max codebooks and Bussgang surrogates."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize, special

from .constants import (
    DISTORTION_TABLE,
    HIGH_RES_COEFF,
    LLOYD_MAX_MAX_BITS,
    LLOYD_MAX_MAX_ITERATIONS,
    LLOYD_MAX_TOLERANCE,
)
from .errors import ConfigError, SolverError
from .utils import Bits, complex_gaussian

logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class QuantizerModel:
    """
    Scalar quantizer for a zero-mean unit-variance real Gaussian input.

    Attributes:
        bits: Bit depth b.
        rho: Distortion factor for this bit depth.
        levels: Sorted reconstruction levels (2^b of them), or None.
        thresholds: Interior decision thresholds (2^b - 1 of them), or None.
        mse: Mean-square error of the codebook on a unit-variance Gaussian.
    """
    bits: int
    rho: float
    levels: Optional[np.ndarray] = field(default=None, repr=False)
    thresholds: Optional[np.ndarray] = field(default=None, repr=False)
    mse: Optional[float] = None

    @property
    def has_codebook(self) -> bool:
        return self.levels is not None

    @property
    def codebook(self) -> List[Tuple[float, float]]:
        """(lower cell threshold, level) pairs; the first threshold is -inf."""
        if self.levels is None:
            return []
        lower = np.concatenate(([-np.inf], self.thresholds))
        return [(float(t), float(y)) for t, y in zip(lower, self.levels)]


def distortion_factor(bits: Bits) -> float:
    """
    Distortion factor of the optimal non-uniform b-bit quantizer.

    Tabulated for 1..5 bits; above that the high-resolution approximation
    (pi*sqrt(3)/2) * 2^(-2b) is used. An ideal converter (bits = inf) has
    zero distortion.

    Args:
        bits: Bit depth, or math.inf.

    Returns:
        Distortion factor in [0, 1).

    Raises:
        ConfigError: If bits is not a positive integer or infinity.
    """
    if isinstance(bits, float) and math.isinf(bits) and bits > 0:
        return 0.0
    if isinstance(bits, bool) or int(bits) != bits or bits < 1:
        raise ConfigError(f"Quantizer bit depth must be >= 1, got {bits!r}")
    bits = int(bits)
    if bits in DISTORTION_TABLE:
        return DISTORTION_TABLE[bits]
    return HIGH_RES_COEFF * 2.0 ** (-2 * bits)


def _gaussian_pdf(x: np.ndarray) -> np.ndarray:
    # exp(-inf) evaluates to 0 for the open outer cells
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def _cell_masses(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # upper tail cells use the complementary cdf
    return np.where(lo > 0, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))


def _centroids(thresholds: np.ndarray) -> np.ndarray:
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    lo, hi = edges[:-1], edges[1:]
    pdf = _gaussian_pdf(edges)
    return (pdf[:-1] - pdf[1:]) / _cell_masses(lo, hi)


def _midpoints(levels: np.ndarray) -> np.ndarray:
    return 0.5 * (levels[1:] + levels[:-1])


def codebook_mse(levels: np.ndarray, thresholds: np.ndarray) -> float:
    """
    Exact mean-square error of a scalar codebook on a unit-variance Gaussian.

    Args:
        levels: Reconstruction levels.
        thresholds: Interior thresholds between consecutive levels.

    Returns:
        E[(X - Q(X))^2] for X ~ N(0, 1).
    """
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    lo, hi = edges[:-1], edges[1:]
    pdf = _gaussian_pdf(edges)
    mass = _cell_masses(lo, hi)
    edge_term = np.where(np.isfinite(edges), edges, 0.0) * pdf
    second = mass + edge_term[:-1] - edge_term[1:]
    first = pdf[:-1] - pdf[1:]
    return float(np.sum(second - 2.0 * levels * first + np.square(levels) * mass))


@lru_cache(maxsize=None)
def lloyd_max_codebook(bits: int) -> QuantizerModel:
    """
    Minimum-MSE scalar quantizer for a zero-mean unit-variance real Gaussian.

    Levels start at Gaussian quantiles and follow Lloyd's alternation of
    midpoint thresholds and cell-conditional means until the levels move
    less than 1e-10. A Newton-type polish then drives the centroid
    residual to machine precision, which large codebooks need because
    plain Lloyd iterations contract slowly there.

    Args:
        bits: Bit depth, 1..8.

    Returns:
        QuantizerModel with levels, thresholds and mse filled in.

    Raises:
        ConfigError: If bits is outside 1..8.
        SolverError: If the iteration does not reach a stationary codebook.
    """
    if isinstance(bits, bool) or int(bits) != bits or not 1 <= bits <= LLOYD_MAX_MAX_BITS:
        raise ConfigError(f"Lloyd-Max codebooks are built for 1..{LLOYD_MAX_MAX_BITS} bits, got {bits!r}")
    bits = int(bits)
    n_levels = 2 ** bits
    levels = special.ndtri((np.arange(n_levels) + 0.5) / n_levels)

    iterations = 0
    for iterations in range(1, LLOYD_MAX_MAX_ITERATIONS + 1):
        updated = _centroids(_midpoints(levels))
        updated = 0.5 * (updated - updated[::-1])
        movement = float(np.max(np.abs(updated - levels)))
        levels = updated
        if movement < LLOYD_MAX_TOLERANCE:
            break
    else:
        logger.debug("Lloyd iteration for %d bits stopped at the cap (movement %.3e)", bits, movement)

    def residual(y: np.ndarray) -> np.ndarray:
        return y - _centroids(_midpoints(y))

    if n_levels > 2:
        result = optimize.root(residual, levels, method='hybr', tol=1e-14)
        if result.success or np.max(np.abs(residual(result.x))) < np.max(np.abs(residual(levels))):
            levels = np.sort(result.x)
            levels = 0.5 * (levels - levels[::-1])

    worst = float(np.max(np.abs(residual(levels))))
    if not np.all(np.diff(levels) > 0) or worst > 1e-9:
        raise SolverError(
            f"Lloyd-Max failed to converge for {bits} bits after {iterations} iterations "
            f"(centroid residual {worst:.3e})"
        )

    thresholds = _midpoints(levels)
    mse = codebook_mse(levels, thresholds)
    logger.debug("Lloyd-Max %d bits: %d iterations, mse %.6g", bits, iterations, mse)
    levels.setflags(write=False)
    thresholds.setflags(write=False)
    return QuantizerModel(bits=bits, rho=distortion_factor(bits), levels=levels, thresholds=thresholds, mse=mse)


def _check_rho(name: str, rho: float) -> None:
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"{name} must lie in [0, 1), got {rho}")


def bussgang_dac(precoded: np.ndarray, rho_da: float, p_diag: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Gaussian surrogate of the transmit DAC pair.

    Returns sqrt(1 - rho_da) * precoded + n_DA with n_DA circularly-symmetric
    and per-antenna variance rho_da * p_diag[n]. A matrix input (N x T) is
    treated as T transmit vectors sharing p_diag.

    Args:
        precoded: Precoded vector (length N) or block (N x T).
        rho_da: DAC distortion factor.
        p_diag: Diagonal of P P^H, length N.
        rng: Random stream.

    Returns:
        DAC output with the shape of precoded.

    Raises:
        ConfigError: If rho_da is out of range or p_diag has negative entries.
    """
    _check_rho('rho_da', rho_da)
    p_diag = np.asarray(p_diag, dtype=float)
    if np.any(p_diag < 0):
        raise ConfigError("p_diag must be nonnegative")
    precoded = np.asarray(precoded, dtype=complex)
    variance = rho_da * (p_diag if precoded.ndim == 1 else p_diag[:, np.newaxis])
    noise = complex_gaussian(rng, precoded.shape, variance)
    return math.sqrt(1.0 - rho_da) * precoded + noise


def bussgang_adc(received: np.ndarray, rho_ad: float, y_var: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Gaussian surrogate of the receive ADC pairs.

    Returns (1 - rho_ad) * received + n_AD with per-user variance
    rho_ad * (1 - rho_ad) * y_var[k]. A matrix input (M x T) is treated as
    T received vectors sharing y_var.

    Args:
        received: Received vector (length M) or block (M x T).
        rho_ad: ADC distortion factor.
        y_var: Per-user received power E|y_k|^2, length M.
        rng: Random stream.

    Returns:
        ADC output with the shape of received.

    Raises:
        ConfigError: If rho_ad is out of range or y_var has negative entries.
    """
    _check_rho('rho_ad', rho_ad)
    y_var = np.asarray(y_var, dtype=float)
    if np.any(y_var < 0):
        raise ConfigError("y_var must be nonnegative")
    received = np.asarray(received, dtype=complex)
    variance = rho_ad * (1.0 - rho_ad) * (y_var if received.ndim == 1 else y_var[:, np.newaxis])
    noise = complex_gaussian(rng, received.shape, variance)
    return (1.0 - rho_ad) * received + noise


def _quantize_real(part: np.ndarray, model: QuantizerModel, axis: Optional[int]) -> np.ndarray:
    scale = np.std(part, axis=axis, keepdims=axis is not None)
    safe = np.where(scale > 0, scale, 1.0)
    index = np.searchsorted(model.thresholds, part / safe)
    return np.where(scale > 0, model.levels[index] * safe, 0.0)


def quantize_hard(signal: np.ndarray, model: QuantizerModel, axis: Optional[int] = None) -> np.ndarray:
    """
    Quantize real and imaginary parts with a Lloyd-Max codebook.

    Each real dimension is scaled to unit empirical standard deviation,
    mapped to the nearest level and scaled back. With axis set, the scale
    is computed separately along that axis (e.g. per transmit vector).

    Args:
        signal: Complex samples.
        model: Quantizer with a codebook.
        axis: Axis along which the scale is estimated; None uses all samples.

    Returns:
        Quantized complex samples; an all-zero input gives an all-zero output.

    Raises:
        ConfigError: If the model has no codebook.
    """
    if not model.has_codebook:
        raise ConfigError(f"{model.bits}-bit quantizer model has no codebook")
    signal = np.asarray(signal, dtype=complex)
    real = _quantize_real(signal.real, model, axis)
    imag = _quantize_real(signal.imag, model, axis)
    return real + 1j * imag
