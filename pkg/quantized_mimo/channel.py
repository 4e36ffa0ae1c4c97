"""Spatially correlated downlink channels and Toeplitz correlation spectra."""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import ConfigError
from .types import ChannelRealization
from .utils import complex_gaussian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationModel:
    """
    Exponential Toeplitz transmit correlation R with entries nu^|i-j|.

    The matrix, its Hermitian square root and its sorted eigenvalues are
    computed on first access and reused afterwards.

    Attributes:
        n_antennas: Number of transmit antennas N.
        nu: Correlation coefficient in [0, 1).
    """
    n_antennas: int
    nu: float

    def __post_init__(self):
        if isinstance(self.n_antennas, bool) or int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ConfigError(f"n_antennas must be a positive integer, got {self.n_antennas!r}")
        if not 0.0 <= self.nu < 1.0:
            raise ConfigError(f"nu must lie in [0, 1), got {self.nu}")

    @property
    def is_identity(self) -> bool:
        return self.nu == 0.0

    @cached_property
    def matrix(self) -> np.ndarray:
        """N x N correlation matrix."""
        column = self.nu ** np.arange(self.n_antennas, dtype=float)
        value = linalg.toeplitz(column)
        value.setflags(write=False)
        return value

    @cached_property
    def _eigh(self):
        if self.is_identity:
            return np.ones(self.n_antennas), np.eye(self.n_antennas)
        return linalg.eigh(self.matrix)

    @cached_property
    def spectrum(self) -> np.ndarray:
        """Eigenvalues of the correlation matrix in ascending order."""
        value = np.clip(self._eigh[0], 0.0, None)
        value.setflags(write=False)
        return value

    @cached_property
    def sqrt_matrix(self) -> np.ndarray:
        """Hermitian positive semidefinite square root of the correlation matrix."""
        if self.is_identity:
            value = np.eye(self.n_antennas)
        else:
            eigenvalues, vectors = self._eigh
            root = np.sqrt(np.clip(eigenvalues, 0.0, None))
            value = (vectors * root) @ vectors.T
            value = 0.5 * (value + value.T)
        value.setflags(write=False)
        return value


def exp_toeplitz(n: int, nu: float) -> CorrelationModel:
    """
    Build the exponential Toeplitz correlation model.

    Args:
        n: Number of transmit antennas.
        nu: Correlation coefficient in [0, 1).

    Returns:
        CorrelationModel whose matrix entry (i, j) is nu^|i-j|.

    Raises:
        ConfigError: If nu >= 1, nu < 0 or n < 1.
    """
    return CorrelationModel(n_antennas=n, nu=float(nu))


def spectral_density(nu: float, w):
    """
    Spectral density of the exponential Toeplitz correlation sequence.

    Args:
        nu: Correlation coefficient in [0, 1).
        w: Angular frequency (scalar or array).

    Returns:
        (1 - nu^2) / (1 - 2 nu cos w + nu^2), with the shape of w.

    Raises:
        ConfigError: If nu is outside [0, 1).
    """
    if not 0.0 <= nu < 1.0:
        raise ConfigError(f"nu must lie in [0, 1), got {nu}")
    return (1.0 - nu ** 2) / (1.0 - 2.0 * nu * np.cos(w) + nu ** 2)


def sample_channel(corr: CorrelationModel, m: int, rng: np.random.Generator) -> ChannelRealization:
    """
    Draw one correlated downlink channel H = H_iid R^(1/2).

    Args:
        corr: Transmit correlation model.
        m: Number of single-antenna users.
        rng: Random stream.

    Returns:
        ChannelRealization with both H and the underlying i.i.d. draw.

    Raises:
        ConfigError: If m is not a positive integer.
    """
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ConfigError(f"Number of users must be a positive integer, got {m!r}")
    if m > corr.n_antennas:
        logger.debug("Sampling %d users for %d antennas (beta > 1)", m, corr.n_antennas)
    h_iid = complex_gaussian(rng, (int(m), corr.n_antennas))
    h = h_iid if corr.is_identity else h_iid @ corr.sqrt_matrix
    return ChannelRealization(h=h, h_iid=h_iid, n_antennas=corr.n_antennas, n_users=int(m), nu=corr.nu)
