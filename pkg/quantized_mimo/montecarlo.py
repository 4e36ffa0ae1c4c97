"""Finite-size Monte-Carlo engine: empirical SIQNR, QPSK bit error rate and large-system diagnostics."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .asymptotics import asymptotic_siqnr, c_squared_limit, solve_xi_toeplitz
from .channel import CorrelationModel, exp_toeplitz, sample_channel
from .constants import DEFAULT_SYMBOLS, NOISE_VAR, PILOT_LENGTH, ZF_RESAMPLE_CAP, Backends, RhoPolicies
from .errors import ConfigError, SingularChannelError
from .precoding import build_precoder, exact_siqnr, policy_precoder, policy_rho
from .quant import bussgang_adc, bussgang_dac, lloyd_max_codebook, quantize_hard
from .types import LargeSystemDiagnostics, MonteCarloReport, PrecodedSystem, PrecoderSpec, SystemConfig
from .utils import complex_gaussian, spawn_streams

logger = logging.getLogger(__name__)

# BER standard error above this fraction of the estimate is reported as imprecise
BER_PRECISION_TARGET = 0.1

_QPSK_SCALE = 1.0 / math.sqrt(2.0)


@lru_cache(maxsize=16)
def _correlation(n_antennas: int, nu: float) -> CorrelationModel:
    return exp_toeplitz(n_antennas, nu)


def _map_trials(func: Callable, jobs: Sequence[Any], workers: int) -> List[Any]:
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _draw_system(config: SystemConfig, rng: np.random.Generator,
                 rho: Optional[float] = None) -> Tuple[PrecodedSystem, int]:
    """Draw a channel and precode it, redrawing singular draws up to the cap."""
    corr = _correlation(config.n_antennas, config.nu)
    if rho is None:
        spec = policy_precoder(config.policy, config.n_antennas, config.beta, config.gamma0, config.rho_da,
                               config.power)
    else:
        spec = PrecoderSpec.rzf(rho * config.n_antennas, config.power)
    for attempt in range(ZF_RESAMPLE_CAP + 1):
        channel = sample_channel(corr, config.n_users, rng)
        try:
            return build_precoder(channel, spec), attempt
        except SingularChannelError as e:
            logger.warning("Singular channel draw (%s); redrawing", e)
    raise SingularChannelError(f"Channel stayed singular after {ZF_RESAMPLE_CAP} redraws")


def _std_err(samples: np.ndarray) -> float:
    if samples.size < 2:
        return 0.0
    return float(np.std(samples, ddof=1) / math.sqrt(samples.size))


def _siqnr_trial(job: Tuple[SystemConfig, np.random.SeedSequence, Optional[float]]) -> Tuple[float, float, int]:
    config, seed, rho = job
    rng = np.random.default_rng(seed)
    system, resampled = _draw_system(config, rng, rho)
    siqnr = exact_siqnr(system, config.rho_da, config.rho_ad, NOISE_VAR)
    return float(np.mean(siqnr)), float(np.mean(np.log2(1.0 + siqnr))), resampled


def _reference(config: SystemConfig, rho: Optional[float] = None):
    if rho is None:
        rho = policy_rho(config.policy, config.beta, config.gamma0, config.rho_da)
    return asymptotic_siqnr(config.point(rho))


def simulate_siqnr(config: SystemConfig, workers: int = 1, rho: Optional[float] = None) -> MonteCarloReport:
    """
    Average the exact per-realization SIQNR over random channel draws.

    Trial i always draws from child i of the master seed, so the report
    does not depend on the number of workers.

    Args:
        config: Scenario, including trial count and seed.
        workers: Number of worker processes; 1 runs in-process.
        rho: Explicit normalized RZF regularization overriding the policy.

    Returns:
        MonteCarloReport with the deterministic equivalent attached.

    Raises:
        SingularChannelError: If a trial keeps drawing singular channels.
    """
    reference = _reference(config, rho)
    jobs = [(config, seed, rho) for seed in spawn_streams(config.seed, config.trials)]
    results = _map_trials(_siqnr_trial, jobs, workers)

    siqnr = np.array([r[0] for r in results])
    rate = np.array([r[1] for r in results])
    resampled = sum(r[2] for r in results)
    mean_siqnr = float(np.mean(siqnr))
    logger.debug("SIQNR over %d trials: %.6g (reference %.6g)", config.trials, mean_siqnr, reference.gamma)
    return MonteCarloReport(
        mean_siqnr=mean_siqnr,
        siqnr_std_err=_std_err(siqnr),
        mean_rate=float(np.mean(rate)),
        mean_rate_std_err=_std_err(rate),
        asymptotic_reference=reference,
        relative_gap=abs(mean_siqnr - reference.gamma) / reference.gamma if reference.gamma > 0 else math.inf,
        trials=config.trials,
        seed=config.seed,
        resampled=resampled,
    )


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """
    Gray-mapped unit-energy QPSK.

    Args:
        bits: Integer array whose last axis has length 2.

    Returns:
        ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
    """
    bits = np.asarray(bits)
    return _QPSK_SCALE * ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1]))


def qpsk_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Nearest-neighbor QPSK decisions, returned as bits with a trailing axis of length 2."""
    symbols = np.asarray(symbols)
    return np.stack([symbols.real < 0, symbols.imag < 0], axis=-1).astype(np.int8)


def _dac_stage(x: np.ndarray, system: PrecodedSystem, config: SystemConfig, backend: str,
               rng: np.random.Generator) -> np.ndarray:
    rho_da = config.rho_da
    if rho_da == 0.0:
        return x
    if backend == Backends.SURROGATE:
        return bussgang_dac(x, rho_da, system.p_diag, rng)
    # per transmit vector scale; undo the Bussgang power loss
    return quantize_hard(x, lloyd_max_codebook(config.b_da), axis=0) / math.sqrt(1.0 - rho_da)


def _adc_stage(y: np.ndarray, system: PrecodedSystem, config: SystemConfig, backend: str,
               rng: np.random.Generator) -> np.ndarray:
    rho_ad = config.rho_ad
    if rho_ad == 0.0:
        return y
    if backend == Backends.SURROGATE:
        gains = np.abs(system.effective_channel) ** 2
        dac = (np.abs(system.channel.h) ** 2) @ (config.rho_da * system.p_diag)
        y_var = (1.0 - config.rho_da) * np.sum(gains, axis=1) + dac + NOISE_VAR
        return bussgang_adc(y, rho_ad, y_var, rng)
    return quantize_hard(y, lloyd_max_codebook(config.b_ad), axis=1)


def _ber_trial(job: Tuple[SystemConfig, np.random.SeedSequence, int, str]) -> Tuple[int, int, float, int]:
    config, seed, n_data, backend = job
    rng = np.random.default_rng(seed)
    system, resampled = _draw_system(config, rng)
    siqnr = float(np.mean(exact_siqnr(system, config.rho_da, config.rho_ad, NOISE_VAR)))
    if n_data == 0:
        return 0, 0, siqnr, resampled

    m = config.n_users
    bits = rng.integers(0, 2, size=(m, PILOT_LENGTH + n_data, 2))
    symbols = qpsk_modulate(bits)

    x = _dac_stage(system.p @ symbols, system, config, backend, rng)
    y = system.channel.h @ x + complex_gaussian(rng, (m, symbols.shape[1]), NOISE_VAR)
    r = _adc_stage(y, system, config, backend, rng)

    pilots = symbols[:, :PILOT_LENGTH]
    gain = np.sum(r[:, :PILOT_LENGTH] * pilots.conj(), axis=1) / np.sum(np.abs(pilots) ** 2, axis=1)
    safe = np.where(gain != 0, gain, 1.0)
    decided = qpsk_demodulate(r[:, PILOT_LENGTH:] / safe[:, np.newaxis])
    errors = int(np.count_nonzero(decided != bits[:, PILOT_LENGTH:]))
    return errors, decided.size, siqnr, resampled


def _check_backend(config: SystemConfig, backend: str) -> None:
    if backend not in Backends.ALL:
        raise ConfigError(f"Unknown quantization backend: {backend!r}")
    if backend == Backends.HARD:
        for name in ('b_da', 'b_ad'):
            bits = getattr(config, name)
            if math.isfinite(bits):
                lloyd_max_codebook(bits)


def _split(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def simulate_ber(config: SystemConfig, n_symbols: int = DEFAULT_SYMBOLS, backend: str = Backends.HARD,
                 workers: int = 1) -> MonteCarloReport:
    """
    Uncoded QPSK bit error rate through the quantized downlink.

    Each user's n_symbols data symbols are split evenly over the channel
    realizations. Every realization sends a known QPSK preamble used to
    estimate a per-user scalar gain by least squares before symbol-wise
    nearest-neighbor detection.

    Args:
        config: Scenario, including trial count and seed.
        n_symbols: Data symbols per user in total.
        backend: Backends.HARD (Lloyd-Max quantizers) or Backends.SURROGATE (Bussgang model).
        workers: Number of worker processes; 1 runs in-process.

    Returns:
        MonteCarloReport with ber, ber_std_err and n_bits filled in.

    Raises:
        ConfigError: If n_symbols is not positive, the backend is unknown or
            the hard backend has no codebook for a bit depth.
    """
    if isinstance(n_symbols, bool) or int(n_symbols) != n_symbols or n_symbols < 1:
        raise ConfigError(f"n_symbols must be a positive integer, got {n_symbols!r}")
    _check_backend(config, backend)

    reference = _reference(config)
    seeds = spawn_streams(config.seed, config.trials)
    jobs = [(config, seed, count, backend) for seed, count in zip(seeds, _split(int(n_symbols), config.trials))]
    results = _map_trials(_ber_trial, jobs, workers)

    errors = sum(r[0] for r in results)
    n_bits = sum(r[1] for r in results)
    siqnr = np.array([r[2] for r in results])
    resampled = sum(r[3] for r in results)
    ber = errors / n_bits
    ber_std_err = math.sqrt(ber * (1.0 - ber) / n_bits)
    if ber == 0.0 or ber_std_err > BER_PRECISION_TARGET * ber:
        logger.warning("BER %.3e from %d bits is below the precision target; raise n_symbols", ber, n_bits)

    mean_siqnr = float(np.mean(siqnr))
    rate = np.log2(1.0 + siqnr)
    return MonteCarloReport(
        mean_siqnr=mean_siqnr,
        siqnr_std_err=_std_err(siqnr),
        mean_rate=float(np.mean(rate)),
        mean_rate_std_err=_std_err(rate),
        asymptotic_reference=reference,
        relative_gap=abs(mean_siqnr - reference.gamma) / reference.gamma if reference.gamma > 0 else math.inf,
        trials=config.trials,
        seed=config.seed,
        resampled=resampled,
        ber=ber,
        ber_std_err=ber_std_err,
        n_bits=n_bits,
    )


def _large_system_trial(job: Tuple[SystemConfig, np.random.SeedSequence]) -> Tuple[float, np.ndarray, float]:
    config, seed = job
    rng = np.random.default_rng(seed)
    system, _ = _draw_system(config, rng)
    h, alpha = system.channel.h, system.spec.alpha

    # h_k^T (H_k^H H_k + a I)^-1 h_k^* = (1 - a g_kk) / (a g_kk) with g = (H H^H + a I)^-1
    gram = h @ h.conj().T + alpha * np.eye(h.shape[0])
    factor = linalg.cho_factor(gram, lower=True, check_finite=False)
    g_diag = np.real(np.diag(linalg.cho_solve(factor, np.eye(h.shape[0]), check_finite=False)))
    quadratic = (1.0 - alpha * g_diag) / (alpha * g_diag)
    return float(np.mean(quadratic)), system.p_diag, system.c ** 2


def check_large_system_convergence(config: SystemConfig, workers: int = 1) -> LargeSystemDiagnostics:
    """
    Compare finite-size RZF quantities with their large-system limits.

    Checks the leave-one-out quadratic form against xi, the trial-averaged
    diagonal of P P^H against P/N, and c^2 against its limit.

    Args:
        config: Scenario with an optimal or conventional policy.
        workers: Number of worker processes; 1 runs in-process.

    Returns:
        LargeSystemDiagnostics for the trial batch.

    Raises:
        ConfigError: If the policy does not build an RZF precoder.
    """
    if config.policy not in (RhoPolicies.OPTIMAL, RhoPolicies.CONVENTIONAL):
        raise ConfigError(f"Large-system diagnostics need an RZF policy, got {config.policy!r}")

    rho = policy_rho(config.policy, config.beta, config.gamma0, config.rho_da)
    xi, e12, e22 = solve_xi_toeplitz(rho, config.beta, config.nu)
    jobs = [(config, seed) for seed in spawn_streams(config.seed, config.trials)]
    results = _map_trials(_large_system_trial, jobs, workers)

    quadratic_mean = float(np.mean([r[0] for r in results]))
    target = config.power / config.n_antennas
    deviation = np.abs(np.mean([r[1] for r in results], axis=0) - target) / target
    c_squared_mean = float(np.mean([r[2] for r in results]))
    c_limit = c_squared_limit(config.power, config.beta, xi, e12, e22)
    return LargeSystemDiagnostics(
        xi=xi,
        quadratic_form_mean=quadratic_mean,
        quadratic_form_gap=abs(quadratic_mean - xi) / xi,
        diag_max_deviation=float(np.max(deviation)),
        diag_mean_deviation=float(np.mean(deviation)),
        c_squared_mean=c_squared_mean,
        c_squared_limit=c_limit,
        c_squared_gap=abs(c_squared_mean - c_limit) / c_limit,
        trials=config.trials,
    )
