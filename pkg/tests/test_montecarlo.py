"""Tests for the Monte-Carlo engine."""

import math

import numpy as np
import pytest

from quantized_mimo import (
    ConfigError,
    RhoPolicies,
    SystemConfig,
    check_large_system_convergence,
    simulate_ber,
    simulate_siqnr,
)
from quantized_mimo.constants import Backends
from quantized_mimo.montecarlo import qpsk_demodulate, qpsk_modulate


def test_qpsk_mapping():
    """Test Gray-mapped QPSK and its detector."""
    bits = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    symbols = qpsk_modulate(bits)

    # Check unit energy and the quadrant of each symbol
    np.testing.assert_allclose(np.abs(symbols), np.ones(4))
    np.testing.assert_allclose(symbols * math.sqrt(2), [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    np.testing.assert_array_equal(qpsk_demodulate(symbols), bits)


def test_simulate_siqnr_matches_asymptotics():
    """Test that the finite-size average tracks the deterministic equivalent."""
    config = SystemConfig(n_antennas=128, n_users=32, gamma0_db=10.0, b_da=1, b_ad=3, nu=0.5,
                          trials=50, seed=3)
    report = simulate_siqnr(config)

    # Check the report bookkeeping
    assert report.trials == 50
    assert report.seed == 3
    assert report.siqnr_std_err > 0

    # Check that the average is within a few percent of the limit
    assert report.relative_gap < 0.05
    assert report.mean_rate == pytest.approx(report.asymptotic_reference.rate, rel=0.05)


def test_simulate_siqnr_explicit_rho():
    """Test that an explicit regularization overrides the policy."""
    config = SystemConfig(n_antennas=64, n_users=16, gamma0_db=5.0, b_da=2, trials=20, seed=4)
    report = simulate_siqnr(config, rho=1.5)
    assert report.asymptotic_reference.point.rho == 1.5
    assert report.mean_siqnr != simulate_siqnr(config).mean_siqnr


def test_simulate_siqnr_reproducible():
    """Test that equal seeds reproduce the same report and workers do not change it."""
    config = SystemConfig(n_antennas=32, n_users=8, gamma0_db=5.0, b_da=1, b_ad=3, trials=6, seed=9)
    first = simulate_siqnr(config)
    second = simulate_siqnr(config)
    assert first.mean_siqnr == second.mean_siqnr

    # Check that the process pool gives the same numbers
    parallel = simulate_siqnr(config, workers=2)
    assert parallel.mean_siqnr == pytest.approx(first.mean_siqnr, rel=1e-12)


@pytest.mark.parametrize("policy", [RhoPolicies.ZF, RhoPolicies.MRC, RhoPolicies.CONVENTIONAL])
def test_simulate_siqnr_policies(policy):
    """Test that every policy runs and stays close to its limit."""
    config = SystemConfig(n_antennas=128, n_users=32, gamma0_db=5.0, b_da=1, b_ad=3, policy=policy,
                          trials=40, seed=6)
    report = simulate_siqnr(config)
    assert report.relative_gap < 0.1


def test_simulate_ber_error_floor():
    """Test that coarse converters leave a BER floor and fine ones do not."""
    coarse = SystemConfig(n_antennas=64, n_users=16, gamma0_db=20.0, b_da=1, b_ad=3, trials=10, seed=1)
    ideal = SystemConfig(n_antennas=64, n_users=16, gamma0_db=20.0, trials=10, seed=1)

    coarse_report = simulate_ber(coarse, n_symbols=2000)
    ideal_report = simulate_ber(ideal, n_symbols=2000)

    # Check the bit accounting: 2 bits per symbol per user
    assert coarse_report.n_bits == 2 * 16 * 2000
    assert ideal_report.ber < coarse_report.ber
    assert 0.0 < coarse_report.ber < 0.5
    assert coarse_report.ber_std_err > 0


def test_simulate_ber_surrogate_backend():
    """Test that the Bussgang backend agrees in order of magnitude with the hard backend."""
    config = SystemConfig(n_antennas=64, n_users=32, gamma0_db=5.0, b_da=1, b_ad=3, trials=10, seed=2)
    hard = simulate_ber(config, n_symbols=4000, backend=Backends.HARD)
    surrogate = simulate_ber(config, n_symbols=4000, backend=Backends.SURROGATE)
    assert surrogate.ber == pytest.approx(hard.ber, rel=0.5)


def test_simulate_ber_fewer_symbols_than_trials():
    """Test that realizations without data symbols are skipped."""
    config = SystemConfig(n_antennas=16, n_users=4, gamma0_db=10.0, b_da=2, trials=8, seed=0)
    report = simulate_ber(config, n_symbols=3)
    assert report.n_bits == 2 * 4 * 3


def test_simulate_ber_invalid_arguments():
    """Test argument checks of the BER simulation."""
    config = SystemConfig(n_antennas=16, n_users=4, gamma0_db=10.0, b_da=1, trials=2)
    with pytest.raises(ConfigError):
        simulate_ber(config, n_symbols=0)
    with pytest.raises(ConfigError):
        simulate_ber(config, backend="analog")

    # Check that the hard backend needs a codebook for every finite bit depth
    with pytest.raises(ConfigError):
        simulate_ber(SystemConfig(n_antennas=16, n_users=4, gamma0_db=10.0, b_da=12, trials=2), n_symbols=10)


def test_large_system_convergence():
    """Test the finite-size quantities behind the large-system limits."""
    config = SystemConfig(n_antennas=256, n_users=64, gamma0_db=10.0, b_da=2, trials=80, seed=8)
    report = check_large_system_convergence(config)
    assert report.quadratic_form_gap < 0.05
    assert report.diag_max_deviation < 0.1
    assert report.c_squared_gap < 0.05
    assert report.trials == 80


def test_large_system_convergence_correlated():
    """Test diag(P P^H) under correlation, where edge antennas keep a finite-size offset."""
    config = SystemConfig(n_antennas=256, n_users=64, gamma0_db=10.0, b_da=2, nu=0.5, trials=40, seed=8)
    report = check_large_system_convergence(config)
    assert report.diag_mean_deviation < 0.1
    assert report.quadratic_form_gap < 0.05


def test_large_system_convergence_needs_rzf():
    """Test that ZF and MRC policies are rejected."""
    config = SystemConfig(n_antennas=16, n_users=4, gamma0_db=10.0, policy=RhoPolicies.ZF, trials=2)
    with pytest.raises(ConfigError):
        check_large_system_convergence(config)


def _policy_reports(snr, **overrides):
    reports = {}
    for policy in (RhoPolicies.OPTIMAL, RhoPolicies.CONVENTIONAL, RhoPolicies.ZF, RhoPolicies.MRC):
        config = SystemConfig(**{'n_antennas': 256, 'n_users': 64, 'gamma0_db': snr, 'b_da': 1, 'b_ad': 3,
                                 'nu': 0.5, 'policy': policy, 'trials': 20, 'seed': 12, **overrides})
        reports[policy] = simulate_siqnr(config)
    return reports


@pytest.mark.parametrize("snr", [-20.0, 20.0])
def test_optimal_rzf_leads_other_precoders(snr):
    """Test that optimal RZF has the highest simulated rate, up to two standard errors."""
    reports = _policy_reports(snr)
    best = reports[RhoPolicies.OPTIMAL]
    for policy in (RhoPolicies.CONVENTIONAL, RhoPolicies.ZF, RhoPolicies.MRC):
        slack = 2 * math.hypot(best.mean_rate_std_err, reports[policy].mean_rate_std_err)
        assert reports[policy].mean_rate <= best.mean_rate + slack


def test_mrc_matches_optimal_rzf_at_low_snr():
    """Test that MRC nearly reaches optimal RZF at low SNR, where the ZF loss is widest."""
    low, high = _policy_reports(-20.0), _policy_reports(20.0)
    optimal = low[RhoPolicies.OPTIMAL].mean_rate
    assert low[RhoPolicies.MRC].mean_rate == pytest.approx(optimal, rel=0.05)

    # Check that ZF loses more at low SNR than at high SNR
    zf_low = 1 - low[RhoPolicies.ZF].mean_rate / optimal
    zf_high = 1 - high[RhoPolicies.ZF].mean_rate / high[RhoPolicies.OPTIMAL].mean_rate
    assert zf_low > zf_high


def test_ber_floor_with_one_bit_dacs():
    """Test that 1-bit DACs flatten the BER between 20 and 30 dB."""
    bers = {}
    for snr in (20.0, 30.0):
        config = SystemConfig(n_antennas=64, n_users=32, gamma0_db=snr, b_da=1, b_ad=3, trials=10, seed=5)
        bers[snr] = simulate_ber(config, n_symbols=4000).ber
    assert bers[30.0] > 0.5 * bers[20.0]


def test_ber_optimal_rzf_under_strong_correlation():
    """Test that optimal RZF BER does not exceed conventional RZF BER at nu = 0.8."""
    reports = {}
    for policy in (RhoPolicies.OPTIMAL, RhoPolicies.CONVENTIONAL):
        config = SystemConfig(n_antennas=64, n_users=32, gamma0_db=10.0, b_da=1, b_ad=3, nu=0.8, policy=policy,
                              trials=10, seed=5)
        reports[policy] = simulate_ber(config, n_symbols=4000)
    optimal, conventional = reports[RhoPolicies.OPTIMAL], reports[RhoPolicies.CONVENTIONAL]
    assert optimal.ber <= conventional.ber + 2 * math.hypot(optimal.ber_std_err, conventional.ber_std_err)


def test_reference_inside_error_band_across_seeds():
    """Test that the deterministic equivalent falls in the 3 standard error band for most seeds."""
    inside = 0
    for seed in range(20):
        config = SystemConfig(n_antennas=256, n_users=64, gamma0_db=10.0, b_da=1, b_ad=3, nu=0.5,
                              trials=10, seed=seed)
        report = simulate_siqnr(config)
        if abs(report.mean_siqnr - report.asymptotic_reference.gamma) <= 3 * report.siqnr_std_err:
            inside += 1
    assert inside >= 18


def test_gap_shrinks_with_antennas():
    """Test that the finite-size gap trends down as N doubles at fixed loading."""
    gaps = []
    for n in (32, 64, 128, 256):
        config = SystemConfig(n_antennas=n, n_users=n // 4, gamma0_db=10.0, b_da=1, b_ad=3, nu=0.5,
                              trials=200, seed=21)
        gaps.append(simulate_siqnr(config).relative_gap)

    # Check the trend end to end rather than every step
    assert gaps[-1] < 0.5 * gaps[0]
    assert min(gaps[2:]) < gaps[0]
