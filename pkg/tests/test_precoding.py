"""Tests for the linear precoders and regularization policies."""

import math

import numpy as np
import pytest

from quantized_mimo import (
    ConfigError,
    PrecoderSpec,
    RhoPolicies,
    SingularChannelError,
    build_precoder,
    conventional_rho,
    exp_toeplitz,
    optimal_rho,
    sample_channel,
)
from quantized_mimo.constants import MRC_RHO, ZF_RHO, PrecoderKinds
from quantized_mimo.precoding import equivalent_snr, exact_siqnr, policy_precoder, policy_rho
from quantized_mimo.utils import db_to_linear


@pytest.fixture
def channel():
    return sample_channel(exp_toeplitz(32, 0.5), 8, np.random.default_rng(5))


@pytest.mark.parametrize("spec", [
    PrecoderSpec.rzf(0.3 * 32, 4.0),
    PrecoderSpec.zf(4.0),
    PrecoderSpec.mrc(4.0),
])
def test_power_constraint(channel, spec):
    """Test that every precoder meets the trace power budget."""
    system = build_precoder(channel, spec)
    assert np.real(np.vdot(system.p, system.p)) == pytest.approx(4.0, rel=1e-12)
    assert system.p.shape == (32, 8)

    # Check that the diagonal of P P^H sums to the budget
    assert np.sum(system.p_diag) == pytest.approx(4.0, rel=1e-12)


def test_zero_forcing_removes_interference(channel):
    """Test that ZF diagonalizes the effective channel."""
    system = build_precoder(channel, PrecoderSpec.zf(1.0))
    np.testing.assert_allclose(system.effective_channel, system.c * np.eye(8), atol=1e-10)


def test_rzf_limits(channel):
    """Test that RZF approaches ZF and MRC at the regularization limits."""
    h = channel.h
    zf = build_precoder(h, PrecoderSpec.zf(1.0)).p
    mrc = build_precoder(h, PrecoderSpec.mrc(1.0)).p

    # Check the small and large regularization limits
    np.testing.assert_allclose(build_precoder(h, PrecoderSpec.rzf(1e-9, 1.0)).p, zf, atol=1e-6)
    np.testing.assert_allclose(build_precoder(h, PrecoderSpec.rzf(1e9, 1.0)).p, mrc, atol=1e-6)


def test_rzf_matches_direct_inverse(channel):
    """Test the push-through evaluation against the N x N inverse."""
    h = channel.h
    alpha = 2.5
    direct = np.linalg.solve(h.conj().T @ h + alpha * np.eye(32), h.conj().T)
    direct *= math.sqrt(3.0 / np.real(np.vdot(direct, direct)))
    system = build_precoder(h, PrecoderSpec.rzf(alpha, 3.0))
    np.testing.assert_allclose(system.p, direct, atol=1e-10)


def test_zero_forcing_singular_channel():
    """Test that a rank-deficient channel is rejected by ZF."""
    row = np.random.default_rng(0).standard_normal(16) + 0j
    h = np.vstack([row, row, 2 * row])
    with pytest.raises(SingularChannelError):
        build_precoder(h, PrecoderSpec.zf(1.0))


def test_precoder_spec_validation():
    """Test precoder spec argument checks."""
    with pytest.raises(ConfigError):
        PrecoderSpec.rzf(-1.0, 1.0)
    with pytest.raises(ConfigError):
        PrecoderSpec.zf(0.0)


@pytest.mark.parametrize("beta, snr_db, rho_da, expected", [
    (0.5, 15.0, 0.3634, 0.3103),
    (0.5, 5.0, 0.009497, 0.1644),
    (0.25, 5.0, 0.3634, 0.2669),
    (0.25, 2.0, 0.3634, 0.3905),
])
def test_optimal_rho_values(beta, snr_db, rho_da, expected):
    """Test the optimal regularization against quoted values."""
    assert optimal_rho(beta, db_to_linear(snr_db), rho_da) == pytest.approx(expected, abs=5e-4)


def test_optimal_rho_without_dac_distortion():
    """Test that ideal DACs recover the conventional regularization."""
    assert optimal_rho(0.4, 3.0, 0.0) == pytest.approx(conventional_rho(0.4, 3.0))
    assert equivalent_snr(3.0, 0.0) == pytest.approx(3.0)

    # Check that coarser DACs raise the optimal regularization
    assert optimal_rho(0.4, 3.0, 0.3634) > optimal_rho(0.4, 3.0, 0.1175) > optimal_rho(0.4, 3.0, 0.0)


def test_equivalent_snr_invalid():
    """Test argument checks of the equivalent SNR."""
    with pytest.raises(ConfigError):
        equivalent_snr(1.0, 1.0)
    with pytest.raises(ConfigError):
        equivalent_snr(0.0, 0.1)


def test_policy_rho():
    """Test the policy to regularization mapping."""
    assert policy_rho(RhoPolicies.OPTIMAL, 0.5, 10.0, 0.1) == pytest.approx(optimal_rho(0.5, 10.0, 0.1))
    assert policy_rho(RhoPolicies.CONVENTIONAL, 0.5, 10.0, 0.1) == pytest.approx(0.05)
    assert policy_rho(RhoPolicies.ZF, 0.5, 10.0, 0.1) == ZF_RHO
    assert policy_rho(RhoPolicies.MRC, 0.5, 10.0, 0.1) == MRC_RHO
    with pytest.raises(ConfigError):
        policy_rho("bogus", 0.5, 10.0, 0.1)


def test_policy_precoder():
    """Test that policies build the expected precoder kinds."""
    spec = policy_precoder(RhoPolicies.CONVENTIONAL, 64, 0.5, 10.0, 0.1, 10.0)
    assert spec.kind == PrecoderKinds.RZF
    assert spec.alpha == pytest.approx(0.05 * 64)
    assert policy_precoder(RhoPolicies.ZF, 64, 0.5, 10.0, 0.1, 10.0).kind == PrecoderKinds.ZF
    assert policy_precoder(RhoPolicies.MRC, 64, 0.5, 10.0, 0.1, 10.0).kind == PrecoderKinds.MRC


def test_exact_siqnr_zero_forcing(channel):
    """Test that unquantized ZF gives SIQNR c^2 / sigma^2 for every user."""
    system = build_precoder(channel, PrecoderSpec.zf(10.0))
    siqnr = exact_siqnr(system, 0.0, 0.0, 1.0)
    np.testing.assert_allclose(siqnr, np.full(8, system.c ** 2), rtol=1e-9)


def test_exact_siqnr_quantization_loss(channel):
    """Test that converter distortion lowers the SIQNR."""
    system = build_precoder(channel, PrecoderSpec.rzf(0.2 * 32, 10.0))
    ideal = exact_siqnr(system, 0.0, 0.0, 1.0)
    quantized = exact_siqnr(system, 0.3634, 0.03454, 1.0)
    assert np.all(quantized < ideal)
    assert np.all(quantized > 0)


def test_exact_siqnr_invalid():
    """Test argument checks of the per-realization SIQNR."""
    channel = sample_channel(exp_toeplitz(8, 0.0), 2, np.random.default_rng(0))
    system = build_precoder(channel, PrecoderSpec.mrc(1.0))
    with pytest.raises(ConfigError):
        exact_siqnr(system, 1.0, 0.0, 1.0)
    with pytest.raises(ConfigError):
        exact_siqnr(system, 0.0, 0.0, 0.0)
