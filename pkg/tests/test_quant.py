"""Tests for distortion factors, Lloyd-Max codebooks and the Bussgang surrogates."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from quantized_mimo import ConfigError, QuantizerModel, distortion_factor, lloyd_max_codebook
from quantized_mimo.constants import DISTORTION_TABLE, HIGH_RES_COEFF
from quantized_mimo.quant import bussgang_adc, bussgang_dac, codebook_mse, quantize_hard


def test_distortion_table_values():
    """Test the tabulated distortion factors."""
    # Check that the table entries are returned unchanged
    assert distortion_factor(1) == 0.3634
    assert distortion_factor(2) == 0.1175
    assert distortion_factor(3) == 0.03454
    assert distortion_factor(4) == 0.009497
    assert distortion_factor(5) == 0.002499

    # Check that an ideal converter has no distortion
    assert distortion_factor(math.inf) == 0.0


def test_distortion_high_resolution():
    """Test the high-resolution approximation past the table."""
    assert distortion_factor(6) == pytest.approx(HIGH_RES_COEFF * 2.0 ** -12)
    assert distortion_factor(6) < distortion_factor(5)


def test_distortion_monotone():
    """Test that distortion strictly decreases with the bit depth."""
    values = [distortion_factor(b) for b in range(1, 13)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(0.0 < v < 1.0 for v in values)


@pytest.mark.parametrize("bits", [0, -1, 1.5, True])
def test_distortion_invalid_bits(bits):
    """Test that invalid bit depths are rejected."""
    with pytest.raises(ConfigError):
        distortion_factor(bits)


def test_lloyd_max_one_bit():
    """Test the 1-bit codebook against its analytic form."""
    model = lloyd_max_codebook(1)

    # Check that the levels are +/- sqrt(2/pi) with a zero threshold
    np.testing.assert_allclose(model.levels, [-math.sqrt(2 / math.pi), math.sqrt(2 / math.pi)], atol=1e-10)
    np.testing.assert_allclose(model.thresholds, [0.0], atol=1e-12)
    assert model.mse == pytest.approx(1 - 2 / math.pi, abs=1e-10)


@pytest.mark.parametrize("bits", [1, 2, 3, 4, 5])
def test_lloyd_max_matches_table(bits):
    """Test that the codebook MSE reproduces the distortion table."""
    model = lloyd_max_codebook(bits)

    # Check the codebook shape and symmetry
    assert len(model.levels) == 2 ** bits
    assert len(model.thresholds) == 2 ** bits - 1
    np.testing.assert_allclose(model.levels, -model.levels[::-1], atol=1e-12)

    # Check that the MSE is the tabulated distortion factor
    assert model.mse == pytest.approx(DISTORTION_TABLE[bits], abs=1e-3)
    assert model.rho == DISTORTION_TABLE[bits]


@pytest.mark.parametrize("bits", [1, 2, 3])
def test_codebook_mse_matches_samples(bits):
    """Test the exact codebook MSE against a Monte-Carlo estimate."""
    model = lloyd_max_codebook(bits)
    assert codebook_mse(model.levels, model.thresholds) == pytest.approx(model.mse, rel=1e-12)

    # Check the empirical error of each real dimension
    rng = np.random.default_rng(11)
    signal = rng.standard_normal(400_000) + 1j * rng.standard_normal(400_000)
    error = quantize_hard(signal, model) - signal
    assert np.mean(error.real ** 2) == pytest.approx(model.mse, abs=1.5e-3)
    assert np.mean(error.imag ** 2) == pytest.approx(model.mse, abs=1.5e-3)


def test_lloyd_max_large_codebook():
    """Test that 8-bit codebooks converge and follow the high-resolution law."""
    model = lloyd_max_codebook(8)
    assert np.all(np.diff(model.levels) > 0)
    assert model.mse == pytest.approx(HIGH_RES_COEFF * 2.0 ** -16, rel=0.1)


def test_lloyd_max_read_only():
    """Test that cached codebooks cannot be modified."""
    model = lloyd_max_codebook(2)
    with pytest.raises(ValueError):
        model.levels[0] = 0.0

    # Check that the codebook pairs start at -inf
    assert model.codebook[0][0] == -math.inf


@pytest.mark.parametrize("bits", [0, 9])
def test_lloyd_max_out_of_range(bits):
    """Test that unsupported bit depths are rejected."""
    with pytest.raises(ConfigError):
        lloyd_max_codebook(bits)


def test_bussgang_dac_statistics():
    """Test the DAC surrogate gain and noise variance."""
    rng = np.random.default_rng(1)
    p_diag = np.array([1.0, 4.0])
    x = np.ones((2, 200_000), dtype=complex)
    out = bussgang_dac(x, 0.3634, p_diag, rng)

    # Check the linear gain and the per-antenna noise variance
    noise = out - math.sqrt(1 - 0.3634) * x
    assert np.mean(noise) == pytest.approx(0.0, abs=0.02)
    np.testing.assert_allclose(np.var(noise, axis=1), 0.3634 * p_diag, rtol=0.02)


def test_bussgang_adc_statistics():
    """Test the ADC surrogate gain and noise variance."""
    rng = np.random.default_rng(2)
    y = np.zeros(400_000, dtype=complex)
    out = bussgang_adc(y, 0.1175, np.full(400_000, 2.0), rng)
    assert np.var(out) == pytest.approx(0.1175 * (1 - 0.1175) * 2.0, rel=0.02)


def test_bussgang_rejects_invalid_inputs():
    """Test argument validation of the surrogates."""
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        bussgang_dac(np.ones(2), 1.0, np.ones(2), rng)
    with pytest.raises(ConfigError):
        bussgang_dac(np.ones(2), 0.1, -np.ones(2), rng)
    with pytest.raises(ConfigError):
        bussgang_adc(np.ones(2), -0.1, np.ones(2), rng)


def test_quantize_hard_levels():
    """Test that hard quantization maps onto scaled codebook levels."""
    rng = np.random.default_rng(3)
    model = lloyd_max_codebook(2)
    signal = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    out = quantize_hard(signal, model)

    # Check that each real dimension takes at most 2^b distinct values
    assert len(np.unique(np.round(out.real, 12))) <= 4
    assert len(np.unique(np.round(out.imag, 12))) <= 4

    # Check that the quantizer output keeps the signs
    assert np.all(np.sign(out.real) == np.sign(signal.real))


def test_quantize_hard_zero_and_missing_codebook():
    """Test the all-zero input and a model without a codebook."""
    model = lloyd_max_codebook(1)
    np.testing.assert_array_equal(quantize_hard(np.zeros(4, dtype=complex), model), np.zeros(4))

    with pytest.raises(ConfigError):
        quantize_hard(np.ones(4), QuantizerModel(bits=1, rho=0.3634))


@pytest.mark.parametrize("bits", [1, 2, 3, 4, 5])
def test_lloyd_max_stationarity(bits):
    """Test that every level is the conditional mean of its cell."""
    model = lloyd_max_codebook(bits)
    for lower, upper, level in zip(np.concatenate(([-np.inf], model.thresholds)),
                                   np.concatenate((model.thresholds, [np.inf])), model.levels):
        mass = integrate.quad(stats.norm.pdf, lower, upper, epsabs=1e-15, epsrel=1e-13)[0]
        first = integrate.quad(lambda x: x * stats.norm.pdf(x), lower, upper, epsabs=1e-15, epsrel=1e-13)[0]
        assert first / mass == pytest.approx(level, abs=1e-8)


def test_codebook_mse_open_cells_are_quiet():
    """Test that the infinite outer cell edges do not produce invalid values."""
    model = lloyd_max_codebook(3)
    with np.errstate(invalid='raise'):
        mse = codebook_mse(model.levels, model.thresholds)
    assert math.isfinite(mse)


def test_hard_one_bit_bussgang_gain():
    """Test that the power-normalized 1-bit hard quantizer has the linear gain sqrt(1 - rho)."""
    rng = np.random.default_rng(4)
    signal = rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)
    out = quantize_hard(signal, lloyd_max_codebook(1))
    gain = np.real(np.vdot(signal, out)) / np.real(np.vdot(signal, signal))

    # Check the raw codebook gain 1 - rho and the unit-power output as transmitted by the DACs
    assert gain == pytest.approx(1 - 0.3634, abs=0.01)
    assert gain / math.sqrt(1 - 0.3634) == pytest.approx(math.sqrt(1 - 0.3634), abs=0.01)
    assert np.mean(np.abs(out) ** 2) / (1 - 0.3634) == pytest.approx(np.mean(np.abs(signal) ** 2), rel=0.01)


def test_surrogate_noise_uncorrelated_with_signal():
    """Test that the surrogate DAC and ADC noise is uncorrelated with the input."""
    rng = np.random.default_rng(6)
    trials = 100_000
    x = (rng.standard_normal((2, trials)) + 1j * rng.standard_normal((2, trials))) / math.sqrt(2)

    dac_noise = bussgang_dac(x, 0.3634, np.ones(2), rng) - math.sqrt(1 - 0.3634) * x
    adc_noise = bussgang_adc(x, 0.1175, np.ones(2), rng) - (1 - 0.1175) * x

    # Check the normalized sample cross-correlation per antenna and per user
    for noise in (dac_noise, adc_noise):
        cross = np.abs(np.sum(noise * x.conj(), axis=1)) / np.sqrt(
            np.sum(np.abs(noise) ** 2, axis=1) * np.sum(np.abs(x) ** 2, axis=1))
        assert np.all(cross < 3 / math.sqrt(trials))
