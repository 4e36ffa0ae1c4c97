"""Tests for the invariant suite."""

import math
from unittest.mock import patch

import pytest

from quantized_mimo import run_checks
from quantized_mimo.constants import DEFAULT_SEED
from quantized_mimo.verify import (
    BETA_CLOSED_FORM_SNRS,
    CHECKS,
    check_beta_closed_form,
    check_large_system_limits,
    check_toeplitz_closed_forms,
)


def test_fast_checks_pass():
    """Test that the analytic checks pass at the default seed."""
    report = run_checks(only=['distortion_table', 'distortion_monotone', 'optimal_rho_values',
                              'rate_loss_per_energy', 'beta_star_values', 'power_constraint'])
    assert report['passed'] is True
    assert [c['name'] for c in report['checks']][0] == 'distortion_table'


def test_closed_form_checks_pass():
    """Test the Toeplitz and user loading closed-form checks."""
    assert check_toeplitz_closed_forms(0)['passed']

    # Check that the user loading gap shrinks towards sqrt(2) - 1 as the SNR drops
    result = check_beta_closed_form(0)
    assert result['passed']
    gaps = [float(g) for g in result['detail'].split(': ')[1].split(', ')]
    assert len(gaps) == len(BETA_CLOSED_FORM_SNRS)
    assert gaps[-1] == pytest.approx(math.sqrt(2) - 1, abs=0.01)


def test_simulated_ordering_checks_pass():
    """Test the precoder ordering and BER checks at the default seed."""
    report = run_checks(only=['precoder_ordering', 'ber_error_floor', 'ber_correlated_ordering'])
    assert [c['name'] for c in report['checks']] == ['precoder_ordering', 'ber_error_floor', 'ber_correlated_ordering']
    assert report['passed'] is True


def test_large_system_limits_reports_both_deviations():
    """Test that the diag(P P^H) check reports the largest and the mean deviation."""
    result = check_large_system_limits(DEFAULT_SEED)
    assert result['passed']
    for key in ('nu=0.0', 'nu=0.5'):
        assert result['value'][key]['diag_max'] >= result['value'][key]['diag_mean']

    # Check that the uncorrelated case bounds the largest deviation
    assert result['value']['nu=0.0']['diag_max'] < 0.1


def test_corrupted_distortion_table_fails():
    """Test that a corrupted distortion table is caught."""
    with patch.dict('quantized_mimo.constants.DISTORTION_TABLE', {3: 0.05}):
        report = run_checks(only=['distortion_table'])

    # Check that the failing bit depth is named
    assert report['passed'] is False
    assert "3" in report['checks'][0]['detail']


def test_failing_check_is_reported():
    """Test that a check that raises is reported as failed."""
    with patch.dict(CHECKS, {'power_constraint': lambda seed: 1 / 0}):
        report = run_checks(only=['power_constraint'])
    assert report['passed'] is False
    assert "Something went wrong with power_constraint check" in report['checks'][0]['detail']


def test_unknown_check():
    """Test that unknown check names are rejected."""
    with pytest.raises(KeyError):
        run_checks(only=['no_such_check'])


def test_reports_are_reproducible():
    """Test that equal seeds give equal reports."""
    only = ['power_constraint', 'distortion_table']
    assert run_checks(seed=3, only=only) == run_checks(seed=3, only=only)
