"""Tests for the command-line interface."""

import json
from unittest.mock import patch

import pytest

from quantized_mimo.cli import main
from quantized_mimo.constants import EXIT_CONFIG_ERROR, EXIT_FAILURE, EXIT_OK


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_verify_subset(tmp_path, capsys):
    """Test the verify command with a check subset and a JSON report."""
    config = _write(tmp_path / 'verify.yml', "kind: verify\noptions:\n  checks: [distortion_table, power_constraint]\n")
    out = tmp_path / 'report.json'

    assert main(['verify', '--config', config, '--out', str(out), '--seed', '4']) == EXIT_OK

    # Check that stdout and the file carry the same report
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads(out.read_text())
    assert printed['seed'] == 4
    assert printed['passed'] is True


def test_verify_negative_control(tmp_path, capsys):
    """Test that a corrupted distortion table gives a nonzero exit status."""
    config = _write(tmp_path / 'verify.yml', "kind: verify\noptions:\n  checks: [distortion_table]\n")
    with patch.dict('quantized_mimo.constants.DISTORTION_TABLE', {3: 0.05}):
        assert main(['verify', '--config', config]) == EXIT_FAILURE
    assert json.loads(capsys.readouterr().out)['passed'] is False


def test_verify_output_is_byte_identical(tmp_path):
    """Test that two runs with the same seed write identical reports."""
    config = _write(tmp_path / 'verify.yml', "kind: verify\noptions:\n  checks: [power_constraint]\n")
    first, second = tmp_path / 'a.json', tmp_path / 'b.json'
    main(['verify', '--config', config, '--out', str(first)])
    main(['verify', '--config', config, '--out', str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_sweep_rho_command(tmp_path):
    """Test a sweep command writing a CSV."""
    config = _write(tmp_path / 'rho.yml', (
        "name: rho\n"
        "kind: sweep_rho\n"
        "base: {n_antennas: 64, n_users: 16, gamma0_db: 10, b_da: 1, b_ad: 3, nu: 0.5}\n"
        "sweep: {variable: rho, values: [0.1, 0.2, 0.4]}\n"
    ))
    out = tmp_path / 'rho.csv'
    assert main(['sweep-rho', '--config', config, '--out', str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 4
    assert (tmp_path / 'rho.csv.meta.json').exists()


def test_beta_table_without_config(tmp_path):
    """Test that the table command runs on built-in defaults."""
    out = tmp_path / 'table.csv'
    assert main(['beta-table', '--out', str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 2


def test_config_errors(tmp_path):
    """Test that configuration errors exit with status 2."""
    # Check a kind that does not match the subcommand
    config = _write(tmp_path / 'wrong.yml', "kind: verify\n")
    assert main(['sweep-rho', '--config', config]) == EXIT_CONFIG_ERROR

    # Check an unreadable file
    assert main(['sweep-beta', '--config', str(tmp_path / 'missing.yml')]) == EXIT_CONFIG_ERROR

    # Check an invalid worker count
    assert main(['beta-table', '--workers', '0']) == EXIT_CONFIG_ERROR


def test_missing_required_config():
    """Test that sweep commands need a config file."""
    with pytest.raises(SystemExit) as excinfo:
        main(['sweep-rho'])
    assert excinfo.value.code == 2
