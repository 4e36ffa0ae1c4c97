"""Experiment runner: YAML-described sweeps emitting tidy CSV plus a metadata sidecar."""

import asyncio
import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from . import __version__
from .asymptotics import (
    asymptotic_siqnr,
    optimal_beta_closed_form,
    optimal_beta_numeric,
    sum_rate_per_antenna,
)
from .constants import (
    BETA_TABLE_AXES,
    COLUMNS,
    DEFAULT_SEED,
    DEFAULT_SYMBOLS,
    FULL_SYMBOLS,
    FULL_TRIALS,
    METADATA_PATH,
    Backends,
    ExperimentKinds,
    RhoPolicies,
)
from .errors import ConfigError, ExperimentError
from .montecarlo import simulate_ber, simulate_siqnr
from .precoding import optimal_rho, policy_rho
from .quant import distortion_factor
from .types import AsymptoticPoint, ExperimentSpec, SweepAxis, SystemConfig
from .utils import db_to_linear, parse_bits, write_csv, write_json
from .verify import run_checks

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = {f.name for f in fields(SystemConfig)}

class Scenario:
    """A SystemConfig plus the large-system overrides of one sweep point."""

    def __init__(self, config: SystemConfig, beta: Optional[float] = None, rho: Optional[float] = None):
        """
        Initialize a scenario.

        Args:
            config: Finite-size scenario.
            beta: Exact user loading overriding n_users / n_antennas in the analysis.
            rho: Explicit normalized regularization.
        """
        self.config = config
        self.beta = config.beta if beta is None else beta
        self.rho = rho

    def assign(self, variable: str, value: Any) -> 'Scenario':
        """
        Return a copy with one variable set.

        Setting beta also sets n_users to the nearest integer for simulations.

        Raises:
            ConfigError: If the value is invalid for the variable.
        """
        if variable == 'rho':
            return Scenario(self.config, self.beta, float(value))
        if variable == 'beta':
            beta = float(value)
            users = max(1, min(self.config.n_antennas, int(round(beta * self.config.n_antennas))))
            return Scenario(replace(self.config, n_users=users), beta, self.rho)
        if variable not in _CONFIG_FIELDS:
            raise ConfigError(f"Cannot assign {variable!r} to a scenario")
        config = replace(self.config, **{variable: value})
        beta = self.beta if self.beta != self.config.beta else None
        return Scenario(config, beta, self.rho)

    def point(self, rho: Optional[float] = None) -> AsymptoticPoint:
        config = self.config
        return AsymptoticPoint(beta=self.beta, gamma0=config.gamma0, rho_da=config.rho_da, rho_ad=config.rho_ad,
                               nu=config.nu, eta=config.eta, rho=self.rho if rho is None else rho)

    def common_columns(self) -> Dict[str, Any]:
        config = self.config
        return {
            'gamma0_db': config.gamma0_db,
            'gamma0': config.gamma0,
            'beta': self.beta,
            'nu': config.nu,
            'rho_da': config.rho_da,
            'rho_ad': config.rho_ad,
        }


def _axis_columns(series: Optional[SweepAxis], series_value: Any, sweep: SweepAxis, sweep_value: Any) -> Dict[str, Any]:
    return {
        'series_variable': series.variable if series else None,
        'series_value': series_value,
        'sweep_variable': sweep.variable,
        'sweep_value': sweep_value,
    }


def _policies(spec: ExperimentSpec) -> List[str]:
    policies = spec.options.get('policies', [spec.base.policy])
    if isinstance(policies, str):
        policies = [policies]
    unknown = [p for p in policies if p not in RhoPolicies.ALL]
    if unknown or not policies:
        raise ConfigError(f"Unknown rho policies: {unknown}")
    return list(policies)


def _grid(spec: ExperimentSpec) -> List[Tuple[Any, Any, Scenario]]:
    """(series value, sweep value, scenario) triples in output order."""
    base = Scenario(spec.base)
    series_values = spec.series.values if spec.series else (None,)
    points = []
    for series_value in series_values:
        scenario = base.assign(spec.series.variable, series_value) if spec.series else base
        for sweep_value in spec.sweep.values:
            points.append((series_value, sweep_value, scenario.assign(spec.sweep.variable, sweep_value)))
    return points


def _monte_carlo_columns(report) -> Dict[str, Any]:
    return {
        'mc_mean_siqnr': report.mean_siqnr,
        'mc_std_err': report.siqnr_std_err,
        'mc_trials': report.trials,
    }


def _sweep_rho_row(spec: ExperimentSpec, scenario: Scenario, workers: int) -> Dict[str, Any]:
    solution = asymptotic_siqnr(scenario.point())
    config = scenario.config
    row = scenario.common_columns()
    row.update({
        'rho': solution.point.rho,
        'xi': solution.xi,
        'e12': solution.e12,
        'e22': solution.e22,
        'gamma': solution.gamma,
        'rate': solution.rate,
        'rho_star': optimal_rho(scenario.beta, config.gamma0, config.rho_da),
    })
    if spec.options.get('monte_carlo'):
        row.update(_monte_carlo_columns(simulate_siqnr(config, workers=workers, rho=solution.point.rho)))
    return row


def _sweep_beta_rows(spec: ExperimentSpec, scenario: Scenario, workers: int) -> List[Dict[str, Any]]:
    config = scenario.config
    rows = []
    for policy in _policies(spec):
        rho = policy_rho(policy, scenario.beta, config.gamma0, config.rho_da)
        solution = asymptotic_siqnr(scenario.point(rho))
        row = scenario.common_columns()
        row.update({
            'eta': config.eta,
            'policy': policy,
            'rho': rho,
            'xi': solution.xi,
            'gamma': solution.gamma,
            'rate': solution.rate,
            'sum_rate': solution.sum_rate_per_antenna,
            'rho_star': optimal_rho(scenario.beta, config.gamma0, config.rho_da),
        })
        if spec.options.get('optimize_beta', True):
            beta_star, best = optimal_beta_numeric(scenario.point(), policy)
            row.update({'beta_star': beta_star, 'sum_rate_max': best})
        rows.append(row)
    return rows


def _rate_vs_snr_rows(spec: ExperimentSpec, scenario: Scenario, workers: int) -> List[Dict[str, Any]]:
    config = scenario.config
    rows = []
    for policy in _policies(spec):
        rho = policy_rho(policy, scenario.beta, config.gamma0, config.rho_da)
        solution = asymptotic_siqnr(scenario.point(rho))
        row = scenario.common_columns()
        row.update({
            'policy': policy,
            'rho': rho,
            'rho_star': optimal_rho(scenario.beta, config.gamma0, config.rho_da),
            'gamma': solution.gamma,
            'rate': solution.rate,
        })
        if spec.options.get('monte_carlo'):
            report = simulate_siqnr(replace(config, policy=policy), workers=workers)
            row.update(_monte_carlo_columns(report))
            row.update({'mc_mean_rate': report.mean_rate, 'mc_rate_std_err': report.mean_rate_std_err})
        rows.append(row)
    return rows


def _ber_vs_snr_rows(spec: ExperimentSpec, scenario: Scenario, workers: int) -> List[Dict[str, Any]]:
    config = scenario.config
    backend = spec.options.get('backend', Backends.HARD)
    n_symbols = int(spec.options.get('n_symbols', DEFAULT_SYMBOLS))
    rows = []
    for policy in _policies(spec):
        report = simulate_ber(replace(config, policy=policy), n_symbols=n_symbols, backend=backend, workers=workers)
        row = scenario.common_columns()
        row.update({
            'policy': policy,
            'backend': backend,
            'rho': policy_rho(policy, scenario.beta, config.gamma0, config.rho_da),
            'ber': report.ber,
            'ber_std_err': report.ber_std_err,
            'n_bits': report.n_bits,
            'mc_mean_siqnr': report.mean_siqnr,
        })
        rows.append(row)
    return rows


def _mark_rho_argmax(rows: List[Dict[str, Any]]) -> None:
    by_series: Dict[Any, List[Dict[str, Any]]] = {}
    for row in rows:
        by_series.setdefault(repr(row['series_value']), []).append(row)
    for curve in by_series.values():
        best = max(curve, key=lambda r: r['gamma'])
        for row in curve:
            row['rho_argmax'] = best['rho']


def beta_table(grid: Mapping[str, Sequence[Any]], base: Optional[SystemConfig] = None) -> List[Dict[str, Any]]:
    """
    Lookup table of the optimal user loading over a parameter grid.

    Axes missing from the grid take their value from base (0 dB, 1-bit
    DACs, 3-bit ADCs, eta = 1, nu = 0 without a base). Rows follow the
    Cartesian product in gamma0_db, b_da, b_ad, eta, nu order.

    Args:
        grid: Mapping from axis name to the values to tabulate.
        base: Scenario supplying defaults for missing axes.

    Returns:
        Rows with the numeric and closed-form optimal loading and their sum rates.

    Raises:
        ConfigError: If an axis is unknown or empty.
    """
    unknown = set(grid) - set(BETA_TABLE_AXES)
    if unknown:
        raise ConfigError(f"Unknown beta table axes: {sorted(unknown)}")
    defaults = {'gamma0_db': 0.0, 'b_da': 1, 'b_ad': 3, 'eta': 1.0, 'nu': 0.0}
    if base is not None:
        defaults.update({axis: getattr(base, axis) for axis in BETA_TABLE_AXES})
    axes = []
    for axis in BETA_TABLE_AXES:
        values = grid.get(axis, [defaults[axis]])
        if not isinstance(values, (list, tuple)):
            values = [values]
        if not values:
            raise ConfigError(f"Beta table axis {axis!r} is empty")
        axes.append([parse_bits(v) for v in values] if axis in ('b_da', 'b_ad') else [float(v) for v in values])

    rows = []
    for gamma0_db, b_da, b_ad, eta, nu in itertools.product(*axes):
        gamma0, rho_da, rho_ad = db_to_linear(gamma0_db), distortion_factor(b_da), distortion_factor(b_ad)
        point = AsymptoticPoint(beta=0.5, gamma0=gamma0, rho_da=rho_da, rho_ad=rho_ad, nu=nu, eta=eta)
        beta_numeric, rate_numeric = optimal_beta_numeric(point)
        beta_closed = optimal_beta_closed_form(gamma0, rho_da, rho_ad, eta)
        rate_closed = None
        if 0.0 < beta_closed <= 1.0:
            rate_closed = sum_rate_per_antenna(replace(point, beta=beta_closed))
        rows.append({
            'gamma0_db': gamma0_db,
            'gamma0': gamma0,
            'b_da': b_da,
            'b_ad': b_ad,
            'rho_da': rho_da,
            'rho_ad': rho_ad,
            'eta': eta,
            'nu': nu,
            'beta_star_numeric': beta_numeric,
            'sum_rate_numeric': rate_numeric,
            'beta_star_closed_form': beta_closed,
            'sum_rate_closed_form': rate_closed,
        })
    return rows


_ROW_BUILDERS = {
    ExperimentKinds.SWEEP_RHO: lambda spec, scenario, workers: [_sweep_rho_row(spec, scenario, workers)],
    ExperimentKinds.SWEEP_BETA: _sweep_beta_rows,
    ExperimentKinds.RATE_VS_SNR: _rate_vs_snr_rows,
    ExperimentKinds.BER_VS_SNR: _ber_vs_snr_rows,
}


def _uses_monte_carlo(spec: ExperimentSpec) -> bool:
    return spec.kind == ExperimentKinds.BER_VS_SNR or bool(spec.options.get('monte_carlo'))


def _validate_axes(spec: ExperimentSpec) -> None:
    if spec.kind == ExperimentKinds.SWEEP_RHO and spec.sweep.variable != 'rho':
        raise ConfigError(f"sweep_rho sweeps 'rho', not {spec.sweep.variable!r}")
    if spec.kind == ExperimentKinds.SWEEP_BETA and spec.sweep.variable != 'beta':
        raise ConfigError(f"sweep_beta sweeps 'beta', not {spec.sweep.variable!r}")


def _prepare_output(path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Output directory {directory!r} is not writable: {e}")
    if not os.access(directory, os.W_OK):
        raise ConfigError(f"Output directory {directory!r} is not writable")


def metadata(spec: ExperimentSpec, rows: int) -> Dict[str, Any]:
    """Sidecar record describing an experiment run."""
    return {
        'name': spec.name,
        'kind': spec.kind,
        'seed': spec.base.seed,
        'version': __version__,
        'base': spec.base.to_dict(),
        'sweep': {'variable': spec.sweep.variable, 'values': list(spec.sweep.values)} if spec.sweep else None,
        'series': {'variable': spec.series.variable, 'values': list(spec.series.values)} if spec.series else None,
        'options': dict(spec.options),
        'columns': list(COLUMNS.get(spec.kind, [])),
        'rows': rows,
        'output': spec.output,
    }


async def run_experiment(spec: ExperimentSpec, workers: int = 1, concurrency: Optional[int] = None) -> List[Dict[str, Any]]:
    """
    Run an experiment and write its CSV and metadata sidecar.

    Sweep points are evaluated concurrently on a thread pool; rows are
    returned and written in sweep order.

    Args:
        spec: Validated experiment description.
        workers: Worker processes per Monte-Carlo simulation.
        concurrency: Number of sweep points evaluated at once; defaults to the CPU count,
            or 1 when Monte-Carlo simulations already use several processes.

    Returns:
        Output rows in sweep order (check records for verify experiments).

    Raises:
        ConfigError: If the spec is inconsistent or the output path is unwritable.
        ExperimentError: If evaluating the experiment fails.
    """
    if spec.output:
        _prepare_output(spec.output)
    logger.info("Running %s experiment %r", spec.kind, spec.name)

    if spec.kind == ExperimentKinds.VERIFY:
        try:
            report = run_checks(spec.base.seed, spec.options.get('checks'))
        except KeyError as e:
            raise ConfigError(str(e))
        if spec.output:
            write_json(spec.output, report)
        return report['checks']

    try:
        if spec.kind == ExperimentKinds.BETA_TABLE:
            rows = beta_table(spec.options.get('grid', {}), spec.base)
        else:
            _validate_axes(spec)
            if concurrency is None:
                concurrency = 1 if workers > 1 and _uses_monte_carlo(spec) else (os.cpu_count() or 1)
            grid = _grid(spec)
            build = _ROW_BUILDERS[spec.kind]
            loop = asyncio.get_running_loop()
            with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
                chunks = await asyncio.gather(*[
                    loop.run_in_executor(pool, build, spec, scenario, workers) for _, _, scenario in grid
                ])
            rows = []
            for (series_value, sweep_value, _), chunk in zip(grid, chunks):
                for row in chunk:
                    row.update(_axis_columns(spec.series, series_value, spec.sweep, sweep_value))
                    rows.append(row)
            if spec.kind == ExperimentKinds.SWEEP_RHO:
                _mark_rho_argmax(rows)
    except ConfigError:
        raise
    except Exception as e:
        raise ExperimentError(f"Something went wrong with {spec.name} experiment: {e}")

    if spec.output:
        count = write_csv(spec.output, COLUMNS[spec.kind], rows)
        write_json(METADATA_PATH(spec.output), metadata(spec, count))
        logger.info("Wrote %d rows to %s", count, spec.output)
    return rows


def spec_from_dict(raw: Mapping[str, Any], seed: Optional[int] = None, trials: Optional[int] = None,
                   full: bool = False, out: Optional[str] = None, kind: Optional[str] = None) -> ExperimentSpec:
    """
    Build an ExperimentSpec from parsed configuration.

    Precedence is built-in defaults, then the file, then the arguments
    given here (command-line flags). full switches to publication trial
    and symbol counts unless trials is given explicitly.

    Args:
        raw: Parsed YAML document.
        seed: Seed override.
        trials: Trial count override.
        full: Use publication-quality trial and symbol counts.
        out: Output path override.
        kind: Experiment kind required by the caller, or None.

    Returns:
        ExperimentSpec instance.

    Raises:
        ConfigError: If the document is malformed or the kind does not match.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("Experiment file must contain a mapping")
    file_kind = raw.get('kind', kind)
    if kind is not None and file_kind != kind:
        raise ConfigError(f"Experiment file describes {file_kind!r}, not {kind!r}")

    base_raw = dict(raw.get('base') or {})
    if file_kind in (ExperimentKinds.BETA_TABLE, ExperimentKinds.VERIFY):
        base_raw.setdefault('n_antennas', 1)
        base_raw.setdefault('n_users', 1)
        base_raw.setdefault('gamma0_db', 0.0)
        if file_kind == ExperimentKinds.BETA_TABLE:
            base_raw.setdefault('b_da', 1)
            base_raw.setdefault('b_ad', 3)
    unknown = set(base_raw) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"Unknown scenario fields: {sorted(unknown)}")
    options = dict(raw.get('options') or {})
    if full:
        base_raw['trials'] = FULL_TRIALS
        options['n_symbols'] = FULL_SYMBOLS
    if trials is not None:
        base_raw['trials'] = trials
    base_raw['seed'] = seed if seed is not None else base_raw.get('seed', DEFAULT_SEED)
    try:
        base = SystemConfig(**base_raw)
    except TypeError as e:
        raise ConfigError(f"Invalid scenario: {e}")

    sweep = SweepAxis.from_config(raw['sweep']) if raw.get('sweep') else None
    series = SweepAxis.from_config(raw['series']) if raw.get('series') else None
    return ExperimentSpec(
        name=str(raw.get('name') or file_kind),
        kind=file_kind,
        base=base,
        sweep=sweep,
        series=series,
        options=options,
        output=out if out is not None else raw.get('output'),
    )


def load_spec(path: str, **overrides: Any) -> ExperimentSpec:
    """
    Load an experiment description from a YAML file.

    Args:
        path: YAML file path.
        **overrides: Keyword arguments forwarded to spec_from_dict.

    Returns:
        ExperimentSpec instance.

    Raises:
        ConfigError: If the file cannot be read or parsed.
    """
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read experiment file {path!r}: {e}")
    return spec_from_dict(raw, **overrides)
