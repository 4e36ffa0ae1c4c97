"""Utility functions for the quantized massive MIMO library."""

import csv
import json
import math
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from .errors import ConfigError

Bits = Union[int, float]


def db_to_linear(value_db: float) -> float:
    """
    Convert a power ratio from dB to linear scale.

    Args:
        value_db: Ratio in dB.

    Returns:
        Linear ratio.
    """
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """
    Convert a linear power ratio to dB.

    Args:
        value: Positive linear ratio.

    Returns:
        Ratio in dB.

    Raises:
        ConfigError: If the value is not positive.
    """
    if value <= 0:
        raise ConfigError(f"Cannot express non-positive ratio {value} in dB")
    return 10.0 * math.log10(value)


def parse_bits(value: Any) -> Bits:
    """
    Normalize a converter resolution read from a file or the command line.

    Args:
        value: Positive integer, or one of inf / "inf" / "∞" for an ideal converter.

    Returns:
        The bit depth as int, or math.inf.

    Raises:
        ConfigError: If the value is not a positive integer or infinity.
    """
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ('inf', '+inf', 'infinity', '∞', '.inf'):
            return math.inf
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"Invalid converter resolution: {value!r}")
    if isinstance(value, bool):
        raise ConfigError(f"Invalid converter resolution: {value!r}")
    if isinstance(value, float):
        if math.isinf(value) and value > 0:
            return math.inf
        if not value.is_integer():
            raise ConfigError(f"Converter resolution must be an integer, got {value}")
        value = int(value)
    if not isinstance(value, int) or value < 1:
        raise ConfigError(f"Converter resolution must be a positive integer, got {value!r}")
    return value


def spawn_streams(seed: int, count: int) -> List[np.random.SeedSequence]:
    """
    Split a master seed into independent per-trial seed sequences.

    Child i depends only on (seed, i), so work can be distributed over any
    number of workers without changing results.

    Args:
        seed: Master seed.
        count: Number of children.

    Returns:
        List of child seed sequences.
    """
    return np.random.SeedSequence(seed).spawn(count)


def format_value(value: Any) -> str:
    """
    Format a cell for CSV output.

    Floats use the shortest round-trip representation with a '.' decimal
    separator; None becomes an empty cell.

    Args:
        value: Cell value.

    Returns:
        Text of the cell.
    """
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> int:
    """
    Write rows to a CSV file with a fixed column contract.

    Args:
        path: Output file path.
        columns: Header names, in order.
        rows: Mappings from column name to value; missing keys become empty cells.

    Returns:
        Number of data rows written.

    Raises:
        ConfigError: If a row carries a column outside the contract.
    """
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            unknown = set(row) - set(columns)
            if unknown:
                raise ConfigError(f"Row has columns outside the contract: {sorted(unknown)}")
            writer.writerow([format_value(row.get(name)) for name in columns])
            count += 1
    return count


def to_jsonable(value: Any) -> Any:
    """
    Convert a value into something json.dumps accepts.

    Infinite floats are written as the string "inf".

    Args:
        value: Any value built from dicts, lists, tuples, numbers and strings.

    Returns:
        JSON-compatible value.
    """
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        if math.isnan(value):
            return None
        return value
    return value


def write_json(path: str, payload: Dict[str, Any]) -> None:
    """
    Write a JSON document with sorted keys and a trailing newline.

    Args:
        path: Output file path.
        payload: Document.
    """
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))
        fh.write('\n')


def complex_gaussian(rng: np.random.Generator, shape: Any, variance: Any = 1.0) -> np.ndarray:
    """
    Draw circularly-symmetric complex Gaussian samples.

    Real and imaginary parts are independent with variance/2 each.

    Args:
        rng: Random stream.
        shape: Output shape.
        variance: Total variance per sample; scalar or array broadcastable to shape.

    Returns:
        Complex array of the requested shape.
    """
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
