"""
Formatting utilities for TVPath.
Handles float formatting, JSON payloads and CSV/data-file writers.
"""

import json
from typing import Any, Dict, Iterable, Sequence, TextIO, Tuple

import numpy as np
import pandas as pd

from path_solver import PathResult

# Constants
CSV_FLOAT_FORMAT = '%.9g'


def format_csv_float(value: float) -> str:
    """Float with 9 significant digits, as written to CSV files."""
    return CSV_FLOAT_FORMAT % value


def to_json(payload: Dict[str, Any], indent: int = None) -> str:
    """
    Serialize a payload. Python floats are written with repr, which is the
    shortest string that reads back to the identical double (at most 17
    significant digits).
    """
    return json.dumps(payload, indent=indent, allow_nan=False)


def path_to_json(path: PathResult, indent: int = None) -> str:
    """{"n": int, "lambda": [...], "dg": [...]}"""
    return to_json(path.to_dict(), indent=indent)


def path_from_json(text: str) -> PathResult:
    """Inverse of path_to_json."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid path JSON: {e}")
    if not isinstance(data, dict):
        raise ValueError("Path JSON must be an object")
    return PathResult.from_dict(data)


def denoised_frame(t: Sequence[float], y: Sequence[float], u: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({"t": np.asarray(t, dtype=float),
                         "y": np.asarray(y, dtype=float),
                         "u": np.asarray(u, dtype=float)})


def write_denoised_csv(target, t: Sequence[float], y: Sequence[float], u: Sequence[float]) -> None:
    """Write `t,y,u` rows to a path or text stream."""
    denoised_frame(t, y, u).to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def write_criterion_csv(target, rows: Iterable[Tuple[float, float]]) -> None:
    """Write a `lambda,criterion` curve."""
    frame = pd.DataFrame(list(rows), columns=["lambda", "criterion"])
    frame.to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def write_gcurve(target, gcurve: pd.DataFrame) -> None:
    """Whitespace separated `lambda g d2g` columns, readable by gnuplot."""
    gcurve.to_csv(target, sep=' ', index=False, header=False,
                  float_format=CSV_FLOAT_FORMAT, lineterminator='\n')


def format_stream_row(row: Dict[str, Any]) -> str:
    """`n,lambda_ours,K,last_level` line of the streaming protocol."""
    return (f"{row['n']},{format_csv_float(row['lambda_ours'])},"
            f"{row['K']},{format_csv_float(row['last_level'])}")


def format_summary(lam: float, K: int, g: int, method: str) -> str:
    """One-line summary printed after a denoise run."""
    return f"method={method} lambda={lam:.9g} K={K} g={g}"


def write_text(stream: TextIO, text: str) -> None:
    stream.write(text if text.endswith('\n') else text + '\n')
