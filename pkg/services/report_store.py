"""
Report storage service for TVPath.
Handles experiment config files and the report files written by benchmark runs.
"""

import os
import logging
from dataclasses import fields
from typing import Any, Dict, Optional

from simbench import ExperimentConfig, ExperimentReport
from utils.formatters import CSV_FLOAT_FORMAT, to_json, write_gcurve

logger = logging.getLogger(__name__)

# Constants
DEFAULT_OUTPUT_DIR = "reports"

INT_KEYS = {"n", "replications", "seed", "period", "workers", "folds"}
FLOAT_KEYS = {"sigma", "uniform_half_width"}
STR_LIST_KEYS = {"selectors", "timing_lambda_hat"}
FLOAT_LIST_KEYS = {"q_values", "levels"}
INT_LIST_KEYS = {"timing_sizes"}


def sanitize_filename(filename):
    """
    Sanitize a string to be safe for use as a filename.
    Removes or replaces characters that are invalid on Windows/Unix filesystems.
    """
    invalid_chars = '<>:"/\\|?*'
    for char in invalid_chars:
        filename = filename.replace(char, '_')
    filename = filename.replace(' ', '_')
    filename = filename.replace(',', '_')

    while '__' in filename:
        filename = filename.replace('__', '_')
    filename = filename.strip('_')

    max_length = 200
    if len(filename) > max_length:
        filename = filename[:max_length]

    return filename or "experiment"


def _convert(key: str, raw: str, line: int) -> Any:
    try:
        if key in INT_KEYS:
            return int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
        items = [item.strip() for item in raw.split(',') if item.strip()]
        if key in STR_LIST_KEYS:
            return tuple(items)
        if key in FLOAT_LIST_KEYS:
            return tuple(float(item) for item in items)
        if key in INT_LIST_KEYS:
            return tuple(int(item) for item in items)
    except ValueError:
        raise ValueError(f"line {line}: invalid value for {key}: {raw!r}")
    return raw


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse `key = value` lines. `#` starts a comment, blank lines are skipped,
    list values are comma separated.
    """
    known = {f.name for f in fields(ExperimentConfig)}
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValueError(f"line {number}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split('=', 1))
        if key not in known:
            raise ValueError(f"line {number}: unknown key {key!r}")
        values[key] = _convert(key, raw, number)
    return values


def load_config(config_path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Load an ExperimentConfig from a key = value file, then apply overrides."""
    with open(config_path, 'r', encoding='utf-8') as f:
        values = parse_config_text(f.read())
    if values.get("csv_path") and not os.path.isabs(values["csv_path"]):
        values["csv_path"] = os.path.join(os.path.dirname(os.path.abspath(config_path)), values["csv_path"])
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**values).validate()


def report_paths(output_dir: str, name: str) -> Dict[str, str]:
    """File names written for an experiment called name."""
    stem = os.path.join(output_dir, sanitize_filename(name))
    return {
        "summary": f"{stem}_summary.csv",
        "runs": f"{stem}_runs.csv",
        "json": f"{stem}.json",
        "gcurve": f"{stem}_gcurve.dat",
        "timing": f"{stem}_timing.csv",
    }


def save_report(report: ExperimentReport, output_dir: Optional[str] = None) -> Dict[str, str]:
    """
    Write every table of a report.

    Returns:
        Mapping of report part to the path written
    """
    output_dir = output_dir or report.config.output_dir or DEFAULT_OUTPUT_DIR
    os.makedirs(output_dir, exist_ok=True)
    paths = report_paths(output_dir, report.config.name)
    written: Dict[str, str] = {}

    if not report.runs.empty:
        report.summary.to_csv(paths["summary"], index=False, float_format=CSV_FLOAT_FORMAT)
        report.runs.to_csv(paths["runs"], index=False, float_format=CSV_FLOAT_FORMAT)
        written["summary"] = paths["summary"]
        written["runs"] = paths["runs"]
    if not report.gcurve.empty:
        write_gcurve(paths["gcurve"], report.gcurve)
        written["gcurve"] = paths["gcurve"]
    payload = report.to_dict()
    if report.timing is not None:
        report.timing.to_csv(paths["timing"], index=False, float_format=CSV_FLOAT_FORMAT)
        written["timing"] = paths["timing"]
        payload["timing"] = report.timing.to_dict(orient='records')
    with open(paths["json"], 'w', encoding='utf-8') as f:
        f.write(to_json(payload, indent=2))
    written["json"] = paths["json"]

    for part, path in written.items():
        logger.info("Wrote %s report to %s", part, path)
    return written
