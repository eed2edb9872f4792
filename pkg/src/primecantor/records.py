"""CSV artifacts, the run manifest and the key=value config file."""

from __future__ import annotations

import configparser
import csv
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

CSV_SCHEMA_VERSION = 1
MANIFEST_PREFIX = "# manifest: "

# fixed column sets, one per artifact kind
SCHEMAS = {
    "gaps": ("n", "p_n", "d_n"),
    "rk": ("n", "p_n", "d_n", "window_min", "normalized"),
    "cramer": ("seed", "n", "p_n", "d_n", "window_min", "normalized"),
    "hoheisel": ("a", "b", "ratio"),
    "series": ("index", "term", "partial_sum", "flagged"),
    "measure": ("r", "value", "lower_band", "upper_band"),
}


def fmt(value) -> str:
    """17 significant digits for floats so regression diffs are exact."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, kind: str, rows: Iterable[Sequence], manifest_name: str | None = None) -> Path:
    header = SCHEMAS[kind]
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if manifest_name:
            fh.write(f"{MANIFEST_PREFIX}{manifest_name}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{kind} rows need {len(header)} fields, got {len(row)}")
            w.writerow([fmt(v) for v in row])
    return path


def _parse(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path) -> tuple[str | None, list[str], list[dict]]:
    """Read an artifact back: ``(manifest name, header, rows)`` with numbers parsed."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    manifest = None
    if lines and lines[0].startswith(MANIFEST_PREFIX):
        manifest = lines[0][len(MANIFEST_PREFIX):]
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [dict(zip(header, map(_parse, r))) for r in reader]
    return manifest, header, rows


@dataclass
class RunManifest:
    argv: list[str]
    command: str
    config: dict
    seeds: list[int] = field(default_factory=list)
    truncation: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    csv_schema: dict = field(default_factory=dict)
    wall_time: float = 0.0
    timestamp: str = ""

    def __post_init__(self):
        if not self.versions:
            self.versions = {
                "primecantor": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            }

    def finish(self, started: float) -> None:
        self.wall_time = time.perf_counter() - started
        self.timestamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def load_config(path) -> dict:
    """``key = value`` lines (``#`` comments); values parsed as int/float when possible.

    Keys may be written with dashes or underscores.
    """
    parser = configparser.ConfigParser(interpolation=None)
    text = Path(path).read_text()
    parser.read_string("[run]\n" + text)
    return {k.replace("-", "_"): _parse(v) for k, v in parser["run"].items()}


def argv_string() -> list[str]:
    return list(sys.argv)
