"""Experiment configuration, report documents and their serialization."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, fields
from typing import Any

import jsonschema
import numpy as np

from .errors import ConfigError

STOCHASTIC = {"theta-lower", "bridge-suite", "donsker-diag"}
COMMANDS = ("theta-lower", "lemma2-verify", "bridge-suite", "pipeline", "donsker-diag")


@dataclass
class ExperimentConfig:
    command: str
    n: int | None = None
    trials: int | None = None
    seed: int | None = None
    eps: float | None = None
    K: float | None = None
    eta: float | None = None
    levels: tuple | None = None
    grid: int | None = None
    workers: int = 1
    cap_mode: str = "threshold"
    cap_value: float | None = None
    out: str | None = None
    format: str = "json"
    c_eta: float | None = None
    self_test: bool = False
    inject_d: float | None = None
    n_grid: tuple | None = None
    eta_grid: tuple | None = None
    a_grid: tuple | None = None
    ks_trials: int | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_text(self) -> str:
        """Flat ``key=value`` lines; unset values are omitted."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name}={_format_value(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        return cls.from_mapping({**parse_config_text(text), **overrides})

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, value in raw.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, value, known[key].type)
        if "command" not in values:
            raise ConfigError("config needs a command")
        return cls(**values)

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}


_TUPLE_KEYS = {"levels", "n_grid", "eta_grid", "a_grid"}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(key: str, value, annotation: str):
    if not isinstance(value, str):
        if key in _TUPLE_KEYS and value is not None:
            return tuple(float(v) for v in np.atleast_1d(value))
        return value
    text = str(value).strip()
    try:
        if key in _TUPLE_KEYS:
            return tuple(float(p) for p in text.split(",") if p.strip())
        if "bool" in annotation:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        if "int" in annotation:
            return int(float(text)) if "e" in text.lower() else int(text)
        if "float" in annotation:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# -- documents ----------------------------------------------------------------

REPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command", "version", "status", "config", "summary", "results", "checks", "wall_clock_seconds"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "version": {"type": "string"},
        "status": {"enum": ["pass", "fail", "warn"]},
        "config": {
            "type": "object",
            "additionalProperties": False,
            "required": ["command"],
            "properties": {f.name: {} for f in fields(ExperimentConfig)},
        },
        "summary": {"type": "string"},
        "results": {"type": "object"},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "passed", "status", "detail"],
                "properties": {
                    "name": {"type": "string"},
                    "passed": {"type": "boolean"},
                    "status": {"type": "string"},
                    "detail": {"type": "object"},
                },
            },
        },
        "wall_clock_seconds": {"type": "number"},
    },
}


def validate_report(doc: dict) -> None:
    jsonschema.validate(doc, REPORT_SCHEMA)


def plain(obj: Any) -> Any:
    """Convert numpy values and dataclasses into JSON-ready Python values.

    NaN becomes null and infinities become the strings "inf" / "-inf".
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(doc: dict) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(plain(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def body(doc: dict) -> str:
    """Serialized report without the wall-clock field, for reproducibility checks."""
    return dumps({k: v for k, v in doc.items() if k != "wall_clock_seconds"})


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(v) for k, v in plain(row).items()})
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v
