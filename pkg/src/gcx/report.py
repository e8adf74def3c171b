"""Experiment configuration, check records and report serialization."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, fields

import numpy as np

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
EXIT_CODES = {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}
EXIT_CONFIG_ERROR = 3
CSV_COLUMNS = ("check", "residual", "tolerance", "verdict", "anchor", "data")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    command: str = ""
    action: str = ""
    builtin: str | None = None
    w: tuple | None = None
    xi: tuple | None = None
    d: int | None = None
    n: int | None = None
    trials: int = 100
    seed: int = 0
    eps: float = 0.01
    delta: float | None = None
    tol: float | None = None
    level: tuple | None = None
    levels: int = 50
    polytope: str | None = None
    check: str | None = None
    out: str | None = None
    format: str = "json"
    timing: bool = False

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("out", "timing"):
                continue
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def parse_vector(text, name="vector") -> tuple:
    if text is None or isinstance(text, tuple):
        return text
    try:
        return tuple(float(t) for t in str(text).replace(" ", "").split(",") if t)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} {text!r}") from exc


_CASTS = {
    "w": lambda v: parse_vector(v, "w"), "xi": lambda v: parse_vector(v, "xi"),
    "level": lambda v: parse_vector(v, "level"),
    "d": int, "n": int, "trials": int, "seed": int, "levels": int,
    "eps": float, "delta": float, "tol": float,
    "timing": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}


def coerce(key: str, value):
    if value is None:
        return None
    cast = _CASTS.get(key)
    try:
        return cast(value) if cast else value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path: str) -> dict[str, dict]:
    """Sections of an INI-style experiment file as plain dicts."""
    parser = configparser.ConfigParser(interpolation=None)
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    return {name: dict(parser[name]) for name in parser.sections()}


def build_config(base: dict, overrides: dict) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    merged = {}
    for src in (base, overrides):
        for k, v in src.items():
            k = k.replace("-", "_")
            if k not in names:
                raise ConfigError(f"unknown config key {k!r}")
            if v is not None:
                merged[k] = coerce(k, v)
    return ExperimentConfig(**merged)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    residual: float | None
    tolerance: float | None
    verdict: str
    anchor: str
    data: dict = field(default_factory=dict)


@dataclass
class Report:
    config: dict
    checks: list
    version: str
    wall_time: float | None = None

    @property
    def summary(self) -> str:
        verdicts = [c.verdict for c in self.checks]
        if not verdicts:
            return INCONCLUSIVE
        if FAIL in verdicts:
            return FAIL
        if INCONCLUSIVE in verdicts:
            return INCONCLUSIVE
        return PASS

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.summary]

    def to_dict(self) -> dict:
        out = {
            "tool": "gcx",
            "version": self.version,
            "config": self.config,
            "checks": [
                {"name": c.name, "residual": c.residual, "tolerance": c.tolerance,
                 "verdict": c.verdict, "anchor": c.anchor, "data": c.data}
                for c in self.checks
            ],
            "summary": self.summary,
        }
        if self.wall_time is not None:
            out["wall_time"] = self.wall_time
        return out


def clean(obj):
    """JSON-ready copy with floats at 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        x = float("%.12g" % x)
        return 0.0 if x == 0 else x
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


def render(report: Report, fmt: str = "json") -> str:
    data = clean(report.to_dict())
    if fmt == "json":
        return json.dumps(data, indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(CSV_COLUMNS)
        for c in data["checks"]:
            extra = c["data"].get("vertices") if isinstance(c["data"], dict) else None
            writer.writerow([
                c["name"], _cell(c["residual"]), _cell(c["tolerance"]), c["verdict"], c["anchor"],
                json.dumps(extra, separators=(",", ":")) if extra is not None else "",
            ])
        return buf.getvalue()
    raise ConfigError(f"unknown format {fmt!r}")


def _cell(v):
    return "" if v is None else ("%.12g" % v if isinstance(v, float) else str(v))


def emit_report(report: Report, path: str | None, fmt: str = "json") -> str:
    """Render the report and, when a path is given, write it atomically."""
    text = render(report, fmt)
    if path:
        directory = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gcx-", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return text
