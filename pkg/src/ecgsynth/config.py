"""Run configuration.

Configuration files are flat YAML mappings: ``key: value`` per line, ``#``
comments, scalar values (string, number, boolean) or flow lists such as
``paper_speed: [25]``.  Every key is optional; unknown keys are rejected.

Keys and defaults::

    records_dir: records          # WFDB files (index `filename` column is relative to it)
    index_csv: index.csv
    output_root: output
    global_seed: 0
    workers: 1
    limit: null                   # max records to process
    splits: [train, val, test]
    overwrite: true
    paper_speed: [25, 50]         # mm/s
    voltage_scale: [5, 10]        # mm/mV
    grid_visible: [true, false]
    grid_color: [red, green, black, gray]
    grid_opacity: 0.8             # fixed
    stroke_width: [2.0, 3.0]      # px, uniform on [min, max]
    canvas_dpi / canvas_width / canvas_height: 300 / 2481 / 3507
    margin_top / margin_bottom / margin_left / margin_right: 100 / 100 / 150 / 150
    lead_gap: 30
    pulse_slot: 70
    column_<field>: CSV column for each index field (see ingest.DEFAULT_COLUMNS)
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigSyntaxError, DomainViolation, UnknownKey
from .geometry import (
    GRID_COLORS,
    GRID_OPACITY,
    GRID_VISIBILITY,
    PAPER_SPEEDS,
    STROKE_WIDTH_RANGE,
    VOLTAGE_SCALES,
    CanvasSpec,
    ParamDomains,
)
from .ingest import DEFAULT_COLUMNS

SPLITS = ("train", "val", "test")
_CANVAS_KEYS = {
    "canvas_dpi": "dpi", "canvas_width": "width_px", "canvas_height": "height_px",
    "margin_top": "margin_top", "margin_bottom": "margin_bottom",
    "margin_left": "margin_left", "margin_right": "margin_right",
    "lead_gap": "lead_gap_px", "pulse_slot": "pulse_slot_px",
}


@dataclass(frozen=True)
class Config:
    records_dir: str = "records"
    index_csv: str = "index.csv"
    output_root: str = "output"
    global_seed: int = 0
    workers: int = 1
    limit: int | None = None
    splits: tuple[str, ...] = SPLITS
    overwrite: bool = True
    domains: ParamDomains = field(default_factory=ParamDomains)
    canvas: CanvasSpec = field(default_factory=CanvasSpec)
    columns: dict = field(default_factory=lambda: dict(DEFAULT_COLUMNS))

    def with_overrides(self, **changes) -> "Config":
        changes = {k: v for k, v in changes.items() if v is not None}
        if "splits" in changes:
            changes["splits"] = _check_splits(changes["splits"])
        if "workers" in changes and changes["workers"] < 1:
            raise DomainViolation("workers must be >= 1")
        return replace(self, **changes)


def _as_list(key, value) -> list:
    if isinstance(value, list):
        return value
    return [value]


def _subset(key, value, allowed) -> tuple:
    items = _as_list(key, value)
    if not items:
        raise DomainViolation(f"{key}: domain must not be empty")
    bad = [v for v in items if v not in allowed or isinstance(v, bool) != isinstance(allowed[0], bool)]
    if bad:
        raise DomainViolation(f"{key}: {bad} not in {list(allowed)}")
    return tuple(dict.fromkeys(items))


def _check_splits(value) -> tuple[str, ...]:
    if isinstance(value, str):
        value = [s.strip() for s in value.split(",") if s.strip()]
    return _subset("splits", list(value), SPLITS)


def _int(key, value, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainViolation(f"{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise DomainViolation(f"{key}: must be >= {minimum}")
    return value


def load_config(text: str, base_dir: str | Path | None = None) -> Config:
    """Parse configuration text; relative paths resolve against ``base_dir``."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigSyntaxError(str(exc)) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigSyntaxError("configuration must be a key: value mapping")
    for key, value in data.items():
        if not isinstance(key, str):
            raise ConfigSyntaxError(f"non-string key {key!r}")
        items = value if isinstance(value, list) else [value]
        if any(isinstance(v, (dict, list)) for v in items):
            raise ConfigSyntaxError(f"{key}: nested values are not allowed")

    cfg: dict = {}
    domains: dict = {}
    canvas: dict = {}
    columns = dict(DEFAULT_COLUMNS)
    for key, value in data.items():
        if key in ("records_dir", "index_csv", "output_root"):
            path = Path(str(value))
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            cfg[key] = str(path)
        elif key == "global_seed":
            cfg[key] = _int(key, value, 0)
        elif key == "workers":
            cfg[key] = _int(key, value, 1)
        elif key == "limit":
            cfg[key] = None if value is None else _int(key, value, 0)
        elif key == "splits":
            cfg[key] = _check_splits(_as_list(key, value))
        elif key == "overwrite":
            if not isinstance(value, bool):
                raise DomainViolation("overwrite must be true or false")
            cfg[key] = value
        elif key == "paper_speed":
            domains[key] = _subset(key, value, PAPER_SPEEDS)
        elif key == "voltage_scale":
            domains[key] = _subset(key, value, VOLTAGE_SCALES)
        elif key == "grid_visible":
            domains[key] = _subset(key, value, GRID_VISIBILITY)
        elif key == "grid_color":
            domains[key] = _subset(key, value, GRID_COLORS)
        elif key == "grid_opacity":
            if value != GRID_OPACITY:
                raise DomainViolation(f"grid_opacity is fixed at {GRID_OPACITY}")
        elif key == "stroke_width":
            lo, hi = _stroke_range(value)
            domains["stroke_width"] = (lo, hi)
        elif key in _CANVAS_KEYS:
            canvas[_CANVAS_KEYS[key]] = _int(key, value, 0)
        elif key.startswith("column_") and key[7:] in DEFAULT_COLUMNS:
            columns[key[7:]] = str(value)
        else:
            raise UnknownKey(f"unknown configuration key {key!r}")
    return Config(domains=ParamDomains(**domains), canvas=CanvasSpec(**canvas),
                  columns=columns, **cfg)


def _stroke_range(value) -> tuple[float, float]:
    items = _as_list("stroke_width", value)
    if len(items) == 1:
        items = items * 2
    if len(items) != 2 or not all(isinstance(v, (int, float)) and
                                  not isinstance(v, bool) for v in items):
        raise DomainViolation("stroke_width must be [min, max] in px")
    lo, hi = float(items[0]), float(items[1])
    if not STROKE_WIDTH_RANGE[0] <= lo <= hi <= STROKE_WIDTH_RANGE[1]:
        raise DomainViolation(
            f"stroke_width must satisfy {STROKE_WIDTH_RANGE[0]} <= min <= max "
            f"<= {STROKE_WIDTH_RANGE[1]}")
    return lo, hi


def read_config(path: str | Path) -> Config:
    path = Path(path)
    return load_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
