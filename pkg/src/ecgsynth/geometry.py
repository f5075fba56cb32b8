"""Page geometry: canvas, calibration (px <-> mm <-> s/mV), 12x1 layout,
per-sample parameter sampling and signal-to-polyline mapping.

Pixel coordinates are continuous with the origin at the top-left corner of
the canvas; pixel ``(row, col)`` covers ``[col, col+1) x [row, row+1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LayoutOverflow, NonPositiveWidth
from .ingest import LEAD_ORDER
from .rng import RandomStream

SAMPLING_RATE_HZ = 500
DURATION_S = 10.0
MIN_REGION_HEIGHT_PX = 40

PAPER_SPEEDS = (25, 50)
VOLTAGE_SCALES = (5, 10)
GRID_VISIBILITY = (True, False)
GRID_COLORS = ("red", "green", "black", "gray")
STROKE_WIDTH_RANGE = (2.0, 3.0)
GRID_OPACITY = 0.8


@dataclass(frozen=True)
class CanvasSpec:
    dpi: int = 300
    width_px: int = 2481
    height_px: int = 3507
    margin_top: int = 100
    margin_bottom: int = 100
    margin_left: int = 150
    margin_right: int = 150
    lead_gap_px: int = 30
    pulse_slot_px: int = 70

    @property
    def usable_width(self) -> int:
        return self.width_px - self.margin_left - self.margin_right

    @property
    def trace_width(self) -> int:
        return self.usable_width - self.pulse_slot_px


@dataclass(frozen=True)
class RenderParams:
    paper_speed: int
    voltage_scale: int
    grid_visible: bool
    grid_color: str
    stroke_width_px: float
    grid_opacity: float = GRID_OPACITY
    rng_seed: int = 0


@dataclass(frozen=True)
class ParamDomains:
    """Allowed values for each randomized parameter (defaults: full domains)."""
    paper_speed: tuple = PAPER_SPEEDS
    voltage_scale: tuple = VOLTAGE_SCALES
    grid_visible: tuple = GRID_VISIBILITY
    grid_color: tuple = GRID_COLORS
    stroke_width: tuple = STROKE_WIDTH_RANGE


def sample_params(rng: RandomStream,
                  domains: ParamDomains = ParamDomains()) -> RenderParams:
    """Draw one page's parameters; always consumes exactly five draws,
    in the order speed, scale, grid visibility, grid color, stroke width."""
    speed = rng.choice(domains.paper_speed)
    scale = rng.choice(domains.voltage_scale)
    visible = rng.choice(domains.grid_visible)
    color = rng.choice(domains.grid_color)
    lo, hi = domains.stroke_width
    width = rng.uniform(lo, hi)
    return RenderParams(int(speed), int(scale), bool(visible), str(color),
                        float(width), GRID_OPACITY, rng.seed)


@dataclass(frozen=True)
class CalibrationModel:
    px_per_mm: float
    px_per_sec: float
    px_per_mV: float
    seconds_per_mm: float
    paper_speed: int
    voltage_scale: int


def compute_calibration(canvas: CanvasSpec, params: RenderParams,
                        duration_s: float = DURATION_S) -> CalibrationModel:
    """Fit ``duration_s`` of trace into the available trace width.

    One millimetre is whatever makes ``paper_speed * duration_s`` mm span the
    trace width; the same px/mm is used vertically so grid boxes stay square.
    """
    width = canvas.trace_width
    if width <= 0:
        raise NonPositiveWidth(f"trace width {width} px")
    px_per_mm = width / (params.paper_speed * duration_s)
    return CalibrationModel(
        px_per_mm=px_per_mm,
        px_per_sec=px_per_mm * params.paper_speed,
        px_per_mV=px_per_mm * params.voltage_scale,
        seconds_per_mm=1.0 / params.paper_speed,
        paper_speed=params.paper_speed,
        voltage_scale=params.voltage_scale,
    )


@dataclass(frozen=True)
class LeadGeometry:
    index: int
    name: str
    region: tuple[int, int, int, int]   # x, y, w, h
    baseline_y: float
    trace_x0: float
    name_anchor: tuple[int, int]

    @property
    def top(self) -> int:
        return self.region[1]

    @property
    def bottom(self) -> int:
        return self.region[1] + self.region[3]


@dataclass(frozen=True)
class LeadLayout:
    leads: tuple[LeadGeometry, ...]
    region_height_px: int
    trace_x0: float
    trace_width: int
    lead_area: tuple[int, int, int, int] = field(default=(0, 0, 0, 0))

    def __getitem__(self, i: int) -> LeadGeometry:
        return self.leads[i]

    def __len__(self) -> int:
        return len(self.leads)


LABEL_OFFSET = (8, 4)


def compute_layout(canvas: CanvasSpec = CanvasSpec()) -> LeadLayout:
    n = len(LEAD_ORDER)
    free = canvas.height_px - canvas.margin_top - canvas.margin_bottom \
        - (n - 1) * canvas.lead_gap_px
    height = free // n
    if height < MIN_REGION_HEIGHT_PX:
        raise LayoutOverflow(
            f"{canvas.height_px} px canvas leaves {height} px per lead region")
    if canvas.usable_width <= canvas.pulse_slot_px:
        raise LayoutOverflow("no horizontal room for traces")
    x0 = canvas.margin_left
    trace_x0 = float(x0 + canvas.pulse_slot_px)
    leads = []
    for i, name in enumerate(LEAD_ORDER):
        top = canvas.margin_top + i * (height + canvas.lead_gap_px)
        leads.append(LeadGeometry(
            index=i, name=name,
            region=(x0, top, canvas.usable_width, height),
            baseline_y=top + height / 2,
            trace_x0=trace_x0,
            name_anchor=(x0 + LABEL_OFFSET[0], top + LABEL_OFFSET[1]),
        ))
    area_h = leads[-1].bottom - canvas.margin_top
    return LeadLayout(tuple(leads), height, trace_x0, canvas.trace_width,
                      (x0, canvas.margin_top, canvas.usable_width, area_h))


def signal_to_path(lead_signal, cal: CalibrationModel, lead: LeadGeometry,
                   fs_hz: float = SAMPLING_RATE_HZ) -> np.ndarray:
    """Map samples (z-units rendered as mV) to an ``(N, 2)`` array of x, y px."""
    v = np.asarray(lead_signal, dtype=np.float64)
    i = np.arange(v.size, dtype=np.float64)
    x = lead.trace_x0 + i / fs_hz * cal.px_per_sec
    y = lead.baseline_y - v * cal.px_per_mV
    return np.column_stack([x, y])


def path_to_signal(path, cal: CalibrationModel, lead: LeadGeometry):
    """Inverse of :func:`signal_to_path`: returns ``(t_seconds, values)``."""
    path = np.asarray(path, dtype=np.float64)
    t = (path[:, 0] - lead.trace_x0) / cal.px_per_sec
    v = (lead.baseline_y - path[:, 1]) / cal.px_per_mV
    return t, v
