"""Non-raster ground truth: YOLO labels, the signal array and metadata JSON."""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import (
    CountMismatch,
    DegenerateBox,
    NonFinite,
    ShapeMismatch,
)
from .geometry import CanvasSpec
from .ingest import LEAD_ORDER

REGION_CLASS = 0
N_LEADS = len(LEAD_ORDER)
SIGNAL_SHAPE = (N_LEADS, 5000)
COORD_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PixelBox:
    x: float
    y: float
    w: float
    h: float

    def as_list(self) -> list:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class YoloRecord:
    class_id: int
    x_center: float
    y_center: float
    width: float
    height: float

    def line(self) -> str:
        return (f"{self.class_id} {self.x_center:.6f} {self.y_center:.6f} "
                f"{self.width:.6f} {self.height:.6f}")


def name_class(lead_index: int) -> int:
    """YOLO class of a lead-name box: I -> 1 ... V6 -> 12."""
    return lead_index + 1


def _unit(value: float) -> float:
    if value < -COORD_TOLERANCE or value > 1 + COORD_TOLERANCE:
        raise ValueError(f"normalized coordinate {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def to_yolo(box: PixelBox, class_id: int, canvas: CanvasSpec) -> YoloRecord:
    if box.w <= 0 or box.h <= 0:
        raise DegenerateBox(f"box {box} has non-positive size")
    W, H = canvas.width_px, canvas.height_px
    return YoloRecord(
        int(class_id),
        _unit((box.x + box.w / 2) / W),
        _unit((box.y + box.h / 2) / H),
        _unit(box.w / W),
        _unit(box.h / H),
    )


def from_yolo(rec: YoloRecord, canvas: CanvasSpec) -> PixelBox:
    W, H = canvas.width_px, canvas.height_px
    w, h = rec.width * W, rec.height * H
    return PixelBox(rec.x_center * W - w / 2, rec.y_center * H - h / 2, w, h)


def emit_yolo_file(records: list[YoloRecord]) -> str:
    """One line per object: region boxes first (lead order), then names 1-12."""
    regions = [r for r in records if r.class_id == REGION_CLASS]
    names = sorted((r for r in records if r.class_id != REGION_CLASS),
                   key=lambda r: r.class_id)
    if len(regions) != N_LEADS or [r.class_id for r in names] != \
            list(range(1, N_LEADS + 1)):
        raise CountMismatch(
            f"need {N_LEADS} region boxes and one name box per class 1-{N_LEADS}, "
            f"got {len(regions)} regions and classes {[r.class_id for r in names]}")
    return "\n".join(r.line() for r in regions + names) + "\n"


def parse_yolo_file(text: str) -> list[YoloRecord]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        cid, *coords = line.split()
        out.append(YoloRecord(int(cid), *(float(c) for c in coords)))
    return out


def emit_signals(normalized: np.ndarray,
                 shape: tuple[int, int] = SIGNAL_SHAPE) -> bytes:
    """NPY v1.0 bytes of a little-endian float64, C-ordered array."""
    arr = np.asarray(normalized)
    if arr.shape != tuple(shape):
        raise ShapeMismatch(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("signal array contains NaN or inf")
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr, dtype="<f8"),
                              version=(1, 0), allow_pickle=False)
    return buf.getvalue()


def load_signals(data: bytes) -> np.ndarray:
    return np.lib.format.read_array(io.BytesIO(data), allow_pickle=False)


# --------------------------------------------------------------------------
# metadata
# --------------------------------------------------------------------------

def r6(x: float) -> float:
    return round(float(x), 6)


@dataclass
class SampleMetadata:
    """Per-sample metadata; JSON keys follow this field order."""
    record_id: str
    split: str
    generator_version: str
    rng_seed: int
    demographics: dict
    scp_codes: dict
    superclasses: list
    quality: dict
    sampling_rate_hz: float
    duration_s: float
    n_samples: int
    lead_order: list
    amplitude_units: str
    paper_speed_mm_s: int
    voltage_scale_mm_mV: int
    grid_visible: bool
    grid_color: str
    grid_opacity: float
    stroke_width_px: float
    px_per_mm: float
    px_per_sec: float
    px_per_mV: float
    canvas: dict
    clipped_sample_count: int
    invalid_sample_count: int
    header_box: list
    leads: list = field(default_factory=list)

    def check(self) -> None:
        if len(self.leads) != N_LEADS:
            raise CountMismatch(f"metadata has {len(self.leads)} lead entries")
        for key, value in _walk(asdict(self)):
            if isinstance(value, float) and not math.isfinite(value):
                raise NonFinite(f"metadata field {key} is not finite")

    def region_boxes(self) -> list[PixelBox]:
        return [PixelBox(*lead["region_box"]) for lead in self.leads]

    def name_boxes(self) -> list[PixelBox]:
        return [PixelBox(*lead["name_box"]) for lead in self.leads]

    def canvas_spec(self) -> CanvasSpec:
        c = self.canvas
        return CanvasSpec(
            dpi=c["dpi"], width_px=c["width_px"], height_px=c["height_px"],
            margin_top=c["margin_top"], margin_bottom=c["margin_bottom"],
            margin_left=c["margin_left"], margin_right=c["margin_right"],
            lead_gap_px=c["lead_gap_px"], pulse_slot_px=c["pulse_slot_px"])


def _walk(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _walk(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


METADATA_KEYS = tuple(f.name for f in fields(SampleMetadata))


def emit_metadata(meta: SampleMetadata) -> str:
    meta.check()
    return json.dumps(asdict(meta), indent=2, ensure_ascii=False) + "\n"


def parse_metadata(text: str) -> SampleMetadata:
    data = json.loads(text)
    unknown = set(data) - set(METADATA_KEYS)
    if unknown:
        raise ValueError(f"unknown metadata keys: {sorted(unknown)}")
    return SampleMetadata(**data)
