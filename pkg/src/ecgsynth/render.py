"""Rasterization of one ECG page and its waveform mask.

Everything is drawn with numpy so that identical inputs give byte-identical
rasters on every platform.  Strokes are the union of round-capped capsules
around each polyline segment; per-pixel coverage is the fraction of a 4x4
grid of sub-pixel centres that falls inside the stroke.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import AmplitudeOverflow, EmptyText, PathOutOfBounds
from .geometry import (
    CalibrationModel,
    CanvasSpec,
    LeadGeometry,
    LeadLayout,
    RenderParams,
    signal_to_path,
)
from .glyphs import text_bitmap

SUPERSAMPLE = 4
MASK_THRESHOLD = 0.5
BOUNDS_TOLERANCE_PX = 2.0
MAX_CLIP_FRACTION = 0.20
LABEL_HEIGHT_PX = 32
HEADER_HEIGHT_PX = 36
PULSE_MARGIN_PX = 5.0
PULSE_SLOT_RESERVE_PX = 20.0

GRID_RGB = {
    "red": (255, 0, 0),
    "green": (0, 128, 0),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
}
MINOR_ALPHA = 0.8
MAJOR_ALPHA = 1.0

_PAIR_CHUNK = 1 << 21


def new_canvas(spec: CanvasSpec) -> np.ndarray:
    return np.full((spec.height_px, spec.width_px, 3), 255, dtype=np.uint8)


def new_mask(spec: CanvasSpec) -> np.ndarray:
    return np.zeros((spec.height_px, spec.width_px), dtype=np.uint8)


# --------------------------------------------------------------------------
# grid
# --------------------------------------------------------------------------

def _line_codes(start: int, length: int, origin: float, step: float) -> np.ndarray:
    """0 = no line, 1 = minor, 2 = major for each pixel of one axis."""
    codes = np.zeros(length, dtype=np.uint8)
    k_lo = int(np.ceil((start - origin) / step)) - 1
    k_hi = int(np.floor((start + length - origin) / step)) + 1
    for k in range(k_lo, k_hi + 1):
        px = int(np.floor(origin + k * step)) - start
        major = k % 5 == 0
        for p in (px, px + 1) if major else (px,):
            if 0 <= p < length:
                codes[p] = max(codes[p], 2 if major else 1)
    return codes


def grid_line_codes(cal: CalibrationModel, layout: LeadLayout):
    """Row and column line codes over the lead-area box.

    Vertical lines are anchored at the trace origin (t = 0 falls on a bold
    line); horizontal lines at the top of the lead area.
    """
    x0, y0, w, h = layout.lead_area
    cols = _line_codes(x0, w, layout.trace_x0, cal.px_per_mm)
    rows = _line_codes(y0, h, float(y0), cal.px_per_mm)
    return rows, cols


def _blend_lut(alpha: float, color: tuple[int, int, int]) -> np.ndarray:
    v = np.arange(256, dtype=np.float64)[:, None]
    out = (1.0 - alpha) * v + alpha * np.asarray(color, dtype=np.float64)[None, :]
    return np.rint(out).astype(np.uint8)          # (256, 3)


def render_grid(canvas: np.ndarray, cal: CalibrationModel,
                params: RenderParams, layout: LeadLayout) -> np.ndarray:
    """Blend 1 mm minor (1 px) and 5 mm major (2 px) lines into ``canvas``."""
    if not params.grid_visible:
        return canvas
    rows, cols = grid_line_codes(cal, layout)
    x0, y0, w, h = layout.lead_area
    codes = np.maximum.outer(rows, cols)
    box = canvas[y0:y0 + h, x0:x0 + w]
    color = GRID_RGB[params.grid_color]
    for code, alpha in ((1, MINOR_ALPHA * params.grid_opacity / 0.8),
                        (2, MAJOR_ALPHA)):
        lut = _blend_lut(alpha, color)
        sel = codes == code
        px = box[sel]
        box[sel] = np.stack([lut[px[:, c], c] for c in range(3)], axis=1)
    return canvas


# --------------------------------------------------------------------------
# stroke rasterization
# --------------------------------------------------------------------------

def _stroke_box(path: np.ndarray, r: float, shape: tuple[int, int]):
    H, W = shape
    c0 = max(int(np.floor(path[:, 0].min() - r)) - 1, 0)
    c1 = min(int(np.ceil(path[:, 0].max() + r)) + 1, W)
    r0 = max(int(np.floor(path[:, 1].min() - r)) - 1, 0)
    r1 = min(int(np.ceil(path[:, 1].max() + r)) + 1, H)
    if c1 <= c0 or r1 <= r0:
        return None
    return r0, r1, c0, c1


def stroke_coverage(path, width: float, shape: tuple[int, int],
                    ss: int = SUPERSAMPLE):
    """Coverage of a round-capped polyline stroke.

    Returns ``(row0, col0, coverage)`` where ``coverage`` is a float array in
    [0, 1] for the clipped bounding box starting at ``(row0, col0)``, or
    ``None`` when nothing lands on the canvas.  Paths with strictly
    increasing x take the column-interval route; anything else is tested
    sub-sample by sub-sample.
    """
    path = np.asarray(path, dtype=np.float64).reshape(-1, 2)
    if len(path) == 0:
        return None
    if len(path) > 1 and np.all(np.diff(path[:, 0]) > 0):
        return _coverage_monotone(path, width, shape, ss)
    return _coverage_bruteforce(path, width, shape, ss)


def _coverage_monotone(path, width, shape, ss):
    """Coverage for a path whose x strictly increases.

    A vertical line meets each capsule (convex) in one interval, and the
    capsules it meets are consecutive and pairwise share an end disk the
    line also crosses, so the stroke's cross-section is a single interval:
    the min/max of the per-capsule bounds.
    """
    r = width / 2.0
    box = _stroke_box(path, r, shape)
    if box is None:
        return None
    r0, r1, c0, c1 = box
    n_cols = (c1 - c0) * ss
    n_rows = (r1 - r0) * ss
    cx = c0 + (np.arange(n_cols) + 0.5) / ss          # sub-column centres, px

    x, y = path[:, 0], path[:, 1]
    n_seg = len(path) - 1
    first = np.clip(np.searchsorted(x, cx - r, side="left") - 1, 0, n_seg - 1)
    last = np.clip(np.searchsorted(x, cx + r, side="right") - 1, 0, n_seg - 1)
    span = int((last - first).max()) + 1 if n_cols else 0

    lo = np.full(n_cols, np.inf)
    hi = np.full(n_cols, -np.inf)
    for k in range(span):
        seg = np.minimum(first + k, last)
        ok = first + k <= last
        x0, x1 = x[seg], x[seg + 1]
        y0 = y[seg]
        m = (y[seg + 1] - y0) / (x1 - x0)
        u_min = np.maximum(x0 - cx, -r)
        u_max = np.minimum(x1 - cx, r)
        ok &= u_min <= u_max
        root = np.sqrt(1.0 + m * m)
        base = y0 + m * (cx - x0)
        # lower edge: minimise m*u - sqrt(r^2 - u^2); upper: maximise m*u + sqrt(...)
        u = np.clip(-m * r / root, u_min, u_max)
        low = base + m * u - np.sqrt(np.maximum(r * r - u * u, 0.0))
        u = np.clip(m * r / root, u_min, u_max)
        high = base + m * u + np.sqrt(np.maximum(r * r - u * u, 0.0))
        lo = np.where(ok, np.minimum(lo, low), lo)
        hi = np.where(ok, np.maximum(hi, high), hi)

    # sub-row j has centre r0 + (j + 0.5)/ss; keep those inside [lo, hi]
    j_lo = np.ceil((lo - r0) * ss - 0.5)
    j_hi = np.floor((hi - r0) * ss - 0.5)
    valid = np.isfinite(lo) & (j_hi >= j_lo)
    j_lo = np.clip(j_lo, 0, n_rows).astype(np.int64)
    j_hi = np.clip(j_hi, -1, n_rows - 1).astype(np.int64)
    valid &= j_hi >= j_lo
    # per pixel row: ss sub-rows for rows strictly inside, partial at the ends
    cols = np.flatnonzero(valid)
    j_lo, j_hi = j_lo[cols], j_hi[cols]
    p_lo, p_hi = j_lo // ss, j_hi // ss
    n_pix = r1 - r0
    counts = np.zeros((n_pix + 1, n_cols), dtype=np.int32)
    np.add.at(counts, (p_lo, cols), ss)
    np.add.at(counts, (p_hi + 1, cols), -ss)
    counts = np.cumsum(counts[:-1], axis=0, dtype=np.int32)
    np.add.at(counts, (p_lo, cols), -(j_lo - p_lo * ss))
    np.add.at(counts, (p_hi, cols), -(p_hi * ss + ss - 1 - j_hi))
    cov = counts.reshape(n_pix, c1 - c0, ss).sum(axis=2)
    return r0, c0, cov.astype(np.float64) / (ss * ss)


def _coverage_bruteforce(path, width, shape, ss):
    r = width / 2.0
    box = _stroke_box(path, r, shape)
    if box is None:
        return None
    r0, r1, c0, c1 = box
    hits = np.zeros(((r1 - r0) * ss, (c1 - c0) * ss), dtype=bool)
    # sub-sample coordinates relative to the box, in sub-pixel units
    p = (path - np.array([c0, r0], dtype=np.float64)) * ss
    rs = r * ss
    a = p[:-1] if len(p) > 1 else p
    b = p[1:] if len(p) > 1 else p
    sx0 = np.maximum(np.ceil(np.minimum(a[:, 0], b[:, 0]) - rs - 0.5), 0).astype(np.int64)
    sx1 = np.minimum(np.floor(np.maximum(a[:, 0], b[:, 0]) + rs - 0.5),
                     hits.shape[1] - 1).astype(np.int64)
    sy0 = np.maximum(np.ceil(np.minimum(a[:, 1], b[:, 1]) - rs - 0.5), 0).astype(np.int64)
    sy1 = np.minimum(np.floor(np.maximum(a[:, 1], b[:, 1]) + rs - 0.5),
                     hits.shape[0] - 1).astype(np.int64)
    nx = np.maximum(sx1 - sx0 + 1, 0)
    ny = np.maximum(sy1 - sy0 + 1, 0)
    counts = nx * ny

    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    safe_dd = np.where(dd > 0, dd, 1.0)

    start = 0
    n_seg = len(a)
    csum = np.cumsum(counts)
    while start < n_seg:
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _PAIR_CHUNK, side="right"))
        stop = max(stop, start + 1)
        seg = np.arange(start, stop)
        cnt = counts[seg]
        total = int(cnt.sum())
        if total:
            idx = np.repeat(seg, cnt)
            offs = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            jx = sx0[idx] + offs % nx[idx]
            jy = sy0[idx] + offs // nx[idx]
            qx = jx + 0.5 - a[idx, 0]
            qy = jy + 0.5 - a[idx, 1]
            t = np.clip((qx * d[idx, 0] + qy * d[idx, 1]) / safe_dd[idx], 0.0, 1.0)
            ex = qx - t * d[idx, 0]
            ey = qy - t * d[idx, 1]
            inside = ex * ex + ey * ey <= rs * rs
            hits[jy[inside], jx[inside]] = True
        start = stop

    cov = hits.reshape(r1 - r0, ss, c1 - c0, ss).sum(axis=(1, 3))
    return r0, c0, cov.astype(np.float64) / (ss * ss)


def _composite_black(canvas: np.ndarray, r0: int, c0: int, cov: np.ndarray):
    h, w = cov.shape
    region = canvas[r0:r0 + h, c0:c0 + w]
    keep = (1.0 - cov)[..., None]
    region[...] = np.rint(region * keep).astype(np.uint8)


def check_bounds(path: np.ndarray, box: tuple[int, int, int, int],
                 tolerance: float = BOUNDS_TOLERANCE_PX) -> None:
    x, y, w, h = box
    if len(path) == 0:
        return
    xs, ys = path[:, 0], path[:, 1]
    if (xs.min() < x - tolerance or xs.max() > x + w + tolerance
            or ys.min() < y - tolerance or ys.max() > y + h + tolerance):
        raise PathOutOfBounds(f"path leaves box {box} by more than {tolerance} px")


def draw_trace(canvas: np.ndarray, mask: np.ndarray | None, path,
               stroke_width: float, bounds: tuple[int, int, int, int] | None = None):
    """Antialiased black stroke on ``canvas``; hard-thresholded copy on ``mask``.

    Both rasters come from the same coverage array, so the mask is exactly
    the set of pixels whose coverage reached 0.5.
    """
    path = np.asarray(path, dtype=np.float64).reshape(-1, 2)
    if len(path) == 0:
        return canvas, mask
    if bounds is not None:
        check_bounds(path, bounds)
    result = stroke_coverage(path, stroke_width, canvas.shape[:2])
    if result is None:
        return canvas, mask
    r0, c0, cov = result
    _composite_black(canvas, r0, c0, cov)
    if mask is not None:
        h, w = cov.shape
        mask[r0:r0 + h, c0:c0 + w][cov >= MASK_THRESHOLD] = 255
    return canvas, mask


def clip_to_region(path: np.ndarray, lead: LeadGeometry):
    """Clamp y into the lead region shrunk by 1 px; return (path, n_clipped)."""
    lo, hi = lead.top + 1.0, lead.bottom - 1.0
    ys = path[:, 1]
    clipped = (ys < lo) | (ys > hi)
    out = path.copy()
    out[:, 1] = np.clip(ys, lo, hi)
    return out, int(clipped.sum())


# --------------------------------------------------------------------------
# calibration pulse and text
# --------------------------------------------------------------------------

def pulse_path(lead: LeadGeometry, cal: CalibrationModel) -> np.ndarray:
    """Square 1 mV pulse centred in the slot left of the trace origin."""
    slot_x0 = float(lead.region[0])
    slot = lead.trace_x0 - slot_x0
    flat = min(0.2 * cal.px_per_sec, slot - PULSE_SLOT_RESERVE_PX)
    rise = slot_x0 + (slot - flat) / 2.0
    base = lead.baseline_y
    top = base - 1.0 * cal.px_per_mV
    return np.array([
        [slot_x0 + PULSE_MARGIN_PX, base],
        [rise, base],
        [rise, top],
        [rise + flat, top],
        [rise + flat, base],
        [lead.trace_x0 - PULSE_MARGIN_PX, base],
    ])


def draw_calibration_pulse(canvas: np.ndarray, lead: LeadGeometry,
                           cal: CalibrationModel, stroke_width: float = 2.0):
    """Draw the pulse on the image only; the mask never sees it."""
    draw_trace(canvas, None, pulse_path(lead, cal), stroke_width)
    return canvas


@dataclass(frozen=True)
class TextBox:
    text: str
    bbox: tuple[int, int, int, int]       # x, y, w, h


def render_text(canvas: np.ndarray, text: str, anchor: tuple[int, int],
                glyph_height_px: int) -> TextBox:
    """Draw ``text`` in black with its top-left cell corner at ``anchor``.

    The returned box is the fixed-metric text cell (``len(text)`` advances
    wide, one glyph height tall), which depends only on the string length,
    the anchor and the height.
    """
    if not text:
        raise EmptyText("cannot render empty text")
    bitmap = text_bitmap(text, glyph_height_px)
    x, y = int(anchor[0]), int(anchor[1])
    h, w = bitmap.shape
    H, W = canvas.shape[:2]
    if x < 0 or y < 0 or x + w > W or y + h > H:
        raise ValueError(f"text box ({x}, {y}, {w}, {h}) leaves the canvas")
    canvas[y:y + h, x:x + w][bitmap] = 0
    return TextBox(text, (x, y, w, h))


def header_text(params: RenderParams, fs_hz: int = 500) -> str:
    return (f"Speed: {params.paper_speed} mm/s   "
            f"Gain: {params.voltage_scale} mm/mV   Fs: {fs_hz} Hz")


def render_header(canvas: np.ndarray, params: RenderParams, fs_hz: int = 500,
                  band_height: int = 100) -> TextBox:
    """Centre the calibration header inside the top margin band."""
    text = header_text(params, fs_hz)
    width = text_bitmap(text, HEADER_HEIGHT_PX).shape[1]
    x = (canvas.shape[1] - width) // 2
    y = max((band_height - HEADER_HEIGHT_PX) // 2, 0)
    return render_text(canvas, text, (x, y), HEADER_HEIGHT_PX)


# --------------------------------------------------------------------------
# whole page
# --------------------------------------------------------------------------

@dataclass
class RenderedPage:
    image: np.ndarray
    mask: np.ndarray
    name_boxes: list[TextBox]
    header_box: TextBox
    clipped_per_lead: list[int]

    @property
    def clipped_sample_count(self) -> int:
        return int(sum(self.clipped_per_lead))


def render_page(signals: np.ndarray, params: RenderParams, canvas_spec: CanvasSpec,
                layout: LeadLayout, cal: CalibrationModel,
                fs_hz: int = 500) -> RenderedPage:
    """Grid, pulses, header and labels, then the twelve traces (always last)."""
    image = new_canvas(canvas_spec)
    mask = new_mask(canvas_spec)
    render_grid(image, cal, params, layout)
    for lead in layout.leads:
        draw_calibration_pulse(image, lead, cal, params.stroke_width_px)
    header = render_header(image, params, fs_hz, canvas_spec.margin_top)
    names = [render_text(image, lead.name, lead.name_anchor, LABEL_HEIGHT_PX)
             for lead in layout.leads]
    clipped = []
    for lead, values in zip(layout.leads, signals):
        path, n_clip = clip_to_region(signal_to_path(values, cal, lead, fs_hz), lead)
        if n_clip > MAX_CLIP_FRACTION * len(values):
            raise AmplitudeOverflow(
                f"lead {lead.name}: {n_clip} of {len(values)} samples clipped")
        draw_trace(image, mask, path, params.stroke_width_px, bounds=lead.region)
        clipped.append(n_clip)
    return RenderedPage(image, mask, names, header, clipped)


def encode_jpeg(image: np.ndarray, quality: int = 95) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, "RGB").save(buf, format="JPEG", quality=quality,
                                       subsampling=2)
    return buf.getvalue()


def encode_png(mask: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(mask, "L").save(buf, format="PNG")
    return buf.getvalue()


def decode_image(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im).copy()
