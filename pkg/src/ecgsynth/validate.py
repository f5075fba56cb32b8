"""Quantitative checks on generated samples.

* mask -> signal extraction and round-trip fidelity (Pearson r, MSE),
* box IoU and annotation self-consistency,
* band-pass spectral behaviour and z-score accuracy,
* parameter-distribution audits over metadata files or seeded draws.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotate import (
    REGION_CLASS,
    PixelBox,
    from_yolo,
    load_signals,
    name_class,
    parse_metadata,
    parse_yolo_file,
    to_yolo,
)
from .glyphs import glyph_advance
from .dsp import default_bandpass, filtfilt
from .errors import ConstantSeries, EmptyLead, LengthMismatch, MissingArtifact
from .geometry import (
    CalibrationModel,
    LeadLayout,
    ParamDomains,
    RenderParams,
    compute_calibration,
    compute_layout,
    sample_params,
)
from .pipeline import ARTIFACTS, parameter_distributions
from .render import LABEL_HEIGHT_PX, decode_image
from .rng import derive_rng

# Supersampled binarization moves the effective cut of a steep edge off the
# column centre; 1/16 px was calibrated on straight-line renders.
CUT_OFFSET_PX = 0.0625
# Columns no taller than the stroke plus this margin count as shallow.
SHALLOW_MARGIN_PX = 1.0
R_MEAN_MIN = 0.998
R_LEAD_MIN = 0.995


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise LengthMismatch("need at least two samples")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(float(da @ da)), math.sqrt(float(db @ db))
    if sa == 0 or sb == 0:
        raise ConstantSeries("correlation undefined for a constant series")
    return max(-1.0, min(1.0, float(da @ db) / (sa * sb)))


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"lengths differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def iou(a: PixelBox, b: PixelBox) -> float:
    if (a.x, a.y, a.w, a.h) == (b.x, b.y, b.w, b.h):
        return 1.0 if a.w > 0 and a.h > 0 else 0.0
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


# --------------------------------------------------------------------------
# extraction
# --------------------------------------------------------------------------

def _centerline_points(top, bottom, has, centers, half_w):
    """Centerline samples implied by each column's white extent.

    A straight stroke of width ``w`` at angle ``theta`` cut along a pixel
    column spans ``D = w / cos(theta)`` rows, so one column yields the local
    slope and two centerline points offset by ``(w/2) sin theta`` either side
    of the column centre.  Direction comes from the neighbouring columns;
    local extrema contribute a single point one half-width inside the edge.
    """
    idx = np.flatnonzero(has)
    mid = 0.5 * (top + bottom)
    xs, ys = [], []
    for j, c in enumerate(idx):
        t, b, xc = top[c], bottom[c], centers[c]
        d = b - t
        prev_m = mid[idx[j - 1]] if j > 0 and idx[j - 1] == c - 1 else None
        next_m = mid[idx[j + 1]] if j + 1 < idx.size and idx[j + 1] == c + 1 else None
        if d <= 2 * half_w + SHALLOW_MARGIN_PX or prev_m is None or next_m is None:
            xs.append(xc)
            ys.append(mid[c])
            continue
        m = mid[c]
        if prev_m <= m <= next_m or prev_m >= m >= next_m:
            cos_t = 2 * half_w / d
            sin_t = math.sqrt(max(0.0, 1 - cos_t * cos_t))
            dx, dy = (half_w + CUT_OFFSET_PX) * sin_t, half_w * cos_t
            first, last = (t + dy, b - dy) if prev_m <= next_m else (b - dy, t + dy)
            xs += [xc - dx, xc + dx]
            ys += [first, last]
        elif m <= min(prev_m, next_m):
            xs.append(xc)
            ys.append(t + half_w)
        else:
            xs.append(xc)
            ys.append(b - half_w)
    return np.asarray(xs), np.asarray(ys)


def extract_lead(mask: np.ndarray, layout: LeadLayout, cal: CalibrationModel,
                 lead_index: int, fs_hz: int = 500, n_samples: int = 5000,
                 stroke_width: float = 2.0):
    """Recover one lead's samples (z-units) from the binary mask."""
    lead = layout[lead_index]
    pad = max((layout[1].top - layout[0].bottom) // 2, 2) if len(layout) > 1 else 4
    r_lo = max(lead.top - pad, 0)
    r_hi = min(lead.bottom + pad, mask.shape[0])
    x_end = lead.trace_x0 + (n_samples - 1) / fs_hz * cal.px_per_sec
    c_lo = max(int(math.floor(lead.trace_x0 - stroke_width)), 0)
    c_hi = min(int(math.ceil(x_end + stroke_width)), mask.shape[1] - 1)
    band = mask[r_lo:r_hi, c_lo:c_hi + 1] >= 128
    has = band.any(axis=0)
    if not has.any():
        raise EmptyLead(f"lead {lead.name}: no waveform pixels in mask")
    n_rows = band.shape[0]
    top = np.argmax(band, axis=0).astype(np.float64) + r_lo
    bottom = (n_rows - np.argmax(band[::-1], axis=0)).astype(np.float64) + r_lo
    centers = np.arange(c_lo, c_hi + 1, dtype=np.float64) + 0.5
    xs, ys = _centerline_points(top, bottom, has, centers, stroke_width / 2)
    order = np.argsort(xs, kind="stable")
    x = lead.trace_x0 + np.arange(n_samples) / fs_hz * cal.px_per_sec
    y = np.interp(x, xs[order], ys[order])
    return (lead.baseline_y - y) / cal.px_per_mV


def extract_from_mask(mask: np.ndarray, layout: LeadLayout, cal: CalibrationModel,
                      fs_hz: int = 500, n_samples: int = 5000,
                      stroke_width: float = 2.0) -> np.ndarray:
    """Per-lead signals, shape ``(leads, n_samples)``, read back from a mask."""
    return np.array([extract_lead(mask, layout, cal, i, fs_hz, n_samples, stroke_width)
                     for i in range(len(layout))])


def drawable_reference(signals: np.ndarray, layout: LeadLayout,
                       cal: CalibrationModel) -> np.ndarray:
    """Signals clamped to the amplitude range the page can draw per lead."""
    out = np.empty_like(signals, dtype=np.float64)
    for i, lead in enumerate(layout.leads):
        hi = (lead.baseline_y - (lead.top + 1.0)) / cal.px_per_mV
        lo = (lead.baseline_y - (lead.bottom - 1.0)) / cal.px_per_mV
        out[i] = np.clip(signals[i], lo, hi)
    return out


# --------------------------------------------------------------------------
# round trip over an output tree
# --------------------------------------------------------------------------

@dataclass
class RoundTripMetrics:
    pearson_r: list = field(default_factory=list)        # per sample, per lead
    mse: list = field(default_factory=list)
    max_abs_error: list = field(default_factory=list)
    pearson_r_unclipped: list = field(default_factory=list)

    def _flat(self, name):
        return np.array([v for row in getattr(self, name) for v in row], dtype=float)

    def aggregate(self) -> dict:
        out = {}
        for name in ("pearson_r", "mse", "max_abs_error", "pearson_r_unclipped"):
            v = self._flat(name)
            out[name] = {
                "mean": float(v.mean()) if v.size else float("nan"),
                "std": float(v.std()) if v.size else float("nan"),
                "min": float(v.min()) if v.size else float("nan"),
                "max": float(v.max()) if v.size else float("nan"),
            }
        return out


def find_samples(output_root: str | Path) -> list[tuple[str, Path]]:
    """(split, metadata path) for every sample, sorted by split then id."""
    root = Path(output_root)
    found = []
    for split in ("train", "val", "test"):
        found += [(split, p) for p in sorted((root / split / "metadata").glob("*.json"))]
    return found


def sample_geometry(meta):
    canvas = meta.canvas_spec()
    params = RenderParams(meta.paper_speed_mm_s, meta.voltage_scale_mm_mV,
                          meta.grid_visible, meta.grid_color, meta.stroke_width_px)
    return canvas, compute_layout(canvas), compute_calibration(canvas, params,
                                                               meta.duration_s)


def expected_label_records(canvas, layout: LeadLayout) -> list:
    """YOLO records recomputed from geometry and font metrics alone."""
    regions = [to_yolo(PixelBox(*lead.region), REGION_CLASS, canvas)
               for lead in layout.leads]
    names = []
    for i, lead in enumerate(layout.leads):
        w = len(lead.name) * glyph_advance(LABEL_HEIGHT_PX)
        box = PixelBox(lead.name_anchor[0], lead.name_anchor[1], w, LABEL_HEIGHT_PX)
        names.append(to_yolo(box, name_class(i), canvas))
    return regions + names


def annotation_consistency(meta, label_text: str) -> float:
    """Minimum IoU between emitted label boxes and recomputed ones.

    Both sides pass through the same 6-decimal label encoding, so a correct
    page scores exactly 1.  A wrong line count or class order scores 0.
    """
    canvas, layout, _ = sample_geometry(meta)
    emitted = parse_yolo_file(label_text)
    expected = expected_label_records(canvas, layout)
    if len(emitted) != len(expected):
        return 0.0
    worst = 1.0
    for got, want in zip(emitted, expected):
        if got.class_id != want.class_id:
            return 0.0
        want = parse_yolo_file(want.line())[0]
        worst = min(worst, iou(from_yolo(got, canvas), from_yolo(want, canvas)))
    return worst


def validate_sample(split: str, meta_path: Path) -> dict:
    root = meta_path.parent.parent
    rid = meta_path.stem
    paths = {kind: root / kind / f"{rid}.{ext}" for kind, ext in ARTIFACTS.items()}
    missing = [k for k, p in paths.items() if not p.exists()]
    if missing:
        raise MissingArtifact(f"{split}/{rid}: missing {', '.join(missing)}")
    meta = parse_metadata(paths["metadata"].read_text(encoding="utf-8"))
    canvas, layout, cal = sample_geometry(meta)
    mask = decode_image(paths["masks"].read_bytes())
    signals = load_signals(paths["signals"].read_bytes())
    fs = int(meta.sampling_rate_hz)
    extracted = extract_from_mask(mask, layout, cal, fs, signals.shape[1],
                                  meta.stroke_width_px)
    reference = drawable_reference(signals, layout, cal)
    r = [pearson(extracted[i], reference[i]) for i in range(len(layout))]
    return {
        "record_id": rid,
        "split": split,
        "paper_speed": meta.paper_speed_mm_s,
        "voltage_scale": meta.voltage_scale_mm_mV,
        "grid_visible": meta.grid_visible,
        "pearson_r": r,
        "pearson_r_unclipped": [pearson(extracted[i], signals[i])
                                for i in range(len(layout))],
        "mse": [mse(extracted[i], reference[i]) for i in range(len(layout))],
        "max_abs_error": [float(np.abs(extracted[i] - reference[i]).max())
                          for i in range(len(layout))],
        "clipped_sample_count": meta.clipped_sample_count,
        "annotation_iou_min": annotation_consistency(
            meta, paths["labels"].read_text(encoding="ascii")),
    }


def roundtrip_report(output_root: str | Path, sample_count: int | None = None,
                     write: bool = True) -> dict:
    """Validate up to ``sample_count`` samples and summarize.

    Passes iff every sample could be validated, the mean per-lead r is at
    least 0.998, the smallest per-lead r at least 0.995 and every page's
    labels match the geometry exactly (IoU 1).
    """
    samples = find_samples(output_root)
    if sample_count is not None:
        samples = samples[:sample_count]
    metrics = RoundTripMetrics()
    per_sample, errors = [], []
    for split, path in samples:
        try:
            res = validate_sample(split, path)
        except (EmptyLead, MissingArtifact, ConstantSeries) as exc:
            errors.append({"record_id": path.stem, "split": split,
                           "error": f"{type(exc).__name__}: {exc}"})
            continue
        per_sample.append(res)
        for name in ("pearson_r", "mse", "max_abs_error", "pearson_r_unclipped"):
            getattr(metrics, name).append(res[name])
    agg = metrics.aggregate()
    iou_min = min((s["annotation_iou_min"] for s in per_sample), default=float("nan"))
    passed = (bool(per_sample) and not errors
              and agg["pearson_r"]["mean"] >= R_MEAN_MIN
              and agg["pearson_r"]["min"] >= R_LEAD_MIN
              and iou_min == 1.0)
    report = {
        "samples_validated": len(per_sample),
        "errors": errors,
        "aggregate": agg,
        "annotation_iou_min": iou_min,
        "thresholds": {"mean_pearson_r": R_MEAN_MIN, "min_pearson_r": R_LEAD_MIN},
        "pass": passed,
        "samples": per_sample,
    }
    if write:
        Path(output_root, "validation_report.json").write_text(
            json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report


def format_report(report: dict) -> str:
    lines = [f"{'record':>10} {'split':>5} {'speed':>5} {'gain':>4} {'grid':>5} "
             f"{'mean r':>8} {'min r':>8} {'mse':>10} {'iou':>5}"]
    for s in report["samples"]:
        lines.append(
            f"{s['record_id']:>10} {s['split']:>5} {s['paper_speed']:>5} "
            f"{s['voltage_scale']:>4} {str(s['grid_visible']):>5} "
            f"{np.mean(s['pearson_r']):8.5f} {min(s['pearson_r']):8.5f} "
            f"{np.mean(s['mse']):10.3e} {s['annotation_iou_min']:5.3f}")
    for e in report["errors"]:
        lines.append(f"{e['record_id']:>10} {e['split']:>5} ERROR {e['error']}")
    agg = report["aggregate"]
    lines.append(
        f"mean r {agg['pearson_r']['mean']:.5f} +- {agg['pearson_r']['std']:.5f}, "
        f"min r {agg['pearson_r']['min']:.5f}, "
        f"mean mse {agg['mse']['mean']:.3e}, "
        f"max |err| {agg['max_abs_error']['max']:.4f}")
    lines.append("PASS" if report["pass"] else "FAIL")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# filter, normalization and distribution audits
# --------------------------------------------------------------------------

def tone_power_change(freqs_hz=(0.1, 10.0, 60.0), fs_hz: int = 500,
                      duration_s: float = 10.0) -> dict[float, float]:
    """Fractional power removed by the band-pass at each tone of a composite.

    Tones are placed on exact DFT bins, so each power is read from one bin.
    """
    t = np.arange(int(fs_hz * duration_s)) / fs_hz
    x = sum(np.sin(2 * np.pi * f * t) for f in freqs_hz)
    y = filtfilt(default_bandpass(float(fs_hz)), x)
    X, Y = np.fft.rfft(x), np.fft.rfft(y)
    bins = np.fft.rfftfreq(t.size, 1 / fs_hz)
    out = {}
    for f in freqs_hz:
        k = int(np.argmin(np.abs(bins - f)))
        out[f] = 1.0 - abs(Y[k]) ** 2 / abs(X[k]) ** 2
    return out


def normalization_audit(signal_arrays) -> dict:
    """Worst per-lead |mean| and |std - 1| over a collection of (12, N) arrays."""
    worst_mean, worst_std = 0.0, 0.0
    n = 0
    for arr in signal_arrays:
        arr = np.asarray(arr, dtype=np.float64)
        worst_mean = max(worst_mean, float(np.abs(arr.mean(axis=1)).max()))
        worst_std = max(worst_std, float(np.abs(arr.std(axis=1) - 1).max()))
        n += arr.shape[0]
    return {"leads": n, "max_abs_mean": worst_mean, "max_abs_std_dev": worst_std}


def parameter_audit(n_samples: int, global_seed: int = 0,
                    domains: ParamDomains = ParamDomains()) -> dict:
    """Distribution of parameters drawn for ``n_samples`` synthetic record ids."""
    params = [sample_params(derive_rng(global_seed, f"{i:05d}"), domains)
              for i in range(1, n_samples + 1)]
    return parameter_distributions(params)


def compute_stats(output_root: str | Path) -> dict:
    """Parameter distributions recomputed from the metadata files on disk."""
    params = []
    per_split: dict[str, int] = {}
    for split, path in find_samples(output_root):
        meta = json.loads(path.read_text(encoding="utf-8"))
        params.append(RenderParams(meta["paper_speed_mm_s"],
                                   meta["voltage_scale_mm_mV"],
                                   meta["grid_visible"], meta["grid_color"],
                                   meta["stroke_width_px"]))
        per_split[split] = per_split.get(split, 0) + 1
    total = len(params)
    return {
        "total": total,
        "per_split": {s: {"count": c, "fraction": c / total}
                      for s, c in per_split.items()},
        "distributions": parameter_distributions(params),
    }
