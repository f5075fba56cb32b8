"""End-to-end generation: one record in, five synchronized files out."""
from __future__ import annotations

import json
import logging
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import __version__
from .annotate import (
    REGION_CLASS,
    PixelBox,
    SampleMetadata,
    emit_metadata,
    emit_signals,
    emit_yolo_file,
    name_class,
    r6,
    to_yolo,
)
from .config import Config
from .dsp import condition_leads
from .errors import EcgSynthError, ZeroVariance
from .geometry import (
    DURATION_S,
    SAMPLING_RATE_HZ,
    CanvasSpec,
    LeadLayout,
    RenderParams,
    compute_calibration,
    compute_layout,
    sample_params,
)
from .ingest import (
    LEAD_ORDER,
    DatasetIndex,
    RecordMeta,
    assign_split,
    load_index,
    quality_filter,
    read_record,
)
from .render import encode_jpeg, encode_png, render_page
from .rng import derive_rng

logger = logging.getLogger(__name__)

ARTIFACTS = {
    "images": "jpg",
    "masks": "png",
    "signals": "npy",
    "labels": "txt",
    "metadata": "json",
}
N_SAMPLES = int(SAMPLING_RATE_HZ * DURATION_S)


class RecordRejected(EcgSynthError):
    """Record does not have the expected 12 x 5000 @ 500 Hz shape."""


class FatalRunError(EcgSynthError):
    """Index or output root unusable; the run cannot start."""


def artifact_paths(output_root: str | Path, split: str, record_id: str) -> dict:
    root = Path(output_root) / split
    return {kind: root / kind / f"{record_id}.{ext}"
            for kind, ext in ARTIFACTS.items()}


@lru_cache(maxsize=4)
def _layout(canvas: CanvasSpec) -> LeadLayout:
    return compute_layout(canvas)


@dataclass
class SampleResult:
    record_id: str
    split: str
    status: str                      # succeeded | existing | skipped | failed
    reason: str = ""
    params: RenderParams | None = None
    seconds: float = 0.0


def _atomic_write_all(blobs: dict[Path, bytes]) -> None:
    tmp = {}
    try:
        for path, data in blobs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            t = path.with_name(f".{path.name}.{os.getpid()}.tmp")
            t.write_bytes(data)
            tmp[path] = t
        for path, t in tmp.items():
            os.replace(t, path)
    finally:
        for t in tmp.values():
            if t.exists():
                t.unlink()


def build_metadata(meta: RecordMeta, split: str, params: RenderParams, cal,
                   canvas: CanvasSpec, layout: LeadLayout, page, mus, sigmas,
                   invalid_samples: int) -> SampleMetadata:
    leads = []
    for lead, name_box, clipped, mu, sigma in zip(
            layout.leads, page.name_boxes, page.clipped_per_lead, mus, sigmas):
        leads.append({
            "name": lead.name,
            "baseline_y": r6(lead.baseline_y),
            "region_box": list(lead.region),
            "name_box": list(name_box.bbox),
            "mu_mV": r6(mu),
            "sigma_mV": r6(sigma),
            "clipped_samples": clipped,
        })
    return SampleMetadata(
        record_id=meta.record_id,
        split=split,
        generator_version=__version__,
        rng_seed=params.rng_seed,
        demographics={"age": meta.age, "sex": meta.sex,
                      "height": meta.height, "weight": meta.weight},
        scp_codes={k: r6(v) for k, v in meta.scp_codes.items()},
        superclasses=list(meta.superclasses),
        quality={"baseline_drift_level": meta.baseline_drift_level,
                 "static_noise_level": meta.static_noise_level},
        sampling_rate_hz=float(SAMPLING_RATE_HZ),
        duration_s=DURATION_S,
        n_samples=N_SAMPLES,
        lead_order=list(LEAD_ORDER),
        amplitude_units="z-score, drawn as 1 z = 1 mV",
        paper_speed_mm_s=params.paper_speed,
        voltage_scale_mm_mV=params.voltage_scale,
        grid_visible=params.grid_visible,
        grid_color=params.grid_color,
        grid_opacity=params.grid_opacity,
        stroke_width_px=r6(params.stroke_width_px),
        px_per_mm=r6(cal.px_per_mm),
        px_per_sec=r6(cal.px_per_sec),
        px_per_mV=r6(cal.px_per_mV),
        canvas={"dpi": canvas.dpi, "width_px": canvas.width_px,
                "height_px": canvas.height_px,
                "margin_top": canvas.margin_top,
                "margin_bottom": canvas.margin_bottom,
                "margin_left": canvas.margin_left,
                "margin_right": canvas.margin_right,
                "lead_gap_px": canvas.lead_gap_px,
                "pulse_slot_px": canvas.pulse_slot_px},
        clipped_sample_count=page.clipped_sample_count,
        invalid_sample_count=invalid_samples,
        header_box=list(page.header_box.bbox),
        leads=leads,
    )


def render_sample(meta: RecordMeta, split: str, signals_mv: np.ndarray,
                  config: Config, invalid_samples: int = 0) -> dict[str, bytes]:
    """Produce the five artifacts for one record as encoded bytes.

    Raises :class:`ZeroVariance` for flat leads; nothing is written here.
    """
    normalized, mus, sigmas = condition_leads(signals_mv, SAMPLING_RATE_HZ)
    params = sample_params(derive_rng(config.global_seed, meta.record_id),
                           config.domains)
    canvas = config.canvas
    layout = _layout(canvas)
    cal = compute_calibration(canvas, params, DURATION_S)
    page = render_page(normalized, params, canvas, layout, cal, SAMPLING_RATE_HZ)

    records = [to_yolo(PixelBox(*lead.region), REGION_CLASS, canvas)
               for lead in layout.leads]
    records += [to_yolo(PixelBox(*tb.bbox), name_class(i), canvas)
                for i, tb in enumerate(page.name_boxes)]
    md = build_metadata(meta, split, params, cal, canvas, layout, page,
                        mus, sigmas, invalid_samples)
    return {
        "images": encode_jpeg(page.image),
        "masks": encode_png(page.mask),
        "signals": emit_signals(normalized),
        "labels": emit_yolo_file(records).encode("ascii"),
        "metadata": emit_metadata(md).encode("utf-8"),
    }


def record_path(config: Config, meta: RecordMeta) -> Path:
    return Path(config.records_dir) / (meta.filename or meta.record_id)


def generate_sample(meta: RecordMeta, config: Config,
                    split: str | None = None) -> SampleResult:
    """Read, condition, render and write one record.

    Errors are isolated: flat leads give ``skipped``, anything else that goes
    wrong gives ``failed``; neither writes any file.
    """
    start = time.perf_counter()
    split = split or assign_split(meta.strat_fold)
    rid = meta.record_id
    params = sample_params(derive_rng(config.global_seed, rid), config.domains)
    paths = artifact_paths(config.output_root, split, rid)
    if not config.overwrite and all(p.exists() for p in paths.values()):
        return SampleResult(rid, split, "existing", params=params)
    try:
        header, signals = read_record(record_path(config, meta))
        if (header.n_signals != 12 or header.sampling_rate_hz != SAMPLING_RATE_HZ
                or header.n_samples != N_SAMPLES
                or signals.lead_order != LEAD_ORDER):
            raise RecordRejected(
                f"{rid}: need 12 standard leads x {N_SAMPLES} samples at "
                f"{SAMPLING_RATE_HZ} Hz, got {header.n_signals} x "
                f"{header.n_samples} at {header.sampling_rate_hz}")
        blobs = render_sample(meta, split, signals.values, config,
                              signals.invalid_sample_count)
        _atomic_write_all({paths[k]: blobs[k] for k in ARTIFACTS})
    except ZeroVariance as exc:
        logger.info("%s skipped: %s", rid, exc)
        return SampleResult(rid, split, "skipped", f"zero variance: {exc}", params)
    except (EcgSynthError, OSError, ValueError) as exc:
        logger.error("%s failed: %s", rid, exc)
        return SampleResult(rid, split, "failed",
                            f"{type(exc).__name__}: {exc}", params)
    return SampleResult(rid, split, "succeeded", params=params,
                        seconds=time.perf_counter() - start)


def _generate_job(job):
    meta, config, split = job
    return generate_sample(meta, config, split)


@dataclass
class RunReport:
    total: int = 0
    succeeded: int = 0
    failed: int = 0
    skipped: int = 0
    skipped_quality: int = 0
    skipped_zero_variance: int = 0
    reused_existing: int = 0
    per_split: dict = field(default_factory=dict)
    distributions: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    wall_time_s: float = 0.0
    mean_seconds_per_sample: float = 0.0

    TIMING_FIELDS = ("wall_time_s", "mean_seconds_per_sample")

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for key in self.TIMING_FIELDS:
                d.pop(key)
        return d

    def summary(self) -> str:
        lines = [f"total {self.total}: {self.succeeded} succeeded "
                 f"({self.reused_existing} already present), {self.failed} failed, "
                 f"{self.skipped} skipped ({self.skipped_quality} quality, "
                 f"{self.skipped_zero_variance} zero variance)",
                 f"wall time {self.wall_time_s:.1f} s, "
                 f"{self.mean_seconds_per_sample:.2f} s/sample"]
        for split, n in self.per_split.items():
            lines.append(f"  {split}: {n}")
        for name, dist in self.distributions.items():
            lines.append(f"  {name}: {dist}")
        return "\n".join(lines)


def parameter_distributions(params: list[RenderParams]) -> dict:
    """Fractions for each randomized categorical and stroke-width stats."""
    n = len(params)

    def freq(values, domain):
        c = Counter(values)
        return {str(k).lower(): {"count": c.get(k, 0),
                                 "fraction": r6(c.get(k, 0) / n) if n else 0.0}
                for k in domain}

    from .geometry import GRID_COLORS, GRID_VISIBILITY, PAPER_SPEEDS, VOLTAGE_SCALES
    widths = np.array([p.stroke_width_px for p in params], dtype=float)
    return {
        "paper_speed": freq([p.paper_speed for p in params], PAPER_SPEEDS),
        "voltage_scale": freq([p.voltage_scale for p in params], VOLTAGE_SCALES),
        "grid_visible": freq([p.grid_visible for p in params], GRID_VISIBILITY),
        "grid_color": freq([p.grid_color for p in params], GRID_COLORS),
        "stroke_width_px": {
            "count": n,
            "mean": r6(widths.mean()) if n else 0.0,
            "min": r6(widths.min()) if n else 0.0,
            "max": r6(widths.max()) if n else 0.0,
        },
    }


def select_records(index: DatasetIndex, config: Config):
    """(meta, split) pairs in index order, restricted to splits and limit."""
    chosen = []
    for meta in index.records:
        split = assign_split(meta.strat_fold)
        if split not in config.splits:
            continue
        chosen.append((meta, split))
        if config.limit is not None and len(chosen) >= config.limit:
            break
    return chosen


def run(config: Config, index: DatasetIndex | None = None) -> RunReport:
    """Generate every selected record and write ``run_report.json``.

    Only an unreadable index or unwritable output root is fatal; per-record
    problems are counted and the run carries on.
    """
    start = time.perf_counter()
    if index is None:
        try:
            text = Path(config.index_csv).read_text(encoding="utf-8")
        except OSError as exc:
            raise FatalRunError(f"cannot read index {config.index_csv}: {exc}") from exc
        index = load_index(text, config.columns)
    out = Path(config.output_root)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / f".write-probe-{os.getpid()}"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise FatalRunError(f"output root {out} is not writable: {exc}") from exc

    report = RunReport(per_split={s: 0 for s in config.splits})
    jobs = []
    for meta, split in select_records(index, config):
        report.total += 1
        if not quality_filter(meta):
            report.skipped += 1
            report.skipped_quality += 1
            continue
        jobs.append((meta, config, split))

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_generate_job, jobs, chunksize=1))
    else:
        results = [_generate_job(job) for job in jobs]

    produced = []
    seconds = []
    for res in results:
        if res.status in ("succeeded", "existing"):
            report.succeeded += 1
            report.per_split[res.split] += 1
            produced.append(res.params)
            if res.status == "existing":
                report.reused_existing += 1
            else:
                seconds.append(res.seconds)
        elif res.status == "skipped":
            report.skipped += 1
            report.skipped_zero_variance += 1
        else:
            report.failed += 1
            report.failures.append({"record_id": res.record_id,
                                    "error": res.reason})
    report.distributions = parameter_distributions(produced)
    report.wall_time_s = round(time.perf_counter() - start, 3)
    report.mean_seconds_per_sample = round(float(np.mean(seconds)), 4) if seconds else 0.0
    (out / "run_report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    logger.info("%s", report.summary())
    return report
