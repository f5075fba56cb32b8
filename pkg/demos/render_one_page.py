"""Render a single page from a synthetic record and look at what came out.

Run with ``python demos/render_one_page.py [OUTDIR]``.  The page, its mask
and the other three artifacts land in OUTDIR (default ``demo_page``).
"""
import sys
from pathlib import Path

import numpy as np

from ecgsynth.config import Config
from ecgsynth.fixtures import synth_fixture
from ecgsynth.geometry import compute_calibration, sample_params
from ecgsynth.ingest import RecordMeta
from ecgsynth.pipeline import render_sample
from ecgsynth.rng import derive_rng

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_page")
out.mkdir(parents=True, exist_ok=True)

# A template heartbeat at a random rate, twelve leads of slightly different shape.
record = synth_fixture("ecg_template", seed=7)
print(f"heart rate {record.description['bpm']:.1f} bpm, "
      f"{record.description['n_beats']} beats in 10 s")

# Page parameters depend only on the global seed and the record id.
meta = RecordMeta("demo", superclasses=("NORM",), scp_codes={"NORM": 100.0})
config = Config(global_seed=3)
params = sample_params(derive_rng(config.global_seed, meta.record_id))
cal = compute_calibration(config.canvas, params)
print(f"{params.paper_speed} mm/s, {params.voltage_scale} mm/mV, grid "
      f"{'on' if params.grid_visible else 'off'} ({params.grid_color}), "
      f"stroke {params.stroke_width_px:.2f} px")
print(f"1 mm = {cal.px_per_mm:.3f} px, 1 s = {cal.px_per_sec:.1f} px, "
      f"1 mV = {cal.px_per_mV:.2f} px")

blobs = render_sample(meta, "train", record.values, config)
for kind, ext in (("images", "jpg"), ("masks", "png"), ("signals", "npy"),
                  ("labels", "txt"), ("metadata", "json")):
    path = out / f"demo.{ext}"
    path.write_bytes(blobs[kind])
    print(f"{path}  {len(blobs[kind]) / 1024:7.1f} KB")

print("\nfirst label lines:")
print("\n".join(blobs["labels"].decode().splitlines()[:3]))
print(f"signals are z-scored: lead I mean "
      f"{np.load(out / 'demo.npy')[0].mean():.1e}")
