"""Generate a small dataset and read the traces back out of the masks.

``python demos/roundtrip_check.py [N]`` writes N fixture records (default 12)
to a temporary directory, renders them, then extracts every lead from its
mask and scores it against the stored signal.
"""
import sys
import tempfile
from pathlib import Path

from ecgsynth.config import Config
from ecgsynth.fixtures import write_fixture_dataset
from ecgsynth.pipeline import run
from ecgsynth.validate import format_report, roundtrip_report

n = int(sys.argv[1]) if len(sys.argv) > 1 else 12

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    index = write_fixture_dataset(tmp, n)
    config = Config(records_dir=str(tmp / "records"), index_csv=str(index),
                    output_root=str(tmp / "out"))
    report = run(config)
    print(report.summary(), "\n")

    # Sine sweeps, square waves and template beats, each at its own page scale.
    rt = roundtrip_report(tmp / "out", write=False)
    print(format_report(rt))
