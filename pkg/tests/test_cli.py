import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from ecgsynth.cli import EXIT_FAILURES, EXIT_FATAL, EXIT_OK, main
from ecgsynth.fixtures import write_fixture_dataset
from ecgsynth.ingest import write_record


def _config(tmp_path, n=3, extra=""):
    write_fixture_dataset(tmp_path, n)
    cfg = tmp_path / "run.yaml"
    cfg.write_text("records_dir: records\nindex_csv: index.csv\noutput_root: out\n" + extra)
    return cfg


def test_generate_ok(tmp_path, capsys):
    cfg = _config(tmp_path)
    assert main(["generate", "--config", str(cfg), "--limit", "2",
                 "--workers", "1", "--seed", "5"]) == EXIT_OK
    assert "2 succeeded" in capsys.readouterr().out
    assert len(list((tmp_path / "out").glob("*/images/*.jpg"))) == 2


def test_generate_overwrite_false_reuses(tmp_path, capsys):
    cfg = _config(tmp_path, n=2)
    assert main(["generate", "--config", str(cfg)]) == EXIT_OK
    assert main(["generate", "--config", str(cfg), "--overwrite", "false"]) == EXIT_OK
    assert "2 already present" in capsys.readouterr().out


def test_generate_with_failures(tmp_path):
    cfg = _config(tmp_path)
    write_record(tmp_path / "records", "00001_hr", np.zeros((12, 100)) + 0.1)
    assert main(["generate", "--config", str(cfg)]) == EXIT_FAILURES


@pytest.mark.parametrize("extra", ["paper_speed: [30]\n", "bogus: 1\n", "a: [\n"])
def test_generate_bad_config(tmp_path, extra):
    assert main(["generate", "--config", str(_config(tmp_path, 1, extra))]) == EXIT_FATAL


def test_generate_missing_config(tmp_path):
    assert main(["generate", "--config", str(tmp_path / "none.yaml")]) == EXIT_FATAL


def test_generate_missing_index(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("index_csv: missing.csv\noutput_root: out\n")
    assert main(["generate", "--config", str(cfg)]) == EXIT_FATAL


def test_generate_bad_splits(tmp_path):
    cfg = _config(tmp_path, 1)
    assert main(["generate", "--config", str(cfg), "--splits", "train,dev"]) == EXIT_FATAL


def test_validate_and_stats(generated_small, capsys):
    out, _ = generated_small
    copy_root = out.parent / "cli_validate"
    if not copy_root.exists():
        shutil.copytree(out, copy_root)
    assert main(["validate", "--output-root", str(copy_root), "--sample", "3"]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert main(["stats", "--output-root", str(copy_root)]) == EXIT_OK
    stats = json.loads(capsys.readouterr().out)
    assert stats["total"] == 6
    speeds = stats["distributions"]["paper_speed"]
    assert speeds["25"]["count"] + speeds["50"]["count"] == 6


def test_validate_failure_exit(generated_small, tmp_path):
    out, _ = generated_small
    dst = tmp_path / "t"
    shutil.copytree(out, dst)
    next(dst.glob("*/signals/*.npy")).unlink()
    assert main(["validate", "--output-root", str(dst)]) == EXIT_FAILURES


def test_validate_missing_root(tmp_path):
    assert main(["validate", "--output-root", str(tmp_path / "x")]) == EXIT_FATAL


def test_inspect(generated_small, capsys):
    out, _ = generated_small
    assert main(["inspect", "--record", "2", "--output-root", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    doc_text, labels = text.split("# ", 1)
    assert json.loads(doc_text)["record_id"] == "2"
    assert len(labels.splitlines()) == 25


def test_inspect_unknown(generated_small):
    out, _ = generated_small
    assert main(["inspect", "--record", "999", "--output-root", str(out)]) == EXIT_FATAL


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ecgsynth", "--help"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "generate" in res.stdout
