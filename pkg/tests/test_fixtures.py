import csv

import numpy as np
import pytest
from scipy.signal import find_peaks

from ecgsynth.errors import UnknownKind
from ecgsynth.fixtures import KINDS, synth_fixture, write_fixture_dataset
from ecgsynth.ingest import load_index, read_record


def test_sine_lead0_peak():
    rec = synth_fixture("sine_sweep")
    assert rec.values.shape == (12, 5000)
    assert rec.values[0, 125] == pytest.approx(1.0)
    assert rec.values[0].max() == pytest.approx(1.0)
    assert rec.values[11, 125 // 12 + 1] == pytest.approx(np.sin(2 * np.pi * 12 * (11 / 500)))


def test_square_levels_and_rate():
    v = synth_fixture("square", 4).values
    assert set(np.unique(v)) == {-0.5, 0.5}
    rises = np.sum((v[0, 1:] > 0) & (v[0, :-1] < 0))
    assert rises in (19, 20)


@pytest.mark.parametrize("kind", KINDS)
def test_deterministic_and_bounded(kind):
    a, b = synth_fixture(kind, 11), synth_fixture(kind, 11)
    np.testing.assert_array_equal(a.values, b.values)
    assert np.isfinite(a.values).all() and np.abs(a.values).max() <= 2.0


@pytest.mark.parametrize("seed", range(5))
def test_ecg_peak_count(seed):
    rec = synth_fixture("ecg_template", seed)
    expected = int(np.floor(10 * rec.description["bpm"] / 60))
    for lead in rec.values:
        peaks, _ = find_peaks(lead, height=0.8)
        assert len(peaks) == expected


def test_unknown_kind():
    with pytest.raises(UnknownKind):
        synth_fixture("triangle")


def test_dataset_layout(tmp_path):
    index = write_fixture_dataset(tmp_path, 12, noisy=(4,))
    idx = load_index(index.read_text())
    assert len(idx.records) == 12
    assert [r.strat_fold for r in idx.records][:10] == list(range(1, 11))
    assert len(idx.filtered().records) == 11
    header, m = read_record(tmp_path / "records" / "00002_hr")
    np.testing.assert_allclose(m.values, synth_fixture("square", 2).values, atol=5e-4)
