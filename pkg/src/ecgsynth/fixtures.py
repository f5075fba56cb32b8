"""Deterministic synthetic 12-lead records and on-disk fixture datasets.

Three kinds are available:

``sine_sweep``
    lead ``k`` (0-based) is ``sin(2*pi*(k+1)*t)`` mV; independent of the seed.
``square``
    2 Hz square wave of +-0.5 mV (high for the first half of each period);
    the seed picks a per-lead phase shift in whole samples.
``ecg_template``
    ``floor(duration * bpm / 60)`` beats at R times ``(k + 1/2) * RR``, each
    the sum of five Gaussian waves (all times relative to the R peak)::

        wave  centre   width   amplitude (mV, drawn per lead)
        P     -0.20 s  25 ms   U(0.10, 0.20)
        Q     -0.035   10 ms   -U(0.05, 0.15)
        R      0       10 ms   U(0.90, 1.50)
        S     +0.035   10 ms   -U(0.10, 0.30)
        T     +0.28    40 ms   U(0.15, 0.35)

    with ``bpm ~ U(60, 90)``; draws come from ``numpy.random.default_rng(seed)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UnknownKind
from .ingest import LEAD_ORDER, write_record

KINDS = ("sine_sweep", "square", "ecg_template")
FS_HZ = 500
DURATION_S = 10.0
N_LEADS = len(LEAD_ORDER)

_WAVES = (  # name, centre s, sigma s, amplitude range mV
    ("P", -0.20, 0.025, (0.10, 0.20)),
    ("Q", -0.035, 0.010, (-0.15, -0.05)),
    ("R", 0.0, 0.010, (0.90, 1.50)),
    ("S", 0.035, 0.010, (-0.30, -0.10)),
    ("T", 0.28, 0.040, (0.15, 0.35)),
)


@dataclass(frozen=True)
class SyntheticRecord:
    kind: str
    seed: int
    values: np.ndarray                 # (12, n) millivolts
    description: dict = field(default_factory=dict)


def synth_fixture(kind: str, seed: int = 0, fs_hz: int = FS_HZ,
                  duration_s: float = DURATION_S) -> SyntheticRecord:
    n = int(round(fs_hz * duration_s))
    t = np.arange(n) / fs_hz
    if kind == "sine_sweep":
        values = np.array([np.sin(2 * np.pi * (k + 1) * t) for k in range(N_LEADS)])
        desc = {"frequencies_hz": list(range(1, N_LEADS + 1)), "amplitude_mv": 1.0}
    elif kind == "square":
        rng = np.random.default_rng(seed)
        period = int(round(fs_hz / 2))
        shifts = rng.integers(0, period, size=N_LEADS)
        i = np.arange(n)
        values = np.array([np.where((i + s) % period < period // 2, 0.5, -0.5)
                           for s in shifts])
        desc = {"frequency_hz": 2.0, "amplitude_mv": 0.5,
                "phase_shift_samples": shifts.tolist()}
    elif kind == "ecg_template":
        rng = np.random.default_rng(seed)
        bpm = float(rng.uniform(60.0, 90.0))
        rr = 60.0 / bpm
        n_beats = int(np.floor(duration_s * bpm / 60.0))
        r_times = (np.arange(n_beats) + 0.5) * rr
        amps = np.array([[rng.uniform(*w[3]) for w in _WAVES]
                         for _ in range(N_LEADS)])
        values = np.zeros((N_LEADS, n))
        for (name, centre, sigma, _), col in zip(_WAVES, amps.T):
            shape = np.zeros(n)
            for r in r_times:
                shape += np.exp(-0.5 * ((t - r - centre) / sigma) ** 2)
            values += col[:, None] * shape[None, :]
        desc = {"bpm": bpm, "n_beats": n_beats, "r_times_s": r_times.tolist(),
                "wave_amplitudes_mv": {w[0]: amps[:, j].tolist()
                                       for j, w in enumerate(_WAVES)}}
    else:
        raise UnknownKind(f"unknown fixture kind {kind!r}; choose from {KINDS}")
    return SyntheticRecord(kind, seed, values, desc)


INDEX_FIELDS = ("ecg_id", "patient_id", "age", "sex", "height", "weight",
                "scp_codes", "baseline_drift", "static_noise", "strat_fold",
                "filename_hr")

_SCP_CYCLE = ("{'NORM': 100.0, 'SR': 0.0}", "{'IMI': 100.0}",
              "{'NDT': 100.0}", "{'CLBBB': 100.0}", "{'LVH': 50.0, 'NORM': 80.0}")


def write_fixture_dataset(root: str | Path, n_records: int, seed: int = 0,
                          kinds=KINDS, noisy: tuple[int, ...] = ()) -> Path:
    """Write WFDB records plus an index CSV under ``root``.

    Record ``i`` (1-based id) uses ``kinds[(i-1) % len(kinds)]`` seeded with
    ``seed + i``, fold ``(i-1) % 10 + 1``.  Ids listed in ``noisy`` get a
    baseline-drift grade of 2 so the quality filter rejects them.  Returns the
    index path.
    """
    root = Path(root)
    rec_dir = root / "records"
    rows = []
    for i in range(1, n_records + 1):
        kind = kinds[(i - 1) % len(kinds)]
        rec = synth_fixture(kind, seed + i)
        name = f"{i:05d}_hr"
        write_record(rec_dir, name, rec.values, fs=FS_HZ)
        rows.append({
            "ecg_id": i, "patient_id": 1000 + i,
            "age": 40 + i % 50 if i % 7 else "",
            "sex": i % 2, "height": "" if i % 3 else 170.0,
            "weight": "" if i % 4 else 70.0,
            "scp_codes": _SCP_CYCLE[(i - 1) % len(_SCP_CYCLE)],
            "baseline_drift": "2" if i in noisy else "",
            "static_noise": "",
            "strat_fold": (i - 1) % 10 + 1,
            "filename_hr": name,
        })
    index = root / "index.csv"
    with index.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=INDEX_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    return index
