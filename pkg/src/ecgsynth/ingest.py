"""WFDB record parsing, metadata index loading, quality filtering and splits.

Only what the generator needs is supported: single-segment records whose
signals are stored in WFDB format 16 (little-endian two's-complement int16,
frames interleaved).
"""
from __future__ import annotations

import ast
import csv
import io
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    InvalidFold,
    InvalidLead,
    LengthMismatch,
    MalformedHeader,
    MissingColumn,
    UnparseableRow,
    UnsupportedFormat,
)

logger = logging.getLogger(__name__)

LEAD_ORDER = ("I", "II", "III", "aVR", "aVL", "aVF",
              "V1", "V2", "V3", "V4", "V5", "V6")
SUPERCLASSES = ("NORM", "MI", "STTC", "CD", "HYP")

WFDB_INVALID_SAMPLE = -32768
DEFAULT_GAIN = 200.0

# Diagnostic SCP statement -> diagnostic superclass.  Form and rhythm
# statements carry no superclass and are absent on purpose.
SCP_SUPERCLASS = {
    "NORM": "NORM",
    # myocardial infarction
    "IMI": "MI", "ASMI": "MI", "ILMI": "MI", "AMI": "MI", "ALMI": "MI",
    "INJAS": "MI", "LMI": "MI", "INJAL": "MI", "IPLMI": "MI", "IPMI": "MI",
    "INJIN": "MI", "INJLA": "MI", "PMI": "MI", "INJIL": "MI",
    # ST/T change
    "NDT": "STTC", "NST_": "STTC", "DIG": "STTC", "LNGQT": "STTC",
    "ISC_": "STTC", "ISCAL": "STTC", "ISCIN": "STTC", "ISCIL": "STTC",
    "ISCAS": "STTC", "ISCLA": "STTC", "ANEUR": "STTC", "EL": "STTC",
    "ISCAN": "STTC",
    # conduction disturbance
    "LAFB": "CD", "IRBBB": "CD", "1AVB": "CD", "IVCD": "CD", "CRBBB": "CD",
    "CLBBB": "CD", "LPFB": "CD", "WPW": "CD", "ILBBB": "CD", "3AVB": "CD",
    "2AVB": "CD",
    # hypertrophy
    "LVH": "HYP", "LAO/LAE": "HYP", "RVH": "HYP", "RAO/RAE": "HYP",
    "SEHYP": "HYP",
}


# --------------------------------------------------------------------------
# WFDB header
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalSpec:
    filename: str
    format_code: int
    gain: float
    baseline: int
    units: str = "mV"
    adc_resolution: int = 16
    adc_zero: int = 0
    initial_value: int = 0
    checksum: int = 0
    block_size: int = 0
    lead_name: str = ""
    byte_offset: int = 0


@dataclass(frozen=True)
class RecordHeader:
    record_name: str
    n_signals: int
    sampling_rate_hz: float
    n_samples: int
    signals: tuple[SignalSpec, ...]

    @property
    def lead_names(self) -> list[str]:
        return [s.lead_name for s in self.signals]

    def to_text(self) -> str:
        """Serialize back to header grammar (inverse of :func:`parse_header`)."""
        lines = [f"{self.record_name} {self.n_signals} "
                 f"{_fmt_num(self.sampling_rate_hz)} {self.n_samples}"]
        for s in self.signals:
            fmt = str(s.format_code)
            if s.byte_offset:
                fmt += f"+{s.byte_offset}"
            tokens = [s.filename, fmt,
                      f"{_fmt_num(s.gain)}({s.baseline})/{s.units}",
                      str(s.adc_resolution), str(s.adc_zero),
                      str(s.initial_value), str(s.checksum), str(s.block_size)]
            if s.lead_name:
                tokens.append(s.lead_name)
            lines.append(" ".join(tokens))
        return "\n".join(lines) + "\n"


def _fmt_num(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


_FORMAT_RE = re.compile(r"^(\d+)(?:x\d+)?(?::-?\d+)?(?:\+(\d+))?$")
_GAIN_RE = re.compile(r"^([-+0-9.eE]+)(?:\((-?\d+)\))?(?:/(\S+))?$")


def _to_int(token: str, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise MalformedHeader(f"non-integer {what}: {token!r}") from None


def _to_float(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedHeader(f"non-numeric {what}: {token!r}") from None
    if not math.isfinite(value):
        raise MalformedHeader(f"non-finite {what}: {token!r}")
    return value


def _parse_signal_line(line: str) -> SignalSpec:
    tokens = line.split()
    if len(tokens) < 2:
        raise MalformedHeader(f"signal line needs filename and format: {line!r}")
    m = _FORMAT_RE.match(tokens[1])
    if m is None:
        raise MalformedHeader(f"bad format field: {tokens[1]!r}")
    fmt = int(m.group(1))
    if fmt != 16:
        raise UnsupportedFormat(f"WFDB format {fmt} is not supported (only 16)")
    byte_offset = int(m.group(2) or 0)

    gain, baseline, units = DEFAULT_GAIN, None, "mV"
    if len(tokens) > 2:
        g = _GAIN_RE.match(tokens[2])
        if g is None:
            raise MalformedHeader(f"bad gain field: {tokens[2]!r}")
        gain = _to_float(g.group(1), "gain")
        if g.group(2) is not None:
            baseline = int(g.group(2))
        if g.group(3):
            units = g.group(3)
        if gain == 0:
            gain = DEFAULT_GAIN
        if gain < 0:
            raise MalformedHeader(f"negative gain: {gain}")
    adc_res = _to_int(tokens[3], "adc resolution") if len(tokens) > 3 else 16
    adc_zero = _to_int(tokens[4], "adc zero") if len(tokens) > 4 else 0
    init_val = _to_int(tokens[5], "initial value") if len(tokens) > 5 else 0
    checksum = _to_int(tokens[6], "checksum") if len(tokens) > 6 else 0
    block = _to_int(tokens[7], "block size") if len(tokens) > 7 else 0
    description = " ".join(tokens[8:])
    return SignalSpec(
        filename=tokens[0], format_code=fmt, gain=gain,
        baseline=adc_zero if baseline is None else baseline, units=units,
        adc_resolution=adc_res, adc_zero=adc_zero, initial_value=init_val,
        checksum=checksum, block_size=block, lead_name=description,
        byte_offset=byte_offset,
    )


def parse_header(header_text: str) -> RecordHeader:
    """Parse the text of a WFDB ``.hea`` file.

    The record line must carry ``name n_signals fs n_samples``; everything
    after ``n_samples`` (base time/date) is ignored.  Omitted gain defaults to
    200 adu/mV and omitted baseline to the ADC zero (itself defaulting to 0).
    """
    lines = [ln.strip() for ln in header_text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedHeader("empty header")
    rec = lines[0].split()
    if len(rec) < 4:
        raise MalformedHeader(
            f"record line needs name, n_signals, fs, n_samples: {lines[0]!r}")
    name = rec[0].split("/")[0]
    if "/" in rec[0]:
        raise MalformedHeader("multi-segment records are not supported")
    n_sig = _to_int(rec[1], "signal count")
    fs = _to_float(rec[2].split("/")[0].split("(")[0], "sampling rate")
    n_samp = _to_int(rec[3], "sample count")
    if n_sig < 0 or n_samp < 0 or fs <= 0:
        raise MalformedHeader(f"invalid record line: {lines[0]!r}")
    sig_lines = lines[1:1 + n_sig]
    if len(sig_lines) != n_sig:
        raise MalformedHeader(
            f"expected {n_sig} signal lines, found {len(sig_lines)}")
    signals = tuple(_parse_signal_line(ln) for ln in sig_lines)
    return RecordHeader(name, n_sig, fs, n_samp, signals)


# --------------------------------------------------------------------------
# signal payload
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SignalMatrix:
    values: np.ndarray                   # (12, n_samples) millivolts
    lead_order: tuple[str, ...] = LEAD_ORDER
    invalid_sample_count: int = 0


def read_signals(header: RecordHeader, dat_bytes: bytes) -> SignalMatrix:
    """Decode a format-16 ``.dat`` payload into millivolts.

    Leads are returned in the standard 12-lead order whenever the header's
    lead names cover it (case-insensitive); otherwise header order is kept.
    WFDB invalid samples (-32768) become 0.0 mV and are tallied.
    """
    n_sig, n_samp = header.n_signals, header.n_samples
    offset = header.signals[0].byte_offset if header.signals else 0
    payload = dat_bytes[offset:]
    expected = 2 * n_sig * n_samp
    if len(payload) != expected:
        raise LengthMismatch(
            f"{header.record_name}: expected {expected} bytes, got {len(payload)}")
    raw = np.frombuffer(payload, dtype="<i2").reshape(n_samp, n_sig).T
    invalid = raw == WFDB_INVALID_SAMPLE
    if n_samp and np.any(invalid.all(axis=1)):
        bad = [header.signals[i].lead_name or str(i)
               for i in np.flatnonzero(invalid.all(axis=1))]
        raise InvalidLead(f"{header.record_name}: all samples invalid in {bad}")

    gains = np.array([s.gain for s in header.signals], dtype=np.float64)[:, None]
    baselines = np.array([s.baseline for s in header.signals],
                         dtype=np.float64)[:, None]
    mv = (raw.astype(np.float64) - baselines) / gains
    mv[invalid] = 0.0
    n_invalid = int(invalid.sum())
    if n_invalid:
        logger.warning("%s: %d invalid samples replaced by 0 mV",
                       header.record_name, n_invalid)

    names = [n.lower() for n in header.lead_names]
    order = tuple(header.lead_names)
    if set(names) >= {lead.lower() for lead in LEAD_ORDER}:
        idx = [names.index(lead.lower()) for lead in LEAD_ORDER]
        mv = mv[idx]
        order = LEAD_ORDER
    return SignalMatrix(np.ascontiguousarray(mv), order, n_invalid)


def encode_signals(values_mv: np.ndarray, gain: float = 1000.0,
                   baseline: int = 0) -> bytes:
    """Quantize a (n_signals, n_samples) mV matrix to a format-16 payload."""
    digital = np.rint(np.asarray(values_mv) * gain + baseline)
    digital = np.clip(digital, -32767, 32767).astype("<i2")
    return digital.T.tobytes()


def make_header(record_name: str, fs: float, n_samples: int,
                lead_names: Iterable[str] = LEAD_ORDER,
                gain: float = 1000.0, baseline: int = 0) -> RecordHeader:
    leads = list(lead_names)
    sigs = tuple(SignalSpec(f"{record_name}.dat", 16, gain, baseline,
                            lead_name=name) for name in leads)
    return RecordHeader(record_name, len(leads), fs, n_samples, sigs)


def write_record(directory: str | Path, record_name: str,
                 values_mv: np.ndarray, fs: float = 500.0,
                 gain: float = 1000.0) -> Path:
    """Write ``record_name.hea``/``.dat`` and return the record base path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = make_header(record_name, fs, values_mv.shape[1], gain=gain)
    base = directory / record_name
    base.with_suffix(".hea").write_text(header.to_text(), encoding="ascii")
    base.with_suffix(".dat").write_bytes(encode_signals(values_mv, gain))
    return base


def read_record(base_path: str | Path) -> tuple[RecordHeader, SignalMatrix]:
    """Read ``<base>.hea`` and the ``.dat`` file it names."""
    base = Path(base_path)
    hea = base.parent / (base.name + ".hea")
    header = parse_header(hea.read_text(encoding="latin-1"))
    if not header.signals:
        raise MalformedHeader(f"{hea}: no signals")
    dat = base.parent / header.signals[0].filename
    return header, read_signals(header, dat.read_bytes())


# --------------------------------------------------------------------------
# metadata index
# --------------------------------------------------------------------------

DEFAULT_COLUMNS = {
    "record_id": "ecg_id",
    "age": "age",
    "sex": "sex",
    "height": "height",
    "weight": "weight",
    "scp_codes": "scp_codes",
    "baseline_drift": "baseline_drift",
    "static_noise": "static_noise",
    "strat_fold": "strat_fold",
    "filename": "filename_hr",
}
_OPTIONAL_COLUMNS = {"filename"}


@dataclass(frozen=True)
class RecordMeta:
    record_id: str
    age: float | None = None
    sex: str = "unknown"
    height: float | None = None
    weight: float | None = None
    scp_codes: Mapping[str, float] = field(default_factory=dict)
    superclasses: tuple[str, ...] = ()
    baseline_drift_level: int = 0
    static_noise_level: int = 0
    strat_fold: int = 1
    filename: str | None = None


@dataclass(frozen=True)
class DatasetIndex:
    records: tuple[RecordMeta, ...]
    skipped_rows: int = 0

    @property
    def superclass_counts(self) -> dict[str, int]:
        return {k: c for k, (c, _) in diagnostic_distribution(self).items()}

    def filtered(self) -> "DatasetIndex":
        return replace(self, records=tuple(r for r in self.records
                                           if quality_filter(r)))


def superclasses_for(scp_codes: Mapping[str, float]) -> tuple[str, ...]:
    """Superclasses of every diagnostic code present (likelihood ignored)."""
    found = {SCP_SUPERCLASS[c] for c in scp_codes if c in SCP_SUPERCLASS}
    return tuple(s for s in SUPERCLASSES if s in found)


def parse_quality_grade(field_value: str | None) -> int:
    """Leading integer if present; otherwise 2 for any annotation, 0 if empty."""
    text = (field_value or "").strip()
    if not text or text.lower() == "nan":
        return 0
    m = re.match(r"^[+-]?\d+", text)
    if m:
        return int(m.group(0))
    return 2


def _optional_float(text: str) -> float | None:
    text = text.strip()
    if not text or text.lower() == "nan":
        return None
    value = float(text)
    return value if math.isfinite(value) else None


def _parse_sex(text: str) -> str:
    t = text.strip().lower()
    if t in ("0", "0.0", "m", "male"):
        return "male"
    if t in ("1", "1.0", "f", "female"):
        return "female"
    return "unknown"


def _parse_scp(text: str) -> dict[str, float]:
    text = text.strip()
    if not text:
        return {}
    parsed = ast.literal_eval(text)
    if not isinstance(parsed, dict):
        raise ValueError("scp_codes is not a mapping")
    return {str(k): float(v) for k, v in parsed.items()}


def _parse_row(row: Mapping[str, str], cols: Mapping[str, str]) -> RecordMeta:
    get = lambda key: (row.get(cols[key]) or "")  # noqa: E731
    record_id = get("record_id").strip()
    if not record_id:
        raise ValueError("empty record id")
    # float ids such as "1.0" come from spreadsheet round trips
    if re.fullmatch(r"\d+\.0+", record_id):
        record_id = record_id.split(".")[0]
    scp = _parse_scp(get("scp_codes"))
    fold = int(float(get("strat_fold")))
    filename = get("filename").strip() if "filename" in cols else ""
    return RecordMeta(
        record_id=record_id,
        age=_optional_float(get("age")),
        sex=_parse_sex(get("sex")),
        height=_optional_float(get("height")),
        weight=_optional_float(get("weight")),
        scp_codes=scp,
        superclasses=superclasses_for(scp),
        baseline_drift_level=parse_quality_grade(get("baseline_drift")),
        static_noise_level=parse_quality_grade(get("static_noise")),
        strat_fold=fold,
        filename=filename or None,
    )


def load_index(csv_text: str,
               columns: Mapping[str, str] | None = None) -> DatasetIndex:
    """Parse the metadata CSV into a :class:`DatasetIndex`.

    ``columns`` maps logical field names (see ``DEFAULT_COLUMNS``) to CSV
    header names.  Rows that fail to parse, carry an out-of-range fold or a
    duplicate id are skipped and counted.
    """
    cols = dict(DEFAULT_COLUMNS)
    cols.update(columns or {})
    reader = csv.DictReader(io.StringIO(csv_text))
    present = set(reader.fieldnames or ())
    missing = [k for k, c in cols.items()
               if c not in present and k not in _OPTIONAL_COLUMNS]
    if missing:
        raise MissingColumn(f"index lacks columns: "
                            f"{', '.join(cols[k] for k in missing)}")
    if cols["filename"] not in present:
        del cols["filename"]

    records, seen, skipped = [], set(), 0
    for line_no, row in enumerate(reader, start=2):
        try:
            meta = _parse_row(row, cols)
            if not 1 <= meta.strat_fold <= 10:
                raise UnparseableRow(f"fold {meta.strat_fold} out of range")
            if meta.record_id in seen:
                raise UnparseableRow(f"duplicate record id {meta.record_id}")
        except (ValueError, SyntaxError, UnparseableRow) as exc:
            skipped += 1
            logger.warning("index line %d skipped: %s", line_no, exc)
            continue
        seen.add(meta.record_id)
        records.append(meta)
    return DatasetIndex(tuple(records), skipped)


def quality_filter(meta: RecordMeta) -> bool:
    """True (accept) unless either quality grade exceeds 1."""
    return meta.baseline_drift_level <= 1 and meta.static_noise_level <= 1


def assign_split(strat_fold: int) -> str:
    if not isinstance(strat_fold, (int, np.integer)) or not 1 <= strat_fold <= 10:
        raise InvalidFold(f"fold must be an integer in [1, 10], got {strat_fold!r}")
    if strat_fold <= 7:
        return "train"
    if strat_fold == 8:
        return "val"
    return "test"


def diagnostic_distribution(index: DatasetIndex) -> dict[str, tuple[int, float]]:
    """Per-superclass (count, percentage of unique records).

    Superclasses overlap, so percentages can sum above 100.
    """
    total = len(index.records)
    counts = {s: 0 for s in SUPERCLASSES}
    for rec in index.records:
        for s in set(rec.superclasses):
            counts[s] += 1
    return {s: (c, 100.0 * c / total if total else 0.0)
            for s, c in counts.items()}
