"""Raw pen-stream parsing, imputation, outlier repair, and standardization.

The raw format (csv-v1) is block-structured text: each block opens with a
``subject_id,task_id,label`` line followed by ``t_ms,x,y,p`` sample lines;
blocks are separated by blank lines. Field values that fail to parse become
missing samples rather than dropped rows; rows without a usable timestamp are
dropped, since timestamps define the interpolation axis and are never
imputed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DataQualityWarning, ProtocolError

log = logging.getLogger(__name__)

LABELS = ("HC", "AD")
CHANNELS = ("x", "y", "p")

# label <-> class index used everywhere downstream: HC=0, AD=1
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}


@dataclass
class RawRecord:
    """One (subject, task) recording; NaN marks a missing value."""

    subject_id: str
    task_id: int
    label: str
    t: np.ndarray  # milliseconds, always finite, non-decreasing
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if not 1 <= int(self.task_id) <= 25:
            raise ProtocolError("task_id %r outside 1..25" % (self.task_id,))
        if self.label not in LABELS:
            raise ProtocolError("label %r not one of %s" % (self.label, LABELS))
        lengths = {len(self.t), len(self.x), len(self.y), len(self.p)}
        if len(lengths) != 1:
            raise ProtocolError("channel lengths disagree: %s" % sorted(lengths))
        if np.any(np.diff(self.t) < 0):
            raise ProtocolError("timestamps decrease in subject %s task %d" % (self.subject_id, self.task_id))

    def __len__(self) -> int:
        return len(self.t)

    def channel(self, name: str) -> np.ndarray:
        if name not in CHANNELS:
            raise KeyError(name)
        return getattr(self, name)

    def replace_channels(self, **arrays: np.ndarray) -> "RawRecord":
        kw = dict(
            subject_id=self.subject_id,
            task_id=self.task_id,
            label=self.label,
            t=self.t,
            x=self.x,
            y=self.y,
            p=self.p,
        )
        kw.update(arrays)
        return RawRecord(**kw)


@dataclass
class StrokeSequence:
    """Dense, standardized pen trace plus the statistics to invert it."""

    subject_id: str
    task_id: int
    label: str
    t: np.ndarray  # milliseconds
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    stats: Dict[str, Tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name in CHANNELS:
            v = getattr(self, name)
            if not np.all(np.isfinite(v)):
                raise ProtocolError(
                    "non-finite %s channel in subject %s task %d" % (name, self.subject_id, self.task_id)
                )

    def __len__(self) -> int:
        return len(self.t)

    @property
    def label_index(self) -> int:
        return LABEL_TO_INDEX[self.label]


def _parse_field(text: str) -> float:
    text = text.strip()
    if not text:
        return np.nan
    try:
        return float(text)
    except ValueError:
        return np.nan


def _finish_block(header, rows, header_line_no) -> RawRecord:
    subject_id, task_text, label = header
    try:
        task_id = int(task_text)
    except ValueError:
        raise ProtocolError("line %d: task_id %r is not an integer" % (header_line_no, task_text))
    arr = np.array(rows, dtype=np.float64).reshape(-1, 4)
    keep = np.isfinite(arr[:, 0])  # rows without a timestamp are unusable
    arr = arr[keep]
    order = np.argsort(arr[:, 0], kind="stable")
    arr = arr[order]
    return RawRecord(
        subject_id=subject_id,
        task_id=task_id,
        label=label.strip(),
        t=arr[:, 0],
        x=arr[:, 1],
        y=arr[:, 2],
        p=arr[:, 3],
    )


def parse_raw(path, format_descriptor: str = "csv-v1") -> List[RawRecord]:
    """Parse a csv-v1 file into records, preserving block order."""
    if format_descriptor != "csv-v1":
        raise ProtocolError("unknown raw format %r (supported: csv-v1)" % format_descriptor)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    records: List[RawRecord] = []
    header = None
    header_line_no = 0
    rows: List[Tuple[float, float, float, float]] = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            if header is not None:
                records.append(_finish_block(header, rows, header_line_no))
                header, rows = None, []
            continue
        fields = stripped.split(",")
        if header is None:
            if len(fields) != 3:
                raise ProtocolError(
                    "line %d: expected header 'subject_id,task_id,label', got %r" % (line_no, stripped)
                )
            header = tuple(f.strip() for f in fields)
            header_line_no = line_no
            continue
        if len(fields) != 4:
            raise ProtocolError("line %d: expected 't_ms,x,y,p', got %r" % (line_no, stripped))
        rows.append(tuple(_parse_field(f) for f in fields))
    if header is not None:
        records.append(_finish_block(header, rows, header_line_no))
    if not records:
        raise ProtocolError("%s: no records found" % path)
    return records


def _interpolate_channel(t: np.ndarray, v: np.ndarray, where) -> np.ndarray:
    valid = np.isfinite(v)
    out = v.copy()
    # np.interp extrapolates by holding the nearest valid value constant
    out[where] = np.interp(t[where], t[valid], v[valid])
    return out


def impute_missing(r: RawRecord) -> RawRecord:
    """Fill missing x/y/p by linear interpolation along the timestamp axis."""
    updates = {}
    for name in CHANNELS:
        v = r.channel(name)
        missing = ~np.isfinite(v)
        if not missing.any():
            continue
        if np.count_nonzero(~missing) < 2:
            raise ProtocolError(
                "subject %s task %d channel %s: fewer than 2 valid samples to interpolate from"
                % (r.subject_id, r.task_id, name)
            )
        updates[name] = _interpolate_channel(r.t, v, missing)
    return r.replace_channels(**updates) if updates else r


def remove_outliers(r: RawRecord, z_max: float = 6.0) -> RawRecord:
    """Replace samples with robust z-score > z_max on any channel.

    z = |v - median| / (1.4826 * MAD). A flagged sample is blanked on all
    channels and refilled by the impute_missing interpolation, so sequence
    length is preserved for downstream differencing. Constant channels
    (MAD = 0) flag nothing.
    """
    n = len(r)
    if n == 0:
        return r
    flagged = np.zeros(n, dtype=bool)
    for name in CHANNELS:
        v = r.channel(name)
        med = np.median(v)
        mad = np.median(np.abs(v - med))
        if mad == 0:
            continue
        z = np.abs(v - med) / (1.4826 * mad)
        flagged |= z > z_max
    count = int(flagged.sum())
    if count == 0:
        return r
    log.info(
        "subject %s task %d: replacing %d/%d outlier samples", r.subject_id, r.task_id, count, n
    )
    if count > 0.2 * n:
        warnings.warn(
            "subject %s task %d: %d of %d samples flagged as outliers"
            % (r.subject_id, r.task_id, count, n),
            DataQualityWarning,
            stacklevel=2,
        )
    blanked = {name: np.where(flagged, np.nan, r.channel(name)) for name in CHANNELS}
    return impute_missing(r.replace_channels(**blanked))


def zscore(v: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """Population z-score; constant input clamps std to 1 and maps to zeros.

    A channel whose spread is float-rounding noise (std below 1e-9 of its
    magnitude) counts as constant: dividing by such a std would just amplify
    roundoff into a garbage channel.
    """
    mu = float(v.mean()) if len(v) else 0.0
    sd = float(v.std()) if len(v) else 1.0
    if not np.isfinite(sd) or sd <= 1e-9 * max(1.0, abs(mu)):
        return np.zeros_like(v), mu, 1.0
    z = (v - mu) / sd
    return z - z.mean(), mu, sd


def standardize(r: RawRecord) -> StrokeSequence:
    """Z-score x, y, p per record, keeping (mean, std) for invertibility."""
    for name in CHANNELS:
        if not np.all(np.isfinite(r.channel(name))):
            raise ProtocolError(
                "subject %s task %d: %s still has missing values; impute first"
                % (r.subject_id, r.task_id, name)
            )
    arrays = {}
    stats: Dict[str, Tuple[float, float]] = {}
    for name in CHANNELS:
        z, mu, sd = zscore(r.channel(name))
        arrays[name] = z
        stats[name] = (mu, sd)
    return StrokeSequence(
        subject_id=r.subject_id,
        task_id=r.task_id,
        label=r.label,
        t=r.t.copy(),
        stats=stats,
        **arrays,
    )


MIN_SAMPLES = 5  # downstream differencing needs this many points


def salvageable(r: RawRecord) -> bool:
    if len(r) < MIN_SAMPLES:
        return False
    for name in CHANNELS:
        if np.count_nonzero(np.isfinite(r.channel(name))) < 2:
            return False
    return True


def drop_incomplete(records: Iterable[RawRecord]) -> List[RawRecord]:
    """Drop unsalvageable (subject, task) records; other tasks are unaffected."""
    kept = []
    for r in records:
        if salvageable(r):
            kept.append(r)
        else:
            log.info("dropping subject %s task %d (unsalvageable)", r.subject_id, r.task_id)
    return kept


def preprocess(records: Iterable[RawRecord], z_max: float = 6.0) -> List[StrokeSequence]:
    """drop_incomplete -> impute_missing -> remove_outliers -> standardize."""
    out = []
    for r in drop_incomplete(records):
        out.append(standardize(remove_outliers(impute_missing(r), z_max=z_max)))
    return out
