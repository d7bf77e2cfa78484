"""Dataset representation, CSV ingestion, preprocessing and resampling.

A :class:`SurvivalDataset` couples a feature matrix (``NaN`` marks missing
values) with per-subject follow-up times and event indicators, plus one
:class:`FeatureSpec` per column describing how that column was obtained and
how it may be transformed. Datasets are immutable after construction and can
be shared freely across workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical"

_KINDS = (CONTINUOUS, BINARY, CATEGORICAL)


@dataclass(frozen=True)
class FeatureSpec:
    """Metadata for one explanatory column."""

    name: str
    kind: str
    observed_min: float = 0.0
    observed_max: float = 0.0
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown feature kind {self.kind!r}")
        if self.kind == CONTINUOUS and not (self.observed_min <= self.observed_max):
            raise ValidationError(
                f"feature {self.name!r}: observed_min > observed_max"
            )
        if self.kind == CATEGORICAL and not self.categories:
            raise ValidationError(f"feature {self.name!r}: no categories declared")


@dataclass(frozen=True)
class SurvivalRecord:
    """One subject: follow-up time in days, event flag, feature values.

    ``features`` uses ``None`` for missing entries. Invariants (time > 0,
    schema width) are enforced when records enter a :class:`SurvivalDataset`.
    """

    time: float
    event: bool
    features: tuple[float | None, ...]


@dataclass(frozen=True)
class SignedTime:
    """Survival time with censoring folded into the sign (+event, -censored)."""

    value: float


class SurvivalDataset:
    """Immutable survival dataset backed by numpy arrays.

    Parameters
    ----------
    time : array of positive floats, shape (n,)
    event : boolean array, shape (n,); True where death was observed
    features : float array, shape (n, p); NaN marks missing values
    specs : one FeatureSpec per feature column
    allow_no_events : permit a degenerate dataset with zero observed events
    """

    def __init__(self, time, event, features, specs, *, allow_no_events=False):
        time = np.asarray(time, dtype=np.float64)
        event = np.asarray(event, dtype=bool)
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            features = features.reshape(len(time), -1)
        specs = tuple(specs)

        if time.shape[0] == 0:
            raise ValidationError("dataset must contain at least one record")
        if not (time.shape[0] == event.shape[0] == features.shape[0]):
            raise ValidationError("time, event and features disagree on length")
        if features.shape[1] != len(specs):
            raise ValidationError(
                f"{features.shape[1]} feature columns but {len(specs)} specs"
            )
        if np.any(~np.isfinite(time)) or np.any(time <= 0):
            raise ValidationError("all survival times must be positive and finite")
        if not allow_no_events and not event.any():
            raise ValidationError(
                "dataset has no observed events (pass allow_no_events=True "
                "to construct it anyway)"
            )
        for j, spec in enumerate(specs):
            if spec.kind == BINARY:
                col = features[:, j]
                observed = col[~np.isnan(col)]
                if observed.size and not np.isin(observed, (0.0, 1.0)).all():
                    raise ValidationError(
                        f"binary feature {spec.name!r} takes values outside {{0,1}}"
                    )

        time.setflags(write=False)
        event.setflags(write=False)
        features.setflags(write=False)
        self.time = time
        self.event = event
        self.features = features
        self.specs = specs

    # -- construction ------------------------------------------------------

    @classmethod
    def from_records(cls, records, specs, *, allow_no_events=False):
        records = list(records)
        p = len(specs)
        for r in records:
            if len(r.features) != p:
                raise ValidationError(
                    f"record has {len(r.features)} features, schema declares {p}"
                )
        time = np.array([r.time for r in records], dtype=np.float64)
        event = np.array([r.event for r in records], dtype=bool)
        x = np.full((len(records), p), np.nan)
        for i, r in enumerate(records):
            for j, v in enumerate(r.features):
                if v is not None:
                    x[i, j] = v
        return cls(time, event, x, specs, allow_no_events=allow_no_events)

    # -- views -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def record(self, i: int) -> SurvivalRecord:
        row = self.features[i]
        feats = tuple(None if np.isnan(v) else float(v) for v in row)
        return SurvivalRecord(float(self.time[i]), bool(self.event[i]), feats)

    def records(self):
        return [self.record(i) for i in range(self.n)]

    def feature_index(self, name: str) -> int:
        for j, s in enumerate(self.specs):
            if s.name == name:
                return j
        raise ValidationError(f"no feature named {name!r}")

    def take(self, indices) -> "SurvivalDataset":
        """Row subset / resample; keeps the schema of the parent dataset."""
        idx = np.asarray(indices, dtype=np.intp)
        return SurvivalDataset(
            self.time[idx],
            self.event[idx],
            self.features[idx],
            self.specs,
            allow_no_events=True,
        )

    def __repr__(self):
        ev = int(self.event.sum())
        return f"SurvivalDataset(n={self.n}, p={self.p}, events={ev})"


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _parse_cell(raw: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"not a number: {raw!r}")


def load_csv(path, time_col: str, event_col: str) -> SurvivalDataset:
    """Read a survival dataset from a CSV file.

    The file must carry a header row naming ``time_col`` (positive reals) and
    ``event_col`` (0 = censored, 1 = death). Every other column becomes an
    explanatory feature, in header order. Empty cells are missing values.
    Columns containing any non-numeric text are ingested as categorical
    features, encoded as category codes against a sorted category list.

    Raises
    ------
    ParseError
        Malformed numbers in the time/event columns, or ragged rows; the
        error names the offending 1-based data row and column.
    ValidationError
        Times <= 0, or event values outside {0, 1}.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        rows = [row for row in reader if row]

    header = [h.strip() for h in header]
    for col in (time_col, event_col):
        if col not in header:
            raise ValidationError(f"{path}: required column {col!r} not in header")
    t_idx = header.index(time_col)
    e_idx = header.index(event_col)
    feat_cols = [j for j in range(len(header)) if j not in (t_idx, e_idx)]

    if not rows:
        raise ValidationError(f"{path}: no data rows")

    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(
                f"row {i + 1}: expected {len(header)} cells, found {len(row)}",
                row=i + 1,
            )

    time = np.empty(n)
    event = np.empty(n, dtype=bool)
    for i, row in enumerate(rows):
        try:
            t = _parse_cell(row[t_idx])
        except ParseError:
            raise ParseError(
                f"row {i + 1}, column {time_col!r}: cannot parse time "
                f"value {row[t_idx]!r}",
                row=i + 1,
                column=time_col,
            )
        if t is None:
            raise ParseError(
                f"row {i + 1}, column {time_col!r}: time is missing",
                row=i + 1,
                column=time_col,
            )
        if t <= 0:
            raise ValidationError(f"row {i + 1}: time must be positive, got {t}")
        try:
            e = _parse_cell(row[e_idx])
        except ParseError:
            raise ParseError(
                f"row {i + 1}, column {event_col!r}: cannot parse event "
                f"value {row[e_idx]!r}",
                row=i + 1,
                column=event_col,
            )
        if e not in (0.0, 1.0):
            raise ValidationError(
                f"row {i + 1}: event must be 0 or 1, got {row[e_idx]!r}"
            )
        time[i] = t
        event[i] = bool(e)

    x = np.full((n, len(feat_cols)), np.nan)
    specs = []
    for out_j, j in enumerate(feat_cols):
        cells = [row[j].strip() for row in rows]
        numeric = True
        for c in cells:
            if c == "":
                continue
            try:
                float(c)
            except ValueError:
                numeric = False
                break
        if numeric:
            col = np.array([np.nan if c == "" else float(c) for c in cells])
            observed = col[~np.isnan(col)]
            if observed.size == 0:
                specs.append(FeatureSpec(header[j], CONTINUOUS, 0.0, 0.0))
            elif np.isin(observed, (0.0, 1.0)).all():
                specs.append(
                    FeatureSpec(
                        header[j], BINARY, float(observed.min()), float(observed.max())
                    )
                )
            else:
                specs.append(
                    FeatureSpec(
                        header[j],
                        CONTINUOUS,
                        float(observed.min()),
                        float(observed.max()),
                    )
                )
            x[:, out_j] = col
        else:
            cats = sorted({c for c in cells if c != ""})
            code = {c: float(k) for k, c in enumerate(cats)}
            col = np.array([np.nan if c == "" else code[c] for c in cells])
            specs.append(
                FeatureSpec(
                    header[j],
                    CATEGORICAL,
                    0.0,
                    float(len(cats) - 1),
                    categories=tuple(cats),
                )
            )
            x[:, out_j] = col

    return SurvivalDataset(time, event, x, specs, allow_no_events=True)


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def _column_median(col: np.ndarray) -> float:
    observed = col[~np.isnan(col)]
    if observed.size == 0:
        raise ValidationError("cannot impute a fully missing column")
    return float(np.median(observed))


def _column_mode(col: np.ndarray) -> float:
    observed = col[~np.isnan(col)]
    if observed.size == 0:
        raise ValidationError("cannot impute a fully missing column")
    values, counts = np.unique(observed, return_counts=True)
    return float(values[np.argmax(counts)])  # ties: smallest value


def preprocess(ds: SurvivalDataset, impute: bool) -> SurvivalDataset:
    """Normalize, one-hot encode and optionally impute a dataset.

    Continuous columns are min-max rescaled to [0, 1] using the bounds
    recorded in their specs (computed over the full dataset at ingestion).
    Categorical columns are replaced by one one-hot binary column per
    category. With ``impute=True`` missing continuous values become the
    column median, missing binary/categorical values the column mode;
    otherwise missing values pass through as NaN.

    Idempotent: a preprocessed dataset passes through unchanged.

    Raises
    ------
    ValidationError
        A continuous column with observed_min == observed_max admits no
        valid rescale.
    """
    cols = []
    specs = []
    for j, spec in enumerate(ds.specs):
        col = ds.features[:, j].copy()
        if spec.kind == CONTINUOUS:
            lo, hi = spec.observed_min, spec.observed_max
            if hi <= lo:
                raise ValidationError(
                    f"feature {spec.name!r} is constant (min == max == {lo}); "
                    "no valid rescale"
                )
            col = (col - lo) / (hi - lo)
            if impute and np.isnan(col).any():
                col[np.isnan(col)] = _column_median(col)
            observed = col[~np.isnan(col)]
            specs.append(
                FeatureSpec(
                    spec.name, CONTINUOUS, float(observed.min()), float(observed.max())
                )
            )
            cols.append(col)
        elif spec.kind == BINARY:
            if impute and np.isnan(col).any():
                col[np.isnan(col)] = _column_mode(col)
            observed = col[~np.isnan(col)]
            lo = float(observed.min()) if observed.size else 0.0
            hi = float(observed.max()) if observed.size else 0.0
            specs.append(FeatureSpec(spec.name, BINARY, lo, hi))
            cols.append(col)
        else:
            if impute and np.isnan(col).any():
                col[np.isnan(col)] = _column_mode(col)
            for k, cat in enumerate(spec.categories):
                onehot = np.where(np.isnan(col), np.nan, (col == k).astype(float))
                observed = onehot[~np.isnan(onehot)]
                lo = float(observed.min()) if observed.size else 0.0
                hi = float(observed.max()) if observed.size else 0.0
                specs.append(FeatureSpec(f"{spec.name}={cat}", BINARY, lo, hi))
                cols.append(onehot)

    features = np.column_stack(cols)
    return SurvivalDataset(
        ds.time, ds.event, features, specs, allow_no_events=not ds.event.any()
    )


# ---------------------------------------------------------------------------
# Signed-time encoding and resampling
# ---------------------------------------------------------------------------


def encode_signed_time(r: SurvivalRecord) -> SignedTime:
    """Fold the event flag into the sign of the survival time.

    Returns +time for an observed event and -time for a censored subject.
    """
    if r.time <= 0:
        raise ValidationError(
            f"signed-time encoding requires time > 0, got {r.time}"
        )
    return SignedTime(r.time if r.event else -r.time)


def resample_indices(n: int, seed: int) -> np.ndarray:
    """The with-replacement index multiset drawn for a given seed."""
    return np.random.default_rng(seed).integers(0, n, size=n)


def bootstrap_resample(ds: SurvivalDataset, seed: int) -> SurvivalDataset:
    """Draw a same-size with-replacement resample; deterministic per seed."""
    return ds.take(resample_indices(ds.n, seed))


def write_csv(ds: SurvivalDataset, path, time_col="time", event_col="event"):
    """Write a dataset back out in the standard CSV schema."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([time_col, event_col, *ds.feature_names])
        for i in range(ds.n):
            row = [repr(float(ds.time[i])), int(ds.event[i])]
            for v in ds.features[i]:
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)
