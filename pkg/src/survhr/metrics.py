"""Concordance index, cross-validation harness and Kaplan-Meier curves."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from ._seeds import derive_seed
from .data import SurvivalDataset
from .errors import MetricError, ValidationError

_Z95 = 1.959964
_MAX_PARTITION_RETRIES = 10


@dataclass(frozen=True)
class CvResult:
    """Per-fold concordance scores with their mean and sample std."""

    fold_scores: tuple[float, ...]
    mean: float
    std: float


@dataclass(frozen=True)
class KmCurve:
    """Product-limit survival estimate with pointwise 95% bands."""

    times: np.ndarray
    survival: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    median_survival: float | None


def _pair_counts(times, events, risk):
    """Integer counts of (comparable, concordant, risk-tied) pairs.

    A pair (i, j) is comparable when subject i has an event and either
    t_i < t_j, or t_i == t_j with j censored (the event subject counts as
    the earlier one). Tied event times with two events are skipped.
    """
    t_i = times[:, None]
    t_j = times[None, :]
    ev_i = events[:, None]
    ev_j = events[None, :]
    comparable = ev_i & ((t_i < t_j) | ((t_i == t_j) & ~ev_j))

    r_i = risk[:, None]
    r_j = risk[None, :]
    concordant = int(np.count_nonzero(comparable & (r_i > r_j)))
    tied = int(np.count_nonzero(comparable & (r_i == r_j)))
    total = int(np.count_nonzero(comparable))
    return total, concordant, tied


def c_index(times, events, risk) -> float:
    """Harrell's concordance index of a risk score on censored data.

    Concordant pairs (earlier event carries higher risk) score 1, tied
    risk scores 0.5, discordant 0, averaged over comparable pairs.
    """
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    risk = np.asarray(risk, dtype=np.float64)
    if not (times.shape == events.shape == risk.shape):
        raise ValidationError("times, events and risk must have equal length")
    total, concordant, tied = _pair_counts(times, events, risk)
    if total == 0:
        raise MetricError("concordance undefined: no comparable pairs")
    return (concordant + 0.5 * tied) / total


def _partition(n, events, k, seed):
    for attempt in range(_MAX_PARTITION_RETRIES + 1):
        rng = np.random.default_rng(derive_seed(seed, attempt))
        folds = np.array_split(rng.permutation(n), k)
        if all(events[f].any() for f in folds):
            return folds
    raise ValidationError(
        f"could not draw a {k}-fold partition with events in every fold "
        f"after {_MAX_PARTITION_RETRIES} reseeded retries"
    )


def kfold_cv(ds: SurvivalDataset, k: int, trainer, seed: int) -> CvResult:
    """Seeded k-fold cross-validation scored by held-out concordance.

    ``trainer`` maps a training SurvivalDataset to a risk function
    (feature matrix -> risk scores). Partitions are drawn from the seed
    and redrawn (up to 10 derived seeds) until every fold contains an
    event; identical seeds yield identical folds and scores.
    """
    if k < 2:
        raise ValidationError("k must be >= 2")
    if k > ds.n:
        raise ValidationError(f"cannot split {ds.n} records into {k} folds")
    folds = _partition(ds.n, ds.event, k, seed)

    scores = []
    for i, val_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        risk_fn = trainer(ds.take(train_idx))
        risk = np.asarray(risk_fn(ds.features[val_idx]), dtype=np.float64)
        scores.append(c_index(ds.time[val_idx], ds.event[val_idx], risk))

    scores = tuple(float(s) for s in scores)
    mean = float(np.mean(scores))
    std = float(np.std(scores, ddof=1))
    return CvResult(fold_scores=scores, mean=mean, std=std)


def km_estimate(times, events) -> KmCurve:
    """Kaplan-Meier product-limit estimate with Greenwood 95% bands.

    Bands use the log transform, clipped to [0, 1]; the reported median
    survival is the earliest time at which the curve drops to 0.5 or
    below, absent when it never does.
    """
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    if times.shape[0] == 0:
        raise ValidationError("km_estimate requires at least one subject")

    order = np.argsort(times, kind="stable")
    t = times[order]
    e = events[order]
    n = t.shape[0]

    is_start = np.r_[True, t[1:] != t[:-1]]
    starts = np.flatnonzero(is_start)
    uniq_times = t[starts]
    at_risk = n - starts  # subjects with time >= the group's time
    group = np.cumsum(is_start) - 1
    deaths = np.bincount(group[e], minlength=uniq_times.shape[0])

    has_event = deaths > 0
    ev_times = uniq_times[has_event]
    d = deaths[has_event].astype(np.float64)
    r = at_risk[has_event].astype(np.float64)

    survival = np.cumprod(1.0 - d / r)

    # Greenwood variance of log S; terms blow up only where S hits zero
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(r > d, d / (r * (r - d)), np.inf)
        var_log = np.cumsum(term)
        half_width = np.exp(_Z95 * np.sqrt(var_log))
        ci_low = np.where(survival > 0.0, survival / half_width, 0.0)
        ci_high = np.where(survival > 0.0, survival * half_width, 0.0)
    ci_low = np.clip(ci_low, 0.0, 1.0)
    ci_high = np.clip(ci_high, 0.0, 1.0)

    median = None
    below = np.flatnonzero(survival <= 0.5)
    if below.shape[0]:
        median = float(ev_times[below[0]])

    return KmCurve(
        times=ev_times,
        survival=survival,
        ci_low=ci_low,
        ci_high=ci_high,
        median_survival=median,
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def write_km_csv(curve: KmCurve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "survival", "ci_low", "ci_high"])
        for i in range(curve.times.shape[0]):
            writer.writerow(
                [
                    repr(float(curve.times[i])),
                    repr(float(curve.survival[i])),
                    repr(float(curve.ci_low[i])),
                    repr(float(curve.ci_high[i])),
                ]
            )


def km_summary_obj(curve: KmCurve) -> dict:
    return {
        "n_event_times": int(curve.times.shape[0]),
        "median_survival": curve.median_survival,
        "final_survival": float(curve.survival[-1]) if curve.times.size else 1.0,
    }


def cv_to_json(result: CvResult) -> str:
    return json.dumps(
        {
            "fold_scores": list(result.fold_scores),
            "mean": result.mean,
            "std": result.std,
        },
        sort_keys=True,
    )
