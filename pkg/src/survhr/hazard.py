"""Hazard ratios from Shapley attributions, with bootstrap intervals.

For an explanatory variable j and disjoint patient subgroups (S1, S2),
the model-derived hazard ratio is the ratio of subgroup means of the
exponentiated attributions: mean_{S1} exp(phi_j) / mean_{S2} exp(phi_j).
Confidence intervals come from retraining the model on with-replacement
resamples and recomputing the ratio on the full original dataset.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._seeds import derive_seed
from .data import SurvivalDataset, bootstrap_resample
from .errors import SplitError, ValidationError
from .shapley import ShapMatrix, tree_shap
from .trees import Hyperparams, train

_MAX_RESAMPLE_RETRIES = 10


@dataclass(frozen=True)
class SubgroupSplit:
    """Two disjoint, non-empty patient index sets plus the defining rule."""

    s1: tuple[int, ...]
    s2: tuple[int, ...]
    rule: str = ""

    def __post_init__(self):
        if not self.s1 or not self.s2:
            raise SplitError("both subgroups must be non-empty")
        if set(self.s1) & set(self.s2):
            raise SplitError("subgroups must be disjoint")

    def validate(self, n: int):
        for i in (*self.s1, *self.s2):
            if not (0 <= i < n):
                raise SplitError(f"subgroup index {i} outside dataset of size {n}")


@dataclass(frozen=True)
class HrEstimate:
    """Point hazard ratio with a 95% interval and a significance flag."""

    variable: str
    point: float
    ci_low: float
    ci_high: float
    significant: bool
    n_boot: int


def median_split(ds: SurvivalDataset, feature: int) -> SubgroupSplit:
    """Split patients at the median (>= median vs below), or 1 vs 0 for
    binary variables. Rows missing the feature belong to neither subgroup.
    """
    if not (0 <= feature < ds.p):
        raise ValidationError(f"feature index {feature} out of range")
    col = ds.features[:, feature]
    observed = ~np.isnan(col)
    values = np.unique(col[observed])
    if values.shape[0] < 2:
        raise SplitError(
            f"feature {ds.specs[feature].name!r} is constant: "
            "one subgroup would be empty"
        )
    name = ds.specs[feature].name
    if np.isin(values, (0.0, 1.0)).all():
        s1 = np.flatnonzero(observed & (col == 1.0))
        s2 = np.flatnonzero(observed & (col == 0.0))
        rule = f"{name}: 1 vs 0"
    else:
        med = float(np.median(col[observed]))
        s1 = np.flatnonzero(observed & (col >= med))
        s2 = np.flatnonzero(observed & (col < med))
        rule = f"{name}: >= median ({med!r}) vs below"
    if s1.shape[0] == 0 or s2.shape[0] == 0:
        raise SplitError(
            f"feature {name!r}: median split leaves an empty subgroup"
        )
    return SubgroupSplit(tuple(int(i) for i in s1), tuple(int(i) for i in s2), rule)


def hr_from_shap(shap: ShapMatrix, feature: int, split: SubgroupSplit) -> float:
    """Ratio of subgroup means of exponentiated attributions for feature j."""
    n = shap.phi.shape[0]
    split.validate(n)
    col = shap.phi[:, feature]
    m1 = float(np.mean(np.exp(col[list(split.s1)])))
    m2 = float(np.mean(np.exp(col[list(split.s2)])))
    return m1 / m2


def _replicate_hrs(ds, hp, splits, master_seed, b):
    """One bootstrap replicate: resample, retrain, explain the full data."""
    for attempt in range(_MAX_RESAMPLE_RETRIES + 1):
        seed_b = derive_seed(master_seed, b, attempt)
        resample = bootstrap_resample(ds, seed_b)
        if resample.event.any():
            break
    else:
        raise ValidationError(
            f"bootstrap replicate {b}: no events after "
            f"{_MAX_RESAMPLE_RETRIES} reseeded retries"
        )
    ens = train(resample, replace(hp, seed=seed_b))
    shap = tree_shap(ens, ds)
    return np.array([hr_from_shap(shap, j, split) for j, split in splits])


def bootstrap_hr(
    ds: SurvivalDataset,
    hp: Hyperparams,
    B: int,
    master_seed: int,
    n_jobs: int = 1,
) -> list[HrEstimate]:
    """Bootstrap hazard ratios for every explanatory variable.

    Each of the B replicates resamples the patients with replacement,
    trains a fresh ensemble with the pre-tuned hyperparameters, computes
    attributions for the full original dataset and evaluates the subgroup
    ratio with subgroups frozen from the original dataset. Per variable,
    the point estimate is the median of the B ratios and the interval the
    2.5th/97.5th percentiles (linear interpolation). Deterministic for a
    fixed master seed, independent of ``n_jobs``.
    """
    if B < 1:
        raise ValidationError("B must be >= 1")
    splits = [(j, median_split(ds, j)) for j in range(ds.p)]

    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(
                pool.map(
                    _replicate_worker,
                    [(ds, hp, splits, master_seed, b) for b in range(1, B + 1)],
                )
            )
    else:
        results = [
            _replicate_hrs(ds, hp, splits, master_seed, b) for b in range(1, B + 1)
        ]

    hrs = np.vstack(results)  # (B, p)
    estimates = []
    for idx, (j, _) in enumerate(splits):
        col = hrs[:, idx]
        lo, hi = np.percentile(col, [2.5, 97.5])
        point = float(np.median(col))
        estimates.append(
            HrEstimate(
                variable=ds.specs[j].name,
                point=point,
                ci_low=float(lo),
                ci_high=float(hi),
                significant=bool(lo > 1.0 or hi < 1.0),
                n_boot=B,
            )
        )
    return estimates


def _replicate_worker(payload):
    return _replicate_hrs(*payload)


def full_data_hr(ds: SurvivalDataset, hp: Hyperparams) -> dict[str, float]:
    """Single-model hazard ratios on the full dataset (reference values)."""
    ens = train(ds, hp)
    shap = tree_shap(ens, ds)
    out = {}
    for j in range(ds.p):
        split = median_split(ds, j)
        out[ds.specs[j].name] = hr_from_shap(shap, j, split)
    return out


# ---------------------------------------------------------------------------
# Report formats
# ---------------------------------------------------------------------------


def hr_report_obj(estimates) -> list[dict]:
    return [
        {
            "variable": e.variable,
            "hr_point": e.point,
            "ci_low": e.ci_low,
            "ci_high": e.ci_high,
            "significant": e.significant,
            "n_boot": e.n_boot,
        }
        for e in estimates
    ]


def hr_report_json(estimates) -> str:
    return json.dumps(hr_report_obj(estimates), sort_keys=True, indent=2)


def write_hr_csv(estimates, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["variable", "hr_point", "ci_low", "ci_high", "significant", "n_boot"]
        )
        for e in estimates:
            writer.writerow(
                [
                    e.variable,
                    repr(e.point),
                    repr(e.ci_low),
                    repr(e.ci_high),
                    int(e.significant),
                    e.n_boot,
                ]
            )
