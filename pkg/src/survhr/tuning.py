"""Seeded random search over boosting hyperparameters.

Configurations are sampled uniformly (log-uniformly for the learning
rate) from capped ranges and scored by mean cross-validated concordance;
folds are redrawn per evaluation from a derived seed so tuning folds
never coincide with final-evaluation folds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from ._seeds import derive_seed
from .data import SurvivalDataset
from .errors import FitError, SurvhrError, ValidationError
from .metrics import kfold_cv
from .trees import Hyperparams, predict_margins, train


@dataclass(frozen=True)
class SearchSpace:
    """Sampling ranges; regularization strengths are capped at 10."""

    eta: tuple[float, float] = (0.01, 0.5)  # log-uniform
    max_depth: tuple[int, int] = (2, 8)  # integer, inclusive
    min_child_weight: tuple[float, float] = (0.1, 10.0)
    reg_alpha: tuple[float, float] = (0.0, 10.0)
    reg_lambda: tuple[float, float] = (0.0, 10.0)
    subsample: tuple[float, float] = (0.5, 1.0)
    colsample_bytree: tuple[float, float] = (0.5, 1.0)
    n_rounds: tuple[int, int] = (50, 500)  # integer, inclusive

    def sample(self, rng: np.random.Generator, seed: int) -> Hyperparams:
        lo, hi = self.eta
        eta = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        return Hyperparams(
            eta=eta,
            max_depth=int(rng.integers(self.max_depth[0], self.max_depth[1] + 1)),
            min_child_weight=float(rng.uniform(*self.min_child_weight)),
            reg_alpha=float(rng.uniform(*self.reg_alpha)),
            reg_lambda=float(rng.uniform(*self.reg_lambda)),
            subsample=float(rng.uniform(*self.subsample)),
            colsample_bytree=float(rng.uniform(*self.colsample_bytree)),
            n_rounds=int(rng.integers(self.n_rounds[0], self.n_rounds[1] + 1)),
            seed=seed,
        )


def boosted_trainer(hp: Hyperparams):
    """Trainer closure for the CV harness: dataset -> margin function."""

    def fit(train_ds: SurvivalDataset):
        ens = train(train_ds, hp)
        return lambda features: predict_margins(ens, features)

    return fit


def random_search(
    ds: SurvivalDataset,
    space: SearchSpace,
    rounds: int,
    k: int,
    seed: int,
):
    """Sample ``rounds`` configurations and keep the best CV concordance.

    Returns ``(best, best_score, trace)``; the trace holds one entry per
    evaluation ({params, fold_scores, mean}), with failed evaluations
    scored -inf and their error recorded. Deterministic for a fixed seed.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    if k < 2:
        raise ValidationError("k must be >= 2")

    rng = np.random.default_rng(derive_seed(seed, 0))
    best = None
    best_score = -math.inf
    trace = []
    for i in range(rounds):
        hp = space.sample(rng, seed=derive_seed(seed, i, 1))
        entry = {"params": asdict(hp)}
        try:
            cv = kfold_cv(ds, k, boosted_trainer(hp), seed=derive_seed(seed, i, 2))
            entry["fold_scores"] = list(cv.fold_scores)
            entry["mean"] = cv.mean
            score = cv.mean
        except SurvhrError as err:
            entry["fold_scores"] = []
            entry["mean"] = -math.inf
            entry["error"] = str(err)
            score = -math.inf
        trace.append(entry)
        if score > best_score:
            best, best_score = hp, score

    if best is None:
        raise FitError("every tuning evaluation failed")
    return best, best_score, trace


def write_trace_jsonl(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        for entry in trace:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
