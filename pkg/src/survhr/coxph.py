"""Linear Cox proportional-hazards fitting and Wald-interval hazard ratios.

The partial likelihood is maximized by Newton-Raphson with step-halving;
tied event times use the Breslow approximation so the linear model and the
boosted-tree model share one objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ._breslow import margin_loss_grad_hess
from .data import SurvivalDataset
from .errors import ConvergenceError, FitError, ValidationError
from .hazard import HrEstimate, SubgroupSplit

Z95 = 1.959964  # two-sided Wald z for 95% intervals

_SCORE_TOL = 1e-8
_MAX_ITER = 100
_MAX_HALVINGS = 20


@dataclass(frozen=True)
class CoxModel:
    """Fitted Cox model: coefficients, Wald standard errors, fit diagnostics."""

    beta: np.ndarray
    standard_errors: np.ndarray
    log_partial_likelihood: float
    iterations: int
    converged: bool
    feature_names: tuple[str, ...] = ()

    def risk_scores(self, features: np.ndarray) -> np.ndarray:
        """Linear predictor x.beta, the model's log-relative-hazard."""
        return np.asarray(features, dtype=np.float64) @ self.beta


def neg_log_partial_likelihood(ds: SurvivalDataset, margins):
    """Breslow negative log partial likelihood of a margin vector.

    Returns ``(loss, gradient, diagonal_hessian)``; the derivatives are the
    exact partials of the loss in the margins.
    """
    margins = np.asarray(margins, dtype=np.float64)
    if margins.shape != (ds.n,):
        raise ValidationError(
            f"margins must have shape ({ds.n},), got {margins.shape}"
        )
    return margin_loss_grad_hess(ds.time, ds.event, margins)


def _loglik_score_info(t, e, x, beta):
    """Log partial likelihood with score vector and observed information.

    Iterates tie groups in descending time order, accumulating the weighted
    moments S0, S1, S2 of the risk set (O(n p^2) time, O(p^2) memory).
    """
    n, p = x.shape
    eta = x @ beta
    shift = eta.max()
    w = np.exp(eta - shift)

    loglik = 0.0
    score = np.zeros(p)
    info = np.zeros((p, p))
    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p))

    # group boundaries of tied times (t is sorted ascending)
    is_start = np.r_[True, t[1:] != t[:-1]]
    starts = np.flatnonzero(is_start)
    ends = np.r_[starts[1:], n]

    for gi in range(len(starts) - 1, -1, -1):
        rows = slice(starts[gi], ends[gi])
        wg = w[rows]
        xg = x[rows]
        s0 += float(wg.sum())
        s1 += wg @ xg
        s2 += xg.T @ (wg[:, None] * xg)

        ev = e[rows]
        d = int(ev.sum())
        if d == 0:
            continue
        xbar = s1 / s0
        loglik += float(np.sum(eta[rows][ev] - shift)) - d * math.log(s0)
        score += xg[ev].sum(axis=0) - d * xbar
        info += d * (s2 / s0 - np.outer(xbar, xbar))

    return loglik, score, info


def _name_singular_column(info, names):
    eigvals, eigvecs = np.linalg.eigh(info)
    j = int(np.argmax(np.abs(eigvecs[:, np.argmin(eigvals)])))
    return names[j] if j < len(names) else f"column {j}"


def fit_coxph(ds: SurvivalDataset) -> CoxModel:
    """Maximize the Breslow partial likelihood by Newton-Raphson.

    Requires complete features (no NaN), no constant columns and at least
    one event. Convergence demands a score max-norm below 1e-8 together
    with a vanishing Newton step; a monotone partial likelihood (complete
    separation) therefore surfaces as a ConvergenceError rather than a
    spuriously converged fit.

    Raises
    ------
    FitError
        Singular information matrix; the message names the offending column.
    ConvergenceError
        No convergence within 100 iterations; ``.model`` holds the last
        iterate.
    """
    x = ds.features
    names = ds.feature_names
    if np.isnan(x).any():
        raise ValidationError("fit_coxph requires complete features (no missing)")
    if not ds.event.any():
        raise ValidationError("fit_coxph requires at least one observed event")
    for j in range(ds.p):
        if np.ptp(x[:, j]) == 0.0:
            raise FitError(
                f"feature {names[j]!r} is constant: information matrix is singular"
            )

    order = np.argsort(ds.time, kind="stable")
    t = ds.time[order]
    e = ds.event[order]
    xs = np.ascontiguousarray(x[order])

    p = ds.p
    beta = np.zeros(p)
    loglik, score, info = _loglik_score_info(t, e, xs, beta)
    iterations = 0
    accepted_steps = 0

    for iterations in range(1, _MAX_ITER + 1):
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            if accepted_steps == 0:
                # singular before any progress: structural collinearity
                raise FitError(
                    "singular information matrix; offending column: "
                    f"{_name_singular_column(info, names)!r}"
                )
            # information collapsed while the likelihood kept climbing:
            # monotone likelihood / complete separation
            last = _build_model(beta, info, loglik, iterations - 1, False, names)
            raise ConvergenceError(
                "information matrix became singular while coefficients "
                "diverged (monotone likelihood / complete separation)",
                model=last,
            )

        if (
            np.max(np.abs(score), initial=0.0) < _SCORE_TOL
            and np.max(np.abs(step), initial=0.0)
            < 1e-6 * (1.0 + np.max(np.abs(beta), initial=0.0))
        ):
            iterations -= 1
            break

        # step-halving keeps the log partial likelihood non-decreasing
        accepted = False
        for half in range(_MAX_HALVINGS + 1):
            candidate = beta + step / (2.0**half)
            cand_ll, cand_score, cand_info = _loglik_score_info(t, e, xs, candidate)
            if np.isfinite(cand_ll) and cand_ll >= loglik:
                beta, loglik, score, info = candidate, cand_ll, cand_score, cand_info
                accepted = True
                accepted_steps += 1
                break
        if not accepted:
            last = _build_model(beta, info, loglik, iterations, False, names)
            raise ConvergenceError(
                "no likelihood-increasing step found after "
                f"{_MAX_HALVINGS} halvings (iteration {iterations})",
                model=last,
            )
    else:
        last = _build_model(beta, info, loglik, _MAX_ITER, False, names)
        raise ConvergenceError(
            f"Newton-Raphson did not converge in {_MAX_ITER} iterations "
            "(monotone likelihood / complete separation?)",
            model=last,
        )

    return _build_model(beta, info, loglik, iterations, True, names)


def _build_model(beta, info, loglik, iterations, converged, names):
    if beta.shape[0] == 0:
        se = np.zeros(0)
    else:
        try:
            cov = np.linalg.inv(info)
            se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        except np.linalg.LinAlgError:
            se = np.full(beta.shape[0], np.nan)
    return CoxModel(
        beta=beta.copy(),
        standard_errors=se,
        log_partial_likelihood=float(loglik),
        iterations=iterations,
        converged=converged,
        feature_names=tuple(names),
    )


def hazard_ratio_coxph(
    model: CoxModel, ds: SurvivalDataset, feature: int, split: SubgroupSplit
) -> HrEstimate:
    """Subgroup hazard ratio exp(beta_j * (mean_S1 - mean_S2)) with Wald CI.

    For binary features with pure subgroups the mean difference is 1 and
    this reduces to the classical exp(beta_j).
    """
    if not (0 <= feature < ds.p):
        raise ValidationError(f"feature index {feature} out of range")
    split.validate(ds.n)
    col = ds.features[:, feature]
    m1 = float(np.mean(col[list(split.s1)]))
    m2 = float(np.mean(col[list(split.s2)]))
    if math.isnan(m1) or math.isnan(m2):
        raise ValidationError(
            "subgroup contains missing values for the requested feature"
        )
    diff = m1 - m2
    b = float(model.beta[feature])
    se = float(model.standard_errors[feature])
    point = math.exp(b * diff)
    lo, hi = sorted(
        (math.exp((b - Z95 * se) * diff), math.exp((b + Z95 * se) * diff))
    )
    return HrEstimate(
        variable=ds.specs[feature].name,
        point=point,
        ci_low=lo,
        ci_high=hi,
        significant=lo > 1.0 or hi < 1.0,
        n_boot=0,
    )


def cox_trainer():
    """Trainer closure for the CV harness: dataset -> linear risk function."""

    def fit(train_ds: SurvivalDataset):
        model = fit_coxph(train_ds)
        return lambda features: model.risk_scores(features)

    return fit


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def model_to_json(model: CoxModel) -> str:
    return json.dumps(
        {
            "beta": [float(v) for v in model.beta],
            "se": [float(v) for v in model.standard_errors],
            "loglik": model.log_partial_likelihood,
            "converged": model.converged,
            "iterations": model.iterations,
        },
        sort_keys=True,
    )


def model_from_json(text: str) -> CoxModel:
    obj = json.loads(text)
    return CoxModel(
        beta=np.asarray(obj["beta"], dtype=np.float64),
        standard_errors=np.asarray(obj["se"], dtype=np.float64),
        log_partial_likelihood=float(obj["loglik"]),
        iterations=int(obj["iterations"]),
        converged=bool(obj["converged"]),
    )
