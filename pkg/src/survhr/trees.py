"""Gradient-boosted regression trees for the Cox partial-likelihood objective.

Trees are grown by exact greedy second-order split search: every midpoint
between consecutive distinct feature values is scored by the regularized
gain, missing values learn a default direction, and leaf weights are the
L1-soft-thresholded Newton step. The ensemble realizes the log-relative-
hazard margin additively: margin(x) = base_margin + eta * sum_t tree_t(x).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ._breslow import margin_loss_grad_hess
from ._seeds import derive_seed
from .data import SurvivalDataset
from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class Hyperparams:
    """Boosting configuration; ranges are validated at construction."""

    eta: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    gamma: float = 0.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    n_rounds: int = 100
    seed: int = 0

    def __post_init__(self):
        checks = [
            (0.0 < self.eta <= 1.0, "eta must be in (0, 1]"),
            (self.max_depth >= 0, "max_depth must be >= 0"),
            (self.min_child_weight >= 0.0, "min_child_weight must be >= 0"),
            (self.reg_lambda >= 0.0, "reg_lambda must be >= 0"),
            (self.reg_alpha >= 0.0, "reg_alpha must be >= 0"),
            (self.gamma >= 0.0, "gamma must be >= 0"),
            (0.0 < self.subsample <= 1.0, "subsample must be in (0, 1]"),
            (0.0 < self.colsample_bytree <= 1.0, "colsample_bytree must be in (0, 1]"),
            (self.n_rounds >= 0, "n_rounds must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)


@dataclass
class TreeNode:
    """One node of a regression tree.

    Internal nodes hold a split (value < threshold goes left, >= goes
    right, missing follows ``default_left``); leaves hold a weight.
    ``cover`` is the training mass that reached the node: the Hessian sum
    where positive, otherwise the row count, resolved per sibling pair so
    conditional-expectation fractions stay well defined.
    """

    feature: int = -1
    threshold: float = 0.0
    default_left: bool = True
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0
    cover: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def route(self, x) -> "TreeNode":
        node = self
        while not node.is_leaf:
            v = x[node.feature]
            if np.isnan(v):
                node = node.left if node.default_left else node.right
            elif v < node.threshold:
                node = node.left
            else:
                node = node.right
        return node

    def predict(self, x) -> float:
        return self.route(x).weight

    def expectation(self) -> float:
        """Cover-weighted expected leaf value of the subtree."""
        if self.is_leaf:
            return self.weight
        wl, wr = self.left.cover, self.right.cover
        el = self.left.expectation()
        er = self.right.expectation()
        return (wl * el + wr * er) / (wl + wr)


@dataclass(frozen=True)
class TreeEnsemble:
    """Additive tree ensemble: margin(x) = base_margin + eta * sum tree(x)."""

    trees: tuple[TreeNode, ...]
    eta: float
    base_margin: float = 0.0
    n_features: int = 0
    hyperparams: Hyperparams | None = None


def cox_grad_hess(ds: SurvivalDataset, margins):
    """Per-subject gradient and Hessian of the Breslow Cox loss in margins."""
    margins = np.asarray(margins, dtype=np.float64)
    if margins.shape != (ds.n,):
        raise ValidationError(f"margins must have shape ({ds.n},)")
    _, grad, hess = margin_loss_grad_hess(ds.time, ds.event, margins)
    return grad, hess


def _soft_threshold(g: float, alpha: float) -> float:
    return np.sign(g) * max(abs(g) - alpha, 0.0)


def _leaf_weight(g_sum: float, h_sum: float, hp: Hyperparams) -> float:
    denom = h_sum + hp.reg_lambda
    if denom <= 0.0:
        return 0.0
    return -_soft_threshold(g_sum, hp.reg_alpha) / denom


def _score(g, h, lam):
    return g * g / (h + lam)


def _best_split_for_feature(values, g, h, g_tot, h_tot, hp):
    """Best (gain, threshold, default_left) for one feature at one node.

    ``values`` may contain NaN; candidates are midpoints between consecutive
    distinct observed values, each tried with missing rows sent left and
    right. Returns None when no admissible candidate has positive gain.
    """
    present = ~np.isnan(values)
    vp = values[present]
    if vp.shape[0] < 2:
        return None
    order = np.argsort(vp, kind="stable")
    vs = vp[order]
    gc = np.cumsum(g[present][order])
    hc = np.cumsum(h[present][order])

    g_miss = g_tot - gc[-1]
    h_miss = h_tot - hc[-1]

    distinct = vs[1:] != vs[:-1]
    if not distinct.any():
        return None
    boundary = np.flatnonzero(distinct)
    thr = 0.5 * (vs[boundary] + vs[boundary + 1])
    # a midpoint that rounds down onto the lower value would split nothing
    ok = thr > vs[boundary]
    if not ok.any():
        return None
    boundary, thr = boundary[ok], thr[ok]

    lam = hp.reg_lambda
    parent = _score(g_tot, h_tot, lam)
    gl, hl = gc[boundary], hc[boundary]

    best = None
    for missing_left in (True, False):
        gl_eff = gl + g_miss if missing_left else gl
        hl_eff = hl + h_miss if missing_left else hl
        gr_eff = g_tot - gl_eff
        hr_eff = h_tot - hl_eff
        gain = (
            0.5 * (_score(gl_eff, hl_eff, lam) + _score(gr_eff, hr_eff, lam) - parent)
            - hp.gamma
        )
        valid = (hl_eff >= hp.min_child_weight) & (hr_eff >= hp.min_child_weight)
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        if gain[k] > 0 and (best is None or gain[k] > best[0]):
            best = (float(gain[k]), float(thr[k]), missing_left)
    return best


def _grow(x, g, h, rows, cols, hp, depth):
    g_tot = float(g[rows].sum())
    h_tot = float(h[rows].sum())
    node = TreeNode(weight=_leaf_weight(g_tot, h_tot, hp))
    node.cover = h_tot if h_tot > 0.0 else float(rows.shape[0])
    if depth >= hp.max_depth or rows.shape[0] < 2:
        return node

    best = None  # (gain, feature, threshold, default_left)
    for f in cols:
        cand = _best_split_for_feature(x[rows, f], g[rows], h[rows], g_tot, h_tot, hp)
        if cand is not None and (best is None or cand[0] > best[0]):
            best = (cand[0], int(f), cand[1], cand[2])
    if best is None:
        return node

    _, f, thr, missing_left = best
    v = x[rows, f]
    goes_left = np.where(np.isnan(v), missing_left, v < thr)
    left = _grow(x, g, h, rows[goes_left], cols, hp, depth + 1)
    right = _grow(x, g, h, rows[~goes_left], cols, hp, depth + 1)

    # sibling covers share one weighting: Hessian mass, else row counts
    hl, hr = float(h[rows[goes_left]].sum()), float(h[rows[~goes_left]].sum())
    if hl + hr > 0.0:
        left.cover, right.cover = hl, hr
    else:
        left.cover = float(np.count_nonzero(goes_left))
        right.cover = float(np.count_nonzero(~goes_left))

    node.feature = f
    node.threshold = thr
    node.default_left = missing_left
    node.left = left
    node.right = right
    node.weight = 0.0
    return node


def build_tree(ds: SurvivalDataset, g, h, hp: Hyperparams, round_seed: int) -> TreeNode:
    """Grow one regression tree on (gradient, Hessian) statistics.

    Row subsampling (without replacement) and per-tree column subsampling
    are drawn from ``round_seed``. Degenerate input yields a single leaf.
    """
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if g.shape != (ds.n,) or h.shape != (ds.n,):
        raise ValidationError("gradient/hessian length must equal dataset size")

    rng = np.random.default_rng(round_seed)
    if hp.subsample < 1.0:
        n_rows = max(1, int(hp.subsample * ds.n))
        rows = np.sort(rng.choice(ds.n, size=n_rows, replace=False))
    else:
        rows = np.arange(ds.n)
    if hp.colsample_bytree < 1.0:
        n_cols = max(1, int(hp.colsample_bytree * ds.p))
        cols = np.sort(rng.choice(ds.p, size=n_cols, replace=False))
    else:
        cols = np.arange(ds.p)

    return _grow(ds.features, g, h, rows, cols, hp, depth=0)


def _unique_rows(x):
    """Dedup rows for routing: identical rows route identically."""
    uniq, inverse = np.unique(x, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def train(ds: SurvivalDataset, hp: Hyperparams) -> TreeEnsemble:
    """Boost ``hp.n_rounds`` trees against the Cox objective.

    Margins start at base_margin = 0; each round fits one tree to the
    current (gradient, Hessian) and adds its eta-scaled predictions.
    Deterministic for a fixed ``hp.seed``.
    """
    if not ds.event.any():
        raise ValidationError("training requires at least one observed event")

    uniq, inverse = _unique_rows(ds.features)
    margins = np.zeros(ds.n)
    trees = []
    for r in range(hp.n_rounds):
        grad, hess = cox_grad_hess(ds, margins)
        tree = build_tree(ds, grad, hess, hp, derive_seed(hp.seed, r))
        leaf_vals = np.array([tree.predict(row) for row in uniq])
        margins = margins + hp.eta * leaf_vals[inverse]
        trees.append(tree)

    return TreeEnsemble(
        trees=tuple(trees),
        eta=hp.eta,
        base_margin=0.0,
        n_features=ds.p,
        hyperparams=hp,
    )


def predict_margin(ens: TreeEnsemble, x) -> float:
    """Margin of a single feature vector under the ensemble."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ens.n_features,):
        raise ShapeError(
            f"expected feature vector of length {ens.n_features}, got {x.shape}"
        )
    total = 0.0
    for tree in ens.trees:
        total += tree.predict(x)
    return ens.base_margin + ens.eta * total


def predict_margins(ens: TreeEnsemble, features) -> np.ndarray:
    """Vectorized margins for a feature matrix (rows deduplicated first)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != ens.n_features:
        raise ShapeError(
            f"expected (n, {ens.n_features}) feature matrix, got {features.shape}"
        )
    uniq, inverse = _unique_rows(features)
    out = np.zeros(uniq.shape[0])
    for tree in ens.trees:
        out += np.array([tree.predict(row) for row in uniq])
    return ens.base_margin + ens.eta * out[inverse]


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _node_to_obj(node: TreeNode):
    if node.is_leaf:
        return {"leaf": node.weight, "cover": node.cover}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "default_left": node.default_left,
        "cover": node.cover,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj) -> TreeNode:
    if "leaf" in obj:
        return TreeNode(weight=float(obj["leaf"]), cover=float(obj.get("cover", 1.0)))
    return TreeNode(
        feature=int(obj["feature"]),
        threshold=float(obj["threshold"]),
        default_left=bool(obj["default_left"]),
        left=_node_from_obj(obj["left"]),
        right=_node_from_obj(obj["right"]),
        cover=float(obj.get("cover", 1.0)),
    )


def ensemble_to_json(ens: TreeEnsemble) -> str:
    return json.dumps(
        {
            "eta": ens.eta,
            "base_margin": ens.base_margin,
            "n_features": ens.n_features,
            "hyperparams": asdict(ens.hyperparams) if ens.hyperparams else None,
            "trees": [_node_to_obj(t) for t in ens.trees],
        },
        sort_keys=True,
    )


def ensemble_from_json(text: str) -> TreeEnsemble:
    obj = json.loads(text)
    hp = Hyperparams(**obj["hyperparams"]) if obj.get("hyperparams") else None
    return TreeEnsemble(
        trees=tuple(_node_from_obj(t) for t in obj["trees"]),
        eta=float(obj["eta"]),
        base_margin=float(obj["base_margin"]),
        n_features=int(obj["n_features"]),
        hyperparams=hp,
    )
