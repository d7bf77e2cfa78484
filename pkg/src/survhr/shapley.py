"""Exact per-feature attributions for tree-ensemble margins.

The fast path runs the polynomial-time path-dependent algorithm (one
recursive descent per tree per sample, maintaining the weighted unique
path of split features); the slow path enumerates all feature subsets of
the conditional-expectation game and computes classical Shapley values
directly. Both condition absent features through per-node cover fractions
recorded at training time, so they agree to floating-point precision.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import SurvivalDataset
from .errors import CapacityError, ShapeError
from .trees import TreeEnsemble, TreeNode, _unique_rows

_BRUTE_FORCE_MAX_FEATURES = 15


@dataclass(frozen=True)
class ShapMatrix:
    """Per-patient, per-variable attributions plus the shared base value.

    Local accuracy: phi0 + sum_j phi[i, j] equals the model margin of
    patient i (to numerical precision).
    """

    phi0: float
    phi: np.ndarray
    feature_names: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# Fast path: recursive unique-path algorithm
# ---------------------------------------------------------------------------


def _extend(feats, zeros, ones, pweights, zero_fraction, one_fraction, feature):
    depth = len(feats)
    feats.append(feature)
    zeros.append(zero_fraction)
    ones.append(one_fraction)
    pweights.append(1.0 if depth == 0 else 0.0)
    for i in range(depth - 1, -1, -1):
        pweights[i + 1] += one_fraction * pweights[i] * (i + 1) / (depth + 1)
        pweights[i] = zero_fraction * pweights[i] * (depth - i) / (depth + 1)


def _unwind(feats, zeros, ones, pweights, index):
    depth = len(feats) - 1
    one_fraction = ones[index]
    zero_fraction = zeros[index]
    next_one = pweights[depth]
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pweights[i]
            pweights[i] = next_one * (depth + 1) / ((i + 1) * one_fraction)
            next_one = tmp - pweights[i] * zero_fraction * (depth - i) / (depth + 1)
        else:
            pweights[i] = pweights[i] * (depth + 1) / (zero_fraction * (depth - i))
    for i in range(index, depth):
        feats[i] = feats[i + 1]
        zeros[i] = zeros[i + 1]
        ones[i] = ones[i + 1]
    for lst in (feats, zeros, ones, pweights):
        lst.pop()


def _unwound_sum(zeros, ones, pweights, index):
    depth = len(zeros) - 1
    one_fraction = ones[index]
    zero_fraction = zeros[index]
    next_one = pweights[depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one = pweights[i] - tmp * zero_fraction * (depth - i) / (depth + 1)
        else:
            total += pweights[i] / zero_fraction * (depth + 1) / (depth - i)
    return total


def _split_fractions(node: TreeNode):
    total = node.left.cover + node.right.cover
    return node.left.cover / total, node.right.cover / total


def _shap_recurse(node, x, phi, feats, zeros, ones, pweights, zero_frac, one_frac, feat):
    feats = feats.copy()
    zeros = zeros.copy()
    ones = ones.copy()
    pweights = pweights.copy()
    _extend(feats, zeros, ones, pweights, zero_frac, one_frac, feat)

    if node.is_leaf:
        for i in range(1, len(feats)):
            w = _unwound_sum(zeros, ones, pweights, i)
            phi[feats[i]] += w * (ones[i] - zeros[i]) * node.weight
        return

    left_fraction, right_fraction = _split_fractions(node)
    v = x[node.feature]
    if np.isnan(v):
        go_left = node.default_left
    else:
        go_left = v < node.threshold
    if go_left:
        hot, cold = node.left, node.right
        hot_fraction, cold_fraction = left_fraction, right_fraction
    else:
        hot, cold = node.right, node.left
        hot_fraction, cold_fraction = right_fraction, left_fraction

    incoming_zero = 1.0
    incoming_one = 1.0
    for k in range(len(feats)):
        if feats[k] == node.feature:
            incoming_zero = zeros[k]
            incoming_one = ones[k]
            _unwind(feats, zeros, ones, pweights, k)
            break

    _shap_recurse(
        hot, x, phi, feats, zeros, ones, pweights,
        hot_fraction * incoming_zero, incoming_one, node.feature,
    )
    # a zero-weight cold branch contributes nothing to any subset
    if cold_fraction * incoming_zero != 0.0:
        _shap_recurse(
            cold, x, phi, feats, zeros, ones, pweights,
            cold_fraction * incoming_zero, 0.0, node.feature,
        )


def _tree_phi(tree: TreeNode, x: np.ndarray, phi: np.ndarray):
    if tree.is_leaf:
        return
    _shap_recurse(tree, x, phi, [], [], [], [], 1.0, 1.0, -1)


def tree_shap(ens: TreeEnsemble, ds: SurvivalDataset) -> ShapMatrix:
    """Exact path-dependent attributions for every record of a dataset.

    Returns an (n, p) matrix of per-variable contributions and the global
    base value phi0 (the cover-weighted expected margin of the ensemble).
    Rows with identical feature vectors are deduplicated before descent.
    """
    if ds.p != ens.n_features:
        raise ShapeError(
            f"ensemble was trained on {ens.n_features} features, dataset has {ds.p}"
        )
    uniq, inverse = _unique_rows(ds.features)
    phi_uniq = np.zeros((uniq.shape[0], ds.p))
    for tree in ens.trees:
        for u in range(uniq.shape[0]):
            _tree_phi(tree, uniq[u], phi_uniq[u])

    phi = ens.eta * phi_uniq[inverse]
    phi0 = ens.base_margin + ens.eta * sum(t.expectation() for t in ens.trees)
    return ShapMatrix(phi0=float(phi0), phi=phi, feature_names=ds.feature_names)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def _conditional_expectation(node: TreeNode, x, subset) -> float:
    if node.is_leaf:
        return node.weight
    if node.feature in subset:
        v = x[node.feature]
        if np.isnan(v):
            child = node.left if node.default_left else node.right
        elif v < node.threshold:
            child = node.left
        else:
            child = node.right
        return _conditional_expectation(child, x, subset)
    lf, rf = _split_fractions(node)
    return lf * _conditional_expectation(
        node.left, x, subset
    ) + rf * _conditional_expectation(node.right, x, subset)


def shap_brute_force(ens: TreeEnsemble, x) -> np.ndarray:
    """Classical Shapley values by exhaustive subset enumeration.

    Evaluates the cover-weighted conditional expectation v(S) for all 2^p
    feature subsets and combines marginal contributions with the Shapley
    kernel. Verification oracle; limited to p <= 15.
    """
    x = np.asarray(x, dtype=np.float64)
    p = ens.n_features
    if x.shape != (p,):
        raise ShapeError(f"expected feature vector of length {p}, got {x.shape}")
    if p > _BRUTE_FORCE_MAX_FEATURES:
        raise CapacityError(
            f"brute-force enumeration capped at {_BRUTE_FORCE_MAX_FEATURES} "
            f"features, got {p}"
        )

    values = {}
    for size in range(p + 1):
        for subset in combinations(range(p), size):
            values[subset] = sum(
                _conditional_expectation(t, x, frozenset(subset)) for t in ens.trees
            )

    phi = np.zeros(p)
    fact = math.factorial
    for j in range(p):
        rest = [f for f in range(p) if f != j]
        for size in range(p):
            weight = fact(size) * fact(p - size - 1) / fact(p)
            for subset in combinations(rest, size):
                with_j = tuple(sorted(subset + (j,)))
                phi[j] += weight * (values[with_j] - values[subset])
    return ens.eta * phi


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_shap_csv(shap: ShapMatrix, path):
    """CSV export: a phi0 header record, then one row per patient."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi0", repr(shap.phi0)])
        names = shap.feature_names or tuple(
            f"x{j}" for j in range(shap.phi.shape[1])
        )
        writer.writerow(names)
        for row in shap.phi:
            writer.writerow([repr(float(v)) for v in row])
