import numpy as np
import pytest

from survhr.data import BINARY, CONTINUOUS, FeatureSpec, SurvivalDataset
from survhr.simdata import SimConfig, simulate

# canonical simulated dataset: n=850, betas (1, -2, 2), 20% censored
SIM_CONFIG = SimConfig(n=850, betas=(1.0, -2.0, 2.0), censor_frac=0.2, seed=7)


@pytest.fixture(scope="session")
def sim_ds():
    return simulate(SIM_CONFIG)


@pytest.fixture
def tiny_ds():
    """Six subjects, one binary and one continuous feature, mixed censoring."""
    time = [5.0, 8.0, 3.0, 12.0, 7.0, 20.0]
    event = [True, False, True, True, False, True]
    x = np.array(
        [
            [1.0, 0.2],
            [0.0, 0.9],
            [1.0, 0.5],
            [0.0, 0.1],
            [1.0, 0.7],
            [0.0, 0.3],
        ]
    )
    specs = [
        FeatureSpec("flag", BINARY, 0.0, 1.0),
        FeatureSpec("level", CONTINUOUS, 0.0, 1.0),
    ]
    return SurvivalDataset(time, event, x, specs)


def random_dataset(rng, n, p, censor=0.4, missing=0.0):
    """Random survival data for property tests (times distinct w.h.p.)."""
    time = rng.uniform(1.0, 100.0, n)
    event = rng.random(n) >= censor
    if not event.any():
        event[int(rng.integers(0, n))] = True
    x = rng.normal(0.0, 1.0, (n, p))
    if missing > 0.0:
        x[rng.random((n, p)) < missing] = np.nan
    specs = [FeatureSpec(f"f{j}", CONTINUOUS, -10.0, 10.0) for j in range(p)]
    return SurvivalDataset(time, event, x, specs)


def brute_force_c_index(times, events, risk):
    """O(n^2) pair-enumeration oracle for the concordance index."""
    times = np.asarray(times, dtype=np.float64)
    events = np.asarray(events, dtype=bool)
    risk = np.asarray(risk, dtype=np.float64)
    comparable = 0
    concordant = 0
    tied = 0
    n = times.shape[0]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if not events[i]:
                continue
            if times[i] < times[j] or (times[i] == times[j] and not events[j]):
                comparable += 1
                if risk[i] > risk[j]:
                    concordant += 1
                elif risk[i] == risk[j]:
                    tied += 1
    if comparable == 0:
        raise ZeroDivisionError("no comparable pairs")
    return (concordant + 0.5 * tied) / comparable


def finite_difference_grad_hess(ds, margins, eps=1e-5):
    """Central finite differences of the partial-likelihood loss and gradient.

    The gradient oracle differences the loss; the Hessian oracle differences
    the analytic gradient (itself validated against the loss), which keeps
    the second-derivative check at first-difference accuracy.
    """
    from survhr.coxph import neg_log_partial_likelihood

    margins = np.asarray(margins, dtype=np.float64)
    n = margins.shape[0]
    grad = np.zeros(n)
    hess = np.zeros(n)
    for i in range(n):
        up = margins.copy()
        up[i] += eps
        down = margins.copy()
        down[i] -= eps
        loss_up, grad_up, _ = neg_log_partial_likelihood(ds, up)
        loss_down, grad_down, _ = neg_log_partial_likelihood(ds, down)
        grad[i] = (loss_up - loss_down) / (2.0 * eps)
        hess[i] = (grad_up[i] - grad_down[i]) / (2.0 * eps)
    return grad, hess


def random_tree(p, depth, rng, scale=1.0):
    """Random tree with arbitrary positive covers; features may repeat."""
    from survhr.trees import TreeNode

    if depth == 0 or rng.random() < 0.3:
        return TreeNode(
            weight=float(rng.normal(0.0, scale)),
            cover=float(rng.uniform(0.5, 10.0)),
        )
    node = TreeNode(
        feature=int(rng.integers(0, p)),
        threshold=float(rng.uniform(-1.0, 1.0)),
        default_left=bool(rng.random() < 0.5),
        left=random_tree(p, depth - 1, rng, scale),
        right=random_tree(p, depth - 1, rng, scale),
    )
    node.cover = node.left.cover + node.right.cover
    return node


def random_ensemble(rng, max_features=5, max_depth=3, max_trees=10):
    from survhr.trees import TreeEnsemble

    p = int(rng.integers(1, max_features + 1))
    n_trees = int(rng.integers(1, max_trees + 1))
    trees = tuple(random_tree(p, max_depth, rng) for _ in range(n_trees))
    return TreeEnsemble(
        trees=trees,
        eta=float(rng.uniform(0.05, 1.0)),
        base_margin=0.0,
        n_features=p,
    )
