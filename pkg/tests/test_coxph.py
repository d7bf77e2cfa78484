import json
import math

import numpy as np
import pytest

from survhr.coxph import (
    CoxModel,
    cox_trainer,
    fit_coxph,
    hazard_ratio_coxph,
    model_from_json,
    model_to_json,
    neg_log_partial_likelihood,
)
from survhr.data import BINARY, CONTINUOUS, FeatureSpec, SurvivalDataset
from survhr.errors import ConvergenceError, FitError, ValidationError
from survhr.hazard import SubgroupSplit, median_split

from conftest import finite_difference_grad_hess, random_dataset


def replace_features(ds, features, specs=None):
    return SurvivalDataset(
        ds.time,
        ds.event,
        features,
        specs if specs is not None else ds.specs,
        allow_no_events=not ds.event.any(),
    )


class TestNegLogPartialLikelihood:
    def test_all_censored_gives_zero(self):
        ds = SurvivalDataset(
            [3.0, 1.0, 2.0],
            [False, False, False],
            np.zeros((3, 0)),
            [],
            allow_no_events=True,
        )
        loss, grad, hess = neg_log_partial_likelihood(ds, np.zeros(3))
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros(3))
        np.testing.assert_array_equal(hess, np.zeros(3))

    def test_single_event_zero_margins_closed_form(self):
        # one event with risk-set size m: loss = log m
        for m in (1, 2, 5, 9):
            time = np.arange(1.0, m + 1.0)
            event = np.zeros(m, dtype=bool)
            event[0] = True  # earliest subject dies; everyone is at risk
            ds = SurvivalDataset(time, event, np.zeros((m, 0)), [])
            loss, _, _ = neg_log_partial_likelihood(ds, np.zeros(m))
            assert loss == pytest.approx(math.log(m), abs=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        ds = random_dataset(rng, n=20, p=0)
        margins = rng.normal(0.0, 1.0, 20)
        _, grad, _ = neg_log_partial_likelihood(ds, margins)
        fd_grad, _ = finite_difference_grad_hess(ds, margins)
        rel = np.max(np.abs(grad - fd_grad)) / np.max(np.abs(fd_grad))
        assert rel < 1e-6

    def test_tied_event_times_share_denominator(self):
        # two events tied at t=1 with one later subject, margins zero:
        # each event term is -log(3) under the shared-denominator rule
        ds = SurvivalDataset(
            [1.0, 1.0, 2.0], [True, True, False], np.zeros((3, 0)), []
        )
        loss, _, _ = neg_log_partial_likelihood(ds, np.zeros(3))
        assert loss == pytest.approx(2.0 * math.log(3.0), abs=1e-12)

    def test_margin_length_checked(self, tiny_ds):
        with pytest.raises(ValidationError):
            neg_log_partial_likelihood(tiny_ds, np.zeros(3))


class TestFitCoxph:
    def test_recovers_simulated_coefficients(self, sim_ds):
        model = fit_coxph(sim_ds)
        assert model.converged
        truth = np.array([1.0, -2.0, 2.0])
        z = np.abs(model.beta - truth) / model.standard_errors
        assert np.all(z < 3.0)

    def test_constant_covariate_raises_fit_error(self):
        ds = SurvivalDataset(
            [1.0, 2.0, 3.0],
            [True, True, False],
            np.full((3, 1), 7.0),
            [FeatureSpec("c", CONTINUOUS, 7, 7)],
        )
        with pytest.raises(FitError, match="constant"):
            fit_coxph(ds)

    def test_monotone_likelihood_raises_convergence_error(self):
        ds = SurvivalDataset(
            [1.0, 2.0],
            [True, False],
            np.array([[1.0], [0.0]]),
            [FeatureSpec("x", BINARY, 0, 1)],
        )
        with pytest.raises(ConvergenceError) as exc:
            fit_coxph(ds)
        last = exc.value.model
        assert last is not None
        assert not last.converged
        assert last.beta[0] > 10.0  # diverging towards +inf

    def test_missing_features_rejected(self, tiny_ds):
        x = tiny_ds.features.copy()
        x[0, 1] = np.nan
        with pytest.raises(ValidationError, match="missing"):
            fit_coxph(replace_features(tiny_ds, x))

    def test_no_events_rejected(self):
        ds = SurvivalDataset(
            [1.0, 2.0],
            [False, False],
            np.array([[0.0], [1.0]]),
            [FeatureSpec("x", BINARY, 0, 1)],
            allow_no_events=True,
        )
        with pytest.raises(ValidationError, match="event"):
            fit_coxph(ds)

    def test_affine_shift_invariance(self):
        rng = np.random.default_rng(5)
        ds = random_dataset(rng, n=60, p=2)
        base = fit_coxph(ds)
        shifted = ds.features.copy()
        shifted[:, 0] += 13.7
        moved = fit_coxph(replace_features(ds, shifted))
        np.testing.assert_allclose(moved.beta, base.beta, atol=1e-6)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(6)
        ds = random_dataset(rng, n=60, p=2)
        base = fit_coxph(ds)
        for c in (10.0, 0.25):
            scaled = ds.features.copy()
            scaled[:, 1] *= c
            moved = fit_coxph(replace_features(ds, scaled))
            assert moved.beta[1] == pytest.approx(base.beta[1] / c, abs=1e-6)
            assert moved.beta[0] == pytest.approx(base.beta[0], abs=1e-6)

    def test_loglik_no_worse_than_null(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            ds = random_dataset(rng, n=40, p=3)
            model = fit_coxph(ds)
            null_loss, _, _ = neg_log_partial_likelihood(ds, np.zeros(ds.n))
            assert model.log_partial_likelihood >= -null_loss - 1e-10

    def test_trainer_closure_scores_new_data(self, sim_ds):
        risk_fn = cox_trainer()(sim_ds)
        risk = risk_fn(sim_ds.features[:10])
        assert risk.shape == (10,)


class TestHazardRatioCoxph:
    def make_binary_ds(self):
        rng = np.random.default_rng(8)
        x = rng.integers(0, 2, (40, 1)).astype(float)
        time = rng.uniform(1, 50, 40)
        event = rng.random(40) < 0.8
        return SurvivalDataset(
            time, event, x, [FeatureSpec("b", BINARY, 0, 1)]
        )

    def test_binary_pure_subgroups_reduce_to_exp_beta(self):
        ds = self.make_binary_ds()
        model = fit_coxph(ds)
        est = hazard_ratio_coxph(model, ds, 0, median_split(ds, 0))
        assert est.point == math.exp(model.beta[0])

    def test_zero_coefficient_gives_unit_hr(self, tiny_ds):
        model = CoxModel(
            beta=np.array([0.0, 0.0]),
            standard_errors=np.array([0.1, 0.1]),
            log_partial_likelihood=0.0,
            iterations=0,
            converged=True,
            feature_names=tiny_ds.feature_names,
        )
        est = hazard_ratio_coxph(model, tiny_ds, 0, median_split(tiny_ds, 0))
        assert est.point == 1.0
        assert not est.significant

    def test_continuous_subgroup_means(self):
        # means 0.8 vs 0.3 with beta=2 -> HR = e^1
        x = np.array([[0.8], [0.8], [0.3], [0.3]])
        ds = SurvivalDataset(
            [1.0, 2.0, 3.0, 4.0],
            [True, True, True, False],
            x,
            [FeatureSpec("v", CONTINUOUS, 0, 1)],
        )
        model = CoxModel(
            beta=np.array([2.0]),
            standard_errors=np.array([0.5]),
            log_partial_likelihood=0.0,
            iterations=1,
            converged=True,
        )
        split = SubgroupSplit(s1=(0, 1), s2=(2, 3))
        est = hazard_ratio_coxph(model, ds, 0, split)
        assert est.point == pytest.approx(math.e, rel=1e-12)

    def test_ci_orientation_with_negative_difference(self):
        # negative mean difference flips the interval endpoints
        x = np.array([[0.0], [0.0], [1.0], [1.0]])
        ds = SurvivalDataset(
            [1.0, 2.0, 3.0, 4.0],
            [True, True, True, False],
            x,
            [FeatureSpec("v", BINARY, 0, 1)],
        )
        model = CoxModel(
            beta=np.array([1.0]),
            standard_errors=np.array([0.2]),
            log_partial_likelihood=0.0,
            iterations=1,
            converged=True,
        )
        split = SubgroupSplit(s1=(0, 1), s2=(2, 3))  # mean diff = -1
        est = hazard_ratio_coxph(model, ds, 0, split)
        assert est.ci_low <= est.point <= est.ci_high
        assert est.point == pytest.approx(math.exp(-1.0), rel=1e-12)


class TestSerialization:
    def test_roundtrip(self, sim_ds):
        model = fit_coxph(sim_ds)
        text = model_to_json(model)
        obj = json.loads(text)
        assert set(obj) == {"beta", "se", "loglik", "converged", "iterations"}
        back = model_from_json(text)
        np.testing.assert_array_equal(back.beta, model.beta)
        np.testing.assert_array_equal(back.standard_errors, model.standard_errors)
        assert back.converged == model.converged
        assert back.iterations == model.iterations
