import numpy as np
import pytest

from guidestack.errors import FitError
from guidestack.learners import GbmParams, LinearParams, TreeParams
from guidestack.losses import LossSpec, default_loss_set
from guidestack.refine import RefinedModel, fit_refined, predict_refined
from guidestack.synthetic import synthetic_dataset
from guidestack.dataio import features_and_labels


class Stub:
    """Constant predictor used to pin the averaging arithmetic."""

    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(len(X), self.value)


def small_problem(n=60, seed=0):
    ds = synthetic_dataset(n, seed=seed)
    return features_and_labels(ds)


class TestStructure:
    def test_single_loss_identity(self):
        X, y = small_problem()
        rm = fit_refined("tree", X, y, [LossSpec("squared")], [TreeParams(max_depth=3)], seed=1)
        assert len(rm.constituents) == 1
        assert np.array_equal(rm.predict(X), rm.constituents[0].predict(X))

    def test_default_four_losses_four_constituents(self):
        X, y = small_problem()
        losses = default_loss_set()
        rm = fit_refined("tree", X, y, losses, [TreeParams(max_depth=2)] * 4, seed=2)
        assert len(rm.constituents) == 4
        assert rm.family == "tree"
        assert tuple(s.kind for s in rm.loss_set) == ("squared", "absolute", "huber", "quantile")

    def test_empty_loss_set_rejected(self):
        X, y = small_problem()
        with pytest.raises(ValueError):
            fit_refined("tree", X, y, [], [], seed=0)

    def test_mismatched_params_rejected(self):
        X, y = small_problem()
        with pytest.raises(ValueError):
            fit_refined("tree", X, y, default_loss_set(), [TreeParams()], seed=0)

    def test_fit_errors_annotated_with_loss(self):
        X = np.ones((10, 2))
        y = np.random.default_rng(0).uniform(size=10)
        with pytest.raises(FitError, match="absolute"):
            fit_refined("linear", X, y, [LossSpec("absolute")], [LinearParams(ridge_lambda=0.0)], seed=0)


class TestAveraging:
    def test_fixed_constituent_values(self):
        rm = RefinedModel("tree", [Stub(0.2), Stub(0.4), Stub(0.6)],
                          [LossSpec("squared"), LossSpec("absolute"), LossSpec("huber")])
        out = rm.predict(np.zeros((5, 3)))
        assert np.all(out == pytest.approx(0.4, abs=1e-15))

    def test_identical_constituents_idempotent(self):
        rm = RefinedModel("tree", [Stub(0.3)] * 4, list(default_loss_set()))
        assert np.all(rm.predict(np.zeros((3, 2))) == 0.3)

    def test_matches_recomputed_mean(self):
        X, y = small_problem(80, seed=3)
        rm = fit_refined("tree", X, y, default_loss_set(), [TreeParams(max_depth=3)] * 4, seed=4)
        Xq, _ = small_problem(30, seed=5)
        preds = predict_refined(rm, Xq)
        recomputed = np.stack([m.predict(Xq) for m in rm.constituents]).mean(axis=0)
        assert np.max(np.abs(preds - recomputed)) <= 1e-15

    def test_pointwise_bounds(self):
        X, y = small_problem(80, seed=6)
        rm = fit_refined("gbm", X, y, default_loss_set(), [GbmParams(n_stages=5, max_depth=2)] * 4, seed=7)
        Xq, _ = small_problem(40, seed=8)
        per = np.stack([m.predict(Xq) for m in rm.constituents])
        out = rm.predict(Xq)
        assert np.all(out >= per.min(axis=0) - 1e-12)
        assert np.all(out <= per.max(axis=0) + 1e-12)

    def test_jensen_mse_bound(self):
        X, y = small_problem(100, seed=9)
        rm = fit_refined("tree", X, y, default_loss_set(), [TreeParams(max_depth=3)] * 4, seed=10)
        Xq, yq = small_problem(60, seed=11)
        refined_mse = float(np.mean((rm.predict(Xq) - yq) ** 2))
        per_mse = [float(np.mean((m.predict(Xq) - yq) ** 2)) for m in rm.constituents]
        assert refined_mse <= float(np.mean(per_mse)) + 1e-12

    def test_same_seed_identical_serialization(self):
        X, y = small_problem(50, seed=12)
        kwargs = dict(loss_set=default_loss_set(), params_per_loss=[TreeParams(max_depth=2)] * 4, seed=13)
        a = fit_refined("tree", X, y, **kwargs)
        b = fit_refined("tree", X, y, **kwargs)
        assert a.to_dict() == b.to_dict()
