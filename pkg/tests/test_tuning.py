import numpy as np
import pytest

import guidestack.seeding as seeding
from guidestack.dataio import features_and_labels
from guidestack.errors import ConfigError, UndefinedMetricError
from guidestack.learners import LinearParams, TreeParams, fit_base
from guidestack.losses import LossSpec
from guidestack.metrics import mse, spearman
from guidestack.synthetic import synthetic_dataset
from guidestack.tuning import TuneSpec, VotedModel, grid_search, kfold_indices, vote_predict

SQ = LossSpec("squared")


class Stub:
    def __init__(self, value):
        self.value = value

    def predict(self, X):
        return np.full(len(X), self.value)


def problem(n=60, seed=0):
    return features_and_labels(synthetic_dataset(n, seed=seed))


class TestKfold:
    def test_partition_covers_everything_once(self):
        folds = kfold_indices(23, 5, seed=3)
        allidx = np.concatenate(folds)
        assert sorted(allidx.tolist()) == list(range(23))
        sizes = sorted(len(f) for f in folds)
        assert sizes == [4, 4, 5, 5, 5]

    def test_deterministic(self):
        a = kfold_indices(40, 4, seed=9)
        b = kfold_indices(40, 4, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_matches_documented_derivation(self):
        # shuffled contiguous chunks of a seeded permutation
        n, k, seed = 17, 3, 55
        perm = seeding.rng(seed).permutation(n)
        sizes = [6, 6, 5]
        expected, start = [], 0
        for s in sizes:
            expected.append(np.sort(perm[start:start + s]))
            start += s
        got = kfold_indices(n, k, seed)
        assert all(np.array_equal(x, y) for x, y in zip(got, expected))

    def test_too_many_folds_rejected(self):
        with pytest.raises(ConfigError):
            kfold_indices(3, 4, seed=0)


class TestGridSearch:
    def test_singleton_grid_wins_every_metric(self):
        X, y = problem()
        spec = TuneSpec(metrics=("spearman", "neg_mse"), folds=3, seed=1)
        res = grid_search("tree", SQ, X, y, [TreeParams(max_depth=2)], spec)
        for metric in spec.metrics:
            assert res.winners[metric].cell_index == 0
            assert res.winners[metric].params == TreeParams(max_depth=2)

    def test_dominant_cell_wins_all_metrics(self):
        # exactly linear target: the lightly regularized cell reaches
        # near-perfect CV predictions, so it strictly dominates everywhere
        rng = np.random.default_rng(2)
        X = rng.normal(size=(120, 6))
        y = X @ rng.normal(size=6)
        grid = [LinearParams(ridge_lambda=1e-6), LinearParams(ridge_lambda=1e6)]
        res = grid_search("linear", SQ, X, y, grid, TuneSpec(folds=3, seed=2))
        assert np.all(res.table[0] > res.table[1])
        for metric in res.metrics:
            assert res.winners[metric].cell_index == 0

    def test_full_cv_recomputation_oracle(self):
        # re-run every fold fit from scratch with the documented derivations
        X, y = problem(45, seed=3)
        grid = [TreeParams(max_depth=1), TreeParams(max_depth=2), TreeParams(max_depth=3)]
        spec = TuneSpec(metrics=("spearman", "neg_mse"), folds=3, seed=77)
        res = grid_search("tree", SQ, X, y, grid, spec)

        folds = kfold_indices(len(y), spec.folds, seeding.child_seed(spec.seed, seeding.TAG_TUNE))
        for ci, params in enumerate(grid):
            per_fold = []
            for fi, test_idx in enumerate(folds):
                train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
                model = fit_base("tree", X[train_idx], y[train_idx], params, SQ,
                                 seed=seeding.child_seed(spec.seed, seeding.TAG_TUNE, ci, fi))
                preds = model.predict(X[test_idx])
                try:
                    rho = spearman(y[test_idx], preds)
                except UndefinedMetricError:
                    rho = np.nan
                per_fold.append((rho, -mse(y[test_idx], preds)))
            expected = np.nanmean(np.asarray(per_fold), axis=0)
            got = res.table[ci]
            for e, g in zip(expected, got):
                if np.isnan(e):
                    assert np.isnan(g)
                else:
                    assert g == pytest.approx(e, abs=1e-15)

    def test_winners_drawn_from_grid(self):
        X, y = problem(40, seed=4)
        grid = [TreeParams(max_depth=d) for d in (1, 2, 4)]
        res = grid_search("tree", SQ, X, y, grid, TuneSpec(folds=2, seed=5))
        for w in res.winners.values():
            assert w.params in grid

    def test_argmax_invariant_under_increasing_transform(self):
        X, y = problem(40, seed=6)
        grid = [TreeParams(max_depth=d) for d in (1, 2, 3)]
        res = grid_search("tree", SQ, X, y, grid, TuneSpec(folds=2, seed=6))
        for mi, metric in enumerate(res.metrics):
            col = res.table[:, mi]
            if np.all(np.isnan(col)):
                continue
            transformed = np.exp(col)  # strictly increasing
            assert int(np.nanargmax(transformed)) == res.winners[metric].cell_index

    def test_empty_grid_rejected(self):
        X, y = problem(20, seed=7)
        with pytest.raises(ConfigError):
            grid_search("tree", SQ, X, y, [], TuneSpec(folds=2, seed=0))

    def test_more_folds_than_rows_rejected(self):
        X, y = problem(4, seed=8)
        with pytest.raises(ConfigError):
            grid_search("tree", SQ, X, y, [TreeParams()], TuneSpec(folds=5, seed=0))

    def test_f1_metric_parseable_and_scored(self):
        X, y = problem(40, seed=9)
        spec = TuneSpec(metrics=("f1_at_0.5",), folds=2, seed=10)
        res = grid_search("tree", SQ, X, y, [TreeParams(max_depth=2)], spec)
        assert "f1_at_0.5" in res.winners

    def test_unknown_metric_rejected(self):
        with pytest.raises(ConfigError):
            TuneSpec(metrics=("pearson",))


class TestVoting:
    def test_single_winner_identity(self):
        rng = np.random.default_rng(11)
        X, y = problem(30, seed=11)
        model = fit_base("tree", X, y, TreeParams(max_depth=2), SQ, seed=1)
        assert np.array_equal(vote_predict([model], X), model.predict(X))

    def test_two_constant_winners(self):
        out = vote_predict([Stub(0.1), Stub(0.3)], np.zeros((4, 2)))
        assert np.allclose(out, 0.2, atol=1e-15)

    def test_three_winners_match_recomputed_mean(self):
        X, y = problem(30, seed=12)
        models = [fit_base("tree", X, y, TreeParams(max_depth=d), SQ, seed=d) for d in (1, 2, 3)]
        Xq, _ = problem(10, seed=13)
        voted = vote_predict(models, Xq)
        recomputed = np.stack([m.predict(Xq) for m in models]).mean(axis=0)
        assert np.max(np.abs(voted - recomputed)) <= 1e-15

    def test_median_mode(self):
        out = vote_predict([Stub(0.0), Stub(0.4), Stub(1.0)], np.zeros((2, 2)), how="median")
        assert np.all(out == 0.4)

    def test_empty_winner_list_rejected(self):
        with pytest.raises(ValueError):
            vote_predict([], np.zeros((2, 2)))

    def test_voted_model_wraps_members(self):
        vm = VotedModel([Stub(0.2), Stub(0.6)])
        assert np.allclose(vm.predict(np.zeros((3, 1))), 0.4, atol=1e-15)
