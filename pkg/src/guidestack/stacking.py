"""Two-tier stacked generalization with a linear meta-learner.

Base models are described by refittable specs. For each of k folds, every
base is retrained on the out-of-fold portion and predicts the held-out
rows, filling a meta-feature matrix Z with no row ever predicted by a
model that saw it. A ridge regression of y on Z (tiny penalty, intercept
free) gives the meta weights; the bases are then refit on all rows for
prediction time. Everything derives deterministically from one seed, and
the fold assignment is stored for leakage audits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import seeding
from .errors import ConfigError, FitError
from .learners import fit_base
from .losses import LossSpec
from .refine import fit_refined
from .tuning import VotedModel, kfold_indices

META_RIDGE = 1e-6


@dataclass(frozen=True)
class SingleSpec:
    """One family trained under one loss with fixed params."""

    name: str
    family: str
    loss: LossSpec
    params: object

    def fit(self, X, y, seed: int):
        return fit_base(self.family, X, y, self.params, self.loss, seed)


@dataclass(frozen=True)
class RefinedSpec:
    """One family trained under every loss in loss_set, mean prediction."""

    name: str
    family: str
    loss_set: tuple[LossSpec, ...]
    params_per_loss: tuple

    def fit(self, X, y, seed: int):
        return fit_refined(self.family, X, y, self.loss_set, self.params_per_loss, seed)


@dataclass(frozen=True)
class VotedSpec:
    """Vote over per-metric winner specs.

    Members with identical specs (the usual case when every metric crowns
    the same cell) are fitted once and shared; the member seed comes from
    the first occurrence index, so the vote stays a plain mean over the
    declared members either way.
    """

    name: str
    members: tuple
    how: str = "mean"

    def fit(self, X, y, seed: int):
        cache: dict = {}
        fitted = []
        for i, member in enumerate(self.members):
            if member not in cache:
                cache[member] = member.fit(X, y, seeding.child_seed(seed, seeding.TAG_VOTE, i))
            fitted.append(cache[member])
        return VotedModel(fitted, self.how)


def spec_to_dict(spec) -> dict:
    if isinstance(spec, SingleSpec):
        from dataclasses import asdict

        return {"kind": "single", "name": spec.name, "family": spec.family,
                "loss": asdict(spec.loss), "params": asdict(spec.params)}
    if isinstance(spec, RefinedSpec):
        from dataclasses import asdict

        return {"kind": "refined", "name": spec.name, "family": spec.family,
                "losses": [asdict(s) for s in spec.loss_set],
                "params_per_loss": [asdict(p) for p in spec.params_per_loss]}
    if isinstance(spec, VotedSpec):
        return {"kind": "voted", "name": spec.name, "how": spec.how,
                "members": [spec_to_dict(m) for m in spec.members]}
    raise TypeError(f"cannot serialize spec of type {type(spec).__name__}")


def spec_from_dict(d: dict):
    from .learners import PARAM_TYPES

    if d["kind"] == "single":
        return SingleSpec(d["name"], d["family"], LossSpec(**d["loss"]),
                          PARAM_TYPES[d["family"]](**d["params"]))
    if d["kind"] == "refined":
        return RefinedSpec(d["name"], d["family"],
                           tuple(LossSpec(**s) for s in d["losses"]),
                           tuple(PARAM_TYPES[d["family"]](**p) for p in d["params_per_loss"]))
    if d["kind"] == "voted":
        return VotedSpec(d["name"], tuple(spec_from_dict(m) for m in d["members"]), d["how"])
    raise ValueError(f"unknown spec kind {d['kind']!r}")


def _oof_matrix(base_specs, X, y, folds, seed) -> np.ndarray:
    n = X.shape[0]
    Z = np.empty((n, len(base_specs)), dtype=float)
    all_rows = np.arange(n)
    for j, spec in enumerate(base_specs):
        for fi, test_idx in enumerate(folds):
            train_mask = np.ones(n, dtype=bool)
            train_mask[test_idx] = False
            train_idx = all_rows[train_mask]
            try:
                model = spec.fit(X[train_idx], y[train_idx], seeding.child_seed(seed, seeding.TAG_STACK, 1, fi, j))
            except Exception as exc:
                name = getattr(spec, "name", f"base {j}")
                raise ConfigError(f"base {name!r} cannot train on fold {fi} ({train_idx.size} rows): {exc}") from exc
            Z[test_idx, j] = model.predict(X[test_idx])
    return Z


def _meta_fit(Z: np.ndarray, y: np.ndarray, ridge: float, nonnegative: bool) -> tuple[np.ndarray, float]:
    n, m = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    if not nonnegative:
        penalty = np.full(m + 1, ridge)
        penalty[-1] = 0.0
        M = A.T @ A + np.diag(penalty)
        beta = np.linalg.solve(M, A.T @ y)
    else:
        from scipy.optimize import lsq_linear

        # penalty rows keep the augmented problem equivalent to ridge
        aug = np.zeros((m, m + 1))
        aug[:, :m] = np.sqrt(ridge) * np.eye(m)
        A_full = np.vstack([A, aug])
        b_full = np.concatenate([y, np.zeros(m)])
        lo = np.concatenate([np.zeros(m), [-np.inf]])
        hi = np.full(m + 1, np.inf)
        beta = lsq_linear(A_full, b_full, bounds=(lo, hi)).x
    return beta[:-1], float(beta[-1])


class StackedEnsemble:
    def __init__(self, base_specs, fitted_bases, meta_weights, meta_intercept,
                 k: int, seed: int, fold_assignment: np.ndarray,
                 append_features: bool = False, nonnegative: bool = False):
        if len(fitted_bases) != len(base_specs):
            raise ValueError("one fitted base required per spec")
        self.base_specs = tuple(base_specs)
        self.fitted_bases = tuple(fitted_bases)
        self.meta_weights = np.asarray(meta_weights, dtype=float)
        self.meta_intercept = float(meta_intercept)
        self.k = k
        self.seed = seed
        self.fold_assignment = np.asarray(fold_assignment, dtype=int)
        self.append_features = append_features
        self.nonnegative = nonnegative

    def base_predictions(self, X) -> np.ndarray:
        return np.column_stack([m.predict(X) for m in self.fitted_bases])

    def predict(self, X) -> np.ndarray:
        """Affine combination of the full-data base predictions; raw output."""
        X = np.asarray(X, dtype=float)
        Z = self.base_predictions(X)
        if self.append_features:
            Z = np.hstack([Z, X])
        return Z @ self.meta_weights + self.meta_intercept

    def to_dict(self) -> dict:
        from .persistence import model_payload

        return {
            "base_specs": [spec_to_dict(s) for s in self.base_specs],
            "fitted_bases": [model_payload(m) for m in self.fitted_bases],
            "meta_weights": self.meta_weights.tolist(),
            "meta_intercept": self.meta_intercept,
            "k": self.k,
            "seed": self.seed,
            "fold_assignment": self.fold_assignment.tolist(),
            "append_features": self.append_features,
            "nonnegative": self.nonnegative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StackedEnsemble":
        from .persistence import model_from_payload

        return cls(
            [spec_from_dict(s) for s in d["base_specs"]],
            [model_from_payload(m) for m in d["fitted_bases"]],
            np.array(d["meta_weights"]), d["meta_intercept"], d["k"], d["seed"],
            np.array(d["fold_assignment"]), d["append_features"], d["nonnegative"],
        )


def fit_stacked(base_specs: Sequence, X, y, k: int = 5, seed: int = 0, *,
                meta_ridge: float = META_RIDGE, nonnegative: bool = False,
                append_features: bool = False) -> StackedEnsemble:
    """Fit the two-tier ensemble.

    Fold assignment comes from kfold_indices(n, k, child(seed, TAG_STACK, 0));
    the fold model for (fold fi, base j) is seeded by (seed, TAG_STACK, 1,
    fi, j) and the full-data refits by (seed, TAG_STACK, 2, j).
    """
    base_specs = tuple(base_specs)
    if not base_specs:
        raise ConfigError("stacking needs at least one base spec")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if k < 2 or k > n:
        raise ConfigError(f"cannot stack with k={k} on {n} rows")
    folds = kfold_indices(n, k, seeding.child_seed(seed, seeding.TAG_STACK, 0))
    Z = _oof_matrix(base_specs, X, y, folds, seed)
    meta_in = np.hstack([Z, X]) if append_features else Z
    weights, intercept = _meta_fit(meta_in, y, meta_ridge, nonnegative)
    fitted = []
    for j, spec in enumerate(base_specs):
        try:
            fitted.append(spec.fit(X, y, seeding.child_seed(seed, seeding.TAG_STACK, 2, j)))
        except Exception as exc:
            name = getattr(spec, "name", f"base {j}")
            raise FitError(f"full-data fit of base {name!r} failed: {exc}") from exc
    fold_assignment = np.empty(n, dtype=int)
    for fi, test_idx in enumerate(folds):
        fold_assignment[test_idx] = fi
    return StackedEnsemble(base_specs, fitted, weights, intercept, k, seed,
                           fold_assignment, append_features, nonnegative)


def predict_stacked(se: StackedEnsemble, X) -> np.ndarray:
    return se.predict(X)


def oof_predictions(base_specs: Sequence, X, y, k: int, seed: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """The meta-feature matrix and fold assignment used by fit_stacked.

    Exposed so audits can recompute Z without refitting the meta stage.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    folds = kfold_indices(X.shape[0], k, seeding.child_seed(seed, seeding.TAG_STACK, 0))
    return _oof_matrix(tuple(base_specs), X, y, folds, seed), folds
