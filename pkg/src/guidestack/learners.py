"""Base regressors trainable under any of the four losses.

Families:

* tree    greedy CART; every split maximizes the drop in summed loss at
          the children's optimal constants
* forest  bagged trees with per-node feature subsampling, mean prediction
* gbm     gradient boosting: stage trees are least-squares fits to the
          pseudo-residuals, then each leaf is relabeled with the optimal
          constant of the actual loss before shrinkage is applied
* linear  ridge normal equations for squared loss; epsilon-smoothed IRLS
          for absolute, huber, and quantile

Split thresholds are midpoints between consecutive sorted unique feature
values, ties on gain break toward the lowest (feature index, threshold),
and no randomness is consumed except through the forest seed, so identical
inputs always produce identical models. Predictions are raw model outputs;
clipping to [0, 1] happens once, at CLI prediction output.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import seeding
from .errors import NumericError
from .losses import LossSpec, loss_value, negative_gradient, optimal_constant

FAMILIES = ("tree", "forest", "gbm", "linear")

# Relative slack used to shortlist near-best splits found by the fast
# prefix-sum scan before exact re-scoring.
_FINALIST_BAND = 1e-8


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 6
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int = 6
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    feature_fraction: float = 0.34
    bootstrap: bool = True

    def __post_init__(self):
        TreeParams(self.max_depth, self.min_samples_leaf, self.min_samples_split)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ValueError("feature_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class GbmParams:
    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        TreeParams(self.max_depth, self.min_samples_leaf, self.min_samples_split)
        if self.n_stages < 1:
            raise ValueError("n_stages must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")


@dataclass(frozen=True)
class LinearParams:
    ridge_lambda: float = 1e-6
    irls_max_iter: int = 100
    irls_tol: float = 1e-8
    irls_epsilon: float = 1e-6

    def __post_init__(self):
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.irls_max_iter < 1 or self.irls_tol <= 0 or self.irls_epsilon <= 0:
            raise ValueError("invalid IRLS settings")


PARAM_TYPES = {"tree": TreeParams, "forest": ForestParams, "gbm": GbmParams, "linear": LinearParams}


def _check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < 1:
        raise ValueError("training data is empty")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("training data contains non-finite values")
    return X, y


def _check_predict_input(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected shape (n, {n_features}), got {X.shape}")
    return X


# ---------------------------------------------------------------------------
# decision tree


class DecisionTree:
    """Flat-array binary tree. feature == -1 marks a leaf."""

    def __init__(self, features, thresholds, left, right, values, loss: LossSpec, n_features: int):
        self.features = np.asarray(features, dtype=int)
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.values = np.asarray(values, dtype=float)
        self.loss = loss
        self.n_features = n_features

    def predict(self, X) -> np.ndarray:
        return self.values[self.apply(X)]

    def apply(self, X) -> np.ndarray:
        """Leaf node index for every row."""
        X = _check_predict_input(X, self.n_features)
        out = np.zeros(X.shape[0], dtype=int)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            f = self.features[node]
            if f < 0:
                out[rows] = node
                continue
            mask = X[rows, f] <= self.thresholds[node]
            stack.append((self.left[node], rows[mask]))
            stack.append((self.right[node], rows[~mask]))
        return out

    def depth(self) -> int:
        def walk(node: int) -> int:
            if self.features[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def leaf_sizes(self, X) -> np.ndarray:
        ids = self.apply(X)
        return np.bincount(ids, minlength=self.features.shape[0])

    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "thresholds": self.thresholds.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "values": self.values.tolist(),
            "loss": asdict(self.loss),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            d["features"], d["thresholds"], d["left"], d["right"], d["values"],
            LossSpec(**d["loss"]), d["n_features"],
        )


def _node_cost(loss: LossSpec, ys: np.ndarray) -> float:
    """Summed loss at the optimal constant, in row order."""
    c = optimal_constant(loss, ys)
    return float(np.sum(loss_value(loss, ys, c)))


def _all_binary(X: np.ndarray) -> bool:
    """True when every feature value is 0 or 1 (one-hot input)."""
    return bool(np.all((X == 0.0) | (X == 1.0)))


def _exact_scan(X_node, ys, feature_ids, min_leaf, parent_cost, loss):
    """Evaluate every (feature, threshold) candidate directly.

    Returns (gain, feature, threshold) or None. Strict improvement keeps
    the first (lowest feature, lowest threshold) of any exact tie.
    """
    n = ys.shape[0]
    best = None
    for f in feature_ids:
        xs = X_node[:, f]
        u = np.unique(xs)
        if u.shape[0] < 2:
            continue
        for t in (u[:-1] + u[1:]) / 2.0:
            mask = xs <= t
            nl = int(mask.sum())
            nr = n - nl
            if nl < min_leaf or nr < min_leaf or nl == 0 or nr == 0:
                continue
            gain = parent_cost - _node_cost(loss, ys[mask]) - _node_cost(loss, ys[~mask])
            if best is None or gain > best[0]:
                best = (gain, int(f), float(t))
    return best


def _binary_exact_scan(X_node, ys, feature_ids, min_leaf, parent_cost, loss):
    """_exact_scan specialized to 0/1 features: one threshold (0.5) each."""
    n = ys.shape[0]
    left_masks = X_node[:, feature_ids] <= 0.5
    nl = left_masks.sum(axis=0)
    usable = np.flatnonzero((nl >= max(min_leaf, 1)) & (n - nl >= max(min_leaf, 1)))
    best = None
    for k in usable:
        mask = left_masks[:, k]
        gain = parent_cost - _node_cost(loss, ys[mask]) - _node_cost(loss, ys[~mask])
        if best is None or gain > best[0]:
            best = (gain, int(feature_ids[k]), 0.5)
    return best


def _fast_squared_candidates(X_node, ys, feature_ids, min_leaf):
    """Prefix-sum split scores for squared loss, all thresholds at once.

    Returns (gains, features, thresholds) arrays; gains are relative to a
    zero parent cost (i.e. negated child cost sums plus a common offset),
    comparable across candidates but re-scored exactly before use.
    """
    n = ys.shape[0]
    all_g, all_f, all_t = [], [], []
    for f in feature_ids:
        xs = X_node[:, f]
        order = np.argsort(xs, kind="mergesort")
        xs_o = xs[order]
        ys_o = ys[order]
        ks = np.flatnonzero(xs_o[1:] != xs_o[:-1]) + 1  # left-side sizes
        if ks.size == 0:
            continue
        ks = ks[(ks >= min_leaf) & (n - ks >= min_leaf)]
        if ks.size == 0:
            continue
        cs = np.concatenate(([0.0], np.cumsum(ys_o)))
        css = np.concatenate(([0.0], np.cumsum(ys_o * ys_o)))
        sl, ssl = cs[ks], css[ks]
        sr, ssr = cs[-1] - sl, css[-1] - ssl
        nl = ks.astype(float)
        nr = float(n) - nl
        child_cost = 0.5 * (ssl - sl * sl / nl) + 0.5 * (ssr - sr * sr / nr)
        all_g.append(-child_cost)
        all_f.append(np.full(ks.shape[0], f, dtype=int))
        all_t.append((xs_o[ks - 1] + xs_o[ks]) / 2.0)
    if not all_g:
        return None
    return np.concatenate(all_g), np.concatenate(all_f), np.concatenate(all_t)


def _binary_squared_candidates(X_node, ys, feature_ids, min_leaf):
    """One matrix product scores every 0/1 feature's single split at once."""
    n = ys.shape[0]
    cols = X_node[:, feature_ids]
    n_right = cols.sum(axis=0)
    n_left = n - n_right
    total_s = float(ys.sum())
    total_ss = float((ys * ys).sum())
    sr = ys @ cols
    ssr = (ys * ys) @ cols
    sl = total_s - sr
    ssl = total_ss - ssr
    usable = (n_left >= max(min_leaf, 1)) & (n_right >= max(min_leaf, 1))
    keep = np.flatnonzero(usable)
    if keep.size == 0:
        return None
    nl, nr = n_left[keep], n_right[keep]
    child_cost = 0.5 * (ssl[keep] - sl[keep] ** 2 / nl) + 0.5 * (ssr[keep] - sr[keep] ** 2 / nr)
    return -child_cost, np.asarray(feature_ids)[keep], np.full(keep.size, 0.5)


def _fast_squared_scan(X_node, ys, feature_ids, min_leaf, parent_cost, loss, binary: bool):
    """Fast scan plus exact re-scoring of near-best candidates.

    The prefix-sum formula differs from the exact cost by rounding noise,
    so everything within a small band of the fast optimum is re-scored
    with _node_cost; this keeps tie-breaking identical to _exact_scan.
    """
    if binary:
        cand = _binary_squared_candidates(X_node, ys, feature_ids, min_leaf)
    else:
        cand = _fast_squared_candidates(X_node, ys, feature_ids, min_leaf)
    if cand is None:
        return None
    gains, feats, thrs = cand
    band = _FINALIST_BAND * (abs(parent_cost) + 1.0)
    keep = np.flatnonzero(gains >= gains.max() - band)
    order = np.lexsort((thrs[keep], feats[keep]))
    n = ys.shape[0]
    best = None
    for i in keep[order]:
        f, t = int(feats[i]), float(thrs[i])
        mask = X_node[:, f] <= t
        nl = int(mask.sum())
        nr = n - nl
        if nl < min_leaf or nr < min_leaf or nl == 0 or nr == 0:
            continue
        gain = parent_cost - _node_cost(loss, ys[mask]) - _node_cost(loss, ys[~mask])
        if best is None or gain > best[0]:
            best = (gain, f, t)
    return best


class _TreeBuilder:
    def __init__(self, X, y, max_depth, min_samples_leaf, min_samples_split, loss, rng=None, mtry=None,
                 binary: bool | None = None):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.min_leaf = min_samples_leaf
        self.min_split = min_samples_split
        self.loss = loss
        self.rng = rng
        self.mtry = mtry
        self.binary = _all_binary(X) if binary is None else binary
        self.d = X.shape[1]
        self.features: list[int] = []
        self.thresholds: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.values: list[float] = []

    def _new_node(self) -> int:
        self.features.append(-1)
        self.thresholds.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.values.append(0.0)
        return len(self.features) - 1

    def _leaf(self, node: int, value: float):
        self.values[node] = float(value)

    def _candidate_features(self) -> np.ndarray:
        if self.mtry is None or self.mtry >= self.d or self.rng is None:
            return np.arange(self.d)
        return np.sort(self.rng.choice(self.d, size=self.mtry, replace=False))

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._new_node()
        ys = self.y[idx]
        if np.all(ys == ys[0]):
            self._leaf(node, ys[0])
            return node
        if depth >= self.max_depth or idx.size < self.min_split or idx.size < 2 * self.min_leaf:
            self._leaf(node, optimal_constant(self.loss, ys))
            return node
        feature_ids = self._candidate_features()
        X_node = self.X[idx]
        parent_cost = _node_cost(self.loss, ys)
        if self.loss.kind == "squared":
            best = _fast_squared_scan(X_node, ys, feature_ids, self.min_leaf, parent_cost, self.loss, self.binary)
        elif self.binary:
            best = _binary_exact_scan(X_node, ys, feature_ids, self.min_leaf, parent_cost, self.loss)
        else:
            best = _exact_scan(X_node, ys, feature_ids, self.min_leaf, parent_cost, self.loss)
        if best is None or best[0] <= 0.0:
            self._leaf(node, optimal_constant(self.loss, ys))
            return node
        _, f, t = best
        mask = X_node[:, f] <= t
        self.features[node] = f
        self.thresholds[node] = t
        self.left[node] = self.build(idx[mask], depth + 1)
        self.right[node] = self.build(idx[~mask], depth + 1)
        return node

    def finish(self, n_features: int) -> DecisionTree:
        return DecisionTree(
            self.features, self.thresholds, self.left, self.right, self.values, self.loss, n_features
        )


def fit_tree(X, y, params: TreeParams, loss: LossSpec, seed: int = 0) -> DecisionTree:
    """Greedy CART regression tree under the given loss. Deterministic."""
    X, y = _check_training_inputs(X, y)
    builder = _TreeBuilder(X, y, params.max_depth, params.min_samples_leaf, params.min_samples_split, loss)
    builder.build(np.arange(X.shape[0]), 0)
    return builder.finish(X.shape[1])


# ---------------------------------------------------------------------------
# random forest


class RandomForest:
    def __init__(self, trees: list[DecisionTree], params: ForestParams, loss: LossSpec, seed: int, n_features: int):
        self.trees = trees
        self.params = params
        self.loss = loss
        self.seed = seed
        self.n_features = n_features

    def predict(self, X) -> np.ndarray:
        X = _check_predict_input(X, self.n_features)
        preds = np.stack([t.predict(X) for t in self.trees])
        return preds.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "loss": asdict(self.loss),
            "seed": self.seed,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        return cls(
            [DecisionTree.from_dict(t) for t in d["trees"]],
            ForestParams(**d["params"]), LossSpec(**d["loss"]), d["seed"], d["n_features"],
        )


def fit_forest(X, y, params: ForestParams, loss: LossSpec, seed: int = 0) -> RandomForest:
    """Bagged loss-specific trees; per-tree streams derive from (seed, tree index)."""
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    binary = _all_binary(X)
    mtry = min(d, max(1, math.ceil(params.feature_fraction * d)))
    trees = []
    for t in range(params.n_trees):
        rng = seeding.rng(seed, seeding.TAG_TREE, t)
        idx = np.sort(rng.integers(0, n, size=n)) if params.bootstrap else np.arange(n)
        builder = _TreeBuilder(
            X, y, params.max_depth, params.min_samples_leaf, params.min_samples_split,
            loss, rng=rng, mtry=mtry, binary=binary,
        )
        builder.build(idx, 0)
        trees.append(builder.finish(d))
    return RandomForest(trees, params, loss, seed, d)


# ---------------------------------------------------------------------------
# gradient boosting


class GradientBoosting:
    def __init__(self, base_score: float, trees: list[DecisionTree], params: GbmParams,
                 loss: LossSpec, seed: int, n_features: int):
        self.base_score = base_score
        self.trees = trees
        self.params = params
        self.loss = loss
        self.seed = seed
        self.n_features = n_features

    def predict(self, X) -> np.ndarray:
        X = _check_predict_input(X, self.n_features)
        out = np.full(X.shape[0], self.base_score, dtype=float)
        for tree in self.trees:
            out += self.params.learning_rate * tree.predict(X)
        return out

    def staged_predict(self, X):
        """Yield predictions after the base score and after every stage."""
        X = _check_predict_input(X, self.n_features)
        out = np.full(X.shape[0], self.base_score, dtype=float)
        yield out.copy()
        for tree in self.trees:
            out += self.params.learning_rate * tree.predict(X)
            yield out.copy()

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "params": asdict(self.params),
            "loss": asdict(self.loss),
            "seed": self.seed,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GradientBoosting":
        return cls(
            d["base_score"], [DecisionTree.from_dict(t) for t in d["trees"]],
            GbmParams(**d["params"]), LossSpec(**d["loss"]), d["seed"], d["n_features"],
        )


def fit_gbm(X, y, params: GbmParams, loss: LossSpec, seed: int = 0) -> GradientBoosting:
    """Stagewise boosting with loss-optimal leaf relabeling.

    Each stage tree's structure is a least-squares fit to the current
    pseudo-residuals; its leaf values are then replaced by the optimal
    constant of the actual loss over the in-leaf residuals, which together
    with shrinkage in (0, 1] makes the training loss non-increasing.
    """
    X, y = _check_training_inputs(X, y)
    n, d = X.shape
    binary = _all_binary(X)
    squared = LossSpec("squared")
    base_score = optimal_constant(loss, y)
    F = np.full(n, base_score, dtype=float)
    trees: list[DecisionTree] = []
    for _ in range(params.n_stages):
        g = np.asarray(negative_gradient(loss, y, F), dtype=float)
        builder = _TreeBuilder(X, g, params.max_depth, params.min_samples_leaf, params.min_samples_split,
                               squared, binary=binary)
        builder.build(np.arange(n), 0)
        tree = builder.finish(d)
        tree.loss = loss
        leaf_ids = tree.apply(X)
        residuals = y - F
        for leaf in np.unique(leaf_ids):
            rows = leaf_ids == leaf
            value = optimal_constant(loss, residuals[rows])
            tree.values[leaf] = value
            F[rows] += params.learning_rate * value
        trees.append(tree)
    return GradientBoosting(float(base_score), trees, params, loss, seed, d)


# ---------------------------------------------------------------------------
# linear models


class LinearModel:
    def __init__(self, weights: np.ndarray, intercept: float, params: LinearParams, loss: LossSpec):
        self.weights = np.asarray(weights, dtype=float)
        self.intercept = float(intercept)
        self.params = params
        self.loss = loss

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def predict(self, X) -> np.ndarray:
        X = _check_predict_input(X, self.n_features)
        return X @ self.weights + self.intercept

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "params": asdict(self.params),
            "loss": asdict(self.loss),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(np.array(d["weights"]), d["intercept"], LinearParams(**d["params"]), LossSpec(**d["loss"]))


def _weighted_ridge_solve(A: np.ndarray, y: np.ndarray, w: np.ndarray | None, lam: float) -> np.ndarray:
    """Solve the (weighted) normal equations; intercept column unpenalized."""
    d = A.shape[1]
    penalty = np.full(d, lam)
    penalty[-1] = 0.0  # intercept
    Aw = A if w is None else A * w[:, None]
    M = A.T @ Aw + np.diag(penalty)
    rhs = A.T @ (y if w is None else w * y)
    try:
        beta = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"normal equations singular ({exc}); set ridge_lambda > 0") from exc
    if not np.all(np.isfinite(beta)):
        raise NumericError("normal equations produced non-finite weights; set ridge_lambda > 0")
    residual = float(np.linalg.norm(M @ beta - rhs))
    scale = float(np.linalg.norm(rhs)) + 1.0
    if residual > 1e-6 * scale:
        raise NumericError("normal equations are ill-conditioned; set ridge_lambda > 0")
    return beta


def _irls_weights(loss: LossSpec, r: np.ndarray, eps: float) -> np.ndarray:
    a = np.maximum(np.abs(r), eps)
    if loss.kind == "absolute":
        return 1.0 / a
    if loss.kind == "huber":
        return np.where(np.abs(r) <= loss.delta, 1.0, loss.delta / a)
    # quantile pinball
    return np.where(r >= 0, loss.tau, 1.0 - loss.tau) / a


def fit_linear(X, y, loss: LossSpec, params: LinearParams) -> LinearModel:
    """Linear fit under any loss; no randomness involved."""
    X, y = _check_training_inputs(X, y)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    beta = _weighted_ridge_solve(A, y, None, params.ridge_lambda)
    if loss.kind != "squared":
        for _ in range(params.irls_max_iter):
            r = y - A @ beta
            w = _irls_weights(loss, r, params.irls_epsilon)
            beta_new = _weighted_ridge_solve(A, y, w, params.ridge_lambda)
            if float(np.max(np.abs(beta_new - beta))) <= params.irls_tol:
                beta = beta_new
                break
            beta = beta_new
    return LinearModel(beta[:-1], beta[-1], params, loss)


# ---------------------------------------------------------------------------
# dispatch


def fit_base(family: str, X, y, params, loss: LossSpec, seed: int = 0):
    """Train one base model of the given family."""
    if family == "tree":
        return fit_tree(X, y, params, loss, seed)
    if family == "forest":
        return fit_forest(X, y, params, loss, seed)
    if family == "gbm":
        return fit_gbm(X, y, params, loss, seed)
    if family == "linear":
        return fit_linear(X, y, loss, params)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


MODEL_CLASSES = {
    "tree": DecisionTree,
    "forest": RandomForest,
    "gbm": GradientBoosting,
    "linear": LinearModel,
}
