"""Grid search with shared k-fold CV and metric-voted model combination.

Every grid cell is scored with the same fold assignment so scores are
comparable across cells. Each scoring metric crowns its own winner; the
winners' predictions are then combined by voting, which for regression
means an unweighted mean (median available as an option).

Fold assignment and fold-model seeds are pure functions of the tuning
seed, the cell index, and the fold index, so an external re-run can
reproduce every CV score from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import seeding
from .errors import ConfigError, UndefinedMetricError
from .learners import fit_base
from .losses import LossSpec
from .metrics import binarize, classification_metrics, mse, spearman

VOTE_MODES = ("mean", "median")


@dataclass(frozen=True)
class TuneSpec:
    metrics: tuple[str, ...] = ("spearman", "neg_mse")
    folds: int = 5
    seed: int = 0
    vote: str = "mean"

    def __post_init__(self):
        if not self.metrics:
            raise ConfigError("tuning needs at least one scoring metric")
        for m in self.metrics:
            parse_metric(m)
        if self.folds < 2:
            raise ConfigError("cv folds must be >= 2")
        if self.vote not in VOTE_MODES:
            raise ConfigError(f"vote must be one of {VOTE_MODES}")


def parse_metric(name: str):
    """Return a callable (y_true, y_pred) -> float for a metric name.

    Known names: spearman, neg_mse, and f1_at_<cutoff> (for example
    f1_at_0.7), which binarizes labels and predictions at the cutoff.
    """
    if name == "spearman":
        return spearman
    if name == "neg_mse":
        return lambda yt, yp: -mse(yt, yp)
    if name.startswith("f1_at_"):
        try:
            cutoff = float(name.removeprefix("f1_at_"))
        except ValueError:
            raise ConfigError(f"bad metric name {name!r}") from None
        if not 0.0 < cutoff < 1.0:
            raise ConfigError(f"f1 cutoff must lie in (0, 1), got {cutoff}")

        def f1_at(yt, yp):
            return classification_metrics(binarize(yt, cutoff), yp, cutoff)["f1"]

        return f1_at
    raise ConfigError(f"unknown scoring metric {name!r}")


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Deterministic shuffled k-fold assignment: a seeded permutation cut
    into k contiguous chunks, the first n mod k chunks one element longer."""
    if k < 2 or k > n:
        raise ConfigError(f"cannot make {k} folds from {n} samples")
    perm = seeding.rng(seed).permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    folds = []
    start = 0
    for size in sizes:
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


@dataclass(frozen=True)
class Winner:
    metric: str
    cell_index: int
    params: object
    cv_score: float


@dataclass(frozen=True)
class TuneResult:
    family: str
    loss: LossSpec
    grid: tuple
    metrics: tuple[str, ...]
    table: np.ndarray  # (cells, metrics) mean out-of-fold scores, NaN if undefined
    winners: dict[str, Winner]

    def winner_params(self, metric: str):
        return self.winners[metric].params


def _fold_scores(metric_fns, y_true, y_pred) -> list[float]:
    out = []
    for fn in metric_fns:
        try:
            out.append(float(fn(y_true, y_pred)))
        except (UndefinedMetricError, ValueError):
            out.append(float("nan"))
    return out


def grid_search(family: str, loss: LossSpec, X, y, grid: Sequence, spec: TuneSpec) -> TuneResult:
    """Score every grid cell by k-fold CV and pick one winner per metric.

    The recorded score is the mean over folds of the out-of-fold metric;
    folds where a metric is undefined are skipped, and a cell with no
    defined fold at all gets NaN and cannot win. Ties break toward the
    earliest grid cell. Fold models are seeded by (spec.seed, TAG_TUNE,
    cell index, fold index).
    """
    grid = tuple(grid)
    if not grid:
        raise ConfigError(f"empty hyperparameter grid for family {family!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    folds = kfold_indices(y.shape[0], spec.folds, seeding.child_seed(spec.seed, seeding.TAG_TUNE))
    metric_fns = [parse_metric(m) for m in spec.metrics]
    all_rows = np.arange(y.shape[0])
    table = np.full((len(grid), len(spec.metrics)), np.nan)
    for ci, params in enumerate(grid):
        per_fold = []
        for fi, test_idx in enumerate(folds):
            train_mask = np.ones(y.shape[0], dtype=bool)
            train_mask[test_idx] = False
            train_idx = all_rows[train_mask]
            model = fit_base(
                family, X[train_idx], y[train_idx], params, loss,
                seed=seeding.child_seed(spec.seed, seeding.TAG_TUNE, ci, fi),
            )
            preds = model.predict(X[test_idx])
            per_fold.append(_fold_scores(metric_fns, y[test_idx], preds))
        scores = np.asarray(per_fold)  # (folds, metrics)
        with np.errstate(invalid="ignore"):
            table[ci] = np.nanmean(scores, axis=0)
    winners = {}
    for mi, metric in enumerate(spec.metrics):
        col = table[:, mi]
        if np.all(np.isnan(col)):
            best = 0
        else:
            best = int(np.nanargmax(col))  # first index on ties
        winners[metric] = Winner(metric=metric, cell_index=best, params=grid[best], cv_score=float(col[best]))
    return TuneResult(family=family, loss=loss, grid=grid, metrics=spec.metrics, table=table, winners=winners)


def vote_predict(winners: Sequence, X, how: str = "mean") -> np.ndarray:
    """Combine per-metric winning models by averaging their predictions."""
    if not winners:
        raise ValueError("vote_predict needs at least one model")
    if how not in VOTE_MODES:
        raise ValueError(f"vote mode must be one of {VOTE_MODES}")
    preds = np.stack([m.predict(X) for m in winners])
    if how == "mean":
        return preds.mean(axis=0)
    return np.median(preds, axis=0)


class VotedModel:
    """Fitted per-metric winners voting by prediction average."""

    def __init__(self, members: Sequence, how: str = "mean"):
        if not members:
            raise ValueError("VotedModel needs at least one member")
        self.members = tuple(members)
        self.how = how

    def predict(self, X) -> np.ndarray:
        return vote_predict(self.members, X, self.how)

    def to_dict(self) -> dict:
        from .persistence import model_payload

        return {"how": self.how, "members": [model_payload(m) for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "VotedModel":
        from .persistence import model_from_payload

        return cls([model_from_payload(m) for m in d["members"]], d["how"])
