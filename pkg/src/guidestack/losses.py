"""Training objectives: pointwise values, pseudo-residuals, optimal constants.

Four losses are supported, all functions of the residual r = y - yhat:

    squared    0.5 * r^2
    absolute   |r|
    huber      0.5 * r^2 for |r| <= delta, else delta * (|r| - 0.5 * delta)
    quantile   tau * r for r >= 0, else (tau - 1) * r

The 0.5 factor on the squared loss makes its negative gradient exactly r,
so boosting on squared loss regresses plain residuals.

Tie conventions are pinned for determinism: the absolute-loss constant is
the lower median for even sample sizes, and the quantile constant takes the
lower order statistic whenever n * tau lands exactly on one.

Extension point: a new objective means one more kind plus matching
branches in loss_value, negative_gradient, and optimal_constant; no other
module inspects loss internals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

LOSS_KINDS = ("squared", "absolute", "huber", "quantile")

HUBER_CONSTANT_TOL = 1e-9
HUBER_CONSTANT_MAX_ITER = 100


@dataclass(frozen=True)
class LossSpec:
    """One training objective. delta applies to huber, tau to quantile."""

    kind: str
    delta: float = 1.0
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if not self.delta > 0:
            raise ValueError(f"huber delta must be positive, got {self.delta}")
        if not 0 < self.tau < 1:
            raise ValueError(f"quantile tau must lie in (0, 1), got {self.tau}")

    @property
    def label(self) -> str:
        if self.kind == "huber":
            return f"huber({self.delta:g})"
        if self.kind == "quantile":
            return f"quantile({self.tau:g})"
        return self.kind


def default_loss_set(huber_delta: float = 1.0, quantile_tau: float = 0.5) -> tuple[LossSpec, ...]:
    """The four-objective default set."""
    return (
        LossSpec("squared"),
        LossSpec("absolute"),
        LossSpec("huber", delta=huber_delta),
        LossSpec("quantile", tau=quantile_tau),
    )


def loss_value(spec: LossSpec, y, yhat):
    """Pointwise loss. Accepts scalars or arrays, broadcasting like numpy."""
    r = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    if spec.kind == "squared":
        out = 0.5 * r * r
    elif spec.kind == "absolute":
        out = np.abs(r)
    elif spec.kind == "huber":
        a = np.abs(r)
        out = np.where(a <= spec.delta, 0.5 * r * r, spec.delta * (a - 0.5 * spec.delta))
    else:
        out = np.where(r >= 0, spec.tau * r, (spec.tau - 1.0) * r)
    if np.ndim(out) == 0:
        return float(out)
    return out


def negative_gradient(spec: LossSpec, y, yhat):
    """-d loss / d yhat, the boosting pseudo-residual.

    At r = 0 the absolute and quantile losses are not differentiable; the
    subgradient 0 is returned there.
    """
    r = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    if spec.kind == "squared":
        out = r
    elif spec.kind == "absolute":
        out = np.sign(r)
    elif spec.kind == "huber":
        out = np.clip(r, -spec.delta, spec.delta)
    else:
        out = np.where(r > 0, spec.tau, np.where(r < 0, spec.tau - 1.0, 0.0))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _lower_quantile(sorted_ys: np.ndarray, tau: float) -> float:
    """Lower-value empirical tau-quantile of an ascending-sorted sample.

    Uses exact rational arithmetic on n * tau so the integer-landing case
    is decided identically on every platform.
    """
    n = sorted_ys.shape[0]
    k = Fraction(repr(float(tau))) * n
    if k.denominator == 1:
        idx = int(k) - 1
    else:
        idx = math.ceil(k) - 1
    idx = min(max(idx, 0), n - 1)
    return float(sorted_ys[idx])


def _huber_constant(ys: np.ndarray, delta: float) -> float:
    """Huber location estimate by iteratively reweighted averaging.

    Starts at 0 so each iterate (a majorize-minimize step) never exceeds
    the objective at 0; gradient boosting relies on that to keep per-stage
    training loss non-increasing.
    """
    c = 0.0
    for _ in range(HUBER_CONSTANT_MAX_ITER):
        r = ys - c
        a = np.abs(r)
        w = np.where(a <= delta, 1.0, delta / np.maximum(a, delta))
        c_new = float(np.sum(w * ys) / np.sum(w))
        if abs(c_new - c) <= HUBER_CONSTANT_TOL:
            return c_new
        c = c_new
    return c


def optimal_constant(spec: LossSpec, ys: Sequence[float] | np.ndarray) -> float:
    """argmin over constants c of sum_i loss(y_i, c)."""
    arr = np.asarray(ys, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("optimal_constant requires a nonempty sample")
    if np.all(arr == arr[0]):
        return float(arr[0])
    if spec.kind == "squared":
        return float(np.mean(arr))
    if spec.kind == "absolute":
        s = np.sort(arr)
        n = s.shape[0]
        return float(s[(n - 1) // 2])  # lower median for even n
    if spec.kind == "quantile":
        return _lower_quantile(np.sort(arr), spec.tau)
    return _huber_constant(arr, spec.delta)
