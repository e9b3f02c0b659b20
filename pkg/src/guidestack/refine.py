"""Loss-averaged models: one family trained once per objective, mean output.

Training the same learner family under several losses and averaging the
predictions keeps whatever the losses agree on and washes out their
individual quirks. The average is unweighted; constituents are tuned
independently per loss before they get here.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import seeding
from .errors import FitError
from .learners import MODEL_CLASSES, fit_base
from .losses import LossSpec


class RefinedModel:
    """M constituents of one family, one per loss; predicts their mean."""

    def __init__(self, family: str, constituents: Sequence, loss_set: Sequence[LossSpec]):
        if len(constituents) != len(loss_set) or len(loss_set) < 1:
            raise ValueError("need one constituent per loss and at least one loss")
        self.family = family
        self.constituents = tuple(constituents)
        self.loss_set = tuple(loss_set)

    def predict(self, X) -> np.ndarray:
        preds = np.stack([m.predict(X) for m in self.constituents])
        return preds.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "losses": [{"kind": s.kind, "delta": s.delta, "tau": s.tau} for s in self.loss_set],
            "constituents": [m.to_dict() for m in self.constituents],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RefinedModel":
        model_cls = MODEL_CLASSES[d["family"]]
        constituents = [model_cls.from_dict(m) for m in d["constituents"]]
        losses = [LossSpec(**s) for s in d["losses"]]
        return cls(d["family"], constituents, losses)


def fit_refined(family: str, X, y, loss_set: Sequence[LossSpec], params_per_loss: Sequence, seed: int = 0) -> RefinedModel:
    """Train one constituent per loss; seeds derive from the loss index."""
    loss_set = tuple(loss_set)
    if not loss_set:
        raise ValueError("loss_set must be nonempty")
    if len(params_per_loss) != len(loss_set):
        raise ValueError("need params for every loss in loss_set")
    constituents = []
    for m, (loss, params) in enumerate(zip(loss_set, params_per_loss)):
        try:
            constituents.append(fit_base(family, X, y, params, loss, seeding.child_seed(seed, seeding.TAG_LOSS, m)))
        except Exception as exc:
            raise FitError(f"fitting {family} under {loss.label}: {exc}") from exc
    return RefinedModel(family, constituents, loss_set)


def predict_refined(rm: RefinedModel, X) -> np.ndarray:
    """Pointwise unweighted mean of the constituents' predictions."""
    return rm.predict(X)
