"""Seeded synthetic guide datasets for benchmarks and tests.

Generative model, fixed here so results are comparable across runs:

* guides are 21 uniform random bases followed by the constant GG suffix;
* each (position, base) pair carries a weight drawn once per dataset from
  a standard normal;
* a guide's latent score is the sum of its position weights, standardized
  by sqrt(21), times a signal gain of 2;
* heavy-tailed noise (Student t with df degrees of freedom, scaled by
  noise) is added to the latent score;
* the label is the logistic squash of the noisy score, which keeps every
  label strictly inside (0, 1).

An optional baseline column carries the clean latent score pushed through
the same squash plus lighter Gaussian noise, mimicking a precomputed
predictor of moderate quality.
"""

from __future__ import annotations

import numpy as np

from . import seeding
from .dataio import Dataset, DatasetSchema, Provenance, Record, save_dataset
from .encoding import CHANNELS, GUIDE_LENGTH

SIGNAL_GAIN = 2.0
BASELINE_NOISE = 0.6
BASELINE_COLUMN = "reference_score"


def _random_guides(rng: np.random.Generator, n: int) -> list[str]:
    body = rng.integers(0, 4, size=(n, GUIDE_LENGTH - 2))
    return ["".join(CHANNELS[b] for b in row) + "GG" for row in body]


def synthetic_dataset(
    n: int,
    seed: int,
    *,
    noise: float = 0.8,
    df: float = 3.0,
    with_baseline: bool = False,
) -> Dataset:
    """Generate n labeled guides; fully determined by (n, seed, noise, df)."""
    rng = seeding.rng(seed, seeding.TAG_SYNTH)
    guides = _random_guides(rng, n)
    weights = rng.normal(0.0, 1.0, size=(GUIDE_LENGTH, 4))
    index = {b: i for i, b in enumerate(CHANNELS)}
    latent = np.array(
        [sum(weights[p, index[base]] for p, base in enumerate(g)) for g in guides]
    )
    latent = SIGNAL_GAIN * latent / np.sqrt(GUIDE_LENGTH - 2)
    noisy = latent + noise * rng.standard_t(df, size=n)
    labels = 1.0 / (1.0 + np.exp(-noisy))
    baseline_cols: tuple[tuple[str, str], ...] = ()
    baselines = [{} for _ in range(n)]
    if with_baseline:
        ref = 1.0 / (1.0 + np.exp(-(latent + BASELINE_NOISE * rng.normal(size=n))))
        baselines = [{BASELINE_COLUMN: float(v)} for v in ref]
        baseline_cols = ((BASELINE_COLUMN, "unit"),)
    schema = DatasetSchema(
        sequence_column="sequence",
        label_column="label",
        label_scale="unit",
        baseline_columns=baseline_cols,
    )
    records = tuple(
        Record(sequence=g, label=float(lab), baselines=b)
        for g, lab, b in zip(guides, labels, baselines)
    )
    return Dataset(records=records, provenance=Provenance(path=f"synthetic(n={n},seed={seed})", schema=schema))


def write_synthetic_file(path, n: int, seed: int, **kwargs) -> DatasetSchema:
    """Generate a dataset and write it as TSV; returns the schema to load it."""
    ds = synthetic_dataset(n, seed, **kwargs)
    return save_dataset(ds, path)
