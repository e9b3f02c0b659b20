from pathlib import Path

import numpy as np
import pytest

from guidestack.config import ExperimentConfig, StackingConfig
from guidestack.dataio import DatasetSchema, SplitPlan
from guidestack.learners import ForestParams, GbmParams, LinearParams
from guidestack.losses import default_loss_set

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_DIR = Path(__file__).parent / "fixtures"
REPO_DATA = Path(__file__).parent.parent / "data"

TABLE_SCHEMA = DatasetSchema(
    sequence_column="sgRNA sequence",
    label_column="KO reporter assay",
    label_scale="unit",
    baseline_columns=(
        ("DeepCRISPR score", "unit"),
        ("CRISPRater score", "unit"),
        ("sgRNA Designer rsII score", "unit"),
        ("sgRNA Scorer score", "percent"),
    ),
    spacer_column="extended spacer",
)


@pytest.fixture
def sample_table_path() -> Path:
    return DATA_DIR / "deepcrispr_sample.tsv"


@pytest.fixture
def sample_schema() -> DatasetSchema:
    return TABLE_SCHEMA


@pytest.fixture
def cross_study_path() -> Path:
    return REPO_DATA / "wang_kim_hek293t.tsv"


def random_guides(rng: np.random.Generator, n: int) -> list[str]:
    bases = "ACGT"
    return ["".join(bases[b] for b in rng.integers(0, 4, size=21)) + "GG" for b in [0] for _ in range(n)]


def small_config(**overrides) -> ExperimentConfig:
    """A quick-to-train experiment configuration for harness tests."""
    defaults = dict(
        schema=DatasetSchema("sequence", "label"),
        losses=default_loss_set(),
        grids={
            "forest": (ForestParams(n_trees=3, max_depth=3, feature_fraction=0.5),),
            "gbm": (GbmParams(n_stages=8, max_depth=2),),
            "linear": (LinearParams(ridge_lambda=1e-4),),
        },
        tuning_metrics=("spearman", "neg_mse"),
        tuning_folds=2,
        tuning_vote="mean",
        stacking=StackingConfig(folds=3),
        split=SplitPlan(train_fraction=0.7, repeats=2, master_seed=11),
        cutoffs=(0.6, 0.8),
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)
