"""Experiment configuration: TOML sections mapped onto typed settings.

Sections: [dataset] (column schema), [losses] (objective set),
[grid.<family>] (each key lists candidate values; cells are the cartesian
product in key order, last key fastest), [tuning], [stacking], [split],
[thresholds]. Anything missing or malformed raises ConfigError naming the
offending section or key.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dataio import DatasetSchema, SplitPlan
from .errors import ConfigError, DatasetError, SchemaError
from .learners import PARAM_TYPES
from .losses import LOSS_KINDS, LossSpec
from .tuning import TuneSpec

DEFAULT_BASES = ("forest", "linear", "gbm", "avg_forest", "avg_linear", "avg_gbm")
DEFAULT_CUTOFFS = (0.6, 0.7, 0.8, 0.9)


def base_family(base: str) -> str:
    return base.removeprefix("avg_")


def base_is_averaged(base: str) -> bool:
    return base.startswith("avg_")


@dataclass(frozen=True)
class StackingConfig:
    folds: int = 5
    bases: tuple[str, ...] = DEFAULT_BASES
    single_loss: str = "squared"
    append_features: bool = False
    nonnegative_meta: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("[stacking] folds must be >= 2")
        if not self.bases:
            raise ConfigError("[stacking] bases must be nonempty")
        for b in self.bases:
            if base_family(b) not in PARAM_TYPES:
                raise ConfigError(f"[stacking] unknown base {b!r}")
        if self.single_loss not in LOSS_KINDS:
            raise ConfigError(f"[stacking] single_loss must be one of {LOSS_KINDS}")


@dataclass(frozen=True)
class ExperimentConfig:
    schema: DatasetSchema
    losses: tuple[LossSpec, ...]
    grids: dict[str, tuple]
    tuning_metrics: tuple[str, ...]
    tuning_folds: int
    tuning_vote: str
    stacking: StackingConfig
    split: SplitPlan
    cutoffs: tuple[float, ...]

    def tune_spec(self, seed: int) -> TuneSpec:
        return TuneSpec(metrics=self.tuning_metrics, folds=self.tuning_folds, seed=seed, vote=self.tuning_vote)

    def loss_by_kind(self, kind: str) -> LossSpec:
        for spec in self.losses:
            if spec.kind == kind:
                return spec
        return LossSpec(kind)

    def canonical_dict(self) -> dict:
        return {
            "dataset": asdict(self.schema),
            "losses": [asdict(s) for s in self.losses],
            "grids": {fam: [asdict(p) for p in cells] for fam, cells in self.grids.items()},
            "tuning": {"metrics": list(self.tuning_metrics), "folds": self.tuning_folds, "vote": self.tuning_vote},
            "stacking": asdict(self.stacking),
            "split": asdict(self.split),
            "thresholds": list(self.cutoffs),
        }


def _require(table: dict, section: str) -> dict:
    if section not in table:
        raise ConfigError(f"missing config section [{section}]")
    return table[section]


def _schema_from_table(t: dict) -> DatasetSchema:
    try:
        baseline_columns = tuple(
            (str(name), str(scale)) for name, scale in t.get("baseline_columns", [])
        )
    except (TypeError, ValueError):
        raise ConfigError("[dataset] baseline_columns must be a list of [name, scale] pairs") from None
    try:
        return DatasetSchema(
            sequence_column=t.get("sequence_column", ""),
            label_column=t.get("label_column", ""),
            label_scale=t.get("label_scale", "unit"),
            baseline_columns=baseline_columns,
            spacer_column=t.get("spacer_column") or None,
        )
    except SchemaError as exc:
        raise ConfigError(f"[dataset] {exc}") from exc


def _losses_from_table(t: dict) -> tuple[LossSpec, ...]:
    kinds = t.get("kinds", list(LOSS_KINDS))
    delta = float(t.get("huber_delta", 1.0))
    tau = float(t.get("quantile_tau", 0.5))
    specs = []
    for kind in kinds:
        try:
            specs.append(LossSpec(kind, delta=delta, tau=tau))
        except ValueError as exc:
            raise ConfigError(f"[losses] {exc}") from exc
    if not specs:
        raise ConfigError("[losses] kinds must be nonempty")
    return tuple(specs)


def grid_cells(family: str, table: dict) -> tuple:
    """Cartesian product of per-key candidate lists, in declared key order."""
    cls = PARAM_TYPES[family]
    valid = set(cls.__dataclass_fields__)
    keys = list(table.keys())
    for key in keys:
        if key not in valid:
            raise ConfigError(f"[grid.{family}] unknown hyperparameter {key!r}")
        if not isinstance(table[key], list) or not table[key]:
            raise ConfigError(f"[grid.{family}] {key} must be a nonempty list of candidates")
    cells = []
    for combo in itertools.product(*(table[k] for k in keys)):
        try:
            cells.append(cls(**dict(zip(keys, combo))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[grid.{family}] bad cell {dict(zip(keys, combo))}: {exc}") from exc
    return tuple(cells)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    schema = _schema_from_table(_require(raw, "dataset"))
    losses = _losses_from_table(raw.get("losses", {}))

    stacking_t = raw.get("stacking", {})
    stacking = StackingConfig(
        folds=int(stacking_t.get("folds", 5)),
        bases=tuple(stacking_t.get("bases", DEFAULT_BASES)),
        single_loss=str(stacking_t.get("single_loss", "squared")),
        append_features=bool(stacking_t.get("append_features", False)),
        nonnegative_meta=bool(stacking_t.get("nonnegative_meta", False)),
    )

    grid_tables = raw.get("grid", {})
    grids = {}
    for family, table in grid_tables.items():
        if family not in PARAM_TYPES:
            raise ConfigError(f"unknown grid section [grid.{family}]")
        grids[family] = grid_cells(family, table)
    for base in stacking.bases:
        family = base_family(base)
        if family not in grids:
            raise ConfigError(f"base {base!r} requires section [grid.{family}]")

    tuning_t = raw.get("tuning", {})
    metrics = tuple(tuning_t.get("metrics", ("spearman", "neg_mse")))
    folds = int(tuning_t.get("folds", 5))
    vote = str(tuning_t.get("vote", "mean"))
    TuneSpec(metrics=metrics, folds=folds, vote=vote)  # validates

    split_t = raw.get("split", {})
    try:
        split = SplitPlan(
            train_fraction=float(split_t.get("train_fraction", 0.7)),
            repeats=int(split_t.get("repeats", 100)),
            master_seed=int(split_t.get("master_seed", 0)),
        )
    except DatasetError as exc:
        raise ConfigError(f"[split] {exc}") from exc

    cutoffs = tuple(float(c) for c in raw.get("thresholds", {}).get("cutoffs", DEFAULT_CUTOFFS))
    if not cutoffs:
        raise ConfigError("[thresholds] cutoffs must be nonempty")
    if any(not 0.0 < c < 1.0 for c in cutoffs):
        raise ConfigError("[thresholds] cutoffs must lie in (0, 1)")
    if list(cutoffs) != sorted(cutoffs):
        raise ConfigError("[thresholds] cutoffs must be sorted ascending")

    return ExperimentConfig(
        schema=schema,
        losses=losses,
        grids=grids,
        tuning_metrics=metrics,
        tuning_folds=folds,
        tuning_vote=vote,
        stacking=stacking,
        split=split,
        cutoffs=cutoffs,
    )
