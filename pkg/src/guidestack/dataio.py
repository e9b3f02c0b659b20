"""Loading, validation, normalization, and splitting of efficacy datasets.

Input files are delimiter-separated text with a header row. The schema
declares which columns hold the 23-nt guide, the efficacy label, optional
precomputed baseline scores, and an optional 30-nt extended spacer. Scales
are declared, never sniffed: a percent column is divided by 100 on load and
everything stored on a Record lives in [0, 1].
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import seeding
from .encoding import validate
from .errors import DatasetError, RangeError, RowError, SchemaError, SequenceError

SCALES = ("unit", "percent")
SPACER_LENGTH = 30


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of one input file.

    baseline_columns is a tuple of (column name, scale) pairs; baseline
    scores are frozen predictions carried along for comparison, never
    used as features.
    """

    sequence_column: str
    label_column: str
    label_scale: str = "unit"
    baseline_columns: tuple[tuple[str, str], ...] = ()
    spacer_column: str | None = None

    def __post_init__(self):
        if not self.sequence_column or not self.label_column:
            raise SchemaError("sequence_column and label_column must be nonempty")
        if self.sequence_column == self.label_column:
            raise SchemaError("sequence_column and label_column must differ")
        if self.label_scale not in SCALES:
            raise SchemaError(f"label_scale must be one of {SCALES}, got {self.label_scale!r}")
        names = [name for name, _ in self.baseline_columns]
        if len(set(names)) != len(names):
            raise SchemaError("baseline column names must be unique")
        for name, scale in self.baseline_columns:
            if scale not in SCALES:
                raise SchemaError(f"baseline {name!r}: scale must be one of {SCALES}")

    def baseline_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.baseline_columns)


@dataclass(frozen=True)
class Record:
    sequence: str
    label: float
    baselines: dict[str, float] = field(default_factory=dict)
    spacer: str | None = None


@dataclass(frozen=True)
class RejectedRow:
    index: int  # 0-based position among data rows
    reason: str


@dataclass(frozen=True)
class Provenance:
    path: str
    schema: DatasetSchema


@dataclass(frozen=True)
class Dataset:
    records: tuple[Record, ...]
    provenance: Provenance | None = None
    rejected: tuple[RejectedRow, ...] = ()

    def __post_init__(self):
        if len(self.records) < 1:
            raise DatasetError("dataset must contain at least one record")
        for rec in self.records:
            if not 0.0 <= rec.label <= 1.0:
                raise DatasetError(f"label {rec.label} outside [0, 1] for {rec.sequence}")
            for name, value in rec.baselines.items():
                if not 0.0 <= value <= 1.0:
                    raise DatasetError(f"baseline {name!r} value {value} outside [0, 1]")
            validate(rec.sequence)

    def __len__(self) -> int:
        return len(self.records)

    def sequences(self) -> list[str]:
        return [r.sequence for r in self.records]

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=float)

    def baseline(self, name: str) -> np.ndarray:
        try:
            return np.array([r.baselines[name] for r in self.records], dtype=float)
        except KeyError:
            raise SchemaError(f"baseline column {name!r} not present on every record") from None

    def baseline_names(self) -> tuple[str, ...]:
        if self.provenance is not None:
            return self.provenance.schema.baseline_names()
        if not self.records:
            return ()
        return tuple(self.records[0].baselines.keys())

    def subset(self, indices) -> "Dataset":
        recs = tuple(self.records[i] for i in indices)
        return Dataset(records=recs, provenance=self.provenance)


@dataclass(frozen=True)
class SplitPlan:
    """Repeated random train/test divisions, reproducible from one seed."""

    train_fraction: float = 0.7
    repeats: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.repeats < 1:
            raise DatasetError("repeats must be at least 1")


def normalize_score(raw: float, scale: str) -> float:
    """Map a raw score onto [0, 1] according to its declared scale."""
    if scale not in SCALES:
        raise SchemaError(f"unknown scale {scale!r}")
    value = float(raw)
    if scale == "percent":
        if not 0.0 <= value <= 100.0:
            raise RangeError(value, f"percent score {value} outside [0, 100]")
        return value / 100.0
    if not 0.0 <= value <= 1.0:
        raise RangeError(value, f"unit score {value} outside [0, 1]")
    return value


def detect_delimiter(header_line: str) -> str:
    """Tab if the header contains one, else comma."""
    return "\t" if "\t" in header_line else ","


def _column_indices(header: list[str], schema: DatasetSchema) -> dict[str, int]:
    positions = {name: i for i, name in enumerate(header)}
    required = [schema.sequence_column, schema.label_column]
    required += list(schema.baseline_names())
    if schema.spacer_column:
        required.append(schema.spacer_column)
    indices = {}
    for name in required:
        if name not in positions:
            raise SchemaError(f"column {name!r} missing from header {header}")
        indices[name] = positions[name]
    return indices


def _parse_row(cells: list[str], idx: dict[str, int], schema: DatasetSchema, row_index: int) -> Record:
    width = max(idx.values())
    if len(cells) <= width:
        raise RowError(row_index, f"expected at least {width + 1} fields, got {len(cells)}")
    raw_label = cells[idx[schema.label_column]].strip()
    try:
        label_value = float(raw_label)
    except ValueError:
        raise RowError(row_index, f"label {raw_label!r} is not numeric") from None
    if math.isnan(label_value):
        raise RowError(row_index, "label is NaN")
    try:
        label = normalize_score(label_value, schema.label_scale)
    except RangeError as exc:
        raise RowError(row_index, str(exc)) from None
    try:
        sequence = validate(cells[idx[schema.sequence_column]])
    except SequenceError as exc:
        raise RowError(row_index, f"invalid sequence: {exc}") from None
    baselines = {}
    for name, scale in schema.baseline_columns:
        raw = cells[idx[name]].strip()
        try:
            baselines[name] = normalize_score(float(raw), scale)
        except (ValueError, RangeError) as exc:
            raise RowError(row_index, f"baseline {name!r}: {exc}") from None
    spacer = None
    if schema.spacer_column:
        cell = cells[idx[schema.spacer_column]].strip().upper()
        if cell:
            if len(cell) != SPACER_LENGTH or any(b not in "ACGT" for b in cell):
                raise RowError(row_index, f"spacer {cell!r} is not a {SPACER_LENGTH}-nt ACGT string")
            spacer = cell
    return Record(sequence=sequence, label=label, baselines=baselines, spacer=spacer)


def load_dataset(
    path: str | Path,
    schema: DatasetSchema,
    *,
    delimiter: str | None = None,
    permissive: bool = False,
) -> Dataset:
    """Parse one file into a Dataset.

    In strict mode (default) any bad row aborts the load with a RowError.
    With permissive=True, bad rows are collected on Dataset.rejected and
    the load succeeds as long as at least one row survives.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in io.StringIO(text)]
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: empty file")
    delim = delimiter if delimiter is not None else detect_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]
    idx = _column_indices(header, schema)
    records: list[Record] = []
    rejected: list[RejectedRow] = []
    row_index = 0
    for cells in reader:
        if not cells or all(not c.strip() for c in cells):
            continue
        try:
            records.append(_parse_row(cells, idx, schema, row_index))
        except RowError as exc:
            if not permissive:
                raise
            rejected.append(RejectedRow(index=row_index, reason=str(exc)))
        row_index += 1
    if not records:
        raise DatasetError(f"{path}: no usable data rows")
    return Dataset(
        records=tuple(records),
        provenance=Provenance(path=str(path), schema=schema),
        rejected=tuple(rejected),
    )


def save_dataset(ds: Dataset, path: str | Path, *, delimiter: str = "\t") -> DatasetSchema:
    """Write a dataset back out in unit scale; returns the schema to reload it.

    Floats are written with repr so a load of the written file reproduces
    the records bit for bit.
    """
    schema = ds.provenance.schema if ds.provenance else DatasetSchema("sequence", "label")
    baseline_names = ds.baseline_names()
    has_spacer = any(r.spacer for r in ds.records)
    out_schema = DatasetSchema(
        sequence_column=schema.sequence_column,
        label_column=schema.label_column,
        label_scale="unit",
        baseline_columns=tuple((n, "unit") for n in baseline_names),
        spacer_column=schema.spacer_column if (schema.spacer_column and has_spacer) else None,
    )
    header = [out_schema.sequence_column, out_schema.label_column, *baseline_names]
    if out_schema.spacer_column:
        header.append(out_schema.spacer_column)
    rows = []
    for rec in ds.records:
        row = [rec.sequence, repr(rec.label)]
        row += [repr(rec.baselines[n]) for n in baseline_names]
        if out_schema.spacer_column:
            row.append(rec.spacer or "")
        rows.append(row)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        writer.writerows(rows)
    return out_schema


def train_size(train_fraction: float, n: int) -> int:
    """floor(train_fraction * n) in exact rational arithmetic.

    Plain float multiplication gets 0.7 * 420 wrong (293.999...); the
    fraction is rebuilt from its shortest decimal representation first.
    """
    return int(Fraction(repr(float(train_fraction))) * n)


def split(ds: Dataset, plan: SplitPlan, repeat_index: int) -> tuple[Dataset, Dataset]:
    """One train/test division; deterministic in (master_seed, repeat_index)."""
    n = len(ds)
    if n < 2:
        raise DatasetError("need at least 2 records to split")
    if not 0 <= repeat_index < plan.repeats:
        raise ValueError(f"repeat_index {repeat_index} outside [0, {plan.repeats})")
    n_train = train_size(plan.train_fraction, n)
    if n_train < 1 or n - n_train < 1:
        raise DatasetError(f"split plan leaves an empty side for n={n}")
    perm = seeding.rng(plan.master_seed, seeding.TAG_SPLIT, repeat_index).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)


def features_and_labels(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """One-hot feature matrix and label vector for a dataset."""
    from .encoding import encode_matrix

    return encode_matrix(ds.sequences()), ds.labels()
