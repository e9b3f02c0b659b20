"""End-to-end pipeline: tune, refine, stack, benchmark, compare.

The benchmark protocol repeats R times: split train/test at the configured
fraction, run the full pipeline on the train side, then score the stacked
model, every roster method, and every frozen baseline column on the test
side. Per-repeat tables and their entrywise mean are written as
tab-separated files shaped one row per metric, one column per method.

Predictions are clipped to [0, 1] exactly once, at the evaluation or
output boundary; all inner stages exchange raw values.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import seeding
from .config import ExperimentConfig, base_family, base_is_averaged
from .dataio import Dataset, detect_delimiter, features_and_labels, normalize_score, split
from .encoding import validate
from .errors import DatasetError, GuidestackError, RowError, SchemaError, SequenceError, UndefinedMetricError
from .learners import FAMILIES
from .losses import LOSS_KINDS
from .metrics import MetricReport, metric_report, mse, spearman
from .persistence import sha256_of_file, sha256_of_json
from .stacking import RefinedSpec, SingleSpec, StackedEnsemble, VotedSpec, fit_stacked
from .tuning import TuneResult, grid_search

OURS_COLUMN = "OURS"

REGRESSION_ROWS = ("spearman_score", "MSE_score")
CLASSIFICATION_ROWS = (
    "accuracy_score",
    "roc_auc_score",
    "precision_score",
    "recall_score",
    "f1_score",
    "average_precision_score",
)
_REPORT_KEYS = {
    "accuracy_score": "accuracy",
    "roc_auc_score": "roc_auc",
    "precision_score": "precision",
    "recall_score": "recall",
    "f1_score": "f1",
    "average_precision_score": "average_precision",
}


def clip_unit(values) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=float), 0.0, 1.0)


# ---------------------------------------------------------------------------
# tuning lanes and the base roster


def tuning_lanes(config: ExperimentConfig) -> list[tuple[str, str]]:
    """(family, loss kind) pairs the roster needs, deduplicated, in stable order."""
    lanes: list[tuple[str, str]] = []
    for base in config.stacking.bases:
        family = base_family(base)
        kinds = [s.kind for s in config.losses] if base_is_averaged(base) else [config.stacking.single_loss]
        for kind in kinds:
            if (family, kind) not in lanes:
                lanes.append((family, kind))
    return lanes


def run_tuning(config: ExperimentConfig, X, y, seed: int, threads: int = 1) -> dict[tuple[str, str], TuneResult]:
    """Grid-search every lane; lane seeds depend only on (family, loss kind)."""
    lanes = tuning_lanes(config)

    def one(lane: tuple[str, str]) -> TuneResult:
        family, kind = lane
        lane_seed = seeding.child_seed(seed, seeding.TAG_TUNE, FAMILIES.index(family), LOSS_KINDS.index(kind))
        return grid_search(family, config.loss_by_kind(kind), X, y, config.grids[family],
                           config.tune_spec(lane_seed))

    if threads > 1 and len(lanes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, lanes))
    else:
        results = [one(lane) for lane in lanes]
    return dict(zip(lanes, results))


def roster_specs(config: ExperimentConfig, tune_results: dict[tuple[str, str], TuneResult]) -> list[VotedSpec]:
    """One voted spec per roster entry.

    A plain entry votes over the per-metric winning single-loss models; an
    avg_ entry votes over per-metric refined models whose constituents use
    that metric's winning params for each loss.
    """
    specs = []
    for base in config.stacking.bases:
        family = base_family(base)
        members = []
        for metric in config.tuning_metrics:
            if base_is_averaged(base):
                params = tuple(tune_results[(family, s.kind)].winner_params(metric) for s in config.losses)
                members.append(RefinedSpec(name=f"{base}:{metric}", family=family,
                                           loss_set=config.losses, params_per_loss=params))
            else:
                loss = config.loss_by_kind(config.stacking.single_loss)
                params = tune_results[(family, loss.kind)].winner_params(metric)
                members.append(SingleSpec(name=f"{base}:{metric}", family=family, loss=loss, params=params))
        specs.append(VotedSpec(name=base, members=tuple(members), how=config.tuning_vote))
    return specs


def train_ensemble(config: ExperimentConfig, ds: Dataset, seed: int, threads: int = 1) -> tuple[StackedEnsemble, dict]:
    """Full pipeline on one dataset: tune, build roster, stack."""
    X, y = features_and_labels(ds)
    tune_results = run_tuning(config, X, y, seed, threads)
    specs = roster_specs(config, tune_results)
    ensemble = fit_stacked(
        specs, X, y, k=config.stacking.folds, seed=seed,
        nonnegative=config.stacking.nonnegative_meta,
        append_features=config.stacking.append_features,
    )
    return ensemble, tune_results


# ---------------------------------------------------------------------------
# report tables


class ReportTable:
    """Rows of (metric, threshold) by method columns; None renders as NA."""

    def __init__(self, methods: list[str], cutoffs: tuple[float, ...]):
        self.methods = list(methods)
        self.cutoffs = tuple(cutoffs)
        self.rows: list[tuple[str, float | None]] = [(m, None) for m in REGRESSION_ROWS]
        for c in self.cutoffs:
            self.rows += [(m, c) for m in CLASSIFICATION_ROWS]
        self.values = np.full((len(self.rows), len(self.methods)), np.nan)

    def set_report(self, method: str, report: MetricReport) -> None:
        col = self.methods.index(method)
        flat: list[float | None] = [report.spearman, report.mse]
        for c in self.cutoffs:
            per = report.thresholds[float(c)]
            flat += [per[_REPORT_KEYS[name]] for name in CLASSIFICATION_ROWS]
        for i, v in enumerate(flat):
            self.values[i, col] = np.nan if v is None else float(v)

    def to_tsv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
        writer.writerow(["metric", "threshold", *self.methods])
        for (name, cutoff), row in zip(self.rows, self.values):
            cells = [name, "" if cutoff is None else repr(float(cutoff))]
            cells += ["NA" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow(cells)
        return buf.getvalue()

    @classmethod
    def mean_of(cls, tables: list["ReportTable"]) -> "ReportTable":
        """Entrywise mean across repeats; NA entries are skipped, and a cell
        undefined in every repeat stays NA."""
        first = tables[0]
        out = cls(first.methods, first.cutoffs)
        stacked = np.stack([t.values for t in tables])
        with np.errstate(invalid="ignore"):
            out.values = np.nanmean(stacked, axis=0)
        return out


def evaluate_methods(ds_test: Dataset, ensemble: StackedEnsemble, cutoffs) -> ReportTable:
    """Score the stacked model, each fitted base, and each baseline column."""
    X_test, y_test = features_and_labels(ds_test)
    methods: list[tuple[str, np.ndarray]] = [(OURS_COLUMN, clip_unit(ensemble.predict(X_test)))]
    for spec, model in zip(ensemble.base_specs, ensemble.fitted_bases):
        methods.append((spec.name, clip_unit(model.predict(X_test))))
    for name in ds_test.baseline_names():
        methods.append((name, ds_test.baseline(name)))
    table = ReportTable([name for name, _ in methods], tuple(float(c) for c in cutoffs))
    for name, preds in methods:
        table.set_report(name, metric_report(y_test, preds, table.cutoffs))
    return table


# ---------------------------------------------------------------------------
# benchmark protocol


def run_benchmark(config: ExperimentConfig, ds: Dataset, out_dir: str | Path,
                  seed: int | None = None, threads: int = 1) -> dict:
    """Repeated-split evaluation; writes repeat_*.tsv, mean.tsv, provenance.txt.

    Output bytes depend only on (config, data, seed): repeats are computed
    possibly in parallel but assembled and written by repeat index.
    """
    if len(ds) < 10:
        raise DatasetError(f"benchmark needs at least 10 rows, got {len(ds)}")
    master = config.split.master_seed if seed is None else int(seed)
    plan = replace(config.split, master_seed=master)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one_repeat(r: int) -> ReportTable:
        ds_train, ds_test = split(ds, plan, r)
        ensemble, _ = train_ensemble(config, ds_train, seeding.child_seed(master, seeding.TAG_REPEAT, r))
        return evaluate_methods(ds_test, ensemble, config.cutoffs)

    indices = list(range(plan.repeats))
    if threads > 1 and plan.repeats > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(one_repeat, indices))
    else:
        tables = [one_repeat(r) for r in indices]

    paths = {}
    for r, table in enumerate(tables):
        p = out / f"repeat_{r:03d}.tsv"
        p.write_text(table.to_tsv(), encoding="utf-8")
        paths[f"repeat_{r:03d}"] = p
    mean_table = ReportTable.mean_of(tables)
    mean_path = out / "mean.tsv"
    mean_path.write_text(mean_table.to_tsv(), encoding="utf-8")
    paths["mean"] = mean_path
    prov_path = out / "provenance.txt"
    prov_path.write_text(provenance_text(config, ds, master), encoding="utf-8")
    paths["provenance"] = prov_path
    return paths


def provenance_text(config: ExperimentConfig, ds: Dataset, master_seed: int) -> str:
    from . import __version__

    lines = [
        f"guidestack_version={__version__}",
        f"config_digest={sha256_of_json(config.canonical_dict())}",
        f"master_seed={master_seed}",
        f"rows={len(ds)}",
        f"label_column={config.schema.label_column}",
        f"label_scale={config.schema.label_scale}",
    ]
    if ds.provenance is not None:
        lines.append(f"data_path={ds.provenance.path}")
        try:
            lines.append(f"data_sha256={sha256_of_file(ds.provenance.path)}")
        except OSError:
            lines.append("data_sha256=unavailable")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# training and prediction entry points used by the CLI


def train_archive_meta(config: ExperimentConfig, ds: Dataset, master_seed: int) -> dict:
    from dataclasses import asdict

    return {
        "config_digest": sha256_of_json(config.canonical_dict()),
        "master_seed": master_seed,
        "dataset_sha256": sha256_of_file(ds.provenance.path) if ds.provenance else "",
        "schema": asdict(config.schema),
    }


def read_sequences(path: str | Path, sequence_column: str, *,
                   delimiter: str | None = None, permissive: bool = False) -> tuple[list[str], list[RowError]]:
    """Sequences only; labels are not required for prediction input."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: empty file")
    delim = delimiter if delimiter is not None else detect_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]
    if sequence_column not in header:
        raise SchemaError(f"column {sequence_column!r} missing from header {header}")
    col = header.index(sequence_column)
    sequences: list[str] = []
    errors: list[RowError] = []
    for i, cells in enumerate(reader):
        if not cells or all(not c.strip() for c in cells):
            continue
        try:
            if len(cells) <= col:
                raise RowError(i, "row too short")
            sequences.append(validate(cells[col]))
        except (SequenceError, RowError) as exc:
            err = exc if isinstance(exc, RowError) else RowError(i, f"invalid sequence: {exc}")
            if not permissive:
                raise err from None
            errors.append(err)
    if not sequences:
        raise DatasetError(f"{path}: no usable sequences")
    return sequences, errors


def score_sequences(model, sequences: list[str]) -> np.ndarray:
    """Final pipeline output: predictions clipped to [0, 1]."""
    from .encoding import encode_matrix

    return clip_unit(model.predict(encode_matrix(sequences)))


def write_scores(path: str | Path, sequences: list[str], scores: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["sequence", "score"])
        for seq, sc in zip(sequences, scores):
            writer.writerow([seq, repr(float(sc))])


# ---------------------------------------------------------------------------
# cross-study concordance


def compare_studies(path: str | Path, column_a: str, column_b: str, *,
                    sequence_column: str | None = None, scale: str = "percent",
                    delimiter: str | None = None, permissive: bool = False) -> dict:
    """Concordance of two score columns keyed by guide sequence.

    Returns {"n", "spearman", "mse", "column_a", "column_b"}; spearman is
    None when undefined. Both columns are normalized with the given scale.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: empty file")
    delim = delimiter if delimiter is not None else detect_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip() for h in next(reader)]
    for col in (column_a, column_b):
        if col not in header:
            raise SchemaError(f"column {col!r} missing from header {header}")
    seq_col = sequence_column if sequence_column is not None else header[0]
    if seq_col not in header:
        raise SchemaError(f"sequence column {seq_col!r} missing from header {header}")
    ia, ib, isq = header.index(column_a), header.index(column_b), header.index(seq_col)
    shared: dict[str, tuple[float, float]] = {}
    for i, cells in enumerate(reader):
        if not cells or all(not c.strip() for c in cells):
            continue
        try:
            seq = validate(cells[isq])
            a = normalize_score(float(cells[ia]), scale)
            b = normalize_score(float(cells[ib]), scale)
        except (SequenceError, ValueError, GuidestackError) as exc:
            if permissive:
                continue
            raise RowError(i, str(exc)) from None
        if seq not in shared:
            shared[seq] = (a, b)
    if len(shared) < 3:
        raise DatasetError(f"need at least 3 shared rows, got {len(shared)}")
    a = np.array([v[0] for v in shared.values()])
    b = np.array([v[1] for v in shared.values()])
    try:
        rho = spearman(a, b)
    except UndefinedMetricError:
        rho = None
    return {"n": len(shared), "spearman": rho, "mse": mse(a, b),
            "column_a": column_a, "column_b": column_b}


def concordance_text(result: dict) -> str:
    rho = "NA" if result["spearman"] is None else repr(result["spearman"])
    return (
        f"column_a={result['column_a']}\n"
        f"column_b={result['column_b']}\n"
        f"n={result['n']}\n"
        f"spearman={rho}\n"
        f"mse={repr(result['mse'])}\n"
    )


# ---------------------------------------------------------------------------
# tuning score table emission


def tune_table_tsv(results: dict[tuple[str, str], TuneResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(["family", "loss", "cell", "metric", "cv_score", "winner", "params"])
    for (family, kind), res in results.items():
        winner_cells = {m: w.cell_index for m, w in res.winners.items()}
        for ci, params in enumerate(res.grid):
            for mi, metric in enumerate(res.metrics):
                score = res.table[ci, mi]
                writer.writerow([
                    family, kind, ci, metric,
                    "NA" if np.isnan(score) else repr(float(score)),
                    int(winner_cells[metric] == ci),
                    json.dumps(params.__dict__, sort_keys=True),
                ])
    return buf.getvalue()
