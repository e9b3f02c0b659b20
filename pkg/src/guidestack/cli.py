"""Command-line interface.

Subcommands: train, predict, benchmark, tune, compare-studies,
validate-data. All outputs are plain files under --out; nothing here is
interactive. Exit code 0 on success, 2 on any reported error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .dataio import load_dataset
from .errors import GuidestackError
from .persistence import load_model, save_model
from .pipeline import (
    compare_studies,
    concordance_text,
    provenance_text,
    read_sequences,
    run_benchmark,
    run_tuning,
    score_sequences,
    train_archive_meta,
    train_ensemble,
    tune_table_tsv,
    write_scores,
)


def _add_common(p: argparse.ArgumentParser, *, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment config (TOML)")
    p.add_argument("--data", required=True, help="input data file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config master seed")
    p.add_argument("--threads", type=int, default=1, help="parallelism degree")
    p.add_argument("--permissive", action="store_true", help="collect bad rows instead of aborting")
    p.add_argument("--delimiter", default=None, help="field delimiter (default: auto-detect tab/comma)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guidestack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="tune, refine, and stack on the full input")
    _add_common(p)

    p = sub.add_parser("predict", help="score guides with a trained archive")
    p.add_argument("archive", help="model archive written by train")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--permissive", action="store_true")
    p.add_argument("--delimiter", default=None)

    p = sub.add_parser("benchmark", help="repeated-split evaluation with mean report")
    _add_common(p)

    p = sub.add_parser("tune", help="emit the grid-search score table")
    _add_common(p)

    p = sub.add_parser("compare-studies", help="concordance of two score columns")
    p.add_argument("--data", required=True)
    p.add_argument("--column-a", required=True)
    p.add_argument("--column-b", required=True)
    p.add_argument("--sequence-column", default=None, help="defaults to the first header column")
    p.add_argument("--scale", choices=("unit", "percent"), default="percent")
    p.add_argument("--out", default=None, help="optional report file")
    p.add_argument("--permissive", action="store_true")
    p.add_argument("--delimiter", default=None)

    p = sub.add_parser("validate-data", help="parse a data file and report problems")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--permissive", action="store_true")
    p.add_argument("--delimiter", default=None)

    return parser


def _master_seed(config, args) -> int:
    return config.split.master_seed if args.seed is None else int(args.seed)


def cmd_train(args) -> int:
    config = load_config(args.config)
    ds = load_dataset(args.data, config.schema, permissive=args.permissive, delimiter=args.delimiter)
    master = _master_seed(config, args)
    ensemble, _ = train_ensemble(config, ds, master, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    archive_path = out / "model.json"
    save_model(ensemble, archive_path, extra=train_archive_meta(config, ds, master))
    (out / "provenance.txt").write_text(provenance_text(config, ds, master), encoding="utf-8")
    print(f"wrote {archive_path}")
    return 0


def cmd_predict(args) -> int:
    model, meta = load_model(args.archive)
    schema = meta.get("schema")
    if not schema:
        raise GuidestackError("archive carries no schema; retrain with a current version")
    sequences, errors = read_sequences(args.data, schema["sequence_column"],
                                       permissive=args.permissive, delimiter=args.delimiter)
    for err in errors:
        print(f"skipped {err}", file=sys.stderr)
    scores = score_sequences(model, sequences)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    score_path = out / "scores.tsv"
    write_scores(score_path, sequences, scores)
    print(f"wrote {score_path}")
    return 0


def cmd_benchmark(args) -> int:
    config = load_config(args.config)
    ds = load_dataset(args.data, config.schema, permissive=args.permissive, delimiter=args.delimiter)
    paths = run_benchmark(config, ds, args.out, seed=args.seed, threads=args.threads)
    print(f"wrote {paths['mean']}")
    return 0


def cmd_tune(args) -> int:
    from .dataio import features_and_labels

    config = load_config(args.config)
    ds = load_dataset(args.data, config.schema, permissive=args.permissive, delimiter=args.delimiter)
    X, y = features_and_labels(ds)
    results = run_tuning(config, X, y, _master_seed(config, args), threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "tune_scores.tsv"
    table_path.write_text(tune_table_tsv(results), encoding="utf-8")
    print(f"wrote {table_path}")
    return 0


def cmd_compare_studies(args) -> int:
    result = compare_studies(
        args.data, args.column_a, args.column_b,
        sequence_column=args.sequence_column, scale=args.scale,
        permissive=args.permissive, delimiter=args.delimiter,
    )
    text = concordance_text(result)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_validate_data(args) -> int:
    config = load_config(args.config)
    ds = load_dataset(args.data, config.schema, permissive=args.permissive, delimiter=args.delimiter)
    labels = ds.labels()
    print(f"rows={len(ds)}")
    print(f"rejected={len(ds.rejected)}")
    print(f"label_range=[{labels.min():g}, {labels.max():g}]")
    print(f"baselines={','.join(ds.baseline_names()) or '(none)'}")
    for rej in ds.rejected:
        print(f"rejected {rej.index}: {rej.reason}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
    "tune": cmd_tune,
    "compare-studies": cmd_compare_studies,
    "validate-data": cmd_validate_data,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GuidestackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
