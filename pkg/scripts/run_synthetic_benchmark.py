#!/usr/bin/env python3
"""Generate a synthetic guide dataset and run the full benchmark on it.

Writes the dataset, runs `guidestack benchmark` with the fast config in
configs/synthetic_small.toml, and prints the mean report table. Everything
lands under --out (default ./out/synthetic_demo).
"""

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=300, help="dataset size")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default="out/synthetic_demo")
    args = parser.parse_args()

    from guidestack.cli import main as cli_main
    from guidestack.synthetic import write_synthetic_file

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = out / "synthetic.tsv"
    write_synthetic_file(data, n=args.n, seed=args.seed, with_baseline=True)
    print(f"wrote {data}")

    rc = cli_main([
        "benchmark",
        "--config", str(REPO / "configs" / "synthetic_small.toml"),
        "--data", str(data),
        "--out", str(out),
        "--seed", str(args.seed),
        "--threads", str(args.threads),
    ])
    if rc != 0:
        return rc
    print()
    print((out / "mean.tsv").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())
