"""Benchmark both planners on the builtin scenarios, with and without rotation.

Writes results/table.txt and results/table.csv. Grid cells get a 60 s budget
so the rotation-enabled local-minima run can finish.
"""
import argparse
from pathlib import Path

from castr import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repetitions", type=int, default=5)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--timeout-ms", type=float, default=60_000)
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    common = ["bench", "--rotation", "both", "--repetitions", str(args.repetitions), "--jobs", str(args.jobs),
              "--timeout-ms", str(args.timeout_ms)]
    for fmt in ("text", "csv"):
        code = cli.main(common + ["--format", fmt, "--out", str(out / f"table.{fmt if fmt == 'csv' else 'txt'}")])
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
