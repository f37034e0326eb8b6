#!/usr/bin/env python3
"""Run every query on the bundled diagrams and write the plot series as CSV."""
from __future__ import annotations

import argparse
from pathlib import Path

from dcsens.cli import run

ROOT = Path(__file__).resolve().parents[1]
DIAGRAMS = ROOT / "diagrams"
PLOTS = {"mini_umbrella": "theta_sun", "report_umbrella": "theta_sunny", "gather_umbrella": "tau1"}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("plots"), help="directory for the CSV series")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, meta in PLOTS.items():
        path = str(DIAGRAMS / f"{name}.yaml")
        print(f"## {name}")
        for argv in (["evaluate", path], ["voi", path, "--vars", "W"], ["intervals", path, "--exact"]):
            run(argv + ["--oracle"])
        csv_path = args.out / f"{name}_{meta}.csv"
        run(["plot", path, "--meta", meta, "--output", str(csv_path)])
        print(f"plot series written to {csv_path}\n")


if __name__ == "__main__":
    main()
