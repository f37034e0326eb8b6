#!/usr/bin/env python3
"""Cross-check circuit answers against the oracle on a seeded random corpus.

Reports MEU/strategy agreement, VOI agreement, and interval nesting and
soundness (grid probes at 0.01) for every diagram.
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import yaml

from dcsens import compile_diagram, meu_ce
from dcsens.corpus import CorpusConfig, random_diagram
from dcsens.oracle import oracle_meu, oracle_voi
from dcsens.sensitivity import (
    admissible_intervals_extensive, binary_search_interval, optimal_unchanged, tau_grid, voi_sweep,
)


def load_config(path: Path | None) -> tuple[int, int, CorpusConfig]:
    doc = yaml.safe_load(path.read_text()) if path else {}
    count = int(doc.pop("count", 200))
    seed = int(doc.pop("base_seed", 20240611))
    return count, seed, CorpusConfig(**doc)


def check(d) -> list[str]:
    problems = []
    c = compile_diagram(d)
    res = meu_ce(c)
    o = oracle_meu(d)
    if abs(res.meu - o.meu) > 1e-9 or not res.strategy.agrees(o.strategy, o.active):
        problems.append(f"meu {res.meu} vs {o.meu}")
    free = [v for v in d.chance if not (d.ancestors(v) & set(d.decisions))][:2]
    if free and abs(voi_sweep(c, None, free, base=res).meu_pi - oracle_voi(d, None, free).meu_pi) > 1e-9:
        problems.append("voi")
    for k, iv in admissible_intervals_extensive(c, None, res).items():
        exact = binary_search_interval(c, None, k)
        if not (iv.weak.contains(exact, 1e-4) and exact.contains(iv.tight, 1e-4)):
            problems.append(f"{k} nesting tight={iv.tight.lo:.4f},{iv.tight.hi:.4f} "
                            f"exact={exact.lo:.4f},{exact.hi:.4f} weak={iv.weak.lo:.4f},{iv.weak.hi:.4f}")
        for tau in tau_grid(0.01):
            inside, outside = iv.tight.lo <= tau <= iv.tight.hi, not iv.weak.lo <= tau <= iv.weak.hi
            if inside or outside:
                same = optimal_unchanged(c, None, k, tau, res.strategy)
                if (inside and not same) or (outside and same):
                    problems.append(f"{k} probe {tau}")
                    break
    return problems


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, help="corpus YAML (count, base_seed, generator fields)")
    ap.add_argument("--count", type=int, help="override the diagram count")
    ap.add_argument("--seed", type=int, help="override the base seed")
    args = ap.parse_args()
    count, seed, config = load_config(args.config)
    count = args.count or count
    seed = args.seed if args.seed is not None else seed
    start = time.perf_counter()
    failures = 0
    for i in range(count):
        problems = check(random_diagram(seed + i, config))
        if problems:
            failures += 1
            print(f"seed {seed + i}: " + "; ".join(problems))
    print(f"{count} diagrams, {failures} with problems, {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
