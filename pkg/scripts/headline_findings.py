"""Reproduce the lab's headline findings at adjustable scale.

Runs three desk-scale experiments on the calibrated simulator and prints
compact tables:

  1. probe-and-prune search vs best-of-N at matched budget (pass@2),
  2. success by ground-truth path length (the horizon cliff),
  3. chained search vs a single round on long mazes.

    python scripts/headline_findings.py --mazes 60
"""

import argparse
import time
from collections import defaultdict

from planbeam import chain, simgen
from planbeam.maze import GenerationError, bfs_shortest_path, generate_maze
from planbeam.search import Budget, best_of_n, epbs


def matched_budget_comparison(cfg, n_mazes: int) -> None:
    budget = Budget(nfe=400, tau=5, beam=2, steps=cfg.steps)
    wins = {"epbs": 0, "bon": 0}
    i = 0
    done = 0
    while done < n_mazes:
        try:
            m = generate_maze(6, (0.2, 0.3, 0.4, 0.5)[i % 4], "vary" if i % 3 else "norm", 900 + i)
        except GenerationError:
            i += 1
            continue
        e = epbs(m, cfg, budget, master_seed=31 + i)
        b = best_of_n(m, cfg, 400 // cfg.steps, 2, master_seed=31 + i)
        wins["epbs"] += any(c.verdict.success for c in e.completed)
        wins["bon"] += any(c.verdict.success for c in b.completed)
        done += 1
        i += 1
    print("\n== size-6 pass@2 at 400 NFEs (shared seed pools) ==")
    print(f"  probe-and-prune : {wins['epbs'] / n_mazes:.3f}  ({e.n_candidates} candidates)")
    print(f"  best-of-N       : {wins['bon'] / n_mazes:.3f}  ({b.n_candidates} candidates)")


def horizon_cliff(cfg, n_mazes: int) -> None:
    budget = Budget(nfe=400, tau=5, beam=2, steps=cfg.steps)
    bins = defaultdict(lambda: [0, 0])
    i = 0
    done = 0
    while done < n_mazes:
        size = (6, 7, 8, 9, 10)[i % 5]
        try:
            m = generate_maze(size, (0.2, 0.35, 0.5)[i % 3], "vary" if i % 2 else "norm", 2200 + i)
        except GenerationError:
            i += 1
            continue
        moves = bfs_shortest_path(m).moves
        label = "<=9" if moves <= 9 else ("10-13" if moves <= 13 else "14+")
        res = epbs(m, cfg, budget, master_seed=5 + i)
        bins[label][0] += 1
        bins[label][1] += any(c.verdict.success for c in res.completed)
        done += 1
        i += 1
    print("\n== single-round success by BFS path length ==")
    for label in ("<=9", "10-13", "14+"):
        n, wins = bins[label]
        rate = "n/a" if n == 0 else f"{wins / n:.3f}"
        print(f"  {label:>6}: {rate}  (n={n})")


def chaining_gain(cfg, n_mazes: int) -> None:
    budget = Budget(nfe=400, tau=5, beam=2, steps=cfg.steps)
    single = chained = total = 0
    i = 0
    while total < n_mazes and i < 20_000:
        size = (6, 7, 8)[i % 3]
        try:
            m = generate_maze(size, (0.2, 0.3, 0.4)[i % 3], "vary" if i % 2 else "norm", 5000 + i)
            moves = bfs_shortest_path(m).moves
        except GenerationError:
            i += 1
            continue
        if 10 <= moves <= 13:
            res = epbs(m, cfg, budget, master_seed=321 + i)
            single += any(c.verdict.success for c in res.completed)
            out = chain.chain_solve(m, cfg, budget, master_seed=321 + i)
            chained += out.verdict.success
            total += 1
        i += 1
    print("\n== long-horizon band (10-13 BFS moves) ==")
    print(f"  single round (400 NFEs)  : {single / total:.3f}")
    print(f"  chained x3 (1200 NFEs)   : {chained / total:.3f}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mazes", type=int, default=60, help="mazes per experiment")
    parser.add_argument("--profile", help="calibration profile JSON (default: shipped)")
    args = parser.parse_args()
    cfg = simgen.GeneratorConfig()
    if args.profile:
        from planbeam.bench import load_profile

        cfg = load_profile(args.profile)
    t0 = time.time()
    matched_budget_comparison(cfg, args.mazes)
    horizon_cliff(cfg, args.mazes)
    chaining_gain(cfg, max(20, args.mazes // 2))
    print(f"\ntotal {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
