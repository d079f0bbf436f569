"""Experiment harness and CLI.

Subcommands: gen-corpus, calibrate, sweep, report, chain-demo. Sweeps are
deterministic given the experiment config and master seeds: candidate
pools are shared across methods per maze, records are sorted canonically
before writing, and every row carries config/profile hashes plus the
package version. Exit codes: 0 success, 1 config error, 2 runtime
failure. The output root defaults to $PLANBEAM_OUT or the working
directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, chain, metrics, render, search, simgen
from .maze import (
    GenerationError,
    GridMaze,
    bfs_shortest_path,
    generate_maze,
    maze_id,
    read_corpus,
    write_corpus,
)

PROFILE_FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 1)."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    sizes: tuple[int, ...] = (4, 6, 8, 10)
    densities: tuple[float, ...] = (0.2, 0.4, 0.6)
    variants: tuple[str, ...] = ("norm", "vary")
    per_cell: int = 40

    def __post_init__(self) -> None:
        if self.per_cell < 1:
            raise ConfigError("per_cell must be >= 1")
        if any(v not in ("norm", "vary") for v in self.variants):
            raise ConfigError("corpus variants must be norm/vary")


@dataclass(frozen=True)
class MethodSpec:
    """One method at one budget point. ``bon`` means tau = T."""

    name: str
    budget_nfe: int
    tau: int
    beam: int

    def __post_init__(self) -> None:
        if self.name not in ("epbs", "bon"):
            raise ConfigError(f"unknown method {self.name!r}")

    def label(self) -> str:
        return f"{self.name}@B{self.budget_nfe}-t{self.tau}-K{self.beam}"


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusSpec = CorpusSpec()
    methods: tuple[MethodSpec, ...] = (
        MethodSpec("epbs", 400, 5, 2),
        MethodSpec("bon", 400, 40, 2),
    )
    schedule_steps: int = 40
    master_seeds: tuple[int, ...] = (2024,)
    out_dir: str = "sweep_out"
    calibration_profile: str | None = None

    def to_dict(self) -> dict:
        return {
            "corpus": {
                "sizes": list(self.corpus.sizes),
                "densities": list(self.corpus.densities),
                "variants": list(self.corpus.variants),
                "per_cell": self.corpus.per_cell,
            },
            "methods": [
                {"name": m.name, "budget_nfe": m.budget_nfe, "tau": m.tau, "beam": m.beam}
                for m in self.methods
            ],
            "schedule_steps": self.schedule_steps,
            "master_seeds": list(self.master_seeds),
            "out_dir": self.out_dir,
            "calibration_profile": self.calibration_profile,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    def semantic_json(self) -> str:
        """Canonical JSON of everything that affects results (not paths)."""
        data = self.to_dict()
        data.pop("out_dir")
        return json.dumps(data, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            corpus = CorpusSpec(
                sizes=tuple(data["corpus"]["sizes"]),
                densities=tuple(data["corpus"]["densities"]),
                variants=tuple(data["corpus"]["variants"]),
                per_cell=int(data["corpus"]["per_cell"]),
            )
            methods = tuple(
                MethodSpec(m["name"], int(m["budget_nfe"]), int(m["tau"]), int(m["beam"]))
                for m in data["methods"]
            )
            return cls(
                corpus=corpus,
                methods=methods,
                schedule_steps=int(data["schedule_steps"]),
                master_seeds=tuple(int(s) for s in data["master_seeds"]),
                out_dir=data.get("out_dir", "sweep_out"),
                calibration_profile=data.get("calibration_profile"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def _hash12(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


def gen_corpus(spec: CorpusSpec, seed: int) -> tuple[list[GridMaze], list[str]]:
    """Generate the corpus grid; infeasible cells are skipped and logged."""
    mazes = []
    skipped = []
    for size in spec.sizes:
        for density in spec.densities:
            for variant in spec.variants:
                for k in range(spec.per_cell):
                    cell_seed = int(
                        np.uint64(seed)
                        + np.uint64(1_000_003) * np.uint64(k)
                        + np.uint64(size * 101 + int(density * 100) * 7)
                        + np.uint64(0 if variant == "norm" else 499)
                    )
                    try:
                        mazes.append(generate_maze(size, density, variant, cell_seed))
                    except GenerationError:
                        skipped.append(f"size={size} density={density} variant={variant} k={k}")
    return mazes, skipped


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationTargets:
    """Statistic targets the simulator profile is tuned against."""

    convergence_at_commit: float = 0.93
    refine_diversity_max: float = 0.25
    cross_seed_diversity: float = 0.68
    long_horizon_success_max: float = 0.10


@dataclass(frozen=True)
class CalibrationStats:
    convergence_at_commit: float
    refine_diversity: float
    cross_seed_diversity: float
    long_horizon_success: float
    rollouts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "convergence_at_commit": self.convergence_at_commit,
            "refine_diversity": self.refine_diversity,
            "cross_seed_diversity": self.cross_seed_diversity,
            "long_horizon_success": self.long_horizon_success,
            "rollouts": self.rollouts,
        }


def _energy_of(maze: GridMaze, plan: simgen.SeedPlan, trajectory) -> render.EnergyMap:
    fs = search.render_plan_frames(maze, plan, trajectory)
    return render.motion_energy(fs, mask_goal=True)


def _calibration_mazes(kind: str, count: int, master_seed: int) -> list[GridMaze]:
    """Fixed maze ensembles behind each calibration statistic.

    Commitment and branching are measured on 4x4 mazes; seed diversity on
    the studied size grid {4, 6, 8, 10}.
    """
    mazes = []
    i = 0
    while len(mazes) < count:
        if kind == "small":
            size, density = 4, (0.0, 0.2, 0.3, 0.4)[i % 4]
            variant = "norm" if i % 2 == 0 else "vary"
        else:
            size = (4, 6, 8, 10)[i % 4]
            density = (0.0, 0.2, 0.4)[i % 3]
            variant = "norm" if (i % 2 == 0 and size <= 6) else "vary"
        try:
            mazes.append(generate_maze(size, density, variant, master_seed + i))
        except GenerationError:
            pass
        i += 1
    return mazes


def convergence_statistic(
    cfg: simgen.GeneratorConfig, n_mazes: int = 163, seeds_per_maze: int = 4, master_seed: int = 9000
) -> tuple[float, int]:
    """Mean trajectory convergence at step ceil(T/8) over 4x4 mazes.

    Returns (mean, usable rollouts); zero-energy probes are skipped.
    """
    t_commit = -(-cfg.steps // 8)
    vals = []
    for i, m in enumerate(_calibration_mazes("small", n_mazes, master_seed)):
        for s in range(seeds_per_maze):
            plan = simgen.sample_plan(m, 100 * i + s, cfg)
            final = simgen.full_denoise(plan, cfg)
            e_final = _energy_of(m, plan, final.prediction.trajectory)
            probe = simgen.predict_x0(plan, t_commit, cfg, noise_seed=100 * i + s)
            e_probe = _energy_of(m, plan, probe.trajectory)
            try:
                vals.append(metrics.convergence(e_probe, e_final))
            except metrics.UndefinedMetricError:
                continue
    return float(np.mean(vals)), len(vals)


def convergence_series(
    maze: GridMaze, seed: int, cfg: simgen.GeneratorConfig, steps: Sequence[int] | None = None
) -> metrics.ConvergenceSeries:
    """Full C(t) curve for one seed on one maze."""
    plan = simgen.sample_plan(maze, seed, cfg)
    final = simgen.full_denoise(plan, cfg)
    e_final = _energy_of(maze, plan, final.prediction.trajectory)
    values = []
    for t in steps or range(1, cfg.steps + 1):
        probe = simgen.predict_x0(plan, t, cfg, noise_seed=seed)
        e_probe = _energy_of(maze, plan, probe.trajectory)
        try:
            values.append(metrics.convergence(e_probe, e_final))
        except metrics.UndefinedMetricError:
            values.append(float("nan"))
    return metrics.ConvergenceSeries(tuple(values), maze_id(maze), seed)


def refine_diversity_statistic(
    cfg: simgen.GeneratorConfig, n_mazes: int = 100, k: int = 5, master_seed: int = 5000
) -> tuple[float, int]:
    """Mean diversity of earliest-step refinement branches vs their parent."""
    vals = []
    for i, m in enumerate(_calibration_mazes("small", n_mazes, master_seed)):
        plan = simgen.sample_plan(m, 300 + i, cfg)
        e_parent = _energy_of(m, plan, simgen.full_denoise(plan, cfg).prediction.trajectory)
        for branch in simgen.refine_branch(plan, 1, k, cfg, seed=40 + i):
            e_branch = _energy_of(m, branch, simgen.full_denoise(branch, cfg).prediction.trajectory)
            try:
                vals.append(metrics.diversity(e_parent, e_branch))
            except metrics.UndefinedMetricError:
                continue
    return float(np.mean(vals)), len(vals)


def cross_seed_statistic(
    cfg: simgen.GeneratorConfig, n_pairs: int = 500, master_seed: int = 7000
) -> tuple[float, int]:
    """Mean diversity between independent seeds on the same maze."""
    vals = []
    mazes = _calibration_mazes("grid", (n_pairs + 1) // 2, master_seed)
    for i, m in enumerate(mazes):
        for pair in range(2):
            a = simgen.sample_plan(m, 100 * i + 2 * pair + 1, cfg)
            b = simgen.sample_plan(m, 100 * i + 2 * pair + 2, cfg)
            e_a = _energy_of(m, a, simgen.full_denoise(a, cfg).prediction.trajectory)
            e_b = _energy_of(m, b, simgen.full_denoise(b, cfg).prediction.trajectory)
            try:
                vals.append(metrics.diversity(e_a, e_b))
            except metrics.UndefinedMetricError:
                continue
    return float(np.mean(vals[:n_pairs])), len(vals[:n_pairs])


def long_horizon_statistic(
    cfg: simgen.GeneratorConfig, n_seeds: int = 500, master_seed: int = 1000
) -> tuple[float, int]:
    """Single-generation success rate on mazes needing >= 13 moves."""
    wins = 0
    total = 0
    sizes = (7, 8, 9, 10)
    i = 0
    while total < n_seeds:
        try:
            m = generate_maze(sizes[i % 4], (0.0, 0.2)[i % 2], "norm", master_seed + i)
        except GenerationError:
            i += 1
            continue
        path = bfs_shortest_path(m)
        if path is None or path.moves < 13:
            i += 1
            continue
        for s in range(25):
            plan = simgen.sample_plan(m, 17 * i + s, cfg)
            wins += plan.route[-1] == m.goal and plan.cheat.is_none
            total += 1
            if total >= n_seeds:
                break
        i += 1
    return wins / total, total


def calibration_statistics(cfg: simgen.GeneratorConfig, scale: float = 1.0) -> CalibrationStats:
    """Monte-Carlo estimates of all four calibration statistics."""
    scale = max(scale, 0.05)
    conv, n_conv = convergence_statistic(cfg, n_mazes=max(8, int(163 * scale)))
    refine, n_refine = refine_diversity_statistic(cfg, n_mazes=max(6, int(100 * scale)))
    cross, n_cross = cross_seed_statistic(cfg, n_pairs=max(12, int(500 * scale)))
    horizon, n_horizon = long_horizon_statistic(cfg, n_seeds=max(50, int(500 * scale)))
    return CalibrationStats(
        convergence_at_commit=conv,
        refine_diversity=refine,
        cross_seed_diversity=cross,
        long_horizon_success=horizon,
        rollouts={
            "convergence": n_conv,
            "refine": n_refine,
            "cross_seed": n_cross,
            "long_horizon": n_horizon,
        },
    )


def calibration_loss(stats: CalibrationStats, targets: CalibrationTargets) -> float:
    """Squared deviation from the targets (hinged for the two ceilings)."""
    return (
        (stats.convergence_at_commit - targets.convergence_at_commit) ** 2
        + max(0.0, stats.refine_diversity - targets.refine_diversity_max) ** 2
        + (stats.cross_seed_diversity - targets.cross_seed_diversity) ** 2
        + max(0.0, stats.long_horizon_success - targets.long_horizon_success_max) ** 2
    )


# Per-axis search grids for the coordinate descent.
_CALIBRATION_AXES: tuple[tuple[str, tuple], ...] = (
    ("eta0", (0.0, 0.1, 0.2, 0.3, 0.45)),
    ("gamma", (3.0, 5.0, 8.0, 12.0)),
    ("goal_pull", (0.6, 0.7, 0.75, 0.85)),
    ("avoid_prob", (0.85, 0.94, 1.0)),
    ("horizon_cells", (8, 10, 12)),
)


def run_calibration(
    base: simgen.GeneratorConfig | None = None,
    targets: CalibrationTargets = CalibrationTargets(),
    scale: float = 0.15,
    passes: int = 1,
    axes: Sequence[tuple[str, tuple]] = _CALIBRATION_AXES,
) -> tuple[simgen.GeneratorConfig, CalibrationStats, float]:
    """Coordinate descent over the simulator knobs toward the targets.

    Starts from the shipped defaults and scans each axis on a small grid
    at reduced Monte-Carlo scale. Unreachable targets simply leave a
    best-effort profile with its residual loss.
    """
    cfg = base or simgen.GeneratorConfig()
    best_stats = calibration_statistics(cfg, scale)
    best_loss = calibration_loss(best_stats, targets)
    for _ in range(passes):
        for axis, grid in axes:
            for value in grid:
                if getattr(cfg, axis) == value:
                    continue
                candidate = replace(cfg, **{axis: value})
                stats = calibration_statistics(candidate, scale)
                loss = calibration_loss(stats, targets)
                if loss < best_loss - 1e-9:
                    cfg, best_stats, best_loss = candidate, stats, loss
    return cfg, best_stats, best_loss


def profile_to_dict(
    cfg: simgen.GeneratorConfig, stats: CalibrationStats, targets: CalibrationTargets, loss: float
) -> dict:
    return {
        "format_version": PROFILE_FORMAT_VERSION,
        "package_version": __version__,
        "generator": cfg.to_dict(),
        "targets": {
            "convergence_at_commit": targets.convergence_at_commit,
            "refine_diversity_max": targets.refine_diversity_max,
            "cross_seed_diversity": targets.cross_seed_diversity,
            "long_horizon_success_max": targets.long_horizon_success_max,
        },
        "achieved": stats.to_dict(),
        "loss": loss,
    }


def write_profile(path, cfg, stats, targets, loss) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(cfg, stats, targets, loss), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_profile(path) -> simgen.GeneratorConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format_version") != PROFILE_FORMAT_VERSION:
        raise ConfigError(f"unsupported profile format in {path}")
    return simgen.GeneratorConfig.from_dict(data["generator"])


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

RECORD_FIELDS = (
    "size",
    "density",
    "variant",
    "maze_id",
    "bfs_moves",
    "method",
    "budget_nfe",
    "tau",
    "beam",
    "schedule_steps",
    "master_seed",
    "n_candidates",
    "total_nfe",
    "n_completed",
    "passed",
    "best_index",
    "best_success",
    "best_class",
    "best_confidence",
    "best_traj_len",
    "config_hash",
    "profile_hash",
    "version",
)


def _method_result(
    m: GridMaze, cfg: simgen.GeneratorConfig, spec: MethodSpec, master_seed: int
) -> search.SearchResult:
    steps = cfg.steps
    if spec.name == "bon":
        n = spec.budget_nfe // steps
        return search.best_of_n(m, cfg, n, spec.beam, master_seed)
    budget = search.Budget(nfe=spec.budget_nfe, tau=spec.tau, beam=spec.beam, steps=steps)
    return search.epbs(m, cfg, budget, master_seed)


def run_sweep(
    config: ExperimentConfig,
    generator: simgen.GeneratorConfig | None = None,
    mazes: Sequence[GridMaze] | None = None,
) -> dict:
    """Execute the full (maze x method x master-seed) grid and write files.

    Returns a manifest with output paths and per-maze failure notes.
    """
    if generator is None:
        if config.calibration_profile:
            generator = load_profile(config.calibration_profile)
        else:
            generator = simgen.GeneratorConfig()
    if generator.steps != config.schedule_steps:
        generator = replace(generator, schedule=simgen.DenoiseSchedule(config.schedule_steps))

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = _hash12(config.semantic_json())
    profile_hash = _hash12(generator.to_json())

    if mazes is None:
        mazes, skipped = gen_corpus(config.corpus, seed=config.master_seeds[0])
    else:
        mazes, skipped = list(mazes), []

    rows = []
    errors = []
    completed_rows = []
    for m in mazes:
        path = bfs_shortest_path(m)
        moves = -1 if path is None else path.moves
        for spec in config.methods:
            for master_seed in config.master_seeds:
                try:
                    result = _method_result(m, generator, spec, master_seed)
                except Exception as exc:  # log and continue per spec
                    errors.append(f"maze {maze_id(m)} {spec.label()}: {exc}")
                    continue
                passed = any(c.verdict.success for c in result.completed)
                best = next(
                    (c for c in result.completed if c.index == result.best), None
                )
                rows.append(
                    {
                        "size": m.size,
                        "density": f"{m.density:.4f}",
                        "variant": m.variant,
                        "maze_id": maze_id(m),
                        "bfs_moves": moves,
                        "method": spec.name,
                        "budget_nfe": spec.budget_nfe,
                        "tau": spec.tau if spec.name == "epbs" else generator.steps,
                        "beam": spec.beam,
                        "schedule_steps": generator.steps,
                        "master_seed": master_seed,
                        "n_candidates": result.n_candidates,
                        "total_nfe": result.total_nfe,
                        "n_completed": len(result.completed),
                        "passed": int(passed),
                        "best_index": -1 if best is None else best.index,
                        "best_success": 0 if best is None else int(best.verdict.success),
                        "best_class": "" if best is None else best.verdict.failure_class.value,
                        "best_confidence": "" if best is None else f"{best.final_score:.6f}",
                        "best_traj_len": -1 if best is None else len(best.trajectory) - 1,
                        "config_hash": config_hash,
                        "profile_hash": profile_hash,
                        "version": __version__,
                    }
                )
                for c in result.completed:
                    completed_rows.append(
                        {
                            "maze_id": maze_id(m),
                            "method": spec.name,
                            "budget_nfe": spec.budget_nfe,
                            "master_seed": master_seed,
                            "candidate": c.index,
                            "probe_score": f"{c.probe_score:.6f}",
                            "final_score": f"{c.final_score:.6f}",
                            "success": int(c.verdict.success),
                            "failure_class": c.verdict.failure_class.value,
                            "traj_moves": len(c.trajectory) - 1,
                        }
                    )

    sort_key = lambda r: (
        r["size"],
        r["density"],
        r["variant"],
        r["maze_id"],
        r["method"],
        r["budget_nfe"],
        r["tau"],
        r["beam"],
        r["master_seed"],
    )
    rows.sort(key=sort_key)
    completed_rows.sort(
        key=lambda r: (r["maze_id"], r["method"], r["budget_nfe"], r["master_seed"], r["candidate"])
    )

    records_path = out_dir / "records.csv"
    _write_csv(records_path, RECORD_FIELDS, rows)
    candidates_path = out_dir / "candidates.csv"
    _write_csv(
        candidates_path,
        (
            "maze_id",
            "method",
            "budget_nfe",
            "master_seed",
            "candidate",
            "probe_score",
            "final_score",
            "success",
            "failure_class",
            "traj_moves",
        ),
        completed_rows,
    )
    corpus_path = out_dir / "corpus.jsonl"
    write_corpus(mazes, corpus_path)
    (out_dir / "config.json").write_text(config.to_json() + "\n", encoding="utf-8")
    (out_dir / "profile.json").write_text(generator.to_json() + "\n", encoding="utf-8")
    manifest = {
        "records": str(records_path),
        "candidates": str(candidates_path),
        "corpus": str(corpus_path),
        "n_mazes": len(mazes),
        "n_rows": len(rows),
        "skipped_cells": skipped,
        "errors": errors,
        "config_hash": config_hash,
        "profile_hash": profile_hash,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def _write_csv(path, fields: Sequence[str], rows: Iterable[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


def report(results_dir) -> dict:
    """Aggregate a sweep directory into summary tables and a markdown file."""
    results_dir = Path(results_dir)
    records_path = results_dir / "records.csv"
    if not records_path.exists():
        raise ConfigError(f"no records.csv under {results_dir}")
    with open(records_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))

    pass_rows = _pass_at_k_table(rows)
    length_rows = _length_table(rows)
    corr_rows = _correlation_table(rows)
    failure_rows = _failure_histogram(results_dir)

    paths = {}
    for name, fields, data in (
        ("pass_at_k_by_size", ("method", "budget_nfe", "size", "n", "pass_rate"), pass_rows),
        ("success_by_path_length", ("method", "bin", "n", "successes", "rate"), length_rows),
        ("correlations", ("size", "n", "pearson_path_length", "pearson_density"), corr_rows),
        ("failure_histogram", ("method", "failure_class", "count"), failure_rows),
    ):
        path = results_dir / f"{name}.csv"
        _write_csv(path, fields, data)
        paths[name] = str(path)

    summary = results_dir / "summary.md"
    with open(summary, "w", encoding="utf-8") as fh:
        fh.write("# Sweep summary\n\n")
        fh.write(f"Records: {len(rows)}\n\n")
        for name in ("pass_at_k_by_size", "success_by_path_length", "correlations", "failure_histogram"):
            fh.write(f"## {name}\n\n")
            fh.write(Path(paths[name]).read_text(encoding="utf-8"))
            fh.write("\n")
    paths["summary"] = str(summary)
    return paths


def _pass_at_k_table(rows):
    table = {}
    for r in rows:
        key = (r["method"], int(r["budget_nfe"]), int(r["size"]))
        n, wins = table.get(key, (0, 0))
        table[key] = (n + 1, wins + int(r["passed"]))
    return [
        {
            "method": method,
            "budget_nfe": budget,
            "size": size,
            "n": n,
            "pass_rate": f"{wins / n:.4f}",
        }
        for (method, budget, size), (n, wins) in sorted(table.items())
    ]


def _length_table(rows):
    out = []
    for method in sorted({r["method"] for r in rows}):
        records = [
            (int(r["bfs_moves"]), bool(int(r["passed"])))
            for r in rows
            if r["method"] == method and int(r["bfs_moves"]) >= 0
        ]
        for stat in metrics.success_by_path_length(records):
            out.append(
                {
                    "method": method,
                    "bin": stat.label,
                    "n": stat.count,
                    "successes": stat.successes,
                    "rate": "" if stat.rate is None else f"{stat.rate:.4f}",
                }
            )
    return out


def _correlation_table(rows):
    out = []
    for size in sorted({int(r["size"]) for r in rows}):
        sized = [r for r in rows if int(r["size"]) == size]
        moves = [float(r["bfs_moves"]) for r in sized]
        passed = [float(r["passed"]) for r in sized]
        dens = [float(r["density"]) for r in sized]
        try:
            r_path = f"{metrics.pearson(moves, passed):.4f}"
        except (metrics.UndefinedMetricError, ValueError):
            r_path = ""
        try:
            r_dens = f"{metrics.pearson(dens, passed):.4f}"
        except (metrics.UndefinedMetricError, ValueError):
            r_dens = ""
        out.append(
            {"size": size, "n": len(sized), "pearson_path_length": r_path, "pearson_density": r_dens}
        )
    return out


def _failure_histogram(results_dir: Path):
    candidates_path = results_dir / "candidates.csv"
    if not candidates_path.exists():
        return []
    with open(candidates_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    table = {}
    for r in rows:
        if int(r["success"]):
            continue
        key = (r["method"], r["failure_class"])
        table[key] = table.get(key, 0) + 1
    return [
        {"method": method, "failure_class": cls, "count": count}
        for (method, cls), count in sorted(table.items())
    ]


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _out_root() -> Path:
    return Path(os.environ.get("PLANBEAM_OUT", "."))


def _cmd_gen_corpus(args) -> int:
    spec = CorpusSpec(
        sizes=tuple(args.sizes),
        densities=tuple(args.densities),
        variants=tuple(args.variants),
        per_cell=args.per_cell,
    )
    mazes, skipped = gen_corpus(spec, args.seed)
    out = _out_root() / args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(mazes, out)
    print(f"wrote {len(mazes)} mazes to {out}" + (f" ({len(skipped)} cells skipped)" if skipped else ""))
    return 0


def _cmd_calibrate(args) -> int:
    targets = CalibrationTargets(
        convergence_at_commit=args.target_convergence,
        refine_diversity_max=args.target_refine_max,
        cross_seed_diversity=args.target_cross_seed,
        long_horizon_success_max=args.target_horizon_max,
    )
    cfg, stats, loss = run_calibration(targets=targets, scale=args.scale, passes=args.passes)
    out = _out_root() / args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profile(out, cfg, stats, targets, loss)
    print(f"profile written to {out} (loss {loss:.6f})")
    for key, value in stats.to_dict().items():
        print(f"  {key}: {value}")
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    else:
        method = MethodSpec(
            args.method,
            args.budget,
            args.tau if args.method == "epbs" else args.schedule_T,
            args.beam,
        )
        config = ExperimentConfig(
            corpus=CorpusSpec(per_cell=args.per_cell),
            methods=(method,),
            schedule_steps=args.schedule_T,
            master_seeds=tuple(args.seeds),
            out_dir=str(_out_root() / args.out),
            calibration_profile=args.profile,
        )
    mazes = read_corpus(args.mazes) if args.mazes else None
    manifest = run_sweep(config, mazes=mazes)
    print(f"sweep complete: {manifest['n_rows']} records -> {manifest['records']}")
    for err in manifest["errors"]:
        print(f"  error: {err}")
    return 0


def _cmd_report(args) -> int:
    paths = report(_out_root() / args.results)
    print(f"summary -> {paths['summary']}")
    return 0


def _cmd_chain_demo(args) -> int:
    cfg = load_profile(args.profile) if args.profile else simgen.GeneratorConfig()
    try:
        m = generate_maze(args.size, args.density, "norm", args.seed)
    except GenerationError as exc:
        raise ConfigError(str(exc)) from exc
    budget = search.Budget(nfe=args.budget, tau=args.tau, beam=args.beam, steps=cfg.steps)
    outcome = chain.chain_solve(m, cfg, budget, master_seed=args.seed, max_depth=args.depth)
    moves = bfs_shortest_path(m).moves
    print(f"maze: size {m.size}, density {m.density:.2f}, BFS moves {moves}")
    for r in outcome.rounds:
        pivot = "-" if r.pivot is None else f"({r.pivot.row},{r.pivot.col})"
        print(
            f"  round {r.depth}: pivot {pivot}, segment {len(r.segment)} cells, "
            f"nfe {r.round_nfe}"
        )
    print(
        f"result: success={outcome.verdict.success} class={outcome.verdict.failure_class.value} "
        f"nfe={outcome.state.nfe_total} stitched={len(outcome.stitched)} cells"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="planbeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a maze corpus file")
    p.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8, 10])
    p.add_argument("--densities", type=float, nargs="+", default=[0.2, 0.4, 0.6])
    p.add_argument("--variants", nargs="+", default=["norm", "vary"])
    p.add_argument("--per-cell", type=int, default=5)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default="corpus.jsonl")
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("calibrate", help="tune simulator knobs toward the paper targets")
    p.add_argument("--scale", type=float, default=0.15, help="Monte-Carlo scale during search")
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--target-convergence", type=float, default=0.93)
    p.add_argument("--target-refine-max", type=float, default=0.25)
    p.add_argument("--target-cross-seed", type=float, default=0.68)
    p.add_argument("--target-horizon-max", type=float, default=0.10)
    p.add_argument("--out", default="profile.json")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("sweep", help="run a method sweep over a corpus")
    p.add_argument("--config", help="experiment config JSON (overrides other flags)")
    p.add_argument("--method", choices=["epbs", "bon"], default="epbs")
    p.add_argument("--budget", type=int, default=400)
    p.add_argument("--tau", type=int, default=5)
    p.add_argument("--beam", type=int, default=2)
    p.add_argument("--schedule-T", type=int, default=40, dest="schedule_T")
    p.add_argument("--seeds", type=int, nargs="+", default=[2024])
    p.add_argument("--mazes", help="corpus JSONL file (default: generate from spec)")
    p.add_argument("--per-cell", type=int, default=5)
    p.add_argument("--profile", help="calibration profile JSON")
    p.add_argument("--out", default="sweep_out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("report", help="aggregate a sweep directory")
    p.add_argument("--results", default="sweep_out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("chain-demo", help="run chained search on one long maze")
    p.add_argument("--size", type=int, default=10)
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--budget", type=int, default=400)
    p.add_argument("--tau", type=int, default=5)
    p.add_argument("--beam", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--profile")
    p.set_defaults(func=_cmd_chain_demo)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
