"""Stochastic denoising simulator standing in for a video generator.

Each seed deterministically induces a latent route (a goal-biased lazy
random walk over the maze). Intermediate predictions expose that route
through per-cell noise that anneals to zero over the denoising schedule,
so early predictions are rough but already carry the committed plan.
Horizon pressure (goal farther than the walk can travel in one
generation) triggers the cheat behaviors seen in large video models:
goal drift and second-agent spawns.

All operations are pure functions of their arguments; every random draw
comes from a stream keyed on the relevant (seed, step, index) tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import json

import numpy as np

from .maze import (
    Cell,
    GridMaze,
    NEIGHBOR_ORDER,
    bfs_distances,
    manhattan,
    maze_id,
    neighbors4,
)
from .rngutil import derive_seed, rng_from

CHEAT_NONE = "none"
CHEAT_GOAL_DRIFT = "goal_drift"
CHEAT_AGENT_SPAWN = "agent_spawn"


@dataclass(frozen=True)
class DenoiseSchedule:
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("schedule needs at least one step")


@dataclass(frozen=True)
class GeneratorConfig:
    """Simulator knobs, shipped with defaults tuned by the calibration suite.

    noise_rate(t) = eta0 * (1 - t/T)**gamma is the per-cell perturbation
    probability at step t; it is non-increasing in t and exactly zero at
    t = T. horizon_cells bounds the moves a single generation can cover.
    """

    schedule: DenoiseSchedule = DenoiseSchedule(40)
    commit_fraction: float = 0.125
    eta0: float = 0.20
    gamma: float = 8.0
    horizon_cells: int = 10
    goal_pull: float = 0.75
    avoid_prob: float = 0.94
    cheat_goal_drift_prob: float = 0.25
    cheat_spawn_prob: float = 0.10
    degenerate_prob: float = 0.02
    branch_scale: float = 1.4
    refine_diversity_ceiling: float = 0.28
    # Dirichlet concentration of each seed's direction preference; smaller
    # values give seeds stronger persistent routing styles.
    style_concentration: float = 0.3
    # Per-step probability that the walk keeps moving; stalling early is a
    # prominent failure mode of the modeled generators.
    step_persistence: float = 0.88

    def __post_init__(self) -> None:
        probs = (
            self.goal_pull,
            self.avoid_prob,
            self.cheat_goal_drift_prob,
            self.cheat_spawn_prob,
            self.degenerate_prob,
            self.eta0,
        )
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if not 0.0 <= self.step_persistence <= 1.0:
            raise ValueError("step_persistence must lie in [0, 1]")
        if self.cheat_goal_drift_prob + self.cheat_spawn_prob > 1.0:
            raise ValueError("cheat probabilities must sum to <= 1")
        if not 0.0 < self.commit_fraction <= 1.0:
            raise ValueError("commit_fraction must lie in (0, 1]")
        if self.gamma < 0 or self.branch_scale < 0:
            raise ValueError("gamma and branch_scale must be non-negative")
        if self.horizon_cells < 1:
            raise ValueError("horizon_cells must be >= 1")
        if self.style_concentration <= 0:
            raise ValueError("style_concentration must be positive")

    @property
    def steps(self) -> int:
        return self.schedule.steps

    def noise_rate(self, t: int) -> float:
        if not 1 <= t <= self.steps:
            raise ValueError(f"step {t} outside schedule 1..{self.steps}")
        return self.eta0 * (1.0 - t / self.steps) ** self.gamma

    def to_dict(self) -> dict:
        return {
            "schedule_steps": self.steps,
            "commit_fraction": self.commit_fraction,
            "eta0": self.eta0,
            "gamma": self.gamma,
            "horizon_cells": self.horizon_cells,
            "goal_pull": self.goal_pull,
            "avoid_prob": self.avoid_prob,
            "cheat_goal_drift_prob": self.cheat_goal_drift_prob,
            "cheat_spawn_prob": self.cheat_spawn_prob,
            "degenerate_prob": self.degenerate_prob,
            "branch_scale": self.branch_scale,
            "refine_diversity_ceiling": self.refine_diversity_ceiling,
            "style_concentration": self.style_concentration,
            "step_persistence": self.step_persistence,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        data = dict(data)
        steps = data.pop("schedule_steps")
        return cls(schedule=DenoiseSchedule(int(steps)), **data)

    @classmethod
    def from_json(cls, text: str) -> "GeneratorConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Cheat:
    kind: str = CHEAT_NONE
    cell: Cell | None = None
    fragment: tuple[Cell, ...] = ()

    @property
    def is_none(self) -> bool:
        return self.kind == CHEAT_NONE


NO_CHEAT = Cheat()


@dataclass(frozen=True)
class SeedPlan:
    seed: int
    route: tuple[Cell, ...]
    grid_size: int
    cheat: Cheat = NO_CHEAT
    degenerate: bool = False


@dataclass(frozen=True)
class IntermediatePrediction:
    step: int
    trajectory: tuple[Cell, ...]
    is_final: bool


@dataclass(frozen=True)
class DenoiseResult:
    prediction: IntermediatePrediction
    nfe_cost: int
    goal_drift: Cell | None
    spawn_fragment: tuple[Cell, ...]


def sample_plan(maze: GridMaze, seed: int, cfg: GeneratorConfig) -> SeedPlan:
    """Draw the latent route a seed commits to on this maze.

    The walk steps down the BFS distance field with probability
    goal_pull and otherwise moves uniformly among legal neighbors;
    obstacle cells are entered only when an avoid_prob check fails.
    Which descending direction a greedy step takes is sampled from a
    per-seed direction preference, so each seed commits to a coherent
    routing style of its own (the fully greedy limit still emits a
    shortest path). Walks that cannot reach the goal within
    horizon_cells moves are truncated, and when the goal is out of
    horizon reach entirely the plan may cheat instead: teleporting the
    goal next to the route end or spawning a second agent by the goal.
    """
    rng = rng_from(seed, maze_id(maze), 0x5EED)
    if rng.random() < cfg.degenerate_prob:
        return SeedPlan(seed, (maze.start,), maze.size, NO_CHEAT, degenerate=True)

    style = rng.dirichlet(np.full(4, cfg.style_concentration))
    dist = bfs_distances(maze, maze.goal)
    route = [maze.start]
    cur = maze.start
    for _ in range(cfg.horizon_cells):
        if cur == maze.goal:
            break
        if rng.random() >= cfg.step_persistence:
            break  # the walk stalls here
        if rng.random() < cfg.goal_pull:
            cur = _greedy_step(cur, maze, dist, rng, style)
        else:
            allow_obstacles = rng.random() >= cfg.avoid_prob
            options = [
                n
                for n in neighbors4(cur, maze.size)
                if allow_obstacles or n not in maze.obstacles
            ]
            if not options:
                options = neighbors4(cur, maze.size)
            cur = options[int(rng.integers(len(options)))]
        route.append(cur)

    cheat = NO_CHEAT
    if cur != maze.goal:
        start_dist = int(dist[maze.start.row, maze.start.col])
        pressure = start_dist > cfg.horizon_cells or start_dist < 0
        if pressure:
            u = rng.random()
            if u < cfg.cheat_goal_drift_prob:
                drift = _adjacent_free(route[-1], maze, rng)
                route.append(drift)
                cheat = Cheat(CHEAT_GOAL_DRIFT, drift)
            elif u < cfg.cheat_goal_drift_prob + cfg.cheat_spawn_prob:
                spawn = _adjacent_free(maze.goal, maze, rng)
                cheat = Cheat(CHEAT_AGENT_SPAWN, spawn, fragment=(spawn, maze.goal))
    return SeedPlan(seed, tuple(route), maze.size, cheat)


def _greedy_step(cur: Cell, maze: GridMaze, dist, rng, style) -> Cell:
    d = dist[cur.row, cur.col]
    if d > 0:
        descending = []
        weights = []
        for direction, (dr, dc) in enumerate(NEIGHBOR_ORDER):
            nxt = Cell(cur.row + dr, cur.col + dc)
            if maze.in_bounds(nxt) and dist[nxt.row, nxt.col] == d - 1:
                descending.append(nxt)
                weights.append(style[direction])
        probs = np.asarray(weights) / sum(weights)
        return descending[int(rng.choice(len(descending), p=probs))]
    # Off the reachable free set (walked onto an obstacle): head toward the
    # goal by Manhattan distance instead.
    options = neighbors4(cur, maze.size)
    return min(options, key=lambda n: manhattan(n, maze.goal))


def _adjacent_free(cell: Cell, maze: GridMaze, rng) -> Cell:
    options = [n for n in neighbors4(cell, maze.size) if n not in maze.obstacles]
    if not options:
        options = neighbors4(cell, maze.size)
    return options[int(rng.integers(len(options)))]


def _perturb(
    cells: tuple[Cell, ...], rate: float, grid_size: int, rng
) -> tuple[Cell, ...]:
    if rate <= 0.0:
        return cells
    out = []
    for cell in cells:
        if rng.random() < rate:
            options = neighbors4(cell, grid_size)
            out.append(options[int(rng.integers(len(options)))])
        else:
            out.append(cell)
    return tuple(out)


def predict_x0(
    plan: SeedPlan, t: int, cfg: GeneratorConfig, noise_seed: int = 0
) -> IntermediatePrediction:
    """Noisy estimate of the plan's final trajectory at denoising step t.

    Each route cell is independently displaced to a uniform in-grid
    neighbor with probability noise_rate(t); the noise stream is keyed on
    (noise_seed, plan.seed, t) so repeating a probe reproduces it.
    """
    if not 1 <= t <= cfg.steps:
        raise ValueError(f"step {t} outside schedule 1..{cfg.steps}")
    rate = cfg.noise_rate(t)
    rng = rng_from(noise_seed, plan.seed, t, 0xA003)
    trajectory = _perturb(plan.route, rate, plan.grid_size, rng)
    return IntermediatePrediction(step=t, trajectory=trajectory, is_final=t == cfg.steps)


def committed_prefix_cells(plan: SeedPlan, t: int, cfg: GeneratorConfig) -> int:
    """Number of route cells locked in by step t (at least the start)."""
    progress = min(1.0, (t / cfg.steps) / cfg.commit_fraction)
    return max(1, round(len(plan.route) * progress))


def refine_branch(
    plan: SeedPlan, t_branch: int, k: int, cfg: GeneratorConfig, seed: int
) -> list[SeedPlan]:
    """Re-noise a plan at t_branch into k sibling plans.

    Branches keep the committed route prefix exactly and re-sample the
    suffix with a perturbation rate tied to the remaining noise at the
    branch point, so late branches are near-identical to the parent while
    the earliest branches stay within the configured diversity ceiling.
    """
    if not 1 <= t_branch <= cfg.steps:
        raise ValueError(f"branch step {t_branch} outside schedule")
    if k < 1:
        raise ValueError("need at least one branch")
    keep = committed_prefix_cells(plan, t_branch, cfg)
    rate = cfg.branch_scale * cfg.noise_rate(t_branch)
    branches = []
    for i in range(k):
        rng = rng_from(seed, plan.seed, t_branch, i, 0xB7A2)
        suffix = _perturb(plan.route[keep:], rate, plan.grid_size, rng)
        branches.append(
            replace(
                plan,
                seed=derive_seed(seed, plan.seed, i),
                route=plan.route[:keep] + suffix,
            )
        )
    return branches


def full_denoise(
    plan: SeedPlan, cfg: GeneratorConfig, probed_at: int | None = None
) -> DenoiseResult:
    """Run the schedule to completion and materialize cheat effects.

    Costs a full schedule of NFEs, minus the probe steps already spent
    when the caller finishes a previously probed candidate.
    """
    if probed_at is not None and not 1 <= probed_at <= cfg.steps:
        raise ValueError("probe depth outside schedule")
    prediction = predict_x0(plan, cfg.steps, cfg, noise_seed=plan.seed)
    nfe = cfg.steps - (probed_at or 0)
    goal_drift = plan.cheat.cell if plan.cheat.kind == CHEAT_GOAL_DRIFT else None
    spawn = plan.cheat.fragment if plan.cheat.kind == CHEAT_AGENT_SPAWN else ()
    return DenoiseResult(prediction, nfe, goal_drift, spawn)
