"""Budgeted inference-time search over simulator seeds.

Early-probe beam search (``epbs``) partially denoises a large pool of
candidate seeds, scores each probe through the pixel pipeline, and
spends the remaining budget completing only the top-K. Best-of-N is the
tau = T special case and shares its implementation, which makes the
reduction between the two exact. NFE accounting follows the candidate
formula N = floor((B - K*T)/tau) + K, so N*tau + K*(T - tau) <= B holds
with equality whenever tau divides B - K*T.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from . import render, simgen, verify
from .maze import Cell, GridMaze, maze_id
from .rngutil import derive_seed

STATUS_PROBED = "probed"
STATUS_COMPLETED = "completed"
STATUS_DISCARDED = "discarded"


class BudgetInfeasibleError(ValueError):
    """The NFE budget cannot cover K full generations."""


@dataclass(frozen=True)
class Budget:
    """Total NFEs, probe depth, beam width, and schedule length.

    probe_overhead is an optional per-probe constant for wall-clock style
    accounting; it never enters the NFE ledger itself.
    """

    nfe: int
    tau: int
    beam: int
    steps: int
    probe_overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.beam < 1:
            raise ValueError("beam size must be >= 1")
        if not 1 <= self.tau <= self.steps:
            raise ValueError("probe step must lie in [1, T]")
        if self.nfe < self.beam * self.steps:
            raise BudgetInfeasibleError(
                f"budget {self.nfe} cannot complete {self.beam} x {self.steps}-step generations"
            )


def candidate_count(nfe: int, steps: int, tau: int, beam: int) -> int:
    """Initial pool size: floor((B - K*T) / tau) + K."""
    if nfe < beam * steps:
        raise BudgetInfeasibleError(
            f"budget {nfe} cannot complete {beam} x {steps}-step generations"
        )
    return (nfe - beam * steps) // tau + beam


@dataclass(frozen=True)
class CandidateRecord:
    index: int
    seed: int
    probe_score: float
    status: str
    nfe_spent: int


@dataclass(frozen=True)
class CompletedCandidate:
    index: int
    seed: int
    probe_score: float
    final_score: float
    trajectory: tuple[Cell, ...]
    verdict: verify.Verdict


@dataclass(frozen=True)
class SearchResult:
    maze_ident: int
    n_candidates: int
    total_nfe: int
    wallclock_cost: float
    best: int | None
    completed: tuple[CompletedCandidate, ...]
    records: tuple[CandidateRecord, ...]

    def to_dict(self) -> dict:
        return {
            "maze_id": self.maze_ident,
            "n_candidates": self.n_candidates,
            "total_nfe": self.total_nfe,
            "wallclock_cost": self.wallclock_cost,
            "best": self.best,
            "completed": [
                {
                    "index": c.index,
                    "seed": c.seed,
                    "probe_score": c.probe_score,
                    "final_score": c.final_score,
                    "trajectory": [[p.row, p.col] for p in c.trajectory],
                    "success": c.verdict.success,
                    "failure_class": c.verdict.failure_class.value,
                    "truncated_at_goal": c.verdict.truncated_at_goal,
                }
                for c in self.completed
            ],
            "records": [
                {
                    "index": r.index,
                    "seed": r.seed,
                    "probe_score": r.probe_score,
                    "status": r.status,
                    "nfe_spent": r.nfe_spent,
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


def candidate_seed(master_seed: int, maze_ident: int, index: int) -> int:
    """Seed for pool slot ``index``; shared across methods for pairing."""
    return derive_seed(master_seed, maze_ident, index)


def default_frame_count(n_cells: int) -> int:
    """Frames covering the whole trajectory plus the terminal dwell."""
    return render.FRAMES_PER_CELL * n_cells + render.TERMINAL_DWELL_FRAMES


def render_plan_frames(
    maze: GridMaze, plan: simgen.SeedPlan, trajectory: Sequence[Cell]
) -> render.FrameStack:
    """Rasterize a plan's trajectory with its cheat effects applied."""
    goal_drift = plan.cheat.cell if plan.cheat.kind == simgen.CHEAT_GOAL_DRIFT else None
    spawn = plan.cheat.fragment if plan.cheat.kind == simgen.CHEAT_AGENT_SPAWN else ()
    return render.rasterize(
        maze,
        tuple(trajectory),
        default_frame_count(len(trajectory)),
        goal_drift=goal_drift,
        spawn_fragment=spawn,
    )


def score_frames(fs: render.FrameStack, maze: GridMaze) -> float:
    """Confidence of the per-frame motion-detected agent positions.

    Probe scoring uses the verifier's largest-component motion detector
    (not the continuity tracker reserved for final judging).
    """
    centroids = render.background_diff_track(fs)
    cells = tuple(
        None if c is None else render.centroid_to_cell(c, fs.geometry) for c in centroids
    )
    return verify.confidence(verify.ConfidenceInputs(cells, maze))


def _complete_candidate(
    maze: GridMaze, plan: simgen.SeedPlan, cfg: simgen.GeneratorConfig, probed_at: int
) -> tuple[float, tuple[Cell, ...], verify.Verdict, int]:
    """Finish a probed candidate: denoise, render, extract, judge."""
    outcome = simgen.full_denoise(plan, cfg, probed_at=probed_at)
    fs = render_plan_frames(maze, plan, outcome.prediction.trajectory)
    extraction = render.extract_trajectory(fs)
    goal_track = render.track_goal(fs)
    meta = verify.TrajectoryMeta(
        goal_drifted=goal_track.drifted,
        drift_cell=goal_track.last if goal_track.drifted else None,
        spawned=bool(outcome.spawn_fragment),
        tracking_failed=extraction.tracking_failed,
    )
    verdict = verify.judge_success(extraction.cells, maze, meta)
    final_score = verify.confidence(verify.ConfidenceInputs(extraction.agent_by_frame, maze))
    return final_score, extraction.cells, verdict, outcome.nfe_cost


def epbs(
    maze: GridMaze,
    cfg: simgen.GeneratorConfig,
    budget: Budget,
    master_seed: int,
) -> SearchResult:
    """Probe N candidate seeds at tau, complete the top-K, judge them.

    Deterministic given (maze, cfg, budget, master_seed); candidate seeds
    derive from the master seed and the maze identity so different
    methods on the same maze share their pool prefix.
    """
    if budget.steps != cfg.steps:
        raise ValueError("budget schedule length must match generator schedule")
    mid = maze_id(maze)
    n = candidate_count(budget.nfe, budget.steps, budget.tau, budget.beam)

    plans = []
    probe_scores = []
    for i in range(n):
        seed_i = candidate_seed(master_seed, mid, i)
        plan = simgen.sample_plan(maze, seed_i, cfg)
        prediction = simgen.predict_x0(plan, budget.tau, cfg, noise_seed=seed_i)
        fs = render_plan_frames(maze, plan, prediction.trajectory)
        probe_scores.append(score_frames(fs, maze))
        plans.append(plan)

    ranked = verify.rank_candidates(list(enumerate(probe_scores)), budget.beam)
    selected = set(ranked.selected)

    completed = []
    records = []
    for i, plan in enumerate(plans):
        if i in selected:
            final_score, trajectory, verdict, extra_nfe = _complete_candidate(
                maze, plan, cfg, budget.tau
            )
            completed.append(
                CompletedCandidate(i, plan.seed, probe_scores[i], final_score, trajectory, verdict)
            )
            records.append(
                CandidateRecord(i, plan.seed, probe_scores[i], STATUS_COMPLETED, budget.tau + extra_nfe)
            )
        else:
            records.append(
                CandidateRecord(i, plan.seed, probe_scores[i], STATUS_DISCARDED, budget.tau)
            )

    total_nfe = n * budget.tau + budget.beam * (budget.steps - budget.tau)
    best = None
    if completed:
        best = min(completed, key=lambda c: (-c.final_score, c.index)).index
    return SearchResult(
        maze_ident=mid,
        n_candidates=n,
        total_nfe=total_nfe,
        wallclock_cost=total_nfe + n * budget.probe_overhead,
        best=best,
        completed=tuple(completed),
        records=tuple(records),
    )


def best_of_n(
    maze: GridMaze,
    cfg: simgen.GeneratorConfig,
    n: int,
    beam: int,
    master_seed: int,
) -> SearchResult:
    """Fully denoise n seeds and keep the top-K by final confidence.

    Implemented as the tau = T case of epbs with budget n*T, which makes
    the equivalence between the two methods structural rather than
    statistical.
    """
    if n < beam:
        raise ValueError("need at least as many seeds as the beam width")
    steps = cfg.steps
    budget = Budget(nfe=n * steps, tau=steps, beam=beam, steps=steps)
    return epbs(maze, cfg, budget, master_seed)


def pass_at_k(verdicts_per_maze: Sequence[Sequence[verify.Verdict]], k: int) -> float:
    """Fraction of mazes with a success among their (at most k) verdicts."""
    if not verdicts_per_maze:
        raise ValueError("no mazes to score")
    for verdicts in verdicts_per_maze:
        if len(verdicts) > k:
            raise ValueError(f"more than k={k} verdicts for one maze")
    hits = sum(1 for verdicts in verdicts_per_maze if any(v.success for v in verdicts))
    return hits / len(verdicts_per_maze)
