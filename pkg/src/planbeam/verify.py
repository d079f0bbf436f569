"""Candidate scoring, success judgment, and the failure taxonomy.

The confidence score rewards goal progress and penalizes frames spent on
obstacle cells. Final trajectories are judged after truncation at the
first goal visit; non-successes receive exactly one failure class, with
constraint cheats taking priority over degenerate and horizon-limited
explanations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .maze import Cell, GridMaze, bfs_distances, manhattan


class DegenerateMazeError(ValueError):
    """Confidence is undefined when start and goal coincide."""


DEFAULT_ALPHA = 0.5

# Oscillation between two cells counts as degenerate from this many
# alternations onward.
OSCILLATION_LIMIT = 6


@dataclass(frozen=True)
class ConfidenceInputs:
    """Per-frame agent cell estimates plus the maze they refer to.

    ``agent_cells`` holds one entry per frame; None marks frames where
    tracking found no agent. Those frames still count toward the obstacle
    ratio's denominator (they simply contribute no obstacle hits).
    """

    agent_cells: tuple[Cell | None, ...]
    maze: GridMaze
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if len(self.agent_cells) < 1:
            raise ValueError("need at least one frame")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")


def confidence(inputs: ConfidenceInputs) -> float:
    """1 - d(end, goal)/d(start, goal) - alpha * obstacle_ratio.

    ``end`` is the last frame with a valid agent estimate (the start cell
    when no frame has one); distances are Manhattan. The obstacle ratio
    is the fraction of all frames whose estimate lies on an obstacle.
    """
    maze = inputs.maze
    d_start = manhattan(maze.start, maze.goal)
    if d_start == 0:
        raise DegenerateMazeError("start equals goal")
    end = maze.start
    for cell in reversed(inputs.agent_cells):
        if cell is not None:
            end = cell
            break
    obstacle_hits = sum(1 for c in inputs.agent_cells if c is not None and c in maze.obstacles)
    ratio = obstacle_hits / len(inputs.agent_cells)
    return 1.0 - manhattan(end, maze.goal) / d_start - inputs.alpha * ratio


def confidence_bounds(maze: GridMaze, alpha: float = DEFAULT_ALPHA) -> tuple[float, float]:
    """Exact attainable [lower, upper] confidence bounds for this maze."""
    d_start = manhattan(maze.start, maze.goal)
    if d_start == 0:
        raise DegenerateMazeError("start equals goal")
    worst = max(
        manhattan(Cell(r, c), maze.goal)
        for r in range(maze.size)
        for c in range(maze.size)
    )
    return (1.0 - worst / d_start - alpha, 1.0)


@dataclass(frozen=True)
class RankResult:
    selected: tuple[int, ...]
    short_pool: bool


def rank_candidates(scores: Sequence[tuple[int, float]], k: int) -> RankResult:
    """Top-k candidate ids by score, ties broken by lower id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(scores, key=lambda pair: (-pair[1], pair[0]))
    selected = tuple(cid for cid, _ in ordered[:k])
    return RankResult(selected, short_pool=len(scores) < k)


class FailureClass(str, enum.Enum):
    NONE = "none"
    CONSTRAINT_LAKE_ENTRY = "constraint_lake_entry"
    CONSTRAINT_GOAL_DRIFT = "constraint_goal_drift"
    CONSTRAINT_ILLEGAL_MOVE = "constraint_illegal_move"
    HORIZON_VALID_STALL = "horizon_valid_stall"
    HORIZON_WRONG_ROUTE = "horizon_wrong_route"
    DEGENERATE_STATIC = "degenerate_static"
    DEGENERATE_TRACKING = "degenerate_tracking"
    DEGENERATE_CORRUPT = "degenerate_corrupt"


@dataclass(frozen=True)
class TrajectoryMeta:
    """Side-channel facts about a completed generation."""

    goal_drifted: bool = False
    drift_cell: Cell | None = None
    spawned: bool = False
    tracking_failed: bool = False


NO_META = TrajectoryMeta()


@dataclass(frozen=True)
class Verdict:
    success: bool
    failure_class: FailureClass
    truncated_at_goal: bool


def _truncate_at_goal(traj: Sequence[Cell], goal: Cell) -> tuple[list[Cell], bool]:
    cells = list(traj)
    if goal in cells:
        return cells[: cells.index(goal) + 1], True
    return cells, False


def _dedup(cells: Sequence[Cell]) -> list[Cell]:
    out: list[Cell] = []
    for cell in cells:
        if not out or out[-1] != cell:
            out.append(cell)
    return out


def judge_success(traj: Sequence[Cell], maze: GridMaze, meta: TrajectoryMeta = NO_META) -> Verdict:
    """Judge a trajectory, truncating at the first goal visit.

    Success requires the truncated trajectory to reach the goal through
    in-grid, obstacle-free, 4-adjacent steps with no goal drift and no
    tracking failure; violations after the goal visit are forgiven.
    """
    if not traj:
        return Verdict(False, FailureClass.DEGENERATE_CORRUPT, False)
    truncated, reached = _truncate_at_goal(traj, maze.goal)
    cells = _dedup(truncated)
    ok = (
        reached
        and not meta.goal_drifted
        and not meta.tracking_failed
        and all(maze.is_free(c) for c in cells)
        and all(manhattan(a, b) == 1 for a, b in zip(cells, cells[1:]))
    )
    if ok:
        return Verdict(True, FailureClass.NONE, True)
    return Verdict(False, classify_failure(traj, maze, meta), reached)


def classify_failure(
    traj: Sequence[Cell], maze: GridMaze, meta: TrajectoryMeta = NO_META
) -> FailureClass:
    """Assign the single highest-priority failure class.

    Priority: goal drift > lake entry > illegal move > degenerate
    (tracking, then static) > horizon-limited, with the horizon subtype
    decided by whether the final cell lies on any shortest path.
    """
    if not traj:
        return FailureClass.DEGENERATE_CORRUPT
    truncated, _ = _truncate_at_goal(traj, maze.goal)
    cells = _dedup(truncated)

    if meta.goal_drifted:
        return FailureClass.CONSTRAINT_GOAL_DRIFT
    if any(not maze.in_bounds(c) or c in maze.obstacles for c in cells):
        return FailureClass.CONSTRAINT_LAKE_ENTRY
    if any(manhattan(a, b) != 1 for a, b in zip(cells, cells[1:])):
        return FailureClass.CONSTRAINT_ILLEGAL_MOVE
    if meta.tracking_failed:
        return FailureClass.DEGENERATE_TRACKING
    if _is_static(truncated, maze):
        return FailureClass.DEGENERATE_STATIC
    if cells[-1] in shortest_path_cells(maze):
        return FailureClass.HORIZON_VALID_STALL
    return FailureClass.HORIZON_WRONG_ROUTE


def _is_static(truncated: Sequence[Cell], maze: GridMaze) -> bool:
    distinct = set(truncated)
    if len(distinct) > 2:
        return False
    alternations = sum(1 for a, b in zip(truncated, truncated[1:]) if a != b)
    if alternations >= OSCILLATION_LIMIT:
        return True
    start_d = manhattan(truncated[0], maze.goal)
    end_d = manhattan(truncated[-1], maze.goal)
    return end_d >= start_d


def shortest_path_cells(maze: GridMaze) -> frozenset[Cell]:
    """Cells lying on at least one shortest start-to-goal path."""
    from_start = bfs_distances(maze, maze.start)
    to_goal = bfs_distances(maze, maze.goal)
    total = from_start[maze.goal.row, maze.goal.col]
    if total < 0:
        return frozenset()
    return frozenset(
        Cell(r, c)
        for r in range(maze.size)
        for c in range(maze.size)
        if from_start[r, c] >= 0
        and to_goal[r, c] >= 0
        and from_start[r, c] + to_goal[r, c] == total
    )


def verdict_line(
    maze_ident: int,
    candidate_id: int,
    verdict: Verdict,
    score: float,
    path_len: int,
) -> str:
    """One-line serialized verdict record."""
    return (
        f"{maze_ident},{candidate_id},{int(verdict.success)},"
        f"{verdict.failure_class.value},{score:.6f},{path_len}"
    )
