"""Multi-round chaining: extend the planning horizon by reconditioning.

Each round runs a full search on the current sub-problem, picks the
completed candidate whose violation-free prefix ends closest to the goal
(requiring strict Manhattan progress), restarts the maze from that pivot
cell, and stitches the segment trajectories. The final verdict is judged
on the stitched trajectory against the original maze.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from . import search, verify
from .maze import Cell, GridMaze, manhattan
from .verify import Verdict


class AlreadySolvedError(ValueError):
    """Reconditioning onto the goal: there is nothing left to solve."""


MAX_DEPTH = 3


@dataclass(frozen=True)
class ChainState:
    current_start: Cell
    depth: int
    segments: tuple[tuple[Cell, ...], ...]
    nfe_total: int


@dataclass(frozen=True)
class RoundRecord:
    depth: int
    pivot: Cell | None
    segment: tuple[Cell, ...]
    round_nfe: int
    verdict: Verdict | None

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "pivot": None if self.pivot is None else [self.pivot.row, self.pivot.col],
            "segment": [[c.row, c.col] for c in self.segment],
            "round_nfe": self.round_nfe,
            "success": None if self.verdict is None else self.verdict.success,
            "failure_class": None if self.verdict is None else self.verdict.failure_class.value,
        }


@dataclass(frozen=True)
class ChainOutcome:
    state: ChainState
    verdict: Verdict
    stitched: tuple[Cell, ...]
    rounds: tuple[RoundRecord, ...]

    def transcript(self) -> str:
        return json.dumps([r.to_dict() for r in self.rounds], separators=(",", ":"))


def valid_prefix(traj: Sequence[Cell], maze: GridMaze) -> tuple[Cell, ...]:
    """Longest prefix ending before any violation, truncated at the goal.

    Violations are obstacle entries and non-adjacent transitions; the
    prefix always keeps at least the first cell.
    """
    cells: list[Cell] = []
    for cell in traj:
        if cells and cell == cells[-1]:
            continue
        if cells and manhattan(cells[-1], cell) != 1:
            break
        if not maze.is_free(cell):
            break
        cells.append(cell)
        if cell == maze.goal:
            break
    if not cells and traj:
        cells = [traj[0]]
    return tuple(cells)


def _pivot_detail(
    completed: Sequence[tuple[Sequence[Cell], Verdict]],
    maze: GridMaze,
    current_start: Cell,
) -> tuple[Cell, tuple[Cell, ...], int] | None:
    base = manhattan(current_start, maze.goal)
    best: tuple[int, int, int] | None = None
    best_prefix: tuple[Cell, ...] = ()
    for idx, (traj, _verdict) in enumerate(completed):
        prefix = valid_prefix(traj, maze)
        if not prefix:
            continue
        end = prefix[-1]
        dist = manhattan(end, maze.goal)
        if dist >= base:
            continue
        key = (dist, len(prefix), idx)
        if best is None or key < best:
            best = key
            best_prefix = prefix
    if best is None:
        return None
    return best_prefix[-1], best_prefix, best[2]


def select_pivot(
    completed: Sequence[tuple[Sequence[Cell], Verdict]],
    maze: GridMaze,
    current_start: Cell,
) -> Cell | None:
    """Final valid cell of the best goal-progressing candidate, or None.

    Candidates qualify when their violation-free prefix ends strictly
    closer to the goal than the current start; among those the closest
    wins, with ties broken by shorter prefix then lower candidate index.
    A None return means chaining should terminate.
    """
    detail = _pivot_detail(completed, maze, current_start)
    return None if detail is None else detail[0]


def recondition(maze: GridMaze, pivot: Cell) -> GridMaze:
    """Same maze restarted from the pivot cell."""
    if pivot in maze.obstacles:
        raise ValueError(f"pivot {pivot} is an obstacle cell")
    if pivot == maze.goal:
        raise AlreadySolvedError("pivot is the goal; nothing left to solve")
    return maze.with_start(pivot)


def stitch(segments: Sequence[Sequence[Cell]]) -> tuple[Cell, ...]:
    """Concatenate segments, dropping the duplicated pivot at each seam."""
    cells: list[Cell] = []
    for segment in segments:
        chunk = list(segment)
        if cells and chunk and chunk[0] == cells[-1]:
            chunk = chunk[1:]
        cells.extend(chunk)
    return tuple(cells)


def chain_solve(
    maze: GridMaze,
    cfg,
    budget: search.Budget,
    master_seed: int,
    max_depth: int = MAX_DEPTH,
) -> ChainOutcome:
    """Iterate search rounds from successive pivots, up to max_depth.

    Each round runs the full probe-and-complete search on the current
    sub-problem with the same master seed; pools still differ per round
    because candidate seeds derive from the (reconditioned) maze
    identity. A segment reaching the goal short-circuits the loop.
    """
    current = maze
    segments: list[tuple[Cell, ...]] = []
    rounds: list[RoundRecord] = []
    nfe_total = 0
    depth = 0
    solved = False

    while depth < max_depth:
        depth += 1
        result = search.epbs(current, cfg, budget, master_seed)
        nfe_total += result.total_nfe
        completed = [(c.trajectory, c.verdict) for c in result.completed]
        detail = _pivot_detail(completed, current, current.start)
        if detail is None:
            best_verdict = None
            if result.best is not None:
                best_verdict = next(
                    c.verdict for c in result.completed if c.index == result.best
                )
            rounds.append(RoundRecord(depth, None, (), result.total_nfe, best_verdict))
            break
        pivot, prefix, idx = detail
        segments.append(prefix)
        rounds.append(
            RoundRecord(depth, pivot, prefix, result.total_nfe, completed[idx][1])
        )
        if pivot == current.goal:
            solved = True
            break
        if depth < max_depth:
            current = recondition(current, pivot)

    stitched = stitch(segments)
    if stitched:
        verdict = verify.judge_success(stitched, maze)
    elif rounds and rounds[-1].verdict is not None:
        verdict = rounds[-1].verdict
    else:
        verdict = Verdict(False, verify.FailureClass.DEGENERATE_CORRUPT, False)

    state = ChainState(
        current_start=current.start if not solved else maze.goal,
        depth=depth,
        segments=tuple(segments),
        nfe_total=nfe_total,
    )
    return ChainOutcome(state, verdict, stitched, tuple(rounds))
