"""Grid-maze environments with a BFS ground-truth oracle.

Mazes are square grids of free and obstacle cells with a start and a goal.
Generation rejection-samples obstacle layouts until the maze is solvable,
so every emitted instance carries a BFS-reachable goal by construction.
Four diagnostic families (trivial, decoy, lake_heavy, detour) build
controlled structures around fixed templates plus seeded jitter.
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .rngutil import rng_from

VARIANTS = ("norm", "vary", "trivial", "decoy", "lake_heavy", "detour")

# Neighbor offsets in fixed tie-break order: up, down, left, right.
NEIGHBOR_ORDER = ((-1, 0), (1, 0), (0, -1), (0, 1))

MAX_GENERATION_RETRIES = 10_000


class GenerationError(Exception):
    """Raised when no satisfying maze is found within the retry bound."""


class Cell(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridMaze:
    """A square grid with obstacle cells, a start and a goal.

    ``density`` records the requested obstacle fraction over the G*G - 2
    placeable cells (start and goal can never hold obstacles). ``seed`` is
    the generation seed, kept so instances serialize reproducibly.
    """

    size: int
    obstacles: frozenset[Cell]
    start: Cell
    goal: Cell
    variant: str = "norm"
    density: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(f"grid size must be >= 2, got {self.size}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if not self.in_bounds(cell):
                raise ValueError(f"{name} {cell} out of bounds for size {self.size}")
        if self.start in self.obstacles or self.goal in self.obstacles:
            raise ValueError("start/goal cells cannot be obstacles")
        for cell in self.obstacles:
            if not self.in_bounds(cell):
                raise ValueError(f"obstacle {cell} out of bounds")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell.row < self.size and 0 <= cell.col < self.size

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.obstacles

    def with_start(self, start: Cell) -> "GridMaze":
        return replace(self, start=start)

    def obstacle_fraction(self) -> float:
        return len(self.obstacles) / (self.size * self.size - 2)


@dataclass(frozen=True)
class Path:
    cells: tuple[Cell, ...]

    @property
    def moves(self) -> int:
        return len(self.cells) - 1


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a.row - b.row) + abs(a.col - b.col)


def neighbors4(cell: Cell, size: int) -> list[Cell]:
    """In-bounds 4-neighbors in up/down/left/right order."""
    out = []
    for dr, dc in NEIGHBOR_ORDER:
        nxt = Cell(cell.row + dr, cell.col + dc)
        if 0 <= nxt.row < size and 0 <= nxt.col < size:
            out.append(nxt)
    return out


@lru_cache(maxsize=8192)
def bfs_distances(maze: GridMaze, source: Cell) -> np.ndarray:
    """Move distances from ``source`` over free cells; -1 where unreachable.

    The returned array is cached and read-only; copy before mutating.
    """
    dist = np.full((maze.size, maze.size), -1, dtype=np.int32)
    if not maze.is_free(source):
        return dist
    dist[source.row, source.col] = 0
    frontier = [source]
    while frontier:
        nxt_frontier = []
        for cur in frontier:
            d = dist[cur.row, cur.col] + 1
            for nxt in neighbors4(cur, maze.size):
                if dist[nxt.row, nxt.col] < 0 and nxt not in maze.obstacles:
                    dist[nxt.row, nxt.col] = d
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    dist.setflags(write=False)
    return dist


def bfs_shortest_path(maze: GridMaze) -> Path | None:
    """Deterministic shortest path from start to goal, or None.

    Ties between equal-length paths are broken by descending the
    distance-to-goal field in fixed up/down/left/right neighbor order, so
    the same maze always yields the same path.
    """
    if maze.start == maze.goal:
        return Path((maze.start,))
    dist = bfs_distances(maze, maze.goal)
    if dist[maze.start.row, maze.start.col] < 0:
        return None
    cells = [maze.start]
    cur = maze.start
    while cur != maze.goal:
        d = dist[cur.row, cur.col]
        for nxt in neighbors4(cur, maze.size):
            if dist[nxt.row, nxt.col] == d - 1:
                cur = nxt
                break
        cells.append(cur)
    return Path(tuple(cells))


def count_shortest_paths(maze: GridMaze) -> int:
    """Number of distinct shortest start-to-goal paths (0 if unreachable)."""
    dist = bfs_distances(maze, maze.start)
    if dist[maze.goal.row, maze.goal.col] < 0:
        return 0
    total = dist[maze.goal.row, maze.goal.col]
    counts = {maze.start: 1}
    # Process cells in increasing distance; each cell sums its predecessors.
    order = sorted(
        (Cell(int(r), int(c)) for r, c in zip(*np.nonzero(dist >= 0))),
        key=lambda cell: int(dist[cell.row, cell.col]),
    )
    for cell in order:
        if cell == maze.start:
            continue
        d = dist[cell.row, cell.col]
        if d > total:
            continue
        counts[cell] = sum(
            counts.get(prev, 0)
            for prev in neighbors4(cell, maze.size)
            if dist[prev.row, prev.col] == d - 1
        )
    return counts.get(maze.goal, 0)


def generate_maze(size: int, density: float, variant: str, seed: int) -> GridMaze:
    """Generate a solvable maze with the requested obstacle density.

    Obstacles are placed uniformly at random among non-start/non-goal
    cells and the layout is rejection-sampled until BFS-solvable, up to
    MAX_GENERATION_RETRIES attempts.
    """
    if size < 2:
        raise ValueError("size must be >= 2")
    if not 0.0 <= density <= 0.85:
        raise ValueError("density must be in [0, 0.85]")
    if variant not in ("norm", "vary"):
        raise ValueError("generate_maze supports only norm/vary variants")

    rng = rng_from(seed, size, int(round(density * 1_000_000)), VARIANTS.index(variant))
    start = Cell(0, 0)
    if variant == "norm":
        goal = Cell(size - 1, size - 1)
    else:
        flat = int(rng.integers(size * size - 1))  # skip index 0 == start
        goal = Cell((flat + 1) // size, (flat + 1) % size)

    placeable = [
        Cell(r, c)
        for r in range(size)
        for c in range(size)
        if Cell(r, c) not in (start, goal)
    ]
    n_obstacles = int(round(density * len(placeable)))

    for _ in range(MAX_GENERATION_RETRIES):
        picked = rng.choice(len(placeable), size=n_obstacles, replace=False)
        obstacles = frozenset(placeable[i] for i in picked)
        maze = GridMaze(size, obstacles, start, goal, variant, density, seed)
        if bfs_shortest_path(maze) is not None:
            return maze
    raise GenerationError(
        f"no solvable layout for size={size} density={density} variant={variant} "
        f"within {MAX_GENERATION_RETRIES} attempts"
    )


# ---------------------------------------------------------------------------
# Diagnostic families
# ---------------------------------------------------------------------------

_DIAGNOSTIC_RETRIES = 500


def generate_diagnostic(kind: str, size: int, seed: int) -> GridMaze:
    """Build one of the four controlled diagnostic mazes.

    trivial:    goal 1-2 moves from start, direct path clear.
    decoy:      goal 2 cells away in a straight line, midpoint blocked,
                forcing a 4-move detour.
    lake_heavy: a single free corridor, everything else obstacles
                (>75% obstacle fraction, exactly one shortest path).
    detour:     goal Manhattan-2 behind a wall; 8 moves at size 4,
                12 moves at size 6.
    """
    if size not in (4, 6):
        raise ValueError("diagnostic sizes are 4 and 6")
    builders = {
        "trivial": _build_trivial,
        "decoy": _build_decoy,
        "lake_heavy": _build_lake_heavy,
        "detour": _build_detour,
    }
    if kind not in builders:
        raise ValueError(f"unknown diagnostic kind {kind!r}")
    rng = rng_from(seed, size, 0xD1A6, list(builders).index(kind))
    for _ in range(_DIAGNOSTIC_RETRIES):
        maze = builders[kind](size, seed, rng)
        if maze is not None:
            return maze
    raise GenerationError(f"could not construct diagnostic {kind} at size {size}")


def _finish(size, obstacles, start, goal, kind, seed) -> GridMaze:
    density = len(obstacles) / (size * size - 2)
    return GridMaze(size, frozenset(obstacles), start, goal, kind, density, seed)


def _jitter_obstacles(rng, size, forbidden: set[Cell], count: int) -> set[Cell]:
    free = [
        Cell(r, c) for r in range(size) for c in range(size) if Cell(r, c) not in forbidden
    ]
    if not free or count <= 0:
        return set()
    count = min(count, len(free))
    picked = rng.choice(len(free), size=count, replace=False)
    return {free[i] for i in picked}


def _build_trivial(size: int, seed: int, rng) -> GridMaze | None:
    start = Cell(int(rng.integers(size)), int(rng.integers(size)))
    moves = int(rng.integers(1, 3))
    # Random straight hop of 1 or 2 cells kept in bounds.
    dirs = [d for d in NEIGHBOR_ORDER]
    rng.shuffle(dirs)
    for dr, dc in dirs:
        goal = Cell(start.row + dr * moves, start.col + dc * moves)
        if 0 <= goal.row < size and 0 <= goal.col < size:
            break
    else:
        return None
    path_cells = {Cell(start.row + dr * i, start.col + dc * i) for i in range(moves + 1)}
    extra = _jitter_obstacles(rng, size, path_cells, int(rng.integers(0, 3)))
    maze = _finish(size, extra, start, goal, "trivial", seed)
    sp = bfs_shortest_path(maze)
    if sp is not None and sp.moves in (1, 2):
        return maze
    return None


def _build_decoy(size: int, seed: int, rng) -> GridMaze | None:
    # Straight start->goal line with the midpoint blocked; both flanking
    # detours must stay open so BFS lands on a 4-move path.
    vertical = bool(rng.integers(2))
    if vertical:
        r0 = int(rng.integers(0, size - 2))
        c0 = int(rng.integers(1, size - 1))
        start, mid, goal = Cell(r0, c0), Cell(r0 + 1, c0), Cell(r0 + 2, c0)
    else:
        r0 = int(rng.integers(1, size - 1))
        c0 = int(rng.integers(0, size - 2))
        start, mid, goal = Cell(r0, c0), Cell(r0, c0 + 1), Cell(r0, c0 + 2)
    protected = set()
    for cell in (start, mid, goal):
        protected.add(cell)
        protected.update(neighbors4(cell, size))
    extra = _jitter_obstacles(rng, size, protected, int(rng.integers(0, 3)))
    maze = _finish(size, {mid} | extra, start, goal, "decoy", seed)
    sp = bfs_shortest_path(maze)
    if sp is not None and 4 <= sp.moves <= 5 and manhattan(start, goal) <= 2:
        return maze
    return None


_LAKE_CORRIDOR_CELLS = {4: 5, 6: 8}


def _build_lake_heavy(size: int, seed: int, rng) -> GridMaze | None:
    target = _LAKE_CORRIDOR_CELLS[size]
    corridor = _self_avoiding_corridor(rng, size, target)
    if corridor is None:
        corridor = _snake_corridor(size, target)
    all_cells = {Cell(r, c) for r in range(size) for c in range(size)}
    obstacles = all_cells - set(corridor)
    maze = _finish(size, obstacles, corridor[0], corridor[-1], "lake_heavy", seed)
    if maze.obstacle_fraction() <= 0.75:
        return None
    if count_shortest_paths(maze) != 1:
        return None
    return maze


def _self_avoiding_corridor(rng, size: int, n_cells: int) -> list[Cell] | None:
    """Corridor whose cells touch only their corridor predecessor/successor."""
    start = Cell(int(rng.integers(size)), int(rng.integers(size)))
    cells = [start]
    for _ in range(n_cells - 1):
        options = []
        for nxt in neighbors4(cells[-1], size):
            if nxt in cells:
                continue
            touched = sum(1 for prev in cells if manhattan(prev, nxt) == 1)
            if touched == 1:  # only the current corridor end
                options.append(nxt)
        if not options:
            return None
        cells.append(options[int(rng.integers(len(options)))])
    return cells


def _snake_corridor(size: int, n_cells: int) -> list[Cell]:
    cells = [Cell(0, 0)]
    r, c, dc = 0, 0, 1
    while len(cells) < n_cells:
        if 0 <= c + dc < size:
            c += dc
        else:
            r += 1
            dc = -dc
        cells.append(Cell(r, c))
    return cells


def _build_detour(size: int, seed: int, rng) -> GridMaze | None:
    # U-shaped wall between start and goal: the agent must walk to the far
    # side of the board and back, turning a Manhattan-2 hop into a long path.
    wall_row = size - 2
    wall = {Cell(wall_row, c) for c in range(size - 1)}
    start, goal = Cell(size - 1, 0), Cell(size - 3, 0)
    mirror = bool(rng.integers(2))
    if mirror:
        wall = {Cell(r, size - 1 - c) for r, c in wall}
        start, goal = Cell(size - 1, size - 1), Cell(size - 3, size - 1)
    # Jitter only in the far rows, away from the forced corridor.
    all_cells = {Cell(r, c) for r in range(size) for c in range(size)}
    far = {Cell(r, c) for r in range(0, size - 3) for c in range(size)}
    protected = (all_cells - far) | set(wall) | {start, goal}
    for cell in (start, goal):
        protected.update(neighbors4(cell, size))
    extra = _jitter_obstacles(rng, size, protected, int(rng.integers(0, 2)))
    maze = _finish(size, wall | extra, start, goal, "detour", seed)
    sp = bfs_shortest_path(maze)
    expected = 8 if size == 4 else 12
    if sp is not None and sp.moves == expected and manhattan(start, goal) == 2:
        return maze
    return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def maze_to_dict(maze: GridMaze) -> dict:
    """Canonical field-ordered dict (obstacles sorted row-major)."""
    return {
        "size": maze.size,
        "start": [maze.start.row, maze.start.col],
        "goal": [maze.goal.row, maze.goal.col],
        "obstacles": [[c.row, c.col] for c in sorted(maze.obstacles)],
        "variant": maze.variant,
        "density": maze.density,
        "seed": maze.seed,
    }


def maze_to_json(maze: GridMaze) -> str:
    return json.dumps(maze_to_dict(maze), separators=(",", ":"))


def maze_from_dict(data: dict) -> GridMaze:
    return GridMaze(
        size=int(data["size"]),
        obstacles=frozenset(Cell(r, c) for r, c in data["obstacles"]),
        start=Cell(*data["start"]),
        goal=Cell(*data["goal"]),
        variant=data["variant"],
        density=float(data["density"]),
        seed=int(data["seed"]),
    )


def maze_from_json(text: str) -> GridMaze:
    return maze_from_dict(json.loads(text))


@lru_cache(maxsize=65536)
def maze_id(maze: GridMaze) -> int:
    """Stable u64 identifier derived from the canonical serialization."""
    digest = hashlib.sha256(maze_to_json(maze).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def save_maze(maze: GridMaze, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(maze_to_json(maze) + "\n")


def load_maze(path) -> GridMaze:
    with open(path, encoding="utf-8") as fh:
        return maze_from_json(fh.read())


def write_corpus(mazes: Iterable[GridMaze], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for maze in mazes:
            fh.write(maze_to_json(maze) + "\n")


def read_corpus(path) -> list[GridMaze]:
    with open(path, encoding="utf-8") as fh:
        return [maze_from_json(line) for line in fh if line.strip()]
