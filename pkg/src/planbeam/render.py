"""Synthetic frame rendering and pixel-level trajectory extraction.

The rasterizer turns a maze plus a cell trajectory into a stack of
grayscale frames; the extraction side recovers per-frame agent positions
by background differencing against frame 0 (the conditioning frame),
connected-component filtering, and centroid-to-cell mapping. Verification
and metrics operate on these pixels, never on the underlying plans.

Sprite geometry is chosen so that, at the default 24 px cell size, the
moving agent is always the largest changed component: the agent renders
as a small idle block in frame 0 and a larger walking block afterwards,
which keeps the vacated-start artifact strictly smaller than the agent
itself. The goal tile carries a small sparkle animation that stays below
the tracker's area filter but above the motion-energy threshold, so goal
masking has an observable effect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .maze import Cell, GridMaze

# Paper-scale extraction constants (480p-era defaults, exposed as knobs).
DIFF_THRESHOLD = 60
MIN_COMPONENT_AREA = 50


@dataclass(frozen=True)
class BoardGeometry:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    grid: int

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("geometry extents must be positive")
        if self.grid < 1:
            raise ValueError("grid must be >= 1")

    @property
    def w_cell(self) -> float:
        return (self.x_max - self.x_min) / self.grid

    @property
    def h_cell(self) -> float:
        return (self.y_max - self.y_min) / self.grid


@dataclass(frozen=True)
class RenderOptions:
    """Raster intensities and sprite sizes, all derived from cell_px.

    cell_px must stay >= 16 when the default threshold/min-area constants
    are in play, otherwise the walking sprite's pose ring drops below the
    component-area filter.
    """

    cell_px: int = 24
    background: int = 96
    obstacle: int = 32
    goal_base: int = 170
    goal_sparkle: int = 250
    agent: int = 255

    def __post_init__(self) -> None:
        if self.cell_px < 16 or self.cell_px % 2:
            raise ValueError("cell_px must be an even integer >= 16")

    @property
    def walking_px(self) -> int:
        return self.cell_px - 2

    @property
    def idle_px(self) -> int:
        # Kept well below the component-area filter so the vacated-start
        # artifact neither competes with the walking sprite nor dominates
        # the start cell's motion energy.
        return max(2, self.cell_px // 6)

    @property
    def goal_px(self) -> int:
        return 2 * self.cell_px // 3

    @property
    def sparkle_px(self) -> int:
        return self.cell_px // 4

    @property
    def spawn_px(self) -> int:
        return self.cell_px


DEFAULT_OPTIONS = RenderOptions()


@dataclass(frozen=True)
class FrameMeta:
    """Ground-truth per-frame annotations, retained for tests only."""

    agent_by_frame: tuple[tuple[Cell, ...], ...]
    goal_by_frame: tuple[Cell, ...]


@dataclass(frozen=True)
class FrameStack:
    frames: np.ndarray  # (F, H, W) uint8
    geometry: BoardGeometry
    meta: FrameMeta
    goal_cell: Cell  # conditioning-frame goal, visible to the verifier

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass(frozen=True)
class EnergyMap:
    values: np.ndarray  # (G, G) float64, non-negative

    def __post_init__(self) -> None:
        if np.any(self.values < 0):
            raise ValueError("energy values must be non-negative")


@dataclass(frozen=True)
class ExtractionResult:
    cells: tuple[Cell, ...]
    agent_by_frame: tuple[Cell | None, ...]
    absent_fraction: float
    tracking_failed: bool


def _blit(img: np.ndarray, cell: Cell, size_px: int, value: int, cell_px: int) -> None:
    off = (cell_px - size_px) // 2
    r0 = cell.row * cell_px + off
    c0 = cell.col * cell_px + off
    img[r0 : r0 + size_px, c0 : c0 + size_px] = value


# Discrete trajectory pacing: frames spent per visited cell, and the tail
# of frames where the agent idles at its final cell (as real fixed-length
# videos do after the motion ends).
FRAMES_PER_CELL = 2
TERMINAL_DWELL_FRAMES = 20


def _frame_positions(n_cells: int, n_frames: int, first_frame: int = 0) -> list[int]:
    """Cell index shown at each frame >= first_frame.

    The agent advances one cell every FRAMES_PER_CELL frames and then
    stays at the final cell; callers wanting the full trajectory rendered
    must provide at least FRAMES_PER_CELL * n_cells frames past
    first_frame.
    """
    return [
        min(n_cells - 1, (f - first_frame) // FRAMES_PER_CELL)
        for f in range(first_frame, n_frames)
    ]


def rasterize(
    maze: GridMaze,
    trajectory: list[Cell] | tuple[Cell, ...],
    n_frames: int,
    opts: RenderOptions = DEFAULT_OPTIONS,
    goal_drift: Cell | None = None,
    spawn_fragment: tuple[Cell, ...] = (),
) -> FrameStack:
    """Render a trajectory as a stack of grayscale frames.

    Frame 0 is the conditioning frame with the agent idle at the
    trajectory head. The agent then steps discretely along the trajectory
    across the remaining frames. A goal-drift cheat relocates the goal
    sprite from mid-stack onward; a spawn cheat introduces a second,
    larger agent sprite over the last third of the stack.
    """
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    if not trajectory:
        raise ValueError("trajectory must be non-empty")
    for cell in trajectory:
        if not maze.in_bounds(cell):
            raise ValueError(f"trajectory cell {cell} out of grid")
    if goal_drift is not None and not maze.in_bounds(goal_drift):
        raise ValueError("goal drift cell out of grid")

    cp = opts.cell_px
    side = maze.size * cp
    geometry = BoardGeometry(0.0, 0.0, float(side), float(side), maze.size)

    board = np.full((side, side), opts.background, dtype=np.uint8)
    for cell in maze.obstacles:
        _blit(board, cell, cp, opts.obstacle, cp)

    drift_frame = n_frames // 2
    spawn_frame = (2 * n_frames) // 3
    agent_pos = [trajectory[0]] + [
        trajectory[i] for i in _frame_positions(len(trajectory), n_frames, first_frame=1)
    ]
    spawn_pos: dict[int, Cell] = {}
    if spawn_fragment:
        for f, idx in zip(
            range(spawn_frame, n_frames),
            _frame_positions(len(spawn_fragment), n_frames, first_frame=spawn_frame),
        ):
            spawn_pos[f] = spawn_fragment[idx]

    frames = np.empty((n_frames, side, side), dtype=np.uint8)
    agent_meta = []
    goal_meta = []
    for f in range(n_frames):
        img = board.copy()
        goal_cell = maze.goal
        if goal_drift is not None and f >= drift_frame:
            goal_cell = goal_drift
        _blit(img, goal_cell, opts.goal_px, opts.goal_base, cp)
        if f % 2 == 1:
            _blit(img, goal_cell, opts.sparkle_px, opts.goal_sparkle, cp)
        cells_here = [agent_pos[f]]
        if f in spawn_pos:
            _blit(img, spawn_pos[f], opts.spawn_px, opts.agent, cp)
            cells_here.append(spawn_pos[f])
        _blit(img, agent_pos[f], opts.idle_px if f == 0 else opts.walking_px, opts.agent, cp)
        frames[f] = img
        agent_meta.append(tuple(cells_here))
        goal_meta.append(goal_cell)

    meta = FrameMeta(tuple(agent_meta), tuple(goal_meta))
    return FrameStack(frames, geometry, meta, maze.goal)


def motion_energy(fs: FrameStack, mask_goal: bool, threshold: int = DIFF_THRESHOLD) -> EnergyMap:
    """Per-cell count of pixels deviating from the conditioning frame.

    The goal cell is zeroed under masking to suppress its idle animation.
    """
    diff = np.abs(fs.frames.astype(np.int16) - fs.frames[0].astype(np.int16))
    changed = (diff > threshold).sum(axis=0)  # (H, W) counts over frames
    g = fs.geometry.grid
    cp = changed.shape[0] // g
    values = changed.reshape(g, cp, g, cp).sum(axis=(1, 3)).astype(np.float64)
    if mask_goal:
        values[fs.goal_cell.row, fs.goal_cell.col] = 0.0
    return EnergyMap(values)


def background_diff_track(
    fs: FrameStack,
    intensity_threshold: int = DIFF_THRESHOLD,
    min_area: int = MIN_COMPONENT_AREA,
) -> list[tuple[float, float] | None]:
    """Per-frame centroid of the largest changed component, else None.

    Components are 4-connected regions of the thresholded absolute
    difference against frame 0; regions below min_area are discarded.
    """
    base = fs.frames[0].astype(np.int16)
    out: list[tuple[float, float] | None] = []
    for f in range(fs.n_frames):
        mask = np.abs(fs.frames[f].astype(np.int16) - base) > intensity_threshold
        out.append(_largest_centroid(mask, min_area))
    return out


def _components(mask: np.ndarray, min_area: int) -> list[tuple[int, tuple[float, float]]]:
    """(area, centroid) of each 4-connected region with area >= min_area."""
    if not mask.any():
        return []
    labels, n = ndimage.label(mask)  # default structure = 4-connectivity
    if n == 0:
        return []
    areas = np.bincount(labels.ravel())[1:]
    out = []
    for idx in np.nonzero(areas >= min_area)[0]:
        rows, cols = np.nonzero(labels == idx + 1)
        # +0.5 shifts from pixel index to pixel-center coordinates.
        out.append((int(areas[idx]), (float(cols.mean()) + 0.5, float(rows.mean()) + 0.5)))
    return out


def _largest_centroid(mask: np.ndarray, min_area: int) -> tuple[float, float] | None:
    comps = _components(mask, min_area)
    if not comps:
        return None
    return max(comps, key=lambda c: c[0])[1]


def centroid_to_cell(centroid: tuple[float, float], geom: BoardGeometry) -> Cell:
    """Floor mapping of a pixel centroid to its grid cell, with clamping."""
    cx, cy = centroid
    col = math.floor((cx - geom.x_min) / geom.w_cell)
    row = math.floor((cy - geom.y_min) / geom.h_cell)
    row = min(max(row, 0), geom.grid - 1)
    col = min(max(col, 0), geom.grid - 1)
    return Cell(row, col)


def detect_start_cell(fs: FrameStack, opts: RenderOptions = DEFAULT_OPTIONS) -> Cell:
    """Recover the agent's start cell from the conditioning frame.

    The agent is the only sprite rendered at full intensity, so the
    largest max-intensity component in frame 0 is its idle pose. This
    mirrors a real pipeline initializing its tracker from the known
    start region of the conditioning image.
    """
    mask = fs.frames[0] == opts.agent
    centroid = _largest_centroid(mask, min_area=1)
    if centroid is None:
        raise ValueError("no agent sprite found in conditioning frame")
    return centroid_to_cell(centroid, fs.geometry)


def extract_trajectory(
    fs: FrameStack,
    intensity_threshold: int = DIFF_THRESHOLD,
    min_area: int = MIN_COMPONENT_AREA,
) -> ExtractionResult:
    """Ordered sequence of visited cells, consecutive repeats collapsed.

    Unlike the verifier's largest-component motion detector, extraction
    follows the agent continuously: each frame's position is the
    qualifying component closest to the previous one, initialized from
    the conditioning frame's start cell. A second sprite appearing
    elsewhere therefore never hijacks the track. Extraction is flagged
    degenerate when the agent is absent from more than half of the
    tracked frames.
    """
    start = detect_start_cell(fs)
    geom = fs.geometry
    prev = (
        geom.x_min + (start.col + 0.5) * geom.w_cell,
        geom.y_min + (start.row + 0.5) * geom.h_cell,
    )
    base = fs.frames[0].astype(np.int16)
    per_frame: list[Cell | None] = [start]
    absent = 0
    for f in range(1, fs.n_frames):
        mask = np.abs(fs.frames[f].astype(np.int16) - base) > intensity_threshold
        comps = _components(mask, min_area)
        if not comps:
            absent += 1
            per_frame.append(None)
            continue
        centroid = min(
            comps, key=lambda c: (c[1][0] - prev[0]) ** 2 + (c[1][1] - prev[1]) ** 2
        )[1]
        prev = centroid
        per_frame.append(centroid_to_cell(centroid, geom))
    tracked = fs.n_frames - 1
    absent_fraction = absent / tracked if tracked else 0.0

    cells: list[Cell] = []
    for cell in per_frame:
        if cell is not None and (not cells or cells[-1] != cell):
            cells.append(cell)
    return ExtractionResult(
        cells=tuple(cells),
        agent_by_frame=tuple(per_frame),
        absent_fraction=absent_fraction,
        tracking_failed=absent_fraction > 0.5,
    )


@dataclass(frozen=True)
class GoalTrack:
    """Per-frame goal positions recovered from the goal sprite's base tone."""

    by_frame: tuple[Cell | None, ...]
    first: Cell | None
    last: Cell | None

    @property
    def drifted(self) -> bool:
        return self.first is not None and self.last is not None and self.first != self.last


def track_goal(fs: FrameStack, opts: RenderOptions = DEFAULT_OPTIONS) -> GoalTrack:
    """Locate the goal sprite per frame to detect goal drift.

    The goal renders at a base intensity used by nothing else, so its
    largest same-intensity component per frame is the sprite (absent when
    the agent occludes it).
    """
    by_frame: list[Cell | None] = []
    for f in range(fs.n_frames):
        mask = fs.frames[f] == opts.goal_base
        centroid = _largest_centroid(mask, min_area=1)
        by_frame.append(None if centroid is None else centroid_to_cell(centroid, fs.geometry))
    present = [c for c in by_frame if c is not None]
    return GoalTrack(
        by_frame=tuple(by_frame),
        first=present[0] if present else None,
        last=present[-1] if present else None,
    )


def energy_to_csv(energy: EnergyMap, path) -> None:
    np.savetxt(path, energy.values, fmt="%.1f", delimiter=",")


def dump_pgm(fs: FrameStack, directory) -> list[str]:
    """Write frames as binary PGM files for visual debugging."""
    import os

    paths = []
    os.makedirs(directory, exist_ok=True)
    for f in range(fs.n_frames):
        path = os.path.join(str(directory), f"frame_{f:03d}.pgm")
        h, w = fs.frames[f].shape
        with open(path, "wb") as fh:
            fh.write(f"P5 {w} {h} 255\n".encode())
            fh.write(fs.frames[f].tobytes())
        paths.append(path)
    return paths
