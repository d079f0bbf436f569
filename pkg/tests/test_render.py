import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planbeam import simgen
from planbeam.maze import Cell, GridMaze, bfs_shortest_path, generate_maze
from planbeam.render import (
    BoardGeometry,
    DEFAULT_OPTIONS,
    FrameMeta,
    FrameStack,
    background_diff_track,
    centroid_to_cell,
    detect_start_cell,
    dump_pgm,
    energy_to_csv,
    extract_trajectory,
    motion_energy,
    rasterize,
    track_goal,
)
from planbeam.search import default_frame_count


def small_maze() -> GridMaze:
    return GridMaze(4, frozenset({Cell(2, 2)}), Cell(0, 0), Cell(3, 3))


def render_path(maze, cells, **kwargs):
    return rasterize(maze, cells, default_frame_count(len(cells)), **kwargs)


class TestGeometry:
    def test_cell_dimensions(self):
        geom = BoardGeometry(0, 0, 400, 300, 4)
        assert geom.w_cell == 100 and geom.h_cell == 75

    def test_invalid(self):
        with pytest.raises(ValueError):
            BoardGeometry(0, 0, 0, 100, 4)
        with pytest.raises(ValueError):
            BoardGeometry(0, 0, 10, 10, 0)


class TestCentroidToCell:
    def test_direct_formula(self):
        geom = BoardGeometry(0, 0, 400, 400, 4)
        assert centroid_to_cell((150, 250), geom) == Cell(2, 1)

    def test_clamping(self):
        geom = BoardGeometry(0, 0, 400, 400, 4)
        assert centroid_to_cell((405, -3), geom) == Cell(0, 3)

    def test_origin(self):
        geom = BoardGeometry(0, 0, 400, 400, 4)
        assert centroid_to_cell((0, 0), geom) == Cell(0, 0)

    @settings(max_examples=200, deadline=None)
    @given(
        cx=st.floats(-50, 450, allow_nan=False),
        cy=st.floats(-50, 450, allow_nan=False),
    )
    def test_matches_floor_clamp_formula(self, cx, cy):
        import math

        geom = BoardGeometry(0, 0, 432, 432, 6)
        cell = centroid_to_cell((cx, cy), geom)
        col = min(max(math.floor(cx / 72), 0), 5)
        row = min(max(math.floor(cy / 72), 0), 5)
        assert cell == Cell(row, col)

    def test_idempotent_under_clamping(self):
        geom = BoardGeometry(0, 0, 96, 96, 4)
        cell = centroid_to_cell((1000.0, 1000.0), geom)
        center = (
            geom.x_min + (cell.col + 0.5) * geom.w_cell,
            geom.y_min + (cell.row + 0.5) * geom.h_cell,
        )
        assert centroid_to_cell(center, geom) == cell


class TestRasterize:
    def test_static_render_periodic_frames(self):
        m = small_maze()
        fs = rasterize(m, [m.start], 10)
        # only idle animations tick: frames two apart are identical
        for f in range(1, 8):
            assert np.array_equal(fs.frames[f], fs.frames[f + 2])
        assert fs.meta.agent_by_frame == ((m.start,),) * 10

    def test_agent_sprite_centroid_in_annotated_cell(self):
        m = generate_maze(4, 0.0, "norm", 1)
        path = bfs_shortest_path(m).cells
        fs = render_path(m, path)
        centroids = background_diff_track(fs)
        for f in range(1, fs.n_frames):
            assert centroids[f] is not None
            assert centroid_to_cell(centroids[f], fs.geometry) == fs.meta.agent_by_frame[f][0]

    def test_goal_drift_changes_meta(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(0, 1)], goal_drift=Cell(1, 3))
        assert fs.meta.goal_by_frame[0] == m.goal
        assert fs.meta.goal_by_frame[-1] == Cell(1, 3)
        assert track_goal(fs).drifted

    def test_no_drift_tracks_stable_goal(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(0, 1), Cell(0, 2)])
        track = track_goal(fs)
        assert not track.drifted
        assert track.first == m.goal

    def test_rejects_bad_inputs(self):
        m = small_maze()
        with pytest.raises(ValueError):
            rasterize(m, [m.start], 1)
        with pytest.raises(ValueError):
            rasterize(m, [], 10)
        with pytest.raises(ValueError):
            rasterize(m, [Cell(9, 0)], 10)

    def test_deterministic(self):
        m = generate_maze(5, 0.2, "norm", 3)
        path = bfs_shortest_path(m).cells
        a, b = render_path(m, path), render_path(m, path)
        assert np.array_equal(a.frames, b.frames)


class TestMotionEnergy:
    def test_identical_frames_zero_map(self):
        m = small_maze()
        base = rasterize(m, [m.start], 4).frames[0]
        fs = FrameStack(
            np.stack([base] * 5),
            BoardGeometry(0, 0, base.shape[1], base.shape[0], m.size),
            FrameMeta(((m.start,),) * 5, (m.goal,) * 5),
            m.goal,
        )
        energy = motion_energy(fs, mask_goal=True)
        assert not energy.values.any()

    def test_support_is_exactly_visited_cells(self):
        m = small_maze()
        fs = render_path(m, [Cell(0, 0), Cell(0, 1)])
        energy = motion_energy(fs, mask_goal=True)
        support = {tuple(idx) for idx in np.argwhere(energy.values > 0)}
        assert support == {(0, 0), (0, 1)}

    def test_goal_masking(self):
        m = small_maze()
        fs = render_path(m, [m.start])
        unmasked = motion_energy(fs, mask_goal=False)
        assert unmasked.values[m.goal.row, m.goal.col] > 0
        masked = motion_energy(fs, mask_goal=True)
        assert masked.values[m.goal.row, m.goal.col] == 0

    def test_path_energy_dominates_off_path(self):
        m = generate_maze(5, 0.0, "norm", 2)
        path = bfs_shortest_path(m).cells
        fs = render_path(m, path)
        energy = motion_energy(fs, mask_goal=True).values
        on_path = [energy[c.row, c.col] for c in path if c != m.goal]
        off_path = [
            energy[r, c]
            for r in range(5)
            for c in range(5)
            if Cell(r, c) not in path
        ]
        assert min(on_path) > max(off_path)


class TestTracking:
    def test_background_frame_absent(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(1, 0)])
        assert background_diff_track(fs)[0] is None

    def test_single_sprite_centroid_in_bbox(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(1, 0)])
        centroid = background_diff_track(fs)[-1]
        cp = DEFAULT_OPTIONS.cell_px
        assert cp * 1 <= centroid[1] <= cp * 2  # row 1 band
        assert 0 <= centroid[0] <= cp

    def test_largest_component_wins(self):
        # goal drift leaves two artifacts; the walking agent is larger
        m = small_maze()
        fs = render_path(m, [m.start, Cell(1, 0), Cell(2, 0)], goal_drift=Cell(0, 3))
        centroids = background_diff_track(fs)
        for f in range(1, fs.n_frames):
            cell = centroid_to_cell(centroids[f], fs.geometry)
            assert cell == fs.meta.agent_by_frame[f][0]

    def test_min_area_filters_small_components(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(0, 1)])
        huge = background_diff_track(fs, min_area=10_000)
        assert all(c is None for c in huge)


class TestExtraction:
    def test_round_trip_random_mazes(self):
        for seed in range(20):
            size = 4 + seed % 5
            m = generate_maze(size, 0.25, "vary" if seed % 2 else "norm", 600 + seed)
            path = bfs_shortest_path(m).cells
            fs = render_path(m, path)
            result = extract_trajectory(fs)
            assert result.cells == path
            assert not result.tracking_failed

    def test_static_render_single_cell_present(self):
        m = small_maze()
        result = extract_trajectory(rasterize(m, [m.start], 10))
        assert result.cells == (m.start,)
        assert not result.tracking_failed
        assert result.absent_fraction == 0.0

    def test_oscillation_preserved(self):
        m = small_maze()
        cells = [Cell(0, 0), Cell(0, 1)] * 3
        fs = render_path(m, cells)
        assert extract_trajectory(fs).cells == tuple(cells)

    def test_detect_start_cell(self):
        m = generate_maze(6, 0.3, "vary", 5)
        fs = render_path(m, [m.start, *bfs_shortest_path(m).cells[1:]])
        assert detect_start_cell(fs) == m.start

    def test_tracking_failure_flag(self):
        m = small_maze()
        fs = render_path(m, [m.start, Cell(0, 1)])
        # raise the threshold so the agent never qualifies after frame 0
        result = extract_trajectory(fs, intensity_threshold=250)
        assert result.tracking_failed
        assert result.cells == (m.start,)

    def test_spawn_does_not_hijack_extraction(self):
        m = generate_maze(8, 0.0, "norm", 1)
        cfg = simgen.GeneratorConfig(
            cheat_goal_drift_prob=0.0, cheat_spawn_prob=1.0, degenerate_prob=0.0
        )
        plan = simgen.sample_plan(m, 6, cfg)
        out = simgen.full_denoise(plan, cfg)
        fs = rasterize(
            m,
            out.prediction.trajectory,
            default_frame_count(len(out.prediction.trajectory)),
            spawn_fragment=out.spawn_fragment,
        )
        cells = extract_trajectory(fs).cells
        assert set(cells) <= set(plan.route)  # never jumps to the spawn


def test_energy_csv_and_pgm_dump(tmp_path):
    m = small_maze()
    fs = render_path(m, [m.start, Cell(0, 1)])
    energy = motion_energy(fs, mask_goal=True)
    csv_path = tmp_path / "energy.csv"
    energy_to_csv(energy, csv_path)
    assert len(csv_path.read_text().splitlines()) == m.size
    paths = dump_pgm(fs, tmp_path / "frames")
    assert len(paths) == fs.n_frames
    with open(paths[0], "rb") as fh:
        assert fh.read(2) == b"P5"
