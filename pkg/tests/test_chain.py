import pytest

from planbeam import simgen
from planbeam.chain import (
    AlreadySolvedError,
    chain_solve,
    recondition,
    select_pivot,
    stitch,
    valid_prefix,
)
from planbeam.maze import Cell, GridMaze, bfs_shortest_path, generate_maze, manhattan
from planbeam.search import Budget, epbs
from planbeam.verify import FailureClass, Verdict

MAZE = GridMaze(6, frozenset({Cell(2, 2), Cell(3, 3)}), Cell(0, 0), Cell(5, 5))
OK = Verdict(True, FailureClass.NONE, True)
FAIL = Verdict(False, FailureClass.HORIZON_WRONG_ROUTE, False)


def path(*pairs):
    return tuple(Cell(r, c) for r, c in pairs)


class TestValidPrefix:
    def test_stops_before_obstacle(self):
        traj = path((0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (2, 3))
        assert valid_prefix(traj, MAZE) == path((0, 0), (1, 0), (2, 0), (2, 1))

    def test_stops_before_jump(self):
        traj = path((0, 0), (0, 1), (4, 4))
        assert valid_prefix(traj, MAZE) == path((0, 0), (0, 1))

    def test_truncates_at_goal(self):
        traj = path((0, 0), (0, 1)) + path((1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (5, 2), (5, 3), (5, 4), (5, 5), (5, 4))
        prefix = valid_prefix(traj, MAZE)
        assert prefix[-1] == MAZE.goal
        assert prefix == traj[:-1]


class TestSelectPivot:
    def test_picks_minimum_distance(self):
        completed = [
            (path((0, 0), (0, 1), (0, 2)), FAIL),  # dist 8
            (path((0, 0), (1, 0), (2, 0), (2, 1), (3, 1), (4, 1), (4, 2)), FAIL),  # dist 4
            (path((0, 0), (0, 1), (1, 1)), FAIL),  # dist 8
        ]
        assert select_pivot(completed, MAZE, MAZE.start) == Cell(4, 2)

    def test_none_when_no_progress(self):
        completed = [
            (path((0, 0)), FAIL),
            (path((0, 0), (2, 2)), FAIL),  # invalid: obstacle after jump-free prefix
        ]
        assert select_pivot(completed, MAZE, MAZE.start) is None

    def test_goal_reaching_candidate_wins(self):
        completed = [
            (path((0, 0), (0, 1), (0, 2)), FAIL),
            (
                path((0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (5, 1), (5, 2), (5, 3), (5, 4), (5, 5)),
                OK,
            ),
        ]
        assert select_pivot(completed, MAZE, MAZE.start) == MAZE.goal

    def test_violating_candidate_contributes_its_prefix(self):
        completed = [
            (path((0, 0), (1, 0), (2, 0), (2, 1), (2, 2)), FAIL),  # enters obstacle at end
        ]
        assert select_pivot(completed, MAZE, MAZE.start) == Cell(2, 1)

    def test_tie_broken_by_shorter_prefix(self):
        a = path((0, 0), (0, 1), (0, 2), (0, 3), (1, 3))  # dist 6, 5 cells
        b = path((0, 0), (1, 0), (3, 1))  # invalid jump; prefix dist 8
        c = path((0, 0), (1, 0), (2, 0), (3, 0))  # dist 7
        d = path((0, 0), (0, 1), (1, 1), (1, 2), (1, 3))  # dist 6, 5 cells (tie with a)
        assert select_pivot([(a, FAIL), (b, FAIL), (c, FAIL), (d, FAIL)], MAZE, MAZE.start) == Cell(1, 3)


class TestRecondition:
    def test_identity_on_original_start(self):
        assert recondition(MAZE, MAZE.start) == MAZE

    def test_moves_start(self):
        again = recondition(MAZE, Cell(4, 2))
        assert again.start == Cell(4, 2)
        assert again.obstacles == MAZE.obstacles and again.goal == MAZE.goal

    def test_goal_pivot_flagged_already_solved(self):
        with pytest.raises(AlreadySolvedError):
            recondition(MAZE, MAZE.goal)

    def test_obstacle_pivot_rejected(self):
        with pytest.raises(ValueError):
            recondition(MAZE, Cell(2, 2))

    def test_bfs_distance_strictly_decreases(self):
        for seed in range(10):
            m = generate_maze(8, 0.25, "norm", 700 + seed)
            base = bfs_shortest_path(m).moves
            mid = bfs_shortest_path(m).cells[base // 2]
            assert bfs_shortest_path(recondition(m, mid)).moves < base


class TestStitch:
    def test_drops_duplicated_pivot(self):
        seg1 = path((0, 0), (0, 1), (0, 2))
        seg2 = path((0, 2), (1, 2), (2, 2))
        assert stitch([seg1, seg2]) == path((0, 0), (0, 1), (0, 2), (1, 2), (2, 2))

    def test_stitched_chain_is_connected(self):
        cfg = simgen.GeneratorConfig()
        m = generate_maze(10, 0.0, "norm", 1)
        out = chain_solve(m, cfg, Budget(nfe=400, tau=5, beam=2, steps=40), master_seed=17)
        assert len(out.stitched) > 1
        for a, b in zip(out.stitched, out.stitched[1:]):
            assert manhattan(a, b) == 1
            assert a not in m.obstacles and b not in m.obstacles


class TestChainSolve:
    def setup_method(self):
        self.cfg = simgen.GeneratorConfig()
        self.budget = Budget(nfe=400, tau=5, beam=2, steps=40)

    def test_single_segment_matches_plain_search(self):
        m = generate_maze(4, 0.2, "norm", 3)  # solvable in one round
        out = chain_solve(m, self.cfg, self.budget, master_seed=11)
        plain = epbs(m, self.cfg, self.budget, master_seed=11)
        assert out.state.depth == 1
        assert out.verdict.success
        assert out.state.nfe_total == plain.total_nfe
        winner_trajs = [c.trajectory for c in plain.completed if c.verdict.success]
        assert out.stitched in [valid_prefix(t, m) for t in winner_trajs]

    def test_terminates_within_max_depth(self):
        m = generate_maze(10, 0.3, "norm", 5)
        out = chain_solve(m, self.cfg, self.budget, master_seed=2, max_depth=3)
        assert out.state.depth <= 3
        assert len(out.rounds) == out.state.depth

    def test_nfe_ledger(self):
        m = generate_maze(10, 0.2, "norm", 4)
        out = chain_solve(m, self.cfg, self.budget, master_seed=8)
        assert out.state.nfe_total == sum(r.round_nfe for r in out.rounds)
        assert out.state.nfe_total <= 3 * self.budget.nfe

    def test_progress_across_pivots(self):
        m = generate_maze(10, 0.2, "norm", 9)
        out = chain_solve(m, self.cfg, self.budget, master_seed=3)
        distances = [manhattan(m.start, m.goal)]
        for r in out.rounds:
            if r.pivot is not None:
                distances.append(manhattan(r.pivot, m.goal))
        assert all(a > b for a, b in zip(distances, distances[1:]))

    def test_long_empty_maze_solved_in_few_segments(self):
        m = generate_maze(10, 0.0, "norm", 1)  # 18 moves
        solved = 0
        segment_counts = []
        for seed in range(5):
            out = chain_solve(m, self.cfg, self.budget, master_seed=seed)
            if out.verdict.success:
                solved += 1
                segment_counts.append(len(out.state.segments))
        assert solved >= 4
        assert all(2 <= n <= 3 for n in segment_counts)

    def test_transcript_serializes(self):
        m = generate_maze(6, 0.2, "norm", 2)
        out = chain_solve(m, self.cfg, self.budget, master_seed=1)
        text = out.transcript()
        assert '"depth":1' in text
