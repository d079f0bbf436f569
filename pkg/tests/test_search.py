import pytest

from planbeam import simgen
from planbeam.maze import generate_maze, maze_id
from planbeam.search import (
    Budget,
    BudgetInfeasibleError,
    STATUS_COMPLETED,
    STATUS_DISCARDED,
    best_of_n,
    candidate_count,
    candidate_seed,
    epbs,
    pass_at_k,
)
from planbeam.verify import FailureClass, Verdict


def verdict(success: bool) -> Verdict:
    cls = FailureClass.NONE if success else FailureClass.HORIZON_WRONG_ROUTE
    return Verdict(success, cls, success)


class TestCandidateCount:
    @pytest.mark.parametrize(
        "nfe,steps,tau,beam,expected",
        [
            (400, 40, 5, 1, 73),
            (400, 40, 40, 2, 10),
            (120, 40, 5, 2, 10),
            (120, 40, 15, 2, 4),
        ],
    )
    def test_known_values(self, nfe, steps, tau, beam, expected):
        assert candidate_count(nfe, steps, tau, beam) == expected

    def test_infeasible_budget(self):
        with pytest.raises(BudgetInfeasibleError):
            candidate_count(79, 40, 5, 2)

    def test_budget_validation(self):
        with pytest.raises(BudgetInfeasibleError):
            Budget(nfe=39, tau=5, beam=1, steps=40)
        with pytest.raises(ValueError):
            Budget(nfe=400, tau=0, beam=1, steps=40)
        with pytest.raises(ValueError):
            Budget(nfe=400, tau=41, beam=1, steps=40)
        with pytest.raises(ValueError):
            Budget(nfe=400, tau=5, beam=0, steps=40)


class TestEpbs:
    def setup_method(self):
        self.cfg = simgen.GeneratorConfig()
        self.maze = generate_maze(4, 0.2, "norm", 3)

    def test_budget_ledger_exact(self):
        budget = Budget(nfe=130, tau=5, beam=2, steps=40)
        result = epbs(self.maze, self.cfg, budget, master_seed=1)
        n = candidate_count(130, 40, 5, 2)
        assert result.n_candidates == n
        assert result.total_nfe == n * 5 + 2 * 35
        assert result.total_nfe <= 130

    def test_record_statuses_and_costs(self):
        budget = Budget(nfe=120, tau=5, beam=2, steps=40)
        result = epbs(self.maze, self.cfg, budget, master_seed=1)
        completed = [r for r in result.records if r.status == STATUS_COMPLETED]
        discarded = [r for r in result.records if r.status == STATUS_DISCARDED]
        assert len(completed) == 2 and len(result.completed) == 2
        assert all(r.nfe_spent == 40 for r in completed)
        assert all(r.nfe_spent == 5 for r in discarded)

    def test_deterministic(self):
        budget = Budget(nfe=120, tau=5, beam=2, steps=40)
        a = epbs(self.maze, self.cfg, budget, master_seed=9)
        b = epbs(self.maze, self.cfg, budget, master_seed=9)
        assert a.to_json() == b.to_json()

    def test_best_has_top_final_score(self):
        budget = Budget(nfe=120, tau=5, beam=2, steps=40)
        result = epbs(self.maze, self.cfg, budget, master_seed=4)
        best = next(c for c in result.completed if c.index == result.best)
        assert all(best.final_score >= c.final_score for c in result.completed)

    def test_schedule_mismatch_rejected(self):
        budget = Budget(nfe=16, tau=2, beam=1, steps=8)
        with pytest.raises(ValueError):
            epbs(self.maze, self.cfg, budget, master_seed=0)

    def test_probe_overhead_accounting(self):
        budget = Budget(nfe=120, tau=5, beam=2, steps=40, probe_overhead=1.5)
        result = epbs(self.maze, self.cfg, budget, master_seed=1)
        assert result.wallclock_cost == result.total_nfe + 1.5 * result.n_candidates


class TestReduction:
    def test_epbs_at_full_tau_equals_best_of_n(self):
        cfg = simgen.GeneratorConfig()
        for seed in range(5):
            m = generate_maze(4, 0.3, "vary" if seed % 2 else "norm", 50 + seed)
            via_epbs = epbs(m, cfg, Budget(nfe=200, tau=40, beam=2, steps=40), seed)
            via_bon = best_of_n(m, cfg, 5, 2, seed)
            assert via_epbs.to_json() == via_bon.to_json()

    def test_shared_seed_pools(self):
        cfg = simgen.GeneratorConfig()
        m = generate_maze(6, 0.3, "norm", 12)
        mid = maze_id(m)
        e = epbs(m, cfg, Budget(nfe=400, tau=5, beam=2, steps=40), master_seed=5)
        b = best_of_n(m, cfg, 10, 2, master_seed=5)
        epbs_seeds = [r.seed for r in e.records]
        bon_seeds = [r.seed for r in b.records]
        assert bon_seeds == epbs_seeds[: len(bon_seeds)]
        assert bon_seeds[0] == candidate_seed(5, mid, 0)


class TestBestOfN:
    def test_single_generation(self):
        cfg = simgen.GeneratorConfig()
        m = generate_maze(4, 0.2, "norm", 3)
        result = best_of_n(m, cfg, 1, 1, master_seed=2)
        assert result.n_candidates == 1
        assert result.total_nfe == cfg.steps

    def test_nfe_is_n_times_schedule(self):
        cfg = simgen.GeneratorConfig()
        m = generate_maze(4, 0.2, "norm", 3)
        result = best_of_n(m, cfg, 7, 2, master_seed=2)
        assert result.total_nfe == 7 * cfg.steps

    def test_deterministic_walk_makes_beam_irrelevant(self):
        cfg = simgen.GeneratorConfig(
            goal_pull=1.0,
            avoid_prob=1.0,
            degenerate_prob=0.0,
            cheat_goal_drift_prob=0.0,
            cheat_spawn_prob=0.0,
            step_persistence=1.0,
            style_concentration=1e9,  # near-uniform styles: same greedy path
        )
        m = generate_maze(4, 0.0, "norm", 3)
        outcomes = []
        for beam in (1, 2, 3):
            result = best_of_n(m, cfg, 4, beam, master_seed=6)
            best = next(c for c in result.completed if c.index == result.best)
            outcomes.append((best.trajectory, best.verdict.success))
        assert outcomes[0] == outcomes[1] == outcomes[2]

    def test_requires_enough_seeds(self):
        cfg = simgen.GeneratorConfig()
        m = generate_maze(4, 0.2, "norm", 3)
        with pytest.raises(ValueError):
            best_of_n(m, cfg, 1, 2, master_seed=0)


class TestPassAtK:
    def test_all_success(self):
        assert pass_at_k([[verdict(True)], [verdict(True), verdict(False)]], 2) == 1.0

    def test_no_success(self):
        assert pass_at_k([[verdict(False)], [verdict(False)]], 1) == 0.0

    def test_counting(self):
        groups = [[verdict(i % 10 < 3)] for i in range(10)]
        assert pass_at_k(groups, 1) == pytest.approx(0.3)

    def test_validation(self):
        with pytest.raises(ValueError):
            pass_at_k([], 2)
        with pytest.raises(ValueError):
            pass_at_k([[verdict(True)] * 3], 2)


def test_pass_rate_non_decreasing_in_budget():
    """Statistical: more budget means more candidates, never fewer wins."""
    cfg = simgen.GeneratorConfig()
    budgets = (120, 280, 440)
    rates = []
    mazes = [
        generate_maze(6, (0.3, 0.4, 0.5)[i % 3], "vary" if i % 2 else "norm", 1500 + i)
        for i in range(25)
    ]
    for nfe in budgets:
        wins = 0
        for i, m in enumerate(mazes):
            result = epbs(m, cfg, Budget(nfe=nfe, tau=5, beam=2, steps=40), master_seed=60 + i)
            wins += any(c.verdict.success for c in result.completed)
        rates.append(wins / len(mazes))
    # least-squares slope of pass rate against budget
    import numpy as np

    slope = np.polyfit(budgets, rates, 1)[0]
    assert slope >= 0


def test_verifier_selection_close_to_pool_oracle():
    """On pools containing a winner, top-2 selection rarely misses it."""
    cfg = simgen.GeneratorConfig()
    pools_with_winner = 0
    top2_hits = 0
    for i in range(40):
        m = generate_maze(4, (0.2, 0.3, 0.4)[i % 3], "vary" if i % 2 else "norm", 1300 + i)
        result = epbs(m, cfg, Budget(nfe=10 * 40, tau=5, beam=10, steps=40), master_seed=i)
        successes = {c.index for c in result.completed if c.verdict.success}
        if not successes:
            continue
        pools_with_winner += 1
        ranked = sorted(result.completed, key=lambda c: (-c.probe_score, c.index))
        if successes & {c.index for c in ranked[:2]}:
            top2_hits += 1
    assert pools_with_winner >= 20
    assert top2_hits / pools_with_winner >= 0.95
