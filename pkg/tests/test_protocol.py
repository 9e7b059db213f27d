import json

import pytest

from conftest import binomial_sigma
from otmlab.adversaries import BREIDBART, HONEST, AttackStrategy, adaptive_guess
from otmlab.errors import AlreadyConsumedError, BudgetExceededError
from otmlab.protocol import (
    REPORT_COLUMNS,
    IdealOTM,
    SimulatorState,
    distinguishing_experiment,
    honest_receiver_execute,
    ideal_execute,
    sender_create,
    simulator_answer,
)
from otmlab.rng import make_rng
from otmlab.token import replay_log


def test_ideal_otm_single_use():
    otm = IdealOTM(0, 1)
    assert ideal_execute(otm, 1) == 1
    with pytest.raises(AlreadyConsumedError):
        ideal_execute(otm, 0)
    assert otm.calls == 2


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_honest_round_trip(n):
    for t in range(200):
        rng = make_rng(1, n, t)
        s0, s1, b = (int(v) for v in rng.integers(0, 2, size=3))
        out = sender_create(s0, s1, n, rng)
        assert honest_receiver_execute(b, out, rng) == (s1 if b else s0)
        assert out.wrap.queries_used == 1
        assert replay_log(out.wrap)


def test_sender_key_uniform():
    trials = 40_000
    counts = {}
    for t in range(trials):
        key = sender_create(0, 0, 1, make_rng(6, t)).secret_key
        counts[(key.x, key.theta)] = counts.get((key.x, key.theta), 0) + 1
    assert len(counts) == 4
    for c in counts.values():
        assert abs(c / trials - 0.25) <= 3 * binomial_sigma(0.25, trials)


class TestSimulator:
    def make(self, s0=1, s1=0, n=3, budget=10):
        return SimulatorState.create(IdealOTM(s0, s1), n, make_rng(2), query_budget=budget)

    def test_case1(self):
        sim = self.make()
        x = sim.dummy_program.x
        assert simulator_answer(sim, x, 0) == 1
        assert simulator_answer(sim, x, 0) == 1
        assert sim.ideal.calls == 1 and not sim.case2

    def test_case2_flag_and_fallback(self):
        sim = self.make()
        x = sim.dummy_program.x
        simulator_answer(sim, x, 0)
        assert simulator_answer(sim, x, 1) == sim.fallback_bit == 0
        assert sim.case2 and sim.ideal.calls == 1

    def test_reject_does_not_consume(self):
        sim = self.make(n=3)
        prog = sim.dummy_program
        for b in (0, 1):
            checked = prog.checked_positions(b)
            if checked:
                y = list(prog.x)
                y[checked[0]] ^= 1
                assert simulator_answer(sim, y, b) is None
        assert sim.ideal.calls == 0 and sim.first_accept is None

    def test_budget(self):
        sim = self.make(budget=1)
        sim.run(sim.dummy_program.x, 0)
        with pytest.raises(BudgetExceededError):
            sim.run(sim.dummy_program.x, 0)


@pytest.mark.parametrize("n", range(1, 7))
def test_simulator_verdicts_match_token(n):
    from otmlab.quantum import all_bitstrings
    from otmlab.token import TokenProgram, verify_query

    rng = make_rng(14, n)
    for _ in range(3):
        sim = SimulatorState.create(IdealOTM(1, 1), n, rng, query_budget=1 << (n + 2))
        real = TokenProgram(1, 1, sim.dummy_program.x, sim.dummy_program.theta)
        for y in map(tuple, all_bitstrings(n)):
            for b in (0, 1):
                assert (simulator_answer(sim, y, b) is None) == (verify_query(real, y, b) is None)
        assert sim.ideal.calls <= 1


class TestExperiment:
    def test_honest_zero_advantage(self):
        rep = distinguishing_experiment(HONEST, 4, 2000, seed=3)
        assert rep.case2_frequency == 0.0
        assert rep.empirical_advantage <= 3 * rep.sigma
        assert rep.m == 1 and rep.verdict == "pass"

    def test_breidbart_case2(self):
        rep = distinguishing_experiment(BREIDBART, 3, 4000, seed=4)
        p = 0.8535533905932737 ** 3
        assert abs(rep.case2_frequency - p) <= 3 * binomial_sigma(p, 4000)
        assert rep.verdict == "pass"

    @pytest.mark.parametrize("name", ["honest", "naive-z", "breidbart", "adaptive-guess"])
    @pytest.mark.parametrize("n,m", [(4, 2), (6, 4)])
    def test_advantage_within_bound(self, name, n, m):
        from otmlab.adversaries import classical_strategy

        strategy = classical_strategy(name, m=m)
        budget = 1 if name == "honest" else m
        rep = distinguishing_experiment(strategy, n, 1500, seed=100 * n + m,
                                        m_budget=budget)
        assert rep.empirical_advantage <= rep.analytic_bound + 3 * rep.sigma
        assert rep.verdict == "pass"

    def test_deterministic(self):
        a = distinguishing_experiment(adaptive_guess(4), 3, 300, seed=5)
        b = distinguishing_experiment(adaptive_guess(4), 3, 300, seed=5)
        assert a == b
        assert a != distinguishing_experiment(adaptive_guess(4), 3, 300, seed=6)

    def test_fixed_secrets(self):
        rep = distinguishing_experiment(HONEST, 2, 100, seed=1, s0=1, s1=1)
        assert rep.config == {"s0": 1, "s1": 1}

    def test_superposition_adversary_refused(self):
        bad = AttackStrategy("coherent", lambda *a: None, superposition_model=True)
        with pytest.raises(TypeError):
            distinguishing_experiment(bad, 2, 1, seed=0)

    def test_report_formats(self):
        rep = distinguishing_experiment(HONEST, 2, 50, seed=1)
        d = json.loads(rep.to_json())
        assert set(REPORT_COLUMNS) <= set(d)
        header, row = rep.to_csv().strip().split("\n")
        assert header.split(",") == list(REPORT_COLUMNS)
        assert row.split(",")[4] == "honest"
