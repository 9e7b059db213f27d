"""Honest OTM protocol, the ideal functionality, and the simulator.

``distinguishing_experiment`` runs an adversary in the real world (honest
sender plus wrapped token) and in the ideal world (simulator plus ideal OTM)
and measures how well a one-bit environment tells them apart. The environment
outputs 1 iff the adversary's guess for ``(s0, s1)`` is fully correct; bits the
adversary never extracted are guessed with a fair coin.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from math import sqrt
from typing import Optional

import numpy as np

from .adversaries import AttackStrategy
from .bounds import interactive_bound
from .errors import AlreadyConsumedError, BudgetExceededError
from .quantum import (
    BB84Key,
    Statevector,
    apply_hadamard_all,
    measure_computational,
    prepare_bb84,
)
from .rng import make_rng
from .token import (
    DEFAULT_QUERY_BUDGET,
    QueryAccess,
    TokenProgram,
    WrapInstance,
    verify_query,
    wrap_run,
)

REPORT_COLUMNS = (
    "seed",
    "n",
    "m",
    "trials",
    "adversary",
    "case2_frequency",
    "empirical_advantage",
    "analytic_bound",
    "verdict",
)


@dataclass
class IdealOTM:
    s0: int
    s1: int
    consumed: bool = False
    calls: int = 0


def ideal_execute(otm: IdealOTM, b: int) -> int:
    otm.calls += 1
    if otm.consumed:
        raise AlreadyConsumedError("this one-time memory has already been executed")
    otm.consumed = True
    return otm.s1 if b else otm.s0


@dataclass(frozen=True)
class SenderOutput:
    quantum_key: Statevector
    wrap: WrapInstance
    secret_key: BB84Key


def sender_create(
    s0: int, s1: int, n: int, rng: np.random.Generator, query_budget: int = DEFAULT_QUERY_BUDGET
) -> SenderOutput:
    """Pick a uniform key ``(x, theta)``, prepare ``|x>_theta`` and wrap the token."""
    key = BB84Key.random(n, rng)
    state = prepare_bb84(key)
    wrap = WrapInstance(TokenProgram.from_key(s0, s1, key), query_budget)
    return SenderOutput(state, wrap, key)


def honest_receiver_execute(b: int, out: SenderOutput, rng: np.random.Generator) -> Optional[int]:
    state = apply_hadamard_all(out.quantum_key) if b else out.quantum_key
    y, _ = measure_computational(state, rng)
    return wrap_run(out.wrap, y, b)


@dataclass
class SimulatorState:
    """Simulator that answers token queries using one call to the ideal OTM.

    Accept/reject verdicts come from a dummy program with ``s0 = s1 = 0`` and
    the simulator's own key. An accepting query for the second choice bit is a
    Case-2 event: it is flagged and answered with ``fallback_bit``.
    """

    dummy_program: TokenProgram
    ideal: IdealOTM
    first_accept: Optional[tuple[int, int]] = None
    case2: bool = False
    fallback_bit: int = 0
    query_budget: int = DEFAULT_QUERY_BUDGET
    queries_used: int = 0

    @classmethod
    def create(
        cls, ideal: IdealOTM, n: int, rng: np.random.Generator, query_budget: int = DEFAULT_QUERY_BUDGET
    ) -> "SimulatorState":
        return cls(TokenProgram.from_key(0, 0, BB84Key.random(n, rng)), ideal, query_budget=query_budget)

    @property
    def remaining(self) -> int:
        return self.query_budget - self.queries_used

    def run(self, y, b: int) -> Optional[int]:
        return simulator_answer(self, y, b)


def simulator_answer(sim: SimulatorState, y, b: int) -> Optional[int]:
    if sim.queries_used >= sim.query_budget:
        raise BudgetExceededError(f"query budget {sim.query_budget} exhausted")
    verdict = verify_query(sim.dummy_program, y, b)
    sim.queries_used += 1
    if verdict is None:
        return None
    if sim.first_accept is None:
        sim.first_accept = (b, ideal_execute(sim.ideal, b))
        return sim.first_accept[1]
    if sim.first_accept[0] == b:
        return sim.first_accept[1]
    sim.case2 = True
    return sim.fallback_bit


@dataclass(frozen=True)
class ExperimentReport:
    seed: int
    n: int
    m: int
    trials: int
    adversary: str
    case2_frequency: float
    empirical_advantage: float
    analytic_bound: float
    verdict: str
    real_frequency: float = 0.0
    ideal_frequency: float = 0.0
    sigma: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerow([getattr(self, c) for c in REPORT_COLUMNS])
        return buf.getvalue()


def _guess(extracted: dict, rng: np.random.Generator) -> tuple[int, int]:
    return tuple(
        int(extracted[b]) if extracted.get(b) is not None else int(rng.integers(0, 2))
        for b in (0, 1)
    )


def distinguishing_experiment(
    adversary: AttackStrategy,
    n: int,
    trials: int,
    seed: int,
    m_budget: Optional[int] = None,
    s0: Optional[int] = None,
    s1: Optional[int] = None,
) -> ExperimentReport:
    """Real-vs-ideal experiment for a classical-query adversary.

    Trial ``t`` draws its secrets from stream ``(seed, 2, t)`` and runs the
    real and ideal worlds on streams ``(seed, 0, t)`` and ``(seed, 1, t)``.
    Unfixed secrets are uniform. The verdict passes iff the advantage is at most
    the interactive bound plus three standard errors.
    """
    if adversary.superposition_model:
        raise TypeError("the token only answers classical queries")
    m = adversary.queries if m_budget is None else m_budget
    real_hits = ideal_hits = case2 = 0
    for t in range(trials):
        srng = make_rng(seed, 2, t)
        a = int(srng.integers(0, 2)) if s0 is None else s0
        c = int(srng.integers(0, 2)) if s1 is None else s1

        rng = make_rng(seed, 0, t)
        out = sender_create(a, c, n, rng, query_budget=m)
        res = adversary.run(out.quantum_key, QueryAccess(out.wrap, n), rng)
        real_hits += _guess(res.extracted, rng) == (a, c)

        rng = make_rng(seed, 1, t)
        sim = SimulatorState.create(IdealOTM(a, c), n, rng, query_budget=m)
        res = adversary.run(prepare_bb84(sim.dummy_program.key), QueryAccess(sim, n), rng)
        ideal_hits += _guess(res.extracted, rng) == (a, c)
        case2 += sim.case2
        if sim.ideal.calls > 1:
            raise AssertionError("simulator queried the ideal OTM twice")

    p_real, p_ideal = real_hits / trials, ideal_hits / trials
    adv = abs(p_real - p_ideal)
    sigma = sqrt((p_real * (1 - p_real) + p_ideal * (1 - p_ideal)) / trials)
    bound = interactive_bound(n, m)
    return ExperimentReport(
        seed=seed,
        n=n,
        m=m,
        trials=trials,
        adversary=adversary.name,
        case2_frequency=case2 / trials,
        empirical_advantage=adv,
        analytic_bound=bound,
        verdict="pass" if adv <= bound + 3 * sigma else "fail",
        real_frequency=p_real,
        ideal_frequency=p_ideal,
        sigma=sigma,
        config={"s0": s0, "s1": s1},
    )
