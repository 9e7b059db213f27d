"""Attacks on one-time memories built from conjugate coding and stateless tokens.

Classical-model strategies receive the quantum key as a ``Statevector`` and the
token through ``QueryAccess`` (bitstring queries only). The rewinding attack is
the one superposition-model strategy and needs an explicit
``SuperpositionOracle``.

Each sampled attack also has a vectorized ``*_batch`` twin used for large
Monte Carlo runs. The twins exploit the product structure of BB84 keys and of
per-qubit measurements, sampling each qubit independently; tests check them
against the statevector path and against exact enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .errors import BudgetExceededError
from .quantum import (
    BB84Key,
    Statevector,
    apply_hadamard_all,
    apply_local,
    bb84_qubit,
    bits_to_index,
    index_to_bits,
    measure_computational,
    measure_in_rotated_basis,
    prepare_bb84,
    rotated_basis,
    sample_index,
)
from .token import (
    ANSWER_QUBITS,
    REJECT_SYMBOL,
    MAMemorySpec,
    QueryAccess,
    TokenProgram,
    acceptance_mask,
    oracle_unitary,
)

BREIDBART_ANGLE = np.pi / 8


@dataclass(frozen=True)
class AttackResult:
    extracted: dict
    queries_made: int
    both_accepted: bool
    keys: tuple = ()


@dataclass(frozen=True)
class AttackStrategy:
    """A named adversary ``run(key_state, access, rng) -> AttackResult``."""

    name: str
    run: Callable[..., AttackResult]
    queries: int = 2
    superposition_model: bool = False


class _Recorder:
    """Tracks which choice bits have been accepted and what they released."""

    def __init__(self, access: QueryAccess):
        self.access = access
        self.extracted: dict[int, Optional[int]] = {0: None, 1: None}
        self.keys: list = []

    def query(self, y, b: int) -> Optional[int]:
        out = self.access.query(y, b)
        self.keys.append((tuple(y), b))
        if out is not None and self.extracted[b] is None:
            self.extracted[b] = out
        return out

    def result(self) -> AttackResult:
        both = self.extracted[0] is not None and self.extracted[1] is not None
        return AttackResult(dict(self.extracted), self.access.queries_made, both, tuple(self.keys))


# --------------------------------------------------------------------------
# classical-query attacks on the conjugate-coding token
# --------------------------------------------------------------------------


def breidbart_attack(key_state: Statevector, access: QueryAccess, rng) -> AttackResult:
    """Measure every qubit at angle pi/8 and submit the outcome for both bits."""
    y, _ = measure_in_rotated_basis(key_state, [BREIDBART_ANGLE] * key_state.num_qubits, rng)
    rec = _Recorder(access)
    rec.query(y, 0)
    rec.query(y, 1)
    return rec.result()


def naive_z_attack(key_state: Statevector, access: QueryAccess, rng) -> AttackResult:
    y, _ = measure_computational(key_state, rng)
    rec = _Recorder(access)
    rec.query(y, 0)
    rec.query(y, 1)
    return rec.result()


def adaptive_guess_attack(key_state: Statevector, access: QueryAccess, m: int, rng) -> AttackResult:
    """Measure computationally, take ``s0``, then guess fresh strings for ``s1``.

    After ``(y, 0)`` and ``(y, 1)`` the remaining ``m - 2`` queries go to
    strings drawn uniformly from those not yet submitted for ``b = 1``. The
    diagonal positions of each guess are therefore uniform, which is all the
    token checks. Running out of budget truncates the attack.
    """
    n = key_state.num_qubits
    y, _ = measure_computational(key_state, rng)
    rec = _Recorder(access)
    seen = {y}
    try:
        rec.query(y, 0)
        rec.query(y, 1)
        while rec.extracted[1] is None and access.queries_made < m and len(seen) < (1 << n):
            while (z := index_to_bits(int(rng.integers(0, 1 << n)), n)) in seen:
                pass
            seen.add(z)
            rec.query(z, 1)
    except BudgetExceededError:
        pass
    return rec.result()


def honest_single_choice(key_state: Statevector, access: QueryAccess, rng) -> AttackResult:
    """Behave like the honest receiver for a uniformly random choice bit."""
    b = int(rng.integers(0, 2))
    state = apply_hadamard_all(key_state) if b else key_state
    y, _ = measure_computational(state, rng)
    rec = _Recorder(access)
    rec.query(y, b)
    return rec.result()


def adaptive_guess(m: int) -> AttackStrategy:
    if m < 2:
        raise ValueError("adaptive-guess needs at least two queries")
    return AttackStrategy("adaptive-guess", partial(_adaptive_run, m=m), queries=m)


def _adaptive_run(key_state, access, rng, m):
    return adaptive_guess_attack(key_state, access, m, rng)


BREIDBART = AttackStrategy("breidbart", breidbart_attack)
NAIVE_Z = AttackStrategy("naive-z", naive_z_attack)
HONEST = AttackStrategy("honest", honest_single_choice, queries=1)


def classical_strategy(name: str, m: int = 2) -> AttackStrategy:
    """Look up a classical-query strategy by its CLI identifier."""
    if name == "breidbart":
        return BREIDBART
    if name == "naive-z":
        return NAIVE_Z
    if name == "honest":
        return HONEST
    if name == "adaptive-guess":
        return adaptive_guess(m)
    raise KeyError(f"unknown classical strategy {name!r}")


# --------------------------------------------------------------------------
# vectorized Monte Carlo twins
# --------------------------------------------------------------------------


def sample_keys(trials: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    x = rng.integers(0, 2, size=(trials, n), dtype=np.int8)
    theta = rng.integers(0, 2, size=(trials, n), dtype=np.int8)
    return x, theta


def outcome_zero_table(angle: float) -> np.ndarray:
    """``P(outcome 0)`` for each one-qubit key state ``table[x, theta]``."""
    e0 = rotated_basis(angle)[0]
    return np.array(
        [[abs(e0 @ bb84_qubit(x, t)) ** 2 for t in (0, 1)] for x in (0, 1)]
    )


def product_measurement_batch(angle: float, n: int, trials: int, rng):
    """Random keys and per-qubit measurement outcomes at a common angle."""
    x, theta = sample_keys(trials, n, rng)
    p0 = outcome_zero_table(angle)[x, theta]
    y = (rng.random((trials, n)) >= p0).astype(np.int8)
    return x, theta, y


def token_accepts_batch(x, theta, y, b: int) -> np.ndarray:
    checked = theta == (1 if b else 0)
    return np.all((y == x) | ~checked, axis=1)


def breidbart_batch(n: int, trials: int, rng) -> np.ndarray:
    """Both-accept indicator per trial for the Breidbart attack."""
    x, theta, y = product_measurement_batch(BREIDBART_ANGLE, n, trials, rng)
    return token_accepts_batch(x, theta, y, 0) & token_accepts_batch(x, theta, y, 1)


def naive_z_batch(n: int, trials: int, rng) -> np.ndarray:
    x, theta, y = product_measurement_batch(0.0, n, trials, rng)
    return token_accepts_batch(x, theta, y, 0) & token_accepts_batch(x, theta, y, 1)


def _pack(bits: np.ndarray) -> np.ndarray:
    n = bits.shape[1]
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.int64)
    return bits.astype(np.int64) @ weights


def adaptive_guess_batch(n: int, m: int, trials: int, rng) -> np.ndarray:
    """Both-accept indicator per trial for the adaptive guessing attack."""
    if m < 2:
        raise ValueError("adaptive-guess needs at least two queries")
    x, theta, y = product_measurement_batch(0.0, n, trials, rng)
    both = token_accepts_batch(x, theta, y, 0) & token_accepts_batch(x, theta, y, 1)
    x_int, diag = _pack(x), _pack(theta)
    guesses = min(m - 2, (1 << n) - 1)
    seen = np.empty((trials, guesses + 1), dtype=np.int64)
    seen[:, 0] = _pack(y)
    for j in range(1, guesses + 1):
        active = ~both
        if not active.any():
            break
        cand = rng.integers(0, 1 << n, size=trials, dtype=np.int64)
        clash = active & (cand[:, None] == seen[:, :j]).any(axis=1)
        while clash.any():
            cand[clash] = rng.integers(0, 1 << n, size=int(clash.sum()), dtype=np.int64)
            clash = active & (cand[:, None] == seen[:, :j]).any(axis=1)
        seen[:, j] = cand
        both |= active & (((cand ^ x_int) & diag) == 0)
    return both


def exact_product_attack_success(angle: float, n: int) -> float:
    """Exact both-accept probability of measuring every qubit at ``angle``.

    Enumerates all ``4^n`` keys with full statevectors and token acceptance
    masks; no sampling.
    """
    rot = [rotated_basis(angle)] * n
    total = 0.0
    for k in range(4 ** n):
        x = index_to_bits(k >> n, n)
        theta = index_to_bits(k & ((1 << n) - 1), n)
        key = BB84Key(x, theta)
        probs = apply_local(prepare_bb84(key), rot).probabilities()
        program = TokenProgram.from_key(0, 0, key)
        both = acceptance_mask(program, 0) & acceptance_mask(program, 1)
        total += float(probs[both].sum())
    return total / 4 ** n


# --------------------------------------------------------------------------
# attacks on measure-and-access memories
# --------------------------------------------------------------------------


class SuperpositionOracle:
    """Coherent access ``|y>|c> -> |y>|c xor f(y)>`` to an MA memory's token."""

    def __init__(self, spec: MAMemorySpec):
        self.spec = spec
        self.unitary = oracle_unitary(spec)
        self.calls = 0

    def apply(self, tensor: np.ndarray) -> np.ndarray:
        """Act on a state tensor shaped ``(ancilla, query*answer, rest)``."""
        self.calls += 1
        return np.einsum("ij,ajr->air", self.unitary, tensor)


class ClassicalOracle:
    """Bitstring-only access to an MA memory's token; ``None`` means reject."""

    def __init__(self, spec: MAMemorySpec):
        self._spec = spec
        self.n = spec.n
        self.queries_made = 0

    def query(self, y) -> Optional[int]:
        self.queries_made += 1
        v = self._spec.evaluate(y)
        return None if v == REJECT_SYMBOL else v


@dataclass(frozen=True)
class RewindResult:
    bits: tuple[int, int]
    success_probability: float
    rewind_fidelity: float
    outcome_distribution: dict = field(default_factory=dict)


def rewind_attack_state(
    spec: MAMemorySpec, initial_state: Statevector, oracle: SuperpositionOracle, first: int = 0
) -> RewindResult:
    """Exact statevector run of the rewinding attack.

    Registers: work (ancilla+query), answer (flag, value), then two external
    bits receiving CNOT copies of the value bit after each honest run.
    """
    if not isinstance(oracle, SuperpositionOracle):
        raise TypeError("the rewinding attack needs a superposition-model oracle")
    a, n = spec.ancilla_qubits, spec.n
    work_dim, ans_dim = 1 << (a + n), 1 << ANSWER_QUBITS
    state = np.zeros((work_dim, ans_dim, 4), dtype=complex)
    state[:, 0, 0] = initial_state.amplitudes

    def honest(t, i, inverse=False):
        u = spec.honest_unitaries[i]
        if inverse:
            t = oracle.apply(t.reshape(1 << a, (1 << n) * ans_dim, 4)).reshape(work_dim, ans_dim, 4)
            return np.einsum("ij,jcr->icr", u.conj().T, t)
        t = np.einsum("ij,jcr->icr", u, t)
        return oracle.apply(t.reshape(1 << a, (1 << n) * ans_dim, 4)).reshape(work_dim, ans_dim, 4)

    def copy_value_bit(t, ext_bit):
        # CNOT: answer value bit (low bit of c) -> external bit ext_bit
        out = np.empty_like(t)
        for c in range(ans_dim):
            for r in range(4):
                target = r ^ ((c & 1) << (1 - ext_bit))
                out[:, c, target] = t[:, c, r]
        return out

    second = 1 - first
    state = honest(state, first)
    state = copy_value_bit(state, first)
    state = honest(state, first, inverse=True)
    rewound = np.linalg.norm(initial_state.amplitudes.conj() @ state[:, 0, :]) ** 2
    state = honest(state, second)
    state = copy_value_bit(state, second)

    ext = np.sum(np.abs(state) ** 2, axis=(0, 1))
    dist = {(r >> 1, r & 1): float(ext[r]) for r in range(4)}
    bits = max(dist, key=dist.get)
    truth = spec.secrets
    return RewindResult(bits, dist[truth], float(rewound), dist)


def rewinding_attack(spec: MAMemorySpec, initial_state: Statevector, oracle: SuperpositionOracle):
    """Recover ``(s0, s1)`` by running, copying and undoing the honest algorithm."""
    return rewind_attack_state(spec, initial_state, oracle).bits


def _measure_query_register(spec: MAMemorySpec, work: np.ndarray, rng):
    grid = work.reshape(1 << spec.ancilla_qubits, 1 << spec.n)
    p = np.sum(np.abs(grid) ** 2, axis=0)
    y = sample_index(p, rng)
    post = np.zeros_like(grid)
    post[:, y] = grid[:, y] / np.sqrt(p[y])
    return y, post.reshape(-1)


def bounded_key_attack(
    spec: MAMemorySpec, initial_state: Statevector, oracle: ClassicalOracle, rng
) -> AttackResult:
    """Measure-and-rewind attack against an MA memory with few keys per secret.

    Runs the honest ``U_0``, measures a key ``y'`` and spends it on the token,
    then applies ``U_0^dagger`` and ``U_1`` to the collapsed state and measures
    again for a second key.
    """
    u0, u1 = spec.honest_unitaries
    y0, post = _measure_query_register(spec, u0 @ initial_state.amplitudes, rng)
    key0 = index_to_bits(y0, spec.n)
    out0 = oracle.query(key0)
    y1, _ = _measure_query_register(spec, u1 @ (u0.conj().T @ post), rng)
    key1 = index_to_bits(y1, spec.n)
    out1 = oracle.query(key1)
    return AttackResult(
        {0: out0, 1: out1}, oracle.queries_made, out0 is not None and out1 is not None, (key0, key1)
    )


def bounded_key_success(spec: MAMemorySpec, result: AttackResult) -> bool:
    """Harness-side check that the two keys unlock ``s0`` and ``s1`` respectively."""
    k0, k1 = spec.key_sets
    return (
        len(result.keys) == 2
        and bits_to_index(result.keys[0]) in k0
        and bits_to_index(result.keys[1]) in k1
    )
