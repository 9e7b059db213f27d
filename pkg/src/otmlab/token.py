"""Stateless hardware tokens.

``TokenProgram`` is the classical verifier hard-coded into the token: on a
claimed measurement string ``y`` and choice bit ``b`` it checks the positions
encoded in the basis selected by ``b`` and releases ``s_b``. ``WrapInstance``
adds the query budget of the wrapping functionality. ``MAMemorySpec`` describes
a generic measure-and-access memory, used by the two impossibility attacks.

Rejection is represented by ``None`` throughout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import BudgetExceededError
from .quantum import (
    BASIS_CHARS,
    DIAGONAL,
    RECTILINEAR,
    BB84Key,
    Bits,
    Statevector,
    all_bitstrings,
    bits_to_index,
    bits_to_str,
    str_to_bits,
)

DEFAULT_QUERY_BUDGET = 1000
REJECT_SYMBOL = 2  # three-valued oracle output: 0, 1, or reject
ANSWER_QUBITS = 2  # (reject flag, value bit)


def _as_bits(y) -> Bits:
    if isinstance(y, str):
        return str_to_bits(y)
    if isinstance(y, np.ndarray) and (y.ndim != 1 or y.dtype.kind not in "biu"):
        raise TypeError("token queries must be classical bitstrings")
    if not all(isinstance(v, (int, np.integer)) for v in y):
        raise TypeError("token queries must be classical bitstrings")
    bits = tuple(int(v) for v in y)
    if any(v not in (0, 1) for v in bits):
        raise ValueError(f"query entries must be 0 or 1: {bits}")
    return bits


def _check_bit(b) -> int:
    if b not in (0, 1):
        raise ValueError(f"choice bit must be 0 or 1, got {b!r}")
    return int(b)


@dataclass(frozen=True)
class TokenProgram:
    """Hard-coded values ``(s0, s1, x, theta)`` of the token verifier."""

    s0: int
    s1: int
    x: Bits
    theta: Bits

    def __post_init__(self):
        _check_bit(self.s0)
        _check_bit(self.s1)
        object.__setattr__(self, "x", tuple(int(v) for v in self.x))
        object.__setattr__(self, "theta", tuple(int(v) for v in self.theta))
        if len(self.x) != len(self.theta):
            raise ValueError(f"|x|={len(self.x)} differs from |theta|={len(self.theta)}")

    @classmethod
    def from_key(cls, s0: int, s1: int, key: BB84Key) -> "TokenProgram":
        return cls(s0, s1, key.x, key.theta)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def key(self) -> BB84Key:
        return BB84Key(self.x, self.theta)

    def secret(self, b: int) -> int:
        return self.s1 if b else self.s0

    def checked_positions(self, b: int) -> tuple[int, ...]:
        basis = DIAGONAL if b else RECTILINEAR
        return tuple(i for i, t in enumerate(self.theta) if t == basis)

    def to_dict(self) -> dict:
        return {
            "s0": self.s0,
            "s1": self.s1,
            "x": bits_to_str(self.x),
            "theta": "".join(BASIS_CHARS[t] for t in self.theta),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenProgram":
        key = BB84Key.from_strings(d["x"], d["theta"])
        return cls(int(d["s0"]), int(d["s1"]), key.x, key.theta)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TokenProgram":
        return cls.from_dict(json.loads(text))


def verify_query(program: TokenProgram, y, b: int) -> Optional[int]:
    """Evaluate the token on ``(y, b)``: ``s_b`` on accept, ``None`` on reject.

    Raises ``ValueError`` if ``|y| != n``; a malformed query is not a reject.
    """
    y = _as_bits(y)
    b = _check_bit(b)
    if len(y) != program.n:
        raise ValueError(f"query length {len(y)} does not match n={program.n}")
    basis = DIAGONAL if b else RECTILINEAR
    for yi, xi, ti in zip(y, program.x, program.theta):
        if ti == basis and yi != xi:
            return None
    return program.secret(b)


def acceptance_mask(program: TokenProgram, b: int) -> np.ndarray:
    """Boolean acceptance of every ``y`` in amplitude-index order."""
    ys = all_bitstrings(program.n)
    basis = DIAGONAL if b else RECTILINEAR
    checked = np.asarray(program.theta) == basis
    x = np.asarray(program.x)
    return np.all((ys == x) | ~checked, axis=1)


@dataclass
class WrapInstance:
    """A token program behind a query budget, with a query log."""

    program: TokenProgram
    query_budget: int = DEFAULT_QUERY_BUDGET
    queries_used: int = 0
    log: list = field(default_factory=list)

    @property
    def remaining(self) -> int:
        return self.query_budget - self.queries_used

    def run(self, y, b: int) -> Optional[int]:
        return wrap_run(self, y, b)


def wrap_run(wrap: WrapInstance, y, b: int) -> Optional[int]:
    if wrap.queries_used >= wrap.query_budget:
        raise BudgetExceededError(f"query budget {wrap.query_budget} exhausted")
    y = _as_bits(y)
    out = verify_query(wrap.program, y, b)
    wrap.queries_used += 1
    wrap.log.append((y, int(b), out))
    return out


def replay_log(wrap: WrapInstance) -> bool:
    """True iff every logged verdict is reproduced by the bare program."""
    return all(verify_query(wrap.program, y, b) == out for y, b, out in wrap.log)


class QueryAccess:
    """Classical-only view of a token handed to adversaries.

    Wraps any backend with a ``run(y, b)`` method and exposes just ``query``;
    superposition queries are impossible through this interface because inputs
    are coerced to tuples of bits.
    """

    def __init__(self, backend, n: int):
        self._backend = backend
        self.n = n
        self.queries_made = 0

    def query(self, y, b: int) -> Optional[int]:
        y = _as_bits(y)
        out = self._backend.run(y, b)
        self.queries_made += 1
        return out

    @property
    def remaining(self) -> int:
        return self._backend.remaining


# --------------------------------------------------------------------------
# measure-and-access memories
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MAMemorySpec:
    """A measure-and-access memory with oracle ``f`` and honest unitaries.

    Register layout for statevectors: ``ancilla_qubits`` ancilla qubits, then
    the ``n``-qubit query register, then (for oracle calls) the two answer
    qubits ``(reject flag, value)``. ``honest_unitaries`` act on ancilla+query.
    ``f`` is a table over query indices with entries 0, 1 or ``REJECT_SYMBOL``.
    """

    n: int
    f: tuple
    key_sets: tuple
    delta: int
    honest_unitaries: tuple
    ancilla_qubits: int = 1

    def __post_init__(self):
        if len(self.f) != 1 << self.n:
            raise ValueError("f must list one output per query string")
        k0, k1 = (frozenset(int(k) for k in ks) for ks in self.key_sets)
        if k0 & k1:
            raise ValueError("key sets overlap")
        if max(len(k0), len(k1)) > self.delta:
            raise ValueError("a key set exceeds delta")
        object.__setattr__(self, "key_sets", (k0, k1))
        object.__setattr__(self, "f", tuple(int(v) for v in self.f))
        dim = 1 << (self.ancilla_qubits + self.n)
        us = []
        for u in self.honest_unitaries:
            u = np.array(u, dtype=complex)
            if u.shape != (dim, dim):
                raise ValueError(f"honest unitary must be {dim}x{dim}")
            u.setflags(write=False)
            us.append(u)
        object.__setattr__(self, "honest_unitaries", tuple(us))

    @property
    def secrets(self) -> tuple[int, int]:
        return tuple(self.f[min(ks)] for ks in self.key_sets)

    @property
    def work_qubits(self) -> int:
        return self.ancilla_qubits + self.n

    def evaluate(self, y) -> int:
        y = _as_bits(y)
        if len(y) != self.n:
            raise ValueError(f"query length {len(y)} does not match n={self.n}")
        return self.f[bits_to_index(y)]

    def to_dict(self) -> dict:
        def enc(u):
            return [[[float(z.real), float(z.imag)] for z in row] for row in u]

        return {
            "n": self.n,
            "ancilla_qubits": self.ancilla_qubits,
            "f": {bits_to_str(_bits(i, self.n)): ("reject" if v == REJECT_SYMBOL else v)
                  for i, v in enumerate(self.f)},
            "key_sets": [sorted(bits_to_str(_bits(k, self.n)) for k in ks) for ks in self.key_sets],
            "delta": self.delta,
            "honest_unitaries": [enc(u) for u in self.honest_unitaries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MAMemorySpec":
        n = int(d["n"])
        f = [REJECT_SYMBOL] * (1 << n)
        for y, v in d["f"].items():
            f[bits_to_index(str_to_bits(y))] = REJECT_SYMBOL if v == "reject" else int(v)
        key_sets = tuple(
            frozenset(bits_to_index(str_to_bits(y)) for y in ks) for ks in d["key_sets"]
        )
        us = tuple(
            np.array([[complex(re, im) for re, im in row] for row in u])
            for u in d["honest_unitaries"]
        )
        return cls(n, tuple(f), key_sets, int(d["delta"]), us, int(d["ancilla_qubits"]))


def _bits(i: int, n: int) -> Bits:
    return tuple((i >> (n - 1 - k)) & 1 for k in range(n))


def _encode_output(v: int) -> int:
    # answer register (flag, value): value v -> 0b0v, reject -> 0b10
    return 0b10 if v == REJECT_SYMBOL else v


def oracle_unitary(spec: Union[MAMemorySpec, Sequence[int]]) -> np.ndarray:
    """Permutation matrix ``|y>|c> -> |y>|c xor enc(f(y))>`` on query+answer.

    ``spec`` is an ``MAMemorySpec`` or a bare table of ``f`` outputs.
    """
    table = spec.f if isinstance(spec, MAMemorySpec) else tuple(int(v) for v in spec)
    n = len(table).bit_length() - 1
    if 1 << n != len(table):
        raise ValueError("f table length must be a power of two")
    dim = 1 << (n + ANSWER_QUBITS)
    u = np.zeros((dim, dim))
    for y, v in enumerate(table):
        e = _encode_output(v)
        for c in range(1 << ANSWER_QUBITS):
            u[(y << ANSWER_QUBITS) | (c ^ e), (y << ANSWER_QUBITS) | c] = 1.0
    return u


def _unitary_with_first_column(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    dim = v.size
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m[:, 0] = v
    q, _ = np.linalg.qr(m)
    q[:, 0] = v  # QR fixes column 0 only up to a phase
    return q


def make_toy_ma_memory(
    n: int,
    delta: int,
    rng: np.random.Generator,
    s0: Optional[int] = None,
    s1: Optional[int] = None,
    ancilla_qubits: int = 1,
) -> tuple[MAMemorySpec, Statevector]:
    """Random measure-and-access memory with exactly ``delta`` keys per secret.

    The initial state is Haar-random on ancilla+query, and ``U_i`` maps it to
    ``|0>_ancilla`` tensored with the uniform superposition over ``K_i``.
    """
    if n < 1 or delta < 1 or 2 * delta > (1 << n):
        raise ValueError(f"cannot place two disjoint key sets of size {delta} in {{0,1}}^{n}")
    s0 = int(rng.integers(0, 2)) if s0 is None else _check_bit(s0)
    s1 = int(rng.integers(0, 2)) if s1 is None else _check_bit(s1)
    keys = rng.choice(1 << n, size=2 * delta, replace=False)
    k0, k1 = frozenset(keys[:delta].tolist()), frozenset(keys[delta:].tolist())
    f = [REJECT_SYMBOL] * (1 << n)
    for k in k0:
        f[k] = s0
    for k in k1:
        f[k] = s1

    dim = 1 << (ancilla_qubits + n)
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    w_psi = _unitary_with_first_column(psi, rng)
    unitaries = []
    for ks in (k0, k1):
        target = np.zeros(dim, dtype=complex)
        target[sorted(ks)] = 1.0 / np.sqrt(delta)  # ancilla |0...0> occupies the low block
        unitaries.append(_unitary_with_first_column(target, rng) @ w_psi.conj().T)
    spec = MAMemorySpec(n, tuple(f), (k0, k1), delta, tuple(unitaries), ancilla_qubits)
    return spec, Statevector(psi)


def honest_key_distribution(spec: MAMemorySpec, state: Statevector, i: int) -> np.ndarray:
    """Distribution of the query-register outcome after the honest ``U_i``."""
    amps = spec.honest_unitaries[i] @ state.amplitudes
    probs = np.abs(amps.reshape(1 << spec.ancilla_qubits, 1 << spec.n)) ** 2
    return probs.sum(axis=0)
