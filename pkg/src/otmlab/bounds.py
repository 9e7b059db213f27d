"""Security bounds and their semidefinite-programming certificates.

The non-interactive cheating problem for one BB84 qubit is an SDP over Choi
matrices ``X`` on (z-key, x-key, input):

    maximize   tr(X A')     subject to   tr_keys(X) = I,  X >= 0
    minimize   tr(Y)        subject to   I (x) Y >= A'

with ``A' = 1/4 sum_{b,c} |b><b| (x) |c><c| (x) V_{b,c}`` and
``V_{b,c} = |b><b| + H|c><c|H``. The primal witness measures in the Breidbart
basis and the dual witness is a scaled identity; both attain
``ALPHA = 1/2 + 1/(2 sqrt 2)``. Everything here is checked by direct linear
algebra, not by an SDP solver.

Register order for 8x8 operators is (z-key, x-key, input), matching the
reduced three-register space; ``embed_prefix`` restores the two constant
choice-bit prefix registers.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from .errors import WitnessVerificationError
from .quantum import (
    HADAMARD,
    SPECTRAL_TOL,
    HermitianOperator,
    eig_hermitian,
    kron_all,
    min_eigenvalue,
    partial_trace,
    permute_qubits,
    rotated_basis,
)

ALPHA = 0.5 + 1.0 / (2.0 * sqrt(2.0))

_KET = np.eye(2)


def _proj(bit: int) -> np.ndarray:
    return np.outer(_KET[bit], _KET[bit])


def v_bc(b: int, c: int) -> HermitianOperator:
    """``|b><b| + H|c><c|H``; eigenvalues ``1 +- 1/sqrt 2``."""
    return HermitianOperator(_proj(b) + HADAMARD @ _proj(c) @ HADAMARD)


def breidbart_states() -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of ``V_{0,0}`` for the large and small eigenvalue.

    Phases are fixed so the first nonzero entry is real and positive.
    """
    _, vecs = eig_hermitian(v_bc(0, 0))
    out = []
    for v in (vecs[:, 1], vecs[:, 0]):
        k = int(np.argmax(np.abs(v) > 1e-12))
        out.append(v * (abs(v[k]) / v[k]))
    return out[0], out[1]


def objective_a_prime() -> HermitianOperator:
    m = sum(
        kron_all([_proj(b), _proj(c), v_bc(b, c).matrix / 4.0])
        for b, c in itertools.product((0, 1), repeat=2)
    )
    return HermitianOperator(m)


def primal_witness() -> HermitianOperator:
    plus, minus = breidbart_states()
    ket00 = np.kron(_KET[0], _KET[0])
    ket11 = np.kron(_KET[1], _KET[1])
    x = np.kron(np.outer(ket00, ket00), np.outer(plus, plus.conj())) + np.kron(
        np.outer(ket11, ket11), np.outer(minus, minus.conj())
    )
    return HermitianOperator(x)


def dual_witness() -> HermitianOperator:
    return HermitianOperator((0.25 + 1.0 / (4.0 * sqrt(2.0))) * np.eye(2))


def embed_prefix(op) -> np.ndarray:
    """``|0><0|_1 (x) |1><1|_3 (x) op`` with ``op`` on registers 2, 4, 5."""
    m = np.asarray(getattr(op, "matrix", op))
    stacked = kron_all([_proj(0), _proj(1), m])  # registers 1, 3, 2, 4, 5
    return permute_qubits(stacked, [0, 2, 1, 3, 4])


# --------------------------------------------------------------------------
# block-diagonal operators over the key registers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KeyBlockOperator:
    """Operator ``sum_k |k><k| (x) B_k`` on (keys, inputs) for ``n`` qubit positions.

    ``blocks[k]`` is the ``2^n x 2^n`` input block for key label ``k``, where
    ``k`` interleaves (z-bit, x-bit) per position. All SDP operators here are of
    this form, so tensor powers stay cheap at ``n = 4`` (4096-dimensional).
    """

    n: int
    blocks: np.ndarray

    @classmethod
    def from_dense(cls, op) -> "KeyBlockOperator":
        m = np.asarray(getattr(op, "matrix", op), dtype=complex)
        if m.shape != (8, 8):
            raise ValueError("from_dense expects a single-position 8x8 operator")
        t = m.reshape(4, 2, 4, 2)
        off = t.copy()
        for k in range(4):
            off[k, :, k, :] = 0
        if np.max(np.abs(off)) > 1e-12:
            raise ValueError("operator is not block-diagonal in the key registers")
        return cls(1, np.stack([t[k, :, k, :] for k in range(4)]))

    def tensor(self, other: "KeyBlockOperator") -> "KeyBlockOperator":
        kb = np.einsum("aij,bkl->abikjl", self.blocks, other.blocks)
        d = self.blocks.shape[1] * other.blocks.shape[1]
        return KeyBlockOperator(self.n + other.n, kb.reshape(-1, d, d))

    def power(self, n: int) -> "KeyBlockOperator":
        out = self
        for _ in range(n - 1):
            out = out.tensor(self)
        return out

    def to_dense(self) -> np.ndarray:
        """Dense matrix in the per-position ordering (z_1, x_1, in_1, z_2, ...)."""
        n = self.n
        k, d = self.blocks.shape[0], self.blocks.shape[1]
        full = np.zeros((k * d, k * d), dtype=complex)
        for i in range(k):
            full[i * d:(i + 1) * d, i * d:(i + 1) * d] = self.blocks[i]
        # current qubit order: z_1, x_1, ..., z_n, x_n, in_1, ..., in_n
        order = []
        for p in range(n):
            order += [2 * p, 2 * p + 1, 2 * n + p]
        return permute_qubits(full, order)

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.blocks)[:, 0]))

    def trace_keys(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def inner(self, other: "KeyBlockOperator") -> float:
        return float(np.einsum("kij,kji->", self.blocks, other.blocks).real)


@dataclass(frozen=True)
class SdpWitnessPair:
    objective_a_prime: HermitianOperator
    primal_x_prime: HermitianOperator
    dual_y: HermitianOperator
    value: float
    primal_value: float
    dual_value: float
    constraints: tuple

    @property
    def duality_gap(self) -> float:
        return abs(self.primal_value - self.dual_value)


def witness_constraints(x_prime=None, y=None, tol: float = SPECTRAL_TOL) -> list[dict]:
    """Slack of every feasibility constraint for a single-qubit witness pair.

    Slack is the minimum eigenvalue for positivity constraints and minus the
    max-entry residual for equality constraints; a constraint holds iff
    ``slack >= -tol``. Dual per-block constraints come first.
    """
    x = (primal_witness() if x_prime is None else x_prime)
    y = (dual_witness() if y is None else y)
    xm = np.asarray(getattr(x, "matrix", x), dtype=complex)
    ym = np.asarray(getattr(y, "matrix", y), dtype=complex)
    a = objective_a_prime().matrix

    rows = []
    for b, c in itertools.product((0, 1), repeat=2):
        slack = min_eigenvalue(ym - v_bc(b, c).matrix / 4.0)
        rows.append({"name": f"dual: Y >= (1/4)V_{{{b},{c}}}", "slack": slack})
    rows.append({"name": "dual: I (x) Y >= A'", "slack": min_eigenvalue(np.kron(np.eye(4), ym) - a)})
    herm = float(np.max(np.abs(ym - ym.conj().T)))
    rows.append({"name": "dual: Y Hermitian", "slack": -herm})
    rows.append({"name": "primal: X >= 0", "slack": min_eigenvalue(xm)})
    tp = partial_trace(xm, keep=[2])
    rows.append({"name": "primal: Tr_QQ(X) = I", "slack": -float(np.max(np.abs(tp - np.eye(2))))})
    for r in rows:
        r["ok"] = bool(r["slack"] >= -tol)
    return rows


def verify_witness_pair(x_prime=None, y=None, tol: float = SPECTRAL_TOL) -> SdpWitnessPair:
    """Check feasibility of both witnesses and a zero duality gap.

    Raises ``WitnessVerificationError`` naming the first violated constraint.
    """
    x = primal_witness() if x_prime is None else x_prime
    yy = dual_witness() if y is None else y
    rows = witness_constraints(x, yy, tol)
    for r in rows:
        if not r["ok"]:
            raise WitnessVerificationError(r["name"], r["slack"])
    a = objective_a_prime()
    xm = np.asarray(getattr(x, "matrix", x), dtype=complex)
    ym = np.asarray(getattr(yy, "matrix", yy), dtype=complex)
    primal = float(np.trace(xm @ a.matrix).real)
    dual = float(np.trace(ym).real)
    gap = abs(primal - dual)
    if gap > tol:
        raise WitnessVerificationError("zero duality gap", -gap)
    return SdpWitnessPair(
        a, HermitianOperator(xm), HermitianOperator(ym), primal, primal, dual, tuple(rows)
    )


def tensor_witness_check(n: int, tol: float = SPECTRAL_TOL) -> dict:
    """Feasibility and values of ``X'^{(x)n}`` and ``Y^{(x)n}`` for ``n`` positions."""
    a = KeyBlockOperator.from_dense(objective_a_prime()).power(n)
    x = KeyBlockOperator.from_dense(primal_witness()).power(n)
    y = kron_all([dual_witness().matrix] * n)
    primal = x.inner(a)
    dual = float(np.trace(y).real)
    dual_slack = float(np.min(np.linalg.eigvalsh(y[None, :, :] - a.blocks)[:, 0]))
    tp = -float(np.max(np.abs(x.trace_keys() - np.eye(1 << n))))
    x_slack = x.min_eigenvalue()
    return {
        "n": n,
        "primal_value": primal,
        "dual_value": dual,
        "target": ALPHA ** n,
        "duality_gap": abs(primal - dual),
        "primal_psd_slack": x_slack,
        "primal_trace_residual": -tp,
        "dual_slack": dual_slack,
        "feasible": bool(x_slack >= -tol and tp >= -tol and dual_slack >= -tol),
    }


def sdp_certificate(tensor_n: int = 1, tol: float = SPECTRAL_TOL) -> dict:
    """JSON-ready certificate for the witness pair (and optional tensor powers)."""
    rows = witness_constraints(tol=tol)
    a = objective_a_prime().matrix
    primal = float(np.trace(primal_witness().matrix @ a).real)
    dual = float(np.trace(dual_witness().matrix).real)
    prefixed = float(np.trace(embed_prefix(primal_witness()) @ embed_prefix(objective_a_prime())).real)
    gap = abs(primal - dual)
    cert = {
        "constraints": rows,
        "primal_feasible": all(r["ok"] for r in rows if r["name"].startswith("primal")),
        "dual_feasible": all(r["ok"] for r in rows if r["name"].startswith("dual")),
        "primal_value": primal,
        "dual_value": dual,
        "prefixed_primal_value": prefixed,
        "duality_gap": gap,
        "value": primal,
        "expected_value": ALPHA,
        "tensor_powers": [tensor_witness_check(k, tol) for k in range(2, tensor_n + 1)],
    }
    cert["verdict"] = (
        "pass"
        if cert["primal_feasible"]
        and cert["dual_feasible"]
        and gap <= tol
        and abs(primal - ALPHA) <= tol
        and all(t["feasible"] and t["duality_gap"] <= tol for t in cert["tensor_powers"])
        else "fail"
    )
    return cert


# --------------------------------------------------------------------------
# closed-form bounds
# --------------------------------------------------------------------------


def noninteractive_bound(n: int) -> float:
    """Optimal probability of producing accepting keys for both bits with no queries."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return ALPHA ** n


def interactive_bound(n: int, m: int) -> float:
    """Upper bound on both-bit extraction with ``m`` adaptive queries, clamped to 1."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    return min(1.0, 2 * comb(m, 2) * ALPHA ** n)


def fixed_output_bound(m: int, g_size: int, p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be a probability")
    if g_size < 2 or m < 0:
        raise ValueError("need g_size >= 2 and m >= 0")
    return min(1.0, comb(m, 2) * g_size * (g_size - 1) * p)


# --------------------------------------------------------------------------
# Choi matrices and the achievability search
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChoiMatrix:
    """``J(Phi) = sum_ij Phi(|i><j|) (x) |i><j|`` with the output factor first."""

    in_dim: int
    out_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.in_dim * self.out_dim
        if m.shape != (d, d):
            raise ValueError(f"Choi matrix must be {d}x{d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def cp_slack(self) -> float:
        return min_eigenvalue(self.matrix)

    def tp_residual(self) -> float:
        t = self.matrix.reshape(self.out_dim, self.in_dim, self.out_dim, self.in_dim)
        return float(np.max(np.abs(np.einsum("aiaj->ij", t) - np.eye(self.in_dim))))

    def is_completely_positive(self, tol: float = SPECTRAL_TOL) -> bool:
        return self.cp_slack() >= -tol

    def is_trace_preserving(self, tol: float = SPECTRAL_TOL) -> bool:
        return self.tp_residual() <= tol

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """``Phi(rho) = sum_ij rho_ij Phi(|i><j|)``."""
        t = self.matrix.reshape(self.out_dim, self.in_dim, self.out_dim, self.in_dim)
        return np.einsum("aibj,ij->ab", t, np.asarray(rho))


def choi_from_kraus(kraus_ops, in_dim: int) -> ChoiMatrix:
    kraus_ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
    out_dim = kraus_ops[0].shape[0]
    j = np.zeros((out_dim * in_dim, out_dim * in_dim), dtype=complex)
    for k in kraus_ops:
        v = k.reshape(-1)  # sum_i K|i> (x) |i>, output index major
        j += np.outer(v, v.conj())
    return ChoiMatrix(in_dim, out_dim, j)


def key_guess_channel(angles, x_flip: int = 0) -> ChoiMatrix:
    """Measure each qubit at its angle and emit (z-key, x-key) guesses.

    Outcome ``o`` on qubit ``i`` writes ``z_i = o`` and ``x_i = o xor x_flip``.
    Output register order is (z_1, x_1, z_2, x_2, ...).
    """
    n = len(angles)
    bases = [rotated_basis(a) for a in angles]
    kraus = []
    for outcome in itertools.product((0, 1), repeat=n):
        bra = kron_all(basis[o] for basis, o in zip(bases, outcome)).conj()
        out = kron_all(np.kron(_KET[o], _KET[o ^ x_flip]) for o in outcome)
        kraus.append(np.outer(out, bra))
    return choi_from_kraus(kraus, 1 << n)


def choi_objective(choi: ChoiMatrix) -> float:
    """``tr(J A')`` for a single-qubit key-guessing channel."""
    return float(np.trace(choi.matrix @ objective_a_prime().matrix).real)


def search_values(angles: np.ndarray, x_flip: int) -> np.ndarray:
    """Average both-accept probability over the four one-qubit keys, per angle.

    Born-rule evaluation: a rectilinear key needs the z guess right (its
    diagonal check set is empty) and a diagonal key needs the x guess right.
    """
    angles = np.asarray(angles, dtype=float)
    e = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    basis = {0: e, 1: np.stack([-np.sin(angles), np.cos(angles)], axis=-1)}
    total = np.zeros_like(angles)
    for o in (0, 1):
        for key_bit in (0, 1):
            z_state = _KET[key_bit]
            x_state = HADAMARD @ _KET[key_bit]
            if o == key_bit:
                total += (basis[o] @ z_state) ** 2
            if o ^ x_flip == key_bit:
                total += (basis[o] @ x_state) ** 2
    return total / 4.0


def numeric_search_n1(grid_resolution: int = 10_000) -> tuple[float, float]:
    """Best both-accept probability over projective one-qubit measurements.

    Scans angles ``k*pi/grid_resolution`` for both outcome conventions and
    returns ``(best_value, best_angle)``, breaking ties toward the smaller angle.
    """
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be at least 8")
    angles = np.pi * np.arange(grid_resolution) / grid_resolution
    vals = np.maximum(search_values(angles, 0), search_values(angles, 1))
    best = float(vals.max())
    k = int(np.flatnonzero(vals >= best - 1e-12)[0])
    return best, float(angles[k])
