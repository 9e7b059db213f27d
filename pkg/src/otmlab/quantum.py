"""Dense finite-dimensional quantum mechanics for desk-scale registers.

Conventions
-----------
* Qubit 0 is the most significant bit of an amplitude index, so ``|01>`` is
  index 1 and ``kron(a, b)`` puts ``a`` on qubit 0.
* Basis labels: ``0`` is rectilinear (``+``, the Z basis ``{|0>, |1>}``) and
  ``1`` is diagonal (``x``, the X basis ``{|+>, |->}``).
* Tolerances: ``1e-12`` for normalization and Hermiticity, ``1e-10`` for
  spectral and positivity checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidSizeError

NORM_TOL = 1e-12
SPECTRAL_TOL = 1e-10
MAX_STATEVECTOR_QUBITS = 20
MAX_DENSITY_QUBITS = 6

RECTILINEAR = 0
DIAGONAL = 1
BASIS_CHARS = "+x"

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)

Bits = tuple[int, ...]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _num_qubits_for(dim: int) -> int:
    q = int(dim).bit_length() - 1
    if dim < 1 or (1 << q) != dim:
        raise InvalidSizeError(f"dimension {dim} is not a power of two")
    return q


def bits_to_str(bits: Iterable[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def str_to_bits(s: str) -> Bits:
    if any(ch not in "01" for ch in s):
        raise ValueError(f"not a bitstring: {s!r}")
    return tuple(int(ch) for ch in s)


def bits_to_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, n: int) -> Bits:
    return tuple((index >> (n - 1 - i)) & 1 for i in range(n))


def all_bitstrings(n: int) -> np.ndarray:
    """Rows are every ``n``-bit string in amplitude-index order."""
    idx = np.arange(1 << n)
    shifts = np.arange(n - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8)


@dataclass(frozen=True)
class BB84Key:
    """Classical description ``(x, theta)`` of a conjugate-coding key."""

    x: Bits
    theta: Bits

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(v) for v in self.x))
        object.__setattr__(self, "theta", tuple(int(v) for v in self.theta))
        if len(self.x) != len(self.theta):
            raise ValueError(f"|x|={len(self.x)} differs from |theta|={len(self.theta)}")
        if any(v not in (0, 1) for v in self.x + self.theta):
            raise ValueError("key entries must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def from_strings(cls, x: str, theta: str) -> "BB84Key":
        """Build a key from ``"0110"``-style bits and ``"+x+x"``-style bases."""
        if any(ch not in BASIS_CHARS for ch in theta):
            raise ValueError(f"basis string must use {BASIS_CHARS!r}: {theta!r}")
        return cls(str_to_bits(x), tuple(BASIS_CHARS.index(ch) for ch in theta))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BB84Key":
        x = rng.integers(0, 2, size=n)
        theta = rng.integers(0, 2, size=n)
        return cls(tuple(x.tolist()), tuple(theta.tolist()))

    @property
    def x_str(self) -> str:
        return bits_to_str(self.x)

    @property
    def theta_str(self) -> str:
        return "".join(BASIS_CHARS[t] for t in self.theta)


@dataclass(frozen=True)
class Statevector:
    """Normalized pure state of ``num_qubits`` qubits."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        _num_qubits_for(amps.size)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"statevector squared-norm {norm!r} is not 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return _num_qubits_for(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "Statevector":
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[bits_to_index(bits)] = 1.0
        return cls(amps)

    @classmethod
    def normalized(cls, amplitudes) -> "Statevector":
        a = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(a / np.linalg.norm(a))


@dataclass(frozen=True)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        _check_hermitian(m)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        _check_hermitian(m)
        if _num_qubits_for(m.shape[0]) > MAX_DENSITY_QUBITS:
            raise InvalidSizeError(
                f"density operators are limited to {MAX_DENSITY_QUBITS} qubits"
            )
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace {tr!r} is not 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -SPECTRAL_TOL:
            raise ValueError(f"minimum eigenvalue {lo!r} is negative")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_state(cls, state: Statevector) -> "DensityMatrix":
        return cls(state.projector())


def _as_matrix(op) -> np.ndarray:
    m = np.asarray(getattr(op, "matrix", op), dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_hermitian(m: np.ndarray, tol: float = NORM_TOL) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if err > tol:
        raise ValueError(f"operator is not Hermitian (max deviation {err:.3e})")


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    out = None
    for f in factors:
        f = np.asarray(f, dtype=complex)
        if out is None:
            out = f
        elif out.ndim == 1 and f.ndim == 1:
            out = (out[:, None] * f[None, :]).reshape(-1)
        else:
            out = np.kron(out, f)
    if out is None:
        raise ValueError("kron_all needs at least one factor")
    return out


def bb84_qubit(x: int, theta: int) -> np.ndarray:
    """Amplitudes of ``|x>_theta`` for one qubit."""
    v = np.zeros(2, dtype=complex)
    v[x] = 1.0
    return HADAMARD @ v if theta == DIAGONAL else v


def prepare_bb84(key: BB84Key, max_qubits: int = MAX_STATEVECTOR_QUBITS) -> Statevector:
    """Tensor product of the single-qubit conjugate-coding states of ``key``."""
    if key.n == 0 or key.n > max_qubits:
        raise InvalidSizeError(f"n={key.n} outside 1..{max_qubits}")
    return Statevector(kron_all(bb84_qubit(x, t) for x, t in zip(key.x, key.theta)))


def apply_single_qubit(state: Statevector, gate: np.ndarray, qubit: int) -> Statevector:
    n = state.num_qubits
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(np.tensordot(gate, psi, axes=([1], [qubit])), 0, qubit)
    return Statevector(psi.reshape(-1))


def apply_local(state: Statevector, gates: Sequence[np.ndarray]) -> Statevector:
    """Apply ``gates[i]`` to qubit ``i``."""
    if len(gates) != state.num_qubits:
        raise ValueError(f"need {state.num_qubits} gates, got {len(gates)}")
    psi = state.amplitudes
    for g in gates:
        # act on the leading qubit, then rotate it to the back
        psi = (np.asarray(g) @ psi.reshape(2, -1)).T.reshape(-1)
    return Statevector(psi)


def apply_hadamard_all(state: Statevector) -> Statevector:
    return apply_local(state, [HADAMARD] * state.num_qubits)


def apply_unitary(state: Statevector, unitary: np.ndarray) -> Statevector:
    return Statevector(np.asarray(unitary) @ state.amplitudes)


def rotated_basis(angle: float) -> np.ndarray:
    """Rows are the outcome-0 and outcome-1 vectors of the basis at ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def sample_index(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Draw index ``i`` with probability ``weights[i] / sum(weights)``."""
    cdf = np.cumsum(weights)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, weights.size - 1)


def measure_computational(state: Statevector, rng: np.random.Generator) -> tuple[Bits, Statevector]:
    """Sample ``y`` with probability ``|<y|psi>|^2`` and collapse onto ``|y>``."""
    idx = sample_index(state.probabilities(), rng)
    bits = index_to_bits(idx, state.num_qubits)
    return bits, Statevector.basis(bits)


def measure_in_rotated_basis(
    state: Statevector, angle_per_qubit: Sequence[float], rng: np.random.Generator
) -> tuple[Bits, Statevector]:
    """Measure qubit ``i`` in ``{cos a|0>+sin a|1>, -sin a|0>+cos a|1>}``.

    The post-measurement state is the product of the observed basis vectors,
    expressed in computational coordinates.
    """
    if len(angle_per_qubit) != state.num_qubits:
        raise ValueError(
            f"need one angle per qubit ({state.num_qubits}), got {len(angle_per_qubit)}"
        )
    bases = [rotated_basis(a) for a in angle_per_qubit]
    bits, _ = measure_computational(apply_local(state, bases), rng)
    post = kron_all(basis[o] for basis, o in zip(bases, bits))
    return bits, Statevector(post)


def partial_trace(op, keep: Iterable[int], num_qubits: int | None = None):
    """Trace out every qubit not listed in ``keep``.

    Returns the same wrapper type as ``op`` (``DensityMatrix`` or
    ``HermitianOperator``), or a bare array for array input.
    """
    m = _as_matrix(op)
    n = _num_qubits_for(m.shape[0]) if num_qubits is None else num_qubits
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep-set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"qubit indices {keep} outside 0..{n - 1}")
    drop = [q for q in range(n) if q not in keep]
    t = m.reshape((2,) * (2 * n))
    # move kept row axes, kept column axes, then dropped pairs to the end
    order = keep + [n + k for k in keep] + drop + [n + d for d in drop]
    t = np.transpose(t, order)
    dk, dd = 1 << len(keep), 1 << len(drop)
    out = np.trace(t.reshape(dk, dk, dd, dd), axis1=2, axis2=3)
    if isinstance(op, DensityMatrix):
        return DensityMatrix(out)
    if isinstance(op, HermitianOperator):
        return HermitianOperator(out)
    return out


def eig_hermitian(op) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
    m = _as_matrix(op)
    _check_hermitian(m)
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def min_eigenvalue(op) -> float:
    m = _as_matrix(op)
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def is_psd(op, tol: float = SPECTRAL_TOL) -> bool:
    return min_eigenvalue(op) >= -tol


def fidelity(a: Statevector, b: Statevector) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def permute_qubits(op, order: Sequence[int]) -> np.ndarray:
    """Reorder the qubits of an operator: new qubit ``i`` is old qubit ``order[i]``."""
    m = _as_matrix(op)
    n = _num_qubits_for(m.shape[0])
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of 0..{n - 1}")
    t = m.reshape((2,) * (2 * n))
    t = np.transpose(t, list(order) + [n + q for q in order])
    return t.reshape(m.shape)
