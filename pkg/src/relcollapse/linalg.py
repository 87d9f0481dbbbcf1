"""Dense linear algebra over small labeled tensor-product Hilbert spaces.

Basis convention
----------------
Composite bases are ordered lexicographically with the *left* factor as the
most significant index, i.e. the amplitude of ``|i_0, i_1, ..., i_{n-1}>``
sits at ``np.ravel_multi_index((i_0, ..., i_{n-1}), factor_dims)``.  This is
the convention of ``np.kron`` and is used everywhere in the package.

Three-level probe factors are ordered ``(+1, 0, -1)``.  With that order the
cyclic permutation matrices ``P_L``/``P_R`` written in the usual matrix form
act as ``P_L|+1> = |0>``, ``P_L|0> = |-1>``, ``P_L|-1> = |+1>``.  Listing
the probe states as ``(-1, 0, +1)`` would swap the roles of the two
matrices.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

STRUCT_TOL = 1e-10
ALGEBRA_TOL = 1e-12

# density below which structural checks go through scipy.sparse
_SPARSE_DENSITY = 0.05


class DimensionError(ValueError):
    """Operands live on incompatible spaces."""


class MeasurementError(ValueError):
    """A projector family is not a complete orthogonal resolution."""


class OperatorKind(str, enum.Enum):
    GENERAL = "general"
    UNITARY = "unitary"
    HERMITIAN = "hermitian"
    PROJECTOR = "projector"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d <= 0 for d in dims):
        raise DimensionError(f"factor dimensions must be positive, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude vector over a tensor-product basis.

    ``basis_labels`` optionally names the basis states of each factor, e.g.
    ``(("up", "down"), ("+1", "0", "-1"))``.
    """

    amplitudes: np.ndarray
    factor_dims: tuple[int, ...]
    basis_labels: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        dims = _check_dims(self.factor_dims)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise DimensionError(
                f"{amps.size} amplitudes do not match factor dims {dims}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        labels = self.basis_labels
        if labels is not None:
            labels = tuple(tuple(str(s) for s in lab) for lab in labels)
            if tuple(len(lab) for lab in labels) != dims:
                raise DimensionError("basis labels do not match factor dims")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "basis_labels", labels)

    @classmethod
    def basis(cls, index: Sequence[int], factor_dims: Sequence[int], basis_labels=None) -> "StateVector":
        dims = _check_dims(factor_dims)
        amps = np.zeros(math.prod(dims), dtype=complex)
        amps[np.ravel_multi_index(tuple(index), dims)] = 1.0
        return cls(amps, dims, basis_labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self, tol: float = STRUCT_TOL) -> bool:
        return abs(self.norm() ** 2 - 1.0) <= tol

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return self._with(self.amplitudes / n)

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        if self.dim != other.dim:
            raise DimensionError(f"dimension {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self) -> np.ndarray:
        """Read-only view with one axis per factor."""
        return self.amplitudes.reshape(self.factor_dims)

    def amplitude(self, *index: int) -> complex:
        return complex(self.tensor()[index])

    def scaled(self, c: complex) -> "StateVector":
        return self._with(self.amplitudes * c)

    def _with(self, amps: np.ndarray) -> "StateVector":
        return StateVector(amps, self.factor_dims, self.basis_labels)

    def __add__(self, other: "StateVector") -> "StateVector":
        if self.factor_dims != other.factor_dims:
            raise DimensionError(f"{self.factor_dims} vs {other.factor_dims}")
        return self._with(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self + other.scaled(-1)

    def __mul__(self, c: complex) -> "StateVector":
        return self.scaled(c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateVector(dims={self.factor_dims}, norm={self.norm():.6g})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix over a tensor-product basis.

    The ``kind`` flag is verified at construction: unitaries must satisfy
    ``max|U^dag U - 1| <= 1e-10``, hermitian operators ``max|A - A^dag| <=
    1e-10`` and projectors additionally ``max|P^2 - P| <= 1e-10``.
    """

    entries: np.ndarray
    factor_dims: tuple[int, ...]
    kind: OperatorKind = OperatorKind.GENERAL

    def __post_init__(self):
        dims = _check_dims(self.factor_dims)
        m = np.array(self.entries, dtype=complex)
        d = math.prod(dims)
        if m.shape != (d, d):
            raise DimensionError(f"matrix shape {m.shape} does not match factor dims {dims}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        kind = OperatorKind(self.kind)
        object.__setattr__(self, "entries", _frozen(m))
        object.__setattr__(self, "factor_dims", dims)
        object.__setattr__(self, "kind", kind)
        if kind is OperatorKind.UNITARY and not is_unitary(self):
            raise ValueError("operator flagged unitary fails U^dag U = 1")
        if kind is OperatorKind.HERMITIAN and not is_hermitian(self):
            raise ValueError("operator flagged hermitian is not self-adjoint")
        if kind is OperatorKind.PROJECTOR and not is_projector(self):
            raise ValueError("operator flagged projector fails P^2 = P = P^dag")

    @classmethod
    def identity(cls, factor_dims: Sequence[int]) -> "Operator":
        dims = _check_dims(factor_dims)
        return cls(np.eye(math.prod(dims), dtype=complex), dims, OperatorKind.UNITARY)

    @classmethod
    def projector_onto(cls, state: StateVector) -> "Operator":
        v = state.normalized().amplitudes
        return cls(np.outer(v, v.conj()), state.factor_dims, OperatorKind.PROJECTOR)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dag(self) -> "Operator":
        return Operator(self.entries.conj().T, self.factor_dims, self.kind)

    def __matmul__(self, other):
        if isinstance(other, StateVector):
            return apply(self, other)
        if isinstance(other, Operator):
            if self.dim != other.dim:
                raise DimensionError(f"dimension {self.dim} vs {other.dim}")
            kind = (OperatorKind.UNITARY
                    if self.kind is other.kind is OperatorKind.UNITARY
                    else OperatorKind.GENERAL)
            return Operator(self.entries @ other.entries, self.factor_dims, kind)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise DimensionError(f"dimension {self.dim} vs {other.dim}")
        return Operator(self.entries + other.entries, self.factor_dims)

    def __sub__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise DimensionError(f"dimension {self.dim} vs {other.dim}")
        return Operator(self.entries - other.entries, self.factor_dims)

    def scaled(self, c: complex) -> "Operator":
        return Operator(self.entries * c, self.factor_dims)

    def __repr__(self):
        return f"Operator(dims={self.factor_dims}, kind={self.kind.value})"


def _as_matrix(op) -> np.ndarray:
    return op.entries if isinstance(op, Operator) else np.asarray(op, dtype=complex)


def _deviation(a, b) -> float:
    """max |a - b| for dense arrays or sparse matrices."""
    diff = a - b
    if sp.issparse(diff):
        diff = diff.tocoo()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return float(np.abs(diff).max()) if diff.size else 0.0


def _maybe_sparse(m: np.ndarray):
    nnz = np.count_nonzero(m)
    if m.shape[0] > 64 and nnz < _SPARSE_DENSITY * m.size:
        return sp.csr_matrix(m)
    return m


def is_unitary(op, tol: float = STRUCT_TOL) -> bool:
    """True iff ``max|U^dag U - 1| <= tol``."""
    m = _as_matrix(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"not a square matrix: {m.shape}")
    u = _maybe_sparse(m)
    eye = sp.identity(m.shape[0], dtype=complex, format="csr") if sp.issparse(u) else np.eye(m.shape[0])
    return _deviation(u.conj().T @ u, eye) <= tol


def is_hermitian(op, tol: float = STRUCT_TOL) -> bool:
    m = _as_matrix(op)
    return _deviation(m, m.conj().T) <= tol


def is_projector(op, tol: float = STRUCT_TOL) -> bool:
    m = _as_matrix(op)
    if not is_hermitian(m, tol):
        return False
    p = _maybe_sparse(m)
    return _deviation(p @ p, p) <= tol


def kron(a, b):
    """Tensor product of two states or two operators (left factor most significant)."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        labels = None
        if a.basis_labels is not None and b.basis_labels is not None:
            labels = a.basis_labels + b.basis_labels
        return StateVector(np.kron(a.amplitudes, b.amplitudes),
                           a.factor_dims + b.factor_dims, labels)
    if isinstance(a, Operator) and isinstance(b, Operator):
        kind = a.kind if a.kind is b.kind else OperatorKind.GENERAL
        return Operator(np.kron(a.entries, b.entries), a.factor_dims + b.factor_dims, kind)
    raise TypeError("kron needs two StateVectors or two Operators")


def kron_all(items):
    items = list(items)
    out = items[0]
    for it in items[1:]:
        out = kron(out, it)
    return out


def apply(op: Operator, s: StateVector) -> StateVector:
    """Exact matrix-vector product.  Normalization is not enforced."""
    if op.dim != s.dim:
        raise DimensionError(f"operator dimension {op.dim} vs state dimension {s.dim}")
    return StateVector(op.entries @ s.amplitudes, s.factor_dims, s.basis_labels)


def apply_local(gate, slots: Sequence[int], factor_dims: Sequence[int], array: np.ndarray) -> np.ndarray:
    """Left-multiply ``array`` by ``gate`` acting on the listed tensor slots.

    ``array`` is a state vector of shape ``(D,)`` or a batch of columns of
    shape ``(D, k)``; ``gate`` is the dense matrix on the product of the
    selected factors, in the order the slots are listed.
    """
    dims = tuple(factor_dims)
    slots = tuple(int(s) for s in slots)
    if len(set(slots)) != len(slots):
        raise DimensionError(f"repeated slot in {slots}")
    if any(s < 0 or s >= len(dims) for s in slots):
        raise DimensionError(f"slot out of range in {slots} for {len(dims)} factors")
    g = _as_matrix(gate)
    sub = math.prod(dims[s] for s in slots)
    if g.shape != (sub, sub):
        raise DimensionError(f"gate shape {g.shape} does not match slots {slots}")
    array = np.asarray(array)
    extra = array.shape[1:]
    t = array.reshape(dims + extra)
    front = tuple(range(len(slots)))
    t = np.moveaxis(t, slots, front)
    shape = t.shape
    t = (g @ t.reshape(sub, -1)).reshape(shape)
    t = np.moveaxis(t, front, slots)
    return np.ascontiguousarray(t).reshape(array.shape)


def embed(gate, slots: Sequence[int], factor_dims: Sequence[int], kind=OperatorKind.GENERAL) -> Operator:
    """Dense operator acting as ``gate`` on ``slots`` and identity elsewhere."""
    dims = _check_dims(factor_dims)
    eye = np.eye(math.prod(dims), dtype=complex)
    return Operator(apply_local(gate, slots, dims, eye), dims, kind)


def commutator_norm(a, b) -> float:
    ma, mb = _as_matrix(a), _as_matrix(b)
    return float(np.abs(ma @ mb - mb @ ma).max())


def equal_up_to_phase(a: StateVector, b: StateVector, tol: float = STRUCT_TOL) -> bool:
    """Amplitude-wise equality after removing one global phase."""
    x, y = a.amplitudes, b.amplitudes
    if x.shape != y.shape:
        return False
    k = int(np.argmax(np.abs(y)))
    if abs(y[k]) == 0.0:
        return bool(np.abs(x).max() <= tol)
    if abs(x[k]) == 0.0:
        return False
    phase = x[k] / y[k]
    phase /= abs(phase)
    return bool(np.abs(x - phase * y).max() <= tol)


def canonical_phase(amps: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate so the first non-negligible amplitude is real and positive."""
    amps = np.asarray(amps, dtype=complex)
    nz = np.flatnonzero(np.abs(amps) > tol)
    if nz.size == 0:
        return amps.copy()
    a = amps[nz[0]]
    return amps * (abs(a) / a)


@dataclass(frozen=True)
class MeasurementOutcome:
    outcome_index: int
    eigenvalue_label: object
    probability: float
    post_state: StateVector


def _validate_family(mats: list[np.ndarray], tol: float) -> None:
    d = mats[0].shape[0]
    total = np.zeros((d, d), dtype=complex)
    for i, p in enumerate(mats):
        if p.shape != (d, d):
            raise MeasurementError("projectors have different shapes")
        if not is_projector(p, tol):
            raise MeasurementError(f"element {i} is not an orthogonal projector")
        total += p
    if _deviation(total, np.eye(d)) > tol:
        raise MeasurementError("projectors do not sum to the identity")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if _deviation(mats[i] @ mats[j], 0.0) > tol:
                raise MeasurementError(f"projectors {i} and {j} are not orthogonal")


def outcome_probabilities(s: StateVector, projectors, slots: Sequence[int] | None = None) -> np.ndarray:
    """Born probabilities ``||P_k s||^2`` (no validation, no sampling)."""
    mats = [_as_matrix(p) for p in projectors]
    if slots is None:
        vecs = [m @ s.amplitudes for m in mats]
    else:
        vecs = [apply_local(m, slots, s.factor_dims, s.amplitudes) for m in mats]
    return np.array([float(np.vdot(v, v).real) for v in vecs])


def measure_projective(s: StateVector, projectors, rng: np.random.Generator,
                       slots: Sequence[int] | None = None,
                       labels: Sequence | None = None) -> MeasurementOutcome:
    """Sample one outcome of a projective measurement.

    ``projectors`` act on the whole space, or on the factors listed in
    ``slots`` when given.  The family must be complete and mutually
    orthogonal within 1e-10 and ``s`` must be normalized.  Exactly one
    uniform variate is drawn from ``rng`` per call.
    """
    mats = [_as_matrix(p) for p in projectors]
    if not mats:
        raise MeasurementError("empty projector family")
    _validate_family(mats, STRUCT_TOL)
    expected = s.dim if slots is None else math.prod(s.factor_dims[k] for k in slots)
    if mats[0].shape[0] != expected:
        raise DimensionError(f"projector dimension {mats[0].shape[0]} vs {expected}")
    if not s.is_normalized():
        raise ValueError("state must be normalized before measurement")
    if slots is None:
        images = [m @ s.amplitudes for m in mats]
    else:
        images = [apply_local(m, slots, s.factor_dims, s.amplitudes) for m in mats]
    probs = np.array([float(np.vdot(v, v).real) for v in images])
    k = sample_index(probs, rng)
    post = StateVector(images[k] / math.sqrt(probs[k]), s.factor_dims, s.basis_labels)
    label = labels[k] if labels is not None else k
    return MeasurementOutcome(k, label, float(probs[k]), post)


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a probability vector, skipping zero-weight entries."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    k = int(np.searchsorted(cdf, u, side="right"))
    k = min(k, len(probs) - 1)
    while probs[k] <= 0.0:  # guard against landing on a zero-width bin at the edge
        k -= 1
    return k


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    """PCG64 generator; ``rng.spawn(n)`` gives independent per-trial streams."""
    return np.random.Generator(np.random.PCG64(seed))


def common_eigenprojectors(ops: Sequence, tol: float = 1e-8) -> list[tuple[tuple[float, ...], np.ndarray]]:
    """Projectors onto the joint eigenspaces of mutually commuting hermitian operators.

    Returns ``(eigenvalue tuple, projector)`` pairs.  A generic real linear
    combination is diagonalized; its eigenvectors are then grouped by the
    eigenvalues of each operator.
    """
    mats = [_as_matrix(o) for o in ops]
    d = mats[0].shape[0]
    rng = np.random.default_rng(12345)
    combo = sum(c * m for c, m in zip(rng.uniform(0.5, 1.5, len(mats)), mats))
    _, vecs = np.linalg.eigh(combo)
    values = np.array([[float(np.vdot(v, m @ v).real) for m in mats] for v in vecs.T])
    groups: list[tuple[tuple[float, ...], list[int]]] = []
    for j in range(d):
        for key, members in groups:
            if np.allclose(values[j], key, atol=tol):
                members.append(j)
                break
        else:
            groups.append((tuple(values[j]), [j]))
    out = []
    for key, members in groups:
        v = vecs[:, members]
        out.append((tuple(round(x, 12) for x in key), v @ v.conj().T))
    return out
