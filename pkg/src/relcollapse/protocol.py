"""Local measurement of the nonlocal observables T_z and T^2.

Two isospin-1/2 particles (slots ``"1"``, ``"2"``) interact locally with
entangled pairs of three-level probes.  Each pair starts in

    |Phi> = (|0,0> + |+1,-1> + |-1,+1>) / sqrt(3),

and the coupling of particle ``j`` with probe ``p`` is the controlled cyclic
permutation ``P_+^(j) P_L^(p) + P_-^(j) P_R^(p)`` with ``P_+/-`` the
eigenprojectors of the chosen isospin component.  Reading the probes and
summing their eigenvalues pairwise reveals T_z (one pair) or T^2 (three
pairs, z then y then z).

Tensor slot order for the full T^2 set-up is frozen as
``("1", "2", "3", "6", "2*", "4*", "3*", "6*")``; the T_z set-up uses the
first four slots only.  The y eigenstates use ``|+/-y> = (|up> +/- i|down>)/sqrt(2)``.
"""
from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .linalg import (DimensionError, Operator, OperatorKind, StateVector,
                     apply_local, kron, kron_all, measure_projective)

SQ2 = math.sqrt(2.0)
SQ3 = math.sqrt(3.0)

PROBE_VALUES = (+1, 0, -1)
PROBE_LABELS = ("+1", "0", "-1")
SPIN_LABELS = ("up", "down")

T2_SLOTS = ("1", "2", "3", "6", "2*", "4*", "3*", "6*")
TZ_SLOTS = T2_SLOTS[:4]
PAIRS = (("3", "6"), ("2*", "4*"), ("3*", "6*"))
T2_OMEGA_ORDER = ("3", "6", "2*", "4*", "3*", "6*")


def _dims(slots: Sequence[str]) -> tuple[int, ...]:
    return tuple(2 if s in ("1", "2") else 3 for s in slots)


def _labels(slots: Sequence[str]):
    return tuple(SPIN_LABELS if s in ("1", "2") else PROBE_LABELS for s in slots)


def probe_index(value: int) -> int:
    return PROBE_VALUES.index(int(value))


# cyclic permutations of the probe basis, written in the (+1, 0, -1) basis
P_L = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=complex)
P_R = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=complex)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
Y_PLUS = (UP + 1j * DOWN) / SQ2
Y_MINUS = (UP - 1j * DOWN) / SQ2


def _proj(v):
    return np.outer(v, v.conj())


SPIN_PROJECTORS = {
    "z": (_proj(UP), _proj(DOWN)),
    "y": (_proj(Y_PLUS), _proj(Y_MINUS)),
}

# probe eigenprojectors for Omega, ordered like PROBE_VALUES
OMEGA_PROJECTORS = tuple(np.diag(np.eye(3)[k]).astype(complex) for k in range(3))


def _pair_ket(a: int, b: int) -> np.ndarray:
    v = np.zeros(9, dtype=complex)
    v[3 * probe_index(a) + probe_index(b)] = 1.0
    return v


def _pair_state(terms) -> StateVector:
    amps = sum(_pair_ket(a, b) for a, b in terms) / SQ3
    return StateVector(amps, (3, 3), (PROBE_LABELS, PROBE_LABELS))


def probe_pair_state(pair_id=("3", "6")) -> StateVector:
    """The entangled probe-pair state ``(|0,0> + |+1,-1> + |-1,+1>)/sqrt(3)``."""
    if tuple(pair_id) not in PAIRS:
        raise ValueError(f"unknown probe pair {pair_id!r}; expected one of {PAIRS}")
    return _pair_state([(0, 0), (1, -1), (-1, 1)])


PHI = probe_pair_state()
# pair states whose eigenvalue sums are {1, -2} and {2, -1}
PI_1_M2 = _pair_state([(-1, -1), (0, 1), (1, 0)])
PI_2_M1 = _pair_state([(1, 1), (0, -1), (-1, 0)])


def system_state(alpha=0.0, beta=0.0, gamma=0.0, delta=0.0, normalize=True) -> StateVector:
    """``alpha|up,up> + beta|up,down> + gamma|down,up> + delta|down,down>``."""
    s = StateVector([alpha, beta, gamma, delta], (2, 2), (SPIN_LABELS, SPIN_LABELS))
    return s.normalized() if normalize else s


UP_UP = system_state(1, 0, 0, 0)
UP_DOWN = system_state(0, 1, 0, 0)
DOWN_UP = system_state(0, 0, 1, 0)
DOWN_DOWN = system_state(0, 0, 0, 1)
SINGLET = system_state(0, 1, -1, 0)
TRIPLET_Z = system_state(0, 1, 1, 0)

# total T_z with eigenvalues +1, 0, -1; T_2z of particle 2 alone with eigenvalues +/-1
T_Z = np.diag([1.0, 0.0, 0.0, -1.0]).astype(complex)
T_2Z = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)


class Classification(str, enum.Enum):
    SINGLET = "Singlet"
    UP_UP = "UpUp"
    DOWN_DOWN = "DownDown"
    TRIPLET_Z = "TripletZ"


CLASS_STATES = {
    Classification.SINGLET: SINGLET,
    Classification.UP_UP: UP_UP,
    Classification.DOWN_DOWN: DOWN_DOWN,
    Classification.TRIPLET_Z: TRIPLET_Z,
}


class ProtocolError(RuntimeError):
    """Measured data inconsistent with the classification rules (an operator bug)."""


@dataclass(frozen=True)
class ProbeAssembly:
    pair_ids: tuple[tuple[str, str], ...]
    initial_state: StateVector

    @classmethod
    def build(cls, pair_ids=PAIRS) -> "ProbeAssembly":
        pair_ids = tuple(tuple(p) for p in pair_ids)
        state = probe_pair_state(pair_ids[0])
        for p in pair_ids[1:]:
            state = kron(state, probe_pair_state(p))
        return cls(pair_ids, state)


def controlled_shift(axis: Literal["z", "y"], swap: bool = False) -> np.ndarray:
    """``P_+ (x) P_L + P_- (x) P_R`` on (particle, probe); ``swap`` exchanges L and R."""
    p_plus, p_minus = SPIN_PROJECTORS[axis]
    a, b = (P_R, P_L) if swap else (P_L, P_R)
    return np.kron(p_plus, a) + np.kron(p_minus, b)


def _slot(slots: Sequence[str], name: str) -> int:
    try:
        return list(slots).index(name)
    except ValueError:
        raise DimensionError(f"slot {name!r} not present in {tuple(slots)}") from None


def coupling_steps(axis, system_pair=("1", "2"), probe_pair=("3", "6")):
    """The two local gates making up one U_z/U_y factor, as (gate, (particle, probe))."""
    system_pair, probe_pair = tuple(system_pair), tuple(probe_pair)
    names = system_pair + probe_pair
    if len(set(names)) != 4:
        raise DimensionError(f"slot collision in {names}")
    if axis not in SPIN_PROJECTORS:
        raise ValueError(f"axis must be 'z' or 'y', got {axis!r}")
    gate = controlled_shift(axis)
    return [(gate, (system_pair[0], probe_pair[0])), (gate, (system_pair[1], probe_pair[1]))]


def _compose(steps, slots: Sequence[str]) -> Operator:
    dims = _dims(slots)
    mat = np.eye(math.prod(dims), dtype=complex)
    for gate, names in steps:
        mat = apply_local(gate, [_slot(slots, n) for n in names], dims, mat)
    return Operator(mat, dims, OperatorKind.UNITARY)


def build_u_z(axis: Literal["z", "y"] = "z", system_pair=("1", "2"), probe_pair=("3", "6"),
              slots: Sequence[str] = T2_SLOTS) -> Operator:
    """``[P_+^(1) P_L^(a) + P_-^(1) P_R^(a)] (x) [P_+^(2) P_L^(b) + P_-^(2) P_R^(b)]`` embedded in ``slots``."""
    return _compose(coupling_steps(axis, system_pair, probe_pair), slots)


def u_total_steps():
    """Local gates of ``U~_z U_y U_z`` in application order."""
    return (coupling_steps("z", probe_pair=("3", "6"))
            + coupling_steps("y", probe_pair=("2*", "4*"))
            + coupling_steps("z", probe_pair=("3*", "6*")))


@functools.lru_cache(maxsize=1)
def build_u_total() -> Operator:
    """``U = U~_z U_y U_z`` on the 2916-dimensional space, built once and cached."""
    return _compose(u_total_steps(), T2_SLOTS)


def embed_system(system: StateVector, probes: StateVector) -> StateVector:
    if system.factor_dims != (2, 2):
        raise DimensionError(f"system must be two isospin-1/2 particles, got {system.factor_dims}")
    return kron(system, probes)


def product_state(system: StateVector, p36: StateVector, p24: StateVector | None = None,
                  p3s6s: StateVector | None = None) -> StateVector:
    """Assemble a state in the frozen slot order from its system and probe-pair factors."""
    parts = [system, p36] + [p for p in (p24, p3s6s) if p is not None]
    return kron_all(parts)


@functools.lru_cache(maxsize=1)
def _t2_response() -> np.ndarray:
    """Columns ``U (|b> (x) |Phi>)`` for the four system basis states ``b``."""
    dims = _dims(T2_SLOTS)
    probes = np.kron(np.kron(PHI.amplitudes, PHI.amplitudes), PHI.amplitudes)
    cols = np.zeros((math.prod(dims), 4), dtype=complex)
    for b in range(4):
        cols[:, b] = np.kron(np.eye(4)[b], probes)
    for gate, names in u_total_steps():
        cols = apply_local(gate, [_slot(T2_SLOTS, n) for n in names], dims, cols)
    cols.flags.writeable = False
    return cols


@functools.lru_cache(maxsize=1)
def _tz_response() -> np.ndarray:
    dims = _dims(TZ_SLOTS)
    cols = np.zeros((math.prod(dims), 4), dtype=complex)
    for b in range(4):
        cols[:, b] = np.kron(np.eye(4)[b], PHI.amplitudes)
    for gate, names in coupling_steps("z"):
        cols = apply_local(gate, [_slot(TZ_SLOTS, n) for n in names], dims, cols)
    cols.flags.writeable = False
    return cols


def t2_branch_maps() -> np.ndarray:
    """Array ``M`` of shape ``(729, 4, 4)``: projecting ``U|psi>|Phi>`` on probe tuple ``k``
    leaves the (unnormalized) system vector ``M[k] @ psi``.

    Tuples are indexed in the probe order ``3, 6, 2*, 4*, 3*, 6*`` with each
    probe value ordered ``(+1, 0, -1)``.
    """
    return _t2_response().reshape(4, 729, 4).transpose(1, 0, 2)


def tz_branch_maps() -> np.ndarray:
    return _tz_response().reshape(4, 9, 4).transpose(1, 0, 2)


def omega_tuples(n: int):
    """All probe-value tuples of length ``n`` in index order."""
    return list(itertools.product(PROBE_VALUES, repeat=n))


def classify_tz(omega_sum: int) -> int:
    """Inferred T_z from the summed outcomes of the two probes."""
    omega_sum = int(omega_sum)
    if omega_sum == 0:
        return 0
    if omega_sum in (1, -2):
        return 1
    if omega_sum in (2, -1):
        return -1
    raise ValueError(f"probe sum {omega_sum} outside -2..2")


def classify_t2(omegas: Sequence[int]) -> Classification:
    """Reduction target from six outcomes ordered ``3, 6, 2*, 4*, 3*, 6*``.

    Raises :class:`ProtocolError` on the sum pattern that no input can
    produce (3*,6* and 2*,4* sums zero while the 3,6 sum is not).
    """
    if len(omegas) != 6:
        raise ValueError("six outcomes expected")
    w3, w6, w2s, w4s, w3s, w6s = (int(w) for w in omegas)
    s36, s24, s33 = w3 + w6, w2s + w4s, w3s + w6s
    if s36 == s24 == s33 == 0:
        return Classification.SINGLET
    if s33 in (1, -2):
        return Classification.UP_UP
    if s33 in (2, -1):
        return Classification.DOWN_DOWN
    if s33 == 0 and s24 != 0:
        return Classification.TRIPLET_Z
    raise ProtocolError(f"unreachable outcome pattern {tuple(omegas)}")


@dataclass(frozen=True)
class TzResult:
    omega3: int
    omega6: int
    omega_sum: int
    inferred_tz: int
    reduced_system: StateVector


@dataclass(frozen=True)
class T2Result:
    omegas: tuple[int, ...]
    classification: Classification
    reduced_system: StateVector


def _require_system(system: StateVector):
    if system.dim != 4:
        raise DimensionError("system state must be 4-dimensional")
    if not system.is_normalized():
        raise ValueError("system state must be normalized")


def _measure_probes(state: StateVector, names, slots, rng):
    omegas = []
    for name in names:
        out = measure_projective(state, OMEGA_PROJECTORS, rng,
                                 slots=[_slot(slots, name)], labels=PROBE_VALUES)
        omegas.append(out.eigenvalue_label)
        state = out.post_state
    return tuple(omegas), state


def _system_factor(state: StateVector, n_probe_states: int, probe_index_: int) -> StateVector:
    vec = state.amplitudes.reshape(4, n_probe_states)[:, probe_index_]
    return system_state(*vec)


def run_tz_protocol(system: StateVector, rng: np.random.Generator) -> TzResult:
    """Couple the system to one probe pair via U_z, read probes 3 and 6, infer T_z."""
    _require_system(system)
    after = StateVector(_tz_response() @ system.amplitudes, _dims(TZ_SLOTS), _labels(TZ_SLOTS))
    (w3, w6), post = _measure_probes(after, ("3", "6"), TZ_SLOTS, rng)
    tz = classify_tz(w3 + w6)
    reduced = _system_factor(post, 9, 3 * probe_index(w3) + probe_index(w6))
    if np.abs(T_Z @ reduced.amplitudes - tz * reduced.amplitudes).max() > 1e-10:
        raise ProtocolError(f"reduced state is not a T_z = {tz} eigenstate")
    return TzResult(w3, w6, w3 + w6, tz, reduced)


def run_t2_protocol(system: StateVector, rng: np.random.Generator) -> T2Result:
    """Apply ``U = U~_z U_y U_z``, read all six probes and classify."""
    _require_system(system)
    after = StateVector(_t2_response() @ system.amplitudes, _dims(T2_SLOTS), _labels(T2_SLOTS))
    omegas, post = _measure_probes(after, T2_OMEGA_ORDER, T2_SLOTS, rng)
    cls = classify_t2(omegas)
    idx = int(np.ravel_multi_index([probe_index(w) for w in omegas], (3,) * 6))
    reduced = _system_factor(post, 729, idx)
    if abs(abs(CLASS_STATES[cls].inner(reduced)) - 1.0) > 1e-10:
        raise ProtocolError(f"outcomes {omegas} classified {cls.value} but reduced state differs")
    return T2Result(omegas, cls, reduced)


def tz_outcome_distribution(system: StateVector) -> np.ndarray:
    """Exact probabilities of the nine (omega3, omega6) outcomes."""
    amps = tz_branch_maps() @ system.amplitudes
    return np.einsum("ki,ki->k", amps.conj(), amps).real


def t2_outcome_distribution(system: StateVector) -> np.ndarray:
    """Exact probabilities of the 729 six-probe outcome tuples."""
    amps = t2_branch_maps() @ system.amplitudes
    return np.einsum("ki,ki->k", amps.conj(), amps).real


@functools.lru_cache(maxsize=1)
def _t2_tuple_classes() -> tuple:
    out = []
    for omegas in omega_tuples(6):
        try:
            out.append(classify_t2(omegas))
        except ProtocolError:
            out.append(None)
    return tuple(out)


def t2_class_probabilities(system: StateVector) -> dict[Classification, float]:
    probs = t2_outcome_distribution(system)
    table = {c: 0.0 for c in Classification}
    for p, cls in zip(probs, _t2_tuple_classes()):
        if p > 1e-14:
            if cls is None:
                raise ProtocolError("nonzero probability on an unreachable outcome pattern")
            table[cls] += float(p)
    return table


def sample_t2_classes(system: StateVector, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of T^2 runs returning the sampled outcome-tuple indices.

    The six probe observables commute, so sampling the joint tuple from its
    exact distribution is the same process as six sequential measurements.
    """
    probs = t2_outcome_distribution(system)
    return rng.choice(probs.size, size=n, p=probs / probs.sum())


def sample_tz(system: StateVector, n: int, rng: np.random.Generator) -> np.ndarray:
    probs = tz_outcome_distribution(system)
    idx = rng.choice(9, size=n, p=probs / probs.sum())
    return np.array([classify_tz(sum(t)) for t in omega_tuples(2)])[idx]


def flip_particle_1(system: StateVector) -> StateVector:
    x = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(2))
    return system_state(*(x @ system.amplitudes))


NonlocalMode = Literal["Tz", "T2", None]


def _post_measurement_mixture(system: StateVector, mode):
    """List of (probability, reduced system) after the selected nonlocal measurement."""
    if mode is None:
        return [(1.0, system)]
    maps = tz_branch_maps() if mode == "Tz" else t2_branch_maps()
    out = []
    for m in maps:
        v = m @ system.amplitudes
        p = float(np.vdot(v, v).real)
        if p > 1e-15:
            out.append((p, system_state(*v)))
    return out


def signaling_distribution(flip: bool, mode: NonlocalMode) -> float:
    """Exact P(T_2z = +1) starting from |up,up>."""
    system = flip_particle_1(UP_UP) if flip else UP_UP
    total = 0.0
    for p, s in _post_measurement_mixture(system, mode):
        total += p * float(np.sum(np.abs(s.amplitudes[[0, 2]]) ** 2))
    return total


def signaling_scenario(flip: bool, nonlocal_measurement: NonlocalMode, rng: np.random.Generator) -> int:
    """One run: optional flip of particle 1, optional nonlocal measurement, then T_2z."""
    if nonlocal_measurement not in ("Tz", "T2", None):
        raise ValueError(f"unknown nonlocal measurement {nonlocal_measurement!r}")
    system = flip_particle_1(UP_UP) if flip else UP_UP
    if nonlocal_measurement == "Tz":
        system = run_tz_protocol(system, rng).reduced_system
    elif nonlocal_measurement == "T2":
        system = run_t2_protocol(system, rng).reduced_system
    p_up = _proj(UP)
    projectors = [np.kron(np.eye(2), p_up), np.kron(np.eye(2), _proj(DOWN))]
    return measure_projective(system, projectors, rng, labels=(+1, -1)).eigenvalue_label


def sample_signaling(flip: bool, mode: NonlocalMode, n: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of T_2z outcomes (+1/-1) drawn from the exact two-stage process."""
    system = flip_particle_1(UP_UP) if flip else UP_UP
    mixture = _post_measurement_mixture(system, mode)
    weights = np.array([p for p, _ in mixture])
    p_up = np.array([float(np.sum(np.abs(s.amplitudes[[0, 2]]) ** 2)) for _, s in mixture])
    branch = rng.choice(len(mixture), size=n, p=weights / weights.sum())
    return np.where(rng.random(n) < p_up[branch], 1, -1)


def singlet_overlap(system: StateVector) -> complex:
    """``<Singlet|psi>`` which for ``alpha, beta, gamma, delta`` equals ``(beta - gamma)/sqrt(2)``."""
    return SINGLET.inner(system)

