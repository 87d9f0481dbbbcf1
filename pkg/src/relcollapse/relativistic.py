"""The T^2 protocol run wing by wing, surface by surface.

``U = U~_z U_y U_z`` factors into a right-wing part ``U^(2)`` acting on
particle 2 and probes 6, 4*, 6* and a left-wing part ``U^(1)`` acting on
particle 1 and probes 3, 2*, 3*.  The pipeline is

    sigma0 --U^(2)--> sigma1 --read 6, 4*, 6*--> sigma2 --U^(1), read left--> final

and for the singlet every completed run ends in ``|Singlet>`` with all
three probe pairs summing to zero.

Two orientations of the right-wing factor are available.  ``"consistent"``
couples every probe with ``P_+ -> P_L``, exactly as the local factors of
``U``; ``"literal"`` swaps L and R in the last (6*) factor.  Only the
consistent form composes to ``U`` and reproduces the worked branch
expansions; the literal one is kept so that this can be tested.
"""
from __future__ import annotations

import enum
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .linalg import Operator, OperatorKind, StateVector, apply_local, sample_index
from .protocol import (PHI, PROBE_VALUES, SINGLET, T2_SLOTS, Classification,
                       ProtocolError, _dims, _labels, _slot, classify_t2,
                       controlled_shift, probe_index, product_state, system_state)
from .spacetime import (SpacelikeSurface, SpacetimePoint, WorldLine, in_volume,
                        pair_cone_surface)
from .toy import PropertyVerdict
from .trace import RunTrace

Side = Literal["left", "right"]
Variant = Literal["consistent", "literal"]

SIDES = {
    "right": ("2", ("6", "4*", "6*")),
    "left": ("1", ("3", "2*", "3*")),
}
RIGHT_PROBES = SIDES["right"][1]
LEFT_PROBES = SIDES["left"][1]
AXES = ("z", "y", "z")
DIMS = _dims(T2_SLOTS)
N_PROBE_STATES = 729
TRIPLES = tuple(itertools.product(PROBE_VALUES, repeat=3))


class Stage(str, enum.Enum):
    SIGMA0 = "sigma0"
    SIGMA1 = "sigma1"
    SIGMA2 = "sigma2"
    FINAL = "final"


def u_factor_steps(side: Side, variant: Variant = "consistent"):
    """Local gates of ``U^(1)`` or ``U^(2)`` in application order, as (gate, slot names)."""
    if side not in SIDES:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if variant not in ("consistent", "literal"):
        raise ValueError(f"unknown variant {variant!r}")
    particle, probes = SIDES[side]
    steps = []
    for k, (axis, probe) in enumerate(zip(AXES, probes)):
        swap = variant == "literal" and k == 2
        steps.append((controlled_shift(axis, swap=swap), (particle, probe)))
    return steps


def apply_steps(steps, amps: np.ndarray) -> np.ndarray:
    for gate, names in steps:
        amps = apply_local(gate, [_slot(T2_SLOTS, n) for n in names], DIMS, amps)
    return amps


@functools.lru_cache(maxsize=4)
def u_factor(side: Side, variant: Variant = "consistent") -> Operator:
    """Dense 2916 x 2916 ``U^(2)`` (``side="right"``) or ``U^(1)`` (``side="left"``)."""
    mat = apply_steps(u_factor_steps(side, variant), np.eye(math.prod(DIMS), dtype=complex))
    return Operator(mat, DIMS, OperatorKind.UNITARY)


def _state(amps: np.ndarray) -> StateVector:
    return StateVector(amps, DIMS, _labels(T2_SLOTS))


def initial_state(system: StateVector = SINGLET) -> StateVector:
    """``|system> (x) |Phi>_{3,6} (x) |Phi>_{2*,4*} (x) |Phi>_{3*,6*}``."""
    return product_state(system, PHI, PHI, PHI)


@dataclass(frozen=True)
class StagedState:
    surface_tag: Stage
    state: StateVector
    forced_outcomes: tuple[int, int, int] | None = None
    right_outcomes: tuple[int, int, int] | None = None
    left_outcomes: tuple[int, int, int] | None = None
    probability: float = 1.0
    variant: Variant = "consistent"

    def __post_init__(self):
        object.__setattr__(self, "surface_tag", Stage(self.surface_tag))
        if not self.state.is_normalized():
            raise ProtocolError(f"state at {self.surface_tag.value} is not normalized")


def evolve_sigma1(initial: StateVector | None = None, variant: Variant = "consistent") -> StagedState:
    """Apply the right-wing factor ``U^(2)`` only."""
    initial = initial_state() if initial is None else initial
    if initial.factor_dims != DIMS:
        raise ValueError(f"initial state must live on {DIMS}")
    amps = apply_steps(u_factor_steps("right", variant), initial.amplitudes)
    return StagedState(Stage.SIGMA1, _state(amps), variant=variant)


def _probe_axes(names: Sequence[str]) -> tuple[int, ...]:
    return tuple(_slot(T2_SLOTS, n) for n in names)


def outcome_probabilities(state: StateVector, probes: Sequence[str]) -> dict[tuple[int, ...], float]:
    """Born probabilities of every joint outcome of the listed probes."""
    probs = np.abs(state.tensor()) ** 2
    keep = _probe_axes(probes)
    marg = probs.sum(axis=tuple(i for i in range(len(DIMS)) if i not in keep))
    # sum() keeps the remaining axes in slot order; reorder to the requested order
    order = np.argsort(np.argsort(keep))
    marg = np.transpose(marg, order)
    return {w: float(marg[tuple(probe_index(v) for v in w)])
            for w in itertools.product(PROBE_VALUES, repeat=len(probes))}


def right_triple_probabilities(staged: StagedState) -> dict[tuple[int, int, int], float]:
    """``P(omega6, omega4*, omega6*)`` on ``sigma1``."""
    if staged.surface_tag is not Stage.SIGMA1:
        raise ValueError("right-wing probabilities need the sigma1 state")
    return outcome_probabilities(staged.state, RIGHT_PROBES)


def _project(state: StateVector, probes: Sequence[str], outcome: Sequence[int]) -> tuple[np.ndarray, float]:
    t = np.array(state.tensor())
    mask = np.zeros(DIMS, dtype=bool)
    sl = [slice(None)] * len(DIMS)
    for name, w in zip(probes, outcome):
        sl[_slot(T2_SLOTS, name)] = probe_index(w)
    mask[tuple(sl)] = True
    t[~mask] = 0.0
    v = t.reshape(-1)
    return v, float(np.vdot(v, v).real)


def reduce_right(staged: StagedState, outcomes: Sequence[int] | None = None,
                 rng: np.random.Generator | None = None, tol: float = 1e-12) -> StagedState:
    """Read probes 6, 4*, 6*.  A forced triple must have nonzero probability."""
    if staged.surface_tag is not Stage.SIGMA1:
        raise ValueError("reduce_right expects the sigma1 state")
    if outcomes is None:
        if rng is None:
            raise ValueError("either a forced triple or an rng is required")
        probs = right_triple_probabilities(staged)
        p = np.array([probs[w] for w in TRIPLES])
        outcomes = TRIPLES[sample_index(p / p.sum(), rng)]
        forced = None
    else:
        outcomes = tuple(int(w) for w in outcomes)
        if len(outcomes) != 3 or any(w not in PROBE_VALUES for w in outcomes):
            raise ValueError(f"forced outcomes must be three values in {PROBE_VALUES}")
        forced = outcomes
    v, p = _project(staged.state, RIGHT_PROBES, outcomes)
    if p <= tol:
        raise ProtocolError(f"outcome triple {outcomes} has zero probability")
    return StagedState(Stage.SIGMA2, _state(v / math.sqrt(p)), forced, tuple(outcomes),
                       probability=p, variant=staged.variant)


def definite_probe_configuration(state: StateVector, tol: float = 1e-10):
    """Probe tuple (order 3, 6, 2*, 4*, 3*, 6*) if the probes are in one basis product state."""
    cols = state.amplitudes.reshape(4, N_PROBE_STATES)
    weights = np.einsum("ij,ij->j", cols.conj(), cols).real
    k = int(np.argmax(weights))
    if weights[k] < 1.0 - tol:
        return None
    values = np.unravel_index(k, (3,) * 6)
    return tuple(PROBE_VALUES[int(i)] for i in values), cols[:, k] / math.sqrt(weights[k])


def evolve_final(staged: StagedState, rng: np.random.Generator | None = None) -> StagedState:
    """Apply ``U^(1)`` and let the left detectors read probes 3, 2*, 3*.

    For the singlet the probes end in one basis product state, which the
    detectors simply register.  If they do not, an ``rng`` is needed to
    sample the left readings; without one a :class:`ProtocolError` is raised.
    """
    if staged.surface_tag is not Stage.SIGMA2:
        raise ValueError("evolve_final expects the sigma2 state")
    amps = apply_steps(u_factor_steps("left", "consistent"), staged.state.amplitudes)
    state = _state(amps)
    p = 1.0
    found = definite_probe_configuration(state)
    if found is None:
        if rng is None:
            raise ProtocolError("probe factor is not a basis product state after U^(1)")
        probs = outcome_probabilities(state, LEFT_PROBES)
        pv = np.array([probs[w] for w in TRIPLES])
        left = TRIPLES[sample_index(pv / pv.sum(), rng)]
        v, p = _project(state, LEFT_PROBES, left)
        state = _state(v / math.sqrt(p))
    else:
        omegas, _ = found
        left = (omegas[0], omegas[2], omegas[4])
    return StagedState(Stage.FINAL, state, staged.forced_outcomes, staged.right_outcomes,
                       tuple(left), staged.probability * p, staged.variant)


def all_omegas(final: StagedState) -> tuple[int, ...]:
    """Probe readings in the order 3, 6, 2*, 4*, 3*, 6*."""
    (w3, w2s, w3s), (w6, w4s, w6s) = final.left_outcomes, final.right_outcomes
    return (w3, w6, w2s, w4s, w3s, w6s)


def pair_sums(omegas: Sequence[int]) -> tuple[int, int, int]:
    w = list(omegas)
    return (w[0] + w[1], w[2] + w[3], w[4] + w[5])


def system_factor(final: StagedState) -> StateVector:
    """System state once all six probes are definite."""
    found = definite_probe_configuration(final.state)
    if found is None:
        raise ProtocolError("probes are not in a definite configuration")
    return system_state(*found[1])


def singlet_weight(state: StateVector) -> float:
    """``||(|Singlet><Singlet| (x) 1) psi||^2``: 1 on T^2 = 0 eigenstates, 0 on T^2 = 2 ones."""
    cols = state.amplitudes.reshape(4, -1)
    proj = SINGLET.amplitudes.conj() @ cols
    return float(np.vdot(proj, proj).real) / float(np.vdot(cols, cols).real)


def t2_verdict(state: StateVector, tol: float = 1e-10) -> PropertyVerdict:
    """Definite(0) or Definite(2) if ``state`` is a T^2 eigenstate, else Indefinite."""
    w = singlet_weight(state)
    if w >= 1.0 - tol:
        return PropertyVerdict.definite(0)
    if w <= tol:
        return PropertyVerdict.definite(2)
    return PropertyVerdict.indefinite()


def run_full(forced: Sequence[int] | None = None, rng: np.random.Generator | None = None,
             system: StateVector = SINGLET, variant: Variant = "consistent",
             seed: int | None = None, dump_amplitudes: bool = False) -> RunTrace:
    """Chain ``evolve_sigma1 -> reduce_right -> evolve_final`` and record every stage."""
    trace = RunTrace("relativistic-t2", seed)
    psi0 = initial_state(system)
    trace.add(Stage.SIGMA0.value, "system (x) three probe pairs", psi0, dump_amplitudes)
    s1 = evolve_sigma1(psi0, variant)
    trace.add(Stage.SIGMA1.value, "right-wing factor applied", s1.state, dump_amplitudes,
              data={"singlet_weight": singlet_weight(s1.state)})
    s2 = reduce_right(s1, forced, rng)
    trace.add(Stage.SIGMA2.value, "probes 6, 4*, 6* read", s2.state, dump_amplitudes,
              outcomes={"6": s2.right_outcomes[0], "4*": s2.right_outcomes[1],
                        "6*": s2.right_outcomes[2]},
              probabilities={"triple": s2.probability}, data={"forced": forced is not None})
    fin = evolve_final(s2, rng)
    omegas = all_omegas(fin)
    sums = pair_sums(omegas)
    cls = classify_t2(omegas)
    trace.add(Stage.FINAL.value, "left-wing factor applied and probes 3, 2*, 3* read",
              fin.state, dump_amplitudes,
              outcomes=dict(zip(("3", "6", "2*", "4*", "3*", "6*"), omegas)),
              data={"pair_sums": sums, "classification": cls.value,
                    "singlet_weight": singlet_weight(fin.state)})
    trace.check("normalized", all(abs(s.state.norm() - 1) < 1e-10 for s in (s1, s2, fin)))
    trace.check("final_T2_eigenstate", t2_verdict(fin.state).is_definite)
    if abs(SINGLET.inner(system)) ** 2 >= 1.0 - 1e-10:
        trace.check("zero_pair_sums", sums == (0, 0, 0))
        trace.check("final_singlet", singlet_weight(fin.state) >= 1.0 - 1e-10)
        trace.check("classified_singlet", cls is Classification.SINGLET)
    trace.summary = {"omegas": omegas, "pair_sums": sums, "classification": cls.value}
    return trace


def run_staged(forced: Sequence[int] | None = None, rng: np.random.Generator | None = None,
               system: StateVector = SINGLET, variant: Variant = "consistent"):
    """The three staged states of one run, without a trace."""
    s1 = evolve_sigma1(initial_state(system), variant)
    s2 = reduce_right(s1, forced, rng)
    return s1, s2, evolve_final(s2, rng)


@dataclass(frozen=True)
class ProtocolGeometry:
    """Where the local couplings and read-outs of the run sit in spacetime.

    Particle 1 rests at ``x = -separation/2`` and particle 2 at
    ``x = +separation/2``.  The three couplings on each wing happen at the
    listed times; the wing's probes are read at ``read_time``.
    """

    separation: float = 10.0
    right_times: tuple[float, float, float] = (1.0, 2.0, 3.0)
    right_read_time: float = 4.0
    left_times: tuple[float, float, float] = (1.0, 2.0, 3.0)
    left_read_time: float = 4.0
    sigma0: SpacelikeSurface = field(default_factory=lambda: SpacelikeSurface.flat(0.0))

    def world_line(self, side: Side) -> WorldLine:
        x = self.separation / 2 if side == "right" else -self.separation / 2
        return WorldLine(SpacetimePoint(x, 0.0), 0.0)

    def events(self, side: Side) -> tuple[list[SpacetimePoint], SpacetimePoint]:
        wl = self.world_line(side)
        times = self.right_times if side == "right" else self.left_times
        read = self.right_read_time if side == "right" else self.left_read_time
        if list(times) != sorted(times) or read <= times[-1]:
            raise ValueError("couplings must be time ordered and precede the read-out")
        return [wl.at(t) for t in times], wl.at(read)


def state_on_protocol_surface(geom: ProtocolGeometry, sigma: SpacelikeSurface,
                              right_outcomes: Sequence[int] | None = None,
                              left_rng: np.random.Generator | None = None,
                              system: StateVector = SINGLET) -> StateVector:
    """State assigned to ``sigma``: every coupling and read-out below it has happened.

    Right-wing readings are taken from ``right_outcomes`` (the run's log).
    """
    amps = initial_state(system).amplitudes
    right_steps, right_read = geom.events("right")
    left_steps, left_read = geom.events("left")
    crossed = lambda p: in_volume(p, sigma, geom.sigma0)
    for step, ev in zip(u_factor_steps("right"), right_steps):
        if crossed(ev):
            amps = apply_steps([step], amps)
    if crossed(right_read):
        if right_outcomes is None:
            raise ValueError("surface lies above the right read-out; its outcomes are needed")
        amps, p = _project(_state(amps), RIGHT_PROBES, right_outcomes)
        if p <= 1e-12:
            raise ProtocolError(f"logged right outcomes {tuple(right_outcomes)} have zero probability")
        amps = amps / math.sqrt(p)
    for step, ev in zip(u_factor_steps("left"), left_steps):
        if crossed(ev):
            amps = apply_steps([step], amps)
    state = _state(amps)
    if crossed(left_read) and definite_probe_configuration(state) is None:
        if left_rng is None:
            raise ValueError("left probes are not definite; an rng is needed to read them")
        probs = outcome_probabilities(state, LEFT_PROBES)
        pv = np.array([probs[w] for w in TRIPLES])
        left = TRIPLES[sample_index(pv / pv.sum(), left_rng)]
        v, p = _project(state, LEFT_PROBES, left)
        state = _state(v / math.sqrt(p))
    return state


def t2_property_at_pair(p1: SpacetimePoint, p2: SpacetimePoint, geom: ProtocolGeometry,
                        right_outcomes: Sequence[int] | None = None,
                        system: StateVector = SINGLET) -> PropertyVerdict:
    """T^2 verdict for the pair of points ``(p1, p2)`` on the two world lines.

    Uses the surface made of the two past light cones of the points joined
    to ``sigma0``.
    """
    sigma = pair_cone_surface(p1, p2, geom.sigma0)
    return t2_verdict(state_on_protocol_surface(geom, sigma, right_outcomes, system=system))
