"""Relativistic toy model: state reduction indexed by space-like surfaces.

Particles follow classical inertial world lines and carry an internal
two-level degree of freedom; ``Theta`` has eigenvalue +1 on basis state 0
and -1 on basis state 1 for each particle.  Apparatuses sit at fixed points
on the world lines and can be switched on (``g=1``) or off (``g=0``).

The state on a surface ``sigma`` is the initial state if no switched-on
apparatus lies in ``V(sigma, sigma0)``; otherwise it is the initial state
projected on the outcomes of the apparatuses already crossed.  Outcomes are
sampled once, at first crossing, and stored in a write-once
:class:`EventLog`, so every later surface sees the same alternative.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import StateVector, sample_index
from .spacetime import (SpacelikeSurface, SpacetimePoint, WorldLine,
                        in_causal_past, in_volume, past_cone_surface)

EIGEN_TOL = 1e-10
THETA_VALUES = (+1, -1)
THETA_LABELS = ("+", "-")


@dataclass(frozen=True)
class Apparatus:
    id: str
    particle: int
    location: SpacetimePoint
    g: int = 1

    def __post_init__(self):
        if self.g not in (0, 1):
            raise ValueError(f"apparatus {self.id!r}: g must be 0 or 1, got {self.g}")

    def switched(self, g: int) -> "Apparatus":
        return Apparatus(self.id, self.particle, self.location, g)


@dataclass(frozen=True)
class ScenarioConfig:
    particles: tuple[WorldLine, ...]
    apparatuses: tuple[Apparatus, ...]
    initial_state: StateVector
    sigma0: SpacelikeSurface = field(default_factory=lambda: SpacelikeSurface.flat(0.0))

    def __post_init__(self):
        object.__setattr__(self, "particles", tuple(self.particles))
        object.__setattr__(self, "apparatuses", tuple(self.apparatuses))
        n = len(self.particles)
        if self.initial_state.factor_dims != (2,) * n:
            raise ValueError(f"initial state dims {self.initial_state.factor_dims} "
                             f"do not match {n} two-level particles")
        if not self.initial_state.is_normalized():
            raise ValueError("initial state must be normalized")
        ids = [a.id for a in self.apparatuses]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate apparatus ids in {ids}")
        for a in self.apparatuses:
            if not 0 <= a.particle < n:
                raise ValueError(f"apparatus {a.id!r} refers to missing particle {a.particle}")
            if not self.particles[a.particle].contains(a.location):
                raise ValueError(f"apparatus {a.id!r} is not on the world line of particle {a.particle}")
            if a.location.t < self.sigma0.at(a.location.x):
                raise ValueError(f"apparatus {a.id!r} lies below the initial surface")

    def apparatus(self, app_id: str) -> Apparatus:
        for a in self.apparatuses:
            if a.id == app_id:
                return a
        raise KeyError(app_id)

    def with_switches(self, **g) -> "ScenarioConfig":
        """Copy with some apparatus switches changed, e.g. ``cfg.with_switches(A=0)``."""
        apps = tuple(a.switched(g[a.id]) if a.id in g else a for a in self.apparatuses)
        unknown = set(g) - {a.id for a in self.apparatuses}
        if unknown:
            raise KeyError(f"unknown apparatus ids {sorted(unknown)}")
        return ScenarioConfig(self.particles, apps, self.initial_state, self.sigma0)

    def boosted(self, v: float, span: float = 1e4) -> "ScenarioConfig":
        return ScenarioConfig(
            tuple(w.boosted(v) for w in self.particles),
            tuple(Apparatus(a.id, a.particle, a.location.boosted(v), a.g) for a in self.apparatuses),
            self.initial_state, self.sigma0.boosted(v, span))


@dataclass(frozen=True)
class LoggedOutcome:
    outcome: int
    point: SpacetimePoint


class EventLog:
    """Write-once record of apparatus outcomes and where they were fixed."""

    def __init__(self):
        self._entries: dict[str, LoggedOutcome] = {}

    def record(self, app_id: str, outcome: int, point: SpacetimePoint) -> None:
        if app_id in self._entries:
            raise ValueError(f"outcome of apparatus {app_id!r} already fixed")
        if outcome not in THETA_VALUES:
            raise ValueError(f"outcome must be +1 or -1, got {outcome}")
        self._entries[app_id] = LoggedOutcome(int(outcome), point)

    def get(self, app_id: str) -> LoggedOutcome | None:
        return self._entries.get(app_id)

    def __contains__(self, app_id) -> bool:
        return app_id in self._entries

    def __len__(self):
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def outcomes(self) -> dict[str, int]:
        return {k: v.outcome for k, v in self._entries.items()}

    def copy(self) -> "EventLog":
        out = EventLog()
        out._entries = dict(self._entries)
        return out


class VerdictKind(str, enum.Enum):
    INDEFINITE = "Indefinite"
    DEFINITE = "Definite"


@dataclass(frozen=True)
class PropertyVerdict:
    kind: VerdictKind
    value: object = None

    @classmethod
    def indefinite(cls) -> "PropertyVerdict":
        return cls(VerdictKind.INDEFINITE)

    @classmethod
    def definite(cls, value) -> "PropertyVerdict":
        return cls(VerdictKind.DEFINITE, value)

    @property
    def is_definite(self) -> bool:
        return self.kind is VerdictKind.DEFINITE

    def __str__(self):
        return self.kind.value if not self.is_definite else f"Definite({self.value})"


def one_particle_config(alpha: complex = 1 / math.sqrt(2), beta: complex = 1 / math.sqrt(2),
                        world_line: WorldLine | None = None, r_time: float = 1.0, g: int = 1,
                        sigma0: SpacelikeSurface | None = None) -> ScenarioConfig:
    """``alpha|+> + beta|->`` on one world line, apparatus ``A`` at time ``r_time``."""
    wl = world_line or WorldLine(SpacetimePoint(0.0, 0.0), 0.0)
    state = StateVector([alpha, beta], (2,), (THETA_LABELS,)).normalized()
    return ScenarioConfig((wl,), (Apparatus("A", 0, wl.at(r_time), g),), state,
                          sigma0 or SpacelikeSurface.flat(0.0))


def singlet_state() -> StateVector:
    """``(|1+,2-> - |1-,2+>)/sqrt(2)``."""
    return StateVector([0, 1, -1, 0], (2, 2), (THETA_LABELS, THETA_LABELS)).normalized()


def two_particle_config(separation: float = 10.0, l_time: float = 1.0, r_time: float = 1.0,
                        g_a: int = 1, g_b: int = 1, v1: float = 0.0, v2: float = 0.0,
                        sigma0: SpacelikeSurface | None = None) -> ScenarioConfig:
    """Singlet pair; particle 1 on the left measured by ``B`` at ``L``, particle 2
    on the right measured by ``A`` at ``R``."""
    w1 = WorldLine(SpacetimePoint(-separation / 2, 0.0), v1)
    w2 = WorldLine(SpacetimePoint(separation / 2, 0.0), v2)
    apps = (Apparatus("A", 1, w2.at(r_time), g_a), Apparatus("B", 0, w1.at(l_time), g_b))
    return ScenarioConfig((w1, w2), apps, singlet_state(), sigma0 or SpacelikeSurface.flat(0.0))


def _outcome_projected(state: np.ndarray, n: int, fixed: dict[int, int]) -> np.ndarray:
    t = state.reshape((2,) * n).copy()
    for particle, value in fixed.items():
        keep = THETA_VALUES.index(value)
        sl = [slice(None)] * n
        sl[particle] = 1 - keep
        t[tuple(sl)] = 0.0
    return t.reshape(-1)


def _constraints(cfg: ScenarioConfig, outcomes: dict[str, int]) -> dict[int, int]:
    """Particle -> Theta value implied by apparatus outcomes; conflicting values raise."""
    out: dict[int, int] = {}
    for app_id, value in outcomes.items():
        p = cfg.apparatus(app_id).particle
        if out.get(p, value) != value:
            raise ValueError(f"log holds conflicting outcomes for particle {p}")
        out[p] = value
    return out


def crossed_apparatuses(cfg: ScenarioConfig, sigma: SpacelikeSurface) -> list[Apparatus]:
    """Switched-on apparatuses whose points lie in ``V(sigma, sigma0)``, in input order."""
    return [a for a in cfg.apparatuses if a.g == 1 and in_volume(a.location, sigma, cfg.sigma0)]


def state_on_surface(cfg: ScenarioConfig, sigma: SpacelikeSurface, log: EventLog,
                     rng: np.random.Generator | None = None) -> StateVector:
    """State assigned to ``sigma``; newly crossed outcomes are sampled into ``log``.

    All new outcomes are drawn jointly with one uniform variate from the
    initial state conditioned on everything already in the log.  With a
    fixed log the result is deterministic, and visiting an intermediate
    surface first gives the same state on ``sigma``.
    """
    if not sigma.dominates(cfg.sigma0):
        raise ValueError("surface must lie on or above the initial surface")
    n = len(cfg.particles)
    psi0 = cfg.initial_state.amplitudes
    crossed = crossed_apparatuses(cfg, sigma)
    if not crossed:
        return cfg.initial_state
    new = [a for a in crossed if a.id not in log]
    if new:
        if rng is None:
            raise ValueError("outcomes must be sampled but no rng was given")
        cond = _outcome_projected(psi0, n, _constraints(cfg, log.outcomes()))
        particles = sorted({a.particle for a in new})
        probs = np.abs(cond.reshape((2,) * n)) ** 2
        other = tuple(i for i in range(n) if i not in particles)
        joint = probs.sum(axis=other).reshape(-1) if other else probs.reshape(-1)
        if joint.sum() <= 0.0:
            raise ValueError("logged outcomes have zero probability under the initial state")
        k = sample_index(joint / joint.sum(), rng)
        values = np.unravel_index(k, (2,) * len(particles))
        by_particle = {p: THETA_VALUES[int(v)] for p, v in zip(particles, values)}
        for a in new:
            log.record(a.id, by_particle[a.particle], a.location)
    fixed = _constraints(cfg, {a.id: log.get(a.id).outcome for a in crossed})
    amps = _outcome_projected(psi0, n, fixed)
    norm = np.linalg.norm(amps)
    if norm == 0.0:
        raise ValueError("logged outcomes have zero probability under the initial state")
    return StateVector(amps / norm, cfg.initial_state.factor_dims, cfg.initial_state.basis_labels)


def theta_verdict(state: StateVector, particle: int, tol: float = EIGEN_TOL) -> PropertyVerdict:
    """Definite(v) iff ``state`` is a Theta^(particle) eigenstate within ``tol``."""
    n = len(state.factor_dims)
    probs = np.abs(state.tensor()) ** 2
    axes = tuple(i for i in range(n) if i != particle)
    marg = probs.sum(axis=axes) if axes else probs
    total = marg.sum()
    for k, v in enumerate(THETA_VALUES):
        if marg[k] >= (1.0 - tol) * total:
            return PropertyVerdict.definite(v)
    return PropertyVerdict.indefinite()


def property_at(p: SpacetimePoint, particle: int, cfg: ScenarioConfig, log: EventLog,
                rng: np.random.Generator | None = None) -> PropertyVerdict:
    """Objective value of ``Theta^(particle)`` at ``p`` from the state on ``sigma(p)``."""
    if p.t < cfg.sigma0.at(p.x):
        raise ValueError("point lies below the initial surface")
    sigma_p = past_cone_surface(p, cfg.sigma0)
    return theta_verdict(state_on_surface(cfg, sigma_p, log, rng), particle)


def pointer_at(app_id: str, p: SpacetimePoint, cfg: ScenarioConfig, log: EventLog,
               rng: np.random.Generator | None = None) -> PropertyVerdict:
    """Pointer state of apparatus ``app_id`` at a point of its (vertical) world line.

    Always definite: ``'r'`` before the interaction point or when switched
    off, otherwise ``'+'``/``'-'`` matching the logged outcome.
    """
    app = cfg.apparatus(app_id)
    if abs(p.x - app.location.x) > 1e-9:
        raise ValueError(f"point is not on the world line of apparatus {app_id!r}")
    if app.g == 0:
        return PropertyVerdict.definite("r")
    sigma_p = past_cone_surface(p, cfg.sigma0)
    if not in_volume(app.location, sigma_p, cfg.sigma0):
        return PropertyVerdict.definite("r")
    state_on_surface(cfg, sigma_p, log, rng)
    return PropertyVerdict.definite(THETA_LABELS[THETA_VALUES.index(log.get(app_id).outcome)])


def final_surface(cfg: ScenarioConfig, margin: float = 1.0) -> SpacelikeSurface:
    """A flat surface above every apparatus point."""
    top = max([a.location.t for a in cfg.apparatuses] + [max(t for _, t in cfg.sigma0.knots)])
    return SpacelikeSurface.flat(top + margin)


def run_once(cfg: ScenarioConfig, rng: np.random.Generator,
             sigma: SpacelikeSurface | None = None) -> dict[str, int]:
    """Outcomes of all switched-on apparatuses in one run."""
    log = EventLog()
    state_on_surface(cfg, sigma or final_surface(cfg), log, rng)
    return log.outcomes()


@dataclass(frozen=True)
class ParameterIndependenceTable:
    """``P_S(i | g_S* = g)`` keyed by ``(S, i, g)`` plus the both-on same-outcome count."""

    entries: dict[tuple[str, int, int], float]
    counts: dict[tuple[str, int, int], int]
    n_trials: int
    same_outcome_both_on: int

    def rows(self):
        for (s, i, g), p in sorted(self.entries.items()):
            other = "R" if s == "L" else "L"
            yield f"P_{s}({i:+d}|g_{other}={g})", p


def stats_parameter_independence(cfg_template: ScenarioConfig, n_trials: int,
                                 rng: np.random.Generator) -> ParameterIndependenceTable:
    """Monte Carlo estimate of the eight parameter-independence probabilities.

    ``L`` is apparatus ``B`` (particle 1) and ``R`` is apparatus ``A``
    (particle 2).  Three switch settings are run ``n_trials`` times each:
    both on, only ``B`` on and only ``A`` on.
    """
    settings = {(1, 1): cfg_template.with_switches(A=1, B=1),
                (1, 0): cfg_template.with_switches(A=0, B=1),
                (0, 1): cfg_template.with_switches(A=1, B=0)}
    counts: dict[tuple[str, int, int], int] = {}
    same = 0
    for (g_b, g_a), cfg in settings.items():
        tallies = {"A": {+1: 0, -1: 0}, "B": {+1: 0, -1: 0}}
        top = final_surface(cfg)
        for _ in range(n_trials):
            out = run_once(cfg, rng, top)
            for app_id, v in out.items():
                tallies[app_id][v] += 1
            if g_a == g_b == 1 and out["A"] == out["B"]:
                same += 1
        if g_b == 1:
            for i in THETA_VALUES:
                counts[("L", i, g_a)] = tallies["B"][i]
        if g_a == 1:
            for i in THETA_VALUES:
                counts[("R", i, g_b)] = tallies["A"][i]
    entries = {k: c / n_trials for k, c in counts.items()}
    return ParameterIndependenceTable(entries, counts, n_trials, same)


class CounterfactualVerdict(str, enum.Enum):
    LEGITIMATE = "Legitimate"
    ILLEGITIMATE = "Illegitimate"


@dataclass(frozen=True)
class CounterfactualClaim:
    """An observer at ``vantage`` asserts ``asserted_outcome`` for a measurement at ``target``.

    ``toggled`` says whether the antecedent differs from the actual world
    (an apparatus that is off, or absent, is imagined on at ``target``).
    ``basis`` lists the logged apparatus outcomes the assertion relies on;
    by default every logged outcome the observer can know about.
    """

    vantage: SpacetimePoint
    target: SpacetimePoint
    asserted_outcome: int
    toggled: bool = False
    basis: tuple[str, ...] | None = None


def counterfactual_classify(claim: CounterfactualClaim, cfg: ScenarioConfig,
                            log: EventLog) -> CounterfactualVerdict:
    """Past-light-cone accessibility criterion.

    A claim about the actual configuration is legitimate.  A claim with a
    toggled antecedent is legitimate only if every fact it relies on lies in
    the causal past of the antecedent point, so that all accessible worlds
    share it.
    """
    if claim.asserted_outcome not in THETA_VALUES:
        raise ValueError(f"asserted outcome must be +1 or -1, got {claim.asserted_outcome}")
    known = {k: e for k, e in log.items() if in_causal_past(e.point, claim.vantage)}
    basis = tuple(known) if claim.basis is None else tuple(claim.basis)
    for k in basis:
        if k not in known:
            raise ValueError(f"claim relies on outcome {k!r} not known at the vantage point")
    if not claim.toggled:
        return CounterfactualVerdict.LEGITIMATE
    if not basis:
        raise ValueError("a counterfactual claim needs at least one known fact to rely on")
    if all(in_causal_past(known[k].point, claim.target) for k in basis):
        return CounterfactualVerdict.LEGITIMATE
    return CounterfactualVerdict.ILLEGITIMATE


@dataclass(frozen=True)
class HiddenVariableModel:
    """Finite deterministic completion of the two-apparatus set-up.

    ``only_a[lam]`` is the outcome at ``A`` when only ``A`` is on;
    ``both_on[lam]`` is the outcome pair ``(A, B)`` when both are on.
    """

    lambdas: tuple
    only_a: dict
    both_on: dict

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(self.lambdas))
        for lam in self.lambdas:
            if self.only_a.get(lam) not in THETA_VALUES:
                raise ValueError(f"only-A outcome missing or invalid for {lam!r}")
            pair = tuple(self.both_on.get(lam, ()))
            if len(pair) != 2 or any(v not in THETA_VALUES for v in pair):
                raise ValueError(f"both-on outcomes missing or invalid for {lam!r}")
        if not self.lambda_12:
            raise ValueError("model is local on this pair: the subset Lambda_1-2 is empty")

    def lambda_1(self, sign: int) -> tuple:
        """``Lambda_1(2, sign)``: only A on gives ``sign``."""
        return tuple(l for l in self.lambdas if self.only_a[l] == sign)

    @property
    def lambda_12(self) -> tuple:
        return tuple(l for l in self.lambda_1(+1) if tuple(self.both_on[l]) == (-1, +1))


@dataclass(frozen=True)
class DisagreementEntry:
    lam: object
    same_lambda_b: int
    same_outcome_worlds: tuple
    same_outcome_b: tuple[int, ...]
    worlds_from_opposite_set: tuple

    @property
    def disagree(self) -> bool:
        return set(self.same_outcome_b) != {self.same_lambda_b}


@dataclass(frozen=True)
class HvReport:
    entries: tuple[DisagreementEntry, ...]

    @property
    def flagged(self) -> tuple:
        return tuple(e.lam for e in self.entries if e.disagree)

    @property
    def all_disagree(self) -> bool:
        return bool(self.entries) and all(e.disagree for e in self.entries)


def hv_counterfactual_demo(model: HiddenVariableModel) -> HvReport:
    """Compare two accessibility criteria for "had B also been on" on every lambda in Lambda_1-2.

    Same-lambda worlds predict the both-on B outcome of that lambda.
    Same-A-outcome worlds are the lambdas whose both-on A outcome equals the
    actual (only-A) outcome; the B outcomes there are collected, and the
    ones drawn from ``Lambda_1(2, -)`` are listed.
    """
    opposite = set(model.lambda_1(-1))
    entries = []
    for lam in model.lambda_12:
        actual_a = model.only_a[lam]
        worlds = tuple(m for m in model.lambdas if model.both_on[m][0] == actual_a)
        entries.append(DisagreementEntry(
            lam, model.both_on[lam][1], worlds,
            tuple(sorted({model.both_on[m][1] for m in worlds})),
            tuple(m for m in worlds if m in opposite)))
    report = HvReport(tuple(entries))
    if not report.flagged:
        raise AssertionError("accessibility criteria agree on every lambda in Lambda_1-2")
    return report
