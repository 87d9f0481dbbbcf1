"""Named experiments.  Each takes validated parameters and returns a RunTrace.

Every summary lists the expected values next to the observed ones, with a
``basis`` tag saying where the expectation comes from: ``closed-form``
(exact algebra), ``born-rule``, ``enumeration`` (exhaustive brute force) or
``poisson``.
"""
from __future__ import annotations

import math
from typing import Callable, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from . import csl as csl_mod
from . import grw as grw_mod
from . import protocol as P
from . import relativistic as rel
from . import toy
from .linalg import StateVector, make_rng
from .spacetime import SpacetimePoint
from .stats import (binomial_sigma, chi2_goodness, chi2_homogeneity, ks_exponential,
                    ks_test, within_sigma)
from .trace import RunTrace

SIGNIFICANCE = 1e-3
PER_RUN_LIMIT = 1000  # above this many trials the protocol scenarios use batch samplers

NAMED_INPUTS = {
    "singlet": P.SINGLET, "upup": P.UP_UP, "downdown": P.DOWN_DOWN,
    "updown": P.UP_DOWN, "downup": P.DOWN_UP, "tripletz": P.TRIPLET_Z,
}

ComplexLike = Union[float, tuple[float, float]]


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _parse_input(v) -> StateVector:
    if isinstance(v, str):
        key = v.lower().replace("_", "").replace("-", "")
        if key not in NAMED_INPUTS:
            raise ValueError(f"unknown input state {v!r}; choose from {sorted(NAMED_INPUTS)} "
                             "or give four amplitudes")
        return NAMED_INPUTS[key]
    amps = [complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a) for a in v]
    if len(amps) != 4 or not any(amps):
        raise ValueError("amplitude input needs four numbers, not all zero")
    return P.system_state(*amps)


class ProtocolParams(_Params):
    input: Union[str, list[ComplexLike]] = "singlet"

    @field_validator("input")
    @classmethod
    def _check(cls, v):
        _parse_input(v)
        return v

    @property
    def state(self) -> StateVector:
        return _parse_input(self.input)


class SignalingParams(_Params):
    modes: list[Literal["none", "Tz", "T2"]] = ["none", "Tz", "T2"]


class GrwScenarioParams(_Params):
    lam: float = Field(1.0, gt=0)
    alpha: float = Field(1.0, gt=0)
    separation: float = Field(10.0, gt=0)
    width: float = Field(0.3, gt=0)
    grid_points: int = Field(2001, ge=16)
    masses: list[float] = [1.0, 1.0, 2.0]
    duration: float = Field(1000.0, ge=0)


class CslScenarioParams(_Params):
    gamma: float = Field(1.0, ge=0)
    total_time: float = Field(10.0, ge=0)
    weights: list[float] = [0.8, 0.2]
    method: Literal["reference", "resample", "tilted"] = "tilted"
    dt: Optional[float] = Field(None, gt=0)
    n_records: int = Field(10, ge=1)
    trajectory_members: int = Field(4, ge=0)


class ToyOneParams(_Params):
    alpha: ComplexLike = 0.6
    beta: ComplexLike = 0.8
    g: Literal[0, 1] = 1
    r_time: float = 1.0


class ToyTwoParams(_Params):
    g_a: Literal[0, 1] = 1
    g_b: Literal[0, 1] = 1
    separation: float = Field(10.0, gt=0)
    l_time: float = 1.0
    r_time: float = 1.0
    v1: float = Field(0.0, gt=-1, lt=1)
    v2: float = Field(0.0, gt=-1, lt=1)

    def config(self, g_a=None, g_b=None):
        return toy.two_particle_config(self.separation, self.l_time, self.r_time,
                                       self.g_a if g_a is None else g_a,
                                       self.g_b if g_b is None else g_b, self.v1, self.v2)


class RelativisticParams(_Params):
    variant: Literal["consistent", "literal"] = "consistent"
    input: Union[str, list[ComplexLike]] = "singlet"
    dump_amplitudes: bool = False

    @property
    def state(self) -> StateVector:
        return _parse_input(self.input)


class EmptyParams(_Params):
    pass


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


# ----------------------------------------------------------------- protocol

def scenario_tz(params: ProtocolParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("tz", seed)
    rng = make_rng(seed)
    system = params.state
    exact = P.tz_outcome_distribution(system)
    labels = P.omega_tuples(2)
    expected_tz = {tz: float(sum(p for p, w in zip(exact, labels) if P.classify_tz(sum(w)) == tz))
                   for tz in (1, 0, -1)}
    if trials <= PER_RUN_LIMIT:
        tzs = []
        for i in range(trials):
            res = P.run_tz_protocol(system, rng)
            tzs.append(res.inferred_tz)
            trace.add("measurement", f"run {i}", res.reduced_system,
                      outcomes={"3": res.omega3, "6": res.omega6, "T_z": res.inferred_tz})
        tzs = np.array(tzs)
    else:
        tzs = P.sample_tz(system, trials, rng)
    counts = {tz: int(np.sum(tzs == tz)) for tz in (1, 0, -1)}
    gof = chi2_goodness([counts[k] for k in (1, 0, -1)], [expected_tz[k] for k in (1, 0, -1)])
    trace.add("summary", "inferred T_z frequencies", outcomes=counts, probabilities=expected_tz)
    trace.check("chi2_vs_born", gof.passes(SIGNIFICANCE))
    trace.summary = {
        "trials": trials,
        "frequencies": {str(k): c / trials for k, c in counts.items()},
        "expected": {"values": {str(k): v for k, v in expected_tz.items()}, "basis": "born-rule"},
        "chi2": {"statistic": gof.statistic, "pvalue": gof.pvalue, "dof": gof.dof},
    }
    return trace


def scenario_t2(params: ProtocolParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("t2", seed)
    rng = make_rng(seed)
    system = params.state
    expected = {c.value: p for c, p in P.t2_class_probabilities(system).items()}
    if trials <= PER_RUN_LIMIT:
        classes = []
        for i in range(trials):
            res = P.run_t2_protocol(system, rng)
            classes.append(res.classification.value)
            trace.add("measurement", f"run {i}", res.reduced_system,
                      outcomes=dict(zip(P.T2_OMEGA_ORDER, res.omegas)),
                      data={"classification": res.classification.value})
    else:
        idx = P.sample_t2_classes(system, trials, rng)
        table = P._t2_tuple_classes()
        classes = [table[k].value for k in idx]
    counts = {c.value: int(sum(1 for x in classes if x == c.value)) for c in P.Classification}
    names = [c.value for c in P.Classification]
    gof = chi2_goodness([counts[n] for n in names], [expected[n] for n in names])
    trace.add("summary", "classification frequencies", outcomes=counts, probabilities=expected)
    trace.check("chi2_vs_born", gof.passes(SIGNIFICANCE))
    trace.summary = {
        "trials": trials,
        "frequencies": {k: v / trials for k, v in counts.items()},
        "expected": {"values": expected, "basis": "enumeration"},
        "chi2": {"statistic": gof.statistic, "pvalue": gof.pvalue, "dof": gof.dof},
    }
    if trials == 1:
        trace.summary["classification"] = classes[0]
    return trace


def scenario_signaling(params: SignalingParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("signaling", seed)
    rng = make_rng(seed)
    table = {}
    for mode_name in params.modes:
        mode = None if mode_name == "none" else mode_name
        rows, freqs = [], {}
        for flip in (False, True):
            out = P.sample_signaling(flip, mode, trials, rng)
            n_up = int(np.sum(out == 1))
            rows.append([n_up, trials - n_up])
            freqs["flip" if flip else "no_flip"] = n_up / trials
        hom = chi2_homogeneity(*rows)
        exact = P.signaling_distribution(False, mode)
        ok_hom = hom.passes(SIGNIFICANCE)
        if abs(exact - round(exact)) < 1e-12:
            ok_val = all(f == round(exact) for f in freqs.values())
        else:
            ok_val = all(within_sigma(f, exact, trials) for f in freqs.values())
        trace.check(f"{mode_name}_indistinguishable", ok_hom)
        trace.check(f"{mode_name}_matches_expected", ok_val)
        trace.add("distribution", f"T_2z after nonlocal measurement {mode_name}",
                  outcomes={"no_flip": rows[0], "flip": rows[1]},
                  probabilities={"P(T_2z=+1)": exact})
        table[mode_name] = {
            "P(T_2z=+1)": freqs,
            "expected": {"value": exact, "basis": "closed-form"},
            "chi2": {"statistic": hom.statistic, "pvalue": hom.pvalue, "dof": hom.dof},
        }
    trace.summary = {"trials": trials, "modes": table}
    return trace


# ----------------------------------------------------------------- dynamics

def two_lump_center_cdf(separation: float, width: float, alpha: float) -> Callable:
    """CDF of ``||Phi_x||^2`` for an equal two-lump state: a normal mixture."""
    from scipy.stats import norm
    sd = math.sqrt(width ** 2 + 0.5 / alpha)
    d = separation / 2
    return lambda z: 0.5 * norm.cdf(z, -d, sd) + 0.5 * norm.cdf(z, d, sd)


def scenario_grw(params: GrwScenarioParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("grw", seed)
    rng = make_rng(seed)
    d = params.separation / 2
    span = d + 8 * params.width + 6 / math.sqrt(params.alpha)
    psi = grw_mod.GridWavefunction.gaussian_lumps([-d, d], params.width, -span, span, params.grid_points)
    gp = grw_mod.GrwParams(params.lam, params.alpha, (1.0,))
    centers, left = [], 0
    concentrated = True
    for _ in range(trials):
        x, new = grw_mod.grw_hit(psi, 0, gp, rng)
        centers.append(x)
        m = new.marginal(0)
        frac_left = float(m[psi.grid(0) < 0].sum())
        left += frac_left > 0.5
        concentrated &= max(frac_left, 1 - frac_left) > 0.999
    frac = left / trials if trials else 0.0
    ks = ks_test(centers, two_lump_center_cdf(params.separation, params.width, params.alpha))
    trace.check("collapse_half_half", within_sigma(frac, 0.5, trials))
    trace.check("one_lump_after_hit", concentrated)
    trace.check("center_ks", ks.passes(SIGNIFICANCE))

    # hit times for several constituents
    multi = grw_mod.GrwParams(params.lam, params.alpha, tuple(params.masses))
    hits = grw_mod.sample_hit_times(multi, params.duration, rng)
    per = {}
    for i, m in enumerate(multi.masses):
        ts = np.array([h.time for h in hits if h.particle == i])
        gaps = np.diff(np.concatenate([[0.0], ts]))
        rate = params.lam * m
        ks_i = ks_exponential(gaps, rate) if len(gaps) > 1 else None
        exp_n = rate * params.duration
        ok = abs(len(ts) - exp_n) <= 3 * math.sqrt(exp_n) if exp_n > 0 else len(ts) == 0
        trace.check(f"hit_count_{i}", ok)
        if ks_i is not None:
            trace.check(f"inter_hit_ks_{i}", ks_i.passes(SIGNIFICANCE))
        per[str(i)] = {"hits": len(ts), "expected": exp_n,
                       "ks_pvalue": None if ks_i is None else ks_i.pvalue}
    total_exp = multi.total_rate * params.duration
    trace.check("total_rate", abs(len(hits) - total_exp) <= 3 * math.sqrt(total_exp))
    for h in hits[:20]:
        trace.add("hit", "", data={"time": h.time, "particle": h.particle})
    trace.summary = {
        "trials": trials,
        "collapse_left_fraction": frac,
        "expected": {"collapse_left_fraction": 0.5, "sigma": binomial_sigma(0.5, max(trials, 1)),
                     "basis": "born-rule"},
        "center_ks": {"statistic": ks.statistic, "pvalue": ks.pvalue},
        "hits": {"per_particle": per, "total": len(hits), "expected_total": total_exp,
                 "basis": "poisson"},
        "one_year_hit_probability": grw_mod.hit_probability(grw_mod.LAMBDA_GRW, grw_mod.SECONDS_PER_YEAR),
    }
    return trace


def two_level_setup(weights) -> tuple[StateVector, np.ndarray]:
    w = np.asarray(weights, dtype=float)
    if w.size < 2 or np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with at least two entries")
    w = w / w.sum()
    eig = np.arange(w.size, 0, -1, dtype=float)  # distinct eigenvalues n, ..., 1
    eig = eig - eig.mean()
    return StateVector(np.sqrt(w), (w.size,)), np.diag(eig).astype(complex)


def scenario_csl(params: CslScenarioParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("csl", seed)
    rng = make_rng(seed)
    psi0, a = two_level_setup(params.weights)
    res = csl_mod.csl_run(psi0, None, [a], params.gamma, params.total_time, params.dt, trials, rng,
                          method=params.method, n_records=params.n_records,
                          trajectory_members=params.trajectory_members)
    labels, born = csl_mod.born_weights(psi0, [a])
    for row in res.trajectory_rows:
        trace.add("trajectory", "", data=row)
    for t, m, e, cw in zip(res.times, res.raw_mean_norm2, res.raw_mean_norm2_err, res.cooked_manifold_weights):
        trace.add("ensemble", "", data={"t": t, "raw_mean_norm2": m, "raw_mean_norm2_err": e,
                                        "cooked_manifold_weights": cw})
    band = 3 * np.maximum(res.reduced_fraction_err, 1e-12)
    trace.check("martingale", bool(np.all(np.abs(res.raw_mean_norm2 - 1) <= 3 * res.raw_mean_norm2_err + 1e-9)))
    if params.gamma * params.total_time >= 10:
        trace.check("born_frequencies", bool(np.all(np.abs(res.reduced_fractions - born) <= band)))
    trace.summary = {
        "trials": trials,
        "method": res.method,
        "dt": res.dt,
        "manifolds": [list(l) for l in labels],
        "reduced_fractions": res.reduced_fractions,
        "reduced_fraction_err": res.reduced_fraction_err,
        "expected": {"values": born, "basis": "born-rule"},
        "effective_sample_size": res.effective_sample_size,
        "raw_mean_norm2_final": float(res.raw_mean_norm2[-1]),
    }
    return trace


# ----------------------------------------------------------------- toy model

def scenario_toy_one(params: ToyOneParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("toy-one", seed)
    rng = make_rng(seed)
    cfg = toy.one_particle_config(_complex(params.alpha), _complex(params.beta),
                                  r_time=params.r_time, g=params.g)
    p_plus = abs(cfg.initial_state.amplitudes[0]) ** 2
    wl = cfg.particles[0]
    before, after = wl.at(0.5 * params.r_time), wl.at(params.r_time + 1.0)
    n_plus, consistent = 0, True
    for i in range(trials):
        log = toy.EventLog()
        v_before = toy.property_at(before, 0, cfg, log, rng)
        v_after = toy.property_at(after, 0, cfg, log, rng)
        if params.g == 1:
            out = log.get("A").outcome
            n_plus += out == 1
            consistent &= v_after.is_definite and v_after.value == out
        consistent &= not v_before.is_definite or p_plus in (0.0, 1.0)
        if i < 20:
            trace.add("run", f"run {i}", data={"before": str(v_before), "after": str(v_after)},
                      outcomes=log.outcomes())
    trace.check("verdicts", consistent)
    summary = {"trials": trials}
    if params.g == 1 and trials:
        f = n_plus / trials
        if 0.0 < p_plus < 1.0:
            trace.check("born_frequency", within_sigma(f, p_plus, trials))
        summary.update({"P(+)": f, "expected": {"P(+)": p_plus, "basis": "born-rule"}})
    trace.summary = summary
    return trace


def scenario_toy_two(params: ToyTwoParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("toy-two", seed)
    rng = make_rng(seed)
    cfg = params.config()
    top = toy.final_surface(cfg)
    tallies = {"A": {1: 0, -1: 0}, "B": {1: 0, -1: 0}}
    same = 0
    for i in range(trials):
        out = toy.run_once(cfg, rng, top)
        for k, v in out.items():
            tallies[k][v] += 1
        if len(out) == 2 and out["A"] == out["B"]:
            same += 1
        if i < 20:
            trace.add("run", f"run {i}", outcomes=out)
    if params.g_a and params.g_b:
        trace.check("anticorrelation", same == 0)
    for k, t in tallies.items():
        n = t[1] + t[-1]
        if n:
            trace.check(f"{k}_half", within_sigma(t[1] / n, 0.5, n))
    trace.summary = {"trials": trials, "counts": {k: {str(s): c for s, c in t.items()} for k, t in tallies.items()},
                     "same_outcome": same,
                     "expected": {"P(+)": 0.5, "same_outcome": 0, "basis": "closed-form"}}
    return trace


def scenario_toy_stats(params: ToyTwoParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("toy-stats", seed)
    rng = make_rng(seed)
    cfg = params.config(1, 1)
    table = toy.stats_parameter_independence(cfg, trials, rng)
    rows = dict(table.rows())
    for name, p in rows.items():
        trace.check(name, within_sigma(p, 0.5, trials))
    trace.check("never_same_outcome", table.same_outcome_both_on == 0)
    trace.add("table", "parameter independence", probabilities=rows)
    trace.summary = {"trials": trials, "table": rows, "same_outcome_both_on": table.same_outcome_both_on,
                     "expected": {"entry": 0.5, "same_outcome_both_on": 0, "basis": "closed-form"}}
    return trace


def counterfactual_cases(rng: np.random.Generator | None = None):
    """The three standard claims, evaluated on a run with A at R fixed to -1.

    Returns ``[(name, verdict, expected)]``.
    """
    cfg_on = toy.two_particle_config(g_a=1, g_b=1)
    a, b = cfg_on.apparatus("A"), cfg_on.apparatus("B")
    log = toy.EventLog()
    log.record("A", -1, a.location)
    log_on = log.copy()
    log_on.record("B", +1, b.location)
    q = SpacetimePoint(a.location.x, a.location.t + 0.5)           # observer just after R
    w1 = cfg_on.particles[0]
    t_point = w1.future_cone_crossing(q)
    t_point = w1.at(t_point.t + 1.0)                                 # inside the observer's future cone
    cases = [
        ("actual", toy.counterfactual_classify(
            toy.CounterfactualClaim(q, b.location, +1, toggled=False), cfg_on, log_on),
         toy.CounterfactualVerdict.LEGITIMATE),
        ("spacelike_toggle", toy.counterfactual_classify(
            toy.CounterfactualClaim(q, b.location, +1, toggled=True), cfg_on.with_switches(B=0), log),
         toy.CounterfactualVerdict.ILLEGITIMATE),
        ("timelike_toggle", toy.counterfactual_classify(
            toy.CounterfactualClaim(q, t_point, +1, toggled=True), cfg_on.with_switches(B=0), log),
         toy.CounterfactualVerdict.LEGITIMATE),
    ]
    return cases


def four_lambda_model() -> toy.HiddenVariableModel:
    return toy.HiddenVariableModel(
        ("l1", "l2", "l3", "l4"),
        {"l1": +1, "l2": +1, "l3": -1, "l4": -1},
        {"l1": (+1, -1), "l2": (-1, +1), "l3": (+1, -1), "l4": (-1, +1)})


def scenario_counterfactual(params: EmptyParams, seed, trials, forced=None) -> RunTrace:
    trace = RunTrace("counterfactual", seed)
    for name, got, want in counterfactual_cases():
        trace.add("claim", name, data={"verdict": got.value, "expected": want.value})
        trace.check(name, got is want)
    report = toy.hv_counterfactual_demo(four_lambda_model())
    for e in report.entries:
        trace.add("hidden_variable", str(e.lam), data={
            "same_lambda_B": e.same_lambda_b, "same_outcome_B": list(e.same_outcome_b),
            "worlds_from_opposite_set": list(e.worlds_from_opposite_set), "disagree": e.disagree})
    trace.check("hv_disagreement", report.all_disagree)
    trace.summary = {"verdicts": {r.description: r.data["verdict"] for r in trace.records if r.stage == "claim"},
                     "flagged": list(report.flagged),
                     "expected": {"verdicts": {"actual": "Legitimate", "spacelike_toggle": "Illegitimate",
                                               "timelike_toggle": "Legitimate"},
                                  "flagged": ["l2"], "basis": "enumeration"}}
    return trace


# ----------------------------------------------------------------- relativistic

def scenario_relativistic_t2(params: RelativisticParams, seed, trials, forced=None) -> RunTrace:
    if forced is not None:
        trace = rel.run_full(forced, make_rng(seed) if seed is not None else None, params.state, params.variant, seed, params.dump_amplitudes)
        trace.summary["final_digest"] = trace.records[-1].state_digest
        return trace
    trace = RunTrace("relativistic-t2", seed)
    rng = make_rng(seed)
    s1 = rel.evolve_sigma1(rel.initial_state(params.state), params.variant)
    probs = rel.right_triple_probabilities(s1)
    counts = {w: 0 for w in rel.TRIPLES}
    all_ok = True
    for i in range(trials):
        s2 = rel.reduce_right(s1, None, rng)
        fin = rel.evolve_final(s2, rng)
        omegas = rel.all_omegas(fin)
        counts[s2.right_outcomes] += 1
        if abs(P.SINGLET.inner(params.state)) ** 2 >= 1 - 1e-10:
            all_ok &= rel.pair_sums(omegas) == (0, 0, 0) and rel.singlet_weight(fin.state) >= 1 - 1e-10
        else:
            all_ok &= rel.t2_verdict(fin.state).is_definite
        if i < 20:
            trace.add("run", f"run {i}", fin.state, outcomes=dict(zip(("3", "6", "2*", "4*", "3*", "6*"), omegas)))
    gof = chi2_goodness([counts[w] for w in rel.TRIPLES], [probs[w] for w in rel.TRIPLES])
    trace.check("final_invariants", all_ok)
    trace.check("triple_chi2", gof.passes(SIGNIFICANCE) if trials >= 50 else True)
    trace.summary = {"trials": trials,
                     "triple_counts": {",".join(map(str, w)): c for w, c in counts.items()},
                     "expected": {"triple_probabilities": {",".join(map(str, w)): p for w, p in probs.items()},
                                  "basis": "enumeration"},
                     "chi2": {"statistic": gof.statistic, "pvalue": gof.pvalue, "dof": gof.dof}}
    return trace


SCENARIOS: dict[str, tuple[type[_Params], Callable, bool]] = {
    # name: (parameter model, runner, stochastic)
    "tz": (ProtocolParams, scenario_tz, True),
    "t2": (ProtocolParams, scenario_t2, True),
    "signaling": (SignalingParams, scenario_signaling, True),
    "grw": (GrwScenarioParams, scenario_grw, True),
    "csl": (CslScenarioParams, scenario_csl, True),
    "toy-one": (ToyOneParams, scenario_toy_one, True),
    "toy-two": (ToyTwoParams, scenario_toy_two, True),
    "toy-stats": (ToyTwoParams, scenario_toy_stats, True),
    "counterfactual": (EmptyParams, scenario_counterfactual, False),
    "relativistic-t2": (RelativisticParams, scenario_relativistic_t2, True),
}
