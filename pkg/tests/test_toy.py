import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import geometry as G
from relcollapse import toy
from relcollapse.linalg import make_rng
from relcollapse.scenarios import counterfactual_cases, four_lambda_model
from relcollapse.spacetime import SpacelikeSurface, SpacetimePoint, WorldLine, in_causal_past, past_cone_surface

V = toy.CounterfactualVerdict


def test_event_log_write_once():
    log = toy.EventLog()
    log.record("A", 1, SpacetimePoint(0, 1))
    with pytest.raises(ValueError):
        log.record("A", -1, SpacetimePoint(0, 1))
    with pytest.raises(ValueError):
        log.record("B", 0, SpacetimePoint(0, 1))


def test_config_validation():
    wl = WorldLine(SpacetimePoint(0, 0), 0)
    state = toy.singlet_state()
    with pytest.raises(ValueError):
        toy.ScenarioConfig((wl,), (), state)
    with pytest.raises(ValueError):
        toy.ScenarioConfig((wl, wl), (toy.Apparatus("A", 0, SpacetimePoint(1, 1)),), state)
    with pytest.raises(ValueError):
        toy.Apparatus("A", 0, SpacetimePoint(0, 1), g=2)
    cfg = toy.two_particle_config()
    with pytest.raises(KeyError):
        cfg.with_switches(C=0)


def test_initial_surface_state_unchanged():
    cfg = toy.two_particle_config()
    s = toy.state_on_surface(cfg, SpacelikeSurface.flat(0.5), toy.EventLog())
    assert s is cfg.initial_state


def test_sampling_needs_rng():
    cfg = toy.two_particle_config()
    with pytest.raises(ValueError):
        toy.state_on_surface(cfg, SpacelikeSurface.flat(5), toy.EventLog())


def test_one_particle_born_frequency():
    cfg = toy.one_particle_config(0.6, 0.8)
    rng = make_rng(0)
    n = 20000
    plus = sum(toy.run_once(cfg, rng)["A"] == 1 for _ in range(n))
    assert abs(plus / n - 0.36) <= 3 * math.sqrt(0.36 * 0.64 / n)


def test_one_particle_verdicts():
    cfg = toy.one_particle_config(0.6, 0.8, r_time=2.0)
    log = toy.EventLog()
    rng = make_rng(1)
    assert not toy.property_at(SpacetimePoint(0, 1.0), 0, cfg, log, rng).is_definite
    after = toy.property_at(SpacetimePoint(0, 3.0), 0, cfg, log, rng)
    assert after.is_definite and after.value == log.get("A").outcome
    # the apparatus point itself is not yet crossed (strict upper bound)
    assert not toy.property_at(SpacetimePoint(0, 2.0), 0, cfg, log, rng).is_definite


def test_switched_off_apparatus_leaves_state():
    cfg = toy.one_particle_config(0.6, 0.8, g=0)
    log = toy.EventLog()
    v = toy.property_at(SpacetimePoint(0, 10.0), 0, cfg, log, make_rng(0))
    assert not v.is_definite and len(log) == 0


def test_anticorrelation_and_halves():
    cfg = toy.two_particle_config()
    rng = make_rng(3)
    outs = [toy.run_once(cfg, rng) for _ in range(4000)]
    assert all(o["A"] == -o["B"] for o in outs)
    f = sum(o["A"] == 1 for o in outs) / len(outs)
    assert abs(f - 0.5) <= 3 * math.sqrt(0.25 / len(outs))


def test_parameter_independence_table():
    table = toy.stats_parameter_independence(toy.two_particle_config(), 3000, make_rng(8))
    rows = dict(table.rows())
    assert len(rows) == 8
    assert table.same_outcome_both_on == 0
    for name, p in rows.items():
        assert abs(p - 0.5) <= 3 * math.sqrt(0.25 / 3000), name


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_composition_consistency(seed):
    rng = np.random.default_rng(seed)
    cfg = G.random_two_particle(rng)
    sigma, sigma1 = G.random_surface_pair(rng)
    log = toy.EventLog()
    toy.state_on_surface(cfg, sigma, log, rng)
    via = toy.state_on_surface(cfg, sigma1, log, rng)
    direct = toy.state_on_surface(cfg, sigma1, log.copy())
    assert np.array_equal(via.amplitudes, direct.amplitudes)


def test_composition_distribution():
    # visiting an intermediate surface does not change outcome statistics
    cfg = toy.two_particle_config(l_time=1.0, r_time=2.0)
    mid = SpacelikeSurface.flat(1.5)      # crosses L only
    top = SpacelikeSurface.flat(5.0)
    rng = make_rng(21)
    n = 4000
    via = direct = 0
    for _ in range(n):
        log = toy.EventLog()
        toy.state_on_surface(cfg, mid, log, rng)
        toy.state_on_surface(cfg, top, log, rng)
        via += log.get("A").outcome == 1
        direct += toy.run_once(cfg, rng, top)["A"] == 1
    assert abs(via - direct) / n < 4 * math.sqrt(0.5 / n)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.8, 0.8))
def test_boost_invariant_verdicts(seed, v):
    rng = np.random.default_rng(seed)
    cfg = G.random_two_particle(rng, g_b=0)
    sigma, _ = G.random_surface_pair(rng)
    cb = cfg.boosted(v)
    sb = sigma.boosted(v)
    for a, ab in zip(cfg.apparatuses, cb.apparatuses):
        assert toy.in_volume(a.location, sigma, cfg.sigma0) == toy.in_volume(ab.location, sb, cb.sigma0)
    p = G.random_point(rng, 0.01, 8.0, 8.0)
    log, log_b = toy.EventLog(), toy.EventLog()
    a = toy.property_at(p, 0, cfg, log, np.random.default_rng(1))
    b = toy.property_at(p.boosted(v), 0, cb, log_b, np.random.default_rng(1))
    assert a.is_definite == b.is_definite


def test_spacelike_point_indefinite_future_point_definite():
    cfg = toy.two_particle_config(g_b=0)
    rng = make_rng(4)
    log = toy.EventLog()
    r = cfg.apparatus("A").location
    # particle 1 at a point space-like to R
    assert not toy.property_at(SpacetimePoint(-5.0, r.t + 1.0), 0, cfg, log, rng).is_definite
    # particle 1 inside the future cone of R
    q = cfg.particles[0].future_cone_crossing(r)
    v = toy.property_at(SpacetimePoint(q.x, q.t + 0.1), 0, cfg, log, rng)
    assert v.is_definite and v.value == -log.get("A").outcome


def test_pointer_always_definite():
    cfg = toy.two_particle_config()
    rng = make_rng(2)
    log = toy.EventLog()
    r = cfg.apparatus("A").location
    for t in np.linspace(0.0, 5.0, 21):
        v = toy.pointer_at("A", SpacetimePoint(r.x, t), cfg, log, rng)
        assert v.is_definite
        assert v.value == ("r" if t <= r.t else ("+" if log.get("A").outcome == 1 else "-"))


def test_pointer_off_ready():
    cfg = toy.two_particle_config(g_a=0)
    assert toy.pointer_at("A", SpacetimePoint(5.0, 9.0), cfg, toy.EventLog()).value == "r"


def test_counterfactual_three_cases():
    for name, got, want in counterfactual_cases():
        assert got is want, name


def test_counterfactual_basis_must_be_known():
    cfg = toy.two_particle_config()
    log = toy.EventLog()
    log.record("A", -1, cfg.apparatus("A").location)
    early = SpacetimePoint(5.0, 0.5)
    claim = toy.CounterfactualClaim(early, cfg.apparatus("B").location, 1, toggled=True, basis=("A",))
    with pytest.raises(ValueError):
        toy.counterfactual_classify(claim, cfg, log)
    no_basis = toy.CounterfactualClaim(early, cfg.apparatus("B").location, 1, toggled=True)
    with pytest.raises(ValueError):
        toy.counterfactual_classify(no_basis, cfg, log)


def test_counterfactual_timelike_target():
    cfg = toy.two_particle_config()
    a = cfg.apparatus("A").location
    log = toy.EventLog()
    log.record("A", 1, a)
    vantage = SpacetimePoint(a.x, a.t + 1)
    target = SpacetimePoint(a.x - 2, a.t + 5)
    assert in_causal_past(a, target)
    claim = toy.CounterfactualClaim(vantage, target, -1, toggled=True)
    assert toy.counterfactual_classify(claim, cfg, log) is V.LEGITIMATE


def test_hidden_variable_demo():
    report = toy.hv_counterfactual_demo(four_lambda_model())
    assert report.flagged == ("l2",)
    assert report.all_disagree
    (entry,) = report.entries
    assert entry.same_lambda_b == 1
    assert entry.same_outcome_b == (-1,)
    assert entry.worlds_from_opposite_set == ("l3",)


def test_hidden_variable_model_rejects_local():
    with pytest.raises(ValueError):
        toy.HiddenVariableModel(("a",), {"a": 1}, {"a": (1, -1)})


def test_hidden_variable_agreeing_model_raises():
    # the only both-on world with A = +1 also has B = +1
    model = toy.HiddenVariableModel(("a", "c"), {"a": 1, "c": -1}, {"a": (-1, 1), "c": (1, 1)})
    with pytest.raises(AssertionError):
        toy.hv_counterfactual_demo(model)


def test_past_cone_of_apparatus_point_flags():
    s = past_cone_surface(SpacetimePoint(0.0, 1.0), SpacelikeSurface.flat(0))
    assert s.lightlike_ok
