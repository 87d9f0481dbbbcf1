import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from relcollapse import protocol as P
from relcollapse import relativistic as R
from relcollapse.linalg import StateVector, commutator_norm, equal_up_to_phase, make_rng
from relcollapse.spacetime import SpacelikeSurface, SpacetimePoint
from relcollapse.trace import state_digest


@pytest.fixture(scope="module")
def sigma1():
    return R.evolve_sigma1()


def test_factors_compose_to_u():
    rng = np.random.default_rng(3)
    cols = rng.normal(size=(2916, 6)) + 1j * rng.normal(size=(2916, 6))
    u = P.build_u_total().entries
    split = R.apply_steps(R.u_factor_steps("left"), R.apply_steps(R.u_factor_steps("right"), cols))
    np.testing.assert_allclose(split, u @ cols, atol=1e-12)


def test_factors_commute():
    u1, u2 = R.u_factor("left"), R.u_factor("right")
    assert commutator_norm(u1, u2) < 1e-12


def test_sigma1_state(sigma1):
    assert O.phase_equal(sigma1.state.amplitudes, O.SIGMA1)


def test_sigma1_singlet_weight(sigma1):
    assert R.singlet_weight(sigma1.state) == pytest.approx(0.25, abs=1e-12)


def test_literal_variant_fails():
    lit = R.evolve_sigma1(variant="literal").state.amplitudes
    assert not O.phase_equal(lit, O.SIGMA1)
    assert abs(np.vdot(O.SIGMA1, lit)) < 1e-12


def test_printed_plus_y_is_inconsistent():
    # with |1,-1> in place of |-1,-1> in the 2*,4* blocks the expansion no longer matches
    plus_y = O.tri((0, 1), (1, 0), (1, -1))
    minus_y = O.tri((0, -1), (1, 1), (-1, 0))
    a24, b24, d24 = plus_y - minus_y, plus_y + minus_y, minus_y - plus_y
    a36, c36 = O._A36, O._C36
    printed = (1j * O.state(O.UU, a36, a24, O._A33) + O.state(O.UD, a36, b24, O._B33)
               - O.state(O.DU, c36, b24, O._A33) - 1j * O.state(O.DD, c36, d24, O._B33))
    printed /= np.linalg.norm(printed)
    assert not O.phase_equal(R.evolve_sigma1().state.amplitudes, printed)


def test_right_triples_uniform(sigma1):
    probs = R.right_triple_probabilities(sigma1)
    assert len(probs) == 27
    np.testing.assert_allclose(list(probs.values()), 1 / 27, atol=1e-12)


def test_branch_term_count(sigma1):
    # each system branch of sigma1 carries 54 probe terms and weight 1/4
    t = sigma1.state.amplitudes.reshape(4, 729)
    for row in t:
        assert np.count_nonzero(np.abs(row) > 1e-12) == 54
        assert np.vdot(row, row).real == pytest.approx(0.25, abs=1e-12)


def test_reduced_state_000(sigma1):
    s2 = R.reduce_right(sigma1, (0, 0, 0))
    assert s2.probability == pytest.approx(1 / 27)
    assert O.phase_equal(s2.state.amplitudes, O.SIGMA2_000)


@pytest.mark.parametrize("forced, expected", [((0, 0, 0), O.FINAL_000), ((1, 0, 0), O.FINAL_100)])
def test_worked_cases(sigma1, forced, expected):
    fin = R.evolve_final(R.reduce_right(sigma1, forced))
    assert O.phase_equal(fin.state.amplitudes, expected)
    assert R.pair_sums(R.all_omegas(fin)) == (0, 0, 0)


def test_omegas_100(sigma1):
    fin = R.evolve_final(R.reduce_right(sigma1, (1, 0, 0)))
    assert R.all_omegas(fin) == (-1, 1, 0, 0, 0, 0)


def test_all_triples_end_in_singlet(sigma1):
    for w in R.TRIPLES:
        fin = R.evolve_final(R.reduce_right(sigma1, w))
        assert R.pair_sums(R.all_omegas(fin)) == (0, 0, 0)
        assert R.singlet_weight(fin.state) == pytest.approx(1.0, abs=1e-10)
        assert equal_up_to_phase(R.system_factor(fin), P.SINGLET)


def test_forced_zero_probability_rejected():
    # every probe in |0>: only the triple (0, 0, 0) is possible
    basis = StateVector.basis((0, 1) + (1,) * 6, R.DIMS)
    staged = R.StagedState(R.Stage.SIGMA1, basis)
    assert R.reduce_right(staged, (0, 0, 0)).probability == pytest.approx(1.0)
    with pytest.raises(P.ProtocolError):
        R.reduce_right(staged, (1, 0, 0))


def test_forced_values_validated(sigma1):
    with pytest.raises(ValueError):
        R.reduce_right(sigma1, (2, 0, 0))
    with pytest.raises(ValueError):
        R.reduce_right(sigma1)


def test_up_up_spot_check():
    rng = make_rng(9)
    s1 = R.evolve_sigma1(R.initial_state(P.UP_UP))
    for _ in range(5):
        fin = R.evolve_final(R.reduce_right(s1, rng=rng), rng)
        omegas = R.all_omegas(fin)
        cls = P.classify_t2(omegas)
        assert cls is not P.Classification.SINGLET
        assert abs(P.CLASS_STATES[cls].inner(R.system_factor(fin))) == pytest.approx(1.0, abs=1e-10)


def test_non_definite_final_needs_rng():
    s1 = R.evolve_sigma1(R.initial_state(P.UP_UP))
    s2 = R.reduce_right(s1, rng=make_rng(0))
    fin = R.evolve_final(s2, make_rng(1))
    assert R.t2_verdict(fin.state).is_definite
    assert R.definite_probe_configuration(fin.state) is not None


def test_run_full_trace_digest():
    trace = R.run_full((0, 0, 0))
    assert trace.ok
    assert trace.records[-1].state_digest == state_digest(StateVector(O.FINAL_000, R.DIMS))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_runs_end_in_singlet(seed):
    trace = R.run_full(None, make_rng(seed))
    assert trace.ok
    assert trace.summary["pair_sums"] == (0, 0, 0)


def test_t2_indefinite_between_readings():
    geom = R.ProtocolGeometry()
    p_right = SpacetimePoint(5.0, 3.5)    # after the right couplings, before the read-out
    p_left = SpacetimePoint(-5.0, 0.5)    # before any left coupling
    assert not R.t2_property_at_pair(p_left, p_right, geom).is_definite


def test_t2_definite_before_any_coupling():
    geom = R.ProtocolGeometry()
    v = R.t2_property_at_pair(SpacetimePoint(-5.0, 0.5), SpacetimePoint(5.0, 0.5), geom)
    assert v.is_definite and v.value == 0


def test_t2_definite_after_everything():
    geom = R.ProtocolGeometry()
    v = R.t2_property_at_pair(SpacetimePoint(-5.0, 6.0), SpacetimePoint(5.0, 6.0), geom,
                              right_outcomes=(0, 0, 0))
    assert v.is_definite and v.value == 0


def test_surface_above_read_needs_outcomes():
    geom = R.ProtocolGeometry()
    with pytest.raises(ValueError):
        R.state_on_protocol_surface(geom, SpacelikeSurface.flat(10.0))


def test_geometry_validation():
    with pytest.raises(ValueError):
        R.ProtocolGeometry(right_times=(3.0, 2.0, 1.0)).events("right")
