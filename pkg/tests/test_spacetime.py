import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from relcollapse.spacetime import (SpacelikeSurface, SpacetimePoint, WorldLine, in_causal_future,
                                   in_causal_past, in_volume, interval2, lorentz_boost,
                                   pair_cone_surface, past_cone_surface, spacelike)

coord = st.floats(-50, 50, allow_nan=False)
velocity = st.floats(-0.95, 0.95)
points = st.builds(SpacetimePoint, coord, coord)


@settings(max_examples=200)
@given(points, points, velocity)
def test_boost_preserves_interval(p, q, v):
    a = interval2(lorentz_boost(p, v), lorentz_boost(q, v))
    assert a == pytest.approx(interval2(p, q), abs=1e-7 * (1 + abs(interval2(p, q))))


@settings(max_examples=200)
@given(points, points, velocity)
def test_boost_preserves_causal_order(p, q, v):
    d = interval2(p, q)
    assume(abs(d) > 1e-6 * (1 + abs(p.t - q.t) ** 2 + abs(p.x - q.x) ** 2))
    pb, qb = p.boosted(v), q.boosted(v)
    assert in_causal_past(q, p) == in_causal_past(qb, pb)
    assert spacelike(p, q) == spacelike(pb, qb)


@given(points, points)
def test_past_future_duality(p, q):
    assert in_causal_past(q, p) == in_causal_future(p, q)


def test_light_cone_is_closed():
    p = SpacetimePoint(0.0, 1.0)
    assert in_causal_past(SpacetimePoint(1.0, 0.0), p)
    assert not in_causal_past(SpacetimePoint(1.0 + 1e-9, 0.0), p)


def test_boost_velocity_bound():
    with pytest.raises(ValueError):
        lorentz_boost(SpacetimePoint(0, 0), 1.0)


def test_surface_validation():
    with pytest.raises(ValueError):
        SpacelikeSurface([(0, 0), (1, 1)])
    SpacelikeSurface([(0, 0), (1, 1)], lightlike_ok=True)
    with pytest.raises(ValueError):
        SpacelikeSurface([(0, 0), (0, 0.5)])
    with pytest.raises(ValueError):
        SpacelikeSurface([])


def test_surface_flat_extension():
    s = SpacelikeSurface([(0, 0), (1, 0.5)])
    assert s.at(-10) == 0 and s.at(10) == 0.5


def test_in_volume_boundary_convention():
    s0, s = SpacelikeSurface.flat(0), SpacelikeSurface.flat(1)
    assert in_volume(SpacetimePoint(0, 0), s, s0)
    assert not in_volume(SpacetimePoint(0, 1), s, s0)
    assert in_volume(SpacetimePoint(0, 0.999), s, s0)


def test_past_cone_single_point():
    s = past_cone_surface(SpacetimePoint(0.0, 2.0), SpacelikeSurface.flat(0.0))
    assert s.knots == [(-2.0, 0.0), (0.0, 2.0), (2.0, 0.0)]
    assert s.lightlike_ok


def test_past_cone_apex_below_initial_rejected():
    with pytest.raises(ValueError):
        past_cone_surface(SpacetimePoint(0.0, -1.0), SpacelikeSurface.flat(0.0))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(0, 8)), min_size=1, max_size=3),
       st.floats(-20, 20))
def test_past_cone_envelope(apexes, x):
    pts = [SpacetimePoint(a, b) for a, b in apexes]
    s0 = SpacelikeSurface([(-5, 0.0), (5, 0.0)])
    s = past_cone_surface(pts, s0)
    expected = max([0.0] + [p.t - abs(x - p.x) for p in pts])
    assert s.at(x) == pytest.approx(expected, abs=1e-9)


def test_past_cone_over_tilted_initial_surface():
    s0 = SpacelikeSurface([(-10, -2.0), (10, 2.0)])
    p = SpacetimePoint(0.0, 3.0)
    s = past_cone_surface(p, s0)
    for x in np.linspace(-15, 15, 61):
        assert s.at(x) == pytest.approx(max(s0.at(x), 3.0 - abs(x)), abs=1e-9)


def test_pair_cone_surface_contains_both_apexes():
    s = pair_cone_surface(SpacetimePoint(-5, 2), SpacetimePoint(5, 3), SpacelikeSurface.flat(0))
    assert s.at(-5) == pytest.approx(2) and s.at(5) == pytest.approx(3)
    assert s.at(0) == pytest.approx(0)


@settings(max_examples=100)
@given(st.floats(-5, 5), st.floats(-0.9, 0.9), points)
def test_future_cone_crossing(x0, v, e):
    wl = WorldLine(SpacetimePoint(x0, 0.0), v)
    c = wl.future_cone_crossing(e)
    assert wl.contains(c, tol=1e-6)
    assert c.t >= e.t - 1e-9
    assert abs(c.x - e.x) == pytest.approx(c.t - e.t, abs=1e-6 * (1 + abs(c.t - e.t)))
    # just before the crossing the world line is outside the cone
    if c.t - e.t > 1e-6:
        before = wl.at(c.t - 1e-3 * (c.t - e.t))
        assert not in_causal_past(e, before)


def test_world_line_boost():
    wl = WorldLine(SpacetimePoint(1.0, 0.0), 0.3)
    v = 0.5
    b = wl.boosted(v)
    for t in (0.0, 2.0, 7.5):
        assert b.contains(wl.at(t).boosted(v), tol=1e-9)


def test_surface_boost_maps_points():
    s = SpacelikeSurface([(-3, 0.0), (0, 1.0), (3, 0.5)])
    v = 0.4
    sb = s.boosted(v)
    for x in np.linspace(-20, 20, 41):
        p = SpacetimePoint(x, s.at(x)).boosted(v)
        assert sb.at(p.x) == pytest.approx(p.t, abs=1e-9)


def test_dominates():
    low, high = SpacelikeSurface.flat(0), SpacelikeSurface([(-1, 0.0), (0, 0.5), (1, 0.0)])
    assert high.dominates(low) and not low.dominates(high)
