"""1+1 dimensional Minkowski geometry with c = 1.

Space-like surfaces are graphs ``t = f(x)`` of piecewise-linear functions,
given by knots and extended flat beyond the first and last knot.  Causal
relations use the closed light cone: ``q`` is in the causal past of ``p``
iff ``p.t - q.t >= |p.x - q.x|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class SpacetimePoint:
    x: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.t)):
            raise ValueError("spacetime coordinates must be finite")

    def boosted(self, v: float) -> "SpacetimePoint":
        return lorentz_boost(self, v)


def _gamma(v: float) -> float:
    if not abs(v) < 1.0:
        raise ValueError(f"boost velocity must satisfy |v| < 1, got {v}")
    return 1.0 / math.sqrt(1.0 - v * v)


def lorentz_boost(p: SpacetimePoint, v: float) -> SpacetimePoint:
    """Coordinates of ``p`` in a frame moving with velocity ``v``."""
    g = _gamma(v)
    return SpacetimePoint(g * (p.x - v * p.t), g * (p.t - v * p.x))


def interval2(p: SpacetimePoint, q: SpacetimePoint) -> float:
    """``dt^2 - dx^2``: positive for time-like, negative for space-like separation."""
    return (p.t - q.t) ** 2 - (p.x - q.x) ** 2


def in_causal_past(q: SpacetimePoint, p: SpacetimePoint) -> bool:
    """True iff ``q`` lies in the closed past light cone of ``p``."""
    return p.t - q.t >= abs(p.x - q.x)


def in_causal_future(q: SpacetimePoint, p: SpacetimePoint) -> bool:
    return in_causal_past(p, q)


def spacelike(p: SpacetimePoint, q: SpacetimePoint) -> bool:
    return abs(p.t - q.t) < abs(p.x - q.x)


@dataclass(frozen=True)
class WorldLine:
    """Inertial world line ``x(t) = origin.x + velocity * (t - origin.t)``."""

    origin: SpacetimePoint
    velocity: float = 0.0

    def __post_init__(self):
        _gamma(self.velocity)

    def at(self, t: float) -> SpacetimePoint:
        return SpacetimePoint(self.origin.x + self.velocity * (t - self.origin.t), t)

    def contains(self, p: SpacetimePoint, tol: float = 1e-9) -> bool:
        return abs(self.at(p.t).x - p.x) <= tol

    def future_cone_crossing(self, e: SpacetimePoint) -> SpacetimePoint:
        """First point of this world line on or inside the future light cone of ``e``."""
        x0 = self.at(e.t).x
        d = x0 - e.x
        # solve |d + v s| = s for the smallest s >= 0
        if d == 0.0:
            return self.at(e.t)
        # |d + v s| = s, and d + v s keeps the sign of d since |v| < 1
        s = abs(d) / (1.0 - self.velocity * math.copysign(1.0, d))
        return self.at(e.t + s)

    def boosted(self, v: float) -> "WorldLine":
        o = lorentz_boost(self.origin, v)
        return WorldLine(o, (self.velocity - v) / (1.0 - self.velocity * v))


class SpacelikeSurface:
    """Piecewise-linear surface ``t = f(x)`` through ``knots``, flat outside them.

    Every segment must have ``|dt/dx| < 1``.  Light-cone pieces with slope
    exactly 1 are admitted only with ``lightlike_ok=True``.
    """

    __slots__ = ("_x", "_t", "lightlike_ok")

    def __init__(self, knots: Iterable[Sequence[float]], lightlike_ok: bool = False):
        arr = np.array([tuple(map(float, k)) for k in knots], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
            raise ValueError("knots must be a non-empty list of (x, t) pairs")
        if not np.all(np.isfinite(arr)):
            raise ValueError("knots must be finite")
        xs, ts = arr[:, 0], arr[:, 1]
        if np.any(np.diff(xs) <= 0):
            raise ValueError("knot x coordinates must be strictly increasing")
        if len(xs) > 1:
            slopes = np.abs(np.diff(ts) / np.diff(xs))
            bad = slopes > 1.0 + SLOPE_TOL if lightlike_ok else slopes >= 1.0
            if np.any(bad):
                raise ValueError(f"surface is not space-like (max |slope| {slopes.max():.6g})")
        xs.flags.writeable = False
        ts.flags.writeable = False
        self._x, self._t = xs, ts
        self.lightlike_ok = bool(lightlike_ok)

    @classmethod
    def flat(cls, t: float = 0.0) -> "SpacelikeSurface":
        return cls([(0.0, t)])

    @property
    def knots(self) -> list[tuple[float, float]]:
        return [(float(x), float(t)) for x, t in zip(self._x, self._t)]

    def __call__(self, x):
        return np.interp(x, self._x, self._t)

    def at(self, x: float) -> float:
        return float(np.interp(x, self._x, self._t))

    def above(self, p: SpacetimePoint) -> bool:
        """Strictly above the surface."""
        return p.t > self.at(p.x)

    def dominates(self, other: "SpacelikeSurface", tol: float = 1e-12) -> bool:
        """``self >= other`` pointwise (checked at the union of knots, exact for PL functions)."""
        xs = np.union1d(self._x, other._x)
        return bool(np.all(self(xs) >= other(xs) - tol))

    def boosted(self, v: float, span: float = 1e4) -> "SpacelikeSurface":
        """The same surface seen from a frame moving with velocity ``v``.

        The flat tails are made explicit out to ``|x| = span`` before the
        boost, so the result is exact for points with ``|x'|`` well inside
        the boosted image of that window.
        """
        xs = list(self._x)
        lo, hi = min(xs[0], -span), max(xs[-1], span)
        pts = [(lo, self.at(lo))] if lo < xs[0] else []
        pts += self.knots
        if hi > xs[-1]:
            pts.append((hi, self.at(hi)))
        out = [lorentz_boost(SpacetimePoint(x, t), v) for x, t in pts]
        return SpacelikeSurface([(p.x, p.t) for p in out], self.lightlike_ok)

    def __repr__(self):
        return f"SpacelikeSurface({self.knots}, lightlike_ok={self.lightlike_ok})"


def in_volume(p: SpacetimePoint, sigma: SpacelikeSurface, sigma0: SpacelikeSurface) -> bool:
    """``p`` lies in the region between ``sigma0`` (inclusive) and ``sigma`` (exclusive)."""
    return sigma0.at(p.x) <= p.t < sigma.at(p.x)


def _line_pieces(surface: SpacelikeSurface):
    """(slope, intercept) of every linear piece including the flat tails."""
    xs, ts = surface._x, surface._t
    pieces = [(0.0, float(ts[0])), (0.0, float(ts[-1]))]
    for i in range(len(xs) - 1):
        m = (ts[i + 1] - ts[i]) / (xs[i + 1] - xs[i])
        pieces.append((float(m), float(ts[i] - m * xs[i])))
    return pieces


def _simplify(xs: np.ndarray, ts: np.ndarray, tol: float = 1e-12):
    keep_x, keep_t = [xs[0]], [ts[0]]
    for i in range(1, len(xs)):
        if abs(xs[i] - keep_x[-1]) <= tol:
            continue
        keep_x.append(xs[i])
        keep_t.append(ts[i])
        # drop the middle of three collinear knots
        while len(keep_x) >= 3:
            (x0, x1, x2), (t0, t1, t2) = keep_x[-3:], keep_t[-3:]
            if abs((t1 - t0) * (x2 - x1) - (t2 - t1) * (x1 - x0)) <= tol * max(1.0, abs(x2 - x0)):
                del keep_x[-2], keep_t[-2]
            else:
                break
    # flat segments at either end are implied by the flat extension
    while len(keep_x) > 1 and abs(keep_t[0] - keep_t[1]) <= tol:
        del keep_x[0], keep_t[0]
    while len(keep_x) > 1 and abs(keep_t[-1] - keep_t[-2]) <= tol:
        del keep_x[-1], keep_t[-1]
    return keep_x, keep_t


def past_cone_surface(points: SpacetimePoint | Sequence[SpacetimePoint],
                      sigma0: SpacelikeSurface) -> SpacelikeSurface:
    """Upper envelope of ``sigma0`` and the past light cones of ``points``.

    ``f(x) = max(f0(x), max_p (p.t - |x - p.x|))``.  With a single point this
    is the surface made of the past light cone of the point and the part of
    ``sigma0`` outside it; with two points it is the boundary of the union of
    the two past cones.  The result carries ``lightlike_ok=True``.
    """
    if isinstance(points, SpacetimePoint):
        points = [points]
    points = list(points)
    if not points:
        raise ValueError("at least one apex point is required")
    for p in points:
        if p.t < sigma0.at(p.x):
            raise ValueError(f"apex {p} lies below the initial surface")
    pieces = _line_pieces(sigma0)
    for p in points:
        pieces += [(1.0, p.t - p.x), (-1.0, p.t + p.x)]
    cand = set(map(float, sigma0._x)) | {float(p.x) for p in points}
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            (m1, c1), (m2, c2) = pieces[i], pieces[j]
            if m1 != m2:
                cand.add((c2 - c1) / (m1 - m2))
    xs = np.array(sorted(cand))

    def f(x):
        vals = sigma0(x)
        for p in points:
            vals = np.maximum(vals, p.t - np.abs(x - p.x))
        return vals

    # include points beyond every breakpoint so the tails are resolved
    pad = 1.0 + float(np.ptp(xs)) if len(xs) > 1 else 1.0
    xs = np.concatenate([[xs[0] - pad], xs, [xs[-1] + pad]])
    kx, kt = _simplify(xs, f(xs))
    return SpacelikeSurface(list(zip(kx, kt)), lightlike_ok=True)


def pair_cone_surface(p1: SpacetimePoint, p2: SpacetimePoint, sigma0: SpacelikeSurface) -> SpacelikeSurface:
    """Boundary of the two past light cones of ``p1`` and ``p2`` joined to ``sigma0``."""
    return past_cone_surface([p1, p2], sigma0)
