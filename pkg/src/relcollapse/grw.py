"""GRW spontaneous localization on one-dimensional grids.

A hit on particle ``i`` centred at ``x`` multiplies the wavefunction by the
Gaussian ``(alpha/pi)^{1/4} exp(-alpha (r_i - x)^2 / 2)`` and renormalizes.
The centre is drawn from ``||Phi_x||^2``, which is the marginal density
of particle ``i`` smeared with a normal of variance ``1/(2 alpha)``; the
sampler uses exactly that mixture representation.  Hits on particle ``i``
form a Poisson process with rate ``lambda * m_i / m0``.

The spatial dimension is one, so the prefactor is ``(alpha/pi)^{1/4}``
rather than the three-dimensional ``(alpha/pi)^{3/4}``.  Free Hamiltonian
evolution between hits is not modelled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-8

# physical reference values
LAMBDA_GRW = 1e-16      # s^-1
ALPHA_GRW = 1e10        # cm^-2
SECONDS_PER_YEAR = 365.25 * 24 * 3600


@dataclass(frozen=True)
class GrwParams:
    lam: float
    alpha: float
    masses: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        masses = tuple(float(m) for m in self.masses)
        if any(m < 0 for m in masses):
            raise ValueError("masses must be non-negative")
        object.__setattr__(self, "masses", masses)

    @property
    def rates(self) -> np.ndarray:
        """Per-particle hit rates ``lambda * m_i / m0``."""
        return self.lam * np.array(self.masses)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


class GridWavefunction:
    """Amplitudes on a product grid: ``N`` particles, ``G`` points each.

    Grid point ``j`` of particle ``k`` sits at ``origin[k] + j * spacing``.
    """

    def __init__(self, amplitudes, spacing: float, origin: float | Sequence[float] = 0.0,
                 normalize: bool = False):
        amps = np.array(amplitudes, dtype=complex)
        if amps.ndim == 0 or len(set(amps.shape)) != 1:
            raise ValueError(f"amplitudes must have shape (G,)*N, got {amps.shape}")
        if not spacing > 0:
            raise ValueError("spacing must be positive")
        n = amps.ndim
        origin = np.broadcast_to(np.asarray(origin, dtype=float), (n,)).copy()
        self.amplitudes = amps
        self.spacing = float(spacing)
        self.origin = origin
        if normalize:
            self.amplitudes = amps / math.sqrt(self.norm2())

    @property
    def n_particles(self) -> int:
        return self.amplitudes.ndim

    @property
    def n_points(self) -> int:
        return self.amplitudes.shape[0]

    def grid(self, particle: int = 0) -> np.ndarray:
        return self.origin[particle] + self.spacing * np.arange(self.n_points)

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.spacing ** self.n_particles)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm2() - 1.0) <= tol

    def marginal(self, particle: int) -> np.ndarray:
        """Probability mass of each grid point for one particle (sums to the norm)."""
        axes = tuple(k for k in range(self.n_particles) if k != particle)
        p = np.abs(self.amplitudes) ** 2
        return (p.sum(axis=axes) if axes else p) * self.spacing ** self.n_particles

    def fidelity(self, other: "GridWavefunction") -> float:
        ov = np.vdot(self.amplitudes, other.amplitudes) * self.spacing ** self.n_particles
        return float(abs(ov) ** 2 / (self.norm2() * other.norm2()))

    def _with(self, amps) -> "GridWavefunction":
        return GridWavefunction(amps, self.spacing, self.origin)

    @classmethod
    def gaussian_lumps(cls, centers: Sequence[float], width: float, x_min: float, x_max: float,
                       n_points: int, weights: Sequence[complex] | None = None) -> "GridWavefunction":
        """One particle in a superposition of Gaussian lumps ``exp(-(x-c)^2 / (4 width^2))``.

        ``width`` is the standard deviation of each lump's ``|psi|^2``.
        """
        x = np.linspace(x_min, x_max, n_points)
        weights = np.ones(len(centers)) if weights is None else np.asarray(weights)
        psi = sum(w * np.exp(-((x - c) ** 2) / (4 * width ** 2)) for w, c in zip(weights, centers))
        return cls(psi, x[1] - x[0], x_min, normalize=True)


def localization_factor(r: np.ndarray, x: float, alpha: float) -> np.ndarray:
    """``(alpha/pi)^{1/4} exp(-alpha (r - x)^2 / 2)``."""
    return (alpha / math.pi) ** 0.25 * np.exp(-0.5 * alpha * (r - x) ** 2)


def center_density(psi: GridWavefunction, particle: int, alpha: float, x: np.ndarray) -> np.ndarray:
    """``||Phi_x||^2`` evaluated at the points ``x``."""
    r = psi.grid(particle)
    m = psi.marginal(particle)
    x = np.asarray(x, dtype=float)
    k = math.sqrt(alpha / math.pi) * np.exp(-alpha * (x[..., None] - r) ** 2)
    return k @ m


def apply_localization(psi: GridWavefunction, particle: int, x: float, alpha: float) -> GridWavefunction:
    """``Phi_x``: the unnormalized localized wavefunction."""
    f = localization_factor(psi.grid(particle), x, alpha)
    shape = [1] * psi.n_particles
    shape[particle] = psi.n_points
    return psi._with(psi.amplitudes * f.reshape(shape))


def sample_center(psi: GridWavefunction, particle: int, alpha: float, rng: np.random.Generator) -> float:
    """Draw a hit centre from ``||Phi_x||^2``."""
    m = psi.marginal(particle)
    j = rng.choice(m.size, p=m / m.sum())
    return float(psi.grid(particle)[j] + rng.normal(0.0, math.sqrt(0.5 / alpha)))


def grw_hit(psi: GridWavefunction, particle: int, params: GrwParams, rng: np.random.Generator,
            max_tries: int = 100) -> tuple[float, GridWavefunction]:
    """One localization of ``particle``: returns the centre and the normalized new state."""
    if not psi.is_normalized():
        raise ValueError("wavefunction must be normalized before a hit")
    if not 0 <= particle < psi.n_particles:
        raise ValueError(f"no particle {particle}")
    for _ in range(max_tries):
        x = sample_center(psi, particle, params.alpha, rng)
        phi = apply_localization(psi, particle, x, params.alpha)
        n2 = phi.norm2()
        if n2 > 0.0 and math.isfinite(n2):
            return x, phi._with(phi.amplitudes / math.sqrt(n2))
    raise RuntimeError("localized state vanished on every resampled centre")


@dataclass(frozen=True)
class HitRecord:
    time: float
    particle: int
    center: float | None = None


def sample_hit_times(params: GrwParams, duration: float, rng: np.random.Generator) -> list[HitRecord]:
    """Superposed Poisson processes: total rate ``sum_i lambda m_i``, particle picked by rate."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    total = params.total_rate
    out: list[HitRecord] = []
    if total == 0.0:
        return out
    probs = params.rates / total
    t = rng.exponential(1.0 / total)
    while t <= duration:
        out.append(HitRecord(float(t), int(rng.choice(len(probs), p=probs))))
        t += rng.exponential(1.0 / total)
    return out


def grw_evolve(psi: GridWavefunction, duration: float, params: GrwParams,
               rng: np.random.Generator) -> tuple[list[HitRecord], GridWavefunction]:
    """Apply every hit in ``[0, duration]`` in time order."""
    if len(params.masses) != psi.n_particles:
        raise ValueError("one mass per particle is required")
    traj = []
    for hit in sample_hit_times(params, duration, rng):
        x, psi = grw_hit(psi, hit.particle, params, rng)
        traj.append(HitRecord(hit.time, hit.particle, x))
    return traj, psi


def hit_probability(rate: float, duration: float) -> float:
    """Probability of at least one hit: ``1 - exp(-rate * duration)``."""
    return -math.expm1(-rate * duration)


def csl_gamma_from_grw(lam: float = LAMBDA_GRW, alpha: float = ALPHA_GRW) -> float:
    """CSL coupling matching GRW: ``gamma = lambda (4 pi / alpha)^{3/2}``."""
    return lam * (4 * math.pi / alpha) ** 1.5
