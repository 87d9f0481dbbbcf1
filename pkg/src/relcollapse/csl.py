"""CSL evolution with commuting collapse operators and raw/cooked ensembles.

The linear equation

    d psi = [ -i H dt + sum_i A_i dW_i - (gamma/2) sum_i A_i^2 dt ] psi,
    E[dW_i dW_j] = gamma delta_ij dt,

is integrated with Euler-Maruyama.  The drift coefficient is the Ito form
of the white-noise equation read in the Stratonovich sense; with it
``||psi||^2`` is a martingale under the raw (Wiener) measure, which is
what makes ``raw * ||psi||^2`` a probability density.  The literal Ito
reading with drift ``-gamma A^2`` makes ``E||psi||^2`` decay like
``exp(-gamma <A^2> t)``.  Units have hbar = 1.

Three ways of producing the cooked ensemble are offered by
:func:`csl_run`:

``"reference"``
    raw noise, cooked weights ``||psi||^2``.  Exact but the weights become
    degenerate for ``gamma t`` beyond a few units.
``"resample"``
    raw noise with systematic resampling on the cooked weights whenever the
    effective sample size drops below half the ensemble.
``"tilted"``
    noise drawn directly from the cooked measure, whose increments carry the
    drift ``2 gamma <A>_psi dt``; ``raw_weight`` accumulates the likelihood
    ratio raw/proposal so raw-measure averages stay estimable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .linalg import (Operator, StateVector, _as_matrix, commutator_norm,
                     common_eigenprojectors, is_hermitian)

COMMUTE_TOL = 1e-10
STEP_BUDGET = 0.01
REDUCED = 0.99

Method = Literal["reference", "resample", "tilted"]


class CslSetupError(ValueError):
    """Collapse operators are not hermitian or do not commute."""


@dataclass(frozen=True)
class CslEnsembleMember:
    state: StateVector
    raw_weight: float = 1.0
    noise_history: tuple = ()

    @property
    def norm2(self) -> float:
        return self.state.norm() ** 2

    @property
    def cooked_weight(self) -> float:
        return self.raw_weight * self.norm2


def check_collapse_operators(a_ops: Sequence) -> list[np.ndarray]:
    mats = [_as_matrix(a) for a in a_ops]
    for i, m in enumerate(mats):
        if not is_hermitian(m, COMMUTE_TOL):
            raise CslSetupError(f"collapse operator {i} is not hermitian")
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if commutator_norm(mats[i], mats[j]) > COMMUTE_TOL:
                raise CslSetupError(f"collapse operators {i} and {j} do not commute")
    return mats


def max_dt(a_ops: Sequence, gamma: float, budget: float = STEP_BUDGET) -> float:
    """Largest step with ``gamma ||A||^2 dt <= budget`` for every operator."""
    if gamma == 0.0 or not a_ops:
        return math.inf
    worst = max(np.linalg.norm(_as_matrix(a), 2) ** 2 for a in a_ops)
    return math.inf if worst == 0.0 else budget / (gamma * worst)


def _em_update(psi: np.ndarray, h: np.ndarray | None, mats: list[np.ndarray], gamma: float,
               dt: float, dw: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step for a batch of row vectors ``psi`` of shape ``(n, d)``."""
    out = psi.copy()
    if h is not None:
        out += -1j * dt * (psi @ h.T)
    for i, a in enumerate(mats):
        apsi = psi @ a.T
        out += dw[:, i, None] * apsi - 0.5 * gamma * dt * (apsi @ a.T)
    return out


def _expectations(psi: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """Normalized ``<A_i>`` per member, shape ``(n, k)``."""
    n2 = np.einsum("nd,nd->n", psi.conj(), psi).real
    return np.stack([np.einsum("nd,nd->n", psi.conj(), psi @ a.T).real / n2 for a in mats], axis=1)


def csl_step(member: CslEnsembleMember, h, a_ops: Sequence, gamma: float, dt: float,
             rng: np.random.Generator, record_noise: bool = True) -> CslEnsembleMember:
    """One raw-measure step; ``raw_weight`` is unchanged because the noise is drawn from the raw measure."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    mats = check_collapse_operators(a_ops)
    hm = None if h is None else _as_matrix(h)
    dw = rng.normal(0.0, math.sqrt(gamma * dt), size=(1, len(mats)))
    psi = _em_update(member.state.amplitudes[None, :], hm, mats, gamma, dt, dw)[0]
    hist = member.noise_history + (tuple(dw[0]),) if record_noise else member.noise_history
    return CslEnsembleMember(StateVector(psi, member.state.factor_dims, member.state.basis_labels),
                             member.raw_weight, hist)


@dataclass
class CslRunResult:
    method: str
    times: np.ndarray
    manifold_labels: list[tuple[float, ...]]
    raw_mean_norm2: np.ndarray
    raw_mean_norm2_err: np.ndarray
    cooked_manifold_weights: np.ndarray  # (n_times, n_manifolds): cooked mean of <P_sigma>
    reduced_fractions: np.ndarray        # (n_manifolds,): cooked fraction with <P_sigma> > 0.99
    reduced_fraction_err: np.ndarray
    effective_sample_size: float
    members: list[CslEnsembleMember] = field(default_factory=list, repr=False)
    resample_count: int = 0
    dt: float = 0.0
    trajectory_rows: list[dict] = field(default_factory=list, repr=False)

    @property
    def unreduced_fraction(self) -> float:
        return float(1.0 - self.reduced_fractions.sum())


def _systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = weights.size
    cdf = np.cumsum(weights / weights.sum())
    cdf[-1] = 1.0
    u = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cdf, u, side="right")


def _weighted_fraction(flags: np.ndarray, w: np.ndarray) -> tuple[float, float]:
    """Weighted mean of a 0/1 flag and its standard error from the effective sample size."""
    wn = w / w.sum()
    p = float(flags @ wn)
    ess = 1.0 / float(np.sum(wn ** 2))
    return p, math.sqrt(max(p * (1 - p), 0.0) / ess)


def csl_run(initial: StateVector, h, a_ops: Sequence, gamma: float, total_time: float,
            dt: float | None, n_members: int, rng: np.random.Generator,
            method: Method = "reference", n_records: int = 10, keep_members: bool = False,
            trajectory_members: int = 0) -> CslRunResult:
    """Evolve an ensemble and report cooked reduction statistics over time.

    ``dt=None`` picks the largest step with ``gamma ||A||^2 dt <= 0.01``; an
    explicit ``dt`` above that bound is rejected.  ``trajectory_members``
    members have their ``{t, member_id, norm2, raw_weight,
    manifold_weights}`` rows recorded at every record time.
    """
    if method not in ("reference", "resample", "tilted"):
        raise ValueError(f"unknown method {method!r}")
    if gamma < 0 or total_time < 0 or n_members <= 0:
        raise ValueError("gamma and total_time must be non-negative, n_members positive")
    mats = check_collapse_operators(a_ops)
    hm = None if h is None else _as_matrix(h)
    bound = max_dt(mats, gamma)
    if dt is None:
        dt = min(bound, total_time / max(n_records, 1)) if total_time > 0 else 1.0
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates gamma ||A||^2 dt <= {STEP_BUDGET} (max {bound})")
    n_steps = int(math.ceil(total_time / dt - 1e-9)) if total_time > 0 else 0
    if n_steps:
        dt = total_time / n_steps
    record_steps = sorted({int(round(k * n_steps / n_records)) for k in range(n_records + 1)})

    if mats:
        manifolds = common_eigenprojectors(mats)
    else:
        manifolds = [((), np.eye(initial.dim, dtype=complex))]
    labels = [m[0] for m in manifolds]
    projs = [m[1] for m in manifolds]

    psi = np.tile(initial.amplitudes, (n_members, 1)).astype(complex)
    log_raw = np.zeros(n_members)    # log raw_weight: likelihood ratio (tilted) or resampling factor
    log_scale = np.zeros(n_members)  # log of the norm divided out of psi (tilted)
    k = len(mats)
    sd = math.sqrt(gamma * dt)
    resamples = 0
    times, raw_mean, raw_err, cooked_w = [], [], [], []
    rows: list[dict] = []

    def manifold_weights(p):
        n2 = np.einsum("nd,nd->n", p.conj(), p).real
        return np.stack([np.einsum("nd,nd->n", p.conj(), p @ P.T).real / n2 for P in projs], axis=1), n2

    def record(step):
        mw, n2 = manifold_weights(psi)
        raw = np.exp(log_raw)
        n2 = n2 * np.exp(log_scale)
        vals = raw * n2
        times.append(step * dt)
        raw_mean.append(float(vals.mean()))
        raw_err.append(float(vals.std(ddof=1) / math.sqrt(n_members)) if n_members > 1 else 0.0)
        cw = vals / vals.sum()
        cooked_w.append(cw @ mw)
        for m in range(min(trajectory_members, n_members)):
            rows.append({"t": step * dt, "member_id": m, "norm2": float(n2[m]),
                         "raw_weight": float(raw[m]), "manifold_weights": [float(x) for x in mw[m]]})

    for step in range(n_steps + 1):
        if step in record_steps:
            record(step)
        if step == n_steps:
            break
        if k == 0:
            dw = np.zeros((n_members, 0))
        else:
            dw = rng.normal(0.0, sd, size=(n_members, k))
        if method == "tilted" and k:
            b = 2.0 * gamma * _expectations(psi, mats)
            dw = dw + b * dt
            log_raw += np.sum((-2.0 * dw * b + b * b * dt) / (2.0 * gamma), axis=1)
        psi = _em_update(psi, hm, mats, gamma, dt, dw)
        if method == "tilted":
            # keep the numbers O(1); the scale is folded into raw_weight
            n2 = np.einsum("nd,nd->n", psi.conj(), psi).real
            psi /= np.sqrt(n2)[:, None]
            log_scale += np.log(n2)
        elif method == "resample":
            n2 = np.einsum("nd,nd->n", psi.conj(), psi).real
            w = np.exp(log_raw) * n2
            ess = w.sum() ** 2 / np.sum(w ** 2)
            if ess < 0.5 * n_members:
                idx = _systematic_resample(w, rng)
                psi = psi[idx] / np.sqrt(n2[idx])[:, None]
                # every survivor carries the ensemble-average cooked weight
                log_raw = np.full(n_members, math.log(w.mean()))
                resamples += 1

    mw, n2 = manifold_weights(psi)
    cooked = np.exp(log_raw + log_scale) * n2
    flags = mw > REDUCED
    fr, fe = zip(*[_weighted_fraction(flags[:, j].astype(float), cooked) for j in range(len(projs))])
    wn = cooked / cooked.sum()
    members = []
    if keep_members:
        members = [CslEnsembleMember(StateVector(psi[i] * math.exp(0.5 * log_scale[i]),
                                                 initial.factor_dims, initial.basis_labels),
                                     float(np.exp(log_raw[i]))) for i in range(n_members)]
    return CslRunResult(method, np.array(times), labels, np.array(raw_mean), np.array(raw_err),
                        np.array(cooked_w), np.array(fr), np.array(fe), 1.0 / float(np.sum(wn ** 2)),
                        members, resamples, dt, rows)


def born_weights(initial: StateVector, a_ops: Sequence) -> tuple[list, np.ndarray]:
    """``<psi0|P_sigma|psi0>`` for the joint eigenmanifolds of ``a_ops``."""
    mats = check_collapse_operators(a_ops)
    manifolds = common_eigenprojectors(mats)
    v = initial.normalized().amplitudes
    return [m[0] for m in manifolds], np.array([float(np.vdot(v, m[1] @ v).real) for m in manifolds])


def gaussian_kernel(d: np.ndarray, alpha: float, cell: float | None = None) -> np.ndarray:
    """Smearing weight ``(alpha/2pi)^{1/2} exp(-alpha d^2/2) * cell``.

    ``cell`` defaults to ``sqrt(2 pi / alpha)`` so the kernel peaks at 1 and a
    particle sitting on a site contributes exactly its mass there.
    """
    cell = math.sqrt(2 * math.pi / alpha) if cell is None else cell
    return math.sqrt(alpha / (2 * math.pi)) * np.exp(-0.5 * alpha * np.asarray(d) ** 2) * cell


def mass_density_ops(lattice: Sequence[float], particle_species: Sequence[tuple[str, float]],
                     alpha: float, cell: float | None = None) -> list[Operator]:
    """Smeared mass-density operators ``M(r) = sum_k m_k N_k(r)``, one per lattice site.

    First quantized: each particle lives on the lattice sites, the joint
    space is the tensor product (first particle most significant) and
    ``N_k(r) = sum_q g(q - r) |q><q|_k``.  All operators are diagonal in the
    site basis, hence commuting.  Masses are in units of the nucleon mass.
    """
    sites = np.asarray(lattice, dtype=float)
    n_sites, n_part = sites.size, len(particle_species)
    if n_sites == 0 or n_part == 0:
        raise ValueError("lattice and particle list must be non-empty")
    dims = (n_sites,) * n_part
    grids = np.meshgrid(*([sites] * n_part), indexing="ij")
    ops = []
    for r in sites:
        diag = np.zeros(dims)
        for k, (_, mass) in enumerate(particle_species):
            diag += mass * gaussian_kernel(grids[k] - r, alpha, cell)
        ops.append(Operator(np.diag(diag.reshape(-1)).astype(complex), dims))
    return ops
