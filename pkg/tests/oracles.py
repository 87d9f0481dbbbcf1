"""Reference states written out by hand in plain numpy.

Nothing here imports the package: these are the expected values the tests
compare against.  Slot order is 1, 2, 3, 6, 2*, 4*, 3*, 6*; probe basis
order is (+1, 0, -1).
"""
import itertools

import numpy as np

S2, S3 = np.sqrt(2), np.sqrt(3)
IDX = {+1: 0, 0: 1, -1: 2}
DIMS = (2, 2, 3, 3, 3, 3, 3, 3)
NAMES = ("1", "2", "3", "6", "2*", "4*", "3*", "6*")

UP = np.array([1, 0], complex)
DN = np.array([0, 1], complex)
YP = (UP + 1j * DN) / S2
YM = (UP - 1j * DN) / S2
UU, UD, DU, DD = (np.kron(a, b) for a, b in itertools.product((UP, DN), repeat=2))
SINGLET = (UD - DU) / S2
TRIPLET = (UD + DU) / S2

P_L = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], complex)
P_R = P_L.T.copy()


def pk(a, b):
    """Probe-pair basis ket ``|a, b>``."""
    v = np.zeros(9, complex)
    v[3 * IDX[a] + IDX[b]] = 1
    return v


def tri(*pairs):
    return sum(pk(a, b) for a, b in pairs)


PHI = tri((0, 0), (1, -1), (-1, 1)) / S3
PI_12 = tri((-1, -1), (0, 1), (1, 0)) / S3   # |Pi(1,-2)>
PI_21 = tri((1, 1), (0, -1), (-1, 0)) / S3   # |Pi(2,-1)>


def state(system, p36, p24=None, p33=None):
    out = np.kron(system, p36)
    for p in (p24, p33):
        if p is not None:
            out = np.kron(out, p)
    return out


def gate(axis, swap=False):
    pp, pm = (np.outer(UP, UP), np.outer(DN, DN)) if axis == "z" else (np.outer(YP, YP.conj()), np.outer(YM, YM.conj()))
    a, b = (P_R, P_L) if swap else (P_L, P_R)
    return np.kron(pp, a) + np.kron(pm, b)


def embed(g, slots, dims=DIMS):
    """Dense embedding by explicit index bookkeeping (independent of apply_local)."""
    d = int(np.prod(dims))
    out = np.zeros((d, d), complex)
    sub = [dims[s] for s in slots]
    for col in range(d):
        idx = np.unravel_index(col, dims)
        local = np.ravel_multi_index(tuple(idx[s] for s in slots), sub)
        for r_local in np.flatnonzero(g[:, local]):
            new = list(idx)
            for s, v in zip(slots, np.unravel_index(r_local, sub)):
                new[s] = v
            out[np.ravel_multi_index(new, dims), col] += g[r_local, local]
    return out


def sl(name):
    return NAMES.index(name)


# U_z action on the four basis states, 4-slot space (1, 2, 3, 6)
TZ_EXPANSIONS = {
    "uu": (state(UU, PHI), state(UU, PI_12)),
    "dd": (state(DD, PHI), state(DD, PI_21)),
    "ud": (state(UD, PHI), state(UD, PHI)),
    "du": (state(DU, PHI), state(DU, PHI)),
}


def _full(system):
    return state(system, PHI, PHI, PHI)


def _u_up_up():
    k = 1j / (2 * S2)
    inner = (0.25 * state(UU, PI_12, PI_12 + PI_21 + 2 * PHI, PI_12)
             - 0.25 * state(DD, PI_12, PI_12 + PI_21 - 2 * PHI, PI_21)
             + k * state(TRIPLET, PI_12, PI_12 - PI_21, PHI))
    return inner


def _u_down_down():
    k = 1j / (2 * S2)
    return (-0.25 * state(UU, PI_21, PI_12 + PI_21 - 2 * PHI, PI_12)
            + 0.25 * state(DD, PI_21, PI_12 + PI_21 + 2 * PHI, PI_21)
            - k * state(TRIPLET, PI_21, PI_12 - PI_21, PHI))


def _u_triplet():
    k = 1j / (2 * S2)
    return (-k * state(UU, PHI, PI_12 - PI_21, PI_12)
            + k * state(DD, PHI, PI_12 - PI_21, PI_21)
            + 0.5 * state(TRIPLET, PHI, PI_12 + PI_21, PHI))


# U acting on system (x) |Phi>^3: (input, expected output)
T2_EXPANSIONS = {
    "singlet": (_full(SINGLET), _full(SINGLET)),
    "upup": (_full(UU), _u_up_up()),
    "downdown": (_full(DD), _u_down_down()),
    "triplet": (_full(TRIPLET), _u_triplet()),
}


# --- staged run of the singlet ----------------------------------------------

_A36 = tri((0, 1), (1, 0), (-1, -1))
_C36 = tri((0, -1), (1, 1), (-1, 0))
_PLUS_Y = tri((0, 1), (1, 0), (-1, -1))
_MINUS_Y = tri((0, -1), (1, 1), (-1, 0))
_A24, _B24, _D24 = _PLUS_Y - _MINUS_Y, _PLUS_Y + _MINUS_Y, _MINUS_Y - _PLUS_Y
_A33 = tri((0, -1), (1, 1), (-1, 0))
_B33 = tri((0, 1), (1, 0), (-1, -1))

# after the right-wing couplings (6, then 4*, then 6*)
SIGMA1 = (1j * state(UU, _A36, _A24, _A33) + state(UD, _A36, _B24, _B33)
          - state(DU, _C36, _B24, _A33) - 1j * state(DD, _C36, _D24, _B33)) / (6 * np.sqrt(6))

# after reading omega6 = omega4* = omega6* = 0
SIGMA2_000 = (1j * state(UU, pk(1, 0), pk(1, 0) - pk(-1, 0), pk(-1, 0))
              + state(UD, pk(1, 0), pk(1, 0) + pk(-1, 0), pk(1, 0))
              - state(DU, pk(-1, 0), pk(1, 0) + pk(-1, 0), pk(-1, 0))
              - 1j * state(DD, pk(-1, 0), pk(-1, 0) - pk(1, 0), pk(1, 0)))
SIGMA2_000 = SIGMA2_000 / np.linalg.norm(SIGMA2_000)

FINAL_000 = state(SINGLET, pk(0, 0), pk(0, 0), pk(0, 0))
FINAL_100 = state(SINGLET, pk(-1, 1), pk(0, 0), pk(0, 0))


def phase_equal(a, b, tol=1e-10):
    k = int(np.argmax(np.abs(b)))
    if abs(a[k]) < 1e-12:
        return False
    ph = a[k] / b[k]
    return abs(abs(ph) - 1) < tol and np.allclose(a, ph * b, atol=tol, rtol=0)
