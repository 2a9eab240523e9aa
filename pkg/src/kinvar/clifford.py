"""Dirac gamma algebra in a fixed chiral basis.

Conventions used throughout the library:

* metric eta = diag(1, -1, -1, -1),
* gamma^0 = offdiag(I2, I2), gamma^k = offdiag(-sigma^k, +sigma^k),
* gamma5  = i gamma^0 gamma^1 gamma^2 gamma^3 = diag(I2, -I2).

With these choices (1 - gamma5) kills the upper 2x2 block, every block-diagonal
matrix diag(a, b) commutes with gamma5, and i*gamma^mu lies in u(2,2) with
respect to the Hermitian form g = gamma^0.  All constants are immutable; this
module is the single point of change for representation conventions.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ETA",
    "ID4",
    "SIGMA",
    "GAMMA",
    "GAMMA5",
    "GAMMA_LOWER",
    "ONE_MINUS_GAMMA5",
    "gamma",
    "gamma5",
    "slash",
    "lower",
    "minkowski_dot",
    "minkowski_sq",
]

ETA = np.diag([1.0, -1.0, -1.0, -1.0])

_SIGMA = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)

SIGMA = _SIGMA

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)

ID4 = np.eye(4, dtype=complex)


def _offdiag(upper, lower_blk):
    return np.block([[_Z2, upper], [lower_blk, _Z2]])


GAMMA = np.stack(
    [_offdiag(_I2, _I2)] + [_offdiag(-_SIGMA[k], _SIGMA[k]) for k in range(3)]
)

GAMMA5 = 1j * GAMMA[0] @ GAMMA[1] @ GAMMA[2] @ GAMMA[3]
ONE_MINUS_GAMMA5 = ID4 - GAMMA5

# gamma_mu = eta_{mu nu} gamma^nu (index lowered by the metric).
GAMMA_LOWER = np.einsum("mn,nij->mij", ETA, GAMMA)

for _arr in (ETA, ID4, GAMMA, GAMMA5, ONE_MINUS_GAMMA5, GAMMA_LOWER, _SIGMA):
    _arr.flags.writeable = False


def gamma(mu: int) -> np.ndarray:
    """Return the chiral-basis gamma^mu for mu in {0,1,2,3}."""
    if mu not in (0, 1, 2, 3):
        raise IndexError(f"gamma index must be in 0..3, got {mu}")
    return GAMMA[mu]


def gamma5() -> np.ndarray:
    return GAMMA5


def lower(p) -> np.ndarray:
    """Lower a four-vector index: (p0, p1, p2, p3) -> (p0, -p1, -p2, -p3)."""
    p = np.asarray(p, dtype=float)
    return p * np.array([1.0, -1.0, -1.0, -1.0])


def minkowski_dot(p, x) -> float:
    """eta_{ab} p^a x^b."""
    return float(np.sum(lower(p) * np.asarray(x, dtype=float), axis=-1))


def minkowski_sq(p) -> float:
    """p.p = (p0)^2 - |pvec|^2."""
    return minkowski_dot(p, p)


def slash(p) -> np.ndarray:
    """Feynman slash p_mu gamma^mu.

    Accepts a single four-vector (4,) or a batch (..., 4); returns (..., 4, 4).
    Satisfies slash(p) @ slash(p) = (p.p) * I.
    """
    p = np.asarray(p, dtype=float)
    return np.einsum("...m,mij->...ij", p, GAMMA_LOWER)
