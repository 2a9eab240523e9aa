"""The symmetry group K = {diag(a, a^{-dagger}) : |det a| = 1} and its Lorentz action.

The homomorphism kappa -> Lambda(kappa) into O(1,3) is extracted by the trace
formula Lambda^mu_nu = (1/4) tr(gamma^mu kappa gamma_nu kappa^{-1}); the slash
intertwining relation kappa slash(p) kappa^{-1} = slash(Lambda p) is kept as an
independent test oracle rather than being used for the extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .clifford import ETA, GAMMA, GAMMA_LOWER, SIGMA, slash
from .errors import DeterminantNotUnimodular, NonRealResult, SingularMatrix

__all__ = [
    "KElement",
    "make_k",
    "lambda_of",
    "random_k",
    "act_vector",
    "act_spinor_field",
    "act_tensor_field",
]


@dataclass(frozen=True)
class KElement:
    """An element of K with its 4x4 block form and induced Lorentz matrix."""

    a: np.ndarray        # 2x2 complex, |det a| = 1
    kappa: np.ndarray    # diag(a, a^{-dagger})
    kappa_inv: np.ndarray
    lam: np.ndarray      # Lambda(kappa), real 4x4
    lam_inv: np.ndarray

    def __matmul__(self, other: "KElement") -> "KElement":
        return make_k(self.a @ other.a)

    def inverse(self) -> "KElement":
        return make_k(np.linalg.inv(self.a))


def _block_diag(a, b):
    out = np.zeros((4, 4), dtype=complex)
    out[:2, :2] = a
    out[2:, 2:] = b
    return out


def lambda_of(kappa: np.ndarray, imag_tol: float = 1e-9) -> np.ndarray:
    """Lorentz matrix of kappa: Lambda^mu_nu = (1/4) tr(gamma^mu kappa gamma_nu kappa^{-1}).

    Raises NonRealResult if any trace carries an imaginary part above
    imag_tol, which signals a malformed kappa.
    """
    kappa_inv = np.linalg.inv(kappa)
    lam = 0.25 * np.einsum("mij,jk,nkl,li->mn", GAMMA, kappa, GAMMA_LOWER, kappa_inv)
    worst = float(np.max(np.abs(lam.imag)))
    if worst > imag_tol:
        raise NonRealResult(f"Lorentz extraction has imaginary residue {worst:.3e}")
    return np.ascontiguousarray(lam.real)


def make_k(a, det_tol: float = 1e-9) -> KElement:
    """Build the K element diag(a, a^{-dagger}) for a 2x2 a with |det a| = 1."""
    a = np.asarray(a, dtype=complex)
    if a.shape != (2, 2):
        raise ValueError(f"a must be 2x2, got shape {a.shape}")
    det = np.linalg.det(a)
    if abs(det) < 1e-14:
        raise SingularMatrix("a is not invertible")
    if abs(abs(det) - 1.0) > det_tol:
        raise DeterminantNotUnimodular(f"|det a| = {abs(det):.12f} differs from 1")
    a_inv = np.linalg.inv(a)
    kappa = _block_diag(a, a_inv.conj().T)
    kappa_inv = _block_diag(a_inv, a.conj().T)
    lam = lambda_of(kappa)
    # Lorentz inverse via the metric: Lambda^{-1} = eta Lambda^T eta.
    lam_inv = ETA @ lam.T @ ETA
    return KElement(a=a, kappa=kappa, kappa_inv=kappa_inv, lam=lam, lam_inv=lam_inv)


def identity_k() -> KElement:
    return make_k(np.eye(2, dtype=complex))


def random_k(seed: int, boost_cap: float = 1.0) -> KElement:
    """Deterministic random K element with boost rapidity <= boost_cap.

    a = exp(i(phi I + r.sigma)/2) exp(h.sigma/2): the unitary factor carries the
    U(1) phase and a rotation, the positive-Hermitian factor a pure boost of
    rapidity |h| drawn uniformly in [0, boost_cap].  The product is a polar
    decomposition, so Lambda(kappa)^0_0 = cosh|h| exactly; boost_cap = 0 yields
    a pure rotation.
    """
    if boost_cap < 0:
        raise ValueError("boost_cap must be >= 0")
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    axis_r = _random_unit(rng)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    axis_h = _random_unit(rng)
    rapidity = rng.uniform(0.0, boost_cap) if boost_cap > 0 else 0.0

    herm = np.einsum("k,kij->ij", rapidity * axis_h, SIGMA)
    anti = 1j * (phi * np.eye(2) + np.einsum("k,kij->ij", angle * axis_r, SIGMA))
    a = expm(0.5 * anti) @ expm(0.5 * herm)
    return make_k(a)


def _random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def act_vector(k: KElement, p) -> np.ndarray:
    """kappa p = Lambda(kappa) p."""
    return k.lam @ np.asarray(p, dtype=float)


def act_spinor_field(k: KElement, u):
    """(kappa u)(p) = kappa u(Lambda^{-1} p), inside the closed packet family."""
    return u.k_transform(k)


def act_tensor_field(k: KElement, u):
    """K action on a multiparticle tensor field, factor by factor."""
    return u.k_transform(k)


def slash_intertwining_residual(k: KElement, points) -> float:
    """max |kappa slash(p) kappa^{-1} - slash(Lambda p)| over the given points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lhs = np.einsum("ij,njk,kl->nil", k.kappa, slash(points), k.kappa_inv)
    rhs = slash(points @ k.lam.T)
    return float(np.max(np.abs(lhs - rhs)))
