"""Closed-form momentum-space test functions: polynomial x Gaussian x phase.

A packet evaluates to

    P(p) * exp(-(p - c)^T Q (p - c) / 2 + i b.p)

with P a C- or C^4-valued polynomial (dict of exponent 4-tuples), c a real
center, Q a symmetric positive-definite 4x4 precision matrix and b a real
phase vector (Euclidean dot).  The family is the numerical stand-in for
Schwartz functions: it is closed under the K action, differentiation,
multiplication by polynomials and linear changes of the momentum variable,
and all seminorms sup (1+|p|^2)^{k/2} |D^alpha u| are finite.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

__all__ = ["GaussianPacket", "gaussian_scalar", "gaussian_spinor", "random_scalar_packet",
           "random_spinor_packet"]

_ZERO4 = (0, 0, 0, 0)


def _poly_mul(pa: dict, pb: dict) -> dict:
    out: dict = {}
    for ea, ca in pa.items():
        for eb, cb in pb.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return _poly_prune(out)


def _poly_prune(poly: dict, tol: float = 0.0) -> dict:
    return {e: c for e, c in poly.items() if np.max(np.abs(c)) > tol} or {}


def _poly_compose_linear(poly: dict, mat: np.ndarray) -> dict:
    """Substitute p -> mat p in every monomial."""
    out: dict = {}
    for expo, coeff in poly.items():
        term = {_ZERO4: 1.0 + 0.0j}
        for axis, power in enumerate(expo):
            if power == 0:
                continue
            linear = {}
            for j in range(4):
                if mat[axis, j] != 0.0:
                    e = [0, 0, 0, 0]
                    e[j] = 1
                    linear[tuple(e)] = complex(mat[axis, j])
            for _ in range(power):
                term = _poly_mul(term, linear)
        for e, c in term.items():
            out[e] = out.get(e, 0) + coeff * c
    return _poly_prune(out)


class GaussianPacket:
    """One packet; components () for a scalar test function, (4,) for a spinor."""

    def __init__(self, poly, center, prec, phase=None):
        self.center = np.asarray(center, dtype=float).reshape(4)
        self.prec = np.asarray(prec, dtype=float).reshape(4, 4)
        self.phase = (np.zeros(4) if phase is None else
                      np.asarray(phase, dtype=float).reshape(4))
        self.poly = {tuple(int(x) for x in e): np.asarray(c, dtype=complex)
                     for e, c in poly.items()}
        shapes = {c.shape for c in self.poly.values()}
        if len(shapes) > 1:
            raise ValueError(f"inconsistent coefficient shapes {shapes}")
        self.cshape = shapes.pop() if shapes else ()
        if self.cshape not in ((), (4,)):
            raise ValueError(f"coefficient shape must be () or (4,), got {self.cshape}")
        if not np.allclose(self.prec, self.prec.T):
            raise ValueError("precision matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(self.prec)) <= 0:
            raise ValueError("precision matrix must be positive definite")

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, p) -> np.ndarray:
        """Value at p; p may be (4,) or a batch (..., 4)."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = p.reshape(-1, 4)
        d = pts - self.center
        quad = np.einsum("ni,ij,nj->n", d, self.prec, d)
        gauss = np.exp(-0.5 * quad + 1j * (pts @ self.phase))
        vals = np.zeros(pts.shape[0:1] + self.cshape, dtype=complex)
        for expo, coeff in self.poly.items():
            mono = np.ones(pts.shape[0])
            for axis, power in enumerate(expo):
                if power:
                    mono = mono * pts[:, axis] ** power
            vals += np.multiply.outer(mono, coeff)
        vals *= gauss.reshape((-1,) + (1,) * len(self.cshape))
        if single:
            return vals[0]
        return vals.reshape(p.shape[:-1] + self.cshape)

    __call__ = evaluate

    # -- closure operations -------------------------------------------------

    def k_transform(self, k) -> "GaussianPacket":
        """(kappa u)(p) = kappa u(Lambda^{-1} p) (spinor); psi(Lambda^{-1} p) (scalar)."""
        lam_inv = k.lam_inv
        poly = _poly_compose_linear(self.poly, lam_inv)
        if self.cshape == (4,):
            poly = {e: k.kappa @ c for e, c in poly.items()}
        return GaussianPacket(
            poly,
            center=k.lam @ self.center,
            prec=lam_inv.T @ self.prec @ lam_inv,
            phase=lam_inv.T @ self.phase,
        )

    def compose_linear(self, mat) -> "GaussianPacket":
        """Packet for p -> value(mat p)."""
        mat = np.asarray(mat, dtype=float)
        mat_inv = np.linalg.inv(mat)
        return GaussianPacket(
            _poly_compose_linear(self.poly, mat),
            center=mat_inv @ self.center,
            prec=mat.T @ self.prec @ mat,
            phase=mat.T @ self.phase,
        )

    def multiply_poly(self, poly: dict) -> "GaussianPacket":
        return GaussianPacket(_poly_mul(self.poly, poly), self.center, self.prec,
                              self.phase)

    def derivative(self, mu: int) -> "GaussianPacket":
        """d/dp^mu of the packet, inside the family."""
        dpoly: dict = {}

        def _acc(expo, coeff):
            arr = np.asarray(coeff, dtype=complex)
            if expo in dpoly:
                dpoly[expo] = dpoly[expo] + arr
            else:
                dpoly[expo] = arr

        for expo, coeff in self.poly.items():
            if expo[mu] > 0:
                e = list(expo)
                e[mu] -= 1
                _acc(tuple(e), expo[mu] * coeff)
            # chain rule through exp(-(p-c)^T Q (p-c)/2 + i b.p)
            for j in range(4):
                q = self.prec[mu, j]
                if q != 0.0:
                    e = list(expo)
                    e[j] += 1
                    _acc(tuple(e), -q * coeff)
                    _acc(expo, q * self.center[j] * coeff)
            if self.phase[mu] != 0.0:
                _acc(expo, 1j * self.phase[mu] * coeff)
        return GaussianPacket(_poly_prune(dpoly) or {_ZERO4: np.zeros(self.cshape)},
                              self.center, self.prec, self.phase)

    def scaled(self, factor: complex) -> "GaussianPacket":
        return GaussianPacket({e: factor * c for e, c in self.poly.items()},
                              self.center, self.prec, self.phase)

    # -- geometry helpers (used by the quadrature-driven pairings) -----------

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.prec)

    @property
    def sigma_axes(self) -> np.ndarray:
        """Per-axis marginal standard deviations."""
        return np.sqrt(np.diag(self.covariance))

    @property
    def degree(self) -> int:
        return max(sum(e) for e in self.poly)

    def seminorm(self, k: int, l: int, radius: float = 12.0, n: int = 17) -> float:
        """Grid estimate of sup (1+|p|^2)^{k/2} |D^alpha u(p)|, |alpha| <= l."""
        packets = [self]
        frontier = [self]
        for _ in range(l):
            frontier = [f.derivative(mu) for f in frontier for mu in range(4)]
            packets.extend(frontier)
        axes = [np.linspace(c - radius, c + radius, n) for c in self.center]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
        weight = (1.0 + np.sum(grid**2, axis=1)) ** (k / 2.0)
        best = 0.0
        for pk in packets:
            vals = pk.evaluate(grid)
            mag = np.abs(vals)
            if mag.ndim > 1:
                mag = np.max(mag, axis=tuple(range(1, mag.ndim)))
            best = max(best, float(np.max(weight * mag)))
        return best


def gaussian_scalar(center=(0.0, 0.0, 0.0, 0.0), prec=None, amplitude=1.0,
                    phase=None, poly=None) -> GaussianPacket:
    prec = np.eye(4) if prec is None else prec
    if poly is None:
        poly = {_ZERO4: complex(amplitude)}
    return GaussianPacket(poly, center, prec, phase)


def gaussian_spinor(center=(0.0, 0.0, 0.0, 0.0), prec=None, components=None,
                    phase=None, poly=None) -> GaussianPacket:
    prec = np.eye(4) if prec is None else prec
    if poly is None:
        comp = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex) if components is None \
            else np.asarray(components, dtype=complex)
        poly = {_ZERO4: comp}
    return GaussianPacket(poly, center, prec, phase)


def _random_prec(rng, sigma_range) -> np.ndarray:
    sig = rng.uniform(*sigma_range, size=4)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    return q @ np.diag(1.0 / sig**2) @ q.T


def random_scalar_packet(rng, center_scale=1.0, sigma_range=(0.9, 1.2),
                         max_degree=1) -> GaussianPacket:
    return _random_packet(rng, (), center_scale, sigma_range, max_degree)


def random_spinor_packet(rng, center_scale=1.0, sigma_range=(0.9, 1.2),
                         max_degree=1) -> GaussianPacket:
    return _random_packet(rng, (4,), center_scale, sigma_range, max_degree)


def _random_packet(rng, cshape, center_scale, sigma_range, max_degree):
    poly = {}
    exponents = [e for e in itertools.product(range(max_degree + 1), repeat=4)
                 if sum(e) <= max_degree]
    for e in exponents:
        coeff = rng.normal(size=cshape) + 1j * rng.normal(size=cshape)
        poly[e] = coeff / max(1.0, math.factorial(sum(e)) * 2.0)
    return GaussianPacket(
        poly,
        center=rng.uniform(-center_scale, center_scale, size=4),
        prec=_random_prec(rng, sigma_range),
    )
