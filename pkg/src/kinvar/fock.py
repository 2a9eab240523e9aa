"""Multiparticle algebra on the elementary-tensor representation.

A rank-n element is a finite sum of coefficients times ordered n-tuples of
single-particle packets, so the antisymmetrizer, symmetrizer and wedge are
exact coefficient manipulations; numerics enter only when a Hermitian form
or an operator pairing is evaluated.  Upper/primed slots are antisymmetric,
lower/unprimed slots symmetric, fixed throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .clifford import GAMMA
from .errors import RankMismatch, RankTooLarge
from .kgroup import KElement
from .measures import MassShellMeasure, signed_shell, _shell_integrate
from .packets import GaussianPacket, _poly_mul
from .quadrature import IntegralResult, integrate_box

__all__ = [
    "FockElement",
    "HermitianFormSpec",
    "RANK_CAP",
    "tensor",
    "antisymmetrize",
    "symmetrize",
    "wedge",
    "hermitian_form",
    "mixed_symmetry_pairing_check",
    "contraction_antisymmetrization_identity",
]

RANK_CAP = 6


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class FockElement:
    """Finite sum of elementary tensors of single-particle packets.

    terms: list of (coefficient, tuple of rank packets); rank 0 keeps a bare
    scalar in the coefficient with an empty factor tuple.
    """

    def __init__(self, rank: int, terms):
        self.rank = int(rank)
        merged: dict = {}
        order: list = []
        for coeff, factors in terms:
            factors = tuple(factors)
            if len(factors) != self.rank:
                raise RankMismatch(
                    f"term has {len(factors)} factors, rank is {self.rank}"
                )
            key = tuple(id(f) for f in factors)
            if key in merged:
                merged[key] = (merged[key][0] + coeff, factors)
            else:
                merged[key] = (complex(coeff), factors)
                order.append(key)
        self.terms = tuple(
            (c, f) for key in order for c, f in [merged[key]] if c != 0
        )

    @classmethod
    def scalar(cls, value: complex) -> "FockElement":
        return cls(0, [(value, ())])

    @classmethod
    def from_packet(cls, u: GaussianPacket) -> "FockElement":
        return cls(1, [(1.0, (u,))])

    @classmethod
    def from_packets(cls, packets) -> "FockElement":
        packets = tuple(packets)
        return cls(len(packets), [(1.0, packets)])

    def __add__(self, other: "FockElement") -> "FockElement":
        if self.rank != other.rank:
            raise RankMismatch("cannot add different ranks")
        return FockElement(self.rank, list(self.terms) + list(other.terms))

    def scaled(self, c: complex) -> "FockElement":
        return FockElement(self.rank, [(c * coeff, f) for coeff, f in self.terms])

    def __sub__(self, other: "FockElement") -> "FockElement":
        return self + other.scaled(-1.0)

    def evaluate_array(self, momenta) -> np.ndarray:
        """Full component tensor u^{a1..an}(p1..pn), shape (4,)*rank."""
        momenta = np.asarray(momenta, dtype=float).reshape(self.rank, 4)
        out = np.zeros((4,) * self.rank, dtype=complex)
        for coeff, factors in self.terms:
            piece = np.array(coeff, dtype=complex)
            for i, f in enumerate(factors):
                piece = np.multiply.outer(piece, f.evaluate(momenta[i]))
            out += piece
        return out

    def evaluate(self, alphas, momenta) -> complex:
        arr = self.evaluate_array(momenta)
        return complex(arr[tuple(alphas)]) if self.rank else complex(arr[()])

    def k_transform(self, k: KElement) -> "FockElement":
        return FockElement(
            self.rank,
            [(c, tuple(f.k_transform(k) for f in fs)) for c, fs in self.terms],
        )


def tensor(u: FockElement, v: FockElement) -> FockElement:
    """(u (x) v): term-list concatenation product."""
    terms = [
        (cu * cv, fu + fv) for cu, fu in u.terms for cv, fv in v.terms
    ]
    return FockElement(u.rank + v.rank, terms)


def _check_cap(n: int, cap: int):
    if n > cap:
        raise RankTooLarge(f"rank {n} exceeds cap {cap} (n! term growth)")


def antisymmetrize(u: FockElement, cap: int = RANK_CAP) -> FockElement:
    """A(u): signed average over joint index-and-momentum permutations."""
    n = u.rank
    if n <= 1:
        return u
    _check_cap(n, cap)
    norm = 1.0 / math.factorial(n)
    terms = []
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        for c, fs in u.terms:
            terms.append((c * sign * norm, tuple(fs[perm[i]] for i in range(n))))
    return FockElement(n, terms)


def symmetrize(u: FockElement, cap: int = RANK_CAP) -> FockElement:
    """S(u): unsigned average over joint permutations."""
    n = u.rank
    if n <= 1:
        return u
    _check_cap(n, cap)
    norm = 1.0 / math.factorial(n)
    terms = []
    for perm in itertools.permutations(range(n)):
        for c, fs in u.terms:
            terms.append((c * norm, tuple(fs[perm[i]] for i in range(n))))
    return FockElement(n, terms)


def wedge(u: FockElement, v: FockElement, cap: int = RANK_CAP) -> FockElement:
    """u ^ v = A(u (x) v): the Grassmann product on the physical states."""
    _check_cap(u.rank + v.rank, cap)
    return antisymmetrize(tensor(u, v), cap=cap)


# ---------------------------------------------------------------------------
# Hermitian forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermitianFormSpec:
    """kind "lebesgue": (u,v) = int conj(u) gamma0-lowered v over Lebesgue
    momenta; kind "spectral": per-particle shell measures weighted by a
    finite-atomic multiparticle spectrum [(signed masses, weight), ...]."""

    kind: str = "lebesgue"
    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("lebesgue", "spectral"):
            raise ValueError(f"unknown Hermitian form kind {self.kind!r}")
        if self.kind == "spectral" and not self.atoms:
            raise ValueError("spectral form needs at least one atom")


def _sandwich_packet(f: GaussianPacket, g: GaussianPacket) -> GaussianPacket:
    """Scalar packet p -> conj(f(p)) . gamma0 . g(p) (one Gaussian each side)."""
    conj_poly = {e: np.conj(c) for e, c in f.poly.items()}
    poly: dict = {}
    for ef, cf in conj_poly.items():
        for eg, cg in g.poly.items():
            e = tuple(a + b for a, b in zip(ef, eg))
            val = cf @ GAMMA[0] @ cg
            poly[e] = poly.get(e, 0.0) + val
    prec = f.prec + g.prec
    cov = np.linalg.inv(prec)
    center = cov @ (f.prec @ f.center + g.prec @ g.center)
    # Constant from recentering the two Gaussian exponents.
    def quad(q, c, x):
        d = x - c
        return 0.5 * d @ q @ d

    log_c = -(quad(f.prec, f.center, center) + quad(g.prec, g.center, center))
    amp = np.exp(log_c)
    poly = {e: amp * v for e, v in poly.items()}
    return GaussianPacket(poly, center, prec, phase=g.phase - f.phase)


def _lebesgue_integral(pk: GaussianPacket, nsigma: float = 6.5) -> complex:
    """Integral of a scalar packet over R^4 in its principal frame."""
    evals, rot = np.linalg.eigh(pk.prec)
    sig = 1.0 / np.sqrt(evals)
    widths = 2.0 * nsigma * sig
    freq = np.abs(rot.T @ pk.phase)
    counts = [int(np.clip(np.ceil(2.2 * w / s + 0.45 * w * fr) + 8, 16, 200))
              for w, s, fr in zip(widths, sig, freq)]

    def f(u):
        return pk.evaluate(pk.center[None, :] + u @ rot.T)

    res = integrate_box(f, -0.5 * widths, 0.5 * widths, counts, error=False)
    return complex(res.value)


def _shell_integral(pk: GaussianPacket, shell: MassShellMeasure) -> complex:
    def f(qvec):
        return pk.evaluate(shell.shell_points(qvec)) / shell.omega(qvec)

    res = _shell_integrate(f, pk, shell)
    return complex(res.value)


def _single_particle_pairing(spec, f, g, cache):
    """Slot-independent 1-particle pairing (lebesgue value or sandwich packet)."""
    key = (id(f), id(g))
    if key not in cache:
        pk = _sandwich_packet(f, g)
        if spec.kind == "lebesgue":
            cache[key] = _lebesgue_integral(pk)
        else:
            cache[key] = pk  # shell pairing resolved per atom below
    return cache[key]


def hermitian_form(spec: HermitianFormSpec, u: FockElement,
                   v: FockElement) -> complex:
    """K-invariant Hermitian pairing; conjugate-linear in u, index lowering
    of the second argument by g = gamma0."""
    if u.rank != v.rank:
        raise RankMismatch(f"ranks differ: {u.rank} vs {v.rank}")
    if u.rank == 0:
        su = u.terms[0][0] if u.terms else 0.0
        sv = v.terms[0][0] if v.terms else 0.0
        return complex(np.conj(su) * sv)

    cache: dict = {}
    total = 0.0 + 0.0j
    if spec.kind == "lebesgue":
        for cu, fu in u.terms:
            for cv, fv in v.terms:
                prod = np.conj(cu) * cv
                for f, g in zip(fu, fv):
                    prod *= _single_particle_pairing(spec, f, g, cache)
                total += prod
        return complex(total)

    for masses, weight in spec.atoms:
        if len(masses) != u.rank:
            raise RankMismatch("spectral atom arity must match the rank")
        shells = [signed_shell(m) for m in masses]
        for cu, fu in u.terms:
            for cv, fv in v.terms:
                prod = np.conj(cu) * cv
                for slot, (f, g) in enumerate(zip(fu, fv)):
                    pk = _single_particle_pairing(spec, f, g, cache)
                    skey = (id(f), id(g), masses[slot])
                    if skey not in cache:
                        cache[skey] = _shell_integral(pk, shells[slot])
                    prod *= cache[skey]
                total += weight * prod
    return complex(total)


def contraction_antisymmetrization_identity(u: FockElement, v: FockElement,
                                            rng, n_points: int = 8) -> float:
    """Pointwise defect of A(u^{a*} v_a) = u^{a*} (Sv)_a for antisymmetric u.

    This is the identity behind the form-integration argument O = O A: once
    the contraction is antisymmetrized, only the symmetric part of v
    survives, so iterated quadrature of the symmetrized pairing realizes the
    coordinate-invariant form pairing.
    """
    n = u.rank
    if n <= 1:
        return 0.0
    sv = symmetrize(v)
    worst = 0.0
    for _ in range(n_points):
        momenta = rng.normal(scale=1.2, size=(n, 4))
        anti = 0.0 + 0.0j
        for perm in itertools.permutations(range(n)):
            sign = _perm_sign(perm)
            anti += sign * _contract(u, v, momenta[list(perm)])
        anti /= math.factorial(n)
        worst = max(worst, abs(anti - _contract(u, sv, momenta)))
    return worst


def _contract(u: FockElement, v: FockElement, momenta) -> complex:
    """u^{a*}(p) v_a(p) with indices of v lowered by gamma0."""
    n = u.rank
    ua = np.conj(u.evaluate_array(momenta))
    va = v.evaluate_array(momenta)
    for _ in range(n):
        va = np.tensordot(GAMMA[0], va, axes=([1], [0]))
        va = np.moveaxis(va, 0, n - 1)
    return complex(np.sum(ua * va))


def mixed_symmetry_pairing_check(u: FockElement, v: FockElement, rng,
                                 n_points: int = 12) -> float:
    """Antisymmetry defect of p -> u^{a*}(p) v_a(p) for antisymmetric u.

    Zero (to roundoff) certifies that the contraction is antisymmetric, which
    holds exactly when v is symmetric; any antisymmetric admixture in v shows
    up as a positive defect.
    """
    n = u.rank
    if n <= 1:
        return 0.0
    if v.rank != n:
        raise RankMismatch("ranks differ")
    worst = 0.0
    for _ in range(n_points):
        momenta = rng.normal(scale=1.2, size=(n, 4))
        base = _contract(u, v, momenta)
        for perm in itertools.permutations(range(n)):
            sign = _perm_sign(perm)
            val = _contract(u, v, momenta[list(perm)])
            worst = max(worst, abs(val - sign * base))
    return worst
