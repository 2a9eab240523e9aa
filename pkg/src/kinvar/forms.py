"""Alternating multilinear forms with matrix-algebra values.

The finite model: V = C^4 carrying the kappa action, A = 4x4 complex matrices
carrying the conjugation action M -> kappa M kappa^{-1}.  Forms are stored on
strictly increasing index tuples and extended by antisymmetry; the graded
product, graded bracket and the supersymmetry relation
[X1, X2] = X1 X2 - (-1)^{pq} X2 X1 are all exact finite sums.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import RankMismatch
from .fock import FockElement, wedge
from .kgroup import KElement

__all__ = [
    "MultiForm",
    "form_product",
    "form_bracket",
    "k_act_form",
    "invariance_defect",
    "make_T_from_operator",
    "AlternatingOperatorForm",
]

_DIM = 4


def _perm_sign(perm) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


class MultiForm:
    """Element of Alt_n(C^4, C^{4x4}); degree 0 holds a single matrix."""

    def __init__(self, degree: int, values: dict | None = None):
        if not 0 <= degree <= _DIM:
            raise ValueError(f"degree must be in 0..{_DIM}")
        self.degree = degree
        self.values: dict[tuple, np.ndarray] = {}
        for idx, mat in (values or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or any(
                idx[i] >= idx[i + 1] for i in range(len(idx) - 1)
            ):
                raise ValueError(f"storage tuple {idx} must be strictly increasing")
            self.values[idx] = np.asarray(mat, dtype=complex).reshape(4, 4)

    @classmethod
    def zero(cls, degree: int) -> "MultiForm":
        return cls(degree)

    @classmethod
    def degree0(cls, mat) -> "MultiForm":
        return cls(0, {(): mat})

    @classmethod
    def random(cls, rng, degree: int, scale: float = 1.0) -> "MultiForm":
        vals = {}
        for idx in itertools.combinations(range(_DIM), degree):
            vals[idx] = scale * (rng.normal(size=(4, 4))
                                 + 1j * rng.normal(size=(4, 4)))
        return cls(degree, vals)

    def basis_value(self, idx) -> np.ndarray:
        """Evaluation on basis vectors e_{idx[0]}, ..., with sign extension."""
        idx = tuple(idx)
        if len(idx) != self.degree:
            raise RankMismatch("index tuple length differs from degree")
        if len(set(idx)) != len(idx):
            return np.zeros((4, 4), dtype=complex)
        order = tuple(np.argsort(idx, kind="stable"))
        sorted_idx = tuple(sorted(idx))
        stored = self.values.get(sorted_idx)
        if stored is None:
            return np.zeros((4, 4), dtype=complex)
        return _perm_sign(order) * stored

    def evaluate(self, vectors) -> np.ndarray:
        """Full multilinear evaluation on a list of degree vectors in C^4."""
        vectors = [np.asarray(v, dtype=complex).reshape(4) for v in vectors]
        if len(vectors) != self.degree:
            raise RankMismatch("need one vector per degree")
        out = np.zeros((4, 4), dtype=complex)
        for idx in itertools.product(range(_DIM), repeat=self.degree):
            coeff = 1.0 + 0.0j
            for v, i in zip(vectors, idx):
                coeff *= v[i]
            if coeff != 0:
                out += coeff * self.basis_value(idx)
        return out

    def __add__(self, other: "MultiForm") -> "MultiForm":
        if self.degree != other.degree:
            raise RankMismatch("degrees differ")
        keys = set(self.values) | set(other.values)
        return MultiForm(
            self.degree,
            {k: self.basis_value(k) + other.basis_value(k) for k in keys},
        )

    def scaled(self, c: complex) -> "MultiForm":
        return MultiForm(self.degree, {k: c * v for k, v in self.values.items()})

    def __sub__(self, other: "MultiForm") -> "MultiForm":
        return self + other.scaled(-1.0)

    def norm(self) -> float:
        if not self.values:
            return 0.0
        return max(float(np.max(np.abs(v))) for v in self.values.values())


def _binary_product(x1: MultiForm, x2: MultiForm, combine) -> MultiForm:
    """Common Sum over S_n of the product/bracket definition on basis tuples."""
    p, q = x1.degree, x2.degree
    n = p + q
    if n > _DIM:
        # Alternating forms of degree above dim V vanish identically.
        return MultiForm.zero(_DIM)
    norm = 1.0 / math.factorial(n)
    vals = {}
    for idx in itertools.combinations(range(_DIM), n):
        acc = np.zeros((4, 4), dtype=complex)
        for perm in itertools.permutations(range(n)):
            sign = _perm_sign(perm)
            left = tuple(idx[perm[i]] for i in range(p))
            right = tuple(idx[perm[i]] for i in range(p, n))
            acc += sign * combine(x1.basis_value(left), x2.basis_value(right))
        vals[idx] = norm * acc
    return MultiForm(n, vals)


def form_product(x1: MultiForm, x2: MultiForm) -> MultiForm:
    """Graded (wedge) product of algebra-valued alternating forms."""
    return _binary_product(x1, x2, lambda a, b: a @ b)


def form_bracket(x1: MultiForm, x2: MultiForm) -> MultiForm:
    """Graded bracket built from the matrix commutator."""
    return _binary_product(x1, x2, lambda a, b: a @ b - b @ a)


def k_act_form(k: KElement, x: MultiForm) -> MultiForm:
    """<kappa X; v1..vn> = kappa <X; kappa^{-1}v1, ..> kappa^{-1}."""
    n = x.degree
    kinv = k.kappa_inv
    vals = {}
    for idx in itertools.combinations(range(_DIM), n):
        acc = np.zeros((4, 4), dtype=complex)
        for jdx in itertools.product(range(_DIM), repeat=n):
            coeff = 1.0 + 0.0j
            for j, i in zip(jdx, idx):
                coeff *= kinv[j, i]
            if coeff != 0:
                acc += coeff * x.basis_value(jdx)
        vals[idx] = k.kappa @ acc @ k.kappa_inv
    return MultiForm(n, vals)


def invariance_defect(x: MultiForm, k: KElement) -> float:
    """max norm of kappa X - X over stored basis tuples."""
    return (k_act_form(k, x) - x).norm()


class AlternatingOperatorForm:
    """T(u1,..,uk) = Xi(u1 ^ .. ^ uk): the alternating form of an operator.

    Alternation holds by construction of the wedge; the evaluator accepts
    rank-1 FockElements (or bare packets) and returns whatever Xi returns.
    """

    def __init__(self, xi, rank: int):
        self.xi = xi
        self.rank = rank

    def __call__(self, *inputs):
        if len(inputs) != self.rank:
            raise RankMismatch(f"expected {self.rank} arguments")
        elems = [
            u if isinstance(u, FockElement) else FockElement.from_packet(u)
            for u in inputs
        ]
        w = elems[0]
        for e in elems[1:]:
            w = wedge(w, e)
        return self.xi(w)


def make_T_from_operator(xi, rank: int) -> AlternatingOperatorForm:
    return AlternatingOperatorForm(xi, rank)
