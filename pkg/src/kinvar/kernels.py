"""Intertwining tensor kernels and the scattering operators they generate.

A rank-(k, l) kernel evaluates M^{a'1..a'l}_{a1..ak}(p'1..p'l, p1..pk) in the
raised-index form (primed indices raised with g = gamma0), which is the form
entering the intertwining condition

    kappa^{a'}_{b'} ... M^{b'}_{b}(p', p) = kappa^{a}_{b} ... M^{a'}_{a}(Lp', Lp).

Kernels built from per-slot matrix factors keep that structure explicitly, so
applying the induced operator to an elementary-tensor state factorizes into
independent 4D (or mass-shell) integrals per slot.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .clifford import ETA, GAMMA, ID4, ONE_MINUS_GAMMA5, minkowski_sq, slash
from .errors import BelowThreshold, KinvarError, RankMismatch, SlotCapExceeded
from .fock import FockElement
from .kgroup import KElement, random_k
from .measures import MassShellMeasure, _shell_integrate
from .packets import GaussianPacket
from .quadrature import integrate_box

__all__ = [
    "TensorKernel",
    "ScalarKernel",
    "OutState",
    "m0_kernel",
    "m1_kernel",
    "moller_kernel",
    "constant_kernel",
    "vertex_kernel",
    "kernel_tensor",
    "kernel_antisym",
    "kernel_sym",
    "intertwining_residual",
    "intertwining_residual_sweep",
    "standard_scalar_kernel",
    "apply_operator",
    "operator_intertwining_residual",
    "moller_contraction_table",
]

SLOT_CAP = 5


@dataclass
class TensorKernel:
    """Raised-index kernel with k lower (unprimed) and l upper (primed) slots.

    evaluator(pprime (l,4), p (k,4)) -> complex ndarray of shape (4,)*(l+k),
    upper axes first.  factors, when present, lists (coeff, [slot_fn, ...])
    with slot_fn(pp (4,), p (N,4)) -> (N,4,4) mapping the lower index to the
    upper one; it certifies the slot-separable structure used by
    apply_operator.
    """

    k: int
    l: int
    evaluator: object
    factors: list | None = None
    polynomial_bounded: bool = True
    smooth: bool = True
    pole_denominators: object = None
    metadata: dict = field(default_factory=dict)

    def eval_array(self, pprime, p) -> np.ndarray:
        pprime = np.asarray(pprime, dtype=float).reshape(self.l, 4)
        p = np.asarray(p, dtype=float).reshape(self.k, 4)
        return self.evaluator(pprime, p)

    def eval(self, alpha_primed, alpha, pprime, p) -> complex:
        arr = self.eval_array(pprime, p)
        return complex(arr[tuple(alpha_primed) + tuple(alpha)])


def _dirac_factor(p, mass: float) -> np.ndarray:
    """slash(p) + m, batched over leading axes of p."""
    return slash(p) + mass * ID4


@dataclass(frozen=True)
class SlotFactor:
    """One kernel slot L(p') R(p): a fixed-out-index part times a
    momentum-dependent part.  The split lets the induced operator integrate
    R(p) f(p) once per packet and reuse it across terms and sample points."""

    left: object    # (4,) four-vector -> (4, 4)
    right: object   # (N, 4) batch -> (N, 4, 4)

    def __call__(self, pp, p):
        return np.einsum("ij,...jk->...ik", self.left(pp), self.right(p))


def _dirac_right(mass: float):
    def right(p):
        return _dirac_factor(np.atleast_2d(p), mass)
    return right


def _const_right(p):
    p = np.atleast_2d(p)
    return np.broadcast_to(ID4, p.shape[:-1] + (4, 4))


def m0_kernel(m: float) -> TensorKernel:
    """Order-(2,2) electron-electron contact kernel.

    Raised form: [(slash p1' + m) gamma^rho (slash p1 + m)] eta_{rho sigma}
    [(slash p2' + m) gamma^sigma (slash p2 + m)], slot i pairing (p'_i, p_i).
    """
    if m <= 0:
        raise ValueError("mass must be positive")

    def slot(rho):
        return SlotFactor(
            left=lambda pp, rho=rho: _dirac_factor(pp, m) @ GAMMA[rho],
            right=_dirac_right(m),
        )

    factors = [(complex(ETA[r, r]), [slot(r), slot(r)]) for r in range(4)]

    def evaluator(pprime, p):
        out = np.zeros((4, 4, 4, 4), dtype=complex)
        for coeff, (s1, s2) in factors:
            a = s1(pprime[0], p[0][None, :])[0]
            b = s2(pprime[1], p[1][None, :])[0]
            out += coeff * np.einsum("ij,kl->ikjl", a, b)
        return out

    kern = TensorKernel(k=2, l=2, evaluator=evaluator, factors=factors,
                        metadata={"name": "m0", "mass": m})
    kern.lowered_array = lambda pprime, p: _lower_upper(kern.eval_array(pprime, p), 2)
    return kern


def _lower_upper(arr: np.ndarray, l: int) -> np.ndarray:
    """Lower every upper index with gamma0 (gamma0 is its own inverse)."""
    for axis in range(l):
        arr = np.moveaxis(np.tensordot(GAMMA[0], arr, axes=(1, axis)), 0, axis)
    return arr


def m1_kernel(m_e: float, m_nu: float) -> TensorKernel:
    """Order-(2,2) electron-neutrino kernel with the (1 - gamma5) insertion.

    Raised form: [(slash p2' + m_nu)(slash p1 + m_e)] indexed (a2', a1) times
    [(slash p1' + m_e)(1 - gamma5)(slash p2 + m_nu)] indexed (a1', a2); the
    cross-slot index pairing is what carries the weak-force structure.
    """
    if m_e <= 0 or m_nu <= 0:
        raise ValueError("masses must be positive")

    def evaluator(pprime, p):
        f = _dirac_factor(pprime[1], m_nu) @ _dirac_factor(p[0], m_e)
        g = (_dirac_factor(pprime[0], m_e) @ ONE_MINUS_GAMMA5
             @ _dirac_factor(p[1], m_nu))
        return np.einsum("pa,qb->qpab", f, g)

    return TensorKernel(k=2, l=2, evaluator=evaluator,
                        metadata={"name": "m1", "m_e": m_e, "m_nu": m_nu})


def moller_kernel(m: float, eps: float = 1e-6) -> TensorKernel:
    """Antisymmetrized electron-electron scattering kernel with i-epsilon
    propagator denominators (p2 - p2')^2 and (p2 - p1')^2."""
    base = m0_kernel(m)

    def denominators(pprime, p):
        return (minkowski_sq(p[1] - pprime[1]) + 1j * eps,
                minkowski_sq(p[1] - pprime[0]) + 1j * eps)

    def evaluator(pprime, p):
        t_den, u_den = denominators(pprime, p)
        direct = base.eval_array(pprime, p) / t_den
        swapped = base.eval_array(pprime[[1, 0]], p) / u_den
        return direct - np.swapaxes(swapped, 0, 1)

    kern = TensorKernel(k=2, l=2, evaluator=evaluator, smooth=False,
                        pole_denominators=denominators,
                        metadata={"name": "moller", "mass": m, "eps": eps})
    kern.lowered_array = lambda pprime, p: _lower_upper(kern.eval_array(pprime, p), 2)
    return kern


def constant_kernel(matrix=None) -> TensorKernel:
    """(1,1) kernel with a constant index map (identity by default).

    The identity map is itself intertwining: both sides of the condition
    reduce to kappa^{a'}_{a}.
    """
    mat = ID4 if matrix is None else np.asarray(matrix, dtype=complex)
    factors = [(1.0 + 0.0j, [SlotFactor(left=lambda pp: mat,
                                        right=_const_right)])]

    def evaluator(pprime, p):
        return mat.copy()

    return TensorKernel(k=1, l=1, evaluator=evaluator, factors=factors,
                        metadata={"name": "constant"})


def vertex_kernel(m: float, rho: int = 0) -> TensorKernel:
    """(1,1) fermion vertex slot (slash p' + m) gamma^rho (slash p + m).

    A single fixed-rho vertex is NOT intertwining (the vector index is open);
    it exists as a building block for factorized products and operator tests.
    """
    fn = SlotFactor(left=lambda pp: _dirac_factor(pp, m) @ GAMMA[rho],
                    right=_dirac_right(m))
    factors = [(1.0 + 0.0j, [fn])]

    def evaluator(pprime, p):
        return fn(pprime[0], p[0][None, :])[0]

    return TensorKernel(k=1, l=1, evaluator=evaluator, factors=factors,
                        metadata={"name": f"vertex{rho}", "mass": m})


def kernel_tensor(k1: TensorKernel, k2: TensorKernel) -> TensorKernel:
    """Slot-concatenated product: uppers of k1 then k2, lowers likewise."""

    def evaluator(pprime, p):
        a = k1.eval_array(pprime[:k1.l], p[:k1.k])
        b = k2.eval_array(pprime[k1.l:], p[k1.k:])
        out = np.multiply.outer(a, b)
        # outer order: (u1, low1, u2, low2) -> (u1, u2, low1, low2)
        for i in range(k2.l):
            out = np.moveaxis(out, k1.l + k1.k + i, k1.l + i)
        return out

    factors = None
    if k1.factors is not None and k2.factors is not None:
        factors = [
            (c1 * c2, s1 + s2)
            for c1, s1 in k1.factors
            for c2, s2 in k2.factors
        ]
    return TensorKernel(
        k=k1.k + k2.k, l=k1.l + k2.l, evaluator=evaluator, factors=factors,
        polynomial_bounded=k1.polynomial_bounded and k2.polynomial_bounded,
        smooth=k1.smooth and k2.smooth,
        metadata={"name": "tensor", "parts": (k1.metadata, k2.metadata)},
    )


def _perm_sign(perm) -> int:
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def kernel_antisym(kern: TensorKernel) -> TensorKernel:
    """A: signed average over joint permutations of upper slots."""
    if kern.l > SLOT_CAP:
        raise SlotCapExceeded(f"l = {kern.l} exceeds cap {SLOT_CAP}")
    perms = list(itertools.permutations(range(kern.l)))
    norm = 1.0 / math.factorial(kern.l)

    def evaluator(pprime, p):
        out = np.zeros((4,) * (kern.l + kern.k), dtype=complex)
        for perm in perms:
            arr = kern.eval_array(pprime[list(perm)], p)
            axes = list(perm) + list(range(kern.l, kern.l + kern.k))
            out += _perm_sign(perm) * np.transpose(arr, axes)
        return norm * out

    return TensorKernel(k=kern.k, l=kern.l, evaluator=evaluator,
                        polynomial_bounded=kern.polynomial_bounded,
                        smooth=kern.smooth,
                        pole_denominators=kern.pole_denominators,
                        metadata={"name": "A", "base": kern.metadata})


def kernel_sym(kern: TensorKernel) -> TensorKernel:
    """S: unsigned average over joint permutations of lower slots."""
    if kern.k > SLOT_CAP:
        raise SlotCapExceeded(f"k = {kern.k} exceeds cap {SLOT_CAP}")
    perms = list(itertools.permutations(range(kern.k)))
    norm = 1.0 / math.factorial(kern.k)

    def evaluator(pprime, p):
        out = np.zeros((4,) * (kern.l + kern.k), dtype=complex)
        for perm in perms:
            arr = kern.eval_array(pprime, p[list(perm)])
            axes = list(range(kern.l)) + [kern.l + i for i in perm]
            out += np.transpose(arr, axes)
        return norm * out

    return TensorKernel(k=kern.k, l=kern.l, evaluator=evaluator,
                        polynomial_bounded=kern.polynomial_bounded,
                        smooth=kern.smooth,
                        pole_denominators=kern.pole_denominators,
                        metadata={"name": "S", "base": kern.metadata})


# ---------------------------------------------------------------------------
# the intertwining condition
# ---------------------------------------------------------------------------


def _apply_matrix_to_axes(mat, arr, axes, contract_first: bool = False):
    """Contract mat into each listed axis; contract_first sums over mat's
    first index (free index is mat's second, as in kappa^{a}_{b} M^{..}_{a})."""
    side = 0 if contract_first else 1
    for ax in axes:
        arr = np.moveaxis(np.tensordot(mat, arr, axes=(side, ax)), 0, ax)
    return arr


def intertwining_residual(kern: TensorKernel, k: KElement, pprime, p) -> float:
    """Defect of the intertwining condition at one momentum sample,
    maximized over all free indices."""
    pprime = np.asarray(pprime, dtype=float).reshape(kern.l, 4)
    p = np.asarray(p, dtype=float).reshape(kern.k, 4)
    lhs = _apply_matrix_to_axes(k.kappa, kern.eval_array(pprime, p),
                                range(kern.l))
    moved = kern.eval_array(pprime @ k.lam.T, p @ k.lam.T)
    rhs = _apply_matrix_to_axes(k.kappa, moved,
                                range(kern.l, kern.l + kern.k),
                                contract_first=True)
    return float(np.max(np.abs(lhs - rhs)))


def intertwining_residual_sweep(kern: TensorKernel, trials: int, seed: int,
                                boost_cap: float = 1.0,
                                momentum_scale: float = 1.0,
                                min_denominator: float = 0.05):
    """Max residual over seeded random (kappa, momenta) samples.

    Samples with a propagator denominator within min_denominator of zero are
    redrawn (the kernels are only smooth off the poles).
    """
    rng = np.random.default_rng(seed)
    residuals = []
    for i in range(trials):
        kel = random_k(seed=seed + 1000 * (i + 1), boost_cap=boost_cap)
        while True:
            pprime = rng.uniform(-momentum_scale, momentum_scale, (kern.l, 4))
            p = rng.uniform(-momentum_scale, momentum_scale, (kern.k, 4))
            if kern.pole_denominators is None:
                break
            dens = kern.pole_denominators(pprime, p)
            if min(abs(d) for d in dens) > min_denominator:
                break
        residuals.append(intertwining_residual(kern, kel, pprime, p))
    return float(np.max(residuals)), residuals


# ---------------------------------------------------------------------------
# scalar kernels and operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarKernel:
    """Standard K-invariant kernel L(p', .) = mu(. - p') of a shell measure."""

    base: MassShellMeasure

    def pair(self, pprime, psi: GaussianPacket, scheme=None) -> complex:
        """int psi(p) L(p', dp) = int psi(p + p') mu(dp)."""
        pprime = np.asarray(pprime, dtype=float).reshape(4)
        mu = self.base

        def f(qvec):
            pts = mu.shell_points(qvec)
            return psi.evaluate(pts + pprime) / mu.omega(qvec)

        return complex(_shell_integrate(f, psi, mu, scheme=scheme,
                                        shift=pprime).value)


def standard_scalar_kernel(mu: MassShellMeasure) -> ScalarKernel:
    return ScalarKernel(base=mu)


def _right_integral_lebesgue(right_fn, f: GaussianPacket,
                             nsigma: float = 6.5) -> np.ndarray:
    """int R(p) f(p) d4p (a 4x4 @ C^4 pairing) over the principal-frame box."""
    evals, rot = np.linalg.eigh(f.prec)
    sig = 1.0 / np.sqrt(evals)
    widths = 2.0 * nsigma * sig
    freq = np.abs(rot.T @ f.phase)
    counts = [int(np.clip(np.ceil(2.3 * w / s + 0.45 * w * fr) + 8, 16, 220))
              for w, s, fr in zip(widths, sig, freq)]

    def integrand(u):
        pts = f.center[None, :] + u @ rot.T
        return np.einsum("nab,nb->na", right_fn(pts), f.evaluate(pts))

    res = integrate_box(integrand, -0.5 * widths, 0.5 * widths, counts,
                        error=False)
    return res.value


def _right_integral_shell(right_fn, f: GaussianPacket, mu: MassShellMeasure,
                          shift=None) -> np.ndarray:
    shift4 = np.zeros(4) if shift is None else np.asarray(shift, dtype=float)

    def integrand(qvec):
        pts = mu.shell_points(qvec) + shift4
        vals = np.einsum("nab,nb->na", right_fn(pts), f.evaluate(pts))
        return vals / mu.omega(qvec)[:, None]

    res = _shell_integrate(integrand, f, mu, shift=shift4,
                           zero=np.zeros(4, dtype=complex))
    return res.value


class OutState:
    """Lazy out-state (Xi u)^{a'...}(p'...) of a slot-factorized kernel.

    Per slot and packet, the momentum-side integral int R(p) f(p) dp is
    computed once and cached; the p'-dependent left matrices multiply it.
    """

    def __init__(self, kern: TensorKernel, u: FockElement, slot_measures):
        if kern.k != u.rank:
            raise RankMismatch(f"kernel expects rank {kern.k}, got {u.rank}")
        if kern.factors is None:
            raise KinvarError(
                "apply_operator needs a slot-factorized kernel "
                "(dense kernels would require a 4k-dimensional grid)"
            )
        self.kern = kern
        self.u = u
        self.l = kern.l
        self.slot_measures = slot_measures
        self._cache: dict = {}

    def _slot_vector(self, i, slot: SlotFactor, f: GaussianPacket,
                     pp: np.ndarray) -> np.ndarray:
        measure = self.slot_measures[i]
        if measure is None:
            key = (id(slot.right), id(f))
            if key not in self._cache:
                self._cache[key] = _right_integral_lebesgue(slot.right, f)
            return slot.left(pp) @ self._cache[key]
        mu, translated = measure
        shift = pp if translated else None
        key = (id(slot.right), id(f), mu,
               None if shift is None else tuple(shift))
        if key not in self._cache:
            self._cache[key] = _right_integral_shell(slot.right, f, mu,
                                                     shift=shift)
        return slot.left(pp) @ self._cache[key]

    def evaluate_array(self, pprime) -> np.ndarray:
        pprime = np.asarray(pprime, dtype=float).reshape(self.l, 4)
        out = np.zeros((4,) * self.l, dtype=complex)
        for cu, packets in self.u.terms:
            for coeff, slots in self.kern.factors:
                piece = np.array(cu * coeff, dtype=complex)
                for i, (slot, f) in enumerate(zip(slots, packets)):
                    vec = self._slot_vector(i, slot, f, pprime[i])
                    piece = np.multiply.outer(piece, vec)
                out += piece
        return out

    def evaluate(self, alphas, pprime) -> complex:
        return complex(self.evaluate_array(pprime)[tuple(alphas)])


def apply_operator(kern: TensorKernel, u: FockElement, mode: str = "lebesgue",
                   scalar_kernel: ScalarKernel | None = None,
                   atoms=None) -> OutState:
    """Out-state of the operator generated by the kernel.

    mode "lebesgue": all slots integrate d4p (elementary tensors factorize
    into independent 4D integrals per slot).  mode "mixed": the last slot
    pairs against the translated measure of scalar_kernel, the rest stay
    Lebesgue.  mode "spectral": per-slot shell measures from a finite atom
    list [(signed masses per slot, weight)] -- single-atom spectra only here;
    multi-atom superpositions combine out-states linearly.
    """
    if mode == "lebesgue":
        slot_measures = [None] * kern.k
    elif mode == "mixed":
        if scalar_kernel is None:
            raise KinvarError("mixed mode needs a scalar kernel")
        slot_measures = [None] * (kern.k - 1) + [(scalar_kernel.base, True)]
    elif mode == "spectral":
        if not atoms or len(atoms) != 1:
            raise KinvarError("spectral mode expects exactly one mass atom here")
        masses, weight = atoms[0]
        if len(masses) != kern.k:
            raise RankMismatch("atom arity must match kernel lower slots")
        from .measures import signed_shell

        u = u.scaled(weight)
        slot_measures = [(signed_shell(m), False) for m in masses]
    else:
        raise KinvarError(f"unknown apply_operator mode {mode!r}")
    return OutState(kern, u, slot_measures)


def operator_intertwining_residual(kern: TensorKernel, u: FockElement,
                                   kel: KElement, pprime_samples,
                                   mode: str = "lebesgue",
                                   scalar_kernel=None) -> float:
    """max |Xi(kappa u)(p') - kappa^{(x)l} Xi(u)(Lambda^{-1} p')| over samples."""
    moved = apply_operator(kern, u.k_transform(kel), mode=mode,
                           scalar_kernel=scalar_kernel)
    ref = apply_operator(kern, u, mode=mode, scalar_kernel=scalar_kernel)
    worst = 0.0
    for pprime in pprime_samples:
        pprime = np.asarray(pprime, dtype=float).reshape(kern.l, 4)
        lhs = moved.evaluate_array(pprime)
        back = ref.evaluate_array(pprime @ kel.lam_inv.T)
        rhs = _apply_matrix_to_axes(kel.kappa, back, range(kern.l))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# Moller contraction table
# ---------------------------------------------------------------------------


def _cm_momenta(m: float, s: float, theta: float):
    energy = np.sqrt(s) / 2.0
    kmag = np.sqrt(energy**2 - m**2)
    p1 = np.array([energy, 0.0, 0.0, kmag])
    p2 = np.array([energy, 0.0, 0.0, -kmag])
    p1p = np.array([energy, kmag * np.sin(theta), 0.0, kmag * np.cos(theta)])
    p2p = -p1p
    p2p[0] = energy
    return p1, p2, p1p, p2p


def moller_contraction_table(m: float, s: float, thetas, eps: float = 1e-6):
    """Index-contraction strength T(s, theta) of the antisymmetrized kernel.

    Two pipelines per row: the brute-force sum of |M|^2 over all four spinor
    indices, and a trace-technology oracle that only touches 4x4 products via
    sum_a u(p,a) u(p,a)^dag = (slash p + m)(slash p + m)^dag.  T is the
    kernel's own contraction, not a cross section.
    """
    if s <= 4.0 * m**2:
        raise BelowThreshold(f"s = {s} is below threshold 4 m^2 = {4 * m**2}")
    kern = moller_kernel(m, eps=eps)
    rows = []
    for theta in np.atleast_1d(np.asarray(thetas, dtype=float)):
        p1, p2, p1p, p2p = _cm_momenta(m, s, theta)
        t_man = minkowski_sq(p1 - p1p)
        u_man = minkowski_sq(p1 - p2p)
        arr = kern.eval_array(np.stack([p1p, p2p]), np.stack([p1, p2]))
        t_index = float(np.sum(np.abs(arr) ** 2))
        t_trace = _moller_trace(m, p1, p2, p1p, p2p, eps)
        rel = abs(t_index - t_trace) / max(abs(t_trace), 1e-300)
        rows.append({
            "theta": float(theta),
            "t": float(t_man),
            "u": float(u_man),
            "T_indexsum": t_index,
            "T_trace": t_trace,
            "rel_diff": float(rel),
        })
    return rows


def _moller_trace(m, p1, p2, p1p, p2p, eps) -> float:
    """Trace-form contraction: independent of the index-loop pipeline."""
    x1, x2 = _dirac_factor(p1, m), _dirac_factor(p2, m)
    x1p, x2p = _dirac_factor(p1p, m), _dirac_factor(p2p, m)
    g0 = GAMMA[0]
    f = np.stack([g0 @ x1p @ GAMMA[r] @ x1 for r in range(4)])
    g = np.stack([g0 @ x2p @ GAMMA[r] @ x2 for r in range(4)])
    h = np.stack([g0 @ x2p @ GAMMA[r] @ x1 for r in range(4)])
    jm = np.stack([g0 @ x1p @ GAMMA[r] @ x2 for r in range(4)])
    eta_d = np.diag(ETA)
    t_den = minkowski_sq(p2 - p2p) + 1j * eps
    u_den = minkowski_sq(p2 - p1p) + 1j * eps

    ff = np.einsum("rij,mij->rm", f, f.conj())
    gg = np.einsum("rij,mij->rm", g, g.conj())
    hh = np.einsum("rij,mij->rm", h, h.conj())
    jj = np.einsum("rij,mij->rm", jm, jm.conj())
    direct = np.einsum("r,m,rm,rm->", eta_d, eta_d, ff, gg) / abs(t_den) ** 2
    exchange = np.einsum("r,m,rm,rm->", eta_d, eta_d, hh, jj) / abs(u_den) ** 2
    cross_tr = np.einsum("rij,mjk,rkl,mli->rm", f, h.conj().transpose(0, 2, 1),
                         g, jm.conj().transpose(0, 2, 1))
    cross = np.einsum("r,m,rm->", eta_d, eta_d, cross_tr) / (t_den *
                                                             np.conj(u_den))
    total = direct + exchange - 2.0 * np.real(cross)
    return float(np.real(total))
