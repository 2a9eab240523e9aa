"""Invariant mass-shell measures and their pairings.

Measures are intensional: a shell (mass, sign), an optional matrix/tensor
weight, or a finite mass spectrum.  Every use is a pairing against a test
packet, a convolution, or an invariance residual -- shell grids are never
materialized.  Quadrature domains adapt to the packet covariance; the
spherical-radial rule is mandatory for massless shells (1/|pvec| weight,
origin excluded).

Propagator normalizations (momentum space, exposed for downstream use):
scalar  +pi*i/(2 pi)^2 * Omega_m^+-,
fermion -pi*i/(2 pi)^2 * Omega_{f,m}^+-,
photon  +pi*i/(2 pi)^2 * Omega_0^+-,
W boson -pi*i/(2 pi)^2 * (Omega_{b,m_W}^+-)^{alpha beta}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .clifford import ETA, ID4, slash
from .errors import ConfigInvalid, PacketNotPositiveTime
from .kgroup import KElement
from .packets import GaussianPacket, gaussian_scalar
from .quadrature import (
    QMC,
    SPHERICAL,
    TENSOR,
    IntegralResult,
    QuadratureScheme,
    integrate_box,
    integrate_3d,
    pv_plus_delta,
)

__all__ = [
    "MassShellMeasure",
    "WeightedMeasure",
    "SpectralMeasure",
    "signed_shell",
    "pair_scalar",
    "pair_matrix",
    "spectral_pair",
    "convolve",
    "invariance_residual",
    "verify_propagator_identity",
    "PropagatorCheck",
    "SCALAR_PROPAGATOR_NORM",
    "FERMION_PROPAGATOR_NORM",
    "PHOTON_PROPAGATOR_NORM",
    "WBOSON_PROPAGATOR_NORM",
]

_TWO_PI_SQ = (2.0 * np.pi) ** 2
SCALAR_PROPAGATOR_NORM = np.pi * 1j / _TWO_PI_SQ
FERMION_PROPAGATOR_NORM = -np.pi * 1j / _TWO_PI_SQ
PHOTON_PROPAGATOR_NORM = np.pi * 1j / _TWO_PI_SQ
WBOSON_PROPAGATOR_NORM = -np.pi * 1j / _TWO_PI_SQ

_NSIGMA = 8.0


@dataclass(frozen=True)
class MassShellMeasure:
    """Omega_m^+- : the Lorentz-invariant measure d3p / omega_m on H_m^+-."""

    mass: float
    sign: int = +1

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be >= 0 (use signed_shell for signed m)")
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")

    def omega(self, pvec: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum(pvec**2, axis=-1) + self.mass**2)

    def shell_points(self, pvec: np.ndarray) -> np.ndarray:
        """Lift (N, 3) spatial points to (N, 4) points on the shell."""
        p0 = self.sign * self.omega(pvec)
        return np.concatenate([p0[..., None], pvec], axis=-1)


def signed_shell(m: float) -> MassShellMeasure:
    """Omega_m for m != 0: Omega_m^+ if m > 0, Omega_{-m}^- if m < 0."""
    if m == 0:
        raise ValueError("signed shell requires m != 0")
    return MassShellMeasure(mass=abs(m), sign=+1 if m > 0 else -1)


@dataclass(frozen=True)
class WeightedMeasure:
    """A shell measure with a scalar/matrix/tensor weight on the shell.

    weight: "scalar" (1), "fermion" (slash(p) + m), "wboson"
    (-eta^{ab} + p^a p^b / m_W^2), or "kweak" (p^a p^b).
    """

    base: MassShellMeasure
    weight: str = "scalar"
    wboson_mass: float = 1.0

    _KINDS = ("scalar", "fermion", "wboson", "kweak")

    def __post_init__(self):
        if self.weight not in self._KINDS:
            raise ValueError(f"unknown weight {self.weight!r}")

    @property
    def is_scalar(self) -> bool:
        return self.weight == "scalar"

    @property
    def transforms_as(self) -> str:
        """How pairings transform under K: scalar, conjugation, or tensor."""
        if self.weight == "scalar":
            return "scalar"
        if self.weight == "fermion":
            return "conjugation"
        return "tensor"

    def weight_values(self, shell_pts: np.ndarray) -> np.ndarray:
        if self.weight == "scalar":
            return np.ones(shell_pts.shape[0])
        if self.weight == "fermion":
            return slash(shell_pts) + self.base.mass * ID4
        outer = np.einsum("na,nb->nab", shell_pts, shell_pts)
        if self.weight == "kweak":
            return outer
        return -ETA[None, :, :] + outer / self.wboson_mass**2


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite-atomic mass spectrum: pairs as sum_i w_i <Omega_{m_i}, psi>."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for m, w in self.atoms:
            if m == 0:
                raise ValueError("atoms must carry nonzero signed masses")
            if w < 0:
                raise ValueError("atom weights must be >= 0")


# ---------------------------------------------------------------------------
# adaptive quadrature domains
# ---------------------------------------------------------------------------


def _omega_window(psi: GaussianPacket, mu: MassShellMeasure, shift, s,
                  nsigma: float):
    """Reachable omega range implied by the packet's time window, or None."""
    c0 = psi.center[0]
    sig0 = psi.sigma_axes[0]
    coeff = s * mu.sign
    lo, hi = sorted(((c0 - nsigma * sig0 - shift[0]) / coeff,
                     (c0 + nsigma * sig0 - shift[0]) / coeff))
    if hi < mu.mass:
        return None
    return max(lo, mu.mass), hi


def _shell_jacobian(qstar: np.ndarray, mu: MassShellMeasure, s: float):
    """d(arg)/d(pvec) for arg = shift + s * (sign*omega(pvec), pvec)."""
    omega = float(np.sqrt(np.sum(qstar**2) + mu.mass**2))
    grad = mu.sign * qstar / max(omega, 1e-12)
    jac = np.zeros((4, 3))
    jac[0, :] = grad
    jac[1:, :] = np.eye(3)
    return s * jac


def _node_count(width: float, sig: float, freq: float, gap: float) -> int:
    """Per-axis Gauss-Legendre count.

    The Gaussian-resolution and oscillation demands add (both raise the
    effective polynomial degree); the 1/omega analyticity limit (complex
    branch points at distance ~ mass + box-to-origin gap) competes as a
    separate geometric rate, so the requirements combine as a max.
    """
    smooth = 2.6 * width / sig + 0.45 * width * freq
    analytic = 9.5 * (0.5 * width) / gap
    return int(np.clip(np.ceil(max(smooth, analytic)) + 10, 24, 420))


def _restricted_exponent(psi: GaussianPacket, mu: MassShellMeasure, shift, s,
                         qvec: np.ndarray) -> np.ndarray:
    """Gaussian exponent of the packet along the shell, at (N, 3) points."""
    arg = shift[None, :] + s * mu.shell_points(np.atleast_2d(qvec))
    d = arg - psi.center
    return 0.5 * np.einsum("ni,ij,nj->n", d, psi.prec, d)


def _principal_box(psi: GaussianPacket, mu: MassShellMeasure, shift, s,
                   nsigma: float):
    """Rotated box and per-axis node counts for the tensor shell pairing.

    The frame comes from the linearized shell restriction J^T Q J at the
    packet's on-shell peak (Gauss-Newton refined); the box edges are then
    bisected on the exact restricted exponent, so truncation stays at the
    e^{-nsigma^2/2} level even where the shell curvature bends the packet
    away from its linearization.
    """
    qstar = (psi.center[1:] - shift[1:]) / s
    for _ in range(8):
        jac = _shell_jacobian(qstar, mu, s)
        arg = shift + s * mu.shell_points(qstar[None, :])[0]
        grad = jac.T @ psi.prec @ (arg - psi.center)
        form = jac.T @ psi.prec @ jac
        step = np.linalg.solve(form + 1e-12 * np.eye(3), grad)
        qstar = qstar - step
        if np.linalg.norm(step) < 1e-10:
            break

    jac = _shell_jacobian(qstar, mu, s)
    form = jac.T @ psi.prec @ jac
    evals, rot = np.linalg.eigh(form)
    sig = 1.0 / np.sqrt(np.maximum(evals, 1e-12))
    e_peak = float(_restricted_exponent(psi, mu, shift, s, qstar[None, :])[0])
    if e_peak > 60.0:
        return None
    need = e_peak + 0.5 * nsigma**2

    def edge(direction, start):
        def excess_at(t):
            q = qstar + t * direction
            return float(_restricted_exponent(psi, mu, shift, s, q[None, :])[0])

        t_hi = start
        while excess_at(t_hi) < need and t_hi < 80.0 * start / nsigma:
            t_hi *= 1.35
        t_lo = 0.05 * start
        for _ in range(30):
            mid = 0.5 * (t_lo + t_hi)
            if excess_at(mid) >= need:
                t_hi = mid
            else:
                t_lo = mid
        return t_hi

    lo = np.empty(3)
    hi = np.empty(3)
    for i in range(3):
        hi[i] = edge(rot[:, i], nsigma * sig[i])
        lo[i] = -edge(-rot[:, i], nsigma * sig[i])

    widths = hi - lo
    b_eff = np.abs(psi.phase[0]) * np.ones(3) + np.abs(rot.T @ psi.phase[1:])
    origin = rot.T @ (-qstar)
    excess = np.maximum(np.abs(origin - 0.5 * (lo + hi)) - 0.5 * widths, 0.0)
    gap = mu.mass + float(np.linalg.norm(excess))
    counts = [_node_count(w, sg, f, gap) for w, sg, f in zip(widths, sig, b_eff)]
    return qstar, rot, (lo, hi), counts


def _is_isotropic(psi: GaussianPacket, shift) -> bool:
    """Spatially radial packet about the origin (enables the 1D radial path)."""
    if np.any(shift[1:] != 0.0) or np.any(psi.center[1:] != 0.0):
        return False
    if np.any(psi.phase[1:] != 0.0):
        return False
    sp = psi.prec[1:, 1:]
    if not np.allclose(sp, sp[0, 0] * np.eye(3), atol=1e-12):
        return False
    if np.max(np.abs(psi.prec[0, 1:])) > 1e-12:
        return False
    return all(e[1] == e[2] == e[3] == 0 for e in psi.poly)


def _shell_integrate(f, psi, mu, scheme=None, shift=None, reflect=False,
                     zero=0.0 + 0.0j) -> IntegralResult:
    """Integrate f(pvec) (already carrying 1/omega) over the adaptive domain."""
    if scheme is not None:
        if mu.mass == 0.0 and scheme.kind == TENSOR:
            raise ConfigInvalid(
                "tensor grids are rejected for massless shells; "
                "use the spherical-radial scheme"
            )
        return integrate_3d(f, scheme)

    shift = np.zeros(4) if shift is None else np.asarray(shift, dtype=float)
    s = -1.0 if reflect else 1.0
    nsigma = _NSIGMA
    window = _omega_window(psi, mu, shift, s, nsigma)
    if window is None:
        return IntegralResult(zero, 0.0)
    radius = np.sqrt(max(window[1] ** 2 - mu.mass**2, 0.0)) + 1e-9

    sig_sp = psi.sigma_axes[1:]
    sig_min = float(np.min(sig_sp))
    if _is_isotropic(psi, shift):
        cut = min(radius, nsigma * float(np.max(sig_sp)))
        freq = abs(psi.phase[0])
        n_r = 2.6 * cut / sig_min + 0.45 * cut * freq
        if mu.mass > 0.0:
            n_r += 12.0 * cut / mu.mass
        n_r = int(np.clip(np.ceil(n_r) + 8, 64, 640))
        sch = QuadratureScheme(kind=SPHERICAL, radial_nodes=n_r,
                               angular_nodes=12, cutoff=cut)
        return integrate_3d(f, sch)

    if mu.mass == 0.0:
        reach = float(np.linalg.norm((psi.center[1:] - shift[1:]) / s)
                      + nsigma * np.max(sig_sp))
        cut = min(radius, reach)
        freq = abs(psi.phase[0]) + float(np.linalg.norm(psi.phase[1:]))
        n_r = int(np.clip(10.0 * cut / sig_min + 0.45 * cut * freq, 96, 512))
        n_ang = int(np.clip(4.0 * reach / sig_min + 0.45 * reach * freq, 24, 96))
        sch = QuadratureScheme(kind=SPHERICAL, radial_nodes=n_r,
                               angular_nodes=n_ang, cutoff=cut)
        return integrate_3d(f, sch)

    box = _principal_box(psi, mu, shift, s, nsigma)
    if box is None:
        return IntegralResult(zero, 0.0)
    qstar, rot, (lo, hi), counts = box

    def rotated(u):
        return f(qstar[None, :] + u @ rot.T)

    return integrate_box(rotated, lo, hi, counts)


# ---------------------------------------------------------------------------
# pairings
# ---------------------------------------------------------------------------


def pair_scalar(mu: MassShellMeasure, psi: GaussianPacket,
                scheme: QuadratureScheme | None = None,
                with_error: bool = False):
    """<Omega_m^+-, psi> = integral of psi(+-omega, pvec) d3p / omega."""

    def f(pvec):
        pts = mu.shell_points(pvec)
        return psi.evaluate(pts) / mu.omega(pvec)

    res = _shell_integrate(f, psi, mu, scheme=scheme)
    return res if with_error else res.value


def pair_matrix(wm: WeightedMeasure, psi: GaussianPacket,
                scheme: QuadratureScheme | None = None,
                with_error: bool = False):
    """Entrywise pairing of a weighted measure: int psi(p) W(p) Omega(dp)."""
    mu = wm.base

    def f(pvec):
        pts = mu.shell_points(pvec)
        w = wm.weight_values(pts)
        vals = psi.evaluate(pts) / mu.omega(pvec)
        if w.ndim == 1:
            return vals * w
        return vals[:, None, None] * w

    zero = 0.0 + 0.0j if wm.is_scalar else np.zeros((4, 4), dtype=complex)
    res = _shell_integrate(f, psi, mu, scheme=scheme, zero=zero)
    return res if with_error else res.value


def spectral_pair(sigma: SpectralMeasure, psi: GaussianPacket,
                  scheme: QuadratureScheme | None = None) -> complex:
    """Pairing of the superposition mu_sigma = int Omega_m sigma(dm)."""
    total = 0.0 + 0.0j
    for m, w in sigma.atoms:
        if w == 0.0:
            continue
        total += w * pair_scalar(signed_shell(m), psi, scheme=scheme)
    return total


def convolve(wm: WeightedMeasure, u: GaussianPacket, p,
             scheme: QuadratureScheme | None = None) -> np.ndarray:
    """(mu * u)(p) = int W(q) u(p - q) Omega(dq), a C^4 value."""
    if u.cshape != (4,):
        raise ValueError("convolution expects a spinor packet")
    p = np.asarray(p, dtype=float).reshape(4)
    mu = wm.base

    def f(qvec):
        pts = mu.shell_points(qvec)
        uv = u.evaluate(p - pts)
        w = wm.weight_values(pts)
        if w.ndim == 1:
            out = uv * w[:, None]
        else:
            out = np.einsum("nab,nb->na", w, uv)
        return out / mu.omega(qvec)[:, None]

    res = _shell_integrate(f, u, mu, scheme=scheme, shift=p, reflect=True,
                           zero=np.zeros(4, dtype=complex))
    return res.value


def invariance_residual(wm: WeightedMeasure, k: KElement, psi: GaussianPacket,
                        scheme: QuadratureScheme | None = None) -> float:
    """Defect of the K-invariance identity for the given weighted measure.

    scalar weight:      |<mu, kappa psi> - <mu, psi>|
    matrix weight:      ||<mu, kappa psi> - kappa <mu, psi> kappa^{-1}||_inf
    tensor weight:      ||<mu, kappa psi> - Lambda <mu, psi> Lambda^T||_inf
    """
    moved = pair_matrix(wm, psi.k_transform(k), scheme=scheme)
    ref = pair_matrix(wm, psi, scheme=scheme)
    kind = wm.transforms_as
    if kind == "scalar":
        return float(abs(moved - ref))
    if kind == "conjugation":
        return float(np.max(np.abs(moved - k.kappa @ ref @ k.kappa_inv)))
    return float(np.max(np.abs(moved - k.lam @ ref @ k.lam.T)))


# ---------------------------------------------------------------------------
# Theorem-7 style propagator identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorCheck:
    lhs: complex
    rhs: complex
    residual: float


def positive_time_transform(T: float, w: float, spatial_width: float = 1.0,
                            min_ratio: float = 6.0) -> GaussianPacket:
    """Fourier transform of exp(-(x0-T)^2/2w^2) exp(-|xvec|^2/2s^2).

    Convention psi-hat(p) = (2 pi)^{-2} int psi(x) e^{-i p.x} dx (Minkowski
    dot), which gives w s^3 e^{-i p0 T} e^{-((p0 w)^2 + (|pvec| s)^2)/2}.
    The packet is only approximately supported at x0 > 0; the leaked mass
    erfc(T / sqrt(2) w) / 2 must stay inside the stated budget.
    """
    if T / w < min_ratio:
        leak = 0.5 * erfc(T / (np.sqrt(2.0) * w))
        raise PacketNotPositiveTime(
            f"T/w = {T / w:.2f} < {min_ratio}: negative-time leakage {leak:.2e} "
            "exceeds the support budget"
        )
    s = spatial_width
    prec = np.diag([w**2, s**2, s**2, s**2])
    return gaussian_scalar(center=np.zeros(4), prec=prec, amplitude=w * s**3,
                           phase=(-T, 0.0, 0.0, 0.0))


def verify_propagator_identity(m: float, T: float = 8.0, w: float = 1.0,
                               spatial_width: float = 1.0,
                               scheme: QuadratureScheme | None = None,
                               pv_nodes: int = 96) -> PropagatorCheck:
    """Check -pi i <Omega_m^+, psi-hat> against the i-epsilon contour integral.

    The left side is a mass-shell pairing; the right side re-integrates the
    same transform through the principal-value-plus-delta contour, p0 first,
    then the spatial outer integral.  The two pipelines share nothing but the
    closed-form transform.
    """
    psi_hat = positive_time_transform(T, w, spatial_width)
    shell = MassShellMeasure(mass=m, sign=+1)
    lhs = -1j * np.pi * pair_scalar(shell, psi_hat, scheme=scheme)

    sig = psi_hat.sigma_axes
    outer_cut = float(_NSIGMA * max(sig[0], 1.0 / w) + m + 1.0)
    if scheme is None:
        cut = float(_NSIGMA * np.max(sig[1:]))
        scheme_out = QuadratureScheme(kind=SPHERICAL, radial_nodes=128,
                                      angular_nodes=8, cutoff=cut)
    else:
        scheme_out = scheme

    def outer(pvec):
        out = np.empty(pvec.shape[0], dtype=complex)
        for i, q in enumerate(pvec):
            omega = float(np.sqrt(np.sum(q**2) + m**2))

            def slice_f(x, q=q):
                pts = np.concatenate(
                    [x[:, None], np.broadcast_to(q, (x.size, 3))], axis=1
                )
                return psi_hat.evaluate(pts)

            out[i] = pv_plus_delta(slice_f, omega, outer_cut=outer_cut,
                                   nodes=pv_nodes)
        return out

    rhs = integrate_3d(outer, scheme_out).value
    residual = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return PropagatorCheck(lhs=complex(lhs), rhs=complex(rhs),
                           residual=float(residual))
