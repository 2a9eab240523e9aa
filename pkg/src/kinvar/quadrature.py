"""Integration engines behind every measure pairing.

Three families:

* tensor Gauss-Legendre boxes (deterministic, spectral accuracy, adaptive box),
* spherical-radial rules r^2 dr dOmega (mandatory for integrands carrying a
  1/|pvec| weight: the nodes never touch the origin),
* scrambled-Sobol quasi-Monte Carlo with Gaussian importance for the 6D
  double-shell integrals.

Deterministic engines report a two-resolution difference as the error
estimate, QMC reports the standard error across 8 independent scrambles.
Integrand callables receive batches of points with shape (N, d) and must
return (N,) or (N, ...) arrays; summation uses numpy's fixed pairwise
reduction, so results are bit-stable for a fixed scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.stats import norm, qmc

from .errors import NonFinite, OmegaNonPositive

__all__ = [
    "QuadratureScheme",
    "IntegralResult",
    "integrate_3d",
    "integrate_6d",
    "integrate_box",
    "pv_plus_delta",
]

TENSOR = "tensor-gauss-legendre"
SPHERICAL = "spherical-radial"
QMC = "quasi-monte-carlo"

_QMC_BATCHES = 8


@dataclass(frozen=True)
class QuadratureScheme:
    kind: str = SPHERICAL
    nodes_per_axis: int = 48       # tensor boxes
    radial_nodes: int = 128        # spherical rules
    angular_nodes: int = 24
    cutoff: float = 8.0
    samples: int = 1 << 20         # QMC total across all scrambles
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (TENSOR, SPHERICAL, QMC):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if min(self.nodes_per_axis, self.radial_nodes, self.angular_nodes) < 2:
            raise ValueError("node counts must be >= 2")
        if self.samples < 2 * _QMC_BATCHES:
            raise ValueError("QMC sample count too small")

    def refined(self, factor: float = 0.5) -> "QuadratureScheme":
        """Lower-resolution copy used for the two-resolution error estimate."""
        return replace(
            self,
            nodes_per_axis=max(4, int(self.nodes_per_axis * factor)),
            radial_nodes=max(8, int(self.radial_nodes * factor)),
            angular_nodes=max(4, int(self.angular_nodes * factor)),
        )


@dataclass(frozen=True)
class IntegralResult:
    value: complex | np.ndarray
    error_estimate: float

    def __iter__(self):
        yield self.value
        yield self.error_estimate


@lru_cache(maxsize=256)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gl(a: float, b: float, n: int):
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def _check_finite(vals):
    if not np.all(np.isfinite(vals)):
        raise NonFinite("integrand produced NaN or Inf at a quadrature node")


def _weighted_sum(vals, weights):
    _check_finite(vals)
    w = weights.reshape((-1,) + (1,) * (vals.ndim - 1))
    return np.sum(vals * w, axis=0)


_CHUNK = 1 << 18


def _tensor_run(f, lo, hi, counts):
    axes = [_gl(a, b, int(n)) for a, b, n in zip(lo, hi, counts)]
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    shape = [len(ax[0]) for ax in axes]
    w = np.ones(shape)
    for i, ax in enumerate(axes):
        expand = [1] * len(axes)
        expand[i] = shape[i]
        w = w * ax[1].reshape(expand)
    w = w.reshape(-1)
    # Chunked evaluation keeps matrix-valued integrands from materializing
    # huge arrays; partial sums accumulate in a fixed order.
    total = None
    for start in range(0, pts.shape[0], _CHUNK):
        part = _weighted_sum(f(pts[start:start + _CHUNK]), w[start:start + _CHUNK])
        total = part if total is None else total + part
    return total


def integrate_box(f, lo, hi, nodes_per_axis, error: bool = True) -> IntegralResult:
    """Tensor Gauss-Legendre integral of f over the box [lo, hi] in d dims.

    nodes_per_axis may be a single count or one per axis.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(hi <= lo):
        return IntegralResult(0.0 + 0.0j, 0.0)
    counts = np.broadcast_to(np.asarray(nodes_per_axis, dtype=int), lo.shape)
    value = _tensor_run(f, lo, hi, counts)
    if not error:
        return IntegralResult(value, 0.0)
    coarse = _tensor_run(f, lo, hi, np.maximum(4, counts // 2))
    return IntegralResult(value, float(np.max(np.abs(value - coarse))))


def _spherical_nodes(radius: float, n_r: int, n_ang: int):
    r, wr = _gl(0.0, radius, n_r)
    mu, wmu = _gl(-1.0, 1.0, n_ang)
    phi = (np.arange(n_ang) + 0.5) * (2.0 * np.pi / n_ang)
    wphi = np.full(n_ang, 2.0 * np.pi / n_ang)
    R, MU, PHI = np.meshgrid(r, mu, phi, indexing="ij")
    s = np.sqrt(1.0 - MU**2)
    pts = np.stack(
        [R * s * np.cos(PHI), R * s * np.sin(PHI), R * MU], axis=-1
    ).reshape(-1, 3)
    W = (R**2) * np.einsum("i,j,k->ijk", wr, wmu, wphi)
    return pts, W.reshape(-1)


def integrate_3d(f, scheme: QuadratureScheme, center=None) -> IntegralResult:
    """Integral of f over R^3 truncated by the scheme.

    The spherical-radial parametrization keeps 1/|pvec| weights integrable;
    `center` shifts the tensor box (ignored by the spherical rule, which is
    origin-anchored like the measures it serves).
    """
    if scheme.kind == TENSOR:
        c = np.zeros(3) if center is None else np.asarray(center, dtype=float)
        return integrate_box(
            f, c - scheme.cutoff, c + scheme.cutoff, scheme.nodes_per_axis
        )
    if scheme.kind == SPHERICAL:

        def run(n_r, n_ang):
            pts, w = _spherical_nodes(scheme.cutoff, n_r, n_ang)
            return _weighted_sum(f(pts), w)

        value = run(scheme.radial_nodes, scheme.angular_nodes)
        coarse = run(max(8, scheme.radial_nodes // 2),
                     max(4, scheme.angular_nodes // 2))
        return IntegralResult(value, float(np.max(np.abs(value - coarse))))
    return _integrate_qmc(f, scheme, dim=3)


def integrate_6d(f, scheme: QuadratureScheme) -> IntegralResult:
    """QMC integral of f over R^3 x R^3 (f takes (N, 6) batches)."""
    if scheme.kind != QMC:
        scheme = replace(scheme, kind=QMC)
    return _integrate_qmc(f, scheme, dim=6)


def _integrate_qmc(f, scheme: QuadratureScheme, dim: int) -> IntegralResult:
    """Scrambled-Sobol estimate with Gaussian importance of scale cutoff/3.

    The sample budget is split across 8 independent scrambles; the value is
    their mean and the error estimate the standard error of that mean.
    """
    sigma = scheme.cutoff / 3.0
    per_batch = scheme.samples // _QMC_BATCHES
    m = max(1, int(np.floor(np.log2(per_batch))))
    seeds = np.random.SeedSequence(scheme.seed).spawn(_QMC_BATCHES)
    log_norm = dim * 0.5 * np.log(2.0 * np.pi * sigma**2)
    means = []
    for seq in seeds:
        sob = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seq))
        u = sob.random_base2(m)
        u = np.clip(u, 1e-15, 1.0 - 1e-15)
        z = norm.ppf(u)
        pts = sigma * z
        weight = np.exp(log_norm + 0.5 * np.sum(z**2, axis=1))
        vals = f(pts)
        _check_finite(vals)
        w = weight.reshape((-1,) + (1,) * (vals.ndim - 1))
        means.append(np.mean(vals * w, axis=0))
    means = np.stack(means, axis=0)
    value = np.mean(means, axis=0)
    spread = np.std(means, axis=0, ddof=1) / np.sqrt(_QMC_BATCHES)
    if np.ndim(value) == 0:
        value = complex(value)
    return IntegralResult(value, float(np.max(np.abs(spread))))


def pv_plus_delta(f, omega: float, outer_cut: float = 12.0, nodes: int = 96) -> complex:
    """lim_{eps->0+} of the contour integral of f(x) / (x^2 - omega^2 + i eps).

    Sokhotski-Plemelj split: the delta part contributes
    -(i pi / 2 omega) (f(omega) + f(-omega)); the principal value is computed
    by subtracting, on a window covering both poles, the two-point Lagrange
    interpolant of f through +-omega (whose PV window integral is known in
    closed form) and integrating the regularized remainder with Gauss-Legendre
    panels split exactly at the poles.  f receives 1D arrays of nodes.
    """
    if omega <= 0:
        raise OmegaNonPositive(f"omega must be > 0, got {omega}")

    f_plus, f_minus = (complex(v) for v in np.asarray(f(np.array([omega, -omega]))))

    # Window [-W, W] with W = omega + 1 covering both poles.
    w_edge = omega + 1.0
    # PV of the interpolant over the window, via log1p for small omega.
    log_ratio = -np.log1p(2.0 * omega / (w_edge - omega))
    interp_pv = (f_plus + f_minus) * log_ratio / (2.0 * omega)

    def remainder(x):
        ell = (f_plus * (x + omega) + f_minus * (omega - x)) / (2.0 * omega)
        return (f(x) - ell) / (x**2 - omega**2)

    panels = [(-w_edge, -omega), (-omega, omega), (omega, w_edge)]
    total = complex(interp_pv)
    for a, b in panels:
        x, w = _gl(a, b, nodes)
        vals = remainder(x)
        _check_finite(vals)
        total += complex(np.sum(vals * w))

    cut = max(outer_cut, w_edge + 1.0)
    for a, b in [(-cut, -w_edge), (w_edge, cut)]:
        x, w = _gl(a, b, nodes)
        vals = np.asarray(f(x)) / (x**2 - omega**2)
        _check_finite(vals)
        total += complex(np.sum(vals * w))

    total += -1j * np.pi / (2.0 * omega) * (f_plus + f_minus)
    return total
