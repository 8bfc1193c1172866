"""Limit-side functionals: the scalar-curvature integral and the Fredholm
determinant of the min-kernel operator.

The integral operator has kernel min(s, t) Gamma(u(t)) on [0,1]; its
determinant det(I + scale * K) enters the limiting density as exp(gamma/2).
The kernel is only Lipschitz across the diagonal, so a plain Gauss-Legendre
Nystrom determinant converges at O(q^-2) rather than spectrally; the
implementation therefore evaluates the pivoted-LU log-determinant on three
nested node counts (q/2, q, 2q) and returns the Richardson limit, which
restores ~1e-10 accuracy at q = 64 for the constant-coefficient oracle.  The
trace series applies the same extrapolation per trace power so the two
surfaces agree to the series remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .development import DevelopedPath
from .geometry import ManifoldSpec, curvature_in_frame, gamma_operator
from .jacobi import gauss_legendre_01

DEFAULT_SCALE = 1.0 / 12.0


@dataclass
class KernelDiscretization:
    """Quadrature nodes/weights on [0,1] with a Gamma sample per node."""

    nodes: np.ndarray
    weights: np.ndarray
    gamma_samples: np.ndarray  # (q, d, d)
    gamma_fn: Callable[[float], np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        sym = np.max(np.abs(self.gamma_samples - np.transpose(self.gamma_samples, (0, 2, 1))))
        if sym > 1e-8:
            raise ValueError(f"Gamma samples not symmetric (residual {sym:.2e})")

    @property
    def dim(self) -> int:
        return self.gamma_samples.shape[1]

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], nodes: int = 64):
        x, w = gauss_legendre_01(nodes)
        samples = np.array([np.asarray(fn(t), dtype=float) for t in x])
        return cls(x, w, samples, gamma_fn=fn)

    @classmethod
    def from_constant(cls, gamma: np.ndarray, nodes: int = 64):
        g = np.asarray(gamma, dtype=float)
        return cls.from_function(lambda t: g, nodes=nodes)

    @classmethod
    def from_developed_path(cls, path: DevelopedPath, nodes: int = 64):
        """Gamma sampled at the development frames, held piecewise constant
        between the left endpoints of the fine grid cells."""
        m = path.manifold
        n = path.grid.n

        def fn(t):
            i = min(int(t * n), n - 1)
            c = curvature_in_frame(m, path.node(i))
            return gamma_operator(c)

        return cls.from_function(fn, nodes=nodes)

    def _refined(self, nodes: int) -> "KernelDiscretization":
        if self.gamma_fn is not None:
            return KernelDiscretization.from_function(self.gamma_fn, nodes=nodes)
        # step interpolation of the stored samples
        mids = 0.5 * (self.nodes[1:] + self.nodes[:-1])

        def fn(t):
            return self.gamma_samples[int(np.searchsorted(mids, t))]

        return KernelDiscretization.from_function(fn, nodes=nodes)

    def sup_gamma_norm(self) -> float:
        return float(max(np.linalg.norm(g, 2) for g in self.gamma_samples))


def _nystrom_matrix(k: KernelDiscretization, scale: float) -> np.ndarray:
    """(q d) x (q d) matrix with block (j, l) = scale min(t_j,t_l) Gamma_l w_l."""
    t, w, g = k.nodes, k.weights, k.gamma_samples
    q, d = len(t), k.dim
    coef = scale * np.minimum.outer(t, t) * w[None, :]
    blocks = coef[:, :, None, None] * g[None, :, :, :]
    return blocks.transpose(0, 2, 1, 3).reshape(q * d, q * d)


def _richardson(v_half: float, v_base: float, v_double: float) -> float:
    r1a = (4.0 * v_base - v_half) / 3.0
    r1b = (4.0 * v_double - v_base) / 3.0
    return (8.0 * r1b - r1a) / 7.0


@dataclass
class FredholmResult:
    log_det: float
    raw_log_dets: dict[int, float]
    doubling_gap: float
    converged: bool
    sign_ok: bool


def fredholm_nystrom(k: KernelDiscretization, scale: float, tol: float = 1e-5) -> FredholmResult:
    """log det(I + scale * K) by Nystrom discretization.

    Pivoted-LU log-determinants on node counts q/2, q and 2q feed a two-level
    Richardson extrapolation (the diagonal kink of the min kernel caps the
    raw quadrature at second order).  The q vs 2q gap is the convergence
    check; exceeding ``tol`` flags the result as non-converged.
    """
    q = len(k.nodes)
    levels = [max(q // 2, 2), q, 2 * q]
    raw: dict[int, float] = {}
    sign_ok = True
    for ql in levels:
        kd = k if ql == q else k._refined(ql)
        a = _nystrom_matrix(kd, scale)
        sign, ld = np.linalg.slogdet(np.eye(a.shape[0]) + a)
        sign_ok &= sign > 0
        raw[ql] = float(ld)
    gap = abs(raw[levels[2]] - raw[levels[1]])
    value = _richardson(raw[levels[0]], raw[levels[1]], raw[levels[2]])
    return FredholmResult(log_det=value, raw_log_dets=raw, doubling_gap=gap,
                          converged=gap <= tol, sign_ok=sign_ok)


@dataclass
class SeriesResult:
    gamma: float
    gamma_k: list[float]
    remainder_bound: float
    kappa: float


def trace_powers(a: np.ndarray, k_max: int) -> np.ndarray:
    out = np.zeros(k_max)
    p = a.copy()
    out[0] = np.trace(p)
    for k in range(1, k_max):
        p = p @ a
        out[k] = np.trace(p)
    return out


def fredholm_series(k: KernelDiscretization, scale: float, k_max: int = 30) -> SeriesResult:
    """Alternating trace series for log det(I + scale K).

    gamma_k is the trace of the k-th power of the discretized kernel;
    requires kappa = scale * sup ||Gamma|| < 1 so the series converges, with
    remainder bounded by d kappa^{k_max+1} / ((k_max+1)(1 - kappa)).
    """
    kappa = scale * k.sup_gamma_norm()
    if kappa >= 1.0:
        raise ValueError(f"series requires scale * sup||Gamma|| < 1 (got {kappa:.3f})")
    q = len(k.nodes)
    levels = [max(q // 2, 2), q, 2 * q]
    tp = {}
    for ql in levels:
        kd = k if ql == q else k._refined(ql)
        tp[ql] = trace_powers(_nystrom_matrix(kd, scale), k_max)
    gamma_k = [
        _richardson(tp[levels[0]][i], tp[levels[1]][i], tp[levels[2]][i])
        for i in range(k_max)
    ]
    gamma = math.fsum((-1.0) ** (i) / (i + 1) * gamma_k[i] for i in range(k_max))
    d = k.dim
    bound = d * kappa ** (k_max + 1) / ((k_max + 1) * (1.0 - kappa))
    return SeriesResult(gamma=gamma, gamma_k=gamma_k, remainder_bound=bound, kappa=kappa)


def gamma_k_discrete(gammas: np.ndarray, k: int) -> float:
    """Discrete trace sum over the min-weighted Gamma blocks.

    ``gammas[i]`` is the Gamma sample at node i/n (so n+1 samples for an
    n-segment grid).  Assembles the four-term block array and returns the
    trace of its k-th power; converges to the continuum trace gamma_k.
    """
    gammas = np.asarray(gammas, dtype=float)
    n = gammas.shape[0] - 1
    d = gammas.shape[1]
    lam = np.zeros((n, n, d, d))
    c_off = 7.0 / 360.0
    c_diag = 1.0 / 45.0
    for r in range(n):
        for c in range(n):
            blk = min(r + 1, c) * c_off * gammas[c] + min(r + 1, c + 1) * c_diag * gammas[c]
            if c + 1 < n:
                blk += (
                    min(r + 1, c + 1) * c_diag * gammas[c + 1]
                    + min(r + 1, c + 2) * c_off * gammas[c + 1]
                )
            lam[r, c] = blk / n**2
    dense = lam.transpose(0, 2, 1, 3).reshape(n * d, n * d)
    p = np.linalg.matrix_power(dense, k)
    return float(np.trace(p))


def min_kernel_psd_check(points: np.ndarray) -> float:
    """Smallest eigenvalue of the Gram matrix [min(x_i, x_j)] (>= -1e-12)."""
    pts = np.asarray(points, dtype=float)
    gram = np.minimum.outer(pts, pts)
    return float(np.min(np.linalg.eigvalsh(gram)))


# ---------------------------------------------------------------------------
# limiting density
# ---------------------------------------------------------------------------

def scal_integral(path: DevelopedPath) -> float:
    """Left-endpoint Riemann sum of the scalar curvature along the path."""
    if path.grid.n < 1:
        raise ValueError("path needs at least one segment")
    m = path.manifold
    vals = [m.scalar_curvature_at(path.node_points[i]) for i in range(path.grid.n)]
    return float(math.fsum(vals) / path.grid.n)


@dataclass
class LimitDensityResult:
    scal_integral: float
    log_fredholm: float
    log_density: float
    fredholm: FredholmResult | None = None


def limit_density(
    path: DevelopedPath, nodes: int = 64, scale: float = DEFAULT_SCALE
) -> LimitDensityResult:
    """e^{-(1/6) int Scal} sqrt(det(I + scale K)) for one developed path."""
    sc = scal_integral(path)
    kd = KernelDiscretization.from_developed_path(path, nodes=nodes)
    fr = fredholm_nystrom(kd, scale)
    return LimitDensityResult(
        scal_integral=sc,
        log_fredholm=fr.log_det,
        log_density=-sc / 6.0 + 0.5 * fr.log_det,
        fredholm=fr,
    )


def limit_density_constant(m: ManifoldSpec, nodes: int = 64, scale: float = DEFAULT_SCALE) -> LimitDensityResult:
    """Fast path for constant-curvature backends (Gamma and Scal constant)."""
    sc = m.dim * (m.dim - 1) * m.kappa
    kd = KernelDiscretization.from_constant(m.gamma_matrix(), nodes=nodes)
    fr = fredholm_nystrom(kd, scale)
    return LimitDensityResult(sc, fr.log_det, -sc / 6.0 + 0.5 * fr.log_det, fr)
