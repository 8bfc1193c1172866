"""Driving paths, Brownian sampling, and the rolling (development) map.

A driving path is piecewise linear on an equally spaced grid; its development
is the manifold path whose velocity is the parallel transport of the driver's
velocity.  Spheres get an exact per-segment backend (rotations for both the
geodesic and the transported frame); a classical fixed-step RK4 integrator on
the joint (point, frame) system is available for cross-validation, with point
projection and frame re-orthonormalization after every substep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import FramePoint, ManifoldSpec


@dataclass(frozen=True)
class PartitionGrid:
    """Equally spaced partition of [0,1] into n segments."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)


@dataclass
class DrivingPath:
    """Piecewise-linear path in R^d given by its increments (n, d)."""

    grid: PartitionGrid
    increments: np.ndarray

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=float)
        if self.increments.shape[0] != self.grid.n:
            raise ValueError("increment count does not match grid")

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    def values_at_nodes(self) -> np.ndarray:
        out = np.zeros((self.grid.n + 1, self.dim))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def velocities(self) -> np.ndarray:
        """Constant per-segment derivative n * increment."""
        return self.increments * self.grid.n

    def energy(self) -> float:
        return float(np.sum(self.velocities() ** 2) / self.grid.n)


@dataclass
class DevelopedPath:
    """Developed image: frame points at the grid nodes plus substep frames."""

    manifold: ManifoldSpec
    grid: PartitionGrid
    node_points: np.ndarray  # (n+1, E)
    node_frames: np.ndarray  # (n+1, E, d)
    sub_points: np.ndarray | None = field(default=None, repr=False)
    sub_frames: np.ndarray | None = field(default=None, repr=False)

    def node(self, i: int) -> FramePoint:
        return FramePoint(point=self.node_points[i], frame=self.node_frames[i])

    def endpoint(self) -> np.ndarray:
        return self.node_points[-1]

    def energy(self) -> float:
        n = self.grid.n
        m = self.manifold
        total = 0.0
        for i in range(n):
            v = m.log_map(self.node_points[i], self.node_points[i + 1])
            total += float(v @ v) * n
        return total

    def max_frame_residual(self) -> float:
        d = self.node_frames.shape[2]
        g = np.einsum("nei,nej->nij", self.node_frames, self.node_frames)
        return float(np.max(np.abs(g - np.eye(d))))


class IntegrationError(RuntimeError):
    """Integrator produced frames beyond the re-projection tolerance."""


def _sphere_step(m: ManifoldSpec, x, u, dw):
    """Exact geodesic + parallel transport for one increment dw (frame coords)."""
    r = m.radius
    v = u @ dw
    nv = float(np.linalg.norm(v))
    if nv < 1e-300:
        return x.copy(), u.copy()
    that = v / nv
    nhat = x / r
    theta = nv / r
    c, s = math.cos(theta), math.sin(theta)
    x_new = c * x + (s * r) * that
    tp = c * that - s * nhat
    u_new = u + np.outer(tp - that, that @ u)
    return x_new, u_new


def _rk4_segment(m: ManifoldSpec, x, u, vel, delta, substeps):
    """RK4 on x' = u vel, u' = -(x . x') x / r^2 per column, with projection."""
    r2 = m.radius**2

    def rhs(x, u):
        xdot = u @ vel
        udot = -np.outer(x, xdot @ u) / r2
        return xdot, udot

    h = delta / substeps
    xs = [x.copy()]
    us = [u.copy()]
    for _ in range(substeps):
        k1x, k1u = rhs(x, u)
        k2x, k2u = rhs(x + 0.5 * h * k1x, u + 0.5 * h * k1u)
        k3x, k3u = rhs(x + 0.5 * h * k2x, u + 0.5 * h * k2u)
        k4x, k4u = rhs(x + h * k3x, u + h * k3u)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        x = m.project_point(x)
        p = m.tangent_projector(x)
        u = p @ u
        gram = u.T @ u
        resid = float(np.max(np.abs(gram - np.eye(u.shape[1]))))
        if resid > 1e-6:
            raise IntegrationError(f"frame drift {resid:.2e} exceeds 1e-6")
        # polar re-orthonormalization of the tangent frame
        w, sv, vt = np.linalg.svd(u, full_matrices=False)
        u = w @ vt
        xs.append(x.copy())
        us.append(u.copy())
    return xs, us


def develop(
    m: ManifoldSpec,
    omega: DrivingPath,
    substeps: int = 16,
    method: str = "exact",
) -> DevelopedPath:
    """Roll the driver omega onto the manifold.

    ``method="exact"`` uses closed-form rotations per segment (spheres) and is
    the default backend; ``method="rk4"`` integrates the joint point/frame ODE
    and exists to cross-validate the exact path.  Development is an isometry:
    the energy of the output matches the driver's energy.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n, d = omega.grid.n, omega.dim
    if d != m.dim:
        raise ValueError("driver dimension does not match manifold")
    e = m.embed_dim
    base = m.base_frame_point()

    if m.kind == "euclidean":
        pts = np.zeros((n + 1, e))
        pts[1:] = np.cumsum(omega.increments, axis=0)
        frames = np.broadcast_to(base.frame, (n + 1, e, d)).copy()
        return DevelopedPath(m, omega.grid, pts, frames)

    node_points = np.zeros((n + 1, e))
    node_frames = np.zeros((n + 1, e, d))
    sub_points = np.zeros((n, substeps + 1, e))
    sub_frames = np.zeros((n, substeps + 1, e, d))
    x, u = base.point.copy(), base.frame.copy()
    node_points[0], node_frames[0] = x, u
    for i in range(n):
        if method == "exact":
            dw = omega.increments[i]
            xs, us = [x.copy()], [u.copy()]
            for k in range(substeps):
                xk, uk = _sphere_step(m, xs[0], us[0], dw * (k + 1) / substeps)
                xs.append(xk)
                us.append(uk)
            x, u = xs[-1], us[-1]
        elif method == "rk4":
            vel = omega.increments[i] * n
            xs, us = _rk4_segment(m, x, u, vel, omega.grid.delta, substeps)
            x, u = xs[-1], us[-1]
        else:
            raise ValueError(f"unknown method {method!r}")
        sub_points[i] = np.asarray(xs)
        sub_frames[i] = np.asarray(us)
        node_points[i + 1], node_frames[i + 1] = x, u
    return DevelopedPath(m, omega.grid, node_points, node_frames, sub_points, sub_frames)


def antidevelop(m: ManifoldSpec, sigma: DevelopedPath) -> DrivingPath:
    """Unroll a developed (piecewise geodesic) path back to R^d increments."""
    n = sigma.grid.n
    inc = np.zeros((n, m.dim))
    for i in range(n):
        v = m.log_map(sigma.node_points[i], sigma.node_points[i + 1])
        inc[i] = sigma.node_frames[i].T @ v
    return DrivingPath(grid=sigma.grid, increments=inc)


def sample_brownian(seed: int, sample_index: int, n_fine: int, dim: int) -> DrivingPath:
    """Brownian driver on the fine grid, keyed by (seed, sample_index).

    Counter-based generator, so distinct samples are independent streams and
    any sample is reproducible in isolation.
    """
    if n_fine < 1:
        raise ValueError("n_fine must be >= 1")
    bits = np.random.Philox(key=(int(seed) << 64) + int(sample_index))
    rng = np.random.Generator(bits)
    inc = rng.standard_normal((n_fine, dim)) * math.sqrt(1.0 / n_fine)
    return DrivingPath(grid=PartitionGrid(n_fine), increments=inc)


def coarsen(omega: DrivingPath, n: int) -> DrivingPath:
    """Restrict the driver to the n-point grid (sums of increment blocks)."""
    fine = omega.grid.n
    if fine % n != 0:
        raise ValueError(f"{n} does not divide {fine}")
    block = fine // n
    inc = omega.increments.reshape(n, block, omega.dim).sum(axis=1)
    return DrivingPath(grid=PartitionGrid(n), increments=inc)


def guard_epsilon(K: float) -> float:
    """Largest step norm below which every segment operator stays invertible.

    Solves K x^2 cosh(sqrt(K) x) = 1 by bisection, capped at 1 (flat case).
    """
    if K <= 0:
        return 1.0

    def f(x):
        return K * x * x * math.cosh(math.sqrt(K) * x) - 1.0

    if f(1.0) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class GuardResult:
    ok: bool
    epsilon: float
    first_violation: int | None = None


def segment_guard(omega: DrivingPath, K: float) -> GuardResult:
    """Flag the first segment whose increment norm reaches the guard radius.

    Flat space (K = 0) has nothing to guard: the sine solutions are s I and
    never lose invertibility, so every driver passes.
    """
    eps = guard_epsilon(K)
    if K <= 0:
        return GuardResult(ok=True, epsilon=eps)
    norms = np.linalg.norm(omega.increments, axis=1)
    bad = np.nonzero(norms >= eps)[0]
    if bad.size:
        return GuardResult(ok=False, epsilon=eps, first_violation=int(bad[0]))
    return GuardResult(ok=True, epsilon=eps)
