"""Manifold backends, orthonormal frames, and curvature algebra.

Two backends ship: flat Euclidean space and round spheres of arbitrary
radius, both realized as embedded submanifolds of R^E so that frames,
geodesics and parallel transport reduce to linear algebra.  Curvature is
exposed through its components in an orthonormal frame, a rank-4 array
``R[i,j,k,l]`` obeying the usual pair/antisymmetry and first-Bianchi
identities.  The sign convention is fixed once and for all by two
requirements that must hold simultaneously on the sphere:

* the sectional quotient reported by :func:`sectional_curvature` is the
  positive constant ``1/radius**2``;
* the tidal matrix ``tidal_operator(c, v)`` driving the per-segment Jacobi
  equation is negative semidefinite (geodesics on the sphere focus).

Concretely ``R[i,j,k,l] = kappa * (d[j,k] d[i,l] - d[i,k] d[j,l])`` for
constant curvature ``kappa``, and the sectional quotient contracts in the
slot pattern ``(x, y, y, x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FRAME_ORTHO_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class ValidationError(ValueError):
    """An input violates a structural invariant (bad frame, bad tensor)."""


@dataclass(frozen=True)
class ManifoldSpec:
    """A constant-curvature backend: Euclidean(d) or Sphere(d, radius)."""

    kind: str
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("euclidean", "sphere"):
            raise ValidationError(f"unknown manifold kind {self.kind!r}")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if self.kind == "sphere" and not self.radius > 0:
            raise ValidationError("sphere radius must be positive")

    @property
    def embed_dim(self) -> int:
        return self.dim if self.kind == "euclidean" else self.dim + 1

    @property
    def kappa(self) -> float:
        """Constant sectional curvature (0 for Euclidean)."""
        return 0.0 if self.kind == "euclidean" else 1.0 / self.radius**2

    @property
    def sectional_bound(self) -> float:
        """K = sup over frames and planes of |sectional curvature|."""
        return self.kappa

    def base_frame_point(self) -> "FramePoint":
        """Base point o with the reference frame u_o."""
        e = self.embed_dim
        point = np.zeros(e)
        frame = np.zeros((e, self.dim))
        frame[: self.dim, :] = np.eye(self.dim)
        if self.kind == "sphere":
            point[self.dim] = self.radius
        return FramePoint(point=point, frame=frame)

    def project_point(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "euclidean":
            return x
        return x * (self.radius / np.linalg.norm(x))

    def tangent_projector(self, x: np.ndarray) -> np.ndarray:
        e = self.embed_dim
        if self.kind == "euclidean":
            return np.eye(e)
        n = x / np.linalg.norm(x)
        return np.eye(e) - np.outer(n, n)

    def log_map(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Initial velocity of the unit-time geodesic from x to y."""
        if self.kind == "euclidean":
            return y - x
        r = self.radius
        c = float(np.clip(np.dot(x, y) / r**2, -1.0, 1.0))
        theta = math.acos(c)
        if theta < 1e-14:
            return np.zeros_like(x)
        w = y - c * x
        return (r * theta / np.linalg.norm(w)) * w

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        if self.kind == "euclidean":
            return float(np.linalg.norm(y - x))
        c = float(np.clip(np.dot(x, y) / self.radius**2, -1.0, 1.0))
        return self.radius * math.acos(c)

    def scalar_curvature_at(self, x: np.ndarray) -> float:
        return self.dim * (self.dim - 1) * self.kappa

    def gamma_matrix(self) -> np.ndarray:
        """The curvature-squared contraction, constant for these backends."""
        d = self.dim
        return self.kappa**2 * (d - 1) * (d + 2) * np.eye(d)


@dataclass
class FramePoint:
    """A manifold point with an orthonormal tangent frame (E x d matrix)."""

    point: np.ndarray
    frame: np.ndarray

    def validate(self, m: ManifoldSpec | None = None, tol: float = FRAME_ORTHO_TOL):
        g = self.frame.T @ self.frame
        if np.max(np.abs(g - np.eye(self.frame.shape[1]))) > tol:
            raise ValidationError("frame columns are not orthonormal")
        if m is not None and m.kind == "sphere":
            if np.max(np.abs(self.point @ self.frame)) > tol * m.radius:
                raise ValidationError("frame columns are not tangent")

    def ortho_residual(self) -> float:
        g = self.frame.T @ self.frame
        return float(np.max(np.abs(g - np.eye(self.frame.shape[1]))))


@dataclass
class CurvatureInFrame:
    """Curvature components R[i,j,k,l] = <Omega(e_i, e_j) e_k, e_l>."""

    components: np.ndarray
    kappa_hint: float | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def symmetry_residuals(self) -> dict[str, float]:
        r = self.components
        bianchi = r + np.transpose(r, (2, 0, 1, 3)) + np.transpose(r, (1, 2, 0, 3))
        return {
            "antisym_12": float(np.max(np.abs(r + np.transpose(r, (1, 0, 2, 3))))),
            "antisym_34": float(np.max(np.abs(r + np.transpose(r, (0, 1, 3, 2))))),
            "pair": float(np.max(np.abs(r - np.transpose(r, (2, 3, 0, 1))))),
            "bianchi": float(np.max(np.abs(bianchi))),
        }

    def validate(self, tol: float = SYMMETRY_TOL):
        res = self.symmetry_residuals()
        bad = {k: v for k, v in res.items() if v > tol}
        if bad:
            raise ValidationError(f"curvature symmetries violated: {bad}")


def constant_curvature_tensor(d: int, kappa: float) -> np.ndarray:
    eye = np.eye(d)
    return kappa * (
        np.einsum("jk,il->ijkl", eye, eye) - np.einsum("ik,jl->ijkl", eye, eye)
    )


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Product of two symmetric matrices; satisfies all curvature symmetries.

    Used to generate synthetic test tensors beyond constant curvature.
    """
    return (
        np.einsum("ik,jl->ijkl", h, k)
        + np.einsum("jl,ik->ijkl", h, k)
        - np.einsum("il,jk->ijkl", h, k)
        - np.einsum("jk,il->ijkl", h, k)
    )


def curvature_in_frame(m: ManifoldSpec, f: FramePoint) -> CurvatureInFrame:
    """Curvature components seen through the frame f.

    For the embedded backends the components are frame-independent: zero in
    flat space and the constant-curvature tensor on the sphere.  The frame is
    still validated because downstream transport assumes orthonormality.
    """
    f.validate(m)
    if m.kind == "euclidean":
        comp = np.zeros((m.dim,) * 4)
    else:
        comp = constant_curvature_tensor(m.dim, m.kappa)
    return CurvatureInFrame(components=comp, kappa_hint=m.kappa)


def tidal_operator(c: CurvatureInFrame, v: np.ndarray) -> np.ndarray:
    """Symmetric matrix A with A h = Omega(v, h) v.

    Drives the per-segment Jacobi equation h'' = A h.  Negative semidefinite
    whenever all sectional curvatures are nonnegative, with ||A|| bounded by
    the sectional sup times ||v||^2.
    """
    a = np.einsum("imkl,i,k->lm", c.components, v, v)
    return 0.5 * (a + a.T)


def ricci_matrix(c: CurvatureInFrame) -> np.ndarray:
    return np.einsum("miil->lm", c.components)


def scalar_curvature(c: CurvatureInFrame) -> float:
    """Full trace of the Ricci contraction; frame-independent."""
    return float(np.einsum("liil->", c.components))


def gamma_operator(c: CurvatureInFrame) -> np.ndarray:
    """The d x d curvature-squared contraction entering the limit kernel.

    Sum of the three compositions Omega(e_i, Omega(e_i, .) e_j) e_j,
    Omega(e_i, Omega(e_j, .) e_i) e_j and Omega(e_i, Omega(e_j, .) e_j) e_i
    over an orthonormal basis; invariant under basis rotation.
    """
    r = c.components
    t1 = np.einsum("imjq,iqjl->lm", r, r)
    t2 = np.einsum("jmiq,iqjl->lm", r, r)
    ric = np.einsum("jmjq->qm", r)
    t3 = np.einsum("ql,qm->lm", ric, ric)
    return t1 + t2 + t3


def sectional_curvature(c: CurvatureInFrame, x: np.ndarray, y: np.ndarray) -> float:
    """Sectional curvature of span{x, y} (positive on the sphere)."""
    num = float(np.einsum("ijkl,i,j,k,l->", c.components, x, y, y, x))
    den = float(np.dot(x, x) * np.dot(y, y) - np.dot(x, y) ** 2)
    if den <= 0:
        raise ValidationError("x, y must be linearly independent")
    return num / den


def sectional_sup(c: CurvatureInFrame, samples: int = 1000, seed: int = 0) -> float:
    """sup over 2-planes of |sectional curvature|.

    Exact for d <= 3 (single plane at d=2; the plane-normal quadratic form at
    d=3); random-plane sampling otherwise.
    """
    d = c.dim
    if d == 1:
        return 0.0
    if d == 2:
        e = np.eye(2)
        return abs(sectional_curvature(c, e[0], e[1]))
    if d == 3:
        eps = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[i, j, k] = 1.0
            eps[i, k, j] = -1.0
        q = -0.25 * np.einsum("ija,klb,ijkl->ab", eps, eps, c.components)
        return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (q + q.T)))))
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = rng.standard_normal(d)
        y = rng.standard_normal(d)
        y -= x * (x @ y) / (x @ x)
        if np.linalg.norm(y) < 1e-12:
            continue
        best = max(best, abs(sectional_curvature(c, x, y)))
    return best


@dataclass
class CurvatureBoundReport:
    max_omega_norm: float
    sectional_sup: float
    bound_34_3: float
    passes_34_3: bool
    below_2_over_d: bool | None


def curvature_bound_check(c: CurvatureInFrame) -> CurvatureBoundReport:
    """Check max_{i,j} ||Omega(e_i, .) e_j|| against (34/3) * sectional sup.

    Also reports, when the sectional sup is below 3/(17 d), whether the
    operator norms stay under the 2/d threshold that the limit-kernel bound
    relies on.
    """
    d = c.dim
    max_norm = 0.0
    for i in range(d):
        for j in range(d):
            b = c.components[i, :, j, :].T  # (Omega(e_i, x) e_j)_l = R[i,m,j,l] x_m
            max_norm = max(max_norm, float(np.linalg.norm(b, 2)))
    s_sup = sectional_sup(c)
    bound = (34.0 / 3.0) * s_sup
    below = None
    if s_sup < 3.0 / (17.0 * d):
        below = max_norm < 2.0 / d + 1e-12
    return CurvatureBoundReport(
        max_omega_norm=max_norm,
        sectional_sup=s_sup,
        bound_34_3=bound,
        passes_34_3=max_norm <= bound + 1e-12,
        below_2_over_d=below,
    )
