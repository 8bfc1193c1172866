"""Fast invariant checks behind the ``geopath verify`` subcommand.

Each check returns (ok, detail) and finishes in well under a second; the
full suite is a smoke-level cut of the pytest suite, wired through module
namespaces so that an injected fault (sign flip in the tidal operator, a
wrong model-covariance coefficient) trips the matching check.
"""

from __future__ import annotations

import numpy as np

from . import density as density_mod
from . import development as dev_mod
from . import geometry as geom_mod
from . import jacobi as jacobi_mod
from . import wiener as wiener_mod
from . import _kernels
from .development import DrivingPath, PartitionGrid
from .geometry import ManifoldSpec


def _sphere(d=2, radius=3.0):
    return ManifoldSpec("sphere", d, radius)


def _driver(rng, n, d, scale=0.25):
    return DrivingPath(PartitionGrid(n), rng.standard_normal((n, d)) * scale)


def check_curvature_symmetries():
    worst = 0.0
    for m in (_sphere(2, 1.0), _sphere(3, 2.0), ManifoldSpec("euclidean", 3)):
        c = geom_mod.curvature_in_frame(m, m.base_frame_point())
        worst = max(worst, max(c.symmetry_residuals().values()))
    rng = np.random.default_rng(0)
    h = rng.standard_normal((3, 3))
    k = rng.standard_normal((3, 3))
    syn = geom_mod.CurvatureInFrame(geom_mod.kulkarni_nomizu(h + h.T, k + k.T))
    worst = max(worst, max(syn.symmetry_residuals().values()))
    return worst <= 1e-12, f"max symmetry residual {worst:.2e}"


def check_sectional_and_scal():
    m = _sphere(2, 2.0)
    c = geom_mod.curvature_in_frame(m, m.base_frame_point())
    e = np.eye(2)
    sec = geom_mod.sectional_curvature(c, e[0], e[1])
    scal = geom_mod.scalar_curvature(c)
    # PSD of the Gamma contraction is a diagnostic, not an invariant
    gamma_min_eig = float(np.min(np.linalg.eigvalsh(geom_mod.gamma_operator(c))))
    ok = abs(sec - 0.25) < 1e-12 and abs(scal - 0.5) < 1e-12
    return ok, f"sec {sec:.6f} scal {scal:.6f} gamma min eig {gamma_min_eig:.2e}"


def check_tidal_sign_and_margins():
    """Sphere segments must be negative semidefinite and obey the psi bounds."""
    m = _sphere(2, 2.0)
    rng = np.random.default_rng(1)
    worst = 1.0
    for _ in range(20):
        omega = _driver(rng, 4, 2)
        pairs = density_mod.segments_for_driver(m, omega)
        for p in pairs:
            rep = jacobi_mod.estimate_suite(p)
            if not rep.psi_applicable:
                return False, "tidal operator not negative semidefinite on the sphere"
            worst = min(worst, rep.min_margin())
    return worst >= -1e-10, f"min margin {worst:.2e}"


def check_envelopes():
    t = np.linspace(0.0, 50.0, 20001)
    tu = t * jacobi_mod.u_fn(t)
    gh = jacobi_mod.g_fn(t) - jacobi_mod.h_fn(t)
    s = np.linspace(0.0, 10.0, 2001)
    psi_ok = np.all(jacobi_mod.psi(s) <= np.cosh(s) + 1e-12)
    ok = (
        float(np.max(tu)) <= 0.63
        and float(np.min(gh)) >= -1e-12
        and float(np.max(jacobi_mod.g_fn(t))) <= 0.6 + 1e-12
        and bool(psi_ok)
    )
    return ok, f"sup t*u = {float(np.max(tu)):.4f}, min(g-h) = {float(np.min(gh)):.1e}"


def check_flat_identity():
    rng = np.random.default_rng(2)
    worst = 0.0
    for d in (1, 2):
        m = ManifoldSpec("euclidean", d)
        for n in (2, 8):
            omega = _driver(rng, n, d)
            b = density_mod.density_breakdown_for_driver(m, omega)
            worst = max(worst, abs(b.log_rho_F), abs(b.log_rho_Q))
    return worst <= 1e-10, f"max |log rho| flat = {worst:.2e}"


def check_route_agreement():
    rng = np.random.default_rng(3)
    m = _sphere(2, 1.0 / np.sqrt(0.08))
    worst = 0.0
    for _ in range(5):
        omega = _driver(rng, 8, 2, scale=0.3)
        b = density_mod.density_breakdown_for_driver(m, omega)
        worst = max(worst, abs(b.log_rho_F - b.log_rho_Q))
    return worst <= 1e-6, f"max |route gap| = {worst:.2e}"


def check_factorization():
    rng = np.random.default_rng(4)
    m = _sphere(2, 2.5)
    worst_id, worst_cov = 0.0, 0.0
    for _ in range(5):
        omega = _driver(rng, 6, 2, scale=0.3)
        b = density_mod.density_breakdown_for_driver(m, omega, with_q=False)
        worst_id = max(worst_id, b.identity_residual)
        worst_cov = max(worst_cov, b.model_cov_gap)
        if b.log_detIU < -1e-12:
            return False, "det(I+U) fell below 1"
    scale = m.kappa**2 / 36.0  # magnitude of the model blocks
    ok = worst_id <= 1e-8 and worst_cov <= 1e-12 + 1e-8 * scale
    return ok, f"identity {worst_id:.2e}, model-cov gap {worst_cov:.2e}"


def check_cov_constants():
    delta = 0.31

    def alpha(s):
        return s * s / 2.0 - delta**2 / 6.0

    def beta(s):
        return s * delta - s * s / 2.0 - delta**2 / 3.0

    caa = float(density_mod.cov(alpha, alpha, delta)[0, 0])
    cab = float(density_mod.cov(alpha, beta, delta)[0, 0])
    ok = abs(caa - delta**4 / 45.0) < 1e-14 and abs(cab - 7.0 * delta**4 / 360.0) < 1e-14
    return ok, f"<a^2> err {abs(caa - delta**4 / 45.0):.1e}"


def check_det_expansion_and_inequalities():
    rng = np.random.default_rng(5)
    for _ in range(50):
        g = rng.standard_normal((4, 4))
        u = 0.45 * (g + g.T) / np.linalg.norm(g + g.T, 2)
        exp_rep = density_mod.det_expansion(u, 2)
        if abs(exp_rep.remainder) > exp_rep.remainder_bound + 1e-12:
            return False, "norm-branch remainder bound violated"
        psd = g @ g.T / (np.linalg.norm(g, 2) ** 2 + 1.0)
        exp_rep = density_mod.det_expansion(psd, 3)
        if abs(exp_rep.remainder) > exp_rep.remainder_bound + 1e-12:
            return False, "psd-branch remainder bound violated"
        mpd = psd + np.eye(4) * 0.2
        rep = density_mod.matrix_inequalities(mpd, g, psd, alpha=1.3)
        if not rep.ok():
            return False, "matrix inequality violated"
    return True, "200 random draws passed"


def check_min_blocks():
    n, d = 7, 2
    b = density_mod.min_index_blocks(n, d)
    s = density_mod.summation_blocks(n, d).dense()
    exact = np.array_equal(b.dense(), s @ s.T)
    norm_ok = np.linalg.norm(b.dense(), 2) <= d * n * (n + 1) / 2
    return exact and norm_ok, "min(l,m) blocks exact"


def check_fredholm_oracle():
    worst = 0.0
    for val in (1.2, 6.0):
        kd = wiener_mod.KernelDiscretization.from_constant(np.eye(2) * val, nodes=64)
        res = wiener_mod.fredholm_nystrom(kd, 1.0 / 12.0)
        oracle = 2.0 * np.log(np.cosh(np.sqrt(val / 12.0)))
        worst = max(worst, abs(res.log_det - oracle))
        series = wiener_mod.fredholm_series(kd, 1.0 / 12.0, k_max=30)
        worst = max(worst, abs(series.gamma - res.log_det))
    return worst <= 1e-8, f"max fredholm err {worst:.2e}"


def check_min_kernel_psd():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        pts = rng.uniform(0, 1, size=rng.integers(1, 40))
        worst = min(worst, wiener_mod.min_kernel_psd_check(pts))
    return worst >= -1e-12, f"min eigenvalue {worst:.2e}"


def check_gamma_k_limit():
    c = 6.0
    d = 2
    gamma_1 = d * (c / 12.0) / 2.0
    errs = []
    for n in (8, 16, 32):
        gam = np.repeat(np.eye(d)[None] * c, n + 1, axis=0)
        errs.append(abs(wiener_mod.gamma_k_discrete(gam, 1) - gamma_1))
    mono = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    return mono and errs[-1] < gamma_1, f"errors {['%.1e' % e for e in errs]}"


def check_development():
    m = _sphere(2, 1.5)
    rng = np.random.default_rng(7)
    worst_e, worst_rt = 0.0, 0.0
    for _ in range(10):
        omega = _driver(rng, 6, 2, scale=0.4)
        sigma = dev_mod.develop(m, omega, substeps=4)
        worst_e = max(worst_e, abs(sigma.energy() - omega.energy()) / (1 + omega.energy()))
        back = dev_mod.antidevelop(m, sigma)
        worst_rt = max(worst_rt, float(np.max(np.abs(back.increments - omega.increments))))
        if sigma.max_frame_residual() > 1e-8:
            return False, "frame orthonormality lost"
    ok = worst_e <= 1e-8 and worst_rt <= 1e-6
    return ok, f"energy gap {worst_e:.1e}, roundtrip {worst_rt:.1e}"


def check_kernel_backend():
    rng = np.random.default_rng(8)
    incr = rng.standard_normal((16, 8, 2)) * 0.3
    lp = _kernels._pure.sphere_log_density(incr, 0.1)
    ls = _kernels.sphere_log_density(incr, 0.1)
    ep = _kernels._pure.sphere_endpoints(incr, 2.0)
    es = _kernels.sphere_endpoints(incr, 2.0)
    gap = max(float(np.max(np.abs(lp - ls))), float(np.max(np.abs(ep - es))))
    return gap <= 1e-9, f"backend {_kernels.BACKEND}, parity gap {gap:.2e}"


def check_kernel_vs_library():
    m = _sphere(2, 2.0)
    rng = np.random.default_rng(9)
    incr = rng.standard_normal((4, 6, 2)) * 0.3
    fast = _kernels.sphere_log_density(incr, m.kappa)
    worst = 0.0
    for j in range(4):
        omega = DrivingPath(PartitionGrid(6), incr[j])
        b = density_mod.density_breakdown_for_driver(m, omega, with_q=False)
        worst = max(worst, abs(fast[j] - b.log_rho_F))
    return worst <= 1e-9, f"kernel vs library gap {worst:.2e}"


REGISTRY = {
    "curvature_symmetries": check_curvature_symmetries,
    "sectional_and_scal": check_sectional_and_scal,
    "tidal_sign_and_margins": check_tidal_sign_and_margins,
    "estimate_envelopes": check_envelopes,
    "flat_identity": check_flat_identity,
    "route_agreement": check_route_agreement,
    "factorization_identity": check_factorization,
    "cov_constants": check_cov_constants,
    "det_expansion_inequalities": check_det_expansion_and_inequalities,
    "min_index_blocks": check_min_blocks,
    "fredholm_oracle": check_fredholm_oracle,
    "min_kernel_psd": check_min_kernel_psd,
    "gamma_k_limit": check_gamma_k_limit,
    "development_roundtrip": check_development,
    "kernel_backend_parity": check_kernel_backend,
    "kernel_vs_library": check_kernel_vs_library,
}
