"""Numpy implementations of the hot kernels, batched across samples.

Sequential structure runs along the segment axis; everything else is
vectorized over the sample axis, so these stay usable for the full
Monte Carlo runs even without the compiled core.
"""

from __future__ import annotations

import numpy as np

# switch point between closed forms and their small-angle series
_SMALL = 1e-3


def sphere_endpoints(incr: np.ndarray, radius: float) -> np.ndarray:
    """Endpoints of the developed paths on a sphere.

    incr: (N, m, d) increments in frame coordinates; returns (N, d+1)
    embedded endpoints starting from the pole (0, ..., 0, radius).
    """
    incr = np.asarray(incr, dtype=float)
    n_samp, m, d = incr.shape
    x = np.zeros((n_samp, d + 1))
    x[:, d] = radius
    u = np.zeros((n_samp, d + 1, d))
    u[:, :d, :] = np.eye(d)
    for i in range(m):
        v = np.einsum("nej,nj->ne", u, incr[:, i, :])
        nv = np.linalg.norm(v, axis=1)
        ok = nv > 1e-300
        inv = np.where(ok, 1.0 / np.where(ok, nv, 1.0), 0.0)
        that = v * inv[:, None]
        theta = nv / radius
        c, s = np.cos(theta), np.sin(theta)
        nhat = x / radius
        x_new = c[:, None] * x + (s * radius)[:, None] * that
        tp = c[:, None] * that - s[:, None] * nhat
        a = np.einsum("ne,nej->nj", that, u)
        u = u + (tp - that)[:, :, None] * a[:, None, :]
        x = np.where(ok[:, None], x_new, x)
    return x


def _coeffs(a: np.ndarray, mu: np.ndarray, delta: float):
    """Per-segment scalar integrals for the transverse eigenvalue -mu^2.

    a = mu * delta.  Returns the means over [0, delta] of S'^2, C'^2, C'S'
    (transverse part), plus endpoint cos/sinc values.
    """
    small = a < _SMALL
    a_safe = np.where(small, 1.0, a)
    a2 = a * a
    m_spsp = np.where(small, 1.0 - a2 / 3.0 + a2 * a2 / 15.0,
                      0.5 + np.sin(2 * a_safe) / (4 * a_safe))
    m_cpcp_over_mu2 = np.where(small, a2 / 3.0 - a2 * a2 / 15.0,
                               0.5 - np.sin(2 * a_safe) / (4 * a_safe))
    m_cpcp = mu * mu * m_cpcp_over_mu2
    sin2_half = np.where(small, (a2 - a2 * a2 / 3.0) / 2.0, np.sin(a_safe) ** 2 / 2.0)
    m_cpsp = -sin2_half / delta
    cos_a = np.cos(a)
    sinc_a = np.where(small, 1.0 - a2 / 6.0 + a2 * a2 / 120.0, np.sin(a_safe) / a_safe)
    return m_spsp, m_cpcp, m_cpsp, cos_a, sinc_a


def sphere_log_density(incr: np.ndarray, kappa: float) -> np.ndarray:
    """log rho_n for each driver on a sphere of curvature kappa.

    Closed-form per-segment Jacobi solutions (the tidal matrix is rank-one
    negative), bidiagonal-family Gram blocks, block-tridiagonal Cholesky.
    incr: (N, n, d); returns (N,).
    """
    incr = np.asarray(incr, dtype=float)
    n_samp, n, d = incr.shape
    if kappa == 0.0:
        return np.zeros(n_samp)
    delta = 1.0 / n
    nrm = np.linalg.norm(incr, axis=2)
    a = np.sqrt(kappa) * nrm
    mu = a / delta
    ok = nrm > 1e-300
    inv = np.where(ok, 1.0 / np.where(ok, nrm, 1.0), 0.0)
    p = incr * inv[:, :, None]
    eye = np.eye(d)
    ppar = np.einsum("nia,nib->niab", p, p)
    pperp = eye - ppar

    m_spsp_t, m_cpcp_t, m_cpsp_t, cos_a, sinc_a = _coeffs(a, mu, delta)
    spsp = m_spsp_t[:, :, None, None] * pperp + ppar
    cpcp = m_cpcp_t[:, :, None, None] * pperp
    cpsp = m_cpsp_t[:, :, None, None] * pperp
    c_end = cos_a[:, :, None, None] * pperp + ppar
    s_end = (delta * sinc_a)[:, :, None, None] * pperp + delta * ppar

    diag = spsp.copy()
    sub = np.zeros((n_samp, max(n - 1, 0), d, d))
    for i in range(1, n):
        e = s_end[:, i - 1]
        f = np.linalg.solve(s_end[:, i], c_end[:, i] @ e)  # chain matrix F_{i-1}
        et = np.swapaxes(e, 1, 2)
        ft = np.swapaxes(f, 1, 2)
        sc = cpsp[:, i]
        vtv = et @ cpcp[:, i] @ e - et @ sc @ f - ft @ np.swapaxes(sc, 1, 2) @ e + ft @ spsp[:, i] @ f
        diag[:, i - 1] += vtv
        sub[:, i - 1] = np.swapaxes(sc, 1, 2) @ e - spsp[:, i] @ f

    ld = np.zeros(n_samp)
    sig = diag[:, 0]
    sign, l0 = np.linalg.slogdet(sig)
    ld += l0
    for i in range(1, n):
        lmat = sub[:, i - 1]
        x = np.linalg.solve(sig, np.swapaxes(lmat, 1, 2))
        sig = diag[:, i] - lmat @ x
        sign, li = np.linalg.slogdet(sig)
        ld += li
    return 0.5 * ld
