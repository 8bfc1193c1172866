# cython: language_level=3
"""Compiled twins of the hot kernels (see _pure.py for the reference math).

Per-sample C loops over the segment axis; dimensions are tiny (d <= 8), so
all dense work uses stack-style scratch buffers and hand-rolled Cholesky /
Gaussian elimination.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, log, fabs

cnp.import_array()

DEF MAXD = 8
DEF SMALL = 1e-3


def sphere_endpoints(cnp.ndarray[cnp.float64_t, ndim=3] incr, double radius):
    cdef Py_ssize_t n_samp = incr.shape[0]
    cdef Py_ssize_t m = incr.shape[1]
    cdef Py_ssize_t d = incr.shape[2]
    cdef Py_ssize_t e = d + 1
    if d + 1 > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    out_arr = np.zeros((n_samp, e), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, :, ::1] w = incr
    cdef double x[MAXD]
    cdef double u[MAXD][MAXD]
    cdef double v[MAXD]
    cdef double that[MAXD]
    cdef double tp[MAXD]
    cdef double avec[MAXD]
    cdef double nv, theta, c, s, coef
    cdef Py_ssize_t idx, i, a, b, k

    for idx in range(n_samp):
        for a in range(e):
            x[a] = 0.0
            for b in range(d):
                u[a][b] = 1.0 if a == b else 0.0
        x[e - 1] = radius
        for i in range(m):
            nv = 0.0
            for a in range(e):
                v[a] = 0.0
                for b in range(d):
                    v[a] += u[a][b] * w[idx, i, b]
                nv += v[a] * v[a]
            nv = sqrt(nv)
            if nv < 1e-300:
                continue
            theta = nv / radius
            c = cos(theta)
            s = sin(theta)
            for a in range(e):
                that[a] = v[a] / nv
            for a in range(e):
                tp[a] = c * that[a] - s * x[a] / radius
            for b in range(d):
                avec[b] = 0.0
                for a in range(e):
                    avec[b] += that[a] * u[a][b]
            for a in range(e):
                coef = tp[a] - that[a]
                for b in range(d):
                    u[a][b] += coef * avec[b]
                x[a] = c * x[a] + s * radius * that[a]
        for a in range(e):
            out[idx, a] = x[a]
    return out_arr


cdef inline int _cholesky_logdet(double* mat, Py_ssize_t d, double* ld) nogil:
    """In-place Cholesky of a d x d SPD matrix (row-major); adds log det."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(d):
        s = mat[j * d + j]
        for k in range(j):
            s -= mat[j * d + k] * mat[j * d + k]
        if s <= 0.0:
            return -1
        mat[j * d + j] = sqrt(s)
        ld[0] += 2.0 * log(mat[j * d + j])
        for i in range(j + 1, d):
            s = mat[i * d + j]
            for k in range(j):
                s -= mat[i * d + k] * mat[j * d + k]
            mat[i * d + j] = s / mat[j * d + j]
    return 0


cdef inline void _chol_solve(double* lo, double* rhs, double* sol, Py_ssize_t d) nogil:
    """Solve (L L^T) sol = rhs for one column, L lower from _cholesky_logdet."""
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(d):
        s = rhs[i]
        for k in range(i):
            s -= lo[i * d + k] * sol[k]
        sol[i] = s / lo[i * d + i]
    for i in range(d - 1, -1, -1):
        s = sol[i]
        for k in range(i + 1, d):
            s -= lo[k * d + i] * sol[k]
        sol[i] = s / lo[i * d + i]


cdef inline int _gauss_solve(double* a, double* b, Py_ssize_t d, Py_ssize_t nrhs) nogil:
    """In-place Gaussian elimination with partial pivoting: a (d x d), b (d x nrhs)."""
    cdef Py_ssize_t i, j, k, piv
    cdef double best, factor, tmp
    for k in range(d):
        piv = k
        best = fabs(a[k * d + k])
        for i in range(k + 1, d):
            if fabs(a[i * d + k]) > best:
                best = fabs(a[i * d + k])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(d):
                tmp = a[k * d + j]; a[k * d + j] = a[piv * d + j]; a[piv * d + j] = tmp
            for j in range(nrhs):
                tmp = b[k * nrhs + j]; b[k * nrhs + j] = b[piv * nrhs + j]; b[piv * nrhs + j] = tmp
        for i in range(k + 1, d):
            factor = a[i * d + k] / a[k * d + k]
            a[i * d + k] = 0.0
            for j in range(k + 1, d):
                a[i * d + j] -= factor * a[k * d + j]
            for j in range(nrhs):
                b[i * nrhs + j] -= factor * b[k * nrhs + j]
    for k in range(d - 1, -1, -1):
        for j in range(nrhs):
            tmp = b[k * nrhs + j]
            for i in range(k + 1, d):
                tmp -= a[k * d + i] * b[i * nrhs + j]
            b[k * nrhs + j] = tmp / a[k * d + k]
    return 0


cdef inline void _mat_mul(double* a, double* b, double* c, Py_ssize_t d, bint at, bint bt) nogil:
    """c = op(a) op(b) with optional transposes, d x d row-major."""
    cdef Py_ssize_t i, j, k
    cdef double s
    for i in range(d):
        for j in range(d):
            s = 0.0
            for k in range(d):
                s += (a[k * d + i] if at else a[i * d + k]) * (b[j * d + k] if bt else b[k * d + j])
            c[i * d + j] = s


def sphere_log_density(cnp.ndarray[cnp.float64_t, ndim=3] incr, double kappa):
    cdef Py_ssize_t n_samp = incr.shape[0]
    cdef Py_ssize_t n = incr.shape[1]
    cdef Py_ssize_t d = incr.shape[2]
    if d > MAXD:
        raise ValueError("dimension too large for the compiled kernel")
    out_arr = np.zeros(n_samp, dtype=np.float64)
    cdef double[::1] out = out_arr
    if kappa == 0.0 or n == 0:
        return out_arr

    cdef double[:, :, ::1] w = incr
    cdef double delta = 1.0 / n
    # per-segment workspaces for one sample
    work = np.zeros((6, n, d, d), dtype=np.float64)
    cdef double[:, :, :, ::1] wk = work  # spsp, cpcp, cpsp, c_end, s_end, diag
    sub_arr = np.zeros((n, d, d), dtype=np.float64)
    cdef double[:, :, ::1] subm = sub_arr

    cdef double scratch_a[MAXD * MAXD]
    cdef double scratch_b[MAXD * MAXD]
    cdef double scratch_c[MAXD * MAXD]
    cdef double fmat[MAXD * MAXD]
    cdef double sig[MAXD * MAXD]
    cdef double lo[MAXD * MAXD]
    cdef double col[MAXD]
    cdef double sol[MAXD]
    cdef double xmat[MAXD * MAXD]

    cdef Py_ssize_t idx, i, a, b, k
    cdef double nrm, aa, mu, m_spsp, m_cpcp, m_cpsp, cos_a, sinc_a, a2, proj
    cdef double sk = sqrt(kappa)
    cdef double ld, pa, pb

    for idx in range(n_samp):
        ld = 0.0
        for i in range(n):
            nrm = 0.0
            for a in range(d):
                nrm += w[idx, i, a] * w[idx, i, a]
            nrm = sqrt(nrm)
            aa = sk * nrm
            mu = aa / delta
            a2 = aa * aa
            if aa < SMALL:
                m_spsp = 1.0 - a2 / 3.0 + a2 * a2 / 15.0
                m_cpcp = mu * mu * (a2 / 3.0 - a2 * a2 / 15.0)
                m_cpsp = -(a2 - a2 * a2 / 3.0) / (2.0 * delta)
                sinc_a = 1.0 - a2 / 6.0 + a2 * a2 / 120.0
            else:
                m_spsp = 0.5 + sin(2 * aa) / (4 * aa)
                m_cpcp = mu * mu * (0.5 - sin(2 * aa) / (4 * aa))
                m_cpsp = -sin(aa) * sin(aa) / (2.0 * delta)
                sinc_a = sin(aa) / aa
            cos_a = cos(aa)
            # projectors: ppar = p p^T with p = w / nrm (zero when nrm ~ 0)
            for a in range(d):
                for b in range(d):
                    if nrm > 1e-300:
                        proj = w[idx, i, a] * w[idx, i, b] / (nrm * nrm)
                    else:
                        proj = 0.0
                    pa = (1.0 if a == b else 0.0) - proj     # pperp entry
                    wk[0, i, a, b] = m_spsp * pa + proj
                    wk[1, i, a, b] = m_cpcp * pa
                    wk[2, i, a, b] = m_cpsp * pa
                    wk[3, i, a, b] = cos_a * pa + proj
                    wk[4, i, a, b] = delta * sinc_a * pa + delta * proj
                    wk[5, i, a, b] = wk[0, i, a, b]
        for i in range(1, n):
            # F_{i-1} = S_i^{-1} C_i S_{i-1}
            for a in range(d):
                for b in range(d):
                    scratch_a[a * d + b] = wk[4, i, a, b]
            _mat_mul(&wk[3, i, 0, 0], &wk[4, i - 1, 0, 0], fmat, d, False, False)
            if _gauss_solve(scratch_a, fmat, d, d) != 0:
                out[idx] = float("nan")
                break
            # vtv = E^T Cpcp E - E^T Sc F - F^T Sc^T E + F^T Spsp F
            _mat_mul(&wk[1, i, 0, 0], &wk[4, i - 1, 0, 0], scratch_a, d, False, False)
            _mat_mul(&wk[4, i - 1, 0, 0], scratch_a, scratch_b, d, True, False)
            for a in range(d):
                for b in range(d):
                    scratch_c[a * d + b] = scratch_b[a * d + b]
            _mat_mul(&wk[2, i, 0, 0], fmat, scratch_a, d, False, False)
            _mat_mul(&wk[4, i - 1, 0, 0], scratch_a, scratch_b, d, True, False)
            for a in range(d):
                for b in range(d):
                    scratch_c[a * d + b] -= scratch_b[a * d + b] + scratch_b[b * d + a]
            _mat_mul(&wk[0, i, 0, 0], fmat, scratch_a, d, False, False)
            _mat_mul(fmat, scratch_a, scratch_b, d, True, False)
            for a in range(d):
                for b in range(d):
                    wk[5, i - 1, a, b] += scratch_c[a * d + b] + scratch_b[a * d + b]
            # sub block: Sc^T E - Spsp F
            _mat_mul(&wk[2, i, 0, 0], &wk[4, i - 1, 0, 0], scratch_a, d, True, False)
            _mat_mul(&wk[0, i, 0, 0], fmat, scratch_b, d, False, False)
            for a in range(d):
                for b in range(d):
                    subm[i - 1, a, b] = scratch_a[a * d + b] - scratch_b[a * d + b]
        else:
            # Schur recursion over the block-tridiagonal Gram matrix
            for a in range(d):
                for b in range(d):
                    sig[a * d + b] = wk[5, 0, a, b]
            for a in range(d * d):
                lo[a] = sig[a]
            if _cholesky_logdet(lo, d, &ld) != 0:
                out[idx] = float("nan")
                continue
            for i in range(1, n):
                # x = sig^{-1} L^T, columns via Cholesky solves
                for b in range(d):
                    for a in range(d):
                        col[a] = subm[i - 1, b, a]
                    _chol_solve(lo, col, sol, d)
                    for a in range(d):
                        xmat[a * d + b] = sol[a]
                _mat_mul(&subm[i - 1, 0, 0], xmat, scratch_a, d, False, False)
                for a in range(d):
                    for b in range(d):
                        sig[a * d + b] = wk[5, i, a, b] - scratch_a[a * d + b]
                for a in range(d * d):
                    lo[a] = sig[a]
                if _cholesky_logdet(lo, d, &ld) != 0:
                    out[idx] = float("nan")
                    break
            else:
                out[idx] = 0.5 * ld
    return out_arr
