import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geopath.geometry import ManifoldSpec, constant_curvature_tensor, CurvatureInFrame, tidal_operator
from geopath.jacobi import (
    SegmentOperator,
    estimate_suite,
    g_fn,
    h_fn,
    phi_envelope,
    psi,
    solve_segment,
    u_fn,
)


def random_nsd(rng, d, kappa):
    """Random negative semidefinite matrix with spectral norm <= kappa."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigs = -kappa * rng.uniform(0, 1, size=d)
    return (q * eigs) @ q.T


def sphere_segment(rng, d=2, kappa=1.0, delta=0.125, scale=1.0):
    c = CurvatureInFrame(constant_curvature_tensor(d, kappa))
    v = rng.standard_normal(d) * scale / delta
    a = tidal_operator(c, v)
    return SegmentOperator.constant(a, delta)


class TestSolveSegment:
    def test_flat_exact(self):
        op = SegmentOperator.constant(np.zeros((2, 2)), 0.25)
        for method in ("spectral", "rk4"):
            pair = solve_segment(op, method=method)
            for s, c, sv in zip(pair.nodes, pair.C, pair.S):
                assert np.allclose(c, np.eye(2), atol=1e-14)
                assert np.allclose(sv, s * np.eye(2), atol=1e-14)
            assert np.allclose(pair.S_end, 0.25 * np.eye(2), atol=1e-14)

    def test_isotropic_closed_form(self):
        lam = 3.7
        op = SegmentOperator.constant(-lam * np.eye(2), 0.5)
        pair = solve_segment(op, method="spectral")
        for s, c, sv in zip(pair.nodes, pair.C, pair.S):
            assert np.allclose(c, math.cos(math.sqrt(lam) * s) * np.eye(2), atol=1e-13)
            assert np.allclose(sv, math.sin(math.sqrt(lam) * s) / math.sqrt(lam) * np.eye(2), atol=1e-13)
        rk4 = solve_segment(op, method="rk4")
        for a, b in ((pair.C, rk4.C), (pair.S, rk4.S), (pair.Cp, rk4.Cp), (pair.Sp, rk4.Sp)):
            assert np.max(np.abs(a - b)) < 1e-8

    def test_methods_agree_random(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a = random_nsd(rng, 3, 2.0)
            op = SegmentOperator.constant(a, 0.2)
            ps = solve_segment(op, method="spectral")
            pr = solve_segment(op, method="rk4")
            assert np.max(np.abs(ps.S_end - pr.S_end)) < 1e-8
            assert np.max(np.abs(ps.moments()["SpSp"] - pr.moments()["SpSp"])) < 1e-8

    def test_spectral_needs_constant(self):
        op = SegmentOperator.time_varying(lambda s: -s * np.eye(2), 0.3, 0.3, 2)
        with pytest.raises(ValueError):
            solve_segment(op, method="spectral")
        solve_segment(op, method="rk4")  # fine

    def test_initial_conditions_exact(self):
        rng = np.random.default_rng(1)
        op = SegmentOperator.constant(random_nsd(rng, 2, 1.0), 0.25)
        pair = solve_segment(op, method="spectral")
        c0, s0, cp0, sp0 = pair.evaluate(0.0)
        assert np.array_equal(c0, np.eye(2)) or np.max(np.abs(c0 - np.eye(2))) < 1e-15
        assert np.max(np.abs(s0)) < 1e-15
        assert np.max(np.abs(cp0)) < 1e-15
        assert np.max(np.abs(sp0 - np.eye(2))) < 1e-15

    def test_wronskian_consistency(self):
        rng = np.random.default_rng(2)
        op = SegmentOperator.constant(random_nsd(rng, 2, 4.0), 0.25)
        assert solve_segment(op, method="spectral").wronskian_residual() < 1e-6
        base = random_nsd(rng, 2, 2.0)
        varying = SegmentOperator.time_varying(
            lambda s: base * (0.6 + 0.4 * math.cos(8 * s)), 0.25, 2.0, 2
        )
        # rk4 residual is differencing-limited on the coarser integration grid
        assert solve_segment(varying, method="rk4").wronskian_residual() < 1e-4

    def test_guarded_segments_invertible(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            op = sphere_segment(rng, kappa=1.0, delta=0.125, scale=0.5)
            pair = solve_segment(op)
            assert np.linalg.cond(pair.S_end) < 1e6


class TestPsiFamily:
    def test_psi_at_zero(self):
        assert psi(0.0) == 1.0

    def test_psi_below_cosh(self):
        s = np.linspace(0, 10, 5001)
        assert np.all(psi(s) <= np.cosh(s) + 1e-12)

    def test_h_exponential_identity(self):
        t = np.linspace(1e-9, 25.0, 2001)
        lhs = np.exp(t * h_fn(t))
        assert np.max(np.abs(lhs - psi(np.sqrt(t)))) < 1e-12 * np.max(psi(np.sqrt(t)))

    def test_tu_bound(self):
        t = np.linspace(0, 60, 60001)
        assert float(np.max(t * u_fn(t))) <= 0.63

    def test_g_envelope(self):
        t = np.linspace(0, 60, 60001)
        assert np.all(g_fn(t) >= h_fn(t) - 1e-12)
        assert float(np.max(g_fn(t))) <= 0.6 + 1e-12
        assert np.all(phi_envelope(np.sqrt(t)) >= psi(np.sqrt(t)) - 1e-12)


class TestEstimateSuite:
    def test_flat_margins(self):
        op = SegmentOperator.constant(np.zeros((2, 2)), 0.25)
        rep = estimate_suite(solve_segment(op))
        assert rep.min_margin() >= -1e-14

    def test_sphere_margins_bulk(self):
        rng = np.random.default_rng(4)
        worst = 1.0
        for _ in range(100):
            op = sphere_segment(rng, kappa=1.0, delta=0.125, scale=rng.uniform(0.1, 0.9))
            rep = estimate_suite(solve_segment(op))
            assert rep.psi_applicable
            worst = min(worst, rep.min_margin())
        assert worst >= -1e-10

    def test_global_estimate_tracks_C(self):
        # ||C(s) - I|| <= cosh(sqrt(kappa) s) - 1 with near-equality for A = -kappa I
        lam = 2.0
        op = SegmentOperator.constant(-lam * np.eye(2), 0.4)
        rep = estimate_suite(solve_segment(op))
        assert rep.margins["global_C"] >= -1e-12

    def test_indefinite_uses_cosh(self):
        rng = np.random.default_rng(5)
        a = random_nsd(rng, 2, 1.0)
        a = a - 0.5 * np.trace(a) * np.eye(2)  # push an eigenvalue positive
        op = SegmentOperator.constant(a, 0.2)
        rep = estimate_suite(solve_segment(op))
        assert not rep.psi_applicable
        assert rep.min_margin() >= -1e-10


def test_sphere_focusing_oracle():
    """Sign-convention anchor: on the sphere the transverse sine solution is
    sin-type, so a segment of arc length pi ends exactly at the conjugate
    point (transverse S vanishes, transverse C = -1).  A flipped curvature
    sign would produce sinh growth with no zero."""
    from geopath.density import segments_for_driver
    from geopath.development import DrivingPath, PartitionGrid
    from geopath.geometry import ManifoldSpec

    radius = 2.0
    m = ManifoldSpec("sphere", 2, radius)
    omega = DrivingPath(PartitionGrid(1), np.array([[math.pi * radius, 0.0]]))
    pair = segments_for_driver(m, omega)[0]
    transverse = np.array([0.0, 1.0])
    along = np.array([1.0, 0.0])
    assert abs(transverse @ pair.S_end @ transverse) < 1e-12
    assert transverse @ pair.C_end @ transverse == pytest.approx(-1.0, abs=1e-12)
    # the along-track direction stays flat: S = s, C = 1
    assert along @ pair.S_end @ along == pytest.approx(1.0, abs=1e-12)
    assert along @ pair.C_end @ along == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31 - 1),
    st.floats(min_value=0.05, max_value=0.5),
)
def test_property_spectral_rk4_agreement(seed, delta):
    rng = np.random.default_rng(seed)
    op = SegmentOperator.constant(random_nsd(rng, 2, 3.0), delta)
    ps = solve_segment(op, method="spectral")
    pr = solve_segment(op, method="rk4")
    assert np.max(np.abs(ps.C_end - pr.C_end)) < 1e-8
    assert np.max(np.abs(ps.Sp_end - pr.Sp_end)) < 1e-8
