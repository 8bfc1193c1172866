import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geopath.geometry import (
    CurvatureInFrame,
    FramePoint,
    ManifoldSpec,
    ValidationError,
    constant_curvature_tensor,
    curvature_bound_check,
    curvature_in_frame,
    gamma_operator,
    kulkarni_nomizu,
    ricci_matrix,
    scalar_curvature,
    sectional_curvature,
    sectional_sup,
    tidal_operator,
)


def random_sphere_frame(m: ManifoldSpec, rng) -> FramePoint:
    """A random point on the sphere with a random orthonormal tangent frame."""
    e = m.embed_dim
    x = rng.standard_normal(e)
    x = m.project_point(x)
    basis = rng.standard_normal((e, m.dim))
    p = m.tangent_projector(x)
    q, _ = np.linalg.qr(p @ basis)
    return FramePoint(point=x, frame=q[:, : m.dim])


def gauss_equation_tensor(m: ManifoldSpec, f: FramePoint) -> np.ndarray:
    """Independent oracle: curvature of the embedded sphere via the second
    fundamental form, with the shape operator obtained by differencing the
    unit normal field along the frame directions."""
    d = m.dim
    r = m.radius
    x = f.point
    eps = 1e-6

    def normal(y):
        return y / np.linalg.norm(y)

    # II(e_i, e_j) = <dN(e_i), e_j> (scalar second fundamental form)
    ii = np.zeros((d, d))
    for i in range(d):
        dn = (normal(x + eps * f.frame[:, i]) - normal(x - eps * f.frame[:, i])) / (2 * eps)
        for j in range(d):
            ii[i, j] = dn @ f.frame[:, j]
    riem = np.einsum("il,jk->ijkl", ii, ii) - np.einsum("ik,jl->ijkl", ii, ii)
    return riem


class TestCurvatureInFrame:
    def test_flat_is_zero(self):
        m = ManifoldSpec("euclidean", 3)
        c = curvature_in_frame(m, m.base_frame_point())
        assert np.all(c.components == 0.0)

    @pytest.mark.parametrize("radius,expected", [(1.0, 1.0), (2.0, 0.25)])
    def test_sphere_sectional_vs_embedded_oracle(self, radius, expected):
        m = ManifoldSpec("sphere", 2, radius)
        rng = np.random.default_rng(0)
        for _ in range(5):
            f = random_sphere_frame(m, rng)
            c = curvature_in_frame(m, f)
            oracle = gauss_equation_tensor(m, f)
            assert np.max(np.abs(c.components - oracle)) < 1e-8
            e = np.eye(2)
            assert sectional_curvature(c, e[0], e[1]) == pytest.approx(expected, abs=1e-12)

    def test_symmetries_builtin(self):
        for m in (ManifoldSpec("sphere", 2, 1.0), ManifoldSpec("sphere", 3, 0.7)):
            c = curvature_in_frame(m, m.base_frame_point())
            assert max(c.symmetry_residuals().values()) <= 1e-12

    def test_bad_frame_rejected(self):
        m = ManifoldSpec("sphere", 2, 1.0)
        f = m.base_frame_point()
        f.frame = f.frame * 1.1
        with pytest.raises(ValidationError):
            curvature_in_frame(m, f)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_kulkarni_nomizu_symmetries(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.standard_normal((3, 3))
        k = rng.standard_normal((3, 3))
        c = CurvatureInFrame(kulkarni_nomizu(h + h.T, k + k.T))
        assert max(c.symmetry_residuals().values()) <= 1e-10 * (1 + np.max(np.abs(c.components)))


class TestTidalOperator:
    def test_zero_vector(self):
        m = ManifoldSpec("sphere", 3, 1.0)
        c = curvature_in_frame(m, m.base_frame_point())
        assert np.all(tidal_operator(c, np.zeros(3)) == 0.0)

    def test_flat(self):
        m = ManifoldSpec("euclidean", 2)
        c = curvature_in_frame(m, m.base_frame_point())
        assert np.all(tidal_operator(c, np.array([1.0, 2.0])) == 0.0)

    def test_sphere_closed_form(self):
        rng = np.random.default_rng(1)
        for kappa in (1.0, 0.25, 0.05):
            m = ManifoldSpec("sphere", 3, 1.0 / np.sqrt(kappa))
            c = curvature_in_frame(m, m.base_frame_point())
            v = rng.standard_normal(3)
            a = tidal_operator(c, v)
            expected = -kappa * (np.dot(v, v) * np.eye(3) - np.outer(v, v))
            assert np.max(np.abs(a - expected)) < 1e-12

    def test_negative_semidefinite_and_norm(self):
        rng = np.random.default_rng(2)
        m = ManifoldSpec("sphere", 3, 2.0)
        c = curvature_in_frame(m, m.base_frame_point())
        for _ in range(50):
            v = rng.standard_normal(3)
            a = tidal_operator(c, v)
            evs = np.linalg.eigvalsh(a)
            assert evs.max() <= 1e-12
            assert np.abs(evs).max() <= m.sectional_bound * np.dot(v, v) + 1e-12


class TestScalarCurvature:
    def test_flat(self):
        c = CurvatureInFrame(np.zeros((3,) * 4))
        assert scalar_curvature(c) == 0.0

    def test_sphere_values(self):
        c = curvature_in_frame(ManifoldSpec("sphere", 2, 1.0), ManifoldSpec("sphere", 2, 1.0).base_frame_point())
        assert scalar_curvature(c) == pytest.approx(2.0, abs=1e-12)
        m = ManifoldSpec("sphere", 3, 1.0 / np.sqrt(0.05))
        c = curvature_in_frame(m, m.base_frame_point())
        assert scalar_curvature(c) == pytest.approx(0.3, abs=1e-12)

    def test_frame_rotation_invariance(self):
        rng = np.random.default_rng(3)
        base = constant_curvature_tensor(3, 0.4)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        rotated = np.einsum("abcd,ai,bj,ck,dl->ijkl", base, q, q, q, q)
        c0, c1 = CurvatureInFrame(base), CurvatureInFrame(rotated)
        assert scalar_curvature(c0) == pytest.approx(scalar_curvature(c1), abs=1e-10)
        g0, g1 = gamma_operator(c0), gamma_operator(c1)
        assert np.max(np.abs(g0 - q @ g1 @ q.T)) < 1e-10


class TestGammaOperator:
    def brute_force(self, comp: np.ndarray) -> np.ndarray:
        d = comp.shape[0]

        def omega(a, c, w):
            # (Omega(a, c) w)_l = sum a_i c_j w_k R[i,j,k,l]
            return np.einsum("ijkl,i,j,k->l", comp, a, c, w)

        eye = np.eye(d)
        out = np.zeros((d, d))
        for m in range(d):
            x = eye[m]
            acc = np.zeros(d)
            for i in range(d):
                for j in range(d):
                    acc = acc + omega(eye[i], omega(eye[i], x, eye[j]), eye[j])
                    acc = acc + omega(eye[i], omega(eye[j], x, eye[i]), eye[j])
                    acc = acc + omega(eye[i], omega(eye[j], x, eye[j]), eye[i])
            out[:, m] = acc
        return out

    def test_flat(self):
        c = CurvatureInFrame(np.zeros((2,) * 4))
        assert np.all(gamma_operator(c) == 0.0)

    @pytest.mark.parametrize("d,kappa", [(2, 1.0), (3, 0.3), (3, 0.05)])
    def test_sphere_vs_brute_force_and_closed_form(self, d, kappa):
        c = CurvatureInFrame(constant_curvature_tensor(d, kappa))
        g = gamma_operator(c)
        assert np.max(np.abs(g - self.brute_force(c.components))) < 1e-12
        expected = kappa**2 * (d - 1) * (d + 2) * np.eye(d)
        assert np.max(np.abs(g - expected)) < 1e-12

    def test_synthetic_vs_brute_force(self):
        rng = np.random.default_rng(4)
        h = rng.standard_normal((3, 3))
        c = CurvatureInFrame(kulkarni_nomizu(h + h.T, np.eye(3)))
        assert np.max(np.abs(gamma_operator(c) - self.brute_force(c.components))) < 1e-10

    def test_norm_below_12_when_curvature_small(self):
        d = 3
        kappa = 3.0 / (17.0 * d) * 0.99
        c = CurvatureInFrame(constant_curvature_tensor(d, kappa))
        assert np.linalg.norm(gamma_operator(c), 2) < 12.0


class TestBounds:
    def test_flat_report(self):
        c = CurvatureInFrame(np.zeros((2,) * 4))
        rep = curvature_bound_check(c)
        assert rep.max_omega_norm == 0.0 and rep.sectional_sup == 0.0 and rep.passes_34_3

    def test_sphere_small_curvature(self):
        c = CurvatureInFrame(constant_curvature_tensor(2, 0.08))
        rep = curvature_bound_check(c)
        assert rep.passes_34_3
        assert rep.max_omega_norm <= (34.0 / 3.0) * 0.08 + 1e-12
        assert rep.below_2_over_d

    def test_synthetic_passes(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            h = rng.standard_normal((3, 3)) * 0.1
            c = CurvatureInFrame(kulkarni_nomizu(h + h.T, np.eye(3)))
            assert curvature_bound_check(c).passes_34_3

    def test_kbd_inequality(self):
        rng = np.random.default_rng(6)
        for d, kappa in ((2, 0.7), (3, 0.2)):
            c = CurvatureInFrame(constant_curvature_tensor(d, kappa))
            sup = sectional_sup(c)
            for _ in range(1000):
                x = rng.standard_normal(d)
                y = rng.standard_normal(d)
                val = abs(np.einsum("ijkl,i,j,k,l->", c.components, x, y, x, y))
                bound = sup * np.dot(x, x) * np.dot(y, y)
                assert val <= bound + 1e-10 * max(1.0, bound)

    def test_sectional_sup_d3_exact(self):
        c = CurvatureInFrame(constant_curvature_tensor(3, 0.31))
        assert sectional_sup(c) == pytest.approx(0.31, abs=1e-12)


class TestFramePoint:
    def test_base_frames_valid(self):
        for m in (ManifoldSpec("euclidean", 2), ManifoldSpec("sphere", 3, 1.7)):
            f = m.base_frame_point()
            f.validate(m)
            assert f.ortho_residual() <= 1e-15

    def test_random_frames_valid(self):
        m = ManifoldSpec("sphere", 2, 1.0)
        rng = np.random.default_rng(7)
        for _ in range(20):
            random_sphere_frame(m, rng).validate(m)
