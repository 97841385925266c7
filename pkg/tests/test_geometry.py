import numpy as np
import pytest
import scipy.integrate

from axipml.geometry import (
    AnalyticSegment,
    GeometryError,
    GradedMesh,
    PmlProfile,
    _example2_segment,
    build_generating_curve,
    discretize,
)

PROF = PmlProfile(a1=2.0, thickness=2.0, strength=2.0, exponent=6)
EX1 = {"type": "polyline", "vertices": [[0, -1], [1, -1], [1, 0], [4, 0]]}


# ---------------------------------------------------------------------------
# absorption profile
# ---------------------------------------------------------------------------
class TestSigma:
    def test_zero_inside(self):
        assert PROF.sigma(np.array([0.0, 1.0, 2.0])).max() == 0.0

    def test_outer_value(self):
        assert PROF.sigma(np.array([4.0]))[0] == pytest.approx(2.0, abs=1e-14)
        assert PROF.sigma(np.array([7.3]))[0] == pytest.approx(2.0, abs=1e-14)

    def test_midpoint_closed_form(self):
        # rho = a1 + T/2: xbar = -1/2, f1 = 3/8, f2 = 5/8
        want = 2 * 2 * 0.375**6 / (0.375**6 + 0.625**6)
        assert PROF.sigma(np.array([3.0]))[0] == pytest.approx(want, rel=1e-14)

    def test_smooth_at_inner_edge(self):
        # first p-1 derivatives vanish at a1: values just beyond are o((d rho)^{p-1})
        eps = np.array([1e-3, 1e-2])
        vals = PROF.sigma(2.0 + eps)
        assert vals[0] < vals[1] * (eps[0] / eps[1]) ** (PROF.exponent - 1) * 1.01

    def test_even(self):
        r = np.array([2.5, 3.7])
        assert np.allclose(PROF.sigma(r), PROF.sigma(-r))

    def test_monotone_on_ramp(self):
        r = np.linspace(2.0, 4.0, 200)
        assert np.all(np.diff(PROF.sigma(r)) >= 0)


class TestStretch:
    def test_identity_in_physical_region(self):
        rho = np.array([0.0, 0.5, 1.99, 2.0])
        rc, zc, ar, az = PROF.stretch(rho, np.zeros_like(rho))
        assert np.all(rc.imag == 0.0)
        assert np.all(ar == 1.0)
        assert np.all(zc.imag == 0.0)

    def test_integral_against_adaptive_quadrature(self):
        # oracle: adaptive quadrature of sigma1 across the full layer
        oracle, err = scipy.integrate.quad(
            lambda r: PROF.sigma(np.array([r]))[0], 2.0, 4.0, limit=200)
        assert err < 1e-8
        got = PROF.sigma_integral(np.array([4.0]))[0]
        assert got == pytest.approx(oracle, abs=5e-9)
        # the value is set by the profile shape, not by S*T/2
        assert got == pytest.approx(1.0383127767, abs=1e-8)

    def test_integral_interior_points(self):
        for rho in (2.3, 2.9, 3.5, 5.0):
            oracle, _ = scipy.integrate.quad(
                lambda r: PROF.sigma(np.array([r]))[0], 0.0, rho, limit=200)
            got = PROF.sigma_integral(np.array([rho]))[0]
            assert got == pytest.approx(oracle, abs=1e-10)

    def test_im_increasing_beyond_a1(self):
        r = np.linspace(2.01, 6.0, 100)
        im = PROF.sigma_integral(r)
        assert np.all(np.diff(im) > 0)

    def test_zero_strength_is_identity(self):
        p0 = PmlProfile(a1=2.0, thickness=2.0, strength=0.0)
        rc, _, ar, _ = p0.stretch(np.array([3.7]), np.array([0.0]))
        assert rc.imag[0] == 0.0 and ar[0] == 1.0

    def test_vertical_profile_unit(self):
        p = PmlProfile(a1=2.0, thickness=1.0, strength=3.0, vertical=True, a2=1.0)
        assert p.sigma2(np.array([0.5]))[0] == 0.0
        assert p.sigma2(np.array([2.0]))[0] == pytest.approx(3.0)
        assert p.sigma2(np.array([-2.0]))[0] == pytest.approx(3.0)
        zc = p.stretch(np.array([0.0]), np.array([-3.0]))[1]
        assert zc.imag[0] < 0  # odd integral


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------
class TestCurve:
    def test_example1_polyline(self):
        curve = build_generating_curve(EX1, PROF)
        assert curve.length == pytest.approx(5.0)
        assert np.allclose(curve.corner_s(), [1.0, 2.0])

    def test_flat_interface(self):
        curve = build_generating_curve(
            {"type": "polyline", "vertices": [[0, 0], [4, 0]]}, PROF)
        assert curve.length == pytest.approx(4.0)
        assert curve.corner_s().size == 0

    def test_flat_run_autoappend(self):
        verts = [[0, -0.5], [0.5, -0.5], [0.5, 0]]
        curve = build_generating_curve({"type": "polyline", "vertices": verts}, PROF)
        rB, zB = curve.point(np.array([curve.length]))
        assert rB[0] == pytest.approx(4.0) and abs(zB[0]) < 1e-12

    def test_example2_arclength_oracle(self):
        seg = _example2_segment()
        # independent oracle: dense composite Simpson on |r'(u)|
        u = np.linspace(0, 1, 200001)
        amp = 1.0 - 0.1 * np.sin(3 * np.pi * u)
        damp = -0.3 * np.pi * np.cos(3 * np.pi * u)
        dr = damp * np.sin(0.5 * np.pi * u) + amp * 0.5 * np.pi * np.cos(0.5 * np.pi * u)
        dz = -damp * np.cos(0.5 * np.pi * u) + amp * 0.5 * np.pi * np.sin(0.5 * np.pi * u)
        oracle = scipy.integrate.simpson(np.hypot(dr, dz), x=u)
        assert seg.length == pytest.approx(oracle, abs=1e-10)

    def test_example2_unit_speed(self):
        curve = build_generating_curve({"type": "analytic", "name": "example2"}, PROF)
        s = np.linspace(0, curve.length, 400)
        ds = 1e-6
        r1, z1 = curve.point(np.clip(s - ds, 0, curve.length))
        r2, z2 = curve.point(np.clip(s + ds, 0, curve.length))
        speed = np.hypot(r2 - r1, z2 - z1) / (np.clip(s + ds, 0, curve.length)
                                              - np.clip(s - ds, 0, curve.length))
        assert np.abs(speed - 1).max() < 1e-6

    def test_rejects_negative_radius(self):
        with pytest.raises(GeometryError):
            build_generating_curve(
                {"type": "polyline", "vertices": [[0, -1], [-0.5, -0.6], [1, 0], [4, 0]]},
                PROF)

    def test_rejects_wrong_endpoint(self):
        with pytest.raises(GeometryError):
            build_generating_curve(
                {"type": "polyline", "vertices": [[0, -1], [1, -1], [1, -0.2]]}, PROF)

    def test_rejects_offaxis_start(self):
        with pytest.raises(GeometryError):
            build_generating_curve(
                {"type": "polyline", "vertices": [[0.3, -1], [1, 0], [4, 0]]}, PROF)

    def test_normal_orientation_flat(self):
        curve = build_generating_curve(EX1, PROF)
        nr, nz = curve.normal(np.array([3.5]))
        assert nr[0] == pytest.approx(0.0) and nz[0] == pytest.approx(-1.0)

    def test_normal_orientation_wall(self):
        # vertical wall of the rectangular dip: normal points to +rho (lower medium)
        curve = build_generating_curve(EX1, PROF)
        nr, nz = curve.normal(np.array([1.5]))
        assert nr[0] == pytest.approx(1.0) and nz[0] == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# graded mesh
# ---------------------------------------------------------------------------
class TestGradedMesh:
    def setup_method(self):
        self.curve = build_generating_curve(EX1, PROF)
        self.mesh = GradedMesh(self.curve, 401, 6)

    def test_endpoints(self):
        s, ds = self.mesh.graded_param(0.0)
        assert s == pytest.approx(0.0, abs=1e-14)
        assert ds == pytest.approx(0.0, abs=1e-10 * self.curve.length)
        s, _ = self.mesh.graded_param(1.0)
        assert s == pytest.approx(self.curve.length)

    def test_corner_values(self):
        tc = self.mesh.seg_t[1]
        s, ds = self.mesh.graded_param(tc)
        assert s == pytest.approx(1.0, abs=1e-12)
        assert abs(ds) < 1e-10 * self.curve.length

    def test_midpoint_symmetry(self):
        t_mid = 0.5 * (self.mesh.seg_t[0] + self.mesh.seg_t[1])
        s, _ = self.mesh.graded_param(t_mid)
        assert s == pytest.approx(0.5, abs=1e-13)

    def test_quarter_point_closed_form(self):
        # one segment spanning [0,1] in both variables, p=6, t=1/4:
        # xi = -1/2, xi1 = 3/8 -> s = (3/8)^6 / ((3/8)^6 + (5/8)^6) = 729/16354
        flat = build_generating_curve(
            {"type": "polyline", "vertices": [[0, 0], [4, 0]]}, PROF)
        mesh = GradedMesh(flat, 101, 6)
        s, _ = mesh.graded_param(0.25)
        assert s / flat.length == pytest.approx(729.0 / 16354.0, abs=1e-12)

    def test_increasing(self):
        # strictly increasing at mesh nodes; non-decreasing everywhere
        # (adjacent dense samples can tie in floats right at a corner,
        # where s - s_c ~ dt^p underflows double resolution)
        s_nodes, _ = self.mesh.graded_param(self.mesh.t_nodes)
        assert np.all(np.diff(s_nodes) > 0)
        t = np.linspace(0, 1, 2000)
        s, _ = self.mesh.graded_param(t)
        assert np.all(np.diff(s) >= 0)

    def test_derivative_matches_fd(self):
        t = np.linspace(0.01, 0.99, 57)
        _, ds = self.mesh.graded_param(t)
        h = 1e-6
        sp, _ = self.mesh.graded_param(t + h)
        sm, _ = self.mesh.graded_param(t - h)
        fd = (sp - sm) / (2 * h)
        assert np.abs(ds - fd).max() < 1e-6 * self.curve.length

    def test_length_quadrature_convergence(self):
        # composite sum of xi'(t_j) h converges to L_AB at high order
        errs = []
        for N in (101, 201, 401):
            mesh = GradedMesh(self.curve, N, 6)
            _, ds = mesh.graded_param(mesh.t_nodes)
            approx = np.sum(ds) * mesh.h  # endpoint xi'=0, trapezoid = plain sum
            errs.append(abs(approx - self.curve.length))
        order = np.log2(errs[0] / errs[1])
        assert order > 5.0
        assert errs[-1] < 1e-10

    def test_min_nodes_rejected(self):
        with pytest.raises(GeometryError):
            GradedMesh(self.curve, 10, 6)


# ---------------------------------------------------------------------------
# discretized boundary
# ---------------------------------------------------------------------------
class TestDiscretize:
    def test_flat_small(self):
        curve = build_generating_curve(
            {"type": "polyline", "vertices": [[0, 0], [4, 0]]}, PROF)
        mesh = GradedMesh(curve, 33, 6)
        b = discretize(curve, mesh, PROF)
        nd = b.nodes
        assert np.allclose(nd.z, 0.0)
        assert np.allclose(nd.nu_rho, 0.0) and np.allclose(nd.nu_z, -1.0)

    def test_physical_nodes_untouched(self):
        curve = build_generating_curve(EX1, PROF)
        b = discretize(curve, GradedMesh(curve, 201, 6), PROF)
        nd = b.nodes
        phys = nd.rho <= 2.0
        assert np.all(nd.rho_c[phys].imag == 0.0)
        assert np.allclose(nd.nu_c_rho[phys].real, nd.nu_rho[phys])
        assert np.allclose(nd.nu_c_rho[phys].imag, 0.0)

    def test_pml_nodes_stretched(self):
        curve = build_generating_curve(EX1, PROF)
        b = discretize(curve, GradedMesh(curve, 201, 6), PROF)
        nd = b.nodes
        pml = nd.rho > 2.0
        assert np.all(nd.rho_c[pml].imag > 0)

    def test_corner_clustering(self):
        curve = build_generating_curve(EX1, PROF)
        mesh = GradedMesh(curve, 401, 6)
        b = discretize(curve, mesh, PROF)
        s, _ = mesh.graded_param(mesh.t_nodes)
        for c in b.corner_nodes:
            gap = min(s[c] - s[c - 1], s[c + 1] - s[c])
            assert gap < mesh.h * curve.length / 10

    def test_jacobian_matches_fd(self):
        # centered differences of xi converge to the stored jacobian at O(h^2)
        curve = build_generating_curve(EX1, PROF)
        mesh = GradedMesh(curve, 201, 6)
        b = discretize(curve, mesh, PROF)
        t = mesh.t_nodes[1:-1]
        errs = []
        for h in (1e-3, 5e-4):
            sp, _ = mesh.graded_param(t + h)
            sm, _ = mesh.graded_param(t - h)
            errs.append(np.abs((sp - sm) / (2 * h) - b.nodes.jac[1:-1]).max())
        assert errs[1] < errs[0] / 3.0  # ~4x per halving
        assert errs[1] < 1e-3 * curve.length

    def test_sample_matches_nodes(self):
        curve = build_generating_curve(EX1, PROF)
        mesh = GradedMesh(curve, 101, 6)
        b = discretize(curve, mesh, PROF)
        smp = b.sample(mesh.t_nodes[5:9])
        assert np.allclose(smp.rho, b.nodes.rho[5:9])
        assert np.allclose(smp.rho_c, b.nodes.rho_c[5:9])

    def test_on_axis_normal_ratio(self):
        curve = build_generating_curve(EX1, PROF)
        b = discretize(curve, GradedMesh(curve, 101, 6), PROF)
        nd = b.nodes
        # axis node: rho_c/rho limit = 1, nu_c = nu
        assert nd.rho[0] == 0.0
        assert nd.nu_c_z[0] == pytest.approx(nd.nu_z[0])
