"""Generating curves, graded meshes, and the cylindrical-PML coordinate stretch.

The scattering interface is a surface of revolution.  Everything here lives in
the meridian (rho, z) half-plane: a piecewise-smooth generating curve running
from a point A on the symmetry axis out to B = (a1 + T, 0) at the outer edge
of the radial absorbing layer, a corner-resolving graded parametrization
s = xi(t), and the complex stretch rho -> rho + i * int_0^rho sigma1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# 32-point Gauss-Legendre rule, reused for all absorption-profile integrals.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)

# Below this fraction of a1, rho/rho-tilde ratios take their on-axis limit.
_AXIS_EPS = 1e-14


class GeometryError(ValueError):
    """Raised for inconsistent curve or mesh specifications."""


# ---------------------------------------------------------------------------
# PML absorption profile and complex stretch
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PmlProfile:
    """Radial absorption profile sigma1 and the induced coordinate stretch.

    sigma1 rises from 0 at rho = a1 to S at rho = a1 + T with p-1 vanishing
    derivatives at a1, and stays at S beyond.  The vertical profile sigma2 is
    disabled by default (the generating curve never enters a vertical layer);
    enabling it mirrors the same shape about z = 0 with parameters (a2, ...).
    """

    a1: float
    thickness: float = 2.0
    strength: float = 2.0
    exponent: int = 6
    vertical: bool = False
    a2: float = 0.0

    def __post_init__(self):
        if self.a1 <= 0 or self.thickness <= 0 or self.strength < 0:
            raise GeometryError("PML requires a1 > 0, T > 0, S >= 0")
        if self.exponent < 2:
            raise GeometryError("profile exponent must be >= 2")

    @property
    def outer_radius(self) -> float:
        return self.a1 + self.thickness

    def _shape(self, xbar: np.ndarray) -> np.ndarray:
        """2 f1^p / (f1^p + f2^p) on xbar in [-1, 0]."""
        p = self.exponent
        f1 = (0.5 - 1.0 / p) * xbar**3 + xbar / p + 0.5
        f2 = 1.0 - f1
        f1p = f1**p
        return 2.0 * f1p / (f1p + f2**p)

    def sigma(self, rho) -> np.ndarray:
        """Absorption value sigma1(rho), vectorized; even in rho."""
        r = np.abs(np.asarray(rho, dtype=float))
        out = np.zeros_like(r)
        a1, T, S = self.a1, self.thickness, self.strength
        inside = (r > a1) & (r <= a1 + T)
        out[inside] = S * self._shape((r[inside] - (a1 + T)) / T)
        out[r > a1 + T] = S
        return out

    def sigma_integral(self, rho) -> np.ndarray:
        """int_0^rho sigma1(t) dt, vectorized (32-point Gauss per evaluation)."""
        r = np.abs(np.asarray(rho, dtype=float))
        out = np.zeros_like(r)
        a1, T, S = self.a1, self.thickness, self.strength
        hi = np.minimum(r, a1 + T)
        ramp = r > a1
        if np.any(ramp):
            lo = a1
            half = 0.5 * (hi[ramp] - lo)
            mid = 0.5 * (hi[ramp] + lo)
            pts = mid[:, None] + half[:, None] * _GL_X[None, :]
            vals = S * self._shape((pts - (a1 + T)) / T)
            out[ramp] = half * (vals @ _GL_W)
        out[r > a1 + T] += S * (r[r > a1 + T] - (a1 + T))
        return np.copysign(out, np.asarray(rho, dtype=float))

    def sigma2(self, z) -> np.ndarray:
        if not self.vertical:
            return np.zeros_like(np.asarray(z, dtype=float))
        zz = np.abs(np.asarray(z, dtype=float))
        out = np.zeros_like(zz)
        a2, T, S = self.a2, self.thickness, self.strength
        inside = (zz > a2) & (zz <= a2 + T)
        out[inside] = S * self._shape((zz[inside] - (a2 + T)) / T)
        out[zz > a2 + T] = S
        return out

    def sigma2_integral(self, z) -> np.ndarray:
        if not self.vertical:
            return np.zeros_like(np.asarray(z, dtype=float))
        zz = np.abs(np.asarray(z, dtype=float))
        out = np.zeros_like(zz)
        a2, T, S = self.a2, self.thickness, self.strength
        hi = np.minimum(zz, a2 + T)
        ramp = zz > a2
        if np.any(ramp):
            half = 0.5 * (hi[ramp] - a2)
            mid = 0.5 * (hi[ramp] + a2)
            pts = mid[:, None] + half[:, None] * _GL_X[None, :]
            vals = S * self._shape((pts - (a2 + T)) / T)
            out[ramp] = half * (vals @ _GL_W)
        out[zz > a2 + T] += S * (zz[zz > a2 + T] - (a2 + T))
        return np.copysign(out, np.asarray(z, dtype=float))

    def stretch(self, rho, z):
        """Complex coordinates and stretch factors.

        Returns (rho_c, z_c, alpha_rho, alpha_z) with
        rho_c = rho + i int_0^rho sigma1,  alpha_rho = 1 + i sigma1(rho).
        """
        rho = np.asarray(rho, dtype=float)
        z = np.asarray(z, dtype=float)
        rho_c = rho + 1j * self.sigma_integral(rho)
        z_c = z + 1j * self.sigma2_integral(z)
        alpha_rho = 1.0 + 1j * self.sigma(rho)
        alpha_z = 1.0 + 1j * self.sigma2(z)
        return rho_c, z_c, alpha_rho, alpha_z


# ---------------------------------------------------------------------------
# Curve segments
# ---------------------------------------------------------------------------
class LineSegment:
    """Straight edge between two meridian points, arclength-parametrized."""

    def __init__(self, p0, p1):
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)
        d = self.p1 - self.p0
        self.length = float(np.hypot(*d))
        if self.length <= 0:
            raise GeometryError(f"degenerate segment at {p0}")
        self._tan = d / self.length

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return (self.p0[0] + s * self._tan[0], self.p0[1] + s * self._tan[1])

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        one = np.ones_like(s)
        return (self._tan[0] * one, self._tan[1] * one)


class AnalyticSegment:
    """Smooth parametric arc (rho(u), z(u)), re-parametrized by arclength.

    The cumulative length s(u) is tabulated on a fine grid with composite
    Gauss quadrature, refined until stable, and inverted per query by a
    monotone interpolant plus Newton steps on the exact speed |r'(u)|.
    """

    def __init__(self, fun: Callable, dfun: Callable, u0: float = 0.0, u1: float = 1.0,
                 tol: float = 1e-12):
        self.fun = fun
        self.dfun = dfun
        self.u0, self.u1 = float(u0), float(u1)
        self._tol = tol
        n = 256
        prev = None
        while n <= 16384:
            knots = np.linspace(self.u0, self.u1, n + 1)
            half = 0.5 * np.diff(knots)
            mid = 0.5 * (knots[:-1] + knots[1:])
            pts = mid[:, None] + half[:, None] * _GL_X[None, :]
            dr, dz = self.dfun(pts)
            speed = np.hypot(dr, dz)
            seg = half * (speed @ _GL_W)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            if prev is not None and abs(cum[-1] - prev) < tol * max(1.0, cum[-1]):
                break
            prev = cum[-1]
            n *= 2
        self._knots = knots
        self._cum = cum
        self.length = float(cum[-1])

    def _arc(self, u):
        """Cumulative arclength s(u), exact to quadrature accuracy and smooth."""
        k = np.clip(np.searchsorted(self._knots, u, side="right") - 1,
                    0, len(self._knots) - 2)
        a = self._knots[k]
        half = 0.5 * (u - a)
        mid = 0.5 * (u + a)
        pts = mid[:, None] + half[:, None] * _GL_X[None, :]
        dr, dz = self.dfun(pts)
        return self._cum[k] + half * (np.hypot(dr, dz) @ _GL_W)

    def _u_of_s(self, s):
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        u = np.interp(s, self._cum, self._knots)
        for _ in range(30):
            dr, dz = self.dfun(u)
            speed = np.hypot(dr, dz)
            du = (self._arc(u) - s) / speed
            u = np.clip(u - du, self.u0, self.u1)
            if np.max(np.abs(du)) < self._tol:
                break
        return u

    def point(self, s):
        return self.fun(self._u_of_s(s))

    def tangent(self, s):
        dr, dz = self.dfun(self._u_of_s(s))
        speed = np.hypot(dr, dz)
        return (dr / speed, dz / speed)


@dataclass
class GeneratingCurve:
    """Ordered meridian curve from the axis point A to B = (a1 + T, 0).

    Segment joints are the corner set; the outward normal (toward the lower
    medium) is the tangent rotated by -pi/2, i.e. nu = (t_z, -t_rho).
    """

    segments: list
    seg_s: np.ndarray = field(init=False)   # cumulative arclength bounds
    length: float = field(init=False)

    def __post_init__(self):
        lens = np.array([seg.length for seg in self.segments])
        self.seg_s = np.concatenate([[0.0], np.cumsum(lens)])
        self.length = float(self.seg_s[-1])

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def corner_s(self) -> np.ndarray:
        """Arclength positions of interior segment joints."""
        return self.seg_s[1:-1].copy()

    def _locate(self, s):
        idx = np.searchsorted(self.seg_s, s, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        idx = self._locate(s)
        rho = np.empty_like(s)
        z = np.empty_like(s)
        for i in range(self.n_segments):
            m = idx == i
            if np.any(m):
                rho[m], z[m] = self.segments[i].point(s[m] - self.seg_s[i])
        return rho, z

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        idx = self._locate(s)
        tr = np.empty_like(s)
        tz = np.empty_like(s)
        for i in range(self.n_segments):
            m = idx == i
            if np.any(m):
                tr[m], tz[m] = self.segments[i].tangent(s[m] - self.seg_s[i])
        return tr, tz

    def normal(self, s):
        tr, tz = self.tangent(s)
        return tz, -tr

    def validate(self, profile: PmlProfile, rtol: float = 1e-9) -> None:
        r0, z0 = self.point(np.array([0.0]))
        rB, zB = self.point(np.array([self.length]))
        if abs(r0[0]) > rtol:
            raise GeometryError(f"curve must start on the axis, got rho={r0[0]!r}")
        if abs(rB[0] - profile.outer_radius) > rtol or abs(zB[0]) > rtol:
            raise GeometryError(
                f"curve must end at (a1+T, 0) = ({profile.outer_radius}, 0), "
                f"got ({rB[0]}, {zB[0]})")
        s = np.linspace(0, self.length, 512)
        rho, _ = self.point(s)
        if np.any(rho < -rtol):
            raise GeometryError("curve has negative radius")
        tr, tz = self.tangent(s)
        bad = np.abs(np.hypot(tr, tz) - 1.0).max()
        if bad > 1e-10:
            raise GeometryError(f"tangent not unit speed (max dev {bad:.2e})")


def _example2_segment() -> AnalyticSegment:
    """Wavy hemispherical bump used in the second worked example."""

    def fun(u):
        amp = 1.0 - 0.1 * np.sin(3 * np.pi * u)
        return amp * np.sin(0.5 * np.pi * u), -amp * np.cos(0.5 * np.pi * u)

    def dfun(u):
        amp = 1.0 - 0.1 * np.sin(3 * np.pi * u)
        damp = -0.3 * np.pi * np.cos(3 * np.pi * u)
        dr = damp * np.sin(0.5 * np.pi * u) + amp * 0.5 * np.pi * np.cos(0.5 * np.pi * u)
        dz = -damp * np.cos(0.5 * np.pi * u) + amp * 0.5 * np.pi * np.sin(0.5 * np.pi * u)
        return dr, dz

    return AnalyticSegment(fun, dfun, 0.0, 1.0)


def build_generating_curve(spec: dict, profile: PmlProfile) -> GeneratingCurve:
    """Build the meridian curve from a geometry description.

    Supported specs:
      {"type": "polyline", "vertices": [[rho, z], ...]}
      {"type": "analytic", "name": "example2"}
      {"type": "sampled", "points": [[rho, z], ...]}   (spline through samples)

    The final flat run out to B = (a1+T, 0) is appended when the spec stops
    at the rim of the perturbation (last vertex with z = 0, rho <= a1).
    """
    kind = spec.get("type")
    segments: list = []
    if kind == "polyline":
        verts = [np.asarray(v, dtype=float) for v in spec["vertices"]]
        if len(verts) < 2:
            raise GeometryError("polyline needs at least two vertices")
        for a, b in zip(verts[:-1], verts[1:]):
            segments.append(LineSegment(a, b))
    elif kind == "analytic":
        name = spec.get("name")
        if name == "example2":
            segments.append(_example2_segment())
        else:
            raise GeometryError(f"unknown analytic curve {name!r}")
    elif kind == "sampled":
        from scipy.interpolate import CubicSpline

        pts = np.asarray(spec["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 4:
            raise GeometryError("sampled curve needs >= 4 points")
        q = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        q /= q[-1]
        cs_r = CubicSpline(q, pts[:, 0])
        cs_z = CubicSpline(q, pts[:, 1])
        segments.append(AnalyticSegment(
            lambda u: (cs_r(u), cs_z(u)),
            lambda u: (cs_r(u, 1), cs_z(u, 1)), 0.0, 1.0))
    else:
        raise GeometryError(f"unknown geometry type {kind!r}")

    # append flat run to B if missing
    last = segments[-1]
    rho_e, z_e = (np.asarray(v).reshape(-1) for v in last.point(np.array([last.length])))
    B = (profile.outer_radius, 0.0)
    if abs(rho_e[0] - B[0]) > 1e-12 or abs(z_e[0]) > 1e-12:
        if abs(z_e[0]) > 1e-12:
            raise GeometryError(
                "geometry must return to the interface plane z=0 "
                f"(last point ({rho_e[0]}, {z_e[0]}))")
        if rho_e[0] >= B[0]:
            raise GeometryError("perturbation extends past the outer PML edge")
        segments.append(LineSegment((rho_e[0], 0.0), B))
    curve = GeneratingCurve(segments)
    curve.validate(profile)
    return curve


# ---------------------------------------------------------------------------
# Graded mesh
# ---------------------------------------------------------------------------
@dataclass
class GradedMesh:
    """Corner-graded parametrization s = xi(t) of a generating curve.

    Each segment [t_i, t_{i+1}] maps onto its arclength range by the rational
    grading whose derivative vanishes to order p-1 at both segment ends, so
    quadrature nodes cluster at corners.  Corners land exactly on grid nodes.
    """

    curve: GeneratingCurve
    n_nodes: int
    exponent: int = 6
    min_intervals_per_segment: int = 12

    def __post_init__(self):
        N = self.n_nodes
        lens = np.diff(self.curve.seg_s)
        nseg = len(lens)
        total = N - 1
        mins = self.min_intervals_per_segment
        if total < nseg * mins:
            raise GeometryError(
                f"N={N} too small: need >= {nseg * mins + 1} nodes "
                f"({mins} intervals per smooth segment)")
        raw = lens / lens.sum() * total
        n_i = np.maximum(mins, np.floor(raw).astype(int))
        # largest-remainder fixup to make interval counts sum exactly
        while n_i.sum() != total:
            if n_i.sum() < total:
                k = int(np.argmax(raw - n_i))
                n_i[k] += 1
            else:
                free = np.where(n_i > mins)[0]
                k = free[np.argmin((raw - n_i)[free])]
                n_i[k] -= 1
        self.seg_intervals = n_i
        self.h = 1.0 / (N - 1)
        self.t_nodes = np.arange(N) * self.h
        bounds = np.concatenate([[0], np.cumsum(n_i)])
        self.seg_t = bounds * self.h          # segment bounds in t
        self.corner_nodes = bounds[1:-1].copy()  # interior joint node indices

    def _seg_index(self, t):
        idx = np.searchsorted(self.seg_t, t, side="right") - 1
        return np.clip(idx, 0, len(self.seg_intervals) - 1)

    def graded_param(self, t):
        """Return (s, ds/dt) of the grading map, vectorized over t in [0,1]."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        idx = self._seg_index(t)
        t0 = self.seg_t[idx]
        t1 = self.seg_t[idx + 1]
        s0 = self.curve.seg_s[idx]
        s1 = self.curve.seg_s[idx + 1]
        p = self.exponent
        xi = (2 * t - (t0 + t1)) / (t1 - t0)
        xi1 = (0.5 - 1.0 / p) * xi**3 + xi / p + 0.5
        xi2 = 1.0 - xi1
        x1p = xi1**p
        x2p = xi2**p
        den = x1p + x2p
        w = x1p / den
        dxi1 = 3 * (0.5 - 1.0 / p) * xi**2 + 1.0 / p
        dw = p * dxi1 * (xi1 * xi2) ** (p - 1) / den**2
        s = s0 + (s1 - s0) * w
        dsdt = (s1 - s0) * dw * 2.0 / (t1 - t0)
        if scalar:
            return float(s[0]), float(dsdt[0])
        return s, dsdt


# ---------------------------------------------------------------------------
# Discretized boundary
# ---------------------------------------------------------------------------
@dataclass
class BoundaryPoints:
    """Struct-of-arrays sample of the stretched curve (or off-curve targets).

    nu_c_* are the complexified normal components; jac is |r'(t)| = xi'(t).
    """

    rho: np.ndarray
    z: np.ndarray
    rho_c: np.ndarray
    z_c: np.ndarray
    alpha_rho: np.ndarray
    alpha_z: np.ndarray
    nu_rho: np.ndarray
    nu_z: np.ndarray
    nu_c_rho: np.ndarray
    nu_c_z: np.ndarray
    jac: np.ndarray

    def __len__(self):
        return self.rho.size

    def take(self, idx) -> "BoundaryPoints":
        return BoundaryPoints(*(getattr(self, f.name)[idx] for f in
                                self.__dataclass_fields__.values()))

    def plain(self) -> "BoundaryPoints":
        """Copy with the stretch removed (real coordinates, nu_c = nu)."""
        one = np.ones_like(self.alpha_rho)
        return BoundaryPoints(
            self.rho, self.z, self.rho.astype(complex), self.z.astype(complex),
            one, one, self.nu_rho, self.nu_z,
            self.nu_rho.astype(complex), self.nu_z.astype(complex), self.jac)


def _make_points(curve, mesh, profile, t, corner_tangent_side=None):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s, dsdt = mesh.graded_param(t)
    s = np.atleast_1d(s)
    dsdt = np.atleast_1d(dsdt)
    # nudge exact-corner lookups to a definite side for the normal
    s_lookup = s.copy()
    if corner_tangent_side is not None:
        for sc in curve.corner_s():
            hit = np.isclose(s_lookup, sc, rtol=0, atol=1e-13 * curve.length)
            s_lookup[hit] = sc + corner_tangent_side * 1e-12 * curve.length
    rho, z = curve.point(s)
    nr, nz = curve.normal(s_lookup)
    rho_c, z_c, a_r, a_z = profile.stretch(rho, z)
    ratio = np.where(rho > _AXIS_EPS * profile.a1, rho_c / np.maximum(rho, 1e-300), 1.0)
    nu_c_rho = nr * ratio * a_z / a_r
    nu_c_z = nz * ratio * a_r / a_z
    return BoundaryPoints(rho, z, rho_c, z_c, a_r, a_z, nr, nz,
                          nu_c_rho, nu_c_z, dsdt)


@dataclass
class DiscretizedBoundary:
    """Nystrom discretization of a generating curve under a PML profile."""

    curve: GeneratingCurve
    mesh: GradedMesh
    profile: PmlProfile
    nodes: BoundaryPoints = field(init=False)

    def __post_init__(self):
        self.nodes = _make_points(self.curve, self.mesh, self.profile,
                                  self.mesh.t_nodes, corner_tangent_side=-1)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    @property
    def t(self) -> np.ndarray:
        return self.mesh.t_nodes

    @property
    def corner_nodes(self) -> np.ndarray:
        return self.mesh.corner_nodes

    def sample(self, t) -> BoundaryPoints:
        """Stretched-point data at arbitrary parameters t (off-grid allowed)."""
        return _make_points(self.curve, self.mesh, self.profile, t)

    def segment_of(self, t):
        """Index of the smooth segment containing each parameter value."""
        return self.mesh._seg_index(np.asarray(t, dtype=float))


def discretize(curve: GeneratingCurve, mesh: GradedMesh,
               profile: PmlProfile) -> DiscretizedBoundary:
    return DiscretizedBoundary(curve, mesh, profile)
