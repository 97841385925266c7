"""Per-mode Nystrom matrices, the solid-angle diagonal, and NtD maps.

Each collocation row splits the parameter interval at the target node and
applies the endpoint-corrected quadrature on both halves; off-grid
correction nodes reach the nodal unknowns through one-sided Lagrange
stencils confined to their smooth segment.  The diagonal jump coefficient
is the plain (unstretched) solid-angle term: a singular quadrature of the
zero-mode Laplace double-layer over the curve plus the closed cone term
that stands in for the discarded outer boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import DiscretizedBoundary
from .kernels import (
    _modal_close,
    SQRT_2PI,
    KernelOptions,
    close_pair_mask,
    laplace_modal_kernels,
    modal_kernels,
)
from .quadrature import alpert_rule, interp_to_grid, piece_nodes

logger = logging.getLogger(__name__)


class AssemblyError(RuntimeError):
    pass


@dataclass
class LayerMatrices:
    """Dense single- and double-layer matrices for modes 0..n_modes.

    Row l of S applied to nodal flux densities phi_j = |r'(t_j)| du/dnu_c
    reproduces the split singular quadrature of the weighted kernel at
    r(t_l); K acts on trace values.  The 2 sqrt(2 pi) rho' weights and the
    K-side Jacobian are folded in.
    """

    omega: float
    n_modes: int
    S: np.ndarray           # (n_modes+1, N, N) complex
    K: np.ndarray
    rule_order: int
    interp_order: int


@dataclass
class DiagonalJump:
    """Solid-angle diagonal for both half-space domains (real, per node)."""

    upper: np.ndarray
    lower: np.ndarray


@dataclass
class NtDMatrix:
    """Flux-to-trace map of one azimuthal mode in one domain."""

    n: int
    matrix: np.ndarray
    cond_estimate: float


# ---------------------------------------------------------------------------
# row quadrature plan
# ---------------------------------------------------------------------------
def _distinct_pairs(tgt, src) -> np.ndarray:
    """Mask of pairs with nonzero coordinate separation.

    Near corners the grading compresses parameters so hard that distinct
    quadrature nodes collapse onto identical doubles; their Jacobian weight
    xi'(t) ~ (dt)^{p-1} makes the dropped contributions < 1e-16 relative.
    """
    from .kernels import meridian_gap2

    return np.abs(meridian_gap2(tgt, src)) > 0.0


@dataclass
class _RowPlan:
    trap_mask: np.ndarray     # (N, N) bool: on-grid trapezoid couplings
    off_rows: np.ndarray      # (Q,) row index of each off-grid node
    off_t: np.ndarray         # (Q,) parameter of the node
    off_w: np.ndarray         # (Q,) quadrature weight
    stencil_idx: np.ndarray   # (Q, order) grid indices
    stencil_w: np.ndarray     # (Q, order) interpolation weights


def _build_row_plan(boundary: DiscretizedBoundary, rule, interp_order) -> _RowPlan:
    mesh = boundary.mesh
    N = mesh.n_nodes
    h = mesh.h
    a_r, a_s = rule.reg_skip, rule.sing_skip
    n_min = rule.min_intervals

    trap = np.zeros((N, N), dtype=bool)
    j = np.arange(N)
    for l in range(N):
        left_ok = l >= n_min
        right_ok = (N - 1 - l) >= n_min
        if left_ok:
            trap[l, (j >= a_r) & (j <= l - a_s)] = True
        if right_ok:
            trap[l, (j >= l + a_s) & (j <= N - 1 - a_r)] = True

    rows, ts, ws = [], [], []
    for l in range(N):
        t_l = l * h
        if l > 0:
            nodes, w, on_grid = piece_nodes(rule, 0.0, t_l, l, singular_end="hi")
            keep = ~on_grid
            rows.append(np.full(keep.sum(), l))
            ts.append(nodes[keep])
            ws.append(w[keep])
        if l < N - 1:
            nodes, w, on_grid = piece_nodes(rule, t_l, 1.0, N - 1 - l, singular_end="lo")
            keep = ~on_grid
            rows.append(np.full(keep.sum(), l))
            ts.append(nodes[keep])
            ws.append(w[keep])
    off_rows = np.concatenate(rows)
    off_t = np.concatenate(ts)
    off_w = np.concatenate(ws)

    # stencils confined to smooth segments (node-index blocks)
    bounds = np.concatenate([[0], np.cumsum(mesh.seg_intervals)])
    blocks = [(int(bounds[i]), int(bounds[i + 1])) for i in range(len(bounds) - 1)]
    P = interp_to_grid(off_t, mesh.t_nodes, interp_order, blocks=blocks)
    stencil_idx = np.argsort(-np.abs(P), axis=1)[:, :interp_order]
    stencil_w = np.take_along_axis(P, stencil_idx, axis=1)
    return _RowPlan(trap, off_rows, off_t, off_w, stencil_idx, stencil_w)


def _expand_opts(boundary, n_modes, opts):
    if opts is None:
        opts = KernelOptions()
    return KernelOptions(taylor_order=opts.taylor_order,
                         substitute=opts.substitute,
                         m_start=max(opts.m_start, 4 * max(n_modes, 1)),
                         m_cap=opts.m_cap, far_factor=opts.far_factor,
                         local_scale=boundary.mesh.h * boundary.curve.length,
                         chunk=opts.chunk)


def assemble_layer_matrices(boundary: DiscretizedBoundary, omega: float,
                            n_modes: int, rule_order: int = 10,
                            interp_order: int = 10,
                            opts: KernelOptions | None = None) -> LayerMatrices:
    """Assemble S and K matrices for all azimuthal modes 0..n_modes."""
    return assemble_variants(boundary, omega, n_modes, rule_order,
                             interp_order, opts, both=False)[0]


def assemble_variants(boundary: DiscretizedBoundary, omega: float,
                      n_modes: int, rule_order: int = 10,
                      interp_order: int = 10,
                      opts: KernelOptions | None = None, both: bool = True):
    """Assemble matrices, optionally for both stabilization variants at once.

    Returns a list of LayerMatrices: the variant selected by opts.substitute
    first, then (when ``both``) the opposite variant.  The far-pair kernel
    synthesis, identical across variants, is shared; unordered node pairs are
    sampled once, with both directional double-layer kernels read off the
    same geometry.
    """
    rule = alpert_rule(rule_order)
    N = boundary.n
    base = opts if opts is not None else KernelOptions()
    opts = _expand_opts(boundary, n_modes, base)
    variants = [opts]
    if both:
        variants.append(KernelOptions(**{**opts.__dict__,
                                         "substitute": not opts.substitute}))
    plan = _build_row_plan(boundary, rule, interp_order)
    nodes = boundary.nodes
    mats = [(np.zeros((n_modes + 1, N, N), dtype=complex),
             np.zeros((n_modes + 1, N, N), dtype=complex)) for _ in variants]

    # on-grid trapezoid couplings over unordered pairs
    h = boundary.mesh.h
    fac_s = 2.0 * SQRT_2PI * nodes.rho
    fac_k = fac_s * nodes.jac
    need = plan.trap_mask | plan.trap_mask.T
    li, ji = np.nonzero(np.triu(need, k=1))
    step = max(1, int(4e5))
    for i0 in range(0, li.size, step):
        la, ja = li[i0:i0 + step], ji[i0:i0 + step]
        ta, sa = nodes.take(la), nodes.take(ja)
        close = close_pair_mask(ta, sa, opts)
        fwd = plan.trap_mask[la, ja]
        rev = plan.trap_mask[ja, la]

        def scatter(rows_mask, vals, S, K):
            Sp, Kp, Kr = vals
            m = fwd[rows_mask]
            r, c = la[rows_mask][m], ja[rows_mask][m]
            S[:, r, c] += (h * fac_s[c])[None, :] * Sp[m].T
            K[:, r, c] += (h * fac_k[c])[None, :] * Kp[m].T
            m = rev[rows_mask]
            r, c = ja[rows_mask][m], la[rows_mask][m]
            S[:, r, c] += (h * fac_s[c])[None, :] * Sp[m].T
            K[:, r, c] += (h * fac_k[c])[None, :] * Kr[m].T

        far_rows = ~close
        if np.any(far_rows):
            idx = np.flatnonzero(far_rows)
            vals = _chunked_modal(ta.take(idx), sa.take(idx), omega, n_modes,
                                  opts, far_only=True)
            for (S, K) in mats:
                scatter(far_rows, vals, S, K)
        if np.any(close):
            idx = np.flatnonzero(close)
            tc, sc = ta.take(idx), sa.take(idx)
            for v, (S, K) in zip(variants, mats):
                vals = _chunked_modal(tc, sc, omega, n_modes, v, far_only=False)
                scatter(close, vals, S, K)

    # off-grid correction nodes through interpolation stencils
    smp = boundary.sample(plan.off_t)
    tgts = nodes.take(plan.off_rows)
    keep = _distinct_pairs(tgts, smp)
    plan = _RowPlan(plan.trap_mask, plan.off_rows[keep], plan.off_t[keep],
                    plan.off_w[keep], plan.stencil_idx[keep], plan.stencil_w[keep])
    smp, tgts = smp.take(keep), tgts.take(keep)
    rows = np.repeat(plan.off_rows[:, None], plan.stencil_idx.shape[1], axis=1)
    wS = (plan.off_w * 2.0 * SQRT_2PI * smp.rho)[:, None] * plan.stencil_w
    wK = wS * smp.jac[:, None]
    close_off = close_pair_mask(tgts, smp, opts)
    shared = None
    for v, (S, K) in zip(variants, mats):
        if shared is None:
            Sn, Kn = modal_kernels(tgts, smp, omega, n_modes, v)
            far_part = (Sn[~close_off], Kn[~close_off])
            shared = far_part
        else:
            Sn = np.empty((len(tgts), n_modes + 1), dtype=complex)
            Kn = np.empty_like(Sn)
            Sn[~close_off], Kn[~close_off] = shared
            res = _modal_close(tgts.take(np.flatnonzero(close_off)),
                               smp.take(np.flatnonzero(close_off)),
                               omega, n_modes, v)
            Sn[close_off], Kn[close_off] = res[0], res[1]
        valS = Sn[:, :, None] * wS[:, None, :]
        valK = Kn[:, :, None] * wK[:, None, :]
        for n in range(n_modes + 1):
            np.add.at(S[n], (rows, plan.stencil_idx), valS[:, n, :])
            np.add.at(K[n], (rows, plan.stencil_idx), valK[:, n, :])
    return [LayerMatrices(omega, n_modes, S, K, rule_order, interp_order)
            for (S, K) in mats]


def _chunked_modal(tgt, src, omega, n_modes, opts, far_only):
    """Symmetric-pair kernel tables (S, K, K_rev) in memory-bounded chunks."""
    from .kernels import _modal_close, _modal_far

    P = len(tgt)
    out = [np.empty((P, n_modes + 1), dtype=complex) for _ in range(3)]
    step = max(1, opts.chunk if far_only else opts.chunk // 4)
    fn = _modal_far if far_only else _modal_close
    for i0 in range(0, P, step):
        rows = np.arange(i0, min(P, i0 + step))
        res = fn(tgt.take(rows), src.take(rows), omega, n_modes, opts,
                 reverse=True)
        for o, r in zip(out, res):
            o[rows] = r
    return out


# ---------------------------------------------------------------------------
# diagonal jump term
# ---------------------------------------------------------------------------
def cone_correction(rho: float, z: float, radius: float, lower: bool = False,
                    tol: float = 1e-12, m_cap: int = 1 << 16) -> float:
    """Normalized solid angle at (rho, 0, z) of the cone over the circle
    of the given radius in the z = 0 plane (area of the spherical patch
    over 2 pi epsilon^2); ``lower`` selects the patch below the plane.

    The patch is swept with the vertical polar axis: per azimuth the polar
    angle of the ray to the circle point, weighted by the azimuth-map
    Jacobian, integrated by the periodic trapezoid rule with doubling.
    """
    if rho >= radius:
        if abs(z) < 1e-12:
            raise AssemblyError("degenerate cone: apex on the base circle")
        raise AssemblyError("apex outside the base circle")
    if abs(z) < 1e-13:
        # apex in the base plane strictly inside: every ray to the circle is
        # horizontal, the patch is exactly a hemisphere regardless of rho
        return 1.0
    M = 64
    prev = None
    while M <= m_cap:
        tp = 2.0 * np.pi * np.arange(M) / M
        ct = np.cos(tp)
        vx = radius * ct - rho
        vy = radius * np.sin(tp)
        norm = np.sqrt(vx * vx + vy * vy + z * z)
        cphi = -z / norm
        jac = radius * (radius - rho * ct) / (vx * vx + vy * vy)
        integrand = (1.0 + cphi) if lower else (1.0 - cphi)
        val = float(np.mean(integrand * jac))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        M *= 2
    raise AssemblyError("cone quadrature did not converge")


def diagonal_jump(boundary: DiscretizedBoundary, rule_order: int = 10) -> DiagonalJump:
    """Solid-angle diagonal d_j for both domains.

    With the shared normal (toward the lower medium) the truncated boundary
    relation for the upper domain reads (K + diag(d_up)) u = S phi and for
    the lower domain (K - diag(d_low)) u = S phi, where

        d_up  = cone_up  - quad     d_low = cone_low + quad

    quad is the singular quadrature of the plain zero-mode Laplace
    double-layer over the curve and the cone terms are the normalized solid
    angles standing in for the discarded outer boundaries.  Both diagonals
    equal 2 - (interior solid angle)/(2 pi): 1 at smooth interior nodes,
    between 0 and 2 at corners.  The endpoint node on the outer rim takes
    the degenerate-cone limit 1/2 for either domain.
    """
    rule = alpert_rule(rule_order)
    N = boundary.n
    h = boundary.mesh.h
    plain = boundary.nodes.plain()
    radius = boundary.curve.point(np.array([boundary.curve.length]))[0][0]

    def quad_row(l):
        t_l = l * h
        total = 0.0
        for lo, hi, n_int, end in ((0.0, t_l, l, "hi"), (t_l, 1.0, N - 1 - l, "lo")):
            if n_int <= 0:
                continue
            t_q, w, _ = piece_nodes(rule, lo, hi, n_int, singular_end=end)
            smp = boundary.sample(t_q).plain()
            tgt = plain.take(np.full(t_q.size, l))
            keep = _distinct_pairs(tgt, smp)
            if not np.all(keep):
                t_q, w = t_q[keep], w[keep]
                smp, tgt = smp.take(keep), tgt.take(keep)
            _, Dn = laplace_modal_kernels(tgt, smp, 0)
            vals = 2.0 * SQRT_2PI * smp.rho * smp.jac * Dn[:, 0].real
            total += float(np.sum(w * vals))
        return total

    quad = np.array([quad_row(l) for l in range(N)])
    cone_up = np.empty(N)
    cone_lo = np.empty(N)
    for j in range(N):
        rho_j = boundary.nodes.rho[j]
        z_j = boundary.nodes.z[j]
        if j == N - 1:
            cone_up[j] = cone_lo[j] = 0.5  # apex on the rim: patch limit
        else:
            cone_up[j] = cone_correction(rho_j, z_j, radius, lower=False)
            cone_lo[j] = cone_correction(rho_j, z_j, radius, lower=True)
    return DiagonalJump(upper=cone_up - quad, lower=cone_lo + quad)


# ---------------------------------------------------------------------------
# NtD maps
# ---------------------------------------------------------------------------
def ntd_matrices(mats: LayerMatrices, diag: np.ndarray, lower: bool = False,
                 cond_limit: float = 1e12):
    """Per-mode flux-to-trace maps with condition estimates.

    Upper domain: (K + diag)^{-1} S; lower domain: (K - diag)^{-1} S.  Both
    act on the shared-normal flux phi = |r'| du/dnu_c and return traces.
    """
    sign = -1.0 if lower else 1.0
    out = []
    for n in range(mats.n_modes + 1):
        A = mats.K[n] + sign * np.diag(diag.astype(complex))
        anorm = np.abs(A).sum(axis=0).max()
        lu, piv = scipy.linalg.lu_factor(A)
        rcond = scipy.linalg.lapack.zgecon(lu, anorm)[0]
        cond = 1.0 / max(rcond, 1e-300)
        if cond > cond_limit:
            logger.warning("mode %d: NtD condition estimate %.2e "
                           "(possible spurious resonance or bad layer "
                           "parameters)", n, cond)
        ntd = scipy.linalg.lu_solve((lu, piv), mats.S[n])
        out.append(NtDMatrix(n, ntd, cond))
    return out
