"""Hybrid Gauss-trapezoidal quadrature for log-singular integrands.

The rules combine a plain trapezoidal sum over interior grid points with two
endpoint correction blocks: Gauss-type off-grid nodes and weights near the
logarithmically singular end, and a second block near the regular end.  The
node/weight tables in ``_alpert_tables`` were solved to 40+ digits from the
moment conditions

    sum_k u_k v_k^mu          = -zeta(-mu, a)
    sum_k u_k v_k^mu ln(v_k)  =  zeta'(-mu, a)      mu = 0 .. order-1

(Hurwitz zeta), which make the rule exact through degree order-1 for
integrands of the form  smooth + smooth * log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._alpert_tables import LOG_RULES, REG_RULES


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class AlpertRule:
    """Endpoint-corrected trapezoidal rule of a given design order.

    reg_* blocks attach to a smooth endpoint, sing_* blocks to the
    log-singular endpoint; *_skip is the first pure-trapezoid index
    counted from the respective end.
    """

    order: int
    reg_nodes: np.ndarray
    reg_weights: np.ndarray
    reg_skip: int
    sing_nodes: np.ndarray
    sing_weights: np.ndarray
    sing_skip: int

    @property
    def n_reg(self) -> int:
        return len(self.reg_nodes)

    @property
    def n_sing(self) -> int:
        return len(self.sing_nodes)

    @property
    def min_intervals(self) -> int:
        """Fewest uniform grid intervals a sub-interval must carry."""
        extent = math.ceil(float(self.reg_nodes.max() + self.sing_nodes.max())) + 1
        return max(self.reg_skip + self.sing_skip, extent,
                   self.n_reg + self.n_sing - 1)


def alpert_rule(order: int) -> AlpertRule:
    """Tabulated rule of the requested order (2, 6, or 10)."""
    if order not in LOG_RULES:
        raise QuadratureError(f"unsupported Alpert rule order {order};"
                              f" available: {sorted(LOG_RULES)}")
    a_reg, vr, wr = REG_RULES[order]
    a_sing, vs, ws = LOG_RULES[order]
    return AlpertRule(order,
                      np.asarray(vr), np.asarray(wr), a_reg,
                      np.asarray(vs), np.asarray(ws), a_sing)


def piece_nodes(rule: AlpertRule, lo: float, hi: float, n_intervals: int,
                singular_end: str):
    """Quadrature nodes/weights on [lo, hi] with a log singularity at one end.

    n_intervals is the number of uniform grid cells available on the piece;
    when it is below the rule's minimum the piece is re-gridded with
    h1 = (hi - lo) / (min_intervals) so the correction stencils fit.
    Returns (nodes, weights, on_grid) where on_grid flags nodes that coincide
    with the global uniform grid (True only when no re-gridding happened).
    """
    if singular_end not in ("lo", "hi"):
        raise QuadratureError("singular_end must be 'lo' or 'hi'")
    length = hi - lo
    if length <= 0:
        raise QuadratureError("empty integration piece")
    regridded = n_intervals < rule.min_intervals
    n = rule.min_intervals if regridded else n_intervals
    h = length / n
    if singular_end == "lo":
        sing_pos = lo + rule.sing_nodes * h
        reg_pos = hi - rule.reg_nodes * h
        i0, i1 = rule.sing_skip, n - rule.reg_skip
    else:
        sing_pos = hi - rule.sing_nodes * h
        reg_pos = lo + rule.reg_nodes * h
        i0, i1 = rule.reg_skip, n - rule.sing_skip
    interior = lo + np.arange(i0, i1 + 1) * h
    nodes = np.concatenate([sing_pos, interior, reg_pos])
    weights = np.concatenate([rule.sing_weights * h,
                              np.full(interior.size, h),
                              rule.reg_weights * h])
    on_grid = np.zeros(nodes.size, dtype=bool)
    if not regridded:
        on_grid[rule.n_sing:rule.n_sing + interior.size] = True
    return nodes, weights, on_grid


def integrate_split(f, t_l: float, n_nodes: int, rule: AlpertRule) -> float:
    """Integrate f over [0, 1] with a log singularity at the grid node t_l.

    The integral is split at t_l and each piece handled by the endpoint-
    corrected rule; f is evaluated directly at all quadrature nodes.
    """
    h = 1.0 / (n_nodes - 1)
    l = round(t_l / h)
    if abs(l * h - t_l) > 1e-12:
        raise QuadratureError(f"t_l={t_l} is not a grid node for N={n_nodes}")
    total = 0.0
    if l > 0:
        nodes, w, _ = piece_nodes(rule, 0.0, t_l, l, singular_end="hi")
        total = total + np.sum(w * f(nodes))
    if l < n_nodes - 1:
        nodes, w, _ = piece_nodes(rule, t_l, 1.0, n_nodes - 1 - l, singular_end="lo")
        total = total + np.sum(w * f(nodes))
    return total


def trapezoid_periodic(samples, period: float = 2.0 * np.pi):
    """Spectrally accurate mean-times-period rule for periodic integrands."""
    samples = np.asarray(samples)
    if samples.shape[-1] < 2:
        raise QuadratureError("need at least 2 samples per period")
    return samples.mean(axis=-1) * period


# ---------------------------------------------------------------------------
# Lagrange interpolation from off-grid nodes to the Nystrom grid
# ---------------------------------------------------------------------------
def _barycentric_row(x: float, grid: np.ndarray, i0: int, order: int):
    idx = np.arange(i0, i0 + order)
    pts = grid[idx]
    d = x - pts
    hit = np.abs(d) < 1e-14 * max(1.0, abs(x))
    if np.any(hit):
        w = np.zeros(order)
        w[np.argmax(hit)] = 1.0
        return idx, w
    # barycentric weights for (possibly nonuniform) points
    bw = np.ones(order)
    for k in range(order):
        diff = pts[k] - np.delete(pts, k)
        bw[k] = 1.0 / np.prod(diff)
    w = bw / d
    return idx, w / w.sum()


def interp_to_grid(targets, grid, order: int = 10, blocks=None) -> np.ndarray:
    """Dense interpolation matrix mapping grid values to off-grid targets.

    ``blocks`` optionally lists (start, stop) node-index ranges of the smooth
    segments; stencils are confined to the block containing each target and
    shift inward (one-sided) near block ends so they never straddle a corner.
    """
    grid = np.asarray(grid, dtype=float)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    N = grid.size
    if blocks is None:
        blocks = [(0, N - 1)]
    P = np.zeros((targets.size, N))
    for r, x in enumerate(targets):
        blk = None
        for (b0, b1) in blocks:
            if grid[b0] - 1e-12 <= x <= grid[b1] + 1e-12:
                blk = (b0, b1)
                break
        if blk is None:
            raise QuadratureError(f"target {x} outside every smooth block")
        b0, b1 = blk
        npts = b1 - b0 + 1
        p = min(order, npts)
        # nearest-node anchored stencil, clipped into the block
        jx = int(np.searchsorted(grid, x)) - 1
        i0 = min(max(jx - p // 2 + 1, b0), b1 - p + 1)
        idx, w = _barycentric_row(x, grid, i0, p)
        P[r, idx] = w
    return P
