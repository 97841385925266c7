#!/usr/bin/env python3
"""Regenerate src/axipml/_alpert_tables.py from the moment conditions.

The endpoint-correction blocks of the hybrid Gauss-trapezoidal rules satisfy

    sum_k u_k v_k^mu          = -zeta(-mu, a)       (regular + log blocks)
    sum_k u_k v_k^mu ln(v_k)  =  zeta'(-mu, a)      (log blocks only)

for mu = 0..order-1, with zeta the Hurwitz zeta function and `a` the first
pure-trapezoid index.  Square systems (regular blocks, log blocks of order
2 and 6) are solved by damped Newton in 60-digit arithmetic.  The order-10
log block is obtained by node reduction: start from a 2*order fixed-node
rule whose weights solve the (linear) moment system, then repeatedly delete
the smallest-weight node and re-solve the underdetermined system with
least-norm Gauss-Newton until no further deletion converges.

Run time is a few minutes; output overwrites _alpert_tables.py.
"""

import pathlib
import sys

import numpy as np
from mpmath import exp as mpexp
from mpmath import log as mplog
from mpmath import lu_solve, matrix, mp, mpf, norm, zeta

mp.dps = 60
OUT = pathlib.Path(__file__).resolve().parents[1] / "src/axipml/_alpert_tables.py"

# (order, a, seed nodes, seed weights) for the square Newton solves; seeds are
# coarse double-precision solutions of the same systems.
REG_SEEDS = {
    2: (1, [1 / 6], [0.5]),
    6: (3, [0.218054, 1.001182, 1.997581], [0.5408, 0.9517, 1.0075]),
    10: (5, [0.175293, 0.863649, 1.88284, 2.970847, 3.998659],
         [0.486, 0.898, 1.023, 1.0, 1.0]),
}
LOG_SEEDS = {
    2: (2, [0.11504, 0.936546], [0.391337, 1.108663]),
    6: (6, [0.015484, 0.209727, 0.87476, 2.117678, 3.648393, 4.964364],
        [0.117, 0.465, 0.85, 1.06, 1.04, 1.0]),
}
LOG10_A = 10


def _moment_rhs(m, a, with_log):
    rhs = [-zeta(-mu, a) for mu in range(m)]
    if with_log:
        rhs += [zeta(-mu, a, 1) for mu in range(m)]
    return matrix(rhs)


def _fj(x, j, m, rhs, with_log):
    v = [mpexp(x[i]) for i in range(j)]
    u = [x[j + i] for i in range(j)]
    lv = [mplog(t) for t in v]
    nrow = 2 * m if with_log else m
    F = matrix(nrow, 1)
    J = matrix(nrow, 2 * j)
    vp = [[mpf(1)] * j]
    for mu in range(1, m):
        vp.append([vp[-1][k] * v[k] for k in range(j)])
    for mu in range(m):
        F[mu] = sum(u[k] * vp[mu][k] for k in range(j)) - rhs[mu]
        for k in range(j):
            J[mu, k] = u[k] * mu * vp[mu][k]
            J[mu, j + k] = vp[mu][k]
        if with_log:
            F[m + mu] = sum(u[k] * vp[mu][k] * lv[k] for k in range(j)) - rhs[m + mu]
            for k in range(j):
                J[m + mu, k] = u[k] * vp[mu][k] * (mu * lv[k] + 1)
                J[m + mu, j + k] = vp[mu][k] * lv[k]
    return F, J


def _newton(m, a, v0, u0, with_log, iters=300):
    """Damped (least-norm if underdetermined) Newton on the moment system."""
    j = len(v0)
    rhs = _moment_rhs(m, a, with_log)
    x = matrix([mplog(mpf(float(t))) for t in v0] + [mpf(float(t)) for t in u0])
    F, J = _fj(x, j, m, rhs, with_log)
    res = norm(F, 'inf')
    nrow = 2 * m if with_log else m
    for _ in range(iters):
        try:
            if 2 * j == nrow:
                dx = lu_solve(J, F)
            else:
                JJt = J * J.T
                for i in range(nrow):
                    JJt[i, i] += mpf(10) ** (-2 * mp.dps + 10)
                dx = J.T * lu_solve(JJt, F)
        except Exception:
            return None, res
        lam = mpf(1)
        moved = False
        for _ in range(60):
            xt = matrix([x[i] - lam * dx[i] for i in range(2 * j)])
            Ft, Jt = _fj(xt, j, m, rhs, with_log)
            rt = norm(Ft, 'inf')
            if rt < res:
                x, F, J, res = xt, Ft, Jt, rt
                moved = True
                break
            lam /= 2
        if not moved or res < mpf(10) ** (-45):
            break
    return x, res


def _solve_square(m, a, v0, u0, with_log):
    x, res = _newton(m, a, v0, u0, with_log)
    if x is None or res > mpf(10) ** (-40):
        raise RuntimeError(f"Newton failed (order {m}, log={with_log}): res={res}")
    j = len(v0)
    pairs = sorted(((mpexp(x[i]), x[j + i]) for i in range(j)), key=lambda p: float(p[0]))
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _solve_log10():
    m, a = 10, LOG10_A
    nodes = np.r_[np.geomspace(0.004, 0.9, 7), np.linspace(1.3, a + 0.6, 13)]
    j = len(nodes)
    rhs = _moment_rhs(m, a, True)
    A = matrix(2 * m, j)
    for mu in range(m):
        for k in range(j):
            vk = mpf(float(nodes[k]))
            A[mu, k] = vk**mu
            A[m + mu, k] = vk**mu * mplog(vk)
    w = lu_solve(A.T * A, A.T * rhs)
    v = [mpf(float(t)) for t in nodes]
    u = [w[i] for i in range(j)]
    while True:
        x, res = _newton(m, a, v, u, True)
        if x is None or res > mpf(10) ** (-40):
            raise RuntimeError("log10 seed refinement failed")
        v = [mpexp(x[i]) for i in range(j)]
        u = [x[j + i] for i in range(j)]
        if j == m:
            break
        k = min(range(j), key=lambda i: abs(u[i]))
        v2 = [v[i] for i in range(j) if i != k]
        u2 = [u[i] for i in range(j) if i != k]
        x2, r2 = _newton(m, a, v2, u2, True)
        if x2 is None or r2 > mpf(10) ** (-40):
            break
        j -= 1
        v = [mpexp(x2[i]) for i in range(j)]
        u = [x2[j + i] for i in range(j)]
    pairs = sorted(zip(v, u), key=lambda p: float(p[0]))
    return a, [p[0] for p in pairs], [p[1] for p in pairs]


def main():
    reg, log = {}, {}
    for m, (a, v0, u0) in REG_SEEDS.items():
        v, u = _solve_square(m, a, v0, u0, with_log=False)
        reg[m] = (a, v, u)
        print(f"reg order {m}: j={len(v)} a={a}")
    for m, (a, v0, u0) in LOG_SEEDS.items():
        v, u = _solve_square(m, a, v0, u0, with_log=True)
        log[m] = (a, v, u)
        print(f"log order {m}: j={len(v)} a={a}")
    a, v, u = _solve_log10()
    log[10] = (a, v, u)
    print(f"log order 10: j={len(v)} a={a}")

    lines = [
        '"""Endpoint-correction tables for the hybrid Gauss-trapezoidal rules.',
        "",
        "Generated by tools/gen_alpert_tables.py from the Hurwitz-zeta moment",
        "conditions (see axipml.quadrature); node/weight values stored as exact",
        "hex float literals.  Each entry: (skip_index, nodes, weights).",
        '"""',
        "",
        "",
        "def _h(s):",
        "    return float.fromhex(s)",
        "",
        "",
    ]
    for name, table in (("REG_RULES", reg), ("LOG_RULES", log)):
        lines.append(f"{name} = {{")
        for m in sorted(table):
            a, v, u = table[m]
            vh = ", ".join(f"_h({float.hex(float(t))!r})" for t in v)
            uh = ", ".join(f"_h({float.hex(float(t))!r})" for t in u)
            lines.append(f"    {m}: ({a},")
            lines.append(f"        [{vh}],")
            lines.append(f"        [{uh}]),")
        lines.append("}")
        lines.append("")
    OUT.write_text("\n".join(lines))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    sys.exit(main())
