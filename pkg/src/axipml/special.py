"""Complex-argument special functions for the modal Laplace kernels.

Complete elliptic integrals K(m), E(m) are computed by the arithmetic-
geometric mean with the branch choice Re(b/a) >= 0 per step, valid for
complex parameter m off the [1, inf) cut.  Half-integer-degree Legendre
functions of the second kind Q_{n-1/2}(chi) are seeded at n = 0, 1 with
elliptic-integral closed forms and extended in n either by the forward
three-term recurrence (chi near 1, where it is benign) or by a backward
ratio continued fraction normalized against Q_{-1/2} (elsewhere, where
forward recursion is unstable).
"""

from __future__ import annotations

import numpy as np


class SingularPairError(ValueError):
    """Raised when coordinates coincide and the modal kernels blow up."""


def ellip_ke(m, one_minus_m=None):
    """Complete elliptic integrals (K(m), E(m)) for complex parameter m.

    Passing one_minus_m avoids cancellation when m is within roundoff of 1
    (the log singularity of K makes that difference the controlling scale).
    """
    m = np.asarray(m, dtype=complex)
    omm = 1.0 - m if one_minus_m is None else np.asarray(one_minus_m, dtype=complex)
    a = np.ones_like(m)
    b = np.sqrt(omm)
    bad = (b / a).real < 0
    b[bad] = -b[bad]
    c2sum = 0.5 * m
    pw = 0.5
    for _ in range(64):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        bad = (b / a).real < 0
        b[bad] = -b[bad]
        pw *= 2.0
        c2sum = c2sum + pw * c * c
        if np.max(np.abs(c)) <= 1e-17 * np.min(np.abs(a)):
            break
    K = 0.5 * np.pi / a
    E = K * (1.0 - c2sum)
    return K, E


def _q_seeds(chi, chim1):
    """Q_{-1/2}(chi) and Q_{1/2}(chi) via elliptic integrals."""
    m = 2.0 / (chi + 1.0)
    K, E = ellip_ke(m, one_minus_m=chim1 / (chi + 1.0))
    s = np.sqrt(m)  # sqrt(2/(chi+1))
    q0 = s * K
    q1 = chi * s * K - np.sqrt(2.0 * (chi + 1.0)) * E
    return q0, q1


def legendre_q_half(chi, n_max: int, chim1=None) -> np.ndarray:
    """Q_{n-1/2}(chi) for n = 0..n_max, complex chi off [-1, 1].

    Returns an array of shape (len(chi), n_max+1).  Raises SingularPairError
    when chi is within 1e-12 of 1 (coincident meridian points).  chim1, when
    supplied, is an accurately computed chi - 1 (the natural quantity near
    the kernel diagonal) used to stabilize the near-singular regime.
    """
    chi = np.atleast_1d(np.asarray(chi, dtype=complex))
    if chim1 is None:
        chim1 = chi - 1.0
        # without an accurately-known chi - 1 the values are unreliable here
        if np.any(np.abs(chim1) < 1e-12):
            raise SingularPairError("chi within 1e-12 of 1: coincident points")
    else:
        chim1 = np.atleast_1d(np.asarray(chim1, dtype=complex))
        if np.any(np.abs(chim1) == 0.0):
            raise SingularPairError("coincident meridian points (chi = 1)")
    P = chi.size
    out = np.empty((P, n_max + 1), dtype=complex)

    t = chi + np.sqrt(chim1) * np.sqrt(chi + 1.0)
    small = np.abs(t) < 1.0
    t[small] = 1.0 / t[small]          # enforce |t| >= 1 branch
    delta = np.log(np.abs(t))
    q0, q1 = _q_seeds(chi, chim1)

    fwd = n_max * delta <= 4.0
    if np.any(fwd):
        c = chi[fwd]
        q = out[fwd]
        q[:, 0] = q0[fwd]
        if n_max >= 1:
            q[:, 1] = q1[fwd]
        for n in range(1, n_max):
            # (n+1/2) Q_{n+1/2} = 2 n chi Q_{n-1/2} - (n-1/2) Q_{n-3/2}
            q[:, n + 1] = (2.0 * n * c * q[:, n] - (n - 0.5) * q[:, n - 1]) / (n + 0.5)
        out[fwd] = q

    bwd = ~fwd
    if np.any(bwd):
        c = chi[bwd]
        tb = t[bwd]
        db = delta[bwd]
        buf = int(np.ceil(44.0 / max(np.min(db), 1e-12)))
        buf = min(buf, 200000)
        k_start = n_max + buf
        r = 1.0 / tb                      # asymptotic ratio Q_{k+1/2}/Q_{k-1/2}
        ratios = np.empty((c.size, n_max + 1), dtype=complex)
        for k in range(k_start, 0, -1):
            r = (k - 0.5) / (2.0 * k * c - (k + 0.5) * r)
            if k - 1 <= n_max:
                ratios[:, k - 1] = r
        q = np.empty((c.size, n_max + 1), dtype=complex)
        q[:, 0] = q0[bwd]
        with np.errstate(under="ignore"):
            for n in range(n_max):
                q[:, n + 1] = q[:, n] * ratios[:, n]
        out[bwd] = q
    return out


def legendre_q_half_deriv(chi, q: np.ndarray, chim1=None) -> np.ndarray:
    """dQ_{n-1/2}/dchi for n = 0..n_max-1 from values q[:, 0..n_max].

    Uses (chi^2-1) Q'_nu = (nu+1)(Q_{nu+1} - chi Q_nu) with nu = n-1/2;
    chi^2 - 1 is formed as chim1 (chi + 1) to survive chi within roundoff
    of 1.
    """
    chi = np.atleast_1d(np.asarray(chi, dtype=complex))[:, None]
    chim1 = chi - 1.0 if chim1 is None else \
        np.atleast_1d(np.asarray(chim1, dtype=complex))[:, None]
    n = np.arange(q.shape[1] - 1)[None, :]
    return (n + 0.5) * (q[:, 1:] - chi * q[:, :-1]) / (chim1 * (chi + 1.0))
