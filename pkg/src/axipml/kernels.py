"""Stretched-coordinate Helmholtz kernels and their azimuthal modes.

A kernel between two meridian points is a function of the angle gap dtheta
only, so each source-target pair yields a full table of azimuthal modes at
once.  Well-separated pairs are sampled on the angle circle and transformed
by FFT.  Close pairs split each kernel into a Laplace amplitude (modes from
half-integer Legendre functions) times a trigonometric factor: the factor's
modes come from an FFT and the product modes from the convolution theorem,
while the smooth remainder goes through the FFT directly.  Inside the
absorbing layer the plain trigonometric factors grow like exp(|Im q|), so
they are replaced by bounded surrogates exp(iq) * (truncated Taylor series
of factor * exp(-iq)); the replacement shifts terms between the convolution
and FFT routes without changing their sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .geometry import BoundaryPoints
from .special import SingularPairError, legendre_q_half, legendre_q_half_deriv

SQRT_2PI = math.sqrt(2.0 * math.pi)

# relative mode magnitude below which FFT tails / convolution factors are
# considered resolved
FFT_TAIL_TOL = 1e-13
CONV_TAIL_TOL = 1e-14


class KernelConvergenceError(RuntimeError):
    """Azimuthal sampling cap reached before the mode tail converged."""

    def __init__(self, tail: float, m_cap: int):
        super().__init__(f"mode tail {tail:.3e} not converged at M={m_cap}")
        self.tail = tail
        self.m_cap = m_cap


@dataclass(frozen=True)
class KernelOptions:
    """Dispatch and stabilization controls for modal kernel synthesis."""

    taylor_order: int = 5          # L
    substitute: bool = True        # bounded surrogates inside the PML
    m_start: int = 64              # initial azimuthal sample count
    m_cap: int = 4096
    far_factor: float = 0.2        # separation threshold multiplier
    local_scale: float = 0.0       # h * L_AB of the hosting grid, if any
    chunk: int = 2048


# ---------------------------------------------------------------------------
# distances and pointwise kernels
# ---------------------------------------------------------------------------
@dataclass
class ComplexDistance:
    meridian: np.ndarray      # complex gap in the half-plane
    augment: np.ndarray       # 4 rho~ rho~' sin^2(dtheta/2)
    total: np.ndarray         # branch-cut sqrt of meridian^2 + augment


def meridian_gap2(tgt: BoundaryPoints, src: BoundaryPoints) -> np.ndarray:
    """Squared complex meridian distance, formed from direct differences."""
    dr = tgt.rho_c - src.rho_c
    dz = tgt.z_c - src.z_c
    return dr * dr + dz * dz


def complex_distance(tgt: BoundaryPoints, src: BoundaryPoints, dtheta) -> ComplexDistance:
    """Complexified 3D distance with the principal-branch square root.

    The azimuthal part enters through sin^2(dtheta/2), never through a
    difference of cosines, and the meridian part through coordinate gaps,
    so nearby points suffer no cancellation.
    """
    dtheta = np.asarray(dtheta, dtype=float)
    dm2 = meridian_gap2(tgt, src)
    s2 = np.sin(0.5 * dtheta) ** 2
    aug = 4.0 * tgt.rho_c * src.rho_c * s2
    tot2 = dm2 + aug
    if np.any(np.abs(tot2) == 0.0):
        raise SingularPairError("coincident points at dtheta = 0")
    return ComplexDistance(np.sqrt(dm2), aug, np.sqrt(tot2))


@dataclass
class KernelSplit:
    """Singular amplitudes and trigonometric factors at one angle gap.

    single_amp * (cos_q + i sin_q) is the stretched Helmholtz kernel;
    double_amp * (cos_qsin + i sin_qcos) is its source-normal derivative.
    """

    single_amp: np.ndarray    # 1/(4 pi R)
    double_amp: np.ndarray    # directional-derivative amplitude
    cos_q: np.ndarray         # cos(omega R)
    sin_q: np.ndarray
    cos_qsin: np.ndarray      # cos q + q sin q
    sin_qcos: np.ndarray      # sin q - q cos q


def _amplitudes(tgt, src, dtheta):
    """(R, single_amp, double_amp) on the angle circle, stabilized."""
    dtheta = np.asarray(dtheta, dtype=float)
    dm2 = meridian_gap2(tgt, src)
    s2 = np.sin(0.5 * dtheta) ** 2
    R = np.sqrt(dm2 + 4.0 * tgt.rho_c * src.rho_c * s2)
    # nu'_c . (r~' - r~): radial part (rho~' - rho~ cos) = -gap + 2 rho~ sin^2
    rad = -(tgt.rho_c - src.rho_c) + 2.0 * tgt.rho_c * s2
    num = src.nu_c_rho * rad + src.nu_c_z * (src.z_c - tgt.z_c)
    Z = 1.0 / (4.0 * np.pi * R)
    D = -num / (4.0 * np.pi * R**3)
    return R, Z, D


def kernel_split(tgt: BoundaryPoints, src: BoundaryPoints, dtheta, omega: float) -> KernelSplit:
    R, Z, D = _amplitudes(tgt, src, dtheta)
    q = omega * R
    cq, sq = np.cos(q), np.sin(q)
    return KernelSplit(Z, D, cq, sq, cq + q * sq, sin_minus_qcos(q))


def kernel_values(tgt: BoundaryPoints, src: BoundaryPoints, dtheta, omega: float):
    """Stretched Helmholtz kernel and its source-normal derivative kernel."""
    R, Z, D = _amplitudes(tgt, src, dtheta)
    q = omega * R
    e = np.exp(1j * q)
    return Z * e, D * (1.0 - 1j * q) * e


# ---------------------------------------------------------------------------
# Taylor surrogates
# ---------------------------------------------------------------------------
def sin_minus_qcos(q):
    """sin q - q cos q, series-evaluated near 0 where the direct form
    cancels catastrophically (true value ~ q^3/3, direct noise ~ eps)."""
    q = np.asarray(q)
    out = np.sin(q) - q * np.cos(q)
    small = np.abs(q) < 0.5
    if np.any(small):
        qs = q[small]
        q2 = qs * qs
        # sum_{k>=1} (-1)^{k+1} 2k q^{2k+1} / (2k+1)!
        term = qs * q2 / 3.0
        acc = term.copy()
        for k in range(2, 12):
            term = term * (-q2) / ((2 * k + 1) * (2 * k - 2))
            acc += term
        out[small] = acc
    return out


def taylor_coefficients(order: int):
    """Series coefficients of cos(q) e^{-iq} and (cos q + q sin q) e^{-iq}.

    cos(q) e^{-iq} = 1/2 + e^{-2iq}/2, and the second expands as
    1/2 + e^{-2iq}/2 - (iq/2)(1 - e^{-2iq}); coefficients follow termwise.
    """
    k = np.arange(order + 1, dtype=float)
    a = np.empty(order + 1, dtype=complex)
    a[0] = 1.0
    if order >= 1:
        fact = np.array([float(math.factorial(int(j))) for j in k])
        a[1:] = 0.5 * (-2j) ** k[1:] / fact[1:]
        b = a.copy()
        b[1:] += 0.5j * (-2j) ** (k[1:] - 1) / np.array(
            [float(math.factorial(int(j) - 1)) for j in k[1:]])
        b[1] -= 0.5j
    else:
        b = a.copy()
    return a, b


@dataclass(frozen=True)
class TaylorSubstitute:
    """Bounded replacements for the trigonometric factors at complex q."""

    order: int
    coeff_single: np.ndarray = field(repr=False, default=None)
    coeff_double: np.ndarray = field(repr=False, default=None)
    tail_single: np.ndarray = field(repr=False, default=None)
    tail_double: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        a, b = taylor_coefficients(self.order + 30)
        object.__setattr__(self, "coeff_single", a[: self.order + 1])
        object.__setattr__(self, "coeff_double", b[: self.order + 1])
        object.__setattr__(self, "tail_single", a[self.order + 1:])
        object.__setattr__(self, "tail_double", b[self.order + 1:])

    def _poly(self, coeff, q):
        out = np.zeros_like(q)
        for c in coeff[::-1]:
            out = out * q + c
        return out

    def _patch_small(self, out, q, tail, trig):
        """Overwrite |q| < 3 entries with the cancellation-free identity
        complement = (plain factor complement) + e^{iq} * (series tail).

        The direct difference subtracts nearly equal quantities there (the
        deviation from the plain trigonometric factor is only O(q^{L+1})).
        """
        small = np.abs(q) < 3.0
        if np.any(small):
            qs = q[small]
            t = self._poly(tail, qs) * qs ** (self.order + 1)
            out[small] = 1j * trig(qs) + np.exp(1j * qs) * t
        return out

    def surrogate_single(self, q):
        """e^{iq} T_L[cos(q) e^{-iq}]; stays O(poly) where cos q blows up."""
        return np.exp(1j * q) * self._poly(self.coeff_single, q)

    def complement_single(self, q):
        """e^{iq} - surrogate; the pair always sums to e^{iq} exactly."""
        q = np.asarray(q, dtype=complex)
        out = np.exp(1j * q) * (1.0 - self._poly(self.coeff_single, q))
        return self._patch_small(out, q, self.tail_single, np.sin)

    def surrogate_double(self, q):
        return np.exp(1j * q) * self._poly(self.coeff_double, q)

    def complement_double(self, q):
        """(1 - iq) e^{iq} - surrogate_double."""
        q = np.asarray(q, dtype=complex)
        out = np.exp(1j * q) * (1.0 - 1j * q - self._poly(self.coeff_double, q))
        return self._patch_small(out, q, self.tail_double, sin_minus_qcos)


def taylor_substitute(order: int = 5) -> TaylorSubstitute:
    if order < 0:
        raise ValueError("order must be >= 0")
    return TaylorSubstitute(order)


# ---------------------------------------------------------------------------
# Laplace modal kernels (semi-analytic)
# ---------------------------------------------------------------------------
_AXIS_CHI = 1e12


def laplace_modal_kernels(tgt: BoundaryPoints, src: BoundaryPoints, n_max: int,
                          reverse: bool = False):
    """Azimuthal modes of the Laplace amplitudes for each pair.

    Returns (Z_n, D_n) of shape (P, n_max+1); negative modes follow by
    evenness.  Uses Q_{n-1/2}(chi) with chi = 1 + gap^2 / (2 rho~ rho~')
    and its derivative for the 1/R^3 part.  With ``reverse`` the tuple
    gains D_n of the role-swapped pair (normal at tgt), sharing the
    Legendre tables: (Z_n, D_n, D_n_rev).
    """
    dm2 = meridian_gap2(tgt, src)
    pp = tgt.rho_c * src.rho_c
    P = dm2.size
    Zn = np.zeros((P, n_max + 1), dtype=complex)
    Dn = np.zeros((P, n_max + 1), dtype=complex)
    Dr = np.zeros((P, n_max + 1), dtype=complex) if reverse else None

    c0 = -(src.nu_c_rho * src.rho_c + src.nu_c_z * (src.z_c - tgt.z_c)) / (4 * np.pi)
    c1 = src.nu_c_rho * tgt.rho_c / (4 * np.pi)
    if reverse:
        c0r = -(tgt.nu_c_rho * tgt.rho_c + tgt.nu_c_z * (tgt.z_c - src.z_c)) / (4 * np.pi)
        c1r = tgt.nu_c_rho * src.rho_c / (4 * np.pi)

    axis = np.abs(2.0 * pp) <= np.abs(dm2) / _AXIS_CHI
    if np.any(axis):
        d = np.sqrt(dm2[axis])
        d3 = d**3
        Zn[axis, 0] = SQRT_2PI / (4 * np.pi * d)
        Dn[axis, 0] = c0[axis] * SQRT_2PI / d3
        if reverse:
            Dr[axis, 0] = c0r[axis] * SQRT_2PI / d3
        if n_max >= 1:
            Dn[axis, 1] = c1[axis] * math.sqrt(np.pi / 2.0) / d3
            if reverse:
                Dr[axis, 1] = c1r[axis] * math.sqrt(np.pi / 2.0) / d3
    gen = ~axis
    if np.any(gen):
        chim1 = dm2[gen] / (2.0 * pp[gen])
        chi = 1.0 + chim1
        q = legendre_q_half(chi, n_max + 1, chim1=chim1)
        qp = legendre_q_half_deriv(chi, q, chim1=chim1)
        sp = np.sqrt(pp[gen])[:, None]
        inv_r = (2.0 / SQRT_2PI) * q[:, : n_max + 1] / sp
        inv_r3 = -(2.0 / SQRT_2PI) * qp[:, : n_max + 1] / (pp[gen][:, None] * sp)
        chi_col = chi[:, None]
        cos_r3 = chi_col * inv_r3 - inv_r / (2.0 * pp[gen][:, None])
        Zn[gen] = inv_r / (4 * np.pi)
        Dn[gen] = c0[gen][:, None] * inv_r3 + c1[gen][:, None] * cos_r3
        if reverse:
            Dr[gen] = c0r[gen][:, None] * inv_r3 + c1r[gen][:, None] * cos_r3
    if reverse:
        return Zn, Dn, Dr
    return Zn, Dn


# ---------------------------------------------------------------------------
# modal kernel synthesis (FFT far / convolution close)
# ---------------------------------------------------------------------------
# tail magnitude (relative) above which an at-cap convolution is rejected
CONV_ACCEPT_TOL = 1e-6


def _fft_modes_batch(samplers, P, n_keep, opts):
    """Adaptively sampled azimuthal FFT modes for several channels at once.

    samplers: callable(theta (M,), rows) -> list of (len(rows), M) arrays.
    Returns a list of (P, n_keep+1) mode arrays; each row resolves at the
    smallest sample count whose Nyquist coefficient is negligible.
    """
    M = opts.m_start
    rows = np.arange(P)
    out = None
    while rows.size:
        theta = 2.0 * np.pi * np.arange(M) / M
        vals = samplers(theta, rows)
        ffts = [np.fft.fft(v, axis=-1) for v in vals]
        if out is None:
            out = [np.zeros((P, n_keep + 1), dtype=complex) for _ in ffts]
        tails = np.zeros(rows.size)
        for f in ffts:
            t = np.abs(f[:, M // 2]) / np.maximum(np.abs(f).max(axis=-1), 1e-300)
            tails = np.maximum(tails, t)
        done = tails <= FFT_TAIL_TOL
        if M >= opts.m_cap and not np.all(done):
            raise KernelConvergenceError(float(tails[~done].max()), opts.m_cap)
        for f, o in zip(ffts, out):
            o[rows[done], :] = f[done, : n_keep + 1] * (SQRT_2PI / M)
        rows = rows[~done]
        M *= 2
    if out is None:
        out = []
    return out


def _modal_far(tgt, src, omega, n_max, opts, reverse=False):
    def samplers(theta, rows):
        return list(_far_values(tgt.take(rows), src.take(rows), theta, omega,
                                reverse=reverse))

    return _fft_modes_batch(samplers, len(tgt), n_max, opts)


def _far_values(t, s, theta, omega, reverse=False):
    dm2 = meridian_gap2(t, s)[:, None]
    s2 = np.sin(0.5 * theta)[None, :] ** 2
    pp = (t.rho_c * s.rho_c)[:, None]
    R = np.sqrt(dm2 + 4.0 * pp * s2)
    gap = (t.rho_c - s.rho_c)[:, None]
    num = s.nu_c_rho[:, None] * (-gap + 2.0 * t.rho_c[:, None] * s2) \
        + (s.nu_c_z * (s.z_c - t.z_c))[:, None]
    q = omega * R
    e = np.exp(1j * q)
    G = e / (4.0 * np.pi * R)
    fac = (1.0 - 1j * q) * e / (4.0 * np.pi * R**3)
    K = -num * fac
    if not reverse:
        return G, K
    num_r = t.nu_c_rho[:, None] * (gap + 2.0 * s.rho_c[:, None] * s2) \
        + (t.nu_c_z * (t.z_c - s.z_c))[:, None]
    return G, K, -num_r * fac


def _close_samples(tgt, src, omega, theta, mode, ts, reverse=False):
    """Factor and remainder channel samples on the angle circle.

    Returns (f1, f3, r1, r3, r3_rev, steer1, steer3); r3_rev (role-swapped
    double-layer remainder) is None unless requested; the steering slots
    are reserved and currently always None (factors steer themselves).
    """
    dm2 = meridian_gap2(tgt, src)[:, None]
    s2 = np.sin(0.5 * theta)[None, :] ** 2
    pp = (tgt.rho_c * src.rho_c)[:, None]
    R = np.sqrt(dm2 + 4.0 * pp * s2)
    gap = (tgt.rho_c - src.rho_c)[:, None]
    num = src.nu_c_rho[:, None] * (-gap + 2.0 * tgt.rho_c[:, None] * s2) \
        + (src.nu_c_z * (src.z_c - tgt.z_c))[:, None]
    Z = 1.0 / (4.0 * np.pi * R)
    D = -num / (4.0 * np.pi * R**3)
    if reverse:
        num_r = tgt.nu_c_rho[:, None] * (gap + 2.0 * src.rho_c[:, None] * s2) \
            + (tgt.nu_c_z * (tgt.z_c - src.z_c))[:, None]
        Dr = -num_r / (4.0 * np.pi * R**3)
    q = omega * R
    if mode == "surrogate":
        e = np.exp(1j * q)
        p1 = ts._poly(ts.coeff_single, q)
        p3 = ts._poly(ts.coeff_double, q)
        c1 = ts._patch_small(e * (1.0 - p1), q, ts.tail_single, np.sin)
        c3 = ts._patch_small(e * (1.0 - 1j * q - p3), q,
                             ts.tail_double, sin_minus_qcos)
        r3r = Dr * c3 if reverse else None
        return e * p1, e * p3, Z * c1, D * c3, r3r, None, None
    cq, sq = np.cos(q), np.sin(q)
    f1 = cq
    f3 = cq + q * sq
    h4 = 1j * sin_minus_qcos(q)
    r1 = Z * (1j * sq)
    r3 = D * h4
    r3r = Dr * h4 if reverse else None
    return f1, f3, r1, r3, r3r, None, None


def _close_batch(tgt, src, omega, n_max, ffts, steer, reverse):
    """Finish resolved close pairs: convolution + smooth remainder."""
    f1m, f3m, r1m, r3m = ffts[:4]
    M = f1m.shape[1]
    mags = np.maximum(np.abs(steer[0]), np.abs(steer[1]))
    floor = CONV_TAIL_TOL * mags.max(axis=1)
    half = np.arange(M)
    half = np.minimum(half, M - half)  # symmetric index distance
    sig = mags > floor[:, None]
    m_h = int(np.max(np.where(sig.any(axis=0), half[None, :], 0), initial=1))
    m_h = int(np.clip(m_h, 1, M // 2 - 1))

    lap = laplace_modal_kernels(tgt, src, n_max + m_h, reverse=reverse)
    idx = np.concatenate([np.arange(M - m_h, M), np.arange(m_h + 1)])
    base = n_max + 2 * m_h  # position of mode 0 in the full convolution
    sl = slice(base, base + n_max + 1)

    def conv(modal, factor):
        sym = np.concatenate([modal[:, :0:-1], modal], axis=1)
        return fftconvolve(sym, factor[:, idx], mode="full", axes=-1)[:, sl]

    S = conv(lap[0], f1m) / SQRT_2PI + r1m[:, : n_max + 1]
    K = conv(lap[1], f3m) / SQRT_2PI + r3m[:, : n_max + 1]
    if not reverse:
        return S, K
    Kr = conv(lap[2], f3m) / SQRT_2PI + ffts[4][:, : n_max + 1]
    return S, K, Kr


def _modal_close_group(tgt, src, omega, n_max, opts, mode, reverse=False):
    """Convolution route: Laplace modes x trig-factor modes + smooth remainder.

    mode 'plain':     original trigonometric factors throughout.  Entire on
                      the angle circle, so benign at unstretched coordinates;
                      at stretched coordinates their huge magnitude makes the
                      relative truncation of the convolution discard an
                      absolute tail ~ e^{|Im q|} eps, which is the original
                      instability the surrogates remove.
    mode 'surrogate': bounded Taylor surrogates (stretched coordinates).

    Rows resolve independently: each is finished at the smallest sample
    count M whose factor spectrum decays below the convolution tolerance
    (remainder channels at the looser FFT tolerance).
    """
    P = len(tgt)
    ts = taylor_substitute(opts.taylor_order)
    out = [np.empty((P, n_max + 1), dtype=complex)
           for _ in range(3 if reverse else 2)]
    remaining = np.arange(P)
    M = opts.m_start
    while remaining.size:
        theta = 2.0 * np.pi * np.arange(M) / M
        t = tgt.take(remaining)
        s = src.take(remaining)
        f1, f3, r1, r3, r3r, st1, st3 = _close_samples(
            t, s, omega, theta, mode, ts, reverse=reverse)
        vals = [f1, f3, r1, r3] + ([r3r] if reverse else [])
        chans = [np.fft.fft(v, axis=-1) * (SQRT_2PI / M) for v in vals]
        steer = chans[:2] if st1 is None else [
            np.fft.fft(st1, axis=-1) * (SQRT_2PI / M),
            np.fft.fft(st3, axis=-1) * (SQRT_2PI / M)]
        tails = np.zeros(remaining.size)
        for f in chans[2:]:
            tt = np.abs(f[:, M // 2]) / np.maximum(np.abs(f).max(axis=-1), 1e-300)
            tails = np.maximum(tails, tt / FFT_TAIL_TOL)
        for f in steer:
            tt = np.abs(f[:, M // 2]) / np.maximum(np.abs(f).max(axis=-1), 1e-300)
            tails = np.maximum(tails, tt / CONV_TAIL_TOL)
        done = tails <= 1.0
        if M >= 1024:
            # surrogate factors inside the layer carry a small non-analytic
            # floor that decays very slowly in M; once it is this far below
            # the kernel scale, further doubling buys nothing measurable
            done |= tails * CONV_TAIL_TOL <= 3e-12
        if M >= opts.m_cap:
            worst = float(tails[~done].max(initial=0.0)) * CONV_TAIL_TOL
            if worst > CONV_ACCEPT_TOL:
                raise KernelConvergenceError(worst, opts.m_cap)
            done[:] = True
        rows = remaining[done]
        if rows.size:
            sel = np.flatnonzero(done)
            res = _close_batch(tgt.take(rows), src.take(rows), omega, n_max,
                               [c[sel] for c in chans], [c[sel] for c in steer],
                               reverse)
            for o, r in zip(out, res):
                o[rows] = r
        remaining = remaining[~done]
        M *= 2
    return out


def _modal_close(tgt, src, omega, n_max, opts, reverse=False):
    """Close pairs, split by stretch: plain factors are analytic on the
    angle circle and converge fastest, so the bounded surrogates are used
    only where coordinates are genuinely complex (inside the layer).

    Without the substitution the non-smooth products fall back to plain
    azimuthal FFT sampling -- the baseline whose slowly converging series
    the surrogates were introduced to repair.  Its sampling is allowed to
    stop at the cap with whatever tail remains.
    """
    stretched = (np.abs(tgt.rho_c.imag) + np.abs(src.rho_c.imag)
                 + np.abs(tgt.z_c.imag) + np.abs(src.z_c.imag)) > 0.0
    out = [np.empty((len(tgt), n_max + 1), dtype=complex)
           for _ in range(3 if reverse else 2)]
    rows = np.flatnonzero(~stretched)
    if rows.size:
        res = _modal_close_group(tgt.take(rows), src.take(rows), omega,
                                 n_max, opts, "plain", reverse=reverse)
        for o, r in zip(out, res):
            o[rows] = r
    rows = np.flatnonzero(stretched)
    if rows.size:
        t, s = tgt.take(rows), src.take(rows)
        if opts.substitute:
            res = _modal_close_group(t, s, omega, n_max, opts, "surrogate",
                                     reverse=reverse)
        else:
            res = _fft_only_close(t, s, omega, n_max, opts, reverse)
        for o, r in zip(out, res):
            o[rows] = r
    return out


def _fft_only_close(tgt, src, omega, n_max, opts, reverse):
    """Direct kernel FFT at close pairs, best effort at the sample cap."""
    P = len(tgt)
    out = [np.empty((P, n_max + 1), dtype=complex)
           for _ in range(3 if reverse else 2)]
    remaining = np.arange(P)
    M = opts.m_start
    while remaining.size:
        theta = 2.0 * np.pi * np.arange(M) / M
        step = max(32, int(5e5 // M))
        keep = []
        for i0 in range(0, remaining.size, step):
            rows = remaining[i0:i0 + step]
            vals = _far_values(tgt.take(rows), src.take(rows), theta,
                               omega, reverse=reverse)
            ffts = [np.fft.fft(v, axis=-1) for v in vals]
            tails = np.zeros(rows.size)
            for f in ffts:
                tt = np.abs(f[:, M // 2]) / np.maximum(
                    np.abs(f).max(axis=-1), 1e-300)
                tails = np.maximum(tails, tt / FFT_TAIL_TOL)
            done = tails <= 1.0
            if M >= opts.m_cap:
                done[:] = True
            sel = np.flatnonzero(done)
            if sel.size:
                for o, f in zip(out, ffts):
                    o[rows[sel]] = f[sel, : n_max + 1] * (SQRT_2PI / M)
            keep.append(rows[~done])
        remaining = np.concatenate(keep) if keep else np.array([], dtype=int)
        M *= 2
    return out


def close_pair_mask(tgt: BoundaryPoints, src: BoundaryPoints,
                    opts: KernelOptions) -> np.ndarray:
    """Pairs whose meridian separation routes them to the convolution path."""
    dm = np.sqrt(np.abs(meridian_gap2(tgt, src)))
    thresh = opts.far_factor * np.maximum.reduce(
        [tgt.rho, src.rho, np.full(len(tgt), opts.local_scale)])
    return dm < thresh


def modal_kernels(tgt: BoundaryPoints, src: BoundaryPoints, omega: float,
                  n_max: int, opts: KernelOptions = KernelOptions(),
                  reverse: bool = False):
    """Modal kernels S_n, K_n (n = 0..n_max) for each source-target pair.

    Modes carry the 1/sqrt(2 pi) transform normalization; negative orders
    equal their positive counterparts.  Pairs are dispatched between the
    far (plain FFT) and close (convolution) routes by meridian separation.
    With ``reverse`` a third array carries the double-layer kernel of the
    role-swapped pair, sharing all geometric samples.
    """
    P = len(tgt)
    close = close_pair_mask(tgt, src, opts)
    nch = 3 if reverse else 2
    out = [np.empty((P, n_max + 1), dtype=complex) for _ in range(nch)]
    step = max(1, opts.chunk)
    far_idx = np.flatnonzero(~close)
    for i0 in range(0, far_idx.size, step):
        rows = far_idx[i0:i0 + step]
        res = _modal_far(tgt.take(rows), src.take(rows), omega, n_max, opts,
                         reverse=reverse)
        for o, r in zip(out, res):
            o[rows] = r
    close_idx = np.flatnonzero(close)
    cstep = max(1, step // 4)
    for i0 in range(0, close_idx.size, cstep):
        rows = close_idx[i0:i0 + cstep]
        res = _modal_close(tgt.take(rows), src.take(rows), omega, n_max, opts,
                           reverse=reverse)
        for o, r in zip(out, res):
            o[rows] = r
    if reverse:
        return out[0], out[1], out[2]
    return out[0], out[1]
