"""Compiled limb-arithmetic kernel for bulk Hurwitz orbit sampling.

The stationary sampler iterates the Hurwitz map ~5*10^8 times for the large
Monte Carlo runs, which is too hot for per-step Python objects.  This module
tracks the exact Gaussian-rational orbit state in little-endian radix-2^32
limbs (two's complement, int64 storage) and extracts digits through a float
fast path with a wide certainty margin.  Whenever a digit is not certain, or
a coefficient would overflow the linear-combination bound, the sample is
flagged and recomputed by the exact gmpy2 path in
:func:`hurwitz_orbit_exact`; results are therefore exact regardless of which
path served them.
"""

from __future__ import annotations

import math

import numpy as np
from gmpy2 import mpz
from numba import int64, njit

# Limbs are radix 2^32 in int64 slots. With draw precision <= 512 bits and
# digit coefficients capped at 2^29 the per-limb accumulator stays below
# 2^62, and magnitudes stay below 2^541 < 2^(32*18 - 1).
LIMBS = 18
SAMPLE_BITS = 512

_M32 = int64(0xFFFFFFFF)
_COEFF_LIMIT = 2.0 ** 29
_ERR_SCALE = 2.0 ** -45
_ERR_FLOOR = 2.0 ** -40

FLAG_OK = 0
FLAG_UNCERTAIN = 1
FLAG_TERMINATED = 2


@njit(cache=True)
def _combo(out, d, n1, c1, n2, c2):
    # out = d + c1*n1 + c2*n2  (mod 2^(32L)); |c| < 2^30 keeps int64 exact.
    carry = int64(0)
    for i in range(out.shape[0]):
        acc = carry + d[i] + c1 * n1[i] + c2 * n2[i]
        out[i] = acc & _M32
        carry = acc >> 32
    return 0


@njit(cache=True)
def _top_mant(x, scratch):
    """(top limb index, signed float of the top ~96 bits).

    The value is mant * 2^(32*(top-2)); callers rescale by a shared
    exponent so that products of extracted floats never overflow.
    """
    L = x.shape[0]
    if (x[L - 1] >> 31) & 1:
        carry = int64(1)
        for i in range(L):
            acc = ((~x[i]) & _M32) + carry
            scratch[i] = acc & _M32
            carry = acc >> 32
        src = scratch
        sign = -1.0
    else:
        src = x
        sign = 1.0
    top = -1
    for i in range(L - 1, -1, -1):
        if src[i] != 0:
            top = i
            break
    if top < 0:
        return 0, 0.0
    v = float(src[top])
    v = v * 4294967296.0 + (float(src[top - 1]) if top >= 1 else 0.0)
    v = v * 4294967296.0 + (float(src[top - 2]) if top >= 2 else 0.0)
    return top, sign * v


@njit(cache=True)
def _scaled_quad(xr, xi, yr, yi, scratch, out4):
    """Extract the four state components as floats on a common scale."""
    t0, m0 = _top_mant(xr, scratch)
    t1, m1 = _top_mant(xi, scratch)
    t2, m2 = _top_mant(yr, scratch)
    t3, m3 = _top_mant(yi, scratch)
    s = max(t0, max(t1, max(t2, t3)))
    out4[0] = m0 * 2.0 ** (32.0 * (t0 - s))
    out4[1] = m1 * 2.0 ** (32.0 * (t1 - s))
    out4[2] = m2 * 2.0 ** (32.0 * (t2 - s))
    out4[3] = m3 * 2.0 ** (32.0 * (t3 - s))


@njit(cache=True)
def _is_zero(x):
    for i in range(x.shape[0]):
        if x[i] != 0:
            return False
    return True


@njit(cache=True)
def hurwitz_burnin_batch(nre, nim, dre, dim, steps, out_x, out_y, out_ar, out_ai, flags):
    """Advance each orbit ``steps`` Hurwitz iterations in place.

    On success (flag 0): emits the iterate z = N/D as floats and the next
    digit [1/z]_i.  Flag 1 = digit not float-certain (redo exactly),
    flag 2 = orbit hit zero (rational input, redraw).
    """
    B, L = nre.shape
    tre = np.empty(L, dtype=np.int64)
    tim = np.empty(L, dtype=np.int64)
    scratch = np.empty(L, dtype=np.int64)
    quad = np.empty(4, dtype=np.float64)
    for b in range(B):
        xr = nre[b]
        xi = nim[b]
        yr = dre[b]
        yi = dim[b]
        failed = False
        for _ in range(steps):
            if _is_zero(xr) and _is_zero(xi):
                flags[b] = FLAG_TERMINATED
                failed = True
                break
            _scaled_quad(xr, xi, yr, yi, scratch, quad)
            fnr = quad[0]
            fni = quad[1]
            fdr = quad[2]
            fdi = quad[3]
            m = fnr * fnr + fni * fni
            wr = (fdr * fnr + fdi * fni) / m
            wi = (fdi * fnr - fdr * fni) / m
            ar = np.ceil(wr - 0.5)
            ai = np.ceil(wi - 0.5)
            mag = abs(wr) + abs(wi)
            err = mag * _ERR_SCALE + _ERR_FLOOR
            if (
                mag > _COEFF_LIMIT
                or (0.5 - abs(wr - ar)) < err
                or (0.5 - abs(wi - ai)) < err
            ):
                flags[b] = FLAG_UNCERTAIN
                failed = True
                break
            iar = int64(ar)
            iai = int64(ai)
            _combo(tre, yr, xr, -iar, xi, iai)
            _combo(tim, yi, xi, -iar, xr, -iai)
            for i in range(L):
                yr[i] = xr[i]
                yi[i] = xi[i]
                xr[i] = tre[i]
                xi[i] = tim[i]
        if failed:
            continue
        if _is_zero(xr) and _is_zero(xi):
            flags[b] = FLAG_TERMINATED
            continue
        _scaled_quad(xr, xi, yr, yi, scratch, quad)
        fnr = quad[0]
        fni = quad[1]
        fdr = quad[2]
        fdi = quad[3]
        md = fdr * fdr + fdi * fdi
        out_x[b] = (fnr * fdr + fni * fdi) / md
        out_y[b] = (fni * fdr - fnr * fdi) / md
        mn = fnr * fnr + fni * fni
        wr = (fdr * fnr + fdi * fni) / mn
        wi = (fdi * fnr - fdr * fni) / mn
        ar = np.ceil(wr - 0.5)
        ai = np.ceil(wi - 0.5)
        mag = abs(wr) + abs(wi)
        err = mag * _ERR_SCALE + _ERR_FLOOR
        if (
            mag > _COEFF_LIMIT
            or (0.5 - abs(wr - ar)) < err
            or (0.5 - abs(wi - ai)) < err
        ):
            flags[b] = FLAG_UNCERTAIN
            continue
        out_ar[b] = int64(ar)
        out_ai[b] = int64(ai)
        flags[b] = FLAG_OK


# ---------------------------------------------------------------------------
# Limb packing helpers (vectorized, batch level)
# ---------------------------------------------------------------------------


def digests_to_centered_limbs(digests: bytes, count: int) -> np.ndarray:
    """(count, LIMBS) limb rows for K - 2^511 from concatenated 64-byte digests.

    K is the big-endian 512-bit integer of each digest; subtracting 2^511
    centers the coordinate on [-1/2, 1/2) * 2^512.
    """
    words = np.frombuffer(digests, dtype=">u4").reshape(count, 16)[:, ::-1]
    limbs = np.zeros((count, LIMBS), dtype=np.int64)
    limbs[:, :16] = words.astype(np.int64)
    # subtract 2^511: add 2^576 - 2^511 (two's complement) with carry sweep
    limbs[:, 15] += 0x80000000
    limbs[:, 16] += 0xFFFFFFFF
    limbs[:, 17] += 0xFFFFFFFF
    carry = np.zeros(count, dtype=np.int64)
    for i in range(LIMBS):
        acc = limbs[:, i] + carry
        limbs[:, i] = acc & 0xFFFFFFFF
        carry = acc >> 32
    return limbs


def int_to_limbs(v: int, limbs: int = LIMBS) -> np.ndarray:
    """Single limb row for an arbitrary (possibly negative) integer."""
    mod = 1 << (32 * limbs)
    v %= mod
    return np.array([(v >> (32 * i)) & 0xFFFFFFFF for i in range(limbs)], dtype=np.int64)


def limbs_to_int(row: np.ndarray) -> int:
    """Signed integer value of a two's-complement limb row."""
    limbs = row.shape[0]
    v = 0
    for i in range(limbs):
        v |= int(row[i]) << (32 * i)
    if v >= 1 << (32 * limbs - 1):
        v -= 1 << (32 * limbs)
    return v


# ---------------------------------------------------------------------------
# Exact fallback (also the reference implementation for kernel tests)
# ---------------------------------------------------------------------------


def hurwitz_orbit_exact(nre: int, nim: int, bits: int, steps: int):
    """Exact Hurwitz orbit of z = (nre + nim*i) / 2^bits for ``steps`` steps.

    Returns (x, y, ar, ai, terminated): the iterate as floats, its next
    digit, and whether the orbit hit zero along the way.
    """
    xr, xi = mpz(nre), mpz(nim)
    yr, yi = mpz(1) << bits, mpz(0)
    for _ in range(steps):
        if not (xr or xi):
            return 0.0, 0.0, 0, 0, True
        m2 = xr * xr + xi * xi
        wre = yr * xr + yi * xi
        wim = yi * xr - yr * xi
        ar = -((m2 - 2 * wre) // (2 * m2))
        ai = -((m2 - 2 * wim) // (2 * m2))
        nxr = yr - (ar * xr - ai * xi)
        nxi = yi - (ar * xi + ai * xr)
        yr, yi = xr, xi
        xr, xi = nxr, nxi
    if not (xr or xi):
        return 0.0, 0.0, 0, 0, True
    md = yr * yr + yi * yi
    x = _ratio_float(xr * yr + xi * yi, md)
    y = _ratio_float(xi * yr - xr * yi, md)
    m2 = xr * xr + xi * xi
    wre = yr * xr + yi * xi
    wim = yi * xr - yr * xi
    ar = -((m2 - 2 * wre) // (2 * m2))
    ai = -((m2 - 2 * wim) // (2 * m2))
    return x, y, int(ar), int(ai), False


def _ratio_float(num: mpz, den: mpz) -> float:
    shift = max(num.bit_length(), den.bit_length()) - 53
    if shift > 0:
        return float(num >> shift) / float(den >> shift)
    return float(num) / float(den)


def warm_up() -> None:
    """Trigger kernel compilation outside of timed paths."""
    n = np.zeros((1, LIMBS), dtype=np.int64)
    m = np.zeros((1, LIMBS), dtype=np.int64)
    d = np.zeros((1, LIMBS), dtype=np.int64)
    e = np.zeros((1, LIMBS), dtype=np.int64)
    n[0] = int_to_limbs(1 << 400)
    m[0] = int_to_limbs(1 << 399)
    d[0] = int_to_limbs(1 << 512)
    x = np.zeros(1)
    y = np.zeros(1)
    ar = np.zeros(1, dtype=np.int64)
    ai = np.zeros(1, dtype=np.int64)
    fl = np.zeros(1, dtype=np.int64)
    hurwitz_burnin_batch(n, m, d, e, 3, x, y, ar, ai, fl)
