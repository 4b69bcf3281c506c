"""Digit engines: Gauss map, nearest-integer map, Hurwitz complex map.

All expansions run on exact representations.  A value entering an engine is
either an exact rational (``Fraction``) or an exact dyadic
(:class:`~cfextremes.numerics.AdaptiveReal`); the orbit is then tracked as an
exact integer pair (numerator, denominator), so digits carry no rounding
error whatsoever.  Certification against the *underlying* real of a refinable
source happens one level up, in :func:`expand` via
:func:`cfextremes.numerics.refine_and_agree`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from gmpy2 import mpz

from .errors import (
    EngineInvariantViolation,
    ExactZero,
    OutsideDomain,
    ReconstructionDivergence,
    RegionViolation,
)
from .numerics import (
    AdaptiveComplex,
    AdaptiveReal,
    ComplexSource,
    RealSource,
    refine_and_agree,
)


class Family(str, Enum):
    RCF = "rcf"
    NICF = "nicf"
    HCCF = "hccf"


class Status(str, Enum):
    ONGOING = "Ongoing"
    TERMINATED = "Terminated"


# ---------------------------------------------------------------------------
# Gaussian integers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianInt:
    """Exact Gaussian integer a + bi."""

    a: int
    b: int

    def __add__(self, other: "GaussianInt") -> "GaussianInt":
        return GaussianInt(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "GaussianInt") -> "GaussianInt":
        return GaussianInt(self.a - other.a, self.b - other.b)

    def __mul__(self, other: "GaussianInt") -> "GaussianInt":
        return GaussianInt(
            self.a * other.a - self.b * other.b,
            self.a * other.b + self.b * other.a,
        )

    def __neg__(self) -> "GaussianInt":
        return GaussianInt(-self.a, -self.b)

    def conj(self) -> "GaussianInt":
        return GaussianInt(self.a, -self.b)

    def norm(self) -> int:
        return self.a * self.a + self.b * self.b

    def modulus(self) -> float:
        n = self.norm()
        try:
            return math.sqrt(n)
        except OverflowError:  # pragma: no cover - astronomically large digit
            return math.inf

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def __complex__(self) -> complex:
        return complex(self.a, self.b)

    def __str__(self) -> str:
        return f"{self.a}{self.b:+d}i"


# ---------------------------------------------------------------------------
# Expansion records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RcfExpansion:
    digits: tuple[int, ...]
    status: Status
    precision_bits: int = 0

    def moduli(self) -> tuple[int, ...]:
        return self.digits


@dataclass(frozen=True)
class NicfExpansion:
    b: tuple[int, ...]
    eps: tuple[int, ...]
    status: Status
    precision_bits: int = 0

    def moduli(self) -> tuple[int, ...]:
        return self.b

    def signed_digits(self) -> tuple[int, ...]:
        """Nearest-integer digits with signs folded in: eps1*b1, (eps1*eps2)*b2, ..."""
        out = []
        s = 1
        for bv, ev in zip(self.b, self.eps):
            s *= ev
            out.append(s * bv)
        return tuple(out)


@dataclass(frozen=True)
class HccfExpansion:
    a0: GaussianInt
    digits: tuple[GaussianInt, ...]
    status: Status
    precision_bits: int = 0

    def moduli(self) -> tuple[float, ...]:
        return tuple(d.modulus() for d in self.digits)


Expansion = Union[RcfExpansion, NicfExpansion, HccfExpansion]


# ---------------------------------------------------------------------------
# Value coercion
# ---------------------------------------------------------------------------


RealLike = Union[AdaptiveReal, Fraction, int, float]
ComplexLike = Union[AdaptiveComplex, complex, tuple]


def _as_fraction(x: RealLike) -> Fraction:
    if isinstance(x, AdaptiveReal):
        return x.to_fraction()
    return Fraction(x)


def _as_fraction_pair(z: ComplexLike) -> tuple[Fraction, Fraction]:
    if isinstance(z, AdaptiveComplex):
        return z.to_fractions()
    if isinstance(z, complex):
        return Fraction(z.real), Fraction(z.imag)
    if isinstance(z, tuple) and len(z) == 2:
        return Fraction(z[0]), Fraction(z[1])
    if isinstance(z, (int, float, Fraction)):
        return Fraction(z), Fraction(0)
    raise TypeError(f"cannot interpret {z!r} as a complex value")


def _trunc_to_bits(value: Fraction, bits: int) -> AdaptiveReal:
    mantissa = (value.numerator << bits) // value.denominator
    return AdaptiveReal(mantissa, -bits, bits)


# ---------------------------------------------------------------------------
# Single-step maps
# ---------------------------------------------------------------------------


def gauss_map(x: RealLike) -> tuple[RealLike, int]:
    """One step of x -> {1/x} on (0,1); returns (T(x), digit floor(1/x)).

    AdaptiveReal input yields an AdaptiveReal truncated to the input's stated
    precision (loss <= 1 ulp); rational input is mapped exactly.
    """
    f = _as_fraction(x)
    if f == 0:
        raise ExactZero("gauss_map at exact zero")
    if not (0 < f < 1):
        raise OutsideDomain(f"{float(f)} not in (0, 1)")
    p, q = f.numerator, f.denominator
    a, r = divmod(q, p)
    if a < 1:
        raise EngineInvariantViolation("regular CF digit < 1")
    t = Fraction(r, p)
    if isinstance(x, AdaptiveReal):
        return _trunc_to_bits(t, x.bits), int(a)
    return t, int(a)


def nicf_map(x: RealLike) -> tuple[RealLike, int, int]:
    """One step of the nearest-integer map on [-1/2, 1/2).

    Returns (T(x), b, eps) with b = floor(1/|x| + 1/2) and eps = sign(x).
    The zero fixed point returns (0, 0, 0); callers treat it as termination.
    """
    f = _as_fraction(x)
    if not (Fraction(-1, 2) <= f < Fraction(1, 2)):
        raise OutsideDomain(f"{float(f)} not in [-1/2, 1/2)")
    if f == 0:
        zero = _trunc_to_bits(Fraction(0), x.bits) if isinstance(x, AdaptiveReal) else Fraction(0)
        return zero, 0, 0
    n, d = f.numerator, f.denominator
    an = abs(n)
    b = (2 * d + an) // (2 * an)
    if b < 2:
        raise EngineInvariantViolation("nearest-integer digit < 2")
    eps = 1 if n > 0 else -1
    t = Fraction(d - b * an, an)
    if isinstance(x, AdaptiveReal):
        return _trunc_to_bits(t, x.bits), int(b), eps
    return t, int(b), eps


def _round_tie_down(p: int, q: int) -> int:
    """Nearest integer to p/q (q > 0); exact halves round down."""
    return -((q - 2 * p) // (2 * q))


def nearest_gaussian(z: ComplexLike) -> GaussianInt:
    """Nearest Gaussian integer, with half-coordinate ties rounded down."""
    zr, zi = _as_fraction_pair(z)
    return GaussianInt(
        _round_tie_down(zr.numerator, zr.denominator),
        _round_tie_down(zi.numerator, zi.denominator),
    )


def in_fundamental_square(z: ComplexLike) -> bool:
    """Membership in B = [-1/2, 1/2) x [-1/2, 1/2), exact and half-open."""
    zr, zi = _as_fraction_pair(z)
    h = Fraction(1, 2)
    return -h <= zr < h and -h <= zi < h


def hurwitz_map(z: ComplexLike) -> tuple[ComplexLike, GaussianInt]:
    """One step of z -> 1/z - [1/z]_i on the fundamental square B."""
    zr, zi = _as_fraction_pair(z)
    if zr == 0 and zi == 0:
        raise ExactZero("hurwitz_map at exact zero")
    if not in_fundamental_square((zr, zi)):
        raise OutsideDomain(f"{complex(float(zr), float(zi))} not in B")
    m2 = zr * zr + zi * zi
    wr, wi = zr / m2, -zi / m2
    digit = nearest_gaussian((wr, wi))
    if digit.norm() < 2:
        raise EngineInvariantViolation("Hurwitz digit norm < 2")
    tr, ti = wr - digit.a, wi - digit.b
    if isinstance(z, AdaptiveComplex):
        bits = z.bits
        return AdaptiveComplex(_trunc_to_bits(tr, bits), _trunc_to_bits(ti, bits)), digit
    return (tr, ti), digit


# ---------------------------------------------------------------------------
# Exact digit streams (integer orbit state)
# ---------------------------------------------------------------------------


def rcf_digit_stream(num, den, limit: int) -> tuple[list[int], bool]:
    """Digits of num/den in (0,1); returns (digits, terminated)."""
    n, d = mpz(num), mpz(den)
    out: list[int] = []
    while n and len(out) < limit:
        q, r = divmod(d, n)
        if q < 1:
            raise EngineInvariantViolation("regular CF digit < 1")
        out.append(int(q))
        d, n = n, r
    return out, not n


def nicf_digit_stream(num, den, limit: int) -> tuple[list[tuple[int, int]], bool]:
    """(b, eps) tokens of num/den in [-1/2, 1/2); returns (tokens, terminated)."""
    n, d = mpz(num), mpz(den)
    out: list[tuple[int, int]] = []
    while n and len(out) < limit:
        an = abs(n)
        b = (2 * d + an) // (2 * an)
        if b < 2:
            raise EngineInvariantViolation("nearest-integer digit < 2")
        out.append((int(b), 1 if n > 0 else -1))
        n, d = d - b * an, an
    return out, not n


_ERR_SCALE = 2.0 ** -48
_ERR_FLOOR = 2.0 ** -40
_MAG_LIMIT = 2.0 ** 40


def _hccf_digit_exact(nre, nim, dre, dim) -> tuple[int, int]:
    m2 = nre * nre + nim * nim
    wre = dre * nre + dim * nim
    wim = dim * nre - dre * nim
    return int(-((m2 - 2 * wre) // (2 * m2))), int(-((m2 - 2 * wim) // (2 * m2)))


def _top_float(v, shift: int) -> float:
    return float(v >> shift) if shift > 0 else float(v)


def hccf_digit_stream(nre, nim, dre, dim, limit: int) -> tuple[list[tuple[int, int]], bool]:
    """Hurwitz digits of the Gaussian-rational z = N/D in B.

    Digit extraction uses a float fast path on the leading 53 bits of the
    orbit state; whenever the rounding is not certain by a wide margin the
    exact integer computation is used, so the orbit is always exact.
    """
    xr, xi = mpz(nre), mpz(nim)
    yr, yi = mpz(dre), mpz(dim)
    out: list[tuple[int, int]] = []
    while (xr or xi) and len(out) < limit:
        shift = max(xr.bit_length(), xi.bit_length(), yr.bit_length(), yi.bit_length()) - 53
        fnr, fni = _top_float(xr, shift), _top_float(xi, shift)
        fdr, fdi = _top_float(yr, shift), _top_float(yi, shift)
        m = fnr * fnr + fni * fni
        wr = (fdr * fnr + fdi * fni) / m
        wi = (fdi * fnr - fdr * fni) / m
        ar = math.ceil(wr - 0.5)
        ai = math.ceil(wi - 0.5)
        mag = abs(wr) + abs(wi)
        err = mag * _ERR_SCALE + _ERR_FLOOR
        if (
            mag > _MAG_LIMIT
            or (0.5 - abs(wr - ar)) < err
            or (0.5 - abs(wi - ai)) < err
        ):
            ar, ai = _hccf_digit_exact(xr, xi, yr, yi)
        if ar * ar + ai * ai < 2:
            raise EngineInvariantViolation("Hurwitz digit norm < 2")
        out.append((ar, ai))
        nxr = yr - (ar * xr - ai * xi)
        nxi = yi - (ar * xi + ai * xr)
        yr, yi = xr, xi
        xr, xi = nxr, nxi
    return out, not (xr or xi)


# ---------------------------------------------------------------------------
# expand(): fundamental-domain expansions with optional certification
# ---------------------------------------------------------------------------


def _rcf_expand_fn(value, n: int):
    if isinstance(value, AdaptiveReal):
        f = value.to_fraction()
    else:
        f = Fraction(value)
    if f == 0:
        return [], True
    if not (0 < f < 1):
        raise OutsideDomain(f"{float(f)} not in (0, 1)")
    return rcf_digit_stream(f.numerator, f.denominator, n)


def _nicf_expand_fn(value, n: int):
    f = value.to_fraction() if isinstance(value, AdaptiveReal) else Fraction(value)
    if not (Fraction(-1, 2) <= f < Fraction(1, 2)):
        raise OutsideDomain(f"{float(f)} not in [-1/2, 1/2)")
    return nicf_digit_stream(f.numerator, f.denominator, n)


def _hccf_expand_fn(value, n: int):
    if isinstance(value, AdaptiveComplex):
        zr, zi = value.to_fractions()
    else:
        zr, zi = _as_fraction_pair(value)
    if not in_fundamental_square((zr, zi)):
        raise OutsideDomain(f"{complex(float(zr), float(zi))} not in B")
    den = zr.denominator * zi.denominator // math.gcd(zr.denominator, zi.denominator)
    nre = zr.numerator * (den // zr.denominator)
    nim = zi.numerator * (den // zi.denominator)
    return hccf_digit_stream(nre, nim, den, 0, n)


_EXPAND_FNS = {
    Family.RCF: _rcf_expand_fn,
    Family.NICF: _nicf_expand_fn,
    Family.HCCF: _hccf_expand_fn,
}


def expand(
    family: Family,
    x,
    n: int,
    p0: Optional[int] = None,
    a0: Optional[GaussianInt] = None,
) -> Expansion:
    """Expand ``x`` (already in the family's fundamental domain) to n digits.

    ``x`` may be a refinable source (digits are then certified by
    two-precision agreement and carry ``precision_bits``), or an exact
    value (AdaptiveReal/AdaptiveComplex, Fraction, complex), which is
    expanded exactly and may terminate.
    """
    family = Family(family)
    if n < 1:
        raise ValueError("digit count must be >= 1")
    fn = _EXPAND_FNS[family]
    if isinstance(x, (RealSource, ComplexSource)):
        cert = refine_and_agree(x, fn, n, p0=p0)
        tokens, terminated, bits = cert.tokens, cert.terminated, cert.precision_bits
    else:
        toks, terminated = fn(x, n)
        tokens, bits = tuple(toks), 0
    status = Status.TERMINATED if terminated else Status.ONGOING
    if family is Family.RCF:
        return RcfExpansion(tuple(int(t) for t in tokens), status, bits)
    if family is Family.NICF:
        return NicfExpansion(
            tuple(t[0] for t in tokens),
            tuple(t[1] for t in tokens),
            status,
            bits,
        )
    return HccfExpansion(
        a0 if a0 is not None else GaussianInt(0, 0),
        tuple(GaussianInt(t[0], t[1]) for t in tokens),
        status,
        bits,
    )


def reduce_to_domain(family: Family, x) -> tuple:
    """Split a general input into (integer part a0, fundamental-domain rest).

    For sources the integer part is read off a 64-bit evaluation, which is
    correct unless the value sits within 2**-60 of a reduction boundary.
    """
    family = Family(family)
    if family is Family.HCCF:
        if isinstance(x, ComplexSource):
            probe = x.complex_at(64).to_fractions()
            a0 = nearest_gaussian(probe)
            from .numerics import ComplexShiftedSource

            return a0, ComplexShiftedSource(x, -a0.a, -a0.b)
        probe = _as_fraction_pair(x)
        a0 = nearest_gaussian(probe)
        return a0, (probe[0] - a0.a, probe[1] - a0.b)
    if isinstance(x, RealSource):
        probe = x.real_at(64).to_fraction()
    else:
        probe = _as_fraction(x)
    if family is Family.RCF:
        a0 = probe.numerator // probe.denominator
    else:
        a0 = (2 * probe.numerator + probe.denominator) // (2 * probe.denominator)
    if isinstance(x, RealSource):
        from .numerics import ShiftedSource

        return int(a0), ShiftedSource(x, -int(a0))
    return int(a0), probe - a0


# ---------------------------------------------------------------------------
# Convergents and reconstruction
# ---------------------------------------------------------------------------


def convergents(expansion: Expansion) -> list:
    """Exact convergent pairs (p_n, q_n) from the digit recurrences.

    Successive (p, q) are automatically coprime (the two-term recurrences
    have unit determinant), so no gcd reduction is needed.
    """
    if isinstance(expansion, RcfExpansion):
        if not expansion.digits:
            raise ValueError("expansion has no digits")
        p0, p1 = 1, 0  # p_{-1}, p_0
        q0, q1 = 0, 1
        out = []
        for a in expansion.digits:
            p0, p1 = p1, a * p1 + p0
            q0, q1 = q1, a * q1 + q0
            out.append((p1, q1))
        return out
    if isinstance(expansion, NicfExpansion):
        if not expansion.b:
            raise ValueError("expansion has no digits")
        p0, p1 = 1, 0
        q0, q1 = 0, 1
        out = []
        for b, e in zip(expansion.b, expansion.eps):
            p0, p1 = p1, b * p1 + e * p0
            q0, q1 = q1, b * q1 + e * q0
            out.append((p1, q1))
        return out
    if isinstance(expansion, HccfExpansion):
        if not expansion.digits:
            raise ValueError("expansion has no digits")
        p0, p1 = GaussianInt(1, 0), expansion.a0
        q0, q1 = GaussianInt(0, 0), GaussianInt(1, 0)
        out = []
        for a in expansion.digits:
            p0, p1 = p1, a * p1 + p0
            q0, q1 = q1, a * q1 + q0
            out.append((p1, q1))
        return out
    raise TypeError(f"not an expansion record: {expansion!r}")


def _real_convergent_error_sq(x: Fraction, p: int, q: int) -> Fraction:
    e = x - Fraction(p, q)
    return e * e


def _complex_convergent_error_sq(
    zr: Fraction, zi: Fraction, p: GaussianInt, q: GaussianInt
) -> Fraction:
    qn = q.norm()
    # p/q = p * conj(q) / |q|^2
    cr = Fraction(p.a * q.a + p.b * q.b, qn)
    ci = Fraction(p.b * q.a - p.a * q.b, qn)
    dr, di = zr - cr, zi - ci
    return dr * dr + di * di


def reconstruct_check(x, expansion: Expansion, tol: float) -> tuple[bool, list[float]]:
    """Validate that convergents reconstruct the input.

    Returns (final_error < tol, error curve).  Raises
    ReconstructionDivergence if the error fails to shrink along the even/odd
    convergent subsequences, which would indicate an engine bug.
    """
    convs = convergents(expansion)
    if len(convs) < 3:
        raise ValueError("need at least 3 digits to check reconstruction")
    if isinstance(expansion, HccfExpansion):
        zr, zi = _as_fraction_pair(x)
        errs_sq = [_complex_convergent_error_sq(zr, zi, p, q) for p, q in convs]
    elif isinstance(expansion, NicfExpansion):
        f = _as_fraction(x)
        errs_sq = [_real_convergent_error_sq(f, p, q) for p, q in convs]
    else:
        f = _as_fraction(x)
        errs_sq = [_real_convergent_error_sq(f, p, q) for p, q in convs]
    terminated = expansion.status is Status.TERMINATED
    for i in range(2, len(errs_sq)):
        if terminated and errs_sq[i] == 0:
            continue  # exact equality at the last convergent of a rational
        if not errs_sq[i] < errs_sq[i - 2]:
            raise ReconstructionDivergence(
                f"convergent error did not shrink at digit {i + 1}"
            )
    errors = [math.sqrt(float(e)) for e in errs_sq]
    ok = errs_sq[-1] < Fraction(tol) * Fraction(tol)
    return ok, errors


# ---------------------------------------------------------------------------
# Naive complex continued fraction trap (the counterexample)
# ---------------------------------------------------------------------------

MINUS_I = GaussianInt(0, -1)


def naive_region_contains(z: ComplexLike, closed: bool = False) -> bool:
    """Membership in the trap region bounded by |z-1/2|=1/2, |z-(1/2+i)|=1/2
    and the segment from 1 to 1+i.

    The open region (default) is the precondition for the demonstration; the
    closed region is used for orbit-containment checks so that measure-zero
    boundary grazes do not raise.
    """
    zr, zi = _as_fraction_pair(z)
    h = Fraction(1, 2)
    c1 = (zr - h) ** 2 + zi * zi  # vs (1/2)^2
    c2 = (zr - h) ** 2 + (zi - 1) ** 2
    q = Fraction(1, 4)
    if closed:
        return h <= zr <= 1 and 0 <= zi <= 1 and c1 >= q and c2 >= q
    return h < zr < 1 and 0 < zi < 1 and c1 > q and c2 > q


@dataclass(frozen=True)
class NaiveTrapReport:
    iterations: int
    all_digits_minus_i: bool
    orbit: tuple[complex, ...]


def naive_complex_trap(z: ComplexLike, n: int) -> NaiveTrapReport:
    """Iterate the naive floor-based complex map and certify the trap.

    Every iterate must stay in the (closed) region and every digit must be
    -i; any violation raises RegionViolation.  Arithmetic is exact on the
    Gaussian-rational orbit, so the certificate is not a float artifact.
    """
    zr, zi = _as_fraction_pair(z)
    if not naive_region_contains((zr, zi)):
        raise OutsideDomain(f"{complex(float(zr), float(zi))} not inside the trap region")
    den = zr.denominator * zi.denominator // math.gcd(zr.denominator, zi.denominator)
    xr = zr.numerator * (den // zr.denominator)
    xi = zi.numerator * (den // zi.denominator)
    yr, yi = mpz(den), mpz(0)
    xr, xi = mpz(xr), mpz(xi)
    orbit = [complex(float(Fraction(int(xr), int(den))), float(Fraction(int(xi), int(den))))]
    for step in range(n):
        if not (xr or xi):
            raise RegionViolation(f"orbit hit an exact Gaussian rational at step {step}")
        m2 = xr * xr + xi * xi
        wre = yr * xr + yi * xi
        wim = yi * xr - yr * xi
        ar = wre // m2  # exact floor of Re(1/z), Im(1/z)
        ai = wim // m2
        if (ar, ai) != (0, -1):
            raise RegionViolation(
                f"digit {int(ar)}{int(ai):+d}i != -i at step {step} (escape)"
            )
        nxr = yr - (ar * xr - ai * xi)
        nxi = yi - (ar * xi + ai * xr)
        yr, yi = xr, xi
        xr, xi = nxr, nxi
        zfr = Fraction(int(xr * yr + xi * yi), int(yr * yr + yi * yi))
        zfi = Fraction(int(xi * yr - xr * yi), int(yr * yr + yi * yi))
        if not naive_region_contains((zfr, zfi), closed=True):
            raise RegionViolation(
                f"iterate {complex(float(zfr), float(zfi))} escaped at step {step}"
            )
        orbit.append(complex(float(zfr), float(zfi)))
    return NaiveTrapReport(n, True, tuple(orbit))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def expansion_to_json(exp: Expansion, input_decimal: str, input_bits) -> dict:
    """JSON form of an expansion record: {family, input, digits, status}."""
    if isinstance(exp, RcfExpansion):
        family, digits = Family.RCF.value, list(exp.digits)
    elif isinstance(exp, NicfExpansion):
        family, digits = Family.NICF.value, {"b": list(exp.b), "eps": list(exp.eps)}
    else:
        family = Family.HCCF.value
        digits = {
            "a0": [exp.a0.a, exp.a0.b],
            "a": [[d.a, d.b] for d in exp.digits],
        }
    return {
        "family": family,
        "input": {"decimal": input_decimal, "precision_bits": input_bits},
        "digits": digits,
        "status": exp.status.value,
    }
