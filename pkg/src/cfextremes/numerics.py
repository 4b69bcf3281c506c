"""Adaptive-precision dyadic arithmetic and deterministic seeded sampling.

Values are exact dyadic rationals ``mantissa * 2**exponent`` carrying a stated
precision in bits.  Random draws and named constants are *refinable sources*:
asking the same source for more bits extends the value without changing the
leading bits, which is what makes two-precision digit certification sound.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import gmpy2

from .errors import PrecisionExhausted

# Empirical precision loss per certified digit is ~3.4 bits (regular CF),
# ~4.9 (nearest-integer) and ~3.2 (Hurwitz); 8 bits/digit leaves headroom.
BITS_PER_DIGIT = 8
MIN_GUARD_BITS = 64
MIN_SAMPLE_BITS = 53
PRECISION_CAP = 1 << 20


def default_initial_bits(n_digits: int) -> int:
    """Default working precision for an ``n_digits`` expansion."""
    return MIN_GUARD_BITS + BITS_PER_DIGIT * n_digits


@dataclass(frozen=True)
class AdaptiveReal:
    """Exact dyadic value ``mantissa * 2**exponent`` at a stated precision.

    ``bits`` records how many leading bits are meaningful approximations of
    the underlying real; the stored value itself is exact.
    """

    mantissa: int
    exponent: int
    bits: int

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa << self.exponent)
        return Fraction(self.mantissa, 1 << -self.exponent)

    def to_float(self) -> float:
        return float(self.to_fraction())

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def __neg__(self) -> "AdaptiveReal":
        return AdaptiveReal(-self.mantissa, self.exponent, self.bits)

    def shifted_by_int(self, k: int) -> "AdaptiveReal":
        """Exact translation by an integer (no precision loss)."""
        if self.exponent > 0:
            return AdaptiveReal((self.mantissa << self.exponent) + k, 0, self.bits)
        return AdaptiveReal(self.mantissa + (k << -self.exponent), self.exponent, self.bits)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"AdaptiveReal({self.to_float()!r}, bits={self.bits})"


@dataclass(frozen=True)
class AdaptiveComplex:
    """Pair of adaptive reals forming an exact dyadic complex value."""

    re: AdaptiveReal
    im: AdaptiveReal

    @property
    def bits(self) -> int:
        return min(self.re.bits, self.im.bits)

    def to_complex(self) -> complex:
        return complex(self.re.to_float(), self.im.to_float())

    def to_fractions(self) -> tuple[Fraction, Fraction]:
        return self.re.to_fraction(), self.im.to_fraction()

    def is_zero(self) -> bool:
        return self.re.is_zero() and self.im.is_zero()


# ---------------------------------------------------------------------------
# Deterministic random streams
# ---------------------------------------------------------------------------

_KEY_TAG = b"cfextremes.rng.v1"
_BLOCK_BYTES = 64  # blake2b digest size; 512 bits per block


@dataclass(frozen=True)
class RandomStream:
    """Counter-based random bit stream.

    Every output is a pure function of ``(seed, stream_index, draw, block)``,
    so substreams can be consumed in any order by any number of workers with
    identical results.
    """

    seed: int
    stream_index: int = 0

    def substream(self, index: int) -> "RandomStream":
        if index < 0:
            raise ValueError("stream index must be nonnegative")
        return RandomStream(self.seed, index)

    def _key(self) -> bytes:
        return (
            _KEY_TAG
            + (self.seed % (1 << 64)).to_bytes(8, "little")
            + self.stream_index.to_bytes(16, "little")
        )

    def block(self, draw: int, block_index: int) -> bytes:
        """One 64-byte block of the (seed, stream, draw) bit stream."""
        msg = draw.to_bytes(16, "little") + struct.pack("<Q", block_index)
        return hashlib.blake2b(msg, digest_size=_BLOCK_BYTES, key=self._key()).digest()

    def mantissa_bits(self, draw: int, bits: int) -> int:
        """Leading ``bits`` bits of the draw's infinite bit stream.

        Requesting more bits extends the value: the first ``bits`` bits are
        independent of the total amount requested.
        """
        if bits <= 0:
            raise ValueError("bits must be positive")
        nblocks = -(-bits // (8 * _BLOCK_BYTES))
        raw = b"".join(self.block(draw, b) for b in range(nblocks))
        return int.from_bytes(raw, "big") >> (8 * len(raw) - bits)


def sample_uniform_unit(stream: RandomStream, bits: int, draw: int = 0) -> AdaptiveReal:
    """Uniform draw on (0, 1) with ``bits`` random mantissa bits."""
    if bits < MIN_SAMPLE_BITS:
        raise ValueError(f"bits must be >= {MIN_SAMPLE_BITS} for digit computations")
    k = stream.mantissa_bits(draw, bits)
    if k == 0:  # probability 2**-bits; keeps the value off the excluded endpoint
        k = 1
    return AdaptiveReal(k, -bits, bits)


def sample_uniform_box(stream: RandomStream, bits: int, draw: int = 0) -> AdaptiveComplex:
    """Uniform draw on the fundamental square [-1/2, 1/2) x [-1/2, 1/2).

    The real and imaginary parts use draw slots ``2*draw`` and ``2*draw + 1``
    so each coordinate is independently refinable.
    """
    if bits < MIN_SAMPLE_BITS:
        raise ValueError(f"bits must be >= {MIN_SAMPLE_BITS} for digit computations")
    half = 1 << (bits - 1)
    kre = stream.mantissa_bits(2 * draw, bits)
    kim = stream.mantissa_bits(2 * draw + 1, bits)
    return AdaptiveComplex(
        AdaptiveReal(kre - half, -bits, bits),
        AdaptiveReal(kim - half, -bits, bits),
    )


# ---------------------------------------------------------------------------
# Refinable sources
# ---------------------------------------------------------------------------


class RealSource:
    """A real number that can be produced at any requested precision.

    Refinement contract: the approximation at ``bits`` lies within
    ``2**-bits`` below the underlying value, and approximations at higher
    precision never move the leading bits.
    """

    def real_at(self, bits: int) -> AdaptiveReal:
        raise NotImplementedError

    def exact_value(self) -> Optional[Fraction]:
        """The exact value if the source is a known rational, else None."""
        return None

    def describe(self) -> str:
        return type(self).__name__


class ComplexSource:
    def complex_at(self, bits: int) -> AdaptiveComplex:
        raise NotImplementedError

    def exact_value(self) -> Optional[tuple[Fraction, Fraction]]:
        return None

    def describe(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class UniformUnitSource(RealSource):
    stream: RandomStream
    draw: int = 0

    def real_at(self, bits: int) -> AdaptiveReal:
        return sample_uniform_unit(self.stream, bits, self.draw)

    def describe(self) -> str:
        s = self.stream
        return f"uniform(0,1)[seed={s.seed},stream={s.stream_index},draw={self.draw}]"


@dataclass(frozen=True)
class UniformBoxSource(ComplexSource):
    stream: RandomStream
    draw: int = 0

    def complex_at(self, bits: int) -> AdaptiveComplex:
        return sample_uniform_box(self.stream, bits, self.draw)

    def describe(self) -> str:
        s = self.stream
        return f"uniform(B)[seed={s.seed},stream={s.stream_index},draw={self.draw}]"


_CONSTANT_NAMES = ("pi", "sqrt2", "golden")


@dataclass(frozen=True)
class ConstantSource(RealSource):
    """Named constant evaluated to any precision (pi, sqrt2, golden)."""

    name: str

    def __post_init__(self):
        if self.name not in _CONSTANT_NAMES:
            raise ValueError(f"unknown constant {self.name!r}; choose from {_CONSTANT_NAMES}")

    def real_at(self, bits: int) -> AdaptiveReal:
        # Round toward zero so that higher-precision evaluations only append
        # bits. 64 guard bits make grid-boundary flips practically impossible.
        with gmpy2.context(precision=bits + MIN_GUARD_BITS, round=gmpy2.RoundToZero):
            if self.name == "pi":
                v = gmpy2.const_pi()
            elif self.name == "sqrt2":
                v = gmpy2.sqrt(gmpy2.mpfr(2))
            else:
                v = (1 + gmpy2.sqrt(gmpy2.mpfr(5))) / 2
            m, e = v.as_mantissa_exp()
        m, e = int(m), int(e)
        # floor to the 2**-bits grid (all three constants are positive)
        if e + bits >= 0:
            mantissa = m << (e + bits)
        else:
            mantissa = m >> -(e + bits)
        return AdaptiveReal(mantissa, -bits, bits)

    def describe(self) -> str:
        return f"constant[{self.name}]"


@dataclass(frozen=True)
class RationalSource(RealSource):
    """Exact rational input; expansions terminate instead of refining."""

    value: Fraction

    def real_at(self, bits: int) -> AdaptiveReal:
        mantissa = (self.value.numerator << bits) // self.value.denominator
        return AdaptiveReal(mantissa, -bits, bits)

    def exact_value(self) -> Fraction:
        return self.value

    def describe(self) -> str:
        return f"rational[{self.value}]"


@dataclass(frozen=True)
class ShiftedSource(RealSource):
    """Base source translated by an exact integer (domain reduction)."""

    base: RealSource
    offset: int

    def real_at(self, bits: int) -> AdaptiveReal:
        return self.base.real_at(bits).shifted_by_int(self.offset)

    def exact_value(self) -> Optional[Fraction]:
        v = self.base.exact_value()
        return None if v is None else v + self.offset

    def describe(self) -> str:
        return f"{self.base.describe()}{self.offset:+d}"


@dataclass(frozen=True)
class ComplexPartsSource(ComplexSource):
    """Complex source assembled from two real sources."""

    re: RealSource
    im: RealSource

    def complex_at(self, bits: int) -> AdaptiveComplex:
        return AdaptiveComplex(self.re.real_at(bits), self.im.real_at(bits))

    def exact_value(self) -> Optional[tuple[Fraction, Fraction]]:
        vr, vi = self.re.exact_value(), self.im.exact_value()
        if vr is None or vi is None:
            return None
        return vr, vi

    def describe(self) -> str:
        return f"complex[{self.re.describe()}, {self.im.describe()}]"


@dataclass(frozen=True)
class ComplexShiftedSource(ComplexSource):
    """Complex source translated by an exact Gaussian integer (a, b)."""

    base: ComplexSource
    offset_re: int
    offset_im: int

    def complex_at(self, bits: int) -> AdaptiveComplex:
        v = self.base.complex_at(bits)
        return AdaptiveComplex(
            v.re.shifted_by_int(self.offset_re),
            v.im.shifted_by_int(self.offset_im),
        )

    def exact_value(self) -> Optional[tuple[Fraction, Fraction]]:
        v = self.base.exact_value()
        if v is None:
            return None
        return v[0] + self.offset_re, v[1] + self.offset_im

    def describe(self) -> str:
        return f"{self.base.describe()}{self.offset_re:+d}{self.offset_im:+d}i"


@dataclass(frozen=True)
class NegatedSource(RealSource):
    base: RealSource

    def real_at(self, bits: int) -> AdaptiveReal:
        # floor-consistent refinement survives negation up to one ulp; the
        # certification loop absorbs that.
        return -self.base.real_at(bits)

    def exact_value(self) -> Optional[Fraction]:
        v = self.base.exact_value()
        return None if v is None else -v

    def describe(self) -> str:
        return f"-{self.base.describe()}"


# ---------------------------------------------------------------------------
# Two-precision digit certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CertifiedExpansion:
    """Digit tokens certified by agreement of two working precisions."""

    tokens: tuple
    terminated: bool
    precision_bits: int  # 0 when computed from an exact rational


def _common_prefix(a: Sequence, b: Sequence) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def refine_and_agree(
    source,
    expand_fn: Callable,
    n: int,
    p0: Optional[int] = None,
    cap: int = PRECISION_CAP,
) -> CertifiedExpansion:
    """Certify ``n`` digits by agreement between precisions p and 2p.

    ``expand_fn(value, n)`` must return ``(tokens, terminated)`` where value
    is whatever the source produces (adaptive real/complex or exact
    rational(s)).  The precision doubles until at least ``n`` digits agree or
    the cap is reached.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    exact = source.exact_value()
    if exact is not None:
        tokens, terminated = expand_fn(exact, n)
        return CertifiedExpansion(tuple(tokens), terminated, 0)

    is_complex = isinstance(source, ComplexSource)
    value_at = source.complex_at if is_complex else source.real_at

    p = p0 if p0 is not None else default_initial_bits(n)
    if p < MIN_SAMPLE_BITS:
        raise ValueError(f"initial precision must be >= {MIN_SAMPLE_BITS}")

    lo_tokens, lo_term = expand_fn(value_at(p), n)
    while True:
        if 2 * p > cap:
            raise PrecisionExhausted(
                f"no {n}-digit agreement below {cap} bits "
                f"(near-rational or adversarial input: {source.describe()})"
            )
        hi_tokens, hi_term = expand_fn(value_at(2 * p), n)
        k = _common_prefix(lo_tokens, hi_tokens)
        if k >= n:
            return CertifiedExpansion(tuple(lo_tokens[:n]), False, p)
        if (
            lo_term
            and hi_term
            and len(lo_tokens) == len(hi_tokens) == k
        ):
            # both precisions produced the identical finite expansion
            return CertifiedExpansion(tuple(lo_tokens), True, p)
        p *= 2
        lo_tokens, lo_term = hi_tokens, hi_term
