import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cfextremes.engines import (
    Family,
    GaussianInt,
    HccfExpansion,
    NicfExpansion,
    RcfExpansion,
    Status,
    convergents,
    expand,
    expansion_to_json,
    gauss_map,
    hccf_digit_stream,
    hurwitz_map,
    in_fundamental_square,
    naive_complex_trap,
    naive_region_contains,
    nearest_gaussian,
    nicf_digit_stream,
    nicf_map,
    rcf_digit_stream,
    reconstruct_check,
    reduce_to_domain,
)
from cfextremes.errors import ExactZero, OutsideDomain, RegionViolation
from cfextremes.numerics import (
    ComplexPartsSource,
    ConstantSource,
    RandomStream,
    RationalSource,
    ShiftedSource,
    UniformBoxSource,
    UniformUnitSource,
    sample_uniform_box,
    sample_uniform_unit,
)

PI_RCF = (7, 15, 1, 292, 1, 1, 1, 2, 1, 3, 1, 14, 2, 1, 1, 2, 2, 2, 2, 1, 84, 2, 1, 1)
PI_NICF_B = (7, 16, 294, 3, 4, 5, 15, 3, 2, 2, 2, 2, 3, 85, 3, 2, 15, 3, 14, 5, 2, 6, 6)


def pi_source(family):
    _, src = reduce_to_domain(family, ConstantSource("pi"))
    return src


class TestGaussMap:
    def test_sqrt2_fixed_point(self):
        src = ShiftedSource(ConstantSource("sqrt2"), -1)
        x = src.real_at(256)
        t, a = gauss_map(x)
        assert a == 2
        assert abs(t.to_float() - x.to_float()) < 2.0 ** -200

    def test_rational_terminates(self):
        t, a = gauss_map(Fraction(1, 3))
        assert (t, a) == (Fraction(0), 3)
        with pytest.raises(ExactZero):
            gauss_map(t)

    def test_pi_first_digit(self):
        t, a = gauss_map(pi_source(Family.RCF).real_at(128))
        assert a == 7

    def test_domain_check(self):
        with pytest.raises(OutsideDomain):
            gauss_map(Fraction(3, 2))


class TestNicfMap:
    def test_point_four(self):
        t, b, eps = nicf_map(Fraction(2, 5))
        assert (t, b, eps) == (Fraction(-1, 2), 3, 1)

    def test_zero_fixed_point(self):
        t, b, eps = nicf_map(Fraction(0))
        assert (t, b, eps) == (Fraction(0), 0, 0)

    def test_pi_digit_stream_via_map(self):
        x = pi_source(Family.NICF).real_at(512)
        bs = []
        for _ in range(8):
            x, b, eps = nicf_map(x)
            bs.append(b)
        assert tuple(bs) == PI_NICF_B[:8]

    def test_left_endpoint(self):
        t, b, eps = nicf_map(Fraction(-1, 2))
        assert (t, b, eps) == (Fraction(0), 2, -1)

    def test_domain_check(self):
        with pytest.raises(OutsideDomain):
            nicf_map(Fraction(1, 2))


class TestNearestGaussian:
    def test_tie_rounds_down_both_coordinates(self):
        assert nearest_gaussian(complex(0.5, 0.5)) == GaussianInt(0, 0)
        assert nearest_gaussian(complex(-0.5, 2.5)) == GaussianInt(-1, 2)

    def test_plain_rounding(self):
        assert nearest_gaussian(complex(2.4, -1.7)) == GaussianInt(2, -2)

    @given(st.integers(-50, 50), st.integers(-50, 50))
    def test_half_integer_ties(self, a, b):
        z = (Fraction(2 * a + 1, 2), Fraction(2 * b + 1, 2))
        assert nearest_gaussian(z) == GaussianInt(a, b)

    @given(
        st.fractions(min_value=-10, max_value=10),
        st.fractions(min_value=-10, max_value=10),
    )
    def test_displacement_at_most_half(self, zr, zi):
        g = nearest_gaussian((zr, zi))
        assert abs(zr - g.a) <= Fraction(1, 2)
        assert abs(zi - g.b) <= Fraction(1, 2)


class TestHurwitzMap:
    def test_period_two_orbit(self):
        zsrc = ComplexPartsSource(
            RationalSource(Fraction(0)), ShiftedSource(ConstantSource("sqrt2"), -1)
        )
        z = zsrc.complex_at(256)
        t, d = hurwitz_map(z)
        assert (d.a, d.b) == (0, -2)
        assert abs(t.to_complex() + z.to_complex()) < 2.0 ** -200

    def test_exact_half_i_terminates(self):
        t, d = hurwitz_map((Fraction(0), Fraction(-1, 2)))
        assert (d.a, d.b) == (0, 2)
        assert t == (Fraction(0), Fraction(0))

    def test_zero_raises(self):
        with pytest.raises(ExactZero):
            hurwitz_map(complex(0, 0))

    def test_outputs_stay_in_box(self):
        # exact domain closure on random draws (tie-down remainders can touch
        # +1/2, a measure-zero event random dyadics do not hit)
        stream = RandomStream(2024)
        for i in range(1000):
            z = sample_uniform_box(stream.substream(i), 64)
            if z.is_zero():
                continue
            t, d = hurwitz_map(z)
            tr, ti = t.to_fractions()
            h = Fraction(1, 2)
            assert -h <= tr <= h and -h <= ti <= h
            assert d.norm() >= 2


class TestExpandPaperValues:
    def test_pi_rcf_24_digits(self):
        e = expand(Family.RCF, pi_source(Family.RCF), 24)
        assert e.digits == PI_RCF
        assert e.status is Status.ONGOING

    def test_pi_nicf_23_digits(self):
        e = expand(Family.NICF, pi_source(Family.NICF), 23)
        assert e.b == PI_NICF_B
        assert all(ev in (-1, 1) for ev in e.eps)
        assert len(e.b) == len(e.eps)

    def test_hccf_period_two(self):
        zsrc = ComplexPartsSource(
            RationalSource(Fraction(0)), ShiftedSource(ConstantSource("sqrt2"), -1)
        )
        e = expand(Family.HCCF, zsrc, 6)
        assert [(d.a, d.b) for d in e.digits] == [(0, -2), (0, 2)] * 3

    def test_rational_half_terminates(self):
        e = expand(Family.RCF, Fraction(1, 2), 10)
        assert e.digits == (2,) and e.status is Status.TERMINATED

    def test_nicf_of_golden_reduction(self):
        a0, src = reduce_to_domain(Family.NICF, ConstantSource("golden"))
        assert a0 == 2  # nearest integer to 1.618...
        e = expand(Family.NICF, src, 10)
        assert all(b == 3 for b in e.b)  # G - 2 = -1/(G+2) has constant digits
        assert all(ev == -1 for ev in e.eps)


class TestDigitStreams:
    def test_stationarity_consistency(self):
        # digit(k) of x equals digit(1) of the (k-1)-st iterate, all engines
        stream = RandomStream(77)
        for i in range(40):
            x = sample_uniform_unit(stream.substream(i), 512)
            f = x.to_fraction()
            digits, _ = rcf_digit_stream(f.numerator, f.denominator, 12)
            y = x
            for k in range(len(digits)):
                y, a = gauss_map(y)
                assert a == digits[k]

    def test_stationarity_consistency_nicf(self):
        stream = RandomStream(78)
        for i in range(40):
            x = sample_uniform_box(stream.substream(i), 512).re
            f = x.to_fraction()
            toks, _ = nicf_digit_stream(f.numerator, f.denominator, 12)
            y = x
            for k in range(len(toks)):
                y, b, eps = nicf_map(y)
                assert (b, eps) == toks[k]

    def test_stationarity_consistency_hccf(self):
        stream = RandomStream(79)
        for i in range(40):
            z = sample_uniform_box(stream.substream(i), 512)
            toks, _ = hccf_digit_stream(
                z.re.mantissa, z.im.mantissa, 1 << 512, 0, 10
            )
            y = z
            for k in range(len(toks)):
                y, d = hurwitz_map(y)
                assert (d.a, d.b) == toks[k]

    def test_digit_ranges_bulk(self):
        stream = RandomStream(80)
        for i in range(50):
            x = sample_uniform_unit(stream.substream(i), 2048)
            f = x.to_fraction()
            rcf, _ = rcf_digit_stream(f.numerator, f.denominator, 200)
            assert all(a >= 1 for a in rcf)
            z = sample_uniform_box(stream.substream(1000 + i), 2048)
            toks, _ = hccf_digit_stream(z.re.mantissa, z.im.mantissa, 1 << 2048, 0, 200)
            assert all(a * a + b * b >= 2 for a, b in toks)
            nic, _ = nicf_digit_stream(z.re.mantissa, 1 << 2048, 200)
            assert all(b >= 2 for b, _e in nic)

    def test_hccf_fastpath_matches_exact_fallback(self):
        # force the exact path by shrinking the magnitude limit
        import cfextremes.engines as eng

        stream = RandomStream(81)
        z = sample_uniform_box(stream.substream(0), 1024)
        args = (z.re.mantissa, z.im.mantissa, 1 << 1024, 0, 80)
        fast, _ = hccf_digit_stream(*args)
        old = eng._MAG_LIMIT
        eng._MAG_LIMIT = -1.0  # everything falls back to exact rounding
        try:
            slow, _ = hccf_digit_stream(*args)
        finally:
            eng._MAG_LIMIT = old
        assert fast == slow


class TestConvergents:
    def test_rcf_by_hand(self):
        assert convergents(RcfExpansion((7, 15, 1), Status.ONGOING)) == [
            (1, 7),
            (15, 106),
            (16, 113),
        ]

    def test_single_digit_base_case(self):
        assert convergents(RcfExpansion((5,), Status.ONGOING)) == [(1, 5)]
        e = NicfExpansion((4,), (-1,), Status.ONGOING)
        assert convergents(e) == [(-1, 4)]  # eps1/b1

    def test_hccf_first_approximant(self):
        e = HccfExpansion(GaussianInt(0, 0), (GaussianInt(0, -2),), Status.ONGOING)
        (p, q), = convergents(e)
        # p/q = 1/(-2i) = 0.5i
        approx = complex(p) / complex(q)
        assert approx == 0.5j
        z = (math.sqrt(2) - 1) * 1j
        assert abs(z - approx) < 0.09

    def test_nicf_signed_digit_reconstruction(self):
        # eps1*b1, (eps1*eps2)*b2, ... are the plain nearest-integer digits:
        # reconstructing x from them must match the (b, eps) convergents
        stream = RandomStream(82)
        for i in range(20):
            x = sample_uniform_box(stream.substream(i), 256).re
            f = x.to_fraction()
            toks, _ = nicf_digit_stream(f.numerator, f.denominator, 12)
            e = NicfExpansion(
                tuple(t[0] for t in toks), tuple(t[1] for t in toks), Status.ONGOING
            )
            signed = e.signed_digits()
            # plain NICF continued fraction: x = 1/(c1 + 1/(c2 + ...)) with
            # signed digits c_k; evaluate from the bottom exactly
            val = Fraction(0)
            for c in reversed(signed):
                val = 1 / (c + val)
            p, q = convergents(e)[-1]
            assert val == Fraction(p, q)

    def test_coprimality(self):
        e = expand(Family.RCF, pi_source(Family.RCF), 20)
        for p, q in convergents(e):
            assert math.gcd(p, q) == 1


class TestReconstruction:
    def test_pi_rcf_20_digits(self):
        src = pi_source(Family.RCF)
        e = expand(Family.RCF, src, 20)
        ok, errs = reconstruct_check(src.real_at(512), e, 1e-15)
        assert ok
        assert errs[-1] < 1e-15

    def test_random_hccf_30_digits(self):
        stream = RandomStream(83)
        for i in range(10):
            z = sample_uniform_box(stream.substream(i), 1024)
            if z.is_zero():
                continue
            e = expand(Family.HCCF, z, 30)
            ok, errs = reconstruct_check(z, e, 1e-6)
            assert ok

    def test_terminated_rational_exact_equality(self):
        x = Fraction(17, 73)
        e = expand(Family.RCF, x, 50)
        assert e.status is Status.TERMINATED
        ok, errs = reconstruct_check(x, e, 1e-30)
        assert ok and errs[-1] == 0.0

    def test_error_shrinks_every_other_step(self):
        stream = RandomStream(84)
        for fam, mk in [
            (Family.RCF, lambda s: sample_uniform_unit(s, 512)),
            (Family.NICF, lambda s: sample_uniform_box(s, 512).re),
            (Family.HCCF, lambda s: sample_uniform_box(s, 512)),
        ]:
            x = mk(stream.substream(hash(fam) % 100))
            e = expand(fam, x, 25)
            ok, errs = reconstruct_check(x, e, 1e-3)
            assert ok
            for i in range(2, len(errs)):
                assert errs[i] < errs[i - 2] or errs[i] == 0.0


class TestNaiveTrap:
    def test_interior_point_stays(self):
        rep = naive_complex_trap(complex(0.7, 0.5), 100)
        assert rep.iterations == 100 and rep.all_digits_minus_i
        assert len(rep.orbit) == 101

    def test_membership_rejects_outside(self):
        with pytest.raises(OutsideDomain):
            naive_complex_trap(complex(0.2, 0.2), 10)

    def test_tangency_point_not_a_member(self):
        # 0.5+0.5i sits where the two bounding circles touch; the naive map
        # actually terminates there (1/z = 1 - i exactly)
        assert not naive_region_contains(complex(0.5, 0.5))

    def test_membership_examples(self):
        assert naive_region_contains(complex(0.7, 0.5))
        assert not naive_region_contains(complex(0.1, 0.05))  # outside circles but not trapped
        assert not naive_region_contains(complex(0.6, 0.05))  # inside C1

    def test_random_region_points_trapped(self):
        stream = RandomStream(85)
        found = 0
        idx = 0
        while found < 100:
            sub = stream.substream(idx)
            idx += 1
            x = Fraction(1, 2) + Fraction(sub.mantissa_bits(0, 128), 1 << 129)
            y = Fraction(sub.mantissa_bits(1, 128), 1 << 128)
            if not naive_region_contains((x, y)):
                continue
            found += 1
            rep = naive_complex_trap((x, y), 100)
            assert rep.all_digits_minus_i


class TestSerialization:
    def test_expansion_json_roundtrip_fields(self):
        e = expand(Family.NICF, pi_source(Family.NICF), 5)
        d = expansion_to_json(e, "pi", e.precision_bits)
        assert d["family"] == "nicf"
        assert d["digits"]["b"] == [7, 16, 294, 3, 4]
        assert d["status"] == "Ongoing"

    def test_domain_membership_helper(self):
        assert in_fundamental_square(complex(-0.5, 0.0))
        assert not in_fundamental_square(complex(0.5, 0.0))
