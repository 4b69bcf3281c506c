import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.stats

from cfextremes.errors import PrecisionExhausted
from cfextremes.numerics import (
    AdaptiveReal,
    ComplexPartsSource,
    ConstantSource,
    RandomStream,
    RationalSource,
    ShiftedSource,
    UniformBoxSource,
    UniformUnitSource,
    default_initial_bits,
    refine_and_agree,
    sample_uniform_box,
    sample_uniform_unit,
)


class TestAdaptiveReal:
    def test_exact_dyadic_value(self):
        x = AdaptiveReal(3, -2, 8)
        assert x.to_fraction() == Fraction(3, 4)
        assert x.to_float() == 0.75

    def test_shift_is_exact(self):
        x = AdaptiveReal(5, -3, 8).shifted_by_int(-2)  # 5/8 - 2
        assert x.to_fraction() == Fraction(5, 8) - 2

    def test_huge_mantissa_to_float(self):
        x = AdaptiveReal((1 << 5000) + 1, -5000, 5000)
        assert x.to_float() == 1.0


class TestRandomStream:
    def test_repeat_draw_identical(self):
        s = RandomStream(1).substream(0)
        a = sample_uniform_unit(s, 256)
        b = sample_uniform_unit(s, 256)
        assert a == b

    def test_substreams_distinct(self):
        s = RandomStream(1)
        a = sample_uniform_unit(s.substream(0), 256)
        b = sample_uniform_unit(s.substream(1), 256)
        assert a != b

    def test_seeds_distinct(self):
        a = sample_uniform_unit(RandomStream(1).substream(0), 256)
        b = sample_uniform_unit(RandomStream(2).substream(0), 256)
        assert a != b

    def test_refinement_extends_mantissa(self):
        s = RandomStream(7).substream(3)
        lo = sample_uniform_unit(s, 128)
        hi = sample_uniform_unit(s, 512)
        assert hi.mantissa >> (512 - 128) == lo.mantissa

    def test_box_draw_in_domain_and_reproducible(self):
        s = RandomStream(9).substream(4)
        z = sample_uniform_box(s, 128)
        h = Fraction(1, 2)
        assert -h <= z.re.to_fraction() < h
        assert -h <= z.im.to_fraction() < h
        assert sample_uniform_box(s, 128) == z

    def test_bits_floor_rejected(self):
        with pytest.raises(ValueError):
            sample_uniform_unit(RandomStream(0), 52)
        with pytest.raises(ValueError):
            sample_uniform_box(RandomStream(0), 32)

    def test_mean_of_unit_draws(self):
        # CLT: sd of the mean is 1/(sqrt(12 n)) ~ 9.1e-4; tolerance is 3 sigma+
        s = RandomStream(123)
        vals = [sample_uniform_unit(s.substream(i), 64).to_float() for i in range(100_000)]
        assert abs(np.mean(vals) - 0.5) < 0.005

    def test_mean_of_box_draws(self):
        s = RandomStream(124)
        zs = [sample_uniform_box(s.substream(i), 64).to_complex() for i in range(100_000)]
        assert abs(np.mean([z.real for z in zs])) < 0.005
        assert abs(np.mean([z.imag for z in zs])) < 0.005

    def test_uniformity_ks(self):
        # 1% critical value for the one-sample KS statistic is ~1.63/sqrt(n)
        s = RandomStream(55)
        vals = [sample_uniform_unit(s.substream(i), 64).to_float() for i in range(10_000)]
        stat = scipy.stats.kstest(vals, "uniform").statistic
        assert stat < 1.63 / math.sqrt(10_000)


class TestConstantSources:
    def test_pi_value(self):
        v = ConstantSource("pi").real_at(128).to_float()
        assert abs(v - math.pi) < 1e-30 + 2.0 ** -120

    def test_truncation_refines(self):
        c = ConstantSource("sqrt2")
        lo = c.real_at(100).to_fraction()
        hi = c.real_at(200).to_fraction()
        assert 0 <= hi - lo < Fraction(1, 2 ** 100)

    def test_golden_identity_value(self):
        g = ConstantSource("golden").real_at(200).to_float()
        assert abs(g * g - g - 1.0) < 1e-14

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            ConstantSource("e")

    def test_shifted_source(self):
        src = ShiftedSource(ConstantSource("pi"), -3)
        # math.pi itself is only a 53-bit approximation
        assert abs(src.real_at(64).to_float() - (math.pi - 3)) < 1e-15


class TestRefineAndAgree:
    def test_certifies_pi_rcf_prefix(self):
        from cfextremes.engines import _rcf_expand_fn

        src = ShiftedSource(ConstantSource("pi"), -3)
        cert = refine_and_agree(src, _rcf_expand_fn, 5)
        assert list(cert.tokens) == [7, 15, 1, 292, 1]
        assert not cert.terminated

    def test_exact_rational_terminates(self):
        from cfextremes.engines import _rcf_expand_fn

        cert = refine_and_agree(RationalSource(Fraction(1, 2)), _rcf_expand_fn, 10)
        assert cert.tokens == (2,)
        assert cert.terminated
        assert cert.precision_bits == 0

    def test_sqrt2_fixed_point_any_p0(self):
        from cfextremes.engines import _rcf_expand_fn

        src = ShiftedSource(ConstantSource("sqrt2"), -1)
        d64 = refine_and_agree(src, _rcf_expand_fn, 50, p0=64).tokens
        d1024 = refine_and_agree(src, _rcf_expand_fn, 50, p0=1024).tokens
        assert d64 == d1024 == tuple([2] * 50)

    def test_precision_monotonicity(self):
        # digits certified at lower precision are a prefix of deeper runs
        from cfextremes.engines import _rcf_expand_fn

        src = UniformUnitSource(RandomStream(31).substream(2))
        short = refine_and_agree(src, _rcf_expand_fn, 10).tokens
        long = refine_and_agree(src, _rcf_expand_fn, 40).tokens
        assert long[:10] == short

    def test_dyadic_source_certifies_termination(self):
        from cfextremes.engines import _rcf_expand_fn

        class DyadicSource(RationalSource.__mro__[1]):  # RealSource
            def real_at(self, bits):
                return AdaptiveReal(1 << (bits - 1), -bits, bits)  # exactly 1/2

        cert = refine_and_agree(DyadicSource(), _rcf_expand_fn, 10, p0=64)
        assert cert.tokens == (2,) and cert.terminated

    def test_cap_raises_for_near_rational_source(self):
        from cfextremes.engines import _rcf_expand_fn

        class HiddenThirdSource(RationalSource.__mro__[1]):  # RealSource
            """Truncations of 1/3 that never reveal exactness: past the
            first digit, runs at p and 2p always disagree."""

            def real_at(self, bits):
                return AdaptiveReal((1 << bits) // 3, -bits, bits)

        with pytest.raises(PrecisionExhausted):
            refine_and_agree(HiddenThirdSource(), _rcf_expand_fn, 5, p0=64, cap=4096)

    def test_default_initial_bits(self):
        assert default_initial_bits(24) == 64 + 8 * 24


class TestComplexSources:
    def test_parts_source_exact(self):
        src = ComplexPartsSource(RationalSource(Fraction(1, 4)), RationalSource(Fraction(-1, 3)))
        assert src.exact_value() == (Fraction(1, 4), Fraction(-1, 3))

    def test_box_source_refines(self):
        src = UniformBoxSource(RandomStream(77).substream(5))
        lo = src.complex_at(128)
        hi = src.complex_at(256)
        d_re = hi.re.to_fraction() - lo.re.to_fraction()
        assert 0 <= d_re < Fraction(1, 2 ** 128)
