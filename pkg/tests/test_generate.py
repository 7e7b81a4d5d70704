from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from contpass.cps import to_convertible, unfloat
from contpass.generate import (
    GenConfig,
    SplitMix64,
    gen_conv_program,
    gen_samples,
    gen_term,
    sample_seeds,
)
from contpass.lifting import all_targets, check_liftable, float_blocks, lift_all
from contpass.parser import validate
from contpass.terms import Call, LetRec, pretty_print, subterms


class TestSplitMix64:
    # Reference outputs of the published SplitMix64 algorithm.
    def test_seed_zero(self):
        rng = SplitMix64(0)
        assert [rng.next_u64() for _ in range(3)] == [
            0xE220A8397B1DCDAF,
            0x6E789E6AA1B965F4,
            0x06C45D188009454F,
        ]

    def test_seed_1234567(self):
        rng = SplitMix64(1234567)
        assert [rng.next_u64() for _ in range(5)] == [
            6457827717110365317,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ]

    @given(seeds, st.integers(1, 1000))
    def test_below_in_range(self, s, n):
        rng = SplitMix64(s)
        assert all(0 <= rng.below(n) < n for _ in range(20))

    @given(seeds, st.integers(-5, 5), st.integers(0, 10))
    def test_between_inclusive(self, s, lo, width):
        rng = SplitMix64(s)
        assert all(lo <= rng.between(lo, lo + width) <= lo + width for _ in range(20))

    def test_sample_seeds(self):
        rng = SplitMix64(9)
        assert sample_seeds(9, 4) == [rng.next_u64() for _ in range(4)]


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [{"max_depth": 0}, {"max_arity": -1}, {"mode": "weird"}, {"int_range": (3, 1)}],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            GenConfig(**kw)

    def test_reproducible(self):
        cfg = GenConfig(seed=42)
        assert [pretty_print(t) for _, t in gen_samples(cfg, 20)] == [
            pretty_print(t) for _, t in gen_samples(cfg, 20)
        ]

    def test_sample_seed_regenerates(self):
        cfg = GenConfig(seed=5, mode="liftable")
        for s, t in gen_samples(cfg, 10):
            assert gen_term(GenConfig(seed=s, mode="liftable")) == t

    def test_depth_one_is_closed(self):
        t = gen_term(GenConfig(seed=1, max_depth=1))
        assert validate(t) == []

    def test_no_functions(self):
        t = gen_term(GenConfig(seed=3, max_funs=0))
        assert not any(isinstance(u, (LetRec, Call)) for u in subterms(t))


class TestSoundness:
    @given(seeds, st.integers(1, 5), st.integers(0, 3))
    def test_general_validates(self, s, depth, arity):
        t = gen_term(GenConfig(seed=s, max_depth=depth, max_arity=arity))
        assert validate(t) == []

    @given(seeds)
    def test_liftable_targets(self, s):
        t = gen_term(GenConfig(seed=s, mode="liftable"))
        assert validate(t) == []
        assert all(check_liftable(t, g).liftable for g in all_targets(t))

    @given(seeds)
    def test_convertible_pipeline(self, s):
        cfg = GenConfig(seed=s, mode="convertible")
        t = gen_term(cfg)
        assert validate(t) == []
        assert t == unfloat(gen_conv_program(cfg))
        to_convertible(float_blocks(lift_all(t)))

    def test_calls_are_common(self):
        terms = [t for _, t in gen_samples(GenConfig(seed=11), 200)]
        with_calls = sum(any(isinstance(u, Call) for u in subterms(t)) for t in terms)
        assert with_calls >= 150

    def test_liftable_mode_exercises_lifting(self):
        terms = [t for _, t in gen_samples(GenConfig(seed=11, mode="liftable"), 200)]
        assert sum(lift_all(t) != t for t in terms) >= 20
