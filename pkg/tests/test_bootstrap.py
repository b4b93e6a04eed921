"""Bootstrap null distributions, p-values and critical values."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal
from scipy import stats

from scoregof.bootstrap import (
    MOutOfN,
    NullDistribution,
    Parametric,
    Resampling,
    decide,
    default_m,
    null_distribution,
    p_value,
    run_test,
    scheme_from_dict,
)
from scoregof.directions import build_family
from scoregof.exceptions import DegenerateFitError, DomainError
from scoregof.model import GaussianCopula, GaussianLocationScale, Independence, SimpleNull
from scoregof.stats import StatisticSpec

import _studies


def dist_of(reps):
    return NullDistribution(np.array(reps, dtype=float), {"name": "parametric", "B": len(reps)}, 0, 10)


class TestDecision:
    def test_counting_example(self):
        out = decide(5.0, dist_of([1, 2, 6, 7]), 0.05)
        assert out.p_value == pytest.approx(0.6)
        assert not out.reject

    def test_extremes(self):
        d = dist_of(np.arange(19.0))
        assert decide(100.0, d, 0.05).p_value == pytest.approx(1 / 20)
        assert decide(-1.0, d, 0.05).p_value == 1.0

    def test_critical_value(self):
        d = dist_of(np.arange(1.0, 20.0))
        assert decide(0.0, d, 0.05).critical_value == 19.0
        assert decide(0.0, d, 0.01).critical_value == math.inf
        d = dist_of(np.arange(1.0, 200.0))
        assert decide(0.0, d, 0.05).critical_value == 190.0

    def test_reject_iff_above_critical_value(self):
        d = dist_of(np.random.default_rng(0).normal(size=199))
        for T in np.linspace(-3, 4, 71):
            out = decide(T, d, 0.05)
            assert out.reject == (T >= out.critical_value)

    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=30), st.floats(-6, 6), st.floats(-6, 6))
    def test_p_value_monotone(self, reps, a, b):
        lo, hi = sorted((a, b))
        assert p_value(hi, reps) <= p_value(lo, reps)

    def test_bad_alpha(self):
        with pytest.raises(DomainError):
            decide(1.0, dist_of([1.0, 2.0]), 1.5)

    def test_outcome_field_order(self):
        keys = list(decide(1.0, dist_of([0.0, 2.0]), 0.5).to_dict())
        assert keys == ["statistic", "p_value", "critical_value", "alpha", "B", "scheme", "n", "seed", "null",
                        "family", "diagnostics"]


class TestSchemes:
    def test_default_m(self):
        assert default_m(100) == 22
        assert default_m(1000) == 100
        assert default_m(27) == 9

    def test_minimum_B(self, rng):
        with pytest.raises(DomainError):
            null_distribution(rng.normal(size=20), GaussianLocationScale(), StatisticSpec("cvm"), Parametric(10), 1)

    def test_seed_required(self, rng):
        with pytest.raises(DomainError):
            null_distribution(rng.normal(size=20), GaussianLocationScale(), StatisticSpec("cvm"), Parametric(19), None)

    def test_scheme_round_trip(self):
        for s in (Parametric(99), Resampling(49), MOutOfN(99, 10, True)):
            assert scheme_from_dict(s.to_dict()) == s

    @pytest.mark.parametrize("scheme", [Parametric(300), Resampling(300), MOutOfN(300)])
    def test_reproducible_and_worker_independent(self, scheme, rng):
        x = rng.normal(size=40)
        stat = StatisticSpec("ks")
        a = null_distribution(x, GaussianLocationScale(), stat, scheme, 99)
        b = null_distribution(x, GaussianLocationScale(), stat, scheme, 99, n_jobs=2)
        c = null_distribution(x, GaussianLocationScale(), stat, scheme, 100)
        assert_array_equal(a.replicates, b.replicates)
        assert not np.array_equal(a.replicates, c.replicates)
        assert np.all(np.diff(a.replicates) >= 0)

    @pytest.mark.parametrize("name", ["kw", "normal-scores"])
    def test_rank_statistics_ignore_synthetic_marginals(self, name, rng):
        X = rng.normal(size=(30, 2))
        stat = StatisticSpec(name)
        a = null_distribution(X, Independence(("uniform", "uniform")), stat, Parametric(59), 4)
        b = null_distribution(X, Independence(("norm", "expon")), stat, Parametric(59), 4)
        assert_array_equal(a.replicates, b.replicates)

    def test_degenerate_subsamples_are_redrawn(self):
        x = np.concatenate([np.zeros(95), np.arange(1.0, 6.0)])
        d1 = null_distribution(x, GaussianLocationScale(), StatisticSpec("cvm"), MOutOfN(99), 3)
        d2 = null_distribution(x, GaussianLocationScale(), StatisticSpec("cvm"), MOutOfN(99), 3)
        assert d1.B == 99 and d1.m == 22
        assert_array_equal(d1.replicates, d2.replicates)

    def test_hopeless_sample_raises(self):
        x = np.concatenate([np.zeros(999), [1.0]])
        with pytest.raises(DegenerateFitError):
            null_distribution(x, GaussianLocationScale(), StatisticSpec("cvm"), MOutOfN(19, m=5), 3)

    @pytest.mark.parametrize("scheme", [Parametric(99), Resampling(99), MOutOfN(99)])
    @pytest.mark.parametrize("null,stat,shape", [
        (SimpleNull("uniform"), StatisticSpec("cvm"), (50,)),
        (GaussianLocationScale(), StatisticSpec("sup", family=build_family("haar-weighted", max_scale=3)), (50,)),
        (GaussianLocationScale(), StatisticSpec("quad", family=build_family("hermite-set")), (50,)),
        (Independence(), StatisticSpec("sup", family=build_family("rank-indicator", m=4)), (50, 2)),
        (Independence(), StatisticSpec("quad", family=build_family("tensor-haar-weighted", max_scale=1)), (50, 2)),
        (GaussianCopula(0.2), StatisticSpec("normal-scores"), (50, 2)),
    ])
    def test_run_test_all_combinations(self, scheme, null, stat, shape):
        X = np.random.default_rng(8).uniform(size=shape)
        out = run_test(X, null, stat, scheme, 0.05, 12)
        assert 0 < out.p_value <= 1
        assert out.B == 99 and out.n == 50 and out.seed == 12
        assert out.null == null.to_dict()


def test_csv_round_trip(tmp_path, rng):
    d = null_distribution(rng.normal(size=30), GaussianLocationScale(), StatisticSpec("cvm"), MOutOfN(49), 5)
    d.to_csv(tmp_path / "reps.csv")
    back = NullDistribution.from_csv(tmp_path / "reps.csv")
    assert_array_equal(back.replicates, d.replicates)
    assert (back.seed, back.n, back.m, back.statistic) == (5, 30, 10, "cvm")


@pytest.mark.slow
def test_p_values_uniform_under_null():
    rep = _studies.size_study("simple", "ks", "parametric")
    p = rep.arrays["p_values[n=100,t=0.0]"]
    assert p.size == 2000
    assert stats.kstest(p, "uniform").statistic < 0.05
