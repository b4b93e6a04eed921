"""Monte Carlo study harness."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from scoregof.bootstrap import Parametric
from scoregof.directions import ExpMixture, HermiteSet, IndicatorHalfline, NormalScores
from scoregof.exceptions import DomainError
from scoregof.harness import (
    CopulaCorrelation,
    DriftConfig,
    FixedAlternative,
    GaussianMixture,
    LocalScaling,
    StudyConfig,
    StudyReport,
    RATE_COLUMNS,
    alternative_from_dict,
    drift_check,
    equivalence_check,
    predicted_drift,
    read_report,
    resolve,
    run_power_study,
    run_size_study,
    sample_alternative,
    write_report,
)
from scoregof.model import GaussianLocationScale, Independence, SimpleNull
from scoregof.stats import StatisticSpec


def small_cfg(**kw):
    base = dict(null=GaussianLocationScale(), statistic=StatisticSpec("cvm"), scheme=Parametric(19), n=30, R=100,
                seed=9)
    base.update(kw)
    return StudyConfig(**base)


class TestAlternatives:
    def test_null_reductions(self):
        x = sample_alternative(GaussianMixture(0.0, 2.0), 50, np.random.default_rng(1))
        assert_array_equal(x, np.random.default_rng(1).standard_normal(50))
        X = sample_alternative(CopulaCorrelation(0.0), 50, np.random.default_rng(1))
        assert_array_equal(X, np.random.default_rng(1).random((50, 2)))

    def test_mixture_mean(self):
        x = sample_alternative(GaussianMixture(0.3, 2.0), 10**6, np.random.default_rng(2))
        assert abs(x.mean() - 0.6) <= 4 * x.std() / 1000

    def test_copula_correlation(self):
        X = sample_alternative(CopulaCorrelation(0.6), 20000, np.random.default_rng(3))
        from scoregof.numerics import std_normal_quantile
        Z = std_normal_quantile(X)
        assert abs(np.corrcoef(Z.T)[0, 1] - 0.6) < 0.02

    def test_scaling(self):
        assert resolve(LocalScaling(GaussianMixture(0.0, 1.0), 2.0), 100).eps == pytest.approx(0.2)
        assert resolve(FixedAlternative(GaussianMixture(0.3, 1.0), 0.5), 100).eps == pytest.approx(0.15)
        with pytest.raises(DomainError):
            resolve(LocalScaling(GaussianMixture(0.0, 1.0), 6.0), 100)
        with pytest.raises(DomainError):
            CopulaCorrelation(1.0)

    def test_dict_round_trip(self):
        alt = LocalScaling(CopulaCorrelation(0.0), 1.5)
        assert alternative_from_dict(alt.to_dict()) == alt


class TestStudies:
    def test_config_invariants(self):
        small_cfg(R=100)
        with pytest.raises(DomainError):
            small_cfg(R=50)
        with pytest.raises(DomainError):
            small_cfg(t_grid=(1.0, 2.0))

    def test_nested_levels(self):
        a = run_size_study(small_cfg(alpha=0.05))
        b = run_size_study(small_cfg(alpha=0.01))
        key = "p_values[n=30,t=0.0]"
        assert_array_equal(a.arrays[key], b.arrays[key])
        rej05, rej01 = a.arrays[key] <= 0.05, b.arrays[key] <= 0.01
        assert np.all(rej05[rej01])
        assert b.rows[0]["rate"] <= a.rows[0]["rate"]

    def test_power_t0_equals_size(self):
        alt = LocalScaling(GaussianMixture(0.0, 1.0))
        size = run_size_study(small_cfg())
        power = run_power_study(small_cfg(alternative=alt, t_grid=(0.0, 2.0)))
        assert power.rows[0]["rate"] == size.rows[0]["rate"]
        assert_array_equal(power.arrays["p_values[n=30,t=0.0]"], size.arrays["p_values[n=30,t=0.0]"])

    def test_reproducible(self):
        a = run_size_study(small_cfg())
        b = run_size_study(small_cfg())
        assert a.to_dict() == b.to_dict()

    def test_rate_and_se(self):
        row = run_size_study(small_cfg()).rows[0]
        assert 0 <= row["rate"] <= 1
        assert row["se"] == pytest.approx(math.sqrt(row["rate"] * (1 - row["rate"]) / 100))
        assert tuple(row) == RATE_COLUMNS


class TestReports:
    def test_empty_csv(self, tmp_path):
        write_report(StudyReport("size", RATE_COLUMNS, []), tmp_path / "e.csv")
        assert (tmp_path / "e.csv").read_text().splitlines() == ["n,t,stat,rate,se,seed"]

    def test_round_trips(self, tmp_path):
        rep = run_size_study(small_cfg())
        write_report(rep, tmp_path / "r.json", "json")
        back = read_report(tmp_path / "r.json", "json")
        assert back.rows == rep.rows
        assert back.config == rep.config
        for k in rep.arrays:
            assert_array_equal(back.arrays[k], rep.arrays[k])
        write_report(rep, tmp_path / "r.csv")
        again = read_report(tmp_path / "r.csv")
        assert again.rows == rep.rows

    def test_lossless_floats(self, tmp_path):
        row = {"n": 7, "t": 0.1 + 0.2, "stat": "ks", "rate": 1 / 3, "se": math.pi / 1e5, "seed": 1}
        write_report(StudyReport("size", RATE_COLUMNS, [row]), tmp_path / "f.csv")
        assert read_report(tmp_path / "f.csv").rows == [row]

    def test_io_error_names_path(self, tmp_path):
        with pytest.raises(OSError, match="nowhere"):
            write_report(StudyReport("size", RATE_COLUMNS, []), tmp_path / "nowhere" / "x.csv")


class TestDrift:
    @pytest.mark.parametrize("lam,delta", [(1.0, 1.0), (0.5, 2.0), (-1.0, 1.5), (2.0, -0.5)])
    def test_mixture_prediction_closed_form(self, lam, delta):
        pred = predicted_drift(GaussianLocationScale(), ExpMixture([lam]), GaussianMixture(0.1, delta), t=1.0)
        closed = math.expm1(lam * delta) - lam * delta - (lam * delta) ** 2 / 2
        assert_allclose(pred, [closed], atol=1e-10)

    def test_unit_parameters(self):
        pred = predicted_drift(GaussianLocationScale(), ExpMixture([1.0]), GaussianMixture(0.1, 1.0), t=1.0)
        assert_allclose(pred, [math.e - 2.5], atol=1e-12)
        assert_allclose(pred, [0.218282], atol=1e-6)

    def test_copula_prediction(self):
        assert_allclose(predicted_drift(Independence(), NormalScores(), CopulaCorrelation(0.1), t=1.0), [1.0],
                        atol=1e-10)

    def test_orthogonal_direction(self):
        cfg = DriftConfig(GaussianLocationScale(), HermiteSet((3,)), LocalScaling(GaussianMixture(0.0, 1.0, True)),
                          n=200, R=400, seed=3)
        row = drift_check(cfg).rows[0]
        assert abs(row["predicted"]) < 1e-12
        assert abs(row["mean"]) <= 3 * row["se"]

    def test_simple_null_rejected(self):
        with pytest.raises(DomainError):
            predicted_drift(SimpleNull(), IndicatorHalfline([0.0]), GaussianMixture(0.1))


class TestEquivalence:
    def test_simple_null_gap_is_zero(self):
        rep = equivalence_check(SimpleNull("norm"), ns=(20, 80), R=100, seed=1)
        for k, gaps in rep.arrays.items():
            assert np.all(gaps == 0.0)

    def test_gap_shrinks(self):
        rep = equivalence_check(GaussianLocationScale(), ns=(50, 800), R=100, seed=2)
        assert rep.rows[0]["median_gap"] / rep.rows[1]["median_gap"] > 1

    def test_bivariate_rejected(self):
        with pytest.raises(DomainError):
            equivalence_check(Independence(), R=100)
