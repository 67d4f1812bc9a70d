import numpy as np
import pytest
from scipy import stats as sps
from scipy.optimize import brentq

from distclust.errors import InputError
from distclust.pearson import (PearsonDistribution, PearsonParams,
                               classify_pearson_type, sample_pearson)


def _kurtosis_on_type_v_curve(skew):
    b1 = skew**2
    f = lambda b2: b1 * (b2 + 3) ** 2 - 4 * (4 * b2 - 3 * b1) * (2 * b2 - 3 * b1 - 6)
    return brentq(f, 3 + 1.5 * b1 + 1e-9, 60.0)


CASES = {
    "0": PearsonParams(0.0, 1.0, 0.0, 3.0),
    "II": PearsonParams(2.0, 3.0, 0.0, 2.2),
    "VII": PearsonParams(0.0, 1.0, 0.0, 9.0),
    "I": PearsonParams(-4.8, 12.0, -0.5, 2.8),
    "III": PearsonParams(1.0, 2.0, 0.8, 3.0 + 1.5 * 0.64),
    "IV": PearsonParams(-4.8, 12.0, -0.05, 3.10),
    "V": PearsonParams(0.0, 1.0, 1.0, _kurtosis_on_type_v_curve(1.0)),
    "VI": PearsonParams(0.0, 1.0, 1.0, 4.7),
}


def test_classification():
    for expected, params in CASES.items():
        assert classify_pearson_type(params.skewness, params.kurtosis) == expected


def test_feasibility_errors():
    with pytest.raises(InputError):
        PearsonParams(0.0, 1.0, 2.0, 4.9)  # kurtosis <= skew^2 + 1
    with pytest.raises(InputError):
        PearsonParams(0.0, 0.0, 0.0, 3.0)  # zero scale
    with pytest.raises(InputError):
        classify_pearson_type(0.0, 0.5)


@pytest.mark.parametrize("name", sorted(CASES))
def test_moment_fidelity(name):
    params = CASES[name]
    rng = np.random.default_rng(hash(name) % 2**32)
    x = sample_pearson(params, 150_000, rng)
    m, s = x.mean(), x.std(ddof=1)
    skew = float(((x - m) ** 3).mean() / s**3)
    kurt = float(((x - m) ** 4).mean() / s**4)
    assert m == pytest.approx(params.mean, abs=0.02 * params.std_dev)
    assert s == pytest.approx(params.std_dev, rel=0.02)
    if name != "VII":  # t(5) higher moments converge too slowly for a fast test
        assert skew == pytest.approx(params.skewness, abs=0.1)
        assert kurt == pytest.approx(params.kurtosis, rel=0.12)


@pytest.mark.parametrize("name", sorted(CASES))
def test_cdf_ppf_round_trip(name):
    dist = PearsonDistribution(CASES[name])
    qs = np.linspace(0.001, 0.999, 211)
    back = dist.cdf(dist.ppf(qs))
    assert np.max(np.abs(back - qs)) < 1e-6


@pytest.mark.parametrize("name", sorted(CASES))
def test_ppf_monotone(name):
    dist = PearsonDistribution(CASES[name])
    qs = np.linspace(0.005, 0.995, 97)
    vals = dist.ppf(qs)
    assert np.all(np.diff(vals) > 0)


def test_type_vii_matches_student_t():
    # kurtosis 9 corresponds to 5 degrees of freedom, scaled to unit variance
    dist = PearsonDistribution(PearsonParams(0.0, 1.0, 0.0, 9.0))
    qs = np.linspace(0.01, 0.99, 21)
    expected = sps.t(df=5).ppf(qs) / np.sqrt(5.0 / 3.0)
    assert np.allclose(dist.ppf(qs), expected, atol=1e-9)


def test_type_zero_matches_normal():
    dist = PearsonDistribution(PearsonParams(3.0, 2.0, 0.0, 3.0))
    qs = np.linspace(0.01, 0.99, 21)
    assert np.allclose(dist.ppf(qs), sps.norm(3.0, 2.0).ppf(qs), atol=1e-12)


def test_sampling_deterministic():
    params = CASES["IV"]
    a = sample_pearson(params, 500, np.random.default_rng(42))
    b = sample_pearson(params, 500, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_type_iv_reflection_symmetry():
    # Mirrored skewness should mirror the quantile function.
    plus = PearsonDistribution(PearsonParams(0.0, 1.0, 0.4, 4.0))
    minus = PearsonDistribution(PearsonParams(0.0, 1.0, -0.4, 4.0))
    qs = np.linspace(0.01, 0.99, 31)
    assert np.allclose(plus.ppf(qs), -minus.ppf(1.0 - qs), atol=1e-8)


def test_sample_size_validation():
    with pytest.raises(InputError):
        sample_pearson(CASES["0"], 0, np.random.default_rng(0))


def test_ppf_domain_validation():
    dist = PearsonDistribution(CASES["IV"])
    with pytest.raises(InputError):
        dist.ppf(np.array([0.0, 0.5]))
