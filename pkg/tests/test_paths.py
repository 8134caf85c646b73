import math

import numpy as np
import pytest
from scipy import stats as sps

from sojourn import paths
from sojourn.paths import (CHOLESKY_MAX_POINTS, DomainError, Grid, ProcessModel, RateFunction,
                           SpectralFailureError, dump_paths_csv, sample_drifted_field, sample_fbm,
                           sample_model, sample_nonstationary, sample_stationary, sample_time_changed)
from sojourn.stats import SeedSpec, make_stream

N = 100_000


def stream(idx=0, seed=2024):
    return make_stream(SeedSpec(seed, idx))


def within_3se(x, target):
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(x.mean() - target) <= 3 * se


def var_within_3se(x, target):
    # stderr of the sample variance via the fourth central moment
    d = (x - x.mean()) ** 2
    return abs(d.mean() - target) <= 3 * d.std(ddof=1) / math.sqrt(x.size)


def test_grid_counts():
    g = Grid(0.01, 10.0)
    assert g.n_points == 2001 and g.origin_index == 1000
    assert Grid(0.01, 10.0, "one_sided").n_points == 1001
    with pytest.raises(DomainError):
        Grid(0.0, 1.0)
    with pytest.raises(DomainError):
        Grid(0.1, 1.0, "left")


@pytest.mark.parametrize("alpha", [0.0, 2.5, -1.0])
def test_alpha_domain(alpha):
    with pytest.raises(DomainError):
        sample_fbm(alpha, Grid(0.5, 2.0), stream())


def test_fbm_alpha1_variance():
    s = sample_fbm(1.0, Grid(0.5, 2.0, "one_sided"), stream(), N)
    assert var_within_3se(s.at(1.0), 1.0)


def test_fbm_alpha2_degenerate():
    s = sample_fbm(2.0, Grid(0.25, 2.0), stream(), 50)
    t = s.grid.points
    nz = t != 0
    ratio = s.values[:, nz] / t[nz]
    assert np.all(np.abs(ratio - ratio[:, :1]) <= 1e-10)


@pytest.mark.parametrize("method", ["cholesky", "circulant"])
def test_fbm_alpha_half_covariance(method):
    s = sample_fbm(0.5, Grid(1.0, 2.0, "one_sided"), stream(), N, method=method)
    prod = s.at(1.0) * s.at(2.0)
    want = (1 + 2 ** 0.5 - 1) / 2
    assert abs(prod.mean() - want) <= 3 * prod.std(ddof=1) / math.sqrt(N)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_cholesky_and_circulant_agree_in_law(alpha):
    g = Grid(0.25, 2.0)
    a = sample_fbm(alpha, g, stream(0), 20_000, method="cholesky").at(-1.5)
    b = sample_fbm(alpha, g, stream(1), 20_000, method="circulant").at(-1.5)
    assert sps.ks_2samp(a, b).pvalue > 1e-3
    assert sps.kstest(a / 1.5 ** (alpha / 2), sps.norm.cdf).pvalue > 1e-3


def test_auto_method_threshold():
    small = sample_fbm(1.5, Grid(1.0, CHOLESKY_MAX_POINTS / 2), stream(), 2)
    big = sample_fbm(1.5, Grid(0.1, 10.0), stream(), 2)
    assert small.model_id["method"] == "cholesky"
    assert big.model_id["method"] == "circulant"


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7, 2.0])
def test_drifted_field_origin_zero(alpha):
    s = sample_drifted_field(alpha, 0.5, Grid(0.05, 3.0), stream(), 10)
    assert np.all(s.at(0.0) == 0.0)


@pytest.mark.parametrize("b, want", [(0.0, -1.0), (1.0, -2.0)])
def test_drifted_field_mean(b, want):
    s = sample_drifted_field(1.0, b, Grid(0.1, 2.0), stream(), N)
    assert within_3se(s.at(1.0), want)
    with pytest.raises(DomainError):
        sample_drifted_field(1.0, -0.1, Grid(0.1, 2.0), stream())


def test_symmetric_field_increments_variance():
    # the two sides share one increment sequence; Var(W(1) - W(-1)) = 2 * 2^alpha
    s = sample_fbm(1.5, Grid(0.05, 2.0), stream(), 40_000)
    assert var_within_3se(s.at(1.0) - s.at(-1.0), 2.0 ** 1.5)


def test_stationary_variance_and_correlation():
    m = ProcessModel.stationary(1.0)
    s = sample_stationary(m, Grid(0.05, 1.0), stream(), N)
    for t in (0.0, 0.5, -1.0):
        assert var_within_3se(s.at(t), 1.0)
    prod = s.at(0.0) * s.at(0.5)
    assert abs(prod.mean() - math.exp(-0.5)) <= 3 * prod.std(ddof=1) / math.sqrt(N)


def test_stationary_circulant_matches_law():
    m = ProcessModel.stationary(1.5)
    s = sample_stationary(m, Grid(0.01, 5.0), stream(), 20_000)
    assert s.model_id["method"] == "circulant"
    assert sps.kstest(s.at(2.0), sps.norm.cdf).pvalue > 1e-3
    prod = s.at(0.0) * s.at(0.5)
    assert abs(prod.mean() - math.exp(-0.5 ** 1.5)) <= 3 * prod.std(ddof=1) / math.sqrt(20_000)


def test_variance_modulated():
    s = sample_nonstationary(ProcessModel.variance_modulated(1.0, 2.0, 1.0), Grid(0.25, 1.0), stream(), N)
    assert var_within_3se(s.at(0.0), 1.0)
    assert var_within_3se(s.at(1.0), 0.25)


def test_time_changed_identity_bit_identical():
    g = Grid(0.1, 2.0)
    a = sample_stationary(ProcessModel.stationary(1.0), g, stream(), 5, method="cholesky")
    b = sample_time_changed(ProcessModel.time_changed(1.0, RateFunction.identity()), g, stream(), 5)
    assert np.array_equal(a.values, b.values)


def test_time_changed_linear():
    m = ProcessModel.time_changed(1.0, RateFunction.linear(2.0))
    assert np.all(m.local_h(np.linspace(0, 1, 5)) == 2.0)
    s = sample_time_changed(m, Grid(0.25, 1.0, "one_sided"), stream(), N)
    prod = s.at(0.0) * s.at(0.25)
    assert abs(prod.mean() - math.exp(-0.5)) <= 3 * prod.std(ddof=1) / math.sqrt(N)


def test_time_changed_quadratic_metadata():
    alpha = 1.5
    m = ProcessModel.time_changed(alpha, RateFunction.parse("quadratic:0.5"))
    s = sample_model(m, Grid(0.1, 1.0, "one_sided"), stream(), 3)
    assert s.model_id["H_first"] == 1.0
    assert math.isclose(s.model_id["H_last"], 2 ** alpha)


def test_time_changed_non_monotone():
    m = ProcessModel.time_changed(1.0, RateFunction.quadratic(-1.0))
    with pytest.raises(DomainError):
        sample_time_changed(m, Grid(0.1, 1.0, "one_sided"), stream())


def test_rate_function_parse_errors():
    with pytest.raises(DomainError):
        RateFunction.parse("cubic:1")
    with pytest.raises(DomainError):
        RateFunction.parse("linear:-1")


def test_model_validation():
    with pytest.raises(DomainError):
        ProcessModel.variance_modulated(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        ProcessModel("nope", 1.0)


def test_spectral_guard_raises():
    with pytest.raises(SpectralFailureError):
        paths._guarded_sqrt(np.array([1.0, -0.5]), "test")
    assert np.array_equal(paths._guarded_sqrt(np.array([4.0, -1e-12]), "test"), [2.0, 0.0])


def test_same_stream_same_paths():
    g = Grid(0.01, 3.0)
    a = sample_drifted_field(0.7, 0.0, g, stream(3), 4)
    b = sample_drifted_field(0.7, 0.0, g, stream(3), 4)
    assert np.array_equal(a.values, b.values)


def test_dump_paths_csv(tmp_path):
    s = sample_fbm(1.0, Grid(0.5, 1.0), stream(), 2)
    out = tmp_path / "p.csv"
    dump_paths_csv(s, out)
    rows = out.read_text().splitlines()
    assert len(rows) == 3
    assert [float(v) for v in rows[1].split(",")] == s.values[0].tolist()


def test_at_rejects_off_grid():
    s = sample_fbm(1.0, Grid(0.5, 1.0), stream(), 1)
    with pytest.raises(ValueError):
        s.at(0.3)
