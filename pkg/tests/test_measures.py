import math

import numpy as np
import pytest
from scipy.stats import kstest

from sphindex.measures import (
    InputDistribution,
    MarginalDensity,
    ScalarLaw,
    init_tail_probability,
    make_rng,
    marginal_density,
    sample,
    sample_with,
)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def test_gaussian_sample_covariance():
    d, n = 4, 10**5
    x = sample(InputDistribution.gaussian(d), 0, n)
    cov = x.T @ x / n
    assert np.max(np.abs(cov - np.eye(d))) <= 0.02


def test_uniform_sphere_exact_norm():
    d = 50
    dist = InputDistribution.uniform_sphere(d)
    x = sample(dist, 1, 1000)
    assert np.max(np.abs(np.linalg.norm(x, axis=1) - math.sqrt(d))) <= 1e-12


def test_product_uniform_unit_variance():
    d, n = 10, 10**5
    x = sample(InputDistribution.product(d, "uniform"), 2, n)
    assert np.abs(x.var(axis=0) - 1.0).max() <= 0.02
    assert np.abs(x.mean(axis=0)).max() <= 0.02


def test_radial_mixture_norms_and_isotropy():
    d, n = 8, 200_000
    dist = InputDistribution.radial_mixture(d, [1.0, 3.0], [0.25, 0.75])
    x = sample(dist, 3, n)
    norms = np.linalg.norm(x, axis=1)
    assert set(np.round(norms, 10)) <= {1.0, 3.0}
    assert np.mean(np.isclose(norms, 3.0)) == pytest.approx(0.75, abs=0.01)
    # isotropic after rescaling to match identity covariance
    second = dist.second_radial_moment()
    cov = x.T @ x / n
    assert np.max(np.abs(cov - (second / d) * np.eye(d))) <= 5 * math.sqrt(1 / n) * second


def test_seeded_determinism_and_streams():
    dist = InputDistribution.product(6, "rademacher")
    a = sample(dist, 9, 50)
    b = sample(dist, 9, 50)
    assert np.array_equal(a, b)
    c = sample(dist, 9, 50, 1)  # different stream index
    assert not np.array_equal(a, c)


def test_sequential_stream_matches_chunked():
    dist = InputDistribution.uniform_sphere(5)
    rng = make_rng(4)
    whole = sample_with(dist, rng, 30)
    rng = make_rng(4)
    parts = np.vstack([sample_with(dist, rng, 10) for _ in range(3)])
    assert np.array_equal(whole, parts)


def test_mixture_weight_validation():
    with pytest.raises(ValueError):
        InputDistribution.radial_mixture(5, [1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        InputDistribution.radial_mixture(5, [1.0, -2.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        InputDistribution.gaussian(2)


def test_scalar_law_moments():
    uniform = ScalarLaw(kind="uniform")
    assert uniform.moment(2) == pytest.approx(1.0)
    assert uniform.moment(3, absolute=True) == pytest.approx(3 * math.sqrt(3) / 4)
    two_point = ScalarLaw(kind="two_point", p=0.2)
    assert two_point.moment(1) == pytest.approx(0.0, abs=1e-15)
    assert two_point.moment(2) == pytest.approx(1.0)
    assert two_point.moment(3) != 0.0


def test_product_third_moment_matches_closed_form():
    law = ScalarLaw(kind="uniform")
    x = sample(InputDistribution.product(5, law), 8, 10**5)
    est = np.mean(np.abs(x) ** 3)
    assert est == pytest.approx(law.moment(3, absolute=True), rel=0.01)


def test_quantile_law_standardized():
    # raw table for an exponential-like quantile; law must come out standardized
    u = np.linspace(0.001, 0.999, 200)
    q = -np.log1p(-u)
    law = ScalarLaw(kind="quantile", quantile_u=u, quantile_q=q)
    assert law.moment(1) == pytest.approx(0.0, abs=1e-6)
    assert law.moment(2) == pytest.approx(1.0, rel=1e-4)
    x = law.sample(make_rng(0), 200_000)
    assert x.mean() == pytest.approx(0.0, abs=0.02)
    assert x.var() == pytest.approx(1.0, rel=0.03)


# ---------------------------------------------------------------------------
# Sphere marginal
# ---------------------------------------------------------------------------


def test_marginal_density_d3_flat():
    for t in (-0.8, 0.0, 0.5):
        assert marginal_density(3, t) == pytest.approx(0.5, rel=1e-12)


def test_marginal_density_endpoints_and_outside():
    assert marginal_density(7, 1.0) == 0.0
    assert marginal_density(7, -1.0) == 0.0
    assert marginal_density(7, 1.3) == 0.0


def test_marginal_density_normalization_and_symmetry():
    for d in (4, 25, 150):
        density = MarginalDensity(d)
        grid = np.linspace(-1, 1, 20001)
        total = np.trapezoid(density.pdf(grid), grid)
        assert total == pytest.approx(1.0, abs=1e-6)
        assert density.pdf(0.37) == pytest.approx(density.pdf(-0.37), rel=1e-14)
        assert density.even_moment(1) == pytest.approx(1.0 / d)


def test_sphere_projection_matches_marginal_law():
    d, n = 12, 10**5
    x = sample(InputDistribution.uniform_sphere(d, radius=1.0), 17, n)
    stat = kstest(x[:, 0], MarginalDensity(d).cdf)
    assert stat.pvalue > 0.01


def test_marginal_sampler_matches_cdf():
    density = MarginalDensity(40)
    draws = density.sample(make_rng(5), 10**5)
    assert kstest(draws, density.cdf).pvalue > 0.01


# ---------------------------------------------------------------------------
# Initialization tails
# ---------------------------------------------------------------------------


def test_tail_probability_at_zero_is_half():
    res = init_tail_probability(100, 0.0, n=200_000, seed=1)
    assert res.estimate == pytest.approx(0.5, abs=0.005)
    assert math.isinf(res.upper_bound)


def test_tail_probability_upper_bound_d100_a2():
    res = init_tail_probability(100, 2.0, n=200_000, seed=2)
    assert res.upper_bound == pytest.approx(0.5 * math.exp(-1.0), rel=1e-12)
    assert res.ci_high <= res.upper_bound


def test_tail_probability_lower_bound_d64_a1():
    res = init_tail_probability(64, 1.0, delta=1.0, n=200_000, seed=3)
    assert res.lower_bound == pytest.approx(0.25 * math.exp(-4.0), rel=1e-12)
    assert res.ci_low >= res.lower_bound


def test_tail_probability_lower_bound_validity_window():
    res = init_tail_probability(9, 2.0, delta=1.0, n=1000, seed=4)
    assert math.isnan(res.lower_bound)  # max(a, delta) > sqrt(d)/4
