import numpy as np
import pytest
import scipy.stats as stats
from hypothesis import given, settings
import hypothesis.strategies as st

from besovclass.priors import (
    BesovLaplaceSpec,
    GaussianComparatorSpec,
    SmoothnessHyperPrior,
    cholesky_with_jitter,
    gp_draw,
    hyperprior_logdensity,
    hyperprior_normalizer,
    lengthscale_logdensity,
    link,
    link_inverse,
    sq_exp_covariance,
    whiten_transform,
    whiten_values,
    whitening_core,
)
from besovclass.wavelets import (
    CoefficientVector,
    Family,
    GridFunction,
    WaveletBasis,
    besov_norm,
)


# -- whitening transform -----------------------------------------------------

def test_whitening_zero_maps_to_zero():
    for alpha, n, d in ((1.5, 1, 1), (3.0, 500, 1), (2.5, 1000, 2)):
        out = whiten_values(np.zeros(8), alpha, n, d)
        np.testing.assert_array_equal(out, 0.0)


def test_whitening_unit_output_at_inverse_normal_point():
    # with unit prefactors, |T(w)| = 1 exactly at |w| = Phi^{-1}(1 - e^{-1}/2)
    w_star = stats.norm.ppf(1.0 - np.exp(-1.0) / 2.0)
    assert w_star == pytest.approx(0.9005, abs=1e-3)
    out = whitening_core(np.array([w_star, -w_star]))
    np.testing.assert_allclose(out, [1.0, -1.0], atol=1e-12)
    # n=1, l=1 leaves the prefactor at exactly 1
    assert whiten_values(np.array([w_star]), alpha=3.7, n=1, d=1)[0] == out[0]


def test_whitening_matches_laplace_distribution():
    rng = np.random.default_rng(123)
    samples = rng.standard_normal(100_000)
    out = whitening_core(samples)
    ks = stats.kstest(out, stats.laplace(scale=1.0).cdf).statistic
    assert ks < 0.01


def test_whitening_vector_matches_scalar_map():
    rng = np.random.default_rng(5)
    xi = rng.standard_normal(64)
    out = whiten_values(xi, alpha=2.5, n=100, d=1)
    pref = 100.0 ** (-1.0 / 6.0) * np.arange(1, 65) ** (-2.0)
    np.testing.assert_allclose(out, pref * whitening_core(xi), rtol=1e-12)


def test_whitening_no_overflow_in_far_tail():
    out = whitening_core(np.array([-50.0, 50.0, 300.0]))
    assert np.all(np.isfinite(out))
    # -log(2(1-Phi(w))) ~ w^2/2 for large w
    assert out[1] == pytest.approx(50.0 ** 2 / 2.0, rel=0.01)
    assert np.all(np.isfinite(whiten_values(np.array([90.0, -90.0]), 2.0, 5000, 1)))


@given(w=st.floats(-30, 30))
@settings(max_examples=50, deadline=None)
def test_whitening_odd(w):
    v = whitening_core(np.array([w, -w]))
    assert v[0] == -v[1]


def test_whitening_strictly_increasing():
    grid = np.linspace(-8, 8, 2001)
    out = whitening_core(grid)
    assert np.all(np.diff(out) > 0)


@given(n1=st.integers(1, 10**6), n2=st.integers(1, 10**6))
@settings(max_examples=30, deadline=None)
def test_whitening_n_scaling(n1, n2):
    alpha, d = 2.0, 1
    w = np.array([0.3, -1.7, 2.2])
    a = whiten_values(w, alpha, n1, d)
    b = whiten_values(w, alpha, n2, d)
    np.testing.assert_allclose(
        b / a, (n2 / n1) ** (-d / (2 * alpha + d)), rtol=1e-10
    )


def test_whiten_transform_on_coefficient_vector():
    basis = WaveletBasis(family=Family.HAAR, dimension=1, max_level=3)
    xi = CoefficientVector(np.linspace(-2, 2, 8), basis)
    out = whiten_transform(xi, alpha=2.0, n=100, d=1)
    assert out.basis == basis
    with pytest.raises(ValueError):
        whiten_transform(xi, alpha=0.5, n=100, d=1)


def test_laplace_scale_knob():
    w = np.array([1.3])
    assert whiten_values(w, 2.0, 1, 1, laplace_scale=2.0)[0] == pytest.approx(
        2.0 * whiten_values(w, 2.0, 1, 1)[0]
    )


def test_spec_coordinate_scales():
    spec = BesovLaplaceSpec(alpha=2.0, n=32, d=1, L=4)
    expected = 32.0 ** (-0.2) * np.arange(1, 5) ** (-1.5)
    np.testing.assert_allclose(spec.coordinate_scales(), expected)
    with pytest.raises(ValueError):
        BesovLaplaceSpec(alpha=1.0, n=32, d=1, L=4)


def test_prior_draws_besov_regularity_trend():
    # draws at alpha = d+1 have stable truncated norms just below the
    # regularity of the prior and growing norms just above it
    rng = np.random.default_rng(99)
    alpha, d = 2.0, 1
    sizes = (512, 2048, 8192)
    means_below, means_above = [], []
    basis = {L: WaveletBasis(Family.HAAR, dimension=1, max_level=13, truncation=L)
             for L in sizes}
    for L in sizes:
        l = np.arange(1, L + 1)
        draws = l[None, :] ** (-(alpha - 0.5)) * rng.laplace(size=(100, L))
        nb = [besov_norm(CoefficientVector(v, basis[L]), alpha - d - 0.1, 1.0)
              for v in draws]
        na = [besov_norm(CoefficientVector(v, basis[L]), alpha - d + 0.5, 1.0)
              for v in draws]
        means_below.append(np.mean(nb))
        means_above.append(np.mean(na))
    # below the prior regularity the truncated norm saturates (slowly:
    # the tail decays like L^-0.1 here); above it grows like sqrt(L)
    assert means_below[-1] < 1.5 * means_below[0]
    assert means_above[-1] > 2.0 * means_above[0]


# -- smoothness hyper-prior ---------------------------------------------------

@pytest.mark.parametrize("n,d", [(200, 1), (1000, 1), (5000, 1), (200, 2), (5000, 2)])
def test_hyperprior_integrates_to_one(n, d):
    hp = SmoothnessHyperPrior(n, d)
    nodes, weights = np.polynomial.legendre.leggauss(500)
    lo, hi = hp.support
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    vals = np.exp([hp.logdensity(a) for a in x])
    integral = 0.5 * (hi - lo) * np.sum(weights * vals)
    assert integral == pytest.approx(1.0, abs=1e-6)


def test_hyperprior_strictly_increasing():
    hp = SmoothnessHyperPrior(1000, 1)
    lo, hi = hp.support
    grid = np.linspace(lo + 1e-9, hi, 1000)
    vals = np.array([hp.logdensity(a) for a in grid])
    assert np.all(np.diff(vals) > 0)


def test_hyperprior_density_ratio():
    n, d = 1000, 1
    hp = SmoothnessHyperPrior(n, d)
    eps = 1e-12
    log_ratio = hp.logdensity(np.log(n)) - hp.logdensity(d + eps)
    expected = n ** (d / (3.0 * d)) - n ** (d / (2.0 * np.log(n) + d))
    assert log_ratio == pytest.approx(expected, rel=1e-6)


def test_hyperprior_outside_support_is_minus_inf():
    hp = SmoothnessHyperPrior(1000, 1)
    assert hyperprior_logdensity(1.0, hp) == -np.inf  # boundary is open
    assert hyperprior_logdensity(0.5, hp) == -np.inf
    assert hyperprior_logdensity(np.log(1000) + 0.01, hp) == -np.inf
    assert np.isfinite(hyperprior_logdensity(np.log(1000), hp))


def test_hyperprior_empty_support_rejected():
    with pytest.raises(ValueError):
        SmoothnessHyperPrior(2, 1)  # log 2 < 1
    with pytest.raises(ValueError):
        SmoothnessHyperPrior(7, 2)  # log 7 < 2


def test_hyperprior_support_widens_with_n():
    lengths = [np.log(n) - 1 for n in (10, 100, 1000)]
    assert lengths == sorted(lengths)
    assert hyperprior_normalizer(1000, 1) > 0


# -- logistic link ------------------------------------------------------------

def test_link_at_zero():
    f = GridFunction(np.zeros(4), 1, 2)
    assert link(f).values[0] == 0.5
    assert link(f).value_range_unit


@given(t=st.floats(-500, 500))
@settings(max_examples=50, deadline=None)
def test_link_symmetry(t):
    f = GridFunction(np.array([t, -t, 0.0, 0.0]), 1, 2)
    p = link(f).values
    assert p[0] + p[1] == pytest.approx(1.0, abs=1e-15)


def test_link_round_trip():
    # past |w| ~ 11, float64 storage of p = H(w) near 1 caps the
    # recoverable precision at roughly ulp(1)/(1-p); assert accordingly
    w = GridFunction(np.linspace(-11, 11, 64), 1, 6)
    back = link_inverse(link(w))
    np.testing.assert_allclose(back.values, w.values, atol=1e-12, rtol=1e-12)
    w_wide = GridFunction(np.linspace(-30, 30, 64), 1, 6)
    back_wide = link_inverse(link(w_wide))
    np.testing.assert_allclose(back_wide.values, w_wide.values, rtol=1e-4)


def test_link_inverse_rejects_boundary():
    with pytest.raises(ValueError):
        link_inverse(GridFunction(np.array([0.0, 0.5, 0.5, 0.5]), 1, 2))
    with pytest.raises(ValueError):
        link_inverse(GridFunction(np.array([1.0, 0.5, 0.5, 0.5]), 1, 2))


# -- Gaussian comparator -------------------------------------------------------

def test_gp_zero_noise_gives_zero():
    spec = GaussianComparatorSpec(dimension=1, max_level=4)
    f = gp_draw(spec, 1.0, np.zeros(16))
    np.testing.assert_array_equal(f.values, 0.0)


def test_gp_covariance_diagonal_is_one():
    pts = np.linspace(0, 1, 9)[:, None]
    for A in (0.1, 1.0, 50.0):
        np.testing.assert_allclose(np.diag(sq_exp_covariance(pts, A)), 1.0)


def test_lengthscale_logdensity_values():
    assert lengthscale_logdensity(1.0, 1) == pytest.approx(-1.0)
    assert lengthscale_logdensity(2.0, 2) == pytest.approx(
        np.log(2) + np.log(2) - 4.0
    )
    assert lengthscale_logdensity(-1.0, 1) == -np.inf


def test_gp_draw_empirical_variance():
    spec = GaussianComparatorSpec(dimension=1, max_level=3)
    rng = np.random.default_rng(17)
    draws = np.array(
        [gp_draw(spec, 2.0, rng.standard_normal(8)).values for _ in range(10_000)]
    )
    v = draws.var(axis=0)
    # sample variance of N(0,1) has sd about sqrt(2/N)
    assert np.all(np.abs(v - 1.0) < 5 * np.sqrt(2.0 / 10_000))


def test_gp_kronecker_matches_dense_cholesky():
    # well-conditioned kernel so both paths use the same (first) jitter
    spec = GaussianComparatorSpec(dimension=2, max_level=3)
    rng = np.random.default_rng(23)
    z = rng.standard_normal(64)
    f = gp_draw(spec, 50.0, z)
    from besovclass.wavelets import grid_points

    pts = grid_points(2, 3)
    dense = cholesky_with_jitter(sq_exp_covariance(pts, 50.0))
    np.testing.assert_allclose(f.values, dense @ z, atol=1e-8)


def test_cholesky_jitter_escalates():
    # numerically rank-deficient: nearly constant kernel
    pts = np.linspace(0, 1, 32)[:, None]
    cov = sq_exp_covariance(pts, 1e-8)
    L = cholesky_with_jitter(cov)
    assert np.all(np.isfinite(L))
