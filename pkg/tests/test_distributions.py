import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superpareto.distributions import (
    GPD,
    Affine,
    ConvexTransform,
    Discrete,
    Empirical,
    Normal,
    Pareto,
    PiecewiseConvexFn,
    SampledDistribution,
    TailGraft,
    Truncated,
    loss_from_dict,
    pareto1_pair_sum_sf,
    truncate,
)
from superpareto.rng import RngStream


def test_pareto_cdf_and_quantile_values():
    assert Pareto(1).cdf(2.0) == 0.5
    assert Pareto(0.5).quantile(0.75) == 16.0
    assert Pareto(1).cdf(0.5) == 0.0
    assert not Pareto(1).has_finite_mean
    assert Pareto(2).mean() == pytest.approx(2.0)


def test_gpd_median():
    assert GPD(1.0, 1.0).cdf(1.0) == pytest.approx(0.5)
    g = GPD(0.5, 2.0)
    assert g.cdf(g.quantile(0.3)) == pytest.approx(0.3)


def test_quantile_rejects_closed_levels():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            Pareto(1).quantile(p)


def test_truncated_pareto():
    t = Truncated(Pareto(1), 10.0)
    assert t.cdf(5.0) == 0.8
    assert t.cdf(10.0) == 1.0
    assert t.quantile(0.95) == 10.0
    assert t.mean() == pytest.approx(1.0 + math.log(10.0), rel=1e-9)
    assert truncate(Pareto(1), 10.0).upper == 10.0


def test_convex_transform_matches_pareto_half():
    d = ConvexTransform(PiecewiseConvexFn.pareto(0.5))
    xs = np.array([1.0, 2.0, 9.0, 100.0])
    np.testing.assert_allclose(d.cdf(xs), Pareto(0.5).cdf(xs), rtol=1e-12)
    np.testing.assert_allclose(d.quantile(0.9), Pareto(0.5).quantile(0.9), rtol=1e-12)


def test_convex_transform_gpd():
    d = ConvexTransform(PiecewiseConvexFn.gpd(1.3, 3.0))
    for p in (0.1, 0.5, 0.99):
        assert d.quantile(p) == pytest.approx(GPD(1.3, 3.0).quantile(p), rel=1e-10)
    # xi < 1 gives a concave map of Pareto(1)
    with pytest.raises(ValueError):
        PiecewiseConvexFn.gpd(0.7, 3.0)


def test_piecewise_fn_rejects_concave():
    with pytest.raises(ValueError):
        PiecewiseConvexFn([1.0, 2.0], [2.0, 1.0])
    with pytest.raises(ValueError):
        PiecewiseConvexFn([0.0, 2.0], [1.0, 2.0])


def test_tail_graft_requires_dominance():
    TailGraft(Pareto(1), 3.0, Pareto(0.5))
    with pytest.raises(ValueError):
        TailGraft(Pareto(1), 3.0, Normal(2.0, 0.3))


def test_empirical_left_quantile():
    e = Empirical([3.0, 1.0, 2.0])
    assert e.quantile(0.5) == 2.0
    assert e.quantile(1 / 3) == 1.0
    assert e.cdf(2.0) == pytest.approx(2 / 3)


def test_discrete_quantile_integral_exact():
    d = Discrete([1.0, 3.0], [0.25, 0.75])
    assert d.quantile_integral(0.0, 1.0) == pytest.approx(2.5)
    assert d.quantile_integral(0.2, 0.3) == pytest.approx(0.05 * 1 + 0.05 * 3)


def test_normal_quantile_integral():
    # E[X 1{X < 0}] = -phi(0)
    assert Normal().quantile_integral(0.0, 0.5) == pytest.approx(-1 / math.sqrt(2 * math.pi), rel=1e-12)


def test_affine_shift_scale():
    a = Affine(Pareto(1), 2.0, -1.0)
    assert a.quantile(0.5) == 3.0
    assert a.cdf(3.0) == pytest.approx(0.5)


def test_pair_sum_closed_form_value():
    assert pareto1_pair_sum_sf(4.0) == pytest.approx(0.6373265360835138, rel=1e-14)
    assert pareto1_pair_sum_sf(1.5) == 1.0


def test_pair_sum_closed_form_against_quadrature():
    from scipy import integrate

    s = 7.0
    # P(X1 + X2 > s) = P(X1 > s - 1) + ∫_1^{s-1} P(X2 > s - x) x^-2 dx
    val = 1 / (s - 1) + integrate.quad(lambda x: min(1.0, 1 / (s - x)) / x**2, 1, s - 1)[0]
    assert pareto1_pair_sum_sf(s) == pytest.approx(val, rel=1e-9)


def test_sampling_is_thread_invariant():
    d = GPD(0.8, 2.0)
    a = d.sample(200_000, RngStream(5), threads=1)
    b = d.sample(200_000, RngStream(5), threads=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, d.sample(200_000, RngStream(6), threads=1))


def test_sampled_sum_mean():
    s = SampledDistribution(Normal(1.0, 1.0), 3, n_ref=1 << 16)
    assert s.mean() == 3.0
    assert s.quantile(0.5) == pytest.approx(3.0, abs=0.05)


@pytest.mark.parametrize(
    "dist",
    [Pareto(0.7), GPD(1.2, 5.0), Normal(1.0, 2.0), Truncated(Pareto(1), 8.0), Discrete([1.0, 2.0], [0.5, 0.5]),
     Empirical([1.0, 4.0, 9.0]), Affine(Pareto(2), 3.0, 1.0), ConvexTransform(PiecewiseConvexFn([1.0, 2.0], [1.0, 3.0]))],
)
def test_descriptor_round_trip(dist):
    back = loss_from_dict(dist.to_dict())
    ps = np.array([0.1, 0.5, 0.9])
    np.testing.assert_array_equal(back.quantile(ps), dist.quantile(ps))


def test_unknown_descriptor():
    with pytest.raises(ValueError):
        loss_from_dict({"kind": "burr"})
    with pytest.raises(ValueError):
        loss_from_dict({"kind": "pareto"})


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(0.2, 5.0), p=st.floats(1e-6, 1 - 1e-6))
def test_pareto_quantile_inverts_cdf(alpha, p):
    d = Pareto(alpha)
    assert d.cdf(d.quantile(p)) == pytest.approx(p, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(xi=st.floats(0.05, 2.0), beta=st.floats(0.1, 1e3), p=st.floats(1e-6, 1 - 1e-6))
def test_gpd_quantile_inverts_cdf(xi, beta, p):
    d = GPD(xi, beta)
    assert d.cdf(d.quantile(p)) == pytest.approx(p, abs=1e-8)
