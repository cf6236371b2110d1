import math
import warnings

import numpy as np
import pytest

from superpareto.distributions import GPD, Empirical, Normal, Pareto, Truncated
from superpareto.risk_measures import (
    ES,
    RVaR,
    Distortion,
    DistortionFn,
    ExpectedDisutility,
    LimitedLiability,
    Linear,
    SShape,
    UnreliableEstimateWarning,
    VaR,
    distortion,
    distortion_survival,
    es,
    expected_disutility,
    is_degenerate_distortion,
    risk_measure_from_dict,
    rvar,
    var,
)
from superpareto.rng import RngStream


def test_var_left_quantile():
    assert var(Pareto(0.5), 0.75) == 16.0
    assert var([1.0, 2.0, 3.0, 4.0], 0.5) == 2.0


def test_es_values():
    assert es(Pareto(2), 0.75) == pytest.approx(4.0, rel=1e-10)
    assert es(Pareto(1), 0.5) == math.inf
    assert es(3.0, 0.3) == 3.0


def test_rvar_normal_lower_half():
    assert rvar(Normal(), 0.0, 0.5) == pytest.approx(-0.7978845608028654, rel=1e-12)


def test_es_prescreen_warns_on_heavy_sample():
    x = Pareto(0.8).sample(10_000, RngStream(3))
    with pytest.warns(UnreliableEstimateWarning):
        es(x, 0.9)
    y = Normal(10, 1).sample(10_000, RngStream(3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        es(np.abs(y), 0.9)


def test_distortion_identity_is_mean():
    assert distortion(GPD(0.5, 1.0), DistortionFn.identity()) == pytest.approx(2.0, rel=1e-8)


def test_distortion_routes_agree():
    h = DistortionFn.es_ramp(0.75)
    assert distortion(Pareto(2), h) == pytest.approx(4.0, rel=1e-9)
    assert distortion_survival(Pareto(2), h) == pytest.approx(4.0, rel=1e-6)


def test_var_step_matches_var():
    d = Truncated(Pareto(1), 10.0)
    for p in (0.3, 0.5, 0.8, 0.95):
        assert distortion(d, DistortionFn.var_step(p)) == pytest.approx(var(d, p), rel=1e-12)


def test_rvar_ramp_matches_rvar():
    assert distortion(Normal(), DistortionFn.rvar_ramp(0.2, 0.7)) == pytest.approx(rvar(Normal(), 0.2, 0.7), rel=1e-9)


def test_esssup_essinf():
    t = Truncated(Pareto(1), 10.0)
    assert distortion(t, DistortionFn.esssup()) == 10.0
    assert distortion(t, DistortionFn.essinf()) == 1.0


def test_degenerate_classifier_suite():
    suite = [
        DistortionFn.identity(),
        DistortionFn.var_step(0.5),
        DistortionFn.es_ramp(0.9),
        DistortionFn.essinf(),
        DistortionFn.esssup(),
        DistortionFn.mixture([0.3, 0.7], [DistortionFn.essinf(), DistortionFn.esssup()]),
    ]
    assert [is_degenerate_distortion(h) for h in suite] == [False, False, False, True, True, True]


def test_table_round_trip():
    h = DistortionFn.from_table([0.0, 0.5, 0.5, 1.0], [0.0, 0.2, 0.6, 1.0])
    assert h(0.25) == pytest.approx(0.1)
    assert h.limit(0.5, -1) == pytest.approx(0.2)
    assert h.limit(0.5, 1) == pytest.approx(0.6)
    back = DistortionFn.from_table(*zip(*h.to_table()))
    np.testing.assert_allclose(back(np.linspace(0, 1, 11)), h(np.linspace(0, 1, 11)))


def test_table_rejects_decreasing():
    with pytest.raises(ValueError):
        DistortionFn.from_table([0.0, 0.5, 1.0], [0.0, 0.7, 0.6])


def test_mild_monotonicity_flags():
    assert VaR(0.5).mildly_monotone
    assert ES(0.9).mildly_monotone
    assert not Distortion(DistortionFn.esssup()).mildly_monotone


def test_descriptor_round_trip():
    for m in (VaR(0.9), ES(0.5), RVaR(0.1, 0.9), Distortion(DistortionFn.es_ramp(0.3))):
        back = risk_measure_from_dict(m.to_dict())
        assert back(Normal()) == pytest.approx(m(Normal()), rel=1e-12)


def test_expected_disutility_limited_liability():
    # E[min(X,10)] for Pareto(1) is 1 + ln 10; a linear disutility with the cap at 10 is close to it
    est = expected_disutility(Pareto(1), LimitedLiability(10.0, 1e6), 1 << 20, RngStream(0))
    assert abs(est.value * 1.0 + 10.0 - (1.0 + math.log(10.0))) < 5 * est.se + 1e-4
    assert not est.divergent


def test_linear_disutility_on_pareto1_flags_divergence():
    est = expected_disutility(Pareto(1), Linear(1.0, 0.0), 1 << 20, RngStream(0))
    assert est.divergent


def test_constant_disutility_exact():
    est = expected_disutility(Pareto(1), Linear(0.0, 2.5), 100, RngStream(0))
    assert est.value == 2.5 and est.se == 0.0


def test_s_shape_finite_under_pareto1():
    est = expected_disutility(Pareto(1), SShape(1.0, 0.5), 1 << 18, RngStream(1))
    assert math.isfinite(est.value)
    assert ExpectedDisutility(SShape(1.0, 0.5)).mildly_monotone
