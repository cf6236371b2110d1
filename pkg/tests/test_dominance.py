import math

import numpy as np
import pytest

from superpareto.dependence import Comonotone, GaussianNSD, Independence
from superpareto.distributions import GPD, Normal, Pareto, pareto1_pair_sum_sf
from superpareto.dominance import (
    HOLDS,
    HOLDS_STRICTLY,
    VIOLATED,
    CountLaw,
    check_simplex,
    collective_risk_experiment,
    empirical_fsd,
    one_sided_dominance_test,
    order_statistic_ci,
    penalty_experiment,
    truncated_penalty_experiment,
    wilson_interval,
)
from superpareto.rng import RngStream

N = 400_000


def test_wilson_interval_center_and_width():
    center, half = wilson_interval(50, 100, 1.96)
    assert center == pytest.approx(0.5)
    assert half == pytest.approx(0.0962, abs=1e-3)


def test_simplex_check():
    check_simplex([0.2, 0.8])
    with pytest.raises(ValueError):
        check_simplex([0.5, 0.4])
    with pytest.raises(ValueError):
        check_simplex([1.2, -0.2])


def test_pair_average_matches_convolution():
    grid = np.array([1.25, 2.0, 5.0])
    rep = penalty_experiment(Pareto(1), Independence(), [0.5, 0.5], grid, N, RngStream(11))
    exact = pareto1_pair_sum_sf(2 * grid)
    assert np.all(np.abs(rep.lhs_exceed - exact) <= 3 * rep.lhs_se)
    assert rep.overall == HOLDS_STRICTLY


def test_concentrated_weights_give_zero_gap():
    rep = penalty_experiment(Pareto(1), Independence(), [1.0, 0.0], None, 50_000, RngStream(1))
    assert np.all(rep.gap == 0)
    assert set(rep.verdicts) == {HOLDS}


def test_comonotone_gives_zero_gap():
    rep = penalty_experiment(GPD(1.5, 1.0), Comonotone(), [0.3, 0.7], None, 50_000, RngStream(1))
    assert np.all(rep.gap == 0)


def test_negative_dependence_still_penalizes():
    c = GaussianNSD(((1.0, -0.6), (-0.6, 1.0)))
    rep = penalty_experiment(Pareto(1), c, [0.5, 0.5], np.array([2.0, 4.0, 8.0]), N, RngStream(2))
    assert rep.overall == HOLDS_STRICTLY


def test_thin_tails_reverse_for_large_thresholds():
    rep = penalty_experiment(Normal(), Independence(), [0.5, 0.5], np.array([2.0]), N, RngStream(3))
    assert rep.verdicts == [VIOLATED]


def test_truncated_identity_and_var():
    tr = truncated_penalty_experiment(Pareto(1), Independence(), [0.5, 0.5], [10.0, 10.0],
                                      np.array([1.5, 2.0, 3.0, 4.0, 5.0]), [0.75], N, RngStream(4))
    assert tr.c == 5.0
    assert tr.mismatches == 0
    assert tr.var_comparison.verdicts == [HOLDS_STRICTLY]


def test_truncated_grid_beyond_c_rejected():
    with pytest.raises(ValueError):
        truncated_penalty_experiment(Pareto(1), Independence(), [0.5, 0.5], [10.0, 10.0],
                                     np.array([6.0]), None, 1000, RngStream(0))


def test_collective_gap_matches_closed_form():
    avg, tot = collective_risk_experiment(Pareto(1), None, CountLaw.uniform(1, 2), np.array([4.0]), N,
                                          RngStream(5))
    expected = math.log(7) / 64
    assert abs(avg.gap[0] - expected) < 3 * math.hypot(avg.lhs_se[0], avg.rhs_se[0])
    assert tot.overall in (HOLDS_STRICTLY, HOLDS)


def test_collective_single_claim_is_exact():
    avg, tot = collective_risk_experiment(Pareto(1), None, CountLaw.constant(1), np.array([2.0, 4.0]), 20_000,
                                          RngStream(6))
    assert np.all(avg.gap == 0) and np.all(tot.gap == 0)
    assert CountLaw.constant(0).prob_at_least_two() == 0.0


def test_count_law_round_trip():
    for law in (CountLaw.poisson(2.0), CountLaw.uniform(1, 3), CountLaw.categorical([0, 2], [0.5, 0.5])):
        assert CountLaw.from_dict(law.to_dict()) == law


def test_order_statistic_ci_brackets_estimate():
    x = np.sort(Pareto(1).sample(100_000, RngStream(7)))
    v, lo, hi = order_statistic_ci(x, 0.9)
    assert lo <= v <= hi
    assert lo < 10.0 < hi


def test_empirical_fsd_break_point():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([1.5, 2.5, 2.6])
    rep = empirical_fsd(a, b)
    # F_a - F_b on the pooled grid: 1/3, 0, 1/3, 0, -1/3, 0
    assert rep.extra["break_point"] == 2.6
    assert rep.extra["largest_violation"] == pytest.approx(1 / 3)


def test_dominance_test_size_and_power():
    x = Pareto(1).sample(2000, RngStream(8, (0,)))
    y = Pareto(1).sample(2000, RngStream(8, (1,)))
    assert one_sided_dominance_test(x, y, 199, RngStream(9)) > 0.05
    # b shifted up keeps H0 (F_a >= F_b) true
    assert one_sided_dominance_test(x, y + 1.0, 199, RngStream(9)) > 0.5
    # a shifted up breaks it
    assert one_sided_dominance_test(x + 1.0, y, 199, RngStream(9)) <= 0.01


def test_dominance_test_rejects_small_bootstrap():
    with pytest.raises(ValueError):
        one_sided_dominance_test([1.0, 2.0], [1.0, 2.0], n_boot=50)
