"""Acceptance criteria 1-10, each at its stated tolerance."""

import math
import os
import time

import numpy as np

from superpareto.dependence import Independence
from superpareto.distributions import GPD, Normal, Pareto, pareto1_pair_sum_sf
from superpareto.dominance import (
    HOLDS_STRICTLY,
    one_sided_dominance_test,
    penalty_experiment,
    truncated_penalty_experiment,
)
from superpareto.equilibrium import (
    ExternalMarketSpec,
    InternalMarketSpec,
    PiecewiseConvex,
    Quadratic,
    Zero,
    best_response_check,
    comparative_statics,
    es_finite_mean_equilibrium,
    external_equilibrium,
    identity_allocation,
    internal_equilibrium,
    normal_rvar_two_agent_check,
    validate_internal_equilibrium,
)
from superpareto.portfolio import var_superadditivity_report
from superpareto.risk_measures import DistortionFn, VaR, is_degenerate_distortion
from superpareto.rng import RngStream
from superpareto.tail_estimation import default_threshold_k, hill_estimator

N_MC = 10**6
THREADS = os.cpu_count() or 1
SEED = 20240101


def test_criterion_1_convolution_oracle(acceptance):
    t0 = time.perf_counter()
    grid = np.array([1.25, 2.0, 5.0])
    rep = penalty_experiment(Pareto(1), Independence(), [0.5, 0.5], grid, N_MC, RngStream(SEED, (1,)), THREADS)
    elapsed = time.perf_counter() - t0
    exact = pareto1_pair_sum_sf(2 * grid)
    z_err = np.abs(rep.lhs_exceed - exact) / rep.lhs_se
    lower = rep.lhs_exceed - rep.lhs_ci
    separated = bool(np.all(lower > 1 / grid)) and all(v == HOLDS_STRICTLY for v in rep.verdicts)
    ok = bool(np.all(z_err <= 3)) and separated and elapsed < 30
    acceptance(1, ok, f"max |err|/SE={z_err.max():.2f} separated={separated} runtime={elapsed:.1f}s")


def test_criterion_2_truncation_identity(acceptance):
    grid = np.linspace(1.01, 4.99, 40)
    tr = truncated_penalty_experiment(Pareto(1), Independence(), [0.5, 0.5], [10.0, 10.0], grid, [0.75, 0.9],
                                      N_MC, RngStream(SEED, (2,)), THREADS)
    vc = tr.var_comparison
    # index 1 is the stated level 0.9; 0.75 is reported for context only
    var_ok = bool(vc.lhs_low[1] > vc.rhs[1])
    ok = tr.mismatches == 0 and var_ok
    acceptance(2, ok, f"indicator mismatches={tr.mismatches}/{tr.checked} c={tr.c:g} "
                      f"VaR0.9 truncated sum={vc.lhs[1]:.4f} [{vc.lhs_low[1]:.4f}, {vc.lhs_high[1]:.4f}] "
                      f"vs weighted VaRs={vc.rhs[1]:.4f} (at 0.75: {vc.lhs[0]:.4f} vs {vc.rhs[0]:.4f})")


def test_criterion_3_external_closed_form(acceptance):
    t0 = time.perf_counter()
    spec = ExternalMarketSpec(1, 1, 2.0, 4.0, 2.0, Quadratic(1.0), Quadratic(1.0))
    res = external_equilibrium(spec)
    u, w = res.diagnostics["u"], res.diagnostics["w"]
    # u* = (rho_I - rho_E) / (2 (lam_E + k lam_I)), p = rho_E + 2 lam_E u*
    closed = abs(res.p - 3.0) <= 1e-8 and abs(u - 0.5) <= 1e-8 and abs(w - 1.5) <= 1e-8
    cs = comparative_statics(spec, list(range(1, 65)))
    mono = bool(np.all(np.diff(cs["p"]) < 0) and np.all(np.diff(cs["u"]) < 0) and np.all(np.diff(cs["ku"]) > 0))
    elapsed = time.perf_counter() - t0
    ok = res.case == "partial_share" and closed and mono and elapsed < 1
    acceptance(3, ok, f"case={res.case} p={res.p:.12g} u={u:.12g} w={w:.12g} "
                      f"statics monotone={mono} runtime={elapsed:.3f}s")


def _random_piecewise(rng, a):
    m = int(rng.integers(1, 4))
    xs_neg = -np.sort(rng.uniform(0.05, 3 * a, m))[::-1] * 1.0
    xs_pos = np.sort(rng.uniform(0.05, 3 * a, m))
    left0, right0 = -rng.uniform(0, 2), rng.uniform(0, 2)
    d_neg = left0 - np.cumsum(rng.uniform(0.1, 3, m))[::-1]
    d_pos = right0 + np.cumsum(rng.uniform(0.1, 3, m))
    x = np.concatenate([np.sort(xs_neg), [0.0, 0.0], xs_pos])
    d = np.concatenate([d_neg, [left0, right0], d_pos])
    return PiecewiseConvex(x, d)


def test_criterion_4_case_partition(acceptance):
    rng = np.random.default_rng(SEED)
    counts = {"transfer_all": 0, "partial_share": 0, "no_trade": 0}
    bad_partition = bad_response = 0
    for i in range(1000):
        a = float(rng.uniform(0.2, 5))
        if i % 2:
            ci, ce = Quadratic(float(rng.uniform(0.05, 3))), Quadratic(float(rng.uniform(0.05, 3)))
        else:
            ci, ce = _random_piecewise(rng, a), _random_piecewise(rng, a)
        spec = ExternalMarketSpec(int(rng.integers(1, 5)), int(rng.integers(1, 9)), a,
                                  float(rng.uniform(0.5, 10)), float(rng.uniform(0.5, 10)), ci, ce)
        c1 = spec.L_E(a / spec.k) < spec.L_I(-a)
        c3 = spec.L_E(0.0) >= spec.L_I_minus0()
        c2 = not c1 and not c3
        expected = "transfer_all" if c1 else ("no_trade" if c3 else "partial_share")
        res = external_equilibrium(spec)
        if c1 + c2 + c3 != 1 or expected != res.case:
            bad_partition += 1
        counts[res.case] += 1
        if not best_response_check(spec, res)["passed"]:
            bad_response += 1
    ok = bad_partition == 0 and bad_response == 0 and all(v > 0 for v in counts.values())
    acceptance(4, ok, f"cases={counts} partition failures={bad_partition} best-response failures={bad_response}")


def test_criterion_5_internal_market(acceptance):
    spec = InternalMarketSpec.from_measures([1.0, 2.0, 3.0], [VaR(0.95)] * 3, Pareto(0.8), [Zero()] * 3)
    res = internal_equilibrium(spec)
    target = 0.05 ** -1.25
    iv = res.price_interval
    single = iv.single and math.isclose(iv.lo, target, rel_tol=1e-12)
    alloc = identity_allocation(spec)
    base = validate_internal_equilibrium(spec, np.full(3, iv.lo), alloc)["passed"]
    up = validate_internal_equilibrium(spec, np.full(3, iv.lo * 1.01), alloc)["passed"]
    down = validate_internal_equilibrium(spec, np.full(3, iv.lo * 0.99), alloc)["passed"]
    ok = single and base and not up and not down
    acceptance(5, ok, f"interval=[{iv.lo!r}, {iv.hi!r}] target={target!r} "
                      f"valid={base} +1%={up} -1%={down}")


def test_criterion_6_finite_mean_contrast(acceptance):
    res = es_finite_mean_equilibrium([1.0, 1.0], Normal(), 0.9, N_MC, RngStream(SEED, (6,)), THREADS)
    p, se = res.price, res.diagnostics["price_se"]
    agree = abs(p[0] - p[1]) <= 3 * math.hypot(se[0], se[1])
    euler = abs(res.diagnostics["euler_residual"]) <= 3 * res.diagnostics["es_se"]
    chk = normal_rvar_two_agent_check(0.9, 0.99)
    ok = agree and euler and chk["argmin"] == (0.5, 0.5)
    acceptance(6, ok, f"prices={p[0]:.4f},{p[1]:.4f} (se {se[0]:.4f}) "
                      f"euler residual={res.diagnostics['euler_residual']:.2e} grid argmin={chk['argmin']}")


def test_criterion_7_hill(acceptance):
    n, alpha = 10**4, 0.85
    k = default_threshold_k(n)
    covered = 0
    for i in range(100):
        x = Pareto(alpha).sample(n, RngStream(SEED, (7, i)))
        h = hill_estimator(x, k)
        covered += h.ci_low <= alpha <= h.ci_high
    hand = hill_estimator(np.exp([0.0, 1.0, 2.0, 3.0]), 3).alpha_hat
    ok = covered >= 90 and hand == 0.5
    acceptance(7, ok, f"coverage={covered}/100 at k={k} hand sample alpha={hand!r}")


def test_criterion_8_table_gpd(acceptance):
    xi = (1.19, 1.17, 1.01, 1.39, 1.23, 1.22)
    beta = (774.0, 254.0, 233.0, 412.0, 107.0, 243.0)
    t0 = time.perf_counter()
    rep = var_superadditivity_report([GPD(x, b) for x, b in zip(xi, beta)], [1 / 6] * 6,
                                     [0.95, 0.96, 0.97, 0.98, 0.99], N_MC, RngStream(SEED, (8,)), THREADS)
    elapsed = time.perf_counter() - t0
    ok = bool(rep.separated.all()) and rep.gap_increasing and elapsed < 60
    gaps = ", ".join(f"{g:.0f}" for g in rep.gap)
    acceptance(8, ok, f"separated={bool(rep.separated.all())} gaps=[{gaps}] runtime={elapsed:.1f}s")


def test_criterion_9_dominance_test_calibration(acceptance):
    n, reps = 10**4, 200
    rejections = power_hits = 0
    for i in range(reps):
        x = Pareto(1).sample(n, RngStream(SEED, (9, i, 0)))
        y = Pareto(1).sample(n, RngStream(SEED, (9, i, 1)))
        rejections += one_sided_dominance_test(x, y, 999, RngStream(SEED, (9, i, 2))) <= 0.05
        power_hits += one_sided_dominance_test(x + 1.0, y, 999, RngStream(SEED, (9, i, 3))) <= 0.05
    size, power = rejections / reps, power_hits / reps
    ok = 0.025 <= size <= 0.075 and power >= 0.99
    acceptance(9, ok, f"size={size:.3f} power={power:.3f} over {reps} replications")


def test_criterion_10_degenerate_classifier(acceptance):
    suite = [
        DistortionFn.identity(),
        DistortionFn.var_step(0.5),
        DistortionFn.es_ramp(0.9),
        DistortionFn.essinf(),
        DistortionFn.esssup(),
        DistortionFn.mixture([0.3, 0.7], [DistortionFn.essinf(), DistortionFn.esssup()]),
    ]
    got = tuple(is_degenerate_distortion(h) for h in suite)
    ok = got == (False, False, False, True, True, True)
    acceptance(10, ok, f"classifier={got}")
