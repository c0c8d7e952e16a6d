"""Acceptance criteria, each checked at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line to the terminal (also when
output capture is on), then asserts.
"""

import functools
import math
import time

import numpy as np
import pytest

from pmchsh.attacks import AttackParams, bb84_counterexample, optimal_attack, optimize_attack, perturbed_scenario
from pmchsh.entropy import (
    chsh_min_entropy_bound,
    eve_marginals,
    min_entropy_from_distance,
    robust_min_entropy_bound,
    trace_distance,
    trace_distance_bound,
)
from pmchsh.jordan import joint_block_diagonalize, reassemble
from pmchsh.report import analyze
from pmchsh.scenario import chsh_value, support_dimension
from pmchsh.verify import CampaignConfig, mixture_check, run_campaign, trial_seed
from oracles import pair_with_blocks, tight_curve

TSIRELSON = 2 * math.sqrt(2)


@functools.lru_cache(maxsize=None)
def optimized(target):
    start = time.perf_counter()
    scen, best_d = optimize_attack(target, restarts=32)
    return scen, best_d, time.perf_counter() - start


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        return ok
    return emit


def test_criterion_1_tightness_curve(report):
    start = time.perf_counter()
    worst = 0.0
    for f in (0.0, 0.25, 0.5, 0.75, 1.0):
        scen = optimal_attack(AttackParams(f))
        s_val = chsh_value(scen)
        d = trace_distance(*eve_marginals(scen))
        s_exp, d_exp = tight_curve(f)
        worst = max(worst, abs(s_val - s_exp), abs(d - d_exp), abs(d - trace_distance_bound(s_val)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    report("1 tightness curve", ok, f"max deviation {worst:.2e} (tol 1e-9), {elapsed:.3f} s")
    assert ok


def test_criterion_2_min_entropy_endpoints(report):
    top, bottom = chsh_min_entropy_bound(TSIRELSON), chsh_min_entropy_bound(2.0)
    ok = abs(top - 1.0) <= 1e-12 and abs(bottom) <= 1e-12
    report("2 min-entropy endpoints", ok, f"bound(2*sqrt(2)) = {top!r}, bound(2) = {bottom!r}")
    assert ok


def test_criterion_3_bb84_counterexample(report):
    scen = bb84_counterexample()
    s_val = chsh_value(scen)
    d = trace_distance(*eve_marginals(scen))
    dim = support_dimension(scen)[0]
    rep = analyze(scen)
    ok = (abs(s_val - TSIRELSON) <= 1e-12 and abs(d - 1.0) <= 1e-12 and dim == 3
          and rep.qubit_assumption["support_dim"] == 3 and not rep.certified)
    report("3 BB84 counterexample", ok,
           f"S - 2*sqrt(2) = {s_val - TSIRELSON:.1e}, D - 1 = {d - 1:.1e}, support dim {dim}, "
           f"certified={rep.certified}")
    assert ok


def test_criterion_4_stress_campaign(report):
    cfg = CampaignConfig(trials=10_000, seed=0, dim_b=(2, 3, 4), dim_e=(1, 2, 3, 4), tolerance=1e-7)
    res = run_campaign(cfg)
    required = ("distance_bound", "min_entropy_bound", "sum_p", "sum_s", "witness", "tradeoff", "tight",
                "distance<=helstrom", "helstrom<=aggregate", "aggregate<=concave", "tsirelson")
    missing = [k for k in required if k not in res.worst_slack_per_check]
    worst = min(res.worst_slack_per_check[k] for k in required if k in res.worst_slack_per_check)
    ok = res.trials_run == 10_000 and not res.violations and not missing and res.runtime < 120
    report("4 stress campaign", ok,
           f"{res.trials_run} trials, {len(res.violations)} violations, worst slack {worst:.2e}, "
           f"{res.runtime:.1f} s")
    assert ok, res.violations[:10]


def test_criterion_5_jordan_round_trip(report):
    rng = np.random.default_rng(2024)
    worst_err = worst_angle = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        k = int(rng.integers(0, n // 2 + 1))
        rest = n - 2 * k
        ones, minus = (int(x) for x in rng.multinomial(rest, [1 / 3] * 3)[:2])
        mixed = rest - ones - minus
        gammas = rng.uniform(0.01, math.pi - 0.01, size=k).tolist()
        u, v = pair_with_blocks(rng, gammas, ones, minus, mixed)
        blocks = joint_block_diagonalize(u, v)
        worst_err = max(worst_err, np.max(np.abs(reassemble(blocks, "u") - u)),
                        np.max(np.abs(reassemble(blocks, "v") - v)))
        got = sorted(b.gamma for b in blocks if b.dimension == 2)
        if len(got) != k:
            worst_angle = math.inf
            continue
        if k:
            worst_angle = max(worst_angle, float(np.max(np.abs(np.array(got) - sorted(gammas)))))
    ok = worst_err <= 1e-9 and worst_angle <= 1e-8
    report("5 Jordan round-trip", ok, f"1000 pairs, reconstruction {worst_err:.2e}, angles {worst_angle:.2e}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("target", [2.0, 2.4, TSIRELSON], ids=["2.0", "2.4", "tsirelson"])
def test_criterion_6_optimizer_rediscovers_tightness(report, target):
    scen, best_d, elapsed = optimized(target)
    s_achieved = chsh_value(scen)
    gap = abs(best_d - trace_distance_bound(target))
    excess = best_d - trace_distance_bound(s_achieved)
    ok = gap <= 1e-3 and elapsed < 60 and excess <= 1e-6 and s_achieved >= target - 1e-6
    report(f"6 optimizer at s_target={target:.6f}", ok,
           f"best_d {best_d:.6f}, |best_d - bound| {gap:.2e} (tol 1e-3), "
           f"excess over bound at achieved S {excess:.2e} (tol 1e-6), {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("target", [
    2.0,
    2.4,
    pytest.param(TSIRELSON, marks=pytest.mark.xfail(
        strict=True, reason="feasibility slack of 1e-6 in S admits D of order 1e-3 at the maximal value")),
], ids=["2.0", "2.4", "tsirelson"])
def test_criterion_6_excess_measured_at_target(report, target):
    _, best_d, _ = optimized(target)
    excess = best_d - trace_distance_bound(target)
    ok = excess <= 1e-6
    report(f"6 optimizer excess over bound at s_target={target:.6f}", ok, f"{excess:.2e} (tol 1e-6)")
    assert ok


def test_criterion_7_robustness(report):
    grid = np.linspace(2.0, TSIRELSON, 101)
    exact = all(robust_min_entropy_bound(float(s), 0.0) == chsh_min_entropy_bound(float(s)) for s in grid)
    lines = []
    ok = exact
    for f in (1.0, 0.6):
        base = optimal_attack(AttackParams(f))
        pert = perturbed_scenario(base, 0.01, 11)
        ds = abs(chsh_value(pert) - chsh_value(base))
        h = min_entropy_from_distance(trace_distance(*eve_marginals(pert)))
        slack = h - robust_min_entropy_bound(chsh_value(pert), 0.01)
        ok = ok and ds <= 0.04 + 1e-9 and slack >= -1e-7
        lines.append(f"f_z={f}: |dS| {ds:.4f}, slack {slack:.3e}")
    report("7 robustness", ok, f"grid exact={exact}; " + "; ".join(lines))
    assert ok


def test_criterion_8_mixture_convexity(report):
    rng = np.random.default_rng(8)
    worst = math.inf
    applicable = 0
    dims = [(b, e) for b in (2, 3, 4) for e in (1, 2, 3, 4)]
    for i in range(100):
        q = float(rng.uniform())
        db, de = dims[i % len(dims)]
        rec = mixture_check([trial_seed(8, 2 * i), trial_seed(8, 2 * i + 1)], [q, 1 - q], db, de)
        if rec.applicable:
            applicable += 1
            worst = min(worst, rec.slack)
    ok = worst >= -1e-7 and applicable >= 50
    report("8 mixture convexity", ok, f"100 mixtures, {applicable} with averaged S >= 2, worst slack {worst:.2e}")
    assert ok
