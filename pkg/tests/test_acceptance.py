"""Exit criteria. Each test records one PASS/FAIL line shown in the terminal summary."""

import random
import time

import numpy as np
import pytest

from multihaz import (
    DGPConfig,
    PotentialOutcomeLattice,
    actual_risk,
    build_risk_table,
    cct_hazard,
    collapsibility_gap,
    conditional_hazard,
    estimator_oracle_check,
    generate_lattice,
    icp_hazard,
    marginal_nelson_aalen,
    multiverse_summary,
    observe,
    scenario_noncollapsible,
    scenario_selection_bias,
    summarize,
)
from multihaz.dgp import scenario_oracle
from multihaz.estimators import hazard_curve

from conftest import cohort_from_rows, random_lattice, random_rows, small_corpus
from oracles import event_times, naive_increment

pytestmark = pytest.mark.acceptance


def test_collapsibility_identity(criterion):
    rng = random.Random(17)
    start = time.perf_counter()
    worst, gap_nonzero = 0.0, 0
    for _ in range(200):
        rows = random_rows(rng, rng.randint(1, 50), rng.randint(1, 4))
        table = build_risk_table(cohort_from_rows(rows))
        w = table.stratum_sizes / table.m
        for z in (0, 1):
            weighted = sum(conditional_hazard(table, z, x).increments * w[k] for k, x in enumerate(table.strata))
            worst = max(worst, float(np.abs(icp_hazard(table, z).increments - weighted).max()))
            if len(table.strata) >= 2:
                gap_nonzero += int((collapsibility_gap(table, z).icp != 0).sum())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and gap_nonzero == 0 and elapsed < 5
    criterion(ok, f"max |iCP - weighted conditional| = {worst:.2e}, nonzero gap_iCP cells = {gap_nonzero}, {elapsed:.2f}s")
    assert ok


def _noncollapsible_run():
    cfg = scenario_noncollapsible(m=50000, seed=0)
    table = build_risk_table(observe(generate_lattice(cfg), cfg))
    tau = table.times[-1]
    out = {}
    for z in (0, 1):
        gap = collapsibility_gap(table, z)
        out[z] = (
            float(gap.cct[-1]),
            float(np.abs(gap.icp).max()),
            summarize(cct_hazard(table, z), tau).cumulative,
            summarize(icp_hazard(table, z), tau).cumulative,
        )
    return out


def test_noncollapsibility_of_cct(criterion):
    start = time.perf_counter()
    out = _noncollapsible_run()
    elapsed = time.perf_counter() - start
    ok = elapsed < 30
    details = []
    for z, (gap_last, gap_icp, cum_cct, cum_icp) in out.items():
        # the standardized hazard sits below the weighted mean here, so the gap is negative
        ok &= abs(gap_last) > 0.01 and gap_icp == 0 and cum_cct < cum_icp
        details.append(f"arm {z}: gap_cCT(t_J)={gap_last:+.4f} cum cCT={cum_cct:.4f} < cum iCP={cum_icp:.4f}")
    criterion(ok, "; ".join(details) + f"; {elapsed:.2f}s")
    assert ok


def _bounds_hold(lat: PotentialOutcomeLattice) -> tuple[int, int]:
    checked = violations = 0
    for tau in lat.times:
        rep = multiverse_summary(lat, tau)
        for g in rep.groups.values():
            if g.size == 0:
                continue
            checked += 1
            prior = np.cumsum(g.actual_deaths)
            ok = g.average <= g.actual_risk <= g.cumulative
            ok &= all(a <= w <= p for a, w, p in zip(g.actual_deaths, g.world_deaths, prior))
            violations += not ok
    return checked, violations


def test_bound_theorem(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = violations = 0
    for _ in range(1000):
        c, v = _bounds_hold(random_lattice(rng, 20, 5))
        checked, violations = checked + c, violations + v
    times = tuple(float(t) for t in range(1, 11))
    for seed in range(100):
        h = np.random.default_rng(seed).uniform(0.02, 0.4, size=(2, 2, 10))
        cfg = DGPConfig(m=2000, times=times, hazards=h.tolist(), strata=("A", "B"), strata_probs=(0.4, 0.6), seed=seed)
        c, v = _bounds_hold(generate_lattice(cfg.validate()))
        checked, violations = checked + c, violations + v
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 60
    criterion(ok, f"{violations} violations over {checked} (lattice, tau, group) checks, {elapsed:.2f}s")
    assert ok


def test_equality_cases(criterion):
    j1_ok = True
    for seed in range(20):
        h = np.random.default_rng(seed).uniform(0, 1, size=(2, 2, 1))
        cfg = DGPConfig(m=300, times=(1.0,), hazards=h.tolist(), strata=("A", "B"), strata_probs=(0.5, 0.5), seed=seed)
        rep = multiverse_summary(generate_lattice(cfg.validate()), 1.0)
        j1_ok &= all(g.cumulative == g.average == g.actual_risk for g in rep.groups.values())

    plain_ok = True
    rng = np.random.default_rng(7)
    for _ in range(200):
        lat = random_lattice(rng, 20, 5)
        deaths = np.zeros_like(lat.deaths)
        dies = lat.death_index >= 0
        deaths[np.nonzero(dies)[0], lat.death_index[dies]] = 1
        plain = PotentialOutcomeLattice(lat.times, lat.ids, lat.arm, lat.stratum, lat.strata, lat.death_index, deaths)
        for tau in lat.times:
            plain_ok &= all(g.actual_risk == g.cumulative for g in multiverse_summary(plain, tau).groups.values())
    ok = j1_ok and plain_ok
    criterion(ok, f"J=1 cumulative == average == risk: {j1_ok}; no re-death risk == cumulative: {plain_ok}")
    assert ok


def test_estimator_multiverse_oracle(criterion):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        lat = generate_lattice(scenario_oracle(m=10000, hazard=0.1, J=3, seed=seed))
        check = estimator_oracle_check(lat, 0.02)
        worst = max(worst, check.max_discrepancy)
    elapsed = time.perf_counter() - start
    ok = worst < 0.02 and elapsed < 60
    criterion(ok, f"max |world risk - iCP increment| = {worst:.4f} over 20 seeds (< 0.02), {elapsed:.2f}s")
    assert ok


def test_selection_bias_reproduction(criterion):
    cfg = scenario_selection_bias(m=50000, seed=0)
    lat = generate_lattice(cfg)
    marginal = build_risk_table(observe(lat, cfg))
    hr_marg = marginal_nelson_aalen(marginal, 1).increments / marginal_nelson_aalen(marginal, 0).increments
    attenuation = abs(1 - hr_marg[0]) - abs(1 - hr_marg[4])

    adjusted = build_risk_table(observe(lat, cfg, reveal_frailty=True))
    hr_icp = icp_hazard(adjusted, 1).increments / icp_hazard(adjusted, 0).increments
    spread = float(hr_icp.max() - hr_icp.min())
    ok = attenuation > 0.05 and spread < 0.02
    criterion(ok, f"marginal HR {hr_marg[0]:.3f} -> {hr_marg[4]:.3f} (attenuation {attenuation:.3f} > 0.05); "
                  f"class-adjusted iCP HR spread {spread:.4f} < 0.02")
    assert ok


def test_hand_enumeration_golden(criterion, e1):
    table = build_risk_table(e1)
    icp = icp_hazard(table, 1).increments
    cct = cct_hazard(table, 1).increments
    risk = actual_risk(e1, 1, 2.0)
    ok = (
        np.allclose(icp, [0.25, 0.25], rtol=0, atol=1e-12)
        and np.allclose(cct, [0.25, 1 / 3], rtol=0, atol=1e-12)
        and abs(risk - 0.5) <= 1e-12
    )
    criterion(ok, f"iCP {icp.tolist()}, cCT {cct.tolist()}, F {risk}")
    assert ok


def test_reveal_not_reproducible_substitute(criterion):
    # the real cohort is not public; the qualitative ordering is checked on the
    # noncollapsible preset instead
    out = _noncollapsible_run()
    ok = all(cum_cct < cum_icp for _, _, cum_cct, cum_icp in out.values())
    criterion(ok, "real-cohort figure not reproducible (data not public); substitute: cumulative cCT < iCP on noncollapsible preset")
    assert ok


def test_brute_force_equivalence(criterion):
    corpus = small_corpus(300)
    mismatches = compared = 0
    for rows in corpus:
        table = build_risk_table(cohort_from_rows(rows))
        times = event_times(rows)
        for z in (0, 1):
            curves = [(k, None, hazard_curve(table, k, z).increments) for k in ("marginal", "cct", "icp")]
            curves += [("conditional", x, conditional_hazard(table, z, x).increments) for x in table.strata]
            for kind, x, got in curves:
                for j, t in enumerate(times):
                    compared += 1
                    mismatches += abs(got[j] - float(naive_increment(rows, kind, z, t, x))) > 1e-12
    ok = mismatches == 0
    criterion(ok, f"{mismatches} mismatches over {compared} increments from {len(corpus)} cohorts of <= 10 subjects")
    assert ok
