"""Acceptance suite.

Each test checks one part of a numbered criterion and reports it through the
``record`` fixture; ``conftest.py`` prints one PASS/FAIL line per criterion at
the end of the run.  Parts that cannot be met are marked ``xfail(strict=True)``:
they still run and report their measured values, and pytest fails if one of
them ever starts passing.  ``python tests/test_acceptance.py`` runs only this
file.
"""

import sys
import time
import warnings
from functools import cache
from itertools import product

import numpy as np
import pytest
from scipy import stats

from ipscoupling.coupling import (
    audit_discrepancies,
    check_attractive,
    coupling_table,
    detect_exchanges,
    equivalence_report,
    staircase,
    verify_recursion,
)
from ipscoupling.hydro import (
    RiemannProblem,
    compare_profiles,
    godunov,
    riemann_experiment,
    riemann_solve,
    s2ep_flux,
    s2ep_flux_model,
    stp_flux,
    stp_flux_model,
    sup_distance_away_from_jumps,
)
from ipscoupling.irreducibility import check_IC
from ipscoupling.rates import build_mp, build_s2ep, build_sep, build_stp, build_zrp
from ipscoupling.s2ep_table import attr3_holds, random_attractive_rates, table_deviation
from ipscoupling.simulate import monitor_stability, ordered_pair_initial, run, run_coupled, sample_product_measure

from _models import (
    CONTREX,
    K,
    S2EP_I,
    S2EP_II,
    S2EP_III,
    all_models,
    degenerate_s2ep,
    mp,
    mp_exact,
    sep,
    stp,
    thermal,
    zrp,
)

SEED = 2024
# targets quoted by criteria 9 and 11; both follow the halved flux (p - q) rho (1 + rho) / 2
STATED_STP_CURRENT = 1.0
STATED_STP_SHOCK_SPEED = 1.5


# ------------------------------------------------------------ 1-6: algebra


def test_c01_coupling_equivalence(record):
    t0 = time.perf_counter()
    worst = 0.0
    quads = 0
    for t in all_models().values():
        rep = equivalence_report(t, w=10)
        worst = max(worst, rep.closed_vs_staircase, rep.closed_vs_recursion, rep.recursion_residual)
        quads += rep.quads
    exact = mp_exact()
    exact_bad = 0
    for q in product(list(exact.values.window(10)), repeat=4):
        ct = coupling_table(exact, q, (1,))
        path = {k: v for k, v in staircase(exact, q, (1,)).as_dict().items() if v}
        if not verify_recursion(exact, q, (1,), ct.entries, tol=0) or {k: v for k, v in ct.entries.items() if v} != path:
            exact_bad += 1
    dt = time.perf_counter() - t0
    ok = record(1, "closed form, staircase and recursion", worst <= 1e-12 and exact_bad == 0 and dt < 5,
                f"{quads} quadruples, max gap {worst:.2g}, {exact_bad} rational mismatches, {dt:.1f} s")
    assert ok


def test_c02_marginal_recovery(record):
    fails = 0
    scanned = 0
    for t in all_models().values():
        rep = equivalence_report(t, w=10)
        scanned += rep.quads
        fails += int(rep.left_marginal > 1e-12) + int(rep.right_marginal > 1e-12) + int(rep.negative > 0)
    assert record(2, "row and column sums", fails == 0, f"{scanned} quadruples, {fails} failures")


@cache
def s2ep_vectors():
    """1000 attractive vectors and 1000 split evenly between attractive and violating."""
    rng = np.random.Generator(np.random.Philox(key=[SEED, 3]))
    attractive = [random_attractive_rates(rng) for _ in range(1000)]
    mixed = []
    for i in range(1000):
        r = random_attractive_rates(rng)
        if i % 2:
            s = "p" if rng.random() < 0.5 else "m"
            lo = min(r[f"r01_{s}"], r[f"r10_{s}"])
            hi = max(r[f"r01_{s}"], r[f"r10_{s}"])
            kind = int(rng.integers(3))
            bump = rng.uniform(0.01, 0.5)
            if kind == 0:
                r[f"r2_{s}"] = lo + bump
            elif kind == 1:
                r[f"r00_{s}"] = lo + bump
            else:
                r[f"r11_{s}"] = max(hi - r[f"r2_{s}"] - bump, 0.0)
        mixed.append(r)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return attractive, mixed, [build_s2ep(r) for r in mixed]


def test_c03_table_regression(record):
    attractive, _, _ = s2ep_vectors()
    worst = max(table_deviation(build_s2ep(r)) for r in attractive)
    assert record(3, "reference table", worst < 1e-12, f"1000 vectors, max deviation {worst:.2g}")


def test_c04_attractiveness_verdicts(record):
    _, mixed, tables = s2ep_vectors()
    direct = [attr3_holds(r) for r in mixed]
    agree = sum(bool(check_attractive(t)) == d for t, d in zip(tables, direct))
    assert sum(direct) == 500
    assert record(4, "scan vs inequalities", agree == 1000, f"{agree}/1000 agree, {1000 - sum(direct)} violating")


def test_c05_exchange_criterion(record):
    _, mixed, tables = s2ep_vectors()
    agree = 0
    for r, t in zip(mixed, tables):
        want = r["r2_p"] > r["r00_p"] or r["r2_m"] > r["r00_m"]
        agree += (detect_exchanges(t) is not None) == want
    clean = detect_exchanges(stp(0.7, 0.3)) is None and detect_exchanges(sep()) is None
    assert record(5, "witness iff double jump beats creation", agree == 1000 and clean,
                  f"{agree}/1000 agree, stick and exclusion exchange-free: {clean}")


def test_c06_discrepancy_algebra(record):
    _, mixed, tables = s2ep_vectors()
    models = list(all_models().values()) + [t for r, t in zip(mixed, tables) if attr3_holds(r)][:50]
    entries = bad = 0
    for t in models:
        rep = audit_discrepancies(t, w=10)
        entries += rep.entries
        bad += rep.positive_delta + rep.crnz_fail + rep.class_mismatch
    assert record(6, "sign, range and zero cases", bad == 0, f"{entries} nonzero entries, {bad} exceptions")


# ------------------------------------------------------- 7-9: simulation


def _stability_violations(table, pairs, T):
    viol = events = 0
    for r, (low, up) in enumerate(pairs):
        tr = run_coupled(table, low, up, T, seed=SEED, replica=r, boundary="closed", monitor=True)
        viol += monitor_stability(tr).violations
        events += int(tr.stats["events"])
    return viol, events


def test_c07_stick_and_exchange_free_stable(record):
    t = stp()
    v1, e1 = _stability_violations(t, [ordered_pair_initial(t, 0.5, 1.0, 200, SEED, r) for r in range(100)], 10.0)
    s = thermal()
    assert detect_exchanges(s) is None
    pairs = [(sample_product_measure(s, 0.2, 200, SEED, 2 * r), sample_product_measure(s, -0.1, 200, SEED, 2 * r + 1))
             for r in range(100)]
    v2, e2 = _stability_violations(s, pairs, 10.0)
    assert record(7, "no growth of the running-sum bound", v1 == 0 and v2 == 0,
                  f"stick {v1} violations in {e1} events, two-species {v2} in {e2}")


def test_c07_exchange_scenario_breaks_stability(record):
    t = build_s2ep(CONTREX)
    hits = 0
    for r in range(100):
        bg = sample_product_measure(t, 0.0, 30, SEED, r)
        low, up = bg.copy(), bg.copy()
        low[14:17] = [1, 0, 0]
        up[14:17] = [0, 1, -1]
        tr = run_coupled(t, low, up, 5.0, seed=SEED, replica=r, boundary="closed", monitor=True)
        hits += monitor_stability(tr).violated
    assert record(7, "exchange scenario", hits >= 1, f"{hits}/100 replicas exceed the initial bound")


ORDER_TABLES = {"sep": sep, "zrp": zrp, "mp": mp, "stp": lambda: stp(0.7, 0.3), "s2ep": thermal}
ORDER_DENSITIES = {"sep": (0.3, 0.6), "zrp": (0.5, 1.5), "stp": (0.5, 1.0), "s2ep": (-0.3, 0.4)}


def test_c08_order_preserved(record):
    counts = {}
    for name, make in ORDER_TABLES.items():
        t = make()
        assert check_attractive(t, w=6)
        events = viol = 0
        r = 0
        while events < 10_000:
            if name == "mp":
                # no explicit invariant measure: lift a random configuration by a nonnegative one
                rng = np.random.Generator(np.random.Philox(key=[SEED, r]))
                low = rng.integers(0, 3, 100)
                up = low + rng.integers(0, 2, 100)
            else:
                low, up = ordered_pair_initial(t, *ORDER_DENSITIES[name], 100, SEED, r)
            tr = run_coupled(t, low, up, 10.0, seed=SEED, replica=r)
            events += int(tr.stats["events"])
            viol += int(tr.stats["order_violations"]) + int(np.any(tr.lower[-1] > tr.upper[-1]))
            r += 1
        counts[name] = (events, viol)
    bad = sum(v for _, v in counts.values())
    detail = ", ".join(f"{k} {v}/{e}" for k, (e, v) in counts.items())
    assert record(8, "order kept at every event", bad == 0, f"violations/events: {detail}")


def _final_values(table, L, T, replicas, coupled, rho):
    xi0, ze0 = ordered_pair_initial(table, *rho, L, SEED, 0)
    finals, currents = [], []
    for r in range(replicas):
        if coupled:
            tr = run_coupled(table, xi0, ze0, T, seed=SEED + 1, replica=r)
        else:
            tr = run(table, xi0, T, seed=SEED + 2, replica=r)
        finals.append(tr.final)
        currents.append(int(tr.current[-1]))
    return np.array(finals), np.array(currents)


def test_c08_coupled_marginal_matches_single(record):
    L, T, replicas = 20, 2.0, 200
    pvals = []
    for name in ("sep", "stp", "s2ep"):
        t = ORDER_TABLES[name]()
        a, ja = _final_values(t, L, T, replicas, False, ORDER_DENSITIES[name])
        b, jb = _final_values(t, L, T, replicas, True, ORDER_DENSITIES[name])
        top = 4
        for x in range(L):
            va, vb = np.minimum(a[:, x], top), np.minimum(b[:, x], top)
            levels = np.union1d(va, vb)
            table = np.array([[np.sum(va == v) for v in levels], [np.sum(vb == v) for v in levels]])
            pvals.append(1.0 if len(levels) < 2 else stats.chi2_contingency(table)[1])
        pvals.append(stats.ks_2samp(ja, jb).pvalue)
    m = len(pvals)
    adj = min(pvals) * m
    assert record(8, "coupled marginal vs single process", adj >= 0.01,
                  f"{m} two-sample tests, smallest p {min(pvals):.3g}, Bonferroni {min(adj, 1):.3g}")


@cache
def stp_torus():
    t = stp()
    L, T, n = 256, 50.0, 20
    cur, drift = [], []
    for r in range(n):
        config = sample_product_measure(t, 1.0, L, SEED, r)
        tr = run(t, config, T, seed=SEED, replica=r)
        cur.append(tr.current[-1] / (L * T))
        drift.append(tr.final[: L // 2].mean() - config[: L // 2].mean())
    cur, drift = np.array(cur), np.array(drift)
    return cur.mean(), cur.std(ddof=1) / np.sqrt(n), drift.mean(), drift.std(ddof=1) / np.sqrt(n)


@pytest.mark.xfail(strict=True, reason="the stated value 1 halves the geometric-measure expectation; the current is 2")
def test_c09_stick_current_stated_value(record):
    j, se, _, _ = stp_torus()
    assert record(9, "stick current vs 1", abs(j - STATED_STP_CURRENT) <= 3 * se,
                  f"measured {j:.4f} +- {se:.4f}, {abs(j - STATED_STP_CURRENT) / se:.1f} stderr from 1")


def test_c09_stick_current_matches_flux(record):
    j, se, _, _ = stp_torus()
    expected = float(stp_flux(1.0, 1.0, 0.0))
    assert record(9, "stick current vs rho(1+rho)", abs(j - expected) <= 3 * se, f"measured {j:.4f} +- {se:.4f}, flux {expected:g}")


def test_c09_stick_density_drift(record):
    _, _, d, se = stp_torus()
    assert record(9, "density drift", abs(d) <= 3 * se, f"{d:.4f} +- {se:.4f}")


def test_c09_two_species_current(record):
    t = thermal()
    L, T, n = 500, 40.0, 16
    worst = 0.0
    for rho in (-0.6, -0.3, 0.0, 0.3, 0.6):
        cur = [run(t, sample_product_measure(t, rho, L, SEED, r), T, seed=SEED, replica=r).current[-1] / (L * T)
               for r in range(n)]
        se = np.std(cur, ddof=1) / np.sqrt(n)
        worst = max(worst, abs(np.mean(cur) - float(s2ep_flux(rho, t))) / se)
    assert record(9, "two-species current on 5 densities", worst <= 3, f"worst gap {worst:.2f} stderr")


# ---------------------------------------------------------- 10: irreducibility


def test_c10_irreducibility_suite(record):
    satisfied = {
        "sep": build_sep(K),
        "sep totally asymmetric": build_sep({1: 1.0}),
        "sep wedge case": build_sep({(2, 0): 0.5, (-1, 0): 0.3, (0, 1): 0.2}),
        "zrp": build_zrp(K, lambda a: min(a, 3)),
        "mp rate a/(b+1)": build_mp(K, lambda a, b: a / (b + 1)),
        "mp rate 1{a>b}": build_mp(K, lambda a, b: 1.0 if a > b else 0.0),
        "stp": build_stp(0.7, 0.3),
        "s2ep (i)": build_s2ep(S2EP_I),
        "s2ep (ii)": build_s2ep(S2EP_II),
        "s2ep (iii)": build_s2ep(S2EP_III),
    }
    failed = {"zrp g(2)=0": build_zrp(K, [0, 1, 0, 1]), "degenerate s2ep": degenerate_s2ep()}
    wrong = [n for n, t in satisfied.items() if not check_IC(t, w=5).satisfied]
    for n, t in failed.items():
        res = check_IC(t, w=5)
        if res.satisfied or res.witness is None:
            wrong.append(n)
    assert record(10, "verdicts", not wrong,
                  f"{len(satisfied)} satisfied, {len(failed)} failed with witness; wrong: {wrong or 'none'}")


# ------------------------------------------------------ 11-13: hydrodynamics


@cache
def stick_riemann():
    return riemann_experiment(stp(), stp_flux_model(1.0, 0.0), 2.0, 0.0, N=1000, t=1.0, replicas=10, seed=SEED)


@cache
def thermal_riemann():
    t = thermal()
    return riemann_experiment(t, s2ep_flux_model(t), 0.303, -0.303, N=1000, t=1.0, replicas=10, seed=SEED)


def _stick_front(run_):
    (_, measured), = run_.fronts
    return np.nan if measured is None else measured


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the shock of rho(1+rho) from 2 to 0 travels at 3, not 3/2")
def test_c11_shock_speed_stated_value(record):
    v = _stick_front(stick_riemann())
    assert record(11, "shock speed vs 3/2", abs(v - STATED_STP_SHOCK_SPEED) <= 0.05,
                  f"measured {v:.3f}")


@pytest.mark.slow
def test_c11_shock_speed_matches_flux(record):
    res = stick_riemann()
    pred = res.solution.shocks[0].speed
    v = _stick_front(res)
    assert record(11, "shock speed vs Rankine-Hugoniot of rho(1+rho)", abs(v - pred) <= 0.05,
                  f"measured {v:.3f}, predicted {pred:g}")


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="geometric site variance 6 at density 2 keeps 10-replica L1 near 0.5")
def test_c11_profile_l1(record):
    res = stick_riemann()
    inner = compare_profiles(res.x_over_N, res.density, res.solution, 1.0, 1.6)
    assert record(11, "L1 < 0.08", res.l1 < 0.08,
                  f"{res.l1:.3f} on |x/N| <= {res.half_width:.2f}, {inner:.3f} on |x/N| <= 1.6")


def test_c12_wave_structure(record):
    t = thermal()
    sol = riemann_solve(RiemannProblem(0.303, -0.303, s2ep_flux_model(t)))
    kinds = [w.kind for w in sol.waves]
    s1, s2 = sol.shocks if len(sol.shocks) == 2 else (None, None)
    ok = kinds == ["shock", "rarefaction", "shock"] and s1.speed < 0 < s2.speed
    assert record(12, "two shocks around a fan", ok,
                  f"{' / '.join(kinds)}, speeds {s1.speed:.4f} and {s2.speed:.4f}" if ok else str(kinds))


@pytest.mark.slow
def test_c12_profile_l1(record):
    res = thermal_riemann()
    assert record(12, "L1 < 0.10", res.l1 < 0.10, f"{res.l1:.4f} on |x/N| <= {res.half_width:.2f}")


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="fronts trail the tangential shocks by about 2.3/sqrt(N t) at N=1000")
def test_c12_front_positions(record):
    res = thermal_riemann()
    gaps = [abs(m - p) if m is not None else np.inf for p, m in res.fronts]
    assert record(12, "fronts within 0.05", max(gaps) <= 0.05,
                  ", ".join(f"predicted {p:+.3f} measured {m:+.3f}" for p, m in res.fronts))


@pytest.mark.slow
@pytest.mark.parametrize("model", ["stp", "s2ep"])
def test_c13_envelope_vs_finite_volumes(record, model):
    rng = np.random.Generator(np.random.Philox(key=[SEED, 13 if model == "stp" else 14]))
    flux = stp_flux_model(1.0, 0.0) if model == "stp" else s2ep_flux_model(thermal())
    lo, hi = (0.0, 2.0) if model == "stp" else (-1.0, 1.0)
    worst = 0.0
    for _ in range(20):
        lam, rho = rng.uniform(lo, hi, size=2)
        sol = riemann_solve(RiemannProblem(lam, rho, flux))
        x, u = godunov(flux, lam, rho)
        worst = max(worst, sup_distance_away_from_jumps(sol, x, u))
    assert record(13, f"{model} sup-norm", worst < 0.02, f"20 pairs, worst {worst:.4f}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-rxX"]))
