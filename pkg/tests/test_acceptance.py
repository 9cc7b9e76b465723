"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from largemarket import detect, emery, markets
from largemarket.markets import CoefficientVector, CounterexampleMarket
from largemarket.portfolio import (
    AdmissibilityError,
    WealthProcess,
    drawdown_exploit,
    switch,
    truncation_decompose,
)
from largemarket.process import AdaptedProcess, jumps

from conftest import random_process, random_tree, random_wealth


@pytest.fixture
def verdict(capsys):
    def emit(tag: str, ok: bool, elapsed: float, limit: float, detail: str) -> None:
        ok_all = ok and elapsed < limit
        with capsys.disabled():
            print(f"\n[{'PASS' if ok_all else 'FAIL'}] {tag}: {detail} ({elapsed:.2f}s, limit {limit:g}s)")
        assert ok, detail
        assert elapsed < limit, f"runtime {elapsed:.2f}s over {limit}s"
    return emit


def test_ac01_epsilon_roots(verdict):
    t0 = time.perf_counter()
    eps = [markets.solve_epsilon(n) for n in range(1, 51)]
    res = [abs(markets.epsilon_residual(n, e)) for n, e in zip(range(1, 51), eps)]
    dt = time.perf_counter() - t0
    decreasing = all(b < a for a, b in zip(eps, eps[1:]))
    ok = max(res) < 1e-10 and decreasing and eps[49] < eps[0] / 10
    verdict("AC1 root table", ok, dt, 1.0,
            f"max residual {max(res):.2e}, decreasing={decreasing}, eps50/eps1={eps[49] / eps[0]:.3e}")


def _mc_mean_n1(draws: int, seed: int) -> tuple[float, float]:
    eps = markets.solve_epsilon(1)
    rng = np.random.default_rng(seed)
    s = s2 = 0.0
    left = draws
    while left:
        k = min(left, 1_000_000)
        w = rng.uniform(0.0, 1.0, k)
        x = CounterexampleMarket.payoff(_ONE, 1, w)
        s += math.fsum(x)
        s2 += math.fsum(x * x)
        left -= k
    m = s / draws
    return m, math.sqrt(max(s2 / draws - m * m, 0.0) / draws)


_ONE = CounterexampleMarket(1)


def test_ac02_unit_means(verdict):
    t0 = time.perf_counter()
    errs = [abs(markets.exact_mean(n, markets.solve_epsilon(n)) - 1.0) for n in range(1, 51)]
    m, se = _mc_mean_n1(10_000_000, seed=7)
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-9 and abs(m - 1.0) <= 3 * se
    verdict("AC2 unit means", ok, dt, 30.0,
            f"max |mean-1| {max(errs):.2e}; MC n=1 mean {m:.5f} +- {se:.5f} ({abs(m - 1) / se:.2f} se)")


def test_ac03_payoff_verdicts(verdict):
    rng = np.random.default_rng(3)
    mkt = CounterexampleMarket(6)
    t0 = time.perf_counter()
    bad_verdict = bad_sep = 0
    for i in range(1000):
        n = int(rng.integers(1, 7))
        if i % 2:
            c = rng.integers(-3, 4, n).astype(float)
        else:
            c = rng.normal(0.0, 1.0, n)
        cv = CoefficientVector(tuple(c))
        rep = mkt.portfolio_payoff(cv)
        if (rep.verdict == "unbounded below") != (cv.alpha > 0):
            bad_verdict += 1
        if cv.alpha <= 0 and mkt.expected_payoff(cv) > 1e-12:
            bad_sep += 1
    dt = time.perf_counter() - t0
    verdict("AC3 payoff verdicts", bad_verdict == 0 and bad_sep == 0, dt, 5.0,
            f"{bad_verdict} verdict exceptions, {bad_sep} separation exceptions over 1000 vectors")


def test_ac04_floor_collapse(verdict):
    t0 = time.perf_counter()
    ds = {N: detect.separating_polytope(CounterexampleMarket(N).discretize(), None, 0.0, "equality").delta_star
          for N in (5, 10, 20)}
    dt = time.perf_counter() - t0
    ok = ds[20] < ds[10] < ds[5] and ds[20] < 1e-3 * ds[5]
    verdict("AC4 floor collapse", ok, dt, 60.0,
            "delta*(5,10,20) = " + ", ".join(f"{ds[N]:.10f}" for N in (5, 10, 20)))


def test_ac05_binary_market(verdict):
    t0 = time.perf_counter()
    N = 12
    p = 2.0 ** -np.arange(1, N + 1)
    bm = markets.build_binary_tree(N, p)
    mkt = bm.one_period_market()
    J = bm.unit_jump()

    # (a) a strictly positive martingale measure for all assets restricts to every subset
    small = detect.na_small_scan(mkt)
    q = small[tuple(mkt.assets)].density
    cert_all = q is not None and bool(np.all(q > 0)) and np.max(np.abs(q @ mkt.payoffs)) < 1e-9
    a_ok = all(r.no_arbitrage for r in small.values()) and cert_all

    # (b) closed form and exhaustive oracle
    exact = [bm.emery_to_unit_jump(n) for n in range(1, N + 1)]
    b_ok = all(x == pn for x, pn in zip(exact, p))
    # the same quantity summed over the 4096 joint atoms carries product rounding
    tree_sum = [emery.emery_distance_one_period(bm.price(n), J) for n in range(1, N + 1)]
    b_ok = b_ok and all(abs(x - pn) <= 1e-15 for x, pn in zip(tree_sum, p))
    small_bm = markets.build_binary_tree(4, p[:4])
    orc = [emery.emery_distance_oracle(small_bm.price(n), small_bm.unit_jump()).value for n in range(1, 5)]
    b_ok = b_ok and all(abs(o - pn) <= 1e-12 for o, pn in zip(orc, p))

    # (c) the unit jump is an arbitrage once added
    clo = detect.na_closure_check(mkt, {"J": J})
    c_ok = (not clo.no_arbitrage) and clo.witness == "J"

    # (d) every martingale measure puts weight 1/2 on S^n = -1
    poly = detect.separating_polytope(mkt, None, 0.0, "equality")
    w = [detect.marginal_weights(poly.witness_star, mkt.payoffs[:, n], -1.0) for n in range(N)]
    d_ok = max(abs(x - 0.5) for x in w) <= 1e-9
    dt = time.perf_counter() - t0
    verdict("AC5 binary market", a_ok and b_ok and c_ok and d_ok, dt, 30.0,
            f"(a) {a_ok} (b) {b_ok} (c) {c_ok} witness={clo.witness} (d) {d_ok} "
            f"max|Q[S=-1]-1/2|={max(abs(x - 0.5) for x in w):.1e}")


def test_ac06_decomposition(verdict):
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(500):
        tree = random_tree(rng)
        X = random_process(rng, tree, scale=float(rng.uniform(0.3, 3.0)), start_zero=False)
        for C in (0.5, 1.0, 2.0):
            dec = truncation_decompose(X, C)
            recon = dec.B.values + dec.M.values + dec.X_check.values
            dB = jumps(dec.B)
            sib = dB[1:] - dec.drift[tree.parent[1:]]
            ok = (
                np.array_equal(recon - X.values, np.zeros(tree.n_nodes))
                or np.max(np.abs(recon - X.values)) <= 1e-12 * (1 + np.max(np.abs(X.values)))
            )
            ok = ok and (dec.martingale_residuals().max(initial=0.0) < 1e-12)
            ok = ok and np.all(np.abs(jumps(dec.M)) <= 2 * C + 1e-12)
            # siblings share the parent's drift: B is predictable
            ok = ok and np.all(np.abs(sib) <= 1e-12)
            bad += not ok
    dt = time.perf_counter() - t0
    verdict("AC6 decomposition", bad == 0, dt, 10.0, f"{bad} failures over 1500 (tree, C) cases")


def test_ac07_switching(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    bad = 0
    worst = math.inf
    for i in range(200):
        tree = random_tree(rng, min_depth=2)
        prices = {"A": random_process(rng, tree), "B": random_process(rng, tree, 2.0)}
        Xk, Xl = random_wealth(rng, prices), random_wealth(rng, prices)
        for alpha in (0.1, 0.5):
            try:
                _, out = switch(Xk, Xl, C=1.0, alpha=alpha)
            except AdmissibilityError:
                bad += 1
                continue
            low = float(out.process.values.min())
            worst = min(worst, low + 1 + alpha)
            bad += low < -(1 + alpha) - 1e-12
    dt = time.perf_counter() - t0
    verdict("AC7 switching", bad == 0, dt, 10.0, f"{bad} exceptions over 400 runs; min slack {worst:.3g}")


def test_ac08_drawdown_exploit(verdict):
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        tree = random_tree(rng, min_depth=2)
        lam = float(rng.uniform(1.5, 4.0))
        eps = float(rng.uniform(0.0, lam - 1.0 - 1e-3))
        t = int(rng.integers(1, tree.horizon))
        vals = rng.normal(0.0, 1.5, tree.n_nodes)
        vals[0] = 0.0
        forced = rng.choice(tree.nodes_at(t))
        vals[forced] = -(lam - eps) - rng.uniform(0.0, 1.0)
        vals[tree.atoms] = np.maximum(vals[tree.atoms], -1.0)
        Y = WealthProcess(AdaptedProcess(tree, vals))
        ex = drawdown_exploit(Y, t, eps, lam)
        term = ex.wealth.process.terminal
        on_D = np.isin(tree.atom_paths[:, t], ex.event_nodes)
        # independent payoff: 1_D (Y_1 - Y_t)
        ref = np.where(on_D, vals[tree.atoms] - vals[tree.atom_paths[:, t]], 0.0)
        ok = np.all(term >= -1e-12) and np.all(term[on_D] >= ex.delta - 1e-12)
        ok = ok and np.allclose(term, ref, atol=1e-12) and ex.delta == lam - eps - 1
        bad += not ok
    dt = time.perf_counter() - t0
    verdict("AC8 drawdown exploit", bad == 0, dt, 5.0, f"{bad} exceptions over 200 processes")


def _in_vertex_cone(V: np.ndarray, g: np.ndarray) -> bool:
    if V.size == 0:
        return bool(np.allclose(g, 0.0))
    return detect.cone_membership(V.T, g)


def test_ac09_bipolar(verdict):
    rng = np.random.default_rng(9)
    t0 = time.perf_counter()
    agree = total = polar_bad = 0
    for _ in range(20):
        m = int(rng.integers(2, 7))
        k = int(rng.integers(1, 4))
        p = rng.dirichlet(np.ones(m))
        F = rng.normal(0.0, 1.0, (m, k))
        C = detect.cone_generators(F)
        pts = [C @ rng.exponential(1.0, C.shape[1]) for _ in range(50)]
        pts += [rng.normal(0.0, 1.0, m) for _ in range(50)]
        rep = detect.bipolar_check(p, F, pts)
        agree += rep.agree
        total += rep.total

        V = detect.separating_vertices(p, F)
        probes = [rng.exponential(1.0, len(V)) @ V if len(V) else np.zeros(m) for _ in range(25)]
        probes += [np.abs(rng.normal(0.0, 1.0, m)) for _ in range(25)]
        for g in probes:
            polar_bad += detect.polar_cone_membership(p, F, g) != _in_vertex_cone(V, g)
    dt = time.perf_counter() - t0
    verdict("AC9 bipolar", agree == total and polar_bad == 0, dt, 30.0,
            f"bipolar agreement {agree}/{total}; polar-vs-vertex mismatches {polar_bad}")


def _random_market(rng: np.random.Generator) -> markets.OnePeriodMarket:
    m = int(rng.integers(2, 9))
    d = int(rng.integers(1, 4))
    pay = rng.normal(0.0, 1.0, (m, d))
    if rng.random() < 0.3:
        pay[:, 0] = np.abs(pay[:, 0])  # a column that is an outright arbitrage
    return markets.OnePeriodMarket(rng.dirichlet(np.ones(m)), pay, tuple(f"S{j + 1}" for j in range(d)))


def test_ac10_verdict_consistency(verdict):
    rng = np.random.default_rng(10)
    t0 = time.perf_counter()
    mkts = [markets.builtin_market("fair-coin"), markets.builtin_market("binary"),
            markets.builtin_market("counterexample")]
    mkts += [_random_market(rng) for _ in range(50)]
    bad = []
    for mk in mkts:
        rep = detect.naflvr_report(mk)
        legs = rep.na_small_ok and rep.na_closure.no_arbitrage and rep.nupbr.nupbr
        ok = rep.naflvr == legs
        if rep.naflvr:
            s = rep.separating
            ok = ok and s.delta_star > 0 and s.witness_star is not None and bool(np.all(s.witness_star > 0))
        bad += [] if ok else [mk.name]
    dt = time.perf_counter() - t0
    verdict("AC10 verdict consistency", not bad, dt, 60.0,
            f"{len(mkts) - len(bad)}/{len(mkts)} markets consistent")
