import numpy as np
import pytest

from largemarket import markets
from largemarket.portfolio import (
    AdmissibilityError,
    AssetUniverse,
    WealthProcess,
    admissibility_level,
    check_deflator,
    concatenate,
    convex_combine,
    drawdown_exploit,
    switch,
    truncation_decompose,
)
from largemarket.probspace import ScenarioTree
from largemarket.process import AdaptedProcess, PredictableStrategy

from conftest import random_process, random_tree, random_wealth


@pytest.fixture
def walk2():
    return ScenarioTree.from_branching([[0.5, 0.5], [0.5, 0.5]])


def wealth(tree, values):
    return WealthProcess(AdaptedProcess(tree, values))


# admissibility ---------------------------------------------------------------


def test_admissibility_level_examples(walk2):
    assert admissibility_level(AdaptedProcess.zeros(walk2)) == 0.0
    dip = AdaptedProcess(walk2, [0.0, 0.3, -0.4, 0.5, 0.1, -0.2, 0.0])
    assert admissibility_level(dip) == pytest.approx(0.4)


def test_admissibility_level_against_path_scan(rng):
    t = ScenarioTree([-1, 0, 0, 1, 1, 2], [0.2, 0.3, 0.5])
    X = random_process(rng, t)
    worst = min(X.values[v] for path in t.atom_paths for v in path)
    assert admissibility_level(X) == max(0.0, -worst)


def test_wealth_must_start_at_zero(walk2):
    with pytest.raises(ValueError, match="start at 0"):
        wealth(walk2, np.ones(7))
    w = wealth(walk2, [0.0, -1.0, 0.5, -1.0, -0.5, 0.0, 1.0])
    assert w.is_admissible(1.0) and not w.is_admissible(0.5)


def test_from_strategies_replays(rng):
    t = random_tree(rng, min_depth=2)
    prices = {"A": random_process(rng, t), "B": random_process(rng, t)}
    w = random_wealth(rng, prices)
    assert w.assets == frozenset({"A", "B"})
    assert w.replay(prices).allclose(w.process)
    with pytest.raises(ValueError):
        WealthProcess.from_strategies(prices, {})


def test_asset_universe():
    u = AssetUniverse([0.25, 0.5, 1.0])
    assert u.admits([0.5]) and not u.admits([2.0]) and not u.admits([])
    assert u.union([0.25], [1.0]) == frozenset({0.25, 1.0})
    assert len(list(u.subsets(2))) == 3
    with pytest.raises(ValueError):
        AssetUniverse(["a", "a"])


# concatenation ----------------------------------------------------------------


def test_concatenate_identity(rng, walk2):
    prices = {"A": random_process(rng, walk2)}
    X = random_wealth(rng, prices)
    Y = random_wealth(rng, prices)
    one = PredictableStrategy.constant(walk2, 1.0)
    zero = PredictableStrategy.constant(walk2, 0.0)
    Z = concatenate(one, X, zero, Y, prices)
    assert Z.process.allclose(X.process)


def test_concatenate_splice(walk2):
    # follow X over the first step and Y over the second
    X = wealth(walk2, [0.0, 0.5, -0.5, 1.0, 0.0, -1.0, 0.0])
    Y = wealth(walk2, [0.0, 0.2, 0.2, 0.6, -0.2, 0.4, 0.0])
    H = PredictableStrategy(walk2, [1.0, 0.0, 0.0, 0, 0, 0, 0])
    G = PredictableStrategy(walk2, [0.0, 1.0, 1.0, 0, 0, 0, 0])
    Z = concatenate(H, X, G, Y)
    assert np.allclose(Z.process.values, [0.0, 0.5, -0.5, 0.9, 0.1, -0.3, -0.7])


def test_concatenate_preconditions(walk2):
    X = wealth(walk2, np.zeros(7))
    one = PredictableStrategy.constant(walk2, 1.0)
    with pytest.raises(AdmissibilityError, match="HG = 0 violated"):
        concatenate(one, X, one, X)
    with pytest.raises(AdmissibilityError, match="H >= 0 violated"):
        concatenate(one * -1.0, X, PredictableStrategy.constant(walk2, 0.0), X)
    deep = wealth(walk2, [0.0, -0.9, 0.0, -1.5, 0.0, 0.0, 0.0])
    with pytest.raises(AdmissibilityError, match="Z < -1") as info:
        concatenate(one, deep, PredictableStrategy.constant(walk2, 0.0), X)
    assert info.value.node == 3


# truncation decomposition ----------------------------------------------------------


def walk(steps, up, down, p=0.5):
    t = ScenarioTree.from_branching([[p, 1 - p]] * steps)
    v = np.zeros(t.n_nodes)
    for node in range(1, t.n_nodes):
        first = t.children(int(t.parent[node]))[0] == node
        v[node] = v[t.parent[node]] + (up if first else down)
    return AdaptedProcess(t, v)


def test_symmetric_small_walk_is_its_own_martingale():
    X = walk(3, 0.5, -0.5)
    dec = truncation_decompose(X, 1.0)
    assert np.all(dec.B.values == 0) and np.all(dec.X_check.values == 0)
    assert dec.M.allclose(X)


def test_drifted_walk_compensator():
    X = walk(3, 1.5, -0.5)
    dec = truncation_decompose(X, 1.0)
    t = X.tree
    # every +1.5 jump is big; the -0.5 remainder has conditional mean -0.25
    assert np.allclose(dec.drift[t.internal], -0.25)
    assert np.allclose(dec.B.values, -0.25 * t.depth)
    big = np.diff(dec.X_check.paths(), axis=1)
    assert set(np.round(big.ravel(), 12)) == {0.0, 1.5}
    assert dec.martingale_residuals().max() < 1e-15


def test_deterministic_staircase_is_pure_drift():
    t = ScenarioTree([-1, 0, 1, 2], [1.0])
    X = AdaptedProcess(t, [0.0, 0.1, 0.2, 0.3])
    dec = truncation_decompose(X, 1.0)
    assert dec.B.allclose(X) and np.all(dec.M.values == 0) and np.all(dec.X_check.values == 0)


def test_threshold_must_be_positive(walk2):
    with pytest.raises(ValueError):
        truncation_decompose(AdaptedProcess.zeros(walk2), 0.0)


# switching ----------------------------------------------------------------------


@pytest.fixture
def switch_pair(walk2):
    Xk = wealth(walk2, [0.0, 0.2, -0.1, 0.3, 0.1, 0.0, -0.2])
    Xl = wealth(walk2, [0.0, 0.1, -0.1, 0.4, 0.0, 0.0, -0.2])
    return Xk, Xl


def test_switch_hand_trace(switch_pair):
    Xk, Xl = switch_pair
    plan, out = switch(Xk, Xl, C=1.0, alpha=0.1)
    # drifts: k has +0.05 at the root, l has +0.1 at node 1, node 2 is 0/0
    assert plan.gamma[[0, 1, 2]].tolist() == [True, False, True]
    assert np.allclose(plan.density_k[[0, 1, 2]], [1.0, 0.0, 0.0], atol=1e-12)
    assert plan.sigma.depths.tolist() == [2, 2, 2, 2]
    assert np.allclose(out.process.values, [0.0, 0.2, -0.1, 0.5, 0.1, 0.0, -0.2])


def test_switch_stops_on_underperformance(switch_pair):
    Xk, Xl = switch_pair
    plan, out = switch(Xk, Xl, C=1.0, alpha=0.01)
    # at node 2 the switched Y-part is -0.15 against max(-0.15, -0.1) - 0.01
    assert plan.sigma.depths.tolist() == [2, 2, 1, 1]
    assert np.allclose(out.process.values, [0.0, 0.2, -0.1, 0.5, 0.1, -0.1, -0.1])
    assert out.process.values.min() >= -1.01


def test_switch_identical_inputs(rng):
    t = random_tree(rng, min_depth=2)
    X = random_wealth(rng, {"A": random_process(rng, t)})
    plan, out = switch(X, X, C=0.5, alpha=0.2)
    assert np.all(plan.sigma.depths == t.horizon)
    assert out.process.allclose(X.process)


def test_switch_preconditions(switch_pair, walk2):
    Xk, Xl = switch_pair
    with pytest.raises(ValueError):
        switch(Xk, Xl, C=1.0, alpha=0.0)
    low = wealth(walk2, [0.0, -2.0, 0.0, -2.0, -2.0, 0.0, 0.0])
    with pytest.raises(AdmissibilityError, match="not 1-admissible"):
        switch(low, Xl, C=1.0, alpha=0.1)


# drawdown exploit -------------------------------------------------------------


def test_drawdown_hand_instance(walk2):
    # Y_1 = -1.8 on the lower branch, recovering to -1 and -0.5
    Y = wealth(walk2, [0.0, 0.5, -1.8, 0.2, 1.0, -1.0, -0.5])
    ex = drawdown_exploit(Y, 1, eps=0.3, lam=2.0)
    assert ex.delta == pytest.approx(0.7)
    assert ex.event_nodes.tolist() == [2] and ex.event_prob == 0.5
    assert np.allclose(ex.wealth.process.terminal, [0.0, 0.0, 0.8, 1.3])


def test_drawdown_deterministic_dip():
    t = ScenarioTree([-1, 0, 1], [1.0])
    lam = 2.5
    ex = drawdown_exploit(wealth(t, [0.0, -lam, -1.0]), 1, eps=0.1, lam=lam)
    assert ex.wealth.process.terminal.tolist() == [lam - 1.0]


def test_drawdown_errors(walk2):
    Y = wealth(walk2, [0.0, 0.5, -0.5, 0.2, 1.0, -1.0, -0.5])
    with pytest.raises(ValueError, match="empty D"):
        drawdown_exploit(Y, 1, eps=0.3, lam=2.0)
    with pytest.raises(ValueError, match="lam - eps > 1"):
        drawdown_exploit(Y, 1, eps=0.5, lam=1.4)
    bad = wealth(walk2, [0.0, -2.0, 0.0, -1.5, 0.0, 0.0, 0.0])
    with pytest.raises(AdmissibilityError):
        drawdown_exploit(bad, 1, eps=0.3, lam=2.0)


# deflators ------------------------------------------------------------------------


def test_unit_deflator_on_martingale():
    X = walk(3, 0.25, -0.25)
    D = AdaptedProcess(X.tree, np.ones(X.tree.n_nodes))
    assert check_deflator(D, [X]).passed


def test_unit_deflator_flags_drift():
    X = walk(2, 0.3, -0.1)
    D = AdaptedProcess(X.tree, np.ones(X.tree.n_nodes))
    rep = check_deflator(D, [X])
    assert not rep.passed
    assert sorted(v["node"] for v in rep.violations) == X.tree.internal.tolist()


def test_deflator_on_small_binary_market():
    fair = markets.build_binary_tree(3, [0.5, 0.5, 0.5])
    D = AdaptedProcess(fair.tree, np.ones(fair.tree.n_nodes))
    gens = [g.process for g in fair.generators()]
    assert check_deflator(D, gens).passed
    skew = markets.build_binary_tree(3, [0.5, 0.25, 0.125])
    rep = check_deflator(AdaptedProcess(skew.tree, np.ones(skew.tree.n_nodes)), [skew.price(2)])
    assert not rep.passed and rep.violations[0]["node"] == 0


def test_deflator_sign_checks(walk2):
    D = AdaptedProcess(walk2, [2.0, 1, 1, 1, 1, 1, -1])
    reasons = {v["reason"] for v in check_deflator(D, []).violations}
    assert reasons == {"D < 0", "D_0 > 1"}


# convex combinations -------------------------------------------------------------


def test_convex_combine(rng, walk2):
    X = random_process(rng, walk2)
    assert convex_combine([X], [1.0]).allclose(X)
    assert convex_combine([X, -X], [0.5, 0.5]).allclose(AdaptedProcess.zeros(walk2))
    Y = AdaptedProcess(walk2, np.arange(7.0))
    Z = AdaptedProcess(walk2, np.full(7, 4.0))
    assert convex_combine([Y, Z], [0.25, 0.75]).values.tolist() == [3.0, 3.25, 3.5, 3.75, 4.0, 4.25, 4.5]
    with pytest.raises(ValueError):
        convex_combine([Y, Z], [0.5, 0.6])
    with pytest.raises(ValueError):
        convex_combine([Y], [0.5, 0.5])
