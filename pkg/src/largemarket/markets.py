"""Built-in market families and one-period market loading.

* the binary large market: independent one-period assets with terminal
  values -1 / +1, P[S^n_1 = -1] = p_n;
* the singular counterexample on ([0,1], Lebesgue) with
  S^n_1 = -1/sqrt(w) on [0, eps_n) and (1 - w)^(-1/(n+1)) on [eps_n, 1],
  where eps_n makes E[S^n_1] = 1;
* generic finite one-period markets read from JSON.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Hashable, Sequence

import numpy as np
from scipy.optimize import brentq

from .probspace import ScenarioTree
from .process import AdaptedProcess, PredictableStrategy
from .portfolio import WealthProcess

BINARY_MAX_ASSETS = 20
BINARY_FULL_TREE_MAX = 12


# ---------------------------------------------------------------------------
# one-period markets


@dataclass(frozen=True, eq=False)
class OnePeriodMarket:
    """Finite one-period market: atom probabilities and per-asset terminal gains.

    ``payoffs[i, j]`` is S^j_1 - S^j_0 on atom ``i``.
    """

    probs: np.ndarray
    payoffs: np.ndarray
    assets: tuple = ()
    name: str = "market"
    atom_labels: tuple = ()

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float)
        g = np.array(self.payoffs, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        if g.shape[0] != p.shape[0]:
            raise ValueError(f"payoffs have {g.shape[0]} rows for {p.shape[0]} atoms")
        assets = tuple(self.assets) or tuple(f"S{j + 1}" for j in range(g.shape[1]))
        if len(assets) != g.shape[1]:
            raise ValueError(f"{len(assets)} asset labels for {g.shape[1]} payoff columns")
        p.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "payoffs", g)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "atom_labels", tuple(self.atom_labels) or tuple(range(len(p))))

    @property
    def n_atoms(self) -> int:
        return len(self.probs)

    @property
    def n_assets(self) -> int:
        return self.payoffs.shape[1]

    def columns(self, subset: Sequence[Hashable] | None) -> np.ndarray:
        if subset is None:
            return self.payoffs
        idx = [self.assets.index(a) for a in subset]
        return self.payoffs[:, idx]

    def restrict(self, subset: Sequence[Hashable]) -> "OnePeriodMarket":
        return OnePeriodMarket(self.probs, self.columns(subset), tuple(subset), self.name, self.atom_labels)

    def augment(self, payoffs: np.ndarray, labels: Sequence[Hashable]) -> "OnePeriodMarket":
        extra = np.asarray(payoffs, dtype=float).reshape(self.n_atoms, -1)
        return OnePeriodMarket(self.probs, np.hstack([self.payoffs, extra]),
                               self.assets + tuple(labels), self.name, self.atom_labels)

    def tree(self) -> ScenarioTree:
        return ScenarioTree.one_period(self.probs)

    def to_config(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "assets": [str(a) for a in self.assets],
            "atoms": [
                {"prob": float(self.probs[i]), "payoff": [float(x) for x in self.payoffs[i]]}
                for i in range(self.n_atoms)
            ],
        }


class MarketConfigError(ValueError):
    """Schema violation in a market config; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


def _num(x: Any, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise MarketConfigError(path, f"expected a finite number, got {x!r}")
    return float(x)


def load_market(config: "dict | str | Path") -> OnePeriodMarket:
    """Validate a market config (dict, JSON text or file path) into a market.

    Schema::

        {"name": str?, "assets": [str, ...],
         "atoms": [{"prob": float > 0, "payoff": [float per asset]}, ...]}

    or ``{"builtin": "fair-coin" | "binary" | "counterexample", ...}``.
    """
    if isinstance(config, Path) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        try:
            config = json.loads(Path(config).read_text())
        except OSError as exc:
            raise MarketConfigError("$", f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise MarketConfigError("$", f"invalid JSON: {exc}") from exc
    elif isinstance(config, str):
        config = json.loads(config)
    if not isinstance(config, dict):
        raise MarketConfigError("$", "config must be a JSON object")
    if "builtin" in config:
        return builtin_market(config["builtin"], **{k: v for k, v in config.items() if k != "builtin"})

    assets = config.get("assets")
    if not isinstance(assets, list) or not assets:
        raise MarketConfigError("$.assets", "expected a non-empty list of asset labels")
    if len(set(map(str, assets))) != len(assets):
        raise MarketConfigError("$.assets", "asset labels must be distinct")
    atoms = config.get("atoms")
    if not isinstance(atoms, list) or not atoms:
        raise MarketConfigError("$.atoms", "expected a non-empty list of atoms")
    probs, rows = [], []
    for i, atom in enumerate(atoms):
        where = f"$.atoms[{i}]"
        if not isinstance(atom, dict):
            raise MarketConfigError(where, "expected an object with prob and payoff")
        p = _num(atom.get("prob"), f"{where}.prob")
        if p <= 0:
            raise MarketConfigError(f"{where}.prob", f"atom probability must be > 0, got {p}")
        payoff = atom.get("payoff")
        if not isinstance(payoff, list) or len(payoff) != len(assets):
            raise MarketConfigError(f"{where}.payoff", f"expected {len(assets)} numbers")
        rows.append([_num(x, f"{where}.payoff[{j}]") for j, x in enumerate(payoff)])
        probs.append(p)
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-12:
        raise MarketConfigError("$.atoms[*].prob", f"probabilities sum to {total!r}, not 1")
    return OnePeriodMarket(np.array(probs), np.array(rows), tuple(map(str, assets)),
                           str(config.get("name", "market")))


def parse_p_sequence(spec: "str | Sequence[float]", n: int) -> np.ndarray:
    """``geometric:r`` gives p_k = r^k; a list is taken verbatim."""
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        if kind == "geometric":
            r = float(arg or 0.5)
            return r ** np.arange(1, n + 1, dtype=float)
        if kind == "constant":
            return np.full(n, float(arg))
        if kind == "harmonic":
            return 1.0 / (np.arange(1, n + 1) + 1.0)
        raise ValueError(f"unknown p spec {spec!r}")
    p = np.asarray(spec, dtype=float)
    if len(p) != n:
        raise ValueError(f"need {n} probabilities, got {len(p)}")
    return p


def builtin_market(name: str, **kw: Any) -> OnePeriodMarket:
    if name == "fair-coin":
        return OnePeriodMarket([0.5, 0.5], [[-1.0], [1.0]], ("S1",), "fair-coin")
    if name == "binary":
        n = int(kw.get("n", 3))
        return build_binary_tree(n, parse_p_sequence(kw.get("p", "geometric:0.5"), n)).one_period_market()
    if name == "counterexample":
        return CounterexampleMarket(int(kw.get("n", 5))).discretize(**kw.get("grid", {}))
    raise MarketConfigError("$.builtin", f"unknown built-in market {name!r}")


# ---------------------------------------------------------------------------
# binary large market


@dataclass(frozen=True, eq=False)
class BinaryLargeMarket:
    """N independent one-period assets with terminal values in {-1, +1}.

    Atoms enumerate sign vectors lexicographically, -1 before +1, asset 1
    most significant.  Above ``BINARY_FULL_TREE_MAX`` assets only the
    per-asset two-atom marginals are built.
    """

    N: int
    p: np.ndarray
    tree: ScenarioTree | None
    signs: np.ndarray | None
    marginal_trees: tuple[ScenarioTree, ...] = field(default=())

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"S{n + 1}" for n in range(self.N))

    def price(self, n: int) -> AdaptedProcess:
        """S^n (1-based) as a process on the product tree."""
        self._need_tree()
        return AdaptedProcess.from_terminal(self.tree, self.signs[:, n - 1])

    def prices(self) -> dict[str, AdaptedProcess]:
        return {lab: self.price(n + 1) for n, lab in enumerate(self.labels)}

    def generators(self) -> list[WealthProcess]:
        """Buy-and-hold of one unit of each asset."""
        self._need_tree()
        one = PredictableStrategy.constant(self.tree, 1.0, "buy-and-hold")
        return [WealthProcess(self.price(n + 1), frozenset([lab]), {lab: one})
                for n, lab in enumerate(self.labels)]

    def unit_jump(self) -> AdaptedProcess:
        """J: zero before the horizon and 1 at the end."""
        self._need_tree()
        return AdaptedProcess.from_terminal(self.tree, np.ones(self.tree.n_atoms))

    def one_period_market(self) -> OnePeriodMarket:
        self._need_tree()
        return OnePeriodMarket(self.tree.atom_probs, self.signs, self.labels, f"binary-{self.N}")

    def marginal_market(self, n: int) -> OnePeriodMarket:
        pn = float(self.p[n - 1])
        return OnePeriodMarket([pn, 1.0 - pn], [[-1.0], [1.0]], (self.labels[n - 1],), f"binary-marginal-{n}")

    def emery_to_unit_jump(self, n: int) -> float:
        """Closed form d(S^n, J) = E[|S^n_1 - 1| ^ 1] = p_n."""
        pn = float(self.p[n - 1])
        diff = np.array([-1.0, 1.0]) - 1.0
        return float(np.minimum(np.abs(diff), 1.0) @ np.array([pn, 1.0 - pn]))

    def _need_tree(self) -> None:
        if self.tree is None:
            raise ValueError(f"product tree not built for N = {self.N} > {BINARY_FULL_TREE_MAX}; use marginals")


class GuardExceeded(ValueError):
    pass


def build_binary_tree(N: int, p: Sequence[float]) -> BinaryLargeMarket:
    p = np.asarray(p, dtype=float)
    if N < 1 or N > BINARY_MAX_ASSETS:
        raise GuardExceeded(f"N = {N} outside 1..{BINARY_MAX_ASSETS}")
    if p.shape != (N,):
        raise ValueError(f"need {N} probabilities, got {p.shape}")
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("every p_n must lie in (0, 1)")
    p.setflags(write=False)
    marg = tuple(ScenarioTree.one_period([pn, 1.0 - pn]) for pn in p)
    if N > BINARY_FULL_TREE_MAX:
        return BinaryLargeMarket(N, p, None, None, marg)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=N)))
    probs = np.prod(np.where(signs < 0, p, 1.0 - p), axis=1)
    tree = ScenarioTree.one_period(probs)
    signs.setflags(write=False)
    return BinaryLargeMarket(N, p, tree, signs, marg)


# ---------------------------------------------------------------------------
# singular counterexample


def _rhs(n: int, x: float) -> float:
    """(n+1)/n (1 - x)^(n/(n+1))."""
    return (n + 1) / n * math.exp(n / (n + 1) * math.log1p(-x))


def epsilon_residual(n: int, eps: float) -> float:
    """1 + 2 sqrt(eps) - (n+1)/n (1 - eps)^(n/(n+1)); zero exactly when E[S^n_1] = 1."""
    return 1.0 + 2.0 * math.sqrt(eps) - _rhs(n, eps)


def solve_epsilon(n: int, tol: float = 1e-12) -> float:
    """Unique root in (0, 1) of the mean-one condition, by bisection.

    The residual is increasing in eps (LHS increasing, RHS decreasing),
    negative at 0 and positive at 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        r = epsilon_residual(n, mid)
        if r == 0.0:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17 and abs(r) < tol:
            break
    return min((lo, hi), key=lambda x: abs(epsilon_residual(n, x)))


def exact_mean(n: int, eps: float) -> float:
    """E[S^n_1] from the antiderivatives 2 sqrt(w) and -(n+1)/n (1-w)^(n/(n+1))."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    return -2.0 * math.sqrt(eps) + _rhs(n, eps)


def asset_integral(n: int, eps: float, a: float, b: float) -> float:
    """Exact integral of S^n_1 over [a, b] subset of [0, 1]."""
    total = 0.0
    lo, hi = a, min(b, eps)
    if hi > lo:
        total -= 2.0 * (math.sqrt(hi) - math.sqrt(lo))
    lo, hi = max(a, eps), b
    if hi > lo:
        e = n / (n + 1)
        total += (n + 1) / n * (math.exp(e * math.log1p(-lo)) - (math.exp(e * math.log1p(-hi)) if hi < 1 else 0.0))
    return total


@dataclass(frozen=True)
class CoefficientVector:
    c: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "c", tuple(float(x) for x in self.c))

    @property
    def g_plus(self) -> tuple[int, ...]:
        return tuple(k + 1 for k, x in enumerate(self.c) if x > 0)

    @property
    def g_minus(self) -> tuple[int, ...]:
        return tuple(k + 1 for k, x in enumerate(self.c) if x < 0)

    @property
    def alpha(self) -> float:
        """sum over G+ of c_k minus sum over G- of |c_k| (correctly rounded)."""
        return math.fsum([x for x in self.c if x > 0] + [x for x in self.c if x < 0])


@dataclass
class PayoffReport:
    alpha: float
    verdict: str
    infimum: float
    cells: list[tuple[float, float]]
    cell_infima: list[float]
    evaluate: Callable[[np.ndarray], np.ndarray]

    @property
    def bounded_below(self) -> bool:
        return math.isfinite(self.infimum)


class CounterexampleMarket:
    """The singular one-period market on ([0,1], Lebesgue) with N assets."""

    def __init__(self, N: int, tol: float = 1e-12) -> None:
        if N < 1:
            raise ValueError("N must be >= 1")
        self.N = N
        self.eps = tuple(solve_epsilon(n, tol) for n in range(1, N + 1))
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ArithmeticError("eps_n not strictly decreasing; solver tolerance too loose")

    def payoff(self, n: int, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        e = self.eps[n - 1]
        with np.errstate(divide="ignore"):
            return np.where(w < e, -1.0 / np.sqrt(w), np.power(1.0 - w, -1.0 / (n + 1)))

    def cells(self, n: int | None = None) -> list[tuple[float, float]]:
        """[0, eps_n), [eps_n, eps_{n-1}), ..., [eps_1, 1]."""
        n = self.N if n is None else n
        pts = [0.0] + list(self.eps[:n][::-1]) + [1.0]
        return list(zip(pts, pts[1:]))

    def mean(self, n: int) -> float:
        return exact_mean(n, self.eps[n - 1])

    def portfolio_payoff(self, c: "CoefficientVector | Sequence[float]") -> PayoffReport:
        cv = c if isinstance(c, CoefficientVector) else CoefficientVector(tuple(c))
        n = len(cv.c)
        if n > self.N:
            raise ValueError(f"{n} coefficients for a market with {self.N} assets")
        coef = np.array(cv.c)

        def evaluate(w: np.ndarray) -> np.ndarray:
            w = np.asarray(w, dtype=float)
            out = np.zeros_like(w)
            for k in range(1, n + 1):
                if coef[k - 1] != 0.0:
                    out = out + coef[k - 1] * self.payoff(k, w)
            return out

        cells = self.cells(n)
        infima = [_cell_infimum(coef, n - j, a, b) for j, (a, b) in enumerate(cells)]
        alpha = cv.alpha
        inf = min(infima)
        if alpha > 0:
            verdict = "unbounded below"
        elif math.isfinite(inf):
            verdict = "bounded below"
        else:
            verdict = "unbounded below as w -> 1"
        return PayoffReport(alpha, verdict, inf, cells, infima, evaluate)

    def expected_payoff(self, c: "CoefficientVector | Sequence[float]") -> float:
        """E_Lebesgue[sum c_k S^k_1], assembled from the exact per-asset means."""
        cv = c if isinstance(c, CoefficientVector) else CoefficientVector(tuple(c))
        if len(cv.c) > self.N:
            raise ValueError(f"{len(cv.c)} coefficients for a market with {self.N} assets")
        return math.fsum(ck * self.mean(k + 1) for k, ck in enumerate(cv.c))

    def grid(self, n: int | None = None, levels: int = 40, ratio: float = 0.5) -> np.ndarray:
        """Breakpoints: every eps_k plus geometric refinement towards 0 and towards 1."""
        n = self.N if n is None else n
        geo = ratio ** np.arange(1, levels + 1)
        pts = np.concatenate([[0.0, 1.0], self.eps[:n], geo * self.eps[n - 1], 1.0 - geo * (1.0 - self.eps[0])])
        pts = np.unique(pts)
        return pts[(pts >= 0.0) & (pts <= 1.0)]

    def discretize(self, n: int | None = None, levels: int = 40, ratio: float = 0.5) -> OnePeriodMarket:
        """Cell-average approximation: atoms are grid cells with Lebesgue mass.

        Cell averages come from exact integrals, so every asset keeps mean 1
        under the cell masses.
        """
        n = self.N if n is None else n
        pts = self.grid(n, levels, ratio)
        a, b = pts[:-1], pts[1:]
        mass = b - a
        pay = np.array([[asset_integral(k, self.eps[k - 1], lo, hi) / (hi - lo) for k in range(1, n + 1)]
                        for lo, hi in zip(a, b)])
        return OnePeriodMarket(mass, pay, tuple(f"S{k}" for k in range(1, n + 1)),
                               f"counterexample-{n}", tuple(zip(a.tolist(), b.tolist())))


def _cell_infimum(coef: np.ndarray, j: int, a: float, b: float) -> float:
    """inf over [a, b) of -a_j / sqrt(w) + sum_{k > j} c_k (1 - w)^(-1/(k+1)).

    Assets 1..j are on their singular branch inside the cell.  Endpoint
    limits are taken analytically; interior minima are located as roots of
    the derivative.
    """
    n = len(coef)
    a_j = math.fsum(coef[:j])
    reg = [(coef[k - 1], 1.0 / (k + 1)) for k in range(j + 1, n + 1) if coef[k - 1] != 0.0]

    # works on floats and arrays alike
    def f(w):
        s = -a_j / np.sqrt(w) if a_j != 0.0 else 0.0 * w
        for ck, beta in reg:
            s = s + ck * (1.0 - w) ** (-beta)
        return s

    def df(w):
        s = 0.5 * a_j * w ** -1.5 if a_j != 0.0 else 0.0 * w
        for ck, beta in reg:
            s = s + ck * beta * (1.0 - w) ** (-beta - 1.0)
        return s

    cands = []
    # left end
    if a == 0.0:
        cands.append(-math.inf if a_j > 0 else (math.inf if a_j < 0 else sum(ck for ck, _ in reg)))
    else:
        cands.append(float(f(a)))
    # right end (open unless it is 1)
    if b == 1.0:
        if reg:
            lead = min(reg, key=lambda r: -r[1])  # largest exponent dominates
            cands.append(-math.inf if lead[0] < 0 else math.inf)
        else:
            cands.append(-a_j)
    else:
        cands.append(float(f(b)))
    lo = a if a > 0 else b * 1e-12
    hi = b if b < 1 else 1.0 - (1.0 - a) * 1e-15
    if hi > lo:
        ws = np.unique(np.concatenate([np.geomspace(lo, hi, 400), np.linspace(lo, hi, 400)]))
        ds = df(ws)
        for i in np.flatnonzero(np.sign(ds[:-1]) * np.sign(ds[1:]) < 0):
            root = brentq(df, ws[i], ws[i + 1], xtol=1e-15)
            cands.append(float(f(root)))
        cands.append(float(np.min(f(ws))))
    return float(min(cands))

