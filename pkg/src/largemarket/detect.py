"""No-arbitrage detectors for finite one-period markets.

Everything is a linear program over the atoms.  On a finite space the norm
and weak-* closures of the cones involved coincide, so (NAFL) and (NAFLVR)
are checked by the same finite-dimensional duality.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.optimize import linprog

from .emery import LimitReport
from .markets import CounterexampleMarket, OnePeriodMarket
from .process import AdaptedProcess
from .portfolio import WealthProcess

ARB_TOL = 1e-9
FEAS_TOL = 1e-9
NUPBR_EXACT_MAX_ATOMS = 12
POLAR_MAX_ATOMS = 12


class LPError(RuntimeError):
    """The LP solver returned something other than optimal/infeasible/unbounded."""


def _solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status not in (0, 2, 3):
        raise LPError(f"linprog status {res.status}: {res.message}")
    return res


# ---------------------------------------------------------------------------
# NA


@dataclass
class ArbitrageCertificate:
    theta: dict
    payoff: np.ndarray
    min_payoff: float
    prob_gain: float


@dataclass
class NAResult:
    no_arbitrage: bool
    subset: tuple
    lp_value: float
    density: np.ndarray | None = None
    floor: float | None = None
    certificate: ArbitrageCertificate | None = None


def _certificate(market: OnePeriodMarket, labels: Sequence[Hashable], G: np.ndarray, theta: np.ndarray) -> ArbitrageCertificate:
    pay = G @ theta
    gain = pay > ARB_TOL
    return ArbitrageCertificate(dict(zip(labels, theta.tolist())), pay, float(pay.min()),
                                float(market.probs[gain].sum()))


def na_check(market: OnePeriodMarket, subset: Sequence[Hashable] | None = None) -> NAResult:
    """Maximise E[theta . S_1] over |theta| <= 1 subject to a nonnegative payoff.

    Zero optimum means no arbitrage; the returned density is then an
    equivalent martingale measure (maximal equivalence floor).  A positive
    optimum yields a certificate.
    """
    labels = tuple(market.assets if subset is None else subset)
    G = market.columns(labels)
    m, d = G.shape
    res = _solve(-(market.probs @ G), A_ub=-G, b_ub=np.zeros(m), bounds=[(-1.0, 1.0)] * d)
    if res.status != 0:
        raise LPError(f"arbitrage LP unexpectedly {res.message}")
    value = -float(res.fun)
    if value > ARB_TOL:
        return NAResult(False, labels, value, certificate=_certificate(market, labels, G, res.x))
    poly = separating_polytope(market.probs, G, 0.0, "equality")
    return NAResult(True, labels, value, poly.witness_star, poly.delta_star)


def na_small_scan(market: OnePeriodMarket, subsets: Sequence[Sequence[Hashable]] | None = None) -> dict:
    """NA for every listed subset (default: each prefix S1..Sn).

    An arbitrage on a subset is one on any superset, so passing on the full
    asset set certifies every subset; listed subsets are still solved.
    """
    if subsets is None:
        subsets = [market.assets[:n] for n in range(1, market.n_assets + 1)]
    out = {tuple(s): na_check(market, s) for s in subsets}
    full = tuple(market.assets)
    if full not in out:
        out[full] = na_check(market)
    return out


@dataclass
class ClosureReport:
    no_arbitrage: bool
    small: NAResult
    augmented: NAResult
    witness: str | None
    residuals: dict


def _candidate_payoff(market: OnePeriodMarket, cand) -> np.ndarray:
    if isinstance(cand, LimitReport):
        cand = cand.candidate
    if isinstance(cand, WealthProcess):
        cand = cand.process
    if isinstance(cand, AdaptedProcess):
        return cand.terminal - cand.values[0]
    arr = np.asarray(cand, dtype=float)
    if arr.shape != (market.n_atoms,):
        raise ValueError(f"candidate needs {market.n_atoms} terminal values")
    return arr


def _augmented(market: OnePeriodMarket, candidates: "dict | Sequence | None") -> OnePeriodMarket:
    if not candidates:
        return market
    if not isinstance(candidates, dict):
        candidates = {f"limit{i}": c for i, c in enumerate(candidates)}
    cols = [_candidate_payoff(market, c) for c in candidates.values()]
    return market.augment(np.column_stack(cols), list(candidates))


def na_closure_check(market: OnePeriodMarket, candidates: "dict | Sequence | None" = None) -> ClosureReport:
    """NA after adding Emery-limit candidates as extra tradeable payoffs."""
    if candidates is None:
        candidates = {}
    if not isinstance(candidates, dict):
        candidates = {f"limit{i}": c for i, c in enumerate(candidates)}
    small = na_check(market)
    if not candidates:
        return ClosureReport(small.no_arbitrage, small, small, None, {})
    residuals = {name: c.final_residual for name, c in candidates.items() if isinstance(c, LimitReport)}
    res = na_check(_augmented(market, candidates))
    witness = None
    if not res.no_arbitrage:
        used = [lab for lab in candidates if abs(res.certificate.theta[lab]) > ARB_TOL]
        witness = ",".join(used) if used else None
    return ClosureReport(res.no_arbitrage, small, res, witness, residuals)


# ---------------------------------------------------------------------------
# NUPBR


@dataclass
class NUPBRProfile:
    c_list: list[float]
    profile: list[float]
    exact: bool
    payoff_bound: float
    aa1_witness: dict | None = None

    @property
    def nupbr(self) -> bool:
        return math.isfinite(self.payoff_bound)


def _max_payoff(G: np.ndarray) -> float:
    """sup over 1-admissible theta of the largest terminal payoff (inf if unbounded)."""
    m, d = G.shape
    best = 0.0
    for i in range(m):
        res = _solve(-G[i], A_ub=-G, b_ub=np.ones(m), bounds=[(None, None)] * d)
        if res.status == 3:
            return math.inf
        best = max(best, -float(res.fun))
    return best


def _reachable(G: np.ndarray, atoms: list[int], c: float) -> bool:
    """Is there theta with payoff >= -1 everywhere and >= c on ``atoms``?"""
    m, d = G.shape
    b = np.ones(m)
    b[atoms] = -c
    res = _solve(np.zeros(d), A_ub=-G, b_ub=b, bounds=[(None, None)] * d)
    return res.status == 0


def _exact_max_prob(G: np.ndarray, p: np.ndarray, c: float) -> float:
    """Branch and bound over atom sets; feasibility is closed under subsets."""
    single = [i for i in range(len(p)) if _reachable(G, [i], c)]
    order = sorted(single, key=lambda i: -p[i])
    best = [0.0]

    def dfs(k: int, chosen: list[int], mass: float) -> None:
        if mass > best[0]:
            best[0] = mass
        if k == len(order):
            return
        if mass + sum(p[i] for i in order[k:]) <= best[0] + 1e-15:
            return
        i = order[k]
        if _reachable(G, chosen + [i], c):
            dfs(k + 1, chosen + [i], mass + p[i])
        dfs(k + 1, chosen, mass)

    dfs(0, [], 0.0)
    return best[0]


def _heuristic_max_prob(G: np.ndarray, p: np.ndarray, c: float) -> float:
    """LP relaxation of the indicator, then the true probability at its theta."""
    m, d = G.shape
    # variables theta (d), z (m); max p.z, (c+1) z_i <= (G theta)_i + 1, 0 <= z <= 1
    A = np.hstack([-G, (c + 1.0) * np.eye(m)])
    A = np.vstack([A, np.hstack([-G, np.zeros((m, m))])])
    b = np.concatenate([np.ones(m), np.ones(m)])
    res = _solve(np.concatenate([np.zeros(d), -p]), A_ub=A, b_ub=b,
                 bounds=[(None, None)] * d + [(0.0, 1.0)] * m)
    if res.status != 0:
        return 0.0
    pay = G @ res.x[:d]
    return float(p[pay >= c - FEAS_TOL].sum())


def nupbr_scan(
    market: OnePeriodMarket,
    c_list: Sequence[float],
    subset: Sequence[Hashable] | None = None,
    exact_max_atoms: int = NUPBR_EXACT_MAX_ATOMS,
) -> NUPBRProfile:
    """Profile c -> max P[X_1 >= c] over 1-admissible portfolios.

    Exact by branch and bound up to ``exact_max_atoms`` atoms, an LP
    relaxation (labelled non-exact) beyond.
    """
    c_list = [float(c) for c in c_list]
    if any(b < a for a, b in zip(c_list, c_list[1:])):
        raise ValueError("c_list must be increasing")
    G = market.columns(subset)
    p = market.probs
    exact = market.n_atoms <= exact_max_atoms
    bound = _max_payoff(G)
    prof = []
    for c in c_list:
        if c > bound:
            prof.append(0.0)
        elif exact:
            prof.append(float(_exact_max_prob(G, p, c)))
        else:
            prof.append(float(_heuristic_max_prob(G, p, c)))
    for i in range(1, len(prof)):
        prof[i] = min(prof[i], prof[i - 1]) if exact else prof[i]
    witness = None
    if not math.isfinite(bound):
        na = na_check(market, subset)
        if na.certificate is not None:
            cert = na.certificate
            pos = cert.payoff[cert.payoff > ARB_TOL]
            g = float(pos.min())
            witness = {
                "theta": cert.theta,
                "alpha": cert.prob_gain,
                "sequence": [{"eps": 1.0 / (k + 1), "c": float(c), "scale": float(c) / g}
                             for k, c in enumerate(c_list)],
            }
    return NUPBRProfile(c_list, prof, exact, bound, witness)


# ---------------------------------------------------------------------------
# separating measures


@dataclass
class MeasurePolytope:
    n_atoms: int
    mode: str
    floor: float
    feasible: bool
    witness: np.ndarray | None
    delta_star: float
    witness_star: np.ndarray | None
    two_sided: bool = False
    note: str = ""

    def satisfies(self, q: np.ndarray, probs: np.ndarray, G: np.ndarray, floor: float, tol: float = FEAS_TOL) -> bool:
        ok = np.all(q >= floor * probs - tol) and abs(q.sum() - 1.0) <= tol
        e = q @ G
        ok = ok and (np.all(np.abs(e) <= tol) if self.mode == "equality" else np.all(e <= tol))
        if self.two_sided and floor > 0:
            ok = ok and np.all(q <= probs / floor + tol)
        return bool(ok)


def _floor_lp(p: np.ndarray, G: np.ndarray, mode: str, fixed: float | None, two_sided: bool,
              coords: str) -> tuple[np.ndarray, float] | None:
    """Max t (or feasibility at t = fixed) of {q >= t p, sum q = 1, E_q[G] <= 0 or = 0}.

    The floor is built in by writing q = t p + s r with r >= 0, so it never
    depends on solver tolerances.  ``coords`` picks the scale s: "density"
    uses s = p, "measure" uses s_i = 1 / max(1, |G_i|).  HiGHS drops
    coefficients below about 1e-9, so neither choice is safe on every
    market; see _floor_solve.
    """
    m, k = G.shape
    s = p.copy() if coords == "density" else 1.0 / np.maximum(1.0, np.abs(G).max(axis=1))
    gen = np.hstack([(s[:, None] * G).T, (p @ G)[:, None]])
    norm = np.abs(gen).max(axis=1)
    gen = gen / np.where(norm > 0, norm, 1.0)[:, None]
    A_eq = [np.concatenate([s, [math.fsum(p)]])[None, :]]
    b_eq = [np.ones(1)]
    A_ub, b_ub = [], []
    if mode == "equality":
        A_eq.append(gen)
        b_eq.append(np.zeros(k))
    else:
        A_ub.append(gen)
        b_ub.append(np.zeros(k))
    r_hi = [None] * m
    if two_sided:
        # q <= p / t is not linear in (q, t): the band is only solved at a fixed floor
        if fixed is None:
            raise ValueError("two-sided band needs a fixed floor")
        if fixed > 0:
            r_hi = (p * (1.0 / fixed - fixed) / s).tolist()
    c = np.zeros(m + 1)
    if fixed is None:
        bounds = [(0.0, hi) for hi in r_hi] + [(0.0, 1.0)]
        c[-1] = -1.0
    else:
        bounds = [(0.0, hi) for hi in r_hi] + [(fixed, fixed)]
    res = _solve(c, A_ub=np.vstack(A_ub) if A_ub else None, b_ub=np.concatenate(b_ub) if b_ub else None,
                 A_eq=np.vstack(A_eq), b_eq=np.concatenate(b_eq), bounds=bounds)
    if res.status != 0:
        return None
    t = float(res.x[-1])
    return t * p + s * res.x[:-1], t


def _meets(G: np.ndarray, q: np.ndarray, mode: str) -> bool:
    e = q @ G
    slack = FEAS_TOL * (1.0 + np.abs(G).T @ q)
    return bool(np.all(np.abs(e) <= slack) if mode == "equality" else np.all(e <= slack))


def _polish(p: np.ndarray, G: np.ndarray, q: np.ndarray, t: float, mode: str) -> np.ndarray:
    """Cancel a small generator residual using only mass above the floor.

    The correction is the minimum-norm step in slack-weighted coordinates,
    so atoms sitting on the floor do not move.
    """
    e = q @ G
    rows = np.arange(G.shape[1]) if mode == "equality" else np.flatnonzero(e > 0)
    slack = np.maximum(q - t * p, 0.0)
    A = np.vstack([G[:, rows].T, np.ones(len(q))]) * np.sqrt(slack)
    r = np.concatenate([-e[rows], [0.0]])
    u = np.linalg.lstsq(A, r, rcond=None)[0]
    out = q + np.sqrt(slack) * u
    return out if np.all(out >= t * p * (1.0 - FEAS_TOL)) else q


def _certify(p: np.ndarray, G: np.ndarray, q: np.ndarray, t: float, mode: str,
             two_sided: bool) -> tuple[np.ndarray, float] | None:
    """Lift q onto the floor t p, renormalise and re-check every constraint.

    Returns the repaired witness and the floor it actually attains, which
    may sit slightly below the LP optimum.
    """
    q = np.maximum(q, t * p)
    q = q / math.fsum(q)
    # solver tolerances can leave a small residual; back the floor off until it polishes away
    for eta in (0.0, 1e-9, 1e-7, 1e-5, 1e-3):
        if _meets(G, q, mode):
            break
        t = t * (1.0 - eta)
        q = _polish(p, G, q, t, mode)
    ok = _meets(G, q, mode) and np.all(q >= 0)
    if two_sided and t > 0:
        ok = ok and np.all(q <= p / t * (1.0 + FEAS_TOL))
    if not ok:
        return None
    return q, min(t, float(np.min(q / p)))


def _floor_solve(p: np.ndarray, G: np.ndarray, mode: str, fixed: float | None,
                 two_sided: bool) -> tuple[np.ndarray, float] | None:
    """Best certified (witness, floor) over both LP coordinate systems."""
    best = None
    for coords in ("measure", "density"):
        sol = _floor_lp(p, G, mode, fixed, two_sided, coords)
        if sol is None:
            continue
        cert = _certify(p, G, sol[0], sol[1], mode, two_sided)
        if cert is not None and (best is None or cert[1] > best[1]):
            best = cert
        if best is not None and fixed is not None:
            break
    return best


def floor_feasible(p, G, delta: float, mode: str = "equality", two_sided: bool = False) -> np.ndarray | None:
    p = np.asarray(p, float)
    sol = _floor_solve(p, np.asarray(G, float).reshape(len(p), -1), mode, delta, two_sided)
    if sol is None or sol[1] < delta - FEAS_TOL:
        return None
    return sol[0]


def floor_bisect(p, G, mode: str = "equality", tol: float = 1e-9, two_sided: bool = False) -> float:
    """sup of feasible floors by bisection on the feasibility LP."""
    lo, hi = 0.0, 1.0
    if floor_feasible(p, G, 0.0, mode, two_sided) is None:
        return -math.inf
    if floor_feasible(p, G, 1.0, mode, two_sided) is not None:
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if floor_feasible(p, G, mid, mode, two_sided) is not None:
            lo = mid
        else:
            hi = mid
    return lo


def separating_polytope(
    market: "OnePeriodMarket | np.ndarray",
    generators: np.ndarray | None = None,
    floor: float = 0.0,
    mode: str = "inequality",
    two_sided: bool = False,
    bisect_tol: float = 1e-9,
) -> MeasurePolytope:
    """{q >= floor * p, sum q = 1, E_q[gen] <= 0 (or = 0)} and its largest floor.

    With ``two_sided`` the band ``floor * p <= q <= p / floor`` is imposed
    instead, and the largest floor is found by bisection.
    """
    if mode not in ("inequality", "equality"):
        raise ValueError(f"mode must be inequality or equality, got {mode!r}")
    if isinstance(market, OnePeriodMarket):
        p = market.probs
        G = market.payoffs if generators is None else np.asarray(generators, float)
    else:
        p = np.asarray(market, dtype=float)
        G = np.asarray(generators, dtype=float)
    G = G.reshape(len(p), -1)
    if G.shape[1] == 0:
        raise ValueError("empty generator list")
    q = floor_feasible(p, G, floor, mode, two_sided)
    if two_sided:
        ds = floor_bisect(p, G, mode, bisect_tol, True)
        qs = floor_feasible(p, G, ds, mode, True) if ds > 0 else None
    else:
        sol = _floor_solve(p, G, mode, None, False)
        ds, qs = (min(sol[1], 1.0), sol[0]) if sol is not None else (-math.inf, None)
    return MeasurePolytope(len(p), mode, float(floor), q is not None, q, ds, qs, two_sided)


def marginal_weights(q: np.ndarray, payoff_column: np.ndarray, value: float) -> float:
    """Q[S_1 = value] for a witness q."""
    return float(q[np.isclose(payoff_column, value)].sum())


# ---------------------------------------------------------------------------
# polar / bipolar


def _guard_atoms(m: int) -> None:
    if m > POLAR_MAX_ATOMS:
        raise ValueError(f"polar computations limited to {POLAR_MAX_ATOMS} atoms, got {m}")


def cone_generators(generators: np.ndarray, include_negative_orthant: bool = True) -> np.ndarray:
    """Columns generating C: the given payoffs plus -e_i for every atom."""
    F = np.asarray(generators, dtype=float)
    F = F.reshape(F.shape[0], -1)
    if include_negative_orthant:
        F = np.hstack([F, -np.eye(F.shape[0])])
    return F


def polar_cone_membership(probs, generators, g, include_negative_orthant: bool = True, tol: float = FEAS_TOL) -> bool:
    """g in C° iff E[f g] <= 0 for every generator f."""
    p = np.asarray(probs, dtype=float)
    _guard_atoms(len(p))
    F = cone_generators(generators, include_negative_orthant)
    return bool(np.all((p * np.asarray(g, float)) @ F <= tol))


def cone_membership(F: np.ndarray, x: np.ndarray) -> bool:
    """x in the closed convex cone spanned by the columns of F (LP feasibility)."""
    res = _solve(np.zeros(F.shape[1]), A_eq=F, b_eq=np.asarray(x, float), bounds=[(0.0, None)] * F.shape[1])
    return res.status == 0


def bipolar_membership(probs, F: np.ndarray, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
    """x in C°° iff max{E[x g] : g in C°, |g| <= 1} is zero."""
    p = np.asarray(probs, dtype=float)
    A = (p[:, None] * F).T
    res = _solve(-(p * x), A_ub=A, b_ub=np.zeros(F.shape[1]), bounds=[(-1.0, 1.0)] * len(p))
    return -float(res.fun) <= tol


@dataclass
class BipolarReport:
    agree: int
    total: int
    in_cone: list[bool]
    in_bipolar: list[bool]

    @property
    def agreement(self) -> float:
        return self.agree / self.total if self.total else 1.0


def bipolar_check(probs, generators, test_points, include_negative_orthant: bool = True) -> BipolarReport:
    p = np.asarray(probs, dtype=float)
    _guard_atoms(len(p))
    F = cone_generators(generators, include_negative_orthant)
    a = [cone_membership(F, x) for x in test_points]
    b = [bipolar_membership(p, F, np.asarray(x, float)) for x in test_points]
    return BipolarReport(sum(x == y for x, y in zip(a, b)), len(a), a, b)


def separating_vertices(probs, generators, tol: float = 1e-10) -> np.ndarray:
    """Vertices of {g >= 0, E[g] = 1, E[f g] <= 0} in density coordinates."""
    p = np.asarray(probs, dtype=float)
    m = len(p)
    _guard_atoms(m)
    F = np.asarray(generators, dtype=float).reshape(m, -1)
    ineq = np.vstack([-np.eye(m), (p[:, None] * F).T])  # rows a with a.g <= 0
    verts: list[np.ndarray] = []
    for rows in itertools.combinations(range(ineq.shape[0]), m - 1):
        A = np.vstack([ineq[list(rows)], p[None, :]])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        g = np.linalg.solve(A, np.concatenate([np.zeros(m - 1), [1.0]]))
        if np.all(ineq @ g <= tol) and not any(np.allclose(g, v, atol=1e-9) for v in verts):
            verts.append(g)
    return np.array(verts).reshape(-1, m)


# ---------------------------------------------------------------------------
# aggregate report


@dataclass
class NoArbitrageReport:
    market: str
    na_small: dict
    na_closure: ClosureReport
    nupbr: NUPBRProfile
    separating: MeasurePolytope
    reasons: list[str] = field(default_factory=list)

    @property
    def na_small_ok(self) -> bool:
        return all(r.no_arbitrage for r in self.na_small.values())

    @property
    def na(self) -> bool:
        return self.na_small_ok and self.na_closure.no_arbitrage

    @property
    def naflvr(self) -> bool:
        return self.na and self.nupbr.nupbr

    def to_dict(self) -> dict:
        return {
            "market": self.market,
            "na_small": {"/".join(map(str, k)): v.no_arbitrage for k, v in self.na_small.items()},
            "na_closure": self.na_closure.no_arbitrage,
            "closure_witness": self.na_closure.witness,
            "closure_residuals": self.na_closure.residuals,
            "nupbr": self.nupbr.nupbr,
            "nupbr_profile": dict(zip(map(str, self.nupbr.c_list), self.nupbr.profile)),
            "nupbr_exact": self.nupbr.exact,
            "payoff_bound": self.nupbr.payoff_bound if self.nupbr.nupbr else "inf",
            "naflvr": self.naflvr,
            "delta_star": self.separating.delta_star,
            "separating_density": None if self.separating.witness_star is None
            else self.separating.witness_star.tolist(),
            "reasons": self.reasons,
        }


def naflvr_report(
    market: OnePeriodMarket,
    limit_candidates: "dict | Sequence | None" = None,
    c_list: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0),
    subsets: Sequence[Sequence[Hashable]] | None = None,
) -> NoArbitrageReport:
    small = na_small_scan(market, subsets)
    closure = na_closure_check(market, limit_candidates)
    prof = nupbr_scan(market, c_list)
    sep = separating_polytope(_augmented(market, limit_candidates), None, 0.0, "equality")
    report = NoArbitrageReport(market.name, small, closure, prof, sep)

    r = report.reasons
    for k, v in small.items():
        if not v.no_arbitrage:
            r.append(f"NA-small fails on {'/'.join(map(str, k))}: theta={v.certificate.theta}")
    if small and report.na_small_ok:
        r.append("NA-small holds on every checked subset (hence on all subsets of the full set)")
    if limit_candidates:
        if closure.no_arbitrage:
            r.append("NA-in-closure holds with the supplied limit candidates")
        else:
            r.append(f"NA-in-closure fails; witness limit {closure.witness}")
    r.append("NUPBR holds: 1-admissible payoffs bounded by %.6g" % prof.payoff_bound if prof.nupbr
             else "NUPBR fails: 1-admissible payoffs unbounded (AA1 witness attached)")
    if report.naflvr:
        if not sep.delta_star > 0:
            r.append("inconsistent: NAFLVR holds but no separating density with positive floor found")
        else:
            r.append(f"NAFLVR holds; separating density with floor {sep.delta_star:.6g}")
    else:
        r.append("NAFLVR fails")
    return report


def counterexample_report(
    N: int,
    coefficient_vectors: Sequence[Sequence[float]],
    levels: int = 40,
) -> dict:
    """Separating versus martingale measures on the discretized singular market.

    Inequality mode uses the terminal payoffs of the supplied coefficient
    vectors that are bounded below; Lebesgue cell masses are checked as the
    separating witness.  Equality mode reports the floors of martingale
    measures for S^1..S^N (one-sided and two-sided).
    """
    mkt = CounterexampleMarket(N)
    disc = mkt.discretize(levels=levels)
    admissible = []
    for c in coefficient_vectors:
        rep = mkt.portfolio_payoff(c)
        if rep.bounded_below:
            cc = np.zeros(N)
            cc[: len(c)] = c
            admissible.append(disc.payoffs @ cc)
    gens = np.column_stack(admissible) if admissible else np.zeros((disc.n_atoms, 0))
    lam = disc.probs
    lam_separates = bool(np.all(lam @ gens <= FEAS_TOL)) if admissible else True
    ineq = separating_polytope(disc.probs, gens, 1.0, "inequality") if admissible else None
    eq = separating_polytope(disc.probs, disc.payoffs, 0.0, "equality")
    return {
        "N": N,
        "admissible_generators": len(admissible),
        "lebesgue_separates": lam_separates,
        "inequality_full_floor_feasible": None if ineq is None else ineq.feasible,
        "equality_delta_star": eq.delta_star,
        "lebesgue_is_martingale_measure": bool(np.all(np.abs(lam @ disc.payoffs) <= FEAS_TOL)),
    }
