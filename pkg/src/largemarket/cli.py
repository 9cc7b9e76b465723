"""Command-line front end.

Exit codes: 0 success, 1 arbitrage found while ``--assert-no-arbitrage`` is
set, 2 bad input.  Tables are CSV with '.' decimals; ``--out DIR`` (or the
LARGEMARKET_OUT environment variable) also writes them to files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import detect, emery, markets
from .portfolio import truncation_decompose
from .probspace import ScenarioTree, validate_tree
from .process import AdaptedProcess

EXIT_OK, EXIT_ARBITRAGE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


class Emitter:
    def __init__(self, out_dir: str | None, stream) -> None:
        out_dir = out_dir or os.environ.get("LARGEMARKET_OUT")
        self.out = Path(out_dir) if out_dir else None
        self.stream = stream
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, text: str) -> None:
        self.stream.write(text)
        if self.out:
            (self.out / name).write_text(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_market(spec: str) -> markets.OnePeriodMarket:
    builtin, _, arg = spec.partition(":")
    if builtin in ("fair-coin", "binary", "counterexample"):
        kw = {"n": int(arg)} if arg else {}
        return markets.builtin_market(builtin, **kw)
    if not Path(spec).is_file():
        raise InputError(f"market config {spec!r} not found (give a JSON path or fair-coin, binary:N, counterexample:N)")
    return markets.load_market(Path(spec))


# ---------------------------------------------------------------------------
# subcommands


def cmd_counterexample(args, em: Emitter) -> int:
    rows = []
    for n in range(1, args.n_max + 1):
        eps = markets.solve_epsilon(n, args.tol)
        rows.append((n, eps, markets.epsilon_residual(n, eps), markets.exact_mean(n, eps)))
    em.emit("counterexample.csv", _table(
        ["n", "eps_n", f"residual(tol={args.tol:g})", "E[S^n_1](exact)"], rows))
    return EXIT_OK


def cmd_binary(args, em: Emitter) -> int:
    p = markets.parse_p_sequence(args.p, args.n)
    bm = markets.build_binary_tree(args.n, p)
    rows = []
    closure_ok = True
    if bm.tree is not None:
        mkt = bm.one_period_market()
        J = bm.unit_jump()
        small = detect.na_small_scan(mkt)
        for k in range(1, args.n + 1):
            d = emery.emery_distance(bm.price(k), J, args.family, args.seed).value
            rows.append((k, p[k - 1], d, small[tuple(mkt.assets[:k])].no_arbitrage))
        closure = detect.na_closure_check(mkt, {"J": J})
        closure_ok = closure.no_arbitrage
    else:
        for k in range(1, args.n + 1):
            marg = bm.marginal_market(k)
            rows.append((k, p[k - 1], bm.emery_to_unit_jump(k), detect.na_check(marg).no_arbitrage))
        # J pays 1 on every atom of every marginal: an arbitrage once admitted
        closure_ok = False
    em.emit("binary.csv", _table(["n", "p_n", "d_S(S^n,J)", "NA_small(tol=1e-9)"], rows))
    em.emit("binary_closure.csv", _table(["check", "verdict"], [("NA_in_closure(J)", closure_ok)]))
    if args.assert_no_arbitrage and (not closure_ok or not all(r[3] for r in rows)):
        return EXIT_ARBITRAGE
    return EXIT_OK


def cmd_scan(args, em: Emitter) -> int:
    mkt = _load_market(args.market)
    c_list = _floats(args.c_list)
    rep = detect.naflvr_report(mkt, None, c_list)
    doc = rep.to_dict()
    if args.floor_bisect_tol:
        doc["delta_star_bisect"] = detect.floor_bisect(mkt.probs, mkt.payoffs, "equality", args.floor_bisect_tol)
    doc["seed"] = args.seed
    em.emit("report.json", json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
    em.emit("verdicts.csv", _table(
        ["leg", "verdict"],
        [("NA_small", rep.na_small_ok), ("NA_closure", rep.na_closure.no_arbitrage),
         ("NUPBR", rep.nupbr.nupbr), ("NAFLVR", rep.naflvr)]))
    em.emit("profile.csv", _table(["c", "max_P[X_1>=c]", "exact"],
                                  [(c, v, rep.nupbr.exact) for c, v in zip(rep.nupbr.c_list, rep.nupbr.profile)]))
    em.emit("delta.csv", _table(["mode", "delta_star(floor q>=delta*p)"], [("equality", rep.separating.delta_star)]))
    certs = [(("/".join(k)), a, th) for k, v in rep.na_small.items() if v.certificate
             for a, th in v.certificate.theta.items()]
    em.emit("certificates.csv", _table(["subset", "asset", "theta"], certs))
    if args.assert_no_arbitrage and not rep.naflvr:
        return EXIT_ARBITRAGE
    return EXIT_OK


def _load_processes(path: str) -> tuple[ScenarioTree, list[AdaptedProcess]]:
    try:
        doc = json.loads(Path(path).read_text())
        tree = ScenarioTree.from_dict(doc["tree"])
        procs = [AdaptedProcess(tree, v) for v in doc["processes"]]
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise InputError(f"cannot load processes from {path!r}: {exc}") from exc
    problems = validate_tree(tree)
    if problems:
        raise InputError("invalid tree: " + "; ".join(problems))
    return tree, procs


def cmd_emery(args, em: Emitter) -> int:
    if args.binary:
        bm = markets.build_binary_tree(args.binary, markets.parse_p_sequence(args.p, args.binary))
        seq = [bm.price(k) for k in range(1, args.binary + 1)]
        pairs = [(seq[k], bm.unit_jump()) for k in range(len(seq))]
    else:
        if not args.input:
            raise InputError("give --input FILE or --binary N")
        _, seq = _load_processes(args.input)
        pairs = list(zip(seq, seq[1:]))
    rows = []
    for i, (x, y) in enumerate(pairs):
        est = emery.emery_distance(x, y, args.family, args.seed)
        rows.append((i, est.value, f"{est.family}#{est.index}"))
    em.emit("emery.csv", _table(["pair", f"estimate(lower bound,family={args.family})", "strategy_id"], rows))
    if args.tol is not None and len(seq) >= 2:
        rep = emery.cauchy_limit(seq, args.family, args.tol, seed=args.seed)
        em.emit("cauchy.csv", _table(["tol", "cauchy(heuristic)", "final_residual"],
                                     [(args.tol, rep.cauchy, rep.final_residual if rep.cauchy else float("nan"))]))
    return EXIT_OK


def cmd_decompose(args, em: Emitter) -> int:
    tree, procs = _load_processes(args.input)
    rows = []
    for i, x in enumerate(procs):
        dec = truncation_decompose(x, args.threshold)
        for v in range(tree.n_nodes):
            rows.append((i, v, int(tree.depth[v]), x.values[v], dec.B.values[v], dec.M.values[v], dec.X_check.values[v]))
    em.emit("decompose.csv", _table(["process", "node", "depth", "X", "B", "M", f"X_check(|jump|>{args.threshold:g})"], rows))
    return EXIT_OK


def cmd_polytope(args, em: Emitter) -> int:
    mkt = _load_market(args.market)
    poly = detect.separating_polytope(mkt, None, args.floor, args.mode, args.two_sided, args.floor_bisect_tol)
    rows = [(args.mode, args.floor, poly.feasible, poly.delta_star)]
    em.emit("polytope.csv", _table(["mode", "floor", "feasible(tol=1e-9)", "delta_star"], rows))
    if poly.witness_star is not None:
        em.emit("witness.csv", _table(["atom", "p", "q"], [(i, mkt.probs[i], q) for i, q in enumerate(poly.witness_star)]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="largemarket", description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="directory for emitted tables (default: $LARGEMARKET_OUT)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("counterexample", help="eps_n table for the singular market")
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("binary", help="binary large market: distances to J and NA verdicts")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--p", default="geometric:0.5")
    p.add_argument("--family", default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--assert-no-arbitrage", action="store_true")
    p.set_defaults(func=cmd_binary)

    p = sub.add_parser("scan", help="NA / NUPBR / NAFLVR report for a one-period market")
    p.add_argument("--market", required=True)
    p.add_argument("--c-list", default="0.5,1,2,4,8")
    p.add_argument("--floor-bisect-tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--assert-no-arbitrage", action="store_true")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("emery", help="Emery distance estimates between processes")
    p.add_argument("--input", help="JSON {tree: ..., processes: [[node values], ...]}")
    p.add_argument("--binary", type=int, help="use S^1..S^N of the binary market against J")
    p.add_argument("--p", default="geometric:0.5")
    p.add_argument("--family", default="greedy")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_emery)

    p = sub.add_parser("decompose", help="truncated canonical decomposition of processes")
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float, default=1.0)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("polytope", help="separating / martingale measure polytope")
    p.add_argument("--market", required=True)
    p.add_argument("--mode", choices=("inequality", "equality"), default="equality")
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--floor-bisect-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_polytope)
    return ap


def run(argv: Sequence[str] | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args, Emitter(args.out, stream))
    except (InputError, markets.MarketConfigError, emery.GuardError, markets.GuardExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
