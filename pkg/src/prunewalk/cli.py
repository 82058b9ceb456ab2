"""Command-line front end.

Exit codes: 0 success, 1 a checked assertion failed, 2 bad configuration or
I/O problem, 3 sampling budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .lattice import NAMED_FAMILIES, LoopFamily, LoopFamilyError, PathError, load_loop_family, named_family
from .lattice import path_from_codes, validate_path
from .report import ReportError, make_report, write_report
from .segments import BudgetExceeded, SegmentError
from .srw import ConfigError, WalkConfig

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _positive(kind):
    def conv(s):
        try:
            x = kind(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {s!r}") from None
        if x <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {s}")
        return x

    return conv


pos_int = _positive(int)
pos_float = _positive(float)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--family", default="E1",
                   help=f"loop family: a JSON file, one of {sorted(NAMED_FAMILIES)}, or 'harvest'")
    p.add_argument("--d", type=pos_int, default=3, help="lattice dimension (default 3)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.5, help="target non-erasable mass for --family harvest")
    p.add_argument("--threads", type=pos_int, default=None, help="worker threads (default: PRUNEWALK_THREADS or CPUs)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prunewalk", description="Loop pruning of lattice walks.")
    ap.add_argument("--version", action="version", version=f"prunewalk {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prune", help="skeleton and pruned segments of a path")
    _common(p)
    p.add_argument("--path", required=True, help="JSON file: list of points, or {\"d\":..,\"codes\":[..]}")

    for name, what in (("tree", "marked tree"), ("es", "ES map")):
        p = sub.add_parser(name, help=f"segment <-> {what} round trip")
        _common(p)
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--segment", help="JSON file with an erasable segment")
        g.add_argument("--" + name, dest="encoded", help=f"JSON file with a {what}")

    p = sub.add_parser("enumerate", help="erasable segments by length")
    _common(p)
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--list", action="store_true", help="include the segments themselves")

    p = sub.add_parser("estimate", help="Monte Carlo estimates")
    est = p.add_subparsers(dest="target", required=True)
    q = est.add_parser("gamma", help="escape probability and alpha")
    _common(q)
    q.add_argument("--horizon", type=pos_int, default=10_000)
    q.add_argument("--samples", type=pos_int, default=100_000)
    q = est.add_parser("kappa", help="density of retained steps")
    _common(q)
    q.add_argument("--n", type=pos_int, default=10_000)
    q.add_argument("--seeds", type=pos_int, default=50)
    q = est.add_parser("theta", help="cut and rod cut densities")
    _common(q)
    q.add_argument("--size", type=pos_int, default=20_000)
    q.add_argument("--margin", type=int, default=5_000)
    q.add_argument("--seeds", type=pos_int, default=50)
    q.add_argument("--K", type=pos_int, default=1)
    q = est.add_parser("vartheta", help="probability that a completed first excursion is erasable")
    _common(q)
    q.add_argument("--horizon", type=pos_int, default=10_000)
    q.add_argument("--samples", type=pos_int, default=100_000)

    p = sub.add_parser("experiment", help="structural experiments")
    ex = p.add_subparsers(dest="target", required=True)
    q = ex.add_parser("strategy", help="revelation strategy replay")
    _common(q)
    q.add_argument("--n", type=pos_int, default=10_000)
    q.add_argument("--beta", type=pos_float, default=1.0)
    q.add_argument("--delta", type=pos_float, default=None, help="default kappa_hat / 2")
    q.add_argument("--a", type=pos_float, default=0.8)
    q.add_argument("--runs", type=pos_int, default=100)
    q.add_argument("--kappa-hat", type=pos_float, default=None)
    q.add_argument("--alpha-hat", type=pos_float, default=None)
    q = ex.add_parser("rod", help="rod pruning-interval structure")
    _common(q)
    q.add_argument("--K", type=pos_int, default=1)
    q.add_argument("--rods", type=pos_int, default=1000, help="rod points to check")
    q.add_argument("--kind", choices=("planted", "sampled"), default="planted")
    q.add_argument("--blocks", type=pos_int, default=24)
    q = ex.add_parser("stop-prob", help="conditional stop probability at boundary addresses")
    _common(q)
    q.add_argument("--horizon", type=pos_int, default=200)
    q.add_argument("--samples", type=pos_int, default=100_000)
    q.add_argument("--cap", type=int, default=None)
    q.add_argument("--gamma-hat", type=pos_float, default=None)
    q.add_argument("--threshold", type=pos_int, default=500)
    q = ex.add_parser("segment-law", help="conditional law of segments given a short skeleton")
    _common(q)
    q.add_argument("--skeleton", default="2", help="comma-separated step codes (default: one +u2 step)")
    q.add_argument("--cap", type=int, default=2)
    q.add_argument("--horizon", type=pos_int, default=200)
    q.add_argument("--samples", type=pos_int, default=100_000)
    q = ex.add_parser("tail", help="survival of the pruned local time at the origin")
    _common(q)
    q.add_argument("--N", type=pos_int, default=10_000)
    q.add_argument("--seeds", type=pos_int, default=1000)
    q = ex.add_parser("pattern", help="return-pattern combinatorics")
    _common(q)
    q.add_argument("--r", type=pos_int, default=6, help="largest #J")
    q.add_argument("--K", type=pos_int, default=4)
    q = ex.add_parser("necessary", help="witness search on random rod windows")
    _common(q)
    q.add_argument("--K", type=pos_int, default=1)
    q.add_argument("--windows", type=pos_int, default=1000, help="applicable windows to reach")
    q.add_argument("--kind", choices=("planted", "sampled"), default="planted")
    q.add_argument("--blocks", type=pos_int, default=60)

    p = sub.add_parser("selftest", help="deterministic invariant suite")
    _common(p)
    p.add_argument("--scale", type=pos_float, default=1.0, help="fraction of the random sample sizes")
    return ap


# ------------------------------------------------------------ helpers

def resolve_family(args) -> LoopFamily:
    name = args.family
    if os.path.exists(name):
        E = load_loop_family(name)
    elif name == "harvest":
        from .srw import harvest_loop_family

        if not 0 < args.eps < 1:
            raise ConfigError("--eps must lie in (0, 1)")
        E = harvest_loop_family(args.eps, WalkConfig(d=args.d, seed=args.seed, horizon=10_000), 10_000,
                                args.threads).family
    elif name in NAMED_FAMILIES:
        E = named_family(name, args.d)
    else:
        raise ConfigError(f"--family {name!r} is neither a file nor one of {sorted(NAMED_FAMILIES)} or 'harvest'")
    if E.d != args.d:
        raise ConfigError(f"family has dimension {E.d} but --d is {args.d}")
    return E


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def load_path(path: str, d: int):
    obj = _load_json(path)
    if isinstance(obj, dict) and "codes" in obj:
        codes = obj["codes"]
        if not all(isinstance(c, int) and 0 <= c < 2 * d for c in codes):
            raise ConfigError(f"{path}: codes must be integers in [0, {2 * d})")
        return path_from_codes(codes, obj.get("d", d))
    if isinstance(obj, dict) and "points" in obj:
        obj = obj["points"]
    if not isinstance(obj, list):
        raise ConfigError(f"{path}: expected a list of points")
    return validate_path(obj, require_nn=False)


def config_of(args) -> dict:
    skip = {"out", "format", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _plugins(args, E):
    """Plug-in constants; estimated at modest budgets when not given."""
    from .experiments.density import estimate_kappa
    from .srw import estimate_gamma

    g = estimate_gamma(WalkConfig(d=args.d, seed=args.seed, horizon=10_000), 100_000, args.threads)
    kappa = args.kappa_hat
    if kappa is None:
        kappa = estimate_kappa(E, 10_000, 50, args.seed, threads=args.threads).kappa_hat
    alpha = args.alpha_hat if args.alpha_hat is not None else g.alpha_hat
    return g.gamma_hat, kappa, alpha


# --------------------------------------------------------- subcommands

def cmd_prune(args, E):
    from .prune import decompose, reinsert

    s = load_path(args.path, args.d)
    dec = decompose(s, E)
    ok = reinsert(dec, E) == s
    fails = [] if ok else ["reinsertion does not reproduce the path"]
    return make_report("prune", config_of(args), [], {**dec.to_json(), "reinsertion_ok": ok}, fails)


def cmd_codec(args, E):
    from .segments import ESRep, MarkedTree, es_decode, es_encode, segment_of_tree, seg_membership, tree_of_segment

    name = args.command
    fails = []
    if args.segment:
        eta = load_path(args.segment, args.d)
        if not seg_membership(eta, E):
            raise ConfigError(f"{args.segment}: path is not erasable for this family")
        T = tree_of_segment(eta, E)
        enc = T if name == "tree" else es_encode(T, E)
    else:
        obj = _load_json(args.encoded)
        try:
            enc = MarkedTree.from_json(obj) if name == "tree" else ESRep.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{args.encoded}: malformed {name} ({exc})") from None
        T = enc if name == "tree" else es_decode(enc, E)
        eta = segment_of_tree(T, E)
    back = segment_of_tree(T, E)
    T2 = tree_of_segment(back, E)
    enc2 = T2 if name == "tree" else es_encode(T2, E)
    if back != eta or enc2 != enc:
        fails.append(f"{name} round trip differs")
    return make_report(name, config_of(args), [], {"segment": eta.to_list(), name: enc.to_json(),
                                                    "roundtrip_ok": not fails}, fails)


def cmd_enumerate(args, E):
    from .segments import enumerate_segments

    segs = enumerate_segments(E, args.max_len)
    counts = [0] * (args.max_len + 1)
    for s in segs:
        counts[s.length] += 1
    agg = {"counts": counts, "total": len(segs), "header": ["length", "count"],
           "rows": [[n, c] for n, c in enumerate(counts)]}
    if args.list:
        agg["segments"] = [s.to_list() for s in segs]
    return make_report("enumerate", config_of(args), [], agg, [])


def cmd_estimate(args, E):
    t = args.target
    cfg = None
    if t in ("gamma", "vartheta"):
        cfg = WalkConfig(d=args.d, seed=args.seed, horizon=args.horizon)
    if t == "gamma":
        from .srw import estimate_gamma

        est = estimate_gamma(cfg, args.samples, args.threads)
        return make_report("estimate-gamma", config_of(args), [], est.to_json(), [])
    if t == "vartheta":
        from .srw import estimate_vartheta

        est = estimate_vartheta(E, cfg, args.samples, args.threads)
        return make_report("estimate-vartheta", config_of(args), [], est.to_json(), [])
    if t == "kappa":
        from .experiments.density import estimate_kappa

        grid = sorted({max(1, args.n // 100), max(1, args.n // 10), args.n})
        est = estimate_kappa(E, args.n, args.seeds, args.seed, grid=grid, threads=args.threads)
        per = [{"index": i, "ratio": x} for i, x in enumerate(est.ratios[args.n])]
        return make_report("estimate-kappa", config_of(args), per, est.to_json(), [])
    from .experiments.density import cut_and_rod_density
    from .experiments.rods import RodConfig

    res = cut_and_rod_density(E, RodConfig.for_family(E, args.K), args.seeds, args.size, args.margin,
                              args.seed, threads=args.threads)
    out = res.to_json()
    per = out.pop("per_seed")
    fails = [f"{res.containment_failures} rod cut points are not cut steps"] if res.containment_failures else []
    return make_report("estimate-theta", config_of(args), per, out, fails)


def cmd_experiment(args, E):
    t = args.target
    if t == "strategy":
        from .experiments.strategy import StrategyParams, strategy_sweep

        _, kappa, alpha = _plugins(args, E)
        params = StrategyParams(args.n, args.beta, kappa, alpha, args.delta, args.a)
        sm = strategy_sweep(E, params, args.runs, args.seed, args.threads)
        out = sm.to_json()
        per = out.pop("per_seed")
        fails = [f"run {i}: G holds but max local time exceeds Lambda" for i in sm.soundness_failures]
        fails += [f"run {i}: first critical pair {f}" for i, f in sm.first_critical_failures]
        fails += [f"run {i}: exceptional-pair count bound fails" for i in sm.bound_failures]
        return make_report("strategy", config_of(args), per, out, fails)
    if t in ("rod", "necessary"):
        from .experiments.rods import RodConfig
        from .experiments.sweeps import necessary_sweep, rod_structure_sweep

        rc = RodConfig.for_family(E, args.K)
        if t == "rod":
            res = rod_structure_sweep(E, rc, args.rods, args.kind, args.blocks, args.seed, threads=args.threads)
            return make_report("rod", config_of(args), [], res.to_json(), res.violations)
        res = necessary_sweep(E, rc, args.windows, args.kind, args.blocks, args.seed, threads=args.threads)
        return make_report("necessary", config_of(args), [], res.to_json(),
                           [f"window {c['window']}: {c['detail']}" for c in res.counterexamples])
    if t == "stop-prob":
        from .experiments.conditional import stop_prob_check
        from .srw import estimate_gamma

        g = args.gamma_hat
        if g is None:
            g = estimate_gamma(WalkConfig(d=args.d, seed=args.seed, horizon=10_000), 100_000, args.threads).gamma_hat
        rep = stop_prob_check(E, g, horizon=args.horizon, n_samples=args.samples, seed=args.seed,
                              threshold=args.threshold, cap=args.cap, threads=args.threads)
        out = rep.to_json()
        atoms = out.pop("atoms")
        fails = [f"atom {a['history']} at {a['v']}: frequency {a['freq']:.4f} below gamma_hat" for a in rep.failures]
        fails += [f"atom {a['history']} at {a['v']}: frequency {a['freq']:.4f} vs analytic {a['analytic']}"
                  for a in rep.analytic_failures]
        return make_report("stop-prob", config_of(args), atoms, out, fails)
    if t == "segment-law":
        from .experiments.conditional import segment_law_check

        try:
            skel = tuple(int(c) for c in args.skeleton.split(",") if c.strip())
        except ValueError:
            raise ConfigError(f"--skeleton {args.skeleton!r}: expected comma-separated step codes") from None
        rep = segment_law_check(E, skel, args.cap, args.horizon, args.samples, args.seed, args.threads)
        return make_report("segment-law", config_of(args), [], rep.to_json(), [])
    if t == "tail":
        from .experiments.tails import pruned_local_time_tail

        curve = pruned_local_time_tail(E, args.N, [args.N], args.seeds, args.seed, threads=args.threads)[0]
        return make_report("tail", config_of(args), [], {"N": curve.N, "header": ["t", "survival", "stderr"],
                                                          "rows": [list(r) for r in curve.rows]}, [])
    from .invariants import pattern_combinatorics

    res = pattern_combinatorics(args.r, args.K, min(args.r, 6), min(args.K, 3))
    return make_report("pattern", config_of(args), [], res.to_json(), res.failures)


def cmd_selftest(args, E):
    from .invariants import deterministic_suite

    res = deterministic_suite(scale=args.scale)
    fails = [f"{r.name}: {f}" for r in res for f in r.failures[:5]]
    fails += [f"{r.name}: nothing checked" for r in res if r.checked == 0]
    return make_report("selftest", config_of(args), [r.to_json() for r in res],
                       {"checks": len(res), "passed": sum(r.ok for r in res)}, fails)


COMMANDS = {
    "prune": cmd_prune,
    "tree": cmd_codec,
    "es": cmd_codec,
    "enumerate": cmd_enumerate,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "selftest": cmd_selftest,
}


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        E = resolve_family(args)
        report = COMMANDS[args.command](args, E)
        text = write_report(report, args.out, args.format)
    except BudgetExceeded as exc:
        print(f"prunewalk: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, LoopFamilyError, PathError, SegmentError, ReportError, ValueError, OSError) as exc:
        print(f"prunewalk: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out in (None, "-"):
        sys.stdout.write(text)
    for f in report["failures"][:20]:
        print(f"prunewalk: FAILED {f}", file=sys.stderr)
    return EXIT_ASSERT if report["failures"] else EXIT_OK


def main():
    sys.exit(run())
