"""Command-line pipeline: search, certify, verify, simulate, check.

Exit codes: 0 success / checks passed, 1 usage error, 2 a verification
or acceptance check failed, 3 resource limits.  Reports are JSON with
sorted keys and no timestamps, so identical configuration and seed give
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import hardness
from .extract import ConstraintSet, extract, sparsify
from .lp import LpSolution, build_lp, emit_lp, solve_exact, verify_certificate
from .positions import format_position
from .protocol import ProtocolGraph, builtin, simulate
from .table import MemoryBudgetError, ValueTable, run_search

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_RESOURCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _dump(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _progress_printer(enabled):
    if not enabled:
        return None

    def cb(rounds, split_improved, scale_improved):
        print(f"round {rounds}: split improved {split_improved}, "
              f"scale improved {scale_improved}", flush=True)
    return cb


def _threads(args):
    n = args.threads
    if n is None:
        n = int(os.environ.get("CRYPTOSPLIT_THREADS", "1"))
    if n < 1:
        raise ValueError("--threads must be >= 1")
    return n


def cmd_search(args):
    _threads(args)
    try:
        table = run_search(args.t, epsilon=args.epsilon, iterations=args.iters,
                           numeric=args.mode, order=args.order,
                           progress=_progress_printer(args.progress))
    except MemoryBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    bound = table.normalized_root()
    doc = {
        "t": args.t,
        "mode": args.mode,
        "converged": table.converged,
        "rounds": table.rounds,
        "update_steps": table.steps,
        "canonical_positions": len(table),
        "normalized_bound": float(bound),
        "normalized_bound_exact": str(Fraction(bound)) if args.mode == "rational"
        else None,
        "root_value": float(table.value(table.root_position())),
    }
    if args.out:
        table.save(args.out)
        doc["table"] = args.out
    print(f"{float(bound):.10f}")
    _dump(doc, args.report)
    return EXIT_OK


def cmd_pipeline(args):
    _threads(args)
    try:
        table = run_search(args.t, epsilon=args.epsilon, numeric=args.mode,
                           progress=_progress_printer(args.progress))
    except MemoryBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    cs = extract(table)
    model = build_lp(cs)
    sol = solve_exact(model)
    if sol.status != "optimal":
        print(f"LP solve failed: {sol.status}", file=sys.stderr)
        return EXIT_FAIL
    sparse = sparsify(cs, sol.assignment)
    sparse_model = build_lp(sparse)
    sparse_sol = solve_exact(sparse_model)
    verdict = verify_certificate(sparse, sparse_sol)
    ok = (verdict.ok and sparse_sol.status == "optimal"
          and sparse_sol.objective == sol.objective)
    prefix = args.out_prefix
    sparse.save(prefix + ".constraints.json")
    with open(prefix + ".lp", "w") as fh:
        fh.write(emit_lp(sparse_model))
    _dump(sparse_sol.to_json(), prefix + ".solution.json")
    report = {
        "t": args.t,
        "search_bound": float(table.normalized_root()),
        "constraints_extracted": len(cs),
        "constraints_sparsified": len(sparse),
        "lp_objective": str(sol.objective),
        "status": "verified" if ok else "unverified",
        "verdict": verdict.to_json(),
    }
    _dump(report, prefix + ".verdict.json")
    if ok:
        print(f"certified {verdict.normalized} "
              f"= {float(verdict.normalized):.10f}")
        _dump(report, args.report)
        return EXIT_OK
    print("unverified", file=sys.stderr)
    for f in verdict.failures[:5]:
        print(f"  {f}", file=sys.stderr)
    _dump(report, args.report)
    return EXIT_FAIL


def cmd_verify(args):
    cs = ConstraintSet.load(args.constraints)
    with open(args.solution) as fh:
        sol = LpSolution.from_json(json.load(fh))
    verdict = verify_certificate(cs, sol, normalize=not args.no_normalize)
    _dump(verdict.to_json(), args.report)
    if verdict.ok:
        print(f"certified {verdict.bound}"
              + (f" (normalized {verdict.normalized})"
                 if verdict.normalized is not None else ""))
        return EXIT_OK
    print("unverified", file=sys.stderr)
    for f in verdict.failures[:5]:
        print(f"  {f}", file=sys.stderr)
    return EXIT_FAIL


def cmd_simulate(args):
    if args.protocol in ("twobit", "thm29"):
        graph = builtin(args.protocol)
    else:
        graph = ProtocolGraph.load(args.protocol)
    report = simulate(graph, args.samples, depth_limit=args.depth_limit,
                      seed=args.seed)
    exact = graph.normalized_value()
    doc = report.to_json()
    doc["protocol"] = args.protocol
    doc["exact_value"] = str(exact)
    doc["exact_value_decimal"] = float(exact)
    _dump(doc, args.report)
    print(f"success rate {report.success_rate:.6f} "
          f"(exact {float(exact):.6f}, stderr {report.stderr:.6f})")
    return EXIT_OK


def cmd_hardness(args):
    qs = None
    if args.q_levels is not None:
        half = (args.q_levels - 1) // 2
        qs = sorted({Fraction(0), Fraction(2)}
                    | {Fraction(2) ** e for e in range(-half, half + 1)})
    corner = hardness.check_c2prime(args.variant)
    dominates = hardness.check_dominates_zero_bit(args.samples, args.seed,
                                                  args.variant)
    c1 = hardness.check_c1_sampling(args.samples, args.seed, args.variant)
    psd = hardness.check_psd(grid_n=args.grid, q_levels=qs)
    ok = corner.ok and dominates.ok and c1.ok and psd.ok
    doc = {
        "variant": args.variant,
        "corner_battery": corner.to_json(),
        "dominates_zero_bit": dominates.to_json(),
        "allowed_plane_concavity_sampling": c1.to_json(),
        "hessian_grid": psd.to_json(),
        "status": "PASS" if ok else "FAIL",
    }
    _dump(doc, args.report)
    print(doc["status"])
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None):
    parser = _Parser(prog="cryptosplit",
                     description="two-player cryptogenography toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the lattice search")
    p.add_argument("--t", type=int, required=True, help="lattice resolution")
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--iters", type=int, default=None,
                   help="run exactly this many rounds instead of converging")
    p.add_argument("--mode", choices=("float", "rational"), default="float")
    p.add_argument("--order", choices=("ascending", "descending"),
                   default="ascending")
    p.add_argument("--out", help="write a CGTABLE/1 dump here")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pipeline",
                       help="search, extract, solve, sparsify and certify")
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--mode", choices=("float", "rational"), default="float")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--report")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("verify", help="check a constraint-set certificate")
    p.add_argument("--constraints", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte-Carlo run of a protocol")
    p.add_argument("--protocol", required=True,
                   help="twobit, thm29 or a protocol JSON file")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth-limit", type=int, default=200)
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hardness", help="upper-bound verification batteries")
    p.add_argument("--variant", choices=hardness.VARIANTS, default="adapted")
    p.add_argument("--grid", type=int, default=200,
                   help="denominator of the (a, b) grid")
    p.add_argument("--q-levels", type=int, default=None,
                   help="number of power-of-two ratio levels")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report")
    p.set_defaults(func=cmd_hardness)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
