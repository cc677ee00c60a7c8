"""Command-line front-end: verify a model file or generate benchmarks."""
from __future__ import annotations

import argparse
import math
import sys
import time

from pomdpverify import bench, mdp_check, refine, report
from pomdpverify.belief import ExplorationBudget, explore_belief_mdp, export_fragment
from pomdpverify.model import ModelError, parse_model, parse_number
from pomdpverify.refine import HeuristicConfig
from pomdpverify.triangulate import Foundation

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_THRESHOLD = 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pomdpverify",
        description="Sound bounds on optimal observation-based POMDP values.")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="verify a model file")
    check.add_argument("model", help="path to an explicit model file")
    check.add_argument("--mode", choices=["single-shot", "refine", "belief-explore"],
                       default="refine")
    check.add_argument("--resolution", type=int, default=4,
                       help="triangulation resolution for single-shot mode")
    check.add_argument("--heuristic", choices=sorted(refine._PRESET_OVERRIDES),
                       default="h0")
    check.add_argument("--eta-init", type=int)
    check.add_argument("--f-res", type=float)
    check.add_argument("--rho-z", type=float)
    check.add_argument("--f-step", type=float)
    check.add_argument("--rho-gap", type=float)
    check.add_argument("--f-gap", type=float)
    check.add_argument("--rho-sigma", type=float)
    check.add_argument("--triangulation", choices=["static", "dynamic"])
    check.add_argument("--time", type=float, default=60.0,
                       help="wall-time budget in seconds")
    check.add_argument("--max-iters", type=int)
    arith = check.add_mutually_exclusive_group()
    arith.add_argument("--exact", action="store_true", help="rational arithmetic")
    arith.add_argument("--float", dest="float_mode", action="store_true",
                       help="floating-point arithmetic (default)")
    check.add_argument("--threshold",
                       help="threshold query, e.g. '<=0.65' (overrides the model)")
    check.add_argument("--csv", metavar="PATH",
                       help="write the run record as CSV plus a bounds figure")
    check.add_argument("--log", metavar="PATH", help="write a plain-text iteration log")
    check.add_argument("--export-abstraction", metavar="PATH",
                       help="dump the final abstraction's transitions")

    gen = sub.add_parser("generate", help="generate a benchmark model")
    gen.add_argument("family", choices=bench.FAMILIES)
    gen.add_argument("--out", required=True, help="output model file")
    gen.add_argument("--size", type=int, default=3)
    gen.add_argument("--energy", type=int, default=3, help="refuel-lite energy levels")
    gen.add_argument("--noise", type=float, default=0.1)
    gen.add_argument("--seed", type=int, default=0)
    return parser


def _config_from_args(args):
    overrides = {}
    for attr, key in [("eta_init", "eta_init"), ("f_res", "f_res"),
                      ("rho_z", "rho_z"), ("f_step", "f_step"),
                      ("rho_gap", "rho_gap"), ("f_gap", "f_gap"),
                      ("rho_sigma", "rho_sigma")]:
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    if args.triangulation is not None:
        overrides["scheme"] = args.triangulation
    return HeuristicConfig.preset(args.heuristic, **overrides)


def _parse_threshold(text, exact):
    for op in ("<=", ">="):
        if text.startswith(op):
            return (op, parse_number(text[len(op):].strip(), exact))
    raise ModelError("threshold must start with <= or >=")


def _run_single_shot(pomdp, spec, args, config):
    started = time.monotonic()
    foundation = Foundation.initial(pomdp.num_obs, eta_init=args.resolution,
                                    f_res=config.f_res, scheme=config.scheme)
    abstraction = refine.build_discretized(pomdp, spec, foundation,
                                           cutoff_policy="never")
    result = abstraction.check(spec.kind, spec.direction)
    init = abstraction.initial_index
    und = mdp_check.SparseMdp.from_mdp(pomdp.mdp, spec)
    und_result = mdp_check.check(und, spec.kind, spec.direction,
                                 exact=pomdp.exact and spec.is_probability)
    guesses = refine.guess_lower_bound_policies(pomdp, spec, und_result,
                                                config.rho_sigma)
    policy_bound = float(guesses[0][1]) if guesses else None
    if spec.direction == "max":
        lower, upper = policy_bound, float(result.upper[init])
    else:
        lower, upper = float(result.lower[init]), policy_bound
    elapsed = time.monotonic() - started
    record = {
        "lower": lower, "upper": upper, "iterations": 1,
        "states": abstraction.sparse.num_states, "time": elapsed,
        "status": "gap-met" if _gap(lower, upper) <= 1e-6 else "timeout",
    }
    iterations = [{"iteration": 1, "states": record["states"],
                   "explored": abstraction.count("explored"), "rewired": 0,
                   "cutoff": abstraction.count("cutoff"),
                   "lower": lower, "upper": upper,
                   "eta": dict(foundation.resolutions), "time": elapsed}]
    return record, iterations, abstraction


def _run_refine(pomdp, spec, args, config):
    ledger, abstraction, log = refine.refinement_loop(
        pomdp, spec, config, wall_time=args.time, max_iters=args.max_iters)
    lower, upper = ledger.best
    record = {
        "lower": lower, "upper": upper, "iterations": len(log),
        "states": abstraction.sparse.num_states if abstraction else 0,
        "time": log[-1]["time"] if log else 0.0, "status": ledger.status,
    }
    return record, log, abstraction


def _run_belief_explore(pomdp, spec, args):
    """Bound the value by direct belief-MDP exploration at doubling budgets:
    one fragment with pessimistic cut-offs and one with optimistic ones."""
    started = time.monotonic()
    lower = upper = None
    status = "timeout"
    log = []
    step = 0
    max_steps = args.max_iters or 64
    if spec.is_probability:
        pessimistic, optimistic, bound_values = "to-sink", "to-target", None
    else:
        und = mdp_check.SparseMdp.from_mdp(pomdp.mdp, spec)
        bound_values = mdp_check.check(und, spec.kind, "max").upper
        pessimistic, optimistic = "to-target", "mdp-bound"
    while step < max_steps and time.monotonic() - started < args.time:
        step += 1
        budget = ExplorationBudget.for_step(pomdp, step)
        pess, _, complete, store = explore_belief_mdp(
            pomdp, spec, budget, cutoff_mode=pessimistic)
        opt, _, complete2, _ = explore_belief_mdp(
            pomdp, spec, budget, cutoff_mode=optimistic,
            mdp_values=bound_values)
        pess_result = mdp_check.check(pess, spec.kind, spec.direction)
        opt_result = mdp_check.check(opt, spec.kind, spec.direction)
        lower = pess_result.lower[pess.initial]
        upper = opt_result.upper[opt.initial]
        log.append({"iteration": step, "states": len(store),
                    "explored": len(store), "rewired": 0, "cutoff": 0,
                    "lower": lower, "upper": upper, "eta": {},
                    "time": time.monotonic() - started})
        if complete and complete2:
            status = "exact"
            break
        if _gap(lower, upper) <= 1e-6:
            status = "gap-met"
            break
    record = {"lower": lower, "upper": upper, "iterations": step,
              "states": log[-1]["states"] if log else 0,
              "time": time.monotonic() - started, "status": status}
    return record, log, None


def _gap(lower, upper):
    if lower is None or upper is None or upper == math.inf:
        return math.inf
    if upper <= 0:
        return 0.0
    return (upper - lower) / upper


def run_check(args):
    try:
        with open(args.model) as handle:
            text = handle.read()
    except OSError as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_ERROR
    exact = bool(args.exact)
    try:
        pomdp, spec = parse_model(text, exact=exact)
        if args.threshold:
            spec = type(spec)(kind=spec.kind, direction=spec.direction,
                              target_states=spec.target_states,
                              avoid_states=spec.avoid_states,
                              rewards=spec.rewards,
                              threshold=_parse_threshold(args.threshold, exact))
            spec.validate(pomdp)
        config = _config_from_args(args)
        if args.mode == "single-shot":
            record, iterations, abstraction = _run_single_shot(pomdp, spec, args, config)
        elif args.mode == "refine":
            record, iterations, abstraction = _run_refine(pomdp, spec, args, config)
        else:
            record, iterations, abstraction = _run_belief_explore(pomdp, spec, args)
    except (ModelError, ValueError) as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_ERROR

    record.update({"model": args.model, "mode": args.mode,
                   "kind": spec.kind, "direction": spec.direction})
    print("status=%s L=%s U=%s iterations=%s states=%s time=%.3fs" % (
        record["status"], record["lower"], record["upper"],
        record["iterations"], record["states"], record["time"]))
    if args.csv:
        figure = report.write_csv(args.csv, record, iterations)
        print("wrote %s and %s" % (args.csv, figure))
    if args.log:
        report.write_log(args.log, record, iterations)
    if args.export_abstraction and abstraction is not None:
        export_fragment(abstraction.sparse, args.export_abstraction)

    if spec.threshold is not None and record["lower"] is not None \
            and record["upper"] is not None:
        op, lam = spec.threshold
        lam = float(lam)
        if op == "<=" and record["upper"] <= lam:
            return EXIT_THRESHOLD
        if op == ">=" and record["lower"] >= lam:
            return EXIT_THRESHOLD
    return EXIT_OK


def run_generate(args):
    params = {"seed": args.seed}
    if args.family == "grid-avoid":
        params.update(n=args.size, slip=args.noise)
    elif args.family == "maze-like":
        params.update(n=args.size, density=args.noise)
    elif args.family == "refuel-lite":
        params.update(n=args.size, energy=args.energy, noise=args.noise)
    else:
        params.update(n=args.size, noise=args.noise)
    try:
        text = bench.generate_benchmark(args.family, **params)
    except (AssertionError, ValueError) as err:
        print("error: %s" % err, file=sys.stderr)
        return EXIT_ERROR
    with open(args.out, "w") as handle:
        handle.write(text)
    print("wrote %s" % args.out)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "generate":
        return run_generate(args)
    return run_check(args)


if __name__ == "__main__":
    sys.exit(main())
