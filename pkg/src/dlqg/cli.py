"""Command-line driver.

Exit codes: 0 success, 2 input or usage error, 3 non-convergence,
4 Monte Carlo estimate disagrees with the analytic cost.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .cost import cost_k, monte_carlo_cost
from .errors import ValidationError
from .optimize import OptimizerConfig, SynthesisReport, projected_gradient_descent, random_init
from .problem import Problem, load_controller, load_problem
from .qp import solve_q_domain
from .subspace import SPARSITY, qi_test_binary, qi_test_definition, struct_of
from .ustest import certify_us

log = logging.getLogger("dlqg")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3
EXIT_MC_MISMATCH = 4

Z_LIMIT = 5.0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(_jsonable(obj), indent=2)


def _emit(doc, out: str | None = None) -> None:
    text = dumps(doc) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _manifest(args, problem: Problem | None, config: dict, seed: int | None) -> dict:
    return {
        "command": args.command,
        "problem": problem.path if problem is not None else args.problem,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started": args._started,
        "finished": _now(),
    }


def _seed(args, problem: Problem) -> int:
    if args.seed is not None:
        return args.seed
    return problem.seed if problem.seed is not None else 0


# --- commands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    problem = load_problem(args.problem)
    sys_ = problem.system
    _emit({
        "valid": True,
        "horizon": sys_.horizon,
        "dims": {"n": sys_.n, "m": sys_.m, "p": sys_.p},
        "subspace_kind": problem.subspace.kind,
        "subspace_dim": problem.subspace.dim,
        "manifest": _manifest(args, problem, {}, None),
    })
    return EXIT_OK


def cmd_analyze(args) -> int:
    problem = load_problem(args.problem)
    cs, spec = problem.compact, problem.subspace
    seed = _seed(args, problem)
    delta = struct_of(cs.G)
    # for tied subspaces the binary test runs on the sparsity envelope
    qi_binary = qi_test_binary(spec.envelope, delta)
    qi_def = qi_test_definition(spec, cs.G, args.trials, seed)
    cert = certify_us(cs, spec, args.points, args.radius, seed, args.jobs)
    doc = {
        "qi_binary": qi_binary,
        "qi_binary_applies": spec.kind == SPARSITY,
        "strong_qi_randomized": qi_def.strong_qi,
        "qi_randomized": qi_def.qi,
        "us_certificate": cert.verdict,
        "us_evidence": cert.evidence,
        "subspace_kind": spec.kind,
        "subspace_dim": spec.dim,
    }
    if qi_def.witness is not None:
        w = qi_def.witness
        doc["qi_witness"] = {
            "property": w.property,
            "index": list(w.index),
            "residual": w.residual,
            "matrix": w.matrix,
        }
    config = {"trials": args.trials, "points": args.points, "radius": args.radius}
    doc["manifest"] = _manifest(args, problem, config, seed)
    _emit(doc, args.out)
    return EXIT_OK


def _run_start(cs, spec, cfg: OptimizerConfig, us_certified: bool) -> SynthesisReport:
    K0 = random_init(spec, cfg.init_range, cfg.seed)
    return projected_gradient_descent(cs, spec, K0, cfg, us_certified=us_certified)


def _start_summary(r: SynthesisReport) -> dict:
    return {
        "seed": r.seed,
        "J": r.J,
        "residual": r.residual,
        "iterations": r.iterations,
        "converged": r.converged,
        "certificate": r.certificate,
        "wall_time": r.wall_time,
    }


def cmd_synthesize(args) -> int:
    problem = load_problem(args.problem)
    cs, spec = problem.compact, problem.subspace
    seed = _seed(args, problem)
    if args.starts < 1:
        raise ValidationError("--starts must be >= 1", field="starts")
    try:
        base = OptimizerConfig(
            stop_tol=args.stop_tol, max_iters=args.max_iters, init_range=args.init_range
        )
    except ValueError as exc:
        raise ValidationError(str(exc), field="config") from exc

    us_cert = None
    qi_ok = spec.kind == SPARSITY and qi_test_binary(spec.pattern, struct_of(cs.G))
    if not qi_ok:
        us_cert = certify_us(cs, spec, args.points, 2.0 * base.init_range, seed, args.jobs)
    us_ok = us_cert is not None and us_cert.certifies_us

    cfgs = [OptimizerConfig(**{**asdict(base), "seed": seed + i}) for i in range(args.starts)]
    if args.jobs > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_run_start, cs, spec, c, us_ok) for c in cfgs]
            runs = [f.result() for f in futures]
    else:
        runs = [_run_start(cs, spec, c, us_ok) for c in cfgs]

    converged = [r for r in runs if r.converged]
    best = min(converged or runs, key=lambda r: r.J)
    all_converged = len(converged) == len(runs)

    doc = {
        "K": best.K,
        "J": best.J,
        "residual": best.residual,
        "iterations": best.iterations,
        "converged": all_converged,
        "best_seed": best.seed,
        "cost_trace": best.cost_trace,
        "starts": [_start_summary(r) for r in runs],
        "us_certificate": None if us_cert is None else asdict(us_cert),
    }
    if all_converged:
        doc["certificate"] = best.certificate
    if args.oracle:
        sol = solve_q_domain(cs, spec)
        doc["oracle"] = {"J_qp": sol.J, "gap": abs(best.J - sol.J), "label": sol.label}
    config = {**asdict(base), "starts": args.starts, "oracle": args.oracle, "points": args.points}
    config.pop("seed")
    doc["manifest"] = _manifest(args, problem, config, seed)
    _emit(doc, args.out)
    log.info("best J=%.10g after %d iterations", best.J, best.iterations)
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    if args.samples < 1:
        raise ValidationError("--samples must be >= 1", field="samples")
    problem = load_problem(args.problem)
    cs = problem.compact
    seed = _seed(args, problem)
    K = load_controller(args.controller, cs.shape)
    J = cost_k(cs, K)
    mc = monte_carlo_cost(cs, K, args.samples, seed, args.jobs)
    diff = mc.mean - J
    if mc.stderr > 0 and np.isfinite(mc.stderr):
        z = diff / mc.stderr
    else:
        z = 0.0 if abs(diff) <= 1e-9 * (1.0 + abs(J)) else float(np.sign(diff)) * float("inf")
    doc = {
        "analytic_J": J,
        "mc_mean": mc.mean,
        "mc_stderr": mc.stderr,
        "z_score": z,
        "samples": args.samples,
        "manifest": _manifest(args, problem, {"samples": args.samples}, seed),
    }
    _emit(doc, args.out)
    return EXIT_MC_MISMATCH if abs(z) > Z_LIMIT else EXIT_OK


# --- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit({"error": "UsageError", "message": message})
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem JSON file (example1.json / example2.json are bundled)")
    common.add_argument(
        "--seed", type=int, default=None,
        help="random seed; overrides the problem file's 'seed' (default 0 if neither is set)",
    )
    common.add_argument("--jobs", type=int, default=1, help="parallel workers (results do not depend on it)")
    common.add_argument("--out", default=None, help="write the JSON report here instead of stdout")

    parser = _Parser(prog="dlqg", description="Distributed finite-horizon LQG controller synthesis.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="check a problem file")

    p = sub.add_parser("analyze", parents=[common], help="QI and unique-stationarity tests")
    p.add_argument("--trials", type=int, default=200, help="randomized QI trials")
    p.add_argument("--points", type=int, default=200, help="Hessian sample points")
    p.add_argument("--radius", type=float, default=20.0, help="Hessian sampling radius")

    p = sub.add_parser("synthesize", parents=[common], help="projected gradient descent")
    p.add_argument("--starts", type=int, default=1, help="number of random starts")
    p.add_argument("--oracle", action="store_true", help="also solve the Q-domain problem")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--stop-tol", type=float, default=5e-5)
    p.add_argument("--init-range", type=float, default=10.0)
    p.add_argument("--points", type=int, default=200, help="Hessian sample points for the US test")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo check of J(K)")
    p.add_argument("controller", help='controller JSON ({"K": [[...]]} or a synthesize report)')
    p.add_argument("--samples", type=int, default=100_000)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("DLQG_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.ERROR),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._started = _now()
    if args.jobs < 1:
        _emit({"error": "UsageError", "message": "--jobs must be >= 1"})
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        _emit({"valid": False, **exc.to_dict()})
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
