"""Command-line interface.

Subcommands cover the two projection routes (explicit 1-D, quadratic
program), martingale transport (exact and entropic), convex-order chains,
the Monte-Carlo experiment pipelines, and a linear-programming self-test.

Measure files are CSV with a header row: a weight column ``w`` and atom
coordinates in ``x`` (one-dimensional) or ``x1 .. xd``.  Lines starting
with ``#`` are ignored.

Exit codes: 0 success; 2 convex-order infeasibility; 3 solver failure or
non-certified result; 4 bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import chain as chain_mod
from . import experiments as ex
from . import lp, mot, qp_project, transport
from .errors import ConvexOrderError, SolverError
from .measures import DiscreteMeasure
from .project1d import project_down, project_up

EXIT_OK = 0
EXIT_ORDER = 2
EXIT_SOLVER = 3
EXIT_BAD_INPUT = 4


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with EXIT_BAD_INPUT."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


# -- measure file I/O --------------------------------------------------------


def _read_measure(path):
    with open(path, newline="") as fh:
        rows = [
            row
            for row in csv.reader(fh)
            if row and not row[0].lstrip().startswith("#")
        ]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one atom row")
    header = [name.strip() for name in rows[0]]
    if "w" not in header:
        raise ValueError(f"{path}: missing weight column 'w'")
    if "x" in header:
        xcols = [header.index("x")]
    else:
        xcols = [
            k
            for _, k in sorted(
                (int(n[1:]), k)
                for k, n in enumerate(header)
                if re.fullmatch(r"x\d+", n)
            )
        ]
    if not xcols:
        raise ValueError(f"{path}: missing atom columns ('x' or 'x1'..'xd')")
    try:
        body = np.array([[float(cell) for cell in row] for row in rows[1:]])
    except ValueError:
        raise ValueError(f"{path}: non-numeric cell in a data row") from None
    if body.ndim != 2 or body.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return DiscreteMeasure(body[:, xcols], body[:, header.index("w")])


def _write_measure(path, measure):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["x"] if measure.dim == 1 else [f"x{k + 1}" for k in range(measure.dim)]
    with open(path, "w", newline="") as fh:
        fh.write("# schema=measure-v1\n")
        writer = csv.writer(fh)
        writer.writerow(header + ["w"])
        for atom, weight in zip(measure.atoms, measure.weights):
            writer.writerow([repr(float(v)) for v in atom] + [repr(float(weight))])
    return path


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value)!r}")


def _emit(payload):
    print(json.dumps(payload, indent=2, default=_jsonable))


def _config(args, default_runs, default_sizes=None):
    sizes = getattr(args, "sizes", None) or default_sizes or (100,)
    return ex.ExperimentConfig(
        sizes=tuple(sizes),
        runs=args.runs if args.runs is not None else default_runs,
        seed=args.seed,
        rho=getattr(args, "rho", 2.0),
        tol=args.tol,
        out_dir=args.out_dir,
    )


# -- subcommand handlers -----------------------------------------------------


def _cmd_project1d(args):
    mu = _read_measure(args.mu)
    nu = _read_measure(args.nu)
    if args.direction == "down":
        result = project_down(mu, nu)
    else:
        result = project_up(nu, mu)
    payload = {
        "direction": args.direction,
        "rho": args.rho,
        "distance": result.distance_for(args.rho),
        "atoms": result.projected.n,
    }
    if args.out:
        payload["out"] = str(_write_measure(args.out, result.projected))
    if args.dump_hull:
        hull_path = Path(args.dump_hull)
        hull_path.parent.mkdir(parents=True, exist_ok=True)
        with open(hull_path, "w", newline="") as fh:
            fh.write("# schema=hull-v1\n")
            writer = csv.writer(fh)
            writer.writerow(["q", "psi"])
            for q, v in zip(result.psi.nodes, result.psi.values):
                writer.writerow([repr(float(q)), repr(float(v))])
        payload["hull"] = str(hull_path)
    _emit(payload)
    return EXIT_OK


def _cmd_project_qp(args):
    mu = _read_measure(args.mu)
    nu = _read_measure(args.nu)
    result = qp_project.project_qp(
        mu, nu, tol_gap=args.tol, max_iter=args.max_iter, rho=args.rho
    )
    report = result.report
    payload = {
        "objective": report.objective,
        "distance": float(np.sqrt(max(report.objective, 0.0))),
        "gap": report.gap,
        "iterations": report.iterations,
        "certified": report.certified,
        "marginal_residuals": list(report.marginal_residuals),
        "wall_time": report.wall_time,
        "backend": report.notes.get("backend"),
        "vertices": report.notes.get("vertices"),
    }
    if args.out:
        payload["out"] = str(_write_measure(args.out, result.projected))
    _emit(payload)
    return EXIT_OK if report.certified else EXIT_SOLVER


def _cmd_mot(args):
    mu = _read_measure(args.mu)
    nu = _read_measure(args.nu)
    params = {"rho": args.cost_rho} if args.payoff == "coordinatewise-power" else {}
    cost = mot.payoff(args.payoff, **params)(mu.atoms, nu.atoms)
    problem = mot.MotProblem(mu, nu, cost, sense=args.sense)
    if args.method == "exact":
        solution = mot.solve_exact(problem)
    elif args.method == "entropic":
        solution = mot.solve_entropic(problem, args.epsilon, max_sweeps=args.max_sweeps)
    else:
        solution = mot.solve_entropic_anneal(problem, max_sweeps=args.max_sweeps)
    payload = {
        "objective": solution.objective,
        "method": solution.method,
        "sense": args.sense,
        "payoff": args.payoff,
        "martingale_residual": solution.martingale_residual,
        "converged": solution.converged,
        "sweeps": solution.sweeps,
    }
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        pi = solution.coupling.matrix
        with open(out, "w", newline="") as fh:
            fh.write("# schema=coupling-v1\n")
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "mass"])
            for i, j in zip(*np.nonzero(pi)):
                writer.writerow([int(i), int(j), repr(float(pi[i, j]))])
        payload["out"] = str(out)
    _emit(payload)
    return EXIT_OK if solution.converged else EXIT_SOLVER


def _cmd_chain(args):
    if len(args.inputs) < 2:
        raise ValueError("chain needs at least two measure files")
    measures = [_read_measure(p) for p in args.inputs]
    if args.direction == "backward":
        result = chain_mod.backward_chain(
            measures, rho=args.rho, best_effort=args.best_effort
        )
    else:
        result = chain_mod.forward_chain(measures, best_effort=args.best_effort)
    out_dir = Path(args.out_dir)
    paths = []
    for k, m in enumerate(result.measures):
        paths.append(str(_write_measure(out_dir / f"link_{k + 1}.csv", m)))
    payload = {
        "direction": result.direction,
        "links": result.reports,
        "outputs": paths,
    }
    report_path = out_dir / "chain_report.json"
    report_path.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")
    payload["report"] = str(report_path)
    _emit(payload)
    return EXIT_OK


def _cmd_exp_convergence(args):
    cfg = _config(args, default_runs=10, default_sizes=ex.CONVERGENCE_SIZES)
    rows = ex.exp_convergence(cfg)
    _emit(
        {
            "csv": str(cfg.out_dir / "convergence.csv"),
            "rows": len(rows),
            "slope_down": ex.median_loglog_slope(rows, "dist_down"),
            "slope_up": ex.median_loglog_slope(rows, "dist_up"),
        }
    )
    return EXIT_OK


def _cmd_exp_table1(args):
    cfg = _config(args, default_runs=1, default_sizes=ex.TABLE1_SIZES)
    rows = ex.exp_table1(cfg)
    _emit({"csv": str(cfg.out_dir / "table1.csv"), "table": rows})
    return EXIT_OK


def _cmd_exp_2d(args):
    cfg = _config(args, default_runs=30, default_sizes=(args.size,))
    _emit(ex.exp_2d_explicit(cfg))
    return EXIT_OK


def _cmd_exp_bestof(args):
    cfg = _config(args, default_runs=30, default_sizes=(args.size,))
    _emit(ex.exp_bestof(cfg))
    return EXIT_OK


def _cmd_lp_selftest(args):
    """Random transportation instances solved three ways.

    Route A is the dedicated transportation simplex, route B the general
    revised simplex on the same LP, route C (when scipy is importable)
    scipy's HiGHS interface.  Objectives must agree to 1e-7 relative and
    plans must satisfy the marginals to 1e-9.
    """
    rng = np.random.default_rng(args.seed)
    failures = 0
    max_gap_general = 0.0
    max_gap_scipy = 0.0
    try:
        from scipy.optimize import linprog
    except ImportError:  # pragma: no cover - scipy is a hard dependency
        linprog = None
    for _ in range(args.cases):
        n_i = int(rng.integers(2, 8))
        n_j = int(rng.integers(2, 8))
        p = rng.random(n_i) + 0.05
        q = rng.random(n_j) + 0.05
        p /= p.sum()
        q /= q.sum()
        cost = rng.standard_normal((n_i, n_j))
        plan = transport.solve_transport(p, q, cost)
        obj = float(np.sum(plan * cost))
        res_p = np.max(np.abs(plan.sum(axis=1) - p))
        res_q = np.max(np.abs(plan.sum(axis=0) - q))
        if max(res_p, res_q) > 1e-9 or np.min(plan) < -1e-12:
            failures += 1
            continue
        mu = DiscreteMeasure(np.arange(n_i, dtype=float), p)
        nu = DiscreteMeasure(np.arange(n_j, dtype=float), q)
        general = lp.ot_plan(mu, nu, cost)
        gap = abs(float(np.sum(general.matrix * cost)) - obj) / (1.0 + abs(obj))
        max_gap_general = max(max_gap_general, gap)
        if gap > 1e-7:
            failures += 1
            continue
        if linprog is not None:
            a_eq = np.zeros((n_i + n_j, n_i * n_j))
            for i in range(n_i):
                a_eq[i, i * n_j : (i + 1) * n_j] = 1.0
            for j in range(n_j):
                a_eq[n_i + j, j::n_j] = 1.0
            ref = linprog(
                cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]), method="highs"
            )
            gap = abs(ref.fun - obj) / (1.0 + abs(obj))
            max_gap_scipy = max(max_gap_scipy, gap)
            if gap > 1e-7:
                failures += 1
    _emit(
        {
            "cases": args.cases,
            "backend": transport.BACKEND,
            "failures": failures,
            "max_gap_general_simplex": max_gap_general,
            "max_gap_scipy": max_gap_scipy if linprog is not None else None,
        }
    )
    return EXIT_OK if failures == 0 else EXIT_SOLVER


# -- parser ------------------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=20240, help="base RNG seed")
    common.add_argument(
        "--out-dir", default="out", help="directory for emitted artifacts"
    )
    common.add_argument(
        "--tol", type=float, default=None, help="solver tolerance override"
    )
    common.add_argument(
        "--runs", type=int, default=None, help="Monte-Carlo repetitions"
    )

    parser = _Parser(
        prog="cxproj",
        description="Wasserstein projections onto convex-order constraint "
        "sets and discrete martingale optimal transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser(
        "project1d",
        parents=[common],
        help="explicit 1-D projection (down: MU onto the set dominated by "
        "NU; up: NU onto the set dominating MU)",
    )
    p1.add_argument("--mu", required=True, help="measure CSV (columns x,w)")
    p1.add_argument("--nu", required=True, help="measure CSV (columns x,w)")
    p1.add_argument("--direction", choices=("down", "up"), required=True)
    p1.add_argument("--rho", type=float, default=2.0, help="Wasserstein index")
    p1.add_argument("--out", help="write the projected measure here")
    p1.add_argument("--dump-hull", help="write the hull nodes here")
    p1.set_defaults(func=_cmd_project1d)

    pq = sub.add_parser(
        "project-qp",
        parents=[common],
        help="quadratic-program projection of MU onto the set dominated by NU",
    )
    pq.add_argument("--mu", required=True)
    pq.add_argument("--nu", required=True)
    pq.add_argument("--rho", type=float, default=2.0)
    pq.add_argument("--max-iter", type=int, default=50_000)
    pq.add_argument("--out", help="write the projected measure here")
    pq.set_defaults(func=_cmd_project_qp)

    pm = sub.add_parser(
        "mot", parents=[common], help="martingale optimal transport between MU and NU"
    )
    pm.add_argument("--mu", required=True)
    pm.add_argument("--nu", required=True)
    pm.add_argument(
        "--payoff",
        choices=("coordinatewise-power", "best-of", "call-spread"),
        default="coordinatewise-power",
    )
    pm.add_argument(
        "--cost-rho", type=float, default=2.5, help="coordinatewise-power exponent"
    )
    pm.add_argument("--sense", choices=("min", "max"), default="min")
    pm.add_argument("--method", choices=("exact", "entropic", "anneal"), default="exact")
    pm.add_argument(
        "--epsilon", type=float, default=0.1, help="entropic regularization"
    )
    pm.add_argument("--max-sweeps", type=int, default=500)
    pm.add_argument("--out", help="write the coupling (i,j,mass) here")
    pm.set_defaults(func=_cmd_mot)

    pc = sub.add_parser(
        "chain", parents=[common], help="make a list of measures convex-ordered"
    )
    pc.add_argument("--dir", dest="direction", choices=("backward", "forward"),
                    required=True)
    pc.add_argument("--inputs", nargs="+", required=True, help="measure CSVs, in order")
    pc.add_argument("--rho", type=float, default=2.0)
    pc.add_argument(
        "--best-effort",
        action="store_true",
        help="keep going past non-certified links",
    )
    pc.set_defaults(func=_cmd_chain)

    pe = sub.add_parser(
        "exp-convergence", parents=[common], help="projection error vs sample size"
    )
    pe.add_argument("--sizes", type=int, nargs="+", help="sample sizes")
    pe.set_defaults(func=_cmd_exp_convergence)

    pt = sub.add_parser(
        "exp-table1", parents=[common], help="explicit vs QP projection distances"
    )
    pt.add_argument("--sizes", type=int, nargs="+", help="sample sizes")
    pt.set_defaults(func=_cmd_exp_table1)

    p2 = sub.add_parser(
        "exp-2d", parents=[common], help="2-D uniform-square martingale transport"
    )
    p2.add_argument("--size", type=int, default=100, help="sample size I")
    p2.set_defaults(func=_cmd_exp_2d)

    pb = sub.add_parser(
        "exp-bestof", parents=[common], help="best-of option price bounds"
    )
    pb.add_argument("--size", type=int, default=100, help="sample size I")
    pb.set_defaults(func=_cmd_exp_bestof)

    ps = sub.add_parser(
        "lp-selftest",
        parents=[common],
        help="cross-check the transportation simplex against the general "
        "simplex and scipy",
    )
    ps.add_argument("--cases", type=int, default=50)
    ps.set_defaults(func=_cmd_lp_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvexOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORDER
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
