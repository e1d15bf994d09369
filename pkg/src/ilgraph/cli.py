"""Command-line front door.

Subcommands: solve (graph + labels CSV), toy2d (the grid benchmark),
inpaint (PGM images), gamma (convergence study). Every run writes its
fully resolved configuration next to the outputs. Exit codes: 0 success,
1 input error, 2 solver non-convergence (partial results still written).
"""

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import gamma as gamma_mod
from . import inpaint as inpaint_mod
from . import toy2d as toy_mod
from .graph import InvalidParameterError, WeightGraph
from .linalg import DisconnectedGraphError
from .solver import (LabelAssignment, SolverConfig, gl_solve, il_solve,
                     nonlocal_inf_metric, objective, wnll_solve)


class InputError(Exception):
    pass


def read_labels_csv(path) -> LabelAssignment:
    indices, values = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError("expected two fields")
                indices.append(int(float(parts[0])))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: malformed row ({exc})") from exc
    if not indices:
        raise InputError(f"{path}: no labels found")
    try:
        return LabelAssignment(np.array(indices), np.array(values))
    except InvalidParameterError as exc:
        raise InputError(f"{path}: {exc}") from exc


def read_graph_csv(path) -> WeightGraph:
    try:
        return WeightGraph.from_csv(path)
    except (InvalidParameterError, ValueError, OSError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_solution_csv(path, u):
    np.savetxt(path, np.column_stack([np.arange(len(u)), u]),
               delimiter=",", fmt=["%d", "%.17g"])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"not serializable: {type(obj)}")


def write_report(path, report):
    def clean(x):
        if isinstance(x, float) and math.isinf(x):
            return "inf"
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x

    with open(path, "w") as fh:
        json.dump(clean(report), fh, indent=2, default=_json_default)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("ILGRAPH_OUT", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _limit_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def cmd_solve(args) -> int:
    out = _out_dir(args)
    graph = read_graph_csv(args.graph)
    labels = read_labels_csv(args.labels)
    cfg = SolverConfig(alpha=args.alpha, seed=args.seed)
    resolved = {"command": "solve", "method": args.method,
                "graph": str(args.graph), "labels": str(args.labels),
                **dataclasses.asdict(cfg)}
    write_report(out / "config.json", resolved)
    t0 = time.perf_counter()
    report = {"method": args.method, "config": resolved}
    converged = True
    if args.method == "il":
        u, diag = il_solve(graph, labels, cfg)
        converged = diag.converged
        report.update(objective=diag.objective, c_star=diag.c_star,
                      iterations=diag.iterations, converged=diag.converged,
                      primal_residual=diag.primal_residual,
                      objective_history=diag.history.tolist())
    else:
        solver = gl_solve if args.method == "gl" else wnll_solve
        u, lin = solver(graph, labels, cfg, full_output=True)
        converged = lin.converged
        report.update(objective=objective(u, graph, cfg.alpha),
                      converged=lin.converged,
                      linear_iterations=lin.iterations,
                      relative_residual=lin.relative_residual)
    report["metric"] = nonlocal_inf_metric(u, graph)
    report["seconds"] = time.perf_counter() - t0
    write_solution_csv(out / "solution.csv", u)
    write_report(out / "report.json", report)
    return 0 if converged else 2


def cmd_toy2d(args) -> int:
    out = _out_dir(args)
    methods = ("gl", "wnll", "il") if args.method == "all" else (args.method,)
    cfg = SolverConfig(alpha=args.alpha, seed=args.seed)
    resolved = {"command": "toy2d", "grid": args.grid, "sigma": args.sigma,
                "k": args.k, "methods": list(methods),
                **dataclasses.asdict(cfg)}
    write_report(out / "config.json", resolved)
    t0 = time.perf_counter()
    problem = toy_mod.build_toy2d(args.grid, args.sigma, args.k)
    metrics, solutions, diag = toy_mod.run_toy2d(problem, methods, cfg)
    rows = [(name, metrics[name]) for name in metrics]
    with open(out / "metrics.csv", "w") as fh:
        fh.write("method,nonlocal_inf_metric\n")
        for name, val in rows:
            fh.write(f"{name},{val:.10g}\n")
    for name, u in solutions.items():
        write_solution_csv(out / f"solution_{name}.csv", u)
    report = {"config": resolved, "metrics": metrics,
              "seconds": time.perf_counter() - t0}
    if diag is not None:
        report.update(c_star=diag.c_star, iterations=diag.iterations,
                      converged=diag.converged)
    write_report(out / "report.json", report)
    return 0 if (diag is None or diag.converged) else 2


def cmd_inpaint(args) -> int:
    out = _out_dir(args)
    img = inpaint_mod.read_pgm(args.image)
    if args.mask_file:
        mask = inpaint_mod.SampleMask.from_csv(args.mask_file, img.shape)
    elif args.mask_density is not None:
        mask = inpaint_mod.SampleMask.random(img.shape, args.mask_density,
                                             seed=args.seed)
    else:
        raise InputError("one of --mask-density or --mask-file is required")
    cfg = inpaint_mod.InpaintConfig(
        method=args.method, alpha=args.alpha,
        patch_size=(args.patch, args.patch), k=args.k, k_sigma=args.k_sigma,
        outer_iters=args.outer_iters, seed=args.seed)
    resolved = {"command": "inpaint", "image": str(args.image),
                "oracle_weights": args.oracle_weights,
                "mask_density": args.mask_density, "mask_file": args.mask_file,
                "method": cfg.method, "alpha": cfg.alpha,
                "patch": args.patch, "k": cfg.k, "k_sigma": cfg.k_sigma,
                "outer_iters": cfg.outer_iters, "seed": cfg.seed}
    write_report(out / "config.json", resolved)
    t0 = time.perf_counter()
    if args.oracle_weights:
        clear = inpaint_mod.read_pgm(args.oracle_weights)
        result = inpaint_mod.oracle_weight_inpaint(clear, mask, cfg)
        truth = clear
    else:
        result = inpaint_mod.inpaint(img, mask, cfg)
        truth = inpaint_mod.read_pgm(args.ground_truth) if args.ground_truth else None
    inpaint_mod.write_pgm(result, out / "out.pgm")
    mask.to_csv(out / "mask.csv")
    report = {"config": resolved, "seconds": time.perf_counter() - t0}
    if truth is not None:
        report["psnr_db"] = inpaint_mod.psnr(result, truth)
    write_report(out / "report.json", report)
    return 0


def cmd_gamma(args) -> int:
    out = _out_dir(args)
    if args.trials < 1:
        raise InputError("--trials must be a positive integer")
    n_values = [int(v) for v in args.n_values.split(",")]
    if args.problem == "1d":
        problem = gamma_mod.interval_benchmark()
    else:
        problem = gamma_mod.circle_benchmark()
    schedule = gamma_mod.BandwidthSchedule(n_values, r_adjust=args.r_adjust,
                                           dim=problem.intrinsic_dim)
    _write_toml(out / "config.toml", {
        "command": "gamma", "problem": args.problem, "trials": args.trials,
        "seed": args.seed, "r_adjust": args.r_adjust,
        "n_values": n_values})
    rows = gamma_mod.convergence_study(problem, schedule, args.trials,
                                       seed=args.seed)
    gamma_mod.rows_to_csv(rows, out / "study.csv")
    return 0


def _write_toml(path, mapping):
    with open(path, "w") as fh:
        for key, val in mapping.items():
            if isinstance(val, str):
                fh.write(f'{key} = "{val}"\n')
            elif isinstance(val, bool):
                fh.write(f"{key} = {str(val).lower()}\n")
            elif isinstance(val, list):
                fh.write(f"{key} = [{', '.join(str(v) for v in val)}]\n")
            else:
                fh.write(f"{key} = {val}\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="ilgraph")
    parser.add_argument("--out", default=None,
                        help="output directory (env ILGRAPH_OUT overrides the default)")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal BLAS parallelism")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a graph/labels problem from CSV")
    p.add_argument("graph")
    p.add_argument("labels")
    p.add_argument("--method", choices=["gl", "wnll", "il"], default="il")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("toy2d", help="run the 2-D grid benchmark")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--method", choices=["gl", "wnll", "il", "all"], default="all")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy2d)

    p = sub.add_parser("inpaint", help="inpaint a PGM image")
    p.add_argument("image")
    p.add_argument("--mask-density", type=float, default=None)
    p.add_argument("--mask-file", default=None)
    p.add_argument("--method", choices=["gl", "wnll", "il"], default="il")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--patch", type=int, default=11)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--k-sigma", type=int, default=20)
    p.add_argument("--outer-iters", type=int, default=8)
    p.add_argument("--oracle-weights", default=None,
                   help="clear image supplying the patch weights (single solve)")
    p.add_argument("--ground-truth", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("gamma", help="run the convergence study")
    p.add_argument("--problem", choices=["1d", "circle"], default="1d")
    p.add_argument("--n-values", default="125,250,500,1000,2000")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--r-adjust", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gamma)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    try:
        return args.func(args)
    except (InputError, InvalidParameterError, FileNotFoundError,
            DisconnectedGraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
