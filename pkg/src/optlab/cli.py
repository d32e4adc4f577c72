"""Command-line surface: gen-data, train, compare, check-grad, shatter, conv-demo.

Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
input files), 2 runtime failure.  `train` writes trace CSVs with the
wall-time column zeroed so identical configs and seeds produce
byte-identical files; pass --timing to keep measured times.  `compare` runs
one problem under several solvers (OPTLAB_THREADS caps its worker threads)
and recomputes its summary from the per-solver trace files it wrote.
"""

import argparse
import concurrent.futures
import os
import sys

import numpy as np

from . import config as cfgmod
from . import datasets, problems, second_order, trace
from .errors import ConfigError, LibsvmParseError
from .learning_theory import shatter_check
from .trace import StopRule

GAPS = (1e-2, 1e-4, 1e-6, 1e-8)

# Figure-style demo input: 4x4 data, 2x2 antidiagonal filter
DEMO_DATA = [[1, 8, 0, 2], [9, 1, 7, 0], [2, 8, 0, 8], [1, 0, 9, 2]]
DEMO_FILTER = [[0, 1], [1, 0]]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage()}")


def _build_parser():
    parser = _Parser(prog="optlab", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p, out=True):
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--seed", type=int, help="seed override (u64)")
        if out:
            p.add_argument("--out", help="output path override")

    p = sub.add_parser("gen-data", help="write a dataset from a generator spec")
    common(p)
    p.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")

    p = sub.add_parser("train", help="run one solver config and write its trace")
    common(p)
    p.add_argument("--timing", action="store_true",
                   help="keep measured wall times in the trace")

    p = sub.add_parser("compare", help="run several solvers on one problem")
    common(p)
    p.add_argument("--solver", action="append", choices=cfgmod.SOLVERS,
                   help="solver to include (repeatable)")

    p = sub.add_parser("check-grad", help="finite-difference oracle check")
    common(p, out=False)

    p = sub.add_parser("shatter", help="shattering report for a points file")
    p.add_argument("--points", required=True, help="CSV file, one point per line")

    sub.add_parser("conv-demo", help="print the 2x2-filter convolution example")
    return parser


def _load(args):
    if getattr(args, "config", None):
        cfg = cfgmod.load_config(args.config)
    else:
        cfg = cfgmod.parse_config("")
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "out", None):
        cfg["out"] = args.out
    return cfg


def _cmd_gen_data(args):
    cfg = _load(args)
    out = cfg["out"]
    if not out:
        raise ValueError("gen-data needs --out (or 'out' in the config)")
    data = cfgmod.build_dataset(cfg)
    if args.format == "libsvm":
        datasets.write_libsvm(data, out)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            for i in range(data.n):
                cols = [repr(float(v)) for v in data.features[i]] \
                    + [repr(float(data.labels[i]))]
                fh.write(",".join(cols) + "\n")
    print(f"wrote {data.n} samples, d={data.d} -> {out}")
    return 0


def _cmd_train(args):
    cfg = _load(args)
    out = cfg["out"] or "trace.csv"
    problem = cfgmod.build_problem(cfg)
    result = cfgmod.run_solver(cfg, problem)
    records = result.trace if args.timing else trace.zero_wall(result.trace)
    trace.write_trace(records, out)
    last = result.trace[-1]
    print(f"{cfg['solver']}: {last.iter} iterations, fval={last.fval!r}, "
          f"gnorm={last.gnorm!r}, termination={result.termination} -> {out}")
    return 0


def _fstar(problem):
    polish = second_order.bfgs(
        problem, problem.initial_point(0),
        stop=StopRule(max_iter=500, grad_tol=1e-12))
    return min(r.fval for r in polish.trace)


def _cmd_compare(args):
    cfg = _load(args)
    if not args.config:
        raise ValueError("compare needs --config")
    solvers = args.solver or [cfg["solver"]]
    out = cfg["out"] or "compare.csv"
    stem = out[:-4] if out.endswith(".csv") else out
    problem = cfgmod.build_problem(cfg)
    fstar = cfg["fstar"] if cfg["fstar"] is not None else _fstar(problem)

    def run_one(index_name):
        index, name = index_name
        run_cfg = dict(cfg, solver=name)
        result = cfgmod.run_solver(run_cfg, problem,
                                   seed=cfgmod.derived_seed(cfg["seed"], index))
        path = f"{stem}.{name}.csv"
        trace.write_trace(trace.zero_wall(result.trace), path)
        return name, path

    env_threads = os.environ.get("OPTLAB_THREADS")
    workers = min(len(solvers), max(1, int(env_threads))) if env_threads \
        else len(solvers)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        paths = dict(pool.map(run_one, enumerate(solvers)))

    # summary is recomputed from the trace files, not from in-memory state
    header = ["solver"] + [f"evals_to_{gap:.0e}" for gap in GAPS] + ["final_fval"]
    lines = [",".join(header)]
    for name in solvers:
        records = trace.read_trace(paths[name])
        cells = [name]
        for gap in GAPS:
            hit = next((r.eff_grad_evals for r in records
                        if r.fval - fstar <= gap), float("inf"))
            cells.append(repr(float(hit)))
        cells.append(repr(float(records[-1].fval)))
        lines.append(",".join(cells))
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _central_diff_grad(problem, w, h=1e-6):
    grad = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        grad[i] = (problem.value(w + e) - problem.value(w - e)) / (2 * h)
    return grad


def _cmd_check_grad(args):
    cfg = _load(args)
    problem = cfgmod.build_problem(cfg)
    rng = np.random.default_rng(cfg["seed"])
    worst_grad = 0.0
    worst_hvp = 0.0
    for _ in range(5):
        w = rng.standard_normal(problem.dim) * 0.5
        g = problem.gradient(w)
        fd = _central_diff_grad(problem, w)
        worst_grad = max(worst_grad,
                         np.max(np.abs(g - fd)) / (1.0 + np.max(np.abs(g))))
        v = rng.standard_normal(problem.dim)
        hv = problem.hessian_vector_product(w, v)
        eps = 1e-6 / max(1.0, np.linalg.norm(v))
        fd_hv = (problem.gradient(w + eps * v) - problem.gradient(w - eps * v)) / (2 * eps)
        worst_hvp = max(worst_hvp,
                        np.max(np.abs(hv - fd_hv)) / (1.0 + np.max(np.abs(hv))))
    print(f"max relative gradient error vs central differences: {worst_grad:.3e}")
    print(f"max relative HVP error vs gradient differences:     {worst_hvp:.3e}")
    if worst_grad > 1e-5 or worst_hvp > 1e-4:
        print("FAIL: finite-difference check exceeded tolerance", file=sys.stderr)
        return 2
    return 0


def _cmd_shatter(args):
    with open(args.points, encoding="utf-8") as fh:
        pts = [[float(tok) for tok in line.replace(",", " ").split()]
               for line in fh if line.strip()]
    points = np.array(pts)
    shattered, failing = shatter_check(points)
    total = 2 ** points.shape[0]
    print(f"{points.shape[0]} points in R^{points.shape[1]}: "
          f"{total - len(failing)}/{total} labelings separable")
    if shattered:
        print("shattered: yes")
    else:
        print("shattered: no")
        for labs in failing:
            print("  inseparable labeling: " + " ".join(f"{v:+d}" for v in labs))
    return 0


def _cmd_conv_demo(_args):
    out = problems.conv2d_valid(np.array(DEMO_DATA, dtype=float),
                                np.array(DEMO_FILTER, dtype=float))
    print("data:")
    for row in DEMO_DATA:
        print("  " + " ".join(f"{v:2d}" for v in row))
    print("filter:")
    for row in DEMO_FILTER:
        print("  " + " ".join(f"{v:2d}" for v in row))
    print("feature map:")
    for row in out:
        print("  " + " ".join(f"{int(v):2d}" for v in row))
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "compare": _cmd_compare,
    "check-grad": _cmd_check_grad,
    "shatter": _cmd_shatter,
    "conv-demo": _cmd_conv_demo,
}


def run_cli(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(str(err), file=sys.stderr)
        return 1
    if not args.command:
        print(parser.format_usage(), file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, LibsvmParseError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - runtime failures exit 2
        print(f"runtime failure: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
