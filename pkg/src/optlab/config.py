"""Flat ``key = value`` experiment configuration.

Every key is validated against the schema below; unknown keys are rejected
by name.  Blank lines and ``#`` comments are ignored.  Keys left out fall
back to the documented defaults, so a minimal config can be just a solver
name.
"""

import numpy as np

from . import datasets, first_order, problems, second_order, variance_reduced
from .errors import ConfigError
from .trace import StopRule

SOLVERS = ("gd", "nesterov", "ista", "fista", "sgd", "svrg", "sarah", "saga",
           "dynamic_batch_sgd", "bfgs", "lbfgs", "slbfgs", "newton_cg",
           "trust_region")


def _bool(raw):
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError("expected a boolean")


def _int_list(raw):
    return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)


def _str_list(raw):
    return tuple(tok for tok in raw.replace(" ", "").split(",") if tok)


def _choice(*options):
    def cast(raw):
        if raw not in options:
            raise ValueError(f"expected one of {options}")
        return raw
    return cast


def _memory(raw):
    return "full" if raw == "full" else int(raw)


# key -> (caster, default); None defaults mean "derived later"
SCHEMA = {
    "model": (_choice("linear", "mlp"), "linear"),
    "layer_sizes": (_int_list, None),
    "activations": (_str_list, None),
    "loss": (_choice(*problems.LOSSES), "logistic"),
    "regularizer": (_choice("none", "l1", "l2"), "l2"),
    "lambda": (float, 0.01),
    "data": (_choice("two_gaussians", "given_separator", "libsvm"), "two_gaussians"),
    "data_path": (str, None),
    "map_zero_one": (_bool, False),
    "n": (int, 200),
    "d": (int, 10),
    "margin": (float, 2.0),
    "noise_rate": (float, 0.0),
    "row_normalize": (_bool, False),
    "append_bias": (_bool, False),
    "data_seed": (int, None),
    "solver": (_choice(*SOLVERS), "gd"),
    "alpha": (float, None),
    "schedule": (_choice("constant", "harmonic"), "constant"),
    "k0": (float, 1.0),
    "batch_size": (int, 16),
    "momentum": (float, 0.0),
    "sampling": (_choice("replacement", "epoch_shuffle"), "replacement"),
    "inner_loop": (int, None),
    "outer_iters": (int, 20),
    "outer_select": (_choice("uniform", "last"), None),
    "growth": (float, 2.0),
    "s0": (int, 2),
    "epochs": (int, 10),
    "iters": (int, None),
    "memory": (_memory, 10),
    "pair_strategy": (_choice(*second_order.PAIR_STRATEGIES), "same_batch"),
    "overlap_fraction": (float, 0.5),
    "mu1": (float, 0.25),
    "mu2": (float, 4.0),
    "hessian_batch": (int, None),
    "curvature": (_choice("hessian", "gauss_newton", "exact", "subsampled"), None),
    "damping": (float, None),
    "cg_max_iter": (int, 30),
    "sample_constant": (float, None),
    "delta0": (float, 1.0),
    "eta1": (float, 0.1),
    "eta2": (float, 0.75),
    "shrink": (float, 0.5),
    "grow": (float, 2.0),
    "max_iter": (int, 100),
    "grad_tol": (float, None),
    "target_gap": (float, None),
    "fstar": (float, None),
    "seed": (int, 0),
    "init_seed": (int, None),
    "record_every": (int, 1),
    "out": (str, None),
}


def parse_config(text):
    """Validate ``key = value`` lines against the schema; unknown keys fail."""
    cfg = {key: default for key, (_, default) in SCHEMA.items()}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep or not key:
            raise ConfigError(key or f"line {line_no}", "expected 'key = value'")
        if key not in SCHEMA:
            raise ConfigError(key, "unknown key")
        caster, _ = SCHEMA[key]
        try:
            cfg[key] = caster(value)
        except (ValueError, TypeError) as err:
            raise ConfigError(key, f"bad value {value!r} ({err})") from None
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_dataset(cfg):
    seed = cfg["data_seed"] if cfg["data_seed"] is not None else cfg["seed"]
    if cfg["data"] == "libsvm":
        if not cfg["data_path"]:
            raise ConfigError("data_path", "required when data = libsvm")
        return datasets.read_libsvm(cfg["data_path"], map_zero_one=cfg["map_zero_one"])
    return datasets.gen_synthetic(
        cfg["data"], cfg["n"], cfg["d"], seed,
        margin=cfg["margin"], noise_rate=cfg["noise_rate"],
        row_normalize=cfg["row_normalize"], append_bias=cfg["append_bias"])


def build_problem(cfg, data=None):
    if data is None:
        data = build_dataset(cfg)
    if cfg["model"] == "linear":
        model = problems.LinearModel()
    else:
        sizes = cfg["layer_sizes"]
        if sizes is None:
            raise ConfigError("layer_sizes", "required when model = mlp")
        model = problems.mlp(sizes, cfg["activations"])
    reg = problems.Regularizer(cfg["regularizer"], cfg["lambda"])
    try:
        return problems.Problem(model, cfg["loss"], reg, data)
    except ValueError as err:
        raise ConfigError("model", str(err)) from None


def lipschitz_bound(problem):
    """The working smoothness estimate max_i ||x_i||^2 (+ 2 lambda for l2)."""
    bound = float(np.max(np.sum(problem.data.features ** 2, axis=1)))
    if problem.regularizer.kind == "l2":
        bound += 2.0 * problem.regularizer.lam
    return bound


def _schedule(cfg, problem):
    alpha = cfg["alpha"]
    if alpha is None:
        alpha = 1.0 / lipschitz_bound(problem)
    if cfg["schedule"] == "harmonic":
        return first_order.StepSchedule.harmonic(alpha, cfg["k0"])
    return first_order.StepSchedule.constant(alpha)


def _stop(cfg):
    return StopRule(max_iter=cfg["max_iter"], grad_tol=cfg["grad_tol"],
                    target_gap=cfg["target_gap"], fstar=cfg["fstar"])


def run_solver(cfg, problem, seed=None):
    """Dispatch one configured run; ``seed`` overrides the config seed."""
    seed = cfg["seed"] if seed is None else seed
    solver = cfg["solver"]
    init_seed = cfg["init_seed"] if cfg["init_seed"] is not None else seed
    w0 = problem.initial_point(init_seed)
    sched = _schedule(cfg, problem)
    stop = _stop(cfg)
    alpha = sched.alpha
    rec = cfg["record_every"]
    if solver in ("gd", "nesterov", "ista", "fista"):
        variant = "plain" if solver == "gd" else solver
        return first_order.gradient_descent(problem, w0, sched, variant=variant,
                                            stop=stop, record_every=rec)
    if solver == "sgd":
        return first_order.sgd(problem, w0, sched, cfg["batch_size"],
                               momentum=cfg["momentum"], seed=seed, stop=stop,
                               sampling=cfg["sampling"], record_every=rec)
    if solver == "svrg":
        return variance_reduced.svrg(
            problem, w0, alpha, cfg["batch_size"], inner_loop=cfg["inner_loop"],
            seed=seed, outer_iters=cfg["outer_iters"],
            outer_select=cfg["outer_select"] or "uniform", record_every=rec)
    if solver == "sarah":
        return variance_reduced.sarah(
            problem, w0, alpha, cfg["batch_size"], inner_loop=cfg["inner_loop"],
            seed=seed, outer_iters=cfg["outer_iters"],
            outer_select=cfg["outer_select"] or "last", record_every=rec)
    if solver == "saga":
        iters = cfg["iters"] if cfg["iters"] is not None else cfg["max_iter"]
        return variance_reduced.saga(problem, w0, alpha, seed=seed, iters=iters,
                                     record_every=cfg["record_every"])
    if solver == "dynamic_batch_sgd":
        return variance_reduced.dynamic_batch_sgd(
            problem, w0, alpha, cfg["growth"], s0=cfg["s0"], seed=seed,
            epochs=cfg["epochs"], record_every=rec)
    if solver in ("bfgs", "lbfgs"):
        memory = "full" if solver == "bfgs" else cfg["memory"]
        return second_order.bfgs(problem, w0, memory=memory, stop=stop,
                                 record_every=rec)
    if solver == "slbfgs":
        return second_order.stochastic_lbfgs(
            problem, w0, sched, cfg["batch_size"],
            pair_strategy=cfg["pair_strategy"],
            m=cfg["memory"] if cfg["memory"] != "full" else 10, seed=seed,
            stop=stop, overlap_fraction=cfg["overlap_fraction"],
            mu1=cfg["mu1"], mu2=cfg["mu2"], hessian_batch=cfg["hessian_batch"],
            record_every=rec)
    if solver == "newton_cg":
        curv = cfg["curvature"] or "hessian"
        if curv not in ("hessian", "gauss_newton"):
            raise ConfigError("curvature", "newton_cg needs hessian or gauss_newton")
        return second_order.newton_cg(problem, w0, curvature=curv,
                                      damping=cfg["damping"], stop=stop,
                                      cg_max_iter=cfg["cg_max_iter"],
                                      record_every=rec)
    if solver == "trust_region":
        curv = cfg["curvature"] or "exact"
        if curv not in ("exact", "subsampled"):
            raise ConfigError("curvature", "trust_region needs exact or subsampled")
        tr = second_order.TrustRegionState(
            radius=cfg["delta0"], eta1=cfg["eta1"], eta2=cfg["eta2"],
            shrink=cfg["shrink"], grow=cfg["grow"])
        return second_order.trust_region(
            problem, w0, curvature=curv, sample_constant=cfg["sample_constant"],
            tr=tr, stop=stop, seed=seed, cg_max_iter=cfg["cg_max_iter"],
            record_every=rec)
    raise ConfigError("solver", f"unknown solver {solver!r}")


def derived_seed(seed, index):
    """Per-worker seed stream for compare: seed XOR solver index."""
    return (int(seed) ^ int(index)) & (2 ** 64 - 1)
