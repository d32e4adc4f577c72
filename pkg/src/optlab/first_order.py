"""Deterministic and stochastic first-order solvers.

gradient_descent covers the plain step w <- w - alpha_k grad F(w), Nesterov's
two-sequence acceleration, and the proximal variants (ista/fista) for l1 or
unregularized objectives.  sgd is minibatch stochastic gradient with the
momentum recursion v <- eta v + (1 - eta) g, w <- w - alpha v and a seeded
batch stream; its objective values are not monotone and it stops on max_iter
only.
"""

from dataclasses import dataclass

import numpy as np

from .problems import prox_step
from .trace import EvalCounter, RunResult, StopRule, Stopwatch, TraceRecord

GD_VARIANTS = ("plain", "nesterov", "ista", "fista")


@dataclass(frozen=True)
class StepSchedule:
    """constant(alpha) or harmonic(alpha0, k0) with alpha_k = alpha0/(1 + k/k0).

    The harmonic schedule satisfies the Robbins-Monro conditions: the step
    sums diverge while the squared steps sum finitely.
    """

    kind: str
    alpha: float
    k0: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.alpha <= 0.0:
            raise ValueError("step size must be positive")
        if self.kind == "harmonic" and self.k0 <= 0.0:
            raise ValueError("harmonic schedule needs k0 > 0")

    @classmethod
    def constant(cls, alpha):
        return cls("constant", alpha)

    @classmethod
    def harmonic(cls, alpha0, k0):
        return cls("harmonic", alpha0, k0)


def step_size(schedule, k):
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    if schedule.kind == "constant":
        return schedule.alpha
    return schedule.alpha / (1.0 + k / schedule.k0)


class _Recorder:
    def __init__(self, n, record_every):
        self.counter = EvalCounter(n)
        self.watch = Stopwatch()
        self.every = record_every
        self.records = []

    def due(self, k):
        return k % self.every == 0

    def add(self, k, fval, gnorm, step):
        if self.records and self.records[-1].iter == k:
            return
        self.records.append(TraceRecord(
            k, self.counter.units, float(fval), float(gnorm),
            float(step), self.watch.ms()))


def gradient_descent(problem, w0, schedule, variant="plain", stop=None,
                     record_every=1):
    """Iterate w <- w - alpha_k grad F(w) (or the prox/accelerated variants).

    plain/nesterov need a smooth regularizer; ista/fista apply the prox of
    the regularizer after each (extrapolated) gradient step and report the
    prox-mapping norm ||w - prox(w - alpha g, alpha)|| / alpha as gnorm.
    """
    if variant not in GD_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if stop is None:
        stop = StopRule(max_iter=100)
    if variant in ("plain", "nesterov") and not problem.regularizer.smooth:
        raise ValueError(f"{variant} gradient descent needs a smooth regularizer")
    if variant in ("ista", "fista") and problem.regularizer.kind == "l2":
        raise ValueError("ista/fista cover l1 or unregularized objectives")
    w = np.array(problem._flat(w0))
    n = problem.data.n
    rec = _Recorder(n, record_every)
    accelerated = variant in ("nesterov", "fista")
    proximal = variant in ("ista", "fista")
    y = w.copy()
    t_mom = 1.0
    k = 0
    reason = None
    while True:
        point = y if accelerated else w
        g = problem.gradient(point)
        rec.counter.add_grad(n)
        alpha = step_size(schedule, k)
        if proximal:
            w_next = prox_step(problem.regularizer, point - alpha * g, alpha)
            gnorm = float(np.linalg.norm(point - w_next)) / alpha
        else:
            w_next = point - alpha * g
            gnorm = float(np.linalg.norm(g))
        fval = problem.value(w)
        reason = stop.hit(gnorm, fval)
        if reason is None and k >= stop.max_iter:
            reason = "max_iter"
        if rec.due(k) or reason:
            rec.add(k, fval, gnorm, alpha)
        if reason:
            break
        if accelerated:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom)) / 2.0
            y = w_next + ((t_mom - 1.0) / t_next) * (w_next - w)
            t_mom = t_next
        w = w_next
        k += 1
    return RunResult(w, rec.records, reason)


def sgd(problem, w0, schedule, batch_size, momentum=0.0, seed=0, stop=None,
        sampling="replacement", record_every=1):
    """Minibatch SGD with momentum; fixed seeds give bit-identical traces.

    Batches of size s < n are drawn uniformly with replacement (or as
    chunks of a reshuffled permutation under sampling="epoch_shuffle");
    batch_size = n short-circuits to the exact full batch.
    """
    n = problem.data.n
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch_size must be in [1, {n}]")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must lie in [0, 1)")
    if sampling not in ("replacement", "epoch_shuffle"):
        raise ValueError(f"unknown sampling mode {sampling!r}")
    if stop is None:
        stop = StopRule(max_iter=1000)
    rng = np.random.default_rng(seed)
    w = np.array(problem._flat(w0))
    velocity = np.zeros_like(w)
    rec = _Recorder(n, record_every)
    perm = None
    perm_pos = 0
    k = 0
    while True:
        terminal = k >= stop.max_iter
        if rec.due(k) or terminal:
            fval = problem.value(w)
            gnorm = float(np.linalg.norm(problem.gradient(w)))
            rec.add(k, fval, gnorm, step_size(schedule, k))
        if terminal:
            break
        if batch_size == n:
            batch = np.arange(n)
        elif sampling == "replacement":
            batch = rng.integers(0, n, size=batch_size)
        else:
            if perm is None or perm_pos + batch_size > n:
                perm = rng.permutation(n)
                perm_pos = 0
            batch = perm[perm_pos:perm_pos + batch_size]
            perm_pos += batch_size
        g = problem.minibatch_gradient(w, batch)
        rec.counter.add_grad(batch_size)
        velocity = momentum * velocity + (1.0 - momentum) * g
        w = w - step_size(schedule, k) * velocity
        k += 1
    return RunResult(w, rec.records, "max_iter")
