"""Finite-sum variance-reduction solvers: SVRG, SARAH, SAGA, dynamic batches.

SVRG's inner direction is g_S(w_t) - g_S(w_0) + v_0 with v_0 the outer full
gradient; SARAH replaces the anchor with the previous iterate and direction.
Both are computed as g_S(w_t) + (anchor correction), so when the batch is
the full sample set the correction is exactly zero and the run degenerates
to plain gradient descent bit-for-bit.  SAGA keeps a table of the n most
recent per-sample loss gradients with an incrementally maintained mean.
"""

import math

import numpy as np

from .trace import EvalCounter, RunResult, Stopwatch, TraceRecord


class GradientTable:
    """Per-sample gradient rows plus a running mean.

    The mean is updated incrementally and refreshed against a direct
    recomputation every n replacements, which keeps drift below 1e-10 and
    makes the mean exact whenever a full refresh cycle completes.
    """

    def __init__(self, rows):
        self.rows = np.array(rows, dtype=np.float64)
        self.mean = self.rows.mean(axis=0)
        self._since_refresh = 0

    @property
    def n(self):
        return self.rows.shape[0]

    def replace(self, j, grad):
        self.mean = self.mean + (grad - self.rows[j]) / self.n
        self.rows[j] = grad
        self._since_refresh += 1
        if self._since_refresh >= self.n:
            self.refresh()

    def refresh(self):
        self.mean = self.rows.mean(axis=0)
        self._since_refresh = 0

    def drift(self):
        return float(np.max(np.abs(self.mean - self.rows.mean(axis=0))))


def _check_inner(n, batch_size, inner_loop, alpha):
    if alpha <= 0.0:
        raise ValueError("step size must be positive")
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch size must be in [1, {n}]")
    if inner_loop is not None and inner_loop < 1:
        raise ValueError("inner loop size must be at least 1")
    return inner_loop if inner_loop is not None else max(1, math.ceil(2 * n / batch_size))


def _draw(rng, n, size):
    return np.arange(n) if size == n else rng.integers(0, n, size=size)


def _vr_outer(problem, w0, alpha, batch_size, inner_loop, seed, outer_iters,
              outer_select, record_every, sarah_mode):
    n = problem.data.n
    l = _check_inner(n, batch_size, inner_loop, alpha)
    if outer_select not in ("uniform", "last"):
        raise ValueError(f"unknown outer_select {outer_select!r}")
    rng = np.random.default_rng(seed)
    w_tilde = np.array(problem._flat(w0))
    counter = EvalCounter(n)
    watch = Stopwatch()

    def row(k, w):
        fval = problem.value(w)
        gnorm = float(np.linalg.norm(problem.gradient(w)))
        return TraceRecord(k, counter.units, fval, gnorm, alpha, watch.ms())

    records = [row(0, w_tilde)]
    for k in range(1, outer_iters + 1):
        anchor = w_tilde.copy()
        v0 = problem.gradient(anchor)
        counter.add_grad(n)
        iterates = [anchor]
        w = anchor - alpha * v0
        iterates.append(w.copy())
        prev = anchor
        v = v0
        for _ in range(1, l):
            batch = _draw(rng, n, batch_size)
            g_here = problem.minibatch_gradient(w, batch)
            g_ref = problem.minibatch_gradient(prev if sarah_mode else anchor, batch)
            counter.add_grad(2 * batch_size)
            # anchor/previous correction first: it cancels exactly at full batch
            correction = (v - g_ref) if sarah_mode else (v0 - g_ref)
            v = g_here + correction
            prev = w
            w = w - alpha * v
            iterates.append(w.copy())
        if outer_select == "uniform":
            pick = int(rng.integers(0, l + 1))
        else:
            pick = l
        w_tilde = iterates[pick].copy()
        if k % record_every == 0 or k == outer_iters:
            records.append(row(k, w_tilde))
    return RunResult(w_tilde, records, "max_iter",
                     info={"inner_loop": l, "counter": counter})


def svrg(problem, w0, alpha, batch_size, inner_loop=None, seed=0,
         outer_iters=10, outer_select="uniform", record_every=1):
    """Outer full gradient, l - 1 corrected inner steps, next anchor drawn
    uniformly from the l + 1 inner iterates (``outer_select="last"`` keeps
    the final one instead).  Charges n + 2 * batch_size * (l - 1) per outer
    iteration.  Default inner loop size is 2n / batch_size."""
    return _vr_outer(problem, w0, alpha, batch_size, inner_loop, seed,
                     outer_iters, outer_select, record_every, sarah_mode=False)


def sarah(problem, w0, alpha, batch_size, inner_loop=None, seed=0,
          outer_iters=10, outer_select="last", record_every=1):
    """Like svrg but the inner direction recurses on consecutive iterates:
    v_t = g_S(w_t) - g_S(w_{t-1}) + v_{t-1}.  The directions are biased
    (E[v_t] is not the gradient), and the practical default keeps the last
    inner iterate."""
    return _vr_outer(problem, w0, alpha, batch_size, inner_loop, seed,
                     outer_iters, outer_select, record_every, sarah_mode=True)


def saga(problem, w0, alpha, seed=0, iters=1000, record_every=None):
    """Uniform single-index steps with direction g_j(w) + (mean - table_j)
    plus the analytic regularizer gradient.

    The table is initialized with per-sample gradients at w0 (one full pass,
    charged), so mean(table) starts exactly at the loss gradient.
    """
    if alpha <= 0.0:
        raise ValueError("step size must be positive")
    n = problem.data.n
    if record_every is None:
        record_every = n
    rng = np.random.default_rng(seed)
    w = np.array(problem._flat(w0))
    counter = EvalCounter(n)
    watch = Stopwatch()
    table = GradientTable(problem.per_sample_loss_gradients(w))
    counter.add_grad(n)

    def row(k):
        fval = problem.value(w)
        gnorm = float(np.linalg.norm(problem.gradient(w)))
        return TraceRecord(k, counter.units, fval, gnorm, alpha, watch.ms())

    records = [row(0)]
    for k in range(1, iters + 1):
        j = int(rng.integers(0, n))
        g = problem.per_sample_loss_gradients(w, np.array([j]))[0]
        counter.add_grad(1)
        direction = g + (table.mean - table.rows[j]) \
            + problem.regularizer.smooth_gradient(w)
        table.replace(j, g)
        w = w - alpha * direction
        if k % record_every == 0 or k == iters:
            records.append(row(k))
    return RunResult(w, records, "max_iter", info={"table": table, "counter": counter})


def dynamic_batch_sizes(s0, growth, n, epochs):
    """Batch size per epoch: ceil(s0 * growth^e) capped at n."""
    if growth <= 1.0:
        raise ValueError("growth factor must exceed 1")
    if s0 < 1:
        raise ValueError("initial batch size must be at least 1")
    return [min(n, math.ceil(s0 * growth ** e)) for e in range(epochs)]


def dynamic_batch_sgd(problem, w0, alpha, growth, s0=1, seed=0, epochs=10,
                      record_every=1):
    """SGD whose batch grows geometrically per epoch; once the batch caps at
    n every step is an exact full-gradient step.  One epoch takes
    ceil(n / batch) steps; trace rows mark epoch ends."""
    if alpha <= 0.0:
        raise ValueError("step size must be positive")
    n = problem.data.n
    sizes = dynamic_batch_sizes(s0, growth, n, epochs)
    rng = np.random.default_rng(seed)
    w = np.array(problem._flat(w0))
    counter = EvalCounter(n)
    watch = Stopwatch()

    def row(k):
        fval = problem.value(w)
        gnorm = float(np.linalg.norm(problem.gradient(w)))
        return TraceRecord(k, counter.units, fval, gnorm, alpha, watch.ms())

    records = [row(0)]
    for e, size in enumerate(sizes, start=1):
        for _ in range(math.ceil(n / size)):
            batch = _draw(rng, n, size)
            g = problem.minibatch_gradient(w, batch)
            counter.add_grad(size)
            w = w - alpha * g
        if e % record_every == 0 or e == epochs:
            records.append(row(e))
    return RunResult(w, records, "max_iter",
                     info={"batch_sizes": sizes, "counter": counter})
