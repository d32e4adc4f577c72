"""Quasi-Newton, Hessian-free Newton-CG, and trust-region solvers.

BFGS maintains inverse curvature approximations from (step, gradient
displacement) pairs satisfying s.y > 0; the limited-memory variant runs the
two-loop recursion over a ring of recent pairs.  The stochastic variants
drop the line search for a fixed step schedule and differ only in how the
displacement y is formed (same batch, overlapping batches, damped
combination, or a sampled Hessian action).  Newton-CG and the trust-region
method access curvature exclusively through Hessian- or Gauss-Newton-vector
products.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import CurvatureError, LineSearchError, NegativeCurvatureError
from .first_order import step_size
from .trace import EvalCounter, RunResult, StopRule, Stopwatch, TraceRecord

PAIR_STRATEGIES = ("same_batch", "overlap", "damped", "hessian_action")


# --------------------------------------------------------------------------
# BFGS building blocks
# --------------------------------------------------------------------------

def bfgs_update_inverse(binv, s, y):
    """Rank-two inverse update (I - s y^T / s.y) B (I - y s^T / s.y) + s s^T / s.y.

    The result satisfies the secant equation result @ y = s to rounding and
    stays positive definite whenever the input is and s.y > 0.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sy = float(s @ y)
    if sy <= 0.0:
        raise CurvatureError(f"curvature pair needs s.y > 0, got {sy!r}")
    rho = 1.0 / sy
    left = np.eye(len(s)) - rho * np.outer(s, y)
    return left @ binv @ left.T + rho * np.outer(s, s)


class LbfgsMemory:
    """Ring of the m most recent curvature pairs, all with s.y > 0."""

    def __init__(self, m):
        if m < 1:
            raise ValueError("memory size must be at least 1")
        self.m = m
        self.pairs = deque(maxlen=m)

    def add(self, s, y):
        sy = float(s @ y)
        if sy <= 0.0:
            raise CurvatureError(f"curvature pair needs s.y > 0, got {sy!r}")
        self.pairs.append((np.array(s), np.array(y), 1.0 / sy))

    def __len__(self):
        return len(self.pairs)

    def gamma(self):
        """Initial inverse-Hessian scale s.y / y.y from the newest pair."""
        s, y, _ = self.pairs[-1]
        return float(s @ y) / float(y @ y)


def two_loop(memory, g, gamma=1.0):
    """Apply the implicit inverse approximation to g (returns B^{-1} g)."""
    q = np.array(g, dtype=np.float64)
    alphas = []
    for s, y, rho in reversed(memory.pairs):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    r = gamma * q
    for (s, y, rho), a in zip(memory.pairs, reversed(alphas)):
        b = rho * float(y @ r)
        r += (a - b) * s
    return r


def damp_pair(s, y, mu1, mu2):
    """Replace y by v = beta s + (1 - beta) y so that s.v lies in
    [mu1 ||s||^2, mu2 ||s||^2]; beta is the smallest clamp that restores the
    violated bound (0 when none is violated).  Needs 0 < mu1 < 1 < mu2."""
    if not 0.0 < mu1 < 1.0 < mu2:
        raise ValueError("damping bounds need 0 < mu1 < 1 < mu2")
    ss = float(s @ s)
    sy = float(s @ y)
    if sy < mu1 * ss:
        beta = (mu1 * ss - sy) / (ss - sy)
    elif sy > mu2 * ss:
        beta = (sy - mu2 * ss) / (sy - ss)
    else:
        return np.array(y, dtype=np.float64)
    return beta * s + (1.0 - beta) * y


# --------------------------------------------------------------------------
# line search
# --------------------------------------------------------------------------

def _wolfe(problem, w, direction, c1, c2, alpha_init, max_iter, counter,
           f0=None, g0=None):
    n = problem.data.n
    if f0 is None:
        f0 = problem.value(w)
        counter.add_value(n)
    if g0 is None:
        g0 = problem.gradient(w)
        counter.add_grad(n)
    dg0 = float(g0 @ direction)
    if dg0 >= 0.0:
        raise ValueError("line search needs a descent direction")
    # once the Armijo decrease falls below what float64 can resolve in F,
    # fall back to the derivative-based approximate test (flat slope window)
    flat = abs(dg0) * max(1.0, float(alpha_init)) < 1e4 * np.finfo(float).eps * max(1.0, abs(f0))
    lo, hi = 0.0, math.inf
    alpha = float(alpha_init)
    for _ in range(max_iter):
        f_a = problem.value(w + alpha * direction)
        counter.add_value(n)
        armijo = f_a <= f0 + c1 * alpha * dg0
        if armijo or flat:
            g_a = problem.gradient(w + alpha * direction)
            counter.add_grad(n)
            slope = float(g_a @ direction)
            if armijo and slope >= c2 * dg0:
                return alpha, f_a, g_a
            if flat and c2 * dg0 <= slope <= (2.0 * c1 - 1.0) * dg0 \
                    and f_a <= f0 + 1e-12 * abs(f0):
                return alpha, f_a, g_a
            if slope < c2 * dg0:
                lo = alpha
            else:
                hi = alpha
        else:
            hi = alpha
        alpha = (lo + hi) / 2.0 if hi < math.inf else 2.0 * alpha
    raise LineSearchError(
        f"no Wolfe step within {max_iter} trials (bracket [{lo}, {hi}])")


def wolfe_line_search(problem, w, direction, c1=1e-4, c2=0.9, alpha_init=1.0,
                      max_iter=100):
    """Bisection search for a step meeting the sufficient-decrease and
    curvature conditions.  The curvature condition guarantees s.y > 0 for
    the resulting quasi-Newton pair."""
    if not 0.0 < c1 < c2 < 1.0:
        raise ValueError("need 0 < c1 < c2 < 1")
    if alpha_init <= 0.0:
        raise ValueError("initial step must be positive")
    counter = EvalCounter(problem.data.n)
    alpha, _, _ = _wolfe(problem, np.array(problem._flat(w)),
                         np.asarray(direction, dtype=np.float64),
                         c1, c2, alpha_init, max_iter, counter)
    return alpha


# --------------------------------------------------------------------------
# deterministic (L-)BFGS
# --------------------------------------------------------------------------

def bfgs(problem, w0, memory="full", stop=None, gamma_scaling=True,
         alpha_init=1.0, c1=1e-4, c2=0.9, record_every=1):
    """BFGS with Wolfe line search: direction -B^{-1} grad F, explicit inverse
    updates for memory="full", the two-loop recursion otherwise.

    ``gamma_scaling=False`` pins the limited-memory seed matrix to the
    identity, making a no-eviction limited run match the full-memory one.
    Returns the accepted curvature pairs in ``info["pairs"]``.
    """
    if problem.loss not in ("logistic", "least_squares") or not problem.regularizer.smooth:
        raise ValueError("bfgs needs a smooth objective")
    if stop is None:
        stop = StopRule(max_iter=200, grad_tol=1e-8)
    n = problem.data.n
    w = np.array(problem._flat(w0))
    dim = w.shape[0]
    full = memory == "full"
    binv = np.eye(dim) if full else None
    mem = None if full else LbfgsMemory(int(memory))
    counter = EvalCounter(n)
    watch = Stopwatch()
    records = []
    pairs = []
    skipped = 0

    g = problem.gradient(w)
    counter.add_grad(n)
    fval = problem.value(w)
    counter.add_value(n)
    k = 0
    alpha = 0.0
    reason = None
    while True:
        gnorm = float(np.linalg.norm(g))
        reason = stop.hit(gnorm, fval)
        if reason is None and k >= stop.max_iter:
            reason = "max_iter"
        if k % record_every == 0 or reason:
            if not records or records[-1].iter != k:
                records.append(TraceRecord(k, counter.units, float(fval),
                                           gnorm, alpha, watch.ms()))
        if reason:
            break
        if full:
            direction = -(binv @ g)
        elif len(mem) > 0:
            gamma = mem.gamma() if gamma_scaling else 1.0
            direction = -two_loop(mem, g, gamma)
        else:
            direction = -g
        if float(g @ direction) >= 0.0:
            direction = -g
        try:
            alpha, f_new, g_new = _wolfe(problem, w, direction, c1, c2,
                                         alpha_init, 100, counter,
                                         f0=fval, g0=g)
        except LineSearchError:
            reason = "line_search_failure"
            records.append(TraceRecord(k + 1, counter.units, float(fval),
                                       gnorm, alpha, watch.ms()))
            break
        s = alpha * direction
        y = g_new - g
        if float(s @ y) > 0.0:
            if full:
                binv = bfgs_update_inverse(binv, s, y)
            else:
                mem.add(s, y)
            pairs.append((s, y))
        else:
            skipped += 1
        w = w + s
        fval, g = f_new, g_new
        k += 1
    info = {"pairs": pairs, "skipped": skipped, "counter": counter,
            "iterations": k}
    if full:
        info["binv"] = binv
    return RunResult(w, records, reason, info=info)


# --------------------------------------------------------------------------
# stochastic L-BFGS
# --------------------------------------------------------------------------

def stochastic_lbfgs(problem, w0, schedule, batch_size, pair_strategy="same_batch",
                     m=10, seed=0, stop=None, overlap_fraction=0.5,
                     mu1=0.25, mu2=4.0, hessian_batch=None,
                     skip_tol=1e-12, record_every=1):
    """L-BFGS directions on stochastic gradients with a fixed step schedule
    (no line search).  The pairing strategy decides the displacement y:

      same_batch     -- y from the same mini-batch at both endpoints
                        (two stochastic gradients per iteration)
      overlap        -- consecutive batches share overlap_fraction of their
                        indices; one fresh gradient per iteration
      damped         -- independent batches; y repaired to v = beta s + (1-beta) y
                        with s.v in [mu1 ||s||^2, mu2 ||s||^2]
      hessian_action -- y = (batch Hessian at w_k) s_k on a separate batch

    Pairs failing s.y > skip_tol ||s|| ||y|| are skipped, except under
    damped, which repairs them instead.
    """
    if pair_strategy not in PAIR_STRATEGIES:
        raise ValueError(f"unknown pair strategy {pair_strategy!r}")
    n = problem.data.n
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch size must be in [1, {n}]")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ValueError("overlap fraction must lie in [0, 1)")
    if stop is None:
        stop = StopRule(max_iter=100)
    s_hess = hessian_batch if hessian_batch is not None else batch_size
    if not 1 <= s_hess <= n:
        raise ValueError(f"hessian batch size must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    w = np.array(problem._flat(w0))
    mem = LbfgsMemory(m)
    counter = EvalCounter(n)
    watch = Stopwatch()
    records = []
    skipped = 0

    def draw(size):
        return np.arange(n) if size == n else rng.integers(0, n, size=size)

    batch = draw(batch_size)
    g = problem.minibatch_gradient(w, batch)
    counter.add_grad(batch_size)
    keep = int(round(overlap_fraction * batch_size))
    k = 0
    while True:
        terminal = k >= stop.max_iter
        if k % record_every == 0 or terminal:
            fval = problem.value(w)
            gnorm = float(np.linalg.norm(problem.gradient(w)))
            records.append(TraceRecord(k, counter.units, fval, gnorm,
                                       step_size(schedule, k), watch.ms()))
        if terminal:
            break
        if len(mem) > 0:
            direction = -two_loop(mem, g, mem.gamma())
        else:
            direction = -g
        alpha = step_size(schedule, k)
        s_vec = alpha * direction
        w_new = w + s_vec

        if pair_strategy == "same_batch":
            y = problem.minibatch_gradient(w_new, batch) - g
            counter.add_grad(batch_size)
            next_batch = draw(batch_size)
            g_next = problem.minibatch_gradient(w_new, next_batch)
            counter.add_grad(batch_size)
        elif pair_strategy == "overlap":
            next_batch = np.concatenate([batch[:keep], draw(batch_size - keep)]) \
                if 0 < keep < batch_size else draw(batch_size)
            g_next = problem.minibatch_gradient(w_new, next_batch)
            counter.add_grad(batch_size)
            y = g_next - g
        elif pair_strategy == "damped":
            next_batch = draw(batch_size)
            g_next = problem.minibatch_gradient(w_new, next_batch)
            counter.add_grad(batch_size)
            y = damp_pair(s_vec, g_next - g, mu1, mu2)
        else:  # hessian_action
            hess_batch = draw(s_hess)
            y = problem.hessian_vector_product(w, s_vec, hess_batch)
            counter.add_hvp(s_hess)
            next_batch = draw(batch_size)
            g_next = problem.minibatch_gradient(w_new, next_batch)
            counter.add_grad(batch_size)

        sy = float(s_vec @ y)
        if sy > skip_tol * np.linalg.norm(s_vec) * np.linalg.norm(y):
            mem.add(s_vec, y)
        else:
            skipped += 1
        w, g, batch = w_new, g_next, next_batch
        k += 1
    return RunResult(w, records, "max_iter",
                     info={"skipped": skipped, "counter": counter, "memory": mem})


# --------------------------------------------------------------------------
# conjugate gradient solvers
# --------------------------------------------------------------------------

def _cg(matvec, b, tol, max_iter):
    x = np.zeros_like(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x, 0, 0.0
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    for it in range(1, max_iter + 1):
        ap = matvec(p)
        kappa = float(p @ ap)
        if kappa <= 0.0:
            raise NegativeCurvatureError(x, p, it - 1)
        step = rr / kappa
        x = x + step * p
        r = r - step * ap
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol * bnorm:
            return x, it, math.sqrt(rr_new) / bnorm
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x, max_iter, math.sqrt(rr) / bnorm


def cg_solve(matvec, b, tol=1e-10, max_iter=None):
    """Solve A x = b for symmetric positive definite A given only matvec.

    Stops when ||b - A x|| <= tol ||b|| or after max_iter products; raises
    NegativeCurvatureError (carrying the current iterate) when a search
    direction has p.A.p <= 0.
    """
    b = np.asarray(b, dtype=np.float64)
    if max_iter is None:
        max_iter = 10 * b.shape[0]
    x, iterations, _ = _cg(matvec, b, tol, max_iter)
    return x, iterations


@dataclass
class SteihaugResult:
    step: np.ndarray
    boundary_hit: bool
    negative_curvature: bool
    iterations: int
    model_decrease: float


def _boundary_tau(z, d, radius):
    dd = float(d @ d)
    zd = float(z @ d)
    zz = float(z @ z)
    disc = zd * zd + dd * (radius * radius - zz)
    return (-zd + math.sqrt(max(disc, 0.0))) / dd


def steihaug_cg(matvec, g, radius, tol=1e-10, max_iter=None):
    """Steihaug-Toint CG for min g.s + (1/2) s.A.s subject to ||s|| <= radius.

    Interior CG solution when the residual converges inside the ball;
    otherwise the positive-root boundary point along the current direction,
    with flags for boundary exit and detected non-positive curvature.  The
    model decrease is tracked without extra matvecs and is never negative.
    """
    g = np.asarray(g, dtype=np.float64)
    if radius <= 0.0:
        raise ValueError("trust radius must be positive")
    if max_iter is None:
        max_iter = max(2 * g.shape[0], 10)
    gnorm = float(np.linalg.norm(g))
    z = np.zeros_like(g)
    if gnorm == 0.0:
        return SteihaugResult(z, False, False, 0, 0.0)
    az = np.zeros_like(g)

    def decrease(zv, azv):
        return -(float(g @ zv) + 0.5 * float(zv @ azv))

    r = g.copy()
    d = -g
    rr = float(r @ r)
    for it in range(1, max_iter + 1):
        ad = matvec(d)
        kappa = float(d @ ad)
        if kappa <= 0.0:
            tau = _boundary_tau(z, d, radius)
            z = z + tau * d
            az = az + tau * ad
            return SteihaugResult(z, True, True, it, decrease(z, az))
        step = rr / kappa
        z_next = z + step * d
        if float(np.linalg.norm(z_next)) >= radius:
            tau = _boundary_tau(z, d, radius)
            z = z + tau * d
            az = az + tau * ad
            return SteihaugResult(z, True, False, it, decrease(z, az))
        z = z_next
        az = az + step * ad
        r = r + step * ad
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= tol * gnorm:
            return SteihaugResult(z, False, False, it, decrease(z, az))
        d = -r + (rr_new / rr) * d
        rr = rr_new
    return SteihaugResult(z, False, False, max_iter, decrease(z, az))


# --------------------------------------------------------------------------
# Newton-CG and trust region
# --------------------------------------------------------------------------

def _default_forcing(gnorm):
    return min(0.5, math.sqrt(gnorm))


def newton_cg(problem, w0, curvature="hessian", damping=None, forcing=None,
              stop=None, cg_max_iter=30, c1=1e-4, max_backtracks=30,
              record_every=1):
    """Inexact Newton: solve (B + damping I) s = -grad F by CG each outer
    iteration, then backtrack on F until the Armijo test holds.

    ``curvature`` selects the Hessian or the Gauss-Newton product (default
    damping 0 and 1e-4 respectively); ``forcing`` maps ||grad|| to the
    relative CG tolerance, default min(0.5, sqrt(||grad||)).  Per-outer CG
    product counts land in info["cg_products"].
    """
    if curvature not in ("hessian", "gauss_newton"):
        raise ValueError(f"unknown curvature source {curvature!r}")
    if damping is None:
        damping = 0.0 if curvature == "hessian" else 1e-4
    if damping < 0.0:
        raise ValueError("damping must be nonnegative")
    if forcing is None:
        forcing = _default_forcing
    if stop is None:
        stop = StopRule(max_iter=100, grad_tol=1e-8)
    n = problem.data.n
    w = np.array(problem._flat(w0))
    counter = EvalCounter(n)
    watch = Stopwatch()
    records = []
    cg_products = []
    k = 0
    alpha = 0.0
    reason = None

    def make_matvec(point):
        if curvature == "hessian":
            base = lambda v: problem.hessian_vector_product(point, v)
        else:
            base = lambda v: problem.gauss_newton_vector_product(point, v)

        def matvec(v):
            counter.add_hvp(n)
            return base(v) + damping * v

        return matvec

    while True:
        g = problem.gradient(w)
        counter.add_grad(n)
        fval = problem.value(w)
        counter.add_value(n)
        gnorm = float(np.linalg.norm(g))
        reason = stop.hit(gnorm, fval)
        if reason is None and k >= stop.max_iter:
            reason = "max_iter"
        if k % record_every == 0 or reason:
            if not records or records[-1].iter != k:
                records.append(TraceRecord(k, counter.units, float(fval),
                                           gnorm, alpha, watch.ms()))
        if reason:
            break
        try:
            step, products = cg_solve(make_matvec(w), -g, tol=forcing(gnorm),
                                      max_iter=cg_max_iter)
        except NegativeCurvatureError as err:
            assert not (problem.is_convex and curvature == "hessian"), \
                "negative curvature on a convex problem"
            products = err.iterations
            step = err.iterate if float(np.linalg.norm(err.iterate)) > 0.0 else -g
        cg_products.append(products)
        dg = float(g @ step)
        if dg >= 0.0:
            step = -g
            dg = -gnorm * gnorm
        alpha = 1.0
        accepted = False
        for _ in range(max_backtracks + 1):
            f_try = problem.value(w + alpha * step)
            counter.add_value(n)
            if f_try <= fval + c1 * alpha * dg:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            reason = "backtracking_failure"
            records.append(TraceRecord(k + 1, counter.units, float(fval),
                                       gnorm, alpha, watch.ms()))
            break
        w = w + alpha * step
        k += 1
    return RunResult(w, records, reason,
                     info={"cg_products": cg_products, "counter": counter,
                           "iterations": k})


@dataclass(frozen=True)
class TrustRegionState:
    """Initial radius, acceptance thresholds, and the radius clamp."""

    radius: float = 1.0
    eta1: float = 0.1
    eta2: float = 0.75
    shrink: float = 0.5
    grow: float = 2.0
    radius_min: float = 1e-12
    radius_max: float = 1e6

    def __post_init__(self):
        if not 0.0 < self.eta1 < self.eta2 < 1.0:
            raise ValueError("need 0 < eta1 < eta2 < 1")
        if not 0.0 < self.shrink < 1.0 < self.grow:
            raise ValueError("need 0 < shrink < 1 < grow")
        if not self.radius_min <= self.radius <= self.radius_max:
            raise ValueError("radius must start inside [radius_min, radius_max]")


def trust_region(problem, w0, curvature="exact", sample_constant=None,
                 tr=None, stop=None, seed=0, cg_max_iter=30, record_every=1):
    """Trust-region steps from steihaug_cg on the local quadratic model, with
    exact gradients and either exact or subsampled Hessian products.

    Under ``curvature="subsampled"`` the Hessian batch has
    min(n, ceil(sample_constant / radius^2)) samples, so tighter radii buy
    more accurate curvature.  Ratio rho = actual/predicted decrease; accept
    iff rho >= eta1; shrink on rejection, grow on a very successful boundary
    step.  The step column of the trace records the radius.
    """
    if curvature not in ("exact", "subsampled"):
        raise ValueError(f"unknown curvature source {curvature!r}")
    if curvature == "subsampled" and (sample_constant is None or sample_constant <= 0):
        raise ValueError("subsampled curvature needs a positive sample_constant")
    if tr is None:
        tr = TrustRegionState()
    if stop is None:
        stop = StopRule(max_iter=100, grad_tol=1e-6)
    n = problem.data.n
    rng = np.random.default_rng(seed)
    w = np.array(problem._flat(w0))
    radius = tr.radius
    counter = EvalCounter(n)
    watch = Stopwatch()
    records = []
    audit = []
    k = 0
    reason = None
    while True:
        g = problem.gradient(w)
        counter.add_grad(n)
        fval = problem.value(w)
        counter.add_value(n)
        gnorm = float(np.linalg.norm(g))
        reason = stop.hit(gnorm, fval)
        if reason is None and k >= stop.max_iter:
            reason = "max_iter"
        if k % record_every == 0 or reason:
            if not records or records[-1].iter != k:
                records.append(TraceRecord(k, counter.units, float(fval),
                                           gnorm, radius, watch.ms()))
        if reason:
            break
        if curvature == "exact":
            batch = None
            batch_cost = n
        else:
            size = min(n, max(1, math.ceil(sample_constant / radius ** 2)))
            batch = np.arange(n) if size == n else rng.choice(n, size=size, replace=False)
            batch_cost = size

        def matvec(v, point=w, idx=batch, cost=batch_cost):
            counter.add_hvp(cost)
            return problem.hessian_vector_product(point, v, idx)

        result = steihaug_cg(matvec, g, radius, tol=_default_forcing(gnorm),
                             max_iter=cg_max_iter)
        predicted = result.model_decrease
        if predicted <= 0.0:
            reason = "tr_no_decrease"
            break
        f_new = problem.value(w + result.step)
        counter.add_value(n)
        rho = (fval - f_new) / predicted
        accepted = rho >= tr.eta1
        audit.append((rho, accepted, float(fval - f_new), predicted))
        if accepted:
            w = w + result.step
        if rho < tr.eta1:
            radius *= tr.shrink
            if radius < tr.radius_min:
                reason = "tr_stall"
                records.append(TraceRecord(k + 1, counter.units, float(fval),
                                           gnorm, radius, watch.ms()))
                break
        elif rho >= tr.eta2 and result.boundary_hit:
            radius = min(tr.grow * radius, tr.radius_max)
        k += 1
    return RunResult(w, records, reason,
                     info={"audit": audit, "counter": counter, "iterations": k})
