"""Run traces, evaluation accounting, and stopping rules.

Cost accounting: all comparisons run on an x-axis of effective gradient
evaluations in units of n, where one per-sample gradient costs 1/n, a full
gradient costs 1, a value evaluation on a batch costs |S|/n, and a
Hessian-vector product on a batch costs 2|S|/n.  Diagnostics recorded into
the trace (objective value, gradient norm) are free; only evaluations the
algorithm itself needs are charged.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

TRACE_HEADER = "iter,eff_grad_evals,fval,gnorm,step,wall_ms"


@dataclass
class TraceRecord:
    """One measurement row; eff_grad_evals is in units of n."""

    iter: int
    eff_grad_evals: float
    fval: float
    gnorm: float
    step: float
    wall_ms: float


@dataclass
class RunResult:
    final_w: np.ndarray
    trace: list
    termination: str
    info: dict = field(default_factory=dict)

    @property
    def fvals(self):
        return np.array([r.fval for r in self.trace])

    @property
    def evals(self):
        return np.array([r.eff_grad_evals for r in self.trace])


@dataclass
class EvalCounter:
    """Raw per-sample evaluation tallies for one solver run."""

    n: int
    grad_samples: int = 0
    value_samples: int = 0
    hvp_samples: int = 0
    hvp_calls: int = 0

    def add_grad(self, batch_size):
        self.grad_samples += int(batch_size)

    def add_value(self, batch_size):
        self.value_samples += int(batch_size)

    def add_hvp(self, batch_size):
        self.hvp_samples += int(batch_size)
        self.hvp_calls += 1

    @property
    def units(self):
        """Effective gradient evaluations in units of n."""
        return (self.grad_samples + self.value_samples + 2 * self.hvp_samples) / self.n


@dataclass(frozen=True)
class StopRule:
    """max_iter always applies; grad_tol and target_gap (needs fstar) are optional."""

    max_iter: int
    grad_tol: float = None
    target_gap: float = None
    fstar: float = None

    def __post_init__(self):
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.target_gap is not None and self.fstar is None:
            raise ValueError("target_gap stopping needs fstar")

    def hit(self, gnorm=None, fval=None):
        if self.grad_tol is not None and gnorm is not None and gnorm <= self.grad_tol:
            return "grad_tol"
        if self.target_gap is not None and fval is not None \
                and fval - self.fstar <= self.target_gap:
            return "target_gap"
        return None


class Stopwatch:
    def __init__(self):
        self._start = time.perf_counter()

    def ms(self):
        return (time.perf_counter() - self._start) * 1000.0


def write_trace(records, path):
    """Write trace rows as CSV with shortest round-trip decimals; overwrites."""
    if not records:
        raise ValueError("cannot write an empty trace")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in records:
            cols = [str(int(r.iter))] + [
                repr(float(x))
                for x in (r.eff_grad_evals, r.fval, r.gnorm, r.step, r.wall_ms)
            ]
            fh.write(",".join(cols) + "\n")


def read_trace(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header!r}")
        records = []
        for line in fh:
            parts = line.strip().split(",")
            records.append(TraceRecord(
                int(parts[0]), float(parts[1]), float(parts[2]),
                float(parts[3]), float(parts[4]), float(parts[5])))
    return records


def zero_wall(records):
    """Copy of the trace with wall_ms cleared (deterministic file output)."""
    return [replace(r, wall_ms=0.0) for r in records]
