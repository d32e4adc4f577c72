"""Desk-scale separability, shattering, 01-error, and generalization gap.

The affine separator search enumerates candidate normals from the support
geometry of small point sets (pairwise differences, their perpendiculars or
cross products, coordinate axes) and reduces each to a 1-d threshold check;
a capped perceptron is the completeness backstop.  Every separator returned
passes a strict margin verification first, so a non-None answer is always
sound.
"""

import itertools
from dataclasses import dataclass

import numpy as np

MAX_POINTS = 12
MAX_DIM = 3
_PERCEPTRON_PASSES = 200


@dataclass(frozen=True)
class LabeledPoints:
    """Distinct points with +-1 labels."""

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a k x d array")
        labs = np.array(self.labels, dtype=np.float64)
        if labs.shape != (pts.shape[0],):
            raise ValueError("labels length must match the point count")
        if not np.all(np.abs(labs) == 1.0):
            raise ValueError("labels must be +1 or -1")
        if len({tuple(row) for row in pts}) != pts.shape[0]:
            raise ValueError("points must be distinct")
        pts.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)


def _check_scale(k, d):
    if k > MAX_POINTS:
        raise ValueError(f"at most {MAX_POINTS} points supported")
    if d > MAX_DIM:
        raise ValueError(f"at most {MAX_DIM} dimensions supported")


def _candidate_directions(pts):
    k, d = pts.shape
    dirs = [np.eye(d)[i] for i in range(d)]
    diffs = [pts[j] - pts[i] for i, j in itertools.combinations(range(k), 2)]
    dirs.extend(diffs)
    if d == 2:
        dirs.extend(np.array([-v[1], v[0]]) for v in diffs)
    elif d == 3:
        for u, v in itertools.permutations(diffs, 2):
            c = np.cross(u, v)
            dirs.append(c)
            # normal lying in span{u, v} and perpendicular to u
            dirs.append(np.cross(u, c))
    mat = np.array(dirs)
    norms = np.linalg.norm(mat, axis=1)
    mat = mat[norms > 1e-12] / norms[norms > 1e-12, None]
    # drop near-duplicates up to sign
    keyed = {}
    for row in mat:
        key = tuple(np.round(row * np.sign(row[np.argmax(np.abs(row))]), 9))
        keyed.setdefault(key, row)
    return np.array(list(keyed.values()))


def _margins(pts, labs, w0, w1):
    return labs * (pts @ w1 + w0)


def _perceptron(pts, labs):
    aug = np.hstack([pts, np.ones((pts.shape[0], 1))])
    v = np.zeros(aug.shape[1])
    for _ in range(_PERCEPTRON_PASSES):
        updated = False
        for i in range(aug.shape[0]):
            if labs[i] * (aug[i] @ v) <= 0.0:
                v = v + labs[i] * aug[i]
                updated = True
        if not updated:
            w0, w1 = float(v[-1]), v[:-1]
            if np.all(_margins(pts, labs, w0, w1) > 0.0):
                return w0, w1
            return None
    return None


def _separator(pts, labs, directions, projections):
    if np.all(labs > 0) or np.all(labs < 0):
        return float(labs[0]), np.zeros(pts.shape[1])
    pos = labs > 0
    plus_ok = projections[pos].min(axis=0) > projections[~pos].max(axis=0)
    minus_ok = projections[~pos].min(axis=0) > projections[pos].max(axis=0)
    hits = np.nonzero(plus_ok | minus_ok)[0]
    if hits.size:
        i = hits[0]
        w1 = directions[i] if plus_ok[i] else -directions[i]
        u = pts @ w1
        w0 = -(u[pos].min() + u[~pos].max()) / 2.0
        if np.all(_margins(pts, labs, w0, w1) > 0.0):
            return float(w0), w1
    return _perceptron(pts, labs)


def separable_by_affine(instance):
    """Strict affine separator (w0, w1) with all margins y (w1.x + w0) > 0,
    or None when no such separator exists.  Margins are re-verified before
    returning, so the answer never overstates separability."""
    pts, labs = instance.points, instance.labels
    _check_scale(pts.shape[0], pts.shape[1])
    directions = _candidate_directions(pts)
    projections = pts @ directions.T
    return _separator(pts, labs, directions, projections)


def shatter_check(points):
    """Try all 2^k labelings; shattered iff each admits a strict separator.

    Returns (shattered, failing) with the exact list of inseparable
    labelings as +-1 tuples.
    """
    pts = np.array(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a k x d array")
    k, d = pts.shape
    _check_scale(k, d)
    if len({tuple(row) for row in pts}) != k:
        raise ValueError("points must be distinct")
    directions = _candidate_directions(pts)
    projections = pts @ directions.T
    failing = []
    for bits in itertools.product((1.0, -1.0), repeat=k):
        labs = np.array(bits)
        if _separator(pts, labs, directions, projections) is None:
            failing.append(tuple(int(b) for b in bits))
    return len(failing) == 0, failing


def zero_one_error(problem, w, data=None):
    """Fraction of samples with y p(w, x) <= 0; zero margins count as errors."""
    prob = problem if data is None else problem.with_data(data)
    if not prob.data.binary:
        raise ValueError("zero_one_error needs binary labels")
    margins = prob.data.labels * prob.predictions(w)
    return float(np.mean(margins <= 0.0))


def generalization_gap(problem, w, train, test):
    """(|train loss - test loss|, |train 01-error - test 01-error|); losses
    are unregularized averages."""
    if train.d != test.d:
        raise ValueError("train and test sets must share the feature dimension")
    loss_gap = abs(problem.average_loss(w, train) - problem.average_loss(w, test))
    err_gap = abs(zero_one_error(problem, w, train) - zero_one_error(problem, w, test))
    return float(loss_gap), float(err_gap)
