"""Objective oracles for regularized empirical risk.

A Problem bundles a prediction model (linear or feed-forward network), a
loss (logistic, hinge, least squares, or the 01 indicator), a regularizer,
and a dataset.  It exposes value, gradient, minibatch gradient,
Hessian-vector, and Gauss-Newton-vector oracles, all matrix-free.  Oracles
never mutate the problem or its data, so concurrent calls are safe.

Conventions: binary labels are +-1 reals so the margin y * p(w, x) feeds the
losses directly; there is no separate bias term (append a constant-1 feature
instead); for the l1 regularizer the gradient oracles cover the smooth part
only and ``prox_step`` handles the rest.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import backend as kern
from . import networks
from . import params as _params
from .datasets import Dataset
from .errors import ShapeError, UnsupportedOracleError

LOSSES = ("logistic", "hinge", "least_squares", "zero_one")
SMOOTH_LOSSES = ("logistic", "least_squares")
ACTIVATIONS = ("identity", "sigmoid", "tanh", "relu")


# --------------------------------------------------------------------------
# regularizers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Regularizer:
    """none, l2 (lam * ||w||^2), or l1 (lam * ||w||_1)."""

    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "l1", "l2"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.lam < 0.0:
            raise ValueError("regularization weight must be nonnegative")

    @property
    def smooth(self):
        return self.kind != "l1" or self.lam == 0.0

    def value(self, w):
        if self.kind == "l2":
            return self.lam * float(w @ w)
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(w)))
        return 0.0

    def smooth_gradient(self, w):
        if self.kind == "l2":
            return 2.0 * self.lam * w
        return np.zeros_like(w)

    def hvp(self, v):
        if self.kind == "l2":
            return 2.0 * self.lam * v
        return np.zeros_like(v)


def no_reg():
    return Regularizer("none", 0.0)


def l2(lam):
    return Regularizer("l2", lam)


def l1(lam):
    return Regularizer("l1", lam)


def prox_step(regularizer, v, t):
    """Proximal map of t * lam * r at v (identity for r = none)."""
    if t <= 0.0:
        raise ValueError("prox step size must be positive")
    v = np.asarray(v, dtype=np.float64)
    if regularizer.kind == "l1":
        return kern.soft_threshold(v, t * regularizer.lam)
    if regularizer.kind == "l2":
        return v / (1.0 + 2.0 * t * regularizer.lam)
    return v.copy()


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    """p(w, x) = w . x (no bias; augment features with a constant instead)."""


@dataclass(frozen=True)
class MlpModel:
    """Fully connected network; one activation name per layer."""

    layer_sizes: tuple
    activations: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        acts = tuple(self.activations)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError("need at least two layer sizes, all >= 1")
        if len(acts) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)


def mlp(layer_sizes, activations=None):
    """MLP model with identity output and a shared hidden activation (default tanh)."""
    sizes = tuple(layer_sizes)
    if activations is None:
        activations = ("tanh",) * (len(sizes) - 2) + ("identity",)
    return MlpModel(sizes, tuple(activations))


def mlp_parameter_count(layer_sizes):
    """Total parameters of a fully connected net: sum of weights plus shifts."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError("need at least two layer sizes, all >= 1")
    return sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))


# --------------------------------------------------------------------------
# the problem oracle bundle
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    model: object
    loss: str
    regularizer: Regularizer
    data: Dataset

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if isinstance(self.model, LinearModel):
            if not self.data.binary:
                raise ValueError("linear models support binary labels only")
        elif isinstance(self.model, MlpModel):
            if self.model.layer_sizes[0] != self.data.d:
                raise ShapeError("first layer size must equal the feature dimension")
            if self.model.layer_sizes[-1] != self.data.d_y:
                raise ShapeError("last layer size must equal the label dimension")
            if self.loss in ("logistic", "hinge", "zero_one") and self.data.d_y != 1:
                raise ValueError(f"{self.loss} loss needs a scalar network output")
        else:
            raise ValueError("model must be LinearModel or MlpModel")

    # -- structure -------------------------------------------------------

    @property
    def shape_map(self):
        if isinstance(self.model, LinearModel):
            return _params.linear_shape_map(self.data.d)
        return _params.mlp_shape_map(self.model.layer_sizes)

    @property
    def dim(self):
        return _params.shape_map_size(self.shape_map)

    @property
    def is_convex(self):
        return isinstance(self.model, LinearModel) and self.loss != "zero_one"

    def with_data(self, data):
        if data.d != self.data.d:
            raise ShapeError("replacement data must keep the feature dimension")
        return replace(self, data=data)

    def initial_point(self, seed=None):
        """Zeros for linear models; seeded per-layer uniform init for networks."""
        if isinstance(self.model, LinearModel):
            return np.zeros(self.dim)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return _params.init_mlp_params(self.model.layer_sizes, rng)

    def param_vector(self, w):
        return _params.ParamVector(self._flat(w), self.shape_map)

    def _flat(self, w):
        if isinstance(w, _params.ParamVector):
            w = w.values
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.dim,):
            raise ShapeError(f"parameter vector must have length {self.dim}, got {w.shape}")
        return w

    def _batch(self, batch):
        n = self.data.n
        if batch is None:
            return np.arange(n)
        idx = np.asarray(batch, dtype=np.intp).ravel()
        if idx.size == 0:
            raise ValueError("batch must be nonempty")
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError(f"batch indices must lie in [0, {n})")
        return idx

    # -- predictions -----------------------------------------------------

    def predictions(self, w, idx=None):
        """Raw model outputs over a batch: (m,) for scalar output, else (m, d_y)."""
        w = self._flat(w)
        X = self.data.features if idx is None else self.data.features[idx]
        if isinstance(self.model, LinearModel):
            return X @ w
        P, _, _ = networks.forward_batch(
            w, self.model.layer_sizes, self.model.activations, X)
        return P[:, 0] if self.data.d_y == 1 else P

    def predict(self, w, x):
        """Raw model output for one input (scalar for binary, vector otherwise)."""
        w = self._flat(w)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.data.d,):
            raise ShapeError(f"input must have length {self.data.d}")
        if isinstance(self.model, LinearModel):
            return float(x @ w)
        P, _, _ = networks.forward_batch(
            w, self.model.layer_sizes, self.model.activations, x[None, :])
        return float(P[0, 0]) if self.data.d_y == 1 else P[0]

    def predict_label(self, w, x):
        """Binary: the sign of the output with 0 mapped to +1.  Multi-class:
        the argmax index (lowest index on ties)."""
        p = self.predict(w, x)
        if isinstance(p, float):
            return 1.0 if p >= 0.0 else -1.0
        return int(np.argmax(p))

    # -- loss helpers ----------------------------------------------------

    def _margins(self, p, idx):
        y = self.data.labels[idx]
        return y * p

    def _loss_value_sum(self, p, idx):
        y = self.data.labels[idx]
        if self.loss == "logistic":
            return kern.logistic_loss_sum(y * p)
        if self.loss == "hinge":
            return float(np.sum(np.maximum(0.0, 1.0 - y * p)))
        if self.loss == "least_squares":
            return float(np.sum((p - y) ** 2))
        if self.loss == "zero_one":
            return float(np.sum(y * p <= 0.0))
        raise AssertionError

    def _coeffs(self, p, idx):
        """Per-sample d loss / d prediction for scalar-output losses."""
        y = self.data.labels[idx]
        if self.loss == "logistic":
            return -y * kern.logistic_sig_neg(y * p)
        if self.loss == "hinge":
            # subgradient 0 at margin exactly 1
            return -y * (y * p < 1.0).astype(np.float64)
        if self.loss == "least_squares":
            return 2.0 * (p - y)
        raise UnsupportedOracleError(f"{self.loss} loss has no gradient oracle")

    def _curvature(self, p, idx):
        """Per-sample d^2 loss / d prediction^2 (twice differentiable losses)."""
        y = self.data.labels[idx]
        if self.loss == "logistic":
            return kern.logistic_curvature(y * p)
        if self.loss == "least_squares":
            return 2.0 * np.ones_like(p)
        raise UnsupportedOracleError(f"{self.loss} loss has no curvature oracle")

    def _mlp_dloss(self, idx):
        y = self.data.labels[idx]
        if self.loss == "logistic":
            return lambda P: (-y * kern.logistic_sig_neg(y * P[:, 0]))[:, None]
        if self.loss == "hinge":
            return lambda P: (-y * (y * P[:, 0] < 1.0).astype(np.float64))[:, None]
        if self.loss == "least_squares":
            Y = y[:, None] if y.ndim == 1 else y
            return lambda P: 2.0 * (P - Y)
        raise UnsupportedOracleError(f"{self.loss} loss has no gradient oracle")

    def _mlp_d2loss(self, idx):
        y = self.data.labels[idx]
        if self.loss == "logistic":
            return lambda P: kern.logistic_curvature(y * P[:, 0])[:, None]
        if self.loss == "least_squares":
            return lambda P: 2.0 * np.ones_like(P)
        raise UnsupportedOracleError(f"{self.loss} loss has no curvature oracle")

    # -- oracles ---------------------------------------------------------

    def value(self, w):
        """(1/n) sum of losses plus the regularizer term."""
        w = self._flat(w)
        idx = np.arange(self.data.n)
        p = self.predictions(w)
        return self._loss_value_sum(p, idx) / self.data.n + self.regularizer.value(w)

    def average_loss(self, w, data=None):
        """Mean loss without the regularizer (train/test loss in the glossary sense)."""
        prob = self if data is None else self.with_data(data)
        w = prob._flat(w)
        idx = np.arange(prob.data.n)
        return prob._loss_value_sum(prob.predictions(w), idx) / prob.data.n

    def gradient(self, w):
        """Gradient of the smooth part (loss mean plus l2 term; prox covers l1)."""
        return self.minibatch_gradient(w, None)

    def minibatch_gradient(self, w, batch):
        """Average of per-sample loss gradients over the batch plus the full
        regularizer gradient.  ``batch=None`` means all samples; duplicate
        indices are averaged as drawn."""
        w = self._flat(w)
        idx = self._batch(batch)
        if isinstance(self.model, LinearModel):
            Xb = self.data.features[idx]
            c = self._coeffs(Xb @ w, idx)
            g = Xb.T @ c / idx.size
        else:
            X = self.data.features[idx]
            P, zs, acts = networks.forward_batch(
                w, self.model.layer_sizes, self.model.activations, X)
            D = self._mlp_dloss(idx)(P)
            g = networks.grad_batch(
                w, self.model.layer_sizes, self.model.activations, zs, acts, D
            ) / idx.size
        return g + self.regularizer.smooth_gradient(w)

    def per_sample_loss_gradients(self, w, batch=None):
        """Stacked per-sample loss gradients (no regularizer), one row per index."""
        w = self._flat(w)
        idx = self._batch(batch)
        if isinstance(self.model, LinearModel):
            Xb = self.data.features[idx]
            c = self._coeffs(Xb @ w, idx)
            return c[:, None] * Xb
        rows = np.empty((idx.size, self.dim))
        for r, i in enumerate(idx):
            one = np.array([i])
            X = self.data.features[one]
            P, zs, acts = networks.forward_batch(
                w, self.model.layer_sizes, self.model.activations, X)
            D = self._mlp_dloss(one)(P)
            rows[r] = networks.grad_batch(
                w, self.model.layer_sizes, self.model.activations, zs, acts, D)
        return rows

    def hessian_vector_product(self, w, v, batch=None):
        """(batch Hessian of F) . v without forming any d x d matrix."""
        w = self._flat(w)
        v = self._flat(v)
        idx = self._batch(batch)
        if isinstance(self.model, LinearModel):
            Xb = self.data.features[idx]
            curv = self._curvature(Xb @ w, idx)
            hv = Xb.T @ (curv * (Xb @ v)) / idx.size
        else:
            self._mlp_d2loss(idx)  # reject unsupported losses before any work
            X = self.data.features[idx]
            hv = networks.hvp_batch(
                w, v, self.model.layer_sizes, self.model.activations, X,
                self._mlp_dloss(idx), self._mlp_d2loss(idx)) / idx.size
        return hv + self.regularizer.hvp(v)

    def gauss_newton_vector_product(self, w, v, batch=None):
        """Positive-semidefinite Gauss-Newton product (equals the Hessian
        product for linear models, whose second-order model term vanishes)."""
        w = self._flat(w)
        v = self._flat(v)
        idx = self._batch(batch)
        if isinstance(self.model, LinearModel):
            return self.hessian_vector_product(w, v, batch)
        self._mlp_d2loss(idx)
        X = self.data.features[idx]
        gv = networks.gnvp_batch(
            w, v, self.model.layer_sizes, self.model.activations, X,
            self._mlp_d2loss(idx)) / idx.size
        return gv + self.regularizer.hvp(v)


def mlp_forward(problem, w, x):
    """Forward pass for one input; returns (prediction, (pre, post) caches).

    ``pre[j]`` is W_j a_j + shift_j and ``post`` runs from the input vector
    through every activated layer, so backprop can reuse them without a
    second pass.
    """
    if not isinstance(problem.model, MlpModel):
        raise ValueError("mlp_forward needs an MLP problem")
    w = problem._flat(w)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.model.layer_sizes[0],):
        raise ShapeError(f"input must have length {problem.model.layer_sizes[0]}")
    P, zs, acts = networks.forward_batch(
        w, problem.model.layer_sizes, problem.model.activations, x[None, :])
    return P[0], ([z[0] for z in zs], [a[0] for a in acts])


def conv2d_valid(data, filt):
    """Valid 2-d cross-correlation: sliding dot products of filter over data."""
    data = np.asarray(data, dtype=np.float64)
    filt = np.asarray(filt, dtype=np.float64)
    if data.ndim != 2 or filt.ndim != 2:
        raise ValueError("data and filter must be 2-d")
    if filt.shape[0] > data.shape[0] or filt.shape[1] > data.shape[1]:
        raise ValueError("filter must not exceed the data in either dimension")
    return kern.conv2d_valid(data, filt)
