"""Feed-forward network evaluation.

Forward pass per the layer recursion a_{j+1} = s_j(W_j a_j + shift_j),
reverse-mode backprop for gradients, and a forward-over-reverse directional
pass for exact Hessian-vector products (one extra forward plus one extra
backward sweep per product; no d x d matrix is ever formed).

All batch functions take X as (m, d) rows and return parameter-space SUMS
over the batch; callers divide by the batch size.
"""

import numpy as np

from .errors import UnsupportedOracleError
from . import params as _params

KINK_TOL = 1e-12


def _sigmoid(x):
    t = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))


def _act(kind, z):
    if kind == "identity":
        return z
    if kind == "sigmoid":
        return _sigmoid(z)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {kind!r}")


def _act_deriv(kind, z):
    if kind == "identity":
        return np.ones_like(z)
    if kind == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s)
    if kind == "tanh":
        return 1.0 - np.tanh(z) ** 2
    if kind == "relu":
        # subderivative at 0 is 0 by convention
        return (z > 0.0).astype(np.float64)
    raise ValueError(f"unknown activation {kind!r}")


def _act_second(kind, z):
    if kind in ("identity", "relu"):
        return np.zeros_like(z)
    if kind == "sigmoid":
        s = _sigmoid(z)
        return s * (1.0 - s) * (1.0 - 2.0 * s)
    if kind == "tanh":
        t = np.tanh(z)
        return -2.0 * t * (1.0 - t ** 2)
    raise ValueError(f"unknown activation {kind!r}")


def unpack_layers(w_flat, layer_sizes):
    """Split a flat parameter vector into ([W_j], [shift_j])."""
    arrays = _params.unpack(w_flat, _params.mlp_shape_map(layer_sizes))
    return arrays[0::2], arrays[1::2]


def forward_batch(w_flat, layer_sizes, activations, X):
    """Run the layer recursion; returns (outputs, pre-activations, activations).

    ``zs[j]`` holds W_j a_j + shift_j and ``acts[j]`` the layer inputs, with
    acts[0] = X and acts[-1] the network output.
    """
    weights, shifts = unpack_layers(w_flat, layer_sizes)
    acts = [np.asarray(X, dtype=np.float64)]
    zs = []
    for W, b, kind in zip(weights, shifts, activations):
        z = acts[-1] @ W.T + b
        zs.append(z)
        acts.append(_act(kind, z))
    return acts[-1], zs, acts


def grad_batch(w_flat, layer_sizes, activations, zs, acts, dloss_dp):
    """Backprop the per-sample loss derivatives; returns the summed flat gradient."""
    weights, _ = unpack_layers(w_flat, layer_sizes)
    chunks = [None] * (2 * len(weights))
    delta = dloss_dp
    for j in range(len(weights) - 1, -1, -1):
        g = delta * _act_deriv(activations[j], zs[j])
        chunks[2 * j] = g.T @ acts[j]
        chunks[2 * j + 1] = g.sum(axis=0)
        if j > 0:
            delta = g @ weights[j]
    return _params.pack(chunks)


def _check_relu_kinks(activations, zs):
    for kind, z in zip(activations, zs):
        if kind == "relu" and np.any(np.abs(z) < KINK_TOL):
            raise UnsupportedOracleError(
                "relu pre-activation within 1e-12 of its kink; "
                "second-order oracles are refused here"
            )


def hvp_batch(w_flat, v_flat, layer_sizes, activations, X, dloss_dp, d2loss_diag):
    """Exact (sum over batch) Hessian-vector product via the directional pass.

    ``dloss_dp(P)`` and ``d2loss_diag(P)`` map network outputs to the
    per-sample loss derivative and the diagonal of the per-sample loss
    Hessian (all losses here have diagonal curvature in p).
    """
    weights, _ = unpack_layers(w_flat, layer_sizes)
    v_weights, v_shifts = unpack_layers(v_flat, layer_sizes)
    P, zs, acts = forward_batch(w_flat, layer_sizes, activations, X)
    _check_relu_kinks(activations, zs)

    # forward directional sweep: r_acts[j] is the derivative of layer input j along v
    r_acts = [np.zeros_like(acts[0])]
    r_zs = []
    for j, (W, kind) in enumerate(zip(weights, activations)):
        rz = acts[j] @ v_weights[j].T + r_acts[j] @ W.T + v_shifts[j]
        r_zs.append(rz)
        r_acts.append(_act_deriv(kind, zs[j]) * rz)

    delta = dloss_dp(P)
    r_delta = d2loss_diag(P) * r_acts[-1]
    chunks = [None] * (2 * len(weights))
    for j in range(len(weights) - 1, -1, -1):
        sp = _act_deriv(activations[j], zs[j])
        g = delta * sp
        rg = r_delta * sp + delta * _act_second(activations[j], zs[j]) * r_zs[j]
        chunks[2 * j] = rg.T @ acts[j] + g.T @ r_acts[j]
        chunks[2 * j + 1] = rg.sum(axis=0)
        if j > 0:
            r_delta = rg @ weights[j] + g @ v_weights[j]
            delta = g @ weights[j]
    return _params.pack(chunks)


def gnvp_batch(w_flat, v_flat, layer_sizes, activations, X, d2loss_diag):
    """Gauss-Newton product: J^T (d2 loss) J v summed over the batch.

    The forward sweep produces Jv; the loss curvature scales it; a linear
    backward sweep (no activation second derivatives, no loss gradient term)
    applies J^T.
    """
    weights, _ = unpack_layers(w_flat, layer_sizes)
    v_weights, v_shifts = unpack_layers(v_flat, layer_sizes)
    P, zs, acts = forward_batch(w_flat, layer_sizes, activations, X)
    _check_relu_kinks(activations, zs)

    r_acts = [np.zeros_like(acts[0])]
    r_zs = []
    for j, (W, kind) in enumerate(zip(weights, activations)):
        rz = acts[j] @ v_weights[j].T + r_acts[j] @ W.T + v_shifts[j]
        r_zs.append(rz)
        r_acts.append(_act_deriv(kind, zs[j]) * rz)

    delta = d2loss_diag(P) * r_acts[-1]
    chunks = [None] * (2 * len(weights))
    for j in range(len(weights) - 1, -1, -1):
        g = delta * _act_deriv(activations[j], zs[j])
        chunks[2 * j] = g.T @ acts[j]
        chunks[2 * j + 1] = g.sum(axis=0)
        if j > 0:
            delta = g @ weights[j]
    return _params.pack(chunks)
