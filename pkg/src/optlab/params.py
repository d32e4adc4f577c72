"""Flat parameter vectors and the layer shape maps that interpret them.

A shape map is a tuple whose entries are either ``(rows, cols)`` for a layer
weight matrix or a plain int for a shift vector; a linear model is the single
entry ``(1, d)``.  Solvers work on the flat float64 array; the shape map is
what turns it back into layers.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def linear_shape_map(d):
    return ((1, int(d)),)


def mlp_shape_map(layer_sizes):
    entries = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        entries.append((int(fan_out), int(fan_in)))
        entries.append(int(fan_out))
    return tuple(entries)


def shape_map_size(shape_map):
    total = 0
    for entry in shape_map:
        total += entry[0] * entry[1] if isinstance(entry, tuple) else entry
    return total


@dataclass(frozen=True)
class ParamVector:
    """Flat float64 vector plus the immutable shape map that interprets it."""

    values: np.ndarray
    shape_map: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.shape[0] != shape_map_size(self.shape_map):
            raise ShapeError(
                f"flat length {values.shape[0]} does not match shape map size "
                f"{shape_map_size(self.shape_map)}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape_map", tuple(self.shape_map))

    def unpack(self):
        """Split into per-entry arrays (matrices for weights, vectors for shifts)."""
        return unpack(self.values, self.shape_map)

    @property
    def size(self):
        return self.values.shape[0]


def unpack(flat, shape_map):
    arrays = []
    offset = 0
    for entry in shape_map:
        if isinstance(entry, tuple):
            count = entry[0] * entry[1]
            arrays.append(flat[offset:offset + count].reshape(entry))
        else:
            count = entry
            arrays.append(flat[offset:offset + count])
        offset += count
    if offset != flat.shape[0]:
        raise ShapeError("flat vector length does not match shape map")
    return arrays


def pack(arrays):
    return np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])


def init_mlp_params(layer_sizes, rng):
    """Per-layer uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] (shifts too)."""
    chunks = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_out * fan_in))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return np.concatenate(chunks)
