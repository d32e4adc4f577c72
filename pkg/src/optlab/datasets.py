"""Datasets: validation, LIBSVM text I/O, and synthetic generators."""

from dataclasses import dataclass

import numpy as np

from .errors import LibsvmParseError, ShapeError


@dataclass(frozen=True)
class Dataset:
    """Dense sample set.

    ``features`` is n x d.  ``labels`` is either a length-n vector with
    entries exactly +1/-1 (binary) or an n x d_y one-hot matrix
    (multi-class).  Arrays are copied and frozen so no oracle can mutate
    shared data.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        labs = np.array(self.labels, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ShapeError("features must be a nonempty n x d matrix")
        if labs.shape[0] != feats.shape[0]:
            raise ShapeError("labels length must match the number of rows")
        if labs.ndim == 1:
            if not np.all(np.abs(labs) == 1.0):
                raise ValueError("binary labels must be exactly +1 or -1")
        elif labs.ndim == 2:
            if not (np.all((labs == 0.0) | (labs == 1.0)) and np.all(labs.sum(axis=1) == 1.0)):
                raise ValueError("multi-class labels must be one-hot rows")
        else:
            raise ShapeError("labels must be a vector or a one-hot matrix")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def binary(self):
        return self.labels.ndim == 1

    @property
    def d_y(self):
        return 1 if self.binary else self.labels.shape[1]


def parse_libsvm(text, map_zero_one=False):
    """Parse LIBSVM-format text into a dense binary Dataset.

    Each line is ``label idx:val idx:val ...`` with 1-based strictly
    increasing indices.  Labels must be +1/-1 (with ``map_zero_one``, 0/1 are
    mapped to -1/+1).  Absent indices are zero; d is the largest index seen.
    """
    rows = []
    labels = []
    max_index = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(line_no, f"bad label token {tokens[0]!r}") from None
        if map_zero_one and label in (0.0, 1.0):
            label = 1.0 if label == 1.0 else -1.0
        if label not in (1.0, -1.0):
            raise LibsvmParseError(line_no, f"label must be +1 or -1, got {label!r}")
        entries = []
        prev_index = 0
        for token in tokens[1:]:
            idx_str, _, val_str = token.partition(":")
            try:
                index = int(idx_str)
                value = float(val_str)
            except ValueError:
                raise LibsvmParseError(line_no, f"bad feature token {token!r}") from None
            if index <= prev_index:
                raise LibsvmParseError(
                    line_no, f"indices must be 1-based strictly increasing, got {index}"
                )
            prev_index = index
            entries.append((index, value))
        max_index = max(max_index, prev_index)
        rows.append(entries)
        labels.append(label)
    if not rows:
        raise LibsvmParseError(0, "no samples in input")
    features = np.zeros((len(rows), max(max_index, 1)))
    for i, entries in enumerate(rows):
        for index, value in entries:
            features[i, index - 1] = value
    return Dataset(features, np.array(labels))


def format_libsvm(dataset):
    """Render a binary Dataset as LIBSVM text (zeros omitted, repr precision)."""
    if not dataset.binary:
        raise ValueError("LIBSVM output supports binary labels only")
    lines = []
    for i in range(dataset.n):
        label = "+1" if dataset.labels[i] > 0 else "-1"
        parts = [label]
        row = dataset.features[i]
        for j in np.nonzero(row)[0]:
            parts.append(f"{j + 1}:{float(row[j])!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def write_libsvm(dataset, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_libsvm(dataset))


def read_libsvm(path, map_zero_one=False):
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh.read(), map_zero_one=map_zero_one)


def gen_synthetic(kind, n, d, seed, margin=2.0, noise_rate=0.0,
                  row_normalize=False, append_bias=False):
    """Generate a seeded binary classification dataset.

    kinds:
      two_gaussians   -- class means at +-(margin/2) e1, unit spherical noise,
                         alternating balanced labels
      given_separator -- standard normal features labeled by the sign of a
                         random hyperplane, each label flipped independently
                         with probability noise_rate

    ``row_normalize`` rescales every feature row to unit norm (labels are
    sign-based in both kinds, so separability is preserved); ``append_bias``
    then appends a constant-1 feature.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    if kind == "two_gaussians":
        labels = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        features = rng.standard_normal((n, d))
        features[:, 0] += labels * (margin / 2.0)
    elif kind == "given_separator":
        if not 0.0 <= noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        w_star = rng.standard_normal(d)
        features = rng.standard_normal((n, d))
        raw = features @ w_star
        labels = np.where(raw >= 0.0, 1.0, -1.0)
        flips = rng.random(n) < noise_rate
        labels = np.where(flips, -labels, labels)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    if row_normalize:
        norms = np.linalg.norm(features, axis=1)
        norms[norms == 0.0] = 1.0
        features = features / norms[:, None]
    if append_bias:
        features = np.hstack([features, np.ones((n, 1))])
    return Dataset(features, labels)
