"""Random probing matrices ``Y`` (n x k) with ``E[Y Y^T] = I``.

``Y = Z / sqrt(k)`` where ``Z`` has Rademacher entries, standard normal
entries, or independent columns drawn uniformly (with replacement) from
``{sqrt(n) e_1, ..., sqrt(n) e_n}``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_SKETCH_WIDTH = 5


class Distribution(str, enum.Enum):
    RADEMACHER = "rademacher"
    GAUSSIAN = "gaussian"
    SCALED_IDENTITY = "scaled_identity"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"scaledidentitycolumns": "scaled_identity", "scaled_identity_columns": "scaled_identity",
                   "normal": "gaussian"}
        key = aliases.get(key.replace(" ", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(
                f"unknown probing distribution {value!r}; expected one of {[d.value for d in cls]}"
            ) from None


@dataclass(frozen=True, eq=False)
class ProbingMatrix:
    Y: np.ndarray
    distribution: Distribution
    seed: object = None
    # column indices for SCALED_IDENTITY, so callers can slice instead of multiply
    indices: np.ndarray | None = None

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def k(self):
        return self.Y.shape[1]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate(distribution, n, k=DEFAULT_SKETCH_WIDTH, seed=None):
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    dist = Distribution.parse(distribution)
    rng = _rng(seed)
    scale = 1.0 / np.sqrt(k)
    indices = None
    if dist is Distribution.RADEMACHER:
        Y = np.where(rng.random((n, k)) < 0.5, -scale, scale)
    elif dist is Distribution.GAUSSIAN:
        Y = rng.standard_normal((n, k)) * scale
    else:
        indices = rng.integers(0, n, size=k)
        Y = np.zeros((n, k))
        Y[indices, np.arange(k)] = np.sqrt(n / k)
    return ProbingMatrix(Y, dist, seed, indices)


def check_isotropy(distribution, n, k, num_samples, seed=None, chunk=8192):
    """Max-entry deviation of the sample mean of ``Y Y^T`` from the identity."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    dist = Distribution.parse(distribution)
    rng = _rng(seed)
    total = np.zeros((n, n))
    done = 0
    while done < num_samples:
        b = min(chunk, num_samples - done)
        if dist is Distribution.SCALED_IDENTITY:
            idx = rng.integers(0, n, size=(b, k))
            counts = np.bincount(idx.ravel(), minlength=n)
            total[np.diag_indices(n)] += counts * (n / k)
        else:
            if dist is Distribution.RADEMACHER:
                Z = np.where(rng.random((b, n, k)) < 0.5, -1.0, 1.0)
            else:
                Z = rng.standard_normal((b, n, k))
            total += np.einsum("bik,bjk->ij", Z, Z) / k
        done += b
    return float(np.max(np.abs(total / num_samples - np.eye(n))))
