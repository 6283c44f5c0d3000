"""
Deterministic vector primitives shared by every other package.

Per-vector operations (``l2_normalize``, ``euclidean_distance``,
``cosine_distance``) carry the documented preconditions; the matrix helpers
below them are the vectorized forms the losses, diagnostics and retrieval
code run on.  All arithmetic is float64.
"""

from typing import Dict

import numpy as np

from core.exceptions import DegenerateInputError, PreconditionError, ShapeError
from core.types import LabeledSet, Vector

UNIT_NORM_TOL = 1e-6


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ShapeError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


# ---------------------------------------------------------------------------
# Per-vector operations
# ---------------------------------------------------------------------------

def l2_normalize(v: Vector) -> Vector:
    """Scale ``v`` to unit Euclidean norm. Zero vectors have no direction."""
    arr = _as_vector(v)
    norm = np.linalg.norm(arr)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateInputError("cannot normalize a zero (or non-finite) vector")
    return arr / norm


def euclidean_distance(a: Vector, b: Vector) -> float:
    a, b = _as_vector(a), _as_vector(b)
    _check_same_dim(a, b)
    return float(np.sqrt(np.sum((a - b) ** 2)))


def cosine_distance(a: Vector, b: Vector) -> float:
    """1 - <a, b> for unit-norm inputs."""
    a, b = _as_vector(a), _as_vector(b)
    _check_same_dim(a, b)
    for name, vec in (('a', a), ('b', b)):
        if abs(np.linalg.norm(vec) - 1.0) > UNIT_NORM_TOL:
            raise PreconditionError(f"cosine_distance: input {name} is not unit-norm")
    return float(1.0 - np.dot(a, b))


def class_centroids(s: LabeledSet) -> Dict[int, Vector]:
    """Arithmetic mean of each class's members. Centroids are not re-normalized."""
    return {c: s.vectors[idx].mean(axis=0) for c, idx in s.members().items()}


# ---------------------------------------------------------------------------
# Matrix helpers
# ---------------------------------------------------------------------------

def row_norms(m: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(m, dtype=np.float64) ** 2, axis=1))


def normalize_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = row_norms(m)
    if np.any(norms == 0.0):
        raise DegenerateInputError(
            f"cannot normalize zero rows at indices {np.flatnonzero(norms == 0.0).tolist()}"
        )
    return m / norms[:, None]


def require_unit_norm(m: np.ndarray, what: str = 'embeddings') -> None:
    deviation = np.abs(row_norms(m) - 1.0)
    if np.any(deviation > UNIT_NORM_TOL):
        worst = int(np.argmax(deviation))
        raise PreconditionError(
            f"{what} must be unit-norm (row {worst} deviates by {deviation[worst]:.3g})"
        )


def pairwise_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n, m) matrix of Euclidean distances, computed from explicit differences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    # row-by-row keeps memory at O(m*d) and identical rows at exactly 0
    for i in range(a.shape[0]):
        diff = b - a[i]
        out[i] = np.sqrt(np.sum(diff * diff, axis=1))
    return out


def pairwise_cosine_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(n, m) matrix of 1 - <a_i, b_j>; both inputs must be unit-norm rows."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    require_unit_norm(a)
    require_unit_norm(b)
    return 1.0 - a @ b.T
