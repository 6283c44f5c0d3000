from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from core.exceptions import ShapeError

# A Vector is a 1-D float64 array; a batch of them is an (n, d) matrix.
Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """
    Fixed-dimension real vectors with integer class labels.

    The unit every loss, diagnostic and retrieval routine consumes.
    ``vectors`` is an (n, d) float64 matrix, ``labels`` an (n,) int64 array.
    Arrays are copied on construction and marked read-only.
    """

    vectors: np.ndarray
    labels: np.ndarray
    _class_ids: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if vectors.ndim == 1:
            vectors = vectors.reshape(1, -1)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise ShapeError(f"vectors must be an (n, d) matrix, got shape {vectors.shape}")
        if labels.ndim != 1 or labels.shape[0] != vectors.shape[0]:
            raise ShapeError(
                f"labels length {labels.shape} does not match {vectors.shape[0]} vectors"
            )
        if vectors.shape[0] < 1:
            raise ShapeError("a labeled set needs at least one vector")
        if np.any(labels < 0):
            raise ShapeError("class ids must be non-negative")
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, '_class_ids', np.unique(labels))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def class_ids(self) -> np.ndarray:
        """Sorted distinct class ids."""
        return self._class_ids

    @property
    def class_count(self) -> int:
        return len(self._class_ids)

    def members(self) -> Dict[int, np.ndarray]:
        """Class id -> indices of its members, in ascending index order."""
        return {int(c): np.flatnonzero(self.labels == c) for c in self._class_ids}

    def with_vectors(self, vectors: np.ndarray) -> 'LabeledSet':
        """Same labels, new vectors (e.g. embeddings of these features)."""
        return LabeledSet(vectors=vectors, labels=self.labels)

    def subset(self, indices: List[int]) -> 'LabeledSet':
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledSet(vectors=self.vectors[idx], labels=self.labels[idx])
