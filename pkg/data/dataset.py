from dataclasses import dataclass

import numpy as np

from core.exceptions import ParameterError, ShapeError
from core.types import LabeledSet

SPLITS = ('train', 'test')


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """
    Raw (un-normalized) feature vectors with class labels and a split tag.

    Stands in for frozen backbone outputs: the projection head consumes
    ``as_labeled()``.  Immutable after load or generation.
    """

    data: LabeledSet
    split: str = 'train'

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ParameterError(f"Unknown split '{self.split}'. Available: {list(SPLITS)}")

    @classmethod
    def from_arrays(cls, features, labels, split: str = 'train') -> 'FeatureDataset':
        return cls(LabeledSet(vectors=features, labels=labels), split)

    @property
    def features(self) -> np.ndarray:
        return self.data.vectors

    @property
    def labels(self) -> np.ndarray:
        return self.data.labels

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def class_count(self) -> int:
        return self.data.class_count

    def __len__(self) -> int:
        return len(self.data)

    def as_labeled(self) -> LabeledSet:
        return self.data

    def require_trainable(self) -> None:
        """Training sets need n >= C >= 2."""
        if self.class_count < 2:
            raise ShapeError(f"training needs at least 2 classes, dataset has {self.class_count}")
