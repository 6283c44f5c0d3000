"""
Shared types for the supervised metric-learning losses.

Every loss consumes a ``LabeledSet`` of (nominally unit-norm) embeddings and
returns a ``LossOutput``: the mean loss over its units, one active flag per
unit, the gradient with respect to every input embedding and, for losses
that own parameters (ArcFace, CCL), the gradient with respect to the
``CenterBank`` rows.

Usage:
    from losses import LOSS_REGISTRY, LossConfig

    loss = LOSS_REGISTRY['triplet'](LossConfig(margin=1.0))
    out = loss.compute(batch)
    ratio = active_ratio(out)
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional

import numpy as np

from core.exceptions import ConfigError, ParameterError, UnknownClassError
from core.types import LabeledSet
from core.vector_math import UNIT_NORM_TOL, normalize_rows, row_norms


@dataclass(frozen=True)
class LossConfig:
    """
    Hyperparameters shared by the seven losses.

    Attributes:
        margin:          Euclidean margin m for contrastive / triplet.
        temperature:     Softmax temperature tau for InfoNCE / SCL / CCL.
        center_weight:   lambda_c, weight of the CCL pull-to-own-center term.
        arc_margin:      ArcFace additive angular margin m_a (radians).
        arc_scale:       ArcFace logit scale s.
        active_epsilon:  Softmax-family units count as active above this loss.
    """

    margin: float = 1.0
    temperature: float = 0.07
    center_weight: float = 10.0
    arc_margin: float = 0.5
    arc_scale: float = 64.0
    active_epsilon: float = 1e-6

    def __post_init__(self):
        if self.margin < 0:
            raise ParameterError("margin must be >= 0")
        if self.temperature <= 0:
            raise ParameterError("temperature must be > 0")
        if self.center_weight < 0:
            raise ParameterError("center_weight must be >= 0")
        if not 0.0 <= self.arc_margin < math.pi / 2:
            raise ParameterError("arc_margin must be in [0, pi/2)")
        if self.arc_scale <= 0:
            raise ParameterError("arc_scale must be > 0")
        if self.active_epsilon <= 0:
            raise ParameterError("active_epsilon must be > 0")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'LossConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown loss option(s): {unknown}")
        return cls(**raw)

    def to_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class LossOutput:
    """
    Result of one loss evaluation.

    ``active_flags`` has one entry per loss unit (pair, anchor or sample,
    depending on the loss); ``grad_embeddings`` one row per input embedding.
    ``grad_params`` is the (C, d) gradient for the center bank rows, or None.
    """

    value: float
    active_flags: np.ndarray
    grad_embeddings: np.ndarray
    unit_count: int
    grad_params: Optional[np.ndarray] = None
    unit_losses: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.active_flags = np.asarray(self.active_flags, dtype=bool)
        if self.active_flags.shape[0] != self.unit_count:
            raise ValueError(
                f"active_flags length {self.active_flags.shape[0]} != unit_count {self.unit_count}"
            )


def active_ratio(out: LossOutput) -> float:
    """Fraction of loss units that are still driving learning."""
    if out.unit_count < 1:
        return 0.0
    return int(np.count_nonzero(out.active_flags)) / out.unit_count


# ---------------------------------------------------------------------------
# Center bank
# ---------------------------------------------------------------------------

class CenterBank:
    """
    One unit-norm reference vector per class.

    Used as learnable class centers by CCL and as class-weight columns by
    ArcFace.  ``matrix`` rows follow ``class_ids`` order.  The trainer updates
    ``matrix`` through the optimizer and calls ``renormalize()`` after every
    step so the unit-norm invariant holds between evaluations.
    """

    def __init__(self, class_ids, matrix: np.ndarray):
        self.class_ids = np.asarray(class_ids, dtype=np.int64)
        self.matrix = np.array(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.class_ids.shape[0]:
            raise ValueError("center matrix must have one row per class id")
        if len(set(self.class_ids.tolist())) != self.class_ids.shape[0]:
            raise ValueError("duplicate class ids in center bank")
        self._row_of = {int(c): i for i, c in enumerate(self.class_ids)}

    @classmethod
    def random(cls, class_ids, dim: int, seed: int = 0) -> 'CenterBank':
        """Gaussian directions, normalized. Deterministic per seed."""
        rng = np.random.default_rng(seed)
        ids = np.asarray(sorted(int(c) for c in class_ids), dtype=np.int64)
        return cls(ids, normalize_rows(rng.standard_normal((ids.shape[0], dim))))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def centers(self) -> Dict[int, np.ndarray]:
        return {int(c): self.matrix[i] for i, c in enumerate(self.class_ids)}

    def __len__(self) -> int:
        return self.class_ids.shape[0]

    def rows_for(self, labels: np.ndarray) -> np.ndarray:
        """Row index of each label; unknown labels raise UnknownClassError."""
        try:
            return np.array([self._row_of[int(y)] for y in labels], dtype=np.int64)
        except KeyError as exc:
            raise UnknownClassError(f"no center for class {exc.args[0]}") from None

    def renormalize(self) -> None:
        self.matrix = normalize_rows(self.matrix)

    def is_unit_norm(self) -> bool:
        return bool(np.all(np.abs(row_norms(self.matrix) - 1.0) <= UNIT_NORM_TOL))

    def copy(self) -> 'CenterBank':
        return CenterBank(self.class_ids.copy(), self.matrix.copy())


# ---------------------------------------------------------------------------
# Loss ABC
# ---------------------------------------------------------------------------

class MetricLoss(ABC):
    """
    Abstract base class for all losses.

    Subclasses implement ``compute``; losses that own a center bank set
    ``requires_bank = True`` and receive it as the ``bank`` argument.
    Evaluations are pure: nothing on the instance changes between calls.
    """

    name: str = ''
    requires_bank: bool = False

    def __init__(self, config: Optional[LossConfig] = None):
        self.config = config or LossConfig()

    @abstractmethod
    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        pass

    def __call__(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        return self.compute(batch, bank)

    # ------------------------------------------------------------------
    # Shared helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _same_class_mask(labels: np.ndarray) -> np.ndarray:
        """(n, n) boolean, True where labels agree, diagonal excluded."""
        same = labels[:, None] == labels[None, :]
        np.fill_diagonal(same, False)
        return same

    def _require_bank(self, bank: Optional[CenterBank], labels: np.ndarray) -> np.ndarray:
        if bank is None:
            raise UnknownClassError(f"{self.name} needs a center bank")
        return bank.rows_for(labels)


def log_softmax_rows(logits: np.ndarray, mask: Optional[np.ndarray] = None):
    """
    Numerically stable row-wise (logsumexp, softmax).

    ``mask`` marks admissible entries; masked-out entries get probability 0.
    Every row must have at least one admissible entry.
    """
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    row_max = np.max(logits, axis=1, keepdims=True)
    shifted = np.exp(logits - row_max)
    total = np.sum(shifted, axis=1, keepdims=True)
    lse = (row_max + np.log(total))[:, 0]
    return lse, shifted / total
