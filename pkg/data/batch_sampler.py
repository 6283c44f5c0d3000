"""
Class-structured batch samplers.

Usage:
    plan = BatchPlan('pk_balanced', P=16, K=4, seed=0)
    for batch in sample_batches(train_ds, plan, epoch_seed=3):
        ...
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

from core.exceptions import ConfigError, ParameterError
from core.types import LabeledSet
from data.dataset import FeatureDataset

STRATEGIES = ('pk_balanced', 'npair_pairs', 'random')


@dataclass(frozen=True)
class BatchPlan:
    """
    Attributes:
        strategy:    'pk_balanced' | 'npair_pairs' | 'random'.
        P:           Classes per batch (pk_balanced, npair_pairs).
        K:           Samples per class; npair_pairs forces K = 2.
        batch_size:  Derived as P*K for the class-structured strategies;
                     required for 'random'.
        seed:        Sampler seed, combined with the epoch seed.
    """

    strategy: str = 'pk_balanced'
    P: int = 16
    K: int = 4
    batch_size: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"Unknown batch strategy '{self.strategy}'. Available: {list(STRATEGIES)}")
        if self.strategy == 'random':
            if self.batch_size is None or self.batch_size < 2:
                raise ParameterError("random batches need batch_size >= 2")
            return
        if self.strategy == 'npair_pairs' and self.K != 2:
            object.__setattr__(self, 'K', 2)
        if self.P < 2:
            raise ParameterError("P must be >= 2")
        if self.K < 2:
            raise ParameterError("K must be >= 2")
        if self.batch_size is None:
            object.__setattr__(self, 'batch_size', self.P * self.K)
        elif self.batch_size != self.P * self.K:
            raise ParameterError(f"batch_size {self.batch_size} != P*K = {self.P * self.K}")

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'BatchPlan':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown batch option(s): {unknown}")
        return cls(**raw)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class BatchSampler(ABC):
    """
    Abstract base class for samplers.

    ``indices`` yields one index array per batch for an epoch; the RNG is
    ``default_rng([plan.seed, epoch_seed])`` so (seed, epoch) fixes the sequence.
    """

    def __init__(self, plan: BatchPlan):
        self.plan = plan
        self.logger = logging.getLogger(__name__)

    def _rng(self, epoch_seed: int) -> np.random.Generator:
        return np.random.default_rng([self.plan.seed, epoch_seed])

    @abstractmethod
    def indices(self, ds: FeatureDataset, epoch_seed: int) -> Iterator[np.ndarray]:
        pass

    def batches(self, ds: FeatureDataset, epoch_seed: int) -> Iterator[LabeledSet]:
        data = ds.as_labeled()
        for idx in self.indices(ds, epoch_seed):
            yield data.subset(idx)

    def batches_per_epoch(self, ds: FeatureDataset) -> int:
        return math.ceil(len(ds) / self.plan.batch_size)


class PKBalancedSampler(BatchSampler):
    """
    P classes x K samples per batch.

    Each class keeps a shuffled queue for the epoch; every batch takes the
    P classes with the most unused samples (random order among ties) and
    pops K from each, so samples are drawn without replacement until a
    queue runs dry.  A class with fewer than K members is drawn with
    replacement.
    """

    def __init__(self, plan: BatchPlan):
        super().__init__(plan)
        self._warned = set()

    def indices(self, ds: FeatureDataset, epoch_seed: int) -> Iterator[np.ndarray]:
        P, K = self.plan.P, self.plan.K
        members = ds.as_labeled().members()
        if len(members) < P:
            raise ParameterError(f"plan needs P={P} classes, dataset has {len(members)}")

        class_ids = sorted(members)
        small = [c for c in class_ids if members[c].shape[0] < K]
        for c in small:
            if c not in self._warned:
                self.logger.warning(
                    "class %d has %d sample(s) < K=%d; sampling it with replacement",
                    c, members[c].shape[0], K,
                )
                self._warned.add(c)

        rng = self._rng(epoch_seed)
        queues: Dict[int, List[int]] = {c: rng.permutation(members[c]).tolist() for c in class_ids}

        for _ in range(self.batches_per_epoch(ds)):
            order = rng.permutation(len(class_ids))
            # stable sort keeps the random order among classes with equal remaining counts
            ranked = sorted(order, key=lambda i: -len(queues[class_ids[i]]))
            chosen = [class_ids[i] for i in ranked[:P]]

            batch: List[int] = []
            for c in chosen:
                batch.extend(self._take(members[c], queues[c], K, rng))
            yield np.asarray(batch, dtype=np.int64)

    @staticmethod
    def _take(pool: np.ndarray, queue: List[int], k: int, rng: np.random.Generator) -> List[int]:
        if pool.shape[0] < k:
            return rng.choice(pool, size=k, replace=True).tolist()
        taken = queue[:k]
        del queue[:k]
        if len(taken) < k:
            # queue exhausted: top up from the rest of the class, no duplicates
            rest = np.setdiff1d(pool, taken)
            taken.extend(rng.choice(rest, size=k - len(taken), replace=False).tolist())
        return taken


class NPairSampler(PKBalancedSampler):
    """Distinct classes, exactly two samples each (anchor, positive)."""

    def __init__(self, plan: BatchPlan):
        if plan.K != 2:
            raise ParameterError("npair batches need K = 2")
        super().__init__(plan)


class RandomSampler(BatchSampler):
    """Uniform shuffle split into ``batch_size`` chunks; a trailing chunk under 2 is dropped."""

    def indices(self, ds: FeatureDataset, epoch_seed: int) -> Iterator[np.ndarray]:
        size = self.plan.batch_size
        if len(ds) < size:
            raise ParameterError(f"batch_size {size} exceeds dataset size {len(ds)}")
        perm = self._rng(epoch_seed).permutation(len(ds))
        for start in range(0, len(ds), size):
            chunk = perm[start:start + size]
            if chunk.shape[0] >= 2:
                yield chunk


SAMPLER_MAP = {
    'pk_balanced': PKBalancedSampler,
    'npair_pairs': NPairSampler,
    'random': RandomSampler,
}


def make_sampler(plan: BatchPlan) -> BatchSampler:
    return SAMPLER_MAP[plan.strategy](plan)


def sample_batches(ds: FeatureDataset, plan: BatchPlan, epoch_seed: int) -> Iterator[LabeledSet]:
    return make_sampler(plan).batches(ds, epoch_seed)
