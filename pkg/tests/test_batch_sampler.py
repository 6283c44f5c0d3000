"""
Unit tests for data.batch_sampler.

Covers:
- BatchPlan derivation and validation
- pk_balanced: P distinct classes x K, no repeats within an epoch while
  classes have unused samples, small classes drawn with replacement
- npair_pairs: exactly two per class
- random: chunking and trailing chunk handling
- determinism per (seed, epoch)
"""

import logging
from collections import Counter

import numpy as np
import pytest

from core.exceptions import ConfigError, ParameterError
from data.batch_sampler import (
    BatchPlan,
    NPairSampler,
    PKBalancedSampler,
    RandomSampler,
    make_sampler,
    sample_batches,
)
from data.dataset import FeatureDataset


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _dataset(per_class=(8, 8, 8, 8), d=3):
    labels = np.concatenate([np.full(n, c) for c, n in enumerate(per_class)])
    features = np.random.default_rng(0).standard_normal((labels.shape[0], d))
    return FeatureDataset.from_arrays(features, labels)


# ---------------------------------------------------------------------------
# BatchPlan
# ---------------------------------------------------------------------------

class TestBatchPlan:

    def test_batch_size_derived(self):
        assert BatchPlan('pk_balanced', P=16, K=4).batch_size == 64

    def test_npair_forces_k_two(self):
        plan = BatchPlan('npair_pairs', P=8, K=4)
        assert (plan.K, plan.batch_size) == (2, 16)

    def test_random_needs_batch_size(self):
        with pytest.raises(ParameterError):
            BatchPlan('random')

    def test_inconsistent_batch_size(self):
        with pytest.raises(ParameterError):
            BatchPlan('pk_balanced', P=4, K=4, batch_size=20)

    def test_unknown_strategy(self):
        with pytest.raises(ConfigError, match='Available'):
            BatchPlan('hard_mining')

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            BatchPlan.from_dict({'strategy': 'random', 'size': 8})

    def test_make_sampler_dispatch(self):
        assert isinstance(make_sampler(BatchPlan('pk_balanced', P=2, K=2)), PKBalancedSampler)
        assert isinstance(make_sampler(BatchPlan('npair_pairs', P=2)), NPairSampler)
        assert isinstance(make_sampler(BatchPlan('random', batch_size=4)), RandomSampler)


# ---------------------------------------------------------------------------
# pk_balanced
# ---------------------------------------------------------------------------

class TestPKBalanced:

    def test_each_batch_has_p_classes_of_k(self):
        plan = BatchPlan('pk_balanced', P=2, K=4, seed=0)
        for batch in sample_batches(_dataset(), plan, epoch_seed=0):
            counts = Counter(batch.labels.tolist())
            assert len(counts) == 2
            assert set(counts.values()) == {4}

    def test_batches_per_epoch(self):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=2, K=4))
        ds = _dataset()
        assert sampler.batches_per_epoch(ds) == 4
        assert len(list(sampler.indices(ds, 0))) == 4

    def test_no_repeats_within_epoch(self):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=2, K=4, seed=3))
        seen = np.concatenate(list(sampler.indices(_dataset(), 0)))
        # 4 batches x 8 samples cover all 32 samples exactly once
        assert sorted(seen.tolist()) == list(range(32))

    def test_no_duplicates_inside_batch_after_exhaustion(self):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=2, K=3, seed=1))
        ds = _dataset(per_class=(5, 5, 5))
        for idx in sampler.indices(ds, 0):
            assert len(set(idx.tolist())) == idx.shape[0]

    def test_small_class_sampled_with_replacement(self, caplog):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=2, K=4, seed=0))
        ds = _dataset(per_class=(2, 8))
        with caplog.at_level(logging.WARNING):
            batches = list(sampler.batches(ds, 0))
            list(sampler.batches(ds, 1))
        for batch in batches:
            assert Counter(batch.labels.tolist()) == {0: 4, 1: 4}
        assert sum('with replacement' in r.message for r in caplog.records) == 1

    def test_too_few_classes(self):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=5, K=2))
        with pytest.raises(ParameterError):
            list(sampler.indices(_dataset(), 0))

    def test_deterministic_per_seed_and_epoch(self):
        sampler = PKBalancedSampler(BatchPlan('pk_balanced', P=2, K=2, seed=4))
        ds = _dataset()
        first = [b.tolist() for b in sampler.indices(ds, 7)]
        again = [b.tolist() for b in sampler.indices(ds, 7)]
        other = [b.tolist() for b in sampler.indices(ds, 8)]
        assert first == again
        assert first != other


# ---------------------------------------------------------------------------
# npair_pairs and random
# ---------------------------------------------------------------------------

class TestOtherStrategies:

    def test_npair_two_per_class(self):
        plan = BatchPlan('npair_pairs', P=3, seed=0)
        for batch in sample_batches(_dataset(), plan, epoch_seed=0):
            counts = Counter(batch.labels.tolist())
            assert len(counts) == 3
            assert set(counts.values()) == {2}

    def test_npair_rejects_other_k(self):
        plan = BatchPlan('pk_balanced', P=2, K=3)
        with pytest.raises(ParameterError):
            NPairSampler(plan)

    def test_random_covers_dataset(self):
        sampler = RandomSampler(BatchPlan('random', batch_size=10, seed=0))
        chunks = list(sampler.indices(_dataset(), 0))
        assert [c.shape[0] for c in chunks] == [10, 10, 10, 2]
        assert sorted(np.concatenate(chunks).tolist()) == list(range(32))

    def test_random_drops_trailing_singleton(self):
        sampler = RandomSampler(BatchPlan('random', batch_size=3, seed=0))
        chunks = list(sampler.indices(_dataset(per_class=(5, 5)), 0))
        assert [c.shape[0] for c in chunks] == [3, 3, 3]

    def test_random_batch_larger_than_dataset(self):
        sampler = RandomSampler(BatchPlan('random', batch_size=64))
        with pytest.raises(ParameterError):
            list(sampler.indices(_dataset(), 0))
