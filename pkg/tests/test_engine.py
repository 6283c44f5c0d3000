"""
Tests for the training loop (engine.Trainer) and TrainerBuilder.

Covers:
- builder shortcuts, errors and defaults (npair sampler, center bank)
- one record per epoch, snapshots before training and every interval
- same seed -> identical log; different seed -> different log
- a non-finite loss aborts with NumericError and flushes the partial log
- center bank stays unit-norm while training
- head input width follows file data; a caller-supplied log is kept
"""

import numpy as np
import pytest

from analytics.train_log import TrainLog
from builder import TrainerBuilder
from core.config import ExperimentConfig
from core.exceptions import ConfigError, NumericError
from data.batch_sampler import NPairSampler, PKBalancedSampler
from data.synthetic import SyntheticSpec, generate_synthetic
from engine import Trainer
from losses.base import LossOutput, MetricLoss


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

SMALL = SyntheticSpec(class_count=4, samples_per_class=8, test_samples_per_class=4, dim=6)


def _builder(loss='triplet', epochs=3, seed=0, **loss_kwargs):
    return (
        TrainerBuilder()
        .set_synthetic(SMALL)
        .set_head(d_hidden=8, d_out=4, dropout_rate=0.1)
        .set_loss(loss, **loss_kwargs)
        .set_sampler('pk_balanced', P=2, K=4)
        .set_optimizer('adam', lr=1e-2)
        .set_epochs(epochs)
        .set_seed(seed)
        .set_snapshot_interval(2)
    )


class _NaNLoss(MetricLoss):
    name = 'nan'

    def compute(self, batch, bank=None):
        return LossOutput(
            value=float('nan'),
            active_flags=np.ones(1, dtype=bool),
            grad_embeddings=np.zeros_like(batch.vectors),
            unit_count=1,
        )


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------

class TestTrainerBuilder:

    def test_builds_trainer(self):
        trainer = _builder().build()
        assert isinstance(trainer, Trainer)
        assert trainer.head.d_in == SMALL.dim
        assert trainer.head.d_out == 4
        assert isinstance(trainer.sampler, PKBalancedSampler)

    def test_unknown_loss(self):
        with pytest.raises(ConfigError, match='Available'):
            TrainerBuilder().set_loss('lifted')

    def test_unknown_loss_option(self):
        with pytest.raises(ConfigError):
            TrainerBuilder().set_loss('triplet', margn=1.0)

    def test_unknown_sampler(self):
        with pytest.raises(ConfigError, match='Available'):
            TrainerBuilder().set_sampler('hardest')

    def test_unknown_optimizer(self):
        with pytest.raises(ConfigError, match='Available'):
            TrainerBuilder().set_optimizer('sgd')

    def test_missing_data(self):
        with pytest.raises(ConfigError, match='training data'):
            TrainerBuilder().set_loss('triplet').build()

    def test_missing_loss(self):
        with pytest.raises(ConfigError, match='loss'):
            TrainerBuilder().set_synthetic(SMALL).build()

    def test_npair_defaults_to_pair_batches(self):
        trainer = (
            TrainerBuilder().set_synthetic(SMALL).set_head(d_hidden=8, d_out=4)
            .set_loss('npair').build()
        )
        assert isinstance(trainer.sampler, NPairSampler)

    @pytest.mark.parametrize('loss', ['arcface', 'ccl'])
    def test_center_bank_created(self, loss):
        trainer = _builder(loss=loss).build()
        assert trainer.bank is not None
        assert trainer.bank.matrix.shape == (SMALL.class_count, 4)
        assert trainer.bank.is_unit_norm()

    def test_from_config(self):
        cfg = ExperimentConfig.from_dict({
            'loss': 'contrastive',
            'synthetic': SMALL.to_dict(),
            'head': {'d_in': 6, 'd_hidden': 8, 'd_out': 4},
            'batch': {'P': 2, 'K': 4},
            'epochs': 2,
            'seed': 5,
        })
        train = generate_synthetic(cfg.synthetic, 'train')
        trainer = TrainerBuilder.from_config(cfg, train).build()
        assert trainer.loss.name == 'contrastive'
        assert trainer.epochs == 2
        assert trainer.seed == 5
        assert trainer.optimizer.state.lr == cfg.optimizer.lr

    def test_from_config_head_follows_file_data_width(self):
        cfg = ExperimentConfig.from_dict({
            'train_path': 'train.json',
            'head': {'d_hidden': 8, 'd_out': 4},
            'batch': {'P': 2, 'K': 4},
        })
        train = generate_synthetic(SyntheticSpec(class_count=4, samples_per_class=8, dim=16), 'train')
        trainer = TrainerBuilder.from_config(cfg, train).build()
        assert trainer.head.d_in == 16
        assert trainer.embed(train.as_labeled()).vectors.shape == (32, 4)

    def test_list_options(self, capsys):
        TrainerBuilder.list_options()
        out = capsys.readouterr().out
        for key in ('triplet', 'pk_balanced', 'adam', 'coarse'):
            assert f"'{key}'" in out


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

class TestTrainer:

    def test_one_record_per_epoch(self):
        log = _builder(epochs=3).build().run()
        assert [r.epoch for r in log.records] == [0, 1, 2]
        for r in log.records:
            assert np.isfinite(r.loss)
            assert 0.0 <= r.active_ratio <= 1.0
            assert r.grad_norm >= 0.0

    def test_snapshot_schedule(self):
        log = _builder(epochs=5).build().run()
        assert sorted(log.snapshots) == [0, 2, 4]
        assert log.snapshots[0].sample_count == SMALL.class_count * SMALL.test_samples_per_class

    def test_zero_epochs_keeps_initial_snapshot(self):
        log = _builder(epochs=0).build().run()
        assert len(log) == 0
        assert list(log.snapshots) == [0]

    def test_deterministic_per_seed(self):
        a = _builder(seed=1).build().run()
        b = _builder(seed=1).build().run()
        c = _builder(seed=2).build().run()
        assert a.losses == b.losses
        assert a.grad_norms == b.grad_norms
        assert a.losses != c.losses

    def test_embeddings_are_unit_norm(self):
        trainer = _builder(epochs=1).build()
        trainer.run()
        z = trainer.embed(trainer.eval_set).vectors
        assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-9)

    def test_bank_stays_unit_norm(self):
        trainer = _builder(loss='ccl', epochs=2).build()
        trainer.run()
        assert trainer.bank.is_unit_norm()

    def test_non_finite_loss_flushes_partial_log(self, tmp_path):
        path = tmp_path / 'train_log.csv'
        trainer = (
            TrainerBuilder().set_synthetic(SMALL).set_head(d_hidden=8, d_out=4)
            .set_loss(_NaNLoss()).set_sampler('pk_balanced', P=2, K=4)
            .set_epochs(2).set_log_path(str(path)).build()
        )
        with pytest.raises(NumericError):
            trainer.run()
        assert path.read_text() == 'epoch,loss,active_ratio,grad_norm\n'

    def test_empty_caller_log_is_kept(self):
        built = _builder(epochs=2).build()
        log = TrainLog(loss_name='triplet', config_hash='abc')
        trainer = Trainer(built.head, built.loss, built.optimizer, built.sampler, built.train_ds,
                          epochs=2, log=log)
        assert trainer.log is log
        assert trainer.run() is log
        assert len(log) == 2
        assert log.config_hash == 'abc'
