import logging
import math
from typing import Optional

import numpy as np

from analytics.train_log import EpochRecord, TrainLog
from analytics.variance import cosine_distance_stats
from core.exceptions import NumericError
from core.types import LabeledSet
from data.batch_sampler import BatchSampler
from data.dataset import FeatureDataset
from losses.base import CenterBank, MetricLoss, active_ratio
from model.optimizer import CENTER_GROUP, Adam
from model.projection_head import INFERENCE, TRAINING, ProjectionHead


class Trainer:
    """
    Sequential training loop for one (head, loss) pair.

    Flow per batch:
      sampler batch (features)
        -> ProjectionHead.forward(training, dropout seed of (seed, epoch, batch))
        -> MetricLoss.compute()          (value, active flags, gradients)
        -> ProjectionHead.backward()     (+ center-bank gradients for ArcFace / CCL)
        -> Adam.step()                   (head params, bank renormalized)

    Per epoch the means of loss, active ratio and global gradient norm go to
    the TrainLog; every ``snapshot_interval`` epochs (and before the first)
    a VarianceReport of ``eval_set`` embeddings is stored.  Any exception
    is logged, the partial log is flushed to ``log_path`` and the exception
    re-raised.
    """

    def __init__(
        self,
        head: ProjectionHead,
        loss: MetricLoss,
        optimizer: Adam,
        sampler: BatchSampler,
        train_ds: FeatureDataset,
        bank: Optional[CenterBank] = None,
        eval_set: Optional[LabeledSet] = None,
        epochs: int = 50,
        snapshot_interval: int = 10,
        seed: int = 0,
        log: Optional[TrainLog] = None,
        log_path: Optional[str] = None,
    ):
        if loss.requires_bank and bank is None:
            bank = CenterBank.random(train_ds.as_labeled().class_ids, head.d_out, seed=seed)
        self.head = head
        self.loss = loss
        self.optimizer = optimizer
        self.sampler = sampler
        self.train_ds = train_ds
        self.bank = bank
        self.eval_set = eval_set if eval_set is not None else train_ds.as_labeled()
        self.epochs = epochs
        self.snapshot_interval = snapshot_interval
        self.seed = seed
        self.log = log if log is not None else TrainLog(loss_name=loss.name, seed=seed)
        self.log_path = log_path
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------------
    # Public
    # ------------------------------------------------------------------

    def run(self) -> TrainLog:
        self.logger.info(
            "Training %s for %d epoch(s) on %d samples (%d classes)",
            self.loss.name, self.epochs, len(self.train_ds), self.train_ds.class_count,
        )
        try:
            if 0 not in self.log.snapshots:
                self.snapshot()
            while len(self.log) < self.epochs:
                self.run_one_epoch()
                done = len(self.log)
                if done % self.snapshot_interval == 0:
                    self.snapshot()
        except Exception as exc:
            self.logger.error(
                "Training %s aborted after %d epoch(s): %s",
                self.loss.name, len(self.log), exc, exc_info=True,
            )
            self.flush()
            raise
        return self.log

    def run_one_epoch(self) -> EpochRecord:
        epoch = len(self.log)
        losses, ratios, norms = [], [], []
        for b, batch in enumerate(self.sampler.batches(self.train_ds, epoch)):
            value, ratio, norm = self._run_one_batch(batch, epoch, b)
            losses.append(value)
            ratios.append(ratio)
            norms.append(norm)
        if not losses:
            raise NumericError(f"epoch {epoch} produced no batches")

        record = EpochRecord(
            epoch=epoch,
            loss=float(np.mean(losses)),
            active_ratio=float(np.mean(ratios)),
            grad_norm=float(np.mean(norms)),
        )
        self.log.append(record)
        self.logger.info(
            "epoch=%d loss=%.6f active=%.4f grad_norm=%.6f",
            record.epoch, record.loss, record.active_ratio, record.grad_norm,
        )
        return record

    def embed(self, data: LabeledSet) -> LabeledSet:
        """Inference-mode embeddings (no dropout)."""
        return self.head.forward(data, mode=INFERENCE)[0]

    def snapshot(self) -> None:
        self.log.add_snapshot(len(self.log), cosine_distance_stats(self.embed(self.eval_set)))

    def flush(self) -> None:
        if self.log_path:
            self.log.to_csv(self.log_path)

    # ------------------------------------------------------------------
    # Internal
    # ------------------------------------------------------------------

    def _dropout_seed(self, epoch: int, batch_index: int) -> int:
        return int(np.random.SeedSequence([self.seed, epoch, batch_index]).generate_state(1)[0])

    def _run_one_batch(self, batch: LabeledSet, epoch: int, batch_index: int):
        embeddings, cache = self.head.forward(
            batch, mode=TRAINING, rng_seed=self._dropout_seed(epoch, batch_index)
        )
        out = self.loss.compute(embeddings, self.bank)
        if not math.isfinite(out.value) or not np.all(np.isfinite(out.grad_embeddings)):
            raise NumericError(
                f"non-finite {self.loss.name} loss/gradient at epoch {epoch}, batch {batch_index}"
            )

        grads = self.head.backward(cache, out.grad_embeddings)
        if self.bank is not None:
            grads = grads.merged({CENTER_GROUP: out.grad_params})
        if not math.isfinite(grads.global_norm):
            raise NumericError(f"non-finite gradient norm at epoch {epoch}, batch {batch_index}")

        self.optimizer.step(grads, bank=self.bank)
        return out.value, active_ratio(out), grads.global_norm
