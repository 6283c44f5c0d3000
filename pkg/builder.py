"""
TrainerBuilder: fluent builder for the training loop.

Typical usage (shortcut strings)::

    from builder import TrainerBuilder

    trainer = (
        TrainerBuilder()
        .set_synthetic('coarse', seed=0)
        .set_head(d_hidden=128, d_out=32, dropout_rate=0.15)
        .set_loss('triplet', margin=1.0)
        .set_sampler('pk_balanced', P=8, K=4)
        .set_optimizer('adam', lr=1e-3, weight_decay=1e-5)
        .set_epochs(50)
        .set_seed(0)
        .build()
    )
    log = trainer.run()

Pre-built instances are accepted as well::

    trainer = TrainerBuilder().set_data(train_ds).set_loss(SupConLoss(cfg)).build()

Available shortcut strings
--------------------------
set_loss      : 'contrastive', 'triplet', 'npair', 'infonce', 'arcface', 'scl', 'ccl'
set_sampler   : 'pk_balanced'  (PKBalancedSampler)
                'npair_pairs'  (NPairSampler)
                'random'       (RandomSampler, pass batch_size=...)
set_optimizer : 'adam'         (Adam, decoupled weight decay)
set_synthetic : 'default', 'fine', 'coarse'
"""

from __future__ import annotations

import logging
from dataclasses import asdict, fields
from typing import Any, Dict, Optional, Union

from core.config import ExperimentConfig
from core.exceptions import ConfigError
from core.types import LabeledSet
from data.batch_sampler import SAMPLER_MAP, BatchPlan, BatchSampler, make_sampler
from data.dataset import FeatureDataset
from data.synthetic import SyntheticSpec, generate_synthetic
from engine import Trainer
from losses import LOSS_REGISTRY
from losses.base import CenterBank, LossConfig, MetricLoss
from model.optimizer import Adam
from model.projection_head import ProjectionHead

# ---------------------------------------------------------------------------
# Shortcut registries
# ---------------------------------------------------------------------------

_OPTIMIZER_MAP: Dict[str, type] = {
    'adam': Adam,
}

_LOSS_KEYS = {f.name for f in fields(LossConfig)}
_PLAN_KEYS = {f.name for f in fields(BatchPlan)} - {'strategy'}


class TrainerBuilder:
    """
    Fluent builder that assembles a ``Trainer``.

    All ``set_*`` methods return ``self``; ``build()`` validates and wires
    head, loss, optimizer, sampler and data.
    """

    def __init__(self):
        # --- data ---
        self._train: Optional[FeatureDataset] = None
        self._eval: Optional[LabeledSet] = None

        # --- head ---
        self._head: Optional[ProjectionHead] = None
        self._head_kwargs: Dict[str, Any] = {}

        # --- loss ---
        self._loss: Optional[MetricLoss] = None
        self._bank: Optional[CenterBank] = None

        # --- sampler ---
        self._sampler: Optional[BatchSampler] = None
        self._plan_kwargs: Dict[str, Any] = {}
        self._strategy: Optional[str] = None

        # --- optimizer ---
        self._optimizer_kwargs: Dict[str, Any] = {}

        # --- loop ---
        self._epochs: int = 50
        self._seed: int = 0
        self._snapshot_interval: int = 10
        self._log_path: Optional[str] = None

        # --- logging ---
        self._log_level: int = logging.INFO
        self._log_format: str = '%(asctime)s - %(levelname)s - %(message)s'

    @classmethod
    def from_config(cls, cfg: ExperimentConfig, train: FeatureDataset,
                    eval_set: Optional[LabeledSet] = None) -> 'TrainerBuilder':
        """Builder pre-filled from an ExperimentConfig (data already loaded)."""
        plan = cfg.batch.to_dict()
        strategy = plan.pop('strategy')
        head = {k: v for k, v in asdict(cfg.head).items() if v is not None}
        return (
            cls()
            .set_data(train, eval_set)
            .set_head(**head)
            .set_loss(cfg.loss, **cfg.loss_config.to_dict())
            .set_sampler(strategy, **plan)
            .set_optimizer('adam', **asdict(cfg.optimizer))
            .set_epochs(cfg.epochs)
            .set_seed(cfg.seed)
            .set_snapshot_interval(cfg.snapshot_interval)
        )

    # ------------------------------------------------------------------
    # Data
    # ------------------------------------------------------------------

    def set_data(self, train: FeatureDataset,
                 eval_set: Optional[LabeledSet] = None) -> 'TrainerBuilder':
        """Training features plus the set variance snapshots are taken on."""
        self._train = train
        self._eval = eval_set
        return self

    def set_synthetic(self, spec: Union[str, SyntheticSpec] = 'default',
                      **overrides: Any) -> 'TrainerBuilder':
        """Generate train/test splits from a SyntheticSpec or a preset name."""
        if isinstance(spec, str):
            spec = SyntheticSpec.preset(spec, **overrides)
        self._train = generate_synthetic(spec, 'train')
        self._eval = generate_synthetic(spec, 'test').as_labeled()
        return self

    # ------------------------------------------------------------------
    # Components
    # ------------------------------------------------------------------

    def set_head(self, head: Optional[ProjectionHead] = None, **kwargs: Any) -> 'TrainerBuilder':
        """Pre-built head, or ProjectionHead kwargs (d_in defaults to the data dim)."""
        self._head = head
        self._head_kwargs = kwargs
        return self

    def set_loss(self, loss: Union[str, MetricLoss], bank: Optional[CenterBank] = None,
                 **kwargs: Any) -> 'TrainerBuilder':
        if isinstance(loss, str):
            cls = LOSS_REGISTRY.get(loss)
            if cls is None:
                raise ConfigError(
                    f"Unknown loss shortcut '{loss}'. Available: {list(LOSS_REGISTRY)}"
                )
            unknown = sorted(set(kwargs) - _LOSS_KEYS)
            if unknown:
                raise ConfigError(f"unknown loss option(s): {unknown}")
            self._loss = cls(LossConfig(**kwargs))
        else:
            self._loss = loss
        self._bank = bank
        return self

    def set_sampler(self, sampler: Union[str, BatchSampler, BatchPlan] = 'pk_balanced',
                    **kwargs: Any) -> 'TrainerBuilder':
        if isinstance(sampler, str):
            if sampler not in SAMPLER_MAP:
                raise ConfigError(
                    f"Unknown sampler shortcut '{sampler}'. Available: {list(SAMPLER_MAP)}"
                )
            unknown = sorted(set(kwargs) - _PLAN_KEYS)
            if unknown:
                raise ConfigError(f"unknown sampler option(s): {unknown}")
            self._strategy = sampler
            self._plan_kwargs = kwargs
            self._sampler = None
        elif isinstance(sampler, BatchPlan):
            self._sampler = make_sampler(sampler)
        else:
            self._sampler = sampler
        return self

    def set_optimizer(self, optimizer: str = 'adam', **kwargs: Any) -> 'TrainerBuilder':
        if optimizer not in _OPTIMIZER_MAP:
            raise ConfigError(
                f"Unknown optimizer shortcut '{optimizer}'. Available: {list(_OPTIMIZER_MAP)}"
            )
        self._optimizer_kwargs = kwargs
        return self

    # ------------------------------------------------------------------
    # Loop
    # ------------------------------------------------------------------

    def set_epochs(self, epochs: int) -> 'TrainerBuilder':
        self._epochs = epochs
        return self

    def set_seed(self, seed: int) -> 'TrainerBuilder':
        """Seeds head initialization, batch order, dropout masks and the center bank."""
        self._seed = seed
        return self

    def set_snapshot_interval(self, every: int) -> 'TrainerBuilder':
        self._snapshot_interval = every
        return self

    def set_log_path(self, path: str) -> 'TrainerBuilder':
        """CSV path the partial TrainLog is flushed to if training aborts."""
        self._log_path = path
        return self

    # ------------------------------------------------------------------
    # Logging
    # ------------------------------------------------------------------

    def set_logging(
        self,
        level: int = logging.INFO,
        fmt: str = '%(asctime)s - %(levelname)s - %(message)s',
    ) -> 'TrainerBuilder':
        """Configure root logger. Called automatically by build() if not set."""
        self._log_level = level
        self._log_format = fmt
        return self

    # ------------------------------------------------------------------
    # Discovery
    # ------------------------------------------------------------------

    @staticmethod
    def list_options() -> None:
        """Print all available shortcut strings for each configurable component."""
        sections = [
            ('set_loss', LOSS_REGISTRY),
            ('set_sampler', SAMPLER_MAP),
            ('set_optimizer', _OPTIMIZER_MAP),
        ]
        for title, mapping in sections:
            print(f"\n{title}:")
            for key, cls in mapping.items():
                print(f"  '{key}' → {cls.__name__}")
        print("\nset_synthetic:")
        for key in SyntheticSpec._presets:
            print(f"  '{key}'")

    # ------------------------------------------------------------------
    # Build
    # ------------------------------------------------------------------

    def build(self) -> Trainer:
        """
        Validate configuration and assemble the ``Trainer``.

        Raises ``ConfigError`` if required components are missing.
        """
        logging.basicConfig(
            level=self._log_level,
            format=self._log_format,
            handlers=[logging.StreamHandler()],
        )

        # --- 1. Data ---
        if self._train is None:
            raise ConfigError(
                "No training data configured. Call set_data() or set_synthetic() before build()."
            )
        self._train.require_trainable()

        # --- 2. Loss ---
        if self._loss is None:
            raise ConfigError("No loss configured. Call set_loss() before build().")

        # --- 3. Head ---
        head = self._build_head()

        # --- 4. Sampler ---
        sampler = self._build_sampler()

        # --- 5. Optimizer ---
        optimizer = Adam(head, **self._optimizer_kwargs)

        return Trainer(
            head=head,
            loss=self._loss,
            optimizer=optimizer,
            sampler=sampler,
            train_ds=self._train,
            bank=self._bank,
            eval_set=self._eval,
            epochs=self._epochs,
            snapshot_interval=self._snapshot_interval,
            seed=self._seed,
            log_path=self._log_path,
        )

    # ------------------------------------------------------------------
    # Private helpers
    # ------------------------------------------------------------------

    def _build_head(self) -> ProjectionHead:
        if self._head is not None:
            return self._head
        kwargs = {'d_in': self._train.dim, 'seed': self._seed}
        kwargs.update(self._head_kwargs)
        return ProjectionHead(**kwargs)

    def _build_sampler(self) -> BatchSampler:
        if self._sampler is not None:
            return self._sampler
        strategy = self._strategy
        if strategy is None:
            strategy = 'npair_pairs' if self._loss.name == 'npair' else 'pk_balanced'
        kwargs = {'seed': self._seed}
        kwargs.update(self._plan_kwargs)
        if strategy == 'npair_pairs':
            kwargs['K'] = 2
            kwargs.pop('batch_size', None)
        return make_sampler(BatchPlan(strategy, **kwargs))
