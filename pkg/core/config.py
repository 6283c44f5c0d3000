"""
Experiment configuration.

A config is a tree of frozen dataclasses loaded from JSON.  Unknown keys
are rejected at every level, with the offending key path in the message.

Usage:
    cfg = ExperimentConfig.preset('fine', loss='triplet', epochs=50, seed=1)
    cfg = ExperimentConfig.from_json('configs/triplet.json')
    print(cfg.config_hash())
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from core.exceptions import BenchError, ConfigError, ParameterError
from data.batch_sampler import BatchPlan
from data.synthetic import SyntheticSpec
from losses import LOSS_REGISTRY
from losses.base import LossConfig


def _reject_unknown(cls, raw: Dict[str, Any], path: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"'{path}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) {[f'{path}.{k}' if path else k for k in unknown]}")


def _build(cls, raw: Dict[str, Any], path: str):
    _reject_unknown(cls, raw, path)
    try:
        return cls(**raw)
    except BenchError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class HeadConfig:
    # None: take the input width from the training data.
    d_in: Optional[int] = None
    d_hidden: int = 128
    d_out: int = 32
    dropout_rate: float = 0.15

    def __post_init__(self):
        dims = [d for d in (self.d_in, self.d_hidden, self.d_out) if d is not None]
        if min(dims) < 1:
            raise ParameterError("head dims must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0 or self.weight_decay < 0 or self.eps <= 0:
            raise ParameterError("lr and weight_decay must be >= 0, eps > 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("betas must be in [0, 1)")


# Full-scale settings: 768 -> 512 -> 128 head, batch 512 (P=128 classes), 100 epochs,
# lr 1e-4.  Synthetic presets are widened to at least P classes.
FULL_SCALE = {
    'head': HeadConfig(d_in=768, d_hidden=512, d_out=128, dropout_rate=0.15),
    'optimizer': OptimizerConfig(lr=1e-4, weight_decay=1e-5),
    'batch': BatchPlan('pk_balanced', P=128, K=4),
    'epochs': 100,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One training run.

    Either ``synthetic`` or ``train_path``/``test_path`` names the data.
    ``seed`` drives head initialization, batch order and dropout masks; the
    synthetic data has its own seed inside ``synthetic``.  With the 'npair'
    loss a 'pk_balanced' plan is turned into 'npair_pairs' (K = 2).
    """

    loss: str = 'triplet'
    loss_config: LossConfig = field(default_factory=LossConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    batch: BatchPlan = field(default_factory=BatchPlan)
    synthetic: Optional[SyntheticSpec] = field(default_factory=SyntheticSpec)
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    epochs: int = 50
    seed: int = 0
    snapshot_interval: int = 10
    ks: Tuple[int, ...] = (1, 5, 10)
    dump_subset: int = 1000
    out_dir: str = 'runs'

    def __post_init__(self):
        if self.loss not in LOSS_REGISTRY:
            raise ConfigError(f"Unknown loss '{self.loss}'. Available: {list(LOSS_REGISTRY)}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.snapshot_interval < 1:
            raise ConfigError("snapshot_interval must be >= 1")
        if self.dump_subset < 0:
            raise ConfigError("dump_subset must be >= 0")
        if self.synthetic is None and not self.train_path:
            raise ConfigError("either 'synthetic' or 'train_path' must be given")
        if self.synthetic is not None and self.train_path:
            raise ConfigError("'synthetic' and 'train_path' are mutually exclusive")
        object.__setattr__(self, 'ks', tuple(int(k) for k in self.ks))
        if self.batch.seed != self.seed:
            object.__setattr__(self, 'batch', replace(self.batch, seed=self.seed))
        if self.loss == 'npair' and self.batch.strategy == 'pk_balanced':
            object.__setattr__(self, 'batch', BatchPlan('npair_pairs', P=self.batch.P, K=2,
                                                        seed=self.batch.seed))

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def preset(cls, name: str, full_scale: bool = False, **overrides) -> 'ExperimentConfig':
        """
        Synthetic preset ('fine', 'coarse', 'default') plus top-level overrides.
        The head input width follows the synthetic dimension unless the head
        is overridden; with file data it is left to the data dimension.
        """
        spec = SyntheticSpec.preset(name)
        base: Dict[str, Any] = {'synthetic': spec}
        if full_scale:
            base.update(FULL_SCALE)
            base['synthetic'] = replace(spec, dim=base['head'].d_in,
                                        class_count=max(spec.class_count, base['batch'].P))
        base.update(overrides)
        if 'head' not in overrides:
            synthetic = base['synthetic']
            base['head'] = replace(base.get('head', HeadConfig()),
                                   d_in=synthetic.dim if synthetic is not None else None)
        return cls(**base)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'ExperimentConfig':
        raw = dict(raw)
        preset = raw.pop('preset', None)
        full_scale = bool(raw.pop('full_scale', False))
        _reject_unknown(cls, raw, '')

        nested = {
            'loss_config': LossConfig,
            'head': HeadConfig,
            'optimizer': OptimizerConfig,
            'batch': BatchPlan,
            'synthetic': SyntheticSpec,
        }
        kwargs: Dict[str, Any] = {}
        for key, value in raw.items():
            if key in nested and value is not None:
                kwargs[key] = _build(nested[key], value, key)
            else:
                kwargs[key] = value
        if 'train_path' in kwargs and 'synthetic' not in kwargs:
            kwargs['synthetic'] = None

        try:
            if preset is not None or full_scale:
                return cls.preset(preset or 'default', full_scale=full_scale, **kwargs)
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> 'ExperimentConfig':
        try:
            with open(path, 'r') as f:
                raw = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        return replace(self, **overrides)

    # ------------------------------------------------------------------
    # Validation / identity
    # ------------------------------------------------------------------

    def validate_paths(self) -> None:
        for key in ('train_path', 'test_path'):
            path = getattr(self, key)
            if path and not os.path.exists(path):
                raise ConfigError(f"{key} '{path}' does not exist")

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['ks'] = list(self.ks)
        return out

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, excluding the output directory."""
        payload = self.to_dict()
        payload.pop('out_dir', None)
        canonical = json.dumps(payload, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
