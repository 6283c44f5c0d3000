"""
Gaussian-cluster feature generator, the desk-scale stand-in for backbone
features of a real dataset.

Usage:
    spec = SyntheticSpec.preset('fine', seed=3)
    train = generate_synthetic(spec, 'train')
    test = generate_synthetic(spec, 'test')    # same class centers, fresh noise
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

import numpy as np

from core.exceptions import ConfigError, ParameterError
from data.dataset import SPLITS, FeatureDataset


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Attributes:
        class_count:             C, number of classes.
        samples_per_class:       n_c for the train split.
        test_samples_per_class:  n_c for the test split.
        dim:                     Feature dimension d.
        center_scale:            Class centers ~ Uniform(-center_scale, center_scale)^d.
        within_std:              Isotropic Gaussian noise std around each center.
        seed:                    Determines centers and both splits.
    """

    class_count: int = 20
    samples_per_class: int = 50
    test_samples_per_class: int = 20
    dim: int = 64
    center_scale: float = 1.0
    within_std: float = 0.5
    seed: int = 0

    # Fine: many close classes with wide spread. Coarse: few well-separated ones.
    _presets = {
        'default': {},
        'fine': {
            'class_count': 50,
            'samples_per_class': 20,
            'test_samples_per_class': 10,
            'center_scale': 0.5,
            'within_std': 0.5,
        },
        'coarse': {
            'class_count': 10,
            'samples_per_class': 50,
            'test_samples_per_class': 20,
            'center_scale': 2.0,
            'within_std': 0.5,
        },
    }

    def __post_init__(self):
        if self.class_count < 2:
            raise ParameterError("class_count must be >= 2")
        if self.samples_per_class < 2 or self.test_samples_per_class < 2:
            raise ParameterError("samples per class must be >= 2")
        if self.dim < 2:
            raise ParameterError("dim must be >= 2")
        if self.center_scale < 0:
            raise ParameterError("center_scale must be >= 0")
        if self.within_std < 0:
            raise ParameterError("within_std must be >= 0")

    @classmethod
    def preset(cls, name: str, **overrides) -> 'SyntheticSpec':
        name = name.lower()
        if name not in cls._presets:
            raise ConfigError(f"Unknown preset '{name}'. Available: {sorted(cls._presets)}")
        return cls.from_dict({**cls._presets[name], **overrides})

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> 'SyntheticSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown synthetic option(s): {unknown}")
        return cls(**raw)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def class_centers(spec: SyntheticSpec) -> np.ndarray:
    """(C, d) class centers; shared by every split of the same spec."""
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(-spec.center_scale, spec.center_scale, size=(spec.class_count, spec.dim))


def generate_synthetic(spec: SyntheticSpec, split: str = 'train') -> FeatureDataset:
    """
    Class c's points are center_c + N(0, within_std^2 I), labels 0..C-1 in
    class-major order.  Bit-identical for the same (spec, split).
    """
    if split not in SPLITS:
        raise ParameterError(f"Unknown split '{split}'. Available: {list(SPLITS)}")
    per_class = spec.samples_per_class if split == 'train' else spec.test_samples_per_class

    centers = class_centers(spec)
    noise_rng = np.random.default_rng([spec.seed, 1 + SPLITS.index(split)])
    noise = noise_rng.standard_normal((spec.class_count, per_class, spec.dim)) * spec.within_std

    features = (centers[:, None, :] + noise).reshape(-1, spec.dim)
    labels = np.repeat(np.arange(spec.class_count), per_class)
    return FeatureDataset.from_arrays(features, labels, split)
