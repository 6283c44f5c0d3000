"""
Trainable projection head with hand-written backpropagation.

    x -> layer1 -> tanh -> dropout -> layer2 -> L2-normalize -> z

Usage:
    head = ProjectionHead(d_in=64, d_hidden=128, d_out=32, seed=0)
    embeddings, cache = head.forward(features, mode='training', rng_seed=7)
    out = loss.compute(embeddings)
    grads = head.backward(cache, out.grad_embeddings)
    print(grads.global_norm)
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from core.exceptions import ContractError, DegenerateOutputError, ParameterError, ShapeError
from core.types import LabeledSet

TRAINING = 'training'
INFERENCE = 'inference'

# Canonical parameter-group order; reports and checkpoints follow it.
PARAM_GROUPS = ('layer1.weight', 'layer1.bias', 'layer2.weight', 'layer2.bias')


@dataclass
class GradSnapshot:
    """Per-group gradients plus the global l2 norm over all groups."""

    groups: Dict[str, np.ndarray]
    global_norm: float = field(init=False)

    def __post_init__(self):
        self.global_norm = global_grad_norm(self)

    def merged(self, extra: Dict[str, np.ndarray]) -> 'GradSnapshot':
        """New snapshot with additional groups (e.g. loss-owned centers)."""
        groups = dict(self.groups)
        groups.update(extra)
        return GradSnapshot(groups)


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by ``backward``."""

    head_version: int
    features: np.ndarray
    hidden_tanh: np.ndarray
    dropout_mask: Optional[np.ndarray]
    hidden_out: np.ndarray
    pre_norm: np.ndarray
    norms: np.ndarray
    embeddings: np.ndarray


def global_grad_norm(grads: GradSnapshot) -> float:
    """sqrt of the sum of squared per-group Frobenius norms."""
    squared = 0.0
    for g in grads.groups.values():
        squared += float(np.sum(np.square(g)))
    return math.sqrt(squared)


class ProjectionHead:
    """
    Two affine layers with Tanh, inverted dropout and L2-normalized output.

    Args:
        d_in, d_hidden, d_out: Layer widths.
        dropout_rate:          Fraction of hidden units dropped in training mode.
        seed:                  Seed for Glorot-uniform weight initialization.

    Parameters live in ``self.params`` (keys in ``PARAM_GROUPS``).  The head
    is single-writer: ``load_params`` (used by the optimizer) bumps
    ``version`` so caches from earlier forwards are rejected by ``backward``.
    """

    def __init__(self, d_in: int = 768, d_hidden: int = 512, d_out: int = 128,
                 dropout_rate: float = 0.15, seed: int = 0):
        if min(d_in, d_hidden, d_out) < 1:
            raise ParameterError("layer widths must be positive")
        if not 0.0 <= dropout_rate < 1.0:
            raise ParameterError("dropout_rate must be in [0, 1)")
        self.d_in = d_in
        self.d_hidden = d_hidden
        self.d_out = d_out
        self.dropout_rate = dropout_rate
        self.version = 0

        rng = np.random.default_rng(seed)
        self.params: Dict[str, np.ndarray] = {
            'layer1.weight': self._glorot(rng, d_in, d_hidden),
            'layer1.bias':   np.zeros(d_hidden),
            'layer2.weight': self._glorot(rng, d_hidden, d_out),
            'layer2.bias':   np.zeros(d_out),
        }

    @staticmethod
    def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def load_params(self, params: Dict[str, np.ndarray]) -> None:
        for name in PARAM_GROUPS:
            if params[name].shape != self.params[name].shape:
                raise ContractError(
                    f"{name}: shape {params[name].shape} != {self.params[name].shape}"
                )
        self.params = {name: np.asarray(params[name], dtype=np.float64) for name in PARAM_GROUPS}
        self.version += 1

    # ------------------------------------------------------------------
    # Forward / backward
    # ------------------------------------------------------------------

    def forward(self, features: LabeledSet, mode: str = INFERENCE,
                rng_seed: Optional[int] = None) -> Tuple[LabeledSet, ForwardCache]:
        """
        Project features to unit-norm embeddings.

        In training mode the dropout mask is drawn from ``rng_seed`` (same
        seed, same mask); inference mode applies no dropout at all.
        """
        if mode not in (TRAINING, INFERENCE):
            raise ParameterError(f"unknown mode '{mode}'")
        x = features.vectors
        if x.shape[1] != self.d_in:
            raise ShapeError(f"feature dim {x.shape[1]} != head input dim {self.d_in}")

        p = self.params
        hidden_tanh = np.tanh(x @ p['layer1.weight'] + p['layer1.bias'])

        mask = None
        hidden_out = hidden_tanh
        if mode == TRAINING and self.dropout_rate > 0.0:
            keep = 1.0 - self.dropout_rate
            rng = np.random.default_rng(rng_seed)
            mask = (rng.random(hidden_tanh.shape) < keep) / keep
            hidden_out = hidden_tanh * mask

        pre_norm = hidden_out @ p['layer2.weight'] + p['layer2.bias']
        norms = np.sqrt(np.sum(pre_norm * pre_norm, axis=1))
        if np.any(norms == 0.0):
            raise DegenerateOutputError(
                f"zero pre-normalization output for {int(np.count_nonzero(norms == 0.0))} sample(s)"
            )
        z = pre_norm / norms[:, None]

        cache = ForwardCache(
            head_version=self.version,
            features=x,
            hidden_tanh=hidden_tanh,
            dropout_mask=mask,
            hidden_out=hidden_out,
            pre_norm=pre_norm,
            norms=norms,
            embeddings=z,
        )
        return features.with_vectors(z), cache

    def backward(self, cache: ForwardCache, grad_embeddings: np.ndarray) -> GradSnapshot:
        if cache.head_version != self.version:
            raise ContractError("forward cache is stale: parameters changed since forward()")
        g = np.asarray(grad_embeddings, dtype=np.float64)
        if g.shape != cache.embeddings.shape:
            raise ContractError(
                f"gradient shape {g.shape} != embedding shape {cache.embeddings.shape}"
            )

        z = cache.embeddings
        # L2-normalization Jacobian: (g - (g.z) z) / ||u||
        radial = np.sum(g * z, axis=1, keepdims=True)
        grad_pre = (g - radial * z) / cache.norms[:, None]

        p = self.params
        grad_w2 = cache.hidden_out.T @ grad_pre
        grad_b2 = grad_pre.sum(axis=0)

        grad_hidden = grad_pre @ p['layer2.weight'].T
        if cache.dropout_mask is not None:
            grad_hidden = grad_hidden * cache.dropout_mask
        grad_act = grad_hidden * (1.0 - cache.hidden_tanh ** 2)

        grad_w1 = cache.features.T @ grad_act
        grad_b1 = grad_act.sum(axis=0)

        return GradSnapshot({
            'layer1.weight': grad_w1,
            'layer1.bias':   grad_b1,
            'layer2.weight': grad_w2,
            'layer2.bias':   grad_b2,
        })


def forward(head: ProjectionHead, features: LabeledSet, mode: str = INFERENCE,
            rng_seed: Optional[int] = None) -> Tuple[LabeledSet, ForwardCache]:
    return head.forward(features, mode=mode, rng_seed=rng_seed)


def backward(head: ProjectionHead, cache: ForwardCache, grad_embeddings: np.ndarray) -> GradSnapshot:
    return head.backward(cache, grad_embeddings)
