"""
Losses that score samples against a per-class ``CenterBank``:
ArcFace (bank rows as class weights) and center contrastive loss (CCL).

Both return ``grad_params`` shaped like ``bank.matrix``.  The loss is
evaluated on the bank rows as given; keeping them unit-norm is the
trainer's job (``CenterBank.renormalize`` after each optimizer step).
"""

from typing import Optional

import numpy as np

from core.types import LabeledSet
from losses.base import CenterBank, LossConfig, LossOutput, MetricLoss, log_softmax_rows

# arccos is not differentiable at +-1; cosines are clipped this far inside.
_COS_CLIP = 1e-7


def _max_other(values: np.ndarray, own_cols: np.ndarray) -> np.ndarray:
    """Row-wise max over every column except the sample's own class column."""
    masked = values.copy()
    masked[np.arange(values.shape[0]), own_cols] = -np.inf
    return np.max(masked, axis=1)


class ArcFaceLoss(MetricLoss):
    """
    Additive angular margin softmax.

    Logits are s * cos(theta_c) with cos(theta_c) = z . w_c; the target
    logit is replaced by s * cos(theta_y + m_a).  A sample is active while
    its margin-augmented target logit is not strictly the largest.
    """

    name = 'arcface'
    requires_bank = True

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        own = self._require_bank(bank, batch.labels)
        z = batch.vectors
        weights = bank.matrix
        n = z.shape[0]
        rows = np.arange(n)
        scale, margin = self.config.arc_scale, self.config.arc_margin

        cos = z @ weights.T
        cos_target = np.clip(cos[rows, own], -1.0 + _COS_CLIP, 1.0 - _COS_CLIP)
        theta = np.arccos(cos_target)
        target_logit = scale * np.cos(theta + margin)

        logits = scale * cos
        logits[rows, own] = target_logit
        lse, prob = log_softmax_rows(logits)
        per_sample = lse - target_logit

        dlogits = prob.copy()
        dlogits[rows, own] -= 1.0
        dlogits /= n
        dcos = scale * dlogits
        # d cos(theta + m) / d cos(theta) = sin(theta + m) / sin(theta)
        dcos[rows, own] *= np.sin(theta + margin) / np.sin(theta)

        active = _max_other(logits, own) >= target_logit
        return LossOutput(
            value=float(np.mean(per_sample)),
            active_flags=active,
            grad_embeddings=dcos @ weights,
            grad_params=dcos.T @ z,
            unit_count=n,
            unit_losses=per_sample,
        )


class CenterContrastiveLoss(MetricLoss):
    """
    Center contrastive loss:

        L_i = -log softmax_c(z_i . mu_c / t)[y_i] + lambda_c * (1 - z_i . mu_{y_i})

    A sample is active when some other class center is strictly closer
    (cosine distance) than its own.
    """

    name = 'ccl'
    requires_bank = True

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        own = self._require_bank(bank, batch.labels)
        z = batch.vectors
        centers = bank.matrix
        n = z.shape[0]
        rows = np.arange(n)
        tau, weight = self.config.temperature, self.config.center_weight

        sims = z @ centers.T
        lse, prob = log_softmax_rows(sims / tau)
        own_sim = sims[rows, own]
        per_sample = (lse - own_sim / tau) + weight * (1.0 - own_sim)

        dsims = prob / tau
        dsims[rows, own] -= 1.0 / tau + weight
        dsims /= n

        distances = 1.0 - sims
        own_distance = distances[rows, own]
        nearest_other = -_max_other(-distances, own)
        return LossOutput(
            value=float(np.mean(per_sample)),
            active_flags=own_distance > nearest_other,
            grad_embeddings=dsims @ centers,
            grad_params=dsims.T @ z,
            unit_count=n,
            unit_losses=per_sample,
        )


def arcface_loss(batch: LabeledSet, bank: CenterBank, cfg: Optional[LossConfig] = None) -> LossOutput:
    return ArcFaceLoss(cfg).compute(batch, bank)


def ccl_loss(batch: LabeledSet, bank: CenterBank, cfg: Optional[LossConfig] = None) -> LossOutput:
    return CenterContrastiveLoss(cfg).compute(batch, bank)
