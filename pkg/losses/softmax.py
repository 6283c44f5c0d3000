"""
Softmax losses over dot-product similarities: N-pair, InfoNCE and
supervised contrastive (SCL).

None of these has a margin, so a unit counts as active while its loss
exceeds ``LossConfig.active_epsilon``.  All logits go through the stable
``log_softmax_rows`` (max-shifted).
"""

import logging
from typing import Optional

import numpy as np

from core.exceptions import BatchStructureError, EmptyLossError
from core.types import LabeledSet
from losses.base import CenterBank, LossConfig, LossOutput, MetricLoss, log_softmax_rows

logger = logging.getLogger(__name__)


def _anchor_softmax(z: np.ndarray, anchors: np.ndarray, target_weights: np.ndarray,
                    temperature: float):
    """
    Per-anchor cross-entropy against a distribution over the other samples.

    For anchor i:  L_i = logsumexp_{k != i}(s_ik / t) - sum_k w_ik s_ik / t
    with s = z z^T and ``target_weights`` rows (one per anchor) summing to 1.
    Returns (per-anchor losses, gradient w.r.t. z of their mean).
    """
    n = z.shape[0]
    logits = (z[anchors] @ z.T) / temperature
    candidates = np.ones((anchors.shape[0], n), dtype=bool)
    candidates[np.arange(anchors.shape[0]), anchors] = False

    lse, prob = log_softmax_rows(logits, candidates)
    target = np.sum(target_weights * np.where(candidates, logits, 0.0), axis=1)
    per_anchor = lse - target

    # dL_i/ds_ik = (p_ik - w_ik) / t;  s_ik = <z_i, z_k> feeds both z_i and z_k
    coeff = np.zeros((n, n))
    coeff[anchors] = (prob - target_weights) / (temperature * anchors.shape[0])
    grad = coeff @ z + coeff.T @ z
    return per_anchor, grad


class NPairLoss(MetricLoss):
    """
    Multi-class N-pair loss. The batch holds exactly two samples per class:
    the lower-index one is the anchor, the other its positive.

        L_i = log(1 + sum_{j != i} exp(a_i . p_j - a_i . p_i))
    """

    name = 'npair'

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        members = batch.members()
        bad = [c for c, idx in members.items() if idx.shape[0] != 2]
        if bad:
            raise BatchStructureError(
                f"npair needs exactly 2 samples per class; classes {bad} violate this"
            )
        if len(members) < 2:
            raise BatchStructureError("npair needs at least two classes")

        anchor_idx = np.array([idx[0] for idx in members.values()])
        positive_idx = np.array([idx[1] for idx in members.values()])
        z = batch.vectors
        a, p = z[anchor_idx], z[positive_idx]
        count = anchor_idx.shape[0]

        sims = a @ p.T
        lse, prob = log_softmax_rows(sims)
        per_anchor = lse - np.diag(sims)

        coeff = (prob - np.eye(count)) / count
        grad = np.zeros_like(z)
        grad[anchor_idx] += coeff @ p
        grad[positive_idx] += coeff.T @ a

        return LossOutput(
            value=float(np.mean(per_anchor)),
            active_flags=per_anchor > self.config.active_epsilon,
            grad_embeddings=grad,
            unit_count=count,
            unit_losses=per_anchor,
        )


class InfoNCELoss(MetricLoss):
    """
    Supervised one-positive InfoNCE. Each anchor's positive is its most
    similar same-class sample (lowest index on ties); every other batch
    member is a candidate in the denominator.
    """

    name = 'infonce'

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        z = batch.vectors
        same = self._same_class_mask(batch.labels)
        has_positive = same.any(axis=1)
        skipped = int(np.count_nonzero(~has_positive))
        if skipped:
            logger.warning("infonce: skipped %d anchor(s) without a positive", skipped)
        anchors = np.flatnonzero(has_positive)
        if anchors.size == 0:
            raise EmptyLossError("infonce: no anchor has a positive in this batch")

        sims = z[anchors] @ z.T
        chosen = np.argmax(np.where(same[anchors], sims, -np.inf), axis=1)
        weights = np.zeros((anchors.shape[0], z.shape[0]))
        weights[np.arange(anchors.shape[0]), chosen] = 1.0

        per_anchor, grad = _anchor_softmax(z, anchors, weights, self.config.temperature)
        return LossOutput(
            value=float(np.mean(per_anchor)),
            active_flags=per_anchor > self.config.active_epsilon,
            grad_embeddings=grad,
            unit_count=anchors.shape[0],
            unit_losses=per_anchor,
        )


class SupConLoss(MetricLoss):
    """
    Supervised contrastive loss: every same-class sample is a positive and
    the anchor's loss averages the log-likelihood over its positives.
    Anchors without positives do not count as units.
    """

    name = 'scl'

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        z = batch.vectors
        same = self._same_class_mask(batch.labels)
        positives_per_row = same.sum(axis=1)
        anchors = np.flatnonzero(positives_per_row > 0)
        if anchors.size == 0:
            raise EmptyLossError("scl: no anchor has a positive in this batch")
        if anchors.size < z.shape[0]:
            logger.debug("scl: %d anchor(s) without positives ignored", z.shape[0] - anchors.size)

        weights = same[anchors] / positives_per_row[anchors][:, None]
        per_anchor, grad = _anchor_softmax(z, anchors, weights, self.config.temperature)
        return LossOutput(
            value=float(np.mean(per_anchor)),
            active_flags=per_anchor > self.config.active_epsilon,
            grad_embeddings=grad,
            unit_count=anchors.shape[0],
            unit_losses=per_anchor,
        )


def npair_loss(batch: LabeledSet, cfg: Optional[LossConfig] = None) -> LossOutput:
    return NPairLoss(cfg).compute(batch)


def infonce_loss(batch: LabeledSet, cfg: Optional[LossConfig] = None) -> LossOutput:
    return InfoNCELoss(cfg).compute(batch)


def scl_loss(batch: LabeledSet, cfg: Optional[LossConfig] = None) -> LossOutput:
    return SupConLoss(cfg).compute(batch)
