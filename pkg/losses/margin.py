"""
Margin losses on Euclidean distance: pairwise contrastive and batch-hard triplet.

Both are exactly zero (value and gradient) once every unit satisfies its
margin, which is what makes their active ratio meaningful.
"""

import logging
from typing import Optional

import numpy as np

from core.exceptions import EmptyLossError, InsufficientPairsError, NoNegativesError
from core.types import LabeledSet
from core.vector_math import pairwise_euclidean
from losses.base import CenterBank, LossConfig, LossOutput, MetricLoss

logger = logging.getLogger(__name__)


def _unit_directions(diff: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """diff / dist row-wise; rows with dist == 0 get a zero direction."""
    safe = np.where(dist > 0, dist, 1.0)
    return np.where((dist > 0)[:, None], diff / safe[:, None], 0.0)


class ContrastiveLoss(MetricLoss):
    """
    Pairwise contrastive loss over all unordered pairs in the batch:

        L_ij = d^2                    (same class)
        L_ij = max(0, m - d)^2        (different class)

    One unit per pair; a pair is active iff its term is positive.
    """

    name = 'contrastive'

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        n = len(batch)
        if n < 2:
            raise InsufficientPairsError("contrastive loss needs at least two samples")

        z = batch.vectors
        labels = batch.labels
        iu, ju = np.triu_indices(n, k=1)
        dist = pairwise_euclidean(z, z)[iu, ju]
        positive = labels[iu] == labels[ju]

        hinge = np.maximum(0.0, self.config.margin - dist)
        terms = np.where(positive, dist ** 2, hinge ** 2)
        pair_count = terms.shape[0]

        diff = z[iu] - z[ju]
        # d(term)/d(z_i): 2 diff for positives, -2 hinge * diff / d for negatives
        neg_coef = -2.0 * hinge
        directions = _unit_directions(diff, dist)
        pair_grad = np.where(positive[:, None], 2.0 * diff, neg_coef[:, None] * directions)
        pair_grad /= pair_count

        grad = np.zeros_like(z)
        np.add.at(grad, iu, pair_grad)
        np.add.at(grad, ju, -pair_grad)

        return LossOutput(
            value=float(np.mean(terms)),
            active_flags=terms > 0,
            grad_embeddings=grad,
            unit_count=pair_count,
            unit_losses=terms,
        )


class BatchHardTripletLoss(MetricLoss):
    """
    Batch-hard triplet loss. Per anchor a:

        L_a = max(0, d(a, p*) - d(a, n*) + m)

    with p* the farthest same-class sample and n* the nearest other-class
    sample in the batch (ties resolved to the lowest index).  Anchors whose
    class has a single member in the batch are skipped.
    """

    name = 'triplet'

    def compute(self, batch: LabeledSet, bank: Optional[CenterBank] = None) -> LossOutput:
        if batch.class_count < 2:
            raise NoNegativesError("batch-hard triplet needs at least two classes in the batch")

        z = batch.vectors
        dist = pairwise_euclidean(z, z)
        same = self._same_class_mask(batch.labels)
        other = batch.labels[:, None] != batch.labels[None, :]

        has_positive = same.any(axis=1)
        skipped = int(np.count_nonzero(~has_positive))
        if skipped:
            logger.warning("triplet: skipped %d anchor(s) whose class has a single member", skipped)
        anchors = np.flatnonzero(has_positive)
        if anchors.size == 0:
            raise EmptyLossError("triplet: no anchor has a positive in this batch")

        hardest_pos = np.argmax(np.where(same, dist, -np.inf), axis=1)[anchors]
        hardest_neg = np.argmin(np.where(other, dist, np.inf), axis=1)[anchors]
        d_ap = dist[anchors, hardest_pos]
        d_an = dist[anchors, hardest_neg]

        per_anchor = np.maximum(0.0, d_ap - d_an + self.config.margin)
        active = per_anchor > 0
        count = anchors.shape[0]

        grad = np.zeros_like(z)
        act = anchors[active]
        if act.size:
            p_idx = hardest_pos[active]
            n_idx = hardest_neg[active]
            u_ap = _unit_directions(z[act] - z[p_idx], d_ap[active]) / count
            u_an = _unit_directions(z[act] - z[n_idx], d_an[active]) / count
            np.add.at(grad, act, u_ap - u_an)
            np.add.at(grad, p_idx, -u_ap)
            np.add.at(grad, n_idx, u_an)

        return LossOutput(
            value=float(np.mean(per_anchor)),
            active_flags=active,
            grad_embeddings=grad,
            unit_count=count,
            unit_losses=per_anchor,
        )


def contrastive_loss(batch: LabeledSet, cfg: Optional[LossConfig] = None) -> LossOutput:
    return ContrastiveLoss(cfg).compute(batch)


def triplet_loss_batch_hard(batch: LabeledSet, cfg: Optional[LossConfig] = None) -> LossOutput:
    return BatchHardTripletLoss(cfg).compute(batch)
