from typing import Dict, Type

from losses.base import CenterBank, LossConfig, LossOutput, MetricLoss, active_ratio
from losses.center import ArcFaceLoss, CenterContrastiveLoss, arcface_loss, ccl_loss
from losses.margin import BatchHardTripletLoss, ContrastiveLoss, contrastive_loss, triplet_loss_batch_hard
from losses.softmax import InfoNCELoss, NPairLoss, SupConLoss, infonce_loss, npair_loss, scl_loss

# Canonical loss identifiers, in the order reports list them.
LOSS_REGISTRY: Dict[str, Type[MetricLoss]] = {
    'contrastive': ContrastiveLoss,
    'triplet':     BatchHardTripletLoss,
    'npair':       NPairLoss,
    'infonce':     InfoNCELoss,
    'arcface':     ArcFaceLoss,
    'scl':         SupConLoss,
    'ccl':         CenterContrastiveLoss,
}

__all__ = [
    'LOSS_REGISTRY', 'CenterBank', 'LossConfig', 'LossOutput', 'MetricLoss', 'active_ratio',
    'ContrastiveLoss', 'BatchHardTripletLoss', 'NPairLoss', 'InfoNCELoss', 'SupConLoss',
    'ArcFaceLoss', 'CenterContrastiveLoss',
    'contrastive_loss', 'triplet_loss_batch_hard', 'npair_loss', 'infonce_loss', 'scl_loss',
    'arcface_loss', 'ccl_loss',
]
