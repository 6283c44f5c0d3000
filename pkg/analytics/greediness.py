"""
GREEDINESS diagnostics: how eagerly a loss keeps optimizing.

Usage:
    from analytics.greediness import summarize_greediness

    summary = summarize_greediness(train_log)
    summary.print_report()
"""

from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from core.exceptions import ParameterError, PreconditionError

if TYPE_CHECKING:
    from analytics.train_log import TrainLog

EARLY_EPOCHS = 10


def loss_reduction_epoch(curve: Sequence[float], fraction: float) -> Optional[int]:
    """
    Smallest epoch e with curve[e] <= (1 - fraction) * curve[0], or None.
    """
    if len(curve) == 0:
        raise PreconditionError("loss curve is empty")
    if not 0.0 < fraction < 1.0:
        raise ParameterError("fraction must be in (0, 1)")
    if curve[0] <= 0:
        raise PreconditionError(f"initial loss must be positive, got {curve[0]}")
    target = (1.0 - fraction) * curve[0]
    for epoch, value in enumerate(curve):
        if value <= target:
            return epoch
    return None


@dataclass
class GreedinessSummary:
    mean_active_ratio: float
    mean_grad_norm: float
    epochs_to_50pct: Optional[int]
    epochs_to_60pct: Optional[int]
    early_active_ratio: float
    final_active_ratio: float
    final_grad_norm: float
    early_epochs: int = EARLY_EPOCHS

    def to_dict(self) -> dict:
        return asdict(self)

    def print_report(self, title: str = ''):
        width = 44

        def _epoch(e: Optional[int]) -> str:
            return f"{e:>14}" if e is not None else f"{'-':>14}"

        print('=' * width)
        print(f"  Greediness Report {title}".rstrip())
        print('=' * width)
        print(f"  Mean Active Ratio        : {self.mean_active_ratio:>14.4f}")
        print(f"  Early Active Ratio ({self.early_epochs:>2}) : {self.early_active_ratio:>14.4f}")
        print(f"  Final Active Ratio       : {self.final_active_ratio:>14.4f}")
        print('-' * width)
        print(f"  Mean Grad Norm           : {self.mean_grad_norm:>14.6f}")
        print(f"  Final Grad Norm          : {self.final_grad_norm:>14.6f}")
        print('-' * width)
        print(f"  Epochs to 50% reduction  : {_epoch(self.epochs_to_50pct)}")
        print(f"  Epochs to 60% reduction  : {_epoch(self.epochs_to_60pct)}")
        print('=' * width)


def summarize_greediness(log: 'TrainLog', early_epochs: int = EARLY_EPOCHS) -> GreedinessSummary:
    """Means over all epochs, early/final values and the two loss-reduction epochs."""
    if len(log.records) == 0:
        raise PreconditionError("cannot summarize an empty train log")
    losses = log.losses
    ratios = np.asarray(log.active_ratios)
    norms = np.asarray(log.grad_norms)

    # a run that starts at zero loss has nothing to reduce
    if losses[0] > 0:
        to_50 = loss_reduction_epoch(losses, 0.5)
        to_60 = loss_reduction_epoch(losses, 0.6)
    else:
        to_50 = to_60 = None

    return GreedinessSummary(
        mean_active_ratio=float(np.mean(ratios)),
        mean_grad_norm=float(np.mean(norms)),
        epochs_to_50pct=to_50,
        epochs_to_60pct=to_60,
        early_active_ratio=float(np.mean(ratios[:early_epochs])),
        final_active_ratio=float(ratios[-1]),
        final_grad_norm=float(norms[-1]),
        early_epochs=early_epochs,
    )
