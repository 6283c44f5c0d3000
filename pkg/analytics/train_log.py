"""
Per-epoch training log.

CSV layout is fixed: ``epoch,loss,active_ratio,grad_norm``, one row per
epoch, epochs contiguous from 0.  Variance snapshots are keyed by the number
of completed epochs (0 = before any update) and travel in the JSON summary.
"""

import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from analytics.greediness import summarize_greediness
from analytics.variance import VarianceReport
from core.exceptions import CSVParseError, PreconditionError
from data.feature_io import read_numeric_csv

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['epoch', 'loss', 'active_ratio', 'grad_norm']


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    active_ratio: float
    grad_norm: float


@dataclass
class TrainLog:
    loss_name: str
    config_hash: str = ''
    seed: int = 0
    records: List[EpochRecord] = field(default_factory=list)
    snapshots: Dict[int, VarianceReport] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        if record.epoch != len(self.records):
            raise PreconditionError(f"epoch {record.epoch} breaks contiguity (expected {len(self.records)})")
        if not 0.0 <= record.active_ratio <= 1.0:
            raise PreconditionError(f"active ratio {record.active_ratio} outside [0, 1]")
        self.records.append(record)

    def add_snapshot(self, epochs_completed: int, report: VarianceReport) -> None:
        self.snapshots[epochs_completed] = report

    # ------------------------------------------------------------------
    # Series
    # ------------------------------------------------------------------

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]

    @property
    def active_ratios(self) -> List[float]:
        return [r.active_ratio for r in self.records]

    @property
    def grad_norms(self) -> List[float]:
        return [r.grad_norm for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=CSV_COLUMNS)

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_csv(self, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format='%.12g', lineterminator='\n')
        logger.info("Wrote %d epoch record(s) to %s", len(self.records), path)
        return path

    @classmethod
    def from_csv(cls, path: str, loss_name: str = '') -> 'TrainLog':
        frame = read_numeric_csv(path)
        if list(frame.columns) != CSV_COLUMNS:
            raise CSVParseError(f"header must be {','.join(CSV_COLUMNS)}, got {','.join(frame.columns)}", 1)
        log = cls(loss_name=loss_name)
        for i, row in enumerate(frame.itertuples(index=False)):
            values = (row.epoch, row.loss, row.active_ratio, row.grad_norm)
            if not all(math.isfinite(v) for v in values):
                raise CSVParseError("non-finite value", i + 2)
            if row.epoch != i:
                raise CSVParseError(f"epoch {row.epoch:g} out of sequence (expected {i})", i + 2)
            if not 0.0 <= row.active_ratio <= 1.0:
                raise CSVParseError(f"active_ratio {row.active_ratio:g} outside [0, 1]", i + 2)
            log.append(EpochRecord(i, float(row.loss), float(row.active_ratio), float(row.grad_norm)))
        return log

    def summary_dict(self, final_report: Optional[VarianceReport] = None) -> dict:
        """Greediness record plus the final VarianceReport, JSON-ready."""
        out = {
            'loss': self.loss_name,
            'config_hash': self.config_hash,
            'seed': self.seed,
            'epochs': len(self.records),
            'greediness': summarize_greediness(self).to_dict() if self.records else None,
            'snapshots': {str(k): v.to_dict() for k, v in sorted(self.snapshots.items())},
        }
        if final_report is not None:
            out['final_variance'] = final_report.to_dict()
        return out
