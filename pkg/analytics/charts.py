"""
TrainLog CSV -> one SVG line chart per series (loss, active ratio, grad norm).

The symlog variant plots sign(y) * log(1 + |y| / theta) with theta = 1e-3.
Output is byte-stable: fixed SVG hash salt and no date metadata.

Usage:
    paths = render_charts('runs/triplet/train_log.csv', 'runs/triplet/charts', symlog=True)
"""

import logging
import os
from typing import List, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from analytics.train_log import TrainLog  # noqa: E402

logger = logging.getLogger(__name__)

SYMLOG_THETA = 1e-3

SERIES = {
    'loss':         ('losses', 'Mean loss'),
    'active_ratio': ('active_ratios', 'Active ratio'),
    'grad_norm':    ('grad_norms', 'Global gradient norm'),
}


def symlog(values: Sequence[float], theta: float = SYMLOG_THETA) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.log1p(np.abs(v) / theta)


def build_figure(epochs: Sequence[int], values: Sequence[float], label: str,
                 title: str = '', use_symlog: bool = False):
    y = symlog(values) if use_symlog else np.asarray(values, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.asarray(epochs), y, marker='o', markersize=3, linewidth=1.2)
    ax.set_xlabel('Epoch')
    ax.set_ylabel(f"symlog({label})" if use_symlog else label)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def render_charts(log_csv: str, out_dir: str, symlog: bool = False, title: str = '') -> List[str]:
    """Write ``<series>.svg`` (or ``<series>_symlog.svg``) files; returns their paths."""
    log = TrainLog.from_csv(log_csv)
    epochs = [r.epoch for r in log.records]
    os.makedirs(out_dir, exist_ok=True)

    written = []
    with plt.rc_context({'svg.hashsalt': 'dml-bench', 'svg.fonttype': 'none'}):
        for name, (attr, label) in SERIES.items():
            fig = build_figure(epochs, getattr(log, attr), label, title=title, use_symlog=symlog)
            path = os.path.join(out_dir, f"{name}_symlog.svg" if symlog else f"{name}.svg")
            fig.savefig(path, format='svg', metadata={'Date': None})
            plt.close(fig)
            written.append(path)
    logger.info("Wrote %d chart(s) to %s", len(written), out_dir)
    return written
