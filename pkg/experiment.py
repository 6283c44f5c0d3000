"""
Experiment runner: data -> head -> loss -> diagnostics -> retrieval.

Usage:
    from core.config import ExperimentConfig
    from experiment import run_experiment, run_suite

    summary = run_experiment(ExperimentConfig.preset('coarse', loss='triplet'))
    summary.print_report()

    result = run_suite([ExperimentConfig.preset('fine', loss=name) for name in ('contrastive', 'triplet')])
    print(format_variance_table(result.table))

Output directory of one run::

    train_log.csv            epoch,loss,active_ratio,grad_norm
    summary.json             ExperimentSummary (status 'ok' or 'failed')
    embeddings.json (+ .bin) final test embeddings, feature-file format
    embeddings_subset.json   seeded random subset of the above
    checkpoint/              head, optimizer state and center bank
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from analytics.greediness import GreedinessSummary, summarize_greediness
from analytics.train_log import TrainLog
from analytics.variance import VarianceReport, cosine_distance_stats
from builder import TrainerBuilder
from core.config import ExperimentConfig
from core.types import LabeledSet
from core.vector_math import UNIT_NORM_TOL, normalize_rows, row_norms
from data.dataset import FeatureDataset
from data.feature_io import load_features, save_features
from data.synthetic import generate_synthetic
from model.checkpoint import save_checkpoint
from retrieval.recall import DEFAULT_KS, RecallReport, recall_at_k, recall_table

logger = logging.getLogger(__name__)

LIBRARY_VERSION = '0.1.0'

LOG_FILE = 'train_log.csv'
SUMMARY_FILE = 'summary.json'
EMBEDDING_FILE = 'embeddings.json'
SUBSET_FILE = 'embeddings_subset.json'
CHECKPOINT_DIR = 'checkpoint'


@dataclass
class ExperimentSummary:
    loss: str
    status: str
    config: dict
    config_hash: str
    library_version: str = LIBRARY_VERSION
    wall_clock_seconds: float = 0.0
    initial_variance: Optional[VarianceReport] = None
    final_variance: Optional[VarianceReport] = None
    greediness: Optional[GreedinessSummary] = None
    recall: Optional[RecallReport] = None
    error: Optional[str] = None
    out_dir: str = ''
    log: Optional[TrainLog] = None

    @property
    def ok(self) -> bool:
        return self.status == 'ok'

    def to_dict(self) -> dict:
        out = self.log.summary_dict(self.final_variance) if self.log is not None else {}
        out.update({
            'loss': self.loss,
            'status': self.status,
            'config': self.config,
            'config_hash': self.config_hash,
            'library_version': self.library_version,
            'wall_clock_seconds': self.wall_clock_seconds,
            'initial_variance': self.initial_variance.to_dict() if self.initial_variance else None,
            'final_variance': self.final_variance.to_dict() if self.final_variance else None,
            'greediness': self.greediness.to_dict() if self.greediness else None,
            'recall': self.recall.to_dict() if self.recall else None,
            'error': self.error,
        })
        return out

    def write(self, path: str) -> str:
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return path

    def print_report(self):
        width = 44
        print('=' * width)
        print(f"  Experiment: {self.loss} [{self.status}]")
        print('=' * width)
        if self.error:
            print(f"  Error: {self.error}")
        if self.final_variance is not None:
            print_variance(self.final_variance)
        if self.recall is not None:
            print_recall(self.recall)
        if self.greediness is not None:
            self.greediness.print_report(f"({self.loss})")
        print(f"  Wall clock           : {self.wall_clock_seconds:>12.2f} s")


# ---------------------------------------------------------------------------
# Helpers shared by training and offline diagnostics
# ---------------------------------------------------------------------------

def prepare_embeddings(s: LabeledSet) -> LabeledSet:
    """
    Quantize to float32 (the dump precision) and re-normalize only rows that
    drift past the unit-norm tolerance.  Idempotent, so diagnostics on a
    dump equal the diagnostics of the run that wrote it.
    """
    q = s.vectors.astype(np.float32).astype(np.float64)
    if np.any(np.abs(row_norms(q) - 1.0) > UNIT_NORM_TOL):
        q = normalize_rows(q).astype(np.float32).astype(np.float64)
    return s.with_vectors(q)


def load_data(cfg: ExperimentConfig) -> Tuple[FeatureDataset, FeatureDataset]:
    """(train, test). File sources without a test file evaluate on train."""
    if cfg.synthetic is not None:
        return generate_synthetic(cfg.synthetic, 'train'), generate_synthetic(cfg.synthetic, 'test')
    cfg.validate_paths()
    train = load_features(cfg.train_path, 'train')
    test = load_features(cfg.test_path, 'test') if cfg.test_path else train
    return train, test


def _usable_ks(ks: Sequence[int], n: int) -> List[int]:
    usable = [k for k in ks if k < n]
    if len(usable) < len(ks):
        logger.warning("dropping k >= %d from %s (set too small)", n, list(ks))
    return usable


def _write_subset(embeddings: LabeledSet, size: int, seed: int, path: str) -> Optional[str]:
    if size <= 0:
        return None
    n = len(embeddings)
    rng = np.random.default_rng([seed, n])
    idx = np.sort(rng.choice(n, size=min(size, n), replace=False))
    return save_features(embeddings.subset(idx), path)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> ExperimentSummary:
    """
    Train, snapshot, evaluate, write artifacts.  On any error the partial
    log and a 'failed' summary are written before the error propagates.
    """
    started = time.perf_counter()
    os.makedirs(cfg.out_dir, exist_ok=True)
    log_path = os.path.join(cfg.out_dir, LOG_FILE)
    summary = ExperimentSummary(
        loss=cfg.loss, status='failed', config=cfg.to_dict(),
        config_hash=cfg.config_hash(), out_dir=cfg.out_dir,
    )
    logger.info("Experiment %s (hash %s) -> %s", cfg.loss, summary.config_hash[:12], cfg.out_dir)

    trainer = None
    try:
        train, test = load_data(cfg)
        trainer = (
            TrainerBuilder.from_config(cfg, train, test.as_labeled())
            .set_log_path(log_path)
            .build()
        )
        trainer.log.config_hash = summary.config_hash
        log = trainer.run()
        summary.log = log
        log.to_csv(log_path)

        final = prepare_embeddings(trainer.embed(test.as_labeled()))
        summary.initial_variance = log.snapshots.get(0)
        summary.final_variance = cosine_distance_stats(final)
        summary.greediness = summarize_greediness(log) if len(log) else None
        summary.recall = recall_at_k(final, _usable_ks(cfg.ks, len(final)))

        save_features(final, os.path.join(cfg.out_dir, EMBEDDING_FILE))
        _write_subset(final, cfg.dump_subset, cfg.seed, os.path.join(cfg.out_dir, SUBSET_FILE))
        save_checkpoint(os.path.join(cfg.out_dir, CHECKPOINT_DIR), trainer.head,
                        trainer.optimizer.state, trainer.bank)
        summary.status = 'ok'
    except Exception as exc:
        summary.error = f"{type(exc).__name__}: {exc}"
        if trainer is not None:
            summary.log = trainer.log
            trainer.flush()
        raise
    finally:
        summary.wall_clock_seconds = time.perf_counter() - started
        summary.write(os.path.join(cfg.out_dir, SUMMARY_FILE))

    logger.info("Experiment %s finished in %.1fs", cfg.loss, summary.wall_clock_seconds)
    return summary


@dataclass
class SuiteResult:
    table: pd.DataFrame
    summaries: List[ExperimentSummary] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for s in self.summaries if not s.ok)


TABLE_COLUMNS = [
    'loss', 'seed', 'status',
    'intra_mean', 'intra_var', 'inter_mean', 'inter_var',
    'r@1', 'r@5', 'r@10',
    'mean_active_ratio', 'mean_grad_norm', 'epochs_to_50pct',
]


def _table_row(cfg: ExperimentConfig, s: ExperimentSummary) -> dict:
    row = {'loss': s.loss, 'seed': cfg.seed, 'status': s.status}
    v, g, r = s.final_variance, s.greediness, s.recall
    row.update({
        'intra_mean': v.intra_mean if v else None,
        'intra_var': v.intra_var if v else None,
        'inter_mean': v.inter_mean if v else None,
        'inter_var': v.inter_var if v else None,
        'mean_active_ratio': g.mean_active_ratio if g else None,
        'mean_grad_norm': g.mean_grad_norm if g else None,
        'epochs_to_50pct': g.epochs_to_50pct if g else None,
    })
    for k in (1, 5, 10):
        row[f'r@{k}'] = r.recall_at_k.get(k) if r else None
    return row


def run_suite(cfgs: Sequence[ExperimentConfig], out_dir: Optional[str] = None) -> SuiteResult:
    """
    Run every config; a failing member is recorded as a 'failed' row and the
    suite continues.  Each run writes to ``<base>/<loss>_seed<seed>``, where
    ``base`` is ``out_dir`` if given, else the member's own ``out_dir``.  The
    table goes to ``<out_dir>/suite_table.csv`` only when ``out_dir`` is given.
    """
    if not cfgs:
        raise ValueError("run_suite needs at least one config")
    rows, summaries = [], []
    for cfg in cfgs:
        base = out_dir if out_dir is not None else cfg.out_dir
        cfg = replace(cfg, out_dir=os.path.join(base, f"{cfg.loss}_seed{cfg.seed}"))
        try:
            summary = run_experiment(cfg)
        except Exception as exc:
            logger.error("Suite member %s (seed %d) failed: %s", cfg.loss, cfg.seed, exc, exc_info=True)
            summary = ExperimentSummary(
                loss=cfg.loss, status='failed', config=cfg.to_dict(),
                config_hash=cfg.config_hash(), error=f"{type(exc).__name__}: {exc}",
                out_dir=cfg.out_dir,
            )
        summaries.append(summary)
        rows.append(_table_row(cfg, summary))

    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    if out_dir is not None:
        path = os.path.join(out_dir, 'suite_table.csv')
        table.to_csv(path, index=False, float_format='%.6g', lineterminator='\n')
        logger.info("Wrote suite table (%d row(s)) to %s", len(table), path)
    return SuiteResult(table=table, summaries=summaries)


def diagnose(embedding_file: str, ks: Sequence[int] = DEFAULT_KS) -> Tuple[VarianceReport, RecallReport]:
    """Offline VARIANCE and Recall@k for an embedding dump (or any feature file)."""
    embeddings = prepare_embeddings(load_features(embedding_file, 'test').as_labeled())
    report = cosine_distance_stats(embeddings)
    usable = _usable_ks(ks, len(embeddings))
    if embeddings.class_count < 2:
        # nothing to discriminate: a single-class file scores 0 at every k
        return report, RecallReport(usable, {k: 0.0 for k in usable}, len(embeddings))
    return report, recall_at_k(embeddings, usable)


def evaluate(embedding_file: str, ks: Sequence[int] = DEFAULT_KS) -> RecallReport:
    embeddings = prepare_embeddings(load_features(embedding_file, 'test').as_labeled())
    return recall_at_k(embeddings, ks)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def format_variance_table(table: pd.DataFrame) -> str:
    """Intra/inter mean and variance columns per loss, fixed width."""
    cols = ['loss', 'seed', 'intra_mean', 'intra_var', 'inter_mean', 'inter_var']
    return table[cols].to_string(index=False, na_rep='-', float_format=lambda x: f"{x:.4f}")


def format_recall_table(result: SuiteResult) -> str:
    reports = {
        f"{s.loss}/{s.config.get('seed', 0)}": s.recall
        for s in result.summaries if s.recall is not None
    }
    return recall_table(reports)


def format_comparison_table(table: pd.DataFrame) -> str:
    return table.to_string(index=False, na_rep='-', float_format=lambda x: f"{x:.4f}")


def print_variance(report: VarianceReport):
    def _fmt(x: Optional[float]) -> str:
        return f"{x:>12.6f}" if x is not None else f"{'-':>12}"

    print(f"  Classes / Samples    : {report.class_count:>5} / {report.sample_count}")
    print(f"  sigma2 intra (sq.)   : {_fmt(report.sigma2_intra_eq1)}")
    print(f"  sigma2 inter (sq.)   : {_fmt(report.sigma2_inter_eq1)}")
    print(f"  Intra mean / var     : {_fmt(report.intra_mean)} {_fmt(report.intra_var)}")
    print(f"  Inter mean / var     : {_fmt(report.inter_mean)} {_fmt(report.inter_var)}")
    print(f"  Nearest centroid     : {_fmt(report.nearest_centroid_mean)} {_fmt(report.nearest_centroid_var)}")
    print(f"  Separation ratio     : {_fmt(report.separation_ratio)}")


def print_recall(report: RecallReport):
    for k in report.k_values:
        print(f"  Recall@{k:<3}           : {report.recall_at_k[k]:>12.4f}")
    if report.singleton_queries:
        print(f"  Singleton queries    : {report.singleton_queries:>12}")
