"""
Exact nearest-neighbor retrieval under cosine distance.

Protocol: leave-one-out on a single labeled set.  Every sample queries the
other n-1 samples; ties in distance go to the lower gallery index.

Usage:
    report = recall_at_k(test_embeddings, ks=(1, 5, 10))
    print(report.recall_at_k[1])
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from core.exceptions import ParameterError, ShapeError
from core.types import LabeledSet, Vector
from core.vector_math import pairwise_cosine_distance, require_unit_norm

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10)


@dataclass
class RecallReport:
    k_values: List[int]
    recall_at_k: Dict[int, float]
    query_count: int
    singleton_queries: int = 0

    def to_dict(self) -> dict:
        return {
            'k_values': list(self.k_values),
            'recall_at_k': {str(k): v for k, v in self.recall_at_k.items()},
            'query_count': self.query_count,
            'singleton_queries': self.singleton_queries,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> 'RecallReport':
        return cls(
            k_values=[int(k) for k in raw['k_values']],
            recall_at_k={int(k): float(v) for k, v in raw['recall_at_k'].items()},
            query_count=int(raw['query_count']),
            singleton_queries=int(raw.get('singleton_queries', 0)),
        )


def _check_ks(ks: Sequence[int], limit: int) -> List[int]:
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ParameterError("k values must be positive integers")
    if ks[-1] >= limit:
        raise ParameterError(f"k={ks[-1]} must be smaller than the set size {limit}")
    return ks


def recall_at_k(s: LabeledSet, ks: Sequence[int] = DEFAULT_KS) -> RecallReport:
    n = len(s)
    ks = _check_ks(ks, n)
    z = s.vectors
    require_unit_norm(z)

    dist = pairwise_cosine_distance(z, z)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind='stable')
    matches = s.labels[order] == s.labels[:, None]
    # the query itself sorts last (distance inf) and never matches inside top-k < n
    matches[:, -1] = False

    has_match = matches.any(axis=1)
    first_hit = np.where(has_match, np.argmax(matches, axis=1), n)
    singletons = int(np.count_nonzero(~has_match))
    if singletons:
        logger.warning("%d query(ies) belong to singleton classes and count as misses", singletons)

    recall = {k: float(np.count_nonzero(first_hit < k)) / n for k in ks}
    return RecallReport(k_values=ks, recall_at_k=recall, query_count=n, singleton_queries=singletons)


def nearest_neighbors(query: Vector, gallery: LabeledSet, k: int) -> List[Tuple[int, float]]:
    """k smallest cosine distances, ascending, ties by gallery index."""
    if k < 1 or k > len(gallery):
        raise ParameterError(f"k={k} must be in [1, {len(gallery)}]")
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != gallery.dim:
        raise ShapeError(f"query dim {q.shape} does not match gallery dim {gallery.dim}")
    dist = pairwise_cosine_distance(q[None, :], gallery.vectors)[0]
    order = np.argsort(dist, kind='stable')[:k]
    return [(int(i), float(dist[i])) for i in order]


def recall_table(reports: Mapping[str, RecallReport], ks: Sequence[int] = DEFAULT_KS) -> str:
    """Fixed-column text table: one row per loss, one r@k column per k."""
    rows = []
    for name, report in reports.items():
        row = {'loss': name}
        for k in ks:
            value = report.recall_at_k.get(k)
            row[f'r@{k}'] = round(value * 100.0, 2) if value is not None else None
        rows.append(row)
    frame = pd.DataFrame(rows, columns=['loss'] + [f'r@{k}' for k in ks])
    return frame.to_string(index=False, na_rep='-')
