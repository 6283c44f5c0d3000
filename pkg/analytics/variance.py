"""
VARIANCE diagnostics: embedding-geometry statistics of a labeled set.

Two conventions are reported side by side:

* squared-norm variances (intra = mean squared deviation from the class
  centroid averaged over classes, inter = mean squared distance between
  distinct centroids over ordered pairs), on raw centroids;
* cosine-distance statistics, with centroids re-normalized: pooled
  sample-to-own-centroid distances (intra) and centroid-to-centroid
  distances over unordered pairs (inter), each as mean and population
  variance.

Usage:
    report = cosine_distance_stats(embeddings)
    print(report.intra_mean, report.inter_mean, report.separation_ratio)
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from core.exceptions import DegenerateCentroidError
from core.types import LabeledSet
from core.vector_math import class_centroids, pairwise_euclidean, require_unit_norm


@dataclass
class VarianceReport:
    sigma2_intra_eq1: float
    sigma2_inter_eq1: Optional[float]
    intra_mean: float
    intra_var: float
    inter_mean: Optional[float]
    inter_var: Optional[float]
    per_class_intra: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    # inter_mean / intra_mean; absent with a single class or zero intra spread
    separation_ratio: Optional[float] = None
    # each class's cosine distance to its nearest other centroid
    nearest_centroid_mean: Optional[float] = None
    nearest_centroid_var: Optional[float] = None
    class_count: int = 0
    sample_count: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out['per_class_intra'] = {
            str(c): {'mean': m, 'var': v} for c, (m, v) in sorted(self.per_class_intra.items())
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> 'VarianceReport':
        data = dict(raw)
        data['per_class_intra'] = {
            int(c): (mv['mean'], mv['var']) for c, mv in raw.get('per_class_intra', {}).items()
        }
        return cls(**data)


def variance_eq1(s: LabeledSet) -> Tuple[float, Optional[float]]:
    """
    (sigma2_intra, sigma2_inter) on raw centroids:

        intra = (1/C) sum_c (1/N_c) sum_{i in I_c} ||z_i - mu_c||^2
        inter = 1/(C(C-1)) sum_{c != c'} ||mu_c - mu_c'||^2

    inter is None when C = 1.
    """
    centroids = class_centroids(s)
    members = s.members()
    per_class = [
        float(np.mean(np.sum((s.vectors[idx] - centroids[c]) ** 2, axis=1)))
        for c, idx in members.items()
    ]
    intra = float(np.mean(per_class))

    C = len(centroids)
    if C < 2:
        return intra, None
    mu = np.stack([centroids[c] for c in sorted(centroids)])
    squared = pairwise_euclidean(mu, mu) ** 2
    inter = float(np.sum(squared) / (C * (C - 1)))
    return intra, inter


def _normalized_centroids(s: LabeledSet) -> Dict[int, np.ndarray]:
    out = {}
    for c, mu in class_centroids(s).items():
        norm = float(np.linalg.norm(mu))
        if norm == 0.0:
            raise DegenerateCentroidError(f"class {c} has a zero-norm centroid", c)
        out[c] = mu / norm
    return out


def _mean_var(values: np.ndarray) -> Tuple[float, float]:
    return float(np.mean(values)), float(np.var(values))


def cosine_distance_stats(s: LabeledSet) -> VarianceReport:
    """Full VarianceReport for unit-norm embeddings."""
    require_unit_norm(s.vectors)
    sigma2_intra, sigma2_inter = variance_eq1(s)
    centroids = _normalized_centroids(s)

    per_class: Dict[int, Tuple[float, float]] = {}
    pooled = []
    for c, idx in s.members().items():
        # clip rounding noise below zero; the distance is non-negative
        d = np.maximum(0.0, 1.0 - s.vectors[idx] @ centroids[c])
        per_class[c] = _mean_var(d)
        pooled.append(d)
    intra_mean, intra_var = _mean_var(np.concatenate(pooled))

    report = VarianceReport(
        sigma2_intra_eq1=sigma2_intra,
        sigma2_inter_eq1=sigma2_inter,
        intra_mean=intra_mean,
        intra_var=intra_var,
        inter_mean=None,
        inter_var=None,
        per_class_intra=per_class,
        class_count=len(centroids),
        sample_count=len(s),
    )
    if len(centroids) < 2:
        return report

    mu = np.stack([centroids[c] for c in sorted(centroids)])
    dist = np.maximum(0.0, 1.0 - mu @ mu.T)
    iu, ju = np.triu_indices(mu.shape[0], k=1)
    report.inter_mean, report.inter_var = _mean_var(dist[iu, ju])

    np.fill_diagonal(dist, np.inf)
    report.nearest_centroid_mean, report.nearest_centroid_var = _mean_var(dist.min(axis=1))
    if intra_mean > 0.0:
        report.separation_ratio = report.inter_mean / intra_mean
    return report
