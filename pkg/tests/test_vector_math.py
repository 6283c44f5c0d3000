"""
Unit tests for core.vector_math and core.types.

Covers:
- l2_normalize: unit output, zero vector rejected
- euclidean / cosine distance values and preconditions
- class_centroids are raw means
- pairwise helpers agree with the per-vector functions
- triangle inequality, cosine = squared euclidean / 2 on the sphere, normalize idempotence
- LabeledSet validation and helpers
"""

import numpy as np
import pytest

from core.exceptions import DegenerateInputError, PreconditionError, ShapeError
from core.types import LabeledSet
from core.vector_math import (
    class_centroids,
    cosine_distance,
    euclidean_distance,
    l2_normalize,
    normalize_rows,
    pairwise_cosine_distance,
    pairwise_euclidean,
    require_unit_norm,
    row_norms,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _unit_rows(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return normalize_rows(rng.standard_normal((n, d)))


# ---------------------------------------------------------------------------
# l2_normalize
# ---------------------------------------------------------------------------

class TestL2Normalize:

    def test_three_four_five(self):
        assert l2_normalize([3.0, 4.0]) == pytest.approx([0.6, 0.8])

    def test_result_is_unit_norm(self):
        v = np.random.default_rng(1).standard_normal(17)
        assert np.linalg.norm(l2_normalize(v)) == pytest.approx(1.0, abs=1e-12)

    def test_already_unit_is_unchanged(self):
        v = np.array([0.0, 1.0, 0.0])
        assert np.array_equal(l2_normalize(v), v)

    def test_zero_vector_rejected(self):
        with pytest.raises(DegenerateInputError):
            l2_normalize([0.0, 0.0, 0.0])

    def test_empty_vector_rejected(self):
        with pytest.raises(ShapeError):
            l2_normalize([])


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

class TestDistances:

    def test_euclidean_value(self):
        assert euclidean_distance([0.0, 0.0], [3.0, 4.0]) == 5.0

    def test_euclidean_self_is_zero(self):
        v = [0.3, -1.2, 7.0]
        assert euclidean_distance(v, v) == 0.0

    def test_euclidean_dim_mismatch(self):
        with pytest.raises(ShapeError):
            euclidean_distance([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_cosine_orthogonal_is_one(self):
        assert cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_cosine_opposite_is_two(self):
        assert cosine_distance([1.0, 0.0], [-1.0, 0.0]) == pytest.approx(2.0)

    def test_cosine_requires_unit_inputs(self):
        with pytest.raises(PreconditionError):
            cosine_distance([2.0, 0.0], [1.0, 0.0])


class TestDistanceIdentities:

    @pytest.mark.parametrize('seed', range(5))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(50):
            a, b, c = rng.standard_normal((3, 8)) * rng.uniform(0.1, 10.0)
            assert euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-9

    @pytest.mark.parametrize('seed', range(5))
    def test_cosine_is_half_squared_euclidean_on_unit_vectors(self, seed):
        z = _unit_rows(20, 7, seed=seed)
        for a, b in zip(z[:-1], z[1:]):
            assert cosine_distance(a, b) == pytest.approx(euclidean_distance(a, b) ** 2 / 2, abs=1e-9)

    @pytest.mark.parametrize('seed', range(5))
    def test_normalize_is_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        for v in rng.standard_normal((20, 5)) * rng.uniform(1e-3, 1e3, size=(20, 1)):
            once = l2_normalize(v)
            assert np.allclose(l2_normalize(once), once, rtol=0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# Matrix helpers
# ---------------------------------------------------------------------------

class TestMatrixHelpers:

    def test_pairwise_euclidean_matches_scalar(self):
        rng = np.random.default_rng(2)
        a, b = rng.standard_normal((5, 4)), rng.standard_normal((3, 4))
        dist = pairwise_euclidean(a, b)
        for i in range(5):
            for j in range(3):
                assert dist[i, j] == pytest.approx(euclidean_distance(a[i], b[j]), abs=1e-12)

    def test_pairwise_euclidean_identical_rows_exactly_zero(self):
        a = np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]])
        assert pairwise_euclidean(a, a)[0, 1] == 0.0

    def test_pairwise_cosine_matches_scalar(self):
        a, b = _unit_rows(4, 6, seed=3), _unit_rows(5, 6, seed=4)
        dist = pairwise_cosine_distance(a, b)
        assert dist[2, 3] == pytest.approx(cosine_distance(a[2], b[3]), abs=1e-12)

    def test_pairwise_cosine_rejects_raw_rows(self):
        with pytest.raises(PreconditionError):
            pairwise_cosine_distance(np.ones((2, 3)), _unit_rows(2, 3))

    def test_normalize_rows_zero_row(self):
        with pytest.raises(DegenerateInputError):
            normalize_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_row_norms(self):
        assert row_norms(np.array([[3.0, 4.0], [0.0, 2.0]])) == pytest.approx([5.0, 2.0])

    def test_require_unit_norm_names_row(self):
        m = _unit_rows(3, 4)
        m[1] *= 1.01
        with pytest.raises(PreconditionError, match='row 1'):
            require_unit_norm(m)


# ---------------------------------------------------------------------------
# Centroids and LabeledSet
# ---------------------------------------------------------------------------

class TestLabeledSet:

    def test_centroids_are_raw_means(self):
        s = LabeledSet([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]], [0, 0, 1])
        centroids = class_centroids(s)
        assert centroids[0] == pytest.approx([0.5, 0.5])
        assert centroids[1] == pytest.approx([5.0, 5.0])

    def test_members_in_index_order(self):
        s = LabeledSet(np.eye(4), [2, 0, 2, 0])
        members = s.members()
        assert members[0].tolist() == [1, 3]
        assert members[2].tolist() == [0, 2]
        assert s.class_count == 2

    def test_arrays_are_read_only(self):
        s = LabeledSet(np.eye(2), [0, 1])
        with pytest.raises(ValueError):
            s.vectors[0, 0] = 5.0

    def test_label_length_mismatch(self):
        with pytest.raises(ShapeError):
            LabeledSet(np.eye(3), [0, 1])

    def test_negative_label_rejected(self):
        with pytest.raises(ShapeError):
            LabeledSet(np.eye(2), [0, -1])

    def test_subset_and_with_vectors(self):
        s = LabeledSet(np.arange(6.0).reshape(3, 2), [0, 1, 1])
        sub = s.subset([2, 0])
        assert sub.labels.tolist() == [1, 0]
        assert sub.vectors[0].tolist() == [4.0, 5.0]
        moved = s.with_vectors(np.zeros((3, 2)))
        assert moved.labels.tolist() == [0, 1, 1]
