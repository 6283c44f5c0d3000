"""
Unit tests for model.projection_head.

Covers:
- output shape and unit norm; inference mode is deterministic
- dropout masks: same seed same mask, inference applies none
- end-to-end gradient oracle: features -> head (4->3->2) -> loss -> backward
- global gradient norm identity
- stale cache, gradient shape mismatch, degenerate output
"""

import math

import numpy as np
import pytest

from core.exceptions import ContractError, DegenerateOutputError, ParameterError, ShapeError
from core.types import LabeledSet
from losses import LOSS_REGISTRY, CenterBank, LossConfig
from model.projection_head import (
    INFERENCE,
    PARAM_GROUPS,
    TRAINING,
    GradSnapshot,
    ProjectionHead,
    backward,
    forward,
    global_grad_norm,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _features(n=8, d=4, classes=4, seed=0):
    rng = np.random.default_rng(seed)
    return LabeledSet(rng.standard_normal((n, d)), np.repeat(np.arange(classes), n // classes))


def _head(d_in=4, d_hidden=3, d_out=2, dropout_rate=0.0, seed=0):
    return ProjectionHead(d_in=d_in, d_hidden=d_hidden, d_out=d_out, dropout_rate=dropout_rate, seed=seed)


def _loss_value(head, params, features, loss, bank, mode=INFERENCE, rng_seed=None):
    head.load_params(params)
    z, _ = head.forward(features, mode=mode, rng_seed=rng_seed)
    return loss.compute(z, bank).value


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------

class TestForward:

    def test_unit_norm_output(self):
        head = _head(d_in=4, d_hidden=16, d_out=8)
        z, cache = head.forward(_features(), mode=INFERENCE)
        assert z.vectors.shape == (8, 8)
        assert np.linalg.norm(z.vectors, axis=1) == pytest.approx(np.ones(8), abs=1e-12)
        assert np.array_equal(z.labels, _features().labels)
        assert cache.dropout_mask is None

    def test_inference_is_deterministic(self):
        head = _head(dropout_rate=0.5)
        a, _ = head.forward(_features(), mode=INFERENCE)
        b, _ = head.forward(_features(), mode=INFERENCE)
        assert np.array_equal(a.vectors, b.vectors)

    def test_same_dropout_seed_same_mask(self):
        head = _head(d_hidden=32, dropout_rate=0.5)
        _, c1 = head.forward(_features(), mode=TRAINING, rng_seed=7)
        _, c2 = head.forward(_features(), mode=TRAINING, rng_seed=7)
        _, c3 = head.forward(_features(), mode=TRAINING, rng_seed=8)
        assert np.array_equal(c1.dropout_mask, c2.dropout_mask)
        assert not np.array_equal(c1.dropout_mask, c3.dropout_mask)

    def test_inverted_dropout_scaling(self):
        head = _head(d_hidden=64, dropout_rate=0.25)
        _, cache = head.forward(_features(), mode=TRAINING, rng_seed=1)
        assert set(np.unique(cache.dropout_mask)) <= {0.0, 1.0 / 0.75}

    def test_glorot_init_is_seeded(self):
        a, b = _head(seed=3), _head(seed=3)
        for name in PARAM_GROUPS:
            assert np.array_equal(a.params[name], b.params[name])
        assert a.parameter_count == 4 * 3 + 3 + 3 * 2 + 2

    def test_wrong_input_dim(self):
        with pytest.raises(ShapeError):
            _head(d_in=5).forward(_features(d=4))

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            _head().forward(_features(), mode='eval')

    def test_zero_output_is_degenerate(self):
        head = _head()
        params = dict(head.params)
        params['layer2.weight'] = np.zeros_like(params['layer2.weight'])
        params['layer2.bias'] = np.zeros_like(params['layer2.bias'])
        head.load_params(params)
        with pytest.raises(DegenerateOutputError):
            head.forward(_features())


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------

class TestBackward:

    @pytest.mark.parametrize('name', list(LOSS_REGISTRY))
    def test_end_to_end_matches_finite_differences(self, name):
        features = _features(seed=1)
        head = _head(seed=2)
        loss = LOSS_REGISTRY[name](LossConfig(arc_scale=16.0))
        bank = CenterBank.random(features.class_ids, 2, seed=5) if loss.requires_bank else None

        z, cache = head.forward(features, mode=INFERENCE)
        grads = head.backward(cache, loss.compute(z, bank).grad_embeddings)

        base = {k: v.copy() for k, v in head.params.items()}
        eps = 1e-6
        for group in PARAM_GROUPS:
            numeric = np.zeros_like(base[group])
            for idx in np.ndindex(*base[group].shape):
                plus = {k: v.copy() for k, v in base.items()}
                minus = {k: v.copy() for k, v in base.items()}
                plus[group][idx] += eps
                minus[group][idx] -= eps
                numeric[idx] = (_loss_value(head, plus, features, loss, bank)
                                - _loss_value(head, minus, features, loss, bank)) / (2 * eps)
            analytic = grads.groups[group]
            scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
            assert scale == 0 or np.linalg.norm(analytic - numeric) / scale < 1e-4, group

    def test_gradient_with_fixed_dropout_mask(self):
        features = _features(seed=4)
        head = _head(d_hidden=6, dropout_rate=0.3, seed=1)
        loss = LOSS_REGISTRY['scl']()

        z, cache = head.forward(features, mode=TRAINING, rng_seed=11)
        grads = head.backward(cache, loss.compute(z).grad_embeddings)

        base = {k: v.copy() for k, v in head.params.items()}
        eps = 1e-6
        plus = {k: v.copy() for k, v in base.items()}
        minus = {k: v.copy() for k, v in base.items()}
        plus['layer1.weight'][2, 3] += eps
        minus['layer1.weight'][2, 3] -= eps
        numeric = (_loss_value(head, plus, features, loss, None, TRAINING, 11)
                   - _loss_value(head, minus, features, loss, None, TRAINING, 11)) / (2 * eps)
        assert grads.groups['layer1.weight'][2, 3] == pytest.approx(numeric, rel=1e-4, abs=1e-9)

    def test_module_level_wrappers(self):
        head = _head()
        z, cache = forward(head, _features())
        snapshot = backward(head, cache, np.ones_like(z.vectors))
        assert set(snapshot.groups) == set(PARAM_GROUPS)

    def test_radial_gradient_vanishes(self):
        # a gradient along z itself only changes the norm, which normalization removes
        head = _head()
        z, cache = head.forward(_features())
        snapshot = head.backward(cache, 3.0 * z.vectors)
        assert snapshot.global_norm == pytest.approx(0.0, abs=1e-12)

    def test_stale_cache_rejected(self):
        head = _head()
        z, cache = head.forward(_features())
        head.load_params({k: v.copy() for k, v in head.params.items()})
        with pytest.raises(ContractError):
            head.backward(cache, np.zeros_like(z.vectors))

    def test_gradient_shape_mismatch(self):
        head = _head()
        _, cache = head.forward(_features())
        with pytest.raises(ContractError):
            head.backward(cache, np.zeros((3, 2)))

    def test_load_params_shape_mismatch(self):
        head = _head()
        params = dict(head.params)
        params['layer1.bias'] = np.zeros(7)
        with pytest.raises(ContractError):
            head.load_params(params)


# ---------------------------------------------------------------------------
# Global gradient norm
# ---------------------------------------------------------------------------

class TestGlobalGradNorm:

    def test_three_four_five(self):
        snapshot = GradSnapshot({'a': np.array([3.0]), 'b': np.array([4.0])})
        assert global_grad_norm(snapshot) == 5.0
        assert snapshot.global_norm == 5.0

    @pytest.mark.parametrize('seed', range(5))
    def test_equals_flattened_norm(self, seed):
        rng = np.random.default_rng(seed)
        groups = {'w': rng.standard_normal((4, 3)), 'b': rng.standard_normal(3), 'c': rng.standard_normal((2, 2))}
        flat = np.concatenate([g.ravel() for g in groups.values()])
        assert GradSnapshot(groups).global_norm == pytest.approx(np.linalg.norm(flat), abs=1e-12)

    def test_merged_adds_groups(self):
        snapshot = GradSnapshot({'a': np.array([3.0])}).merged({'b': np.array([4.0])})
        assert snapshot.global_norm == 5.0
        assert math.isfinite(snapshot.global_norm)
