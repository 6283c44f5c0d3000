"""
Adam with bias correction and decoupled weight decay.

``adam_step`` is the pure update over a dict of named parameters;
``Adam`` wraps it for the training loop and also steps a loss-owned
``CenterBank`` (as the ``loss.centers`` group) when one is present.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from core.exceptions import ContractError, ParameterError
from losses.base import CenterBank
from model.projection_head import GradSnapshot, ProjectionHead

logger = logging.getLogger(__name__)

CENTER_GROUP = 'loss.centers'


@dataclass
class AdamState:
    """
    Hyperparameters plus first/second-moment accumulators per named group.

    Accumulators are created as zeros on the first step when absent.
    """

    lr: float = 1e-4
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0:
            raise ParameterError("lr must be >= 0")
        if self.weight_decay < 0:
            raise ParameterError("weight_decay must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("betas must be in [0, 1)")
        if self.eps <= 0:
            raise ParameterError("eps must be > 0")
        if self.t < 0:
            raise ParameterError("step counter must be >= 0")

    def hyperparams(self) -> Dict[str, float]:
        return {
            'lr': self.lr,
            'weight_decay': self.weight_decay,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
        }


def adam_step(params: Dict[str, np.ndarray], grads: GradSnapshot,
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update. Inputs are not mutated; returns (new_params, new_state).

    Per group:  p <- p - lr*wd*p,  then  p <- p - lr * m_hat / (sqrt(v_hat) + eps)
    """
    missing = sorted(set(params) - set(grads.groups))
    extra = sorted(set(grads.groups) - set(params))
    if missing or extra:
        raise ContractError(f"gradient groups do not match parameters (missing={missing}, extra={extra})")

    t = state.t + 1
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads.groups[name]
        if g.shape != p.shape:
            raise ContractError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m_prev = state.m.get(name)
        v_prev = state.v.get(name)
        if m_prev is None or v_prev is None:
            if state.t > 0:
                raise ContractError(f"{name}: no optimizer state after step {state.t}")
            m_prev = np.zeros_like(p)
            v_prev = np.zeros_like(p)
        elif m_prev.shape != p.shape or v_prev.shape != p.shape:
            raise ContractError(f"{name}: accumulator shape {m_prev.shape} != parameter shape {p.shape}")

        m = state.beta1 * m_prev + (1.0 - state.beta1) * g
        v = state.beta2 * v_prev + (1.0 - state.beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2

        decayed = p - state.lr * state.weight_decay * p
        new_params[name] = decayed - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name] = m
        new_v[name] = v

    new_state = AdamState(t=t, m=new_m, v=new_v, **state.hyperparams())
    return new_params, new_state


class Adam:
    """
    Stateful optimizer bound to one ProjectionHead (single writer).

    Usage:
        opt = Adam(head, lr=1e-3, weight_decay=1e-5)
        grads = head.backward(cache, out.grad_embeddings)
        opt.step(grads, bank=bank, bank_grad=out.grad_params)
    """

    def __init__(self, head: ProjectionHead, lr: float = 1e-4, weight_decay: float = 1e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.head = head
        self.state = AdamState(lr=lr, weight_decay=weight_decay, beta1=beta1, beta2=beta2, eps=eps)

    @property
    def step_count(self) -> int:
        return self.state.t

    def step(self, grads: GradSnapshot, bank: Optional[CenterBank] = None,
             bank_grad: Optional[np.ndarray] = None) -> None:
        params = dict(self.head.params)
        snapshot = grads
        if bank is not None:
            if bank_grad is None:
                bank_grad = np.zeros_like(bank.matrix)
            params[CENTER_GROUP] = bank.matrix
            if CENTER_GROUP not in grads.groups:
                snapshot = grads.merged({CENTER_GROUP: bank_grad})

        new_params, self.state = adam_step(params, snapshot, self.state)

        if bank is not None:
            bank.matrix = new_params.pop(CENTER_GROUP)
            bank.renormalize()
        self.head.load_params(new_params)
