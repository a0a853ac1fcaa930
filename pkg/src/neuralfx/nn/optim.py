"""Adam and gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_param(cls, param, **hyper):
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **hyper)


def adam_step(param, state: AdamState) -> None:
    """Bias-corrected Adam update of ``param`` in place; zeroes its gradient."""
    g = param.grad
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1 - state.beta2) * (g * g)
    m_hat = state.m / (1 - state.beta1 ** t)
    v_hat = state.v / (1 - state.beta2 ** t)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    param.zero_grad()


@dataclass
class Adam:
    params: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    states: list = field(init=False)

    def __post_init__(self):
        self.states = [AdamState.for_param(p, lr=self.lr, beta1=self.beta1, beta2=self.beta2,
                                           epsilon=self.epsilon) for p in self.params]

    def set_lr(self, lr):
        self.lr = lr
        for s in self.states:
            s.lr = lr

    def step(self):
        for p, s in zip(self.params, self.states):
            adam_step(p, s)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def clip_grad_norm(params, max_norm):
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(np.square(p.grad, dtype=np.float64))) for p in params)))
    if total > max_norm > 0:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= p.grad.dtype.type(scale)
    return total
