"""First-order optimisers and the polynomial learning-rate schedule.

The ``*_step`` functions update a list of arrays in place and keep their
moments in ``state``. Weight decay is L2 regularisation folded into the
gradient.
"""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor


def _check(params, grads):
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")


def _decayed(p, g, weight_decay):
    return g + weight_decay * p if weight_decay else g


def sgd_momentum_step(params, grads, state: dict, lr: float, momentum: float = 0.9, weight_decay: float = 0.0):
    """v <- m*v + g + wd*p ; p <- p - lr*v"""
    _check(params, grads)
    vel = state.setdefault("velocity", [np.zeros_like(p) for p in params])
    for p, g, v in zip(params, grads, vel):
        v *= momentum
        v += _decayed(p, g, weight_decay)
        p -= np.asarray(lr, dtype=p.dtype) * v
    return params


def adam_step(params, grads, state: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, weight_decay: float = 0.0):
    _check(params, grads)
    m = state.setdefault("m", [np.zeros_like(p) for p in params])
    v = state.setdefault("v", [np.zeros_like(p) for p in params])
    t = state["t"] = state.get("t", 0) + 1
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    for p, g, mi, vi in zip(params, grads, m, v):
        g = _decayed(p, g, weight_decay)
        mi *= beta1
        mi += (1 - beta1) * g
        vi *= beta2
        vi += (1 - beta2) * g * g
        p -= (lr * (mi / c1) / (np.sqrt(vi / c2) + eps)).astype(p.dtype)
    return params


def rmsprop_step(params, grads, state: dict, lr: float, momentum: float = 0.9, decay: float = 0.95,
                 eps: float = 1e-10, weight_decay: float = 0.0):
    """ms <- d*ms + (1-d)*g^2 ; mom <- m*mom + lr*g/sqrt(ms+eps) ; p <- p - mom"""
    _check(params, grads)
    ms = state.setdefault("ms", [np.zeros_like(p) for p in params])
    mom = state.setdefault("mom", [np.zeros_like(p) for p in params])
    for p, g, s, u in zip(params, grads, ms, mom):
        g = _decayed(p, g, weight_decay)
        s *= decay
        s += (1 - decay) * g * g
        u *= momentum
        u += (lr * g / np.sqrt(s + eps)).astype(p.dtype)
        p -= u
    return params


def poly_decay(base_lr: float, step: int, total: int, power: float) -> float:
    if total <= 0:
        return base_lr
    frac = min(max(step / total, 0.0), 1.0)
    return base_lr * (1.0 - frac) ** power


_STEPS = {"sgd": sgd_momentum_step, "adam": adam_step, "rmsprop": rmsprop_step}


class Optimizer:
    """Applies one of the step rules to tensors, reading their ``.grad``."""

    def __init__(self, params: list[Tensor], rule: str = "sgd", **hyper):
        if rule not in _STEPS:
            raise ValueError(f"unknown optimiser {rule!r}; choose from {sorted(_STEPS)}")
        self.params = list(params)
        self.rule = rule
        self.hyper = hyper
        self.state: dict = {}

    def step(self, lr: float) -> None:
        arrays = [p.data for p in self.params]
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        _STEPS[self.rule](arrays, grads, self.state, lr, **self.hyper)


def SGD(params, momentum=0.9, weight_decay=0.0) -> Optimizer:
    return Optimizer(params, "sgd", momentum=momentum, weight_decay=weight_decay)


def Adam(params, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0) -> Optimizer:
    return Optimizer(params, "adam", beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay)


def RMSProp(params, momentum=0.9, decay=0.95, eps=1e-10, weight_decay=0.0) -> Optimizer:
    return Optimizer(params, "rmsprop", momentum=momentum, decay=decay, eps=eps, weight_decay=weight_decay)
