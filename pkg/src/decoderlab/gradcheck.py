"""Compare taped gradients against central finite differences."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / max(||a||, ||b||), and 0 when both vanish."""
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def analytic_grads(fn: Callable[..., Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    for x in inputs:
        x.requires_grad = True
    with T.Tape() as tape:
        loss = fn(*inputs)
    T.backward(tape, loss)
    return [x.grad.copy() for x in inputs]


def check_gradients(fn: Callable[..., Tensor], inputs: Sequence[Tensor], eps: float = 1e-3) -> float:
    """Largest relative error over ``inputs`` between backward and finite differences of ``fn``."""
    analytic = analytic_grads(fn, inputs)
    worst = 0.0
    for x, ga in zip(inputs, analytic):
        gn = T.finite_diff_grad(lambda: fn(*inputs), x, eps)
        worst = max(worst, relative_error(ga, gn))
    return worst


def weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(weights * out)``, so every output element gets a distinct gradient."""
    return T.sum_all(T.mul(out, Tensor(weights.astype(out.dtype))))
