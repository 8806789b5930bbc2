"""Training losses as taped operations with hand-written backward passes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor, _record

MIN_VALID_DEPTH = 0.3


def _arr(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def _same_shape(pred: Tensor, target) -> np.ndarray:
    target = _arr(target)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ in shape")
    return target.astype(pred.dtype, copy=False)


def mse_loss(pred: Tensor, target) -> Tensor:
    diff = pred.data - _same_shape(pred, target)
    n = diff.size
    return _record("mse", (pred,), np.asarray(np.mean(diff * diff), dtype=pred.dtype),
                   lambda g: (g * (2.0 / n) * diff,))


def l1_loss(pred: Tensor, target) -> Tensor:
    diff = pred.data - _same_shape(pred, target)
    n = diff.size
    return _record("l1", (pred,), np.asarray(np.mean(np.abs(diff)), dtype=pred.dtype),
                   lambda g: (g * np.sign(diff) / n,))


def l2_residual_loss(pred_residual: Tensor, target, upsampled_input) -> Tensor:
    """Mean squared error against the residual ``target - upsampled_input``."""
    residual = _arr(target) - _arr(upsampled_input)
    return mse_loss(pred_residual, residual)


# ---------------------------------------------------------------------------
# depth


@dataclass
class DepthBatch:
    """Predicted and ground-truth depth in metres; readings <= 0.3 m are invalid."""

    pred: Tensor
    target: np.ndarray
    min_depth: float = MIN_VALID_DEPTH

    def __post_init__(self):
        if not isinstance(self.pred, Tensor):
            self.pred = Tensor(np.asarray(self.pred))
        self.target = np.asarray(_arr(self.target))
        if self.pred.shape != self.target.shape:
            raise ValueError(f"prediction {self.pred.shape} and target {self.target.shape} differ in shape")

    @property
    def mask(self) -> np.ndarray:
        return self.target > self.min_depth


def berhu_threshold(batch: DepthBatch) -> float:
    """One fifth of the largest masked absolute error in the batch."""
    mask = batch.mask
    if not mask.any():
        raise ValueError("no valid depth pixels in batch")
    err = np.abs(batch.pred.data.astype(np.float64) - batch.target)[mask]
    return 0.2 * float(err.max())


def berhu_loss(batch: DepthBatch, c: float, continuous: bool = False) -> Tensor:
    """Reverse Huber: |e| where |e| <= c, e**2 beyond; mean over valid pixels.

    ``c`` is a constant of the step. ``continuous=True`` swaps the upper
    branch for (e**2 + c**2) / (2c), which joins the L1 branch smoothly.
    """
    if c < 0:
        raise ValueError(f"berHu threshold must be non-negative, got {c}")
    mask = batch.mask
    n = int(mask.sum())
    if n == 0:
        raise ValueError("no valid depth pixels in batch")
    pred = batch.pred
    e = (pred.data - batch.target.astype(pred.dtype)) * mask
    a = np.abs(e)
    small = a <= c
    if continuous and c > 0:
        big_val, big_grad = (e * e + c * c) / (2 * c), e / c
    else:
        big_val, big_grad = e * e, 2 * e
    vals = np.where(small, a, big_val) * mask
    grads = np.where(small, np.sign(e), big_grad) * mask
    return _record("berhu", (pred,), np.asarray(vals.sum() / n, dtype=pred.dtype),
                   lambda g: (g * grads / n,))


# ---------------------------------------------------------------------------
# classification


def _log_softmax(z: np.ndarray, axis: int) -> np.ndarray:
    m = z.max(axis=axis, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=axis, keepdims=True))


def softmax_ce_loss(logits: Tensor, labels) -> Tensor:
    """Softmax cross-entropy over axis 1, averaged over all other positions.

    ``labels`` holds integer class ids with the logits' shape minus axis 1.
    """
    labels = np.asarray(_arr(labels)).astype(np.int64)
    k = logits.shape[1]
    expected = logits.shape[:1] + logits.shape[2:]
    if labels.shape != expected:
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    logp = _log_softmax(logits.data, axis=1)
    onehot = np.moveaxis(np.eye(k, dtype=logits.dtype)[labels], -1, 1)
    n = labels.size
    loss = -(onehot * logp).sum() / n
    probs = np.exp(logp)
    return _record("softmax_ce", (logits,), np.asarray(loss, dtype=logits.dtype),
                   lambda g: (g * (probs - onehot) / n,))


def sigmoid_ce_loss(logits: Tensor, labels) -> Tensor:
    """Per-element sigmoid cross-entropy with 0/1 labels, averaged."""
    y = _same_shape(logits, labels)
    z = logits.data
    n = z.size
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = 1.0 / (1.0 + np.exp(-z))
    return _record("sigmoid_ce", (logits,), np.asarray(loss.mean(), dtype=z.dtype),
                   lambda g: (g * (sig - y) / n,))


# ---------------------------------------------------------------------------
# colorization


@dataclass
class ColorBatch:
    """Chroma predictions/targets in [0, 1] plus classification logits.

    Three-channel YPbPr inputs have their luminance channel dropped.
    """

    pred: Tensor
    target: np.ndarray
    class_logits: Tensor
    class_onehot: np.ndarray


def colorization_loss(batch: ColorBatch) -> tuple[Tensor, Tensor, Tensor]:
    """Returns (10 * mean |chroma error|, softmax cross-entropy, their sum)."""
    pred, target = batch.pred, _arr(batch.target)
    if pred.shape[1] == 3:
        pred = T.split_channels(pred, 1)[1]
        target = target[:, 1:]
    onehot = np.asarray(_arr(batch.class_onehot))
    if onehot.shape != batch.class_logits.shape:
        raise ValueError(f"one-hot labels {onehot.shape} do not match logits {batch.class_logits.shape}")
    color = T.mul(l1_loss(pred, target), 10.0)
    ce = softmax_ce_loss(batch.class_logits, onehot.argmax(axis=1))
    return color, ce, T.add(color, ce)


# ---------------------------------------------------------------------------
# WGAN-GP


@dataclass
class GanBatch:
    """Real and generated samples, one mixing coefficient per sample, penalty weight."""

    real: np.ndarray
    fake: Tensor
    alpha: np.ndarray
    lam: float = 10.0

    def __post_init__(self):
        self.real = np.asarray(_arr(self.real))
        if not isinstance(self.fake, Tensor):
            self.fake = Tensor(np.asarray(self.fake))
        self.alpha = np.asarray(self.alpha, dtype=np.float64).reshape(-1)
        if self.real.shape != self.fake.shape:
            raise ValueError(f"real batch {self.real.shape} and fake batch {self.fake.shape} differ")
        if self.alpha.shape != (self.real.shape[0],):
            raise ValueError(f"need one alpha per sample, got {self.alpha.shape}")

    @staticmethod
    def sample_alpha(rng: np.random.Generator, batch: int) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size=batch)


def mix_samples(batch: GanBatch) -> Tensor:
    """alpha * real + (1 - alpha) * fake, per sample."""
    shape = (-1,) + (1,) * (batch.real.ndim - 1)
    a = batch.alpha.reshape(shape).astype(batch.fake.dtype)
    return T.add(Tensor(a * batch.real, dtype=batch.fake.dtype), T.mul(batch.fake, 1.0 - a))


def gradient_penalty(grad: Tensor) -> Tensor:
    """mean over samples of (||g_b||_2 - 1)**2 for a (B, D) gradient tensor."""
    g = grad.data
    b = g.shape[0]
    flat = g.reshape(b, -1)
    norm = np.sqrt((flat * flat).sum(axis=1))
    safe = np.where(norm > 0, norm, 1.0)
    coef = np.where(norm > 0, 2.0 * (norm - 1.0) / safe, 0.0) / b
    value = np.mean((norm - 1.0) ** 2)
    return _record("gradient_penalty", (grad,), np.asarray(value, dtype=g.dtype),
                   lambda up: ((up * coef[:, None] * flat).reshape(g.shape).astype(g.dtype),))


def wgan_d_loss(batch: GanBatch, discriminator) -> Tensor:
    """-E[D(real)] + E[D(fake)] + lam * E[(||grad_x D(mix)|| - 1)**2].

    ``discriminator.input_gradient`` builds grad_x D from taped first-order
    operations, so the penalty's parameter gradient needs no nested autodiff.
    """
    real = Tensor(batch.real, dtype=batch.fake.dtype)
    d_real = T.mean_all(discriminator(real))
    d_fake = T.mean_all(discriminator(batch.fake))
    loss = T.sub(d_fake, d_real)
    if batch.lam:
        penalty = gradient_penalty(discriminator.input_gradient(mix_samples(batch)))
        loss = T.add(loss, T.mul(penalty, batch.lam))
    return loss


def wgan_g_loss(batch: GanBatch, discriminator) -> Tensor:
    return T.mul(T.mean_all(discriminator(batch.fake)), -1.0)
