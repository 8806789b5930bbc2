"""Evaluation metrics on plain arrays (no gradients)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .losses import MIN_VALID_DEPTH, DepthBatch
from .tensor import Tensor


def _np(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)


def psnr(pred, target, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    p, t = _np(pred), _np(target)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    mse = float(np.mean((p - t) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val**2 / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable valid-mode filtering over the last two axes."""
    k = len(g)
    win = np.lib.stride_tricks.sliding_window_view(img, k, axis=-2)
    rows = np.tensordot(win, g, axes=([-1], [0]))
    win = np.lib.stride_tricks.sliding_window_view(rows, k, axis=-1)
    return np.tensordot(win, g, axes=([-1], [0]))


def ssim(pred, target, data_range: float = 1.0, win_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over every full Gaussian window.

    Inputs are (H, W) or any (..., H, W) stack; the mean runs over all
    windows of all images/channels.
    """
    a, b = _np(pred), _np(target)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape[-2:]) < win_size:
        raise ValueError(f"images must be at least {win_size}x{win_size}, got {a.shape[-2:]}")
    g = gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def confusion(pred_labels, gt_labels, num_classes: int) -> np.ndarray:
    p = np.asarray(pred_labels).astype(np.int64).ravel()
    g = np.asarray(gt_labels).astype(np.int64).ravel()
    if p.shape != g.shape:
        raise ValueError("label maps differ in size")
    return np.bincount(g * num_classes + p, minlength=num_classes**2).reshape(num_classes, num_classes)


def miou(pred_labels, gt_labels, num_classes: int) -> float:
    """Mean IoU over the classes that occur in the ground truth."""
    cm = confusion(pred_labels, gt_labels, num_classes)
    inter = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - np.diag(cm)
    present = cm.sum(axis=1) > 0
    return float(np.mean(inter[present] / union[present]))


@dataclass
class DepthMetrics:
    mre: float
    rmse: float
    rmse_log: float
    delta1: float
    delta2: float
    delta3: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def depth_metrics(pred, target=None, min_depth: float = MIN_VALID_DEPTH, eps: float = 1e-6) -> DepthMetrics:
    """Relative error, RMSE, RMSE of natural logs and the three ratio accuracies.

    Only pixels with target above ``min_depth`` count; predictions are
    floored at ``eps`` before ratios and logs. Thresholds are strict.
    Accepts a :class:`DepthBatch` in place of the two arrays.
    """
    if isinstance(pred, DepthBatch):
        pred, target, min_depth = pred.pred, pred.target, pred.min_depth
    p, t = _np(pred), _np(target)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {t.shape}")
    mask = t > min_depth
    if not mask.any():
        raise ValueError("no valid depth pixels")
    p, t = np.maximum(p[mask], eps), t[mask]
    ratio = np.maximum(p / t, t / p)
    return DepthMetrics(
        mre=float(np.mean(np.abs(p - t) / t)),
        rmse=float(np.sqrt(np.mean((p - t) ** 2))),
        rmse_log=float(np.sqrt(np.mean((np.log(p) - np.log(t)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25**2)),
        delta3=float(np.mean(ratio < 1.25**3)),
    )


def pckh(pred_kp, gt_kp, head_lengths, fraction: float = 0.5) -> float:
    """Fraction of keypoints closer than ``fraction`` x head length (strict).

    Keypoints are (..., K, 2); ``head_lengths`` broadcasts against (..., K).
    """
    p, g = _np(pred_kp), _np(gt_kp)
    if p.shape != g.shape or p.shape[-1] != 2:
        raise ValueError(f"keypoints must share shape (..., 2), got {p.shape} and {g.shape}")
    err = np.linalg.norm(p - g, axis=-1)
    limit = fraction * np.broadcast_to(_np(head_lengths), err.shape)
    return float(np.mean(err < limit))


def heatmap_peaks(heatmaps) -> np.ndarray:
    """(N, K, H, W) heatmaps -> (N, K, 2) argmax coordinates as (row, col)."""
    h = _np(heatmaps)
    n, k, hh, ww = h.shape
    idx = h.reshape(n, k, -1).argmax(axis=-1)
    return np.stack([idx // ww, idx % ww], axis=-1).astype(np.float64)


def chroma_rmse(pred_chroma, gt_chroma) -> np.ndarray:
    """Per-pixel RMSE across the channel axis (axis 1 of NCHW)."""
    p, g = _np(pred_chroma), _np(gt_chroma)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {g.shape}")
    return np.sqrt(np.mean((p - g) ** 2, axis=1))


def color_auc(pred_chroma, gt_chroma, thresholds: int = 101) -> float:
    """Area under accuracy-vs-threshold for thresholds evenly spaced on [0, 1].

    A pixel counts as correct at threshold t when its chroma RMSE <= t.
    Three-channel YPbPr inputs drop the luminance channel first.
    """
    p, g = _np(pred_chroma), _np(gt_chroma)
    if p.ndim == 4 and p.shape[1] == 3:
        p, g = p[:, 1:], g[:, 1:]
    err = chroma_rmse(p, g).ravel()
    ts = np.linspace(0.0, 1.0, thresholds)
    acc = (err[None, :] <= ts[:, None]).mean(axis=1)
    return float(np.sum((acc[1:] + acc[:-1]) * 0.5 * np.diff(ts)))


def gaussian_heatmap(center, dims: tuple[int, int], sigma: float = 6.0, peak: float = 10.0) -> np.ndarray:
    """peak * exp(-|p - center|^2 / (2 sigma^2)) on an (H, W) grid; center is (row, col)."""
    hh, ww = dims
    yy, xx = np.mgrid[0:hh, 0:ww].astype(np.float64)
    d2 = (yy - center[0]) ** 2 + (xx - center[1]) ** 2
    return (peak * np.exp(-d2 / (2 * sigma**2))).astype(np.float32)
