"""Per-task wiring: scenes, network shape, loss, predictions and metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import losses as L
from .. import metrics as M
from ..artifacts import artifact_rate
from ..decoders import NetworkTopology, make_topology
from ..tensor import Tensor
from .config import NetworkConfig
from .scenes import Sample, SyntheticScene


@dataclass(frozen=True)
class TaskDefaults:
    scene: str
    in_channels: int
    loss: str
    optimizer: str
    lr: float


# Full-scale settings for reference (not run here):
#   segmentation: SGD m=0.9, lr 0.007, poly 0.9, 30k iters, wd 1e-4, 513x513
#   depth: SGD m=0.9, lr 0.001, 640k iters, wd 5e-4, berHu
#   superres: RMSProp m=0.9 decay 0.95, lr 0.001, 30k iters, wd 5e-4, 16->128
#   heatmap: MSE on sigma-6 peak-10 Gaussians
DEFAULTS = {
    "superres": TaskDefaults("texture", 1, "residual_l2", "rmsprop", 3e-4),
    "depth": TaskDefaults("depth_ramp", 2, "berhu", "adam", 3e-3),
    "segmentation": TaskDefaults("shapes", 3, "softmax_ce", "sgd", 0.05),
    "heatmap": TaskDefaults("keypoint", 3, "mse", "rmsprop", 1e-3),
}


def defaults(cfg: NetworkConfig) -> TaskDefaults:
    return DEFAULTS[cfg.run.task]


def head_channels(cfg: NetworkConfig) -> int:
    task = cfg.run.task
    if task == "segmentation":
        return cfg.data.classes
    if task == "heatmap":
        return cfg.data.keypoints
    return 1


def build_topology(cfg: NetworkConfig) -> NetworkTopology:
    net = cfg.network
    superres = cfg.run.task == "superres"
    if superres and net.skip:
        raise ValueError("super-resolution has no encoder, so skip connections are not available")
    return make_topology(
        defaults(cfg).in_channels,
        tuple(net.widths),
        net.upsampler,
        head=head_channels(cfg),
        encoder_stages=0 if superres else None,
        residual=net.residual,
        skip=net.skip,
        kernel=net.kernel,
        interp_mode=net.interp,
        intermediate_conv=net.intermediate_conv,
        bias=net.bias,
    )


def scene_template(cfg: NetworkConfig) -> SyntheticScene:
    d = cfg.data
    return SyntheticScene(
        defaults(cfg).scene, cfg.run.seed, (d.size, d.size),
        scale=2 ** (len(cfg.network.widths) - 1), classes=d.classes, keypoints=d.keypoints, sigma=d.sigma,
    )


def loss_name(cfg: NetworkConfig) -> str:
    return cfg.loss.name or defaults(cfg).loss


def compute_loss(cfg: NetworkConfig, out: Tensor, batch: Sample) -> Tensor:
    name = loss_name(cfg)
    target = batch.target.data
    if name == "residual_l2":
        return L.l2_residual_loss(out, target, batch.aux["upsampled"])
    if name == "berhu":
        db = L.DepthBatch(out, target)
        return L.berhu_loss(db, L.berhu_threshold(db), continuous=cfg.loss.berhu_continuous)
    if name == "softmax_ce":
        return L.softmax_ce_loss(out, target[:, 0])
    if name == "sigmoid_ce":
        return L.sigmoid_ce_loss(out, target)
    if name == "mse":
        return L.mse_loss(out, target)
    if name == "l1":
        return L.l1_loss(out, target)
    raise ValueError(f"unknown loss {name!r}")


def prediction(cfg: NetworkConfig, out: np.ndarray, batch: Sample) -> np.ndarray:
    """Network output mapped into the space the metrics read (still NCHW)."""
    if cfg.run.task == "superres" and loss_name(cfg) == "residual_l2":
        return out + batch.aux["upsampled"]
    return out


def evaluate_arrays(task: str, pred: np.ndarray, target: np.ndarray, *, num_classes: int | None = None,
                    head_length: float = 8.0) -> dict:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if task == "superres":
        p01, t01 = (np.clip(pred, -1, 1) + 1) / 2, (target + 1) / 2
        return {"psnr": M.psnr(p01, t01, 1.0), "ssim": M.ssim(p01, t01, 1.0)}
    if task == "depth":
        rep = artifact_rate(target, pred)
        return {**M.depth_metrics(pred, target).as_dict(),
                "artifacts_x": rep.x_percent, "artifacts_y": rep.y_percent}
    if task == "segmentation":
        labels = pred.argmax(axis=1) if pred.shape[1] > 1 else np.rint(pred[:, 0])
        gt = np.rint(target[:, 0])
        k = num_classes or int(max(pred.shape[1], gt.max() + 1, labels.max() + 1))
        return {"miou": M.miou(labels, gt, k), "pixel_accuracy": float(np.mean(labels == gt))}
    if task == "heatmap":
        return {"pckh": M.pckh(M.heatmap_peaks(pred), M.heatmap_peaks(target), head_length),
                "mse": float(np.mean((pred - target) ** 2))}
    if task == "color":
        return {"auc": M.color_auc(pred, target), "rmse": float(np.mean(M.chroma_rmse(pred, target)))}
    raise ValueError(f"unknown task {task!r}")


def input_shape(cfg: NetworkConfig) -> tuple[int, int, int, int]:
    """Per-sample network input shape; super-resolution reads the downsized image."""
    size = cfg.data.size
    if cfg.run.task == "superres":
        size //= 2 ** (len(cfg.network.widths) - 1)
    return (1, defaults(cfg).in_channels, size, size)
