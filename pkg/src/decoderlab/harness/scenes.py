"""Deterministic synthetic scenes standing in for real datasets.

Each scene is a function of (kind, seed, dims, options) only. Batches are
seeded by (seed, stream, index, sample) so a prefetching producer yields
exactly what a synchronous loop would.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .. import tensor as T
from ..metrics import gaussian_heatmap
from ..tensor import Tensor

SCENE_KINDS = ("texture", "depth_ramp", "shapes", "keypoint")
TRAIN_STREAM, VAL_STREAM = 0, 1


@dataclass(frozen=True)
class SyntheticScene:
    kind: str
    seed: int
    dims: tuple[int, int] = (32, 32)
    scale: int = 4
    classes: int = 4
    keypoints: int = 2
    sigma: float = 6.0
    max_slope: float = 0.008

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; choose from {SCENE_KINDS}")


class Sample(NamedTuple):
    input: Tensor
    target: Tensor
    aux: dict


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def band_limited_noise(rng: np.random.Generator, dims: tuple[int, int], cutoff: float) -> np.ndarray:
    """White noise low-passed by a Gaussian of std ``cutoff`` cycles/pixel, scaled to [-1, 1]."""
    h, w = dims
    noise = rng.standard_normal((h, w))
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    filt = np.exp(-(fx**2 + fy**2) / (2 * cutoff**2))
    img = np.real(np.fft.ifft2(np.fft.fft2(noise) * filt))
    lo, hi = img.min(), img.max()
    return (2 * (img - lo) / (hi - lo) - 1).astype(np.float32)


def block_mean(img: np.ndarray, factor: int) -> np.ndarray:
    h, w = img.shape[-2:]
    if h % factor or w % factor:
        raise ValueError(f"{h}x{w} is not divisible by {factor}")
    return img.reshape(*img.shape[:-2], h // factor, factor, w // factor, factor).mean(axis=(-3, -1))


def _texture(spec: SyntheticScene, rng) -> Sample:
    h, w = spec.dims
    target = band_limited_noise(rng, spec.dims, rng.uniform(0.05, 0.12))[None, None]
    low = block_mean(target, spec.scale).astype(np.float32)
    with T.no_tape():
        up = T.resize(Tensor(low), h, w, "bicubic").data
    return Sample(Tensor(low), Tensor(target), {"upsampled": up})


def _plane(rng, dims, base: float, max_slope: float) -> np.ndarray:
    h, w = dims
    gy, gx = rng.uniform(-max_slope, max_slope, size=2)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return base + gx * (xx - w / 2) + gy * (yy - h / 2)


def _depth_ramp(spec: SyntheticScene, rng) -> Sample:
    """Piecewise-planar depth: a background plane and nearer rectangular occluders.

    Columns 0..3 always show the background, so every row holds at least one
    smooth monotone triplet. A few 2x2 sensor dropouts read 0 in the target.
    """
    h, w = spec.dims
    depth = _plane(rng, spec.dims, rng.uniform(2.0, 3.5), spec.max_slope)
    albedo = np.full((h, w), rng.uniform(0.2, 1.0))
    for _ in range(rng.integers(1, 4)):
        rh, rw = rng.integers(h // 5, h // 2 + 1), rng.integers(w // 5, w // 2 + 1)
        r0, c0 = rng.integers(0, h - rh + 1), rng.integers(4, w - rw + 1)
        occ = _plane(rng, spec.dims, rng.uniform(0.8, 1.8), spec.max_slope)
        depth[r0 : r0 + rh, c0 : c0 + rw] = occ[r0 : r0 + rh, c0 : c0 + rw]
        albedo[r0 : r0 + rh, c0 : c0 + rw] = rng.uniform(0.2, 1.0)
    texture = albedo + 0.05 * rng.standard_normal((h, w))
    image = np.stack([1.0 / depth, texture]).astype(np.float32)[None]
    target = depth.copy()
    for _ in range(rng.integers(0, 3)):
        r, c = rng.integers(0, h - 1), rng.integers(4, w - 1)
        target[r : r + 2, c : c + 2] = 0.0
    return Sample(Tensor(image), Tensor(target[None, None].astype(np.float32)), {"mask": target[None, None] > 0.3})


_PALETTE = np.array([[0.1, 0.1, 0.1], [0.9, 0.2, 0.2], [0.2, 0.8, 0.3], [0.2, 0.3, 0.9],
                     [0.9, 0.9, 0.2], [0.8, 0.3, 0.8], [0.3, 0.9, 0.9], [0.6, 0.6, 0.6]])


def _shapes(spec: SyntheticScene, rng) -> Sample:
    h, w = spec.dims
    if not 2 <= spec.classes <= len(_PALETTE):
        raise ValueError(f"classes must be in [2, {len(_PALETTE)}]")
    labels = np.zeros((h, w), dtype=np.int64)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(2, 5)):
        cls = rng.integers(1, spec.classes)
        if rng.random() < 0.5:
            rh, rw = rng.integers(h // 6, h // 2 + 1), rng.integers(w // 6, w // 2 + 1)
            r0, c0 = rng.integers(0, h - rh + 1), rng.integers(0, w - rw + 1)
            labels[r0 : r0 + rh, c0 : c0 + rw] = cls
        else:
            r = rng.uniform(min(h, w) / 8, min(h, w) / 4)
            cy, cx = rng.uniform(0, h), rng.uniform(0, w)
            labels[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = cls
    colours = _PALETTE[: spec.classes].T[:, labels]
    image = colours + 0.15 * rng.standard_normal((3, h, w))
    return Sample(Tensor(image[None].astype(np.float32)), Tensor(labels[None, None].astype(np.float32)),
                  {"labels": labels[None]})


def _keypoint(spec: SyntheticScene, rng) -> Sample:
    h, w = spec.dims
    margin = 3
    centres = np.stack([rng.integers(margin, h - margin, spec.keypoints),
                        rng.integers(margin, w - margin, spec.keypoints)], axis=1).astype(np.float64)
    image = 0.2 * band_limited_noise(rng, spec.dims, 0.2)[None].repeat(3, axis=0)
    yy, xx = np.mgrid[0:h, 0:w]
    for k, (cy, cx) in enumerate(centres):
        blob = (yy - cy) ** 2 + (xx - cx) ** 2 <= 2.5**2
        image[:, blob] = _PALETTE[1 + k % (len(_PALETTE) - 1)][:, None]
    heat = np.stack([gaussian_heatmap(c, spec.dims, spec.sigma) for c in centres])
    return Sample(Tensor(image[None].astype(np.float32)), Tensor(heat[None]), {"keypoints": centres[None]})


_GENERATORS = {"texture": _texture, "depth_ramp": _depth_ramp, "shapes": _shapes, "keypoint": _keypoint}


def generate_scene(spec: SyntheticScene) -> Sample:
    return _GENERATORS[spec.kind](spec, _rng(spec.seed))


def generate_batch(template: SyntheticScene, stream: int, index: int, batch: int) -> Sample:
    """Stack ``batch`` scenes seeded by (template.seed, stream, index, b)."""
    samples = []
    for b in range(batch):
        rng = _rng([template.seed, stream, index, b])
        samples.append(_GENERATORS[template.kind](template, rng))
    inputs = np.concatenate([s.input.data for s in samples])
    targets = np.concatenate([s.target.data for s in samples])
    aux = {k: np.concatenate([s.aux[k] for s in samples]) for k in samples[0].aux}
    return Sample(Tensor(inputs), Tensor(targets), aux)
