"""Prediction-artifact measurements for depth maps and upsampling layers.

The monotonic-triplet rate looks at 3-pixel windows (stride 1) where the
ground truth is valid, changes by less than 1 cm between neighbours and is
monotone, and reports how often the prediction over the same window is not.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .decoders import Upsampler, UpsamplerKind, UpsamplerSpec, param_shapes
from .losses import MIN_VALID_DEPTH

MAX_STEP = 0.01


def _images(x) -> np.ndarray:
    """Normalise (H, W), (N, H, W) or (N, 1, H, W) to float64 (N, H, W)."""
    a = np.asarray(x.data if isinstance(x, T.Tensor) else x, dtype=np.float64)
    if a.ndim == 2:
        return a[None]
    if a.ndim == 3:
        return a
    if a.ndim == 4 and a.shape[1] == 1:
        return a[:, 0]
    raise ValueError(f"expected depth maps of shape (H, W), (N, H, W) or (N, 1, H, W); got {a.shape}")


def _windows(a: np.ndarray, axis: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if axis == "x":
        return a[..., :-2], a[..., 1:-1], a[..., 2:]
    if axis == "y":
        return a[:, :-2, :], a[:, 1:-1, :], a[:, 2:, :]
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def _monotone(a, b, c) -> np.ndarray:
    return ((a <= b) & (b <= c)) | ((a >= b) & (b >= c))


def triplet_non_monotonic(d1, d2, d3):
    """True where (d1, d2, d3) is neither non-decreasing nor non-increasing."""
    return ~_monotone(np.asarray(d1), np.asarray(d2), np.asarray(d3))


@dataclass
class TripletSet:
    axis: str
    starts: np.ndarray  # (k, 3): image, row, col of the first pixel
    gt: np.ndarray  # (k, 3)

    def __len__(self) -> int:
        return len(self.starts)

    def values(self, depth) -> np.ndarray:
        """Gather (k, 3) values of ``depth`` at this set's pixel positions."""
        d = _images(depth)
        n, r, c = self.starts.T
        step = (0, 1) if self.axis == "x" else (1, 0)
        return np.stack([d[n, r + i * step[0], c + i * step[1]] for i in range(3)], axis=1)


def _qualifying(g: np.ndarray, axis: str, min_depth: float, max_step: float) -> np.ndarray:
    if g.shape[2 if axis == "x" else 1] < 3:
        raise ValueError(f"depth maps need at least 3 pixels along {axis}, got shape {g.shape[1:]}")
    a, b, c = _windows(g, axis)
    valid = (a > min_depth) & (b > min_depth) & (c > min_depth)
    smooth = (np.abs(b - a) < max_step) & (np.abs(c - b) < max_step)
    return valid & smooth & _monotone(a, b, c)


def extract_triplets(gt, axis: str, min_depth: float = MIN_VALID_DEPTH, max_step: float = MAX_STEP) -> TripletSet:
    g = _images(gt)
    keep = _qualifying(g, axis, min_depth, max_step)
    starts = np.argwhere(keep)
    a, b, c = _windows(g, axis)
    vals = np.stack([a[keep], b[keep], c[keep]], axis=1)
    return TripletSet(axis, starts, vals)


@dataclass
class AxisStats:
    triplets: int
    non_monotonic: int

    @property
    def percent(self) -> float:
        return 100.0 * self.non_monotonic / self.triplets if self.triplets else 0.0


@dataclass
class ArtifactReport:
    x: AxisStats
    y: AxisStats
    per_image: list[dict] = field(default_factory=list)

    @property
    def x_percent(self) -> float:
        return self.x.percent

    @property
    def y_percent(self) -> float:
        return self.y.percent

    @property
    def mean_percent(self) -> float:
        return 0.5 * (self.x.percent + self.y.percent)

    def summary(self) -> dict:
        return {
            "triplets_x": self.x.triplets,
            "non_monotonic_x": self.x.non_monotonic,
            "artifacts_x_percent": self.x.percent,
            "triplets_y": self.y.triplets,
            "non_monotonic_y": self.y.non_monotonic,
            "artifacts_y_percent": self.y.percent,
        }

    def to_json(self) -> str:
        return json.dumps({**self.summary(), "per_image": self.per_image}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["image", "triplets_x", "non_monotonic_x", "artifacts_x_percent",
                "triplets_y", "non_monotonic_y", "artifacts_y_percent"]
        writer = csv.DictWriter(buf, cols, lineterminator="\n")
        writer.writeheader()
        for row in self.per_image:
            writer.writerow(row)
        writer.writerow({"image": "all", **self.summary()})
        return buf.getvalue()


def artifact_rate(gt, pred, min_depth: float = MIN_VALID_DEPTH, max_step: float = MAX_STEP,
                  names: list[str] | None = None) -> ArtifactReport:
    g, p = _images(gt), _images(pred)
    if g.shape != p.shape:
        raise ValueError(f"ground truth {g.shape} and prediction {p.shape} differ in shape")
    stats = {}
    per_axis = {}
    for axis in ("x", "y"):
        keep = _qualifying(g, axis, min_depth, max_step)
        bad = keep & triplet_non_monotonic(*_windows(p, axis))
        reduce = (1, 2)
        per_axis[axis] = (keep.sum(axis=reduce), bad.sum(axis=reduce))
        stats[axis] = AxisStats(int(keep.sum()), int(bad.sum()))
    report = ArtifactReport(stats["x"], stats["y"])
    for i in range(g.shape[0]):
        sx = AxisStats(int(per_axis["x"][0][i]), int(per_axis["x"][1][i]))
        sy = AxisStats(int(per_axis["y"][0][i]), int(per_axis["y"][1][i]))
        report.per_image.append({
            "image": names[i] if names else i,
            "triplets_x": sx.triplets, "non_monotonic_x": sx.non_monotonic, "artifacts_x_percent": sx.percent,
            "triplets_y": sy.triplets, "non_monotonic_y": sy.non_monotonic, "artifacts_y_percent": sy.percent,
        })
    return report


def dependency_map(kind: UpsamplerKind | str, kernel: tuple[int, int] = (3, 3),
                   out_dims: tuple[int, int] = (8, 8)) -> np.ndarray:
    """Number of kernel weights reaching each output pixel.

    Pushes an all-ones single-channel input through the layer with all-ones
    weights and zero bias; for the interpolating kinds the interpolated ones
    stay ones, so the count is the number of in-bounds taps.
    """
    try:
        kind = UpsamplerKind(kind)
    except ValueError:
        raise ValueError(f"unsupported upsampler kind {kind!r}") from None
    oh, ow = out_dims
    if oh % 2 or ow % 2 or oh < 2 or ow < 2:
        raise ValueError(f"output dims must be positive and even, got {out_dims}")
    in_ch = 4 if kind is UpsamplerKind.BILINEAR_ADDITIVE else 1
    spec = UpsamplerSpec(kind, in_ch, 1, tuple(kernel), bias=False)
    params = {name: T.Tensor(np.ones(shape)) for name, shape in param_shapes(spec).items()}
    x = T.Tensor(np.ones((1, in_ch, oh // 2, ow // 2)))
    with T.no_tape():
        out = Upsampler(spec, params)(x).data[0, 0]
    return np.rint(out).astype(np.int64)
