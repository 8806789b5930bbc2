"""Closed-form and introspected parameter / MAC counts for upsampling layers."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .decoders import SkipProjection, Upsampler, UpsamplerKind, UpsamplerSpec

K = UpsamplerKind


@dataclass(frozen=True)
class CostInputs:
    """W, H: feature width/height; w, h: kernel width/height; I, O: channels."""

    W: int
    H: int
    w: int
    h: int
    I: int
    O: int

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")

    @classmethod
    def of(cls, spec: UpsamplerSpec, height: int, width: int) -> "CostInputs":
        kh, kw = spec.kernel
        return cls(W=width, H=height, w=kw, h=kh, I=spec.in_channels, O=spec.out_channels)


def table1_params(kind: UpsamplerKind | str, c: CostInputs) -> int:
    kind = UpsamplerKind(kind)
    w, h, i, o = c.w, c.h, c.I, c.O
    if kind is K.TRANSPOSED or kind is K.INTERP_CONV or kind is K.BILINEAR_ADDITIVE:
        return w * h * i * o
    if kind is K.DECOMPOSED_TRANSPOSED:
        return (w + h) * i * o
    if kind is K.DEPTH_TO_SPACE:
        return w * h * i * (4 * o)
    return w * h * i + i * o


def table1_macs(kind: UpsamplerKind | str, c: CostInputs) -> int:
    kind = UpsamplerKind(kind)
    w, h, W, H, i, o = c.w, c.h, c.W, c.H, c.I, c.O
    if kind is K.TRANSPOSED:
        return w * h * W * H * i * o
    if kind is K.DECOMPOSED_TRANSPOSED:
        return (w + h) * W * H * i * o
    if kind is K.DEPTH_TO_SPACE:
        return w * h * W * H * i * (4 * o)
    if kind is K.INTERP_CONV:
        return w * h * (2 * W) * (2 * H) * i * o
    if kind is K.INTERP_SEPARABLE:
        return (2 * W) * (2 * H) * i * (w * h + o)
    if i % 4:
        raise ValueError(f"bilinear additive upsampling needs I divisible by 4, got {i}")
    return w * h * (2 * W) * (2 * H) * (i // 4) * o


def expected_actual_params(spec: UpsamplerSpec) -> int:
    """Kernel values our layer owns (bias excluded), from its channel schedule."""
    h, w = spec.kernel
    i, o = spec.in_channels, spec.out_channels
    kind = spec.kind
    if kind is K.DECOMPOSED_TRANSPOSED:
        return h * i * o + w * o * o
    if kind is K.BILINEAR_ADDITIVE:
        return w * h * (i // spec.group) * o
    return table1_params(kind, CostInputs(1, 1, w, h, i, o))


def expected_actual_macs(spec: UpsamplerSpec, height: int, width: int) -> int:
    """Kernel MACs our layer executes per sample, zero-interleaved positions skipped."""
    h, w = spec.kernel
    i, o = spec.in_channels, spec.out_channels
    if spec.kind is K.DECOMPOSED_TRANSPOSED:
        # the horizontal pass already runs on 2H rows
        return height * width * o * (h * i + 2 * w * o)
    if spec.kind is K.BILINEAR_ADDITIVE:
        return w * h * (2 * width) * (2 * height) * (i // spec.group) * o
    return table1_macs(spec.kind, CostInputs(width, height, w, h, i, o))


@dataclass
class LayerCost:
    layer: str
    kind: str
    formula_params: int | None
    actual_params: int
    bias_params: int
    formula_macs: int | None
    actual_macs: int

    @property
    def diverges(self) -> bool:
        """True when the closed-form row disagrees with what the layer owns or runs."""
        if self.formula_params is None:
            return False
        return self.formula_params != self.actual_params or self.formula_macs != self.actual_macs


@dataclass
class CostReport:
    layers: list[LayerCost] = field(default_factory=list)

    @property
    def actual_params(self) -> int:
        return sum(l.actual_params for l in self.layers)

    @property
    def bias_params(self) -> int:
        return sum(l.bias_params for l in self.layers)

    @property
    def actual_macs(self) -> int:
        return sum(l.actual_macs for l in self.layers)

    @property
    def formula_params(self) -> int:
        return sum(l.formula_params or 0 for l in self.layers)

    @property
    def formula_macs(self) -> int:
        return sum(l.formula_macs or 0 for l in self.layers)

    @property
    def total_params(self) -> int:
        return self.actual_params + self.bias_params

    def totals(self) -> dict[str, int]:
        return {
            "formula_params": self.formula_params,
            "actual_params": self.actual_params,
            "bias_params": self.bias_params,
            "formula_macs": self.formula_macs,
            "actual_macs": self.actual_macs,
        }

    def layer(self, name: str) -> LayerCost:
        for entry in self.layers:
            if entry.layer == name:
                return entry
        raise KeyError(name)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["layer", "kind", "formula_params", "actual_params", "formula_macs", "actual_macs"])
        for e in self.layers:
            writer.writerow([e.layer, e.kind, _blank(e.formula_params), e.actual_params,
                             _blank(e.formula_macs), e.actual_macs])
        t = self.totals()
        writer.writerow(["total", "", t["formula_params"], t["actual_params"], t["formula_macs"], t["actual_macs"]])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "layers": [dict(asdict(e), diverges=e.diverges) for e in self.layers],
            "totals": self.totals(),
        }
        return json.dumps(payload, indent=2)


def _blank(v):
    return "" if v is None else v


def introspect_costs(model, input_shape: tuple[int, int, int, int]) -> CostReport:
    """Count parameters by enumeration and MACs by running a forward pass.

    ``model`` is an :class:`~decoderlab.decoders.Upsampler` or a
    :class:`~decoderlab.decoders.Network`; the forward runs on zeros of
    ``input_shape`` with the batch forced to 1 so counts are per sample.
    """
    shape = (1, *input_shape[1:])
    x = T.Tensor(np.zeros(shape, dtype=np.float32))
    with T.MacCounter() as counter:
        if isinstance(model, Upsampler):
            with T.mac_scope("upsampler", shape):
                model(x)
        else:
            model(x)

    report = CostReport()
    for name, layer in model.named_layers():
        bias = sum(p.size for pname, p in layer.named_parameters() if pname == "bias")
        weights = sum(p.size for pname, p in layer.named_parameters() if pname != "bias")
        macs = counter.totals.get(name, 0)
        if isinstance(layer, Upsampler):
            _, _, hh, ww = counter.shapes[name]
            c = CostInputs.of(layer.spec, hh, ww)
            kind = layer.spec.kind.value
            fp, fm = table1_params(layer.spec.kind, c), table1_macs(layer.spec.kind, c)
        else:
            kind = "skip_projection" if isinstance(layer, SkipProjection) else "conv"
            fp = fm = None
        report.layers.append(LayerCost(name, kind, fp, weights, bias, fm, macs))
    return report
