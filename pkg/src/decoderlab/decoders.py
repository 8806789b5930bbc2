"""Upsampling layers, decoder connections and the encoder-decoder builder.

Every upsampler maps (N, I, H, W) to (N, O, 2H, 2W). Parameters live in a
plain ``dict[str, Tensor]`` whose insertion order is the enumeration order
used for counting, optimisation and checkpoints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor

LayerParams = dict[str, Tensor]


class UpsamplerKind(str, enum.Enum):
    TRANSPOSED = "transposed"
    DECOMPOSED_TRANSPOSED = "decomposed_transposed"
    DEPTH_TO_SPACE = "depth_to_space"
    INTERP_CONV = "interp_conv"
    INTERP_SEPARABLE = "interp_separable"
    BILINEAR_ADDITIVE = "bilinear_additive"

    def __str__(self) -> str:
        return self.value


ALL_KINDS = tuple(UpsamplerKind)
INTERP_KINDS = (UpsamplerKind.INTERP_CONV, UpsamplerKind.INTERP_SEPARABLE, UpsamplerKind.BILINEAR_ADDITIVE)
TRANSPOSED_KINDS = (UpsamplerKind.TRANSPOSED, UpsamplerKind.DECOMPOSED_TRANSPOSED, UpsamplerKind.DEPTH_TO_SPACE)


@dataclass(frozen=True)
class UpsamplerSpec:
    kind: UpsamplerKind
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    interp_mode: str = "bilinear"
    residual: bool = False
    group: int = 4
    reduce: str = "mean"
    bias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", UpsamplerKind(self.kind))
        object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        if self.in_channels < 1 or self.out_channels < 1 or min(self.kernel) < 1:
            raise ValueError(f"channels and kernel dims must be positive: {self}")
        if self.residual and self.in_channels % self.out_channels:
            raise ValueError(
                f"residual connection needs in_channels ({self.in_channels}) divisible by "
                f"out_channels ({self.out_channels})"
            )
        if self.kind is UpsamplerKind.BILINEAR_ADDITIVE and self.in_channels % self.group:
            raise ValueError(f"bilinear additive upsampling needs in_channels divisible by {self.group}")
        if self.interp_mode not in ("nearest", "bilinear", "bicubic"):
            raise ValueError(f"unknown interpolation mode {self.interp_mode!r}")


# ---------------------------------------------------------------------------
# initialisation


def truncated_normal(rng: np.random.Generator, shape: tuple[int, ...], std: float) -> np.ndarray:
    """Normal samples redrawn until they fall within two standard deviations."""
    z = rng.standard_normal(shape)
    bad = np.abs(z) > 2
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > 2
    return (z * std).astype(np.float32)


def init_kernel(rng: np.random.Generator, shape: tuple[int, int, int, int], name: str = "kernel") -> Tensor:
    fan_in = shape[1] * shape[2] * shape[3]
    return Tensor(truncated_normal(rng, shape, np.sqrt(2.0 / fan_in)), requires_grad=True, name=name)


def zero_bias(n: int, name: str = "bias") -> Tensor:
    return Tensor(np.zeros(n, dtype=np.float32), requires_grad=True, name=name)


def param_shapes(spec: UpsamplerSpec) -> dict[str, tuple[int, ...]]:
    i, o = spec.in_channels, spec.out_channels
    h, w = spec.kernel
    kind = spec.kind
    if kind is UpsamplerKind.DECOMPOSED_TRANSPOSED:
        shapes = {"vertical": (o, i, h, 1), "horizontal": (o, o, 1, w)}
        bias = o
    elif kind is UpsamplerKind.DEPTH_TO_SPACE:
        shapes = {"kernel": (4 * o, i, h, w)}
        bias = 4 * o
    elif kind is UpsamplerKind.INTERP_SEPARABLE:
        shapes = {"depthwise": (i, 1, h, w), "pointwise": (o, i, 1, 1)}
        bias = o
    elif kind is UpsamplerKind.BILINEAR_ADDITIVE:
        shapes = {"kernel": (o, i // spec.group, h, w)}
        bias = o
    else:
        shapes = {"kernel": (o, i, h, w)}
        bias = o
    if spec.bias:
        shapes["bias"] = (bias,)
    return shapes


def init_params(spec: UpsamplerSpec, rng: np.random.Generator) -> LayerParams:
    params: LayerParams = {}
    for name, shape in param_shapes(spec).items():
        params[name] = zero_bias(shape[0], name) if name == "bias" else init_kernel(rng, shape, name)
    return params


def zero_params(spec: UpsamplerSpec) -> LayerParams:
    return {
        name: Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True, name=name)
        for name, shape in param_shapes(spec).items()
    }


# ---------------------------------------------------------------------------
# the six upsamplers


def _check_in(x: Tensor, k: Tensor, axis: int = 1) -> None:
    T.check_dims(x, "input")
    if x.shape[1] != k.shape[axis]:
        raise ValueError(f"layer expects {k.shape[axis]} input channels, input has {x.shape[1]}")


def upsample_transposed(x: Tensor, params: LayerParams) -> Tensor:
    """Zero-interleave to 2H x 2W, then a same-padded stride-1 convolution."""
    k = params["kernel"]
    _check_in(x, k)
    return T.conv2d(T.zero_interleave(x, 2), k, params.get("bias"), stride=1, padding="same")


def upsample_decomposed_transposed(x: Tensor, params: LayerParams) -> Tensor:
    """Vertical 1-D transposed convolution (I->O) followed by a horizontal one (O->O)."""
    v, hz = params["vertical"], params["horizontal"]
    _check_in(x, v)
    rows = T.conv1d_rows(T.zero_interleave(x, 2, axes="rows"), v)
    return T.conv1d_cols(T.zero_interleave(rows, 2, axes="cols"), hz, params.get("bias"))


def upsample_depth_to_space(x: Tensor, params: LayerParams) -> Tensor:
    k = params["kernel"]
    _check_in(x, k)
    if k.shape[0] % 4:
        raise ValueError(f"depth-to-space needs conv output channels divisible by 4, got {k.shape[0]}")
    return T.depth_to_space(T.conv2d(x, k, params.get("bias"), padding="same"), 2)


def upsample_interp_conv(x: Tensor, params: LayerParams, mode: str = "bilinear") -> Tensor:
    k = params["kernel"]
    _check_in(x, k)
    return T.conv2d(T.upsample2x(x, mode), k, params.get("bias"), padding="same")


def upsample_interp_separable(x: Tensor, params: LayerParams, mode: str = "bilinear") -> Tensor:
    dw, pw = params["depthwise"], params["pointwise"]
    _check_in(x, dw, axis=0)
    up = T.upsample2x(x, mode)
    return T.pointwise_conv(T.depthwise_conv2d(up, dw, padding="same"), pw, params.get("bias"))


def bilinear_additive(x: Tensor, group: int = 4, reduce: str = "mean") -> Tensor:
    """The parameter-free part: bilinear 2x, then combine each ``group`` consecutive channels."""
    T.check_dims(x, "input")
    if x.shape[1] % group:
        raise ValueError(f"{x.shape[1]} input channels not divisible by {group}")
    return T.group_reduce_channels(T.upsample2x(x, "bilinear"), group, reduce)


def upsample_bilinear_additive(x: Tensor, params: LayerParams, group: int = 4, reduce: str = "mean") -> Tensor:
    k = params["kernel"]
    T.check_dims(x, "input")
    if x.shape[1] % group:
        raise ValueError(f"{x.shape[1]} input channels not divisible by {group}")
    if k.shape[1] * group != x.shape[1]:
        raise ValueError(f"kernel expects {k.shape[1] * group} input channels, input has {x.shape[1]}")
    return T.conv2d(bilinear_additive(x, group, reduce), k, params.get("bias"), padding="same")


def residual_identity(x: Tensor, out_channels: int) -> Tensor:
    """Parameter-free shortcut: bilinear 2x then average groups of I/O channels."""
    c = T.check_dims(x, "input")[1]
    if out_channels < 1 or c % out_channels:
        raise ValueError(f"residual identity needs {c} channels divisible by {out_channels}")
    return bilinear_additive(x, c // out_channels, "mean")


def residual_wrap(upsampler: Callable[[Tensor], Tensor], x: Tensor) -> Tensor:
    y = upsampler(x)
    return T.add(y, residual_identity(x, y.shape[1]))


def apply_upsampler(spec: UpsamplerSpec, params: LayerParams, x: Tensor) -> Tensor:
    """Run the layer described by ``spec``, without its residual branch."""
    kind = spec.kind
    if kind is UpsamplerKind.TRANSPOSED:
        return upsample_transposed(x, params)
    if kind is UpsamplerKind.DECOMPOSED_TRANSPOSED:
        return upsample_decomposed_transposed(x, params)
    if kind is UpsamplerKind.DEPTH_TO_SPACE:
        return upsample_depth_to_space(x, params)
    if kind is UpsamplerKind.INTERP_CONV:
        return upsample_interp_conv(x, params, spec.interp_mode)
    if kind is UpsamplerKind.INTERP_SEPARABLE:
        return upsample_interp_separable(x, params, spec.interp_mode)
    return upsample_bilinear_additive(x, params, spec.group, spec.reduce)


class Upsampler:
    """An :class:`UpsamplerSpec` bound to its parameters."""

    def __init__(self, spec: UpsamplerSpec, params: LayerParams | None = None, rng: np.random.Generator | None = None):
        self.spec = spec
        if params is None:
            params = init_params(spec, rng if rng is not None else np.random.default_rng(0))
        expected = param_shapes(spec)
        got = {k: v.shape for k, v in params.items() if v is not None}
        if got != expected:
            raise ValueError(f"parameter shapes {got} do not match {expected}")
        self.params = params

    def plain(self, x: Tensor) -> Tensor:
        return apply_upsampler(self.spec, self.params, x)

    def __call__(self, x: Tensor) -> Tensor:
        if self.spec.residual:
            return residual_wrap(self.plain, x)
        return self.plain(x)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())

    def named_layers(self) -> list[tuple[str, "Upsampler"]]:
        return [("upsampler", self)]

    def __repr__(self) -> str:
        s = self.spec
        return f"Upsampler({s.kind.value}, {s.in_channels}->{s.out_channels}, residual={s.residual})"


# ---------------------------------------------------------------------------
# plain convolution layers and skip connections


class ConvLayer:
    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1,
                 rng: np.random.Generator | None = None, bias: bool = True):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride = stride
        self.params: LayerParams = {"kernel": init_kernel(rng, (out_channels, in_channels, kernel, kernel))}
        if bias:
            self.params["bias"] = zero_bias(out_channels)

    @property
    def in_channels(self) -> int:
        return self.params["kernel"].shape[1]

    @property
    def out_channels(self) -> int:
        return self.params["kernel"].shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.params["kernel"], self.params.get("bias"), stride=self.stride, padding="same")

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.params.items())


def skip_connect(encoder_feat: Tensor, decoder_feat: Tensor, params: LayerParams) -> Tensor:
    """Project encoder features with a convolution and append them to the decoder features."""
    ne, _, he, we = T.check_dims(encoder_feat, "encoder features")
    nd, _, hd, wd = T.check_dims(decoder_feat, "decoder features")
    if (ne, he, we) != (nd, hd, wd):
        raise ValueError(f"skip connection resolution mismatch: encoder {encoder_feat.shape}, decoder {decoder_feat.shape}")
    projected = T.conv2d(encoder_feat, params["kernel"], params.get("bias"), padding="same")
    return T.concat_channels(decoder_feat, projected)


class SkipProjection(ConvLayer):
    def connect(self, encoder_feat: Tensor, decoder_feat: Tensor) -> Tensor:
        return skip_connect(encoder_feat, decoder_feat, self.params)


# ---------------------------------------------------------------------------
# network


@dataclass(frozen=True)
class EncoderStage:
    out_channels: int
    kernel: int = 3


@dataclass(frozen=True)
class DecoderStage:
    upsampler: UpsamplerSpec
    intermediate_conv: bool = True


@dataclass(frozen=True)
class NetworkTopology:
    """Stem conv, stride-2 encoder stages, upsampling decoder stages, head conv.

    ``stem_channels == 0`` drops the stem and ``head == 0`` drops the head.
    """

    in_channels: int
    stem_channels: int
    encoder: tuple[EncoderStage, ...] = ()
    decoder: tuple[DecoderStage, ...] = ()
    skip_connections: bool = False
    head: int = 1
    head_kernel: int = 3
    skip_kernel: int = 3

    def __post_init__(self):
        object.__setattr__(self, "encoder", tuple(self.encoder))
        object.__setattr__(self, "decoder", tuple(self.decoder))
        if self.skip_connections:
            if len(self.decoder) != len(self.encoder):
                raise ValueError(
                    f"skip connections need as many decoder stages ({len(self.decoder)}) "
                    f"as encoder stages ({len(self.encoder)})"
                )
            if self.stem_channels < 1:
                raise ValueError("skip connections need a stem to pair with the last decoder stage")
        c = self.stem_channels or self.in_channels
        for stage in self.encoder:
            c = stage.out_channels
        for j, stage in enumerate(self.decoder):
            if stage.upsampler.in_channels != c:
                raise ValueError(f"decoder stage {j} expects {stage.upsampler.in_channels} channels, gets {c}")
            c = stage.upsampler.out_channels

    @property
    def scale(self) -> int:
        """Output resolution divided by input resolution."""
        return 2 ** (len(self.decoder) - len(self.encoder)) if len(self.decoder) >= len(self.encoder) else 0


def make_topology(
    in_channels: int,
    widths: tuple[int, ...],
    kind: UpsamplerKind | str,
    *,
    head: int,
    encoder_stages: int | None = None,
    residual: bool = False,
    skip: bool = False,
    kernel: int = 3,
    interp_mode: str = "bilinear",
    intermediate_conv: bool = True,
    bias: bool = True,
) -> NetworkTopology:
    """Symmetric network: ``widths[0]`` at full resolution, ``widths[k]`` after k downsamplings.

    With ``encoder_stages=0`` the network only upsamples (super-resolution):
    a stem maps the input to ``widths[-1]`` and the decoder walks the widths
    back down, one 2x step per entry.
    """
    n = len(widths) - 1
    enc = n if encoder_stages is None else encoder_stages
    if enc not in (0, n):
        raise ValueError("encoder_stages must be 0 or len(widths) - 1")
    encoder = tuple(EncoderStage(widths[k]) for k in range(1, n + 1)) if enc else ()
    stem = widths[0] if enc else widths[-1]
    decoder = tuple(
        DecoderStage(
            UpsamplerSpec(UpsamplerKind(kind), widths[k], widths[k - 1], (kernel, kernel), interp_mode,
                          residual=residual, bias=bias),
            intermediate_conv,
        )
        for k in range(n, 0, -1)
    )
    return NetworkTopology(in_channels, stem, encoder, decoder, skip, head)


class Network:
    """Runnable encoder-decoder built from a :class:`NetworkTopology`."""

    def __init__(self, topology: NetworkTopology, seed: int = 0):
        self.topology = topology
        rng = np.random.default_rng(seed)
        self._layers: list[tuple[str, object]] = []
        c = topology.in_channels
        self.stem = None
        if topology.stem_channels:
            self.stem = self._add("stem", ConvLayer(c, topology.stem_channels, 3, 1, rng))
            c = topology.stem_channels
        self.encoder = []
        for k, stage in enumerate(topology.encoder):
            self.encoder.append(self._add(f"enc{k}", ConvLayer(c, stage.out_channels, stage.kernel, 2, rng)))
            c = stage.out_channels
        self.decoder = []
        for k, stage in enumerate(topology.decoder):
            up = self._add(f"dec{k}.up", Upsampler(stage.upsampler, rng=rng))
            c = stage.upsampler.out_channels
            skip = None
            if topology.skip_connections:
                skip = self._add(f"dec{k}.skip", SkipProjection(self._encoder_width(k), c, topology.skip_kernel, 1, rng))
            conv = None
            if stage.intermediate_conv:
                conv = self._add(f"dec{k}.conv", ConvLayer(2 * c if skip else c, c, 3, 1, rng))
            elif skip is not None:
                raise ValueError("skip connections need the intermediate conv to merge channels")
            self.decoder.append((up, skip, conv))
        self.head = None
        if topology.head:
            self.head = self._add("head", ConvLayer(c, topology.head, topology.head_kernel, 1, rng))

    def _add(self, name: str, layer):
        self._layers.append((name, layer))
        return layer

    def _encoder_width(self, k: int) -> int:
        enc = self.topology.encoder
        j = len(enc) - k - 2
        return enc[j].out_channels if j >= 0 else self.topology.stem_channels

    def named_layers(self) -> list[tuple[str, object]]:
        return list(self._layers)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{lname}.{pname}", p) for lname, layer in self._layers for pname, p in layer.named_parameters()]

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, x: Tensor) -> Tensor:
        T.check_dims(x, "network input")
        if x.shape[1] != self.topology.in_channels:
            raise ValueError(f"network expects {self.topology.in_channels} channels, got {x.shape[1]}")
        feats = []
        h = x
        if self.stem is not None:
            with T.mac_scope("stem", h.shape):
                h = T.relu(self.stem(h))
            feats.append(h)
        for k, layer in enumerate(self.encoder):
            with T.mac_scope(f"enc{k}", h.shape):
                h = T.relu(layer(h))
            feats.append(h)
        n_enc = len(self.encoder)
        for k, (up, skip, conv) in enumerate(self.decoder):
            with T.mac_scope(f"dec{k}.up", h.shape):
                h = T.relu(up(h))
            if skip is not None:
                enc_feat = feats[n_enc - k - 1]
                if enc_feat.shape[2:] != h.shape[2:]:
                    raise ValueError(
                        f"resolution mismatch at decoder stage {k}: encoder {enc_feat.shape[2:]} vs decoder {h.shape[2:]}"
                    )
                with T.mac_scope(f"dec{k}.skip", enc_feat.shape):
                    h = skip.connect(enc_feat, h)
            if conv is not None:
                with T.mac_scope(f"dec{k}.conv", h.shape):
                    h = T.relu(conv(h))
        if self.head is not None:
            with T.mac_scope("head", h.shape):
                h = self.head(h)
        return h


def build_network(topology: NetworkTopology, seed: int = 0) -> Network:
    return Network(topology, seed)


def with_residual(topology: NetworkTopology, residual: bool) -> NetworkTopology:
    stages = tuple(replace(s, upsampler=replace(s.upsampler, residual=residual)) for s in topology.decoder)
    return replace(topology, decoder=stages)


def iter_kernels(params: LayerParams) -> Iterator[tuple[str, Tensor]]:
    for name, p in params.items():
        if name != "bias":
            yield name, p
