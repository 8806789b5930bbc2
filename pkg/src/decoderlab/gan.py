"""Toy-scale WGAN-GP: critics, generators, data and a training loop.

Critics expose ``input_gradient(x)``, which rebuilds grad_x D(x) out of
ordinary taped operations (ReLU masks held constant). Differentiating the
gradient penalty through that expression gives the penalty's parameter
gradient with first-order reverse mode only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .decoders import ConvLayer, Upsampler, UpsamplerKind, UpsamplerSpec, init_kernel, truncated_normal
from .losses import GanBatch, wgan_d_loss, wgan_g_loss
from .tensor import Tensor


def _flat(x: Tensor) -> Tensor:
    return x if x.ndim == 2 else T.reshape(x, (x.shape[0], -1))


class LinearCritic:
    """D(x) = <v, x> + b."""

    def __init__(self, v, b: float = 0.0, requires_grad: bool = True):
        v = np.asarray(v, dtype=np.float64 if np.asarray(v).dtype == np.float64 else np.float32)
        self.v = Tensor(v.reshape(1, -1), requires_grad=requires_grad, dtype=v.dtype)
        self.b = Tensor(np.array([b], dtype=v.dtype), requires_grad=requires_grad, dtype=v.dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(_flat(x), T.transpose2d(self.v)), self.b)

    def input_gradient(self, x: Tensor) -> Tensor:
        ones = Tensor(np.ones((x.shape[0], 1)), dtype=self.v.dtype)
        return T.matmul(ones, self.v)

    def parameters(self) -> list[Tensor]:
        return [self.v, self.b]


class Dense:
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        self.w = Tensor(truncated_normal(rng, (n_in, n_out), np.sqrt(2.0 / n_in)), requires_grad=True)
        self.b = Tensor(np.zeros(n_out, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.w), self.b)

    def parameters(self) -> list[Tensor]:
        return [self.w, self.b]


class MLPCritic:
    """ReLU perceptron with a scalar output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ValueError("need at least input and one hidden size")
        self.hidden = [Dense(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.out = Dense(sizes[-1], 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = _flat(x)
        for layer in self.hidden:
            h = T.relu(layer(h))
        return self.out(h)

    def input_gradient(self, x: Tensor) -> Tensor:
        h = _flat(x).data
        masks = []
        for layer in self.hidden:
            z = h @ layer.w.data + layer.b.data
            masks.append((z > 0).astype(z.dtype))
            h = np.maximum(z, 0)
        ones = Tensor(np.ones((x.shape[0], 1)), dtype=self.out.w.dtype)
        g = T.matmul(ones, T.transpose2d(self.out.w))
        for layer, mask in zip(reversed(self.hidden), reversed(masks)):
            g = T.matmul(T.mul(g, mask), T.transpose2d(layer.w))
        return g

    def parameters(self) -> list[Tensor]:
        return [p for layer in [*self.hidden, self.out] for p in layer.parameters()]


class PointGenerator:
    def __init__(self, latent: int, hidden: int, rng: np.random.Generator, out: int = 2):
        self.l1 = Dense(latent, hidden, rng)
        self.l2 = Dense(hidden, hidden, rng)
        self.l3 = Dense(hidden, out, rng)

    def __call__(self, z: Tensor) -> Tensor:
        return self.l3(T.relu(self.l2(T.relu(self.l1(z)))))

    def parameters(self) -> list[Tensor]:
        return self.l1.parameters() + self.l2.parameters() + self.l3.parameters()


class PatternGenerator:
    """Latent -> 2x2 map -> two upsampling layers -> 8x8 single-channel pattern."""

    def __init__(self, latent: int, kind: UpsamplerKind | str, rng: np.random.Generator,
                 channels: tuple[int, int, int] = (16, 8, 4), residual: bool = False):
        c0, c1, c2 = channels
        self.c0 = c0
        self.fc = Dense(latent, c0 * 4, rng)
        self.up1 = Upsampler(UpsamplerSpec(kind, c0, c1, residual=residual), rng=rng)
        self.up2 = Upsampler(UpsamplerSpec(kind, c1, c2, residual=residual), rng=rng)
        self.head = ConvLayer(c2, 1, 3, 1, rng)

    def __call__(self, z: Tensor) -> Tensor:
        h = T.reshape(T.relu(self.fc(z)), (z.shape[0], self.c0, 2, 2))
        h = T.relu(self.up1(h))
        h = T.relu(self.up2(h))
        return T.tanh(self.head(h))

    def parameters(self) -> list[Tensor]:
        ps = self.fc.parameters()
        for layer in (self.up1, self.up2, self.head):
            ps += [p for _, p in layer.named_parameters()]
        return ps


def ring_points(rng: np.random.Generator, n: int, modes: int = 8, radius: float = 2.0, std: float = 0.05) -> np.ndarray:
    k = rng.integers(0, modes, size=n)
    angle = 2 * np.pi * k / modes
    centres = radius * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return (centres + std * rng.standard_normal((n, 2))).astype(np.float32)


def grating_patterns(rng: np.random.Generator, n: int, size: int = 8) -> np.ndarray:
    """Oriented sinusoidal gratings in [-1, 1], shape (n, 1, size, size)."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.choice([0.0, np.pi / 4, np.pi / 2, 3 * np.pi / 4], size=n)
    phase = rng.uniform(0, 2 * np.pi, size=n)
    freq = 2 * np.pi / 4
    arg = freq * (np.cos(theta)[:, None, None] * xx + np.sin(theta)[:, None, None] * yy) + phase[:, None, None]
    return np.sin(arg)[:, None].astype(np.float32)


def sliced_wasserstein(a: np.ndarray, b: np.ndarray, projections: int = 64, seed: int = 0) -> float:
    """Mean 1-D Wasserstein-1 distance over random unit projections."""
    a = a.reshape(a.shape[0], -1).astype(np.float64)
    b = b.reshape(b.shape[0], -1).astype(np.float64)
    n = min(len(a), len(b))
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((a.shape[1], projections))
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    pa = np.sort((a[:n] @ dirs), axis=0)
    pb = np.sort((b[:n] @ dirs), axis=0)
    return float(np.abs(pa - pb).mean())


@dataclass
class GanConfig:
    data: str = "points"
    modes: int = 8
    kind: str = "bilinear_additive"
    residual: bool = False
    iterations: int = 300
    batch: int = 64
    latent: int = 8
    critic_steps: int = 5
    lam: float = 10.0
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    seed: int = 0


@dataclass
class GanResult:
    log: list[dict] = field(default_factory=list)
    distance: float = float("nan")
    samples: np.ndarray | None = None


def train_gan(cfg: GanConfig) -> GanResult:
    """Alternating critic/generator Adam updates on a toy distribution."""
    from .harness.optim import Adam

    rng = np.random.default_rng(cfg.seed)
    if cfg.data == "points":
        sample_real = lambda n: ring_points(rng, n, cfg.modes)
        gen = PointGenerator(cfg.latent, 64, rng)
        critic = MLPCritic([2, 64, 64], rng)
    elif cfg.data == "patterns":
        sample_real = lambda n: grating_patterns(rng, n)
        gen = PatternGenerator(cfg.latent, cfg.kind, rng, residual=cfg.residual)
        critic = MLPCritic([64, 64, 64], rng)
    else:
        raise ValueError(f"unknown GAN data {cfg.data!r}")

    g_opt = Adam(gen.parameters(), beta1=cfg.beta1, beta2=cfg.beta2)
    d_opt = Adam(critic.parameters(), beta1=cfg.beta1, beta2=cfg.beta2)
    result = GanResult()
    for it in range(cfg.iterations):
        for _ in range(cfg.critic_steps):
            z = Tensor(rng.standard_normal((cfg.batch, cfg.latent)))
            with T.no_tape():
                fake = gen(z).detach()
            batch = GanBatch(sample_real(cfg.batch), fake, GanBatch.sample_alpha(rng, cfg.batch), cfg.lam)
            with T.Tape() as tape:
                d_loss = wgan_d_loss(batch, critic)
            T.backward(tape, d_loss)
            d_opt.step(cfg.lr)
        z = Tensor(rng.standard_normal((cfg.batch, cfg.latent)))
        with T.Tape() as tape:
            fake = gen(z)
            batch = GanBatch(np.zeros(fake.shape, dtype=np.float32), fake, np.zeros(cfg.batch), 0.0)
            g_loss = wgan_g_loss(batch, critic)
        T.backward(tape, g_loss)
        g_opt.step(cfg.lr)
        if it % 25 == 0 or it == cfg.iterations - 1:
            result.log.append({"iteration": it, "d_loss": d_loss.item(), "g_loss": g_loss.item()})

    with T.no_tape():
        fake = gen(Tensor(rng.standard_normal((512, cfg.latent)))).data
    result.samples = fake
    result.distance = sliced_wasserstein(fake, sample_real(512))
    return result
