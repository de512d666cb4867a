"""Generator and discriminator networks on the numpy autodiff core.

Two shapes are provided: a small DCGAN-style pair for 28x28 images and an
MLP pair for tiny toy images. Weights use He-normal initialization, biases
start at zero.
"""
from __future__ import annotations

import math

import numpy as np

from ..grad import (
    Tensor,
    add_bias,
    conv2d,
    conv_transpose2d,
    leaky_relu,
    matmul,
    relu,
    reshape,
    sigmoid,
    tanh,
)


def _he(rng: np.random.Generator, shape, fan_in: float, dtype) -> Tensor:
    w = rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)
    return Tensor(w.astype(dtype), requires_grad=True)


def _zeros(n: int, dtype) -> Tensor:
    return Tensor(np.zeros(n, dtype=dtype), requires_grad=True)


class Net:
    """Ordered named parameters plus a forward function."""

    def __init__(self, params: dict[str, Tensor]):
        self.params = params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            raise KeyError(f"parameter names differ: {sorted(set(state) ^ set(self.params))}")
        for k, p in self.params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.data.shape:
                raise ValueError(f"{k}: shape {arr.shape} does not match {p.data.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)
            p.zero_grad()

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:  # pragma: no cover - abstract
        raise NotImplementedError


class DCGANGenerator(Net):
    """z (N, latent) -> dense 7*7*64 -> relu -> convT 32 -> relu -> convT 1 -> tanh, (N, 1, 28, 28)."""

    def __init__(self, latent_dim: int, rng: np.random.Generator, dtype=np.float64):
        self.latent_dim = latent_dim
        self.image_hw = (28, 28)
        super().__init__({
            "fc.w": _he(rng, (latent_dim, 7 * 7 * 64), latent_dim, dtype),
            "fc.b": _zeros(7 * 7 * 64, dtype),
            "up1.w": _he(rng, (64, 32, 4, 4), 64 * 4, dtype),
            "up1.b": _zeros(32, dtype),
            "up2.w": _he(rng, (32, 1, 4, 4), 32 * 4, dtype),
            "up2.b": _zeros(1, dtype),
        })

    def forward(self, z: Tensor) -> Tensor:
        p = self.params
        h = relu(add_bias(matmul(z, p["fc.w"]), p["fc.b"]))
        h = reshape(h, (z.shape[0], 64, 7, 7))
        h = relu(add_bias(conv_transpose2d(h, p["up1.w"], stride=2, padding=1), p["up1.b"]))
        return tanh(add_bias(conv_transpose2d(h, p["up2.w"], stride=2, padding=1), p["up2.b"]))


class DCGANDiscriminator(Net):
    """(N, 1, 28, 28) -> conv 32 -> lrelu -> conv 64 -> lrelu -> dense 1 -> sigmoid."""

    def __init__(self, rng: np.random.Generator, dtype=np.float64):
        super().__init__({
            "c1.w": _he(rng, (32, 1, 4, 4), 1 * 16, dtype),
            "c1.b": _zeros(32, dtype),
            "c2.w": _he(rng, (64, 32, 4, 4), 32 * 16, dtype),
            "c2.b": _zeros(64, dtype),
            "fc.w": _he(rng, (64 * 7 * 7, 1), 64 * 7 * 7, dtype),
            "fc.b": _zeros(1, dtype),
        })

    def forward(self, x: Tensor) -> Tensor:
        p = self.params
        h = leaky_relu(add_bias(conv2d(x, p["c1.w"], stride=2, padding=1), p["c1.b"]))
        h = leaky_relu(add_bias(conv2d(h, p["c2.w"], stride=2, padding=1), p["c2.b"]))
        h = reshape(h, (x.shape[0], 64 * 7 * 7))
        return sigmoid(add_bias(matmul(h, p["fc.w"]), p["fc.b"]))


class MLPGenerator(Net):
    """z -> two leaky hidden layers -> tanh, reshaped to (N, 1, h, w)."""

    def __init__(self, latent_dim: int, hidden: int, image_hw: tuple[int, int], rng: np.random.Generator, dtype=np.float64):
        self.latent_dim = latent_dim
        self.image_hw = tuple(image_hw)
        out = image_hw[0] * image_hw[1]
        super().__init__({
            "l1.w": _he(rng, (latent_dim, hidden), latent_dim, dtype),
            "l1.b": _zeros(hidden, dtype),
            "l2.w": _he(rng, (hidden, hidden), hidden, dtype),
            "l2.b": _zeros(hidden, dtype),
            "l3.w": _he(rng, (hidden, out), hidden, dtype),
            "l3.b": _zeros(out, dtype),
        })

    def forward(self, z: Tensor) -> Tensor:
        p = self.params
        h = leaky_relu(add_bias(matmul(z, p["l1.w"]), p["l1.b"]))
        h = leaky_relu(add_bias(matmul(h, p["l2.w"]), p["l2.b"]))
        y = tanh(add_bias(matmul(h, p["l3.w"]), p["l3.b"]))
        return reshape(y, (z.shape[0], 1) + self.image_hw)


class MLPDiscriminator(Net):
    def __init__(self, hidden: int, image_hw: tuple[int, int], rng: np.random.Generator, dtype=np.float64):
        self.n_in = image_hw[0] * image_hw[1]
        super().__init__({
            "l1.w": _he(rng, (self.n_in, hidden), self.n_in, dtype),
            "l1.b": _zeros(hidden, dtype),
            "l2.w": _he(rng, (hidden, hidden), hidden, dtype),
            "l2.b": _zeros(hidden, dtype),
            "l3.w": _he(rng, (hidden, 1), hidden, dtype),
            "l3.b": _zeros(1, dtype),
        })

    def forward(self, x: Tensor) -> Tensor:
        p = self.params
        h = reshape(x, (x.shape[0], self.n_in))
        h = leaky_relu(add_bias(matmul(h, p["l1.w"]), p["l1.b"]))
        h = leaky_relu(add_bias(matmul(h, p["l2.w"]), p["l2.b"]))
        return sigmoid(add_bias(matmul(h, p["l3.w"]), p["l3.b"]))


def build_nets(arch: str, latent_dim: int, hidden: int, image_hw, rng: np.random.Generator, dtype=np.float64):
    """(generator, discriminator) for ``arch``; G is initialized first from ``rng``."""
    if arch == "dcgan":
        if tuple(image_hw) != (28, 28):
            raise ValueError(f"dcgan nets expect 28x28 images, got {tuple(image_hw)}")
        return DCGANGenerator(latent_dim, rng, dtype), DCGANDiscriminator(rng, dtype)
    if arch == "mlp":
        return MLPGenerator(latent_dim, hidden, image_hw, rng, dtype), MLPDiscriminator(hidden, image_hw, rng, dtype)
    raise ValueError(f"unknown architecture {arch!r}")
