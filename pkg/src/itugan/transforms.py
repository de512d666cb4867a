"""Inverse transformation units placed between the generator and discriminator.

Three kinds exist:

* pointwise maps on pixel values in [-1, 1] (the nine-function survey set
  minus the mirror, plus ``identity``),
* the mirror map (``T1``: per-row column reversal; ``T1-vec``: reversal of
  the flattened image, i.e. a 180 degree rotation),
* kernel blur: replicate-extend the image by one pixel, then take the valid
  3x3 cross-correlation with a fixed kernel.

Every unit works on batches whose last two axes are image rows and columns,
and is differentiable through the autodiff core.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grad import Tensor, arctan, flip, pointwise, sigmoid, tabs, tanh

# -- kernels -----------------------------------------------------------------

_THIRD = 1.0 / 9.0

BUILTIN_KERNELS: dict[str, np.ndarray] = {
    "K_sharpen": np.array([[0.01, 0.08, 0.01], [0.08, 0.64, 0.08], [0.01, 0.08, 0.01]]),
    "K_blur": np.full((3, 3), _THIRD),
    "K_rec1": np.full((3, 3), _THIRD),
    "K_rec2": np.array([[0.1, 0.12, 0.1], [0.12, 0.13, 0.12], [0.1, 0.12, 0.1]]),
    "K_rec3": np.array([[0.08, 0.12, 0.08], [0.12, 0.19, 0.12], [0.08, 0.12, 0.08]]),
}


@dataclass(frozen=True)
class Kernel3x3:
    id: str
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (3, 3):
            raise ValueError(f"kernel {self.id!r} must be 3x3, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise ValueError(f"kernel {self.id!r} has non-finite weights")
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return math.fsum(self.weights.ravel())


def builtin_kernel(kernel_id: str) -> Kernel3x3:
    try:
        return Kernel3x3(kernel_id, BUILTIN_KERNELS[kernel_id].copy())
    except KeyError:
        raise KeyError(f"unknown kernel {kernel_id!r}; built-in kernels: {', '.join(BUILTIN_KERNELS)}") from None


def parse_kernel_text(text: str, kernel_id: str = "custom") -> Kernel3x3:
    """Nine numbers, row-major, separated by whitespace and/or commas."""
    tokens = text.replace(",", " ").split()
    if len(tokens) != 9:
        raise ValueError(f"kernel file must hold exactly 9 numbers, found {len(tokens)}")
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ValueError(f"kernel file: {exc}") from None
    return Kernel3x3(kernel_id, np.array(values).reshape(3, 3))


def load_kernel(spec: str) -> Kernel3x3:
    """Resolve a built-in kernel id or a path to a 9-number text file."""
    if spec in BUILTIN_KERNELS:
        return builtin_kernel(spec)
    if os.path.isfile(spec):
        with open(spec) as fh:
            return parse_kernel_text(fh.read(), kernel_id=f"custom:{os.path.basename(spec)}")
    raise KeyError(f"unknown kernel {spec!r}; built-in kernels: {', '.join(BUILTIN_KERNELS)} (or a path to a 9-number file)")


# -- replicate extension and 3x3 correlation (numpy level) --------------------

def _check_image(arr: np.ndarray, what: str) -> None:
    if arr.ndim < 2:
        raise ValueError(f"{what}: expected image-shaped input (..., rows, cols), got shape {arr.shape}")
    if arr.shape[-1] < 1 or arr.shape[-2] < 1:
        raise ValueError(f"{what}: empty image {arr.shape}")


def replicate_extend_array(x: np.ndarray) -> np.ndarray:
    """(..., n, m) -> (..., n+2, m+2): duplicate edge rows, then edge columns."""
    _check_image(x, "replicate_extend")
    rows = np.concatenate([x[..., :1, :], x, x[..., -1:, :]], axis=-2)
    return np.concatenate([rows[..., :, :1], rows, rows[..., :, -1:]], axis=-1)


def replicate_extend_adjoint(g: np.ndarray) -> np.ndarray:
    # undo the column step, then the row step
    cols = g[..., :, 1:-1].copy()
    cols[..., :, 0] += g[..., :, 0]
    cols[..., :, -1] += g[..., :, -1]
    out = cols[..., 1:-1, :].copy()
    out[..., 0, :] += cols[..., 0, :]
    out[..., -1, :] += cols[..., -1, :]
    return out


def convolve3x3_array(ext: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid 3x3 cross-correlation with a fixed summation order.

    Left and right taps of each kernel row are added first, so the result
    commutes exactly (bitwise) with a horizontal mirror whenever the kernel
    is left-right symmetric.
    """
    _check_image(ext, "convolve3x3")
    n, m = ext.shape[-2] - 2, ext.shape[-1] - 2
    if n < 1 or m < 1:
        raise ValueError(f"convolve3x3: extended image must be at least 3x3, got {ext.shape[-2:]}")
    out = np.zeros(ext.shape[:-2] + (n, m), dtype=ext.dtype)
    for u in range(3):
        rows = ext[..., u:u + n, :]
        out += (kernel[u, 0] * rows[..., 0:m] + kernel[u, 2] * rows[..., 2:m + 2]) + kernel[u, 1] * rows[..., 1:m + 1]
    return out


def convolve3x3_adjoint(g: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n, m = g.shape[-2:]
    out = np.zeros(g.shape[:-2] + (n + 2, m + 2), dtype=g.dtype)
    for u in range(3):
        for v in range(3):
            out[..., u:u + n, v:v + m] += kernel[u, v] * g
    return out


# -- the same steps as differentiable tensor ops ----------------------------------

def replicate_extend(x: Tensor) -> Tensor:
    return Tensor._from_op(replicate_extend_array(x.data), (x,), lambda g: (replicate_extend_adjoint(g),), "replicate_extend")


def convolve3x3(ext: Tensor, kernel: Kernel3x3) -> Tensor:
    k = kernel.weights.astype(ext.dtype)
    return Tensor._from_op(convolve3x3_array(ext.data, k), (ext,), lambda g: (convolve3x3_adjoint(g, k),), "convolve3x3")


def blur_array(x: np.ndarray, kernel: Kernel3x3) -> np.ndarray:
    return convolve3x3_array(replicate_extend_array(x), kernel.weights.astype(x.dtype))


# -- pointwise functions and derivatives --------------------------------------------

def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _t31(x):
    return x + 0.25 - 0.5 * _sig(10.0 * x + 9.0)


def _dt31(x):
    s = _sig(10.0 * x + 9.0)
    return 1.0 - 5.0 * s * (1.0 - s)


def _t32(x):
    return x + np.sin(np.pi * x) / 2.0


def _dt32(x):
    return 1.0 + (np.pi / 2.0) * np.cos(np.pi * x)


def _t4(x):
    return x * x + np.sin(np.pi * x)


def _dt4(x):
    return 2.0 * x + np.pi * np.cos(np.pi * x)


def _t51(x):
    x = np.asarray(x)
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 0.0, x * np.sin(1.0 / safe))


def _dt51(x):
    # derivative at 0 defined as 0
    x = np.asarray(x)
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 0.0, np.sin(1.0 / safe) - np.cos(1.0 / safe) / safe)


@dataclass(frozen=True)
class PointwiseFn:
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    op: Callable[[Tensor], Tensor] | None = None  # dedicated autodiff op, if any


POINTWISE: dict[str, PointwiseFn] = {
    "identity": PointwiseFn(lambda x: x, np.ones_like),
    "T21": PointwiseFn(_sig, lambda x: _sig(x) * (1.0 - _sig(x)), sigmoid),
    "T22": PointwiseFn(np.arctan, lambda x: 1.0 / (1.0 + x * x), arctan),
    "T23": PointwiseFn(np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, tanh),
    "T31": PointwiseFn(_t31, _dt31),
    "T32": PointwiseFn(_t32, _dt32),
    "T4": PointwiseFn(_t4, _dt4),
    "T51": PointwiseFn(_t51, _dt51),
    "T52": PointwiseFn(np.abs, np.sign, tabs),
}


# -- registry ------------------------------------------------------------------------

@dataclass(frozen=True)
class TableRow:
    """Properties listed for a survey transform: injective/surjective onto [-1,1] etc."""

    formula: str
    injective: bool
    surjective: bool
    differentiable: str
    continuity: str
    effect: bool


TABLE1: dict[str, TableRow] = {
    "T1": TableRow("T(x) = I_hat x (mirror)", True, True, "Yes", "Yes", True),
    "T21": TableRow("T(x) = sigma(x)", True, False, "Yes", "Yes", False),
    "T22": TableRow("T(x) = arctan(x)", True, False, "Yes", "Yes", True),
    "T23": TableRow("T(x) = tanh(x)", True, False, "Yes", "Yes", True),
    "T31": TableRow("T(x) = x + 1/4 - sigma(10x+9)/2", False, True, "Yes", "Yes", False),
    "T32": TableRow("T(x) = x + sin(pi x)/2", False, True, "Yes", "Yes", True),
    "T4": TableRow("T(x) = x^2 + sin(pi x)", False, False, "Yes", "Yes", False),
    "T51": TableRow("T(x) = x sin(1/x)", False, False, "No when x=0", "Not uniform", False),
    "T52": TableRow("T(x) = |x|", False, False, "No when x=0", "Not uniform", False),
}

SURVEY_NAMES = tuple(TABLE1)


@dataclass(frozen=True)
class TransformUnit:
    kind: str  # "pointwise" | "mirror" | "kernel_blur"
    name: str
    kernel: Kernel3x3 | None = None
    table: TableRow | None = None

    def apply(self, batch: Tensor) -> Tensor:
        """T(batch), recorded on the autodiff tape."""
        if self.kind == "pointwise":
            if self.name == "identity":
                return batch
            fn = POINTWISE[self.name]
            if fn.op is not None:
                return fn.op(batch)
            return pointwise(batch, fn.f, fn.df, self.name)
        _check_image(batch.data, f"{self.name}")
        if self.kind == "mirror":
            return flip(batch, -1 if self.name == "T1" else (-2, -1))
        return convolve3x3(replicate_extend(batch), self.kernel)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """T(x) on a plain array."""
        x = np.asarray(x, dtype=np.float64) if not isinstance(x, np.ndarray) else x
        if self.kind == "pointwise":
            return np.asarray(POINTWISE[self.name].f(x), dtype=x.dtype)
        _check_image(x, self.name)
        if self.kind == "mirror":
            return np.flip(x, -1 if self.name == "T1" else (-2, -1)).copy()
        return blur_array(x, self.kernel)

    def derivative_apply(self, upstream: np.ndarray, saved_input: np.ndarray) -> np.ndarray:
        """Chain rule through T: the vector-Jacobian product at ``saved_input``."""
        if self.kind == "pointwise":
            return upstream * POINTWISE[self.name].df(saved_input)
        if self.kind == "mirror":
            return np.flip(upstream, -1 if self.name == "T1" else (-2, -1)).copy()
        k = self.kernel.weights.astype(upstream.dtype)
        return replicate_extend_adjoint(convolve3x3_adjoint(upstream, k))


def registry_names() -> list[str]:
    return ["identity", "T1", "T1-vec", *[n for n in SURVEY_NAMES if n != "T1"], *[f"blur:{k}" for k in BUILTIN_KERNELS]]


def registry_get(name: str) -> TransformUnit:
    if name in ("T1", "T1-vec"):
        return TransformUnit("mirror", name, table=TABLE1.get(name))
    if name in POINTWISE:
        return TransformUnit("pointwise", name, table=TABLE1.get(name))
    if name.startswith("blur:"):
        kernel = load_kernel(name[len("blur:"):])
        return TransformUnit("kernel_blur", name, kernel=kernel)
    raise KeyError(f"unknown transform {name!r}; registered: {', '.join(registry_names())} (or blur:<kernel-file>)")


def apply(unit: TransformUnit, batch: Tensor) -> Tensor:
    return unit.apply(batch)
