"""2-D convolution, transposed convolution and padding on NCHW tensors.

Convolution is cross-correlation (no kernel flip), matching the usual deep
learning convention. ``conv_transpose2d`` is implemented as the exact adjoint
of ``conv2d`` with respect to its input.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor

PAD_MODES = ("zeros", "replicate")


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw)
    return sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def _corr(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    """Valid strided cross-correlation: (N,C,Hp,Wp) x (O,C,kh,kw) -> (N,O,Ho,Wo)."""
    cols = _windows(xp, w.shape[2], w.shape[3], stride)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # N,Ho,Wo,O
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _corr_input_grad(g: np.ndarray, w: np.ndarray, stride: int, in_hw: tuple[int, int]) -> np.ndarray:
    """Adjoint of ``_corr`` in its first argument."""
    n, _, ho, wo = g.shape
    _, c, kh, kw = w.shape
    gx = np.zeros((n, c) + tuple(in_hw), dtype=np.result_type(g, w))
    cols = np.tensordot(g, w, axes=([1], [0]))  # N,Ho,Wo,C,kh,kw
    cols = cols.transpose(0, 3, 1, 2, 4, 5)
    for u in range(kh):
        for v in range(kw):
            gx[:, :, u:u + stride * (ho - 1) + 1:stride, v:v + stride * (wo - 1) + 1:stride] += cols[..., u, v]
    return gx


def _corr_weight_grad(xp: np.ndarray, g: np.ndarray, stride: int, kh: int, kw: int) -> np.ndarray:
    cols = _windows(xp, kh, kw, stride)
    return np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))  # O,C,kh,kw


def _pad_array(x: np.ndarray, p: int, mode: str) -> np.ndarray:
    if mode == "zeros":
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), mode="edge")


def _pad_adjoint(g: np.ndarray, p: int, mode: str) -> np.ndarray:
    if mode == "zeros":
        return g[:, :, p:-p, p:-p].copy()
    g = g.copy()
    # fold replicated rows, then columns, back onto the border pixels
    g[:, :, p, :] += g[:, :, :p, :].sum(axis=2)
    g[:, :, -p - 1, :] += g[:, :, -p:, :].sum(axis=2)
    g = g[:, :, p:-p, :]
    g[:, :, :, p] += g[:, :, :, :p].sum(axis=3)
    g[:, :, :, -p - 1] += g[:, :, :, -p:].sum(axis=3)
    return g[:, :, :, p:-p].copy()


def pad2d(x: Tensor, p: int, mode: str = "zeros") -> Tensor:
    if mode not in PAD_MODES:
        raise ValueError(f"pad2d: unknown mode {mode!r}, expected one of {PAD_MODES}")
    if x.ndim != 4:
        raise ValueError(f"pad2d: expected NCHW input, got shape {x.shape}")
    if p == 0:
        return x
    return Tensor._from_op(_pad_array(x.data, p, mode), (x,), lambda g: (_pad_adjoint(g, p, mode),), f"pad2d_{mode}")


def _check_conv_shapes(op: str, x: Tensor, w: Tensor, channel_axis: int) -> None:
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError(f"{op}: expected 4-D input and weight, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[channel_axis]:
        raise ValueError(f"{op}: input has {x.shape[1]} channels, weight expects {w.shape[channel_axis]}")


def conv2d(x: Tensor, w: Tensor, stride: int = 1, padding: int = 0, pad_mode: str = "zeros") -> Tensor:
    """Cross-correlate ``x`` (N,C,H,W) with ``w`` (O,C,kh,kw)."""
    _check_conv_shapes("conv2d", x, w, 1)
    xp_t = pad2d(x, padding, pad_mode)
    xp, wd = xp_t.data, w.data
    kh, kw = wd.shape[2:]
    hp, wp = xp.shape[2:]
    if hp < kh or wp < kw:
        raise ValueError(f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}")

    def backward(g):
        return _corr_input_grad(g, wd, stride, (hp, wp)), _corr_weight_grad(xp, g, stride, kh, kw)

    return Tensor._from_op(_corr(xp, wd, stride), (xp_t, w), backward, "conv2d")


def conv_transpose2d(x: Tensor, w: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """Adjoint of ``conv2d`` with zero padding: (N,C,H,W) x (C,O,kh,kw) -> (N,O,H',W').

    H' = (H-1)*stride - 2*padding + kh.
    """
    _check_conv_shapes("conv_transpose2d", x, w, 0)
    xd, wd = x.data, w.data
    n, _, h, wdt = xd.shape
    kh, kw = wd.shape[2:]
    full = ((h - 1) * stride + kh, (wdt - 1) * stride + kw)
    if full[0] - 2 * padding <= 0 or full[1] - 2 * padding <= 0:
        raise ValueError(f"conv_transpose2d: padding {padding} too large for output {full}")
    out = _corr_input_grad(xd, wd, stride, full)
    if padding:
        out = np.ascontiguousarray(out[:, :, padding:-padding, padding:-padding])

    def backward(g):
        gp = _pad_array(g, padding, "zeros") if padding else g
        return _corr(gp, wd, stride), _corr_weight_grad(gp, xd, stride, kh, kw)

    return Tensor._from_op(out, (x, w), backward, "conv_transpose2d")
