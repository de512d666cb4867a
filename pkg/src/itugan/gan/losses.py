"""Adversarial losses with the transformation unit between G and D."""
from __future__ import annotations

import numpy as np

from ..grad import NonFiniteError, Tensor, clamp, log, mean, no_grad
from ..transforms import TransformUnit

EPS = 1e-7


def _one_minus(x: Tensor) -> Tensor:
    return 1.0 - x


def _bounded(d: Tensor, eps: float, what: str) -> Tensor:
    if not np.isfinite(d.data).all():
        raise NonFiniteError(f"{what} holds NaN or Inf")
    return clamp(d, eps, 1.0 - eps)


def d_loss(D, G, T: TransformUnit, real: Tensor, z: Tensor, eps: float = EPS, label_smoothing: float = 0.0):
    """-[mean log D(x) + mean log(1 - D(T(G(z))))]; returns (loss, D(x), D(T(G(z)))).

    G runs without recording, so backward reaches only D's parameters.
    With ``label_smoothing`` s the real targets become 1 - s.
    """
    with no_grad():
        fake = G(z)
    d_real = _bounded(D(real), eps, "D(x)")
    d_fake = _bounded(D(T.apply(fake)), eps, "D(T(G(z)))")
    real_term = mean(log(d_real))
    if label_smoothing:
        s = label_smoothing
        real_term = real_term * (1.0 - s) + mean(log(_one_minus(d_real))) * s
    loss = -(real_term + mean(log(_one_minus(d_fake))))
    return loss, d_real, d_fake


def g_loss(D, G, T: TransformUnit, z: Tensor, eps: float = EPS, minimax: bool = False):
    """Non-saturating -mean log D(T(G(z))), or with ``minimax`` mean log(1 - D(T(G(z))))."""
    d_fake = _bounded(D(T.apply(G(z))), eps, "D(T(G(z)))")
    if minimax:
        return mean(log(_one_minus(d_fake))), d_fake
    return -mean(log(d_fake)), d_fake
