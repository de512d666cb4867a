"""Grid-sampled 1-D densities and scalar maps with their inverse data."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

NORM_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDensity1D:
    """Nonnegative density sampled at the ``m`` cell midpoints of [lo, hi].

    Integrals use the midpoint rule. Off-grid evaluation interpolates linearly
    between midpoints, holds the end values out to ``lo``/``hi`` and is zero
    outside the interval.
    """

    lo: float
    hi: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-D array")
        if not self.hi > self.lo:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if not np.isfinite(w).all() or (w < 0).any():
            raise ValueError("weights must be finite and nonnegative")
        mass = w.sum() * (self.hi - self.lo) / w.size
        if abs(mass - 1.0) > NORM_TOL:
            raise ValueError(f"density integrates to {mass!r}, not 1 (tolerance {NORM_TOL})")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.size

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / self.m

    @property
    def x(self) -> np.ndarray:
        return self.lo + (np.arange(self.m) + 0.5) * self.h

    @property
    def mass(self) -> float:
        return float(self.weights.sum() * self.h)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        vals = np.interp(pts, self.x, self.weights)
        inside = (pts >= self.lo) & (pts <= self.hi)  # NaN compares False
        return np.where(inside, vals, 0.0)

    # -- constructors --------------------------------------------------------
    @classmethod
    def normalized(cls, lo: float, hi: float, weights) -> "DiscreteDensity1D":
        w = np.array(weights, dtype=np.float64)
        total = w.sum() * (hi - lo) / w.size
        if not total > 0:
            raise ValueError("cannot normalize a density with zero mass")
        return cls(lo, hi, w / total)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, m: int) -> "DiscreteDensity1D":
        h = (hi - lo) / m
        x = lo + (np.arange(m) + 0.5) * h
        return cls.normalized(lo, hi, f(x))

    @classmethod
    def uniform(cls, lo: float = -1.0, hi: float = 1.0, m: int = 256) -> "DiscreteDensity1D":
        return cls.normalized(lo, hi, np.ones(m))

    @classmethod
    def truncated_gaussian(cls, mu: float, sigma: float, lo: float = -1.0, hi: float = 1.0, m: int = 256) -> "DiscreteDensity1D":
        return cls.from_function(lambda x: np.exp(-0.5 * ((x - mu) / sigma) ** 2), lo, hi, m)

    def aligned_with(self, other: "DiscreteDensity1D") -> bool:
        return self.m == other.m and self.lo == other.lo and self.hi == other.hi


def check_aligned(*densities: DiscreteDensity1D) -> None:
    first = densities[0]
    for d in densities[1:]:
        if not first.aligned_with(d):
            raise ValueError(f"densities are on different grids: [{first.lo},{first.hi}]x{first.m} vs [{d.lo},{d.hi}]x{d.m}")


Intervals = Sequence[tuple[float, float]]


@dataclass(frozen=True)
class Map1D:
    """A scalar map T with what the optimal-discriminator formulas need.

    ``f_inv`` is the inverse on the range, returning NaN where no preimage
    exists. ``range_complement`` lists intervals of the grid not reached by T.
    ``preimage_fn(y)`` returns a (branches, len(y)) array of preimages padded
    with NaN.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    f_inv: Callable[[np.ndarray], np.ndarray] | None = None
    range_complement: Intervals | None = None
    preimage_fn: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def bijective(self) -> bool:
        return self.f_inv is not None

    def in_complement(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        mask = np.zeros(y.shape, dtype=bool)
        for a, b in self.range_complement or ():
            mask |= (y >= a) & (y <= b)
        return mask


def _nan_outside(vals, ok):
    return np.where(ok, vals, np.nan)


def identity_map() -> Map1D:
    return Map1D("identity", lambda x: np.asarray(x, dtype=np.float64), lambda x: np.ones_like(x, dtype=np.float64), lambda y: np.asarray(y, dtype=np.float64))


def scale_map(c: float) -> Map1D:
    if c == 0:
        raise ValueError("scale factor must be nonzero")
    return Map1D(f"scale:{c:g}", lambda x: c * np.asarray(x), lambda x: np.full(np.shape(x), float(c)), lambda y: np.asarray(y) / c)


def tanh_map() -> Map1D:
    def inv(y):
        y = np.asarray(y, dtype=np.float64)
        ok = np.abs(y) < 1
        return _nan_outside(np.arctanh(np.where(ok, y, 0.0)), ok)

    return Map1D("tanh", np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, inv)


def arctan_map() -> Map1D:
    def inv(y):
        y = np.asarray(y, dtype=np.float64)
        ok = np.abs(y) < np.pi / 2
        return _nan_outside(np.tan(np.where(ok, y, 0.0)), ok)

    return Map1D("arctan", np.arctan, lambda x: 1.0 / (1.0 + x * x), inv)


def warp_map(a: float = 0.2) -> Map1D:
    """x + a sin(pi x): a smooth increasing bijection of [-1, 1] onto itself for |a| < 1/pi."""
    if not abs(a) < 1.0 / np.pi:
        raise ValueError("warp amplitude must satisfy |a| < 1/pi")

    def f(x):
        x = np.asarray(x, dtype=np.float64)
        return x + a * np.sin(np.pi * x)

    def inv(y):
        y = np.asarray(y, dtype=np.float64)
        ok = np.abs(y) <= 1
        lo = np.full(y.shape, -1.0)
        hi = np.full(y.shape, 1.0)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = f(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return _nan_outside(0.5 * (lo + hi), ok)

    return Map1D(f"warp:{a:g}", f, lambda x: 1.0 + a * np.pi * np.cos(np.pi * np.asarray(x)), inv)


def _sig(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def sigmoid_map(lo: float = -1.0, hi: float = 1.0) -> Map1D:
    """Logistic sigmoid restricted to [lo, hi]; not onto [lo, hi]."""

    def inv(y):
        y = np.asarray(y, dtype=np.float64)
        ok = (y > 0) & (y < 1)
        safe = np.where(ok, y, 0.5)
        return _nan_outside(np.log(safe / (1.0 - safe)), ok)

    a, b = float(_sig(lo)), float(_sig(hi))
    return Map1D("sigmoid", _sig, lambda x: _sig(x) * (1.0 - _sig(x)), inv, range_complement=((lo, a), (b, hi)))


def abs_map(lo: float = -1.0, hi: float = 1.0) -> Map1D:
    """|x| on a symmetric interval: two branches for y > 0, nothing below 0."""
    if lo != -hi:
        raise ValueError("abs_map expects a symmetric interval")

    def preimages(y):
        y = np.asarray(y, dtype=np.float64)
        pos = np.where(y > 0, y, np.nan)
        neg = np.where(y > 0, -y, np.where(y == 0, 0.0, np.nan))
        return np.stack([pos, neg])

    return Map1D("abs", np.abs, np.sign, range_complement=((lo, 0.0),), preimage_fn=preimages)


def bracketed_preimages(f: Callable, lo: float, hi: float, samples: int = 4097, iters: int = 80) -> Callable:
    """Preimage enumerator for a continuous f on [lo, hi] by sign-change bisection.

    Each sample interval where f - y changes sign yields one branch.
    """
    xs = np.linspace(lo, hi, samples)
    fx = f(xs)

    def preimages(y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        d = fx[:, None] - y[None, :]  # samples x len(y)
        # brackets are half-open [x_i, x_i+1), the last one closed
        hit = (d[:-1] == 0) | (d[:-1] * d[1:] < 0)
        hit[-1] |= d[-1] == 0
        k = int(hit.sum(axis=0).max()) if y.size else 0
        out = np.full((max(k, 1), y.size), np.nan)
        cols = np.nonzero(hit.T)
        if not len(cols[0]):
            return out
        j, i = cols  # j indexes y, i the bracket
        rank = np.zeros_like(j)
        for t in range(1, j.size):
            rank[t] = rank[t - 1] + 1 if j[t] == j[t - 1] else 0
        a, b = xs[i].copy(), xs[i + 1].copy()
        target = y[j]
        fa = f(a) - target
        fb = f(b) - target
        on_right = (fb == 0) & (fa != 0)
        a = np.where(on_right, b, a)
        fa = np.where(on_right, 0.0, fa)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            fm = f(mid) - target
            left = fa * fm <= 0
            b = np.where(left, mid, b)
            a = np.where(left, a, mid)
            fa = np.where(left, fa, fm)
        out[rank, j] = 0.5 * (a + b)
        return out

    return preimages


def survey_map(name: str, lo: float = -1.0, hi: float = 1.0) -> Map1D:
    """Map1D for a pointwise survey transform or one of the helper maps."""
    from ..transforms import POINTWISE

    if name == "identity":
        return identity_map()
    if name in ("T23", "tanh"):
        return tanh_map()
    if name in ("T22", "arctan"):
        return arctan_map()
    if name in ("T21", "sigmoid"):
        return sigmoid_map(lo, hi)
    if name in ("T52", "abs"):
        return abs_map(lo, hi)
    if name.startswith("warp:"):
        return warp_map(float(name.split(":", 1)[1]))
    if name.startswith("scale:"):
        return scale_map(float(name.split(":", 1)[1]))
    if name in POINTWISE:
        fn = POINTWISE[name]
        ys = fn.f(np.linspace(lo, hi, 100_001))
        comp = []
        if ys.min() > lo:
            comp.append((lo, float(ys.min())))
        if ys.max() < hi:
            comp.append((float(ys.max()), hi))
        return Map1D(name, fn.f, fn.df, range_complement=tuple(comp) or None, preimage_fn=bracketed_preimages(fn.f, lo, hi))
    raise KeyError(f"no 1-D map for {name!r}")
