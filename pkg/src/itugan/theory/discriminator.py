"""Discriminator value functional, closed-form optimum and a brute-force oracle.

The oracle never touches T's inverse or derivative: it pushes the generator
mass forward through T numerically and maximizes, point by point,

    a log d + b log(1 - d)

with a golden-section search.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .density import DiscreteDensity1D, Map1D, check_aligned

EPS = 1e-7
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DiscriminatorGrid:
    """D values at the density grid midpoints, clamped to [EPS, 1 - EPS]."""

    values: np.ndarray = field(repr=False)
    eps: float = EPS

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if np.isnan(v).any() or (v < 0).any() or (v > 1).any():
            raise ValueError("discriminator values must lie in [0, 1]")
        v = np.clip(v, self.eps, 1.0 - self.eps)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, m: int, value: float = 0.5) -> "DiscriminatorGrid":
        return cls(np.full(m, value))


def value_functional(
    p_data: DiscreteDensity1D,
    p_g: DiscreteDensity1D,
    T: Map1D,
    D: DiscriminatorGrid,
    subdiv: int = 16,
) -> float:
    """Midpoint-rule value of  int p_data log D + int p_g log(1 - D(T(x))).

    D(T(x)) interpolates the grid values linearly (held constant past the
    outermost midpoints). The composed term runs the midpoint rule on each
    cell split into ``subdiv`` pieces with p_g interpolated; with one piece the
    pushed sample points alias against the D grid, which puts an O(h) slope
    into the functional at the exact optimum. ``subdiv`` must be 1 or even so
    the rule stays exact on p_g's piecewise-linear interpolant.
    """
    check_aligned(p_data, p_g)
    if subdiv < 1 or (subdiv > 1 and subdiv % 2):
        raise ValueError("subdiv must be 1 or an even number")
    x = p_data.x
    d = D.values
    if d.shape != x.shape:
        raise ValueError(f"discriminator has {d.size} values for a grid of {x.size}")
    h = p_data.h
    if subdiv == 1:
        xs, pg, hs = x, p_g.weights, h
    else:
        hs = h / subdiv
        xs = p_g.lo + (np.arange(p_g.m * subdiv) + 0.5) * hs
        pg = p_g(xs)
    d_at_t = np.interp(T.f(xs), x, d)
    if not ((d_at_t > 0) & (d_at_t < 1)).all():
        raise ValueError("discriminator left (0, 1) after clamping")
    return h * float(np.dot(p_data.weights, np.log(d))) + hs * float(np.dot(pg, np.log1p(-d_at_t)))


def pushed_density_formula(p_g: DiscreteDensity1D, T: Map1D, y: np.ndarray) -> np.ndarray:
    """p_g(T^-1(y)) / |T'(T^-1(y))|, zero where y has no preimage."""
    if T.f_inv is None:
        raise ValueError(f"map {T.name!r} has no inverse; it is not bijective")
    xs = T.f_inv(y)
    ok = np.isfinite(xs)
    safe = np.where(ok, xs, 0.0)
    jac = np.abs(T.df(safe))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(ok & (jac > 0), p_g(safe) / jac, 0.0)
    return vals


def _ratio_discriminator(p: np.ndarray, q: np.ndarray, eps: float) -> DiscriminatorGrid:
    denom = p + q
    zero = denom <= 0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} grid points with zero denominator; D set to 1/2 there", RuntimeWarning, stacklevel=3)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(zero, 0.5, p / np.where(zero, 1.0, denom))
    return DiscriminatorGrid(d, eps)


def optimal_discriminator(p_data: DiscreteDensity1D, p_g: DiscreteDensity1D, T: Map1D, eps: float = EPS) -> DiscriminatorGrid:
    """Closed-form optimum for bijective T: p_data / (p_data + pushed p_g)."""
    check_aligned(p_data, p_g)
    y = p_data.x
    return _ratio_discriminator(p_data.weights, pushed_density_formula(p_g, T, y), eps)


# -- brute force ---------------------------------------------------------------------

def pushed_mass(p_g: DiscreteDensity1D, f, edges_lo: np.ndarray, edges_hi: np.ndarray, subdiv: int = 1024) -> np.ndarray:
    """Generator mass that ``f`` maps into each window [edges_lo[i], edges_hi[i]].

    Each grid cell is split into ``subdiv`` pieces; a piece carries
    p_g(piece midpoint) * width and spreads it uniformly over the interval
    between the images of its endpoints. Works for any continuous f, one-to-one
    or not. Overlaps are computed piece by piece (no global running sums, which
    lose digits to cancellation once the piece count is large).
    """
    edges_lo = np.asarray(edges_lo, dtype=np.float64)
    edges_hi = np.asarray(edges_hi, dtype=np.float64)
    n = p_g.m * subdiv
    xe = p_g.lo + np.arange(n + 1) * ((p_g.hi - p_g.lo) / n)
    xm = 0.5 * (xe[:-1] + xe[1:])
    w = p_g(xm) * np.diff(xe)
    fe = f(xe)
    lo = np.minimum(fe[:-1], fe[1:])
    hi = np.maximum(fe[:-1], fe[1:])
    live = w > 0
    lo, hi, w = lo[live], hi[live], w[live]
    order = np.argsort(lo, kind="stable")
    lo, hi, w = lo[order], hi[order], w[order]
    length = hi - lo
    reach = float(length.max()) if length.size else 0.0

    # candidate pieces for window i: lo_j in [edges_lo[i] - reach, edges_hi[i]]
    start = np.searchsorted(lo, edges_lo - reach, side="left")
    stop = np.searchsorted(lo, edges_hi, side="right")
    counts = np.maximum(stop - start, 0)
    out = np.zeros(edges_lo.shape)
    if not counts.sum():
        return out
    win = np.repeat(np.arange(edges_lo.size), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    j = np.repeat(start, counts) + offs
    el, eh = edges_lo[win], edges_hi[win]
    flat = length[j] <= 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.clip(np.minimum(hi[j], eh) - np.maximum(lo[j], el), 0.0, None) / length[j]
    frac = np.where(flat, ((lo[j] >= el) & (lo[j] < eh)).astype(np.float64), frac)
    np.add.at(out, win, w[j] * frac)
    return out


def _gain(a, b, x, y):
    """obj(y) - obj(x) for obj(d) = a log d + b log(1 - d), without cancellation."""
    step = y - x
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(a > 0, a * np.log1p(step / x), 0.0)
        down = np.where(b > 0, b * np.log1p(-step / (1.0 - x)), 0.0)
    return up + down


def golden_section_max(a: np.ndarray, b: np.ndarray, lo: float, hi: float, tol: float = 1e-10) -> np.ndarray:
    """Maximize a*log(d) + b*log(1-d) over d in [lo, hi], elementwise.

    Golden-section search; probe points are compared through the exact
    difference of the objective (two log1p terms) rather than two nearly
    equal values, so the bracket can shrink to ``tol``. The bracket ends are
    compared at the end so boundary suprema are returned exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    xl = np.full(a.shape, lo)
    xu = np.full(a.shape, hi)
    x1 = xu - GOLDEN * (xu - xl)
    x2 = xl + GOLDEN * (xu - xl)
    while np.max(xu - xl) > tol:
        right = _gain(a, b, x1, x2) > 0
        xl = np.where(right, x1, xl)
        xu = np.where(right, xu, x2)
        x1, x2 = (
            np.where(right, x2, xu - GOLDEN * (xu - xl)),
            np.where(right, xl + GOLDEN * (xu - xl), x1),
        )
    best = 0.5 * (xl + xu)
    best = np.where(_gain(a, b, best, np.full(a.shape, lo)) > 0, lo, best)
    best = np.where(_gain(a, b, best, np.full(a.shape, hi)) > 0, hi, best)
    # flat objective: any d is optimal; pick 1/2
    return np.where((a == 0) & (b == 0), 0.5, best)


def brute_force_optimal_D(
    p_data: DiscreteDensity1D,
    p_g: DiscreteDensity1D,
    T: Map1D,
    eps: float = EPS,
    window: float | None = None,
    subdiv: int = 1024,
) -> DiscriminatorGrid:
    """Pointwise numerical maximizer of the value functional.

    At each grid point y: a = p_data(y) * window, b = generator mass pushed by
    T into [y - window/2, y + window/2]; maximize a log d + b log(1 - d).
    ``window`` defaults to h/256 so the window average matches the point value
    to well below the comparison tolerances.
    """
    check_aligned(p_data, p_g)
    w = p_data.h / 256.0 if window is None else window
    y = p_data.x
    b = pushed_mass(p_g, T.f, y - w / 2, y + w / 2, subdiv=subdiv)
    b = np.maximum(b, 0.0)
    a = p_data.weights * w
    # scale so both coefficients are O(1); the maximizer is unchanged
    s = np.where(a + b > 0, a + b, 1.0)
    return DiscriminatorGrid(golden_section_max(a / s, b / s, eps, 1.0 - eps), eps)
