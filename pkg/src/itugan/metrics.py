"""Sharpness measure and the six-group comparison of original, blurred and recovered images."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .transforms import blur_array, builtin_kernel

QUARTILE_METHOD = "linear"  # numpy.percentile method; inclusive, interpolating
SUMMARY_FIELDS = ("min", "q1", "median", "q3", "max")


def abs_avg_diff(P: np.ndarray) -> np.ndarray:
    """Mean absolute difference of each pixel to its 4-neighbours that exist.

    Interior pixels average four terms, edge pixels three, corners two.
    Vertical and horizontal pairs are summed separately and then added, so
    mirroring the image permutes the result exactly.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or min(P.shape) < 2:
        raise ValueError(f"need a 2-D image with both sides >= 2, got shape {P.shape}")
    dv = np.abs(np.diff(P, axis=0))  # |P[i+1,j] - P[i,j]|
    dh = np.abs(np.diff(P, axis=1))
    up = np.zeros_like(P)
    down = np.zeros_like(P)
    left = np.zeros_like(P)
    right = np.zeros_like(P)
    up[1:] = dv
    down[:-1] = dv
    left[:, 1:] = dh
    right[:, :-1] = dh
    h, w = P.shape
    rows = np.full(h, 2.0)
    rows[[0, -1]] = 1.0
    cols = np.full(w, 2.0)
    cols[[0, -1]] = 1.0
    count = rows[:, None] + cols[None, :]
    return ((up + down) + (left + right)) / count


def sharpness(P: np.ndarray) -> float:
    """chi_s: mean of the second-order absolute average difference."""
    dd = abs_avg_diff(abs_avg_diff(P))
    return math.fsum(dd.ravel()) / dd.size


def five_number_summary(values) -> tuple[float, float, float, float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot summarize an empty sample")
    q = np.percentile(v, [0, 25, 50, 75, 100], method=QUARTILE_METHOD)
    return tuple(float(x) for x in q)


@dataclass(frozen=True)
class SharpnessReport:
    group: str
    values: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    seed: int | None = None

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def summary(self) -> tuple[float, float, float, float, float]:
        return five_number_summary(self.values)

    @property
    def median(self) -> float:
        return self.summary[2]


def summarize(group: str, images: np.ndarray, sample_n: int = 108, seed: int = 0) -> SharpnessReport:
    """chi_s of ``sample_n`` seeded draws (without replacement when enough images exist)."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 4 and images.shape[1] == 1:
        images = images[:, 0]
    if images.shape[0] == 0:
        raise ValueError(f"group {group!r} is empty")
    rng = np.random.default_rng(seed)
    n = images.shape[0]
    idx = rng.choice(n, size=sample_n, replace=sample_n > n)
    vals = np.array([sharpness(images[i]) for i in idx])
    if vals.size and vals.max() > 1.0:
        warnings.warn(f"group {group!r}: chi_s {vals.max():.4f} exceeds 1", RuntimeWarning, stacklevel=2)
    return SharpnessReport(group, vals, idx, seed)


# -- the six groups -------------------------------------------------------------------

MODEL_GROUPS = {
    "sharpen-model": "K_sharpen",
    "rec1-model": "K_rec1",
    "rec2-model": "K_rec2",
    "rec3-model": "K_rec3",
}
GROUP_ORDER = ("original", "sharpen-model", "blurred", "rec1-model", "rec2-model", "rec3-model")


def six_group_report(
    images: np.ndarray,
    checkpoints: Mapping[str, str | Path | None] | None = None,
    sample_n: int = 108,
    seed: int = 0,
    sampler: Callable[[Path, int, int], np.ndarray] | None = None,
) -> tuple[list[SharpnessReport], list[str]]:
    """Reports for originals, blurred originals and up to four model-sample groups.

    ``checkpoints`` maps a model group name to a generator checkpoint; groups
    without one (or whose checkpoint fails to load) are skipped with a notice.
    ``sampler(path, n, seed)`` draws generator samples; defaults to the GAN
    sampler.
    """
    checkpoints = dict(checkpoints or {})
    unknown = set(checkpoints) - set(MODEL_GROUPS)
    if unknown:
        raise KeyError(f"unknown groups {sorted(unknown)}; model groups are {sorted(MODEL_GROUPS)}")
    images = np.asarray(images, dtype=np.float64)
    reports: dict[str, SharpnessReport] = {}
    notices: list[str] = []
    if images.shape[0] == 0:
        notices.append("skip original: no images")
        notices.append("skip blurred: no images")
    else:
        reports["original"] = summarize("original", images, sample_n, seed)
        blurred = blur_array(images, builtin_kernel("K_blur"))
        reports["blurred"] = summarize("blurred", blurred, sample_n, seed)
    for group in MODEL_GROUPS:
        path = checkpoints.get(group)
        if path is None:
            notices.append(f"skip {group}: no checkpoint given")
            continue
        if sampler is None:
            from .gan.train import sample_from_checkpoint as sampler
        try:
            samples = sampler(Path(path), sample_n, seed)
        except (OSError, ValueError) as exc:
            notices.append(f"skip {group}: {exc}")
            continue
        reports[group] = summarize(group, samples, sample_n, seed)
    return [reports[g] for g in GROUP_ORDER if g in reports], notices


# -- output ---------------------------------------------------------------------------

def write_samples_csv(reports, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "sample_index", "chi_s"])
        for r in reports:
            for i, v in zip(r.indices, r.values):
                w.writerow([r.group, int(i), repr(float(v))])
    return path


def write_summary_csv(reports, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", *SUMMARY_FIELDS])
        for r in reports:
            w.writerow([r.group, *(repr(x) for x in r.summary)])
    return path


def write_boxplot_dat(reports, path) -> Path:
    """gnuplot candlestick data: x, min, q1, median, q3, max, label."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# quartiles: numpy percentile method={QUARTILE_METHOD}",
        "# x min q1 median q3 max group",
        "# plot with: using 1:3:2:6:5:xticlabels(7) with candlesticks whiskerbars",
    ]
    for x, r in enumerate(reports, start=1):
        lines.append(" ".join([str(x), *(f"{v:.10g}" for v in r.summary), r.group]))
    path.write_text("\n".join(lines) + "\n")
    return path
