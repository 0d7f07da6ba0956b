"""Multilevel colour thresholding with the minimum cross-entropy criterion.

Gray levels 0..255 are handled as levels 1..256 so that ``log(level)`` is
defined for black. A threshold ``t`` opens a class at level ``t``; the classes
of ``t_1 < ... < t_n`` are ``[1, t_1), [t_1, t_2), ..., [t_n, 257)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .apo import ApoParams, ApoResult, optimize
from .core import Bounds, ContractError, ObjectiveFn, ParameterError

L = 256
MAX_THRESHOLDS = 32
SSIM_WINDOW = "8x8 non-overlapping"
_C1 = (0.01 * 255) ** 2
_C2 = (0.03 * 255) ** 2


@dataclass(frozen=True)
class GrayHistogram:
    """Pixel counts by level; ``counts[i]`` is the count of level ``i`` (gray ``i - 1``).

    ``counts[0]`` is always zero so indices match the 1-based levels.
    """

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (L + 1,) or c[0] != 0 or (c < 0).any():
            raise ValueError("histogram needs 257 non-negative counts with counts[0] == 0")
        object.__setattr__(self, "counts", c)
        # prefix sums over levels: sums over [a, b) are p[b] - p[a]
        lv = np.arange(L + 1, dtype=np.int64)
        object.__setattr__(self, "_p0", np.concatenate(([0], np.cumsum(c))))
        object.__setattr__(self, "_p1", np.concatenate(([0], np.cumsum(lv * c))))
        nz = lv[1:][c[1:] > 0]
        object.__setattr__(
            self, "_entropy", float(np.sum(nz * c[nz] * np.log(nz.astype(float))))
        )

    @classmethod
    def from_gray_counts(cls, counts) -> "GrayHistogram":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (L,):
            raise ValueError("expected 256 gray-level counts")
        return cls(np.concatenate(([0], counts)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def populated_levels(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def class_sums(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        return self._p0[hi] - self._p0[lo], self._p1[hi] - self._p1[lo]


def histogram(channel) -> GrayHistogram:
    ch = np.asarray(channel)
    if ch.size == 0:
        raise ValueError("cannot build a histogram of an empty channel")
    if ch.min() < 0 or ch.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    return GrayHistogram.from_gray_counts(np.bincount(ch.astype(np.int64).ravel(), minlength=L))


def class_mean(hist: GrayHistogram, lo: int, hi: int) -> float:
    """Intensity-weighted mean level over ``[lo, hi)``; an empty class falls back to its midpoint."""
    if not 1 <= lo < hi <= L + 1:
        raise ContractError(f"class [{lo}, {hi}) outside [1, {L + 1})")
    s0, s1 = hist.class_sums(lo, hi)
    if s0 == 0:
        warnings.warn(f"class [{lo}, {hi}) is empty; using its midpoint", RuntimeWarning)
        return (lo + hi - 1) / 2.0
    return float(s1 / s0)


def _check_thresholds(ts) -> np.ndarray:
    t = np.asarray(ts, dtype=np.int64)
    if t.ndim != 1 or t.size < 1:
        raise ContractError("need a non-empty 1-D threshold set")
    if t[0] <= 1 or t[-1] >= L or np.any(np.diff(t) <= 0):
        raise ContractError(f"thresholds must satisfy 1 < t1 < ... < tn < {L}, got {t.tolist()}")
    return t


def _mcet_rows(hist: GrayHistogram, t: np.ndarray) -> np.ndarray:
    m = t.shape[0]
    edges = np.hstack([np.ones((m, 1), np.int64), t, np.full((m, 1), L + 1, np.int64)])
    s0, s1 = hist.class_sums(edges[:, :-1], edges[:, 1:])
    s0f, s1f = s0.astype(float), s1.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(s0 > 0, s1f * np.log(s1f / s0f), 0.0)
    return hist._entropy - term.sum(axis=1)


def mcet_objective(hist: GrayHistogram, ts) -> float:
    """Cross entropy between the image and its class-mean reconstruction."""
    t = _check_thresholds(ts)
    return float(_mcet_rows(hist, t[None, :])[0])


def repair_thresholds(x) -> np.ndarray:
    """Map continuous positions to valid integer threshold sets (row-wise).

    Rounds, sorts, pushes duplicates upward one level at a time, and if the
    top overflows ``L - 1`` pushes back downward.
    """
    t = np.clip(np.floor(np.asarray(x, dtype=float) + 0.5), 2, L - 1).astype(np.int64)
    single = t.ndim == 1
    t = np.sort(np.atleast_2d(t), axis=1)
    n = t.shape[1]
    if n > L - 2:
        raise ParameterError("too many thresholds for 256 levels")
    for k in range(1, n):
        t[:, k] = np.maximum(t[:, k], t[:, k - 1] + 1)
    t[:, -1] = np.minimum(t[:, -1], L - 1)
    for k in range(n - 2, -1, -1):
        t[:, k] = np.minimum(t[:, k], t[:, k + 1] - 1)
    return t[0] if single else t


def mcet_fitness(hist: GrayHistogram, n: int) -> ObjectiveFn:
    """Objective over the box ``[2, L - 1]^n`` that scores repaired thresholds."""
    return ObjectiveFn(lambda x: _mcet_rows(hist, np.atleast_2d(repair_thresholds(x))),
                       Bounds.cube(n, 2, L - 1), f"mcet{n}", vectorized=True)


@dataclass
class ThresholdResult:
    thresholds: np.ndarray
    value: float
    run: Optional[ApoResult] = None


def solve_thresholds(hist: GrayHistogram, n: int, params: Optional[ApoParams] = None,
                     seed: int = 0) -> ThresholdResult:
    """Search ``n`` thresholds minimising the cross entropy (defaults: 100 x 100 evaluations)."""
    if not 1 <= n <= MAX_THRESHOLDS:
        raise ParameterError(f"number of thresholds must lie in [1, {MAX_THRESHOLDS}]")
    if params is None:
        params = ApoParams.from_iterations(100, ps=100)
    run = optimize(mcet_fitness(hist, n), params, seed)
    ts = repair_thresholds(run.best.position)
    return ThresholdResult(ts, mcet_objective(hist, ts), run)


def class_levels(hist: GrayHistogram, ts) -> np.ndarray:
    """Reconstruction gray value (0..255) for each class."""
    t = _check_thresholds(ts)
    edges = np.concatenate(([1], t, [L + 1]))
    out = np.empty(t.size + 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(t.size + 1):
            out[k] = class_mean(hist, int(edges[k]), int(edges[k + 1]))
    return np.clip(np.floor(out + 0.5) - 1, 0, 255).astype(np.uint8)


def apply_thresholds(channel, ts, hist: GrayHistogram) -> np.ndarray:
    """Replace every pixel by the rounded mean of its class."""
    ch = np.asarray(channel)
    t = _check_thresholds(ts)
    levels = class_levels(hist, t)
    lut = levels[np.searchsorted(t, np.arange(1, L + 1), side="right")]
    return lut[ch.astype(np.int64)]


def segment_rgb(img, n: int, params: Optional[ApoParams] = None,
                seed: int = 0) -> tuple[np.ndarray, list[ThresholdResult]]:
    """Threshold each channel independently (channel ``c`` uses ``seed + c``)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (height, width, 3) image")
    if n < 1:
        raise ParameterError("need at least one threshold")
    out = np.empty_like(img, dtype=np.uint8)
    results = []
    for c in range(3):
        hist = histogram(img[..., c])
        res = solve_thresholds(hist, n, params, seed + c)
        out[..., c] = apply_thresholds(img[..., c], res.thresholds, hist)
        results.append(res)
    return out, results


# ----------------------------------------------------------------- quality --

def _same_shape(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``inf``."""
    a, b = _same_shape(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(255.0**2 / mse))


def _block_sums(x: np.ndarray, size: int) -> np.ndarray:
    rows = np.arange(0, x.shape[0], size)
    cols = np.arange(0, x.shape[1], size)
    return np.add.reduceat(np.add.reduceat(x, rows, axis=0), cols, axis=1)


def ssim(a, b, window: int = 8) -> float:
    """Mean SSIM over non-overlapping ``window x window`` blocks and channels.

    Edge blocks smaller than the window are kept as they are.
    """
    a, b = _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    scores = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        cnt = _block_sums(np.ones_like(x), window)
        mx = _block_sums(x, window) / cnt
        my = _block_sums(y, window) / cnt
        vx = _block_sums(x * x, window) / cnt - mx**2
        vy = _block_sums(y * y, window) / cnt - my**2
        cxy = _block_sums(x * y, window) / cnt - mx * my
        s = ((2 * mx * my + _C1) * (2 * cxy + _C2)) / ((mx**2 + my**2 + _C1) * (vx + vy + _C2))
        scores.append(s.ravel())
    return float(np.mean(np.concatenate(scores)))
