"""Dynamic time warping distance with absolute-difference local cost."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import EmptySeries, InfeasibleBand


@dataclass(frozen=True)
class DtwConfig:
    band: Optional[int] = None  # Sakoe-Chiba radius; None = full DP

    def __post_init__(self):
        if self.band is not None and self.band < 0:
            raise ValueError("band radius must be >= 0")


@njit(cache=True, nogil=True)
def _dtw_kernel(a, b, radius):
    n, m = a.shape[0], b.shape[0]
    inf = np.inf
    prev = np.full(m, inf)
    cur = np.full(m, inf)
    for i in range(n):
        lo, hi = 0, m
        if radius >= 0:
            lo = max(0, i - radius)
            hi = min(m, i + radius + 1)
        for j in range(m):
            cur[j] = inf
        for j in range(lo, hi):
            cost = abs(a[i] - b[j])
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = inf
                if i > 0:
                    best = prev[j]
                    if j > 0 and prev[j - 1] < best:
                        best = prev[j - 1]
                if j > 0 and cur[j - 1] < best:
                    best = cur[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
    return prev[m - 1]


def dtw(a, b, cfg: DtwConfig = DtwConfig()) -> float:
    """Cost of the cheapest monotone alignment of ``a`` and ``b``."""
    a = np.ascontiguousarray(getattr(a, "values", a), dtype=np.float64)
    b = np.ascontiguousarray(getattr(b, "values", b), dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptySeries("dtw of an empty series")
    radius = -1
    if cfg.band is not None:
        radius = cfg.band
        if radius < abs(len(a) - len(b)):
            raise InfeasibleBand(
                f"band {radius} cannot connect lengths {len(a)} and {len(b)}"
            )
    return float(_dtw_kernel(a, b, radius))


def distance_matrix(series, cfg: DtwConfig = DtwConfig(), workers: int = 1) -> np.ndarray:
    """Symmetric matrix of pairwise DTW distances."""
    arrs = [np.asarray(getattr(s, "values", s), dtype=np.float64) for s in series]
    n = len(arrs)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            dists = list(pool.map(lambda ij: dtw(arrs[ij[0]], arrs[ij[1]], cfg), pairs))
    else:
        dists = [dtw(arrs[i], arrs[j], cfg) for i, j in pairs]
    out = np.zeros((n, n))
    for (i, j), d in zip(pairs, dists):
        out[i, j] = out[j, i] = d
    return out
