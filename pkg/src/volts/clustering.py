"""K-medoids clustering of volatility series under DTW.

Seeding is deterministic farthest-point selection and centroids are always
member series (medoids), so a run is fully reproducible from its inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dtw import DtwConfig, distance_matrix
from .errors import NotThreeClusters, TooFewSeries

DEFAULT_K = 3
DEFAULT_MAX_ITER = 100
LEVEL_NAMES = ("low", "mid", "high")


def _values(s):
    return np.asarray(getattr(s, "values", s), dtype=np.float64)


def _names(series_set, names):
    if names is not None:
        return tuple(names)
    return tuple(getattr(s, "ticker", str(i)) for i, s in enumerate(series_set))


SEEDING_RULES = ("maximin", "previous")


def seed_from_matrix(dist: np.ndarray, k: int, rule: str = "maximin") -> list[int]:
    n = dist.shape[0]
    if not 1 <= k <= n:
        raise TooFewSeries(f"cannot seed {k} clusters from {n} series")
    if rule not in SEEDING_RULES:
        raise ValueError(f"unknown seeding rule {rule!r}")
    # argmax returns the first index among ties
    seeds = [int(np.argmax(dist.sum(axis=1)))]
    while len(seeds) < k:
        if rule == "previous":
            d = dist[seeds[-1]].copy()
        else:
            d = dist[seeds].min(axis=0)
        d[seeds] = -np.inf
        seeds.append(int(np.argmax(d)))
    return seeds


def seed_centroids(series_set, k: int, cfg: DtwConfig = DtwConfig(), rule: str = "maximin") -> list[int]:
    """Farthest-point seeding.

    The first seed has the largest total DTW distance to all other series.
    Each further seed is the unchosen series farthest from the seeds picked
    so far, measured to the nearest of them (``rule="maximin"``) or to the
    most recent one only (``rule="previous"``). The two rules agree for
    K <= 2. Ties go to the lowest index.
    """
    if len(series_set) < k:
        raise TooFewSeries(f"cannot seed {k} clusters from {len(series_set)} series")
    return seed_from_matrix(distance_matrix(series_set, cfg), k, rule)


@dataclass(frozen=True, eq=False)
class ClusterResult:
    k: int
    tickers: tuple
    assignments: tuple          # cluster id per series
    medoids: tuple              # series index per cluster id
    inertia: float
    n_iter: int
    inertia_history: tuple
    levels: tuple               # mean level per cluster id
    labels: dict = field(default_factory=dict)  # cluster id -> level name
    label_tie: bool = False

    def members(self, cluster: int) -> list[str]:
        return [t for t, c in zip(self.tickers, self.assignments) if c == cluster]

    @property
    def assignment_map(self) -> dict:
        return dict(zip(self.tickers, self.assignments))

    @property
    def medoid_map(self) -> dict:
        return {c: self.tickers[m] for c, m in enumerate(self.medoids)}

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "assignments": {t: int(c) for t, c in zip(self.tickers, self.assignments)},
            "medoids": {str(c): t for c, t in self.medoid_map.items()},
            "labels": {str(c): name for c, name in self.labels.items()},
            "levels": {str(c): float(v) for c, v in enumerate(self.levels)},
            "inertia": float(self.inertia),
            "inertia_history": [float(x) for x in self.inertia_history],
            "iterations": self.n_iter,
            "label_tie": self.label_tie,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _level_order(levels, medoid_names):
    order = sorted(range(len(levels)), key=lambda c: (levels[c], medoid_names[c]))
    ranked = [levels[c] for c in order]
    tie = any(a == b for a, b in zip(ranked, ranked[1:]))
    return order, tie


def _label(levels, medoid_names):
    order, tie = _level_order(levels, medoid_names)
    if len(levels) == 3:
        names = LEVEL_NAMES
    else:
        names = [f"level{r}" for r in range(len(levels))]
    return {c: names[r] for r, c in enumerate(order)}, tie


def kmeans_dtw(
    series_set: Sequence,
    k: int = DEFAULT_K,
    max_iter: int = DEFAULT_MAX_ITER,
    cfg: DtwConfig = DtwConfig(),
    names: Optional[Sequence[str]] = None,
    dist: Optional[np.ndarray] = None,
    workers: int = 1,
    seeding: str = "maximin",
) -> ClusterResult:
    """Lloyd-style k-medoids: assign to nearest medoid, then re-pick each medoid.

    A medoid always stays in its own cluster, so no cluster can empty out.
    Stops when assignments and medoids are both unchanged, or after
    ``max_iter`` assignment passes.
    """
    n = len(series_set)
    if n < k:
        raise TooFewSeries(f"{n} series for {k} clusters")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    names = _names(series_set, names)
    if dist is None:
        dist = distance_matrix(series_set, cfg, workers)

    medoids = seed_from_matrix(dist, k, seeding)
    assign = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_assign = np.argmin(dist[:, medoids], axis=1)
        new_assign[medoids] = np.arange(k)
        history.append(float(dist[np.arange(n), np.asarray(medoids)[new_assign]].sum()))

        new_medoids = []
        for c in range(k):
            members = np.flatnonzero(new_assign == c)
            cost = dist[np.ix_(members, members)].sum(axis=1)
            best = cost.min()
            current = medoids[c]
            if cost[members == current][0] == best:
                new_medoids.append(current)
            else:
                new_medoids.append(int(members[np.argmax(cost == best)]))

        converged = assign is not None and np.array_equal(new_assign, assign) and new_medoids == medoids
        assign, medoids = new_assign, new_medoids
        if converged:
            break

    assign = np.argmin(dist[:, medoids], axis=1)
    assign[medoids] = np.arange(k)
    inertia = float(dist[np.arange(n), np.asarray(medoids)[assign]].sum())

    means = [float(np.mean(_values(s))) for s in series_set]
    levels = tuple(float(np.mean([means[i] for i in np.flatnonzero(assign == c)])) for c in range(k))
    labels, tie = _label(levels, [names[m] for m in medoids])
    return ClusterResult(
        k, names, tuple(int(a) for a in assign), tuple(int(m) for m in medoids),
        inertia, n_iter, tuple(history), levels, labels, tie,
    )


def pick_mid_cluster(result: ClusterResult, series_set) -> list[str]:
    """Tickers of the middle-volatility cluster, highest series mean first."""
    if result.k != 3:
        raise NotThreeClusters(f"mid cluster needs K=3, got K={result.k}")
    means = {t: float(np.mean(_values(s))) for t, s in zip(result.tickers, series_set)}
    levels = [float(np.mean([means[t] for t in result.members(c)])) for c in range(3)]
    order, _ = _level_order(levels, [result.tickers[m] for m in result.medoids])
    mid = result.members(order[1])
    return sorted(mid, key=lambda t: (-means[t], t))
