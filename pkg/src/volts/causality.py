"""Pairwise Granger-causality F-tests and best-lag predictor graphs.

For a lag ``p`` the restricted model regresses y_t on an intercept and
y_{t-1..t-p}; the unrestricted model adds x_{t-1..t-p}. The statistic is
the ssr-based F test with (p, n_obs - 2p - 1) degrees of freedom.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateVariance, NoSignificantEdges, SeriesTooShort, SingularDesign, VoltsError
from .fdist import f_sf

DEFAULT_THRESHOLD = 0.025
TEXT_ALPHA = 0.05
DEFAULT_LAGS = range(2, 31)

_EPS = np.finfo(np.float64).eps


def lag_matrix(v: np.ndarray, p: int) -> np.ndarray:
    """Columns v_{t-1}, ..., v_{t-p} for rows t = p .. n-1."""
    n = len(v)
    return np.column_stack([v[p - i: n - i] for i in range(1, p + 1)])


def _check_lengths(n: int, p: int):
    if p < 1:
        raise ValueError("lag must be >= 1")
    # the unrestricted model needs at least one residual degree of freedom
    if n - p - (2 * p + 1) < 1:
        raise SeriesTooShort(f"{n} observations too few for lag {p} (need {3 * p + 2})")


class ArFit(NamedTuple):
    coefficients: np.ndarray  # intercept, y lags 1..p, then x lags 1..p
    rss: float
    n_obs: int


def fit_ar(y, p: int, x=None) -> ArFit:
    """OLS autoregression of y on its own ``p`` lags (plus x's lags if given).

    Regressors with zero variance are absorbed by the intercept and get a
    zero coefficient; any other collinearity raises SingularDesign.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    _check_lengths(n, p)
    cols = [np.ones(n - p), lag_matrix(y, p)]
    if x is not None:
        x = np.asarray(x, dtype=np.float64)
        if len(x) != n:
            raise ValueError("x and y must be aligned")
        cols.append(lag_matrix(x, p))
    design = np.column_stack(cols)
    target = y[p:]

    keep = np.ones(design.shape[1], dtype=bool)
    keep[1:] = np.ptp(design[:, 1:], axis=0) > 0
    sub = design[:, keep]
    s = np.linalg.svd(sub, compute_uv=False)
    if s[-1] <= s[0] * max(sub.shape) * _EPS:
        cond = s[0] / s[-1] if s[-1] > 0 else float("inf")
        raise SingularDesign("collinear regressors in AR design", cond)
    beta, *_ = np.linalg.lstsq(sub, target, rcond=None)
    coef = np.zeros(design.shape[1])
    coef[keep] = beta
    resid = target - sub @ beta
    return ArFit(coef, float(resid @ resid), n - p)


def _basis(a: np.ndarray, scale: float) -> np.ndarray:
    """Orthonormal basis of the numerically significant column space of ``a``."""
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    return u[:, s > scale * max(a.shape) * _EPS]


class GrangerResult(NamedTuple):
    f_stat: float
    p_value: float
    rss_restricted: float
    rss_unrestricted: float
    df_num: int
    df_den: int
    n_obs: int


def granger_test(x, y, p: int) -> GrangerResult:
    """Test H0 "x does not Granger-cause y" at lag ``p``.

    The unrestricted fit is obtained by projecting the restricted residuals
    onto the part of x's lags orthogonal to the restricted design, so the
    nested ordering RSS_u <= RSS_r holds exactly in floating point.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("x and y must be aligned")
    n = len(y)
    _check_lengths(n, p)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("series must be finite")
    if np.ptp(y) == 0:
        raise DegenerateVariance("target series is constant; test undefined")

    target = y[p:]
    n_obs = len(target)
    restricted = np.column_stack([np.ones(n_obs), lag_matrix(y, p)])
    ur = _basis(restricted, np.linalg.norm(restricted, 2))
    resid_r = target - ur @ (ur.T @ target)
    rss_r = float(resid_r @ resid_r)

    xl = lag_matrix(x, p)
    m = xl - ur @ (ur.T @ xl)
    m -= ur @ (ur.T @ m)
    um = _basis(m, max(np.linalg.norm(xl, 2), np.linalg.norm(restricted, 2)))
    coef = um.T @ resid_r
    explained = float(coef @ coef)
    resid_u = resid_r - um @ coef
    rss_u = min(float(resid_u @ resid_u), rss_r)

    df_num = p
    df_den = n_obs - 2 * p - 1
    # a restricted fit exact to rounding leaves nothing for x to explain
    exact = rss_r <= (n_obs * _EPS) ** 2 * float(target @ target)
    if exact or explained == 0.0:
        f_stat, p_value = 0.0, 1.0
    elif rss_u == 0.0:
        f_stat, p_value = float("inf"), 0.0
    else:
        f_stat = (explained / df_num) / (rss_u / df_den)
        p_value = f_sf(f_stat, df_num, df_den)
    return GrangerResult(f_stat, p_value, rss_r, rss_u, df_num, df_den, n_obs)


def granger_f(x, y, p: int) -> tuple[float, float]:
    """(F statistic, p-value) for x Granger-causing y at lag ``p``."""
    r = granger_test(x, y, p)
    return r.f_stat, r.p_value


@dataclass(frozen=True, order=True)
class GrangerEdge:
    source: str
    target: str
    lag: int
    f_stat: float = field(compare=False)
    p_value: float = field(compare=False)

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError("edge source and target must differ")

    @property
    def name(self) -> str:
        return f"{self.source}->{self.target}"

    def to_dict(self) -> dict:
        return {"source": self.source, "target": self.target, "lag": self.lag,
                "f_stat": self.f_stat, "p_value": self.p_value}


class PairScan(NamedTuple):
    edges: list
    skipped: list  # (source, target, reason)
    tested: int


def pair_scan(series: Mapping[str, Sequence[float]], p: int,
              threshold: float = DEFAULT_THRESHOLD, workers: int = 1) -> PairScan:
    """Test every ordered pair and keep edges with p-value below ``threshold``.

    A pair whose test fails is recorded in ``skipped`` and the scan goes on.
    """
    names = sorted(series)
    pairs = [(a, b) for a in names for b in names if a != b]

    def run(pair):
        a, b = pair
        try:
            return granger_test(series[a], series[b], p)
        except VoltsError as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(pair) for pair in pairs]

    edges, skipped = [], []
    for (a, b), r in zip(pairs, results):
        if isinstance(r, Exception):
            skipped.append((a, b, f"{type(r).__name__}: {r}"))
        elif r.p_value < threshold:
            edges.append(GrangerEdge(a, b, p, r.f_stat, r.p_value))
    return PairScan(edges, skipped, len(pairs))


def _adjacency(edges):
    adj = {}
    for e in edges:
        adj.setdefault(e.source, set()).add(e.target)
    return adj


def _reaches(adj, start, goal):
    seen, stack = {start}, [start]
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def topological_order(edges) -> Optional[list]:
    """Kahn ordering of the edge graph's nodes, or None if it has a cycle."""
    nodes = sorted({e.source for e in edges} | {e.target for e in edges})
    indeg = {v: 0 for v in nodes}
    adj = _adjacency(edges)
    for e in edges:
        indeg[e.target] += 1
    ready = [v for v in nodes if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in sorted(adj.get(v, ())):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return order if len(order) == len(nodes) else None


def is_acyclic(edges) -> bool:
    return topological_order(edges) is not None


def prune_to_dag(edges: Iterable[GrangerEdge]):
    """Drop the weakest (highest p-value) edge on any cycle until none remain.

    Returns ``(kept, removed)``, both sorted by (source, target).
    """
    kept = sorted(edges)
    removed = []
    while True:
        adj = _adjacency(kept)
        on_cycle = [e for e in kept if _reaches(adj, e.target, e.source)]
        if not on_cycle:
            break
        worst = max(on_cycle, key=lambda e: (e.p_value, e.source, e.target))
        kept.remove(worst)
        removed.append(worst)
    return kept, sorted(removed)


@dataclass(frozen=True, eq=False)
class CausalGraph:
    lag: int
    edges: tuple
    removed: tuple = ()
    candidates: dict = field(default_factory=dict)  # lag -> summary of that lag's scan
    skipped: tuple = ()

    @property
    def nodes(self) -> tuple:
        return tuple(sorted({e.source for e in self.edges} | {e.target for e in self.edges}))

    @property
    def is_acyclic(self) -> bool:
        return is_acyclic(self.edges)

    def to_dict(self) -> dict:
        return {
            "lag": self.lag,
            "nodes": list(self.nodes),
            "is_acyclic": self.is_acyclic,
            "edges": [e.to_dict() for e in self.edges],
            "removed": [e.to_dict() for e in self.removed],
            "candidates": {str(k): v for k, v in sorted(self.candidates.items())},
            "skipped": [list(s) for s in self.skipped],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_dot(self) -> str:
        lines = ["digraph granger {"]
        for v in self.nodes:
            lines.append(f'  "{v}";')
        for e in self.edges:
            lines.append(f'  "{e.source}" -> "{e.target}" [label="lag={e.lag} p={e.p_value:.3g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CausalGraph":
        edge = lambda e: GrangerEdge(e["source"], e["target"], e["lag"], e["f_stat"], e["p_value"])
        return cls(
            d["lag"], tuple(edge(e) for e in d["edges"]), tuple(edge(e) for e in d["removed"]),
            {int(k): v for k, v in d.get("candidates", {}).items()},
            tuple(tuple(s) for s in d.get("skipped", [])),
        )


def lag_sweep(series: Mapping[str, Sequence[float]], lags: Iterable[int] = DEFAULT_LAGS,
              threshold: float = DEFAULT_THRESHOLD, workers: int = 1) -> CausalGraph:
    """Scan every lag and keep the graph that best covers the tickers.

    Lags are ranked by the node count of the cycle-pruned graph, then by its
    edge count, then by preferring the smaller lag.
    """
    best = None
    candidates = {}
    for lag in sorted(lags):
        scan = pair_scan(series, lag, threshold, workers)
        kept, removed = prune_to_dag(scan.edges)
        nodes = {e.source for e in kept} | {e.target for e in kept}
        candidates[lag] = {"edges": len(scan.edges), "dag_edges": len(kept),
                           "dag_nodes": len(nodes), "skipped": len(scan.skipped)}
        if not kept:
            continue
        score = (len(nodes), len(kept), -lag)
        if best is None or score > best[0]:
            best = (score, lag, kept, removed, scan.skipped)
    if best is None:
        raise NoSignificantEdges(f"no significant edge at any lag in {sorted(candidates)}")
    _, lag, kept, removed, skipped = best
    return CausalGraph(lag, tuple(kept), tuple(removed), candidates, tuple(skipped))
