"""KNN distance anomaly scoring and clean-window selection.

Each observation is a scalar point; the distance between two observations
is the absolute difference of their values.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import AllFlagged, DegenerateScores, SeriesTooShort

DEFAULT_K = 5
THRESHOLD_SIGMAS = 3.0


def knn_scores(values, k: int = DEFAULT_K) -> np.ndarray:
    """Mean distance from each point to its ``k`` nearest other points."""
    x = np.asarray(values, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if x.ndim != 1 or len(x) <= k:
        raise SeriesTooShort(f"need more than k={k} values, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    # the k+1 nearest include one zero-distance hit for the point itself
    dist, _ = cKDTree(x[:, None]).query(x[:, None], k=k + 1)
    return np.sort(dist, axis=1)[:, 1:].mean(axis=1)


@dataclass(frozen=True, eq=False)
class AnomalyReport:
    dates: np.ndarray
    scores: np.ndarray
    threshold: float
    flags: np.ndarray  # boolean mask over dates
    status: str = "ok"

    @property
    def flagged_dates(self) -> np.ndarray:
        return self.dates[self.flags]


def detect(scores, dates=None) -> AnomalyReport:
    """Flag scores strictly above mean + 3 standard deviations (population)."""
    s = np.asarray(scores, dtype=np.float64)
    if len(s) < 2:
        raise SeriesTooShort("detect needs at least 2 scores")
    if dates is None:
        dates = np.arange(len(s))
    mu = float(np.mean(s))
    sigma = float(np.std(s))
    threshold = mu + THRESHOLD_SIGMAS * sigma
    if sigma == 0.0:
        warnings.warn("anomaly scores have zero spread; nothing flagged", DegenerateScores, stacklevel=2)
        return AnomalyReport(np.asarray(dates), s, threshold, np.zeros(len(s), dtype=bool), "degenerate")
    return AnomalyReport(np.asarray(dates), s, threshold, s > threshold)


def clean_window(flags, dates):
    """Longest flag-free suffix of ``dates``: (date after the last flag, last date).

    ``flags`` is either a boolean mask aligned with ``dates`` or an
    :class:`AnomalyReport` on the same calendar.
    """
    if isinstance(flags, AnomalyReport):
        flags = flags.flags
    flags = np.asarray(flags, dtype=bool)
    dates = np.asarray(dates)
    if len(flags) != len(dates):
        raise ValueError("flags and dates differ in length")
    if len(dates) == 0:
        raise AllFlagged("empty calendar")
    hits = np.flatnonzero(flags)
    if hits.size == 0:
        return dates[0], dates[-1]
    start = hits[-1] + 1
    if start >= len(dates):
        raise AllFlagged(f"last date {dates[-1]} is flagged; no clean suffix")
    return dates[start], dates[-1]


def union_flags(reports, calendar) -> np.ndarray:
    """Combine several reports onto ``calendar``: a date is flagged if any report flags it."""
    calendar = np.asarray(calendar)
    out = np.zeros(len(calendar), dtype=bool)
    for r in reports:
        out |= np.isin(calendar, r.flagged_dates)
    return out


def write_report_csv(report: AnomalyReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "score", "flag"))
        for d, s, f in zip(report.dates, report.scores, report.flags):
            w.writerow((str(d), repr(float(s)), int(f)))
