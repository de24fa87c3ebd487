"""Temporal assessment of bus service from detected itineraries.

Availability is measured per stop as the number of passages inside a
sliding W-minute window shifted by one minute across the service span
(05:00 to 23:00 by default). Series feed category aggregates, daily
averages, boxplot outlier detection, and pairwise Pearson correlations
restricted to periods of the day.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .detection import DetectedItinerary
from .model import BusStop, StopType

log = logging.getLogger(__name__)

DEFAULT_SPAN_MINUTES = (300, 1380)  # 05:00 .. 23:00
DEFAULT_WINDOW_MINUTES = 10
SYNC_WINDOW_SET = (10, 15, 20, 25, 30, 35, 40, 45)


@dataclass(frozen=True)
class Period:
    name: str
    start_minute: int
    end_minute: int


DEFAULT_PERIODS = (
    Period("morning", 360, 540),  # 06:00-09:00
    Period("midday", 660, 840),  # 11:00-14:00
    Period("evening", 1020, 1200),  # 17:00-20:00
)


@dataclass(frozen=True)
class Passage:
    """One bus passage event at a stop (observed or interpolated time)."""

    time_s: float
    vehicle_id: str
    line_code: str


@dataclass
class AvailabilitySeries:
    """Per-minute sliding-window passage counts for one stop or cluster."""

    key: str
    window_minutes: int
    counts: np.ndarray
    span: tuple[int, int] = DEFAULT_SPAN_MINUTES
    day: date | None = None

    @property
    def start_minutes(self) -> np.ndarray:
        return np.arange(self.span[0], self.span[1] - self.window_minutes + 1)


def collect_passages(detections: Iterable[DetectedItinerary]) -> dict[str, list[Passage]]:
    """Index passage events by stop, time-sorted, from detected trips."""
    passages: dict[str, list[Passage]] = {}
    for det in detections:
        for entry in det.entries:
            passages.setdefault(entry.stop_id, []).append(
                Passage(entry.time_s, det.vehicle_id, det.line_code)
            )
    for events in passages.values():
        events.sort(key=lambda p: p.time_s)
    return passages


def merge_terminals(
    passages: Mapping[str, list[Passage]], stops: Mapping[str, BusStop]
) -> tuple[dict[str, list[Passage]], dict[str, StopType]]:
    """Fold all stops of one terminal (same name) into a single pseudo-stop.

    Returns the merged passage index plus a category map for every key.
    Non-terminal stops pass through unchanged.
    """
    merged: dict[str, list[Passage]] = {}
    categories: dict[str, StopType] = {}
    for stop_id, events in passages.items():
        stop = stops.get(stop_id)
        if stop is not None and stop.stop_type is StopType.TERMINAL:
            key = f"terminal:{stop.name}"
            merged.setdefault(key, []).extend(events)
            categories[key] = StopType.TERMINAL
        else:
            merged.setdefault(stop_id, []).extend(events)
            categories[stop_id] = stop.stop_type if stop is not None else StopType.STREET_STOP
    for events in merged.values():
        events.sort(key=lambda p: p.time_s)
    return merged, categories


def moving_window_counts(
    times: Sequence[float],
    window_minutes: int = DEFAULT_WINDOW_MINUTES,
    span: tuple[int, int] = DEFAULT_SPAN_MINUTES,
) -> np.ndarray:
    """Count passages in each half-open window [m, m + W) of the span.

    ``times`` are seconds of day; one count per window start minute from
    span[0] through span[1] - W inclusive.
    """
    if window_minutes < 1:
        raise ValueError("window must be at least one minute")
    start, end = span
    starts_s = np.arange(start, end - window_minutes + 1) * 60
    sorted_times = np.sort(np.asarray(list(times), dtype=float))
    lo = np.searchsorted(sorted_times, starts_s, side="left")
    hi = np.searchsorted(sorted_times, starts_s + window_minutes * 60, side="left")
    return (hi - lo).astype(np.int64)


def build_availability(
    passages: Mapping[str, list[Passage]],
    window_minutes: int = DEFAULT_WINDOW_MINUTES,
    span: tuple[int, int] = DEFAULT_SPAN_MINUTES,
    day: date | None = None,
) -> dict[str, AvailabilitySeries]:
    return {
        key: AvailabilitySeries(
            key=key,
            window_minutes=window_minutes,
            counts=moving_window_counts([p.time_s for p in events], window_minutes, span),
            span=span,
            day=day,
        )
        for key, events in passages.items()
    }


def aggregate_by_category(
    series: Mapping[str, AvailabilitySeries], categories: Mapping[str, StopType]
) -> dict[StopType, np.ndarray]:
    """Element-wise mean series per stop category; empty categories omitted."""
    shapes = {(s.window_minutes, s.span) for s in series.values()}
    if len(shapes) > 1:
        raise ValueError("all series must share window size and span")
    grouped: dict[StopType, list[np.ndarray]] = {}
    for key, s in series.items():
        grouped.setdefault(categories[key], []).append(s.counts)
    means: dict[StopType, np.ndarray] = {}
    for category in StopType:
        vectors = grouped.get(category)
        if not vectors:
            log.warning("category %s has no stops with passages; omitted", category.value)
            continue
        means[category] = np.mean(np.stack(vectors), axis=0)
    return means


def daily_average(series: AvailabilitySeries) -> float:
    """Mean window count over the whole span."""
    return float(np.mean(series.counts))


def find_outlier_stops(
    averages: Mapping[str, float],
    categories: Mapping[str, StopType],
    min_category_size: int = 4,
) -> set[str]:
    """Upper boxplot outliers (value > Q3 + 1.5 IQR) per category.

    Quantiles use linear interpolation. Terminals never appear in the
    result; they are physically integrated already. Categories with fewer
    than ``min_category_size`` stops are skipped with a warning.
    """
    by_category: dict[StopType, list[str]] = {}
    for key in averages:
        by_category.setdefault(categories[key], []).append(key)

    outliers: set[str] = set()
    for category, keys in by_category.items():
        if len(keys) < min_category_size:
            log.warning(
                "category %s has only %d stops; outlier rule skipped",
                category.value,
                len(keys),
            )
            continue
        values = np.array([averages[k] for k in keys])
        q1, q3 = np.quantile(values, [0.25, 0.75], method="linear")
        fence = q3 + 1.5 * (q3 - q1)
        for key, value in zip(keys, values):
            if value > fence:
                outliers.add(key)

    return {k for k in outliers if categories[k] is not StopType.TERMINAL}


# ── Correlation ─────────────────────────────────────────────────────────


def restrict_to_period(series: AvailabilitySeries, period: Period | None) -> np.ndarray:
    """Counts of the windows whose start minute lies inside the period."""
    if period is None:
        return series.counts
    starts = series.start_minutes
    mask = (starts >= period.start_minute) & (starts < period.end_minute)
    return series.counts[mask]


def pearson(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Sample Pearson coefficient, or None when either input has no variance."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"series length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx == 0.0 or syy == 0.0:
        return None
    return float(np.dot(xc, yc) / np.sqrt(sxx * syy))


def pearson_p_value(r: float, n: int) -> float:
    """Two-sided p-value for a sample Pearson r via the t transform."""
    if n < 3:
        return float("nan")
    if abs(r) >= 1.0:
        return 0.0
    t = r * np.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * _scipy_stats.t.sf(abs(t), df=n - 2))


@dataclass
class CorrelationMatrix:
    """Symmetric r-value matrix; NaN marks undefined pairs, diagonal is 1."""

    keys: list[str]
    values: np.ndarray
    period: str | None = None

    def entry(self, a: str, b: str) -> float:
        return float(self.values[self.keys.index(a), self.keys.index(b)])


def correlation_matrix(
    series: Mapping[str, AvailabilitySeries],
    keys: Sequence[str] | None = None,
    period: Period | None = None,
) -> CorrelationMatrix:
    ordered = list(keys) if keys is not None else sorted(series)
    restricted = [restrict_to_period(series[k], period) for k in ordered]
    n = len(ordered)
    values = np.full((n, n), np.nan)
    np.fill_diagonal(values, 1.0)
    for i in range(n):
        for j in range(i + 1, n):
            r = pearson(restricted[i], restricted[j])
            if r is not None:
                values[i, j] = values[j, i] = r
    return CorrelationMatrix(keys=ordered, values=values, period=period.name if period else None)


def cluster_sync_profile(
    member_keys: Sequence[str],
    passages: Mapping[str, list[Passage]],
    periods: Sequence[Period] = DEFAULT_PERIODS,
    windows: Sequence[int] = SYNC_WINDOW_SET,
    span: tuple[int, int] = DEFAULT_SPAN_MINUTES,
) -> dict[tuple[str, int], float | None]:
    """Mean pairwise correlation of member-stop series per (period, window).

    Pairs whose correlation is undefined are left out of the mean; a cell
    with no defined pair at all is None. Requires at least two members
    with passage data.
    """
    members = [k for k in member_keys if k in passages]
    if len(members) < 2:
        raise ValueError("synchronization profile needs at least 2 member stops with passages")

    profile: dict[tuple[str, int], float | None] = {}
    for window in windows:
        series = {
            k: AvailabilitySeries(
                key=k,
                window_minutes=window,
                counts=moving_window_counts([p.time_s for p in passages[k]], window, span),
                span=span,
            )
            for k in members
        }
        for period in periods:
            restricted = {k: restrict_to_period(series[k], period) for k in members}
            rs = []
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    r = pearson(restricted[members[i]], restricted[members[j]])
                    if r is not None:
                        rs.append(r)
            profile[(period.name, window)] = float(np.mean(rs)) if rs else None
    return profile


def mean_sync_across_clusters(
    profiles: Sequence[Mapping[tuple[str, int], float | None]],
) -> dict[tuple[str, int], float | None]:
    """Average defined profile cells over clusters."""
    combined: dict[tuple[str, int], float | None] = {}
    cells = {cell for profile in profiles for cell in profile}
    for cell in sorted(cells):
        values = [p[cell] for p in profiles if p.get(cell) is not None]
        combined[cell] = float(np.mean(values)) if values else None
    return combined
