"""Nearest-stop map matching of GPS fixes against one itinerary.

Every fix is labeled with its nearest itinerary stop by Haversine distance.
Consecutive fixes sharing a label form a run; a run whose closest approach
is within the acceptance radius yields exactly one passage mark, stamped at
the run's minimum-distance fix (earliest such fix on ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geo import haversine_matrix
from .model import BusStop, GpsFix, ItineraryDef

DEFAULT_ACCEPTANCE_RADIUS_M = 100.0

# Fix-to-stop distance rows are computed in chunks to bound memory on
# large trajectories.
_CHUNK = 131_072


@dataclass(frozen=True, slots=True)
class StopMark:
    """A map-matched passage event at one stop."""

    stop_id: str
    seq_hint: int  # smallest itinerary position served by this stop
    time_s: int
    distance_m: float
    vehicle_id: str


def match_fixes(
    fixes: list[GpsFix],
    itinerary: ItineraryDef,
    stops: dict[str, BusStop],
    acceptance_radius_m: float = DEFAULT_ACCEPTANCE_RADIUS_M,
) -> list[StopMark]:
    """Produce passage marks for a time-ordered fix list against one itinerary.

    Ties between equidistant stops break toward the smaller itinerary
    position. Returns marks in fix-time order.
    """
    if not fixes:
        return []

    # Distinct stops in first-appearance order, so argmin tie-breaking
    # lands on the smaller itinerary position.
    first_position: dict[str, int] = {}
    for position, stop_id in enumerate(itinerary.stop_ids, start=1):
        first_position.setdefault(stop_id, position)
    stop_order = list(first_position)
    try:
        stop_objs = [stops[stop_id] for stop_id in stop_order]
    except KeyError as exc:
        raise ValueError(f"itinerary stop not resolvable: {exc.args[0]}") from None

    stop_lats = np.array([s.lat for s in stop_objs])
    stop_lons = np.array([s.lon for s in stop_objs])
    fix_lats = np.fromiter((f.lat for f in fixes), dtype=float, count=len(fixes))
    fix_lons = np.fromiter((f.lon for f in fixes), dtype=float, count=len(fixes))
    fix_times = np.fromiter((f.time_s for f in fixes), dtype=np.int64, count=len(fixes))
    if np.any(np.diff(fix_times) < 0):
        raise ValueError("fixes must be sorted ascending by time")

    n = len(fixes)
    labels = np.empty(n, dtype=np.int64)
    nearest_m = np.empty(n, dtype=float)
    for start in range(0, n, _CHUNK):
        end = min(start + _CHUNK, n)
        dists = haversine_matrix(fix_lats[start:end], fix_lons[start:end], stop_lats, stop_lons)
        chunk_labels = np.argmin(dists, axis=1)
        labels[start:end] = chunk_labels
        nearest_m[start:end] = dists[np.arange(end - start), chunk_labels]

    run_starts = np.concatenate(([0], np.flatnonzero(np.diff(labels) != 0) + 1))
    run_ends = np.concatenate((run_starts[1:], [n]))

    marks: list[StopMark] = []
    for run_start, run_end in zip(run_starts, run_ends):
        best = run_start + int(np.argmin(nearest_m[run_start:run_end]))
        if nearest_m[best] > acceptance_radius_m:
            continue
        stop_id = stop_order[labels[run_start]]
        marks.append(
            StopMark(
                stop_id=stop_id,
                seq_hint=first_position[stop_id],
                time_s=int(fix_times[best]),
                distance_m=float(nearest_m[best]),
                vehicle_id=fixes[best].vehicle_id,
            )
        )
    return marks


def sequence_marks(marks: list[StopMark]) -> list[StopMark]:
    """Stable ascending sort of marks by passage time."""
    return sorted(marks, key=lambda m: m.time_s)
