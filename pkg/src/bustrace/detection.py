"""Reconstruction of complete timed itineraries from passage marks.

Given the time-sorted marks of one trip segment, the detector walks the
itinerary positions in order and accepts, for each position, the first
mark at that stop whose time is strictly later than the last accepted
time. Marks that would break time monotonicity (typically produced where
the route passes close to an out-of-sequence stop) are dropped. Interior
positions left without a mark get their times estimated by uniform
subdivision of the enclosing observed interval; trips missing a mark at
the first or last position are rejected instead of extrapolated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .matching import StopMark
from .model import ItineraryDef, LineCategory

DEFAULT_IDLE_GAP_S = 1800
DEFAULT_WRAP_FRACTION = 0.5


class Provenance(enum.Enum):
    OBSERVED = "OBSERVED"
    INTERPOLATED = "INTERPOLATED"


# ── Time-of-day helpers ─────────────────────────────────────────────────


def parse_time_of_day(text: str) -> int:
    """'HH:MM:SS' -> seconds of day."""
    h, m, s = text.split(":")
    return int(h) * 3600 + int(m) * 60 + int(s)


def round_to_second(value: float) -> int:
    """Round seconds to an integer; exact .5 ties go to the odd second."""
    base = math.floor(value)
    frac = value - base
    if frac > 0.5:
        return base + 1
    if frac < 0.5:
        return base
    return base if base % 2 == 1 else base + 1


def format_time_of_day(value: float) -> str:
    """Seconds of day -> 'HH:MM:SS', rounding fractional seconds."""
    total = round_to_second(float(value))
    h, rem = divmod(total, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


# ── Result types ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TimedStop:
    stop_id: str
    position: int  # 1-based itinerary position
    time_s: float  # observed entries carry the integral mark time
    provenance: Provenance


@dataclass(frozen=True)
class DetectedItinerary:
    """One reconstructed trip: every itinerary position with a passage time."""

    line_code: str
    vehicle_id: str
    direction: str
    entries: tuple[TimedStop, ...]
    day: date | None = None

    def __post_init__(self):
        positions = [e.position for e in self.entries]
        if positions != list(range(1, len(self.entries) + 1)):
            raise ValueError("entries must cover positions 1..n exactly once, in order")
        times = [e.time_s for e in self.entries]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("entry times must be strictly increasing")
        if self.entries[0].provenance is not Provenance.OBSERVED:
            raise ValueError("first entry must be observed")
        if self.entries[-1].provenance is not Provenance.OBSERVED:
            raise ValueError("last entry must be observed")

    @property
    def observed_count(self) -> int:
        return sum(1 for e in self.entries if e.provenance is Provenance.OBSERVED)

    @property
    def interpolated_count(self) -> int:
        return len(self.entries) - self.observed_count

    def is_fully_observed(self) -> bool:
        return self.interpolated_count == 0


@dataclass
class DetectionResult:
    """Outcome of running detection on one trip segment."""

    itinerary: DetectedItinerary | None
    rejection: str | None
    dropped_marks: list[StopMark]
    segment_size: int
    borrowed_marks: int = 0  # boundary marks already tallied with the previous trip

    @property
    def accepted(self) -> bool:
        return self.itinerary is not None

    @property
    def own_marks(self) -> int:
        return self.segment_size - self.borrowed_marks


# ── Interpolation ───────────────────────────────────────────────────────


def interpolate_gap(t_start: float, t_end: float, w: int) -> list[float]:
    """Estimate times for the w-1 stops between two observed anchors.

    The anchors are w itinerary intervals apart; estimates accumulate a
    uniform increment of (t_end - t_start) / w from the first anchor and
    lie strictly inside the open interval.
    """
    if w < 2:
        raise ValueError(f"gap width must span at least 2 intervals, got {w}")
    delta = t_end - t_start
    if delta <= 0:
        raise ValueError(f"anchors out of order: {t_start} .. {t_end}")
    step = delta / w
    estimates: list[float] = []
    current = float(t_start)
    for _ in range(w - 1):
        current += step
        estimates.append(current)
    if estimates[-1] >= t_end:
        raise ValueError("interpolation overflow past the closing anchor")
    return estimates


# ── Trip segmentation ───────────────────────────────────────────────────


@dataclass
class Segmentation:
    segments: list[list[StopMark]]
    # per segment, how many leading marks were carried over from the
    # previous trip (a circular boundary passage serves both trips but
    # must be tallied once)
    borrowed: list[int]
    discarded: list[list[StopMark]]  # fewer than 2 distinct stops

    @property
    def discarded_marks(self) -> int:
        return sum(len(s) for s in self.discarded)


def segment_trips(
    marks: list[StopMark],
    itinerary: ItineraryDef,
    idle_gap_s: int = DEFAULT_IDLE_GAP_S,
    wrap_fraction: float = DEFAULT_WRAP_FRACTION,
) -> Segmentation:
    """Split time-ordered marks into candidate trip segments.

    A segment closes when the matched itinerary position falls back by more
    than ``wrap_fraction`` of the itinerary length relative to the running
    maximum (sequence wrap), or after an idle gap with no marks. Isolated
    out-of-sequence marks cannot force a split in either direction: a mark
    jumping forward past the threshold does not advance the running maximum
    until a second mark lands near it, and a fallback only commits the wrap
    when the following mark continues forward from the restart position
    (unconfirmed strays stay put for the detector's monotone rule to drop).
    On a wrap of a circular itinerary the boundary mark at the shared
    terminal is carried into the new segment, since one passage both closes
    a loop and opens the next.
    """
    n = len(itinerary)
    threshold = wrap_fraction * n
    positions_of: dict[str, list[int]] = {}
    for position, stop_id in enumerate(itinerary.stop_ids, start=1):
        positions_of.setdefault(stop_id, []).append(position)
    first_stop = itinerary.stop_ids[0]

    for mark in marks:
        if mark.stop_id not in positions_of:
            raise ValueError(f"mark at stop {mark.stop_id} does not belong to the itinerary")

    result = Segmentation(segments=[], borrowed=[], discarded=[])
    current: list[StopMark] = []
    current_borrowed = 0
    p_max = 0
    pending: int | None = None
    prev_time = 0

    def close():
        if not current:
            return
        if len({m.stop_id for m in current}) >= 2:
            result.segments.append(list(current))
            result.borrowed.append(current_borrowed)
        else:
            result.discarded.append(list(current))

    for index, mark in enumerate(marks):
        matches = positions_of[mark.stop_id]

        if current and mark.time_s - prev_time > idle_gap_s:
            close()
            current = []
            current_borrowed = 0

        if not current:
            current = [mark]
            p_max = min(matches)
            pending = None
            prev_time = mark.time_s
            continue

        in_window = [p for p in matches if p_max - p <= threshold]
        if in_window:
            p_eff = min(in_window)
            if p_eff - p_max > threshold:
                if pending is not None and p_eff >= pending:
                    p_max = p_eff
                    pending = None
                else:
                    pending = p_eff
            else:
                p_max = max(p_max, p_eff)
                pending = None
            current.append(mark)
        else:
            restart = min(matches)
            confirmed = False
            if index + 1 < len(marks):
                following = positions_of[marks[index + 1].stop_id]
                confirmed = any(0 <= p - restart <= threshold for p in following)
            if confirmed:
                boundary = None
                if itinerary.circular:
                    # One terminal passage both closes a loop and opens the
                    # next; reuse the latest terminal mark unless stale.
                    recent = [m for m in current if m.stop_id == first_stop]
                    if recent and mark.time_s - recent[-1].time_s <= idle_gap_s:
                        boundary = recent[-1]
                close()
                current = [boundary] if boundary is not None else []
                current_borrowed = 1 if boundary is not None else 0
                current.append(mark)
                p_max = restart
                pending = None
            else:
                current.append(mark)
        prev_time = mark.time_s

    close()
    return result


# ── Detection ───────────────────────────────────────────────────────────

REJECT_NO_FIRST = "no mark for first stop"
REJECT_NO_LAST = "no mark for last stop"
REJECT_TOO_FEW = "fewer than 2 observed marks"


def detect(
    itinerary: ItineraryDef,
    segment: list[StopMark],
    day: date | None = None,
    borrowed_marks: int = 0,
) -> DetectionResult:
    """Associate one segment's marks with the itinerary.

    Returns an accepted DetectedItinerary with interpolated interior gaps,
    or a rejection when the first or last position has no usable mark.
    Marks excluded by the monotone-time rule are reported as dropped.
    ``borrowed_marks`` (from the segmentation) flows through to the result
    so reporting can avoid double-counting shared boundary passages.
    """
    stop_ids = itinerary.stop_ids
    n = len(stop_ids)

    accepted: list[StopMark | None] = [None] * n
    accepted_idx: set[int] = set()
    last_time: int | None = None
    for pos_idx, stop_id in enumerate(stop_ids):
        for mark_idx, mark in enumerate(segment):
            if mark.stop_id == stop_id and (last_time is None or mark.time_s > last_time):
                accepted[pos_idx] = mark
                accepted_idx.add(mark_idx)
                last_time = mark.time_s
                break

    dropped = [m for i, m in enumerate(segment) if i not in accepted_idx]
    vehicle_id = segment[0].vehicle_id if segment else ""

    def reject(reason: str) -> DetectionResult:
        return DetectionResult(
            itinerary=None,
            rejection=reason,
            dropped_marks=dropped,
            segment_size=len(segment),
            borrowed_marks=borrowed_marks,
        )

    if accepted[0] is None:
        return reject(REJECT_NO_FIRST)
    if accepted[-1] is None:
        return reject(REJECT_NO_LAST)
    if sum(1 for m in accepted if m is not None) < 2:
        return reject(REJECT_TOO_FEW)

    entries: list[TimedStop] = []
    pos_idx = 0
    while pos_idx < n:
        mark = accepted[pos_idx]
        if mark is not None:
            entries.append(
                TimedStop(stop_ids[pos_idx], pos_idx + 1, float(mark.time_s), Provenance.OBSERVED)
            )
            pos_idx += 1
            continue
        gap_start = pos_idx - 1  # previous position is observed by construction
        gap_end = pos_idx
        while accepted[gap_end] is None:
            gap_end += 1
        w = gap_end - gap_start
        estimates = interpolate_gap(
            float(accepted[gap_start].time_s), float(accepted[gap_end].time_s), w
        )
        for offset, estimate in enumerate(estimates, start=1):
            entries.append(
                TimedStop(
                    stop_ids[gap_start + offset],
                    gap_start + offset + 1,
                    estimate,
                    Provenance.INTERPOLATED,
                )
            )
        pos_idx = gap_end

    detected = DetectedItinerary(
        line_code=itinerary.line_code,
        vehicle_id=vehicle_id,
        direction=itinerary.direction,
        entries=tuple(entries),
        day=day,
    )
    return DetectionResult(
        itinerary=detected,
        rejection=None,
        dropped_marks=dropped,
        segment_size=len(segment),
        borrowed_marks=borrowed_marks,
    )


# ── Interpolation-error protocol ────────────────────────────────────────


@dataclass(frozen=True)
class InterpolationErrorSample:
    w: int
    err_seconds: float


def evaluate_interpolation_error(
    detections: list[DetectedItinerary],
    w: int,
    samples: int,
    seed: int = 0,
) -> list[InterpolationErrorSample]:
    """Measure interpolation error by deleting known stop times.

    Each sample deletes w-1 consecutive interior entries from one fully
    observed trip, re-estimates them from the surviving anchors, and
    records |true - estimated| per deleted stop. Gap start positions are
    sampled without replacement across all trips; the evaluation protocol
    uses w in 2..8 with 100 samples per width.
    """
    if w < 2:
        raise ValueError(f"gap width must span at least 2 intervals, got {w}")
    for det in detections:
        if not det.is_fully_observed():
            raise ValueError(
                f"trip {det.line_code}/{det.vehicle_id} contains interpolated entries; "
                "the protocol requires fully observed trips"
            )

    eligible: list[tuple[int, int]] = []
    for trip_idx, det in enumerate(detections):
        for anchor in range(0, len(det.entries) - w):
            eligible.append((trip_idx, anchor))
    if samples > len(eligible):
        raise ValueError(
            f"requested {samples} samples but only {len(eligible)} eligible gap positions"
        )

    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(eligible), size=samples, replace=False)

    results: list[InterpolationErrorSample] = []
    for index in chosen:
        trip_idx, anchor = eligible[int(index)]
        entries = detections[trip_idx].entries
        estimates = interpolate_gap(entries[anchor].time_s, entries[anchor + w].time_s, w)
        for offset, estimate in enumerate(estimates, start=1):
            err = abs(entries[anchor + offset].time_s - estimate)
            results.append(InterpolationErrorSample(w=w, err_seconds=err))
    return results


# ── Tag validity report ─────────────────────────────────────────────────


@dataclass
class GroupOutcome:
    """Detection outcome for one (vehicle, line, day, itinerary) run."""

    line_code: str
    direction: str
    vehicle_id: str
    day: date | None
    total_marks: int
    results: list[DetectionResult] = field(default_factory=list)
    discarded_segments: int = 0
    discarded_marks: int = 0


@dataclass
class TagCategoryRow:
    category: str
    total_marks: int = 0
    valid_tags: int = 0
    out_of_order: int = 0
    missing: int = 0
    rejected_segments: int = 0
    rejected_marks: int = 0
    discarded_segments: int = 0
    discarded_marks: int = 0

    @property
    def valid_pct(self) -> float:
        return 100.0 * self.valid_tags / self.total_marks if self.total_marks else 0.0

    @property
    def error_total(self) -> int:
        return self.out_of_order + self.missing

    @property
    def error_pct(self) -> float:
        return 100.0 * self.error_total / self.valid_tags if self.valid_tags else 0.0


@dataclass
class TagReport:
    rows: dict[str, TagCategoryRow]
    total: TagCategoryRow
    # Marks of rejected and discarded segments stay in every denominator.
    denominator_note: str = (
        "valid_pct denominator counts all map-matching marks, including marks "
        "from rejected or discarded segments"
    )


def tag_report(
    outcomes: list[GroupOutcome], categories: dict[str, LineCategory]
) -> TagReport:
    """Aggregate per-category tag validity and error-type counts.

    A mark is valid when its segment was accepted; dropped out-of-order
    marks inside accepted segments count as error type i, interpolated
    entries as error type ii (missing stops). Aggregation is commutative,
    so outcome order does not affect the report.
    """
    rows: dict[str, TagCategoryRow] = {}
    total = TagCategoryRow(category="TOTAL")

    for outcome in outcomes:
        category = categories[outcome.line_code].value
        row = rows.setdefault(category, TagCategoryRow(category=category))
        for target in (row, total):
            target.total_marks += outcome.total_marks
            target.discarded_segments += outcome.discarded_segments
            target.discarded_marks += outcome.discarded_marks
        for result in outcome.results:
            if result.accepted:
                for target in (row, total):
                    target.valid_tags += result.own_marks
                    target.out_of_order += len(result.dropped_marks)
                    target.missing += result.itinerary.interpolated_count
            else:
                for target in (row, total):
                    target.rejected_segments += 1
                    target.rejected_marks += result.own_marks

    return TagReport(rows=dict(sorted(rows.items())), total=total)
