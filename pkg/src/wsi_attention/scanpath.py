"""Scanpaths from viewport centers and the Semantic Sequence Score:
grade-string projection plus global alignment of two grade strings.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Tuple

from .errors import EmptyString, NeedTwoObservers
from .ingest import (
    GRADE_SYMBOL,
    NavigationSession,
    TumorAnnotation,
    ViewportEvent,
    event_dwells,
    grade_at_point,
)

GRADE_ALPHABET: Tuple[str, ...] = ("B", "G3", "G4", "G5")

GradeString = Tuple[str, ...]


@dataclass(frozen=True)
class ScanpathPoint:
    cx: float
    cy: float
    t_ms: int
    mag: float
    dwell_ms: int


@dataclass(frozen=True)
class Scanpath:
    slide_id: str
    observer_id: str
    points: Tuple[ScanpathPoint, ...]


@dataclass(frozen=True)
class AlignmentScoring:
    match: float = 1.0
    mismatch: float = 0.0
    gap: float = 0.0

    def __post_init__(self):
        if self.match <= self.mismatch or self.match <= self.gap:
            raise ValueError("match must exceed mismatch and gap scores")


def viewport_center(event: ViewportEvent) -> Tuple[float, float]:
    return ((event.x0 + event.x1) / 2.0, (event.y0 + event.y1) / 2.0)


def build_scanpath(session: NavigationSession) -> Scanpath:
    points = []
    for ev, dwell in zip(session.events, event_dwells(session)):
        cx, cy = viewport_center(ev)
        points.append(ScanpathPoint(cx, cy, ev.t_ms, ev.mag, dwell))
    return Scanpath(
        slide_id=session.slide_id,
        observer_id=session.observer_id,
        points=tuple(points),
    )


def grade_string(scanpath: Scanpath, annotation: TumorAnnotation) -> GradeString:
    """One symbol per scanpath point: the grade of the region containing
    the viewport center (overlaps -> highest grade, outside -> B)."""
    return tuple(
        GRADE_SYMBOL[grade_at_point(p.cx, p.cy, annotation)] for p in scanpath.points
    )


def align_score(
    a: Sequence[str], b: Sequence[str], scoring: AlignmentScoring = AlignmentScoring()
) -> float:
    """Needleman-Wunsch global alignment score."""
    if not a or not b:
        raise EmptyString("alignment requires two non-empty strings")
    gap = scoring.gap
    prev = [gap * j for j in range(len(b) + 1)]
    for i, sa in enumerate(a, start=1):
        cur = [gap * i]
        for j, sb in enumerate(b, start=1):
            sub = scoring.match if sa == sb else scoring.mismatch
            cur.append(max(prev[j - 1] + sub, prev[j] + gap, cur[j - 1] + gap))
        prev = cur
    return float(prev[-1])


def semantic_sequence_score(
    a: Sequence[str], b: Sequence[str], scoring: AlignmentScoring = AlignmentScoring()
) -> float:
    """Alignment score normalized by the best attainable score for the
    longer string; in [0, 1] under the default scoring."""
    return align_score(a, b, scoring) / (scoring.match * max(len(a), len(b)))


def mean_pairwise_sss(
    sessions: Sequence[NavigationSession],
    annotation: TumorAnnotation,
    scoring: AlignmentScoring = AlignmentScoring(),
) -> float:
    if len(sessions) < 2:
        raise NeedTwoObservers("pairwise similarity needs at least two sessions")
    slide_ids = {s.slide_id for s in sessions}
    if len(slide_ids) != 1 or slide_ids.pop() != annotation.slide_id:
        raise NeedTwoObservers("all sessions must share the annotation's slide")
    strings = [grade_string(build_scanpath(s), annotation) for s in sessions]
    scores = [
        semantic_sequence_score(sa, sb, scoring)
        for sa, sb in combinations(strings, 2)
    ]
    return sum(scores) / len(scores)


def scanpath_to_csv(scanpath: Scanpath) -> str:
    buf = io.StringIO()
    buf.write("cx,cy,t_ms,mag,dwell_ms\n")
    for p in scanpath.points:
        buf.write(f"{p.cx!r},{p.cy!r},{p.t_ms},{p.mag!r},{p.dwell_ms}\n")
    return buf.getvalue()


def format_grade_string(gs: Sequence[str]) -> str:
    return " ".join(gs)


def parse_grade_string(text: str) -> GradeString:
    tokens = tuple(text.split())
    for tok in tokens:
        if tok not in GRADE_ALPHABET:
            raise ValueError(f"unknown grade symbol {tok!r}")
    return tokens
