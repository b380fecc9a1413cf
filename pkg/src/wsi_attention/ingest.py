"""Parsing, validation and summary of slide-navigation session logs and
tumor annotations.

This module owns the coordinate conventions used everywhere else:
viewport boxes are half-open [x0, x1) x [y0, y1) in base-level pixels of
the slide named by the manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

from .errors import (
    DegeneratePolygon,
    EmptySession,
    InvalidBox,
    MalformedLine,
    MissingHeader,
    NonMonotonicTimestamp,
    SlideMismatch,
    UnknownGrade,
)
from .geometry import point_in_polygon, polygon_is_simple

DEFAULT_STANDARD_MAGS: Tuple[float, ...] = (2.0, 4.0, 10.0, 20.0, 40.0)


class Group(str, Enum):
    GU_SPECIALIST = "GU"
    GENERAL = "GEN"


class Grade(str, Enum):
    BENIGN = "benign"
    G3 = "G3"
    G4 = "G4"
    G5 = "G5"


# Severity order used when a point falls inside overlapping regions.
GRADE_RANK: Dict[Grade, int] = {
    Grade.BENIGN: 0,
    Grade.G3: 1,
    Grade.G4: 2,
    Grade.G5: 3,
}

# Symbol used for scanpath grade strings ("B" for off-tumor points).
GRADE_SYMBOL: Dict[Grade, str] = {
    Grade.BENIGN: "B",
    Grade.G3: "G3",
    Grade.G4: "G4",
    Grade.G5: "G5",
}


@dataclass(frozen=True)
class SlideManifest:
    slide_id: str
    width_px: int
    height_px: int
    tile_source: Optional[str] = None
    standard_mags: Tuple[float, ...] = DEFAULT_STANDARD_MAGS

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("slide dimensions must be positive")
        mags = tuple(float(m) for m in self.standard_mags)
        if any(m <= 0 for m in mags) or any(
            a >= b for a, b in zip(mags, mags[1:])
        ):
            raise ValueError("standard_mags must be positive and strictly increasing")
        object.__setattr__(self, "standard_mags", mags)

    @property
    def base_mag(self) -> float:
        """Magnification of the base (full-resolution) pixel level."""
        return self.standard_mags[-1]


@dataclass(frozen=True)
class ViewportEvent:
    x0: int
    y0: int
    x1: int
    y1: int
    mag: float
    t_ms: int

    def __post_init__(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError("viewport box must have positive extent")
        if self.mag <= 0:
            raise ValueError("magnification must be positive")
        if self.t_ms < 0:
            raise ValueError("timestamp must be non-negative")


@dataclass(frozen=True)
class NavigationSession:
    slide_id: str
    observer_id: str
    group: Group
    events: Tuple[ViewportEvent, ...]
    end_ms: Optional[int] = None


@dataclass(frozen=True)
class TumorRegion:
    polygon: Tuple[Tuple[float, float], ...]
    grade: Grade


@dataclass(frozen=True)
class TumorAnnotation:
    slide_id: str
    regions: Tuple[TumorRegion, ...]


@dataclass(frozen=True)
class MagnificationStats:
    dwell_ms: Dict[float, int]
    total_ms: int


def _as_text(data: Union[bytes, str, IO]) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    if isinstance(data, str):
        return data
    raw = data.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def load_manifest(data: Union[bytes, str, IO]) -> SlideManifest:
    obj = json.loads(_as_text(data))
    try:
        return SlideManifest(
            slide_id=obj["slide_id"],
            width_px=int(obj["width_px"]),
            height_px=int(obj["height_px"]),
            tile_source=obj.get("tile_source"),
            standard_mags=tuple(obj.get("standard_mags", DEFAULT_STANDARD_MAGS)),
        )
    except KeyError as exc:
        raise ValueError(f"manifest missing field {exc}") from exc


_EVENT_FIELDS = ("x0", "y0", "x1", "y1", "mag", "t_ms")


def parse_session_log(data: Union[bytes, str, IO]) -> NavigationSession:
    """Parse a line-delimited JSON session log.

    Line 1 is the session header; subsequent lines are viewport events.
    Unknown fields on any line are ignored so future writers can extend
    the schema.
    """
    lines = _as_text(data).splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MissingHeader("empty input")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MissingHeader(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("type") != "session":
        raise MissingHeader("first line is not a session header")
    for key in ("slide_id", "observer_id", "group"):
        if key not in header:
            raise MissingHeader(f"header missing {key!r}")
    try:
        group = Group(header["group"])
    except ValueError:
        raise MalformedLine(1, f"unknown group {header['group']!r}")
    end_ms = header.get("end_ms")
    if end_ms is not None:
        end_ms = int(end_ms)

    events: List[ViewportEvent] = []
    prev_t = -1
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            raise MalformedLine(line_no, "not valid JSON")
        if not isinstance(obj, dict) or obj.get("type") != "viewport":
            raise MalformedLine(line_no, "not a viewport event")
        try:
            x0, y0, x1, y1 = (int(obj[k]) for k in ("x0", "y0", "x1", "y1"))
            mag = float(obj["mag"])
            t_ms = int(obj["t_ms"])
        except (KeyError, TypeError, ValueError):
            raise MalformedLine(line_no, "missing or non-numeric field")
        if x0 >= x1 or y0 >= y1:
            raise InvalidBox(line_no)
        if mag <= 0 or t_ms < 0:
            raise MalformedLine(line_no, "mag must be > 0 and t_ms >= 0")
        if t_ms < prev_t:
            raise NonMonotonicTimestamp(line_no)
        prev_t = t_ms
        events.append(ViewportEvent(x0, y0, x1, y1, mag, t_ms))

    if end_ms is not None and events and end_ms < events[-1].t_ms:
        raise MalformedLine(1, "end_ms precedes last event")
    return NavigationSession(
        slide_id=header["slide_id"],
        observer_id=header["observer_id"],
        group=group,
        events=tuple(events),
        end_ms=end_ms,
    )


def serialize_session(session: NavigationSession) -> str:
    """Inverse of parse_session_log with a fixed field order per line."""
    header: Dict[str, object] = {
        "type": "session",
        "slide_id": session.slide_id,
        "observer_id": session.observer_id,
        "group": session.group.value,
    }
    if session.end_ms is not None:
        header["end_ms"] = session.end_ms
    out = [json.dumps(header, separators=(",", ":"))]
    for ev in session.events:
        out.append(
            json.dumps(
                {
                    "type": "viewport",
                    "x0": ev.x0,
                    "y0": ev.y0,
                    "x1": ev.x1,
                    "y1": ev.y1,
                    "mag": ev.mag,
                    "t_ms": ev.t_ms,
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(out) + "\n"


def validate_and_clip(
    session: NavigationSession, manifest: SlideManifest
) -> NavigationSession:
    """Clip every event box to slide bounds, dropping events that fall
    entirely off-slide. Idempotent."""
    if session.slide_id != manifest.slide_id:
        raise SlideMismatch(
            f"session is for {session.slide_id!r}, manifest for {manifest.slide_id!r}"
        )
    clipped: List[ViewportEvent] = []
    for ev in session.events:
        x0 = max(ev.x0, 0)
        y0 = max(ev.y0, 0)
        x1 = min(ev.x1, manifest.width_px)
        y1 = min(ev.y1, manifest.height_px)
        if x0 >= x1 or y0 >= y1:
            continue
        if (x0, y0, x1, y1) == (ev.x0, ev.y0, ev.x1, ev.y1):
            clipped.append(ev)
        else:
            clipped.append(replace(ev, x0=x0, y0=y0, x1=x1, y1=y1))
    if not clipped:
        raise EmptySession(f"no events remain inside {manifest.slide_id!r}")
    return replace(session, events=tuple(clipped))


def parse_annotation(
    data: Union[bytes, str, IO], manifest: SlideManifest
) -> TumorAnnotation:
    """Parse a GeoJSON FeatureCollection of graded tumor polygons.

    Only the first ring of each Polygon is used; vertices are clamped to
    slide bounds.
    """
    obj = json.loads(_as_text(data))
    features = obj.get("features", [])
    regions: List[TumorRegion] = []
    for feat in features:
        geom = feat.get("geometry", {})
        if geom.get("type") != "Polygon":
            continue
        rings = geom.get("coordinates", [])
        if not rings:
            raise DegeneratePolygon("polygon has no rings")
        ring = rings[0]
        grade_value = feat.get("properties", {}).get("grade")
        try:
            grade = Grade(grade_value)
        except ValueError:
            raise UnknownGrade(grade_value)
        pts = [(float(x), float(y)) for x, y in ring]
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]  # closing vertex implied
        pts = [
            (
                min(max(x, 0.0), float(manifest.width_px)),
                min(max(y, 0.0), float(manifest.height_px)),
            )
            for x, y in pts
        ]
        # drop consecutive duplicates introduced by clamping
        dedup: List[Tuple[float, float]] = []
        for p in pts:
            if not dedup or p != dedup[-1]:
                dedup.append(p)
        if len(dedup) >= 2 and dedup[0] == dedup[-1]:
            dedup.pop()
        if len(set(dedup)) < 3:
            raise DegeneratePolygon("fewer than 3 distinct vertices")
        if not polygon_is_simple(dedup):
            raise DegeneratePolygon("self-intersecting ring")
        regions.append(TumorRegion(polygon=tuple(dedup), grade=grade))
    return TumorAnnotation(slide_id=manifest.slide_id, regions=tuple(regions))


def annotation_to_geojson(annotation: TumorAnnotation) -> str:
    features = []
    for region in annotation.regions:
        ring = [list(p) for p in region.polygon]
        ring.append(list(region.polygon[0]))
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"grade": region.grade.value},
            }
        )
    return json.dumps(
        {"type": "FeatureCollection", "features": features}, separators=(",", ":")
    )


def grade_at_point(x: float, y: float, annotation: TumorAnnotation) -> Grade:
    """Grade of the region containing (x, y); overlaps resolve to the
    highest grade, points in no region are benign."""
    best = Grade.BENIGN
    for region in annotation.regions:
        if point_in_polygon(x, y, region.polygon):
            if GRADE_RANK[region.grade] > GRADE_RANK[best]:
                best = region.grade
    return best


def snap_to_standard(mag: float, standards: Sequence[float]) -> float:
    """Nearest standard magnification; equidistant ties go to the lower."""
    return min(standards, key=lambda s: (abs(s - mag), s))


def event_dwells(session: NavigationSession) -> List[int]:
    """Dwell time per event: gap to the next event's timestamp; the last
    event gets end_ms - t_ms when an end is recorded, else 0."""
    ts = [ev.t_ms for ev in session.events]
    dwells = [b - a for a, b in zip(ts, ts[1:])]
    if session.end_ms is not None and ts:
        dwells.append(session.end_ms - ts[-1])
    elif ts:
        dwells.append(0)
    return dwells


def magnification_stats(
    session: NavigationSession, manifest: SlideManifest
) -> MagnificationStats:
    dwell: Dict[float, int] = {m: 0 for m in manifest.standard_mags}
    for ev, d in zip(session.events, event_dwells(session)):
        dwell[snap_to_standard(ev.mag, manifest.standard_mags)] += d
    if not session.events:
        total = 0
    elif session.end_ms is not None:
        total = session.end_ms - session.events[0].t_ms
    else:
        total = session.events[-1].t_ms - session.events[0].t_ms
    return MagnificationStats(dwell_ms=dwell, total_ms=total)
