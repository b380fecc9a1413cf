"""Synthetic case generation: a slide manifest, graded tumor polygons,
and navigation sessions whose viewports are biased toward the tumor
regions. Used by the test fixtures and the example scripts."""

from __future__ import annotations

import json
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import point_in_polygon
from .ingest import (
    Grade,
    Group,
    NavigationSession,
    SlideManifest,
    TumorAnnotation,
    TumorRegion,
    ViewportEvent,
    annotation_to_geojson,
    serialize_session,
)

VIEW_WINDOW_PX = 500  # on-screen viewport size used to derive box extents


def make_manifest(
    slide_id: str = "SYNTH-0001",
    width_px: int = 4000,
    height_px: int = 4000,
    standard_mags: Sequence[float] = (2, 4, 10, 20, 40),
) -> SlideManifest:
    return SlideManifest(
        slide_id=slide_id,
        width_px=width_px,
        height_px=height_px,
        standard_mags=tuple(standard_mags),
    )


def make_annotation(manifest: SlideManifest) -> TumorAnnotation:
    """Three graded tumor regions placed in different slide quadrants."""
    w, h = manifest.width_px, manifest.height_px

    def box(cx, cy, rx, ry):
        return (
            (cx - rx, cy - ry),
            (cx + rx, cy - ry),
            (cx + rx, cy + ry),
            (cx - rx, cy + ry),
        )

    regions = (
        TumorRegion(polygon=box(0.25 * w, 0.3 * h, 0.15 * w, 0.18 * h), grade=Grade.G3),
        TumorRegion(polygon=box(0.72 * w, 0.35 * h, 0.16 * w, 0.15 * h), grade=Grade.G4),
        TumorRegion(polygon=box(0.55 * w, 0.75 * h, 0.2 * w, 0.13 * h), grade=Grade.G5),
    )
    return TumorAnnotation(slide_id=manifest.slide_id, regions=regions)


def _viewport_at(
    manifest: SlideManifest, cx: float, cy: float, mag: float, t_ms: int
) -> ViewportEvent:
    side = int(round(VIEW_WINDOW_PX * manifest.base_mag / mag))
    side = max(2, min(side, min(manifest.width_px, manifest.height_px)))
    x0 = int(round(cx - side / 2))
    y0 = int(round(cy - side / 2))
    x0 = max(0, min(x0, manifest.width_px - side))
    y0 = max(0, min(y0, manifest.height_px - side))
    return ViewportEvent(x0, y0, x0 + side, y0 + side, mag, t_ms)


def _tumor_point(
    rng: np.random.Generator, annotation: TumorAnnotation
) -> Tuple[float, float]:
    region = annotation.regions[rng.integers(len(annotation.regions))]
    xs = [p[0] for p in region.polygon]
    ys = [p[1] for p in region.polygon]
    for _ in range(200):
        x = rng.uniform(min(xs), max(xs))
        y = rng.uniform(min(ys), max(ys))
        if point_in_polygon(x, y, region.polygon):
            return x, y
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def make_sessions(
    manifest: SlideManifest,
    annotation: Optional[TumorAnnotation],
    n_observers: int = 8,
    bias: float = 0.8,
    n_events: int = 40,
    seed: int = 0,
    mags: Sequence[float] = (4, 10, 20, 40),
    observer_prefix: str = "obs",
    n_gu: int = 3,
) -> List[NavigationSession]:
    """One session per observer. With probability `bias` a viewport is
    centered on a point inside a tumor region; otherwise the center is
    uniform over the slide. bias=0 (or no annotation) gives uniform
    navigation."""
    rng = np.random.default_rng(seed)
    sessions = []
    for i in range(n_observers):
        events = []
        t = 0
        for _ in range(n_events):
            if annotation is not None and rng.random() < bias:
                cx, cy = _tumor_point(rng, annotation)
            else:
                cx = rng.uniform(0, manifest.width_px)
                cy = rng.uniform(0, manifest.height_px)
            mag = float(mags[rng.integers(len(mags))])
            events.append(_viewport_at(manifest, cx, cy, mag, t))
            t += int(rng.integers(400, 3000))
        sessions.append(
            NavigationSession(
                slide_id=manifest.slide_id,
                observer_id=f"{observer_prefix}{i:02d}",
                group=Group.GU_SPECIALIST if i < n_gu else Group.GENERAL,
                events=tuple(events),
                end_ms=t,
            )
        )
    return sessions


def write_case(
    case_dir: str,
    manifest: SlideManifest,
    annotation: Optional[TumorAnnotation],
    sessions: Sequence[NavigationSession],
) -> None:
    os.makedirs(os.path.join(case_dir, "sessions"), exist_ok=True)
    with open(os.path.join(case_dir, "manifest.json"), "w") as fh:
        json.dump(
            {
                "slide_id": manifest.slide_id,
                "width_px": manifest.width_px,
                "height_px": manifest.height_px,
                "standard_mags": list(manifest.standard_mags),
            },
            fh,
        )
    if annotation is not None:
        with open(os.path.join(case_dir, "annotation.json"), "w") as fh:
            fh.write(annotation_to_geojson(annotation))
    for session in sessions:
        path = os.path.join(case_dir, "sessions", f"{session.observer_id}.jsonl")
        with open(path, "w") as fh:
            fh.write(serialize_session(session))


def make_case(
    case_dir: str,
    seed: int = 0,
    n_observers: int = 8,
    bias: float = 0.8,
    width_px: int = 4000,
    height_px: int = 4000,
) -> None:
    manifest = make_manifest(width_px=width_px, height_px=height_px)
    annotation = make_annotation(manifest)
    sessions = make_sessions(
        manifest, annotation, n_observers=n_observers, bias=bias, seed=seed
    )
    write_case(case_dir, manifest, annotation, sessions)
