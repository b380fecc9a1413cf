import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from wsi_attention import errors
from wsi_attention.ingest import (
    Grade,
    Group,
    NavigationSession,
    SlideManifest,
    ViewportEvent,
    load_manifest,
    magnification_stats,
    parse_annotation,
    parse_session_log,
    serialize_session,
    snap_to_standard,
    validate_and_clip,
)

HEADER = '{"type":"session","slide_id":"S1","observer_id":"o1","group":"GU"}'


def make_log(*event_lines, header=HEADER):
    return "\n".join([header, *event_lines]) + "\n"


def event_line(x0=0, y0=0, x1=100, y1=100, mag=10.0, t_ms=0, **extra):
    obj = {"type": "viewport", "x0": x0, "y0": y0, "x1": x1, "y1": y1,
           "mag": mag, "t_ms": t_ms}
    obj.update(extra)
    return json.dumps(obj)


class TestParseSessionLog:
    def test_minimal_log(self):
        session = parse_session_log(make_log(event_line()))
        assert session.slide_id == "S1"
        assert session.observer_id == "o1"
        assert session.group is Group.GU_SPECIALIST
        assert len(session.events) == 1
        assert session.events[0] == ViewportEvent(0, 0, 100, 100, 10.0, 0)

    def test_non_monotonic_timestamp_reports_line(self):
        log = make_log(event_line(t_ms=100), event_line(t_ms=50))
        with pytest.raises(errors.NonMonotonicTimestamp) as exc:
            parse_session_log(log)
        assert exc.value.line_no == 3

    def test_unknown_fields_ignored(self):
        session = parse_session_log(make_log(event_line(note="x")))
        assert len(session.events) == 1

    def test_missing_header(self):
        with pytest.raises(errors.MissingHeader):
            parse_session_log(event_line() + "\n")

    def test_invalid_box(self):
        with pytest.raises(errors.InvalidBox) as exc:
            parse_session_log(make_log(event_line(x0=10, x1=10)))
        assert exc.value.line_no == 2

    def test_malformed_json_line(self):
        with pytest.raises(errors.MalformedLine) as exc:
            parse_session_log(make_log("{not json"))
        assert exc.value.line_no == 2

    def test_bytes_input(self):
        session = parse_session_log(make_log(event_line()).encode())
        assert len(session.events) == 1

    def test_end_ms_parsed(self):
        header = HEADER[:-1] + ',"end_ms":5000}'
        session = parse_session_log(make_log(event_line(), header=header))
        assert session.end_ms == 5000


events_strategy = st.lists(
    st.tuples(
        st.integers(0, 900),
        st.integers(0, 900),
        st.integers(1, 99),
        st.integers(1, 99),
        st.sampled_from([2.0, 4.0, 10.0, 20.0, 40.0]),
    ),
    min_size=1,
    max_size=10,
)


def build_session(raw_events, end_gap=None):
    events = []
    t = 0
    for x0, y0, w, h, mag in raw_events:
        events.append(ViewportEvent(x0, y0, x0 + w, y0 + h, mag, t))
        t += 100
    end_ms = None if end_gap is None else events[-1].t_ms + end_gap
    return NavigationSession("S1", "o1", Group.GENERAL, tuple(events), end_ms)


class TestRoundTrip:
    @given(events_strategy, st.one_of(st.none(), st.integers(0, 10_000)))
    def test_serialize_parse_serialize_identical(self, raw, end_gap):
        session = build_session(raw, end_gap)
        text = serialize_session(session)
        assert serialize_session(parse_session_log(text)) == text

    @given(events_strategy)
    def test_parse_preserves_event_order(self, raw):
        session = build_session(raw)
        parsed = parse_session_log(serialize_session(session))
        assert parsed.events == session.events


class TestValidateAndClip:
    manifest = SlideManifest("S1", 100, 100)

    def session_of(self, *boxes):
        events = tuple(
            ViewportEvent(x0, y0, x1, y1, 10.0, i * 100)
            for i, (x0, y0, x1, y1) in enumerate(boxes)
        )
        return NavigationSession("S1", "o1", Group.GENERAL, events)

    def test_partial_box_clipped(self):
        out = validate_and_clip(self.session_of((-10, -10, 50, 50)), self.manifest)
        ev = out.events[0]
        assert (ev.x0, ev.y0, ev.x1, ev.y1) == (0, 0, 50, 50)

    def test_disjoint_box_dropped(self):
        out = validate_and_clip(
            self.session_of((200, 200, 300, 300), (0, 0, 10, 10)), self.manifest
        )
        assert len(out.events) == 1

    def test_all_off_slide_raises(self):
        with pytest.raises(errors.EmptySession):
            validate_and_clip(self.session_of((200, 200, 300, 300)), self.manifest)

    def test_slide_mismatch(self):
        with pytest.raises(errors.SlideMismatch):
            validate_and_clip(
                self.session_of((0, 0, 10, 10)),
                SlideManifest("OTHER", 100, 100),
            )

    @given(
        st.lists(
            st.tuples(
                st.integers(-50, 150),
                st.integers(-50, 150),
                st.integers(1, 100),
                st.integers(1, 100),
            ),
            min_size=1,
            max_size=8,
        )
    )
    def test_idempotent(self, raw):
        events = tuple(
            ViewportEvent(x0, y0, x0 + w, y0 + h, 10.0, i * 10)
            for i, (x0, y0, w, h) in enumerate(raw)
        )
        session = NavigationSession("S1", "o1", Group.GENERAL, events)
        try:
            once = validate_and_clip(session, self.manifest)
        except errors.EmptySession:
            return
        assert validate_and_clip(once, self.manifest) == once


class TestMagnificationStats:
    manifest = SlideManifest("S1", 1000, 1000)

    def test_dwell_split_across_mags(self):
        session = NavigationSession(
            "S1",
            "o1",
            Group.GENERAL,
            (
                ViewportEvent(0, 0, 10, 10, 4.0, 0),
                ViewportEvent(0, 0, 10, 10, 10.0, 2000),
            ),
            end_ms=3000,
        )
        stats = magnification_stats(session, self.manifest)
        assert stats.dwell_ms[4.0] == 2000
        assert stats.dwell_ms[10.0] == 1000
        assert stats.total_ms == 3000

    def test_single_event_no_end(self):
        session = NavigationSession(
            "S1", "o1", Group.GENERAL, (ViewportEvent(0, 0, 10, 10, 4.0, 500),)
        )
        stats = magnification_stats(session, self.manifest)
        assert all(v == 0 for v in stats.dwell_ms.values())
        assert stats.total_ms == 0

    def test_equidistant_tie_snaps_lower(self):
        assert snap_to_standard(7.0, [4.0, 10.0]) == 4.0
        manifest = SlideManifest("S1", 1000, 1000, standard_mags=(4.0, 10.0))
        session = NavigationSession(
            "S1",
            "o1",
            Group.GENERAL,
            (ViewportEvent(0, 0, 10, 10, 7.0, 0),),
            end_ms=100,
        )
        stats = magnification_stats(session, manifest)
        assert stats.dwell_ms[4.0] == 100

    @given(events_strategy, st.integers(0, 5000))
    def test_total_dwell_matches_span(self, raw, end_gap):
        session = build_session(raw, end_gap)
        stats = magnification_stats(session, self.manifest)
        assert sum(stats.dwell_ms.values()) == stats.total_ms
        assert stats.total_ms == session.end_ms - session.events[0].t_ms


SQUARE = {
    "type": "FeatureCollection",
    "features": [
        {
            "type": "Feature",
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[10, 10], [90, 10], [90, 90], [10, 90], [10, 10]]],
            },
            "properties": {"grade": "G4"},
        }
    ],
}


class TestParseAnnotation:
    manifest = SlideManifest("S1", 100, 100)

    def test_square_polygon(self):
        ann = parse_annotation(json.dumps(SQUARE), self.manifest)
        assert len(ann.regions) == 1
        assert ann.regions[0].grade is Grade.G4
        assert len(ann.regions[0].polygon) == 4  # closing vertex dropped

    def test_unknown_grade(self):
        bad = json.loads(json.dumps(SQUARE))
        bad["features"][0]["properties"]["grade"] = "G7"
        with pytest.raises(errors.UnknownGrade) as exc:
            parse_annotation(json.dumps(bad), self.manifest)
        assert exc.value.value == "G7"

    def test_degenerate_polygon(self):
        bad = json.loads(json.dumps(SQUARE))
        bad["features"][0]["geometry"]["coordinates"] = [[[0, 0], [5, 5]]]
        with pytest.raises(errors.DegeneratePolygon):
            parse_annotation(json.dumps(bad), self.manifest)

    def test_vertices_clamped_to_bounds(self):
        big = json.loads(json.dumps(SQUARE))
        big["features"][0]["geometry"]["coordinates"] = [
            [[-10, -10], [200, -10], [200, 200], [-10, 200]]
        ]
        ann = parse_annotation(json.dumps(big), self.manifest)
        for x, y in ann.regions[0].polygon:
            assert 0 <= x <= 100 and 0 <= y <= 100

    def test_self_intersecting_rejected(self):
        bow = json.loads(json.dumps(SQUARE))
        bow["features"][0]["geometry"]["coordinates"] = [
            [[0, 0], [50, 50], [50, 0], [0, 50]]
        ]
        with pytest.raises(errors.DegeneratePolygon):
            parse_annotation(json.dumps(bow), self.manifest)


def test_load_manifest_defaults():
    m = load_manifest('{"slide_id":"S","width_px":10,"height_px":20}')
    assert m.standard_mags == (2.0, 4.0, 10.0, 20.0, 40.0)
    assert m.base_mag == 40.0
    assert m.tile_source is None
