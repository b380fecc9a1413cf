
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dense_gaussian_smooth, pearson, rank_match
from wsi_attention import errors
from wsi_attention.heatmap import Grid2D
from wsi_attention.ingest import (
    Grade,
    Group,
    NavigationSession,
    SlideManifest,
    TumorAnnotation,
    TumorRegion,
    ViewportEvent,
)
from wsi_attention.metrics import (
    EvalConfig,
    case_report_csv,
    cross_correlation,
    evaluate_case,
    histogram_match,
    rasterize_annotation,
    tumor_probability_map,
    welch_t_test,
)


def grid_of(values, scale=1.0):
    values = np.asarray(values, dtype=np.float64)
    return Grid2D(values.shape[1], values.shape[0], scale, values)


def square(x0, y0, x1, y1):
    return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


class TestRasterizeAnnotation:
    manifest = SlideManifest("S1", 10, 10)

    def test_left_half_square(self):
        ann = TumorAnnotation("S1", (TumorRegion(square(0, 0, 5, 10), Grade.G3),))
        grid = rasterize_annotation(ann, self.manifest, scale=1.0)
        assert grid.values.sum() == 50
        assert np.array_equal(grid.values[:, :5], np.ones((10, 5)))

    def test_empty_annotation_all_zero(self):
        grid = rasterize_annotation(TumorAnnotation("S1", ()), self.manifest, 1.0)
        assert grid.values.sum() == 0

    def test_overlap_union_matches_shapely_oracle(self):
        from shapely.geometry import Point, Polygon

        regions = (
            TumorRegion(square(1, 1, 6, 6), Grade.G3),
            TumorRegion(square(4, 4, 9, 9), Grade.G4),
        )
        ann = TumorAnnotation("S1", regions)
        grid = rasterize_annotation(ann, self.manifest, scale=1.0)
        polys = [Polygon(r.polygon) for r in regions]
        for cy in range(10):
            for cx in range(10):
                # cell centers at half-integers never sit on these edges
                expected = any(p.contains(Point(cx + 0.5, cy + 0.5)) for p in polys)
                assert bool(grid.values[cy, cx]) == expected


class TestTumorProbabilityMap:
    def test_all_zero_mask(self):
        out = tumor_probability_map(grid_of(np.zeros((8, 8))), sigma=2.0)
        assert np.array_equal(out.grid.values, np.zeros((8, 8)))

    def test_single_cell_peak_is_one(self):
        mask = np.zeros((33, 33))
        mask[16, 16] = 1.0
        out = tumor_probability_map(grid_of(mask), sigma=2.0)
        assert out.grid.values[16, 16] == 1.0
        assert out.grid.values.max() == 1.0

    def test_half_plane_matches_direct_convolution(self):
        mask = np.zeros((20, 20))
        mask[:, :10] = 1.0
        out = tumor_probability_map(grid_of(mask), sigma=2.0)
        smoothed = dense_gaussian_smooth(mask, 2.0)
        expected = (smoothed - smoothed.min()) / (smoothed.max() - smoothed.min())
        assert np.allclose(out.grid.values, expected, atol=1e-9)
        # monotone ramp across the boundary
        row = out.grid.values[10]
        assert np.all(np.diff(row) <= 1e-12)


class TestHistogramMatch:
    def test_identity_reference(self, rng):
        src = grid_of(rng.random((6, 6)))
        out = histogram_match(src, src)
        assert np.allclose(out.values, src.values)

    def test_constant_reference(self, rng):
        src = grid_of(rng.random((4, 4)))
        ref = grid_of(np.full((4, 4), 0.7))
        out = histogram_match(src, ref)
        assert np.allclose(out.values, 0.7)

    def test_rank_mapping_example(self):
        src = grid_of([[3.0, 1.0, 2.0]])
        ref = grid_of([[10.0, 20.0, 30.0]])
        out = histogram_match(src, ref)
        assert out.values.tolist() == [[30.0, 10.0, 20.0]]

    def test_dimension_mismatch(self):
        with pytest.raises(errors.DimensionMismatch):
            histogram_match(grid_of(np.zeros((2, 2))), grid_of(np.zeros((3, 3))))

    @given(
        arrays(np.float64, 12, elements=st.floats(0, 100)),
        arrays(np.float64, 12, elements=st.floats(0, 100)),
    )
    @settings(max_examples=200)
    def test_output_multiset_equals_reference(self, src, ref):
        out = histogram_match(grid_of(src.reshape(3, 4)), grid_of(ref.reshape(3, 4)))
        assert np.array_equal(np.sort(out.values.ravel()), np.sort(ref))

    @given(
        arrays(np.float64, 12, elements=st.floats(0, 100)),
        arrays(np.float64, 12, elements=st.floats(0, 100)),
    )
    @settings(max_examples=200)
    def test_monotone_in_source(self, src, ref):
        out = histogram_match(
            grid_of(src.reshape(3, 4)), grid_of(ref.reshape(3, 4))
        ).values.ravel()
        flat = src
        for i in range(len(flat)):
            for j in range(len(flat)):
                if flat[i] < flat[j]:
                    assert out[i] <= out[j]

    def test_matches_rank_oracle(self, rng):
        src = rng.random(20)
        ref = rng.random(20)
        out = histogram_match(grid_of(src.reshape(4, 5)), grid_of(ref.reshape(4, 5)))
        assert np.allclose(out.values.ravel(), rank_match(src.tolist(), ref.tolist()))


class TestCrossCorrelation:
    def test_self_correlation(self, rng):
        m = grid_of(rng.random((5, 5)))
        assert cross_correlation(m, m) == pytest.approx(1.0, abs=1e-9)

    def test_negation(self, rng):
        m = grid_of(rng.random((5, 5)))
        neg = grid_of(-m.values)
        assert cross_correlation(m, neg) == pytest.approx(-1.0, abs=1e-9)

    def test_hand_computed_2x2(self):
        a = grid_of([[1.0, 2.0], [3.0, 4.0]])
        b = grid_of([[2.0, 4.0], [5.0, 4.0]])
        expected = pearson([1, 2, 3, 4], [2, 4, 5, 4])
        assert cross_correlation(a, b) == pytest.approx(expected, abs=1e-12)

    def test_constant_input_raises(self, rng):
        m = grid_of(rng.random((3, 3)))
        const = grid_of(np.full((3, 3), 2.0))
        with pytest.raises(errors.ConstantInput):
            cross_correlation(m, const)

    def test_affine_invariance_and_symmetry(self, rng):
        a = grid_of(rng.random((6, 6)))
        b = grid_of(rng.random((6, 6)))
        base = cross_correlation(a, b)
        scaled = grid_of(3.5 * b.values + 2.0)
        assert cross_correlation(a, scaled) == pytest.approx(base, abs=1e-9)
        assert cross_correlation(b, a) == pytest.approx(base, abs=1e-12)
        assert -1.0 <= base <= 1.0


class TestWelchTTest:
    def test_identical_samples(self):
        t, p = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert t == pytest.approx(0.0, abs=1e-9)
        assert p == pytest.approx(1.0, abs=1e-9)

    def test_antisymmetry(self):
        xs, ys = [1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 8.0]
        t1, p1 = welch_t_test(xs, ys)
        t2, p2 = welch_t_test(ys, xs)
        assert t1 == pytest.approx(-t2, abs=1e-12)
        assert p1 == pytest.approx(p2, abs=1e-12)

    def test_known_case_against_mpmath_oracle(self):
        import mpmath as mp

        t, p = welch_t_test([1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0])
        # direct high-precision computation of the same statistic
        mp.mp.dps = 50
        se2 = mp.mpf(5) / 3 / 4 + mp.mpf(5) / 3 / 4
        t_ref = (mp.mpf("2.5") - mp.mpf("3.5")) / mp.sqrt(se2)
        df = se2**2 / (2 * (mp.mpf(5) / 12) ** 2 / 3)
        x = df / (df + t_ref**2)
        p_ref = mp.betainc(df / 2, mp.mpf(1) / 2, 0, x, regularized=True)
        assert t == pytest.approx(float(t_ref), abs=1e-9)
        assert p == pytest.approx(float(p_ref), abs=1e-6)

    def test_shift_invariance(self, rng):
        xs = rng.random(6).tolist()
        ys = rng.random(8).tolist()
        t1, p1 = welch_t_test(xs, ys)
        t2, p2 = welch_t_test([x + 5 for x in xs], [y + 5 for y in ys])
        assert t1 == pytest.approx(t2, abs=1e-9)
        assert p1 == pytest.approx(p2, abs=1e-9)
        assert 0.0 < p1 <= 1.0

    def test_insufficient_data(self):
        with pytest.raises(errors.InsufficientData):
            welch_t_test([1.0], [1.0, 2.0])

    def test_zero_variance(self):
        with pytest.raises(errors.ZeroVariance):
            welch_t_test([2.0, 2.0], [1.0, 3.0])


def _tiling_sessions(manifest, annotation, group_split=2):
    """Observers whose viewports exactly tile the tumor bounding boxes."""
    sessions = []
    for i in range(4):
        events = []
        t = 0
        for region in annotation.regions:
            xs = [p[0] for p in region.polygon]
            ys = [p[1] for p in region.polygon]
            events.append(
                ViewportEvent(
                    int(min(xs)), int(min(ys)), int(max(xs)), int(max(ys)), 10.0, t
                )
            )
            t += 1000
        sessions.append(
            NavigationSession(
                manifest.slide_id,
                f"o{i}",
                Group.GU_SPECIALIST if i < group_split else Group.GENERAL,
                tuple(events),
                end_ms=t,
            )
        )
    return sessions


class TestEvaluateCase:
    manifest = SlideManifest("S1", 800, 800)
    annotation = TumorAnnotation(
        "S1",
        (
            TumorRegion(square(100, 100, 300, 300), Grade.G3),
            TumorRegion(square(500, 400, 700, 600), Grade.G4),
        ),
    )

    def test_tiling_fixture_high_cc(self):
        sessions = _tiling_sessions(self.manifest, self.annotation)
        report = evaluate_case(
            sessions, self.annotation, self.manifest, EvalConfig(sigma=4.0)
        )
        assert report.groups["all"].cc >= 0.9
        assert report.groups["all"].sss == 1.0

    def test_missing_group_absent(self):
        sessions = _tiling_sessions(self.manifest, self.annotation, group_split=4)
        report = evaluate_case(sessions, self.annotation, self.manifest)
        assert "general" not in report.groups
        assert "gu" in report.groups and "all" in report.groups

    def test_identical_trajectories_sss_one(self):
        sessions = _tiling_sessions(self.manifest, self.annotation)
        report = evaluate_case(sessions, self.annotation, self.manifest)
        assert report.groups["gu"].sss == 1.0

    def test_csv_layout(self):
        sessions = _tiling_sessions(self.manifest, self.annotation)
        text = case_report_csv(
            evaluate_case(sessions, self.annotation, self.manifest)
        )
        lines = text.strip().splitlines()
        assert lines[0] == "case_id,group,cc,sss,n_observers,match_direction"
        assert len(lines) == 4
        assert lines[1].startswith("S1,all,")
        assert lines[1].endswith("attention_to_tumor")
