import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dense_gaussian_smooth, per_pixel_viewport_counts
from wsi_attention import errors
from wsi_attention.heatmap import (
    AttentionHeatmap,
    Grid2D,
    accumulate_viewports,
    average_heatmaps,
    build_attention_heatmap,
    gaussian_kernel_1d,
    gaussian_smooth,
    load_heatmap,
    min_max_normalize,
    save_heatmap,
)
from wsi_attention.ingest import (
    Group,
    NavigationSession,
    SlideManifest,
    ViewportEvent,
)


def session_of(boxes, slide="S1", mag=10.0, observer="o1"):
    events = tuple(
        ViewportEvent(x0, y0, x1, y1, mag, i * 100)
        for i, (x0, y0, x1, y1) in enumerate(boxes)
    )
    return NavigationSession(slide, observer, Group.GENERAL, events)


def grid_of(values, scale=1.0):
    values = np.asarray(values, dtype=np.float64)
    return Grid2D(values.shape[1], values.shape[0], scale, values)


class TestAccumulateViewports:
    manifest = SlideManifest("S1", 4, 4)

    def test_single_box_full_scale(self):
        grid = accumulate_viewports([session_of([(0, 0, 2, 2)])], self.manifest, 1.0)
        expected = np.zeros((4, 4))
        expected[:2, :2] = 1
        assert np.array_equal(grid.values, expected)

    def test_duplicate_box_adds(self):
        grid = accumulate_viewports(
            [session_of([(0, 0, 2, 2), (0, 0, 2, 2)])], self.manifest, 1.0
        )
        assert grid.values[0, 0] == 2

    def test_empty_input(self):
        with pytest.raises(errors.EmptyInput):
            accumulate_viewports([], self.manifest, 1.0)

    def test_matches_per_pixel_oracle_random(self, rng):
        manifest = SlideManifest("S1", 64, 64)
        for _ in range(20):
            boxes = []
            for _ in range(10):
                x0, y0 = rng.integers(0, 60, 2)
                x1 = x0 + rng.integers(1, 64 - x0 + 1)
                y1 = y0 + rng.integers(1, 64 - y0 + 1)
                boxes.append((int(x0), int(y0), int(x1), int(y1)))
            grid = accumulate_viewports([session_of(boxes)], manifest, 1.0)
            oracle = per_pixel_viewport_counts(boxes, 64, 64, 1.0)
            assert np.array_equal(grid.values, oracle)

    def test_scaled_boxes_round_outward(self):
        manifest = SlideManifest("S1", 64, 64)
        boxes = [(3, 5, 33, 37)]
        grid = accumulate_viewports([session_of(boxes)], manifest, 1 / 16)
        oracle = per_pixel_viewport_counts(boxes, 4, 4, 1 / 16)
        assert np.array_equal(grid.values, oracle)

    def test_session_order_irrelevant(self):
        a = session_of([(0, 0, 2, 2)], observer="a")
        b = session_of([(1, 1, 3, 3)], observer="b")
        g1 = accumulate_viewports([a, b], self.manifest, 1.0)
        g2 = accumulate_viewports([b, a], self.manifest, 1.0)
        assert np.array_equal(g1.values, g2.values)

    def test_mag_filter(self):
        s = NavigationSession(
            "S1",
            "o1",
            Group.GENERAL,
            (
                ViewportEvent(0, 0, 2, 2, 4.0, 0),
                ViewportEvent(2, 2, 4, 4, 10.0, 100),
            ),
        )
        grid = accumulate_viewports([s], self.manifest, 1.0, mag_filter=4.0)
        assert grid.values[0, 0] == 1 and grid.values[3, 3] == 0


class TestGaussianSmooth:
    def test_sigma_zero_identity(self, rng):
        grid = grid_of(rng.random((8, 8)))
        out = gaussian_smooth(grid, 0.0)
        assert np.array_equal(out.values, grid.values)

    def test_uniform_fixpoint_exact(self):
        grid = grid_of(np.full((16, 16), 3.25))
        out = gaussian_smooth(grid, 4.0)
        assert np.allclose(out.values, 3.25, rtol=0, atol=1e-12)

    def test_impulse_matches_kernel_product(self):
        grid = grid_of(np.zeros((65, 65)))
        grid.values[32, 32] = 1.0
        out = gaussian_smooth(grid, 4.0)
        k = gaussian_kernel_1d(4.0)
        center = k[len(k) // 2]
        assert out.values[32, 32] == pytest.approx(center * center, abs=1e-15)
        assert out.values.sum() == pytest.approx(1.0, abs=1e-9)

    def test_matches_dense_oracle(self, rng):
        values = rng.random((20, 24))
        out = gaussian_smooth(grid_of(values), 2.0)
        oracle = dense_gaussian_smooth(values, 2.0)
        assert np.allclose(out.values, oracle, atol=1e-12)

    @given(
        arrays(np.float64, (9, 9), elements=st.floats(0, 100)),
        st.sampled_from([0.5, 1.0, 2.0]),
    )
    @settings(max_examples=30, deadline=None)
    def test_mass_conserved(self, values, sigma):
        out = gaussian_smooth(grid_of(values), sigma)
        total = values.sum()
        assert out.values.sum() == pytest.approx(total, rel=1e-9, abs=1e-9)

    def test_commutes_with_scaling(self, rng):
        values = rng.random((12, 12))
        c = 7.5
        a = gaussian_smooth(grid_of(values * c), 3.0).values
        b = gaussian_smooth(grid_of(values), 3.0).values * c
        assert np.allclose(a, b, rtol=1e-9)


class TestMinMaxNormalize:
    def test_affine_example(self):
        out = min_max_normalize(grid_of([[1, 3], [5, 9]]))
        assert np.allclose(out.values, [[0, 0.25], [0.5, 1.0]])

    def test_constant_grid_all_zeros(self):
        out = min_max_normalize(grid_of(np.full((3, 3), 4.2)))
        assert np.array_equal(out.values, np.zeros((3, 3)))

    @given(arrays(np.float64, (6, 7), elements=st.floats(-1e6, 1e6)))
    def test_range_exact(self, values):
        out = min_max_normalize(grid_of(values))
        if values.max() == values.min():
            assert np.array_equal(out.values, np.zeros_like(values))
        else:
            assert out.values.min() == 0.0
            assert out.values.max() == 1.0


class TestBuildAttentionHeatmap:
    def test_whole_slide_viewport_degenerate(self):
        manifest = SlideManifest("S1", 32, 32)
        hm = build_attention_heatmap(
            [session_of([(0, 0, 32, 32)])], manifest, scale=1.0, sigma=2.0
        )
        assert hm.degenerate
        assert np.array_equal(hm.grid.values, np.zeros((32, 32)))

    def test_two_disjoint_boxes_equal_peaks(self):
        manifest = SlideManifest("S1", 64, 64)
        hm = build_attention_heatmap(
            [session_of([(4, 4, 12, 12), (52, 52, 60, 60)])],
            manifest,
            scale=1.0,
            sigma=1.5,
        )
        assert hm.grid.values[8, 8] == pytest.approx(hm.grid.values[56, 56], abs=1e-9)
        assert hm.grid.values.max() == 1.0

    def test_range_invariant(self, biased_sessions, small_manifest):
        hm = build_attention_heatmap(biased_sessions, small_manifest)
        assert hm.grid.values.min() == 0.0
        assert hm.grid.values.max() == 1.0
        assert hm.observers == frozenset(s.observer_id for s in biased_sessions)

    def test_biased_fixture_concentrates_on_tumor(
        self, biased_sessions, small_manifest, small_annotation
    ):
        from wsi_attention.metrics import (
            cross_correlation,
            histogram_match,
            rasterize_annotation,
            tumor_probability_map,
        )

        hm = build_attention_heatmap(biased_sessions, small_manifest)
        tumor = tumor_probability_map(
            rasterize_annotation(small_annotation, small_manifest)
        )
        matched = histogram_match(hm.grid, tumor.grid)
        assert cross_correlation(matched, tumor.grid) >= 0.6


class TestAverageHeatmaps:
    def make_hm(self, values, observers=("o1",)):
        return AttentionHeatmap(
            grid=grid_of(values), sigma_px=2.0, observers=frozenset(observers)
        )

    def test_average_of_copies_identity(self):
        values = np.array([[0.0, 0.5], [0.75, 1.0]])
        hm = self.make_hm(values)
        out = average_heatmaps([hm, hm, hm])
        assert np.allclose(out.grid.values, values)

    def test_average_with_zero_map_renormalizes(self):
        values = np.array([[0.0, 0.5], [0.75, 1.0]])
        out = average_heatmaps(
            [self.make_hm(values), self.make_hm(np.zeros((2, 2)), ("o2",))]
        )
        assert np.allclose(out.grid.values, values)
        assert out.observers == frozenset({"o1", "o2"})

    def test_disjoint_supports_both_nonzero(self):
        a = np.zeros((4, 4))
        a[0, 0] = 1.0
        b = np.zeros((4, 4))
        b[3, 3] = 1.0
        out = average_heatmaps([self.make_hm(a), self.make_hm(b, ("o2",))])
        assert out.grid.values[0, 0] > 0 and out.grid.values[3, 3] > 0

    def test_dimension_mismatch(self):
        with pytest.raises(errors.DimensionMismatch):
            average_heatmaps(
                [self.make_hm(np.zeros((2, 2))), self.make_hm(np.zeros((3, 3)))]
            )


class TestHeatmapFile:
    def test_round_trip(self, rng):
        hm = AttentionHeatmap(
            grid=grid_of(rng.random((5, 7)).astype(np.float32).astype(np.float64),
                         scale=1 / 16),
            sigma_px=16.0,
        )
        buf = io.BytesIO()
        save_heatmap(hm, buf)
        buf.seek(0)
        loaded = load_heatmap(buf)
        assert loaded.grid.width == 7 and loaded.grid.height == 5
        assert loaded.grid.scale == 1 / 16
        assert loaded.sigma_px == 16.0
        assert np.array_equal(loaded.grid.values, hm.grid.values)

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            load_heatmap(io.BytesIO(b"XXXX" + b"\0" * 40))
