import numpy as np
import pytest

from wsi_attention import synthetic as syn


@pytest.fixture(scope="session")
def small_manifest():
    return syn.make_manifest(slide_id="CASE-A", width_px=1600, height_px=1600)


@pytest.fixture(scope="session")
def small_annotation(small_manifest):
    return syn.make_annotation(small_manifest)


@pytest.fixture(scope="session")
def biased_sessions(small_manifest, small_annotation):
    return syn.make_sessions(
        small_manifest, small_annotation, n_observers=6, bias=0.8, seed=7, n_events=30
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
