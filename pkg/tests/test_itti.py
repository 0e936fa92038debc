import numpy as np
import pytest

from src.saliency.itti import (
    IttiModel,
    gabor_pair,
    gaussian_pyramid,
    get_channels,
    load_frame,
    normalize_operator,
    resize_linear,
    save_frame,
)
from src.saliency.maps import saliency_engine
from src.simulation.dronesim import drone_simulator
from src.utils.errors import ShapeError
from src.utils.models import IttiConfig, NormMode


@pytest.fixture(scope="module")
def model():
    return IttiModel()


def test_pyramid_halves_each_level():
    pyr = gaussian_pyramid(np.random.default_rng(0).random((512, 512)), 9)
    assert [p.shape[0] for p in pyr] == [512, 256, 128, 64, 32, 16, 8, 4, 2]


def test_resize_linear_exact_shape_and_constant():
    out = resize_linear(np.full((7, 5), 3.0), (20, 13))
    assert out.shape == (20, 13)
    assert np.allclose(out, 3.0)


def test_channels_ignore_dark_pixels():
    frame = np.zeros((4, 4, 3), dtype=np.uint8)
    frame[0, 0] = (255, 215, 0)
    frame[1, 1] = (10, 0, 0)
    intensity, R, G, B, Y = get_channels(frame)
    assert Y[0, 0] > 0 and B[0, 0] == 0.0
    assert R[1, 1] == 0.0
    assert intensity[0, 0] == pytest.approx((255 + 215) / 3 / 255)


def test_gabor_terms_rebuild_the_kernel():
    size, sigma, wl, theta = 9, 2.8, 7.0, 45.0
    half = size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)
    t = np.deg2rad(theta)
    want = np.exp(-0.5 * (x ** 2 + y ** 2) / sigma ** 2) * np.cos(2 * np.pi / wl * (x * np.cos(t) + y * np.sin(t)))
    got = sum(sign * np.outer(ky, kx) for kx, ky, sign in gabor_pair(wl, sigma, size, theta))
    assert got == pytest.approx(want, abs=1e-12)


def test_normalize_operator():
    assert not normalize_operator(np.full((10, 10), 4.0)).any()

    one_peak = np.zeros((20, 20))
    one_peak[5, 5] = 2.0
    assert normalize_operator(one_peak) == pytest.approx(one_peak / 2.0)

    two_peaks = one_peak.copy()
    two_peaks[15, 15] = 2.0
    assert normalize_operator(two_peaks).max() == pytest.approx(0.0)

    # a plateau is a single maximum
    plateau = np.zeros((20, 20))
    plateau[5:8, 5:8] = 1.0
    assert normalize_operator(plateau).max() == pytest.approx(1.0)


def test_uniform_frame_has_flat_saliency(model):
    frame = np.full((256, 256, 3), 120, dtype=np.uint8)
    smap = model.itti_saliency(frame)
    assert smap.values.shape == (256, 256)
    assert smap.values.var() < 1e-6


def test_bad_frames_raise(model):
    with pytest.raises(ShapeError):
        model.itti_saliency(np.zeros((300, 300), dtype=np.uint8))
    with pytest.raises(ShapeError):
        model.itti_saliency(np.zeros((300, 300, 4), dtype=np.uint8))
    with pytest.raises(ShapeError):
        model.itti_saliency(np.zeros((200, 400, 3), dtype=np.uint8))


@pytest.fixture(scope="module")
def highlight_frame(layout):
    target = layout.elements[9]
    return target, drone_simulator.render_frame(layout, [target.id], (960, 600))


def test_highlighted_icon_is_the_most_salient(model, layout, highlight_frame):
    target, frame = highlight_frame
    smap = model.itti_saliency(frame)
    assert smap.norm_mode == NormMode.UNIT_MAX
    assert smap.values.max() == pytest.approx(1.0)
    ns, _ = saliency_engine.ns_from_saliencies(saliency_engine.element_saliencies(smap, layout, scale=2))
    assert int(np.argmax(ns)) == layout.index_of(target.id)


def test_brightness_invariance(model, highlight_frame):
    _, frame = highlight_frame
    dim = frame.astype(np.float64) * 0.8
    base = model.itti_saliency(dim)
    brighter = model.itti_saliency(dim * 1.1)
    assert np.abs(brighter.values - base.values).max() < 1e-6


def test_highlight_map_cache(layout):
    model = IttiModel(IttiConfig())
    cache = {}
    key = frozenset({layout.elements[0].id})
    first = model.highlight_map(layout, key, cache)
    assert first.values.shape == (layout.height_px // 2, layout.width_px // 2)
    assert model.highlight_map(layout, key, cache) is first
    assert list(cache) == [key]


def test_itti_ns_series(model, short_trace, layout):
    iv = short_trace.plan.critical_intervals()[0]
    element = layout.element_for(iv.drone_index, iv.kind)
    cache = {}
    series = model.itti_ns_series(short_trace, layout, element, iv.onset_s, cache=cache)
    assert len(series.ns) == 60
    assert all(0.0 <= v <= 1.0 for v in series.ns)
    assert cache

    # slice 15 covers 0.5 s to 0.6 s after onset
    key = frozenset(drone_simulator.highlighted_ids(short_trace, layout, iv.onset_s + 0.55))
    ns, _ = saliency_engine.ns_from_saliencies(
        saliency_engine.element_saliencies(cache[key], layout, scale=2)
    )
    assert series.ns[15] == pytest.approx(ns[layout.index_of(element.id)])


def test_frame_png_round_trip(tmp_path, highlight_frame):
    _, frame = highlight_frame
    path = save_frame(frame, tmp_path / "frame.png")
    assert np.array_equal(load_frame(path), frame)
