import numpy as np
import pytest

from src.simulation.gazegen import SAMPLE_RATE_HZ
from src.utils.models import BehaviorParams, ScanStrategy


def test_gaze_covers_the_task_at_250_hz(short_gaze, short_trace):
    samples = short_gaze.samples
    assert list(samples.columns) == ["t_ms", "x_px", "y_px", "valid"]
    assert len(samples) == int(short_trace.duration_s * SAMPLE_RATE_HZ)
    assert samples["t_ms"].iloc[0] == 0.0
    assert np.allclose(np.diff(samples["t_ms"].to_numpy()), 4.0)


def test_invalid_samples_have_no_coordinates(short_gaze):
    s = short_gaze.samples
    assert s.loc[~s["valid"], ["x_px", "y_px"]].isna().all().all()
    assert s.loc[s["valid"], ["x_px", "y_px"]].notna().all().all()


def test_generation_is_seeded(generator, short_trace, layout, behavior, short_gaze):
    again = generator.generate_gaze(short_trace, layout, behavior, seed=3, participant_id=0)
    assert again.samples.equals(short_gaze.samples)
    assert again.keypresses_ms == short_gaze.keypresses_ms
    other = generator.generate_gaze(short_trace, layout, behavior, seed=3, participant_id=1)
    assert not other.samples.equals(short_gaze.samples)


def test_key_presses_fall_inside_intervals(short_gaze, short_trace):
    onsets = [iv.onset_s * 1000.0 for iv in short_trace.plan.intervals]
    assert short_gaze.keypresses_ms == sorted(short_gaze.keypresses_ms)
    for press in short_gaze.keypresses_ms:
        k = int(np.searchsorted(onsets, press, side="right") - 1)
        assert onsets[k] <= press < onsets[k] + 15000.0


def test_calibration_segments(generator, layout, behavior):
    segments = generator.generate_calibration(layout, task_id=1, params=behavior, seed=3, participant_id=2)
    assert len(segments) == 4
    kinds = {layout.element(s.element_id).icon_kind for s in segments}
    assert len(kinds) == 1
    for i, seg in enumerate(segments):
        assert seg.samples["t_ms"].iloc[0] == pytest.approx(i * 5000.0)
        assert len(seg.samples) == 5 * SAMPLE_RATE_HZ
        assert seg.target_center == layout.element(seg.element_id).center


def test_target_attention_shapes(generator, behavior):
    tau = np.arange(0.05, 5.0, 0.1)
    with_highlight = generator.target_attention(tau, True, behavior)
    without = generator.target_attention(tau, False, behavior)
    assert np.all((with_highlight >= 0) & (with_highlight <= 1))
    peak = tau[np.argmax(with_highlight)]
    assert 0.3 <= peak <= 1.2
    assert with_highlight.max() > 3 * without[tau < 1.5].max()
    assert generator.target_attention(np.array([0.0, -1.0]), True, behavior).tolist() == [0.0, 0.0]


def test_ground_truth_rows_are_distributions(generator, short_trace, layout, behavior):
    df = generator.behavior_ground_truth(short_trace, layout, behavior)
    assert df.shape == (600, 32)
    assert np.allclose(df.sum(axis=1), 1.0)


def test_random_walk_scan_stays_on_screen(generator, short_trace, layout):
    params = BehaviorParams(scan_strategy=ScanStrategy.RANDOM_WALK, poor_tracking_prob=0.0)
    gaze = generator.generate_gaze(short_trace, layout, params, seed=4, participant_id=0)
    valid = gaze.samples[gaze.samples["valid"]]
    assert valid["x_px"].between(0, layout.width_px).all()
    assert valid["y_px"].between(0, layout.height_px).all()


def test_participant_jitter_is_bounded(generator, behavior):
    for pid in range(20):
        p = generator.participant_params(behavior, seed=1, participant_id=pid)
        assert 0.0 <= p.capture_prob <= 1.0
        assert 0.5 * behavior.press_delay_s <= p.press_delay_s <= 1.5 * behavior.press_delay_s
    flat = behavior.model_copy(update={"participant_jitter": 0.0})
    assert generator.participant_params(flat, 1, 3) == flat
