import math

import numpy as np
import pytest

from src.simulation.dronesim import (
    BACKGROUND_RGB,
    HIGHLIGHT_RGB,
    ICON_RGB,
    DroneSimulator,
    haversine_m,
    normalized_value,
)
from src.utils.models import IconKind, RotorState, SimulationConfig, ZoneState


def brute_haversine(lat1, lon1, lat2, lon2, r=6_371_000.0):
    """Spherical law of cosines"""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return r * math.acos(max(-1.0, min(1.0, c)))


def test_haversine_agrees_with_law_of_cosines():
    rng = np.random.default_rng(1)
    for _ in range(50):
        lat1, lat2 = rng.uniform(49.2, 49.4, 2)
        lon1, lon2 = rng.uniform(6.9, 7.1, 2)
        assert haversine_m(lat1, lon1, lat2, lon2) == pytest.approx(
            brute_haversine(lat1, lon1, lat2, lon2), rel=1e-6, abs=1e-3
        )


def test_full_task_has_7200_frames():
    trace = DroneSimulator().simulate_task(seed=11, task_id=2)
    assert len(trace.frames) == 7200
    assert trace.duration_s == pytest.approx(300.0)
    assert len(trace.plan.intervals) == 20
    assert [iv.onset_s for iv in trace.plan.intervals] == [15.0 * k for k in range(20)]


def test_rerun_is_bit_identical(simulator):
    a = simulator.simulate_task(seed=5, task_id=1)
    b = simulator.simulate_task(seed=5, task_id=1)
    assert a.model_dump() == b.model_dump()
    c = simulator.simulate_task(seed=6, task_id=1)
    assert c.model_dump() != a.model_dump()


def test_critical_thresholds(simulator):
    rng = np.random.default_rng(0)
    route = simulator.plan_route(rng)
    state = simulator.initial_state(route, rng)
    assert simulator.is_critical_state(state) is None

    battery = simulator.inject_critical(state, IconKind.BATTERY, rng)
    assert battery.battery_pct < 10.0
    assert simulator.is_critical_state(battery) == IconKind.BATTERY

    wind = simulator.inject_critical(state, IconKind.WIND, rng)
    assert wind.wind_mps > 10.0
    assert simulator.is_critical_state(wind) == IconKind.WIND

    assert simulator.inject_critical(state, IconKind.ROTOR).rotor == RotorState.OFF
    assert simulator.inject_critical(state, IconKind.ZONE).zone == ZoneState.NO_FLY

    with pytest.raises(ValueError):
        simulator.inject_critical(state, IconKind.ALTITUDE)


def test_rotor_off_means_continuous_descent(simulator):
    rng = np.random.default_rng(2)
    route = simulator.plan_route(rng)
    state = simulator.inject_critical(simulator.initial_state(route, rng), IconKind.ROTOR)
    altitudes = [state.altitude_m]
    for _ in range(3):
        state = simulator.step_state(state, route, 1.0 / 24.0, rng)
        altitudes.append(state.altitude_m)
    assert all(b < a for a, b in zip(altitudes, altitudes[1:]))


def test_step_state_edge_cases(simulator):
    rng = np.random.default_rng(3)
    route = simulator.plan_route(rng)
    state = simulator.initial_state(route, rng)
    assert simulator.step_state(state, route, 0.0, rng) == state
    with pytest.raises(ValueError):
        simulator.step_state(state, route, -0.1, rng)

    arrived = state.model_copy(update={"distance_m": 0.0})
    stepped = simulator.step_state(arrived, route, 1.0, rng)
    assert stepped.h_speed_mps == 0.0
    assert stepped.distance_m == 0.0


def test_critical_window_is_flagged_on_every_frame(short_trace):
    fps = short_trace.frame_rate_hz
    for iv in short_trace.plan.critical_intervals():
        frames = short_trace.frames[int(iv.onset_s * fps):int((iv.onset_s + 15.0) * fps)]
        assert all(f.critical is not None and f.critical.drone == iv.drone_index for f in frames)
        first = frames[0].drones[iv.drone_index]
        assert DroneSimulator().is_critical_state(first) == iv.kind


def test_highlighted_ids_follow_the_plan(short_trace, layout, simulator):
    for iv in short_trace.plan.intervals:
        shown = simulator.highlighted_ids(short_trace, layout, iv.onset_s + 1.0)
        if iv.is_critical and iv.highlighted:
            assert shown == [layout.element_for(iv.drone_index, iv.kind).id]
        else:
            assert shown == []


def test_invalid_probabilities_rejected(simulator):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        simulator.schedule_intervals(rng, p_critical=1.2)
    with pytest.raises(ValueError):
        SimulationConfig(n_intervals=19)


def test_questions_ask_about_two_status_icons(simulator):
    plan = simulator.schedule_intervals(np.random.default_rng(9))
    assert plan.question_times_s
    gaps = np.diff([0.0] + plan.question_times_s)
    assert np.all(gaps >= 30.0 - 1e-6) and np.all(gaps <= 60.0 + 1e-6)
    for icons in plan.queried_icons:
        assert len(icons) == 2
        assert all(kind not in (IconKind.BATTERY, IconKind.WIND, IconKind.ROTOR, IconKind.ZONE)
                   for _, kind in icons)


@pytest.mark.slow
def test_interval_frequencies_over_many_plans():
    sim = DroneSimulator()
    critical = highlighted = n_critical = 0
    n = 0
    for seed in range(10_000):
        plan = sim.schedule_intervals(np.random.default_rng(seed))
        for iv in plan.intervals:
            n += 1
            critical += iv.is_critical
            if iv.is_critical:
                n_critical += 1
                highlighted += iv.highlighted
    assert critical / n == pytest.approx(0.8, abs=0.01)
    assert highlighted / n_critical == pytest.approx(0.5, abs=0.015)


def test_render_frame_colors(layout, simulator):
    target = layout.elements[5]
    frame = simulator.render_frame(layout, [target.id], size=(960, 600))
    assert frame.shape == (600, 960, 3) and frame.dtype == np.uint8
    assert tuple(frame[0, 0]) == BACKGROUND_RGB
    cx, cy = (int(c / 2) for c in target.center)
    assert tuple(frame[cy, cx]) == HIGHLIGHT_RGB
    ox, oy = (int(c / 2) for c in layout.elements[0].center)
    assert tuple(frame[oy, ox]) == ICON_RGB


def test_trace_files_round_trip(short_trace, simulator, tmp_path):
    jsonl = simulator.write_trace_jsonl(short_trace, tmp_path / "task.jsonl")
    plan = simulator.write_plan_json(short_trace, tmp_path / "plan.json")
    events = simulator.write_event_csv(short_trace, tmp_path / "events.csv")

    restored = simulator.read_trace(jsonl, plan)
    assert restored.plan == short_trace.plan
    assert len(restored.frames) == len(short_trace.frames)
    assert [e.kind for e in restored.events] == [e.kind for e in short_trace.events]
    assert events.read_text().splitlines()[0] == "task_id,onset_ms,kind,drone,highlighted"


def test_normalized_values_in_unit_range(short_trace):
    for frame in short_trace.frames[::240]:
        for state in frame.drones:
            for kind in IconKind:
                assert 0.0 <= normalized_value(state, kind) <= 1.0


def test_altitude_drops_near_destination(simulator):
    rng = np.random.default_rng(4)
    route = simulator.plan_route(rng)
    state = simulator.initial_state(route, rng)
    near = state.model_copy(update={"distance_m": 0.04 * route.initial_distance_m})
    assert simulator.step_state(near, route, 1.0, rng).altitude_m < near.altitude_m


def test_battery_never_rises_and_holds_the_floor(simulator):
    rng = np.random.default_rng(8)
    route = simulator.plan_route(rng)
    state = simulator.initial_state(route, rng).model_copy(update={"battery_pct": 20.0})
    levels = [state.battery_pct]
    for _ in range(1000):
        state = simulator.step_state(state, route, 1.0, rng)
        levels.append(state.battery_pct)
    assert all(b <= a for a, b in zip(levels, levels[1:]))
    assert min(levels) >= 10.0
    assert levels[-1] == pytest.approx(10.0)


def test_all_critical_none_highlighted():
    plan = DroneSimulator().schedule_intervals(np.random.default_rng(9), p_critical=1.0, p_highlight=0.0)
    assert len(plan.intervals) == 20
    assert all(iv.is_critical for iv in plan.intervals)
    assert not any(iv.highlighted for iv in plan.intervals)


def test_route_to_the_same_point_has_zero_distance():
    route = DroneSimulator.route_between((49.3, 7.0), (49.3, 7.0))
    assert route.initial_distance_m == 0.0
