"""
Seeded multi-drone telemetry simulation with critical-situation and
question scheduling
"""
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.utils.errors import DegenerateInputError
from src.utils.models import (
    SAFETY_KINDS,
    STATUS_KINDS,
    CriticalFlag,
    DroneState,
    FrameRecord,
    IconKind,
    Interval,
    IntervalPlan,
    Layout,
    RotorState,
    Route,
    ScenarioEvent,
    ScenarioTrace,
    SimulationConfig,
    Weather,
    ZoneState,
)

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0

# Physical range of each icon kind, used to min-max normalize task values
KIND_RANGES: Dict[IconKind, Tuple[float, float]] = {
    IconKind.BATTERY: (0.0, 100.0),
    IconKind.WIND: (0.0, 14.0),
    IconKind.ROTOR: (0.0, 1.0),
    IconKind.ZONE: (0.0, 1.0),
    IconKind.H_SPEED: (0.0, 15.0),
    IconKind.ALTITUDE: (0.0, 150.0),
    IconKind.DISTANCE: (0.0, 30_000.0),
    IconKind.WEATHER: (0.0, 2.0),
}

WEATHER_ORDER: List[Weather] = [Weather.CLEAR, Weather.CLOUDY, Weather.RAIN]

# Schematic frame colors
BACKGROUND_RGB = (40, 40, 40)
ICON_RGB = (110, 110, 110)
BORDER_RGB = (170, 170, 170)
HIGHLIGHT_RGB = (255, 215, 0)


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in metres"""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def bearing_rad(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Initial bearing in [0, 2*pi) from point 1 to point 2"""
    dl = math.radians(lon2 - lon1)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    x = math.sin(dl) * math.cos(p2)
    y = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    b = math.atan2(x, y)
    return b if b >= 0 else b + 2 * math.pi


def step_latlon(lat: float, lon: float, bearing: float, distance_m: float) -> Tuple[float, float]:
    """Move distance_m along bearing (radians) on the sphere"""
    d = distance_m / EARTH_RADIUS_M
    p1, l1 = math.radians(lat), math.radians(lon)
    p2 = math.asin(math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(bearing))
    l2 = l1 + math.atan2(
        math.sin(bearing) * math.sin(d) * math.cos(p1),
        math.cos(d) - math.sin(p1) * math.sin(p2),
    )
    return math.degrees(p2), math.degrees(l2)


def kind_value(state: DroneState, kind: IconKind) -> float:
    """Raw numeric value shown by an icon"""
    if kind == IconKind.BATTERY:
        return state.battery_pct
    if kind == IconKind.WIND:
        return state.wind_mps
    if kind == IconKind.ROTOR:
        return 1.0 if state.rotor == RotorState.ON else 0.0
    if kind == IconKind.ZONE:
        return 1.0 if state.zone == ZoneState.NO_FLY else 0.0
    if kind == IconKind.H_SPEED:
        return state.h_speed_mps
    if kind == IconKind.ALTITUDE:
        return state.altitude_m
    if kind == IconKind.DISTANCE:
        return state.distance_m
    return float(WEATHER_ORDER.index(state.weather))


def normalized_value(state: DroneState, kind: IconKind) -> float:
    """Icon value min-max scaled over the kind's physical range, clipped to [0, 1]"""
    lo, hi = KIND_RANGES[kind]
    return float(np.clip((kind_value(state, kind) - lo) / (hi - lo), 0.0, 1.0))


class DroneSimulator:
    """Simulates telemetry of the monitored drones for one task at a time"""

    def __init__(self, cfg: Optional[SimulationConfig] = None):
        """
        Initialize simulator

        Args:
            cfg: Numeric dynamics; defaults are used when omitted
        """
        self.cfg = cfg or SimulationConfig()

    def in_no_fly_zone(self, position: Tuple[float, float]) -> bool:
        lat_min, lat_max, lon_min, lon_max = self.cfg.no_fly_box
        return lat_min <= position[0] <= lat_max and lon_min <= position[1] <= lon_max

    def plan_route(
        self,
        rng: np.random.Generator,
        bounds: Optional[Tuple[float, float, float, float]] = None,
    ) -> Route:
        """
        Pick start and destination inside a lat/lon rectangle

        Endpoints are redrawn while they fall inside the no-fly box.

        Args:
            rng: Seeded generator
            bounds: (lat_min, lat_max, lon_min, lon_max); config bounds when omitted

        Returns:
            Route with great-circle bearing and distance
        """
        if bounds is None:
            bounds = (self.cfg.lat_min, self.cfg.lat_max, self.cfg.lon_min, self.cfg.lon_max)
        lat_min, lat_max, lon_min, lon_max = bounds
        if not (lat_max > lat_min and lon_max > lon_min):
            raise DegenerateInputError(f"Degenerate route bounds {bounds}")

        def draw() -> Tuple[float, float]:
            for _ in range(100):
                p = (float(rng.uniform(lat_min, lat_max)), float(rng.uniform(lon_min, lon_max)))
                if not self.in_no_fly_zone(p):
                    return p
            raise DegenerateInputError(f"Route bounds {bounds} lie inside the no-fly box")

        start, end = draw(), draw()
        return self.route_between(start, end)

    @staticmethod
    def route_between(start: Tuple[float, float], end: Tuple[float, float]) -> Route:
        distance = haversine_m(start[0], start[1], end[0], end[1])
        bearing = math.degrees(bearing_rad(start[0], start[1], end[0], end[1])) % 360.0
        return Route(start=start, end=end, bearing_deg=bearing, initial_distance_m=distance)

    def initial_state(self, route: Route, rng: np.random.Generator) -> DroneState:
        cfg = self.cfg
        return DroneState(
            battery_pct=float(rng.uniform(*cfg.battery_start_pct)),
            wind_mps=float(rng.uniform(0.0, cfg.wind_nominal_max_mps)),
            h_speed_mps=cfg.cruise_speed_mps,
            altitude_m=float(rng.uniform(*cfg.cruise_altitude_m)),
            distance_m=route.initial_distance_m,
            weather=WEATHER_ORDER[int(rng.integers(len(WEATHER_ORDER)))],
            position=route.start,
        )

    def step_state(
        self,
        state: DroneState,
        route: Route,
        dt_s: float,
        rng: np.random.Generator,
    ) -> DroneState:
        """
        Advance one drone by dt_s seconds

        A battery below the floor or a wind above the critical threshold
        means a critical value has been injected; those keep evolving
        without being pulled back to nominal ranges.

        Args:
            state: Current state
            route: The drone's route
            dt_s: Step length, >= 0
            rng: Seeded generator

        Returns:
            New DroneState
        """
        if dt_s < 0:
            raise ValueError(f"dt_s must be >= 0, got {dt_s}")
        if dt_s == 0:
            return state.model_copy()

        cfg = self.cfg

        # Battery
        drain = cfg.battery_drain_pct * dt_s / cfg.battery_drain_period_s
        if state.battery_pct >= cfg.battery_floor_pct:
            battery = max(cfg.battery_floor_pct, state.battery_pct - drain)
        else:
            battery = max(0.0, state.battery_pct - drain)

        # Wind random walk
        wind = state.wind_mps + float(rng.normal(0.0, cfg.wind_walk_sd))
        if state.wind_mps > cfg.wind_critical_mps:
            wind = float(np.clip(wind, cfg.wind_critical_mps + 1e-3, cfg.critical_wind_mps[1]))
        else:
            wind = float(np.clip(wind, 0.0, cfg.wind_nominal_max_mps))

        # Horizontal speed with noise, slowing linearly near the destination
        initial = route.initial_distance_m
        if initial <= 0 or state.distance_m <= 0:
            speed = 0.0
        else:
            speed = max(0.0, cfg.cruise_speed_mps + float(rng.normal(0.0, cfg.speed_noise_sd)))
            slow_zone = cfg.slowdown_fraction * initial
            if state.distance_m < slow_zone:
                speed *= state.distance_m / slow_zone

        travelled = min(speed * dt_s, state.distance_m)
        distance = state.distance_m - travelled
        position = state.position
        if travelled > 0:
            b = bearing_rad(position[0], position[1], route.end[0], route.end[1])
            position = step_latlon(position[0], position[1], b, travelled)

        # Altitude
        altitude = state.altitude_m
        if state.rotor == RotorState.OFF:
            altitude -= cfg.rotor_off_descent_mps * dt_s
        if initial > 0 and state.distance_m < cfg.descent_fraction * initial:
            altitude -= cfg.descent_rate_mps * dt_s
        altitude = max(0.0, altitude)

        return state.model_copy(update={
            "battery_pct": battery,
            "wind_mps": wind,
            "h_speed_mps": speed,
            "distance_m": distance,
            "altitude_m": altitude,
            "position": position,
        })

    def inject_critical(
        self,
        state: DroneState,
        kind: IconKind,
        rng: Optional[np.random.Generator] = None,
    ) -> DroneState:
        """
        Push one safety indicator past its hazard threshold

        Args:
            state: Nominal state
            kind: One of the four safety kinds
            rng: Generator for the drawn critical value

        Returns:
            State with the critical value applied
        """
        if kind not in SAFETY_KINDS:
            raise ValueError(f"{kind} is not a safety icon")
        rng = rng if rng is not None else np.random.default_rng(0)
        cfg = self.cfg

        if kind == IconKind.BATTERY:
            lo, hi = cfg.critical_battery_pct
            return state.model_copy(update={"battery_pct": float(rng.uniform(lo, hi))})
        if kind == IconKind.WIND:
            lo, hi = cfg.critical_wind_mps
            # (lo, hi]
            return state.model_copy(update={"wind_mps": float(hi - (hi - lo) * rng.random())})
        if kind == IconKind.ROTOR:
            return state.model_copy(update={"rotor": RotorState.OFF})
        return state.model_copy(update={"zone": ZoneState.NO_FLY})

    def is_critical_state(self, state: DroneState) -> Optional[IconKind]:
        """Safety kind whose indicator violates its threshold, if any"""
        cfg = self.cfg
        if state.battery_pct < cfg.battery_critical_pct:
            return IconKind.BATTERY
        if state.wind_mps > cfg.wind_critical_mps:
            return IconKind.WIND
        if state.rotor == RotorState.OFF:
            return IconKind.ROTOR
        if state.zone == ZoneState.NO_FLY:
            return IconKind.ZONE
        return None

    def schedule_intervals(
        self,
        rng: np.random.Generator,
        p_critical: Optional[float] = None,
        p_highlight: Optional[float] = None,
    ) -> IntervalPlan:
        """
        Draw the critical situations, highlights and question times of a task

        Args:
            rng: Seeded generator
            p_critical: Probability an interval holds a critical situation
            p_highlight: Probability a critical icon is highlighted

        Returns:
            IntervalPlan
        """
        cfg = self.cfg
        p_critical = cfg.p_critical if p_critical is None else p_critical
        p_highlight = cfg.p_highlight if p_highlight is None else p_highlight
        for name, p in (("p_critical", p_critical), ("p_highlight", p_highlight)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")

        intervals = []
        for k in range(cfg.n_intervals):
            critical = bool(rng.random() < p_critical)
            kind = drone = None
            highlighted = False
            if critical:
                kind = SAFETY_KINDS[int(rng.integers(len(SAFETY_KINDS)))]
                drone = int(rng.integers(cfg.n_drones))
                highlighted = bool(rng.random() < p_highlight)
            intervals.append(Interval(
                index=k,
                is_critical=critical,
                kind=kind,
                drone_index=drone,
                highlighted=highlighted,
                onset_s=k * cfg.interval_s,
            ))

        question_times = []
        queried = []
        t = float(rng.uniform(cfg.question_gap_min_s, cfg.question_gap_max_s))
        while t < cfg.task_length_s:
            question_times.append(round(t, 6))
            picks = rng.choice(
                cfg.n_drones * len(STATUS_KINDS),
                size=min(cfg.queried_per_question, cfg.n_drones * len(STATUS_KINDS)),
                replace=False,
            )
            queried.append([
                (int(p) // len(STATUS_KINDS), STATUS_KINDS[int(p) % len(STATUS_KINDS)])
                for p in picks
            ])
            t += float(rng.uniform(cfg.question_gap_min_s, cfg.question_gap_max_s))

        return IntervalPlan(intervals=intervals, question_times_s=question_times, queried_icons=queried)

    def simulate_task(self, seed: int, task_id: int = 0) -> ScenarioTrace:
        """
        Simulate one full monitoring task

        Args:
            seed: Run seed
            task_id: Task number, mixed into the seed

        Returns:
            ScenarioTrace with one FrameRecord per frame
        """
        cfg = self.cfg
        plan_seq, route_seq, step_seq = np.random.SeedSequence([seed, task_id]).spawn(3)
        plan_rng = np.random.default_rng(plan_seq)
        route_rng = np.random.default_rng(route_seq)
        step_rng = np.random.default_rng(step_seq)

        plan = self.schedule_intervals(plan_rng)
        routes = [self.plan_route(route_rng) for _ in range(cfg.n_drones)]
        states = [self.initial_state(r, route_rng) for r in routes]

        dt = 1.0 / cfg.frame_rate_hz
        frames_per_interval = int(round(cfg.interval_s * cfg.frame_rate_hz))
        weather_frames = int(round(cfg.weather_period_s * cfg.frame_rate_hz))
        question_frames = {int(math.floor(q * cfg.frame_rate_hz + 1e-9)) for q in plan.question_times_s}

        frames: List[FrameRecord] = []
        saved: Optional[DroneState] = None
        saved_drone = 0
        n_frames = cfg.n_intervals * frames_per_interval

        for f in range(n_frames):
            k = f // frames_per_interval
            interval = plan.intervals[k]

            if f > 0:
                states = [self.step_state(s, r, dt, step_rng) for s, r in zip(states, routes)]

            if f > 0 and f % weather_frames == 0:
                states = [self._step_weather(s, step_rng) for s in states]

            if f % frames_per_interval == 0:
                if saved is not None:
                    states[saved_drone] = self._restore(states[saved_drone], saved)
                    saved = None
                if interval.is_critical:
                    saved_drone = interval.drone_index
                    saved = states[saved_drone]
                    states[saved_drone] = self.inject_critical(saved, interval.kind, step_rng)

            critical = None
            if interval.is_critical:
                critical = CriticalFlag(
                    drone=interval.drone_index,
                    kind=interval.kind,
                    highlighted=interval.highlighted,
                )
            frames.append(FrameRecord(
                frame=f,
                t_ms=round(f * 1000.0 / cfg.frame_rate_hz, 4),
                interval=k,
                drones=list(states),
                critical=critical,
                question=f in question_frames,
            ))

        events = [
            ScenarioEvent(t_s=iv.onset_s, kind=iv.kind, drone=iv.drone_index, highlighted=iv.highlighted)
            for iv in plan.critical_intervals()
        ]
        logger.info(
            "Simulated task %d: %d frames, %d critical (%d highlighted), %d questions",
            task_id, len(frames), len(events), sum(e.highlighted for e in events),
            len(plan.question_times_s),
        )
        return ScenarioTrace(
            task_id=task_id,
            frame_rate_hz=cfg.frame_rate_hz,
            routes=routes,
            frames=frames,
            plan=plan,
            events=events,
        )

    def _step_weather(self, state: DroneState, rng: np.random.Generator) -> DroneState:
        """Three-state Markov chain: stay, else move to one of the other two"""
        if rng.random() < self.cfg.weather_stay_prob:
            return state
        others = [w for w in WEATHER_ORDER if w != state.weather]
        return state.model_copy(update={"weather": others[int(rng.integers(len(others)))]})

    def _restore(self, state: DroneState, nominal: DroneState) -> DroneState:
        """End of a critical interval: safety indicators return to nominal values"""
        cfg = self.cfg
        battery = state.battery_pct
        if battery < cfg.battery_floor_pct:
            drained = cfg.battery_drain_pct * cfg.interval_s / cfg.battery_drain_period_s
            battery = max(cfg.battery_floor_pct, nominal.battery_pct - drained)
        wind = state.wind_mps if state.wind_mps <= cfg.wind_nominal_max_mps else nominal.wind_mps
        altitude = nominal.altitude_m if state.rotor == RotorState.OFF else state.altitude_m
        return state.model_copy(update={
            "battery_pct": battery,
            "wind_mps": wind,
            "rotor": RotorState.ON,
            "zone": ZoneState.FREE,
            "altitude_m": altitude,
        })

    # ------------------------------------------------------------------
    # Queries over a trace
    # ------------------------------------------------------------------

    def highlighted_ids(self, trace: ScenarioTrace, layout: Layout, t_s: float) -> List[str]:
        """Element ids shown highlighted at a task time"""
        frame = trace.frame_at(t_s)
        if frame.critical is None or not frame.critical.highlighted:
            return []
        return [layout.element_for(frame.critical.drone, frame.critical.kind).id]

    def render_frame(
        self,
        layout: Layout,
        highlighted_ids: Sequence[str] = (),
        size: Optional[Tuple[int, int]] = None,
    ) -> np.ndarray:
        """
        Schematic RGB raster of the interface

        Args:
            layout: Interface layout
            highlighted_ids: Elements drawn with the yellow highlight fill
            size: Optional (width, height); defaults to the layout resolution

        Returns:
            uint8 array of shape (H, W, 3)
        """
        width, height = size if size else (layout.width_px, layout.height_px)
        sx, sy = width / layout.width_px, height / layout.height_px
        frame = np.empty((height, width, 3), dtype=np.uint8)
        frame[:] = BACKGROUND_RGB
        highlighted = set(highlighted_ids)

        for e in layout.elements:
            x, y, w, h = e.bbox
            x0, y0 = int(round(x * sx)), int(round(y * sy))
            x1, y1 = int(round((x + w) * sx)), int(round((y + h) * sy))
            b = max(1, int(round(2 * min(sx, sy))))
            frame[y0:y1, x0:x1] = BORDER_RGB
            frame[y0 + b:y1 - b, x0 + b:x1 - b] = HIGHLIGHT_RGB if e.id in highlighted else ICON_RGB

        return frame

    def kind_series(
        self,
        trace: ScenarioTrace,
        drone: int,
        kind: IconKind,
        times_s: np.ndarray,
    ) -> np.ndarray:
        """Normalized icon value sampled at task times"""
        return np.array([
            normalized_value(trace.frame_at(float(t)).drones[drone], kind) for t in times_s
        ])

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def write_trace_jsonl(self, trace: ScenarioTrace, path: Union[str, Path]) -> Path:
        """One JSON record per frame"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for fr in trace.frames:
                record = {
                    "task_id": trace.task_id,
                    "interval": fr.interval,
                    "frame": fr.frame,
                    "t_ms": fr.t_ms,
                    "drones": [d.to_record() for d in fr.drones],
                    "critical": None if fr.critical is None else {
                        "drone": fr.critical.drone,
                        "kind": fr.critical.kind.value,
                        "highlighted": fr.critical.highlighted,
                    },
                    "question": fr.question,
                }
                f.write(json.dumps(record, separators=(",", ":")) + "\n")
        return path

    def write_event_csv(self, trace: ScenarioTrace, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df = pd.DataFrame(
            [
                {
                    "task_id": trace.task_id,
                    "onset_ms": round(e.t_s * 1000.0, 3),
                    "kind": e.kind.value,
                    "drone": e.drone,
                    "highlighted": e.highlighted,
                }
                for e in trace.events
            ],
            columns=["task_id", "onset_ms", "kind", "drone", "highlighted"],
        )
        df.to_csv(path, index=False, lineterminator="\n")
        return path

    def write_plan_json(self, trace: ScenarioTrace, path: Union[str, Path]) -> Path:
        """Plan and routes, needed to rebuild a trace from its JSON lines"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "task_id": trace.task_id,
            "frame_rate_hz": trace.frame_rate_hz,
            "plan": trace.plan.model_dump(mode="json"),
            "routes": [r.model_dump(mode="json") for r in trace.routes],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
        return path

    def read_trace(self, jsonl_path: Union[str, Path], plan_path: Union[str, Path]) -> ScenarioTrace:
        """Rebuild a ScenarioTrace from the files written by the writers above"""
        with open(plan_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        plan = IntervalPlan(**meta["plan"])

        frames = []
        with open(jsonl_path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                drones = [
                    DroneState(
                        battery_pct=d["battery"],
                        wind_mps=d["wind"],
                        rotor=d["rotor"],
                        zone=d["zone"],
                        h_speed_mps=d["h_speed"],
                        altitude_m=d["alt"],
                        distance_m=d["dist"],
                        weather=d["weather"],
                        position=(d["lat"], d["lon"]),
                    )
                    for d in rec["drones"]
                ]
                frames.append(FrameRecord(
                    frame=rec["frame"],
                    t_ms=rec["t_ms"],
                    interval=rec["interval"],
                    drones=drones,
                    critical=None if rec["critical"] is None else CriticalFlag(**rec["critical"]),
                    question=rec["question"],
                ))

        events = [
            ScenarioEvent(t_s=iv.onset_s, kind=iv.kind, drone=iv.drone_index, highlighted=iv.highlighted)
            for iv in plan.critical_intervals()
        ]
        return ScenarioTrace(
            task_id=meta["task_id"],
            frame_rate_hz=meta["frame_rate_hz"],
            routes=[Route(**r) for r in meta["routes"]],
            frames=frames,
            plan=plan,
            events=events,
        )


# Global simulator instance
drone_simulator = DroneSimulator()
