"""
Pydantic models shared by every stage of the lab
"""
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ---------------------------------------------------------------------------
# Interface geometry
# ---------------------------------------------------------------------------

class IconKind(str, Enum):
    """Icon kinds shown in every drone block"""
    BATTERY = "battery"
    WIND = "wind"
    ROTOR = "rotor"
    ZONE = "zone"
    H_SPEED = "h_speed"
    ALTITUDE = "altitude"
    DISTANCE = "distance"
    WEATHER = "weather"


SAFETY_KINDS: Tuple[IconKind, ...] = (
    IconKind.BATTERY,
    IconKind.WIND,
    IconKind.ROTOR,
    IconKind.ZONE,
)

STATUS_KINDS: Tuple[IconKind, ...] = (
    IconKind.H_SPEED,
    IconKind.ALTITUDE,
    IconKind.DISTANCE,
    IconKind.WEATHER,
)


class Element(BaseModel):
    """One icon AOI on the monitoring interface"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: str
    drone_index: int = Field(..., ge=0, alias="drone")
    icon_kind: IconKind = Field(..., alias="kind")
    bbox: Tuple[int, int, int, int] = Field(..., description="x, y, w, h in pixels")

    @field_validator("bbox")
    @classmethod
    def validate_bbox(cls, v):
        if v[2] <= 0 or v[3] <= 0:
            raise ValueError(f"bbox must have positive size, got {v}")
        return v

    @property
    def center(self) -> Tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)

    @property
    def area(self) -> int:
        return self.bbox[2] * self.bbox[3]

    def contains(self, x: float, y: float) -> bool:
        """Half-open membership: x in [x0, x0 + w), y in [y0, y0 + h)"""
        x0, y0, w, h = self.bbox
        return x0 <= x < x0 + w and y0 <= y < y0 + h


class Layout(BaseModel):
    """GUI layout; immutable once loaded"""
    model_config = ConfigDict(frozen=True)

    width_px: int = Field(..., gt=0)
    height_px: int = Field(..., gt=0)
    elements: List[Element]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def element_ids(self) -> List[str]:
        return [e.id for e in self.elements]

    def element(self, element_id: str) -> Element:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(f"Element {element_id} not in layout")

    def index_of(self, element_id: str) -> int:
        for i, e in enumerate(self.elements):
            if e.id == element_id:
                return i
        raise KeyError(f"Element {element_id} not in layout")

    def elements_of_drone(self, drone_index: int) -> List[Element]:
        return [e for e in self.elements if e.drone_index == drone_index]

    def element_for(self, drone_index: int, kind: IconKind) -> Element:
        for e in self.elements:
            if e.drone_index == drone_index and e.icon_kind == kind:
                return e
        raise KeyError(f"No {kind.value} icon for drone {drone_index}")


class TimeGrid(BaseModel):
    """Sampling grid of NS series around a critical onset"""
    model_config = ConfigDict(frozen=True)

    frame_rate_hz: int = 24
    ns_step_s: float = 0.1
    window_start_s: float = -1.0
    window_end_s: float = 5.0
    T: int = 60

    @model_validator(mode="after")
    def check_length(self):
        n = (self.window_end_s - self.window_start_s) / self.ns_step_s
        if abs(n - self.T) > 1e-6:
            raise ValueError(
                f"window length / ns_step_s = {n:.4f}, expected T = {self.T}"
            )
        return self

    @property
    def window(self) -> Tuple[float, float]:
        return (self.window_start_s, self.window_end_s)

    def slice_starts(self) -> np.ndarray:
        """Relative start time of each of the T slices"""
        return self.window_start_s + self.ns_step_s * np.arange(self.T)

    def slice_index(self, t_rel_s: float) -> int:
        """Index of the slice containing a relative time"""
        k = int(np.floor((t_rel_s - self.window_start_s) / self.ns_step_s + 1e-9))
        if k < 0 or k >= self.T:
            raise ValueError(f"t_rel_s={t_rel_s} outside the window {self.window}")
        return k


# ---------------------------------------------------------------------------
# Drone simulation
# ---------------------------------------------------------------------------

class RotorState(str, Enum):
    ON = "on"
    OFF = "off"


class ZoneState(str, Enum):
    FREE = "free"
    NO_FLY = "no_fly"


class Weather(str, Enum):
    CLEAR = "clear"
    CLOUDY = "cloudy"
    RAIN = "rain"


class DroneState(BaseModel):
    """Telemetry of one drone at one frame"""
    battery_pct: float = Field(..., ge=0, le=100)
    wind_mps: float = Field(..., ge=0)
    rotor: RotorState = RotorState.ON
    zone: ZoneState = ZoneState.FREE
    h_speed_mps: float = Field(..., ge=0)
    altitude_m: float = Field(..., ge=0)
    distance_m: float = Field(..., ge=0)
    weather: Weather = Weather.CLEAR
    position: Tuple[float, float] = Field(..., description="lat, lon in degrees")

    def to_record(self) -> Dict[str, Any]:
        """Compact JSON-lines record"""
        return {
            "battery": round(self.battery_pct, 4),
            "wind": round(self.wind_mps, 4),
            "rotor": self.rotor.value,
            "zone": self.zone.value,
            "h_speed": round(self.h_speed_mps, 4),
            "alt": round(self.altitude_m, 4),
            "dist": round(self.distance_m, 4),
            "weather": self.weather.value,
            "lat": round(self.position[0], 7),
            "lon": round(self.position[1], 7),
        }


class Route(BaseModel):
    """Great-circle route of one drone"""
    start: Tuple[float, float]
    end: Tuple[float, float]
    bearing_deg: float = Field(..., ge=0, lt=360)
    initial_distance_m: float = Field(..., ge=0)


class Interval(BaseModel):
    """One 15-second slot of a monitoring task"""
    index: int
    is_critical: bool
    kind: Optional[IconKind] = None
    drone_index: Optional[int] = None
    highlighted: bool = False
    onset_s: float


class IntervalPlan(BaseModel):
    """Critical-situation and question schedule of one task"""
    intervals: List[Interval]
    question_times_s: List[float] = Field(default_factory=list)
    queried_icons: List[List[Tuple[int, IconKind]]] = Field(
        default_factory=list, description="(drone, kind) pairs asked about at each question"
    )

    def critical_intervals(self) -> List[Interval]:
        return [iv for iv in self.intervals if iv.is_critical]


class CriticalFlag(BaseModel):
    drone: int
    kind: IconKind
    highlighted: bool


class FrameRecord(BaseModel):
    """Snapshot of all drones at one 24 Hz frame"""
    frame: int
    t_ms: float
    interval: int
    drones: List[DroneState]
    critical: Optional[CriticalFlag] = None
    question: bool = False


class ScenarioEvent(BaseModel):
    t_s: float
    kind: IconKind
    drone: int
    highlighted: bool


class ScenarioTrace(BaseModel):
    """Full simulated monitoring task"""
    task_id: int
    frame_rate_hz: int = 24
    routes: List[Route]
    frames: List[FrameRecord]
    plan: IntervalPlan
    events: List[ScenarioEvent]

    @property
    def duration_s(self) -> float:
        return len(self.frames) / float(self.frame_rate_hz)

    def frame_at(self, t_s: float) -> FrameRecord:
        k = int(np.clip(np.floor(t_s * self.frame_rate_hz + 1e-9), 0, len(self.frames) - 1))
        return self.frames[k]


class SimulationConfig(BaseModel):
    """Numeric dynamics of the drone simulator"""
    frame_rate_hz: int = 24
    task_length_s: float = 300.0
    interval_s: float = 15.0
    n_intervals: int = 20
    n_drones: int = Field(4, ge=1)
    p_critical: float = Field(0.8, ge=0, le=1)
    p_highlight: float = Field(0.5, ge=0, le=1)
    question_gap_min_s: float = 30.0
    question_gap_max_s: float = 60.0
    queried_per_question: int = 2
    lat_min: float = 49.20
    lat_max: float = 49.40
    lon_min: float = 6.90
    lon_max: float = 7.10
    cruise_speed_mps: float = 12.0
    speed_noise_sd: float = 0.3
    slowdown_fraction: float = 0.10
    descent_fraction: float = 0.05
    descent_rate_mps: float = 1.5
    cruise_altitude_m: Tuple[float, float] = (80.0, 120.0)
    battery_start_pct: Tuple[float, float] = (60.0, 100.0)
    battery_drain_pct: float = 1.0
    battery_drain_period_s: float = 30.0
    battery_floor_pct: float = 10.0
    wind_nominal_max_mps: float = 8.0
    wind_walk_sd: float = 0.05
    weather_period_s: float = 30.0
    weather_stay_prob: float = 0.8
    critical_battery_pct: Tuple[float, float] = (3.0, 9.0)
    critical_wind_mps: Tuple[float, float] = (10.0, 14.0)
    rotor_off_descent_mps: float = 2.0
    battery_critical_pct: float = 10.0
    wind_critical_mps: float = 10.0
    no_fly_box: Tuple[float, float, float, float] = Field(
        (49.28, 49.30, 6.98, 7.00), description="lat_min, lat_max, lon_min, lon_max"
    )

    @model_validator(mode="after")
    def check_structure(self):
        if abs(self.n_intervals * self.interval_s - self.task_length_s) > 1e-9:
            raise ValueError("n_intervals * interval_s must equal task_length_s")
        if self.question_gap_min_s > self.question_gap_max_s:
            raise ValueError("question_gap_min_s exceeds question_gap_max_s")
        return self


# ---------------------------------------------------------------------------
# Gaze generation and processing
# ---------------------------------------------------------------------------

class ScanStrategy(str, Enum):
    ROUND_ROBIN = "round_robin"
    RANDOM_WALK = "random_walk"


class BehaviorParams(BaseModel):
    """Synthetic observer model"""
    scan_strategy: ScanStrategy = ScanStrategy.ROUND_ROBIN
    fixation_dur_mu: float = Field(5.52, description="log-normal mu of fixation duration in ms")
    fixation_dur_sigma: float = Field(0.35, ge=0)
    fixation_jitter_px: float = Field(12.0, ge=0)
    sample_noise_px: float = Field(1.5, ge=0)
    saccade_noise_px: float = Field(2.0, ge=0)
    saccade_ms: Tuple[float, float] = (20.0, 60.0)
    within_block_prob: float = Field(0.7, ge=0, le=1)
    capture_prob: float = Field(0.58, ge=0, le=1)
    capture_latency_shape: float = Field(3.0, gt=0)
    capture_latency_scale: float = Field(0.1, gt=0)
    capture_latency_shift: float = Field(0.2, ge=0)
    dwell_on_target_s: float = Field(0.6, gt=0)
    dwell_shape: float = Field(8.0, gt=0)
    baseline_detect_hazard: float = Field(0.12, ge=0)
    post_detect_dwell_s: float = Field(0.8, gt=0)
    press_delay_s: float = Field(0.6, gt=0)
    press_delay_shape: float = Field(6.0, gt=0)
    false_alarm_prob: float = Field(0.03, ge=0, le=1)
    invalid_prob: float = Field(0.002, ge=0, le=1)
    participant_jitter: float = Field(0.1, ge=0, le=1)
    calibration_offset_sd_px: float = Field(12.0, ge=0)
    poor_tracking_prob: float = Field(0.13, ge=0, le=1)
    poor_tracking_offset_px: Tuple[float, float] = (80.0, 120.0)
    calibration_seconds_per_target: float = Field(5.0, gt=0)


class GazeTrace(BaseModel):
    """Raw 250 Hz gaze of one participant in one task"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    participant_id: int
    task_id: int
    sample_rate_hz: int = 250
    samples: pd.DataFrame = Field(..., description="columns t_ms, x_px, y_px, valid")
    keypresses_ms: List[float] = Field(default_factory=list)


class CalibrationSegment(BaseModel):
    """Gaze recorded while one calibration-check icon was highlighted"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    participant_id: int
    task_id: int
    element_id: str
    target_center: Tuple[float, float]
    samples: pd.DataFrame


class FixationConfig(BaseModel):
    dispersion_px: float = Field(25.0, gt=0)
    min_dur_ms: float = Field(50.0, gt=0)


class QualityConfig(BaseModel):
    window_s: float = Field(1.0, gt=0)
    max_offset_px: float = Field(70.0, gt=0)


class Fixation(BaseModel):
    """Detected fixation"""
    model_config = ConfigDict(frozen=True)

    start_ms: float
    end_ms: float
    duration_ms: float
    centroid: Tuple[float, float]


class QualityResult(BaseModel):
    accept: bool
    offset: Tuple[float, float]
    window_start_ms: float


class TrialLabel(str, Enum):
    HIT = "hit"
    MISS = "miss"
    FALSE_ALARM = "false_alarm"
    CORRECT_REJECTION = "correct_rejection"


class Trial(BaseModel):
    """One interval of one participant with its gaze and response"""
    interval: Interval
    fixations: List[Fixation] = Field(default_factory=list)
    keypress_ms: Optional[float] = None
    label: TrialLabel

    @property
    def is_hit(self) -> bool:
        return self.label == TrialLabel.HIT

    @property
    def is_miss(self) -> bool:
        return self.label == TrialLabel.MISS

    @property
    def is_false_alarm(self) -> bool:
        return self.label == TrialLabel.FALSE_ALARM

    @property
    def rt_s(self) -> Optional[float]:
        if not self.is_hit or self.keypress_ms is None:
            return None
        return self.keypress_ms / 1000.0 - self.interval.onset_s


class DetectionMetrics(BaseModel):
    """Rates over critical / non-critical trials; None when the denominator is 0"""
    hit_rate: Optional[float] = None
    mean_rt_s: Optional[float] = None
    false_alarm_rate: Optional[float] = None
    n_critical: int = 0
    n_non_critical: int = 0
    n_hits: int = 0
    undefined: List[str] = Field(default_factory=list)


class GazeMetrics(BaseModel):
    """Engagement and exploration metrics"""
    fixation_count: int = 0
    fixation_duration_s: float = 0.0
    revisits: int = 0
    mean_saccade_amplitude_px: float = 0.0
    scanpath_len_per_s_px: float = 0.0
    aoi_transition_rate_per_s: float = 0.0


# ---------------------------------------------------------------------------
# Saliency
# ---------------------------------------------------------------------------

class NormMode(str, Enum):
    RAW = "raw"
    UNIT_MAX = "unit_max"
    UNIT_SUM = "unit_sum"


class SaliencyMap(BaseModel):
    """Single-channel attention raster"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    norm_mode: NormMode = NormMode.RAW

    @field_validator("values")
    @classmethod
    def validate_values(cls, v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"saliency raster must be 2-D, got shape {v.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("saliency raster must be finite and non-negative")
        return v

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])


class SaliencyConfig(BaseModel):
    window_px: int = Field(35, ge=3)
    sigma_px: Optional[float] = Field(None, description="defaults to window_px / 6")
    bin_ms: float = Field(1000.0 / 24.0, gt=0)

    @field_validator("window_px")
    @classmethod
    def validate_window(cls, v):
        if v % 2 == 0:
            raise ValueError(f"smoothing window must be odd, got {v}")
        return v

    @property
    def sigma(self) -> float:
        return self.sigma_px if self.sigma_px is not None else self.window_px / 6.0


class NsValue(BaseModel):
    ns: float
    undefined_uniform: bool = False


class NsSeries(BaseModel):
    """Normalized saliency of one element over the event window"""
    element_id: str
    t_rel_s: List[float]
    ns: List[float]
    flags: List[bool] = Field(default_factory=list, description="True where undefined-uniform")

    def to_frame(self) -> pd.DataFrame:
        flags = self.flags or [False] * len(self.ns)
        return pd.DataFrame({
            "t_rel_s": self.t_rel_s,
            "element_id": self.element_id,
            "ns": self.ns,
            "flag": ["undefined_uniform" if f else "" for f in flags],
        })


# ---------------------------------------------------------------------------
# Metrics and statistics
# ---------------------------------------------------------------------------

class Split(str, Enum):
    HIGHLIGHT = "highlight"
    NO_HIGHLIGHT = "no_highlight"
    ALL = "all"


class MetricReport(BaseModel):
    split: Split
    auc: float
    nss: float
    sim: float
    cc: float
    kl: float
    mse: Optional[float] = None
    mae: Optional[float] = None
    n: int = 0


class LossWeights(BaseModel):
    w_kl: float = 10.0
    w_cc: float = -3.0
    w_sim: float = -2.0
    w_nss: float = 0.0


class MetricConfig(BaseModel):
    kl_eps: float = Field(1e-7, gt=0)


class RegressionReport(BaseModel):
    model: str
    split: Split
    mse: float
    mae: float
    n: int


class TestKind(str, Enum):
    SHAPIRO_WILK = "shapiro_wilk"
    T_TEST_IND = "t_test_ind"
    PAIRED_T_TEST = "paired_t_test"
    MANN_WHITNEY_U = "mann_whitney_u"
    PEARSON = "pearson"


class TestResult(BaseModel):
    __test__ = False  # keeps pytest from collecting the model

    statistic: float
    df: Optional[float] = None
    p_value: float = Field(..., ge=0, le=1)
    test_kind: TestKind
    n_a: Optional[int] = None
    n_b: Optional[int] = None
    method: str = ""


# ---------------------------------------------------------------------------
# ITTI baseline
# ---------------------------------------------------------------------------

class IttiConfig(BaseModel):
    levels: int = 9
    center_levels: Tuple[int, ...] = (2, 3, 4)
    deltas: Tuple[int, ...] = (3, 4)
    gabor_wavelength_px: float = 7.0
    gabor_sigma_px: float = 2.8
    gabor_size_px: int = 9
    local_max_fraction: float = 0.1
    min_size_px: int = 256
    frame_scale: int = Field(2, ge=1, description="ITTI frames render at layout size / frame_scale")


# ---------------------------------------------------------------------------
# HISM
# ---------------------------------------------------------------------------

class Variant(str, Enum):
    LSTM = "lstm"
    TRAN_ENC = "tranenc"
    TRAN_ENC_TASK = "tranenc-task"


class HismConfig(BaseModel):
    variant: Variant = Variant.TRAN_ENC_TASK
    image_size: int = Field(96, ge=8)
    color_channels: int = 3
    conv_channels: Tuple[int, int, int] = (8, 16, 32)
    lstm_hidden: int = 32
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    ffn_dim: int = 64
    fusion_hidden: Tuple[int, int] = (128, 64)
    dropout: float = Field(0.2, ge=0, lt=1)
    T: int = 60

    @model_validator(mode="after")
    def check_heads(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        return self

    @property
    def temporal_input_dim(self) -> int:
        return 2 if self.variant == Variant.TRAN_ENC_TASK else 1


class TrainConfig(BaseModel):
    batch_size: int = Field(32, gt=0)
    lr: float = Field(1e-4, gt=0)
    lr_factor: float = Field(0.8, gt=0, le=1)
    plateau_epochs: int = Field(5, gt=0)
    early_stop_epochs: int = Field(10, gt=0)
    max_epochs: int = Field(200, gt=0)
    split: Tuple[float, float, float] = (0.6, 0.1, 0.3)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_delta: float = 0.0

    @field_validator("split")
    @classmethod
    def validate_split(cls, v):
        if any(f < 0 for f in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be non-negative and sum to 1, got {v}")
        return v


class StackedInput(BaseModel):
    """Frame channels plus the target mask, channel-first"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.values[-1]


class TemporalInput(BaseModel):
    """Highlight vector v and task vector c, left padded"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    v: np.ndarray
    c: np.ndarray

    @model_validator(mode="after")
    def check_vectors(self):
        if self.v.shape != self.c.shape:
            raise ValueError("v and c must have the same length")
        if not np.all(np.isin(self.v, (-1.0, 0.0, 1.0))):
            raise ValueError("v entries must be in {-1, 0, 1}")
        return self


class TrainHistoryRow(BaseModel):
    epoch: int
    train_mse: float
    val_mse: float
    lr: float


class DatasetConfig(BaseModel):
    events_per_condition: int = Field(16, gt=0)


class EventRef(BaseModel):
    """A critical event selected for the predictor dataset"""
    event: int
    task_id: int
    interval: int
    element_id: str
    onset_s: float
    highlighted: bool
    split: str = ""


class HismDataset(BaseModel):
    """
    (stacked image, temporal vectors) -> NS pairs

    Images are stored once per event; pairs point at them by index.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    images: np.ndarray
    image_index: np.ndarray
    temporal: np.ndarray
    targets: np.ndarray
    event: np.ndarray
    slice_index: np.ndarray
    highlighted: np.ndarray
    split: np.ndarray
    events: List[EventRef] = Field(default_factory=list)

    @property
    def n_pairs(self) -> int:
        return int(len(self.targets))

    def subset(self, split: str) -> "HismDataset":
        """Pairs of one split; images are shared"""
        keep = self.split == split
        return HismDataset(
            images=self.images,
            image_index=self.image_index[keep],
            temporal=self.temporal[keep],
            targets=self.targets[keep],
            event=self.event[keep],
            slice_index=self.slice_index[keep],
            highlighted=self.highlighted[keep],
            split=self.split[keep],
            events=[e for e in self.events if e.split == split],
        )

    def pairs_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "event": self.event,
            "slice": self.slice_index,
            "highlighted": self.highlighted,
            "split": self.split,
            "target_ns": self.targets,
            "v_last": self.temporal[:, -1, 0],
            "c_last": self.temporal[:, -1, 1],
        })


class TrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: Any
    history: List[TrainHistoryRow]
    best_epoch: int
    best_val_mse: float


class EvalConfig(BaseModel):
    downsample: int = Field(4, ge=1)
    frame_stride: int = Field(6, ge=1)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

class PipelineConfig(BaseModel):
    """Everything the pipeline needs; built from the key-value config file"""
    seed: int = 7
    participants: int = Field(28, ge=2)
    tasks_per_participant: int = Field(4, ge=1)
    layout_path: Path = Path("config/default_layout.json")
    output_dir: Path = Path("output")
    split_half_iterations: int = Field(5, ge=1)
    grid: TimeGrid = Field(default_factory=TimeGrid)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    behavior: BehaviorParams = Field(default_factory=BehaviorParams)
    fixation: FixationConfig = Field(default_factory=FixationConfig)
    quality: QualityConfig = Field(default_factory=QualityConfig)
    saliency: SaliencyConfig = Field(default_factory=SaliencyConfig)
    metric: MetricConfig = Field(default_factory=MetricConfig)
    loss: LossWeights = Field(default_factory=LossWeights)
    itti: IttiConfig = Field(default_factory=IttiConfig)
    hism: HismConfig = Field(default_factory=HismConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)


class ArtifactEntry(BaseModel):
    stage: str
    path: str
    sha256: str


class ArtifactManifest(BaseModel):
    seed: int
    artifacts: List[ArtifactEntry] = Field(default_factory=list)
    failed_stage: Optional[str] = None
