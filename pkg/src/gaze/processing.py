"""
Gaze preprocessing and behavioral metrics
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.core.layout import layout_manager
from src.saliency.maps import saliency_engine
from src.saliency.metrics import saliency_metrics
from src.utils.errors import CoverageError, DegenerateInputError
from src.utils.models import (
    CalibrationSegment,
    DetectionMetrics,
    Fixation,
    GazeMetrics,
    GazeTrace,
    Layout,
    QualityResult,
    ScenarioTrace,
    Trial,
    TrialLabel,
)

logger = logging.getLogger(__name__)

GAZE_COLUMNS = ["t_ms", "x_px", "y_px", "valid"]
FIXATION_COLUMNS = ["start_ms", "end_ms", "duration_ms", "x_px", "y_px"]
TRIAL_COLUMNS = ["interval", "critical", "highlighted", "label", "rt_s"]

# Samples examined per vectorized step of the fixation search
_CHUNK = 64


class GazeProcessor:
    """Fixation detection, quality filtering, trials and gaze metrics"""

    # ------------------------------------------------------------------
    # Fixations
    # ------------------------------------------------------------------

    def detect_fixations(
        self,
        samples: pd.DataFrame,
        dispersion_px: float = 25.0,
        min_dur_ms: float = 50.0,
    ) -> List[Fixation]:
        """
        Distance-from-start dispersion fixation detection

        A candidate opens at a valid sample and grows while samples are
        valid and within dispersion_px of its first sample. It becomes a
        fixation when its span reaches min_dur_ms. The next candidate opens
        at the sample that closed the previous one.

        Args:
            samples: Time-ordered frame with t_ms, x_px, y_px, valid
            dispersion_px: Radius around the first sample
            min_dur_ms: Minimum fixation span

        Returns:
            Ordered, disjoint fixations
        """
        if len(samples) == 0:
            return []

        t = samples["t_ms"].to_numpy(dtype=np.float64)
        x = samples["x_px"].to_numpy(dtype=np.float64)
        y = samples["y_px"].to_numpy(dtype=np.float64)
        valid = samples["valid"].to_numpy(dtype=bool) & np.isfinite(x) & np.isfinite(y)
        n = len(t)
        r2 = dispersion_px * dispersion_px

        fixations: List[Fixation] = []
        i = 0
        while i < n:
            if not valid[i]:
                i += 1
                continue

            # first j > i that is invalid or outside the radius
            j = i + 1
            while j < n:
                stop = min(n, j + _CHUNK)
                bad = ~valid[j:stop] | ((x[j:stop] - x[i]) ** 2 + (y[j:stop] - y[i]) ** 2 > r2)
                hit = np.flatnonzero(bad)
                if hit.size:
                    j += int(hit[0])
                    break
                j = stop

            duration = t[j - 1] - t[i]
            if duration >= min_dur_ms:
                fixations.append(Fixation(
                    start_ms=float(t[i]),
                    end_ms=float(t[j - 1]),
                    duration_ms=float(duration),
                    centroid=(float(x[i:j].mean()), float(y[i:j].mean())),
                ))
            i = j

        return fixations

    # ------------------------------------------------------------------
    # Calibration quality
    # ------------------------------------------------------------------

    def quality_filter(
        self,
        calib_gaze: pd.DataFrame,
        target_center: Tuple[float, float],
        window_s: float = 1.0,
        max_offset_px: float = 70.0,
    ) -> QualityResult:
        """
        Judge tracking accuracy on a calibration segment

        The window whose valid samples lie closest to the target on average
        is selected; the segment is rejected when the mean x or y offset in
        that window exceeds max_offset_px.

        Args:
            calib_gaze: Samples recorded while the target was highlighted
            target_center: Target center in pixels
            window_s: Window length
            max_offset_px: Largest accepted mean offset per axis

        Returns:
            QualityResult with the chosen window's mean offset
        """
        t = calib_gaze["t_ms"].to_numpy(dtype=np.float64)
        if len(t) < 2:
            raise CoverageError("Calibration segment has fewer than two samples")
        period = float(np.median(np.diff(t)))
        n_win = int(round(window_s * 1000.0 / period))
        if len(t) < n_win:
            raise CoverageError(
                f"Calibration segment of {len(t) * period / 1000.0:.2f} s is shorter than the {window_s} s window"
            )

        x = calib_gaze["x_px"].to_numpy(dtype=np.float64)
        y = calib_gaze["y_px"].to_numpy(dtype=np.float64)
        valid = calib_gaze["valid"].to_numpy(dtype=bool) & np.isfinite(x) & np.isfinite(y)
        dx = np.where(valid, x - target_center[0], 0.0)
        dy = np.where(valid, y - target_center[1], 0.0)
        dist = np.where(valid, np.hypot(dx, dy), 0.0)

        def window_sums(v: np.ndarray) -> np.ndarray:
            c = np.concatenate([[0.0], np.cumsum(v)])
            return c[n_win:] - c[:-n_win]

        counts = window_sums(valid.astype(np.float64))
        with np.errstate(invalid="ignore", divide="ignore"):
            mean_dist = np.where(counts > 0, window_sums(dist) / counts, np.inf)
        best = int(np.argmin(mean_dist))
        if not np.isfinite(mean_dist[best]):
            raise CoverageError("Calibration segment has no valid samples")

        off_x = float(window_sums(dx)[best] / counts[best])
        off_y = float(window_sums(dy)[best] / counts[best])
        accept = abs(off_x) <= max_offset_px and abs(off_y) <= max_offset_px
        return QualityResult(accept=accept, offset=(off_x, off_y), window_start_ms=float(t[best]))

    def calibration_quality(
        self,
        segments: Sequence[CalibrationSegment],
        window_s: float = 1.0,
        max_offset_px: float = 70.0,
    ) -> QualityResult:
        """Page-level judgement: mean of the per-target window offsets"""
        results = [
            self.quality_filter(s.samples, s.target_center, window_s, max_offset_px)
            for s in segments
        ]
        if not results:
            raise CoverageError("No calibration segments")
        off = np.mean([r.offset for r in results], axis=0)
        accept = bool(abs(off[0]) <= max_offset_px and abs(off[1]) <= max_offset_px)
        return QualityResult(accept=accept, offset=(float(off[0]), float(off[1])), window_start_ms=results[0].window_start_ms)

    # ------------------------------------------------------------------
    # Trials and detection
    # ------------------------------------------------------------------

    def segment_trials(
        self,
        gaze: GazeTrace,
        trace: ScenarioTrace,
        fixations: Sequence[Fixation],
        keypresses_ms: Optional[Sequence[float]] = None,
        tolerance_s: float = 0.1,
    ) -> List[Trial]:
        """
        One Trial per interval with its fixations and first key press

        Args:
            gaze: Raw gaze, used for the duration check
            trace: Simulated task holding the interval plan
            fixations: Fixations of the gaze
            keypresses_ms: Press times; gaze.keypresses_ms when omitted
            tolerance_s: Allowed gaze/trace duration difference

        Returns:
            Labeled trials
        """
        t = gaze.samples["t_ms"]
        gaze_span_s = (float(t.iloc[-1]) + 1000.0 / gaze.sample_rate_hz) / 1000.0 if len(t) else 0.0
        if abs(gaze_span_s - trace.duration_s) > tolerance_s:
            raise CoverageError(
                f"Gaze covers {gaze_span_s:.2f} s but task {trace.task_id} lasts {trace.duration_s:.2f} s"
            )

        presses = np.sort(np.asarray(
            gaze.keypresses_ms if keypresses_ms is None else keypresses_ms, dtype=np.float64
        ))
        starts = np.array([f.start_ms for f in fixations])
        interval_s = trace.duration_s / len(trace.plan.intervals)

        trials = []
        for iv in trace.plan.intervals:
            lo, hi = iv.onset_s * 1000.0, (iv.onset_s + interval_s) * 1000.0
            in_iv = presses[(presses >= lo) & (presses < hi)]
            press = float(in_iv[0]) if in_iv.size else None
            if iv.is_critical:
                label = TrialLabel.HIT if press is not None else TrialLabel.MISS
            else:
                label = TrialLabel.FALSE_ALARM if press is not None else TrialLabel.CORRECT_REJECTION

            members = np.flatnonzero((starts >= lo) & (starts < hi)) if starts.size else []
            trials.append(Trial(
                interval=iv,
                fixations=[fixations[k] for k in members],
                keypress_ms=press,
                label=label,
            ))
        return trials

    def detection_metrics(self, trials: Sequence[Trial]) -> DetectionMetrics:
        """Hit rate and mean RT over critical trials, FA rate over the rest"""
        critical = [tr for tr in trials if tr.interval.is_critical]
        non_critical = [tr for tr in trials if not tr.interval.is_critical]
        hits = [tr for tr in critical if tr.is_hit]
        fas = [tr for tr in non_critical if tr.is_false_alarm]

        undefined = []
        hit_rate = len(hits) / len(critical) if critical else None
        if hit_rate is None:
            undefined.append("hit_rate")
        mean_rt = float(np.mean([tr.rt_s for tr in hits])) if hits else None
        if mean_rt is None:
            undefined.append("mean_rt_s")
        fa_rate = len(fas) / len(non_critical) if non_critical else None
        if fa_rate is None:
            undefined.append("false_alarm_rate")

        return DetectionMetrics(
            hit_rate=hit_rate,
            mean_rt_s=mean_rt,
            false_alarm_rate=fa_rate,
            n_critical=len(critical),
            n_non_critical=len(non_critical),
            n_hits=len(hits),
            undefined=undefined,
        )

    # ------------------------------------------------------------------
    # Engagement and exploration
    # ------------------------------------------------------------------

    def aoi_gaze_metrics(
        self,
        fixations: Sequence[Fixation],
        aoi_bbox: Tuple[int, int, int, int],
        layout: Layout,
        span_s: float,
    ) -> GazeMetrics:
        """
        Engagement on one AOI and exploration over the whole interface

        Args:
            fixations: Ordered fixations
            aoi_bbox: (x, y, w, h) of the AOI, half-open
            layout: Interface layout for AOI transitions
            span_s: Time span the fixations cover

        Returns:
            GazeMetrics
        """
        if span_s <= 0:
            raise ValueError(f"span_s must be positive, got {span_s}")
        if not fixations:
            return GazeMetrics()

        x0, y0, w, h = aoi_bbox
        cx = np.array([f.centroid[0] for f in fixations])
        cy = np.array([f.centroid[1] for f in fixations])
        in_aoi = (cx >= x0) & (cx < x0 + w) & (cy >= y0) & (cy < y0 + h)

        runs = int(np.sum(in_aoi[1:] & ~in_aoi[:-1]) + in_aoi[0])
        amplitudes = np.hypot(np.diff(cx), np.diff(cy))
        elements = layout_manager.elements_at(layout, cx, cy)

        return GazeMetrics(
            fixation_count=int(in_aoi.sum()),
            fixation_duration_s=float(sum(f.duration_ms for f, m in zip(fixations, in_aoi) if m) / 1000.0),
            revisits=max(0, runs - 1),
            mean_saccade_amplitude_px=float(amplitudes.mean()) if amplitudes.size else 0.0,
            scanpath_len_per_s_px=float(amplitudes.sum() / span_s),
            aoi_transition_rate_per_s=float(np.sum(elements[1:] != elements[:-1]) / span_s),
        )

    def split_half_reliability(
        self,
        fixation_maps_by_participant: Sequence[np.ndarray],
        iterations: int = 5,
        seed: int = 0,
        window_px: int = 35,
    ) -> float:
        """
        Mean CC between pooled smoothed maps of two random participant halves

        Args:
            fixation_maps_by_participant: Per-participant fixation count rasters
            iterations: Number of random partitions
            seed: Partition seed
            window_px: Smoothing window at the rasters' resolution

        Returns:
            Mean CC over iterations
        """
        maps = [np.asarray(m, dtype=np.float64) for m in fixation_maps_by_participant]
        if len(maps) < 2:
            raise DegenerateInputError(f"Split-half reliability needs >= 2 participants, got {len(maps)}")
        rng = np.random.default_rng(seed)
        half = len(maps) // 2
        stack = np.stack(maps)

        ccs = []
        for _ in range(iterations):
            order = rng.permutation(len(maps))
            a = saliency_engine.smooth_raw(stack[order[:half]].sum(axis=0), window_px)
            b = saliency_engine.smooth_raw(stack[order[half:2 * half]].sum(axis=0), window_px)
            ccs.append(saliency_metrics.cc(a, b))
        return float(np.mean(ccs))

    def participant_summary(self, trials_by_participant: Dict[int, Sequence[Trial]]) -> pd.DataFrame:
        """
        Participant-level detection averages per highlight condition

        Returns:
            One row per (participant, condition) with hit_rate, mean_rt_s, n_trials
        """
        rows = []
        for pid, trials in sorted(trials_by_participant.items()):
            for condition, highlighted in (("highlight", True), ("no_highlight", False)):
                subset = [tr for tr in trials if tr.interval.is_critical and tr.interval.highlighted == highlighted]
                m = self.detection_metrics(subset)
                rows.append({
                    "participant": pid,
                    "condition": condition,
                    "hit_rate": m.hit_rate,
                    "mean_rt_s": m.mean_rt_s,
                    "n_trials": len(subset),
                })
            overall = self.detection_metrics(trials)
            rows.append({
                "participant": pid,
                "condition": "non_critical",
                "hit_rate": overall.false_alarm_rate,
                "mean_rt_s": None,
                "n_trials": overall.n_non_critical,
            })
        return pd.DataFrame(rows, columns=["participant", "condition", "hit_rate", "mean_rt_s", "n_trials"])

    # ------------------------------------------------------------------
    # Files
    # ------------------------------------------------------------------

    def write_gaze_csv(self, gaze: GazeTrace, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        gaze.samples[GAZE_COLUMNS].to_csv(path, index=False, lineterminator="\n")
        return path

    def read_gaze_csv(self, path: Union[str, Path], participant_id: int, task_id: int,
                      keypresses_ms: Optional[List[float]] = None) -> GazeTrace:
        df = pd.read_csv(path)
        missing = set(GAZE_COLUMNS) - set(df.columns)
        if missing:
            raise ValueError(f"{path} lacks gaze columns {sorted(missing)}")
        df["valid"] = df["valid"].astype(bool)
        return GazeTrace(participant_id=participant_id, task_id=task_id, samples=df,
                         keypresses_ms=keypresses_ms or [])

    def write_fixations_csv(self, fixations: Sequence[Fixation], path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df = pd.DataFrame(
            [(f.start_ms, f.end_ms, f.duration_ms, f.centroid[0], f.centroid[1]) for f in fixations],
            columns=FIXATION_COLUMNS,
        )
        df.to_csv(path, index=False, lineterminator="\n")
        return path

    def read_fixations_csv(self, path: Union[str, Path]) -> List[Fixation]:
        df = pd.read_csv(path)
        return [
            Fixation(start_ms=r.start_ms, end_ms=r.end_ms, duration_ms=r.duration_ms, centroid=(r.x_px, r.y_px))
            for r in df.itertuples(index=False)
        ]

    def write_trials_csv(self, trials: Sequence[Trial], path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        df = pd.DataFrame(
            [
                (tr.interval.index, tr.interval.is_critical, tr.interval.highlighted, tr.label.value, tr.rt_s)
                for tr in trials
            ],
            columns=TRIAL_COLUMNS,
        )
        df.to_csv(path, index=False, lineterminator="\n")
        return path


# Global processor instance
gaze_processor = GazeProcessor()
