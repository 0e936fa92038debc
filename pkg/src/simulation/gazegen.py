"""
Synthetic gaze generator with known attention dynamics

An observer scans the interface with a fixation/saccade alternation.
Critical situations force episodes on the critical icon: a highlight
captures gaze after a shifted-gamma latency, otherwise the icon is found
at a constant hazard. Detection produces a key press after a motor delay.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, stats

from src.utils.models import (
    SAFETY_KINDS,
    BehaviorParams,
    CalibrationSegment,
    GazeTrace,
    Layout,
    ScanStrategy,
    ScenarioTrace,
    TimeGrid,
)

logger = logging.getLogger(__name__)

SAMPLE_RATE_HZ = 250
SAMPLE_MS = 1000.0 / SAMPLE_RATE_HZ

# Fixations stay this far inside the icon box so smoothing mass stays on the icon
BOX_MARGIN_PX = 18.0


@dataclass
class ForcedEpisode:
    """Gaze held on a target element during [start_s, end_s)"""
    start_s: float
    end_s: float
    element_index: int


@dataclass
class FixationSpan:
    start_ms: float
    end_ms: float
    x: float
    y: float
    element_index: int


class GazeGenerator:
    """Generates 250 Hz gaze, key presses and calibration segments"""

    def __init__(self, params: Optional[BehaviorParams] = None):
        self.params = params or BehaviorParams()

    # ------------------------------------------------------------------
    # Participant-level parameters
    # ------------------------------------------------------------------

    def participant_params(self, params: BehaviorParams, seed: int, participant_id: int) -> BehaviorParams:
        """Jitter capture and detection parameters per participant"""
        if params.participant_jitter <= 0:
            return params
        rng = np.random.default_rng([seed, participant_id, 7919])
        j = params.participant_jitter

        def scale(value: float) -> float:
            return float(value * np.clip(1.0 + j * rng.standard_normal(), 0.5, 1.5))

        return params.model_copy(update={
            "capture_prob": float(np.clip(scale(params.capture_prob), 0.0, 1.0)),
            "capture_latency_scale": scale(params.capture_latency_scale),
            "baseline_detect_hazard": scale(params.baseline_detect_hazard),
            "dwell_on_target_s": scale(params.dwell_on_target_s),
            "press_delay_s": scale(params.press_delay_s),
        })

    def tracking_offset(
        self,
        params: BehaviorParams,
        seed: int,
        participant_id: int,
        task_id: int,
    ) -> Tuple[float, float]:
        """Systematic tracker offset of one (participant, task)"""
        rng = np.random.default_rng([seed, participant_id, task_id, 104729])
        if rng.random() < params.poor_tracking_prob:
            magnitude = rng.uniform(*params.poor_tracking_offset_px)
            sign = 1.0 if rng.random() < 0.5 else -1.0
            if rng.random() < 0.5:
                return (float(sign * magnitude), float(rng.normal(0.0, params.calibration_offset_sd_px)))
            return (float(rng.normal(0.0, params.calibration_offset_sd_px)), float(sign * magnitude))
        return (
            float(rng.normal(0.0, params.calibration_offset_sd_px)),
            float(rng.normal(0.0, params.calibration_offset_sd_px)),
        )

    # ------------------------------------------------------------------
    # Attention schedule
    # ------------------------------------------------------------------

    def _forced_episodes(
        self,
        trace: ScenarioTrace,
        layout: Layout,
        params: BehaviorParams,
        rng: np.random.Generator,
    ) -> Tuple[List[ForcedEpisode], List[float]]:
        """Target episodes and key presses (ms) for every interval"""
        episodes: List[ForcedEpisode] = []
        presses: List[float] = []
        duration = trace.duration_s

        for iv in trace.plan.intervals:
            interval_end = iv.onset_s + (duration / len(trace.plan.intervals))

            if not iv.is_critical:
                if rng.random() < params.false_alarm_prob:
                    presses.append(round(1000.0 * rng.uniform(iv.onset_s, interval_end - 0.01), 3))
                continue

            target = layout.index_of(layout.element_for(iv.drone_index, iv.kind).id)
            captured = iv.highlighted and rng.random() < params.capture_prob
            if captured:
                latency = params.capture_latency_shift + rng.gamma(
                    params.capture_latency_shape, params.capture_latency_scale
                )
                dwell = rng.gamma(params.dwell_shape, params.dwell_on_target_s / params.dwell_shape)
            else:
                latency = (
                    rng.exponential(1.0 / params.baseline_detect_hazard)
                    if params.baseline_detect_hazard > 0 else np.inf
                )
                dwell = rng.gamma(params.dwell_shape, params.post_detect_dwell_s / params.dwell_shape)

            start = iv.onset_s + latency
            if start >= interval_end:
                continue
            episodes.append(ForcedEpisode(start, min(start + dwell, duration), target))

            press = start + rng.gamma(params.press_delay_shape, params.press_delay_s / params.press_delay_shape)
            if press < interval_end:
                presses.append(round(1000.0 * press, 3))

        # Later episodes cut earlier ones short
        for a, b in zip(episodes, episodes[1:]):
            a.end_s = min(a.end_s, b.start_s)
        episodes = [e for e in episodes if e.end_s > e.start_s]
        return episodes, sorted(presses)

    def _next_element(
        self,
        current: int,
        layout: Layout,
        params: BehaviorParams,
        rng: np.random.Generator,
    ) -> int:
        n = layout.n_elements
        if params.scan_strategy == ScanStrategy.ROUND_ROBIN:
            return (current + 1) % n
        if rng.random() < params.within_block_prob:
            drone = layout.elements[current].drone_index
            block = [i for i, e in enumerate(layout.elements) if e.drone_index == drone and i != current]
            if block:
                return block[int(rng.integers(len(block)))]
        return int(rng.integers(n))

    def _fixation_point(self, layout: Layout, index: int, jitter_px: float, rng) -> Tuple[float, float]:
        x, y, w, h = layout.elements[index].bbox
        cx, cy = x + w / 2.0, y + h / 2.0
        hx = max(0.0, w / 2.0 - BOX_MARGIN_PX)
        hy = max(0.0, h / 2.0 - BOX_MARGIN_PX)
        dx = float(np.clip(rng.normal(0.0, jitter_px), -hx, hx))
        dy = float(np.clip(rng.normal(0.0, jitter_px), -hy, hy))
        return cx + dx, cy + dy

    def _fixation_spans(
        self,
        layout: Layout,
        episodes: List[ForcedEpisode],
        duration_s: float,
        params: BehaviorParams,
        rng: np.random.Generator,
    ) -> List[FixationSpan]:
        """Chain fixations and saccade gaps over the task, honoring forced episodes"""
        spans: List[FixationSpan] = []
        end_ms = duration_s * 1000.0
        t = 0.0
        current = int(rng.integers(layout.n_elements))
        k = 0

        while t < end_ms:
            while k < len(episodes) and episodes[k].end_s * 1000.0 <= t:
                k += 1
            ep = episodes[k] if k < len(episodes) else None
            d = float(rng.lognormal(params.fixation_dur_mu, params.fixation_dur_sigma))

            if ep is not None and ep.start_s * 1000.0 <= t:
                current = ep.element_index
                stop = min(t + d, ep.end_s * 1000.0)
            else:
                if spans:
                    current = self._next_element(current, layout, params, rng)
                stop = t + d
                if ep is not None:
                    stop = min(stop, ep.start_s * 1000.0)

            stop = min(stop, end_ms)
            if stop - t > 0:
                x, y = self._fixation_point(layout, current, params.fixation_jitter_px, rng)
                spans.append(FixationSpan(t, stop, x, y, current))
            t = stop + float(rng.uniform(*params.saccade_ms))

        return spans

    # ------------------------------------------------------------------
    # Sampling
    # ------------------------------------------------------------------

    def _sample(
        self,
        spans: List[FixationSpan],
        duration_s: float,
        width: int,
        height: int,
        params: BehaviorParams,
        offset: Tuple[float, float],
        rng: np.random.Generator,
        t0_ms: float = 0.0,
    ) -> pd.DataFrame:
        """Render spans to 250 Hz samples; saccades interpolate linearly"""
        n = int(round(duration_s * SAMPLE_RATE_HZ))
        t = np.arange(n) * SAMPLE_MS
        starts = np.array([s.start_ms for s in spans])
        ends = np.array([s.end_ms for s in spans])
        xs = np.array([s.x for s in spans])
        ys = np.array([s.y for s in spans])

        k = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(spans) - 1)
        in_fix = (t >= starts[k]) & (t < ends[k])
        k_next = np.minimum(k + 1, len(spans) - 1)
        gap = np.maximum(starts[k_next] - ends[k], 1e-9)
        frac = np.clip((t - ends[k]) / gap, 0.0, 1.0)

        x = np.where(in_fix, xs[k], xs[k] + frac * (xs[k_next] - xs[k]))
        y = np.where(in_fix, ys[k], ys[k] + frac * (ys[k_next] - ys[k]))
        noise = np.where(in_fix, params.sample_noise_px, params.saccade_noise_px)
        x = x + rng.standard_normal(n) * noise + offset[0]
        y = y + rng.standard_normal(n) * noise + offset[1]

        valid = (rng.random(n) >= params.invalid_prob) & (x >= 0) & (x < width) & (y >= 0) & (y < height)
        x = np.where(valid, x, np.nan)
        y = np.where(valid, y, np.nan)

        return pd.DataFrame({
            "t_ms": np.round(t + t0_ms, 3),
            "x_px": np.round(x, 3),
            "y_px": np.round(y, 3),
            "valid": valid,
        })

    def generate_gaze(
        self,
        trace: ScenarioTrace,
        layout: Layout,
        params: Optional[BehaviorParams] = None,
        seed: int = 0,
        participant_id: int = 0,
    ) -> GazeTrace:
        """
        Generate the gaze of one participant over one task

        Args:
            trace: Simulated task
            layout: Interface layout
            params: Population behavior; participant jitter is applied here
            seed: Run seed
            participant_id: Participant number

        Returns:
            GazeTrace with samples and key presses
        """
        params = self.participant_params(params or self.params, seed, participant_id)
        rng = np.random.default_rng([seed, participant_id, trace.task_id, 31])

        episodes, presses = self._forced_episodes(trace, layout, params, rng)
        spans = self._fixation_spans(layout, episodes, trace.duration_s, params, rng)
        offset = self.tracking_offset(params, seed, participant_id, trace.task_id)
        samples = self._sample(
            spans, trace.duration_s, layout.width_px, layout.height_px, params, offset, rng
        )

        logger.debug(
            "Participant %d task %d: %d fixations planned, %d presses, %d forced episodes",
            participant_id, trace.task_id, len(spans), len(presses), len(episodes),
        )
        return GazeTrace(
            participant_id=participant_id,
            task_id=trace.task_id,
            sample_rate_hz=SAMPLE_RATE_HZ,
            samples=samples,
            keypresses_ms=presses,
        )

    def generate_calibration(
        self,
        layout: Layout,
        task_id: int,
        params: Optional[BehaviorParams] = None,
        seed: int = 0,
        participant_id: int = 0,
    ) -> List[CalibrationSegment]:
        """
        Gaze on the calibration check page of a task

        The page highlights one safety icon kind in each drone block in turn.

        Returns:
            One segment per highlighted target
        """
        params = params or self.params
        rng = np.random.default_rng([seed, participant_id, task_id, 577])
        offset = self.tracking_offset(params, seed, participant_id, task_id)
        kind = SAFETY_KINDS[task_id % len(SAFETY_KINDS)]
        drones = sorted({e.drone_index for e in layout.elements})
        seconds = params.calibration_seconds_per_target

        segments = []
        previous = int(rng.integers(layout.n_elements))
        for i, drone in enumerate(drones):
            element = layout.element_for(drone, kind)
            target = layout.index_of(element.id)
            reach_ms = 1000.0 * (params.capture_latency_shift + rng.gamma(
                params.capture_latency_shape, params.capture_latency_scale
            ))
            spans = [self._span_at(layout, previous, 0.0, reach_ms, params, rng)]
            t = reach_ms + rng.uniform(*params.saccade_ms)
            while t < seconds * 1000.0:
                d = float(rng.lognormal(params.fixation_dur_mu, params.fixation_dur_sigma))
                stop = min(t + d, seconds * 1000.0)
                spans.append(self._span_at(layout, target, t, stop, params, rng, jitter_scale=0.5))
                t = stop + rng.uniform(*params.saccade_ms)
            previous = target

            samples = self._sample(
                spans, seconds, layout.width_px, layout.height_px, params, offset, rng,
                t0_ms=i * seconds * 1000.0,
            )
            segments.append(CalibrationSegment(
                participant_id=participant_id,
                task_id=task_id,
                element_id=element.id,
                target_center=element.center,
                samples=samples,
            ))
        return segments

    def _span_at(self, layout, index, start, stop, params, rng, jitter_scale: float = 1.0) -> FixationSpan:
        x, y = self._fixation_point(layout, index, params.fixation_jitter_px * jitter_scale, rng)
        return FixationSpan(start, stop, x, y, index)

    # ------------------------------------------------------------------
    # Ground truth
    # ------------------------------------------------------------------

    def target_attention(
        self,
        tau_s: np.ndarray,
        highlighted: bool,
        params: Optional[BehaviorParams] = None,
        du: float = 0.005,
    ) -> np.ndarray:
        """
        Probability that gaze is held on the critical icon at times after onset

        Integrates latency density against the dwell survival function.
        """
        params = params or self.params
        tau_s = np.atleast_1d(np.asarray(tau_s, dtype=np.float64))
        horizon = max(float(tau_s.max()), 0.0)
        u = np.arange(0.0, horizon + du, du)

        capture = params.capture_prob if highlighted else 0.0
        latency_pdf = stats.gamma.pdf(
            u, a=params.capture_latency_shape, loc=params.capture_latency_shift,
            scale=params.capture_latency_scale,
        )
        capture_dwell = stats.gamma(a=params.dwell_shape, scale=params.dwell_on_target_s / params.dwell_shape)
        if params.baseline_detect_hazard > 0:
            detect_pdf = stats.expon.pdf(u, scale=1.0 / params.baseline_detect_hazard)
        else:
            detect_pdf = np.zeros_like(u)
        detect_dwell = stats.gamma(a=params.dwell_shape, scale=params.post_detect_dwell_s / params.dwell_shape)

        out = np.zeros_like(tau_s)
        for i, tau in enumerate(tau_s):
            if tau <= 0:
                continue
            m = u <= tau
            lag = tau - u[m]
            held_capture = integrate.trapezoid(latency_pdf[m] * capture_dwell.sf(lag), dx=du)
            held_detect = integrate.trapezoid(detect_pdf[m] * detect_dwell.sf(lag), dx=du)
            out[i] = capture * held_capture + (1.0 - capture) * held_detect
        return np.clip(out, 0.0, 1.0)

    def behavior_ground_truth(
        self,
        trace: ScenarioTrace,
        layout: Layout,
        params: Optional[BehaviorParams] = None,
        grid: Optional[TimeGrid] = None,
    ) -> pd.DataFrame:
        """
        Intended attention distribution over elements per time slice

        Args:
            trace: Simulated task
            layout: Interface layout
            params: Population behavior
            grid: Supplies the slice step

        Returns:
            DataFrame indexed by slice start (s) with one column per element id;
            every row sums to 1
        """
        params = params or self.params
        step = (grid or TimeGrid()).ns_step_s
        n_slices = int(round(trace.duration_s / step))
        mids = (np.arange(n_slices) + 0.5) * step
        n = layout.n_elements
        probs = np.full((n_slices, n), 1.0 / n)

        interval_s = trace.duration_s / len(trace.plan.intervals)
        for iv in trace.plan.critical_intervals():
            target = layout.index_of(layout.element_for(iv.drone_index, iv.kind).id)
            in_interval = (mids >= iv.onset_s) & (mids < iv.onset_s + interval_s)
            a = self.target_attention(mids[in_interval] - iv.onset_s, iv.highlighted, params)
            rows = np.flatnonzero(in_interval)
            probs[rows] = ((1.0 - a) / n)[:, None]
            probs[rows, target] += a

        return pd.DataFrame(probs, index=np.round(mids - step / 2, 6), columns=layout.element_ids)


# Global generator instance
gaze_generator = GazeGenerator()
