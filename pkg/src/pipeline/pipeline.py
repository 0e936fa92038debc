"""
Stage orchestration: simulate -> gaze-gen -> fixations -> saliency -> ns ->
itti -> dataset -> train -> eval -> stats -> export
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.settings import settings
from src.analysis.stats import stats_service
from src.core.layout import layout_manager
from src.gaze.processing import gaze_processor
from src.hism.dataset import build_dataset, save_dataset, select_events
from src.hism.model import load_checkpoint, save_checkpoint
from src.hism.trainer import ConstantMeanBaseline, predict_series, train, write_history_csv
from src.pipeline.visuals import export_visuals
from src.saliency.itti import IttiModel, resize_linear
from src.saliency.maps import SaliencyEngine, fixation_table
from src.saliency.metrics import SaliencyMetrics
from src.simulation.dronesim import DroneSimulator
from src.simulation.gazegen import GazeGenerator
from src.utils.errors import DegenerateInputError, PipelineStageError
from src.utils.models import (
    ArtifactEntry,
    ArtifactManifest,
    CalibrationSegment,
    GazeTrace,
    HismDataset,
    Interval,
    Layout,
    NormMode,
    NsSeries,
    PipelineConfig,
    RegressionReport,
    SaliencyMap,
    ScenarioTrace,
    Split,
    Trial,
    TrainResult,
)

logger = logging.getLogger(__name__)

STAGES: Tuple[str, ...] = (
    "simulate", "gaze-gen", "fixations", "saliency", "ns", "itti",
    "dataset", "train", "eval", "stats", "export",
)

PEAK_TOLERANCE_S = 0.3

Key = Tuple[int, int]  # (participant, task)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def scaled_window(window_px: int, scale: int) -> int:
    """Odd smoothing window for a raster downsampled by scale"""
    w = max(3, int(round(window_px / scale)))
    return w if w % 2 == 1 else w + 1


def peak_time(series: NsSeries) -> float:
    return float(series.t_rel_s[int(np.argmax(series.ns))])


class Pipeline:
    """Runs stages in order and records every artifact with its hash"""

    def __init__(self, cfg: PipelineConfig, quiet: bool = False):
        self.cfg = cfg
        self.quiet = quiet
        self.out = Path(cfg.output_dir)
        self.manifest = ArtifactManifest(seed=cfg.seed)

        self.simulator = DroneSimulator(cfg.simulation)
        self.generator = GazeGenerator(cfg.behavior)
        self.engine = SaliencyEngine(cfg.saliency.window_px, cfg.saliency.sigma_px)
        self.metrics = SaliencyMetrics(cfg.metric.kl_eps)
        self.itti = IttiModel(cfg.itti)

        self.layout: Optional[Layout] = None
        self.traces: List[ScenarioTrace] = []
        self.gaze: Dict[Key, GazeTrace] = {}
        self.calibration: Dict[Key, List[CalibrationSegment]] = {}
        self.fixations: Dict[Key, pd.DataFrame] = {}
        self.trials: Dict[Key, List[Trial]] = {}
        self.accepted: Dict[Key, bool] = {}
        self.events: List[Tuple[ScenarioTrace, Interval]] = []
        self.ns_series: List[NsSeries] = []
        self.itti_series: List[NsSeries] = []
        self.itti_maps: Dict[FrozenSet[str], SaliencyMap] = {}
        self.task_maps: Dict[int, SaliencyMap] = {}
        self.dataset: Optional[HismDataset] = None
        self.result: Optional[TrainResult] = None
        self.test_predictions: Dict[str, np.ndarray] = {}

        self._stages: Dict[str, Callable[[], List[Path]]] = {
            "simulate": self.simulate,
            "gaze-gen": self.gaze_gen,
            "fixations": self.detect_fixations,
            "saliency": self.saliency,
            "ns": self.ns,
            "itti": self.itti_baseline,
            "dataset": self.build_dataset,
            "train": self.train,
            "eval": self.evaluate,
            "stats": self.stats,
            "export": self.export,
        }

    # ------------------------------------------------------------------
    # Running
    # ------------------------------------------------------------------

    def run(self, until: Optional[str] = None) -> ArtifactManifest:
        """
        Run every stage up to and including `until`

        Raises:
            PipelineStageError: naming the first failing stage
        """
        if until is not None and until not in STAGES:
            raise ValueError(f"Unknown stage {until}; choose from {', '.join(STAGES)}")
        settings.validate(self.out)
        self.layout = self._load_layout()

        for name in STAGES:
            logger.info("Stage %s", name)
            try:
                paths = self._stages[name]()
            except Exception as e:
                self.manifest.failed_stage = name
                self._write_manifest()
                raise PipelineStageError(name, e) from e
            self._record(name, paths)
            if name == until:
                break
        return self.manifest

    def _load_layout(self) -> Layout:
        path = Path(self.cfg.layout_path)
        if not path.is_absolute() and not path.exists():
            path = settings.BASE_DIR / path
        return layout_manager.load_layout(path)

    def _dir(self, stage: str) -> Path:
        d = settings.stage_dir(self.out, stage)
        d.mkdir(parents=True, exist_ok=True)
        return d

    def _record(self, stage: str, paths: Sequence[Path]) -> None:
        for p in paths:
            self.manifest.artifacts.append(ArtifactEntry(
                stage=stage,
                path=Path(p).relative_to(self.out).as_posix(),
                sha256=sha256_file(Path(p)),
            ))
        self._write_manifest()

    def _write_manifest(self) -> Path:
        path = self.out / "manifest.json"
        path.write_text(json.dumps(self.manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
        return path

    def _progress(self, iterable, desc: str, total: Optional[int] = None):
        return tqdm(iterable, desc=desc, total=total, disable=self.quiet, leave=False)

    def _csv(self, df: pd.DataFrame, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, lineterminator="\n")
        return path

    def _accepted_tables(self, task_id: int) -> List[pd.DataFrame]:
        return [
            self.fixations[(p, task_id)]
            for p in range(self.cfg.participants)
            if self.accepted.get((p, task_id), False)
        ]

    def _pooled(self, task_id: int) -> pd.DataFrame:
        tables = self._accepted_tables(task_id)
        if not tables:
            logger.warning("No accepted recordings for task %d", task_id)
            return fixation_table([])
        return pd.concat(tables, ignore_index=True)

    def _event_element(self, iv: Interval):
        return self.layout.element_for(iv.drone_index, iv.kind)

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def simulate(self) -> List[Path]:
        out = self._dir("simulate")
        paths: List[Path] = []
        self.traces = []
        for task in self._progress(range(self.cfg.tasks_per_participant), "simulate"):
            trace = self.simulator.simulate_task(self.cfg.seed, task)
            self.traces.append(trace)
            paths.append(self.simulator.write_trace_jsonl(trace, out / f"task{task}.jsonl"))
            paths.append(self.simulator.write_plan_json(trace, out / f"task{task}_plan.json"))
            paths.append(self.simulator.write_event_csv(trace, out / f"task{task}_events.csv"))
        return paths

    def gaze_gen(self) -> List[Path]:
        out = self._dir("gaze-gen")
        cfg = self.cfg
        paths: List[Path] = []
        presses, calib_rows = [], []
        keys = [(p, tr) for p in range(cfg.participants) for tr in self.traces]
        for p, trace in self._progress(keys, "gaze-gen"):
            gaze = self.generator.generate_gaze(trace, self.layout, cfg.behavior, cfg.seed, p)
            segments = self.generator.generate_calibration(self.layout, trace.task_id, cfg.behavior, cfg.seed, p)
            self.gaze[(p, trace.task_id)] = gaze
            self.calibration[(p, trace.task_id)] = segments
            paths.append(gaze_processor.write_gaze_csv(gaze, out / f"p{p:02d}_task{trace.task_id}.csv"))
            presses += [(p, trace.task_id, t) for t in gaze.keypresses_ms]
            for seg in segments:
                df = seg.samples.copy()
                df.insert(0, "element_id", seg.element_id)
                df.insert(0, "task_id", seg.task_id)
                df.insert(0, "participant", p)
                calib_rows.append(df)

        paths.append(self._csv(pd.DataFrame(presses, columns=["participant", "task_id", "t_ms"]),
                               out / "keypresses.csv"))
        paths.append(self._csv(pd.concat(calib_rows, ignore_index=True), out / "calibration.csv"))
        return paths

    def detect_fixations(self) -> List[Path]:
        out = self._dir("fixations")
        cfg = self.cfg
        traces = {tr.task_id: tr for tr in self.traces}
        paths: List[Path] = []
        quality_rows = []

        for (p, task), gaze in self._progress(sorted(self.gaze.items()), "fixations"):
            fixations = gaze_processor.detect_fixations(
                gaze.samples, cfg.fixation.dispersion_px, cfg.fixation.min_dur_ms
            )
            quality = gaze_processor.calibration_quality(
                self.calibration[(p, task)], cfg.quality.window_s, cfg.quality.max_offset_px
            )
            trials = gaze_processor.segment_trials(gaze, traces[task], fixations)
            self.fixations[(p, task)] = fixation_table(fixations)
            self.trials[(p, task)] = trials
            self.accepted[(p, task)] = quality.accept
            quality_rows.append({
                "participant": p, "task_id": task, "accept": quality.accept,
                "offset_x_px": quality.offset[0], "offset_y_px": quality.offset[1],
                "n_fixations": len(fixations),
            })
            paths.append(gaze_processor.write_fixations_csv(fixations, out / f"p{p:02d}_task{task}.csv"))
            paths.append(gaze_processor.write_trials_csv(trials, out / f"p{p:02d}_task{task}_trials.csv"))

        rejected = sum(not a for a in self.accepted.values())
        logger.info("Calibration check rejected %d of %d recordings", rejected, len(self.accepted))
        if rejected == len(self.accepted):
            raise DegenerateInputError("Every recording failed the calibration check")

        paths.append(self._csv(pd.DataFrame(quality_rows), out / "quality.csv"))
        paths.append(self._csv(gaze_processor.participant_summary(self._accepted_trials()), out / "detection.csv"))
        return paths

    def _accepted_trials(self) -> Dict[int, List[Trial]]:
        by_participant: Dict[int, List[Trial]] = {}
        for (p, task), trials in sorted(self.trials.items()):
            if self.accepted[(p, task)]:
                by_participant.setdefault(p, []).extend(trials)
        return by_participant

    def saliency(self) -> List[Path]:
        out = self._dir("saliency")
        cfg = self.cfg
        scale = cfg.eval.downsample
        res = (self.layout.width_px, self.layout.height_px)
        window = scaled_window(cfg.saliency.window_px, scale)
        paths: List[Path] = []

        per_participant = []
        for p in range(cfg.participants):
            tables = [self.fixations[(p, tr.task_id)] for tr in self.traces if self.accepted[(p, tr.task_id)]]
            if tables:
                per_participant.append(self.engine.count_map(pd.concat(tables, ignore_index=True), res, scale))
        cc = gaze_processor.split_half_reliability(
            per_participant, cfg.split_half_iterations, cfg.seed, window
        )
        logger.info("Split-half reliability CC = %.3f over %d participants", cc, len(per_participant))
        paths.append(self._csv(
            pd.DataFrame([{"participants": len(per_participant), "iterations": cfg.split_half_iterations, "cc": cc}]),
            out / "split_half.csv",
        ))

        for trace in self.traces:
            counts = self.engine.count_map(self._pooled(trace.task_id), res, scale)
            smap = SaliencyMap(values=counts, norm_mode=NormMode.RAW)
            smoothed = self.engine.smooth_map(smap, window, cfg.saliency.sigma / scale)
            self.task_maps[trace.task_id] = smoothed
            paths.append(self.engine.write_smap(smoothed, out / f"task{trace.task_id}.smap"))
            paths.append(self.engine.write_png(smoothed, out / f"task{trace.task_id}.png"))
        return paths

    def ns(self) -> List[Path]:
        out = self._dir("ns")
        cfg = self.cfg
        self.events = select_events(self.traces, cfg.grid, cfg.dataset.events_per_condition)
        self.ns_series = []
        paths: List[Path] = []
        rows = []
        for e, (trace, iv) in enumerate(self._progress(self.events, "ns")):
            element = self._event_element(iv)
            series = self.engine.pooled_ns_series(
                self._accepted_tables(trace.task_id), self.layout, element, iv.onset_s,
                cfg.grid, coverage_ms=(0.0, trace.duration_s * 1000.0),
            )
            self.ns_series.append(series)
            rows.append({"event": e, "task_id": trace.task_id, "interval": iv.index, "element_id": element.id,
                         "onset_s": iv.onset_s, "highlighted": iv.highlighted})
            paths.append(self._csv(series.to_frame(), out / f"event{e:02d}.csv"))

        paths.append(self._csv(pd.DataFrame(rows), out / "events.csv"))
        for name, series in self._condition_means(self.ns_series).items():
            paths.append(self._csv(series.to_frame(), out / f"mean_{name}.csv"))
        return paths

    def _condition_means(self, series: Sequence[NsSeries]) -> Dict[str, NsSeries]:
        out = {}
        for name, flag in (("highlight", True), ("no_highlight", False)):
            members = [s for s, (_, iv) in zip(series, self.events) if iv.highlighted == flag]
            if members:
                out[name] = self.engine.average_series(members, label=f"target_{name}")
        return out

    def itti_baseline(self) -> List[Path]:
        out = self._dir("itti")
        paths: List[Path] = []
        self.itti_series = []
        for e, (trace, iv) in enumerate(self._progress(self.events, "itti")):
            series = self.itti.itti_ns_series(
                trace, self.layout, self._event_element(iv), iv.onset_s, self.cfg.grid, self.itti_maps
            )
            self.itti_series.append(series)
            paths.append(self._csv(series.to_frame(), out / f"event{e:02d}.csv"))

        index_rows = []
        for i, key in enumerate(sorted(self.itti_maps, key=lambda k: sorted(k))):
            paths.append(self.engine.write_smap(self.itti_maps[key], out / f"map{i:02d}.smap"))
            index_rows.append({"map": i, "highlighted": ";".join(sorted(key))})
        paths.append(self._csv(pd.DataFrame(index_rows, columns=["map", "highlighted"]), out / "maps.csv"))
        return paths

    def build_dataset(self) -> List[Path]:
        out = self._dir("dataset")
        cfg = self.cfg
        self.dataset = build_dataset(
            self.events, self.ns_series, self.layout, cfg.hism, cfg.grid, cfg.train.split, cfg.seed
        )
        return [
            save_dataset(self.dataset, out / "dataset.npz"),
            self._csv(self.dataset.pairs_frame(), out / "pairs.csv"),
        ]

    def train(self) -> List[Path]:
        out = self._dir("train")
        cfg = self.cfg
        variant = cfg.hism.variant
        self.result = train(self.dataset, variant, cfg.train, cfg.seed, cfg.hism, self.quiet)
        return [
            save_checkpoint(self.result.model, out / f"hism_{variant.value}.bin"),
            write_history_csv(self.result.history, out / f"history_{variant.value}.csv"),
        ]

    def evaluate(self) -> List[Path]:
        out = self._dir("eval")
        ds = self.dataset
        test = ds.subset("test")
        model_name = f"hism-{self.cfg.hism.variant.value}"

        baseline = ConstantMeanBaseline().fit(ds.subset("train").targets)
        self.test_predictions = {
            model_name: self.result.model.predict(test.images, test.image_index, test.temporal),
            "itti": np.array([self.itti_series[e].ns[k] for e, k in zip(test.event, test.slice_index)]),
            "constant-mean": baseline.predict(test.n_pairs),
        }

        masks = {Split.HIGHLIGHT: test.highlighted, Split.NO_HIGHLIGHT: ~test.highlighted,
                 Split.ALL: np.ones(test.n_pairs, dtype=bool)}
        reports: List[RegressionReport] = []
        for name, pred in self.test_predictions.items():
            for split, mask in masks.items():
                if mask.any():
                    reports.append(self.metrics.regression_report(name, split, pred[mask], test.targets[mask]))
        paths = [self._csv(self.metrics.regression_frame(reports), out / "regression.csv")]

        paths.append(self._peak_report(test, self.test_predictions[model_name], out / "peaks.csv"))
        paths.append(self._pixel_report(test, reports, out / "report.csv"))
        return paths

    def _peak_report(self, test: HismDataset, pred: np.ndarray, path: Path) -> Path:
        rows = []
        for e in np.unique(test.event):
            sel = test.event == e
            order = np.argsort(test.slice_index[sel])
            truth = self.ns_series[int(e)]
            t_pred = truth.t_rel_s[int(np.argmax(pred[sel][order]))]
            t_true = peak_time(truth)
            rows.append({
                "event": int(e),
                "highlighted": bool(test.highlighted[sel][0]),
                "true_peak_s": t_true,
                "pred_peak_s": t_pred,
                "within_tolerance": abs(t_pred - t_true) <= PEAK_TOLERANCE_S + 1e-9,
                "pred_mean": float(pred[sel].mean()),
            })
        df = pd.DataFrame(rows)
        hl = df[df["highlighted"]] if len(df) else df
        if len(hl):
            logger.info("Predicted peak within %.1f s on %.0f%% of held-out highlighted events",
                        PEAK_TOLERANCE_S, 100.0 * hl["within_tolerance"].mean())
        return self._csv(df, path)

    def _pixel_report(self, test: HismDataset, regression: List[RegressionReport], path: Path) -> Path:
        """ITTI maps against smoothed fixation maps on frames of the held-out events"""
        cfg = self.cfg
        scale = cfg.eval.downsample
        res = (self.layout.width_px, self.layout.height_px)
        window = scaled_window(cfg.saliency.window_px, scale)
        shape = (int(np.ceil(res[1] / scale)), int(np.ceil(res[0] / scale)))
        fps = cfg.grid.frame_rate_hz

        pairs: Dict[Split, list] = {Split.HIGHLIGHT: [], Split.NO_HIGHLIGHT: []}
        for ref in test.events:
            trace, iv = self.events[ref.event]
            fixations = self._pooled(trace.task_id)
            n_frames = int(round((cfg.grid.window_end_s - cfg.grid.window_start_s) * fps))
            for f in range(0, n_frames, cfg.eval.frame_stride):
                t = iv.onset_s + cfg.grid.window_start_s + f / fps
                fix_map = self.engine.fixation_map(fixations, (t * 1000.0, t * 1000.0 + cfg.saliency.bin_ms),
                                                   res, scale)
                ys, xs = np.nonzero(fix_map.values)
                gt = self.engine.smooth_map(fix_map, window, cfg.saliency.sigma / scale)
                key = frozenset(self.simulator.highlighted_ids(trace, self.layout, t))
                pred = np.maximum(resize_linear(self.itti.highlight_map(self.layout, key, self.itti_maps).values,
                                                shape), 0.0)
                split = Split.HIGHLIGHT if iv.highlighted else Split.NO_HIGHLIGHT
                pairs[split].append((pred, gt, list(zip(xs.tolist(), ys.tolist()))))

        itti_errors = {r.split: r for r in regression if r.model == "itti"}
        reports = []
        for split, items in pairs.items():
            if not items:
                continue
            try:
                report = self.metrics.evaluate_maps(items, split)
            except DegenerateInputError as e:
                logger.warning("No pixel-level report for %s: %s", split.value, e)
                continue
            if split in itti_errors:
                report = report.model_copy(update={"mse": itti_errors[split].mse, "mae": itti_errors[split].mae})
            reports.append(report)
        return self._csv(self.metrics.report_frame(reports), path)

    def stats(self) -> List[Path]:
        out = self._dir("stats")
        rows = []

        def add(metric: str, a_name: str, b_name: str, fn, a, b) -> None:
            try:
                rows.append(stats_service.report_row(metric, a_name, b_name, fn(a, b)))
            except (DegenerateInputError, ValueError) as e:
                logger.warning("Skipping %s %s vs %s: %s", metric, a_name, b_name, e)

        summary = gaze_processor.participant_summary(self._accepted_trials())
        for metric in ("hit_rate", "mean_rt_s"):
            a = summary.loc[summary["condition"] == "highlight", metric].dropna().astype(float)
            b = summary.loc[summary["condition"] == "no_highlight", metric].dropna().astype(float)
            add(metric, "highlight", "no_highlight", stats_service.compare_conditions, a.values, b.values)

        engagement = self._engagement_frame()
        for metric in ("fixation_count", "revisits", "aoi_transition_rate_per_s", "scanpath_len_per_s_px"):
            a = engagement.loc[engagement["highlighted"], metric].values
            b = engagement.loc[~engagement["highlighted"], metric].values
            add(metric, "highlight", "no_highlight", stats_service.compare_conditions, a, b)

        test = self.dataset.subset("test")
        model_name = f"hism-{self.cfg.hism.variant.value}"
        hism_err = np.abs(self.test_predictions[model_name] - test.targets)
        for other in ("itti", "constant-mean"):
            other_err = np.abs(self.test_predictions[other] - test.targets)
            add("abs_error", model_name, other, stats_service.paired_t_test, hism_err, other_err)

        critical, queried = self._question_overlap()
        add("ns_correlation", "critical_icon", "queried_icons", stats_service.pearson, critical, queried)

        return [self._csv(stats_service.report_frame(rows), out / "report.csv")]

    def _engagement_frame(self) -> pd.DataFrame:
        """Per participant and condition: mean AOI metrics on the critical icon"""
        rows = []
        for p, trials in self._accepted_trials().items():
            for tr in trials:
                iv = tr.interval
                if not iv.is_critical:
                    continue
                element = self._event_element(iv)
                m = gaze_processor.aoi_gaze_metrics(
                    tr.fixations, element.bbox, self.layout, self.cfg.simulation.interval_s
                )
                rows.append({"participant": p, "highlighted": iv.highlighted, **m.model_dump()})
        df = pd.DataFrame(rows)
        if df.empty:
            return pd.DataFrame(columns=["participant", "highlighted", "fixation_count", "revisits",
                                         "aoi_transition_rate_per_s", "scanpath_len_per_s_px"])
        return df.groupby(["participant", "highlighted"], as_index=False).mean(numeric_only=True)

    def _question_overlap(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-slice NS of the critical icon and mean NS of the queried icons"""
        grid = self.cfg.grid
        critical, queried = [], []
        for trace, iv in self.events:
            lo, hi = iv.onset_s + grid.window_start_s, iv.onset_s + grid.window_end_s
            asked = [
                icons for q, icons in zip(trace.plan.question_times_s, trace.plan.queried_icons)
                if lo <= q < hi
            ]
            if not asked:
                continue
            pooled = self._pooled(trace.task_id)
            ns, _ = self.engine.ns_matrix(pooled, self.layout, iv.onset_s, grid)
            target = self.layout.index_of(self._event_element(iv).id)
            idx = [self.layout.index_of(self.layout.element_for(d, k).id) for icons in asked for d, k in icons]
            critical.extend(ns[:, target].tolist())
            queried.extend(ns[:, idx].mean(axis=1).tolist())
        return np.array(critical), np.array(queried)

    def export(self) -> List[Path]:
        out = self._dir("export")
        maps = {f"fixations_task{t}": m for t, m in self.task_maps.items()}
        for i, key in enumerate(sorted(self.itti_maps, key=lambda k: sorted(k))):
            maps[f"itti_map{i:02d}"] = self.itti_maps[key]

        predicted = [
            predict_series(self.result.model, trace, self.layout, iv, self.cfg.grid) for trace, iv in self.events
        ]
        empirical = self._condition_means(self.ns_series)
        itti = self._condition_means(self.itti_series)
        hism = self._condition_means(predicted)
        series = {
            f"ns_{name}": {"empirical": empirical[name], "itti": itti[name], "hism": hism[name]}
            for name in empirical
        }
        return export_visuals(out, maps, series, self.layout.n_elements)

    # ------------------------------------------------------------------
    # Prediction from a saved checkpoint
    # ------------------------------------------------------------------

    def predict(self, checkpoint: Path) -> List[Path]:
        """Predicted NS series of every selected event from a checkpoint"""
        settings.validate(self.out)
        self.layout = self._load_layout()
        if not self.traces:
            self._record("simulate", self.simulate())
        if not self.events:
            self.events = select_events(self.traces, self.cfg.grid, self.cfg.dataset.events_per_condition)
        model = load_checkpoint(checkpoint)
        out = self._dir("eval") / "predictions"
        paths = []
        for e, (trace, iv) in enumerate(self.events):
            series = predict_series(model, trace, self.layout, iv, self.cfg.grid)
            paths.append(self._csv(series.to_frame(), out / f"event{e:02d}.csv"))
        self._record("predict", paths)
        return paths


def run_pipeline(cfg: PipelineConfig, until: Optional[str] = None, quiet: bool = False) -> ArtifactManifest:
    """Run the stages up to `until` (all by default) and return the manifest"""
    return Pipeline(cfg, quiet=quiet).run(until)
