"""
Stacked images, highlight/task vectors and NS targets for the predictor
"""
import json
import logging
import zipfile
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from src.simulation.dronesim import drone_simulator, normalized_value
from src.utils.errors import CoverageError, DegenerateInputError, LayoutError
from src.utils.models import (
    Element,
    EventRef,
    HismConfig,
    HismDataset,
    Interval,
    Layout,
    NsSeries,
    ScenarioTrace,
    StackedInput,
    TemporalInput,
    TimeGrid,
)

logger = logging.getLogger(__name__)

NPZ_TIMESTAMP = (1980, 1, 1, 0, 0, 0)


def _check_element(layout: Layout, element: Element) -> None:
    try:
        layout.index_of(element.id)
    except KeyError as e:
        raise LayoutError(f"Element {element.id} is not part of the layout") from e


def stack_input(frame: np.ndarray, layout: Layout, element: Element, size: int = 96) -> StackedInput:
    """
    Resized frame channels plus a binary mask of the element's box

    Args:
        frame: uint8 (H, W, 3) rendering of the interface
        layout: Interface layout the mask is drawn from
        element: Targeted element
        size: Output side length

    Returns:
        StackedInput of shape (4, size, size) with values in [0, 1]
    """
    _check_element(layout, element)
    img = Image.fromarray(np.asarray(frame, dtype=np.uint8)).resize((size, size), Image.Resampling.BILINEAR)
    rgb = np.asarray(img, dtype=np.float64).transpose(2, 0, 1) / 255.0

    # nearest-neighbor sampling of the full-resolution box
    x0, y0, w, h = element.bbox
    xs = np.floor((np.arange(size) + 0.5) * layout.width_px / size)
    ys = np.floor((np.arange(size) + 0.5) * layout.height_px / size)
    mask = np.outer((ys >= y0) & (ys < y0 + h), (xs >= x0) & (xs < x0 + w)).astype(np.float64)
    return StackedInput(values=np.concatenate([rgb, mask[None]], axis=0))


def slice_states(
    trace: ScenarioTrace,
    layout: Layout,
    element: Element,
    onset_s: float,
    grid: TimeGrid,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-slice highlight state (+1 / -1) and normalized value of an element

    States are read at slice midpoints over the event window.
    """
    lo = onset_s + grid.window_start_s
    hi = onset_s + grid.window_end_s
    if lo < -1e-9 or hi > trace.duration_s + 1e-9:
        raise CoverageError(
            f"Event window [{lo:.2f}, {hi:.2f}] s is outside task {trace.task_id} ({trace.duration_s:.0f} s)"
        )
    mids = onset_s + grid.slice_starts() + grid.ns_step_s / 2.0
    states = np.array([
        1.0 if element.id in drone_simulator.highlighted_ids(trace, layout, float(t)) else -1.0
        for t in mids
    ])
    values = np.array([
        normalized_value(trace.frame_at(float(t)).drones[element.drone_index], element.icon_kind)
        for t in mids
    ])
    return states, values


def right_align(values: np.ndarray, n_done: int, T: int) -> np.ndarray:
    """First n_done entries placed at the end of a zero vector of length T"""
    out = np.zeros(T)
    if n_done > 0:
        out[T - n_done:] = values[:n_done]
    return out


def temporal_inputs(
    trace: ScenarioTrace,
    layout: Layout,
    interval: Interval,
    element: Element,
    t: float,
    grid: Optional[TimeGrid] = None,
) -> TemporalInput:
    """
    Highlight vector v and task vector c at query time t

    Entries cover the slices of the event window that have ended by t,
    right-aligned and left-padded with 0.

    Args:
        trace: Simulated task
        layout: Interface layout
        interval: Critical interval the window is anchored on
        element: Targeted element
        t: Query time in task seconds
        grid: Sampling grid

    Returns:
        TemporalInput of length T
    """
    grid = grid or TimeGrid()
    _check_element(layout, element)
    start = interval.onset_s + grid.window_start_s
    if t < start - 1e-9 or t > interval.onset_s + grid.window_end_s + 1e-9:
        raise CoverageError(
            f"Query time {t:.2f} s is outside the window of the interval at {interval.onset_s:.2f} s"
        )
    states, values = slice_states(trace, layout, element, interval.onset_s, grid)
    n_done = int(np.clip(np.floor((t - start) / grid.ns_step_s + 1e-9), 0, grid.T))
    return TemporalInput(v=right_align(states, n_done, grid.T), c=right_align(values, n_done, grid.T))


def select_events(
    traces: Sequence[ScenarioTrace],
    grid: TimeGrid,
    per_condition: int = 16,
) -> List[Tuple[ScenarioTrace, Interval]]:
    """
    First per_condition highlighted and non-highlighted critical events

    Events are taken in (task, onset) order; only those whose whole window
    lies inside the task qualify.
    """
    picked: Dict[bool, List[Tuple[ScenarioTrace, Interval]]] = {True: [], False: []}
    for trace in sorted(traces, key=lambda tr: tr.task_id):
        for iv in trace.plan.critical_intervals():
            if iv.onset_s + grid.window_start_s < 0 or iv.onset_s + grid.window_end_s > trace.duration_s:
                continue
            if len(picked[iv.highlighted]) < per_condition:
                picked[iv.highlighted].append((trace, iv))

    for condition, events in picked.items():
        name = "highlighted" if condition else "non-highlighted"
        if not events:
            raise DegenerateInputError(f"No {name} critical events available")
        if len(events) < per_condition:
            logger.warning("Only %d %s events available (wanted %d)", len(events), name, per_condition)
    return picked[True] + picked[False]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def assign_splits(highlighted: Sequence[bool], fractions: Tuple[float, float, float], seed: int) -> List[str]:
    """Event-level train/val/test split, stratified by highlight condition"""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2029]))
    labels = [""] * len(highlighted)
    for condition in (True, False):
        members = [i for i, h in enumerate(highlighted) if h == condition]
        if not members:
            continue
        order = rng.permutation(members)
        n = len(order)
        n_train = _round_half_up(fractions[0] * n)
        n_val = max(1, _round_half_up(fractions[1] * n))
        if n_train < 1 or n - n_train - n_val < 1:
            raise DegenerateInputError(
                f"{n} events cannot fill train/val/test partitions with fractions {fractions}"
            )
        for rank, i in enumerate(order):
            labels[int(i)] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return labels


def build_dataset(
    events: Sequence[Tuple[ScenarioTrace, Interval]],
    ns_series: Sequence[NsSeries],
    layout: Layout,
    cfg: Optional[HismConfig] = None,
    grid: Optional[TimeGrid] = None,
    split: Tuple[float, float, float] = (0.6, 0.1, 0.3),
    seed: int = 0,
) -> HismDataset:
    """
    One pair per (event, slice): the query closes slice k

    Args:
        events: Selected (trace, critical interval) pairs
        ns_series: Ground-truth NS series of each event's target element
        layout: Interface layout
        cfg: Predictor config (image size)
        grid: Sampling grid
        split: Train/val/test fractions over events
        seed: Split seed

    Returns:
        HismDataset ordered by event, then slice
    """
    cfg = cfg or HismConfig()
    grid = grid or TimeGrid()
    if len(events) != len(ns_series):
        raise ValueError(f"{len(events)} events but {len(ns_series)} NS series")
    if not events:
        raise DegenerateInputError("No events to build a dataset from")

    labels = assign_splits([iv.highlighted for _, iv in events], split, seed)
    frames: Dict[FrozenSet[str], np.ndarray] = {}
    images: List[np.ndarray] = []
    image_keys: Dict[Tuple[FrozenSet[str], str], int] = {}
    T = grid.T

    image_index, temporal, targets, event_ids, slices, highlighted, split_col = [], [], [], [], [], [], []
    refs: List[EventRef] = []
    for e, ((trace, iv), series) in enumerate(zip(events, ns_series)):
        element = layout.element_for(iv.drone_index, iv.kind)
        if len(series.ns) != T:
            raise ValueError(f"NS series for event {e} has {len(series.ns)} slices, expected {T}")

        shown = frozenset(drone_simulator.highlighted_ids(trace, layout, iv.onset_s))
        if shown not in frames:
            frames[shown] = drone_simulator.render_frame(layout, sorted(shown))
        key = (shown, element.id)
        if key not in image_keys:
            image_keys[key] = len(images)
            images.append(stack_input(frames[shown], layout, element, cfg.image_size).values)

        states, values = slice_states(trace, layout, element, iv.onset_s, grid)
        for k in range(T):
            image_index.append(image_keys[key])
            temporal.append(np.stack([right_align(states, k + 1, T), right_align(values, k + 1, T)], axis=1))
            targets.append(series.ns[k])
            event_ids.append(e)
            slices.append(k)
            highlighted.append(iv.highlighted)
            split_col.append(labels[e])

        refs.append(EventRef(
            event=e, task_id=trace.task_id, interval=iv.index, element_id=element.id,
            onset_s=iv.onset_s, highlighted=iv.highlighted, split=labels[e],
        ))

    ds = HismDataset(
        images=np.stack(images),
        image_index=np.array(image_index, dtype=np.int64),
        temporal=np.stack(temporal),
        targets=np.array(targets, dtype=np.float64),
        event=np.array(event_ids, dtype=np.int64),
        slice_index=np.array(slices, dtype=np.int64),
        highlighted=np.array(highlighted, dtype=bool),
        split=np.array(split_col),
        events=refs,
    )
    logger.info(
        "Dataset: %d pairs from %d events (%d images), %d pairs with a highlight",
        ds.n_pairs, len(refs), len(images), int(np.sum(np.any(ds.temporal[:, :, 0] == 1.0, axis=1))),
    )
    return ds


def save_dataset(ds: HismDataset, path: Union[str, Path]) -> Path:
    """
    npz archive readable by np.load; members carry a fixed timestamp so
    reruns write identical bytes
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "images": ds.images,
        "image_index": ds.image_index,
        "temporal": ds.temporal,
        "targets": ds.targets,
        "event": ds.event,
        "slice_index": ds.slice_index,
        "highlighted": ds.highlighted,
        "split": ds.split.astype("U5"),
        "events": np.array(json.dumps([e.model_dump() for e in ds.events], sort_keys=True)),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name, value in arrays.items():
            info = zipfile.ZipInfo(f"{name}.npy", date_time=NPZ_TIMESTAMP)
            with zf.open(info, "w", force_zip64=True) as f:
                np.lib.format.write_array(f, np.asanyarray(value), allow_pickle=False)
    return path


def load_dataset(path: Union[str, Path]) -> HismDataset:
    with np.load(path, allow_pickle=False) as data:
        return HismDataset(
            images=data["images"],
            image_index=data["image_index"],
            temporal=data["temporal"],
            targets=data["targets"],
            event=data["event"],
            slice_index=data["slice_index"],
            highlighted=data["highlighted"],
            split=data["split"],
            events=[EventRef(**e) for e in json.loads(str(data["events"]))],
        )
