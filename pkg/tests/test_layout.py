import json

import numpy as np
import pytest

from src.core.layout import layout_manager
from src.utils.errors import LayoutError
from src.utils.models import IconKind, TimeGrid


def test_default_layout_has_four_blocks_of_eight(layout):
    assert layout.n_elements == 32
    assert (layout.width_px, layout.height_px) == (1920, 1200)
    for drone in range(4):
        kinds = {e.icon_kind for e in layout.elements_of_drone(drone)}
        assert kinds == set(IconKind)
    assert all(e.bbox[2:] == (142, 128) for e in layout.elements)


def test_shipped_layout_matches_default(layout):
    shipped = layout_manager.load_layout("config/default_layout.json")
    assert shipped == layout


def test_save_then_load_is_identity(layout, tmp_path):
    path = layout_manager.save_layout(layout, tmp_path / "layout.json")
    assert layout_manager.load_layout(path) == layout


def test_overlapping_boxes_rejected(tmp_path):
    raw = {
        "width_px": 400,
        "height_px": 300,
        "elements": [
            {"id": "a", "drone": 0, "kind": "battery", "bbox": [10, 10, 100, 100]},
            {"id": "b", "drone": 0, "kind": "wind", "bbox": [50, 50, 100, 100]},
        ],
    }
    path = tmp_path / "overlap.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(LayoutError, match="overlap"):
        layout_manager.load_layout(path)


def test_out_of_bounds_and_duplicates_rejected(tmp_path):
    base = {"width_px": 200, "height_px": 200}
    cases = {
        "outside": [{"id": "a", "drone": 0, "kind": "battery", "bbox": [150, 10, 100, 50]}],
        "Duplicate": [
            {"id": "a", "drone": 0, "kind": "battery", "bbox": [0, 0, 10, 10]},
            {"id": "a", "drone": 0, "kind": "wind", "bbox": [50, 50, 10, 10]},
        ],
    }
    for message, elements in cases.items():
        path = tmp_path / f"{message}.json"
        path.write_text(json.dumps({**base, "elements": elements}))
        with pytest.raises(LayoutError, match=message):
            layout_manager.load_layout(path)


def test_unparseable_layout_raises_layout_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(LayoutError):
        layout_manager.load_layout(path)


def test_element_at_uses_half_open_boxes(layout):
    e = layout.elements[0]
    x, y, w, h = e.bbox
    assert layout_manager.element_at(layout, (x, y)) == e.id
    assert layout_manager.element_at(layout, (x + w - 0.01, y + h - 0.01)) == e.id
    assert layout_manager.element_at(layout, (x + w, y)) != e.id
    assert layout_manager.element_at(layout, (0.0, 0.0)) is None


def test_elements_at_matches_scalar_lookup(layout):
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, layout.width_px, 500)
    ys = rng.uniform(0, layout.height_px, 500)
    idx = layout_manager.elements_at(layout, xs, ys)
    for x, y, i in zip(xs, ys, idx):
        found = layout_manager.element_at(layout, (x, y))
        assert (found is None and i == -1) or layout.elements[i].id == found


def test_time_grid_slices():
    grid = TimeGrid()
    starts = grid.slice_starts()
    assert len(starts) == 60
    assert starts[0] == pytest.approx(-1.0)
    assert starts[-1] == pytest.approx(4.9)
    assert grid.slice_index(0.0) == 10
    assert grid.slice_index(4.95) == 59
    with pytest.raises(ValueError):
        grid.slice_index(5.0)


def test_time_grid_rejects_inconsistent_length():
    with pytest.raises(ValueError):
        TimeGrid(T=50)
