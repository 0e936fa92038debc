"""
GUI layout loading, validation and element lookup
"""
import json
import logging
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from config.settings import settings
from src.utils.errors import LayoutError
from src.utils.models import SAFETY_KINDS, STATUS_KINDS, Element, Layout

logger = logging.getLogger(__name__)

# Drone blocks sit on a 2 x 2 grid; icons on 4 columns x 2 rows inside a block
BLOCK_ORIGINS: List[Tuple[int, int]] = [(120, 180), (1208, 180), (120, 700), (1208, 700)]
ICON_PITCH: Tuple[int, int] = (150, 136)


class LayoutManager:
    """Loads, validates and queries monitoring-interface layouts"""

    def load_layout(self, path: Union[str, Path]) -> Layout:
        """
        Load and validate a layout file

        Args:
            path: JSON layout file

        Returns:
            Validated Layout
        """
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f)
            layout = Layout(**raw)
        except (OSError, json.JSONDecodeError, TypeError, ValidationError) as e:
            raise LayoutError(f"Cannot parse layout {path}: {e}") from e

        self.validate_layout(layout)
        logger.debug("Loaded layout %s with %d elements", path, layout.n_elements)
        return layout

    def save_layout(self, layout: Layout, path: Union[str, Path]) -> Path:
        """Write a layout in the same schema load_layout reads"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "width_px": layout.width_px,
            "height_px": layout.height_px,
            "elements": [
                {
                    "id": e.id,
                    "drone": e.drone_index,
                    "kind": e.icon_kind.value,
                    "bbox": list(e.bbox),
                }
                for e in layout.elements
            ],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
        return path

    def validate_layout(self, layout: Layout) -> None:
        """Raise LayoutError on duplicate ids, out-of-bounds or overlapping boxes"""
        seen = set()
        for e in layout.elements:
            if e.id in seen:
                raise LayoutError(f"Duplicate element id {e.id}")
            seen.add(e.id)

            x, y, w, h = e.bbox
            if x < 0 or y < 0 or x + w > layout.width_px or y + h > layout.height_px:
                raise LayoutError(
                    f"Element {e.id} bbox {e.bbox} outside "
                    f"{layout.width_px}x{layout.height_px} screen"
                )

        for a, b in combinations(layout.elements, 2):
            if self._overlaps(a, b):
                raise LayoutError(f"Elements {a.id} and {b.id} overlap")

    @staticmethod
    def _overlaps(a: Element, b: Element) -> bool:
        ax, ay, aw, ah = a.bbox
        bx, by, bw, bh = b.bbox
        return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah

    def element_at(self, layout: Layout, p: Tuple[float, float]) -> Optional[str]:
        """
        Element whose half-open bbox contains a point

        Args:
            layout: Validated layout
            p: (x, y) in pixels

        Returns:
            Element id or None for background
        """
        x, y = p
        for e in layout.elements:
            if e.contains(x, y):
                return e.id
        return None

    def elements_at(self, layout: Layout, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized element_at; returns element indices, -1 for background"""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        out = np.full(xs.shape, -1, dtype=np.int64)
        for i, e in enumerate(layout.elements):
            x0, y0, w, h = e.bbox
            inside = (xs >= x0) & (xs < x0 + w) & (ys >= y0) & (ys < y0 + h)
            out[inside] = i
        return out

    def default_layout(self) -> Layout:
        """4 drone blocks x 8 icons on the study screen"""
        kinds = list(SAFETY_KINDS) + list(STATUS_KINDS)
        elements = []
        for drone, (bx, by) in enumerate(BLOCK_ORIGINS):
            for k, kind in enumerate(kinds):
                col, row = k % 4, k // 4
                elements.append(Element(
                    id=f"d{drone}_{kind.value}",
                    drone=drone,
                    kind=kind,
                    bbox=(
                        bx + col * ICON_PITCH[0],
                        by + row * ICON_PITCH[1],
                        settings.ICON_WIDTH_PX,
                        settings.ICON_HEIGHT_PX,
                    ),
                ))
        layout = Layout(
            width_px=settings.SCREEN_WIDTH_PX,
            height_px=settings.SCREEN_HEIGHT_PX,
            elements=elements,
        )
        self.validate_layout(layout)
        return layout


# Global layout manager
layout_manager = LayoutManager()
