"""
Fixation maps, Gaussian smoothing and normalized element saliency (NS)
"""
import logging
import struct
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib
import numpy as np
import pandas as pd
from PIL import Image
from scipy import ndimage

from src.utils.errors import CoverageError, LayoutError
from src.utils.models import (
    Element,
    Fixation,
    Layout,
    NormMode,
    NsSeries,
    NsValue,
    SaliencyMap,
    TimeGrid,
)

logger = logging.getLogger(__name__)

SMAP_MAGIC = b"SMAP"
SMAP_HEADER = struct.Struct("<III")

FixationsLike = Union[pd.DataFrame, Sequence[Fixation]]


def fixation_arrays(fixations: FixationsLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(start_ms, end_ms, x_px, y_px) arrays from a fixation table or list"""
    if isinstance(fixations, pd.DataFrame):
        return (
            fixations["start_ms"].to_numpy(dtype=np.float64),
            fixations["end_ms"].to_numpy(dtype=np.float64),
            fixations["x_px"].to_numpy(dtype=np.float64),
            fixations["y_px"].to_numpy(dtype=np.float64),
        )
    fixations = list(fixations)
    return (
        np.array([f.start_ms for f in fixations], dtype=np.float64),
        np.array([f.end_ms for f in fixations], dtype=np.float64),
        np.array([f.centroid[0] for f in fixations], dtype=np.float64),
        np.array([f.centroid[1] for f in fixations], dtype=np.float64),
    )


def fixation_table(fixations: Iterable[Fixation]) -> pd.DataFrame:
    """Fixation list as a table with the fixation CSV columns"""
    rows = [
        {
            "start_ms": f.start_ms,
            "end_ms": f.end_ms,
            "duration_ms": f.duration_ms,
            "x_px": f.centroid[0],
            "y_px": f.centroid[1],
        }
        for f in fixations
    ]
    return pd.DataFrame(rows, columns=["start_ms", "end_ms", "duration_ms", "x_px", "y_px"])


def gaussian_kernel_1d(window_px: int, sigma: Optional[float] = None) -> np.ndarray:
    """Truncated Gaussian of odd width, renormalized to sum 1"""
    window_px = int(round(window_px))
    if window_px < 3 or window_px % 2 == 0:
        raise ValueError(f"Smoothing window must be odd and >= 3, got {window_px}")
    sigma = sigma if sigma is not None else window_px / 6.0
    half = window_px // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def normalize(values: np.ndarray, mode: NormMode) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if mode == NormMode.UNIT_MAX:
        m = values.max() if values.size else 0.0
        return values / m if m > 0 else values.copy()
    if mode == NormMode.UNIT_SUM:
        s = values.sum()
        return values / s if s > 0 else values.copy()
    return values.copy()


class SaliencyEngine:
    """Builds saliency rasters and element-level NS"""

    def __init__(self, window_px: int = 35, sigma: Optional[float] = None):
        self.window_px = window_px
        self.sigma = sigma

    # ------------------------------------------------------------------
    # Rasters
    # ------------------------------------------------------------------

    def fixation_map(
        self,
        fixations: FixationsLike,
        bin_ms: Tuple[float, float],
        resolution: Tuple[int, int],
        scale: int = 1,
    ) -> SaliencyMap:
        """
        Binary impulse map of fixations active in a time bin

        A fixation is active when it overlaps [bin_start, bin_end).

        Args:
            fixations: Fixations, possibly pooled over participants
            bin_ms: (start, end) of the bin in ms
            resolution: (width, height) of the screen in pixels
            scale: Integer downsampling factor of the output raster

        Returns:
            Raw SaliencyMap
        """
        width, height = resolution
        w, h = int(np.ceil(width / scale)), int(np.ceil(height / scale))
        values = np.zeros((h, w), dtype=np.float64)

        start, end, x, y = fixation_arrays(fixations)
        if start.size == 0:
            return SaliencyMap(values=values, norm_mode=NormMode.RAW)

        active = (start < bin_ms[1]) & (end >= bin_ms[0])
        px = np.floor(x[active] / scale).astype(np.int64)
        py = np.floor(y[active] / scale).astype(np.int64)
        inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        values[py[inside], px[inside]] = 1.0
        return SaliencyMap(values=values, norm_mode=NormMode.RAW)

    def count_map(self, fixations: FixationsLike, resolution: Tuple[int, int], scale: int = 1) -> np.ndarray:
        """Fixation counts per pixel over a whole recording"""
        width, height = resolution
        w, h = int(np.ceil(width / scale)), int(np.ceil(height / scale))
        _, _, x, y = fixation_arrays(fixations)
        px = np.floor(x / scale).astype(np.int64)
        py = np.floor(y / scale).astype(np.int64)
        inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        counts = np.zeros((h, w), dtype=np.float64)
        np.add.at(counts, (py[inside], px[inside]), 1.0)
        return counts

    def smooth_raw(self, values: np.ndarray, window_px: Optional[int] = None, sigma: Optional[float] = None) -> np.ndarray:
        """Zero-padded separable convolution with the truncated Gaussian"""
        window_px = window_px or self.window_px
        k = gaussian_kernel_1d(window_px, sigma if sigma is not None else self.sigma)
        values = np.asarray(values, dtype=np.float64)

        nz = np.flatnonzero(values)
        if nz.size and nz.size * k.size * k.size < values.size:
            return self._stamp(values, nz, k)

        out = ndimage.convolve1d(values, k, axis=0, mode="constant", cval=0.0)
        return ndimage.convolve1d(out, k, axis=1, mode="constant", cval=0.0)

    @staticmethod
    def _stamp(values: np.ndarray, nz: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Sparse path: add the clipped 2-D kernel at every nonzero pixel"""
        h, w = values.shape
        half = k.size // 2
        kernel = np.outer(k, k)
        out = np.zeros_like(values)
        ys, xs = np.unravel_index(nz, values.shape)
        for y, x in zip(ys, xs):
            y0, y1 = max(0, y - half), min(h, y + half + 1)
            x0, x1 = max(0, x - half), min(w, x + half + 1)
            out[y0:y1, x0:x1] += values[y, x] * kernel[
                y0 - (y - half):y1 - (y - half), x0 - (x - half):x1 - (x - half)
            ]
        return out

    def smooth_map(self, fix_map: SaliencyMap, window_px: Optional[int] = None, sigma: Optional[float] = None) -> SaliencyMap:
        """Smoothed map, max-normalized to [0, 1]"""
        raw = self.smooth_raw(fix_map.values, window_px, sigma)
        return SaliencyMap(values=normalize(raw, NormMode.UNIT_MAX), norm_mode=NormMode.UNIT_MAX)

    # ------------------------------------------------------------------
    # Element saliency and NS
    # ------------------------------------------------------------------

    @staticmethod
    def _scaled_bbox(element: Element, scale: int) -> Tuple[int, int, int, int]:
        x, y, w, h = element.bbox
        return x // scale, y // scale, -(-(x + w) // scale), -(-(y + h) // scale)

    def element_saliency(self, smap: SaliencyMap, element: Element, scale: int = 1) -> float:
        """Sum of raster values over the element's bbox"""
        x0, y0, x1, y1 = self._scaled_bbox(element, scale)
        if x0 < 0 or y0 < 0 or x1 > smap.width or y1 > smap.height:
            raise LayoutError(f"Element {element.id} bbox lies outside the {smap.width}x{smap.height} map")
        return float(smap.values[y0:y1, x0:x1].sum())

    def element_saliencies(self, smap: SaliencyMap, layout: Layout, scale: int = 1) -> np.ndarray:
        """element_saliency for every element through one integral image"""
        integral = np.zeros((smap.height + 1, smap.width + 1))
        integral[1:, 1:] = smap.values.cumsum(axis=0).cumsum(axis=1)
        out = np.empty(layout.n_elements)
        for i, e in enumerate(layout.elements):
            x0, y0, x1, y1 = self._scaled_bbox(e, scale)
            if x0 < 0 or y0 < 0 or x1 > smap.width or y1 > smap.height:
                raise LayoutError(f"Element {e.id} bbox lies outside the {smap.width}x{smap.height} map")
            out[i] = integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]
        return out

    def impulse_saliencies(
        self,
        px: np.ndarray,
        py: np.ndarray,
        layout: Layout,
        window_px: Optional[int] = None,
    ) -> np.ndarray:
        """
        Element saliencies of the smoothed impulse map without building the raster

        The kernel is separable, so the mass one impulse leaves in a box is
        the product of the 1-D kernel mass over the box's columns and rows.

        Args:
            px, py: Integer pixel coordinates of the (unique) impulses
            layout: Interface layout
            window_px: Smoothing window

        Returns:
            Raw saliency per element
        """
        k = gaussian_kernel_1d(window_px or self.window_px, self.sigma)
        half = k.size // 2
        cdf = np.concatenate([[0.0], np.cumsum(k)])

        def mass(lo: np.ndarray, hi: np.ndarray, c: np.ndarray) -> np.ndarray:
            # kernel taps c + j, j in [-half, half], falling in [lo, hi)
            a = np.clip(lo - c + half, 0, k.size)
            b = np.clip(hi - c + half, 0, k.size)
            return cdf[b] - cdf[a]

        out = np.zeros(layout.n_elements)
        if px.size == 0:
            return out
        for i, e in enumerate(layout.elements):
            x, y, w, h = e.bbox
            out[i] = float(np.sum(mass(x, x + w, px) * mass(y, y + h, py)))
        return out

    @staticmethod
    def ns_from_saliencies(saliencies: np.ndarray) -> Tuple[np.ndarray, bool]:
        """NS_k = S_k / sum_j S_j; uniform with a flag when the sum is 0"""
        total = float(np.sum(saliencies))
        if total <= 0:
            return np.full(len(saliencies), 1.0 / len(saliencies)), True
        return np.asarray(saliencies, dtype=np.float64) / total, False

    def normalized_saliency(self, smap: SaliencyMap, layout: Layout, element: Element, scale: int = 1) -> NsValue:
        """
        Share of the map's element saliency held by one element

        Args:
            smap: Saliency raster in any normalization mode
            layout: Interface layout
            element: Element of interest

        Returns:
            NsValue; undefined_uniform is set when no element has saliency
        """
        ns, flag = self.ns_from_saliencies(self.element_saliencies(smap, layout, scale))
        return NsValue(ns=float(ns[layout.index_of(element.id)]), undefined_uniform=flag)

    def slice_ns(
        self,
        fixations: FixationsLike,
        layout: Layout,
        bin_ms: Tuple[float, float],
        window_px: Optional[int] = None,
    ) -> Tuple[np.ndarray, bool]:
        """NS of every element for fixations active in one bin"""
        start, end, x, y = fixation_arrays(fixations)
        active = (start < bin_ms[1]) & (end >= bin_ms[0])
        px = np.floor(x[active]).astype(np.int64)
        py = np.floor(y[active]).astype(np.int64)
        inside = (px >= 0) & (px < layout.width_px) & (py >= 0) & (py < layout.height_px)
        if inside.any():
            # binary impulses: one per occupied pixel
            pix = np.unique(np.stack([px[inside], py[inside]], axis=1), axis=0)
            saliencies = self.impulse_saliencies(pix[:, 0], pix[:, 1], layout, window_px)
        else:
            saliencies = np.zeros(layout.n_elements)
        return self.ns_from_saliencies(saliencies)

    def ns_matrix(
        self,
        fixations: FixationsLike,
        layout: Layout,
        onset_s: float,
        grid: Optional[TimeGrid] = None,
        coverage_ms: Optional[Tuple[float, float]] = None,
        window_px: Optional[int] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        NS of all elements over the event window

        Returns:
            (T x n_elements NS matrix, length-T undefined-uniform flags)
        """
        grid = grid or TimeGrid()
        if coverage_ms is not None:
            lo = (onset_s + grid.window_start_s) * 1000.0
            hi = (onset_s + grid.window_end_s) * 1000.0
            if lo < coverage_ms[0] - 1e-6 or hi > coverage_ms[1] + 1e-6:
                raise CoverageError(
                    f"Window [{lo:.0f}, {hi:.0f}] ms is outside gaze coverage "
                    f"[{coverage_ms[0]:.0f}, {coverage_ms[1]:.0f}] ms"
                )

        starts = grid.slice_starts()
        ns = np.empty((grid.T, layout.n_elements))
        flags = np.zeros(grid.T, dtype=bool)
        for k, t_rel in enumerate(starts):
            b0 = (onset_s + t_rel) * 1000.0
            ns[k], flags[k] = self.slice_ns(fixations, layout, (b0, b0 + grid.ns_step_s * 1000.0), window_px)
        return ns, flags

    def ns_time_series(
        self,
        fixations: FixationsLike,
        layout: Layout,
        element: Element,
        onset_s: float,
        grid: Optional[TimeGrid] = None,
        coverage_ms: Optional[Tuple[float, float]] = None,
        window_px: Optional[int] = None,
    ) -> NsSeries:
        """
        NS of one element on the 0.1 s grid around a critical onset

        Args:
            fixations: Fixations of one or many participants (task clock)
            layout: Interface layout
            element: Element of interest
            onset_s: Critical onset in task time
            grid: Sampling grid
            coverage_ms: Time span the gaze covers; the window must lie inside

        Returns:
            NsSeries of length T
        """
        grid = grid or TimeGrid()
        ns, flags = self.ns_matrix(fixations, layout, onset_s, grid, coverage_ms, window_px)
        idx = layout.index_of(element.id)
        return NsSeries(
            element_id=element.id,
            t_rel_s=[round(float(t), 6) for t in grid.slice_starts()],
            ns=[float(v) for v in ns[:, idx]],
            flags=[bool(f) for f in flags],
        )

    def pooled_ns_series(
        self,
        fixations_by_participant: Sequence[FixationsLike],
        layout: Layout,
        element: Element,
        onset_s: float,
        grid: Optional[TimeGrid] = None,
        coverage_ms: Optional[Tuple[float, float]] = None,
    ) -> NsSeries:
        """NS series of the fixations of several participants merged per bin"""
        tables = [
            f if isinstance(f, pd.DataFrame) else fixation_table(f)
            for f in fixations_by_participant
        ]
        pooled = pd.concat(tables, ignore_index=True) if tables else fixation_table([])
        return self.ns_time_series(pooled, layout, element, onset_s, grid, coverage_ms)

    @staticmethod
    def average_series(series: Sequence[NsSeries], label: Optional[str] = None) -> NsSeries:
        """Mean over events; a slice is flagged when any input slice is"""
        if not series:
            raise ValueError("No series to average")
        ns = np.mean([s.ns for s in series], axis=0)
        flags = np.any([s.flags or [False] * len(s.ns) for s in series], axis=0)
        return NsSeries(
            element_id=label or series[0].element_id,
            t_rel_s=list(series[0].t_rel_s),
            ns=[float(v) for v in ns],
            flags=[bool(f) for f in flags],
        )

    # ------------------------------------------------------------------
    # Files
    # ------------------------------------------------------------------

    def write_smap(self, smap: SaliencyMap, path: Union[str, Path]) -> Path:
        """16-byte header then row-major float32 little-endian values"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.write(SMAP_MAGIC)
            f.write(SMAP_HEADER.pack(smap.width, smap.height, 0))
            f.write(smap.values.astype("<f4").tobytes(order="C"))
        return path

    def read_smap(self, path: Union[str, Path], norm_mode: NormMode = NormMode.RAW) -> SaliencyMap:
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != SMAP_MAGIC:
                raise ValueError(f"{path} is not a SMAP raster")
            width, height, _ = SMAP_HEADER.unpack(f.read(SMAP_HEADER.size))
            data = np.frombuffer(f.read(), dtype="<f4")
        if data.size != width * height:
            raise ValueError(f"{path}: expected {width * height} values, found {data.size}")
        return SaliencyMap(values=data.reshape(height, width).astype(np.float64), norm_mode=norm_mode)

    def write_png(self, smap: SaliencyMap, path: Union[str, Path], cmap: str = "inferno") -> Path:
        """8-bit heatmap with a fixed color ramp over [0, 1]"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        values = np.clip(normalize(smap.values, NormMode.UNIT_MAX), 0.0, 1.0)
        rgba = matplotlib.colormaps[cmap](values)
        Image.fromarray((rgba[..., :3] * 255).round().astype(np.uint8)).save(path)
        return path


# Global saliency engine
saliency_engine = SaliencyEngine()
