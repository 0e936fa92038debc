"""
Bottom-up ITTI saliency baseline over rendered interface frames
"""
import logging
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from src.saliency.maps import normalize, saliency_engine
from src.simulation.dronesim import drone_simulator
from src.utils.errors import ShapeError
from src.utils.models import (
    Element,
    IttiConfig,
    Layout,
    NormMode,
    NsSeries,
    SaliencyMap,
    ScenarioTrace,
    TimeGrid,
)

logger = logging.getLogger(__name__)

ORIENTATIONS_DEG = (0.0, 45.0, 90.0, 135.0)


def load_frame(path: Union[str, Path]) -> np.ndarray:
    """RGB uint8 frame from a PNG file"""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_frame(frame: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(path)
    return path


def resize_linear(img: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Bilinear resize on pixel centers to an exact (rows, cols) shape"""
    h, w = shape
    ih, iw = img.shape
    ys = np.clip((np.arange(h) + 0.5) * ih / h - 0.5, 0, ih - 1)
    xs = np.clip((np.arange(w) + 0.5) * iw / w - 0.5, 0, iw - 1)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return ndimage.map_coordinates(img, [yy, xx], order=1, mode="nearest")


def gaussian_pyramid(img: np.ndarray, levels: int = 9) -> List[np.ndarray]:
    """Level 0 is the input; each level blurs and halves the one below"""
    pyramid = [np.asarray(img, dtype=np.float64)]
    for _ in range(1, levels):
        pyramid.append(ndimage.gaussian_filter(pyramid[-1], sigma=1.0, mode="reflect")[::2, ::2])
    return pyramid


def get_channels(frame: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Intensity and broadly tuned color channels

    Hue is decoupled from intensity by dividing r, g, b by I where I
    exceeds a tenth of its maximum; negative color responses are zeroed.

    Returns:
        I, R, G, B, Y
    """
    rgb = np.asarray(frame, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    intensity = (r + g + b) / 3.0

    peak = intensity.max()
    norm = np.where(intensity > 0.1 * peak, intensity, 1.0) if peak > 0 else np.ones_like(intensity)
    r, g, b = r / norm, g / norm, b / norm
    # chroma only counts where the pixel is bright enough
    dark = ~(intensity > 0.1 * peak)
    r, g, b = (np.where(dark, 0.0, c) for c in (r, g, b))

    R = r - (g + b) / 2.0
    G = g - (r + b) / 2.0
    B = b - (r + g) / 2.0
    Y = (r + g) / 2.0 - np.abs(r - g) / 2.0 - b
    R, G, B, Y = (np.maximum(c, 0.0) for c in (R, G, B, Y))
    return intensity, R, G, B, Y


def gabor_pair(wavelength: float, sigma: float, size: int, theta_deg: float) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    """
    Separable terms of an even Gabor kernel

    g(x)g(y)cos(k(x cos t + y sin t)) splits into a cos*cos term minus a
    sin*sin term, each a product of 1-D kernels.

    Returns:
        [(kx, ky, sign), ...] to be applied as sign * (kx along cols, ky along rows)
    """
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    env = np.exp(-0.5 * (x / sigma) ** 2)
    k = 2.0 * np.pi / wavelength
    t = np.deg2rad(theta_deg)
    cx, sx = env * np.cos(k * x * np.cos(t)), env * np.sin(k * x * np.cos(t))
    cy, sy = env * np.cos(k * x * np.sin(t)), env * np.sin(k * x * np.sin(t))
    return [(cx, cy, 1.0), (sx, sy, -1.0)]


def normalize_operator(m: np.ndarray, local_max_fraction: float = 0.1) -> np.ndarray:
    """
    Map normalization that promotes maps with few strong peaks

    The map is rescaled to [0, 1] (M = 1) and multiplied by (M - m)^2,
    where m is the mean of the local maxima other than the global one.
    Local maxima are 8-neighborhood maxima above local_max_fraction * M;
    connected plateau pixels count as one maximum. With no other maxima
    m is 0.

    Args:
        m: Finite 2-D map
        local_max_fraction: Relative floor for counted maxima

    Returns:
        Normalized map; all zeros for a constant map
    """
    m = np.asarray(m, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.zeros_like(m)

    r = (m - lo) / (hi - lo)
    peaks = (r == ndimage.maximum_filter(r, size=3, mode="constant", cval=-np.inf)) & (r > local_max_fraction)
    labels, n = ndimage.label(peaks, structure=np.ones((3, 3), dtype=bool))

    top = labels[np.unravel_index(int(np.argmax(r)), r.shape)]
    others = [i for i in range(1, n + 1) if i != top]
    m_bar = float(np.mean(ndimage.maximum(r, labels, others))) if others else 0.0
    return r * (1.0 - m_bar) ** 2


class IttiModel:
    """Center-surround feature pyramids combined into one saliency map"""

    def __init__(self, cfg: Optional[IttiConfig] = None):
        self.cfg = cfg or IttiConfig()

    def _center_surround(self, pyr_c: List[np.ndarray], pyr_s: Optional[List[np.ndarray]] = None) -> List[np.ndarray]:
        pyr_s = pyr_c if pyr_s is None else pyr_s
        maps = []
        for c in self.cfg.center_levels:
            for delta in self.cfg.deltas:
                center = pyr_c[c]
                surround = resize_linear(pyr_s[c + delta], center.shape)
                maps.append(np.abs(center - surround))
        return maps

    def _gabor(self, img: np.ndarray, theta: float) -> np.ndarray:
        out = np.zeros_like(img)
        for kx, ky, sign in gabor_pair(self.cfg.gabor_wavelength_px, self.cfg.gabor_sigma_px,
                                       self.cfg.gabor_size_px, theta):
            tmp = ndimage.convolve1d(img, kx, axis=1, mode="reflect")
            out += sign * ndimage.convolve1d(tmp, ky, axis=0, mode="reflect")
        return np.abs(out)

    def _conspicuity(self, maps: Sequence[np.ndarray], shape: Tuple[int, int]) -> np.ndarray:
        frac = self.cfg.local_max_fraction
        return sum(resize_linear(normalize_operator(fm, frac), shape) for fm in maps)

    def feature_maps(self, frame: np.ndarray) -> Dict[str, List[np.ndarray]]:
        """Center-surround feature maps keyed by channel (intensity, rg, by, o0..o135)"""
        levels = self.cfg.levels
        intensity, R, G, B, Y = get_channels(frame)

        i_pyr = gaussian_pyramid(intensity, levels)
        r_pyr, g_pyr, b_pyr, y_pyr = (gaussian_pyramid(c, levels) for c in (R, G, B, Y))

        out = {"intensity": self._center_surround(i_pyr)}
        out["rg"] = self._center_surround(
            [r - g for r, g in zip(r_pyr, g_pyr)], [g - r for r, g in zip(r_pyr, g_pyr)]
        )
        out["by"] = self._center_surround(
            [b - y for b, y in zip(b_pyr, y_pyr)], [y - b for b, y in zip(b_pyr, y_pyr)]
        )
        for theta in ORIENTATIONS_DEG:
            o_pyr = [self._gabor(level, theta) for level in i_pyr]
            out[f"o{int(theta)}"] = self._center_surround(o_pyr)
        return out

    def itti_saliency(self, frame: np.ndarray) -> SaliencyMap:
        """
        Bottom-up saliency of an RGB frame

        Args:
            frame: uint8 (H, W, 3) raster, both sides >= min_size_px

        Returns:
            unit_max SaliencyMap at frame resolution
        """
        frame = np.asarray(frame)
        if frame.ndim != 3 or frame.shape[2] != 3:
            raise ShapeError(f"Expected an (H, W, 3) frame, got shape {frame.shape}")
        h, w = frame.shape[:2]
        if min(h, w) < self.cfg.min_size_px:
            raise ShapeError(
                f"Frame {w}x{h} is too small for a {self.cfg.levels}-level pyramid "
                f"(minimum side {self.cfg.min_size_px} px)"
            )

        features = self.feature_maps(frame)
        base = features["intensity"][0].shape
        frac = self.cfg.local_max_fraction

        i_bar = self._conspicuity(features["intensity"], base)
        c_bar = self._conspicuity(features["rg"] + features["by"], base)
        o_bar = sum(
            normalize_operator(self._conspicuity(features[f"o{int(t)}"], base), frac)
            for t in ORIENTATIONS_DEG
        )

        combined = (
            normalize_operator(i_bar, frac)
            + normalize_operator(c_bar, frac)
            + normalize_operator(o_bar, frac)
        ) / 3.0
        full = np.maximum(resize_linear(combined, (h, w)), 0.0)
        return SaliencyMap(values=normalize(full, NormMode.UNIT_MAX), norm_mode=NormMode.UNIT_MAX)

    def highlight_map(
        self,
        layout: Layout,
        highlighted: FrozenSet[str],
        cache: Optional[Dict[FrozenSet[str], SaliencyMap]] = None,
    ) -> SaliencyMap:
        """ITTI map of the schematic frame for one highlight set, at layout size / frame_scale"""
        if cache is not None and highlighted in cache:
            return cache[highlighted]
        scale = self.cfg.frame_scale
        frame = drone_simulator.render_frame(
            layout, sorted(highlighted), (layout.width_px // scale, layout.height_px // scale)
        )
        smap = self.itti_saliency(frame)
        logger.debug("ITTI map computed for highlight set %s", sorted(highlighted))
        if cache is not None:
            cache[highlighted] = smap
        return smap

    def itti_ns_series(
        self,
        trace: ScenarioTrace,
        layout: Layout,
        element: Element,
        onset_s: float,
        grid: Optional[TimeGrid] = None,
        cache: Optional[Dict[FrozenSet[str], SaliencyMap]] = None,
    ) -> NsSeries:
        """
        Baseline NS of an element from the ITTI map of each slice's frame

        Frames depend only on which elements are highlighted, so one map
        serves every slice with the same highlight set.

        Args:
            trace: Simulated task
            layout: Interface layout
            element: Element of interest
            onset_s: Critical onset in task time
            grid: Sampling grid
            cache: Optional highlight-set -> map cache shared across events

        Returns:
            NsSeries of length T
        """
        grid = grid or TimeGrid()
        cache = {} if cache is None else cache
        idx = layout.index_of(element.id)
        vectors: Dict[FrozenSet[str], Tuple[np.ndarray, bool]] = {}

        starts = grid.slice_starts()
        ns, flags = [], []
        for t_rel in starts:
            t = min(max(onset_s + t_rel + grid.ns_step_s / 2.0, 0.0), trace.duration_s - 1e-9)
            key = frozenset(drone_simulator.highlighted_ids(trace, layout, t))
            if key not in vectors:
                smap = self.highlight_map(layout, key, cache)
                vectors[key] = saliency_engine.ns_from_saliencies(
                    saliency_engine.element_saliencies(smap, layout, self.cfg.frame_scale)
                )
            vec, flag = vectors[key]
            ns.append(float(vec[idx]))
            flags.append(bool(flag))

        return NsSeries(
            element_id=element.id,
            t_rel_s=[round(float(t), 6) for t in starts],
            ns=ns,
            flags=flags,
        )


# Global ITTI model
itti_model = IttiModel()
