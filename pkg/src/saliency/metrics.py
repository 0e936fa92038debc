"""
Pixel-level saliency metrics, composite losses and regression metrics
"""
import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.utils.errors import DegenerateInputError, ShapeError
from src.utils.models import LossWeights, MetricReport, RegressionReport, SaliencyMap, Split

logger = logging.getLogger(__name__)

MapLike = Union[SaliencyMap, np.ndarray]
Points = Sequence[Tuple[int, int]]

REPORT_COLUMNS = ["split", "auc", "nss", "sim", "cc", "kl", "mse", "mae"]


def _values(m: MapLike) -> np.ndarray:
    return np.asarray(m.values if isinstance(m, SaliencyMap) else m, dtype=np.float64)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Map shapes differ: {a.shape} vs {b.shape}")


def _point_values(values: np.ndarray, points: Points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    if pts.size == 0:
        raise DegenerateInputError("At least one fixation point is required")
    xs, ys = pts[:, 0], pts[:, 1]
    h, w = values.shape
    if np.any((xs < 0) | (xs >= w) | (ys < 0) | (ys >= h)):
        raise ShapeError(f"Fixation points fall outside the {w}x{h} map")
    return values[ys, xs]


class SaliencyMetrics:
    """AUC-Judd, NSS, SIM, CC and KL on saliency rasters"""

    def __init__(self, kl_eps: float = 1e-7):
        self.kl_eps = kl_eps

    def auc(self, pred: MapLike, fixation_points: Points) -> float:
        """
        AUC-Judd

        Thresholds sweep the saliency values at fixated pixels. The true
        positive rate counts fixations at or above a threshold, the false
        positive rate counts non-fixated pixels at or above it.

        Args:
            pred: Predicted map
            fixation_points: (x, y) pixel coordinates of fixations

        Returns:
            Area under the ROC curve in [0, 1]
        """
        s = _values(pred)
        if not np.all(np.isfinite(s)):
            raise DegenerateInputError("Predicted map has non-finite values")
        fixated_values = _point_values(s, fixation_points)

        pts = np.asarray(fixation_points, dtype=np.int64).reshape(-1, 2)
        fixated = np.zeros(s.shape, dtype=bool)
        fixated[pts[:, 1], pts[:, 0]] = True
        others = np.sort(s[~fixated])
        n_fix, n_other = fixated_values.size, others.size

        thresholds = np.unique(fixated_values)[::-1]
        sorted_fix = np.sort(fixated_values)
        tp = (n_fix - np.searchsorted(sorted_fix, thresholds, side="left")) / n_fix
        if n_other:
            fp = (n_other - np.searchsorted(others, thresholds, side="left")) / n_other
        else:
            fp = np.ones_like(tp)

        tp = np.concatenate([[0.0], tp, [1.0]])
        fp = np.concatenate([[0.0], fp, [1.0]])
        return float(np.sum(np.diff(fp) * (tp[1:] + tp[:-1]) / 2.0))

    def nss(self, pred: MapLike, fixation_points: Points) -> float:
        """Mean z-scored saliency at fixation points"""
        s = _values(pred)
        std = s.std()
        if std <= 0:
            raise DegenerateInputError("NSS is undefined for a zero-variance map")
        z = (s - s.mean()) / std
        return float(np.mean(_point_values(z, fixation_points)))

    def sim(self, pred: MapLike, gt: MapLike) -> float:
        """Histogram intersection of the two maps as distributions"""
        p, q = _values(pred), _values(gt)
        _same_shape(p, q)
        sp, sq = p.sum(), q.sum()
        if sp <= 0 and sq <= 0:
            raise DegenerateInputError("SIM is undefined when both maps are all zero")
        if sp <= 0 or sq <= 0:
            return 0.0
        return float(np.minimum(p / sp, q / sq).sum())

    def cc(self, pred: MapLike, gt: MapLike) -> float:
        """Pearson correlation of the flattened rasters"""
        p, q = _values(pred), _values(gt)
        _same_shape(p, q)
        if p.std() <= 0 or q.std() <= 0:
            raise DegenerateInputError("CC is undefined for a zero-variance map")
        return float(np.corrcoef(p.ravel(), q.ravel())[0, 1])

    def kl(self, gt: MapLike, pred: MapLike, eps: Optional[float] = None) -> float:
        """KL(gt || pred) after unit-sum normalization with an eps floor"""
        eps = self.kl_eps if eps is None else eps
        g, p = _values(gt), _values(pred)
        _same_shape(g, p)

        def regularize(v: np.ndarray) -> np.ndarray:
            s = v.sum()
            v = v / s if s > 0 else v
            v = np.maximum(v, eps)
            return v / v.sum()

        g, p = regularize(g), regularize(p)
        return float(max(0.0, np.sum(g * np.log(g / p))))

    def composite_loss(
        self,
        pred: MapLike,
        gt: MapLike,
        fixations: Optional[Points] = None,
        w: Optional[LossWeights] = None,
    ) -> float:
        """
        Weighted sum w_kl*KL + w_cc*CC + w_sim*SIM (+ w_nss*NSS)

        Args:
            pred: Predicted map
            gt: Ground-truth map
            fixations: Fixation points, only needed when w_nss != 0
            w: Loss weights; 10KL - 3CC - 2SIM by default

        Returns:
            Loss value
        """
        w = w or LossWeights()
        loss = w.w_kl * self.kl(gt, pred) + w.w_cc * self.cc(pred, gt) + w.w_sim * self.sim(pred, gt)
        if w.w_nss:
            if fixations is None:
                raise DegenerateInputError("w_nss is set but no fixations were given")
            loss += w.w_nss * self.nss(pred, fixations)
        return float(loss)

    def regression_metrics(self, preds: Sequence[float], gts: Sequence[float]) -> Tuple[float, float]:
        """(MSE, MAE) of two equal-length series"""
        p = np.asarray(preds, dtype=np.float64).ravel()
        g = np.asarray(gts, dtype=np.float64).ravel()
        if p.size == 0 or g.size == 0:
            raise DegenerateInputError("Regression metrics need non-empty series")
        if p.size != g.size:
            raise ShapeError(f"Series lengths differ: {p.size} vs {g.size}")
        diff = p - g
        return float(np.mean(diff ** 2)), float(np.mean(np.abs(diff)))

    # ------------------------------------------------------------------
    # Reports
    # ------------------------------------------------------------------

    def evaluate_maps(
        self,
        pairs: Iterable[Tuple[MapLike, MapLike, Points]],
        split: Split,
    ) -> MetricReport:
        """
        Average the five map metrics over (pred, gt, fixation points) triples

        Pairs whose maps make a metric undefined (no fixations, flat map)
        are skipped with a debug message.
        """
        rows: List[Tuple[float, float, float, float, float]] = []
        skipped = 0
        for pred, gt, points in pairs:
            try:
                rows.append((
                    self.auc(pred, points),
                    self.nss(pred, points),
                    self.sim(pred, gt),
                    self.cc(pred, gt),
                    self.kl(gt, pred),
                ))
            except DegenerateInputError as e:
                skipped += 1
                logger.debug("Skipping map pair: %s", e)

        if skipped:
            logger.info("%s split: skipped %d degenerate map pairs", split.value, skipped)
        if not rows:
            raise DegenerateInputError(f"No evaluable map pairs in split {split.value}")

        m = np.mean(np.array(rows), axis=0)
        return MetricReport(
            split=split, auc=m[0], nss=m[1], sim=m[2], cc=m[3], kl=m[4], n=len(rows)
        )

    def regression_report(self, model: str, split: Split, preds, gts) -> RegressionReport:
        mse, mae = self.regression_metrics(preds, gts)
        return RegressionReport(model=model, split=split, mse=mse, mae=mae, n=len(np.ravel(preds)))

    @staticmethod
    def report_frame(reports: Sequence[MetricReport]) -> pd.DataFrame:
        """Report CSV table: split,auc,nss,sim,cc,kl,mse,mae"""
        rows = []
        for r in reports:
            row = r.model_dump(mode="json")
            rows.append({c: row.get(c) for c in REPORT_COLUMNS})
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)

    @staticmethod
    def regression_frame(reports: Sequence[RegressionReport]) -> pd.DataFrame:
        return pd.DataFrame(
            [r.model_dump(mode="json") for r in reports],
            columns=["model", "split", "mse", "mae", "n"],
        )


# Global metrics instance
saliency_metrics = SaliencyMetrics()
