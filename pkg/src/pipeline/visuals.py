"""
Heatmap and NS-over-time exports
"""
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.saliency.maps import saliency_engine  # noqa: E402
from src.utils.models import NsSeries, SaliencyMap  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids inside SVG output so identical inputs give identical files
plt.rcParams["svg.hashsalt"] = "highlight-attention-lab"

SeriesGroup = Mapping[str, NsSeries]


def ns_figure(series: SeriesGroup, n_elements: int = 32, title: str = "") -> plt.Figure:
    """
    NS over time for one or more labeled series with the random-level rule

    Args:
        series: label -> NsSeries on the same grid
        n_elements: Number of elements; the rule is drawn at 1 / n_elements
        title: Axes title

    Returns:
        Matplotlib figure (caller closes it)
    """
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for label, s in series.items():
        ax.plot(s.t_rel_s, s.ns, marker="o", markersize=2.5, linewidth=1.2, label=label)
    ax.axhline(1.0 / n_elements, color="grey", linestyle="--", linewidth=1.0,
               label=f"random (1/{n_elements})")
    ax.axvline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("time from onset (s)")
    ax.set_ylabel("NS")
    ax.set_ylim(0.0, 1.0)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def series_frame(series: SeriesGroup) -> pd.DataFrame:
    """Long table: series,t_rel_s,element_id,ns,flag"""
    frames = []
    for label, s in series.items():
        df = s.to_frame()
        df.insert(0, "series", label)
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns=["series", "t_rel_s", "element_id", "ns", "flag"])
    return pd.concat(frames, ignore_index=True)


def read_series_csv(path: Union[str, Path]) -> Dict[str, NsSeries]:
    """Inverse of the series CSV export"""
    df = pd.read_csv(path, keep_default_na=False)
    out = {}
    for label, group in df.groupby("series", sort=False):
        out[str(label)] = NsSeries(
            element_id=str(group["element_id"].iloc[0]),
            t_rel_s=group["t_rel_s"].astype(float).tolist(),
            ns=group["ns"].astype(float).tolist(),
            flags=[f == "undefined_uniform" for f in group["flag"]],
        )
    return out


def export_visuals(
    out_dir: Union[str, Path],
    maps: Optional[Mapping[str, SaliencyMap]] = None,
    series: Optional[Mapping[str, SeriesGroup]] = None,
    n_elements: int = 32,
) -> List[Path]:
    """
    Write PNG heatmaps and SVG NS plots, each with a CSV beside it

    Args:
        out_dir: Target directory
        maps: name -> saliency map
        series: plot name -> (label -> NsSeries)
        n_elements: Element count for the random-level rule

    Returns:
        Written paths in a fixed order
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    for name, smap in sorted((maps or {}).items()):
        written.append(saliency_engine.write_png(smap, out_dir / f"{name}.png"))
        csv_path = out_dir / f"{name}.csv"
        pd.DataFrame(smap.values).to_csv(csv_path, index=False, header=False,
                                         float_format="%.6g", lineterminator="\n")
        written.append(csv_path)

    for name, group in sorted((series or {}).items()):
        fig = ns_figure(group, n_elements, title=name)
        svg_path = out_dir / f"{name}.svg"
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(svg_path)
        csv_path = out_dir / f"{name}.csv"
        series_frame(group).to_csv(csv_path, index=False, lineterminator="\n")
        written.append(csv_path)

    logger.info("Exported %d visual files to %s", len(written), out_dir)
    return written
