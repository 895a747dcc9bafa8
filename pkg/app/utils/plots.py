"""SVG renderings of the distribution analysis (histograms and box plots)."""
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.utils.reports import FIVE_NUMBER_COLUMNS  # noqa: E402

logger = logging.getLogger(__name__)

# Stable element ids, so reruns write identical SVGs
plt.rcParams["svg.hashsalt"] = "simreuse"


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug(f"Wrote {path}")
    return path


def plot_window_histograms(rows: Sequence[Dict], path: Path, title: str = "") -> Path:
    """One step histogram per window, all on the shared bin edges."""
    windows = sorted({r["window"] for r in rows})
    fig, ax = plt.subplots(figsize=(10, 5))
    for window in windows:
        cells = [r for r in rows if r["window"] == window]
        edges = [c["bin_left"] for c in cells] + [cells[-1]["bin_right"]]
        ax.stairs([c["count"] for c in cells], edges, label=f"window {window}")
    ax.set_xlabel("target value")
    ax.set_ylabel("count")
    ax.set_title(title or "Target distribution per window")
    if len(windows) <= 12:
        ax.legend(fontsize="small")
    return _save(fig, path)


def plot_box_summaries(rows: Sequence[Dict], label_key: str, path: Path, title: str = "") -> Path:
    """Box glyphs drawn straight from precomputed five-number summaries."""
    stats: List[Dict] = [
        {
            "label": str(r[label_key]),
            "whislo": r[FIVE_NUMBER_COLUMNS[0]],
            "q1": r[FIVE_NUMBER_COLUMNS[1]],
            "med": r[FIVE_NUMBER_COLUMNS[2]],
            "q3": r[FIVE_NUMBER_COLUMNS[3]],
            "whishi": r[FIVE_NUMBER_COLUMNS[4]],
            "fliers": [],
        }
        for r in rows
    ]
    fig, ax = plt.subplots(figsize=(max(6, 0.4 * len(stats)), 5))
    ax.bxp(stats, showfliers=False)
    ax.set_xlabel(label_key)
    ax.set_ylabel("target value")
    ax.set_title(title or f"Target box plot per {label_key}")
    ax.tick_params(axis="x", labelrotation=90)
    fig.tight_layout()
    return _save(fig, path)


def plot_daily_average(rows: Sequence[Dict], path: Path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(range(len(rows)), [r["mean"] for r in rows], linewidth=0.8)
    ax.set_xlabel("day")
    ax.set_ylabel("daily average")
    ax.set_title(title or "Daily average of the target")
    return _save(fig, path)
