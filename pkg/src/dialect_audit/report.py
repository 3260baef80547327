"""Delimited tables, the nested report document, and SVG chart rendering.

Everything written here is deterministic: tables carry a header comment
naming the config hash, JSON is sorted, and the figures are saved with a
fixed hash salt and no embedded date.
"""

import csv
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "dialect-audit"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .util import fmt


def write_table(path: Path, meta_line: str, columns: Sequence[str],
                rows: Sequence[Sequence]) -> None:
    """CSV with a single leading comment row naming the run metadata."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {meta_line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else
                        (fmt(v) if isinstance(v, float) else v) for v in row])


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_disparity_chart(path: Path, title: str, emotions: Sequence[str],
                           dfpr: Mapping[str, Optional[float]],
                           dfnr: Mapping[str, Optional[float]]) -> None:
    """Grouped bars of the false-rate ratios per emotion; undefined ratios
    are simply absent bars."""
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.38
    xs = range(len(emotions))
    ax.bar([x - width / 2 for x in xs],
           [dfpr.get(e) if dfpr.get(e) is not None else 0 for e in emotions],
           width, label="dFPR", color="#4c72b0")
    ax.bar([x + width / 2 for x in xs],
           [dfnr.get(e) if dfnr.get(e) is not None else 0 for e in emotions],
           width, label="dFNR", color="#dd8452")
    ax.axhline(1.0, color="black", linewidth=0.8, linestyle="--")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(emotions, rotation=30, ha="right")
    ax.set_ylabel("high / low rate ratio")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def render_agreement_chart(path: Path, title: str,
                           emotions: Sequence[str],
                           cells: Mapping[str, Mapping[str, float]]) -> None:
    """Grouped bars: one cluster per pairing, one bar per emotion."""
    pairings = sorted(cells)
    fig, ax = plt.subplots(figsize=(9, 4))
    n = max(len(emotions), 1)
    width = 0.8 / n
    for i, emotion in enumerate(emotions):
        heights = [cells[p].get(emotion, {}).get("mean_kappa", 0.0)
                   if emotion in cells[p] else 0.0 for p in pairings]
        offs = [j + (i - (n - 1) / 2) * width for j in range(len(pairings))]
        ax.bar(offs, heights, width, label=emotion)
    ax.set_xticks(list(range(len(pairings))))
    ax.set_xticklabels(pairings)
    ax.set_ylabel("mean pairwise kappa")
    ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    _save(fig, path)
