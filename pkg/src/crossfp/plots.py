"""Report figures rendered headlessly next to the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_det_curve(metrics, path: str | Path) -> Path:
    """FMR vs FNMR tradeoff with the EER diagonal marked."""
    path = Path(path)
    fmr, fnmr = metrics.det[:, 1], metrics.det[:, 2]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(fmr, fnmr, color="tab:blue", lw=1.5, label="DET")
    limit = 1.0
    ax.plot([0, limit], [0, limit], color="gray", lw=0.8, ls="--", label="FMR = FNMR")
    ax.plot([metrics.eer], [metrics.eer], "o", color="tab:red", ms=5,
            label=f"EER = {100 * metrics.eer:.2f}%")
    ax.set_xlabel("false match rate")
    ax.set_ylabel("false non-match rate")
    ax.set_xlim(0, limit)
    ax.set_ylim(0, limit)
    ax.grid(alpha=0.3)
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_score_histogram(scores, path: str | Path) -> Path:
    """Overlaid genuine and impostor score distributions."""
    path = Path(path)
    genuine = np.asarray(scores.genuine, dtype=np.float64)
    impostor = np.asarray(scores.impostor, dtype=np.float64)
    lo = min(genuine.min(), impostor.min())
    hi = max(genuine.max(), impostor.max())
    if hi <= lo:
        hi = lo + 1.0
    bins = np.linspace(lo, hi, 41)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(genuine, bins=bins, alpha=0.6, density=True, label="genuine", color="tab:green")
    ax.hist(impostor, bins=bins, alpha=0.6, density=True, label="impostor", color="tab:orange")
    ax.set_xlabel("city-block distance")
    ax.set_ylabel("density")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report_figures(metrics, scores, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        render_det_curve(metrics, out_dir / "det.png"),
        render_score_histogram(scores, out_dir / "scores_hist.png"),
    ]
