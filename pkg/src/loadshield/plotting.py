"""Matplotlib renderings of cluster baselines, price weights and score triptychs."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402
import numpy as np  # noqa: E402

from .cluster import ClusterModel  # noqa: E402
from .features import profile_representative  # noqa: E402
from .ingest import N_PERIODS, ProfileSet  # noqa: E402
from .scoring import ScoreReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}
# PNG metadata without version strings keeps files stable across installs
_META = {"Software": None}

HOURS = np.arange(N_PERIODS) / 2.0


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    fig.savefig(tmp, format=path.suffix.lstrip(".") or "png", metadata=_META, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)
    return path


def _hour_axis(ax):
    ax.set_xlim(0, 24)
    ax.set_xticks(range(0, 25, 4))
    ax.set_xlabel("hour of day")


def plot_cluster_models(sets: Sequence[ProfileSet], models: Sequence[ClusterModel], path,
                        title: str = "") -> Path:
    """One panel per cluster: member mean days in grey, baseline with its 2-sigma band."""
    by_id = {s.business_id: s for s in sets}
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(models), figsize=(3.2 * len(models), 2.6),
                                 squeeze=False, sharey=True)
        for ax, m in zip(axes[0], models):
            for bid in m.member_ids:
                if bid in by_id:
                    ax.plot(HOURS, profile_representative(by_id[bid]), color="0.7", lw=0.6)
            ax.fill_between(HOURS, np.clip(m.ac - 2 * m.asd, 0, None), np.clip(m.ac + 2 * m.asd, None, 1),
                            color="tab:blue", alpha=0.2, lw=0)
            ax.plot(HOURS, m.ac, color="tab:blue", lw=1.6)
            ax.set_title(f"{m.industry_label} cluster {m.cluster_id + 1} (n={m.n_members})")
            _hour_axis(ax)
        axes[0][0].set_ylabel("normalized load")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_price_weights(csp: np.ndarray, wsp: np.ndarray, path) -> Path:
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(7, 2.6))
        a1.step(HOURS, csp, where="post", color="tab:orange")
        a1.set_ylabel("average spot price")
        a2.bar(HOURS, wsp, width=0.45, align="edge",
               color=np.where(wsp >= 0, "tab:red", "tab:green"))
        a2.axhline(0, color="k", lw=0.5)
        a2.set_ylabel("incentive weight")
        for ax in (a1, a2):
            _hour_axis(ax)
        return _save(fig, path)


def plot_score_triptych(reports: Sequence[ScoreReport], path, title: str = "",
                        highlight: Sequence[str] = ()) -> Path:
    """Bars of violation, incentive and weighted score per business."""
    hl = set(highlight)
    x = np.arange(len(reports))
    colors = ["tab:red" if r.business_id in hl else "tab:blue" for r in reports]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10, 2.6))
        for ax, key, label in zip(axes, ("vsp", "isc", "wivs"),
                                  ("violation score", "incentive score", "weighted score")):
            ax.bar(x, [getattr(r, key) for r in reports], color=colors)
            ax.set_ylabel(label)
            ax.set_xlabel("business")
            ax.set_xlim(-1, max(len(reports), 1))
            ax.xaxis.set_major_locator(MaxNLocator(integer=True))
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_attack_profiles(baseline: ClusterModel, profiles: dict[str, np.ndarray], path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 2.6))
        ax.plot(HOURS, baseline.ac, color="0.4", lw=1.2, label="baseline")
        for name, vec in profiles.items():
            ax.plot(HOURS, vec, lw=1.2, label=name)
        ax.set_ylabel("load")
        ax.legend(frameon=False)
        _hour_axis(ax)
        return _save(fig, path)
