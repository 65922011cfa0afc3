"""Matplotlib figure rendering for the CLI report paths.

Figures are written next to the delimited outputs; the Agg backend keeps
everything headless and byte-reproducible.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .field import RiskImage, turbo_rgb
from .planner import BallObstacle, Path

_SAVE_KW = {"dpi": 110, "metadata": {"Software": None}}


def save_risk_figure(risk: RiskImage, path, title: str = "risk") -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    shown = np.ma.masked_invalid(risk.data)
    im = ax.imshow(shown, cmap="turbo", vmin=0.0, vmax=1.0, interpolation="nearest")
    fig.colorbar(im, ax=ax, label="risk")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_loss_figure(history: list[float], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(range(len(history)), history, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    ax.set_title("training loss")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_score_figure(frame_scores: dict[str, list[float]], path, percentile: float) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for traj_id in sorted(frame_scores):
        ax.plot(frame_scores[traj_id], label=traj_id)
    ax.set_xlabel("frame")
    ax.set_ylabel(f"P{percentile:g} risk")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_ranking_figure(ids: list[str], means: list[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    colors = turbo_rgb(np.asarray(means))
    ax.bar(range(len(ids)), means, color=colors, tick_label=ids)
    ax.set_ylabel("mean risk")
    ax.set_ylim(0, 1)
    ax.tick_params(axis="x", labelrotation=45)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_path_figure(path_obj: Path, obstacles: list[BallObstacle], out) -> None:
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="3d")
    wp = path_obj.waypoints
    ax.plot(wp[:, 0], wp[:, 1], wp[:, 2], "-o", markersize=2, label="path")
    u = np.linspace(0, 2 * np.pi, 16)
    v = np.linspace(0, np.pi, 8)
    for o in obstacles:
        x = o.center[0] + o.radius * np.outer(np.cos(u), np.sin(v))
        y = o.center[1] + o.radius * np.outer(np.sin(u), np.sin(v))
        z = o.center[2] + o.radius * np.outer(np.ones_like(u), np.cos(v))
        ax.plot_surface(x, y, z, color="tab:red", alpha=0.3, linewidth=0)
    ax.scatter(*wp[0], color="green", label="start")
    ax.scatter(*wp[-1], color="black", label="goal")
    ax.legend(fontsize=8)
    fig.savefig(out, **_SAVE_KW)
    plt.close(fig)
