"""Figures for a finished run, written as PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from .records import CHOICES  # noqa: E402
from .scenario.process import Simulation  # noqa: E402

_SAVE = {"dpi": 100, "metadata": {"Software": None}}


def _save(fig, path: Path) -> Path:
    for ax in fig.axes:
        ax.yaxis.set_major_locator(MaxNLocator(integer=True))
    fig.tight_layout()
    fig.savefig(path, format="png", **_SAVE)
    plt.close(fig)
    return path


def block_heights(sim: Simulation, path: Path) -> Path:
    channels = sorted(sim.network.channels)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(channels, [sim.network.channel(c).height for c in channels], color="#4c72b0")
    ax.set_ylabel("blocks")
    ax.set_title("Committed blocks per channel")
    return _save(fig, path)


def envelope_census(sim: Simulation, path: Path) -> Path:
    munis = sim.municipalities
    censuses = {m: sim.pipeline.status_census(m) for m in munis}
    statuses = sorted({s for c in censuses.values() for s in c})
    fig, ax = plt.subplots(figsize=(7, 4))
    bottom = [0] * len(munis)
    for status in statuses:
        values = [censuses[m].get(status, 0) for m in munis]
        ax.bar(munis, values, bottom=bottom, label=status)
        bottom = [b + v for b, v in zip(bottom, values)]
    ax.set_ylabel("envelopes")
    ax.set_title("Envelope status per municipality")
    if statuses:
        ax.legend(fontsize="small")
    return _save(fig, path)


def municipal_results(sim: Simulation, event_id: str, path: Path) -> Path:
    counts = sim.election(event_id).counts
    munis = sorted(counts)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(CHOICES)
    for i, choice in enumerate(CHOICES):
        xs = [j + i * width for j in range(len(munis))]
        ax.bar(xs, [counts[m].get(choice, 0) for m in munis], width, label=choice)
    ax.set_xticks([j + width * (len(CHOICES) - 1) / 2 for j in range(len(munis))], munis)
    ax.set_ylabel("ballots")
    ax.set_title(f"Counted ballots, {event_id}")
    ax.legend()
    return _save(fig, path)


def render_figures(sim: Simulation, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = [block_heights(sim, directory / "block_heights.png"),
             envelope_census(sim, directory / "envelope_census.png")]
    for event_id in sorted(sim.elections):
        if sim.elections[event_id].counts:
            paths.append(municipal_results(sim, event_id, directory / f"results_{event_id}.png"))
    return paths
