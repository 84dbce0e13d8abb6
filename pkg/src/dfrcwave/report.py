"""Render figures next to the CSV outputs.

CSVs remain the machine-readable contract; the PNGs exist so a sweep can be
eyeballed without a notebook. Everything uses the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import BeampatternReport, ExperimentResult
from .solvers import SqpResult

__all__ = [
    "render_ser_vs_snr",
    "render_rate_vs_snr",
    "render_ser_vs_factor",
    "render_rate_vs_factor",
    "render_beampatterns",
    "render_sqp_traces",
]


def _series(result: ExperimentResult, x_attr: str, y_attr: str):
    """Group rows into (label, xs, ys) curves keyed by strategy and factor."""
    curves: dict[str, tuple[list, list]] = {}
    for row in result.rows:
        if x_attr == "snr_db":
            label = f"{row.strategy} rho={row.rho:g}"
        else:
            label = f"{row.strategy} snr={row.snr_db:g}dB"
        xs, ys = curves.setdefault(label, ([], []))
        xs.append(getattr(row, x_attr))
        ys.append(getattr(row, y_attr))
    return curves


def _render_curves(curves, xlabel, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, (xs, ys) in curves.items():
        if logy:
            ys = [max(y, 1e-12) for y in ys]
        ax.plot(xs, ys, marker="o", label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_ser_vs_snr(result: ExperimentResult, path: Path | str) -> None:
    _render_curves(_series(result, "snr_db", "ser"), "SNR [dB]", "SER", path, logy=True)


def render_rate_vs_snr(result: ExperimentResult, path: Path | str) -> None:
    _render_curves(
        _series(result, "snr_db", "rate_bits_per_sc_use"),
        "SNR [dB]",
        "rate [bits / subcarrier use]",
        path,
    )


def render_ser_vs_factor(result: ExperimentResult, path: Path | str) -> None:
    _render_curves(
        _series(result, "rho", "ser"), "trade-off factor", "SER", path, logy=True
    )


def render_rate_vs_factor(result: ExperimentResult, path: Path | str) -> None:
    _render_curves(
        _series(result, "rho", "rate_bits_per_sc_use"),
        "trade-off factor",
        "rate [bits / subcarrier use]",
        path,
    )


def render_beampatterns(report: BeampatternReport, path: Path | str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, pattern in report.patterns.items():
        degrees = [math.degrees(a) for a in pattern.angles]
        ax.plot(degrees, pattern.gains, label=label, linewidth=1.0)
    ax.set_xlabel("angle [deg]")
    ax.set_ylabel("transmit gain")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sqp_traces(traces: dict[float, SqpResult], path: Path | str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for rho, result in sorted(traces.items()):
        ax.plot(
            range(len(result.objective_trace)),
            result.objective_trace,
            marker=".",
            label=f"rho={rho:g}",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
