"""Figure rendering for solver CSV artifacts.

Plots are pure functions of their input files: fixed color map, fixed
figure geometry, no timestamps in the output, so identical inputs give
byte-identical images.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np

from .csvdata import (
    ConvergenceData,
    FieldData,
    PlotDataError,
    read_convergence_csv,
    read_field_csv,
)

CMAP = "viridis"
DPI = 150
# strip the writer tag so the PNG bytes depend on the data only
METADATA = {"Software": None}


@dataclass(frozen=True)
class PlotSpec:
    """One rendering request."""

    kind: str                   # field2d | profile1d | convergence
    csv_path: str
    output_path: str
    zoom: tuple | None = None   # (x0, x1, y0, y1)

    def __post_init__(self):
        if self.kind not in ("field2d", "profile1d", "convergence"):
            raise PlotDataError(f"unknown figure kind {self.kind!r}")
        if self.zoom is not None:
            x0, x1, y0, y1 = self.zoom
            if not (x1 > x0 and y1 > y0):
                raise PlotDataError(f"empty zoom window {self.zoom}")


def _apply_zoom(ax, zoom):
    if zoom is not None:
        x0, x1, y0, y1 = zoom
        ax.set_xlim(x0, x1)
        ax.set_ylim(y0, y1)


def _save(fig, path):
    fig.savefig(path, dpi=DPI, metadata=METADATA)
    plt.close(fig)


def plot_field(spec: PlotSpec) -> str:
    """Filled contour of component 0 over the triangulated node cloud."""
    data: FieldData = read_field_csv(spec.csv_path)
    if data.dim != 2:
        raise PlotDataError(
            f"{spec.csv_path}: field2d needs x and y columns; "
            "use profile1d for 1D snapshots"
        )
    tri = mtri.Triangulation(data.coords[:, 0], data.coords[:, 1])
    u = data.components[:, 0]
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    lo, hi = float(u.min()), float(u.max())
    if hi - lo < 1e-300:
        # constant fields get one explicit level pair around the value
        levels = np.array([lo - 0.5, lo + 0.5])
    else:
        levels = np.linspace(lo, hi, 30)
    cs = ax.tricontourf(tri, u, levels=levels, cmap=CMAP)
    fig.colorbar(cs, ax=ax, label=data.labels[0])
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    _apply_zoom(ax, spec.zoom)
    _save(fig, spec.output_path)
    return spec.output_path


def plot_profile(spec: PlotSpec) -> str:
    """Per-component line plot of a 1D snapshot against x."""
    data: FieldData = read_field_csv(spec.csv_path)
    if data.dim != 1:
        raise PlotDataError(
            f"{spec.csv_path}: profile1d needs a 1D snapshot; "
            "use field2d for 2D fields"
        )
    order = np.argsort(data.coords[:, 0], kind="stable")
    x = data.coords[order, 0]
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for k, label in enumerate(data.labels):
        ax.plot(x, data.components[order, k], lw=1.2, label=label)
    ax.set_xlabel("x")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    _apply_zoom(ax, spec.zoom)
    _save(fig, spec.output_path)
    return spec.output_path


def fitted_slopes(data: ConvergenceData) -> dict:
    """Least-squares log-log slope of error against h per component."""
    out = {}
    logh = np.log(1.0 / data.one_over_h)
    for k, label in enumerate(data.labels):
        err = data.errors[:, k]
        if np.any(err <= 0.0):
            out[label] = np.nan
            continue
        out[label] = float(np.polyfit(logh, np.log(err), 1)[0])
    return out


def format_table(data: ConvergenceData) -> str:
    """Text table: 1/h then error/rate pairs per component."""
    head = ["1/h".rjust(8)]
    for label in data.labels:
        head += [f"error({label})".rjust(14), f"rate({label})".rjust(11)]
    lines = ["  ".join(head)]
    for r in range(len(data.one_over_h)):
        row = [f"{data.one_over_h[r]:8.0f}"]
        for k in range(len(data.labels)):
            row.append(f"{data.errors[r, k]:14.4e}")
            rate = data.rates[r, k]
            row.append("          -" if np.isnan(rate) else f"{rate:11.2f}")
        lines.append("  ".join(row))
    return "\n".join(lines)


def plot_convergence(spec: PlotSpec) -> tuple:
    """Log-log error plot with slope annotations; returns (path, table)."""
    data = read_convergence_csv(spec.csv_path)
    slopes = fitted_slopes(data)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for k, label in enumerate(data.labels):
        ax.loglog(data.one_over_h, data.errors[:, k], "o-",
                  label=f"{label} (slope {slopes[label]:.2f})")
    ax.set_xlabel("1/h")
    ax.set_ylabel("relative L1 error")
    ax.legend(loc="best")
    ax.grid(True, which="both", alpha=0.3)
    _apply_zoom(ax, spec.zoom)
    _save(fig, spec.output_path)
    return spec.output_path, format_table(data)
