"""Readers for the solver's CSV artifacts.

Two shapes are understood: field snapshots (coordinates followed by
``comp_*`` columns) and convergence tables (``one_over_h`` followed by
``error_*``/``rate_*`` pairs).  Malformed rows are reported with the
path and line number.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class PlotDataError(ValueError):
    """Missing file, malformed CSV, or an unusable plot request."""


@dataclass(frozen=True)
class FieldData:
    """One snapshot: node coordinates and conserved components."""

    coords: np.ndarray          # (N, dim)
    components: np.ndarray      # (N, m)
    labels: tuple               # component column names

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class ConvergenceData:
    """Error table rows: 1/h, per-component errors, per-component rates."""

    one_over_h: np.ndarray      # (R,)
    errors: np.ndarray          # (R, m)
    rates: np.ndarray           # (R, m), nan where undefined
    labels: tuple


def _read_rows(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PlotDataError(f"cannot read {path}: {exc}")
    lines = text.splitlines()
    if not lines:
        raise PlotDataError(f"{path}:1: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    return path, header, lines[1:]


def _parse_float(tok, where, allow_empty=False):
    tok = tok.strip()
    if tok == "" and allow_empty:
        return np.nan
    try:
        return float(tok)
    except ValueError:
        raise PlotDataError(f"{where}: cannot parse {tok!r} as a number")


def read_field_csv(path) -> FieldData:
    path, header, body = _read_rows(path)
    coord_cols = [c for c in ("x", "y") if c in header]
    comp_cols = [c for c in header if c.startswith("comp_")]
    if not coord_cols or not comp_cols or header != coord_cols + comp_cols:
        raise PlotDataError(
            f"{path}:1: expected columns x[,y],comp_0,... got {','.join(header)}"
        )
    rows = np.empty((len(body), len(header)))
    for k, line in enumerate(body):
        toks = line.split(",")
        if len(toks) != len(header):
            raise PlotDataError(
                f"{path}:{k + 2}: expected {len(header)} columns, got {len(toks)}"
            )
        rows[k] = [_parse_float(t, f"{path}:{k + 2}") for t in toks]
    if len(rows) == 0:
        raise PlotDataError(f"{path}: no data rows")
    nc = len(coord_cols)
    return FieldData(coords=rows[:, :nc], components=rows[:, nc:],
                     labels=tuple(comp_cols))


def read_convergence_csv(path) -> ConvergenceData:
    path, header, body = _read_rows(path)
    if not header or header[0] != "one_over_h" or len(header) % 2 == 0:
        raise PlotDataError(
            f"{path}:1: expected one_over_h,error_*,rate_* columns, "
            f"got {','.join(header)}"
        )
    labels = []
    for k in range(1, len(header), 2):
        err, rate = header[k], header[k + 1]
        if not err.startswith("error_") or rate != f"rate_{err[6:]}":
            raise PlotDataError(f"{path}:1: malformed column pair {err},{rate}")
        labels.append(err[6:])
    table = np.empty((len(body), len(header)))
    for k, line in enumerate(body):
        toks = line.split(",")
        if len(toks) != len(header):
            raise PlotDataError(
                f"{path}:{k + 2}: expected {len(header)} columns, got {len(toks)}"
            )
        table[k] = [
            _parse_float(t, f"{path}:{k + 2}", allow_empty=(j % 2 == 0 and j > 0))
            for j, t in enumerate(toks)
        ]
    if len(table) < 2:
        raise PlotDataError(f"{path}: need at least 2 rows for a convergence plot")
    return ConvergenceData(
        one_over_h=table[:, 0],
        errors=table[:, 1::2],
        rates=table[:, 2::2],
        labels=tuple(labels),
    )
