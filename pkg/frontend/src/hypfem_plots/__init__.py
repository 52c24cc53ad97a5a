"""Plotting companion for hypfem CSV outputs."""

from .csvdata import (
    ConvergenceData,
    FieldData,
    PlotDataError,
    read_convergence_csv,
    read_field_csv,
)
from .render import (
    PlotSpec,
    fitted_slopes,
    format_table,
    plot_convergence,
    plot_field,
    plot_profile,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceData",
    "FieldData",
    "PlotDataError",
    "PlotSpec",
    "fitted_slopes",
    "format_table",
    "plot_convergence",
    "plot_field",
    "plot_profile",
    "read_convergence_csv",
    "read_field_csv",
]
