"""First-order continuous P1 finite element solver for hyperbolic
conservation laws with invariant-domain-preserving graph viscosity."""

from .mesh import (
    Mesh,
    MeshError,
    Stencils,
    build_interval_mesh,
    build_triangle_mesh,
    node_stencils,
    read_mesh,
    write_mesh,
)
from .assembly import (
    AssembledOperators,
    MeshMetrics,
    assemble_bk,
    assemble_cij,
    assemble_lumped_mass,
    assemble_operators,
    mesh_metrics,
)
from .systems import (
    AdmissibilityError,
    EulerModel,
    PSystemModel,
    ScalarModel,
    System,
    burgers_model,
    kpp_model,
    linear_model,
)
from .solver import (
    SolverAbort,
    SolverConfig,
    StateField,
    Stepper,
    ViscosityMatrix,
    cfl_timestep,
    compute_algebraic_viscosity,
    compute_cell_viscosity,
    compute_graph_viscosity,
    compute_viscosity,
    convex_reconstruction,
    forward_euler_step,
    intermediate_states,
    run,
    ssp_step,
)
from .diagnostics import (
    RunReport,
    conservation_report,
    convergence_rows,
    entropy_residual_report,
    entropy_scale,
    l1_error,
    local_invariance_report,
    write_convergence_csv,
)
from .exact import psystem_rarefaction_exact

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "AssembledOperators",
    "EulerModel",
    "Mesh",
    "MeshError",
    "MeshMetrics",
    "PSystemModel",
    "RunReport",
    "ScalarModel",
    "SolverAbort",
    "SolverConfig",
    "StateField",
    "Stencils",
    "Stepper",
    "System",
    "ViscosityMatrix",
    "assemble_bk",
    "assemble_cij",
    "assemble_lumped_mass",
    "assemble_operators",
    "build_interval_mesh",
    "build_triangle_mesh",
    "burgers_model",
    "cfl_timestep",
    "compute_algebraic_viscosity",
    "compute_cell_viscosity",
    "compute_graph_viscosity",
    "compute_viscosity",
    "conservation_report",
    "convergence_rows",
    "convex_reconstruction",
    "entropy_residual_report",
    "entropy_scale",
    "forward_euler_step",
    "intermediate_states",
    "kpp_model",
    "l1_error",
    "linear_model",
    "local_invariance_report",
    "mesh_metrics",
    "node_stencils",
    "psystem_rarefaction_exact",
    "read_mesh",
    "run",
    "ssp_step",
    "write_convergence_csv",
    "write_mesh",
]
