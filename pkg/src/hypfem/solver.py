"""Time stepping: graph/cell/algebraic viscosity, CFL, Euler and SSP-RK.

The update for node i reads

    m_i (U_i' - U_i)/dt + sum_j f(U_j) . c_ij - d_ij U_j = 0,

with the viscosity sized so every nodal update is a convex combination
of Riemann-fan averages.  Boundary nodes use the same formula; the
bundled cases keep the solution constant near boundaries, and a warning
fires if that assumption breaks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledOperators
from .systems import ScalarModel, System

BOUNDARY_DRIFT_WARN = 1e-10


class SolverAbort(RuntimeError):
    """The update left the admissible set; carries the offending node."""


@dataclass(frozen=True)
class StateField:
    """Nodal conserved variables with a time stamp."""

    U: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim == 1:
            U = U[:, None]
        object.__setattr__(self, "U", U)


@dataclass(frozen=True)
class ViscosityMatrix:
    """Symmetric nonnegative off-diagonal viscosity on the stencil pattern.

    The diagonal is the negative row sum of the stored off-diagonal CSR
    matrix, evaluated in CSR index order, so row sums vanish by
    construction.
    """

    offdiag: np.ndarray           # per unordered pair, aligned with ops pairs
    matrix: sp.csr_matrix = field(repr=False)
    diag: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SolverConfig:
    viscosity_mode: str = "graph"
    cfl: float = 0.5
    integrator: str = "ssp3"
    final_time: float = 1.0
    max_steps: int = 10_000_000
    recompute_per_stage: bool = True

    def __post_init__(self):
        if self.viscosity_mode not in ("graph", "cell", "algebraic"):
            raise ValueError(f"unknown viscosity mode {self.viscosity_mode!r}")
        if self.integrator not in ("euler", "ssp2", "ssp3"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")


def _build_viscosity(ops: AssembledOperators, dvals: np.ndarray) -> ViscosityMatrix:
    n = ops.n_nodes
    rows = np.concatenate([ops.pair_i, ops.pair_j])
    cols = np.concatenate([ops.pair_j, ops.pair_i])
    vals = np.concatenate([dvals, dvals])
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    off.sort_indices()
    diag = -(off @ np.ones(n))
    full = (off + sp.diags(diag)).tocsr()
    full.sort_indices()
    return ViscosityMatrix(offdiag=dvals, matrix=full, diag=diag)


def _pair_speeds(ops: AssembledOperators, model: System, U: np.ndarray) -> np.ndarray:
    """max(lambda ||c_ij||, lambda ||c_ji||) for every unordered pair.

    The bound is invariant under (n, UL, UR) -> (-n, UR, UL), so the
    mirrored orientation is only evaluated where c_ji != -c_ij, which
    happens at boundary pairs only.
    """
    norm_ij = np.linalg.norm(ops.c_ij, axis=1)
    norm_ji = np.linalg.norm(ops.c_ji, axis=1)
    tiny = 1e-14 * ops.metrics.h_min
    d = np.zeros(ops.n_pairs)
    Ui = U[ops.pair_i]
    Uj = U[ops.pair_j]
    live_ij = norm_ij > tiny
    mirrored = np.abs(ops.c_ji + ops.c_ij).max(axis=1) <= tiny
    live_ji = (norm_ji > tiny) & ~(mirrored & live_ij)
    if np.any(live_ij):
        n_ij = ops.c_ij[live_ij] / norm_ij[live_ij, None]
        lam = model.max_wave_speed_batch(n_ij, Ui[live_ij], Uj[live_ij])
        d[live_ij] = lam * norm_ij[live_ij]
    if np.any(live_ji):
        n_ji = ops.c_ji[live_ji] / norm_ji[live_ji, None]
        lam = model.max_wave_speed_batch(n_ji, Uj[live_ji], Ui[live_ji])
        d[live_ji] = np.maximum(d[live_ji], lam * norm_ji[live_ji])
    both = mirrored & live_ij
    d[both] = np.maximum(d[both], d[both] / norm_ij[both] * norm_ji[both])
    return d


def compute_graph_viscosity(ops: AssembledOperators, model: System,
                            state: StateField) -> ViscosityMatrix:
    """Pairwise viscosity d_ij sized by the certified wave-speed bound."""
    model.check_admissible(state.U)
    return _build_viscosity(ops, _pair_speeds(ops, model, state.U))


def compute_cell_viscosity(ops: AssembledOperators, model: System,
                           state: StateField):
    """Cell viscosities nu_K and the induced pair coupling.

    The induced coupling dominates the graph viscosity entrywise, so the
    invariant-domain and entropy results carry over.
    """
    model.check_admissible(state.U)
    d_graph = _pair_speeds(ops, model, state.U)
    ratio = d_graph / ops.pair_bk_sum
    nu = ratio[ops.cell_pair_index].max(axis=1)      # (M,)
    # dtilde_ij = sum_{K in S_ij} nu_K theta_K |K|
    theta_meas = -ops.bk[:, 0, 1]                    # theta_K |K| per cell
    dtilde = np.zeros(ops.n_pairs)
    contrib = nu * theta_meas
    for q in range(ops.cell_pair_index.shape[1]):
        np.add.at(dtilde, ops.cell_pair_index[:, q], contrib)
    return nu, _build_viscosity(ops, dtilde)


def compute_algebraic_viscosity(ops: AssembledOperators, model: ScalarModel,
                                state: StateField) -> ViscosityMatrix:
    """Secant-speed variant d_ij = max(0, k_ij, k_ji); scalar laws only.

    Maximum-principle satisfying but not entropy stable for nonconvex
    fluxes; kept as the counterexample scheme.
    """
    if not isinstance(model, ScalarModel) or model.m != 1:
        raise ValueError("algebraic viscosity is defined for scalar models only")
    model.check_admissible(state.U)
    u = state.U[:, 0]
    ui = u[ops.pair_i]
    uj = u[ops.pair_j]
    fu = model.flux(state.U)[:, 0, :]                # (N, d)
    df = fu[ops.pair_j] - fu[ops.pair_i]
    du = uj - ui
    safe = np.where(du == 0.0, 1.0, du)
    sec = df / safe[:, None]
    # the secant is symmetric in (i, j); only the transport vector differs
    k_ij = np.einsum("ed,ed->e", sec, ops.c_ij)
    k_ji = np.einsum("ed,ed->e", sec, ops.c_ji)
    zero = du == 0.0
    k_ij[zero] = 0.0
    k_ji[zero] = 0.0
    d = np.maximum(0.0, np.maximum(k_ij, k_ji))
    return _build_viscosity(ops, d)


def compute_viscosity(ops, model, state, mode: str) -> ViscosityMatrix:
    if mode == "graph":
        return compute_graph_viscosity(ops, model, state)
    if mode == "cell":
        return compute_cell_viscosity(ops, model, state)[1]
    if mode == "algebraic":
        return compute_algebraic_viscosity(ops, model, state)
    raise ValueError(f"unknown viscosity mode {mode!r}")


def cfl_timestep(ops: AssembledOperators, D: ViscosityMatrix, cfl: float,
                 remaining: float = np.inf) -> float:
    """Largest dt keeping every nodal convex-combination weight nonnegative."""
    absdiag = np.abs(D.diag)
    live = absdiag > 0.0
    if not live.any():
        return float(remaining)
    # subnormal diagonals overflow the ratio to inf, which never wins the min
    with np.errstate(over="ignore"):
        dt = cfl * float(np.min(ops.m[live] / (2.0 * absdiag[live])))
    return float(min(dt, remaining))


def _divergence(ops: AssembledOperators, model: System, U: np.ndarray) -> np.ndarray:
    """sum_j f(U_j) . c_ij as an (N, m) array."""
    F = model.flux(U)                                # (N, m, d)
    out = np.zeros_like(U)
    for d, cd in enumerate(ops.c):
        out += cd @ F[:, :, d]
    return out


def boundary_flux_rate(ops: AssembledOperators, model: System, U: np.ndarray) -> np.ndarray:
    """Rate at which total mass leaves through the boundary, per component."""
    F = model.flux(U)                                # (N, m, d)
    return np.einsum("nmd,nd->m", F, ops.boundary_colsum)


def forward_euler_step(ops: AssembledOperators, model: System, state: StateField,
                       D: ViscosityMatrix, dt: float) -> StateField:
    """One explicit update; aborts if a node leaves the admissible set."""
    U = state.U
    Unew = U + (dt / ops.m)[:, None] * (D.matrix @ U - _divergence(ops, model, U))
    ok = model.admissible_mask(Unew)
    if not ok.all():
        bad = int(np.argmin(ok))
        raise SolverAbort(
            f"update produced {model.describe_violation(Unew[bad])} at node {bad}; "
            "retry with a smaller cfl"
        )
    return StateField(U=Unew, time=state.time + dt)


def intermediate_states(ops: AssembledOperators, model: System, state: StateField,
                        D: ViscosityMatrix) -> dict:
    """Riemann-fan averages Ubar_ij for pairs with positive viscosity.

    These are the auxiliary states of the convex-combination form; pairs
    with zero viscosity are skipped.
    """
    U = state.U
    F = model.flux(U)
    out = {}
    for i_arr, j_arr, c_arr in (
        (ops.pair_i, ops.pair_j, ops.c_ij),
        (ops.pair_j, ops.pair_i, ops.c_ji),
    ):
        for k in range(ops.n_pairs):
            dij = D.offdiag[k]
            if dij <= 0.0:
                continue
            i, j = int(i_arr[k]), int(j_arr[k])
            dF = (F[j] - F[i]) @ c_arr[k]
            out[(i, j)] = 0.5 * (U[i] + U[j]) - dF / (2.0 * dij)
    return out


def convex_reconstruction(ops: AssembledOperators, model: System, state: StateField,
                          D: ViscosityMatrix, dt: float) -> np.ndarray:
    """Rebuild the update from the auxiliary states (oracle for tests)."""
    U = state.U
    F = model.flux(U)
    coef = np.zeros(len(U))
    acc = np.zeros_like(U)
    for i_arr, j_arr, c_arr in (
        (ops.pair_i, ops.pair_j, ops.c_ij),
        (ops.pair_j, ops.pair_i, ops.c_ji),
    ):
        d = D.offdiag
        live = d > 0.0
        i, j = i_arr[live], j_arr[live]
        dF = np.einsum("emd,ed->em", F[j] - F[i], c_arr[live])
        ubar = 0.5 * (U[i] + U[j]) - dF / (2.0 * d[live, None])
        w = 2.0 * dt * d[live] / ops.m[i]
        np.add.at(coef, i, w)
        np.add.at(acc, i, w[:, None] * ubar)
    return U * (1.0 - coef)[:, None] + acc


def convex_weights(ops: AssembledOperators, D: ViscosityMatrix, dt: float) -> np.ndarray:
    """Per-node weight 1 + 2 dt d_ii / m_i of the previous state."""
    return 1.0 + 2.0 * dt * D.diag / ops.m


class Stepper:
    """Drives one SSP step; stages are plain forward Euler updates.

    ``stage_observer(prev, new, D, dt)`` is called after every elementary
    Euler stage, which is where the per-step theorems apply.  The
    accumulated boundary outflux makes the discrete conservation
    identity checkable to round-off on non-periodic meshes.
    """

    def __init__(self, ops: AssembledOperators, model: System, config: SolverConfig,
                 stage_observer=None, boundary_nodes=()):
        self.ops = ops
        self.model = model
        self.config = config
        self.stage_observer = stage_observer
        self.boundary_outflux = np.zeros(model.m)
        self._bnodes = np.array(sorted(boundary_nodes), dtype=np.int64)
        self._warned_boundary = False

    def _euler(self, state: StateField, D: ViscosityMatrix, dt: float):
        new = forward_euler_step(self.ops, self.model, state, D, dt)
        outflux = dt * boundary_flux_rate(self.ops, self.model, state.U)
        if self.stage_observer is not None:
            self.stage_observer(state, new, D, dt)
        return new, outflux

    def _stage_viscosity(self, state: StateField) -> ViscosityMatrix:
        return compute_viscosity(self.ops, self.model, state, self.config.viscosity_mode)

    def step(self, state: StateField, remaining: float):
        """Advance one step; returns (state, dt, accumulated outflux delta)."""
        cfg = self.config
        D0 = self._stage_viscosity(state)
        # secant coefficients can vanish where the flux difference does, so
        # the algebraic mode takes its step bound from the certified
        # wave-speed viscosity, which dominates every secant pairwise
        Dref = D0
        if cfg.viscosity_mode == "algebraic":
            Dref = compute_graph_viscosity(self.ops, self.model, state)
        dt = cfl_timestep(self.ops, Dref, cfg.cfl, remaining)
        if dt <= 0.0:
            raise SolverAbort("nonpositive time step")

        def stage(s: StateField, D: ViscosityMatrix | None):
            if D is None:
                D = self._stage_viscosity(s) if cfg.recompute_per_stage else D0
            return self._euler(s, D, dt)

        if cfg.integrator == "euler":
            s1, b1 = stage(state, D0)
            new, flux = s1, b1
        elif cfg.integrator == "ssp2":
            s1, b1 = stage(state, D0)
            s2, b2 = stage(s1, None)
            new = StateField(0.5 * state.U + 0.5 * s2.U, state.time + dt)
            flux = 0.5 * b1 + 0.5 * b2
        else:  # ssp3, Shu-Osher form
            s1, b1 = stage(state, D0)
            s2, b2 = stage(s1, None)
            s2 = StateField(0.75 * state.U + 0.25 * s2.U, state.time + 0.5 * dt)
            s3, b3 = stage(s2, None)
            new = StateField(state.U / 3.0 + 2.0 / 3.0 * s3.U, state.time + dt)
            flux = b1 / 6.0 + b2 / 6.0 + 2.0 / 3.0 * b3
        self.boundary_outflux = self.boundary_outflux + flux
        self._check_boundary(state, new)
        return new, dt

    def _check_boundary(self, old: StateField, new: StateField):
        if self._warned_boundary or len(self._bnodes) == 0:
            return
        bnodes = self._bnodes
        drift = np.abs(new.U[bnodes] - old.U[bnodes]).max()
        if drift > BOUNDARY_DRIFT_WARN:
            warnings.warn(
                f"solution moved by {drift:.3e} at a boundary node; the Cauchy "
                "setup assumes constant states near the boundary",
                RuntimeWarning,
            )
            self._warned_boundary = True


def ssp_step(ops: AssembledOperators, model: System, state: StateField,
             config: SolverConfig, stage_observer=None) -> StateField:
    """Single SSP step with dt chosen from the first-stage viscosity."""
    stepper = Stepper(ops, model, config, stage_observer)
    new, _ = stepper.step(state, remaining=config.final_time - state.time)
    return new


def run(ops: AssembledOperators, model: System, state: StateField,
        config: SolverConfig, boundary_nodes=(), stage_observer=None,
        step_observer=None) -> StateField:
    """March to the final time; observers hook per-stage and per-step."""
    stepper = Stepper(ops, model, config, stage_observer, boundary_nodes)
    for _ in range(config.max_steps):
        remaining = config.final_time - state.time
        if remaining <= 1e-14 * max(config.final_time, 1.0):
            break
        state, dt = stepper.step(state, remaining)
        if step_observer is not None:
            step_observer(state, stepper.boundary_outflux.copy())
    return state
