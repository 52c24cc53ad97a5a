"""Run verification: conservation, local invariance, entropy residuals,
errors, and convergence tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .assembly import AssembledOperators
from .mesh import Mesh, Stencils
from .solver import StateField, ViscosityMatrix
from .systems import System, PSystemModel, EulerModel, ScalarModel

INVARIANCE_TOL = 1e-11
SCALAR_INVARIANCE_TOL = 1e-12


@dataclass
class RunReport:
    """Everything a run has to answer for, serializable to JSON."""

    case: str = ""
    steps: int = 0
    final_time: float = 0.0
    wall_seconds: float = 0.0
    conservation_drift: list = field(default_factory=list)   # per component
    invariant_violations: int = 0
    worst_violation: float = 0.0
    worst_violation_node: int = -1
    worst_violation_step: int = -1
    entropy_residual_max: float = -np.inf
    entropy_residual_min: float = np.inf
    entropy_scale: float = 0.0
    l1_errors: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # [time, filename] pairs

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not np.isfinite(v):
                d[k] = None
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        rep = cls()
        for k, v in d.items():
            if v is None:
                v = -np.inf if k == "entropy_residual_max" else np.inf
            setattr(rep, k, v)
        return rep


def conservation_report(ops: AssembledOperators, states, outfluxes=None) -> np.ndarray:
    """Relative componentwise drift of the total mass per snapshot.

    ``outfluxes`` holds the accumulated boundary outflux matching each
    state (zero on periodic meshes); the drift then measures exactly the
    discrete conservation identity.  Components whose initial total is
    zero are reported in absolute terms.
    """
    totals = np.array([ops.m @ s.U for s in states])
    if outfluxes is not None:
        totals = totals + np.asarray(outfluxes)
    ref = totals[0]
    denom = np.where(np.abs(ref) > 0.0, np.abs(ref), 1.0)
    return np.abs(totals - ref) / denom


def _neighbor_reduce(stencils: Stencils, values: np.ndarray, op) -> np.ndarray:
    return op.reduceat(values[stencils.indices], stencils.indptr[:-1])


def local_invariance_report(model: System, stencils: Stencils,
                            U_old: np.ndarray, U_new: np.ndarray):
    """Worst signed exceedance of the local invariant-set containment.

    Scalar: local min/max bounds.  p-system: the smallest Riemann
    invariant box of the stencil neighbors.  Euler: positivity plus the
    minimum principle on the specific entropy over the stencil.
    Returns (violation count, worst magnitude, worst node).
    """
    if isinstance(model, PSystemModel):
        w1, w2 = model.riemann_invariants(U_old)
        b = _neighbor_reduce(stencils, w1, np.maximum)
        a = _neighbor_reduce(stencils, w2, np.minimum)
        w1n, w2n = model.riemann_invariants(U_new)
        exceed = np.maximum(w1n - b, a - w2n)
        tol = INVARIANCE_TOL
    elif isinstance(model, EulerModel):
        s = model.specific_entropy(U_old)
        r = _neighbor_reduce(stencils, s, np.minimum)
        rho = U_new[:, 0]
        mom = U_new[:, 1:1 + model.d]
        e = U_new[:, 1 + model.d] - 0.5 * np.einsum("ed,ed->e", mom, mom) / np.where(rho > 0, rho, 1.0)
        sn = np.where((rho > 0) & (e > 0),
                      np.log(np.maximum((model.gamma - 1.0) * e, 1e-300))
                      - model.gamma * np.log(np.maximum(rho, 1e-300)),
                      -np.inf)
        exceed = np.maximum.reduce([r - sn, -rho, -e])
        tol = INVARIANCE_TOL
    else:
        u = U_old[:, 0]
        hi = _neighbor_reduce(stencils, u, np.maximum)
        lo = _neighbor_reduce(stencils, u, np.minimum)
        un = U_new[:, 0]
        exceed = np.maximum(un - hi, lo - un)
        tol = SCALAR_INVARIANCE_TOL
    bad = exceed > tol
    worst = int(np.argmax(exceed))
    return int(bad.sum()), float(exceed[worst]), worst


def entropy_residual_report(ops: AssembledOperators, model: System,
                            U_old: np.ndarray, U_new: np.ndarray,
                            D: ViscosityMatrix, dt: float,
                            include_diagonal: bool = True):
    """Per-node residual of the discrete entropy inequality (<= 0 holds
    for the graph and cell viscosities, up to round-off).

    The viscosity sum runs over the full stencil including j = i, which
    is the form the convexity argument produces; ``include_diagonal``
    toggles the variant without the diagonal term for comparison.
    """
    eta_old = model.entropy(U_old)
    eta_new = model.entropy(U_new)
    q = model.entropy_flux(U_old)                    # (N, d)
    res = ops.m / dt * (eta_new - eta_old)
    for d, cd in enumerate(ops.c):
        res += cd @ q[:, d]
    res -= D.matrix @ eta_old
    if not include_diagonal:
        res += D.diag * eta_old
    return res


def entropy_scale(ops: AssembledOperators, model: System, U: np.ndarray,
                  dt: float) -> float:
    """Normalization for residual tolerances: max m_i/dt times max |eta|."""
    return float(np.max(ops.m) / dt * np.max(np.abs(model.entropy(U))))


def l1_error(mesh: Mesh, state: StateField, exact) -> np.ndarray:
    """Relative L1 error per component with lumped nodal quadrature.

    ``exact(x, t)`` returns the exact nodal values, shape (N, m).
    Components with a vanishing exact norm fall back to absolute error.
    """
    from .assembly import assemble_lumped_mass

    m = assemble_lumped_mass(mesh)
    ref = np.atleast_2d(np.asarray(exact(mesh.node_coords, state.time), dtype=float))
    if ref.shape[0] != mesh.n_nodes:
        ref = ref.T
    num = m @ np.abs(state.U - ref)
    den = m @ np.abs(ref)
    return np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), num)


def convergence_rows(entries):
    """Rows (one_over_h, errors, rates) from (one_over_h, error-vector) pairs.

    The rate between consecutive rows is log(e_c/e_f)/log(h_c/h_f);
    undefined rates (zero errors, first row) are emitted as None.
    """
    rows = []
    prev = None
    for one_over_h, errs in entries:
        errs = np.atleast_1d(np.asarray(errs, dtype=float))
        rates = [None] * len(errs)
        if prev is not None:
            p_ooh, p_errs = prev
            for k in range(len(errs)):
                if errs[k] > 0.0 and p_errs[k] > 0.0:
                    rates[k] = float(
                        np.log(p_errs[k] / errs[k]) / np.log(one_over_h / p_ooh)
                    )
        rows.append((float(one_over_h), [float(e) for e in errs], rates))
        prev = (one_over_h, errs)
    return rows


def write_convergence_csv(rows, path, labels=("v", "u")) -> None:
    with open(path, "w") as fh:
        header = ["one_over_h"]
        for lab in labels:
            header += [f"error_{lab}", f"rate_{lab}"]
        fh.write(",".join(header) + "\n")
        for one_over_h, errs, rates in rows:
            cells = [repr(one_over_h)]
            for e, r in zip(errs, rates):
                cells += [repr(e), "" if r is None else repr(r)]
            fh.write(",".join(cells) + "\n")
