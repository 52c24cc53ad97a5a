"""Case-driven command line front end.

A case file is an INI document with sections [case], [mesh], [model],
[solver], [output].  Unknown sections or keys are rejected with the
offending line number.  ``run`` integrates one case and writes field
snapshots, a JSON report, and with ``--strict`` exits nonzero when the
report records violations.  ``convergence`` sweeps a family of interval
meshes against the closed-form solution and writes the error table.
"""

from __future__ import annotations

import argparse
import sys
import time
from configparser import ConfigParser, Error as ConfigError
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import assemble_operators
from .diagnostics import (
    RunReport,
    entropy_residual_report,
    entropy_scale,
    convergence_rows,
    l1_error,
    local_invariance_report,
    write_convergence_csv,
)
from .exact import psystem_rarefaction_exact
from .mesh import build_interval_mesh, build_triangle_mesh, MeshError
from .solver import SolverAbort, SolverConfig, StateField, Stepper
from .systems import EulerModel, PSystemModel, burgers_model, kpp_model, linear_model

CONSERVATION_TOL = 1e-12
ENTROPY_TOL = 1e-10

CASE_NAMES = ("kpp", "psystem_rarefaction", "leblanc", "sod", "custom_scalar")

# key -> value kind per section; "floats" is a comma-separated list
_SCHEMA = {
    "case": {"name": "str"},
    "mesh": {
        "kind": "str",
        "n_cells": "int",
        "bounds": "floats",
        "periodic": "bool",
        "nx": "int",
        "ny": "int",
        "xbounds": "floats",
        "ybounds": "floats",
        "perturbation": "float",
        "seed": "int",
    },
    "model": {
        "gamma": "float",
        "r": "float",
        "flux": "str",
        "velocity": "floats",
        "left": "float",
        "right": "float",
        "x0": "float",
    },
    "solver": {
        "viscosity_mode": "str",
        "cfl": "float",
        "integrator": "str",
        "final_time": "float",
        "max_steps": "int",
        "recompute_per_stage": "bool",
    },
    "output": {"directory": "str", "snapshot_times": "floats"},
}


class CaseFileError(ValueError):
    """Malformed case file, unknown key, or unparseable value."""


@dataclass
class CaseFile:
    """Parsed case description; section contents keep only explicit keys."""

    name: str
    mesh: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def _line_of(text: str, section: str, key: str) -> int:
    """Best-effort line number of ``key`` inside ``section`` for messages."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
        elif current == section and stripped.split("=")[0].strip() == key:
            return lineno
    return 0


def _convert(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not np.isfinite(v):
                raise ValueError("non-finite")
            return v
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError("not a boolean")
        if kind == "floats":
            vals = [float(tok) for tok in raw.split(",") if tok.strip() != ""]
            if not vals or not all(np.isfinite(v) for v in vals):
                raise ValueError("non-finite or empty list")
            return vals
    except ValueError as exc:
        raise CaseFileError(f"{where}: cannot parse {raw!r} as {kind} ({exc})")
    raise CaseFileError(f"{where}: unknown value kind {kind}")


def parse_case_text(text: str, origin: str = "<case>") -> CaseFile:
    parser = ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=origin)
    except ConfigError as exc:
        raise CaseFileError(str(exc))
    sections = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise CaseFileError(f"{origin}: unknown section [{section}]")
        allowed = _SCHEMA[section]
        content = {}
        for key, raw in parser.items(section):
            if key not in allowed:
                line = _line_of(text, section, key)
                raise CaseFileError(
                    f"{origin}:{line}: unknown key {key!r} in section [{section}]"
                )
            line = _line_of(text, section, key)
            content[key] = _convert(allowed[key], raw, f"{origin}:{line}")
        sections[section] = content
    if "case" not in sections or "name" not in sections["case"]:
        raise CaseFileError(f"{origin}: missing [case] name")
    name = sections["case"]["name"]
    if name not in CASE_NAMES:
        raise CaseFileError(
            f"{origin}: unknown case {name!r}; expected one of {', '.join(CASE_NAMES)}"
        )
    return CaseFile(
        name=name,
        mesh=sections.get("mesh", {}),
        model=sections.get("model", {}),
        solver=sections.get("solver", {}),
        output=sections.get("output", {}),
    )


def parse_case(path) -> CaseFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CaseFileError(f"cannot read case file {path}: {exc}")
    return parse_case_text(text, origin=str(path))


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    return str(v)


def emit_case(case: CaseFile) -> str:
    """Render a case back to INI text; parse(emit(c)) == c."""
    lines = ["[case]", f"name = {case.name}"]
    for section in ("mesh", "model", "solver", "output"):
        content = getattr(case, section)
        if not content:
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key in sorted(content):
            lines.append(f"{key} = {_format_value(content[key])}")
    return "\n".join(lines) + "\n"


def apply_overrides(case: CaseFile, overrides) -> CaseFile:
    """Apply ``section.key=value`` pairs on top of a parsed case."""
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise CaseFileError(
                f"override {item!r} must look like section.key=value"
            )
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise CaseFileError(f"override names unknown key {target!r}")
        if section == "case":
            if raw not in CASE_NAMES:
                raise CaseFileError(f"override sets unknown case {raw!r}")
            case.name = raw
        else:
            getattr(case, section)[key] = _convert(
                _SCHEMA[section][key], raw, f"override {item!r}"
            )
    return case


# ---------------------------------------------------------------------------
# case registry


@dataclass
class CaseSetup:
    """Everything run_case needs beyond the solver config."""

    mesh: object
    model: object
    initial: object            # coords (N, dim) -> U (N, m)
    final_time: float
    exact: object = None       # coords, t -> U, or None
    labels: tuple = ()


def _interval_mesh(params: dict, default_cells: int, default_bounds=(0.0, 1.0)):
    kind = params.get("kind", "interval")
    if kind != "interval":
        raise CaseFileError(f"this case needs an interval mesh, got kind={kind!r}")
    n = params.get("n_cells", default_cells)
    bounds = params.get("bounds", list(default_bounds))
    periodic = params.get("periodic", False)
    return build_interval_mesh(n, bounds, periodic=periodic)


def _riemann_initial(left, right, x0):
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)

    def init(coords):
        x = np.asarray(coords)[:, 0]
        return np.where((x < x0)[:, None], left[None, :], right[None, :])

    return init


def _setup_kpp(case: CaseFile) -> CaseSetup:
    p = case.mesh
    kind = p.get("kind", "triangle")
    if kind != "triangle":
        raise CaseFileError(f"kpp needs a triangle mesh, got kind={kind!r}")
    mesh = build_triangle_mesh(
        p.get("nx", 70),
        p.get("ny", 70),
        (p.get("xbounds", [-2.0, 2.0]), p.get("ybounds", [-2.5, 1.5])),
        perturbation=p.get("perturbation", 0.1),
        seed=p.get("seed", 1),
    )

    def init(coords):
        r2 = coords[:, 0] ** 2 + coords[:, 1] ** 2
        return np.where(r2 <= 1.0, 14.0 * np.pi / 4.0, np.pi / 4.0)[:, None]

    return CaseSetup(mesh=mesh, model=kpp_model(), initial=init, final_time=1.0,
                     labels=("u",))


def _setup_psystem(case: CaseFile) -> CaseSetup:
    gamma = case.model.get("gamma", 3.0)
    r = case.model.get("r", 1.0 / gamma)
    model = PSystemModel(r=r, gamma=gamma)
    x0 = case.model.get("x0", 0.75)
    vR = 2.0 ** (2.0 / (gamma - 1.0))
    uR = 1.0 / (gamma - 1.0)
    mesh = _interval_mesh(case.mesh, 1000)
    exact = None
    # the closed-form fan assumes unit left sound speed, i.e. gamma * r = 1
    if abs(gamma * r - 1.0) <= 1e-12 and x0 == 0.75:
        exact = psystem_rarefaction_exact(gamma, x0=x0)
    return CaseSetup(
        mesh=mesh, model=model,
        initial=_riemann_initial([1.0, 0.0], [vR, uR], x0),
        final_time=0.75, exact=exact, labels=("v", "u"),
    )


def _setup_leblanc(case: CaseFile) -> CaseSetup:
    gamma = case.model.get("gamma", 5.0 / 3.0)
    model = EulerModel(gamma=gamma, d=1)
    x0 = case.model.get("x0", 0.5)
    left = model.conserved([1.0], [[0.0]], [0.1])[0]
    right = model.conserved([0.001], [[0.0]], [1e-15])[0]
    mesh = _interval_mesh(case.mesh, 5000)
    return CaseSetup(mesh=mesh, model=model,
                     initial=_riemann_initial(left, right, x0),
                     final_time=0.1, labels=("rho", "mom", "E"))


def _setup_sod(case: CaseFile) -> CaseSetup:
    gamma = case.model.get("gamma", 1.4)
    model = EulerModel(gamma=gamma, d=1)
    x0 = case.model.get("x0", 0.5)
    left = model.conserved([1.0], [[0.0]], [1.0])[0]
    right = model.conserved([0.125], [[0.0]], [0.1])[0]
    mesh = _interval_mesh(case.mesh, 1000)
    return CaseSetup(mesh=mesh, model=model,
                     initial=_riemann_initial(left, right, x0),
                     final_time=0.2, labels=("rho", "mom", "E"))


def _setup_custom_scalar(case: CaseFile) -> CaseSetup:
    flux = case.model.get("flux", "burgers")
    if flux == "burgers":
        model = burgers_model()
    elif flux == "linear":
        model = linear_model(case.model.get("velocity", [1.0]))
    else:
        raise CaseFileError(f"unknown scalar flux {flux!r}; use burgers or linear")
    if model.d != 1:
        raise CaseFileError("custom_scalar runs on interval meshes only")
    left = case.model.get("left", 1.0)
    right = case.model.get("right", 0.0)
    x0 = case.model.get("x0", 0.5)
    mesh = _interval_mesh(case.mesh, 400)
    return CaseSetup(mesh=mesh, model=model,
                     initial=_riemann_initial([left], [right], x0),
                     final_time=0.3, labels=("u",))


_SETUPS = {
    "kpp": _setup_kpp,
    "psystem_rarefaction": _setup_psystem,
    "leblanc": _setup_leblanc,
    "sod": _setup_sod,
    "custom_scalar": _setup_custom_scalar,
}


def build_setup(case: CaseFile) -> CaseSetup:
    try:
        return _SETUPS[case.name](case)
    except MeshError as exc:
        raise CaseFileError(f"mesh construction failed: {exc}")


def solver_config(case: CaseFile, setup: CaseSetup) -> SolverConfig:
    s = case.solver
    return SolverConfig(
        viscosity_mode=s.get("viscosity_mode", "graph"),
        cfl=s.get("cfl", 0.5),
        integrator=s.get("integrator", "ssp3"),
        final_time=s.get("final_time", setup.final_time),
        max_steps=s.get("max_steps", 10_000_000),
        recompute_per_stage=s.get("recompute_per_stage", True),
    )


# ---------------------------------------------------------------------------
# execution


class _StageTracker:
    """Accumulates per-stage invariance and entropy diagnostics."""

    def __init__(self, ops, model):
        self.ops = ops
        self.model = model
        self.step_index = 0
        self.violations = 0
        self.worst = -np.inf
        self.worst_node = -1
        self.worst_step = -1
        self.res_max = -np.inf     # residual / scale, worst over the run
        self.res_min = np.inf
        self.scale = 0.0

    def __call__(self, prev, new, D, dt):
        count, worst, node = local_invariance_report(
            self.model, self.ops.stencils, prev.U, new.U
        )
        self.violations += count
        if worst > self.worst:
            self.worst = worst
            self.worst_node = node
            self.worst_step = self.step_index
        res = entropy_residual_report(self.ops, self.model, prev.U, new.U, D, dt)
        scale = entropy_scale(self.ops, self.model, prev.U, dt)
        self.res_max = max(self.res_max, float(res.max()) / scale)
        self.res_min = min(self.res_min, float(res.min()) / scale)
        self.scale = max(self.scale, scale)


def write_snapshot_csv(mesh, U, path) -> None:
    """One row per node: coordinates then components, shortest-repr floats."""
    header = ["x", "y"][: mesh.dim] + [f"comp_{k}" for k in range(U.shape[1])]
    try:
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(mesh.n_nodes):
                row = [repr(float(v)) for v in mesh.node_coords[i]]
                row += [repr(float(v)) for v in U[i]]
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise CaseFileError(f"cannot write snapshot {path}: {exc}")


def _snapshot_schedule(case: CaseFile, final_time: float):
    times = case.output.get("snapshot_times", [0.0, final_time])
    times = sorted(set(float(t) for t in times))
    for t in times:
        if t < 0.0 or t > final_time * (1.0 + 1e-12):
            raise CaseFileError(f"snapshot time {t} outside [0, {final_time}]")
    if not times or abs(times[-1] - final_time) > 1e-12 * max(final_time, 1.0):
        times.append(final_time)
    return times


def execute_case(case: CaseFile, out_dir=None, track_stages: bool = True):
    """Run one case and write its artifacts; returns (report, out path)."""
    setup = build_setup(case)
    config = solver_config(case, setup)
    ops = assemble_operators(setup.mesh)
    state = StateField(setup.initial(setup.mesh.node_coords), 0.0)
    setup.model.check_admissible(state.U)

    out = Path(out_dir or case.output.get("directory", f"out_{case.name}"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CaseFileError(f"cannot create output directory {out}: {exc}")

    tracker = _StageTracker(ops, setup.model) if track_stages else None
    stepper = Stepper(ops, setup.model, config, stage_observer=tracker,
                      boundary_nodes=setup.mesh.boundary_nodes)

    report = RunReport(case=case.name, final_time=config.final_time)
    ref_total = ops.m @ state.U
    denom = np.where(np.abs(ref_total) > 0.0, np.abs(ref_total), 1.0)
    max_drift = np.zeros(setup.model.m)

    schedule = _snapshot_schedule(case, config.final_time)
    snapshots = []
    t0 = time.perf_counter()
    step = 0
    tiny = 1e-14 * max(config.final_time, 1.0)
    try:
        for k, target in enumerate(schedule):
            while state.time < target - tiny:
                if step >= config.max_steps:
                    raise SolverAbort(f"max_steps={config.max_steps} exhausted")
                if tracker is not None:
                    tracker.step_index = step
                state, _ = stepper.step(state, target - state.time)
                step += 1
                totals = ops.m @ state.U + stepper.boundary_outflux
                max_drift = np.maximum(max_drift, np.abs(totals - ref_total) / denom)
            fname = f"snapshot_{k:03d}.csv"
            write_snapshot_csv(setup.mesh, state.U, out / fname)
            snapshots.append([float(target), fname])
    except SolverAbort as exc:
        raise SolverAbort(f"{exc} (after {step} completed steps)") from None

    report.steps = step
    report.wall_seconds = time.perf_counter() - t0
    report.conservation_drift = [float(v) for v in max_drift]
    report.snapshots = snapshots
    if tracker is not None:
        report.invariant_violations = tracker.violations
        report.worst_violation = float(tracker.worst)
        report.worst_violation_node = tracker.worst_node
        report.worst_violation_step = tracker.worst_step
        report.entropy_residual_max = tracker.res_max
        report.entropy_residual_min = tracker.res_min
        report.entropy_scale = tracker.scale
    if setup.exact is not None:
        report.l1_errors = [float(v) for v in l1_error(setup.mesh, state, setup.exact)]
    try:
        (out / "report.json").write_text(report.to_json() + "\n")
    except OSError as exc:
        raise CaseFileError(f"cannot write report to {out}: {exc}")
    return report, out


def strict_failures(report: RunReport, viscosity_mode: str):
    """Violation summaries that make a --strict run exit nonzero."""
    fails = []
    if report.invariant_violations > 0:
        fails.append(
            f"{report.invariant_violations} local invariance violations "
            f"(worst {report.worst_violation:.3e} at node "
            f"{report.worst_violation_node}, step {report.worst_violation_step})"
        )
    drift = max(report.conservation_drift, default=0.0)
    if drift > CONSERVATION_TOL:
        fails.append(f"conservation drift {drift:.3e} exceeds {CONSERVATION_TOL}")
    if viscosity_mode in ("graph", "cell") and report.entropy_residual_max > ENTROPY_TOL:
        fails.append(
            f"entropy residual {report.entropy_residual_max:.3e} of scale "
            f"exceeds {ENTROPY_TOL}"
        )
    return fails


def run_case(path, strict: bool = False, out_dir=None, overrides=()) -> int:
    case = apply_overrides(parse_case(path), overrides)
    try:
        report, out = execute_case(case, out_dir=out_dir)
    except SolverAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    mode = case.solver.get("viscosity_mode", "graph")
    fails = strict_failures(report, mode)
    status = "FAIL" if (strict and fails) else "ok"
    print(
        f"{case.name}: {report.steps} steps to t={report.final_time} "
        f"in {report.wall_seconds:.2f}s [{status}] -> {out}"
    )
    for f in fails:
        print(f"  violation: {f}", file=sys.stderr if strict else sys.stdout)
    return 1 if (strict and fails) else 0


def run_convergence(path, meshes, out_dir=None, overrides=()) -> int:
    """Error table over a family of interval meshes, against the exact fan."""
    case = apply_overrides(parse_case(path), overrides)
    out = Path(out_dir or case.output.get("directory", f"out_{case.name}"))
    entries = []
    labels = None
    final_state = {}
    for n in meshes:
        sub = CaseFile(case.name, dict(case.mesh), dict(case.model),
                       dict(case.solver), dict(case.output))
        sub.mesh["n_cells"] = int(n)
        setup = build_setup(sub)
        if setup.exact is None:
            print(f"error: case {case.name} has no closed-form solution "
                  "for a convergence sweep", file=sys.stderr)
            return 2
        labels = setup.labels
        config = solver_config(sub, setup)
        ops = assemble_operators(setup.mesh)
        state = StateField(setup.initial(setup.mesh.node_coords), 0.0)
        stepper = Stepper(ops, setup.model, config,
                          boundary_nodes=setup.mesh.boundary_nodes)
        try:
            out.mkdir(parents=True, exist_ok=True)
            step = 0
            tiny = 1e-14 * max(config.final_time, 1.0)
            while state.time < config.final_time - tiny:
                if step >= config.max_steps:
                    raise SolverAbort(f"max_steps={config.max_steps} exhausted")
                state, _ = stepper.step(state, config.final_time - state.time)
                step += 1
        except SolverAbort as exc:
            print(f"error: {exc} (mesh {n})", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"error: cannot create output directory {out}: {exc}",
                  file=sys.stderr)
            return 2
        errs = l1_error(setup.mesh, state, setup.exact)
        x = setup.mesh.node_coords[:, 0]
        one_over_h = n / (x.max() - x.min())
        entries.append((one_over_h, errs))
        fname = f"final_{int(n)}.csv"
        write_snapshot_csv(setup.mesh, state.U, out / fname)
        final_state[int(n)] = fname
        print(f"{case.name} n={n}: errors "
              + " ".join(f"{lab}={e:.4e}" for lab, e in zip(labels, errs)))
    rows = convergence_rows(entries)
    try:
        write_convergence_csv(rows, out / "convergence.csv", labels=labels)
    except OSError as exc:
        print(f"error: cannot write convergence table to {out}: {exc}",
              file=sys.stderr)
        return 2
    print(f"wrote {out / 'convergence.csv'}")
    return 0


def _parse_meshes(text: str):
    try:
        meshes = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise CaseFileError(f"--meshes expects comma-separated integers, got {text!r}")
    if not meshes:
        raise CaseFileError("--meshes list is empty")
    return meshes


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypfem",
        description="First-order invariant-domain-preserving P1 solver "
        "for hyperbolic conservation laws.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="integrate one case file")
    runp.add_argument("case", help="path to an INI case file")
    runp.add_argument("--strict", action="store_true",
                      help="exit nonzero if the report records violations")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--override", action="append", default=[],
                      metavar="SECTION.KEY=VALUE")

    convp = sub.add_parser("convergence", help="mesh-refinement error table")
    convp.add_argument("case", help="path to an INI case file")
    convp.add_argument("--meshes", required=True,
                       help="comma-separated cell counts, e.g. 1000,2000,4000")
    convp.add_argument("--out", default=None, help="output directory")
    convp.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_case(args.case, strict=args.strict, out_dir=args.out,
                            overrides=args.override)
        return run_convergence(args.case, _parse_meshes(args.meshes),
                               out_dir=args.out, overrides=args.override)
    except CaseFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
