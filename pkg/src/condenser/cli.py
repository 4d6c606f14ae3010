"""Command-line front end: scenario ingestion, built-in examples, solve and
verification pipelines, and report/CSV emission.

Exit codes: 0 success, 2 parse error, 3 infeasible, 4 non-converged,
5 internal error.  On any failure partial outputs are removed and a single
machine-readable line ``ERROR <code> <message>`` goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from . import scenarios
from .balayage import GreenContext, balayage_project
from .errors import (CondenserError, InfeasibleError, NonConvergedError,
                     ParseError, SigmaDominationError, SolverDivergence)
from .gauss_solver import (Constraint, ProblemSpec, SolveResult,
                           lift_green_to_riesz, solve_green_reduced,
                           solve_riesz)
from .kernel import ExternalField, KernelSpec, equilibrium_measure
from .model import (Condenser, DiscreteMeasure, NodeSet, PlateSpec,
                    build_condenser, ball_volume_nodes, disk_nodes,
                    sphere_surface_nodes)
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .verify import (kkt_report, scalar_zone_checks, support_report,
                     equivalence_check, unsolvability_sweep, loglog_slope)

REPORT_SCHEMA = 1


@dataclass
class Scenario:
    """Fully validated scenario: everything a pipeline needs to run."""

    name: str
    spec: ProblemSpec
    green: GreenContext
    meta: dict
    tolerances: Tolerances


def _require(cfg: dict, key: str, kind=None):
    if key not in cfg:
        raise ParseError(f"missing config key {key!r}")
    val = cfg[key]
    if kind is not None and not isinstance(val, kind):
        raise ParseError(f"config key {key!r} has wrong type "
                         f"{type(val).__name__}")
    return val


def load_config(path: str) -> dict:
    try:
        with open(path, "r") as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ParseError(f"config file {path!r} not found") from None
    except yaml.YAMLError as exc:
        raise ParseError(f"config is not valid YAML: {exc}") from None
    if not isinstance(cfg, dict):
        raise ParseError("config root must be a mapping")
    return cfg


def _tolerances_from(cfg: dict, args) -> Tolerances:
    tol = DEFAULT_TOLERANCES
    overrides = dict(cfg.get("tolerances", {}) or {})
    if args.tol_kkt is not None:
        overrides["kkt"] = args.tol_kkt
    if args.max_iters is not None:
        overrides["max_iters"] = args.max_iters
    known = set(Tolerances.__dataclass_fields__)
    bad = set(overrides) - known
    if bad:
        raise ParseError(f"unknown tolerance keys {sorted(bad)}")
    return tol.with_(**overrides)


def _kernel_from(cfg: dict) -> KernelSpec:
    kc = _require(cfg, "kernel", dict)
    try:
        return KernelSpec(int(kc.get("n", 3)), float(_require(kc, "alpha")))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"invalid kernel spec: {exc}") from None


def _plate_specs_from(cfg: dict, resolution: float, truncation: float,
                      alpha: float):
    specs = []
    for i, pc in enumerate(_require(cfg, "plates", list)):
        if not isinstance(pc, dict):
            raise ParseError(f"plate {i} must be a mapping")
        tag = _require(pc, "geometry", str)
        sign = int(_require(pc, "sign"))
        # Newtonian sweeps are carried by the boundary, so half-space plates
        # default to the boundary layer alone at alpha = 2
        backing = bool(pc.get("backing", alpha < 2.0))
        try:
            specs.append(PlateSpec(
                tag=tag, sign=sign,
                center=tuple(pc.get("center", (0.0, 0.0, 0.0))),
                radius=float(pc.get("radius", 0.0)),
                axis=int(pc.get("axis", 0)),
                level=float(pc.get("level", 0.0)),
                side=int(pc.get("side", -1)),
                truncation=float(pc.get("truncation", truncation))
                if tag in ("ball_complement", "half_space") else None,
                resolution_scale=float(pc.get("resolution_scale", 1.0)),
                stack_count=int(pc.get("stack_count", 0)),
                backing=backing))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"plate {i}: {exc}") from None
    return specs


def _constraint_from(cfg: dict, condenser: Condenser, kernel: KernelSpec,
                     tol: Tolerances) -> Constraint:
    entries = _require(cfg, "constraint", list)
    if len(entries) != len(condenser.plates):
        raise ParseError("one constraint entry per plate required")
    caps = []
    for i, (ent, plate) in enumerate(zip(entries, condenser.plates)):
        if not isinstance(ent, dict):
            raise ParseError(f"constraint {i} must be a mapping")
        mode = _require(ent, "mode", str)
        if mode == "unbounded":
            caps.append(None)
        elif mode == "explicit":
            w = np.asarray(_require(ent, "weights", list), dtype=float)
            caps.append(w)
        elif mode == "scaled_capacitary":
            q = float(_require(ent, "q"))
            lam, _ = equilibrium_measure(plate.nodes, kernel, 1.0,
                                         tolerances=tol)
            caps.append(q * lam.weights)
        elif mode == "stacked_disks":
            count = int(_require(ent, "disk_count"))
            layers = plate.nodes.layer_index
            cap = np.zeros(len(plate.nodes))
            for k in range(1, count + 1):
                sel = np.flatnonzero(layers == k - 1)
                if sel.size == 0:
                    raise ParseError(f"plate {i} lacks disk layer {k - 1}")
                lam, _ = equilibrium_measure(plate.nodes.subset(sel), kernel,
                                             1.0, tolerances=tol)
                cap[sel] = lam.weights / (k * k)
            caps.append(cap)
        else:
            raise ParseError(f"unknown constraint mode {mode!r}")
    return Constraint(tuple(caps))


def _field_from(cfg: dict, condenser: Condenser) -> ExternalField:
    fc = cfg.get("field", {"case": "zero"}) or {"case": "zero"}
    case = fc.get("case", "zero")
    if case == "zero":
        return ExternalField.zero()
    if case == "node_values":
        vals = _require(fc, "values", list)
        if len(vals) != len(condenser.plates):
            raise ParseError("one field value array per plate required")
        arrays = []
        for v, p in zip(vals, condenser.plates):
            arr = np.asarray([math.inf if x == "inf" else float(x)
                              for x in v], dtype=float)
            if arr.shape != (len(p.nodes),):
                raise ParseError("field values misaligned with plate nodes")
            arrays.append(arr)
        return ExternalField.case1(arrays, condenser.signs)
    raise ParseError(f"unsupported field case {case!r} in configs")


def build_scenario(cfg: dict, args) -> Scenario:
    """Validated Scenario from a parsed config."""
    tol = _tolerances_from(cfg, args)
    kernel = _kernel_from(cfg)
    resolution = float(args.resolution or cfg.get("resolution", 0.2))
    truncation = float(args.truncation or cfg.get("truncation", 16.0))
    condenser = build_condenser(
        _plate_specs_from(cfg, resolution, truncation, kernel.alpha),
        resolution)
    totals = tuple(float(a) for a in _require(cfg, "totals", list))
    constraint = _constraint_from(cfg, condenser, kernel, tol)
    fieldspec = _field_from(cfg, condenser)
    try:
        spec = ProblemSpec(condenser=condenser, totals=totals, field=fieldspec,
                           constraint=constraint, kernel=kernel, tolerances=tol)
    except (ValueError,) as exc:
        raise ParseError(str(exc)) from None
    green = GreenContext(condenser.plates[-1].nodes, kernel, tolerances=tol)
    meta = {"resolution": resolution, "truncation": truncation}
    return Scenario(name=str(cfg.get("name", "scenario")), spec=spec,
                    green=green, meta=meta, tolerances=tol)


# ---------------------------------------------------------------------------
# report / CSV emission
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (np.floating,)):
        return _fmt(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(float(x)) for x in np.asarray(v).ravel()) + "]"
    return str(v)


class ReportBuilder:
    def __init__(self, name: str):
        self.lines = [f"schema_version = {REPORT_SCHEMA}",
                      f"scenario = {name}",
                      f"timestamp = {time.strftime('%Y-%m-%dT%H:%M:%S')}"]

    def add(self, key: str, value):
        self.lines.append(f"{key} = {_fmt(value)}")

    def section(self, title: str):
        self.lines.append("")
        self.lines.append(f"[{title}]")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _atoms_csv(spec: ProblemSpec, result: Optional[SolveResult]) -> str:
    dim = spec.condenser.dim
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["plate"] + [f"x{i + 1}" for i in range(dim)] + ["weight", "cap"])
    for i, plate in enumerate(spec.condenser.plates):
        caps = spec.constraint.cap_array(i, len(plate.nodes))
        w = result.solution.components[i].weights if result is not None \
            else np.zeros(len(plate.nodes))
        for k in range(len(plate.nodes)):
            row = [i] + [_fmt(float(x)) for x in plate.nodes.positions[k]]
            row += [_fmt(float(w[k])), _fmt(float(caps[k]))]
            wr.writerow(row)
    return buf.getvalue()


def _measure_csv(nodes: NodeSet, weights: np.ndarray) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    dim = nodes.dim
    wr.writerow(["plate"] + [f"x{i + 1}" for i in range(dim)] + ["weight", "cap"])
    for k in range(len(nodes)):
        wr.writerow([0] + [_fmt(float(x)) for x in nodes.positions[k]] +
                    [_fmt(float(weights[k])), "inf"])
    return buf.getvalue()


def _trace_csv(result: SolveResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["iter", "objective", "step", "kkt_residual"])
    for row in result.trace:
        wr.writerow([int(row[0])] + [_fmt(float(x)) for x in row[1:]])
    return buf.getvalue()


def _emit(out_dir: str, files: dict):
    os.makedirs(out_dir, exist_ok=True)
    for name, content in files.items():
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(content)


def _solver_section(rep: ReportBuilder, result: SolveResult, spec: ProblemSpec,
                    prefix: str = "solver"):
    rep.section(prefix)
    rep.add(f"{prefix}.energy", result.energy)
    rep.add(f"{prefix}.converged", result.converged)
    rep.add(f"{prefix}.iterations", result.iterations)
    rep.add(f"{prefix}.kkt_residual", result.kkt_residual)
    rep.add(f"{prefix}.constants", result.constants)
    rep.add(f"{prefix}.seed", result.seed if result.seed is not None else -1)
    for i, a in enumerate(spec.totals):
        got = result.solution.components[i].total_mass if \
            i < len(result.solution.components) else float("nan")
        rep.add(f"{prefix}.plate{i}.mass", got)
    if result.lift_mass_defect is not None:
        rep.add(f"{prefix}.lift_mass_defect", result.lift_mass_defect)
    if result.balayage_residual is not None:
        rep.add(f"{prefix}.balayage_residual", result.balayage_residual)


def _config_section(rep: ReportBuilder, spec: ProblemSpec, meta: dict,
                    seed: Optional[int]):
    rep.section("config")
    rep.add("config.kernel.n", spec.kernel.n)
    rep.add("config.kernel.alpha", spec.kernel.alpha)
    rep.add("config.totals", spec.totals)
    rep.add("config.seed", seed if seed is not None else -1)
    for key, val in sorted(meta.items()):
        rep.add(f"config.{key}", val)
    for i, p in enumerate(spec.condenser.plates):
        rep.add(f"config.plate{i}.geometry", p.geometry_tag)
        rep.add(f"config.plate{i}.sign", p.sign)
        rep.add(f"config.plate{i}.nodes", len(p.nodes))
        if p.truncation is not None:
            rep.add(f"config.plate{i}.truncation", p.truncation)
    rep.section("tolerances")
    for name in Tolerances.__dataclass_fields__:
        rep.add(f"tolerances.{name}", getattr(spec.tolerances, name))


def _verify_sections(rep: ReportBuilder, result, spec, green, lift=None,
                     green_result=None, zone_seed=3):
    krep = kkt_report(result, spec)
    rep.section("kkt")
    rep.add("kkt.constants", krep.constants)
    rep.add("kkt.lower_violation", krep.lower_violation)
    rep.add("kkt.upper_violation", krep.upper_violation)
    rep.add("kkt.plate_p_stationarity", krep.plate_p_stationarity)
    rep.add("kkt.plate_p_level", krep.plate_p_level)
    rep.add("kkt.plate_p_excluded", krep.plate_p_excluded)
    rep.add("kkt.tol_kkt", krep.tol_kkt)
    rep.add("kkt.tol_potential", krep.tol_potential)
    rep.add("kkt.pass", krep.overall_pass)
    if len(spec.condenser.plates) == 2 and spec.field.case == "zero" \
            and spec.totals[0] == 1.0:
        zrep = scalar_zone_checks(result, spec, green, seed=zone_seed)
        rep.section("zone")
        rep.add("zone.c1", zrep.c1)
        rep.add("zone.identity_residual", zrep.identity_residual)
        rep.add("zone.level_residual", zrep.level_residual)
        rep.add("zone.bound_residual", zrep.bound_residual)
        rep.add("zone.support_failures", zrep.support_failures)
        rep.add("zone.probes_used", zrep.probes_used)
        rep.add("zone.probes_excluded", zrep.probes_excluded)
        rep.add("zone.tolerance", zrep.tol)
        for name, ok in zrep.checks.items():
            rep.add(f"zone.check.{name}", ok)
        rep.add("zone.pass", zrep.overall_pass)
    srep = support_report(result, spec)
    rep.section("support")
    if srep.boundary_fraction is not None:
        rep.add("support.boundary_fraction", srep.boundary_fraction)
    if srep.layer_masses is not None:
        rep.add("support.layer_masses", srep.layer_masses)
        rep.add("support.empty_layers", len(srep.empty_layers))
    rep.add("support.pass", srep.passed)
    if lift is not None:
        eq = equivalence_check(result, lift, spec, green_result=green_result)
        rep.section("equivalence")
        for key, val in eq.items():
            rep.add(f"equivalence.{key}", val if val is not None else -1.0)
    return krep


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _built_in(name: str, args):
    tolov = {}
    if args.tol_kkt is not None:
        tolov["kkt"] = args.tol_kkt
    if args.max_iters is not None:
        tolov["max_iters"] = args.max_iters
    tol = DEFAULT_TOLERANCES.with_(**tolov)
    if name == "ex1":
        kw = {"tolerances": tol}
        if args.resolution:
            kw["resolution"] = args.resolution
        if args.truncation:
            kw["truncation"] = args.truncation
        built = scenarios.example_one(**kw)
    elif name == "ex2":
        kw = {"tolerances": tol}
        if args.truncation:
            kw["truncation"] = args.truncation
        if args.resolution:
            kw["plane_inner"] = args.resolution
        built = scenarios.example_two(**kw)
    else:
        raise ParseError(f"unknown built-in example {name!r}; use ex1 or ex2")
    return built


def cmd_solve(args) -> dict:
    sc = build_scenario(load_config(args.config), args)
    spec = sc.spec
    result = solve_riesz(spec, seed=args.seed)
    if not result.converged:
        raise NonConvergedError(
            f"solver stalled at KKT residual {result.kkt_residual:.3e}")
    rep = ReportBuilder(sc.name)
    _config_section(rep, spec, sc.meta, args.seed)
    _solver_section(rep, result, spec)
    kkt = kkt_report(result, spec)
    rep.section("kkt")
    rep.add("kkt.pass", kkt.overall_pass)
    rep.add("kkt.max_violation", kkt.max_violation)
    return {"report.txt": rep.text(), "atoms.csv": _atoms_csv(spec, result),
            "trace.csv": _trace_csv(result)}


def cmd_solve_green(args) -> dict:
    sc = build_scenario(load_config(args.config), args)
    spec, green = sc.spec, sc.green
    result = solve_green_reduced(spec, green, seed=args.seed)
    if not result.converged:
        raise NonConvergedError(
            f"solver stalled at KKT residual {result.kkt_residual:.3e}")
    lift = lift_green_to_riesz(result, spec, green)
    rep = ReportBuilder(sc.name)
    _config_section(rep, spec, sc.meta, args.seed)
    _solver_section(rep, result, spec, prefix="green")
    _solver_section(rep, lift, spec, prefix="lifted")
    return {"report.txt": rep.text(), "atoms.csv": _atoms_csv(spec, lift),
            "trace.csv": _trace_csv(result)}


def cmd_balayage(args) -> dict:
    cfg = load_config(args.config)
    kernel = _kernel_from(cfg)
    tol = _tolerances_from(cfg, args)
    resolution = float(args.resolution or cfg.get("resolution", 0.2))
    truncation = float(args.truncation or cfg.get("truncation", 16.0))
    specs = _plate_specs_from(cfg, resolution, truncation, kernel.alpha)
    if len(specs) != 1 or specs[0].sign != -1:
        raise ParseError("balayage config needs exactly one negative plate")
    cond = build_condenser(specs, resolution)
    exterior = cond.plates[0].nodes
    src = _require(cfg, "source", dict)
    pos = np.asarray(_require(src, "positions", list), dtype=float)
    wts = np.asarray(_require(src, "weights", list), dtype=float)
    if pos.ndim != 2 or pos.shape[0] != wts.shape[0]:
        raise ParseError("source positions/weights misaligned")
    radius = float(src.get("cell_radius", resolution / 4.0))
    mu = DiscreteMeasure(NodeSet(pos, np.ones(len(wts)),
                                 np.full(len(wts), radius)), wts)
    res = balayage_project(mu, exterior, kernel, tol)
    rep = ReportBuilder("balayage")
    rep.section("balayage")
    rep.add("balayage.mass_ratio", res.mass_ratio)
    rep.add("balayage.potential_residual", res.potential_residual)
    rep.add("balayage.projection_gap", res.projection_gap)
    rep.add("balayage.orthogonality", res.orthogonality)
    rep.add("balayage.clipped_nodes", res.clipped_nodes)
    rep.add("balayage.truncation", truncation)
    rep.add("balayage.exterior_nodes", len(exterior))
    return {"report.txt": rep.text(),
            "atoms.csv": _measure_csv(exterior, res.swept.weights)}


def cmd_capacity(args) -> dict:
    cfg = load_config(args.config)
    kernel = _kernel_from(cfg)
    tol = _tolerances_from(cfg, args)
    resolution = float(args.resolution or cfg.get("resolution", 0.1))
    gc = _require(cfg, "conductor", dict)
    tag = _require(gc, "geometry", str)
    center = tuple(gc.get("center", (0.0, 0.0, 0.0)))
    radius = float(gc.get("radius", 1.0))
    if tag == "sphere":
        count = max(12, int(round(4 * math.pi * radius ** 2 / resolution ** 2)))
        nodes = sphere_surface_nodes(center, radius, count)
    elif tag == "ball":
        nodes = ball_volume_nodes(center, radius, resolution)
    elif tag == "disk":
        count = max(12, int(round(math.pi * radius ** 2 / resolution ** 2)))
        nodes = disk_nodes(center, radius, count, axis=int(gc.get("axis", 0)))
    else:
        raise ParseError(f"unsupported conductor geometry {tag!r}")
    total = float(gc.get("total", 1.0))
    lam, cap = equilibrium_measure(nodes, kernel, total, tolerances=tol)
    rep = ReportBuilder("capacity")
    rep.section("capacity")
    rep.add("capacity.geometry", tag)
    rep.add("capacity.nodes", len(nodes))
    rep.add("capacity.total_mass", total)
    rep.add("capacity.energy", total * total / cap)
    rep.add("capacity.value", cap)
    return {"report.txt": rep.text(),
            "atoms.csv": _measure_csv(nodes, lam.weights)}


def cmd_verify(args) -> dict:
    sc = build_scenario(load_config(args.config), args)
    return _pipeline(sc.spec, sc.green, sc.meta, args.seed, name=sc.name)


def cmd_example(args) -> dict:
    built = _built_in(args.example_name, args)
    return _pipeline(built.spec, built.green, built.meta, args.seed,
                     name=built.name)


def _pipeline(spec, green, meta, seed, name) -> dict:
    result = solve_riesz(spec, seed=seed)
    if not result.converged:
        raise NonConvergedError(
            f"solver stalled at KKT residual {result.kkt_residual:.3e}")
    gres = solve_green_reduced(spec, green, seed=seed)
    lift = lift_green_to_riesz(gres, spec, green)
    rep = ReportBuilder(name)
    _config_section(rep, spec, meta, seed)
    _solver_section(rep, result, spec)
    _solver_section(rep, gres, spec, prefix="green")
    _verify_sections(rep, result, spec, green, lift=lift, green_result=gres)
    return {"report.txt": rep.text(), "atoms.csv": _atoms_csv(spec, result),
            "trace.csv": _trace_csv(result)}


def cmd_sweep(args) -> dict:
    cfg = load_config(args.config)
    tol = _tolerances_from(cfg, args)
    mode = cfg.get("mode", "uncapped")
    stages = [int(s) for s in cfg.get("stages", [1, 2, 3, 4, 5, 6])]
    kernel = KernelSpec(3, 2.0)
    ctx = scenarios.sweep_plane_context(
        flat_radius=float(cfg.get("flat_radius", 8.0)),
        cell=float(cfg.get("cell", 0.33)),
        truncation=float(args.truncation or cfg.get("truncation", 30.0)),
        tolerances=tol)
    zeta = None
    if mode == "capped":
        zn = disk_nodes((1.0, 0.0, 0.0), 0.5, 80, axis=0)
        zeta, _ = equilibrium_measure(zn, kernel, 0.5, tolerances=tol)
    rows = unsolvability_sweep(mode, stages, ctx, kernel, zeta=zeta,
                               tolerances=tol)
    key = "energy" if mode == "uncapped" else "bound"
    vals = [row[key] for row in rows]
    rep = ReportBuilder("sweep")
    rep.section("sweep")
    rep.add("sweep.mode", mode)
    rep.add("sweep.stages", stages)
    rep.add(f"sweep.{key}", vals)
    rep.add("sweep.strictly_decreasing",
            all(vals[i + 1] < vals[i] for i in range(len(vals) - 1)))
    rep.add("sweep.loglog_slope", loglog_slope(stages, vals))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(sorted(rows[0].keys()))
    for row in rows:
        wr.writerow([_fmt(row[k]) for k in sorted(row.keys())])
    return {"report.txt": rep.text(), "stages.csv": buf.getvalue()}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="condenser",
        description="Constrained minimum-energy problems on discretized "
                    "condensers: solve, verify, and probe")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol-kkt", type=float, default=None)
    parser.add_argument("--truncation", type=float, default=None)
    parser.add_argument("--resolution", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--out-dir", type=str, default="out")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "solve-green", "balayage", "capacity", "verify",
                 "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
    spx = sub.add_parser("example")
    spx.add_argument("example_name", choices=["ex1", "ex2"])
    args = parser.parse_args(argv)

    handlers = {
        "solve": cmd_solve,
        "solve-green": cmd_solve_green,
        "balayage": cmd_balayage,
        "capacity": cmd_capacity,
        "verify": cmd_verify,
        "sweep": cmd_sweep,
        "example": cmd_example,
    }
    try:
        files = handlers[args.command](args)
    except ParseError as exc:
        print(f"ERROR Parse {exc}", file=sys.stderr)
        return 2
    except (InfeasibleError, SigmaDominationError) as exc:
        print(f"ERROR {exc.code} {exc}", file=sys.stderr)
        return 3
    except (NonConvergedError, SolverDivergence) as exc:
        print(f"ERROR NonConverged {exc}", file=sys.stderr)
        return 4
    except CondenserError as exc:
        print(f"ERROR {exc.code} {exc}", file=sys.stderr)
        return 5
    except Exception as exc:  # pragma: no cover - defensive
        print(f"ERROR Internal {exc}", file=sys.stderr)
        return 5
    _emit(args.out_dir, files)
    print(f"wrote {', '.join(sorted(files))} to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
