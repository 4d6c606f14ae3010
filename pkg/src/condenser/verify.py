"""Checks of solver outputs against the structural characterizations:
first-order (KKT) conditions, scalar-case zone identities, support layout,
Riesz/Green equivalence, and the short-circuit / unsolvability trends."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .balayage import GreenContext
from .errors import WrongScenarioError
from .gauss_solver import ProblemSpec, SolveResult
from .kernel import (KernelSpec, assemble_matrix, equilibrium_measure,
                     potential, vector_potential)
from .model import (DiscreteMeasure, NodeSet, VectorMeasure, disk_nodes,
                    resultant, semimetric_distance)
from .tolerances import DEFAULT_TOLERANCES, Tolerances


def weighted_potentials(solution: VectorMeasure, spec: ProblemSpec,
                        kernel: Optional[KernelSpec] = None) -> list:
    """W^{lambda,i} at every node of every component, recomputed from the
    measure itself (independent of solver internals)."""
    kernel = kernel or spec.kernel
    nodesets = [c.nodes for c in solution.components]
    fvals = spec.field.plate_values(nodesets, solution.signs, kernel)
    out = []
    for i, comp in enumerate(solution.components):
        W = vector_potential(solution, i, comp.nodes.positions, kernel)
        f = np.where(np.isposinf(fvals[i]), 0.0, fvals[i])
        out.append(W + f)
    return out


def _plate_constant(W, w, caps, total, free_margin_rel):
    margin = free_margin_rel * total
    carried = w > margin
    below = w < caps - margin
    free = carried & below
    if np.any(free):
        return float(np.median(W[free])), carried, below
    hi = float(W[carried].max()) if np.any(carried) else 0.0
    lo = float(W[below].min()) if np.any(below) else hi
    return 0.5 * (hi + lo), carried, below


@dataclass
class KKTReport:
    constants: np.ndarray          # c_j per positive plate
    lower_violation: np.ndarray    # max(c_j - W) over below-cap nodes, normalized
    upper_violation: np.ndarray    # max(W - c_j) over carried nodes, normalized
    plate_p_constant: float
    plate_p_stationarity: float    # same two-sided residual on the negative plate
    plate_p_level: float           # max |W^{lambda,p}|, normalized (zero-potential law)
    plate_p_excluded: int          # nodes inside the boundary exclusion zone
    tol_kkt: float
    tol_potential: float
    kkt_pass: bool
    plate_p_pass: bool

    @property
    def overall_pass(self) -> bool:
        return self.kkt_pass and self.plate_p_pass

    @property
    def max_violation(self) -> float:
        vals = [self.plate_p_stationarity]
        if self.lower_violation.size:
            vals.append(float(self.lower_violation.max()))
        if self.upper_violation.size:
            vals.append(float(self.upper_violation.max()))
        return max(vals)


def kkt_report(result: SolveResult, spec: ProblemSpec,
               kernel: Optional[KernelSpec] = None,
               zero_sample: int = 128, seed: int = 0) -> KKTReport:
    """First-order conditions at the solution, read at the nodes.

    Positive plates: W >= c_j below the cap, W <= c_j on carried nodes.
    Negative plate: the same stationarity around its own constant, plus the
    potential level |W| itself, which in the continuum vanishes nearly
    everywhere on the negative plate.  The level check is
    discretization-limited, so it carries the potential tolerance while the
    stationarity residuals carry the KKT tolerance.
    """
    tol = spec.tolerances
    kernel = kernel or spec.kernel
    sol = result.solution
    W = weighted_potentials(sol, spec, kernel)
    n_comp = len(sol.components)
    has_p = n_comp == len(spec.condenser.plates)
    n_pos = n_comp - 1 if has_p else n_comp

    consts = np.zeros(n_pos)
    lower = np.zeros(n_pos)
    upper = np.zeros(n_pos)
    for j in range(n_pos):
        comp = sol.components[j]
        caps = spec.constraint.cap_array(j, len(comp.nodes))
        c, carried, below = _plate_constant(W[j], comp.weights, caps,
                                            spec.totals[j], tol.free_margin_rel)
        consts[j] = c
        scale = max(1.0, abs(c))
        lower[j] = max(0.0, float((c - W[j][below]).max())) / scale \
            if np.any(below) else 0.0
        upper[j] = max(0.0, float((W[j][carried] - c).max())) / scale \
            if np.any(carried) else 0.0

    plate_p_const = 0.0
    plate_p_stat = 0.0
    plate_p_level = 0.0
    excluded = 0
    if has_p:
        p = len(spec.condenser.plates) - 1
        comp = sol.components[p]
        caps = spec.constraint.cap_array(p, len(comp.nodes))
        c_p, carried, below = _plate_constant(W[p], comp.weights, caps,
                                              spec.totals[p], tol.free_margin_rel)
        plate_p_const = c_p
        scale = max(1.0, abs(c_p))
        v = 0.0
        if np.any(below):
            v = max(v, float((c_p - W[p][below]).max()))
        if np.any(carried):
            v = max(v, float((W[p][carried] - c_p).max()))
        plate_p_stat = v / scale
        # zero-potential law on the negative plate, outside the boundary zone
        plate = spec.condenser.plates[p]
        margin = tol.free_margin_rel * spec.totals[p]
        pick = comp.weights > margin
        zeros = np.flatnonzero(~pick)
        if zeros.size:
            rng = np.random.default_rng(seed)
            take = rng.choice(zeros, size=min(zero_sample, zeros.size),
                              replace=False)
            pick = pick.copy()
            pick[take] = True
        bdist = plate.boundary_distance(plate.nodes.positions)
        if bdist is not None:
            inside = bdist < plate.nodes.cell_radii
            excluded = int(np.sum(pick & inside))
            pick = pick & ~inside
        norm = max(1.0, float(np.abs(consts).max()) if n_pos else 1.0)
        plate_p_level = float(np.abs(W[p][pick]).max()) / norm if np.any(pick) else 0.0

    kkt_violations = [plate_p_stat] + [lower[j] for j in range(n_pos)] + \
        [upper[j] for j in range(n_pos)]
    kkt_pass = max(kkt_violations) <= tol.kkt
    plate_p_pass = plate_p_level <= tol.potential
    return KKTReport(constants=consts, lower_violation=lower,
                     upper_violation=upper, plate_p_constant=plate_p_const,
                     plate_p_stationarity=plate_p_stat,
                     plate_p_level=plate_p_level, plate_p_excluded=excluded,
                     tol_kkt=tol.kkt, tol_potential=tol.potential,
                     kkt_pass=kkt_pass, plate_p_pass=plate_p_pass)


def mass_transfer_probe(result: SolveResult, spec: ProblemSpec, count: int = 50,
                        seed: int = 0, fraction: float = 1e-3) -> dict:
    """Random feasible single-pair mass transfers on the positive plates;
    at a minimizer no transfer may decrease the functional beyond first-order
    tolerance (delta G >= -tol * transferred mass)."""
    rng = np.random.default_rng(seed)
    tol = spec.tolerances
    sol = result.solution
    W = weighted_potentials(sol, spec)
    p = spec.p_index
    worst = math.inf
    trials = []
    for _ in range(count):
        j = int(rng.integers(0, p)) if p > 1 else 0
        comp = sol.components[j]
        caps = spec.constraint.cap_array(j, len(comp.nodes))
        margin = tol.free_margin_rel * spec.totals[j]
        donors = np.flatnonzero(comp.weights > margin)
        receivers = np.flatnonzero(comp.weights < caps - margin)
        if donors.size == 0 or receivers.size == 0:
            continue
        a = int(rng.choice(donors))
        b = int(rng.choice(receivers))
        if a == b:
            continue
        delta = min(comp.weights[a], caps[b] - comp.weights[b],
                    fraction * spec.totals[j])
        if delta <= 0:
            continue
        nodes = comp.nodes
        kaa = spec.kernel.self_energy(nodes.cell_radii[a])
        kbb = spec.kernel.self_energy(nodes.cell_radii[b])
        d = float(np.linalg.norm(nodes.positions[a] - nodes.positions[b]))
        kab = d ** (spec.kernel.alpha - spec.kernel.n) if d > 0 else kaa
        dG = 2.0 * delta * (W[j][b] - W[j][a]) + \
            delta * delta * (kaa + kbb - 2.0 * kab)
        trials.append(dG / delta)
        worst = min(worst, dG / delta)
    scale = max(1.0, float(np.abs(result.constants).max())
                if result.constants.size else 1.0)
    return {
        "trials": len(trials),
        "worst_rate": worst if trials else 0.0,
        "tolerance": tol.kkt * scale,
        "passed": (worst >= -tol.kkt * scale) if trials else True,
    }


@dataclass
class ZoneReport:
    c1: float
    identity_residual: float       # kappa(.,lambda) vs g(.,lambda+) at D probes
    level_residual: float          # kappa(.,lambda) vs c1 at cap-slack nodes
    bound_residual: float          # (kappa(.,lambda) - c1)+ over the probe grid
    support_failures: int          # xi-carried nodes with no lambda+ mass (alpha<2)
    off_support_margin: float      # min(c1 - kappa) over probes off the cap support
    off_support_probes: int
    probes_used: int
    probes_excluded: int
    tol: float
    checks: dict

    @property
    def overall_pass(self) -> bool:
        return all(self.checks.values())


def scalar_zone_checks(result: SolveResult, spec: ProblemSpec,
                       green: GreenContext, n_probes: int = 300,
                       seed: int = 0) -> ZoneReport:
    """Scalar-case structure checks (one positive plate, unit masses, no
    field): the Riesz potential of the signed solution equals the Green
    potential of its positive part inside the domain, sits at the constant
    c1 where the cap is slack, stays below c1 everywhere, and (for alpha < 2
    with a solid complement) the solution charges every cap-carried node.
    """
    if len(spec.condenser.plates) != 2 or spec.field.case != "zero" \
            or abs(spec.totals[0] - 1.0) > 0:
        raise WrongScenarioError(
            "zone checks need one positive plate, unit masses and no field")
    tol = spec.tolerances
    sol = result.solution
    if all(c.total_mass == 0.0 for c in sol.components):
        return ZoneReport(c1=0.0, identity_residual=math.inf,
                          level_residual=math.inf, bound_residual=math.inf,
                          support_failures=len(sol.components[0].weights),
                          off_support_margin=-math.inf, off_support_probes=0,
                          probes_used=0, probes_excluded=0,
                          tol=tol.potential,
                          checks={"identity": False, "level": False,
                                  "bound": False, "support": False})
    lam = resultant(sol, spec.condenser)
    rep = kkt_report(result, spec)
    c1 = float(rep.constants[0])
    norm = max(1.0, abs(c1))

    plate1 = spec.condenser.plates[0]
    plate_p = spec.condenser.plates[1]
    caps = spec.constraint.cap_array(0, len(plate1.nodes))
    w1 = sol.components[0].weights
    margin = tol.free_margin_rel * spec.totals[0]

    # (ii) potential at the constant on cap-slack nodes
    below = w1 < caps - margin
    pot_nodes = potential(lam, plate1.nodes.positions, spec.kernel)
    level_res = float(np.abs(pot_nodes[below] - c1).max()) / norm \
        if np.any(below) else 0.0

    # probe points inside D and across the truncated space
    rng = np.random.default_rng(seed)
    all_pos = np.vstack([p.nodes.positions for p in spec.condenser.plates])
    all_rad = np.concatenate([p.nodes.cell_radii for p in spec.condenser.plates])
    interior, excluded_i = _domain_probes(plate_p, n_probes, rng, all_pos,
                                          all_rad, tol.probe_exclusion_factor)
    # (i) Riesz potential of lambda vs Green potential of lambda+ inside D
    if interior.shape[0]:
        pot_in = potential(lam, interior, spec.kernel)
        gpot = green.green_potential(sol.components[0], interior)
        ident_res = float(np.abs(pot_in - gpot).max()) / norm
    else:
        ident_res = math.inf

    # (iii) global upper bound at nodes and at far probes
    far, excluded_f = _far_probes(plate_p, n_probes, rng, all_pos, all_rad,
                                  tol.probe_exclusion_factor)
    pot_all_nodes = [potential(lam, p.nodes.positions, spec.kernel)
                     for p in spec.condenser.plates]
    over = max(float((pn - c1).max()) for pn in pot_all_nodes)
    if far.shape[0]:
        over = max(over, float((potential(lam, far, spec.kernel) - c1).max()))
    bound_res = max(0.0, over) / norm

    # (iv) support identity and strict bound off the cap support (alpha < 2)
    supp_failures = 0
    off_margin = math.inf
    off_used = 0
    if spec.kernel.alpha < 2.0:
        floor = tol.supp_floor_rel * spec.totals[0] / len(plate1.nodes)
        carried_cap = caps > floor
        supp_failures = int(np.sum(carried_cap & (w1 <= floor)))
        off_nodes = np.flatnonzero(~carried_cap)
        if off_nodes.size:
            off_pot = pot_nodes[off_nodes]
            off_margin = float((c1 - off_pot).min()) / norm
            off_used = int(off_nodes.size)

    checks = {
        "identity": ident_res <= tol.potential,
        "level": level_res <= tol.potential,
        "bound": bound_res <= tol.potential,
        "support": (supp_failures == 0) and
                   (off_used == 0 or off_margin > tol.potential),
    }
    return ZoneReport(c1=c1, identity_residual=ident_res,
                      level_residual=level_res, bound_residual=bound_res,
                      support_failures=supp_failures,
                      off_support_margin=off_margin,
                      off_support_probes=off_used,
                      probes_used=int(interior.shape[0] + far.shape[0]),
                      probes_excluded=excluded_i + excluded_f,
                      tol=tol.potential, checks=checks)


def _exclude_near_atoms(pts, all_pos, all_rad, factor):
    keep = np.ones(pts.shape[0], dtype=bool)
    step = max(1, int(2e7) // max(1, all_pos.shape[0]))
    for s in range(0, pts.shape[0], step):
        d2 = np.sum((pts[s:s + step, None, :] - all_pos[None, :, :]) ** 2, axis=-1)
        lim = (factor * all_rad[None, :]) ** 2
        keep[s:s + step] = ~np.any(d2 < lim, axis=1)
    return keep


def _domain_probes(plate_p, n, rng, all_pos, all_rad, factor):
    """Random probes inside D (the complement of the negative plate)."""
    if plate_p.geometry_tag == "ball_complement":
        c = np.asarray(plate_p.params["center"], dtype=float)
        r = float(plate_p.params["radius"])
        u = rng.random(4 * n)
        dirs = rng.normal(size=(4 * n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = c + dirs * (0.95 * r * u[:, None] ** (1.0 / 3.0))
    elif plate_p.geometry_tag == "half_space":
        axis = int(plate_p.params.get("axis", 0))
        level = float(plate_p.params.get("level", 0.0))
        side = int(plate_p.params.get("side", -1))
        span = max(1.0, float(np.abs(all_pos).max()) / 4.0)
        pts = rng.uniform(-span, span, size=(4 * n, 3))
        pts[:, axis] = level - side * (0.05 + rng.random(4 * n) * span)
    else:
        raise WrongScenarioError(
            f"no probe generator for domain geometry {plate_p.geometry_tag!r}")
    keep = _exclude_near_atoms(pts, all_pos, all_rad, factor)
    return pts[keep][:n], int(np.sum(~keep))


def _far_probes(plate_p, n, rng, all_pos, all_rad, factor):
    """Log-radially spread probes over the truncated ambient space."""
    scale = max(2.0, float(np.abs(all_pos).max()))
    u = rng.random(4 * n)
    radii = np.exp(np.log(0.05 * scale) + u * (np.log(scale) - np.log(0.05 * scale)))
    dirs = rng.normal(size=(4 * n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = dirs * radii[:, None]
    keep = _exclude_near_atoms(pts, all_pos, all_rad, factor)
    return pts[keep][:n], int(np.sum(~keep))


@dataclass
class SupportReport:
    alpha: float
    boundary_fraction: Optional[float]   # alpha = 2: mass within one cell of dD
    layer_masses: Optional[np.ndarray]   # alpha < 2: mass per radial layer
    empty_layers: Optional[list]
    floor: float
    passed: bool


def support_report(result: SolveResult, spec: ProblemSpec) -> SupportReport:
    """Support layout of the negative component: boundary concentration for
    alpha = 2, presence in every radial layer for alpha < 2."""
    p = spec.p_index
    comp = result.solution.components[p]
    plate = spec.condenser.plates[p]
    total = comp.total_mass
    floor = spec.tolerances.supp_floor_rel * spec.totals[p] / max(len(comp.nodes), 1)
    if spec.kernel.alpha == 2.0:
        bdist = plate.boundary_distance(plate.nodes.positions)
        if bdist is None:
            frac = 1.0 if len(plate.nodes) == 1 else 0.0
        else:
            near = bdist <= plate.nodes.cell_radii
            frac = float(comp.weights[near].sum()) / total if total > 0 else 0.0
        return SupportReport(alpha=2.0, boundary_fraction=frac,
                             layer_masses=None, empty_layers=None,
                             floor=floor, passed=frac >= 0.99)
    layers = plate.nodes.layer_index
    uniq = np.unique(layers)
    masses = np.array([comp.weights[layers == L].sum() for L in uniq])
    peaks = np.array([comp.weights[layers == L].max() if np.any(layers == L)
                      else 0.0 for L in uniq])
    empty = [int(L) for L, pk in zip(uniq, peaks) if pk <= floor]
    return SupportReport(alpha=spec.kernel.alpha, boundary_fraction=None,
                         layer_masses=masses, empty_layers=empty, floor=floor,
                         passed=len(empty) == 0)


def equivalence_check(riesz_result: SolveResult, lifted_result: SolveResult,
                      spec: ProblemSpec,
                      green_result: Optional[SolveResult] = None) -> dict:
    """Energy agreement between the full Riesz solve and the (lifted) reduced
    Green solve, plus the energy-norm distance between the two solutions."""
    g_energy = green_result.energy if green_result is not None \
        else lifted_result.energy
    gap = abs(riesz_result.energy - g_energy) / max(abs(g_energy), 1.0)
    lift_gap = abs(riesz_result.energy - lifted_result.energy) / \
        max(abs(lifted_result.energy), 1.0)
    dist = semimetric_distance(riesz_result.solution, lifted_result.solution,
                               spec.condenser, spec.kernel)
    r = resultant(riesz_result.solution, spec.condenser)
    km = assemble_matrix(NodeSet(r.positions, np.ones(len(r)), r.cell_radii),
                         spec.kernel)
    scale = math.sqrt(max(float(r.weights @ km.entries @ r.weights), 1e-300))
    return {
        "energy_gap_rel": gap,
        "lift_energy_gap_rel": lift_gap,
        "semimetric_distance": dist,
        "semimetric_rel": dist / scale,
        "balayage_residual": lifted_result.balayage_residual,
        "lift_mass_defect": lifted_result.lift_mass_defect,
    }


def unsolvability_sweep(mode: str, stages: Sequence[int], green: GreenContext,
                        kernel: KernelSpec, *, nodes_per_stage: int = 220,
                        height: float = 1.0,
                        zeta: Optional[DiscreteMeasure] = None,
                        tolerances: Tolerances = DEFAULT_TOLERANCES) -> list:
    """Exhaustion sweeps behind the short-circuit results.

    mode="uncapped": stage compacts are nested disks of radius l at a fixed
    height above the grounded boundary; the minimized energy is the Green
    equilibrium energy 1/c_g, which decreases strictly toward zero as the
    disks exhaust an unbounded subset of the half-space.

    mode="capped": stage cap pieces are unit equilibrium measures on the
    same growing disks; the stage infimum is bounded by
    ||xi_l||_g^2 + 2 ||zeta||_g ||xi_l||_g, which decreases toward zero.
    """
    axis = 0
    rows = []
    if mode == "uncapped":
        for ell in stages:
            ctr = np.zeros(3)
            ctr[axis] = height
            nodes = disk_nodes(ctr, float(ell), nodes_per_stage, axis=axis)
            gk = green.green_matrix(nodes)[0]
            km = assemble_matrix(nodes, kernel)
            lam, _ = equilibrium_measure(
                nodes, kernel, 1.0, tolerances=tolerances,
                matrix=type(km)(entries=gk, diagonal_rule={"variant": "green"},
                                kernel=kernel))
            energy = float(lam.weights @ gk @ lam.weights)
            rows.append({"stage": int(ell), "energy": energy,
                         "green_capacity": 1.0 / energy})
    elif mode == "capped":
        if zeta is None:
            raise ValueError("capped sweep needs the field measure zeta")
        zeta_g = math.sqrt(max(green.green_mutual_energy(zeta, zeta), 0.0))
        for ell in stages:
            ctr = np.zeros(3)
            ctr[axis] = height
            nodes = disk_nodes(ctr, float(ell), nodes_per_stage, axis=axis)
            xi, _ = equilibrium_measure(nodes, kernel, 1.0, tolerances=tolerances)
            xi_g = math.sqrt(max(green.green_mutual_energy(xi, xi), 0.0))
            cross = green.green_mutual_energy(zeta, xi)
            stage_value = xi_g * xi_g + 2.0 * cross
            bound = xi_g * xi_g + 2.0 * zeta_g * xi_g
            rows.append({"stage": int(ell), "green_norm": xi_g,
                         "stage_value": stage_value, "bound": bound})
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    return rows


def loglog_slope(stages: Sequence[float], values: Sequence[float]) -> float:
    x = np.log(np.asarray(stages, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
