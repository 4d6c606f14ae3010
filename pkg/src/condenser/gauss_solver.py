"""Constrained Gauss-functional minimization for condensers: the full Riesz
problem on R^n, the reduced Green problem on the positive plates, the lift
between them, and the sigma variant with an explicit negative-plate cap."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._pg import minimize_quadratic, project_capped_simplex  # noqa: F401  (re-export)
from .balayage import GreenContext, balayage_project
from .errors import (AlignmentError, DuplicateNodeError, InfeasibleError,
                     SigmaDominationError)
from .kernel import ExternalField, KernelSpec, gauss_functional, _riesz_block
from .model import Condenser, DiscreteMeasure, NodeSet, VectorMeasure
from .tolerances import DEFAULT_TOLERANCES, Tolerances


@dataclass(frozen=True)
class Constraint:
    """Per-plate cap weights; ``None`` marks an unconstrained plate (xi = inf).

    Capped plates must satisfy sum(caps) > total strictly (constraint
    definition); the check happens in ProblemSpec where totals are known.
    """

    caps: tuple

    def __post_init__(self):
        object.__setattr__(self, "caps", tuple(
            None if c is None else np.asarray(c, dtype=float) for c in self.caps))
        for c in self.caps:
            if c is not None and (np.any(c < 0) or not np.all(np.isfinite(c))):
                raise ValueError("cap weights must be finite and >= 0")

    @classmethod
    def unbounded(cls, n_plates: int) -> "Constraint":
        return cls(tuple(None for _ in range(n_plates)))

    def cap_array(self, i: int, size: int) -> np.ndarray:
        c = self.caps[i]
        if c is None:
            return np.full(size, np.inf)
        if c.shape != (size,):
            raise AlignmentError(f"cap for plate {i} misaligned with its nodes")
        return c


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem statement: condenser, prescribed masses, field, caps.

    The unique negative plate is the last one; its mass equals the sum of the
    positive masses (enforced here).
    """

    condenser: Condenser
    totals: tuple
    field: ExternalField
    constraint: Constraint
    kernel: KernelSpec
    tolerances: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        object.__setattr__(self, "totals", tuple(float(a) for a in self.totals))
        plates = self.condenser.plates
        if len(self.totals) != len(plates):
            raise AlignmentError("one total per plate required")
        if any(a <= 0 for a in self.totals):
            raise ValueError("prescribed masses must be > 0")
        if len(self.constraint.caps) != len(plates):
            raise AlignmentError("one cap entry per plate required")
        signs = [p.sign for p in plates]
        if signs[-1] != -1 or any(s != +1 for s in signs[:-1]):
            raise ValueError("plate order must be positives first, the single "
                             "negative plate last")
        a_pos = sum(self.totals[:-1])
        if abs(self.totals[-1] - a_pos) > 1e-12 * max(1.0, a_pos):
            raise ValueError(
                f"negative-plate mass {self.totals[-1]} must equal the sum of "
                f"positive masses {a_pos}")
        for i, p in enumerate(plates):
            c = self.constraint.caps[i]
            if c is None:
                continue
            if c.shape != (len(p.nodes),):
                raise AlignmentError(f"cap for plate {i} misaligned")
            if c.sum() <= self.totals[i]:
                raise InfeasibleError(
                    f"plate {i}: cap total {c.sum():.6g} must strictly exceed "
                    f"the prescribed mass {self.totals[i]:.6g}")

    @property
    def i_plus(self) -> tuple:
        return tuple(range(len(self.condenser.plates) - 1))

    @property
    def p_index(self) -> int:
        return len(self.condenser.plates) - 1


@dataclass
class SolveResult:
    solution: VectorMeasure
    energy: float
    constants: np.ndarray
    trace: np.ndarray
    active_at_cap: list
    active_at_zero: list
    converged: bool
    kkt_residual: float
    iterations: int
    seed: Optional[int] = None
    lift_mass_defect: Optional[float] = None
    balayage_residual: Optional[float] = None

    def component_weights(self) -> list:
        return [c.weights for c in self.solution.components]


def joint_kernel_matrix(nodesets: Sequence[NodeSet], kernel: KernelSpec):
    """Dense kernel matrix over the concatenated node sets.

    Coinciding nodes across different sets (shared by equally signed plates)
    contribute their self-energy; duplicates inside one set are rejected.
    """
    sizes = [len(ns) for ns in nodesets]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    N = int(offsets[-1])
    K = np.empty((N, N))
    for i, a in enumerate(nodesets):
        for j, b in enumerate(nodesets):
            if j < i:
                continue
            blk = _riesz_block(a.positions, b.positions, kernel,
                               rho_q=b.cell_radii)
            if i == j:
                off = ~np.eye(sizes[i], dtype=bool)
                if sizes[i] > 1 and np.any(~np.isfinite(blk[off])):
                    raise DuplicateNodeError(f"plate node set {i} has duplicates")
            K[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = blk
            if j > i:
                K[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = blk.T
    slices = [slice(int(offsets[i]), int(offsets[i + 1]))
              for i in range(len(sizes))]
    return K, slices


def _frozen_caps_and_field(spec: ProblemSpec):
    """Per-node caps and linear field term with +inf-field nodes frozen to
    zero weight; feasibility is re-checked after freezing."""
    plates = spec.condenser.plates
    nodesets = [p.nodes for p in plates]
    signs = [p.sign for p in plates]
    fvals = spec.field.plate_values(nodesets, signs, spec.kernel)
    caps, bvals = [], []
    for i, p in enumerate(plates):
        c = spec.constraint.cap_array(i, len(p.nodes)).copy()
        f = np.asarray(fvals[i], dtype=float).copy()
        if p.sign > 0:
            frozen = np.isposinf(f)
            if np.any(frozen):
                c[frozen] = 0.0
                f[frozen] = 0.0
            finite_total = c.sum()
            if finite_total <= spec.totals[i]:
                raise InfeasibleError(
                    f"plate {i}: caps after freezing infinite-field nodes sum "
                    f"to {finite_total:.6g} <= mass {spec.totals[i]:.6g}")
        else:
            # no field acts on the negative plate (f_p = 0 nearly everywhere)
            f = np.zeros_like(f)
        caps.append(c)
        bvals.append(f)
    return np.concatenate(caps), np.concatenate(bvals)


def solve_riesz(spec: ProblemSpec, seed: Optional[int] = None) -> SolveResult:
    """Minimize the Gauss functional over capped vector measures with the
    prescribed per-plate masses (full Riesz formulation on R^n)."""
    tol = spec.tolerances
    plates = spec.condenser.plates
    nodesets = [p.nodes for p in plates]
    K, slices = joint_kernel_matrix(nodesets, spec.kernel)
    s = np.concatenate([np.full(len(p.nodes), float(p.sign)) for p in plates])
    A = K * np.outer(s, s)
    caps, b = _frozen_caps_and_field(spec)
    res = minimize_quadratic(
        A, b, slices, list(spec.totals), caps,
        tol_kkt=tol.kkt, tol_obj=tol.obj_rel, patience=tol.patience,
        max_iters=tol.max_iters, free_margin_rel=tol.free_margin_rel, seed=seed)
    weights = [res.w[sl] for sl in slices]
    solution = VectorMeasure.from_weights(spec.condenser, weights)
    energy = gauss_functional(solution, spec.field, spec.kernel)
    return SolveResult(solution=solution, energy=energy,
                       constants=res.constants[:-1], trace=res.trace,
                       active_at_cap=res.active_at_cap,
                       active_at_zero=res.active_at_zero,
                       converged=res.converged, kkt_residual=res.kkt_residual,
                       iterations=res.iterations, seed=seed)


def solve_green_reduced(spec: ProblemSpec, green: GreenContext,
                        seed: Optional[int] = None) -> SolveResult:
    """Minimize the reduced Green-kernel functional over the positive plates
    only; same convergence contract as the full solve."""
    tol = spec.tolerances
    plates = [spec.condenser.plates[i] for i in spec.i_plus]
    nodesets = [p.nodes for p in plates]
    merged = _merge_positive(nodesets)
    G, asym = green.green_matrix(merged)
    sizes = [len(ns) for ns in nodesets]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    idx = _merge_index(nodesets, merged)
    A = G[np.ix_(idx, idx)]
    slices = [slice(int(offsets[i]), int(offsets[i + 1]))
              for i in range(len(sizes))]
    fvals = spec.field.plate_values(nodesets, [1] * len(plates), spec.kernel)
    caps = np.concatenate([
        spec.constraint.cap_array(i, len(p.nodes)).copy()
        for i, p in zip(spec.i_plus, plates)])
    b = np.concatenate([np.where(np.isposinf(f), 0.0, f) for f in fvals])
    frozen = np.concatenate([np.isposinf(f) for f in fvals])
    caps[frozen] = 0.0
    totals = [spec.totals[i] for i in spec.i_plus]
    for j, sl in enumerate(slices):
        if caps[sl].sum() <= totals[j]:
            raise InfeasibleError(f"positive plate {j}: infeasible after freeze")
    res = minimize_quadratic(
        A, b, slices, totals, caps,
        tol_kkt=tol.kkt, tol_obj=tol.obj_rel, patience=tol.patience,
        max_iters=tol.max_iters, free_margin_rel=tol.free_margin_rel, seed=seed)
    comps = [DiscreteMeasure(p.nodes, res.w[sl], plate_id=p.id)
             for p, sl in zip(plates, slices)]
    solution = VectorMeasure(tuple(comps), tuple(1 for _ in plates))
    return SolveResult(solution=solution, energy=res.objective,
                       constants=res.constants, trace=res.trace,
                       active_at_cap=res.active_at_cap,
                       active_at_zero=res.active_at_zero,
                       converged=res.converged, kkt_residual=res.kkt_residual,
                       iterations=res.iterations, seed=seed)


def _merge_positive(nodesets: Sequence[NodeSet]) -> NodeSet:
    """Union of positive-plate nodes with exact duplicates merged."""
    seen: dict = {}
    pos, qw, cr = [], [], []
    for ns in nodesets:
        for k in range(len(ns)):
            key = ns.positions[k].tobytes()
            if key not in seen:
                seen[key] = len(pos)
                pos.append(ns.positions[k])
                qw.append(ns.quad_weights[k])
                cr.append(ns.cell_radii[k])
    return NodeSet(np.array(pos), np.array(qw), np.array(cr))


def _merge_index(nodesets: Sequence[NodeSet], merged: NodeSet) -> np.ndarray:
    lookup = {merged.positions[k].tobytes(): k for k in range(len(merged))}
    idx = []
    for ns in nodesets:
        for k in range(len(ns)):
            idx.append(lookup[ns.positions[k].tobytes()])
    return np.array(idx, dtype=int)


def lift_green_to_riesz(green_result: SolveResult, spec: ProblemSpec,
                        green: GreenContext) -> SolveResult:
    """Extend a reduced Green solution to the full condenser by sweeping the
    total positive measure onto the negative plate's nodes.

    The swept mass is reported, not renormalized: its defect against a_p
    measures the truncation quality (mass conservation holds only for
    complements that are not thin at infinity).
    """
    plate_p = spec.condenser.plates[spec.p_index]
    if not np.array_equal(green.exterior.positions, plate_p.nodes.positions):
        raise AlignmentError(
            "green context exterior must be the negative plate's node set")
    comps = list(green_result.solution.components)
    merged = _merge_positive([c.nodes for c in comps])
    weights = np.zeros(len(merged))
    lookup = {merged.positions[k].tobytes(): k for k in range(len(merged))}
    for c in comps:
        for k in range(len(c.nodes)):
            weights[lookup[c.nodes.positions[k].tobytes()]] += c.weights[k]
    total_pos = DiscreteMeasure(merged, weights)
    bres = balayage_project(total_pos, green, spec.kernel, spec.tolerances)
    comps_full = comps + [DiscreteMeasure(plate_p.nodes, bres.swept.weights,
                                          plate_id=plate_p.id)]
    solution = VectorMeasure(tuple(comps_full), spec.condenser.signs)
    energy = gauss_functional(solution, spec.field, spec.kernel)
    defect = abs(bres.swept.total_mass - spec.totals[spec.p_index])
    return SolveResult(solution=solution, energy=energy,
                       constants=green_result.constants,
                       trace=green_result.trace,
                       active_at_cap=green_result.active_at_cap,
                       active_at_zero=green_result.active_at_zero,
                       converged=green_result.converged,
                       kkt_residual=green_result.kkt_residual,
                       iterations=green_result.iterations,
                       seed=green_result.seed,
                       lift_mass_defect=defect,
                       balayage_residual=bres.potential_residual)


def swept_positive_caps(spec: ProblemSpec, green: GreenContext) -> np.ndarray:
    """Balayage of the total positive cap onto the negative plate's nodes;
    the reference measure for sigma-variant domination checks."""
    plates = [spec.condenser.plates[i] for i in spec.i_plus]
    merged = _merge_positive([p.nodes for p in plates])
    weights = np.zeros(len(merged))
    lookup = {merged.positions[k].tobytes(): k for k in range(len(merged))}
    for i, p in zip(spec.i_plus, plates):
        cap = spec.constraint.cap_array(i, len(p.nodes))
        if np.any(np.isinf(cap)):
            raise ValueError("sigma variant needs finite positive-plate caps")
        for k in range(len(p.nodes)):
            weights[lookup[p.nodes.positions[k].tobytes()]] += cap[k]
    res = balayage_project(DiscreteMeasure(merged, weights), green, spec.kernel,
                           spec.tolerances)
    return res.swept.weights


def solve_sigma_variant(spec: ProblemSpec, green: GreenContext,
                        seed: Optional[int] = None) -> SolveResult:
    """Solve with the negative plate explicitly capped by sigma^p.

    Requires sigma^p to dominate, node by node, the sweep of the total
    positive cap onto the negative plate (checked by computing that sweep).
    """
    sigma_p = spec.constraint.caps[spec.p_index]
    if sigma_p is None:
        raise ValueError("sigma variant needs an explicit negative-plate cap")
    swept = swept_positive_caps(spec, green)
    slack = 1e-10 * max(float(swept.max()), 1.0)
    if np.any(sigma_p < swept - slack):
        worst = float((swept - sigma_p).max())
        raise SigmaDominationError(
            f"sigma^p fails to dominate the swept positive caps "
            f"(worst shortfall {worst:.3e})")
    return solve_riesz(spec, seed=seed)
