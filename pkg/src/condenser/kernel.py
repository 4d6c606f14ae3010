"""Kernel evaluation, matrix assembly, energies/potentials, the Gauss
functional, and equilibrium measures / capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._pg import minimize_quadratic
from .errors import DuplicateNodeError, SolverDivergence, UnsupportedKernel
from .model import (DiscreteMeasure, GreenVariant, KernelSpec, NodeSet,
                    SignedMeasure, VectorMeasure)
from .tolerances import DEFAULT_TOLERANCES, Tolerances

# Registry of Green domains; balayage.GreenContext registers itself here so
# that Green-variant kernels can be assembled without a module cycle.
_GREEN_DOMAINS: dict = {}


def register_green_domain(domain_id: str, ctx) -> None:
    _GREEN_DOMAINS[domain_id] = ctx


def green_domain(domain_id: str):
    try:
        return _GREEN_DOMAINS[domain_id]
    except KeyError:
        raise UnsupportedKernel(
            f"Green domain {domain_id!r} is not registered") from None


@dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric kernel matrix over a node set, diagonal set by the
    self-energy rule (recorded in ``diagonal_rule``)."""

    entries: np.ndarray
    diagonal_rule: dict
    kernel: KernelSpec

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def riesz_eval(x, y, kernel: KernelSpec) -> float:
    """Riesz kernel |x-y|^(alpha-n); +inf on the diagonal."""
    if not kernel.is_riesz:
        raise UnsupportedKernel("riesz_eval requires the Riesz variant")
    d = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if d == 0.0:
        return math.inf
    return d ** (kernel.alpha - kernel.n)


def _riesz_block(P: np.ndarray, Q: np.ndarray, kernel: KernelSpec,
                 rho_q: Optional[np.ndarray] = None) -> np.ndarray:
    """Kernel values between two point arrays.  Exactly coinciding pairs get
    the self-energy value of the second array's cell (or +inf without radii)."""
    diff = P[:, None, :] - Q[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    expo = 0.5 * (kernel.alpha - kernel.n)
    with np.errstate(divide="ignore"):
        K = d2 ** expo
    hits = d2 == 0.0
    if np.any(hits):
        if rho_q is None:
            K[hits] = math.inf
        else:
            se = np.broadcast_to(kernel.self_energy(rho_q), (P.shape[0], Q.shape[0]))
            K[hits] = se[hits]
    return K


def assemble_matrix(nodes: NodeSet, kernel: KernelSpec,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> KernelMatrix:
    """Dense kernel matrix on pairwise-distinct nodes.

    Riesz: off-diagonal by riesz_eval, diagonal per the self-energy rule.
    Green: Schur-complement construction supplied by the registered domain,
    symmetrized with the asymmetry recorded.
    """
    m = len(nodes)
    if isinstance(kernel.variant, GreenVariant):
        ctx = green_domain(kernel.variant.domain_id)
        entries, asym = ctx.green_matrix(nodes)
        rule = {"rule": kernel.self_energy_rule, "variant": "green",
                "asymmetry": asym}
        return KernelMatrix(entries=entries, diagonal_rule=rule, kernel=kernel)
    P = nodes.positions
    diff = P[:, None, :] - P[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    off = ~np.eye(m, dtype=bool)
    if np.any(d2[off] == 0.0):
        raise DuplicateNodeError("coinciding nodes in matrix assembly")
    expo = 0.5 * (kernel.alpha - kernel.n)
    with np.errstate(divide="ignore"):
        K = d2 ** expo
    diag = kernel.self_energy(nodes.cell_radii)
    K[np.diag_indices(m)] = diag
    rule = {"rule": kernel.self_energy_rule, "variant": "riesz",
            "diagonal": np.asarray(diag, dtype=float)}
    return KernelMatrix(entries=K, diagonal_rule=rule, kernel=kernel)


def _atoms_of(mu) -> tuple:
    """(positions, weights, cell_radii) of a measure."""
    if isinstance(mu, DiscreteMeasure):
        return mu.nodes.positions, mu.weights, mu.nodes.cell_radii
    if isinstance(mu, SignedMeasure):
        return mu.positions, mu.weights, mu.cell_radii
    raise TypeError(f"unsupported measure type {type(mu).__name__}")


def potential(mu, points, kernel: KernelSpec) -> np.ndarray:
    """kappa(x, mu) at each query point; a query coinciding with an atom uses
    the self-energy rule for that atom's contribution."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(kernel.variant, GreenVariant):
        ctx = green_domain(kernel.variant.domain_id)
        return ctx.green_potential(mu, pts)
    pos, w, rho = _atoms_of(mu)
    if pos.shape[0] == 0:
        return np.zeros(pts.shape[0])
    out = np.empty(pts.shape[0])
    step = max(1, int(4e6) // max(1, pos.shape[0]))
    for s in range(0, pts.shape[0], step):
        K = _riesz_block(pts[s:s + step], pos, kernel, rho_q=rho)
        out[s:s + step] = K @ w
    return out


def mutual_energy(mu, nu, kernel: KernelSpec) -> float:
    """Mutual energy kappa(mu, nu); coinciding atom pairs contribute through
    the self-energy rule.  Vector measures use the sign matrix s_i s_j."""
    if isinstance(mu, VectorMeasure) or isinstance(nu, VectorMeasure):
        if not (isinstance(mu, VectorMeasure) and isinstance(nu, VectorMeasure)):
            raise TypeError("mix of vector and scalar measures")
        total = 0.0
        for si, ci in zip(mu.signs, mu.components):
            for sj, cj in zip(nu.signs, nu.components):
                total += si * sj * mutual_energy(ci, cj, kernel)
        return total
    if isinstance(kernel.variant, GreenVariant):
        ctx = green_domain(kernel.variant.domain_id)
        return ctx.green_mutual_energy(mu, nu)
    pa, wa, _ = _atoms_of(mu)
    pb, wb, rb = _atoms_of(nu)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        return 0.0
    total = 0.0
    step = max(1, int(4e6) // max(1, pb.shape[0]))
    for s in range(0, pa.shape[0], step):
        K = _riesz_block(pa[s:s + step], pb, kernel, rho_q=rb)
        total += float(wa[s:s + step] @ K @ wb)
    return total


def vector_potential(mu: VectorMeasure, i: int, points, kernel: KernelSpec) -> np.ndarray:
    """Component i of the vector potential: sum_j s_i s_j kappa(x, mu^j)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(pts.shape[0])
    si = mu.signs[i]
    for sj, comp in zip(mu.signs, mu.components):
        out += si * sj * potential(comp, pts, kernel)
    return out


@dataclass(frozen=True)
class ExternalField:
    """External field acting on the plates.

    Case I stores node-sampled values per plate, finite or +inf, with the
    negative-plate values identically zero.  Case II derives values from an
    extendible measure zeta and its sweep zeta' onto the domain complement:
    f_i = s_i * (kappa(., zeta) - kappa(., zeta')).
    """

    case: str  # "zero" | "case1" | "case2"
    values: Optional[tuple] = None
    zeta: Optional[DiscreteMeasure] = None
    zeta_swept: Optional[DiscreteMeasure] = None

    @staticmethod
    def zero() -> "ExternalField":
        return ExternalField(case="zero")

    @staticmethod
    def case1(values: Sequence[np.ndarray], signs: Sequence[int]) -> "ExternalField":
        vals = tuple(np.asarray(v, dtype=float) for v in values)
        for v, s in zip(vals, signs):
            if np.any(np.isneginf(v)) or np.any(np.isnan(v)):
                raise ValueError("Case I field values must be > -inf")
            if s < 0 and np.any(v != 0.0):
                raise ValueError("Case I field must vanish on negative plates")
        return ExternalField(case="case1", values=vals)

    @staticmethod
    def case2(zeta: DiscreteMeasure, zeta_swept: DiscreteMeasure) -> "ExternalField":
        return ExternalField(case="case2", zeta=zeta, zeta_swept=zeta_swept)

    def plate_values(self, nodesets: Sequence[NodeSet], signs: Sequence[int],
                     kernel: KernelSpec) -> list:
        """Field values at every node of every plate, in plate order."""
        if self.case == "zero":
            return [np.zeros(len(ns)) for ns in nodesets]
        if self.case == "case1":
            if len(self.values) != len(nodesets):
                raise ValueError("one value array per plate required")
            out = []
            for v, ns in zip(self.values, nodesets):
                if v.shape != (len(ns),):
                    raise ValueError("field values misaligned with plate nodes")
                out.append(v)
            return out
        base = kernel if kernel.is_riesz else KernelSpec(
            kernel.n, kernel.alpha, "riesz", kernel.self_energy_rule)
        out = []
        for ns, s in zip(nodesets, signs):
            vals = potential(self.zeta, ns.positions, base) \
                - potential(self.zeta_swept, ns.positions, base)
            out.append(s * vals)
        return out


def gauss_functional(mu: VectorMeasure, field: ExternalField,
                     kernel: KernelSpec) -> float:
    """Weighted energy G = kappa(mu, mu) + 2 sum_i <f_i, mu^i>.

    Returns +inf when positive weight sits on a node with infinite field.
    """
    nodesets = [c.nodes for c in mu.components]
    fvals = field.plate_values(nodesets, mu.signs, kernel)
    linear = 0.0
    for f, comp in zip(fvals, mu.components):
        carried = comp.weights > 0
        if np.any(np.isposinf(f[carried])):
            return math.inf
        finite = np.isfinite(f)
        linear += float(f[finite] @ comp.weights[finite])
    return mutual_energy(mu, mu, kernel) + 2.0 * linear


def equilibrium_measure(nodes: NodeSet, kernel: KernelSpec, total: float = 1.0,
                        tolerances: Tolerances = DEFAULT_TOLERANCES,
                        matrix: Optional[KernelMatrix] = None):
    """Minimizer of kappa(mu, mu) over nonnegative weights of fixed total mass,
    and the capacity total^2 / kappa(lambda, lambda).

    The minimizing potential is constant on the carried nodes up to the
    solver's KKT tolerance.
    """
    if total <= 0:
        raise ValueError("total mass must be > 0")
    km = matrix if matrix is not None else assemble_matrix(nodes, kernel)
    m = km.size
    res = minimize_quadratic(
        km.entries, None, [slice(0, m)], [total], np.full(m, np.inf),
        tol_kkt=tolerances.kkt, tol_obj=tolerances.obj_rel,
        patience=tolerances.patience, max_iters=tolerances.max_iters,
        free_margin_rel=tolerances.free_margin_rel, record_trace=False)
    if not res.converged:
        raise SolverDivergence(
            f"equilibrium solve stalled at KKT residual {res.kkt_residual:.3e}")
    energy = res.objective
    capacity = total * total / energy if energy > 0 else math.inf
    return DiscreteMeasure(nodes, res.w), capacity
