"""Domain types for discretized condensers and the vector measures living on them.

Plates are node clouds with quadrature weights; oppositely signed plates must be
pointwise disjoint, although their closures may touch (the minimum distance is
allowed to shrink with resolution).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import AlignmentError, EmptyPlateError, ZeroSeparationError

GEOMETRY_TAGS = ("ball", "ball_complement", "half_space", "disk", "explicit_cloud")

# Cell-radius calibration.  The CellBall diagonal rule evaluates the mean of
# the kernel over a ball of radius cell_radius, so cell_radius sets each
# cell's self-energy.  Surface cells use the radius that reproduces the true
# self-energy (double mean) of an equal-area flat cell at alpha=2, n=3:
# 1.5 * sqrt(A/pi) / E|X-Y|^-1_disk = (9 pi/32) sqrt(A/pi).  Volume cells use
# the half-width of the cell; together with the nearest-neighbor trim below
# this keeps the effective cells pairwise disjoint, which makes assembled
# kernel matrices positive definite (Gram matrix of disjoint uniform balls
# plus a positive diagonal excess).
SURFACE_CELL_RADIUS_FACTOR = 0.4985026456  # x sqrt(cell area)
VOLUME_CELL_RADIUS_FACTOR = 0.49  # x cell spacing
# effective cells are trimmed so rho_i <= NEIGHBOR_TRIM * (nearest-neighbor
# distance); any pair then satisfies rho_i + rho_j < d_ij
NEIGHBOR_TRIM = 0.49


@dataclass(frozen=True)
class GreenVariant:
    """Green-kernel marker; ``domain_id`` must be registered before use."""

    domain_id: str


@dataclass(frozen=True)
class KernelSpec:
    """Kernel selector: Riesz |x-y|^(alpha-n) on R^n, or the Green kernel on a
    registered domain.

    ``self_energy_rule`` fixes the kernel-matrix diagonal: ``cell_ball`` uses
    the analytic mean of the kernel over a ball of radius cell_radius;
    ``excluded`` drops self-interaction entirely (algebraic tests only).
    """

    n: int
    alpha: float
    variant: "str | GreenVariant" = "riesz"
    self_energy_rule: str = "cell_ball"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"dimension must be >= 3, got {self.n}")
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if isinstance(self.variant, str) and self.variant != "riesz":
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.self_energy_rule not in ("cell_ball", "excluded"):
            raise ValueError(f"unknown self-energy rule {self.self_energy_rule!r}")

    @property
    def is_riesz(self) -> bool:
        return self.variant == "riesz"

    def self_energy(self, cell_radius: np.ndarray | float) -> np.ndarray | float:
        """Diagonal value per the self-energy rule.

        CellBall: mean of |x|^(alpha-n) over a ball of radius rho is
        (n/alpha) * rho^(alpha-n), finite for alpha > 0.
        """
        if self.self_energy_rule == "excluded":
            return np.zeros_like(np.asarray(cell_radius, dtype=float))
        rho = np.asarray(cell_radius, dtype=float)
        return (self.n / self.alpha) * rho ** (self.alpha - self.n)


@dataclass(frozen=True)
class Node:
    """Single discretization node: position, local quadrature weight, and the
    effective cell half-width used by the self-energy rule."""

    position: tuple
    quad_weight: float
    cell_radius: float

    def __post_init__(self):
        if not self.quad_weight > 0:
            raise ValueError("quad_weight must be > 0")
        if not self.cell_radius > 0:
            raise ValueError("cell_radius must be > 0")


class NodeSet:
    """Columnar storage for a list of nodes (positions, weights, cell radii).

    ``layer_index`` records which construction layer/shell a node came from
    (0 = boundary layer); support diagnostics group by it.
    """

    __slots__ = ("positions", "quad_weights", "cell_radii", "layer_index")

    def __init__(self, positions, quad_weights, cell_radii, layer_index=None):
        self.positions = np.ascontiguousarray(positions, dtype=float)
        self.quad_weights = np.ascontiguousarray(quad_weights, dtype=float)
        self.cell_radii = np.ascontiguousarray(cell_radii, dtype=float)
        if self.positions.ndim != 2:
            raise ValueError("positions must be (m, n)")
        m = self.positions.shape[0]
        if self.quad_weights.shape != (m,) or self.cell_radii.shape != (m,):
            raise ValueError("weights/radii must match node count")
        if m and (np.any(self.quad_weights <= 0) or np.any(self.cell_radii <= 0)):
            raise ValueError("quad_weights and cell_radii must be > 0")
        if layer_index is None:
            layer_index = np.zeros(m, dtype=int)
        self.layer_index = np.ascontiguousarray(layer_index, dtype=int)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def node(self, i: int) -> Node:
        return Node(tuple(self.positions[i]), float(self.quad_weights[i]),
                    float(self.cell_radii[i]))

    @property
    def nodes(self) -> list:
        return [self.node(i) for i in range(len(self))]

    @classmethod
    def from_nodes(cls, nodes: Sequence[Node]) -> "NodeSet":
        pos = np.array([n.position for n in nodes], dtype=float)
        return cls(pos, [n.quad_weight for n in nodes], [n.cell_radius for n in nodes])

    def subset(self, idx) -> "NodeSet":
        return NodeSet(self.positions[idx], self.quad_weights[idx],
                       self.cell_radii[idx], self.layer_index[idx])


@dataclass(frozen=True)
class Plate:
    """One signed plate of a condenser."""

    id: int
    sign: int
    nodes: NodeSet
    geometry_tag: str = "explicit_cloud"
    params: dict = field(default_factory=dict)
    truncation: Optional[float] = None

    def __post_init__(self):
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.geometry_tag not in GEOMETRY_TAGS:
            raise ValueError(f"unknown geometry tag {self.geometry_tag!r}")
        if len(self.nodes) == 0:
            raise EmptyPlateError(f"plate {self.id} has no nodes")

    def boundary_distance(self, positions: np.ndarray) -> Optional[np.ndarray]:
        """Distance to the plate's geometric boundary surface, where defined.

        For ``ball``/``ball_complement`` the boundary is the sphere, for
        ``half_space`` the bounding hyperplane.  Returns None for geometries
        without a canonical boundary (clouds, disks).
        """
        pos = np.asarray(positions, dtype=float)
        if self.geometry_tag in ("ball", "ball_complement"):
            center = np.asarray(self.params["center"], dtype=float)
            r = float(self.params["radius"])
            return np.abs(np.linalg.norm(pos - center, axis=-1) - r)
        if self.geometry_tag == "half_space":
            axis = int(self.params.get("axis", 0))
            level = float(self.params.get("level", 0.0))
            return np.abs(pos[..., axis] - level)
        return None


@dataclass(frozen=True)
class Condenser:
    """Ordered plates with prescribed signs; oppositely signed node sets are
    pointwise disjoint (closures may touch)."""

    plates: tuple

    def __post_init__(self):
        object.__setattr__(self, "plates", tuple(self.plates))
        if not self.plates:
            raise ValueError("condenser needs at least one plate")
        dims = {p.nodes.dim for p in self.plates}
        if len(dims) != 1:
            raise ValueError("plates live in different dimensions")
        pos_idx = [i for i, p in enumerate(self.plates) if p.sign > 0]
        neg_idx = [i for i, p in enumerate(self.plates) if p.sign < 0]
        if pos_idx and neg_idx:
            pos = np.vstack([self.plates[i].nodes.positions for i in pos_idx])
            neg = np.vstack([self.plates[i].nodes.positions for i in neg_idx])
            if _min_cross_distance(pos, neg) <= 0.0:
                raise ZeroSeparationError(
                    "a positive node coincides with a negative node")

    @property
    def i_plus(self) -> tuple:
        return tuple(i for i, p in enumerate(self.plates) if p.sign > 0)

    @property
    def i_minus(self) -> tuple:
        return tuple(i for i, p in enumerate(self.plates) if p.sign < 0)

    @property
    def signs(self) -> tuple:
        return tuple(p.sign for p in self.plates)

    @property
    def dim(self) -> int:
        return self.plates[0].nodes.dim

    def plate(self, i: int) -> Plate:
        return self.plates[i]


def _min_cross_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Minimum pairwise distance between two point clouds, blocked to bound memory."""
    best = np.inf
    step = max(1, int(2e7) // max(1, b.shape[0]))
    for start in range(0, a.shape[0], step):
        blk = a[start:start + step]
        d2 = np.sum((blk[:, None, :] - b[None, :, :]) ** 2, axis=-1)
        best = min(best, float(d2.min()))
    return math.sqrt(max(best, 0.0))


def _nearest_neighbor_distances(pos: np.ndarray, other: Optional[np.ndarray] = None
                                ) -> np.ndarray:
    """Per-point distance to the nearest distinct point (zero distances are
    ignored: shared nodes of equally signed plates are the same cell)."""
    m = pos.shape[0]
    ref = pos if other is None else other
    out = np.full(m, np.inf)
    step = max(1, int(2e7) // max(1, ref.shape[0]))
    for start in range(0, m, step):
        blk = pos[start:start + step]
        d2 = np.sum((blk[:, None, :] - ref[None, :, :]) ** 2, axis=-1)
        d2[d2 == 0.0] = np.inf
        out[start:start + step] = np.sqrt(d2.min(axis=1))
    return out


def trim_cell_radii(nodes: NodeSet, beta: float = NEIGHBOR_TRIM) -> NodeSet:
    """Cap cell radii at beta x nearest-neighbor distance so effective cells
    stay pairwise disjoint."""
    if len(nodes) < 2:
        return nodes
    dnn = _nearest_neighbor_distances(nodes.positions)
    capped = np.minimum(nodes.cell_radii, beta * dnn)
    return NodeSet(nodes.positions, nodes.quad_weights, capped, nodes.layer_index)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative atomic measure carried by a node set."""

    nodes: NodeSet
    weights: np.ndarray
    plate_id: Optional[int] = None

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (len(self.nodes),):
            raise AlignmentError("weights length does not match node count")
        if w.size and (np.any(w < 0) or not np.all(np.isfinite(w))):
            raise ValueError("weights must be finite and >= 0")

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.nodes, self.weights * factor, self.plate_id)


@dataclass(frozen=True)
class VectorMeasure:
    """One nonnegative component per plate, in plate order."""

    components: tuple
    signs: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.components) != len(self.signs):
            raise AlignmentError("one sign per component required")

    @classmethod
    def from_weights(cls, condenser: Condenser, weights: Sequence[np.ndarray]) -> "VectorMeasure":
        if len(weights) != len(condenser.plates):
            raise AlignmentError(
                f"expected {len(condenser.plates)} components, got {len(weights)}")
        comps = []
        for plate, w in zip(condenser.plates, weights):
            comps.append(DiscreteMeasure(plate.nodes, np.asarray(w, dtype=float),
                                         plate_id=plate.id))
        return cls(tuple(comps), condenser.signs)

    @classmethod
    def zero(cls, condenser: Condenser) -> "VectorMeasure":
        return cls.from_weights(
            condenser, [np.zeros(len(p.nodes)) for p in condenser.plates])

    def component(self, i: int) -> DiscreteMeasure:
        return self.components[i]

    def aligned_with(self, other: "VectorMeasure") -> bool:
        if len(self.components) != len(other.components) or self.signs != other.signs:
            return False
        return all(a.nodes is b.nodes or
                   (len(a.nodes) == len(b.nodes)
                    and np.array_equal(a.nodes.positions, b.nodes.positions))
                   for a, b in zip(self.components, other.components))


@dataclass(frozen=True)
class SignedMeasure:
    """Signed atomic measure; positive part carried by positive-plate nodes,
    negative part by negative-plate nodes."""

    positions: np.ndarray
    weights: np.ndarray
    cell_radii: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "positions",
                           np.ascontiguousarray(self.positions, dtype=float))
        object.__setattr__(self, "weights",
                           np.ascontiguousarray(self.weights, dtype=float))
        object.__setattr__(self, "cell_radii",
                           np.ascontiguousarray(self.cell_radii, dtype=float))

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def resultant(mu: VectorMeasure, condenser: Condenser) -> SignedMeasure:
    """Signed scalar measure sum_i s_i mu^i; shared nodes of equally signed
    plates are merged (exact position match), zero atoms dropped."""
    if len(mu.components) != len(condenser.plates):
        raise AlignmentError(
            f"measure has {len(mu.components)} components, condenser has "
            f"{len(condenser.plates)} plates")
    index: dict = {}
    positions = []
    weights = []
    radii = []
    provenance = []
    for plate, comp, sign in zip(condenser.plates, mu.components, condenser.signs):
        if len(comp.weights) != len(plate.nodes):
            raise AlignmentError(f"component for plate {plate.id} misaligned")
        pos = comp.nodes.positions
        for k in range(len(comp.weights)):
            w = sign * comp.weights[k]
            if w == 0.0:
                continue
            key = pos[k].tobytes()
            j = index.get(key)
            if j is None:
                index[key] = len(positions)
                positions.append(pos[k])
                weights.append(w)
                radii.append(comp.nodes.cell_radii[k])
            else:
                weights[j] += w
        provenance.append(plate.id)
    if not positions:
        dim = condenser.dim
        return SignedMeasure(np.zeros((0, dim)), np.zeros(0), np.zeros(0),
                             tuple(provenance))
    positions = np.array(positions)
    weights = np.array(weights)
    radii = np.array(radii)
    keep = weights != 0.0
    return SignedMeasure(positions[keep], weights[keep], radii[keep],
                         tuple(provenance))


def semimetric_distance(mu: VectorMeasure, nu: VectorMeasure,
                        condenser: Condenser, kernel: KernelSpec) -> float:
    """Energy-norm distance ||R mu - R nu||_kappa.

    Computed on the merged atom set of the two resultants; equals the
    sign-matrix expansion over components up to floating error.
    """
    from . import kernel as _kernel  # deferred: kernel module builds matrices

    if not mu.aligned_with(nu):
        raise AlignmentError("measures live on different condensers")
    rmu = resultant(mu, condenser)
    rnu = resultant(nu, condenser)
    index: dict = {}
    positions = []
    radii = []
    delta = []
    for sm, s in ((rmu, 1.0), (rnu, -1.0)):
        for k in range(len(sm)):
            key = sm.positions[k].tobytes()
            j = index.get(key)
            if j is None:
                index[key] = len(positions)
                positions.append(sm.positions[k])
                radii.append(sm.cell_radii[k])
                delta.append(s * sm.weights[k])
            else:
                delta[j] += s * sm.weights[k]
    if not positions:
        return 0.0
    positions = np.array(positions)
    radii = np.array(radii)
    delta = np.array(delta)
    keep = delta != 0.0
    if not np.any(keep):
        return 0.0
    nodes = NodeSet(positions[keep], np.ones(int(keep.sum())), radii[keep])
    km = _kernel.assemble_matrix(nodes, kernel)
    d = delta[keep]
    return math.sqrt(max(float(d @ km.entries @ d), 0.0))


# ---------------------------------------------------------------------------
# Geometry layouts
# ---------------------------------------------------------------------------

def ball_volume_nodes(center, radius, h, n=3, layer=0):
    """Cubic grid of spacing h restricted to the open ball; cell weight h^n."""
    center = np.asarray(center, dtype=float)
    if radius <= 0 or h <= 0:
        return NodeSet(np.zeros((0, n)), np.zeros(0), np.zeros(0))
    k = int(math.floor(radius / h + 0.5))
    axes = [h * (np.arange(-k, k + 1)) for _ in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    keep = np.linalg.norm(grid, axis=1) < radius
    pts = grid[keep] + center
    m = pts.shape[0]
    if m == 0:
        return NodeSet(np.zeros((0, n)), np.zeros(0), np.zeros(0))
    w = np.full(m, h ** n)
    rho = np.full(m, VOLUME_CELL_RADIUS_FACTOR * h)
    return NodeSet(pts, w, rho, np.full(m, layer, dtype=int))


def sphere_surface_nodes(center, radius, count, *, layer=0, phase=0.0, thickness=None):
    """Equal-area spiral-lattice layout on a sphere in R^3.

    One node per equal-height latitude slice (area exactly 4*pi*r^2/count),
    longitudes advanced by the golden angle: locally near-isotropic cells
    without band artifacts.  With ``thickness`` given, weights become volumes
    (area x thickness) and cell radii switch to the volume calibration.
    """
    if count < 1 or radius <= 0:
        return NodeSet(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    center = np.asarray(center, dtype=float)
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    ang = phase + i * math.pi * (3.0 - math.sqrt(5.0))
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    pts = np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=1)
    pts = pts * radius + center
    m = pts.shape[0]
    area = 4.0 * math.pi * radius ** 2 / count
    if thickness is None:
        w = np.full(m, area)
        rho_c = np.full(m, SURFACE_CELL_RADIUS_FACTOR * math.sqrt(area))
    else:
        w = np.full(m, area * thickness)
        rho_c = np.full(m, VOLUME_CELL_RADIUS_FACTOR * min(math.sqrt(area), thickness))
    return NodeSet(pts, w, rho_c, np.full(m, layer, dtype=int))


def disk_nodes(center, radius, count, axis=0, *, layer=0, phase=0.0):
    """Equal-area spiral (sunflower) layout on a flat disk in R^3, normal to
    ``axis``: node i at radius r*sqrt((i+1/2)/count), golden-angle longitude."""
    if count < 1 or radius <= 0:
        return NodeSet(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    center = np.asarray(center, dtype=float)
    i = np.arange(count)
    rr = radius * np.sqrt((i + 0.5) / count)
    ang = phase + i * math.pi * (3.0 - math.sqrt(5.0))
    u, v = [a for a in range(3) if a != axis]
    pts = np.zeros((count, 3))
    pts[:, u] = rr * np.cos(ang)
    pts[:, v] = rr * np.sin(ang)
    pts = pts + center
    cell_area = math.pi * radius ** 2 / count
    w = np.full(count, cell_area)
    rho_c = np.full(count, SURFACE_CELL_RADIUS_FACTOR * math.sqrt(cell_area))
    return NodeSet(pts, w, rho_c, np.full(count, layer, dtype=int))


def _geometric_edges(start: float, stop: float, growth: float) -> np.ndarray:
    """Geometric partition of [start, stop]; a trailing fragment shorter than
    half a full step is merged into the previous interval instead of forming
    a thin sliver."""
    edges = [float(start)]
    while edges[-1] * growth < stop:
        edges.append(edges[-1] * growth)
    if len(edges) > 1 and stop / edges[-1] < math.sqrt(growth):
        edges[-1] = stop
    else:
        edges.append(stop)
    return np.array(edges)


def graded_plane_nodes(center, inner, outer, axis=0, *, growth=1.45, layer=0,
                       start=0.0):
    """Radially graded annular cells on a hyperplane disk (fine near center).

    Ring edges grow geometrically from ``inner`` to ``outer``; cells keep an
    aspect ratio near one so distant area is represented cheaply.  With
    ``start`` > 0 the layout is an annulus from that radius outward.
    """
    center = np.asarray(center, dtype=float)
    if start > 0.0:
        edges = _geometric_edges(float(start), float(outer), growth)
    else:
        edges = np.concatenate([[0.0],
                                _geometric_edges(float(inner), float(outer), growth)])
    u, v = [a for a in range(3) if a != axis]
    pts, wts, rads = [], [], []
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for m_ in range(len(edges) - 1):
        r0, r1 = edges[m_], edges[m_ + 1]
        rm = math.sqrt(0.5 * (r0 * r0 + r1 * r1)) if r0 > 0 else 0.0
        if r0 == 0.0:
            km = 1
        else:
            km = max(6, int(round(2.0 * math.pi * rm / (r1 - r0))))
        area = math.pi * (r1 * r1 - r0 * r0) / km
        ang = m_ * golden + 2.0 * math.pi * (np.arange(km) + 0.5) / km
        ring = np.zeros((km, 3))
        if rm > 0:
            ring[:, u] = rm * np.cos(ang)
            ring[:, v] = rm * np.sin(ang)
        pts.append(ring)
        wts.append(np.full(km, area))
        rads.append(np.full(km, SURFACE_CELL_RADIUS_FACTOR * math.sqrt(area)))
    pts = np.vstack(pts) + center
    m = pts.shape[0]
    return NodeSet(pts, np.concatenate(wts), np.concatenate(rads),
                   np.full(m, layer, dtype=int))


def ball_complement_nodes(center, radius, truncation, resolution, *, growth=1.35):
    """Boundary sphere layer plus radially graded volume shells out to the
    truncation radius."""
    center = np.asarray(center, dtype=float)
    n_surf = max(12, int(round(4.0 * math.pi * radius ** 2 / resolution ** 2)))
    parts = [sphere_surface_nodes(center, radius, n_surf, layer=0)]
    edges = _geometric_edges(radius, truncation, growth)
    for j in range(len(edges) - 1):
        r0, r1 = edges[j], edges[j + 1]
        rm = 0.5 * (r0 + r1)
        t = r1 - r0
        count = max(12, int(round(4.0 * math.pi * rm ** 2 / t ** 2)))
        shell = sphere_surface_nodes(center, rm, count, layer=j + 1,
                                     phase=0.37 * (j + 1))
        vol = 4.0 * math.pi / 3.0 * (r1 ** 3 - r0 ** 3)
        area = 4.0 * math.pi * rm ** 2 / count
        w = np.full(len(shell), vol / count)
        rho_val = VOLUME_CELL_RADIUS_FACTOR * min(math.sqrt(area), t)
        rho = np.full(len(shell), rho_val)
        parts.append(NodeSet(shell.positions, w, rho, shell.layer_index))
    return trim_cell_radii(_concat_nodesets(parts))


def half_space_nodes(level, side, truncation, resolution, axis=0, *,
                     growth=1.45, depth_growth=2.2, backing=True):
    """Half-space plate {x_axis*side >= level*side}: boundary-plane layer plus
    graded volume layers going into the half-space."""
    center = np.zeros(3)
    center[axis] = level
    parts = [graded_plane_nodes(center, resolution, truncation, axis=axis,
                                growth=growth, layer=0)]
    if backing:
        edges = _geometric_edges(float(resolution), truncation / 2.0, depth_growth)
        for j in range(len(edges) - 1):
            d0, d1 = edges[j], edges[j + 1]
            dm = 0.5 * (d0 + d1)
            t = d1 - d0
            c = np.zeros(3)
            c[axis] = level + side * dm
            sheet = graded_plane_nodes(c, max(resolution, t), truncation,
                                       axis=axis, growth=growth, layer=j + 1)
            w = sheet.quad_weights * t
            rho = VOLUME_CELL_RADIUS_FACTOR * np.minimum(np.sqrt(sheet.quad_weights), t)
            parts.append(NodeSet(sheet.positions, w, rho, sheet.layer_index))
    return trim_cell_radii(_concat_nodesets(parts))


def _concat_nodesets(parts: Iterable[NodeSet]) -> NodeSet:
    parts = [p for p in parts if len(p)]
    if not parts:
        return NodeSet(np.zeros((0, 3)), np.zeros(0), np.zeros(0))
    return NodeSet(np.vstack([p.positions for p in parts]),
                   np.concatenate([p.quad_weights for p in parts]),
                   np.concatenate([p.cell_radii for p in parts]),
                   np.concatenate([p.layer_index for p in parts]))


# ---------------------------------------------------------------------------
# Plate descriptions and condenser construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlateSpec:
    """Geometric description of one plate, consumed by :func:`build_condenser`.

    ``stack_count`` > 0 on a disk plate builds the stacked family: disk k of
    radius k x radius at axis offset 1/k from the disk center, k = 1..count,
    one layer per disk.
    """

    tag: str
    sign: int
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.0
    axis: int = 0
    level: float = 0.0
    side: int = -1
    truncation: Optional[float] = None
    resolution_scale: float = 1.0
    growth: Optional[float] = None
    stack_count: int = 0
    backing: bool = True
    cloud: Optional[NodeSet] = None

    def __post_init__(self):
        if self.tag not in GEOMETRY_TAGS:
            raise ValueError(f"unknown geometry tag {self.tag!r}")
        if self.stack_count and self.tag != "disk":
            raise ValueError("stack_count applies to disk plates only")


def build_condenser(plate_specs: Sequence[PlateSpec], resolution: float) -> Condenser:
    """Discretize the plates at the given resolution and assemble a condenser.

    Unbounded plates (ball complements, half-spaces) require a truncation
    radius, which is recorded on the plate.  Raises EmptyPlateError for a
    degenerate plate and ZeroSeparationError if a positive node coincides
    with a negative one.
    """
    plates = []
    for i, spec in enumerate(plate_specs):
        res = resolution * spec.resolution_scale
        params = {"center": spec.center, "radius": spec.radius,
                  "axis": spec.axis, "level": spec.level, "side": spec.side}
        if spec.tag == "ball":
            nodes = ball_volume_nodes(spec.center, spec.radius, res)
            trunc = None
        elif spec.tag == "ball_complement":
            if spec.truncation is None:
                raise ValueError("ball_complement plate needs a truncation radius")
            nodes = ball_complement_nodes(spec.center, spec.radius, spec.truncation,
                                          res, growth=spec.growth or 1.35)
            trunc = spec.truncation
        elif spec.tag == "half_space":
            if spec.truncation is None:
                raise ValueError("half_space plate needs a truncation radius")
            nodes = half_space_nodes(spec.level, spec.side, spec.truncation, res,
                                     axis=spec.axis, growth=spec.growth or 1.45,
                                     backing=spec.backing)
            trunc = spec.truncation
        elif spec.tag == "disk":
            if spec.stack_count > 0:
                parts = []
                for k in range(1, spec.stack_count + 1):
                    ctr = np.asarray(spec.center, dtype=float).copy()
                    ctr[spec.axis] += 1.0 / k
                    rk = k * spec.radius
                    count = max(12, int(round(math.pi * rk ** 2 / res ** 2)))
                    parts.append(disk_nodes(ctr, rk, count, axis=spec.axis,
                                            layer=k - 1))
                nodes = trim_cell_radii(_concat_nodesets(parts))
            else:
                count = max(1, int(round(math.pi * spec.radius ** 2 / res ** 2)))
                nodes = disk_nodes(spec.center, spec.radius, count,
                                   axis=spec.axis)
            trunc = None
        else:  # explicit_cloud
            if spec.cloud is None:
                raise ValueError("explicit_cloud plate needs nodes")
            nodes = spec.cloud
            trunc = None
        if len(nodes) == 0:
            raise EmptyPlateError(f"plate {i} ({spec.tag}) produced no nodes")
        plates.append(Plate(id=i, sign=spec.sign, nodes=nodes,
                            geometry_tag=spec.tag, params=params, truncation=trunc))
    # trim effective cells across plates so joint kernel matrices stay PD;
    # coincident nodes (shared by equally signed plates) are the same cell
    all_pos = np.vstack([p.nodes.positions for p in plates])
    trimmed = []
    for p in plates:
        dnn = _nearest_neighbor_distances(p.nodes.positions, all_pos)
        capped = np.minimum(p.nodes.cell_radii, NEIGHBOR_TRIM * dnn)
        ns = NodeSet(p.nodes.positions, p.nodes.quad_weights, capped,
                     p.nodes.layer_index)
        trimmed.append(Plate(id=p.id, sign=p.sign, nodes=ns,
                             geometry_tag=p.geometry_tag, params=p.params,
                             truncation=p.truncation))
    return Condenser(tuple(trimmed))
