"""Rectangular specimen tessellation with cohesive interfaces on shared edges.

Particles are convex polygons. Each particle owns private copies of its corner
nodes (node duplication), is split into constant-strain triangles by a fan
from its first corner, and every edge it shares with a neighbour becomes one
interface. Interface integration points sit at the two edge endpoints, so an
interface pairs node ``nodes_a[i, k]`` of the lower-indexed particle with the
coincident node ``nodes_b[i, k]`` of the higher one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Voronoi, cKDTree

logger = logging.getLogger(__name__)

PATTERNS = ("structured-quad", "crossed-triangle", "voronoi")
_DIVISIBILITY_TOL = 1e-9


class MeshError(ValueError):
    """Specimen that cannot be tessellated as requested."""


@dataclass(frozen=True)
class SpecimenSpec:
    width: float
    height: float
    particle_size: float
    pattern: str = "crossed-triangle"
    seed: int = 0

    def __post_init__(self):
        for name in ("width", "height", "particle_size"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise MeshError(f"{name} must be a positive length, got {value!r}")
        if self.pattern not in PATTERNS:
            raise MeshError(f"unknown pattern {self.pattern!r}; expected one of {', '.join(PATTERNS)}")


@dataclass(frozen=True)
class Mesh:
    width: float
    height: float
    nodes: np.ndarray            # (N, 2) coordinates, m
    node_particle: np.ndarray    # (N,) owning particle
    particles: tuple             # per particle: CCW node ids
    triangles: np.ndarray        # (T, 3) CCW node ids
    triangle_particle: np.ndarray
    iface_particles: np.ndarray  # (I, 2) particle ids (a < b)
    nodes_a: np.ndarray          # (I, 2) endpoints on particle a, along a's CCW edge
    nodes_b: np.ndarray          # (I, 2) coincident endpoints on particle b
    normals: np.ndarray          # (I, 2) unit, from a to b
    tangents: np.ndarray         # (I, 2) unit, normal rotated +90 deg
    lengths: np.ndarray          # (I,)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_particles(self) -> int:
        return len(self.particles)

    @property
    def n_interfaces(self) -> int:
        return int(self.lengths.shape[0])

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def particle_areas(self) -> np.ndarray:
        return np.bincount(self.triangle_particle, weights=self.triangle_areas(), minlength=self.n_particles)

    def interface_midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[self.nodes_a[:, 0]] + self.nodes[self.nodes_a[:, 1]])


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def build_mesh(width: float, height: float, vertices: np.ndarray, polygons: list[list[int]]) -> Mesh:
    """Duplicate nodes per particle and pair up shared edges.

    ``polygons`` index into the shared ``vertices`` and must be CCW and convex.
    """
    vertices = np.asarray(vertices, dtype=float)
    coords: list[np.ndarray] = []
    node_particle: list[int] = []
    particles = []
    triangles: list[tuple[int, int, int]] = []
    tri_particle: list[int] = []
    owner: dict[tuple[int, int], int] = {}
    edges: dict[tuple[int, int], list[tuple[int, int, int]]] = {}

    for pid, poly in enumerate(polygons):
        if len(poly) < 3:
            raise MeshError(f"particle {pid} has {len(poly)} corners")
        if _signed_area(vertices[poly]) <= 0.0:
            raise MeshError(f"particle {pid} is degenerate or not counter-clockwise")
        ids = []
        for v in poly:
            nid = len(coords)
            coords.append(vertices[v])
            node_particle.append(pid)
            owner[(pid, v)] = nid
            ids.append(nid)
        particles.append(np.asarray(ids, dtype=np.int64))
        for k in range(1, len(ids) - 1):
            triangles.append((ids[0], ids[k], ids[k + 1]))
            tri_particle.append(pid)
        for k, v0 in enumerate(poly):
            v1 = poly[(k + 1) % len(poly)]
            edges.setdefault((min(v0, v1), max(v0, v1)), []).append((pid, v0, v1))

    pairs, nodes_a, nodes_b, normals, tangents, lengths = [], [], [], [], [], []
    for key in sorted(edges):
        sides = edges[key]
        if len(sides) == 1:
            continue
        if len(sides) > 2:
            raise MeshError(f"edge {key} is shared by {len(sides)} particles")
        (pa, va0, va1), (pb, _, _) = sorted(sides)
        if pa == pb:
            raise MeshError(f"particle {pa} meets itself along edge {key}")
        d = vertices[va1] - vertices[va0]
        length = math.sqrt(float(d[0] * d[0] + d[1] * d[1]))
        n = np.array([d[1], -d[0]]) / length
        pairs.append((pa, pb))
        nodes_a.append((owner[(pa, va0)], owner[(pa, va1)]))
        nodes_b.append((owner[(pb, va0)], owner[(pb, va1)]))
        normals.append(n)
        tangents.append(np.array([-n[1], n[0]]))
        lengths.append(length)

    def table(rows, width_, dtype):
        return np.asarray(rows, dtype=dtype).reshape(-1, width_)

    return Mesh(
        width=float(width),
        height=float(height),
        nodes=np.asarray(coords, dtype=float).reshape(-1, 2),
        node_particle=np.asarray(node_particle, dtype=np.int64),
        particles=tuple(particles),
        triangles=table(triangles, 3, np.int64),
        triangle_particle=np.asarray(tri_particle, dtype=np.int64),
        iface_particles=table(pairs, 2, np.int64),
        nodes_a=table(nodes_a, 2, np.int64),
        nodes_b=table(nodes_b, 2, np.int64),
        normals=table(normals, 2, float),
        tangents=table(tangents, 2, float),
        lengths=np.asarray(lengths, dtype=float),
    )


def _grid_counts(spec: SpecimenSpec) -> tuple[int, int]:
    counts = []
    for name, extent in (("width", spec.width), ("height", spec.height)):
        ratio = extent / spec.particle_size
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > _DIVISIBILITY_TOL * max(ratio, 1.0):
            raise MeshError(
                f"particle_size {spec.particle_size!r} m does not divide {name} {extent!r} m "
                f"for the {spec.pattern} pattern"
            )
        counts.append(n)
    return counts[0], counts[1]


def _grid_vertices(spec: SpecimenSpec, nx: int, ny: int) -> np.ndarray:
    xs = np.linspace(0.0, spec.width, nx + 1)
    ys = np.linspace(0.0, spec.height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)  # row j = y index
    return np.column_stack([gx.ravel(), gy.ravel()])


def _structured_quad(spec: SpecimenSpec) -> Mesh:
    nx, ny = _grid_counts(spec)
    verts = _grid_vertices(spec, nx, ny)

    def v(i, j):
        return j * (nx + 1) + i

    polys = [[v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)] for j in range(ny) for i in range(nx)]
    return build_mesh(spec.width, spec.height, verts, polys)


def _crossed_triangle(spec: SpecimenSpec) -> Mesh:
    nx, ny = _grid_counts(spec)
    corners = _grid_vertices(spec, nx, ny)
    xs = np.linspace(0.0, spec.width, nx + 1)
    ys = np.linspace(0.0, spec.height, ny + 1)
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    gx, gy = np.meshgrid(cx, cy)
    verts = np.vstack([corners, np.column_stack([gx.ravel(), gy.ravel()])])
    base = corners.shape[0]

    def v(i, j):
        return j * (nx + 1) + i

    polys = []
    for j in range(ny):
        for i in range(nx):
            c = base + j * nx + i
            v00, v10, v11, v01 = v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)
            polys += [[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
    return build_mesh(spec.width, spec.height, verts, polys)


def _voronoi(spec: SpecimenSpec) -> Mesh:
    w, h = spec.width, spec.height
    count = max(1, int(round(w * h / spec.particle_size ** 2)))
    rng = np.random.default_rng(spec.seed)
    seeds = rng.uniform((0.0, 0.0), (w, h), size=(count, 2))
    # Reflect about each side so the cells of the real seeds close on the box.
    mirrored = [seeds,
                np.column_stack([-seeds[:, 0], seeds[:, 1]]),
                np.column_stack([2.0 * w - seeds[:, 0], seeds[:, 1]]),
                np.column_stack([seeds[:, 0], -seeds[:, 1]]),
                np.column_stack([seeds[:, 0], 2.0 * h - seeds[:, 1]])]
    vor = Voronoi(np.vstack(mirrored))

    tol = 1e-9 * max(w, h)
    verts = vor.vertices.copy()
    for axis, extent in ((0, w), (1, h)):
        verts[np.abs(verts[:, axis]) <= tol, axis] = 0.0
        verts[np.abs(verts[:, axis] - extent) <= tol, axis] = extent

    # Cocircular seed/mirror quartets can leave near-duplicate vertices.
    canon = np.arange(len(verts))

    def root(i: int) -> int:
        while canon[i] != i:
            i = canon[i]
        return i

    for i, j in sorted(cKDTree(verts).query_pairs(r=tol)):
        ri, rj = root(i), root(j)
        canon[max(ri, rj)] = min(ri, rj)
    canon = np.array([root(i) for i in range(len(canon))])

    polys = []
    for k in range(count):
        region = vor.regions[vor.point_region[k]]
        if not region or -1 in region:
            raise MeshError(f"voronoi cell {k} is unbounded (seed {spec.seed})")
        ids = np.unique(canon[region])
        if ids.size < 3:
            raise MeshError(f"voronoi cell {k} collapsed to {ids.size} vertices (seed {spec.seed})")
        centre = verts[ids].mean(axis=0)
        angle = np.arctan2(verts[ids, 1] - centre[1], verts[ids, 0] - centre[0])
        ring = [int(i) for i in ids[np.argsort(angle, kind="stable")]]
        area = _signed_area(verts[ring])
        if area <= 1e-12 * w * h:
            raise MeshError(f"voronoi cell {k} has no area (seed {spec.seed})")
        polys.append(ring)
    return build_mesh(w, h, verts, polys)


def tessellate(spec: SpecimenSpec) -> Mesh:
    """Tessellate the specimen and insert interfaces on every shared edge."""
    if spec.pattern == "structured-quad":
        mesh = _structured_quad(spec)
    elif spec.pattern == "crossed-triangle":
        mesh = _crossed_triangle(spec)
    else:
        mesh = _voronoi(spec)
    total = float(mesh.particle_areas().sum())
    if abs(total - spec.width * spec.height) > 1e-9 * spec.width * spec.height:
        raise MeshError(f"particle areas sum to {total!r}, expected {spec.width * spec.height!r}")
    logger.info(
        "mesh %s %gx%g m, h=%g m: %d particles, %d interfaces, %d nodes",
        spec.pattern, spec.width, spec.height, spec.particle_size,
        mesh.n_particles, mesh.n_interfaces, mesh.n_nodes,
    )
    return mesh


def boundary_sets(mesh: Mesh) -> dict[str, np.ndarray]:
    """Node ids on each side of the specimen (all duplicated copies)."""
    tol = 1e-9 * max(mesh.width, mesh.height)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return {
        "top": np.flatnonzero(np.abs(y - mesh.height) <= tol),
        "bottom": np.flatnonzero(np.abs(y) <= tol),
        "left": np.flatnonzero(np.abs(x) <= tol),
        "right": np.flatnonzero(np.abs(x - mesh.width) <= tol),
    }


def write_mesh(mesh: Mesh, path: str | Path) -> Path:
    """Columnar text dump: nodes, triangles, interfaces.

    Blocks start with a ``# name count`` line followed by one row per item:
      nodes:      id x y particle
      triangles:  id n0 n1 n2 particle
      interfaces: id particle_a particle_b a0 a1 b0 b1 nx ny length
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# nodes {mesh.n_nodes}"]
    for i, ((x, y), pid) in enumerate(zip(mesh.nodes, mesh.node_particle)):
        lines.append(f"{i} {x!r} {y!r} {int(pid)}")
    lines.append(f"# triangles {mesh.triangles.shape[0]}")
    for i, (tri, pid) in enumerate(zip(mesh.triangles, mesh.triangle_particle)):
        lines.append(f"{i} {int(tri[0])} {int(tri[1])} {int(tri[2])} {int(pid)}")
    lines.append(f"# interfaces {mesh.n_interfaces}")
    for i in range(mesh.n_interfaces):
        pa, pb = mesh.iface_particles[i]
        a0, a1 = mesh.nodes_a[i]
        b0, b1 = mesh.nodes_b[i]
        nx_, ny_ = mesh.normals[i]
        lines.append(f"{i} {int(pa)} {int(pb)} {int(a0)} {int(a1)} {int(b0)} {int(b1)} "
                     f"{float(nx_)!r} {float(ny_)!r} {float(mesh.lengths[i])!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
