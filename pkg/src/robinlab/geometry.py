"""Polygonal domains, conforming P1 meshes and boundary traversal.

Meshes are built once (catalog coarse mesh or ear clipping) and then refined
uniformly, so the finite element spaces of successive levels are nested.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

__all__ = [
    "DomainError",
    "MeshError",
    "PolygonalDomain",
    "TriangleMesh",
    "BoundaryTraversal",
    "build_domain",
    "coarse_mesh",
    "refine",
    "mesh_at_level",
    "prolongation",
    "boundary_traversal",
    "read_m2d",
    "write_m2d",
]

_GAUSS_T = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])


class DomainError(ValueError):
    """Raised for invalid polygon input."""


class MeshError(ValueError):
    """Raised when a mesh violates its structural invariants."""


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _signed_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2):
    """Closed-segment intersection test (touching counts)."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and \
            ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


@dataclass(frozen=True)
class PolygonalDomain:
    """Closed simple polygon, vertices counterclockwise.

    Use :func:`build_domain` to construct validated instances.
    """

    vertices: tuple
    name: str | None = None

    @property
    def points(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        return _signed_area(self.points)

    @property
    def perimeter(self) -> float:
        p = self.points
        return float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))

    @property
    def interior_angles(self) -> np.ndarray:
        p = self.points
        prev = np.roll(p, 1, axis=0) - p
        nxt = np.roll(p, -1, axis=0) - p
        # angle from the outgoing edge to the incoming edge, measured CCW inside
        ang = np.arctan2(prev[:, 1], prev[:, 0]) - np.arctan2(nxt[:, 1], nxt[:, 0])
        return np.mod(ang, 2 * np.pi)

    @property
    def max_angle_deviation(self) -> float:
        """Largest |pi - interior angle|.

        Recorded as metadata only; it is a stand-in for how far the boundary is
        from flat, not a Lipschitz constant.
        """
        return float(np.max(np.abs(np.pi - self.interior_angles)))


def _validate_polygon(pts):
    n = len(pts)
    if n < 3:
        raise DomainError("polygon needs at least 3 vertices")
    if not np.all(np.isfinite(pts)):
        raise DomainError("non-finite vertex coordinates")
    area = _signed_area(pts)
    if area == 0.0:
        raise DomainError("polygon has zero area")
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        if np.array_equal(a1, a2):
            raise DomainError(f"repeated vertex at index {i}")
        for j in range(i + 1, n):
            b1, b2 = pts[j], pts[(j + 1) % n]
            if j == i + 1:
                # shared endpoint a2 == b1; reject folding back onto the edge
                if _cross(a1, a2, b2) == 0 and np.dot(a1 - a2, b2 - b1) > 0:
                    raise DomainError(f"edges {i} and {j} overlap")
                continue
            if i == 0 and j == n - 1:
                if _cross(b1, b2, a2) == 0 and np.dot(a2 - a1, b1 - b2) > 0:
                    raise DomainError(f"edges {i} and {j} overlap")
                continue
            if _segments_intersect(a1, a2, b1, b2):
                raise DomainError(f"polygon self-intersects (edges {i} and {j})")
    if area < 0:
        raise DomainError("vertices are listed clockwise; counterclockwise order is required")


_CATALOG_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def _catalog(name: str) -> PolygonalDomain:
    m = _CATALOG_RE.match(name)
    if not m:
        raise DomainError(f"unknown catalog domain {name!r}")
    key, argtxt = m.group(1), m.group(2)
    args = [float(a) for a in argtxt.split(",")] if argtxt else []
    if key == "unit_square" and not args:
        verts = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))
        return PolygonalDomain(verts, "unit_square")
    if key == "rectangle" and len(args) == 2:
        a, b = args
        if a <= 0 or b <= 0:
            raise DomainError("rectangle sides must be positive")
        verts = ((0.0, 0.0), (a, 0.0), (a, b), (0.0, b))
        return PolygonalDomain(verts, f"rectangle({a:g},{b:g})")
    if key == "lshape" and not args:
        verts = ((0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0))
        return PolygonalDomain(verts, "lshape")
    if key == "regular_ngon" and len(args) in (0, 1, 2):
        n = int(args[0]) if args else 64
        r = args[1] if len(args) > 1 else 1.0
        if n < 3 or r <= 0:
            raise DomainError("regular_ngon needs N >= 3 and radius > 0")
        k = np.arange(n)
        verts = tuple((r * math.cos(2 * math.pi * i / n), r * math.sin(2 * math.pi * i / n))
                      for i in k)
        return PolygonalDomain(verts, f"regular_ngon({n},{r:g})")
    raise DomainError(f"unknown catalog domain {name!r}")


def build_domain(spec: Union[str, Sequence[Sequence[float]], PolygonalDomain]) -> PolygonalDomain:
    """Return a validated domain from a catalog name or a CCW vertex list.

    Catalog: ``unit_square``, ``rectangle(a,b)``, ``lshape``,
    ``regular_ngon(N,radius)``.
    """
    if isinstance(spec, PolygonalDomain):
        _validate_polygon(spec.points)
        return spec
    if isinstance(spec, str):
        return _catalog(spec)
    pts = np.asarray(spec, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("vertex list must have shape (n, 2)")
    _validate_polygon(pts)
    return PolygonalDomain(tuple(map(tuple, pts.tolist())), None)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming P1 triangulation.

    ``boundary_edges[k] = (i, j)`` is oriented with the domain on its left;
    ``boundary_sides[k]`` is the polygon side the edge lies on.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    boundary_sides: np.ndarray
    boundary_node_flags: np.ndarray
    level: int
    h: float
    domain: PolygonalDomain | None = field(default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_sides(self) -> int:
        return int(self.boundary_sides.max()) + 1

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def area(self) -> float:
        return float(np.sum(self.triangle_areas()))

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_node_flags)


def _make_mesh(nodes, triangles, boundary_edges, sides, level, domain=None, h=None):
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    boundary_edges = np.asarray(boundary_edges, dtype=np.int64).reshape(-1, 2)
    n = len(nodes)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
        raise MeshError("triangle index out of range")
    if boundary_edges.size and (boundary_edges.min() < 0 or boundary_edges.max() >= n):
        raise MeshError("boundary edge index out of range")

    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(areas <= 0):
        raise MeshError("triangle with nonpositive signed area (degenerate or clockwise)")

    # conformity: every directed edge is unique and is either paired with its
    # reverse or is a boundary edge
    directed = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    keys = directed[:, 0] * n + directed[:, 1]
    if len(np.unique(keys)) != len(keys):
        raise MeshError("non-conforming triangulation (repeated directed edge)")
    rev = directed[:, 1] * n + directed[:, 0]
    unpaired = np.sort(keys[~np.isin(rev, keys)])
    bkeys = boundary_edges[:, 0] * n + boundary_edges[:, 1]
    if len(np.unique(bkeys)) != len(bkeys) or not np.array_equal(unpaired, np.sort(bkeys)):
        raise MeshError("boundary edges do not match the triangulation's free edges")

    vec = nodes[boundary_edges[:, 1]] - nodes[boundary_edges[:, 0]]
    lengths = np.linalg.norm(vec, axis=1)
    normals = np.column_stack([vec[:, 1], -vec[:, 0]]) / lengths[:, None]
    flags = np.zeros(n, dtype=bool)
    flags[boundary_edges.ravel()] = True
    if h is None:
        all_e = nodes[directed[:, 1]] - nodes[directed[:, 0]]
        h = float(np.max(np.linalg.norm(all_e, axis=1)))
    return TriangleMesh(
        nodes=_frozen(nodes),
        triangles=_frozen(triangles),
        boundary_edges=_frozen(boundary_edges),
        normals=_frozen(normals),
        lengths=_frozen(lengths),
        boundary_sides=_frozen(np.asarray(sides, dtype=np.int64)),
        boundary_node_flags=_frozen(flags),
        level=int(level),
        h=float(h),
        domain=domain,
    )


def _min_angle(a, b, c):
    def ang(p, q, r):
        u, v = q - p, r - p
        return math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(np.dot(u, v)))
    return min(ang(a, b, c), ang(b, c, a), ang(c, a, b))


def _ear_clip(pts):
    """Ear clipping, always taking the ear with the largest minimum angle."""
    idx = list(range(len(pts)))
    tris = []
    while len(idx) > 3:
        best, best_q = None, -1.0
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if _cross(a, b, c) <= 0:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                q = pts[j]
                # points on the ear boundary also block it
                if _cross(a, b, q) >= 0 and _cross(b, c, q) >= 0 and _cross(c, a, q) >= 0:
                    ok = False
                    break
            if not ok:
                continue
            qual = _min_angle(a, b, c)
            if qual > best_q:
                best, best_q = k, qual
        if best is None:
            raise MeshError("ear clipping failed (degenerate or collinear vertices)")
        m = len(idx)
        tris.append((idx[best - 1], idx[best], idx[(best + 1) % m]))
        del idx[best]
    a, b, c = (pts[i] for i in idx)
    if _cross(a, b, c) <= 0:
        raise MeshError("ear clipping failed (degenerate or collinear vertices)")
    tris.append(tuple(idx))
    return tris


def coarse_mesh(domain: PolygonalDomain) -> TriangleMesh:
    """Level-0 mesh.

    Squares, rectangles and regular N-gons get a fan of triangles around the
    centroid (the unit square: 4 triangles, 5 nodes). Everything else,
    including ``lshape``, is ear clipped.
    """
    pts = domain.points
    n = len(pts)
    bedges = [(i, (i + 1) % n) for i in range(n)]
    sides = list(range(n))
    name = domain.name or ""
    if name == "unit_square" or name.startswith("rectangle") or name.startswith("regular_ngon"):
        centroid = pts.mean(axis=0)
        nodes = np.vstack([pts, centroid])
        tris = [(i, (i + 1) % n, n) for i in range(n)]
    else:
        nodes = pts
        tris = _ear_clip(pts)
    return _make_mesh(nodes, tris, bedges, sides, 0, domain)


def refine(mesh: TriangleMesh) -> TriangleMesh:
    """Uniform red refinement: every triangle split into four at edge midpoints."""
    n = mesh.n_nodes
    t = mesh.triangles
    edges = np.sort(t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = 0.5 * (mesh.nodes[uniq[:, 0]] + mesh.nodes[uniq[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    m = (n + inv).reshape(-1, 3)
    mab, mbc, mca = m[:, 0], m[:, 1], m[:, 2]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    children = np.stack([
        np.column_stack([a, mab, mca]),
        np.column_stack([mab, b, mbc]),
        np.column_stack([mca, mbc, c]),
        np.column_stack([mab, mbc, mca]),
    ], axis=1).reshape(-1, 3)

    be = mesh.boundary_edges
    key = np.sort(be, axis=1)
    # locate each boundary edge in the unique edge list
    pos = np.searchsorted(uniq[:, 0] * n + uniq[:, 1], key[:, 0] * n + key[:, 1])
    bmid = n + pos
    new_be = np.stack([np.column_stack([be[:, 0], bmid]),
                       np.column_stack([bmid, be[:, 1]])], axis=1).reshape(-1, 2)
    sides = np.repeat(mesh.boundary_sides, 2)
    return _make_mesh(nodes, children, new_be, sides, mesh.level + 1, mesh.domain)


def prolongation(coarse: TriangleMesh):
    """Sparse P1 injection from ``coarse`` into ``refine(coarse)``.

    Node numbering matches :func:`refine`: coarse nodes first, then edge
    midpoints in sorted-edge order.
    """
    from scipy import sparse

    n = coarse.n_nodes
    edges = np.sort(coarse.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    uniq = np.unique(edges, axis=0)
    ne = len(uniq)
    rows = np.concatenate([np.arange(n), n + np.arange(ne), n + np.arange(ne)])
    cols = np.concatenate([np.arange(n), uniq[:, 0], uniq[:, 1]])
    vals = np.concatenate([np.ones(n), np.full(2 * ne, 0.5)])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n + ne, n))


def mesh_at_level(domain_or_mesh, level: int) -> TriangleMesh:
    """Coarse mesh of a domain (or a given base mesh) refined ``level`` times."""
    if isinstance(domain_or_mesh, TriangleMesh):
        mesh = domain_or_mesh
        if level < mesh.level:
            raise MeshError("cannot coarsen a mesh")
        steps = level - mesh.level
    else:
        mesh = coarse_mesh(build_domain(domain_or_mesh))
        steps = level
    for _ in range(steps):
        mesh = refine(mesh)
    return mesh


@dataclass(frozen=True, eq=False)
class BoundaryTraversal:
    """Arclength-ordered walk around the boundary loop(s).

    Edge-wise arrays are in traversal order. ``quad_phi[q]`` holds the values
    of the (start, end) hat functions at Gauss point ``q`` of any edge.
    """

    loops: tuple
    node_arclength: np.ndarray
    edge_index: np.ndarray
    edge_nodes: np.ndarray
    edge_lengths: np.ndarray
    edge_start_s: np.ndarray
    quad_points: np.ndarray
    quad_s: np.ndarray
    quad_weights: np.ndarray
    quad_phi: np.ndarray
    boundary_nodes: np.ndarray
    local_index: np.ndarray
    perimeter: float

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_nodes)

    def edge_local(self) -> np.ndarray:
        """Edge endpoints as indices into ``boundary_nodes``."""
        return self.local_index[self.edge_nodes]


def boundary_traversal(mesh: TriangleMesh) -> BoundaryTraversal:
    """Walk the boundary from the lexicographically smallest boundary node."""
    be = mesh.boundary_edges
    start_of = {}
    for k, (i, j) in enumerate(be):
        if int(i) in start_of:
            raise MeshError("open boundary chain (node with two outgoing edges)")
        start_of[int(i)] = k
    ends = set(int(j) for j in be[:, 1])
    if ends != set(start_of):
        raise MeshError("open boundary chain")

    remaining = set(start_of)
    loops, order = [], []
    while remaining:
        cand = sorted(remaining, key=lambda v: (mesh.nodes[v, 0], mesh.nodes[v, 1]))
        v0 = cand[0]
        loop = []
        v = v0
        while True:
            if v not in remaining:
                raise MeshError("open boundary chain")
            remaining.discard(v)
            loop.append(v)
            k = start_of[v]
            order.append(k)
            v = int(be[k, 1])
            if v == v0:
                break
        loops.append(np.array(loop, dtype=np.int64))

    order = np.array(order, dtype=np.int64)
    lens = mesh.lengths[order]
    cums = np.cumsum(lens)
    starts = np.concatenate([[0.0], cums[:-1]])
    perimeter = float(cums[-1])
    enodes = be[order]
    p0 = mesh.nodes[enodes[:, 0]]
    p1 = mesh.nodes[enodes[:, 1]]
    qpts = p0[:, None, :] + _GAUSS_T[None, :, None] * (p1 - p0)[:, None, :]
    qs = starts[:, None] + _GAUSS_T[None, :] * lens[:, None]
    qw = np.repeat(0.5 * lens[:, None], 2, axis=1)
    phi = np.column_stack([1.0 - _GAUSS_T, _GAUSS_T])

    bnodes = np.concatenate(loops)
    local = np.full(mesh.n_nodes, -1, dtype=np.int64)
    local[bnodes] = np.arange(len(bnodes))
    node_s = np.empty(len(bnodes))
    node_s[local[enodes[:, 0]]] = starts
    return BoundaryTraversal(
        loops=tuple(_frozen(lp) for lp in loops),
        node_arclength=_frozen(node_s),
        edge_index=_frozen(order),
        edge_nodes=_frozen(enodes),
        edge_lengths=_frozen(lens),
        edge_start_s=_frozen(starts),
        quad_points=_frozen(qpts),
        quad_s=_frozen(qs),
        quad_weights=_frozen(qw),
        quad_phi=_frozen(phi),
        boundary_nodes=_frozen(bnodes),
        local_index=_frozen(local),
        perimeter=perimeter,
    )


def write_m2d(mesh: TriangleMesh, path) -> None:
    lines = [f"NODES {mesh.n_nodes}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    lines.append(f"BOUNDARY_EDGES {len(mesh.boundary_edges)}")
    lines += [f"{i} {j}" for i, j in mesh.boundary_edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_m2d(path) -> TriangleMesh:
    """Parse the ``.m2d`` text format.

    Boundary edges become their own polygon sides, in file order.
    """
    tokens = Path(path).read_text(encoding="utf-8").split()
    pos = 0

    def header(name):
        nonlocal pos
        if pos + 1 >= len(tokens) or tokens[pos] != name:
            raise MeshError(f"expected {name} section")
        count = int(tokens[pos + 1])
        pos += 2
        return count

    def block(count, width, conv):
        nonlocal pos
        vals = tokens[pos:pos + count * width]
        if len(vals) != count * width:
            raise MeshError("truncated mesh file")
        pos += count * width
        return np.array([conv(v) for v in vals]).reshape(count, width)

    nn = header("NODES")
    nodes = block(nn, 2, float)
    nt = header("TRIANGLES")
    tris = block(nt, 3, int)
    nb = header("BOUNDARY_EDGES")
    bedges = block(nb, 2, int)
    if pos != len(tokens):
        raise MeshError("trailing content in mesh file")
    for arr in (tris, bedges):
        if arr.size and (arr.min() < 0 or arr.max() >= nn):
            raise MeshError("index out of range")
    return _make_mesh(nodes, tris, bedges, np.arange(nb), 0, None)
