"""Conforming triangulations of regular polygons with electrode-tagged edges.

A :class:`Mesh` stores vertex coordinates, counter-clockwise triangles and
tagged boundary edges (tag 0 is insulated, ``m >= 1`` is electrode ``m``).
Meshes produced by :func:`refine_uniform` remember their parent and the
pair of parent vertices each new vertex bisects, which is what
:func:`prolongation` needs.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, GeometryError, StructuralError

AREA_EPS = 1e-14


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    vertices : (N, 2) float array
    triangles : (T, 3) int array, counter-clockwise
    boundary_edges : (B, 2) int array, oriented counter-clockwise along the boundary
    boundary_tags : (B,) int array, 0 = insulated, m = electrode m
    parent : Mesh or None
        Coarser mesh this one was uniformly refined from.
    level : int
    midpoint_parents : (N - N_parent, 2) int array or None
        For uniformly refined meshes, the two parent vertices of each new vertex.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    parent: Optional["Mesh"] = None
    level: int = 0
    midpoint_parents: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary_edges", "boundary_tags"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_electrodes(self) -> int:
        return int(self.boundary_tags.max(initial=0))

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs."""
        t = self.triangles
        e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def electrode_edges(self, m: int) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == m]

    def electrode_vertices(self, m: int) -> np.ndarray:
        """Vertices on the closure of the edges tagged ``m``."""
        return np.unique(self.electrode_edges(m))

    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def mesh_size(self, where: str = "all") -> float:
        """Maximum edge length.

        ``where`` is ``"all"``, ``"boundary"`` (edges with an endpoint on the
        boundary) or ``"interior"`` (edges with no endpoint on the boundary).
        """
        e = self.edges()
        lengths = np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)
        if where == "all":
            return float(lengths.max())
        on_bnd = np.zeros(self.n_vertices, dtype=bool)
        on_bnd[self.boundary_vertices()] = True
        touches = on_bnd[e[:, 0]] | on_bnd[e[:, 1]]
        if where == "boundary":
            return float(lengths[touches].max())
        if where == "interior":
            return float(lengths[~touches].max())
        raise ValueError(f"unknown region {where!r}")

    def validate(self) -> None:
        """Raise :class:`StructuralError` unless all mesh invariants hold."""
        validate_mesh(self)


def validate_mesh(mesh: Mesh) -> None:
    """Check conformity, orientation, the Euler formula and electrode tagging."""
    areas = mesh.signed_areas()
    if np.any(areas <= AREA_EPS):
        raise StructuralError("mesh has triangles with non-positive area")

    t = mesh.triangles
    half = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    und = np.sort(half, axis=1)
    edges, counts = np.unique(und, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise StructuralError("edge shared by more than two triangles")
    bnd = edges[counts == 1]
    tagged = np.sort(mesh.boundary_edges, axis=1)
    if len(bnd) != len(tagged) or not np.array_equal(
        bnd, tagged[np.lexsort((tagged[:, 1], tagged[:, 0]))]
    ):
        raise StructuralError("boundary edges do not match the tagged edge list")
    if len(np.unique(tagged, axis=0)) != len(tagged):
        raise StructuralError("boundary edge tagged twice")

    V, E, F = mesh.n_vertices, len(edges), mesh.n_triangles
    if V - E + F != 1:
        raise StructuralError(f"Euler characteristic V - E + F = {V - E + F}, expected 1")

    M = mesh.n_electrodes
    owner = {}
    for m in range(1, M + 1):
        em = mesh.electrode_edges(m)
        if len(em) == 0:
            raise StructuralError(f"electrode {m} has no edges")
        if not _is_connected_path(em):
            raise StructuralError(f"electrode {m} is not a connected polyline")
        for v in np.unique(em):
            if owner.setdefault(int(v), m) != m:
                raise StructuralError(
                    f"vertex {v} lies on electrodes {owner[int(v)]} and {m}"
                )


def _is_connected_path(edges: np.ndarray) -> bool:
    adj: dict[int, list[int]] = {}
    for a, b in edges:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    if any(len(nb) > 2 for nb in adj.values()):
        return False
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


def build_regular_polygon_mesh(n_sides: int, n_electrodes: int,
                               pattern: str = "alternating") -> Mesh:
    """Centroid fan of the regular ``n_sides``-gon inscribed in the unit circle.

    Polygon vertex ``k`` sits at angle ``2 pi k / n_sides``, so boundary edge
    ``k`` has midpoint angle ``pi (2k + 1) / n_sides``. With the alternating
    pattern electrodes are evenly spaced, each covering
    ``n_sides / (2 n_electrodes)`` consecutive edges, and electrode 1 starts
    on edge 0.

    Raises
    ------
    ConfigurationError
        If ``n_electrodes < 2`` or ``n_sides`` is not a multiple of
        ``2 * n_electrodes``.
    """
    if n_sides < 3:
        raise ConfigurationError("a polygon needs at least 3 sides")
    if n_electrodes < 2:
        raise ConfigurationError(
            "at least 2 electrodes are required (currents must sum to zero)"
        )
    if pattern != "alternating":
        raise ConfigurationError(f"unknown electrode pattern {pattern!r}")
    if n_sides % (2 * n_electrodes):
        raise ConfigurationError(
            f"n_sides={n_sides} is not a multiple of 2*n_electrodes={2 * n_electrodes}"
        )

    angles = 2 * np.pi * np.arange(n_sides) / n_sides
    corners = np.column_stack([np.cos(angles), np.sin(angles)])
    vertices = np.vstack([[0.0, 0.0], corners])
    k = np.arange(n_sides)
    triangles = np.column_stack([np.zeros(n_sides, dtype=int), 1 + k, 1 + (k + 1) % n_sides])
    bedges = np.column_stack([1 + k, 1 + (k + 1) % n_sides])

    span = n_sides // (2 * n_electrodes)
    block = k // span
    tags = np.where(block % 2 == 0, block // 2 + 1, 0)

    mesh = Mesh(vertices, triangles, bedges, tags.astype(int))
    validate_mesh(mesh)
    return mesh


def _midpoint_index(edge_ids: dict, key: tuple, vertices: list) -> int:
    idx = edge_ids.get(key)
    if idx is None:
        a, b = key
        idx = len(vertices)
        vertices.append(0.5 * (vertices[a] + vertices[b]))
        edge_ids[key] = idx
    return idx


def _split_boundary(mesh: Mesh, edge_ids: dict) -> tuple[np.ndarray, np.ndarray]:
    new_edges, new_tags = [], []
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        key = (min(a, b), max(a, b))
        mid = edge_ids.get(key)
        if mid is None:
            new_edges.append((a, b))
            new_tags.append(tag)
        else:
            new_edges += [(a, mid), (mid, b)]
            new_tags += [tag, tag]
    return np.array(new_edges, dtype=int), np.array(new_tags, dtype=int)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle split into four by its edge midpoints.

    Coarse vertices keep their indices and midpoints are appended in
    lexicographic order of their parent edge, so the result is nested in
    ``mesh`` and records it as its parent.
    """
    t = mesh.triangles
    N = mesh.n_vertices
    half = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
    keys = np.sort(half, axis=2).reshape(-1, 2)
    parents, inv = np.unique(keys, axis=0, return_inverse=True)
    mid = N + inv.reshape(-1, 3)
    ab, bc, ca = mid[:, 0], mid[:, 1], mid[:, 2]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.stack([
        np.column_stack([a, ab, ca]),
        np.column_stack([ab, b, bc]),
        np.column_stack([ca, bc, c]),
        np.column_stack([ab, bc, ca]),
    ], axis=1).reshape(-1, 3)
    vertices = np.vstack([mesh.vertices, 0.5 * mesh.vertices[parents].sum(axis=1)])

    be = mesh.boundary_edges
    bkeys = np.sort(be, axis=1)
    pos = _row_lookup(parents, bkeys)
    bmid = N + pos
    bedges = np.stack([np.column_stack([be[:, 0], bmid]),
                       np.column_stack([bmid, be[:, 1]])], axis=1).reshape(-1, 2)
    btags = np.repeat(mesh.boundary_tags, 2)
    fine = Mesh(vertices, tris, bedges, btags,
                parent=mesh, level=mesh.level + 1, midpoint_parents=parents)
    validate_mesh(fine)
    return fine


def _row_lookup(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of each row of ``rows`` in the lexicographically sorted ``table``."""
    width = int(max(table.max(initial=0), rows.max(initial=0))) + 1
    tk = table[:, 0].astype(np.int64) * width + table[:, 1]
    rk = rows[:, 0].astype(np.int64) * width + rows[:, 1]
    pos = np.searchsorted(tk, rk)
    if np.any(pos >= len(tk)) or np.any(tk[np.minimum(pos, len(tk) - 1)] != rk):
        raise StructuralError("boundary edge is not an edge of the mesh")
    return pos


def refine_levels(mesh: Mesh, levels: int) -> Mesh:
    for _ in range(levels):
        mesh = refine_uniform(mesh)
    return mesh


def refine_boundary_layer(mesh: Mesh, rounds: int) -> Mesh:
    """Grade the mesh towards the boundary by red-green refinement.

    Each round red-refines every triangle with a vertex on the boundary. The
    closure then red-refines any triangle with two or three bisected edges
    (repeating until stable) and bisects triangles with a single hanging node
    from that node to the opposite vertex. The output is not nested in the
    input and carries no parent.
    """
    if rounds < 0:
        raise ConfigurationError("rounds must be non-negative")
    for _ in range(rounds):
        mesh = _red_green_round(mesh)
    return mesh


def _red_green_round(mesh: Mesh) -> Mesh:
    tris = mesh.triangles
    on_bnd = np.zeros(mesh.n_vertices, dtype=bool)
    on_bnd[mesh.boundary_vertices()] = True
    red = on_bnd[tris].any(axis=1)

    def tri_edges(t):
        a, b, c = (int(x) for x in t)
        return [(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))]

    marked: set[tuple[int, int]] = set()
    for t in tris[red]:
        marked.update(tri_edges(t))
    # closure: two or more marked edges forces a red split
    changed = True
    while changed:
        changed = False
        for i in np.flatnonzero(~red):
            es = tri_edges(tris[i])
            if sum(e in marked for e in es) >= 2:
                red[i] = True
                marked.update(es)
                changed = True

    vertices = [v for v in np.asarray(mesh.vertices)]
    edge_ids: dict[tuple[int, int], int] = {}
    for key in sorted(marked):
        _midpoint_index(edge_ids, key, vertices)

    new_tris = []
    for i, (a, b, c) in enumerate(tris):
        a, b, c = int(a), int(b), int(c)
        if red[i]:
            ab = edge_ids[(min(a, b), max(a, b))]
            bc = edge_ids[(min(b, c), max(b, c))]
            ca = edge_ids[(min(c, a), max(c, a))]
            new_tris += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
            continue
        # rotate so the hanging edge (if any) is (a, b)
        for _ in range(3):
            if (min(a, b), max(a, b)) in edge_ids:
                mid = edge_ids[(min(a, b), max(a, b))]
                new_tris += [(a, mid, c), (mid, b, c)]
                break
            a, b, c = b, c, a
        else:
            new_tris.append((a, b, c))

    bedges, btags = _split_boundary(mesh, edge_ids)
    out = Mesh(np.array(vertices), np.array(new_tris, dtype=int), bedges, btags,
               level=mesh.level)
    validate_mesh(out)
    return out


def prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """Sparse interpolation of P1 functions from ``coarse`` to ``fine``.

    ``fine`` must descend from ``coarse`` through :func:`refine_uniform`.
    """
    chain = []
    m = fine
    while m is not coarse:
        if m is None or m.midpoint_parents is None:
            raise StructuralError("fine mesh is not a uniform refinement of the coarse mesh")
        chain.append(m)
        m = m.parent
    P = sp.identity(coarse.n_vertices, format="csr")
    for child in reversed(chain):
        P = _one_level_prolongation(child) @ P
    return P.tocsr()


def _one_level_prolongation(child: Mesh) -> sp.csr_matrix:
    n_fine = child.n_vertices
    n_coarse = child.parent.n_vertices
    mids = child.midpoint_parents
    rows = np.concatenate([np.arange(n_coarse), np.repeat(np.arange(n_coarse, n_fine), 2)])
    cols = np.concatenate([np.arange(n_coarse), mids.ravel()])
    vals = np.concatenate([np.ones(n_coarse), np.full(2 * len(mids), 0.5)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine, n_coarse))


def write_mesh(mesh: Mesh, f) -> None:
    """Write ``mesh`` in the plain-text ``V T B`` format to a path or text stream."""
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "w") as fh:
            write_mesh(mesh, fh)
        return
    f.write(f"{mesh.n_vertices} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
    for x, y in mesh.vertices:
        f.write(f"{x:.17g} {y:.17g}\n")
    for i, j, k in mesh.triangles:
        f.write(f"{i} {j} {k}\n")
    for (i, j), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        f.write(f"{i} {j} {tag}\n")


def read_mesh(f) -> Mesh:
    """Inverse of :func:`write_mesh`. The result has no refinement genealogy."""
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f) as fh:
            return read_mesh(fh)
    lines = [ln for ln in f.read().splitlines() if ln.strip()]
    V, T, B = (int(x) for x in lines[0].split())
    if len(lines) != 1 + V + T + B:
        raise StructuralError("mesh file length does not match its header")
    verts = np.loadtxt(io.StringIO("\n".join(lines[1:1 + V])), ndmin=2)
    tris = np.loadtxt(io.StringIO("\n".join(lines[1 + V:1 + V + T])), dtype=int, ndmin=2)
    bnd = np.loadtxt(io.StringIO("\n".join(lines[1 + V + T:])), dtype=int, ndmin=2)
    mesh = Mesh(verts, tris, bnd[:, :2], bnd[:, 2])
    validate_mesh(mesh)
    return mesh
