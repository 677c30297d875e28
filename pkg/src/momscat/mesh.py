"""Closed triangular surface meshes: loading, generation, validation, statistics.

All meshes are closed, 2-manifold and oriented outward (signed enclosed
volume > 0).  Mesh objects are immutable after construction.
"""

import math
from dataclasses import dataclass

import numpy as np

MIN_TRIANGLE_AREA = 1e-12  # m^2


class MeshError(ValueError):
    """Raised for unparsable, non-manifold, degenerate or unorientable input."""


@dataclass(frozen=True)
class MeshStats:
    mean_edge_length: float
    max_edge_length: float
    total_area: float
    triangle_count: int
    edge_count: int


class TriangleMesh:
    """Closed oriented triangle surface with edge topology.

    Attributes
    ----------
    vertices : (V, 3) float array
    triangles : (T, 3) int array, outward-oriented (CCW seen from outside)
    edges : (E, 2) int array of vertex pairs, each row sorted, rows sorted
    edge_triangles : (E, 2) int array of the two adjacent triangle indices
    """

    def __init__(self, vertices, triangles, repair_orientation=True):
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (V, 3) array")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshError("triangles must be an (T, 3) array")
        if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
            raise MeshError("triangle vertex index out of range")

        if repair_orientation:
            triangles = _orient_consistently(vertices, triangles)

        self.vertices = vertices
        self.triangles = triangles
        self.edges, self.edge_triangles = _edge_topology(triangles)

        v = vertices[triangles]
        cr = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        nrm = np.linalg.norm(cr, axis=1)
        self.areas = 0.5 * nrm
        if (self.areas <= MIN_TRIANGLE_AREA).any():
            k = int(np.argmin(self.areas))
            raise MeshError(f"degenerate triangle {k} with area {self.areas[k]:.3e} m^2")
        self.normals = cr / nrm[:, None]
        self.centroids = v.mean(axis=1)

        if self.signed_volume() <= 0.0:
            raise MeshError("mesh orientation is inward (signed volume <= 0)")

        for arr in (self.vertices, self.triangles, self.edges, self.edge_triangles,
                    self.areas, self.normals, self.centroids):
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def signed_volume(self):
        """Enclosed volume; positive for outward orientation."""
        v = self.vertices[self.triangles]
        return float(np.einsum("tc,tc->", v[:, 0], np.cross(v[:, 1], v[:, 2]))) / 6.0

    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.linalg.norm(d, axis=1)

    def triangle_vertices(self):
        """(T, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]


def _edge_topology(triangles):
    t = len(triangles)
    pairs = np.concatenate(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=0
    )
    pairs = np.sort(pairs, axis=1)
    owner = np.tile(np.arange(t), 3)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs = pairs[order]
    owner = owner[order]
    edges, start, counts = np.unique(pairs, axis=0, return_index=True, return_counts=True)
    if (counts != 2).any():
        k = int(np.argmax(counts != 2))
        raise MeshError(
            f"non-manifold or open mesh: edge {tuple(edges[k])} belongs to {counts[k]} triangles"
        )
    edge_tris = np.column_stack([owner[start], owner[start + 1]])
    edge_tris = np.sort(edge_tris, axis=1)
    return edges, edge_tris


def _orient_consistently(vertices, triangles):
    """Propagate a consistent winding over the surface, then flip outward."""
    triangles = triangles.copy()
    t = len(triangles)
    edge_map = {}
    for k in range(t):
        tri = triangles[k]
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_map.setdefault((min(a, b), max(a, b)), []).append(k)

    def directed_edges(tri):
        return ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))

    visited = np.zeros(t, dtype=bool)
    for seed in range(t):
        if visited[seed]:
            continue
        visited[seed] = True
        stack = [seed]
        while stack:
            k = stack.pop()
            for a, b in directed_edges(triangles[k]):
                for other in edge_map[(min(a, b), max(a, b))]:
                    if other == k:
                        continue
                    has_same = (a, b) in directed_edges(triangles[other])
                    if visited[other]:
                        if has_same:
                            raise MeshError("mesh is not orientable")
                        continue
                    if has_same:
                        triangles[other] = triangles[other][::-1]
                    visited[other] = True
                    stack.append(other)

    v = vertices[triangles]
    vol = np.einsum("tc,tc->", v[:, 0], np.cross(v[:, 1], v[:, 2])) / 6.0
    if vol < 0.0:
        triangles = triangles[:, ::-1]
    return triangles


def mesh_stats(mesh):
    """Exact aggregate statistics of a mesh."""
    lengths = mesh.edge_lengths()
    return MeshStats(
        mean_edge_length=float(lengths.mean()),
        max_edge_length=float(lengths.max()),
        total_area=float(mesh.areas.sum()),
        triangle_count=mesh.n_triangles,
        edge_count=mesh.n_edges,
    )


# ---------------------------------------------------------------------------
# file loaders
# ---------------------------------------------------------------------------

def load_mesh(path, fmt=None):
    """Load a closed triangle mesh from an OFF or Gmsh ASCII v2 file.

    fmt is "off" or "gmsh-ascii"; inferred from the extension when omitted
    (.off / .msh).  Winding is repaired to consistent outward orientation.
    """
    path = str(path)
    if fmt is None:
        if path.lower().endswith(".off"):
            fmt = "off"
        elif path.lower().endswith(".msh"):
            fmt = "gmsh-ascii"
        else:
            raise MeshError(f"cannot infer mesh format from {path!r}; pass fmt")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    if fmt == "off":
        vertices, triangles = _parse_off(text)
    elif fmt == "gmsh-ascii":
        vertices, triangles = _parse_gmsh_v2(text)
    else:
        raise MeshError(f"unknown mesh format {fmt!r}")
    return TriangleMesh(vertices, triangles)


def _tokens(text):
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield from line.split()


def _parse_off(text):
    tok = _tokens(text)
    try:
        head = next(tok)
        if head.upper() == "OFF":
            nv, nf = int(next(tok)), int(next(tok))
        else:
            nv, nf = int(head), int(next(tok))
        next(tok)  # edge count, ignored
        vertices = np.array([[float(next(tok)) for _ in range(3)] for _ in range(nv)])
        triangles = []
        for _ in range(nf):
            cnt = int(next(tok))
            idx = [int(next(tok)) for _ in range(cnt)]
            if cnt != 3:
                raise MeshError(f"OFF face with {cnt} vertices; only triangles supported")
            triangles.append(idx)
    except (StopIteration, ValueError) as exc:
        raise MeshError(f"failed to parse OFF file: {exc}") from exc
    return vertices, np.array(triangles, dtype=np.int64)


def _parse_gmsh_v2(text):
    lines = [ln.strip() for ln in text.splitlines()]
    try:
        i_nodes = lines.index("$Nodes")
        i_elems = lines.index("$Elements")
        nv = int(lines[i_nodes + 1])
        node_ids = {}
        coords = []
        for k in range(nv):
            parts = lines[i_nodes + 2 + k].split()
            node_ids[int(parts[0])] = k
            coords.append([float(parts[1]), float(parts[2]), float(parts[3])])
        ne = int(lines[i_elems + 1])
        triangles = []
        for k in range(ne):
            parts = lines[i_elems + 2 + k].split()
            etype = int(parts[1])
            if etype != 2:  # 3-node triangle
                continue
            ntags = int(parts[2])
            ids = [int(p) for p in parts[3 + ntags : 6 + ntags]]
            triangles.append([node_ids[i] for i in ids])
    except (ValueError, IndexError) as exc:
        raise MeshError(f"failed to parse Gmsh ASCII v2 file: {exc}") from exc
    if not triangles:
        raise MeshError("Gmsh file contains no 3-node triangle elements")
    return np.array(coords), np.array(triangles, dtype=np.int64)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

class _VertexPool:
    """Deduplicating vertex store with a spatial-hash tolerance merge."""

    def __init__(self, tol):
        self.tol = tol
        self.coords = []
        self.cells = {}

    def add(self, p):
        p = np.asarray(p, dtype=float)
        base = np.floor(p / self.tol).astype(np.int64)
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                for dz in (0, -1, 1):
                    key = (base[0] + dx, base[1] + dy, base[2] + dz)
                    for idx in self.cells.get(key, ()):
                        if np.linalg.norm(self.coords[idx] - p) < self.tol:
                            return idx
        idx = len(self.coords)
        self.coords.append(p)
        self.cells.setdefault(tuple(base), []).append(idx)
        return idx

    def array(self):
        return np.array(self.coords)


def _subdivide_face(pool, a, b, c, n, c_breaks=None):
    """Split triangle (a, b, c) into n^2 triangles, returning index triplets.

    c_breaks optionally remaps the n+1 lattice rows of the barycentric
    coordinate of vertex c (monotone array from 0 to 1, default uniform).
    """
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    grid = {}
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            if c_breaks is None:
                p = (i * a + j * b + k * c) / n
            else:
                w = c_breaks[k]
                rem = 1.0 - w
                u = rem * i / (i + j) if i + j else 0.0
                v = rem * j / (i + j) if i + j else 0.0
                p = u * a + v * b + w * c
            grid[(i, j)] = pool.add(p)
    tris = []
    for i in range(n):
        for j in range(n - i):
            tris.append([grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]])
            if j < n - i - 1:
                tris.append([grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]])
    return tris


def _subdivide_quad(pool, v00, v10, v11, v01, nu, nv, v_breaks=None, offset_rows=False):
    """Split quad into 2*nu*nv triangles (bilinear grid).

    v_breaks optionally remaps the nv+1 grid rows of the v direction
    (from the v00-v10 edge towards the v01-v11 edge).  offset_rows shifts
    the interior columns of every other row by half a cell, turning the
    right-triangle pattern into near-equilateral strips (face boundaries
    keep the uniform division).
    """
    v00, v10, v11, v01 = (np.asarray(x, dtype=float) for x in (v00, v10, v11, v01))
    grid = {}
    for i in range(nu + 1):
        for j in range(nv + 1):
            u = i / nu
            if offset_rows and j % 2 == 1 and 0 < i < nu:
                u = min((i + 0.5) / nu, 1.0)
            v = j / nv if v_breaks is None else v_breaks[j]
            p = (1 - u) * (1 - v) * v00 + u * (1 - v) * v10 + u * v * v11 + (1 - u) * v * v01
            grid[(i, j)] = pool.add(p)
    tris = []
    for i in range(nu):
        for j in range(nv):
            tris.append([grid[(i, j)], grid[(i + 1, j)], grid[(i + 1, j + 1)]])
            tris.append([grid[(i, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]])
    return tris


def _graded_breaks(n, ratio):
    """n+1 breakpoints on [0, 1] with geometric spacing; the last interval is
    `ratio` times the first (ratio < 1 clusters rows towards the end)."""
    if ratio == 1.0 or n < 2:
        return np.linspace(0.0, 1.0, n + 1)
    r = ratio ** (1.0 / (n - 1))
    spacing = r ** np.arange(n)
    return np.concatenate([[0.0], np.cumsum(spacing) / spacing.sum()])


_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def generate_sphere(diameter, target_edge, max_triangles=300_000):
    """Geodesic icosphere with mean edge length at most target_edge.

    Each icosahedron face is split into n^2 triangles and the vertices are
    projected onto the sphere; n is the smallest frequency meeting the
    target.  All vertices lie exactly at radius diameter/2.
    """
    if diameter <= 0.0:
        raise ValueError("diameter must be positive")
    if target_edge >= diameter:
        raise ValueError("target_edge must be smaller than the diameter")
    radius = 0.5 * diameter
    base_edge = radius / math.sin(2.0 * math.pi / 5.0)  # icosahedron edge
    n = max(1, math.ceil(base_edge / target_edge))
    while True:
        if 20 * n * n > max_triangles:
            raise ValueError(
                f"sphere with target_edge={target_edge} needs {20 * n * n} triangles"
                f" (cap {max_triangles})"
            )
        mesh = _icosphere(radius, n)
        if mesh_stats(mesh).mean_edge_length <= target_edge:
            return mesh
        n += 1


def _icosphere(radius, n):
    pool = _VertexPool(tol=1e-9 * radius)
    tris = []
    for face in _ICO_FACES:
        tris += _subdivide_face(pool, *_ICO_VERTS[face], n)
    verts = pool.array()
    verts *= radius / np.linalg.norm(verts, axis=1)[:, None]
    return TriangleMesh(verts, np.array(tris, dtype=np.int64))


def generate_canonical(shape, dims, target_edge, max_triangles=300_000):
    """Exact polyhedral surface meshes: cube, square pyramid, sharp wedge.

    dims (all in meters):
      cube:    {"side"}
      pyramid: {"base", "height"}  square base centered at origin, apex on +z
      wedge:   {"length", "base", "height", "grading"}  triangular prism
               along x whose isosceles cross-section has the given base width
               and apex height (sharp edge on top); grading < 1 shrinks the
               element rows geometrically towards the sharp edge
    """
    if shape == "cube":
        mesh = _cube(dims["side"], target_edge)
    elif shape == "pyramid":
        mesh = _pyramid(dims["base"], dims["height"], target_edge)
    elif shape == "wedge":
        mesh = _wedge(dims["length"], dims["base"], dims["height"], target_edge,
                      grading=dims.get("grading", 1.0))
    else:
        raise ValueError(f"unknown canonical shape {shape!r}")
    if mesh.n_triangles > max_triangles:
        raise ValueError(f"{shape} at target_edge={target_edge} exceeds triangle cap")
    return mesh


def _divisions(length, target_edge):
    return max(1, math.ceil(length / target_edge))


def _cube(side, target_edge):
    if side <= 0.0:
        raise ValueError("cube side must be positive")
    # mean edge of a grid-split face is (2 + sqrt(2))/3 * h
    m = max(1, math.ceil((2.0 + math.sqrt(2.0)) / 3.0 * side / target_edge))
    s = side / 2.0
    pool = _VertexPool(tol=1e-9 * side)
    tris = []
    c = [
        ([-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s]),  # z = -s
        ([-s, -s, s], [-s, s, s], [s, s, s], [s, -s, s]),      # z = +s
        ([-s, -s, -s], [-s, -s, s], [s, -s, s], [s, -s, -s]),  # y = -s
        ([-s, s, -s], [s, s, -s], [s, s, s], [-s, s, s]),      # y = +s
        ([-s, -s, -s], [-s, s, -s], [-s, s, s], [-s, -s, s]),  # x = -s
        ([s, -s, -s], [s, -s, s], [s, s, s], [s, s, -s]),      # x = +s
    ]
    for quad in c:
        tris += _subdivide_quad(pool, *quad, m, m)
    return TriangleMesh(pool.array(), np.array(tris, dtype=np.int64))


def _pyramid(base, height, target_edge):
    if base <= 0.0 or height <= 0.0:
        raise ValueError("pyramid dimensions must be positive")
    s = base / 2.0
    apex = np.array([0.0, 0.0, height])
    corners = [
        np.array([-s, -s, 0.0]),
        np.array([s, -s, 0.0]),
        np.array([s, s, 0.0]),
        np.array([-s, s, 0.0]),
    ]
    slant = math.sqrt(2.0 * s * s + height * height)
    m = _divisions(max(base, slant), target_edge)
    pool = _VertexPool(tol=1e-9 * max(base, height))
    tris = []
    tris += _subdivide_quad(pool, corners[0], corners[3], corners[2], corners[1], m, m)
    for k in range(4):
        a, b = corners[k], corners[(k + 1) % 4]
        tris += _subdivide_face(pool, a, b, apex, m)
    return TriangleMesh(pool.array(), np.array(tris, dtype=np.int64))


def _wedge(length, base, height, target_edge, grading=1.0):
    if min(length, base, height) <= 0.0:
        raise ValueError("wedge dimensions must be positive")
    b2 = base / 2.0
    # cross-section in the yz plane: base corners at z=0, sharp edge on top
    cs = [np.array([0.0, -b2, 0.0]), np.array([0.0, b2, 0.0]), np.array([0.0, 0.0, height])]
    ex = np.array([length, 0.0, 0.0])
    m = _divisions(max(base, math.hypot(b2, height)), target_edge)
    k = _divisions(length, target_edge)
    breaks = _graded_breaks(m, grading)
    pool = _VertexPool(tol=1e-9 * max(length, base, height))
    tris = []
    tris += _subdivide_face(pool, cs[0], cs[1], cs[2], m, c_breaks=breaks)      # x = 0 cap
    tris += _subdivide_face(pool, cs[1] + ex, cs[0] + ex, cs[2] + ex, m, c_breaks=breaks)
    tris += _subdivide_quad(pool, cs[0], cs[0] + ex, cs[1] + ex, cs[1], k, m, offset_rows=True)
    tris += _subdivide_quad(pool, cs[1], cs[1] + ex, cs[2] + ex, cs[2], k, m, v_breaks=breaks, offset_rows=True)
    tris += _subdivide_quad(pool, cs[0], cs[0] + ex, cs[2] + ex, cs[2], k, m, v_breaks=breaks, offset_rows=True)
    return TriangleMesh(pool.array(), np.array(tris, dtype=np.int64))
