"""RWG function space on a closed triangle mesh.

One div-conforming RWG function per edge, normalized with the classical
l_n/(2A) factor so the normal component across the shared edge equals one.
The plus triangle of each function is the adjacent triangle with the lower
index; functions are ordered by their (sorted) edge vertex pair.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChargeDiagnostics:
    """Per-triangle surface-divergence coefficients and charge densities."""

    d: np.ndarray    # divergence coefficient per triangle (units A/m^2)
    rho: np.ndarray  # charge density (j/omega) * d per triangle (C/m^2)

    @property
    def real_d_norm(self):
        return float(np.linalg.norm(self.d.real))

    @property
    def imag_d_norm(self):
        return float(np.linalg.norm(self.d.imag))


class RwgSpace:
    """The N RWG functions of a closed mesh plus per-triangle lookup tables."""

    def __init__(self, mesh):
        self.mesh = mesh
        edges = mesh.edges
        edge_tris = mesh.edge_triangles
        self.n = len(edges)
        self.edge_vertices = edges
        self.tri_plus = edge_tris[:, 0]
        self.tri_minus = edge_tris[:, 1]
        self.edge_length = mesh.edge_lengths()
        self.area_plus = mesh.areas[self.tri_plus]
        self.area_minus = mesh.areas[self.tri_minus]
        self.free_vertex_plus = _opposite_vertex(mesh.triangles, self.tri_plus, edges)
        self.free_vertex_minus = _opposite_vertex(mesh.triangles, self.tri_minus, edges)

        # per-triangle tables: slot a of triangle t is its local edge opposite
        # vertex a; every edge of a closed mesh carries a function
        t = mesh.n_triangles
        self.func_index = np.full((t, 3), -1, dtype=np.int64)
        self.func_sign = np.zeros((t, 3))
        tris = mesh.triangles
        for n in range(self.n):
            for tri, sign in ((self.tri_plus[n], 1.0), (self.tri_minus[n], -1.0)):
                row = tris[tri]
                in_edge = np.isin(row, edges[n])
                slot = int(np.argmin(in_edge))
                self.func_index[tri, slot] = n
                self.func_sign[tri, slot] = sign
        # sign * l / (2A): beta = coef * (r - free_vertex)
        areas3 = mesh.areas[:, None]
        lengths3 = np.where(self.func_index >= 0, self.edge_length[self.func_index], 0.0)
        self.coef = self.func_sign * lengths3 / (2.0 * areas3)
        for arr in (self.func_index, self.func_sign, self.coef):
            arr.setflags(write=False)

    def divergence(self, n, tri):
        """Constant surface divergence of function n on triangle tri."""
        if tri == self.tri_plus[n]:
            return self.edge_length[n] / self.area_plus[n]
        if tri == self.tri_minus[n]:
            return -self.edge_length[n] / self.area_minus[n]
        return 0.0


def _opposite_vertex(triangles, tri_idx, edges):
    rows = triangles[tri_idx]
    mask = (rows[:, :, None] == edges[:, None, :]).any(axis=2)
    return rows[np.arange(len(rows)), np.argmin(mask, axis=1)]


def build_rwg_space(mesh):
    """Construct the RWG space of a closed mesh (one function per edge)."""
    return RwgSpace(mesh)


def _check_point_in_triangle(mesh, tri, p, tol=1e-10):
    verts = mesh.vertices[mesh.triangles[tri]]
    # barycentric coordinates in the triangle plane
    e1 = verts[1] - verts[0]
    e2 = verts[2] - verts[0]
    d = np.atleast_2d(p) - verts[0]
    g = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    rhs = np.stack([d @ e1, d @ e2])
    uv = np.linalg.solve(g, rhs)
    bary = np.stack([1.0 - uv[0] - uv[1], uv[0], uv[1]])
    if (bary < -tol).any() or (bary > 1.0 + tol).any():
        raise ValueError("evaluation point lies outside the triangle")


def eval_beta(space, n, tri, p):
    """RWG value of function n on supporting triangle tri at point(s) p."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    _check_point_in_triangle(space.mesh, tri, p)
    if tri == space.tri_plus[n]:
        sign, area, free = 1.0, space.area_plus[n], space.free_vertex_plus[n]
    elif tri == space.tri_minus[n]:
        sign, area, free = -1.0, space.area_minus[n], space.free_vertex_minus[n]
    else:
        return np.zeros_like(p)[0] if p.shape[0] == 1 else np.zeros_like(p)
    val = sign * space.edge_length[n] / (2.0 * area) * (p - space.mesh.vertices[free])
    return val[0] if val.shape[0] == 1 else val


def eval_alpha(space, n, tri, p):
    """Rotated RWG value n_tri x beta_n at point(s) p on triangle tri."""
    beta = eval_beta(space, n, tri, p)
    return np.cross(space.mesh.normals[tri], beta)


def charge_vector(space, i, omega):
    """Per-triangle divergence coefficients and charges of a current solution.

    d_k = sum_n i_n div(beta_n)|_k, rho_k = (j/omega) d_k.
    """
    i = np.asarray(i)
    if i.shape != (space.n,):
        raise ValueError(f"coefficient vector has shape {i.shape}, expected ({space.n},)")
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    d = np.zeros(space.mesh.n_triangles, dtype=complex)
    np.add.at(d, space.tri_plus, i * space.edge_length / space.area_plus)
    np.add.at(d, space.tri_minus, -i * space.edge_length / space.area_minus)
    return ChargeDiagnostics(d=d, rho=1j / omega * d)
