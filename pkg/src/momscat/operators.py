"""Dense system matrices and excitation vectors for one mesh + frequency.

Assembles the vector-potential matrix B, the scalar-potential matrix C in
its weak (divergence on both sides) form, the rotated-tested and
plain-tested gradient-kernel matrices K_alpha and K_beta, and the two Gram
matrices G_bb (RWG/RWG) and G_ba (RWG/rotated-RWG).

The pair integrals run over triangle pairs: separated pairs use pure Gauss
rules; pairs closer than a few edge lengths, touching pairs and self pairs
subtract the static 1/(4 pi R) kernel part, which is integrated with the
analytic flat-triangle potentials.  The gradient kernel needs no extraction:
its tangential trace vanishes on coplanar pairs, so the self contribution is
exactly zero (the extracted solid-angle residue is the explicit identity
term of the MFIE), and touching pairs are integrated with an elevated rule.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from momscat.constants import C0, MU0, Z0, wavenumber
from momscat.quadrature import FOUR_PI, gauss_rule, smoothed_kernel, static_potentials


@dataclass
class QuadConfig:
    """Quadrature configuration for matrix assembly."""

    base_degree: int = 3       # separated pairs, both sides
    smooth_degree: int = 5     # extracted pairs (smooth remainder + static outer)
    touch_degree: int = 7      # gradient kernel on vertex/edge-sharing pairs
    near_factor: float = 3.0   # centroid distance threshold in max edge lengths
    excitation_degree: int = 5
    block_bytes: float = 3.0e8


@dataclass
class OperatorSet:
    """All dense matrices for one mesh and frequency."""

    b: np.ndarray
    c: np.ndarray
    k_alpha: np.ndarray
    k_beta: np.ndarray
    g_bb: np.ndarray
    g_ba: np.ndarray
    k0: float
    z0: float
    frequency: float
    n: int

    def efie_matrix(self):
        """j k0 Z0 (B + C / k0^2), the tested EFIE system matrix."""
        return 1j * self.k0 * self.z0 * (self.b + self.c / self.k0**2)

    def mfie_matrix(self):
        """-(G_bb / 2 + K_alpha), the classically tested MFIE system matrix."""
        return -(0.5 * self.g_bb + self.k_alpha)


@dataclass
class ExcitationVectors:
    e: np.ndarray
    h: np.ndarray


@dataclass
class PlaneWave:
    """Incident plane wave E0 * exp(-j k . r) with H = (k_hat x E0)/Z0 * exp(-j k . r)."""

    k_hat: np.ndarray
    e0: np.ndarray
    frequency: float

    def __post_init__(self):
        k_hat = np.asarray(self.k_hat, dtype=float)
        norm = np.linalg.norm(k_hat)
        if not np.isclose(norm, 1.0, atol=1e-9):
            k_hat = k_hat / norm
        object.__setattr__(self, "k_hat", k_hat)
        e0 = np.asarray(self.e0, dtype=complex)
        if abs(k_hat @ e0) > 1e-12 * max(np.linalg.norm(e0), 1e-300):
            raise ValueError("polarization must be transverse to the propagation direction")
        object.__setattr__(self, "e0", e0)

    @property
    def k0(self):
        return wavenumber(self.frequency)

    def e_field(self, pts):
        phase = np.exp(-1j * self.k0 * (np.asarray(pts) @ self.k_hat))
        return phase[..., None] * self.e0

    def h_field(self, pts):
        h0 = np.cross(self.k_hat, self.e0) / Z0
        phase = np.exp(-1j * self.k0 * (np.asarray(pts) @ self.k_hat))
        return phase[..., None] * h0


class _Geometry:
    """Per-mesh quadrature tables reused by assembly and post-processing."""

    def __init__(self, space, degree):
        mesh = space.mesh
        rule = gauss_rule(degree)
        self.rule = rule
        self.pts = np.einsum("qk,tkc->tqc", rule.points, mesh.triangle_vertices())
        self.w_area = rule.weights[None, :] * mesh.areas[:, None]
        # unscaled RWG direction (x - free vertex) per slot; alpha = n x that
        verts = mesh.vertices[mesh.triangles]          # (T, 3, 3)
        self.bv = self.pts[:, None, :, :] - verts[:, :, None, :]
        self.av = np.cross(mesh.normals[:, None, None, :], self.bv)


def _pair_flags(mesh, near_factor):
    """Boolean (T, T) matrix flagging self, touching and near pairs."""
    t = mesh.n_triangles
    flags = np.zeros((t, t), dtype=bool)
    np.fill_diagonal(flags, True)
    vert_tris = {}
    for k, tri in enumerate(mesh.triangles):
        for v in tri:
            vert_tris.setdefault(int(v), []).append(k)
    touch_rows, touch_cols = [], []
    for tris in vert_tris.values():
        for a in tris:
            for b in tris:
                if a != b:
                    touch_rows.append(a)
                    touch_cols.append(b)
    flags[touch_rows, touch_cols] = True
    touching = flags.copy()

    radius = near_factor * mesh.edge_lengths().max()
    tree = cKDTree(mesh.centroids)
    for a, neighbors in enumerate(tree.query_ball_point(mesh.centroids, radius)):
        flags[a, neighbors] = True
    return flags, touching


_EPS_TERMS = (
    (0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
    (0, 2, 1, -1.0), (1, 0, 2, -1.0), (2, 1, 0, -1.0),
)


def assemble(space, frequency, quad=None, with_k=True):
    """Assemble all operator matrices for the space at the given frequency.

    with_k=False skips the gradient-kernel matrices (EFIE-only studies).
    """
    if frequency <= 0.0:
        raise ValueError("frequency must be positive")
    quad = quad or QuadConfig()
    k0 = wavenumber(frequency)
    n = space.n

    flags, touching = _pair_flags(space.mesh, quad.near_factor)
    b = np.zeros((n, n), dtype=complex)
    c = np.zeros((n, n), dtype=complex)
    k_alpha = np.zeros((n, n), dtype=complex) if with_k else None
    k_beta = np.zeros((n, n), dtype=complex) if with_k else None

    geo = _Geometry(space, quad.base_degree)
    _assemble_far(space, geo, flags, k0, b, c, k_alpha, k_beta, quad)
    _assemble_extracted(space, flags, k0, b, c, quad)
    if with_k:
        _assemble_k_near(space, flags, touching, k0, k_alpha, k_beta, quad)

    g_bb, g_ba = gram_matrices(space)
    return OperatorSet(
        b=b, c=c, k_alpha=k_alpha, k_beta=k_beta, g_bb=g_bb, g_ba=g_ba,
        k0=k0, z0=Z0, frequency=frequency, n=n,
    )


def assemble_efie_matrix(space, frequency, quad=None):
    """Memory-lean j k0 Z0 (B + C/k0^2) accumulated into a single matrix.

    Used for large refined-mesh EFIE references where holding all six
    operator matrices would be wasteful.
    """
    if frequency <= 0.0:
        raise ValueError("frequency must be positive")
    quad = quad or QuadConfig()
    k0 = wavenumber(frequency)
    n = space.n
    flags, _ = _pair_flags(space.mesh, quad.near_factor)
    target = np.zeros((n, n), dtype=complex)
    geo = _Geometry(space, quad.base_degree)
    scale_b = 1j * k0 * Z0
    scale_c = 1j * Z0 / k0
    _assemble_far(space, geo, flags, k0, target, target, None, None, quad,
                  b_scale=scale_b, c_scale=scale_c)
    _assemble_extracted(space, flags, k0, target, target, quad,
                        b_scale=scale_b, c_scale=scale_c)
    return target


def _scatter(target, space, rows, cols, local, row_scale, col_scale):
    """Accumulate local (..., 3, 3) pair blocks into the global matrix."""
    fi = space.func_index
    vals = local * row_scale[rows][..., :, None] * col_scale[cols][..., None, :]
    np.add.at(target, (fi[rows][..., :, None], fi[cols][..., None, :]), vals)


def _curl_contract(pt):
    """Contract the (d, e) axes of pt[..., d, b, e] with the Levi-Civita
    symbol, returning w[..., b, c] with w_c = sum_de eps_cde pt[d, b, e]."""
    return np.stack(
        [
            pt[..., 1, :, 2] - pt[..., 2, :, 1],
            pt[..., 2, :, 0] - pt[..., 0, :, 2],
            pt[..., 0, :, 1] - pt[..., 1, :, 0],
        ],
        axis=-1,
    )


def _assemble_far(space, geo, flags, k0, b, c, k_alpha, k_beta, quad,
                  b_scale=1.0, c_scale=1.0):
    mesh = space.mesh
    t = mesh.n_triangles
    nq = len(geo.rule.weights)
    block = max(1, int(quad.block_bytes / (t * nq * nq * 48)))
    pts = geo.pts
    div2 = 2.0 * space.coef
    with_k = k_alpha is not None
    tiny = 1e-30
    # source-side basis values as (t, nq, 9) for batched matmuls over q
    bv_src = np.ascontiguousarray(geo.bv.transpose(0, 2, 1, 3).reshape(t, nq, 9))

    for p0 in range(0, t, block):
        p1 = min(p0 + block, t)
        keep = ~flags[p0:p1]
        nb = p1 - p0
        b_loc = np.zeros((nb, t, 3, 3), dtype=complex)
        ka_loc = np.zeros((nb, t, 3, 3), dtype=complex) if with_k else None
        kb_loc = np.zeros((nb, t, 3, 3), dtype=complex) if with_k else None
        s00 = np.zeros((nb, t), dtype=complex)
        for i in range(nq):
            d = pts[p0:p1, i, :][:, None, None, :] - pts[None, :, :, :]   # (nb, t, nq, 3)
            r = np.sqrt(np.einsum("pqjc,pqjc->pqj", d, d))
            np.maximum(r, tiny, out=r)
            expf = np.exp(-1j * k0 * r)
            expf *= keep[:, :, None]
            # both quadrature weights folded into the kernel
            w2 = geo.w_area[p0:p1, i, None, None] * geo.w_area[None, :, :]
            gw = expf * (w2 / (FOUR_PI * r))
            # ib[p, q, b, c] = sum_j gw bv_src  (batched gemm over q)
            ib = np.matmul(gw.transpose(1, 0, 2), bv_src).transpose(1, 0, 2).reshape(nb, t, 3, 3)
            bvp = geo.bv[p0:p1, :, i, :]                                  # (nb, 3a, 3c)
            b_loc += np.matmul(ib.reshape(nb, 3 * t, 3), bvp.transpose(0, 2, 1)).reshape(
                nb, t, 3, 3).transpose(0, 1, 3, 2)
            s00 += gw.sum(axis=2)
            if with_k:
                ggw = (-(1.0 + 1j * k0 * r) * expf * w2 / (FOUR_PI * r**3))[..., None] * d
                gq = np.ascontiguousarray(ggw.transpose(1, 0, 3, 2).reshape(t, nb * 3, nq))
                pt = np.matmul(gq, bv_src).reshape(t, nb, 3, 3, 3).transpose(1, 0, 2, 3, 4)
                w = _curl_contract(pt).reshape(nb, 3 * t, 3)              # (nb, t*3b, 3c)
                avp = geo.av[p0:p1, :, i, :]
                ka_loc += np.matmul(w, avp.transpose(0, 2, 1)).reshape(
                    nb, t, 3, 3).transpose(0, 1, 3, 2)
                kb_loc += np.matmul(w, bvp.transpose(0, 2, 1)).reshape(
                    nb, t, 3, 3).transpose(0, 1, 3, 2)
        rows = np.broadcast_to(np.arange(p0, p1)[:, None], (nb, t))
        cols = np.broadcast_to(np.arange(t)[None, :], (nb, t))
        _scatter(b, space, rows, cols, b_scale * b_loc, space.coef, space.coef)
        _scatter(c, space, rows, cols,
                 np.broadcast_to((-c_scale) * s00[..., None, None], (nb, t, 3, 3)), div2, div2)
        if with_k:
            _scatter(k_alpha, space, rows, cols, ka_loc, space.coef, space.coef)
            _scatter(k_beta, space, rows, cols, kb_loc, space.coef, space.coef)


def _assemble_extracted(space, flags, k0, b, c, quad, b_scale=1.0, c_scale=1.0):
    """B and C contributions of flagged pairs: smooth remainder + static part."""
    mesh = space.mesh
    geo = _Geometry(space, quad.smooth_degree)
    p_idx, q_idx = np.nonzero(flags)
    div2 = 2.0 * space.coef
    verts = mesh.vertices[mesh.triangles]
    chunk = max(1, int(quad.block_bytes / (len(geo.rule.weights) ** 2 * 64)))
    for c0 in range(0, len(p_idx), chunk):
        pp = p_idx[c0 : c0 + chunk]
        qq = q_idx[c0 : c0 + chunk]
        po = geo.pts[pp]                      # (m, nq, 3)
        ps = geo.pts[qq]
        d = po[:, :, None, :] - ps[:, None, :, :]
        r = np.linalg.norm(d, axis=-1)
        ker = smoothed_kernel(r, k0)
        kw = ker * geo.w_area[pp][:, :, None] * geo.w_area[qq][:, None, :]
        b_loc = np.einsum("mij,maic,mbjc->mab", kw, geo.bv[pp], geo.bv[qq])
        s00 = kw.sum(axis=(1, 2))

        # static part: analytic inner over the source triangle
        m, nq = po.shape[:2]
        tris_rep = np.repeat(verts[qq], nq, axis=0)
        i0, irho, rho = static_potentials(tris_rep, po.reshape(-1, 3))
        i0 = i0.reshape(m, nq)
        ir = (irho + rho * i0.reshape(-1, 1)).reshape(m, nq, 3)
        # inner integral of (r' - v_b)/R = ir - v_b * i0
        inner = ir[:, None, :, :] - verts[qq][:, :, None, :] * i0[:, None, :, None]
        b_loc += np.einsum("mi,maic,mbic->mab", geo.w_area[pp], geo.bv[pp], inner) / FOUR_PI
        s00 += np.einsum("mi,mi->m", geo.w_area[pp], i0) / FOUR_PI

        _scatter(b, space, pp, qq, b_scale * b_loc, space.coef, space.coef)
        _scatter(c, space, pp, qq,
                 np.broadcast_to((-c_scale) * s00[:, None, None], (len(pp), 3, 3)), div2, div2)


def _assemble_k_near(space, flags, touching, k0, k_alpha, k_beta, quad):
    """Gradient-kernel contributions of flagged pairs (excluding self pairs)."""
    mesh = space.mesh
    near = flags & ~touching
    touch = touching.copy()
    np.fill_diagonal(touch, False)
    for mask, degree in ((near, quad.smooth_degree), (touch, quad.touch_degree)):
        p_idx, q_idx = np.nonzero(mask)
        if len(p_idx) == 0:
            continue
        geo = gauss_rule(degree)
        pts = np.einsum("qk,tkc->tqc", geo.points, mesh.triangle_vertices())
        w_area = geo.weights[None, :] * mesh.areas[:, None]
        verts = mesh.vertices[mesh.triangles]
        bv = pts[:, None, :, :] - verts[:, :, None, :]
        av = np.cross(mesh.normals[:, None, None, :], bv)
        nq = len(geo.weights)
        bv_src = np.ascontiguousarray(bv.transpose(0, 2, 1, 3).reshape(-1, nq, 9))
        chunk = max(1, int(quad.block_bytes / (nq * nq * 120)))
        for c0 in range(0, len(p_idx), chunk):
            pp = p_idx[c0 : c0 + chunk]
            qq = q_idx[c0 : c0 + chunk]
            m = len(pp)
            d = pts[pp][:, :, None, :] - pts[qq][:, None, :, :]
            r = np.linalg.norm(d, axis=-1)
            gg = (-(1.0 + 1j * k0 * r) * np.exp(-1j * k0 * r) / (FOUR_PI * r**3))[..., None] * d
            ggw = gg * (w_area[pp][:, :, None] * w_area[qq][:, None, :])[..., None]
            # pt[m, i, d, b, e] via batched gemm over pairs, then curl-contract
            gq = np.ascontiguousarray(ggw.transpose(0, 1, 3, 2).reshape(m, nq * 3, nq))
            pt = np.matmul(gq, bv_src[qq]).reshape(m, nq, 3, 3, 3)
            w = _curl_contract(pt)                              # (m, i, b, c)
            w_r = w.transpose(0, 2, 1, 3).reshape(m, 3, nq * 3)  # (m, b, i*c)
            av_r = av[pp].reshape(m, 3, nq * 3)
            bv_r = bv[pp].reshape(m, 3, nq * 3)
            ka_loc = np.matmul(av_r, w_r.transpose(0, 2, 1))     # (m, a, b)
            kb_loc = np.matmul(bv_r, w_r.transpose(0, 2, 1))
            _scatter(k_alpha, space, pp, qq, ka_loc, space.coef, space.coef)
            _scatter(k_beta, space, pp, qq, kb_loc, space.coef, space.coef)


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

def gram_matrices(space):
    """Exact G_bb (symmetric positive definite) and G_ba (antisymmetric)."""
    mesh = space.mesh
    geo = _Geometry(space, degree=3)  # integrand degree 2, rule exact
    g_bb = np.zeros((space.n, space.n))
    g_ba = np.zeros((space.n, space.n))
    bb = np.einsum("tq,taqc,tbqc->tab", geo.w_area, geo.bv, geo.bv)
    ba = np.einsum("tq,taqc,tbqc->tab", geo.w_area, geo.bv, geo.av)
    fi = space.func_index
    scale = space.coef[:, :, None] * space.coef[:, None, :]
    rows = fi[:, :, None] + np.zeros((1, 1, 3), dtype=int)
    cols = fi[:, None, :] + np.zeros((1, 3, 1), dtype=int)
    np.add.at(g_bb, (rows, cols), bb * scale)
    np.add.at(g_ba, (rows, cols), ba * scale)
    return g_bb, g_ba


def _shared_triangles(space, m, n):
    tm = {int(space.tri_plus[m]), int(space.tri_minus[m])}
    tn = {int(space.tri_plus[n]), int(space.tri_minus[n])}
    return sorted(tm & tn)


def _local_slot(space, func, tri):
    return int(np.nonzero(space.func_index[tri] == func)[0][0])


def gram_bb_entry(space, m, n):
    """Single entry of G_bb by exact integration over shared triangles."""
    return _gram_entry(space, m, n, rotated=False)


def gram_ba_entry(space, m, n):
    """Single entry of G_ba (beta_m . (n x beta_n)) over shared triangles."""
    return _gram_entry(space, m, n, rotated=True)


def _gram_entry(space, m, n, rotated):
    mesh = space.mesh
    rule = gauss_rule(3)
    total = 0.0
    for tri in _shared_triangles(space, m, n):
        verts = mesh.triangle_vertices()[tri]
        pts = rule.physical_points(verts)
        sl_m = _local_slot(space, m, tri)
        sl_n = _local_slot(space, n, tri)
        fm = space.coef[tri, sl_m] * (pts - mesh.vertices[mesh.triangles[tri, sl_m]])
        fn = space.coef[tri, sl_n] * (pts - mesh.vertices[mesh.triangles[tri, sl_n]])
        if rotated:
            fn = np.cross(mesh.normals[tri], fn)
        total += mesh.areas[tri] * np.einsum("q,qc,qc->", rule.weights, fm, fn)
    return float(total)


# ---------------------------------------------------------------------------
# excitation
# ---------------------------------------------------------------------------

def excite_plane_wave(space, wave, degree=5):
    """Tested incident-field vectors e (beta-tested E) and h (alpha-tested H)."""
    geo = _Geometry(space, degree)
    e_inc = wave.e_field(geo.pts)
    h_inc = wave.h_field(geo.pts)
    e_loc = np.einsum("tq,taqc,tqc->ta", geo.w_area, geo.bv, e_inc)
    h_loc = np.einsum("tq,taqc,tqc->ta", geo.w_area, geo.av, h_inc)
    e = np.zeros(space.n, dtype=complex)
    h = np.zeros(space.n, dtype=complex)
    np.add.at(e, space.func_index, e_loc * space.coef)
    np.add.at(h, space.func_index, h_loc * space.coef)
    return ExcitationVectors(e=e, h=h)


# ---------------------------------------------------------------------------
# debug matrix dump
# ---------------------------------------------------------------------------

_DUMP_MAGIC = b"MOMSCAT1"


def dump_matrix(path, matrix):
    """Write a square complex matrix: 16-byte header (magic, N), then
    row-major complex64 values, little-endian."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    with open(path, "wb") as f:
        f.write(_DUMP_MAGIC)
        f.write(struct.pack("<q", n))
        f.write(matrix.astype(np.complex64).tobytes(order="C"))


def load_matrix(path):
    """Read a matrix written by dump_matrix."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _DUMP_MAGIC:
            raise ValueError("not a momscat matrix dump")
        (n,) = struct.unpack("<q", f.read(8))
        data = np.frombuffer(f.read(), dtype=np.complex64)
    return data.reshape(n, n)
