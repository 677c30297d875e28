"""Triangle quadrature rules and singular pair integration for the free-space kernel.

Pair integrals over triangle products use Gauss rules on both triangles for
separated pairs.  Pairs that share vertices (or are identical) are handled by
subtracting the static 1/(4*pi*R) part, which is integrated with the
closed-form potential of a constant/linear source over a flat triangle; the
remaining kernel is smooth and Gauss-integrable.  The gradient kernel on a
coplanar pair has a vanishing tangential trace, so its self contribution is
the explicit 1/2 identity term carried by the caller, not by this module.
"""

from dataclasses import dataclass

import numpy as np

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature rule on the reference triangle.

    points are barycentric coordinates (n, 3); weights are area-normalized
    (they sum to 1, so integral = area * sum(w_i * f_i)).
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray

    def physical_points(self, verts):
        """Map rule points onto a physical triangle (3, 3) -> (n, 3)."""
        return self.points @ np.asarray(verts, dtype=float)


def _rule_deg1():
    return np.array([[1, 1, 1]]) / 3.0, np.array([1.0])


def _rule_deg2():
    pts = np.array(
        [
            [2 / 3, 1 / 6, 1 / 6],
            [1 / 6, 2 / 3, 1 / 6],
            [1 / 6, 1 / 6, 2 / 3],
        ]
    )
    return pts, np.full(3, 1 / 3)


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    pts = np.array([[b, a, a], [a, b, a], [a, a, b]])
    return pts, np.full(3, w)


def _rule_deg4_6pt():
    # classic positive 6-point rule, exact through degree 4
    p1, w1 = _orbit3(0.445948490915965, 0.223381589678011)
    p2, w2 = _orbit3(0.091576213509771, 0.109951743655322)
    return np.vstack([p1, p2]), np.concatenate([w1, w2])


def _rule_deg5_7pt():
    p0 = np.array([[1 / 3, 1 / 3, 1 / 3]])
    w0 = np.array([9 / 40])
    p1, w1 = _orbit3(0.470142064105115, 0.132394152788506)
    p2, w2 = _orbit3(0.101286507323456, 0.125939180544827)
    return np.vstack([p0, p1, p2]), np.concatenate([w0, w1, w2])


def _rule_collapsed(n):
    # tensor Gauss-Legendre on the collapsed square; positive weights,
    # exact through degree 2n-2 on the triangle
    x, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    wuv = np.outer(wu, wu).ravel()
    xi = (uu * (1.0 - vv)).ravel()
    eta = (uu * vv).ravel()
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    weights = 2.0 * uu.ravel() * wuv
    return pts, weights


_RULES = {}


def gauss_rule(degree):
    """Return a positive-weight rule exact at least to the given degree.

    Supported degrees: 1, 2, 3, 5, 7.
    """
    if degree not in (1, 2, 3, 5, 7):
        raise ValueError(f"unsupported quadrature degree {degree!r}; use one of 1, 2, 3, 5, 7")
    if degree not in _RULES:
        if degree == 1:
            pts, w = _rule_deg1()
        elif degree == 2:
            pts, w = _rule_deg2()
        elif degree == 3:
            pts, w = _rule_deg4_6pt()
        elif degree == 5:
            pts, w = _rule_deg5_7pt()
        else:
            pts, w = _rule_collapsed(5)
        pts.setflags(write=False)
        w.setflags(write=False)
        _RULES[degree] = TriangleRule(degree=degree, points=pts, weights=w)
    return _RULES[degree]


def triangle_area_normal(verts):
    """Area and unit normal of a flat triangle given as (3, 3) vertices."""
    verts = np.asarray(verts, dtype=float)
    cr = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    nrm = np.linalg.norm(cr)
    return 0.5 * nrm, cr / nrm


def static_potentials(tris, pts):
    """Closed-form static potential integrals over flat triangles.

    For each row k, with triangle tris[k] (3, 3) and observation point
    pts[k] (3,), returns

        i0[k]   = integral over the triangle of 1/R dA'
        irho[k] = integral of (r' - rho_k)/R dA'   (3-vector)
        rho[k]  = in-plane projection of pts[k]

    where R = |pts[k] - r'|.  Works for observation points on, above, or in
    the plane of the triangle (quadrature points never lie on an edge).
    """
    tris = np.asarray(tris, dtype=float)
    pts = np.asarray(pts, dtype=float)
    if tris.ndim == 2:
        tris = tris[None, :, :]
        pts = pts[None, :]
    m = tris.shape[0]

    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    cr = np.cross(e1, e2)
    nrm = np.linalg.norm(cr, axis=1, keepdims=True)
    n = cr / nrm
    scale = np.sqrt(nrm[:, 0])  # ~ triangle linear size
    tiny = (1e-12 * scale) ** 2

    h = np.einsum("kc,kc->k", pts - tris[:, 0], n)
    rho = pts - h[:, None] * n
    habs = np.abs(h)

    i0 = np.zeros(m)
    irho = np.zeros((m, 3))
    for i in range(3):
        a = tris[:, i]
        b = tris[:, (i + 1) % 3]
        ell = b - a
        length = np.linalg.norm(ell, axis=1, keepdims=True)
        s_hat = ell / length
        m_hat = np.cross(s_hat, n)
        sm = np.einsum("kc,kc->k", a - rho, s_hat)
        sp = np.einsum("kc,kc->k", b - rho, s_hat)
        t = np.einsum("kc,kc->k", a - rho, m_hat)
        r0sq = t * t + h * h
        rm = np.sqrt(sm * sm + r0sq)
        rp = np.sqrt(sp * sp + r0sq)

        # log term, cancellation-safe for points beyond either endpoint;
        # on the edge line (r0 ~ 0) the t*f and r0sq*f contributions vanish
        on_line = r0sq <= tiny
        with np.errstate(divide="ignore", invalid="ignore"):
            f_pos = np.log((rp + sp) / (rm + sm))
            f_neg = np.log((rm - sm) / (rp - sp))
        f = np.where(sp + sm >= 0.0, f_pos, f_neg)
        f = np.where(on_line, 0.0, f)

        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.arctan(t * sp / (r0sq + habs * rp)) - np.arctan(t * sm / (r0sq + habs * rm))
        beta = np.where(on_line, 0.0, beta)

        i0 += t * f - habs * beta
        irho += m_hat * (0.5 * (r0sq * f + sp * rp - sm * rm))[:, None]
    return i0, irho, rho


def _affine_moments(tri, pts):
    """Static moments for an affine surface density on a flat triangle.

    Returns (i0, ir) with i0[k] = int 1/R dA' and ir[k] = int r'/R dA', so
    int f(r')/R dA' = A @ ir + b * i0 for any affine f(r') = A r' + b whose
    tangential restriction matches f on the triangle plane.
    """
    i0, irho, rho = static_potentials(np.broadcast_to(tri, (len(pts), 3, 3)), pts)
    ir = irho + rho * i0[:, None]
    return i0, ir


def _subdivided_points(tri, n, rule):
    """Composite rule points and weights over an n^2 lattice subdivision."""
    e1 = (tri[1] - tri[0]) / n
    e2 = (tri[2] - tri[0]) / n
    corners = []
    for i in range(n):
        for j in range(n - i):
            a = tri[0] + i * e1 + j * e2
            corners.append([a, a + e1, a + e2])
            if j < n - i - 1:
                corners.append([a + e1, a + e1 + e2, a + e2])
    corners = np.asarray(corners)              # (n^2, 3, 3)
    pts = np.einsum("qk,mkc->mqc", rule.points, corners).reshape(-1, 3)
    weights = np.tile(rule.weights / (n * n), len(corners))
    return pts, weights


def integrate_static_singular(obs_tri, src_tri, obs_degree=7, tol=1e-7):
    """Integral of 1/(4*pi*R) over a (possibly touching/identical) triangle pair.

    The inner (source) integral uses the analytic closed form; the outer
    integral uses a composite Gauss rule, refined until two consecutive
    levels agree to tol and finished with one Richardson step.
    """
    rule = gauss_rule(obs_degree)
    obs_tri = np.asarray(obs_tri, dtype=float)
    src_tri = np.asarray(src_tri, dtype=float)
    area_o, _ = triangle_area_normal(obs_tri)

    previous = None
    for n in (1, 2, 4, 8, 16, 32):
        pts, weights = _subdivided_points(obs_tri, n, rule)
        i0, _, _ = static_potentials(np.broadcast_to(src_tri, (len(pts), 3, 3)), pts)
        value = area_o * np.dot(weights, i0) / FOUR_PI
        if previous is not None and abs(value - previous) <= tol * abs(value):
            break
        previous = value
    # outer convergence is O(h^2); one Richardson step sharpens the tail
    return value + (value - previous) / 3.0


def helmholtz_kernel(r, k0):
    """exp(-j k0 R)/(4 pi R)."""
    return np.exp(-1j * k0 * r) / (FOUR_PI * r)


def smoothed_kernel(r, k0):
    """(exp(-j k0 R) - 1)/(4 pi R), continuous at R = 0 (value -j k0 / 4 pi).

    Uses exp(-jx) - 1 = -2j sin(x/2) exp(-jx/2), stable for k0 R << 1.
    """
    x = 0.5 * k0 * r
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -2j * np.sin(x) * np.exp(-1j * x) / (FOUR_PI * r)
    return np.where(r > 0.0, out, -1j * k0 / FOUR_PI)


def grad_kernel(rvec, r, k0):
    """Gradient of the kernel with respect to the observation point.

    rvec = r_obs - r_src (..., 3), r = |rvec|.  Returns (..., 3).
    """
    g = -(1.0 + 1j * k0 * r) * np.exp(-1j * k0 * r) / (FOUR_PI * r**3)
    return g[..., None] * rvec


def _affine_fit(evaluator, tri):
    """Represent an affine vector field on a triangle as f(r) = M r + b."""
    tri = np.asarray(tri, dtype=float)
    centroid = tri.mean(axis=0)
    probe = np.vstack([tri, centroid])
    vals = np.asarray(evaluator(probe), dtype=float)
    # solve for M, b from 4 points (overdetermined by one, consistent if affine)
    a = np.hstack([probe, np.ones((4, 1))])
    coef, *_ = np.linalg.lstsq(a, vals, rcond=None)
    return coef[:3].T, coef[3]


def integrate_kernel_pair(kind, f_m, f_n, tri_m, tri_n, k0, obs_degree=5, src_degree=5):
    """Double surface integral of a tested kernel over one triangle pair.

    kind "G":          int int f_m(r) . G(r, r') f_n(r') ds' ds
    kind "gradG-cross": int int f_m(r) . (grad G(r, r') x f_n(r')) ds' ds

    f_m and f_n evaluate the (affine) test/basis vector fields at arrays of
    points.  Pairs sharing at least one vertex use static extraction for the
    "G" kind; the gradient kind is evaluated in the principal-value sense
    (the extracted solid-angle residue is the caller's identity term, and an
    identical coplanar pair contributes exactly zero).
    """
    if kind not in ("G", "gradG-cross"):
        raise ValueError(f"unknown kernel kind {kind!r}")
    tri_m = np.asarray(tri_m, dtype=float)
    tri_n = np.asarray(tri_n, dtype=float)
    area_m, _ = triangle_area_normal(tri_m)
    area_n, _ = triangle_area_normal(tri_n)
    shared = _count_shared_vertices(tri_m, tri_n)
    identical = shared == 3

    if kind == "gradG-cross":
        if identical:
            return 0.0 + 0.0j
        deg_o, deg_s = (7, 7) if shared > 0 else (obs_degree, src_degree)
        ro = gauss_rule(deg_o)
        rs = gauss_rule(deg_s)
        po = ro.physical_points(tri_m)
        ps = rs.physical_points(tri_n)
        fm = np.asarray(f_m(po), dtype=float)
        fn = np.asarray(f_n(ps), dtype=float)
        rvec = po[:, None, :] - ps[None, :, :]
        r = np.linalg.norm(rvec, axis=-1)
        gg = grad_kernel(rvec, r, k0)
        cross = np.cross(gg, fn[None, :, :])
        val = np.einsum("i,j,ic,ijc->", ro.weights, rs.weights, fm, cross)
        return complex(val * area_m * area_n)

    ro = gauss_rule(obs_degree)
    rs = gauss_rule(src_degree)
    po = ro.physical_points(tri_m)
    ps = rs.physical_points(tri_n)
    fm = np.asarray(f_m(po), dtype=float)
    fn = np.asarray(f_n(ps), dtype=float)
    rvec = po[:, None, :] - ps[None, :, :]
    r = np.linalg.norm(rvec, axis=-1)
    if shared == 0:
        ker = helmholtz_kernel(r, k0)
        val = np.einsum("i,j,ic,jc,ij->", ro.weights, rs.weights, fm, fn, ker)
        return complex(val * area_m * area_n)

    # extraction: smooth remainder by Gauss, static part analytically
    ker = smoothed_kernel(r, k0)
    val = np.einsum("i,j,ic,jc,ij->", ro.weights, rs.weights, fm, fn, ker) * area_m * area_n
    mat, b = _affine_fit(f_n, tri_n)
    i0, ir = _affine_moments(tri_n, po)
    inner = ir @ mat.T + np.outer(i0, b)
    val += area_m * np.einsum("i,ic,ic->", ro.weights, fm, inner) / FOUR_PI
    return complex(val)


def _count_shared_vertices(tri_a, tri_b, tol=1e-12):
    d = np.linalg.norm(tri_a[:, None, :] - tri_b[None, :, :], axis=-1)
    return int((d < tol).any(axis=1).sum())
