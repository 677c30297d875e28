"""Scattered fields, bistatic RCS, and the error metrics of the studies.

Far fields are distance-normalized amplitudes (the exp(-j k r)/r factor is
removed) with the phase reference at the model origin.  Relative errors are
normalized by the maximum reference magnitude over all directions and both
polarizations; dB values are 20 log10 of field ratios with a -200 dB floor.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from momscat.constants import Z0, MU0
from momscat.operators import _Geometry
from momscat.quadrature import FOUR_PI
from momscat.rwg import charge_vector
from momscat.solvers import dense_solve

DB_FLOOR = -200.0


@dataclass
class FarFieldCut:
    """Sampled scattered far field, both polarizations always present."""

    theta_deg: np.ndarray
    phi_deg: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray

    def __post_init__(self):
        n = len(self.theta_deg)
        for name in ("phi_deg", "e_theta", "e_phi"):
            if len(getattr(self, name)) != n:
                raise ValueError("direction and field arrays must have equal length")

    def __len__(self):
        return len(self.theta_deg)

    def directions(self):
        theta = np.deg2rad(self.theta_deg)
        phi = np.deg2rad(self.phi_deg)
        return np.stack(
            [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
        )


@dataclass
class ErrorReport:
    eps_theta: np.ndarray
    eps_phi: np.ndarray
    eps_max_db: float
    eps_avg_db: float
    eps_i: Optional[float] = None


def cut_directions(phi_cut_deg, n_theta=181):
    """One bistatic cut: theta in [0, 180] at fixed phi."""
    theta = np.linspace(0.0, 180.0, n_theta)
    return theta, np.full_like(theta, float(phi_cut_deg))


def sphere_grid(n_theta=19, n_phi=36):
    """Quasi-uniform (theta, phi) grid avoiding the poles."""
    theta = np.linspace(0.0, 180.0, n_theta + 2)[1:-1]
    phi = np.linspace(0.0, 360.0, n_phi, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return tt.ravel(), pp.ravel()


def _current_at_quadrature(space, coeffs, geo):
    """Current density values at the geometry quadrature points, (T, Q, 3)."""
    scaled = space.coef * coeffs[space.func_index]
    return np.einsum("ta,taqc->tqc", scaled, geo.bv)


def _divergence_per_triangle(space, coeffs):
    d = np.zeros(space.mesh.n_triangles, dtype=complex)
    np.add.at(d, space.tri_plus, coeffs * space.edge_length / space.area_plus)
    np.add.at(d, space.tri_minus, -coeffs * space.edge_length / space.area_minus)
    return d


def far_field(space, i, v, k0, theta_deg, phi_deg, degree=5, chunk=256):
    """Radiated far field of electric (i) and optional magnetic (v) currents.

    F(r_hat) = -j k0 Z0/(4 pi) Int [J - (r_hat.J) r_hat] e^{j k0 r_hat.r'}
               + j k0/(4 pi) r_hat x Int M e^{j k0 r_hat.r'}
    """
    theta_deg = np.asarray(theta_deg, dtype=float)
    phi_deg = np.asarray(phi_deg, dtype=float)
    geo = _Geometry(space, degree)
    cut = FarFieldCut(theta_deg, phi_deg,
                      np.zeros(len(theta_deg), complex), np.zeros(len(theta_deg), complex))
    r_hat = cut.directions()
    theta = np.deg2rad(theta_deg)
    phi = np.deg2rad(phi_deg)
    t_hat = np.stack([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)], axis=-1)
    p_hat = np.stack([-np.sin(phi), np.cos(phi), np.zeros_like(phi)], axis=-1)

    jq = None if i is None else _current_at_quadrature(space, np.asarray(i, complex), geo)
    mq = None if v is None else _current_at_quadrature(space, np.asarray(v, complex), geo)
    pts = geo.pts.reshape(-1, 3)
    w = geo.w_area.reshape(-1)

    for d0 in range(0, len(r_hat), chunk):
        d1 = min(d0 + chunk, len(r_hat))
        phase = np.exp(1j * k0 * (pts @ r_hat[d0:d1].T)) * w[:, None]   # (TQ, D)
        f = np.zeros((d1 - d0, 3), dtype=complex)
        if jq is not None:
            rad_j = phase.T @ jq.reshape(-1, 3)
            rad_j -= np.einsum("dc,dc->d", rad_j, r_hat[d0:d1])[:, None] * r_hat[d0:d1]
            f += -1j * k0 * Z0 / FOUR_PI * rad_j
        if mq is not None:
            rad_m = phase.T @ mq.reshape(-1, 3)
            f += 1j * k0 / FOUR_PI * np.cross(r_hat[d0:d1], rad_m)
        cut.e_theta[d0:d1] = np.einsum("dc,dc->d", f, t_hat[d0:d1])
        cut.e_phi[d0:d1] = np.einsum("dc,dc->d", f, p_hat[d0:d1])
    return cut


def bistatic_rcs(cut, e0_amplitude):
    """Per-direction sigma_theta, sigma_phi in dBsm: 10 log10(4 pi |E|^2/|E0|^2)."""
    if not e0_amplitude > 0.0:
        raise ValueError("incident amplitude must be positive")
    sigma_t = FOUR_PI * np.abs(cut.e_theta) ** 2 / e0_amplitude**2
    sigma_p = FOUR_PI * np.abs(cut.e_phi) ** 2 / e0_amplitude**2
    floor = 10 ** (DB_FLOOR / 10.0)
    return (
        10.0 * np.log10(np.maximum(sigma_t, floor)),
        10.0 * np.log10(np.maximum(sigma_p, floor)),
    )


def near_field(space, i, v, k0, points, degree=5, min_distance_factor=1e-6, chunk=64):
    """Scattered E and H at off-surface points by full potential integrals."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    geo = _Geometry(space, degree)
    mesh = space.mesh
    mean_edge = mesh.edge_lengths().mean()

    jq = None if i is None else _current_at_quadrature(space, np.asarray(i, complex), geo)
    mq = None if v is None else _current_at_quadrature(space, np.asarray(v, complex), geo)
    dj = None if i is None else _divergence_per_triangle(space, np.asarray(i, complex))
    dm = None if v is None else _divergence_per_triangle(space, np.asarray(v, complex))

    pts = geo.pts.reshape(-1, 3)
    w = geo.w_area.reshape(-1)
    nq = geo.pts.shape[1]

    e_out = np.zeros((len(points), 3), dtype=complex)
    h_out = np.zeros((len(points), 3), dtype=complex)
    for c0 in range(0, len(points), chunk):
        c1 = min(c0 + chunk, len(points))
        d = points[c0:c1, None, :] - pts[None, :, :]
        r = np.linalg.norm(d, axis=-1)
        if r.min() < min_distance_factor * mean_edge:
            raise ValueError("near-field point lies on or too close to the surface")
        g = np.exp(-1j * k0 * r) / (FOUR_PI * r) * w
        gg = (-(1.0 + 1j * k0 * r) * np.exp(-1j * k0 * r) / (FOUR_PI * r**3) * w)[..., None] * d
        if jq is not None:
            a_j = g @ jq.reshape(-1, 3)
            grad_phi = np.einsum("pkc,k->pc", gg, np.repeat(dj, nq))
            curl_j = np.cross(gg, np.broadcast_to(jq.reshape(-1, 3), gg.shape)).sum(axis=1)
            e_out[c0:c1] += -1j * k0 * Z0 * (a_j + grad_phi / k0**2)
            h_out[c0:c1] += curl_j
        if mq is not None:
            a_m = g @ mq.reshape(-1, 3)
            grad_psi = np.einsum("pkc,k->pc", gg, np.repeat(dm, nq))
            curl_m = np.cross(gg, np.broadcast_to(mq.reshape(-1, 3), gg.shape)).sum(axis=1)
            e_out[c0:c1] += -curl_m
            h_out[c0:c1] += -1j * k0 / Z0 * (a_m + grad_psi / k0**2)
    return e_out, h_out


def _to_db(linear):
    return float(max(20.0 * np.log10(max(linear, 0.0) + 1e-300), DB_FLOOR))


def relative_error_cut(candidate, reference, i_candidate=None, i_reference=None):
    """Per-direction relative far-field errors against a reference cut.

    eps_pol(dir) = |E_pol_ref(dir) - E_pol(dir)| / max over all directions
    and both polarizations of |E_ref|; eps_max and the linear average are
    reported in dB (20 log10, floored at -200 dB).
    """
    if len(candidate) != len(reference) or not (
        np.allclose(candidate.theta_deg, reference.theta_deg)
        and np.allclose(candidate.phi_deg, reference.phi_deg)
    ):
        raise ValueError("candidate and reference must share the same direction grid")
    denom = max(np.abs(reference.e_theta).max(), np.abs(reference.e_phi).max())
    if denom == 0.0:
        raise ValueError("reference cut is identically zero")
    eps_t = np.abs(reference.e_theta - candidate.e_theta) / denom
    eps_p = np.abs(reference.e_phi - candidate.e_phi) / denom
    eps_max = max(eps_t.max(), eps_p.max())
    eps_avg = 0.5 * (eps_t.mean() + eps_p.mean())
    eps_i = None
    if i_candidate is not None and i_reference is not None:
        eps_i = current_error(i_candidate, i_reference)
    return ErrorReport(
        eps_theta=eps_t,
        eps_phi=eps_p,
        eps_max_db=_to_db(eps_max),
        eps_avg_db=_to_db(eps_avg),
        eps_i=eps_i,
    )


def current_error(i_candidate, i_reference):
    """Squared l2-norm ratio ||i_ref - i_cand||^2 / ||i_ref||^2."""
    i_candidate = np.asarray(i_candidate)
    i_reference = np.asarray(i_reference)
    if i_candidate.shape != i_reference.shape:
        raise ValueError("coefficient vectors must have equal length")
    return float(
        np.linalg.norm(i_reference - i_candidate) ** 2 / np.linalg.norm(i_reference) ** 2
    )


def lf_divergence_sweep(space, operator_factory, frequencies):
    """Solve at descending frequencies and report current/divergence norms.

    operator_factory(frequency) must return a FormulationOperator with a
    dense form; rows are dicts with the four norms of Re/Im of i and d.
    """
    frequencies = list(frequencies)
    if len(frequencies) < 2:
        raise ValueError("need at least two frequencies")
    rows = []
    for f in frequencies:
        op = operator_factory(f)
        sol = dense_solve(op.dense(), op.rhs)
        omega = 2.0 * np.pi * f
        diag = charge_vector(space, sol, omega)
        rows.append(
            {
                "frequency": f,
                "re_i": float(np.linalg.norm(sol.real)),
                "im_i": float(np.linalg.norm(sol.imag)),
                "re_d": diag.real_d_norm,
                "im_d": diag.imag_d_norm,
            }
        )
    return rows
