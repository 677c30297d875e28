"""Mie-series reference for plane-wave scattering by a PEC sphere.

Everything uses the exp(+j omega t) time convention with incident field
E0 exp(-j k . r), so outgoing radial functions are spherical Hankel
functions of the second kind.  Fields for arbitrary incidence direction and
(possibly complex) transverse polarization are obtained by superposing two
canonical runs (propagation +z, polarization +x) in a rotated frame.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spherical_jn, spherical_yn

from momscat.constants import Z0
from momscat.postproc import FarFieldCut


@dataclass(frozen=True)
class MieSolution:
    radius: float
    k0: float
    order: int
    a: np.ndarray  # coefficients of the N (e1n) harmonics
    b: np.ndarray  # coefficients of the M (o1n) harmonics

    @property
    def size_parameter(self):
        return self.k0 * self.radius


def _psi_xi(n_max, x):
    """Riccati-Bessel psi_n = x j_n and xi_n = x h2_n with derivatives, n = 1..n_max."""
    n = np.arange(1, n_max + 1)
    jn = spherical_jn(n, x)
    jnp = spherical_jn(n, x, derivative=True)
    yn = spherical_yn(n, x)
    ynp = spherical_yn(n, x, derivative=True)
    h2 = jn - 1j * yn
    h2p = jnp - 1j * ynp
    psi = x * jn
    psi_p = jn + x * jnp
    xi = x * h2
    xi_p = h2 + x * h2p
    return psi, psi_p, xi, xi_p


def mie_coefficients(radius, k0, order=None):
    """PEC sphere expansion coefficients a_n = psi_n'/xi_n', b_n = psi_n/xi_n.

    order defaults to ceil(k0 radius) + 15; raises if the series has not
    converged at the requested order.
    """
    x = k0 * radius
    if x <= 0.0:
        raise ValueError("k0 * radius must be positive")
    if order is None:
        order = math.ceil(x) + 15
    if order < math.ceil(x) + 2:
        raise ValueError(f"truncation order {order} too small for ka = {x:.3f}")
    psi, psi_p, xi, xi_p = _psi_xi(order, x)
    a = psi_p / xi_p
    b = psi / xi
    tail = max(abs(a[-1]), abs(b[-1]))
    peak = max(abs(a).max(), abs(b).max())
    if tail > 1e-10 * peak:
        raise ValueError(
            f"Mie series not converged at order {order} (tail {tail:.2e} vs peak {peak:.2e})"
        )
    return MieSolution(radius=radius, k0=k0, order=order, a=a, b=b)


def _pi_tau(order, mu):
    """Angular functions pi_n and tau_n for n = 1..order, vectorized in mu."""
    mu = np.asarray(mu, dtype=float)
    pi = np.zeros((order + 1,) + mu.shape)
    tau = np.zeros((order,) + mu.shape)
    pi[1] = 1.0
    tau[0] = mu
    for n in range(2, order + 1):
        pi[n] = (2 * n - 1) / (n - 1) * mu * pi[n - 1] - n / (n - 1) * pi[n - 2]
        tau[n - 1] = n * mu * pi[n] - (n + 1) * pi[n - 1]
    return pi[1:], tau


def efficiencies(sol):
    """(Q_ext, Q_sca); equal for a lossless PEC sphere (optical theorem)."""
    n = np.arange(1, sol.order + 1)
    x2 = sol.size_parameter**2
    q_ext = 2.0 / x2 * np.sum((2 * n + 1) * (sol.a + sol.b).real)
    q_sca = 2.0 / x2 * np.sum((2 * n + 1) * (np.abs(sol.a) ** 2 + np.abs(sol.b) ** 2))
    return float(q_ext), float(q_sca)


def _canonical_frame(k_hat, e0):
    """Orthonormal frame (x', y', z'=k_hat) and complex pol amplitudes (ax, ay)."""
    k_hat = np.asarray(k_hat, dtype=float)
    k_hat = k_hat / np.linalg.norm(k_hat)
    e0 = np.asarray(e0, dtype=complex)
    if abs(k_hat @ e0) > 1e-10 * max(np.linalg.norm(e0), 1e-300):
        raise ValueError("polarization must be transverse to the propagation direction")
    ref = e0.real if np.linalg.norm(e0.real) > 1e-12 * np.linalg.norm(e0) else e0.imag
    x_hat = ref - (ref @ k_hat) * k_hat
    x_hat = x_hat / np.linalg.norm(x_hat)
    y_hat = np.cross(k_hat, x_hat)
    return x_hat, y_hat, k_hat, complex(x_hat @ e0), complex(y_hat @ e0)


def _sph_unit_vectors(theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    r_hat = np.stack([st * cp, st * sp, ct], axis=-1)
    t_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    p_hat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    return r_hat, t_hat, p_hat


def mie_far_field(sol, e0, k_hat, theta_deg, phi_deg):
    """Scattered far field (distance-normalized, exp(-jkr)/r removed).

    e0 is the incident complex amplitude vector (V/m), k_hat the propagation
    direction; directions are global spherical angles in degrees.
    """
    theta = np.deg2rad(np.asarray(theta_deg, dtype=float))
    phi = np.deg2rad(np.asarray(phi_deg, dtype=float))
    r_hat, t_hat, p_hat = _sph_unit_vectors(theta, phi)
    x_hat, y_hat, z_hat, ax, ay = _canonical_frame(k_hat, e0)

    n = np.arange(1, sol.order + 1)
    weight = (2 * n + 1) / (n * (n + 1))
    # local angles of the observation directions in the canonical frame
    mu = r_hat @ z_hat
    mu = np.clip(mu, -1.0, 1.0)
    pi_n, tau_n = _pi_tau(sol.order, mu)
    s1 = np.einsum("n,nd->d", weight * sol.b, tau_n) + np.einsum("n,nd->d", weight * sol.a, pi_n)
    s2 = np.einsum("n,nd->d", weight * sol.a, tau_n) + np.einsum("n,nd->d", weight * sol.b, pi_n)

    field = np.zeros(r_hat.shape, dtype=complex)
    # one canonical run per real polarization axis: frames (x', y', z') and
    # (y', -x', z') share z', so mu, S1, S2 are reused
    for amp, xh, yh in ((ax, x_hat, y_hat), (ay, y_hat, -x_hat)):
        if amp == 0.0:
            continue
        xc = r_hat @ xh
        yc = r_hat @ yh
        st_loc = np.sqrt(np.maximum(xc * xc + yc * yc, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            cp_loc = np.where(st_loc > 1e-14, xc / st_loc, 1.0)
            sp_loc = np.where(st_loc > 1e-14, yc / st_loc, 0.0)
        f_theta_loc = amp / (1j * sol.k0) * cp_loc * s2
        f_phi_loc = -amp / (1j * sol.k0) * sp_loc * s1
        t_loc = (mu * cp_loc)[:, None] * xh + (mu * sp_loc)[:, None] * yh - st_loc[:, None] * z_hat
        p_loc = (-sp_loc)[:, None] * xh + cp_loc[:, None] * yh
        field += f_theta_loc[:, None] * t_loc + f_phi_loc[:, None] * p_loc

    e_theta = np.einsum("dc,dc->d", field, t_hat)
    e_phi = np.einsum("dc,dc->d", field, p_hat)
    return FarFieldCut(
        theta_deg=np.asarray(theta_deg, dtype=float),
        phi_deg=np.asarray(phi_deg, dtype=float),
        e_theta=e_theta,
        e_phi=e_phi,
    )


def _vsh_fields(sol, theta, phi, rho):
    """Scattered (E, H) of the canonical run in local spherical components."""
    order = sol.order
    n = np.arange(1, order + 1)
    en = (-1j) ** n * (2 * n + 1) / (n * (n + 1))
    mu = np.cos(theta)
    pi_n, tau_n = _pi_tau(order, mu)
    st = np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)

    jn = np.stack([spherical_jn(k, rho) for k in n])
    yn = np.stack([spherical_yn(k, rho) for k in n])
    jnp = np.stack([spherical_jn(k, rho, derivative=True) for k in n])
    ynp = np.stack([spherical_yn(k, rho, derivative=True) for k in n])
    z = jn - 1j * yn
    dz = z / rho + (jnp - 1j * ynp)  # [rho z]'/rho
    z_rho = z / rho

    nn1 = (n * (n + 1))[:, None]
    ca = (en * sol.a)[:, None]
    cb = (en * sol.b)[:, None]

    # E = sum en (-j a N_e1n - b M_o1n)
    e_r = np.sum(-1j * ca * nn1 * (st * pi_n) * z_rho, axis=0) * cp
    e_t = np.sum(-1j * ca * tau_n * dz - cb * pi_n * z, axis=0) * cp
    e_p = np.sum(1j * ca * pi_n * dz + cb * tau_n * z, axis=0) * sp
    # H = (1/Z0) sum en (-j b N_o1n + a M_e1n)
    h_r = np.sum(-1j * cb * nn1 * (st * pi_n) * z_rho, axis=0) * sp / Z0
    h_t = np.sum(-1j * cb * tau_n * dz - ca * pi_n * z, axis=0) * sp / Z0
    h_p = np.sum(-1j * cb * pi_n * dz - ca * tau_n * z, axis=0) * cp / Z0
    return (e_r, e_t, e_p), (h_r, h_t, h_p)


def mie_near_field(sol, e0, k_hat, points):
    """Scattered E and H at points outside the sphere (|point| > radius)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(points, axis=1)
    if (r <= sol.radius).any():
        raise ValueError("near-field points must lie outside the sphere")
    x_hat, y_hat, z_hat, ax, ay = _canonical_frame(k_hat, e0)

    e_out = np.zeros((len(points), 3), dtype=complex)
    h_out = np.zeros((len(points), 3), dtype=complex)
    for amp, xh, yh in ((ax, x_hat, y_hat), (ay, y_hat, -x_hat)):
        if amp == 0.0:
            continue
        xl = points @ xh
        yl = points @ yh
        zl = points @ z_hat
        theta = np.arccos(np.clip(zl / r, -1.0, 1.0))
        phi = np.arctan2(yl, xl)
        (e_r, e_t, e_p), (h_r, h_t, h_p) = _vsh_fields(sol, theta, phi, sol.k0 * r)
        st, ct = np.sin(theta), np.cos(theta)
        cp, sp = np.cos(phi), np.sin(phi)
        r_loc = (st * cp)[:, None] * xh + (st * sp)[:, None] * yh + ct[:, None] * z_hat
        t_loc = (ct * cp)[:, None] * xh + (ct * sp)[:, None] * yh - st[:, None] * z_hat
        p_loc = (-sp)[:, None] * xh + cp[:, None] * yh
        e_out += amp * (e_r[:, None] * r_loc + e_t[:, None] * t_loc + e_p[:, None] * p_loc)
        h_out += amp * (h_r[:, None] * r_loc + h_t[:, None] * t_loc + h_p[:, None] * p_loc)
    return e_out, h_out
