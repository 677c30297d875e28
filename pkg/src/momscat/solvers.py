"""Linear solvers with residual histories.

Unrestarted GMRES for the formulation systems, Jacobi-preconditioned CG for
Gram solves, and a dense LU path used as the test oracle and for
low-frequency studies where Krylov iteration stalls.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class NonSpdError(ValueError):
    """Raised when CG detects non-positive curvature."""


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0


def _as_matvec(op):
    if callable(op):
        return op
    if hasattr(op, "apply"):
        return op.apply
    mat = np.asarray(op)
    return lambda x: mat @ x


def gmres(op, rhs, tol=1e-4, maxit=None):
    """Unrestarted GMRES with modified Gram-Schmidt and Givens rotations.

    op is a matrix, a callable, or an object with an apply(x) method.  The
    relative residual ||rhs - A x|| / ||rhs|| is recorded once per iteration;
    on maxit exhaustion the best partial solution is returned with
    converged=False.
    """
    t0 = time.perf_counter()
    matvec = _as_matvec(op)
    rhs = np.asarray(rhs, dtype=complex)
    n = len(rhs)
    if maxit is None:
        maxit = n
    maxit = min(maxit, n)
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return SolveReport(np.zeros(n, dtype=complex), 0, [0.0], True, time.perf_counter() - t0)

    v = np.zeros((maxit + 1, n), dtype=complex)
    h = np.zeros((maxit + 1, maxit), dtype=complex)
    cs = np.zeros(maxit, dtype=complex)
    sn = np.zeros(maxit, dtype=complex)
    g = np.zeros(maxit + 1, dtype=complex)

    v[0] = rhs / b_norm
    g[0] = b_norm
    history = []
    k_done = 0
    converged = False
    for k in range(maxit):
        w = matvec(v[k])
        for j in range(k + 1):
            h[j, k] = np.vdot(v[j], w)
            w = w - h[j, k] * v[j]
        h[k + 1, k] = np.linalg.norm(w)
        if h[k + 1, k] > 0.0:
            v[k + 1] = w / h[k + 1, k]
        for j in range(k):
            tmp = cs[j] * h[j, k] + sn[j] * h[j + 1, k]
            h[j + 1, k] = -np.conj(sn[j]) * h[j, k] + np.conj(cs[j]) * h[j + 1, k]
            h[j, k] = tmp
        denom = np.hypot(abs(h[k, k]), abs(h[k + 1, k]))
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k] = np.conj(h[k, k]) / denom
            sn[k] = np.conj(h[k + 1, k]) / denom
        h[k, k] = cs[k] * h[k, k] + sn[k] * h[k + 1, k]
        h[k + 1, k] = 0.0
        g[k + 1] = -np.conj(sn[k]) * g[k]
        g[k] = cs[k] * g[k]
        k_done = k + 1
        rel = abs(g[k + 1]) / b_norm
        history.append(float(rel))
        if rel <= tol:
            converged = True
            break

    y = scipy.linalg.solve_triangular(h[:k_done, :k_done], g[:k_done], lower=False)
    x = y @ v[:k_done]
    return SolveReport(x, k_done, history, converged, time.perf_counter() - t0)


def pcg_diag(a, rhs, tol=1e-10, maxit=None):
    """Jacobi-preconditioned conjugate gradient for an SPD matrix.

    Raises NonSpdError when a search direction has non-positive curvature.
    Works for complex right-hand sides (the matrix itself must be real SPD
    or Hermitian positive definite).
    """
    t0 = time.perf_counter()
    matvec = _as_matvec(a)
    if callable(a) or hasattr(a, "apply"):
        raise TypeError("pcg_diag needs an explicit matrix to extract the diagonal")
    a = np.asarray(a)
    diag = np.real(np.diagonal(a)).copy()
    if (diag <= 0.0).any():
        raise NonSpdError("matrix has a non-positive diagonal entry")
    rhs = np.asarray(rhs, dtype=complex)
    n = len(rhs)
    if maxit is None:
        maxit = 10 * n
    b_norm = np.linalg.norm(rhs)
    if b_norm == 0.0:
        return SolveReport(np.zeros(n, dtype=complex), 0, [0.0], True, time.perf_counter() - t0)

    x = np.zeros(n, dtype=complex)
    r = rhs.copy()
    z = r / diag
    p = z.copy()
    rz = np.vdot(r, z)
    history = []
    converged = False
    it = 0
    for it in range(1, maxit + 1):
        ap = a @ p
        p_ap = np.vdot(p, ap)
        if p_ap.real <= 0.0:
            raise NonSpdError(f"non-positive curvature at iteration {it}")
        alpha = rz / p_ap
        x += alpha * p
        r -= alpha * ap
        rel = np.linalg.norm(r) / b_norm
        history.append(float(rel))
        if rel <= tol:
            converged = True
            break
        z = r / diag
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveReport(x, it, history, converged, time.perf_counter() - t0)


def dense_solve(a, rhs, size_cap=20000, cond_warn=1e13):
    """LU solve with partial pivoting; warns when the matrix is near singular."""
    a = np.asarray(a)
    n = a.shape[0]
    if n > size_cap:
        raise ValueError(f"dense solve of size {n} exceeds cap {size_cap}")
    lu, piv = scipy.linalg.lu_factor(a)
    anorm = np.linalg.norm(a, 1)
    rcond = scipy.linalg.lapack.zgecon(lu, anorm)[0] if np.iscomplexobj(a) else scipy.linalg.lapack.dgecon(lu, anorm)[0]
    if rcond > 0 and 1.0 / rcond > cond_warn:
        warnings.warn(f"matrix is ill-conditioned (cond estimate {1.0 / rcond:.2e})", RuntimeWarning)
    return scipy.linalg.lu_solve((lu, piv), rhs)
