"""Solvable systems composed from the operator matrices.

Each factory returns a FormulationOperator: a linear "apply" plus right-hand
side.  The weak-form variants route every matrix-vector product through
Gram-matrix solves (Jacobi-CG by default, a prefactorized dense mode for
oracle tests), realizing the basis transformation

    W_gamma = gamma I + (1 - gamma) R,
    R = -Gbb^-1 Gba Gbb^-1 Gba,

which composes two weak-form 90-degree current rotations.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from momscat.solvers import pcg_diag

KINDS = ("EFIE", "MFIE", "WMFIE1", "WMFIE2", "WMFIE3", "CFIE", "WCFIE", "CSIE")


@dataclass
class FormulationConfig:
    kind: str = "EFIE"
    gamma: float = 0.5
    alpha_cfie: float = 0.5
    beta_cs: float = 10.0
    inner_tol: float = 1e-10
    inner_maxit: int = 2000
    gram_mode: str = "cg"  # "cg" (nested, production) or "dense" (prefactorized oracle)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown formulation kind {self.kind!r}; valid: {', '.join(KINDS)}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.kind.startswith("WMFIE") and self.gamma == 0.0:
            raise ValueError("gamma must be positive: gamma = 0 admits the G_ba null space")
        if self.kind in ("CFIE", "WCFIE") and not 0.0 < self.alpha_cfie < 1.0:
            raise ValueError("alpha_cfie must lie in (0, 1)")
        if self.kind == "CSIE" and self.beta_cs <= 0.0:
            raise ValueError("beta_cs must be positive")


class GramSolveError(RuntimeError):
    """Inner Gram solve failed to converge; carries iterations and residual."""


class GramSolver:
    """Applies Gbb^-1 either by nested Jacobi-CG or by a dense factorization."""

    def __init__(self, g_bb, mode="cg", tol=1e-10, maxit=2000):
        self.g_bb = g_bb
        self.mode = mode
        self.tol = tol
        self.maxit = maxit
        self.total_iterations = 0
        self.n_solves = 0
        self._chol = scipy.linalg.cho_factor(g_bb) if mode == "dense" else None

    def solve(self, y):
        self.n_solves += 1
        if self._chol is not None:
            return scipy.linalg.cho_solve(self._chol, y)
        report = pcg_diag(self.g_bb, y, tol=self.tol, maxit=self.maxit)
        self.total_iterations += report.iterations
        if not report.converged:
            raise GramSolveError(
                f"Gram CG did not reach {self.tol} in {report.iterations} iterations"
                f" (residual {report.residual_history[-1]:.3e})"
            )
        return report.solution


@dataclass
class FormulationOperator:
    """Linear operator contract: apply(x) plus right-hand side and metadata."""

    kind: str
    n: int
    k0: float
    rhs: np.ndarray
    apply: Callable[[np.ndarray], np.ndarray]
    gram: Optional[GramSolver] = None
    dense_builder: Optional[Callable[[], np.ndarray]] = None
    extras: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.apply(x)

    def dense(self):
        """Explicit dense system matrix (oracle/LF path, N <= a few thousand)."""
        if self.dense_builder is None:
            raise NotImplementedError(f"{self.kind} has no dense form")
        return self.dense_builder()


def _make_gram(ops, config):
    return GramSolver(ops.g_bb, mode=config.gram_mode, tol=config.inner_tol, maxit=config.inner_maxit)


def apply_W(ops, gamma, x, gram=None):
    """W_gamma x = gamma x + (1 - gamma) R x with nested Gram solves.

    R x = -Gbb^-1 (Gba (Gbb^-1 (Gba x))); gamma = 1 returns x unchanged.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if gamma == 1.0:
        return np.array(x, dtype=complex, copy=True)
    if gram is None:
        gram = GramSolver(ops.g_bb)
    rx = -gram.solve(ops.g_ba @ gram.solve(ops.g_ba @ x))
    return gamma * x + (1.0 - gamma) * rx


def _r_dense(ops):
    gbb_inv_gba = np.linalg.solve(ops.g_bb, ops.g_ba)
    return -gbb_inv_gba @ gbb_inv_gba


def _w_dense(ops, gamma):
    return gamma * np.eye(ops.n) + (1.0 - gamma) * _r_dense(ops)


def make_efie(ops, exc):
    """j k0 Z0 (B + C/k0^2) i = e."""
    t_mat = ops.efie_matrix()
    return FormulationOperator(
        kind="EFIE", n=ops.n, k0=ops.k0, rhs=exc.e.copy(),
        apply=lambda x: t_mat @ x,
        dense_builder=lambda: t_mat.copy(),
    )


def make_mfie(ops, exc):
    """-(Gbb/2 + K_alpha) i = h."""
    m_mat = ops.mfie_matrix()
    return FormulationOperator(
        kind="MFIE", n=ops.n, k0=ops.k0, rhs=exc.h.copy(),
        apply=lambda x: m_mat @ x,
        dense_builder=lambda: m_mat.copy(),
    )


def make_wmfie(ops, exc, variant=1, gamma=0.5, config=None):
    """Weak-form identity-operator MFIE, variants 1-3; rhs = h for all.

    variant 1: -(1/2 Gbb W_gamma + K_alpha) i = h    (the paper's preferred form)
    variant 2: M W_gamma i = h
    variant 3: [gamma I + (gamma-1) Gba Gbb^-1 Gba Gbb^-1] M i = h
    """
    if variant not in (1, 2, 3):
        raise ValueError("variant must be 1, 2 or 3")
    config = config or FormulationConfig(kind=f"WMFIE{variant}", gamma=gamma)
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1] for the WMFIE")
    gram = _make_gram(ops, config)
    m_mat = ops.mfie_matrix()
    g_bb = ops.g_bb
    g_ba = ops.g_ba

    if variant == 1:
        def apply(x):
            return -(0.5 * (g_bb @ apply_W(ops, gamma, x, gram)) + ops.k_alpha @ x)

        def dense_builder():
            return -(0.5 * g_bb @ _w_dense(ops, gamma) + ops.k_alpha)

    elif variant == 2:
        def apply(x):
            return m_mat @ apply_W(ops, gamma, x, gram)

        def dense_builder():
            return m_mat @ _w_dense(ops, gamma)

    else:
        def apply(x):
            y = m_mat @ x
            return gamma * y + (gamma - 1.0) * (g_ba @ gram.solve(g_ba @ gram.solve(y)))

        def dense_builder():
            gbb_inv = np.linalg.inv(g_bb)
            left = gamma * np.eye(ops.n) + (gamma - 1.0) * (g_ba @ gbb_inv @ g_ba @ gbb_inv)
            return left @ m_mat

    return FormulationOperator(
        kind=f"WMFIE{variant}", n=ops.n, k0=ops.k0, rhs=exc.h.copy(),
        apply=apply, gram=gram, dense_builder=dense_builder,
        extras={"gamma": gamma},
    )


def make_cfie(ops, exc, alpha_cfie=0.5, weak=False, gamma=0.5, config=None):
    """alpha j k0 Z0 T + (1-alpha) Z0 M, with M classical or WMFIE-1."""
    if not 0.0 < alpha_cfie < 1.0:
        raise ValueError("alpha_cfie must lie in (0, 1)")
    kind = "WCFIE" if weak else "CFIE"
    config = config or FormulationConfig(kind=kind, gamma=gamma, alpha_cfie=alpha_cfie)
    efie = make_efie(ops, exc)
    if weak:
        mpart = make_wmfie(ops, exc, variant=1, gamma=gamma, config=config)
    else:
        mpart = make_mfie(ops, exc)
    z0 = ops.z0
    rhs = alpha_cfie * exc.e + (1.0 - alpha_cfie) * z0 * exc.h

    def apply(x):
        return alpha_cfie * efie.apply(x) + (1.0 - alpha_cfie) * z0 * mpart.apply(x)

    def dense_builder():
        return alpha_cfie * efie.dense() + (1.0 - alpha_cfie) * z0 * mpart.dense()

    return FormulationOperator(
        kind=kind, n=ops.n, k0=ops.k0, rhs=rhs, apply=apply, gram=mpart.gram,
        dense_builder=dense_builder,
        extras={"alpha_cfie": alpha_cfie, "gamma": gamma if weak else None},
    )


def make_csie(ops, exc, beta_cs=10.0, config=None):
    """Combined-source system with the weak CS condition eliminated.

    The magnetic coefficients v = beta_cs Z0 Gbb^-1 Gba i are folded into the
    electric-current system

        [j k0 Z0 T + (-1/2 Gba + K_beta) (beta_cs Z0 Gbb^-1 Gba)] i = e.

    The recover_magnetic extra maps a solved i back to v.
    """
    if beta_cs <= 0.0:
        raise ValueError("beta_cs must be positive")
    config = config or FormulationConfig(kind="CSIE", beta_cs=beta_cs)
    gram = _make_gram(ops, config)
    t_mat = ops.efie_matrix()
    m_block = -0.5 * ops.g_ba + ops.k_beta
    z0 = ops.z0

    def recover_magnetic(i):
        return beta_cs * z0 * gram.solve(ops.g_ba @ i)

    def apply(x):
        return t_mat @ x + m_block @ recover_magnetic(x)

    def dense_builder():
        return t_mat + m_block @ (beta_cs * z0 * np.linalg.solve(ops.g_bb, ops.g_ba))

    def block_matrix():
        # 2N system [[T, -Gba/2 + K_beta], [-beta Z0 Gba, Gbb]] [i; v] = [e; 0]
        top = np.hstack([t_mat, m_block])
        bottom = np.hstack([-beta_cs * z0 * ops.g_ba, ops.g_bb.astype(complex)])
        return np.vstack([top, bottom])

    return FormulationOperator(
        kind="CSIE", n=ops.n, k0=ops.k0, rhs=exc.e.copy(), apply=apply, gram=gram,
        dense_builder=dense_builder,
        extras={"beta_cs": beta_cs, "recover_magnetic": recover_magnetic,
                "block_matrix": block_matrix},
    )


def make_formulation(ops, exc, config):
    """Dispatch on a FormulationConfig."""
    kind = config.kind
    if kind == "EFIE":
        return make_efie(ops, exc)
    if kind == "MFIE":
        return make_mfie(ops, exc)
    if kind.startswith("WMFIE"):
        return make_wmfie(ops, exc, variant=int(kind[-1]), gamma=config.gamma, config=config)
    if kind == "CFIE":
        return make_cfie(ops, exc, alpha_cfie=config.alpha_cfie, weak=False, config=config)
    if kind == "WCFIE":
        return make_cfie(ops, exc, alpha_cfie=config.alpha_cfie, weak=True,
                         gamma=config.gamma, config=config)
    if kind == "CSIE":
        return make_csie(ops, exc, beta_cs=config.beta_cs, config=config)
    raise ValueError(f"unknown formulation kind {kind!r}")
