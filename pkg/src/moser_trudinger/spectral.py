"""First Dirichlet eigenpair of the positive Laplacian."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import NumericalAbort
from .mesh import DomainGrid, ScalarField, laplacian_apply


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda1: float
    v: ScalarField
    p: float
    residual: float
    iterations: int


def eigen_normalize(v: ScalarField, p: float = 2.0) -> ScalarField:
    """Return ``v / ||v||_p``."""
    nrm = v.norm(p)
    if not nrm > 0:
        raise ValueError("cannot normalize the zero field")
    return v.scaled(1.0 / nrm)


def eigen_residual(lam: float, v: ScalarField) -> float:
    Lv = laplacian_apply(v.grid, v)
    r = Lv.values - lam * v.values
    return math.sqrt(v.grid.weights @ (r * r)) / v.norm(2)


def first_eigenpair(
    g: DomainGrid, p: float = 2.0, tol: float = 1e-12, max_iter: int = 200
) -> EigenPair:
    """Inverse power iteration on ``L`` with conjugate-gradient inner solves.

    Stops once successive Rayleigh quotients agree to ``tol`` relative; the
    inner solves run at ``tol / 10``.  The eigenfunction is made positive and
    scaled to unit ``L^p`` norm.
    """
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    K = g.stiffness
    w = g.interior_weights
    x = np.sqrt(np.clip(g.domain.boundary_distance(*g.coords[g.interior_nodes].T), 0, None))
    x = x / math.sqrt(w @ (x * x))
    rho_old = float(x @ (K @ x)) / float(w @ (x * x))
    y_guess = x / rho_old
    for it in range(1, max_iter + 1):
        y, info = spla.cg(K, w * x, x0=y_guess, rtol=tol / 10, maxiter=20 * len(w))
        if info != 0:
            raise NumericalAbort("spectral", f"inner CG did not converge (info={info})")
        rho = float(y @ (K @ y)) / float(y @ (w * y))
        x = y / math.sqrt(w @ (y * y))
        y_guess = x / rho
        if abs(rho - rho_old) < tol * abs(rho):
            break
        rho_old = rho
    else:
        raise NumericalAbort("spectral", f"no convergence after {max_iter} iterations")

    if x.sum() < 0:
        x = -x
    vals = np.zeros(g.n_nodes)
    vals[g.interior_nodes] = x
    v = eigen_normalize(ScalarField(g, vals), p)
    return EigenPair(rho, v, float(p), eigen_residual(rho, v), it)
