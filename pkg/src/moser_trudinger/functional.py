"""The perturbed Moser-Trudinger functional on the unit Dirichlet-energy sphere.

For ``u`` with ``||grad u||_2 = 1`` the functional is

    F(u) = int exp(beta u^2),   beta = 4 pi (1 + alpha ||u||_2^2),

and critical points satisfy ``L u = A u + Lambda u exp(beta u^2)`` with
``A = alpha / (1 + 2 alpha ||u||_2^2)`` and ``Lambda = 2 beta lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalAbort
from .mesh import DomainGrid, ScalarField, laplacian_apply

EXP_CAP = 700.0


def _beta(l2sq: float, alpha: float) -> float:
    return 4 * math.pi * (1 + alpha * l2sq)


def _exponent(u: ScalarField, alpha: float, exp_cap: float) -> tuple[float, np.ndarray]:
    beta = _beta(u.l2sq(), alpha)
    e = beta * u.values**2
    top = float(e.max(initial=0.0))
    if top > exp_cap:
        raise NumericalAbort("functional", f"exponent {top:.4g} exceeds cap {exp_cap:g}")
    return beta, e


def evaluate(u: ScalarField, alpha: float, exp_cap: float = EXP_CAP) -> float:
    """``int exp(4 pi u^2 (1 + alpha ||u||_2^2))`` by nodal quadrature."""
    _, e = _exponent(u, alpha, exp_cap)
    return float(u.grid.weights @ np.exp(e))


def _density(u: ScalarField, alpha: float, exp_cap: float) -> np.ndarray:
    beta, e = _exponent(u, alpha, exp_cap)
    ex = np.exp(e)
    M = float(u.grid.weights @ (u.values**2 * ex))
    return 2 * beta * u.values * ex + 8 * math.pi * alpha * M * u.values


def h1_gradient(u: ScalarField, alpha: float, exp_cap: float = EXP_CAP) -> ScalarField:
    """``G = L^{-1} dF/du``, so that ``<G, w>_{H^1_0} = dF(u)[w]``."""
    return ScalarField(u.grid, u.grid.solve(_density(u, alpha, exp_cap)))


@dataclass(frozen=True)
class MaximizeOptions:
    tol: float = 1e-7
    max_iter: int = 500
    step0: float = 0.1
    grow: float = 1.5
    max_halvings: int = 60
    exp_cap: float = EXP_CAP


@dataclass(frozen=True, eq=False)
class ExtremalCandidate:
    u: ScalarField
    alpha: float
    value: float
    grad_norm_sq: float
    l2sq: float
    multiplier: float
    beta: float
    A: float
    Lambda: float
    gamma: float
    x_alpha: tuple[float, float]
    el_residual: float
    min_u: float
    converged: bool = True
    iterations: int = 0
    grad_norm: float = float("nan")
    history: tuple[float, ...] = field(default=(), repr=False)
    constraint_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def gamma_v(self) -> float:
        """Peak of ``v = sqrt(beta) u``."""
        return math.sqrt(self.beta) * self.gamma


def multiplier_for(u: ScalarField, alpha: float, exp_cap: float = EXP_CAP) -> float:
    """``lambda`` making the Euler-Lagrange residual L2-orthogonal to ``u``."""
    l2 = u.l2sq()
    beta, e = _exponent(u, alpha, exp_cap)
    M = float(u.grid.weights @ (u.values**2 * np.exp(e)))
    if M == 0:
        return 0.0
    A = alpha / (1 + 2 * alpha * l2)
    return (u.grad_norm_sq() - A * l2) / (2 * beta * M)


def _el_parts(u: ScalarField, A: float, Lambda: float, beta: float) -> tuple[float, float]:
    Lu = laplacian_apply(u.grid, u).values
    r = Lu - A * u.values - Lambda * u.values * np.exp(beta * u.values**2)
    w = u.grid.weights
    return math.sqrt(w @ (r * r)), math.sqrt(w @ (Lu * Lu))


def el_residual(c: ExtremalCandidate) -> float:
    """``||L u - A u - Lambda u exp(beta u^2)||_2 / ||L u||_2`` (0 for ``u = 0``)."""
    num, den = _el_parts(c.u, c.A, c.Lambda, c.beta)
    if den == 0:
        return 0.0
    return num / den


def candidate_from_field(
    u: ScalarField, alpha: float, exp_cap: float = EXP_CAP, **extra
) -> ExtremalCandidate:
    """Extract every parameter of a candidate from its field."""
    l2 = u.l2sq()
    beta = _beta(l2, alpha)
    A = alpha / (1 + 2 * alpha * l2)
    lam = multiplier_for(u, alpha, exp_cap)
    Lambda = 2 * beta * lam
    num, den = _el_parts(u, A, Lambda, beta)
    return ExtremalCandidate(
        u=u,
        alpha=alpha,
        value=evaluate(u, alpha, exp_cap),
        grad_norm_sq=u.grad_norm_sq(),
        l2sq=l2,
        multiplier=lam,
        beta=beta,
        A=A,
        Lambda=Lambda,
        gamma=u.max(),
        x_alpha=u.argmax_point(),
        el_residual=num / den if den > 0 else 0.0,
        min_u=float(u.values.min()),
        **extra,
    )


def normalize_h1(u: ScalarField) -> ScalarField:
    e = u.grad_norm_sq()
    if not e > 0:
        raise ValueError("cannot normalize a field with zero Dirichlet energy")
    return u.scaled(1.0 / math.sqrt(e))


def default_start(g: DomainGrid) -> ScalarField:
    from .spectral import first_eigenpair

    return normalize_h1(first_eigenpair(g).v)


def maximize(
    g: DomainGrid,
    alpha: float,
    start: ScalarField | None = None,
    opts: MaximizeOptions | None = None,
) -> ExtremalCandidate:
    """Projected H^1_0 gradient ascent on the unit Dirichlet-energy sphere.

    Each iteration steps along the tangential part of the H^1_0 gradient and
    renormalizes.  The step halves until the value does not decrease and
    grows by ``opts.grow`` after an accepted step.  The run stops once the
    tangential gradient norm falls below ``opts.tol`` times
    ``max(1, <G, u>_{H^1_0})``, the size of the radial part; the functional
    grows like ``exp(gamma^2)`` so an absolute threshold would sit below
    roundoff for large alpha.  Hitting the iteration
    or halving cap returns the best iterate flagged non-converged.
    """
    opts = opts or MaximizeOptions()
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    u = default_start(g) if start is None else start
    g.check_field(u)
    if not np.any(u.values):
        raise ValueError("start field is identically zero")
    u = normalize_h1(u)
    K = g.stiffness
    idx = g.interior_nodes

    value = evaluate(u, alpha, opts.exp_cap)
    history = [value]
    defects = [abs(u.grad_norm_sq() - 1)]
    step = None
    converged = False
    pnorm = float("nan")
    it = 0
    for it in range(1, opts.max_iter + 1):
        G = h1_gradient(u, alpha, opts.exp_cap).values[idx]
        ui = u.values[idx]
        radial = float(G @ (K @ ui))
        PG = G - radial * ui
        pnorm = math.sqrt(max(float(PG @ (K @ PG)), 0.0))
        if pnorm < opts.tol * max(abs(radial), 1.0):
            converged = True
            it -= 1
            break
        if step is None:
            step = opts.step0 / pnorm
        accepted = False
        for _ in range(opts.max_halvings):
            trial_i = ui + step * PG
            trial_i /= math.sqrt(float(trial_i @ (K @ trial_i)))
            vals = np.zeros(g.n_nodes)
            vals[idx] = trial_i
            trial = ScalarField(g, vals)
            try:
                tv = evaluate(trial, alpha, opts.exp_cap)
            except NumericalAbort:
                step *= 0.5
                continue
            if tv >= value:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        u, value = trial, tv
        history.append(value)
        defects.append(abs(u.grad_norm_sq() - 1))
        step *= opts.grow
    return candidate_from_field(
        u,
        alpha,
        opts.exp_cap,
        converged=converged,
        iterations=it,
        grad_norm=pnorm,
        history=tuple(history),
        constraint_history=tuple(defects),
    )
