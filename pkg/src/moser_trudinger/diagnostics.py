"""Measured quantities of the energy expansion for a computed candidate.

Everything here is a measurement.  Asymptotic statements (``o(1)``, ``O(.)``)
are reported as numbers and flags; nothing in this module asserts them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from . import bubble, radial
from .errors import NumericalAbort
from .functional import EXP_CAP, ExtremalCandidate
from .mesh import CARTESIAN, DomainGrid, ScalarField
from .spectral import EigenPair, eigen_normalize

DELTA = 0.75
DELTA_PRIME = 0.5
LAMBDA_GAMMA2_FLAG = 0.1


@dataclass(frozen=True, eq=False)
class Params:
    beta: float
    A: float
    Lambda: float
    v: ScalarField


def extract_params(u: ScalarField, alpha: float, multiplier: float, tol: float = 1e-8) -> Params:
    """``beta = 4 pi (1 + alpha ||u||^2)``, ``A``, ``Lambda = 2 beta lambda`` and ``v = sqrt(beta) u``."""
    e = u.grad_norm_sq()
    if abs(e - 1) > tol:
        raise ValueError(f"constraint violated: ||grad u||^2 = {e!r}")
    l2 = u.l2sq()
    beta = 4 * math.pi * (1 + alpha * l2)
    A = alpha / (1 + 2 * alpha * l2)
    v = u.scaled(math.sqrt(beta))
    ev = v.grad_norm_sq()
    if abs(ev / beta - 1) > tol:
        raise NumericalAbort("diagnostics", f"||grad v||^2 / beta - 1 = {ev / beta - 1:.3g}")
    return Params(beta, A, 2 * beta * multiplier, v)


@dataclass(frozen=True)
class BetaForms:
    closed: float
    series: float
    residual: float  # |beta^2 - 4 pi beta - 4 pi x| / beta^2


def beta_closed_form(alpha: float, l2v: float) -> BetaForms:
    """Positive root of ``beta^2 - 4 pi beta - 4 pi alpha l2v = 0`` and its two-term series."""
    if alpha < 0 or l2v < 0:
        raise ValueError("alpha and l2v must be non-negative")
    x = alpha * l2v
    # 2 pi (1 + sqrt(1 + x / pi)), rewritten to avoid cancellation in the root
    s = x / math.pi
    beta = 2 * math.pi * (2 + s / (1 + math.sqrt(1 + s)))
    series = 4 * math.pi * (1 + x / (4 * math.pi) - x * x / (16 * math.pi**2))
    res = abs(beta * beta - 4 * math.pi * beta - 4 * math.pi * x) / (beta * beta)
    return BetaForms(beta, series, res)


def beta_from_expansions(alpha: float, l2v: float) -> float:
    """``4 pi (1 + alpha l2v / 4 pi - alpha^2 l2v^2 / 8 pi^2)``, from the A- and energy expansions."""
    x = alpha * l2v
    return 4 * math.pi * (1 + x / (4 * math.pi) - x * x / (8 * math.pi**2))


def a_from_expansion(alpha: float, l2v: float) -> float:
    return alpha - alpha * alpha * l2v / (2 * math.pi)


def discrepancy_coefficient(alpha: float, l2v: float) -> float:
    """``(beta_closed - beta_expanded) / (4 pi l2v^2)``; 0 when ``l2v = 0``."""
    if l2v == 0:
        return 0.0
    return (beta_closed_form(alpha, l2v).closed - beta_from_expansions(alpha, l2v)) / (4 * math.pi * l2v**2)


def _mass_integrand(v: ScalarField, exp_cap: float) -> np.ndarray:
    v2 = v.values**2
    if v2.max(initial=0.0) > exp_cap:
        raise NumericalAbort("diagnostics", f"exponent {v2.max():.4g} exceeds cap {exp_cap:g}")
    return v2 * np.exp(v2)


def mass(v: ScalarField, Lambda: float, exp_cap: float = EXP_CAP) -> float:
    """``Lambda int v^2 exp(v^2)``."""
    return Lambda * float(v.grid.weights @ _mass_integrand(v, exp_cap))


def energy_identity(v: ScalarField, A: float, Lambda: float, exp_cap: float = EXP_CAP) -> float:
    """``|grad v|^2 - A int v^2 - Lambda int v^2 e^{v^2}``, relative to ``|grad v|^2``."""
    e = v.grad_norm_sq()
    if e == 0:
        return 0.0
    return abs(e - A * v.l2sq() - mass(v, Lambda, exp_cap)) / e


@dataclass(frozen=True, eq=False)
class EnergySplit:
    inner: float  # |grad v1|^2, the part above the cut level
    outer: float  # |grad v_tilde|^2
    defect: float  # |<grad v_tilde, grad v1>|
    level: float
    r_cut: float
    v_tilde: np.ndarray
    v1: np.ndarray
    nodal_defect: float = 0.0  # same pairing for the nodal truncations


def _cut_fraction(a: np.ndarray, b: np.ndarray, c: np.ndarray, level: float) -> np.ndarray:
    """Area fraction of each P1 triangle where the interpolant exceeds ``level``."""
    vals = np.sort(np.stack([a, b, c], axis=1), axis=1) - level
    lo, mid, hi = vals[:, 0], vals[:, 1], vals[:, 2]
    frac = np.zeros(len(vals))
    frac[lo >= 0] = 1.0
    # one vertex above: small corner triangle near the top vertex
    one = (mid < 0) & (hi > 0)
    frac[one] = hi[one] ** 2 / ((hi[one] - lo[one]) * (hi[one] - mid[one]))
    # two above: complement of the corner near the bottom vertex
    two = (lo < 0) & (mid >= 0)
    frac[two] = 1 - lo[two] ** 2 / ((hi[two] - lo[two]) * (mid[two] - lo[two]))
    return frac


def energy_split(
    v: ScalarField, gamma: float, x_center, r_cut: float, delta_prime: float = DELTA_PRIME
) -> EnergySplit:
    """Split ``v`` at level ``(1 - delta') gamma`` inside the ball ``B(x_center, r_cut)``.

    ``v1 = (v - level)^+`` in the ball and ``v_tilde = v - v1``.  The energies
    are those of the continuous piecewise-linear interpolant truncated along
    its exact level set (Friedrichs-Keller triangles, or radial intervals),
    where the two gradients have disjoint support.  The nodal truncations
    are returned alongside.
    """
    if not 0 < delta_prime < 1:
        raise ValueError("delta_prime must lie in (0, 1)")
    g = v.grid
    x_center = np.asarray(x_center, dtype=float)
    dist = g.domain.boundary_distance(*x_center)
    if g.kind != CARTESIAN:
        dist = g.domain.radius - abs(float(x_center[0]))
    if not r_cut > 0 or r_cut > float(dist) + 1e-12:
        raise ValueError(f"cut ball of radius {r_cut:g} leaves the domain")
    level = (1 - delta_prime) * gamma
    vals = v.values
    if g.kind == CARTESIAN:
        P = g.coords
        T = g.triangles
        va, vb, vc = vals[T[:, 0]], vals[T[:, 1]], vals[T[:, 2]]
        # legs from the right-angle vertex are orthogonal with length h
        sq = ((vb - va) ** 2 + (vc - va) ** 2) / g.h**2
        area = 0.5 * g.h**2
        cent = (P[T[:, 0]] + P[T[:, 1]] + P[T[:, 2]]) / 3
        inside = np.linalg.norm(cent - x_center, axis=1) < r_cut
        frac = np.where(inside, _cut_fraction(va, vb, vc, level), 0.0)
        total = float(np.sum(sq) * area)
        inner = float(np.sum(sq * frac) * area)
        node_in = np.linalg.norm(P - x_center, axis=1) < r_cut
    else:
        r = g.coords[:, 0]
        a, b = r[:-1], r[1:]
        va, vb = vals[:-1], vals[1:]
        s = (vb - va) / (b - a)
        total = float(np.sum(math.pi * s * s * (b * b - a * a)))
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = a + (level - va) / (vb - va) * (b - a)
        lo = np.where(va > level, a, cross)
        hi = np.where(va > level, np.where(vb > level, b, cross), b)
        empty = (va <= level) & (vb <= level)
        lo = np.where(empty, a, lo)
        hi = np.where(empty, a, hi)
        hi = np.clip(hi, a, np.minimum(b, r_cut))
        lo = np.minimum(np.maximum(lo, a), hi)
        inner = float(np.sum(math.pi * s * s * (hi * hi - lo * lo)))
        node_in = r < r_cut
    outer = total - inner
    v1 = np.where(node_in, np.maximum(vals - level, 0.0), 0.0)
    v_tilde = vals - v1
    # inner and outer have disjoint gradient support, so their sum must
    # reproduce the stiffness-form energy; half the gap is the defect
    defect = abs(g.energy(vals) - inner - outer) / 2
    nodal_defect = abs(g.energy(v_tilde, v1))
    return EnergySplit(inner, outer, defect, level, r_cut, v_tilde, v1, nodal_defect)


@dataclass(frozen=True)
class ConcentrationMetrics:
    gamma: float
    x_alpha: tuple[float, float]
    mu: float
    norm_p: float
    gamma2_l2v: float
    Lambda_gamma2: float
    l2_ratio: float


def concentration_metrics(
    c: ExtremalCandidate, eig: EigenPair, p: float = 2.0
) -> ConcentrationMetrics:
    """Peak, scale and ``L^2`` comparison of ``v = sqrt(beta) u`` against the eigenfunction."""
    v = c.u.scaled(math.sqrt(c.beta))
    return _metrics(v, c.Lambda, c.x_alpha, eig, p)


def _metrics(v: ScalarField, Lambda: float, x_alpha, eig: EigenPair, p: float) -> ConcentrationMetrics:
    v.grid.check_field(eig.v)
    gamma = v.max()
    l2v = v.l2sq()
    ve = eig.v if eig.p == p else eigen_normalize(eig.v, p)
    norm_p = v.norm(p)
    denom = norm_p**2 * ve.l2sq()
    ratio = l2v / denom if denom > 0 else float("nan")
    mu = radial.mu_from_scaling(Lambda, gamma) if Lambda > 0 and gamma > 0 else float("nan")
    return ConcentrationMetrics(
        gamma, tuple(x_alpha), mu, norm_p, gamma * gamma * l2v, Lambda * gamma * gamma, ratio
    )


@lru_cache(maxsize=1)
def _correction_convention() -> str:
    return bubble.verified_correction_convention()


@dataclass(frozen=True)
class LedgerReport:
    alpha: float
    alpha_fraction: float
    lambda1: float
    value: float
    l2v: float
    norm_p: float
    p: float
    gamma: float
    x_alpha_x: float
    x_alpha_y: float
    mu: float
    beta: float
    beta_closed: float
    beta_series: float
    beta_expanded: float
    beta_quadratic_residual: float
    A: float
    A_expanded: float
    Lambda: float
    energy_identity_residual: float
    discrepancy_coefficient: float
    discrepancy_reference: float
    Lambda_gamma2: float
    gamma2_l2v: float
    mass: float
    mass_gap: float
    l2_ratio: float
    r_cut: float
    delta: float
    delta_prime: float
    inner_energy: float
    outer_energy: float
    orthogonality_defect: float
    el_residual: float
    min_u: float
    converged: bool
    Lambda_gamma2_small: bool
    correction_convention: str

    def to_row(self) -> dict:
        return asdict(self)

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def text_block(self) -> str:
        r = self
        lines = [
            f"alpha = {r.alpha:.10g} ({r.alpha_fraction:.6g} lambda1, lambda1 = {r.lambda1:.10g})",
            f"functional value = {r.value:.10g}",
            f"peak gamma = {r.gamma:.8g} at ({r.x_alpha_x:.6g}, {r.x_alpha_y:.6g}), mu = {r.mu:.6g}",
            f"int v^2 = {r.l2v:.8g}, ||v||_{r.p:g} = {r.norm_p:.8g}",
            f"beta measured = {r.beta:.12g}",
            f"beta closed form = {r.beta_closed:.12g} (quadratic residual {r.beta_quadratic_residual:.2e})",
            f"beta two-term series = {r.beta_series:.12g}",
            f"beta from expansions = {r.beta_expanded:.12g}",
            f"A measured = {r.A:.10g}, A expanded = {r.A_expanded:.10g}",
            f"Lambda = {r.Lambda:.6g}, Lambda gamma^2 = {r.Lambda_gamma2:.6g}"
            + (" (< 0.1)" if r.Lambda_gamma2_small else " (>= 0.1)"),
            f"gamma^2 int v^2 = {r.gamma2_l2v:.6g}",
            f"mass Lambda int v^2 e^(v^2) = {r.mass:.10g}, gap to 4 pi = {r.mass_gap:.4g}",
            f"energy identity residual = {r.energy_identity_residual:.3e}",
            f"discrepancy coefficient = {r.discrepancy_coefficient:.8g}"
            f" (alpha^2 / 16 pi^2 = {r.discrepancy_reference:.8g})",
            f"L2 ratio = {r.l2_ratio:.8g}",
            f"split at r = {r.r_cut:.4g}, delta' = {r.delta_prime:g}: inner {r.inner_energy:.6g},"
            f" outer {r.outer_energy:.6g}, defect {r.orthogonality_defect:.2e}",
            f"Euler-Lagrange residual = {r.el_residual:.3e}, converged = {r.converged}, min u = {r.min_u:.3g}",
            f"correction-equation sign convention = {r.correction_convention}",
        ]
        return "\n".join(lines)


def cut_radius(grid: DomainGrid, gamma: float, mu: float, x_center, delta: float = DELTA) -> float:
    """``r_{alpha, delta}``, clamped to the distance from ``x_center`` to the boundary."""
    x_center = np.asarray(x_center, dtype=float)
    if grid.kind == CARTESIAN:
        room = float(grid.domain.boundary_distance(*x_center))
    else:
        room = grid.domain.radius - abs(float(x_center[0]))
    r = radial.r_delta(gamma, mu, delta) if math.isfinite(mu) else room
    return min(r, room)


def expansion_ledger(
    c: ExtremalCandidate,
    eig: EigenPair,
    p: float = 2.0,
    delta: float = DELTA,
    delta_prime: float = DELTA_PRIME,
) -> LedgerReport:
    """Every measured quantity of the expansion chain for one candidate."""
    g = c.u.grid
    g.check_field(eig.v)
    prm = extract_params(c.u, c.alpha, c.multiplier)
    v = prm.v
    l2v = v.l2sq()
    bf = beta_closed_form(c.alpha, l2v)
    met = _metrics(v, prm.Lambda, c.x_alpha, eig, p)
    m = mass(v, prm.Lambda)
    r_cut = cut_radius(g, met.gamma, met.mu, c.x_alpha, delta)
    split = energy_split(v, met.gamma, c.x_alpha, r_cut, delta_prime)
    return LedgerReport(
        alpha=c.alpha,
        alpha_fraction=c.alpha / eig.lambda1,
        lambda1=eig.lambda1,
        value=c.value,
        l2v=l2v,
        norm_p=met.norm_p,
        p=p,
        gamma=met.gamma,
        x_alpha_x=float(c.x_alpha[0]),
        x_alpha_y=float(c.x_alpha[1]),
        mu=met.mu,
        beta=prm.beta,
        beta_closed=bf.closed,
        beta_series=bf.series,
        beta_expanded=beta_from_expansions(c.alpha, l2v),
        beta_quadratic_residual=bf.residual,
        A=prm.A,
        A_expanded=a_from_expansion(c.alpha, l2v),
        Lambda=prm.Lambda,
        energy_identity_residual=energy_identity(v, prm.A, prm.Lambda),
        discrepancy_coefficient=discrepancy_coefficient(c.alpha, l2v),
        discrepancy_reference=c.alpha**2 / (16 * math.pi**2),
        Lambda_gamma2=met.Lambda_gamma2,
        gamma2_l2v=met.gamma2_l2v,
        mass=m,
        mass_gap=m - 4 * math.pi,
        l2_ratio=met.l2_ratio,
        r_cut=r_cut,
        delta=delta,
        delta_prime=delta_prime,
        inner_energy=split.inner,
        outer_energy=split.outer,
        orthogonality_defect=split.defect,
        el_residual=c.el_residual,
        min_u=c.min_u,
        converged=c.converged,
        Lambda_gamma2_small=met.Lambda_gamma2 < LAMBDA_GAMMA2_FLAG,
        correction_convention=_correction_convention(),
    )
