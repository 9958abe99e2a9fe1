"""Scaling quantities and shooting for the radial bubble equation.

The radial problem is ``B'' + B'/r = -B (A + Lambda exp(B^2))`` with
``B(0) = gamma`` and ``B'(0) = 0``.  It is integrated in ``x = log r`` as the
first-order system

    dB/dx = P,   dP/dx = -r^2 B (A + Lambda exp(B^2)),   P = r B',

which removes the ``1/r`` coefficient once the series start has moved the
initial point off the origin.  A third component accumulates the energy
``2 pi int Lambda B^2 exp(B^2) r dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import bubble
from .errors import NumericalAbort

EXP_CAP = 700.0
START_FRACTION = 0.1
# first Dirichlet eigenvalue of the unit disk, j_{0,1}^2
LAMBDA1_UNIT_DISK = 2.404825557695773**2
A_CAP_FRACTION = 0.99


def mu_from_scaling(Lambda: float, gamma: float) -> float:
    """``mu = (Lambda gamma^2 exp(gamma^2) / 4)^(-1/2)`` via logarithms."""
    if not (Lambda > 0 and gamma > 0):
        raise ValueError("Lambda and gamma must be positive")
    log_mu = -0.5 * (math.log(Lambda) + 2 * math.log(gamma) + gamma * gamma - math.log(4.0))
    return math.exp(log_mu)


def lambda_from_scaling(mu: float, gamma: float) -> float:
    """Inverse of :func:`mu_from_scaling`: ``Lambda = 4 / (mu^2 gamma^2 exp(gamma^2))``."""
    if not (mu > 0 and gamma > 0):
        raise ValueError("mu and gamma must be positive")
    return math.exp(math.log(4.0) - 2 * math.log(mu) - 2 * math.log(gamma) - gamma * gamma)


def r_delta(gamma: float, mu: float, delta: float) -> float:
    """Radius where ``T0(r / mu) = delta gamma^2``, i.e. ``mu sqrt(exp(delta gamma^2) - 1)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not mu > 0:
        raise ValueError("mu must be positive")
    s = delta * gamma * gamma
    if s > 50:
        # expm1 would overflow long before the log form loses accuracy
        return mu * math.exp(0.5 * s + 0.5 * math.log1p(-math.exp(-s)))
    return mu * math.sqrt(math.expm1(s))


@dataclass(frozen=True, eq=False)
class ShotProfile:
    gamma: float
    A: float
    Lambda: float
    mu: float
    r_max: float
    radii: np.ndarray
    B: np.ndarray
    dB: np.ndarray
    energy: np.ndarray
    tol: float
    r_start: float
    stopped: str  # "zero-crossing" or "r_max"
    r_end: float
    A_capped: bool = False
    _dense: object = field(repr=False, default=None)

    def _series(self, r):
        c = self.gamma * (self.A + self.Lambda * math.exp(self.gamma**2)) / 4
        return self.gamma - c * r * r, -2 * c * r

    def at(self, r) -> np.ndarray:
        """``B`` at radii within ``[0, r_end]`` from the dense solution."""
        r = np.asarray(r, dtype=float)
        if (r < 0).any() or (r > self.r_end * (1 + 1e-12)).any():
            raise ValueError(f"radii must lie in [0, {self.r_end:g}]")
        out = np.empty_like(r)
        near = r < self.r_start
        out[near] = self._series(r[near])[0]
        far = ~near
        if far.any():
            out[far] = self._dense(np.log(r[far]))[0]
        return out

    def energy_at(self, r: float) -> float:
        """``2 pi int_0^r Lambda B^2 exp(B^2) s ds``."""
        if r > self.r_end * (1 + 1e-12):
            raise ValueError("radius beyond the integrated profile")
        if r <= self.r_start:
            return _series_energy(self, r)
        return float(self._dense(math.log(r))[2])


def _series_energy(p: ShotProfile, r: float) -> float:
    x, wq = np.polynomial.legendre.leggauss(16)
    s = 0.5 * r * (x + 1)
    b = p._series(s)[0]
    return float(0.5 * r * np.sum(wq * 2 * math.pi * s * p.Lambda * b * b * np.exp(b * b)))


def shoot_bubble(
    gamma: float,
    A: float,
    Lambda: float,
    r_max: float,
    tol: float = 1e-10,
    n_samples: int = 400,
) -> ShotProfile:
    """Integrate the radial bubble equation outward from ``r = 0``.

    Starts from the two-term series at ``0.1 mu`` and runs an adaptive
    8(5,3) Runge-Kutta pair in ``log r`` until ``B`` crosses zero or
    ``r_max`` is reached.  ``n_samples`` log-spaced radii are tabulated.
    ``A`` is capped at ``0.99 lambda1(B_1) / r_max^2``; ``A_capped`` flags it.
    """
    if not (gamma > 0 and Lambda > 0 and tol > 0):
        raise ValueError("gamma, Lambda and tol must be positive")
    if A < 0:
        raise ValueError("A must be non-negative")
    if gamma * gamma > EXP_CAP:
        raise NumericalAbort("radial", f"exp(gamma^2) overflows at r = 0 (gamma = {gamma:g})")
    mu = mu_from_scaling(Lambda, gamma)
    r0 = START_FRACTION * mu
    if not r_max > r0:
        raise ValueError(f"r_max must exceed the series start radius {r0:g}")
    # keep the linear term subcritical on the ball of radius r_max
    A_max = A_CAP_FRACTION * LAMBDA1_UNIT_DISK / (r_max * r_max)
    A_capped = A > A_max
    A = min(A, A_max)

    def rhs(x, y):
        b, pr, _ = y
        b2 = b * b
        if b2 > EXP_CAP:
            raise NumericalAbort("radial", f"exponent overflow at r = {math.exp(x):.6g}")
        r2 = math.exp(2 * x)
        eb = Lambda * math.exp(b2)
        return [pr, -r2 * b * (A + eb), 2 * math.pi * r2 * b2 * eb]

    def crossing(x, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1

    probe = ShotProfile(gamma, A, Lambda, mu, r_max, *(np.empty(0),) * 4, tol, r0, "", r0)
    b0, db0 = probe._series(r0)
    y0 = [b0, r0 * db0, _series_energy(probe, r0)]
    sol = solve_ivp(
        rhs, (math.log(r0), math.log(r_max)), y0, method="DOP853",
        rtol=tol, atol=tol, dense_output=True, events=crossing,
    )
    if sol.status == -1:
        raise NumericalAbort("radial", f"{sol.message} at r = {math.exp(sol.t[-1]):.6g}")
    stopped = "zero-crossing" if sol.status == 1 else "r_max"
    r_end = math.exp(sol.t[-1])

    radii = np.concatenate([[0.0], np.geomspace(r0, r_end, n_samples)])
    radii[-1] = r_end
    ys = sol.sol(np.log(radii[1:]))
    B = np.concatenate([[gamma], ys[0]])
    dB = np.concatenate([[0.0], ys[1] / radii[1:]])
    E = np.concatenate([[0.0], ys[2]])
    return ShotProfile(gamma, A, Lambda, mu, r_max, radii, B, dB, E, tol, r0, stopped, r_end, A_capped, sol.sol)


@dataclass(frozen=True)
class ExpansionReport:
    gamma: float
    delta: float
    r_delta: float
    constant: float
    r_worst: float
    n_samples: int
    drop_correction: bool


def compare_expansion(
    p: ShotProfile, delta: float = 0.5, drop_correction: bool = False, n_samples: int = 600
) -> ExpansionReport:
    """Scaled error of ``B ~ gamma - t / gamma + S / gamma^3`` on ``r <= r_delta``.

    Returns the maximum of ``|B - expansion| gamma^5 / (1 + t)`` with
    ``t = T0(r / mu)`` and ``S = S0(r / mu)``; ``drop_correction`` omits ``S``.
    """
    rd = r_delta(p.gamma, p.mu, delta)
    if rd > p.r_end * (1 + 1e-12):
        raise ValueError(f"profile ends at {p.r_end:g} before r_delta = {rd:g}")
    rd = min(rd, p.r_end)
    r = np.concatenate([[0.0], np.geomspace(1e-3 * p.mu, rd, n_samples)])
    s = r / p.mu
    t = bubble.t0(s)
    g = p.gamma
    approx = g - t / g
    if not drop_correction:
        approx = approx + np.asarray(bubble.s0(s)) / g**3
    err = np.abs(p.at(r) - approx) * g**5 / (1 + t)
    k = int(np.argmax(err))
    return ExpansionReport(g, delta, rd, float(err[k]), float(r[k]), r.size, drop_correction)
