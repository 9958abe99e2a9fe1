"""Radial limit profiles of the concentrating solutions.

``T0(r) = log(1 + r^2)`` is the Liouville bubble and ``S0`` the explicit
second-order correction, vanishing at the origin, with

    S0(r) = -T0 + 2 r^2 / (1 + r^2) - T0^2 / 2 + (1 - r^2) / (1 + r^2) * I(r),
    I(r)  = int_1^{1 + r^2} log t / (1 - t) dt,

and ``S0(r) = log(1 / r^2) + pi^2 / 6 + 2 + O(log(r)^2 / r^2)`` at infinity.

Sign conventions differ between the two profile equations.  ``T0`` solves
``d_rr T0 + d_r T0 / r = 4 exp(-2 T0)`` with the classical Laplacian, while
the correction equation ``L S0 - 8 exp(-2 T0) S0 = 4 exp(-2 T0) (T0^2 - T0)``
holds with the positive operator ``L = -(d_rr + d_r / r)``.
:func:`verified_correction_convention` re-derives the second fact numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import NumericalAbort

A0 = 4.0 * math.pi
B0 = math.pi**2 / 6.0 + 2.0

CONVENTIONS = ("positive", "classical")


def t0(r):
    """Liouville bubble ``log(1 + r^2)``."""
    return np.log1p(np.square(r))


def _log_ratio(s: float) -> float:
    # log t / (1 - t) at t = 1 + s, continuous at s = 0 with value -1
    if s == 0.0:
        return -1.0
    return -math.log1p(s) / s


def _quad(fn, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fn, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        except integrate.IntegrationWarning as exc:
            raise NumericalAbort("bubble", f"quadrature did not converge: {exc}") from exc
    return val


def _dilog_integral_scalar(r: float) -> float:
    x = r * r
    if x == 0.0:
        return 0.0
    if x <= 1.0:
        return _quad(_log_ratio, 0.0, x)
    # beyond s = 1 substitute s = e^y so the integrand stays O(1)
    head = _quad(_log_ratio, 0.0, 1.0)
    tail = _quad(lambda y: -math.log1p(math.exp(y)), 0.0, math.log(x))
    return head + tail


def dilog_integral(r):
    """``I(r) = int_1^{1 + r^2} log t / (1 - t) dt`` (always <= 0)."""
    if np.ndim(r) == 0:
        return _dilog_integral_scalar(float(r))
    return np.array([_dilog_integral_scalar(float(x)) for x in np.ravel(r)]).reshape(np.shape(r))


def s0(r):
    """Explicit correction profile."""
    r = np.asarray(r, dtype=float)
    if (r < 0).any():
        raise ValueError("s0 needs r >= 0")
    r2 = r * r
    T = np.log1p(r2)
    out = -T + 2 * r2 / (1 + r2) - 0.5 * T * T + (1 - r2) / (1 + r2) * dilog_integral(r)
    return float(out) if out.ndim == 0 else out


def _fd_derivatives(fn, r: float, step: float) -> tuple[float, float]:
    fm2, fm1, f0, fp1, fp2 = (fn(r + k * step) for k in (-2, -1, 0, 1, 2))
    d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * step)
    d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * step * step)
    return d1, d2


def t0_liouville_residual(r: float) -> float:
    """``T0'' + T0'/r - 4 exp(-2 T0)`` from closed-form derivatives."""
    r2 = r * r
    d2 = (2 - 2 * r2) / (1 + r2) ** 2
    d1_over_r = 2 / (1 + r2)
    return d2 + d1_over_r - 4 / (1 + r2) ** 2


def correction_residual(r: float, convention: str = "positive", step: float = 1e-3) -> float:
    """Residual of the correction equation by 5-point finite differences.

    ``convention="positive"`` reads the Laplacian as ``-(d_rr + d_r / r)``,
    ``"classical"`` as ``d_rr + d_r / r``.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if r <= 2 * step:
        raise ValueError("finite-difference stencil needs r > 2 * step")
    d1, d2 = _fd_derivatives(s0, r, step)
    lap = d2 + d1 / r
    if convention == "positive":
        lap = -lap
    T = math.log1p(r * r)
    e = 1.0 / (1.0 + r * r) ** 2
    return lap - 8 * e * s0(r) - 4 * e * (T * T - T)


def verified_correction_convention(radii: Sequence[float] = (0.5, 2.0, 10.0), tol: float = 1e-6) -> str:
    """The sign convention under which ``S0`` solves its equation at ``radii``."""
    worst = {c: max(abs(correction_residual(r, c)) for r in radii) for c in CONVENTIONS}
    ok = [c for c, v in worst.items() if v < tol]
    if len(ok) != 1:
        raise NumericalAbort("bubble", f"no unique sign convention fits: {worst}")
    return ok[0]


def bubble_mass(which: str = "plain", r_cut: float = 50.0) -> float:
    """``int_{R^2} 4 exp(-2 T0)`` (plain) or with an extra ``T0`` factor (weighted).

    Quadrature on ``[0, r_cut]`` plus the closed-form tail beyond ``r_cut``.
    """
    S = 1.0 + r_cut * r_cut
    if which == "plain":
        body = _quad(lambda r: 8 * math.pi * r / (1 + r * r) ** 2, 0.0, r_cut)
        tail = 4 * math.pi / S
    elif which == "weighted":
        body = _quad(lambda r: 8 * math.pi * r * math.log1p(r * r) / (1 + r * r) ** 2, 0.0, r_cut)
        tail = 4 * math.pi * (math.log(S) + 1.0) / S
    else:
        raise ValueError("which must be 'plain' or 'weighted'")
    return body + tail


def asymptotic_constants(
    radii: Sequence[float] = (250.0, 500.0, 1000.0), fit_log: bool = False
) -> tuple[float, float]:
    """Richardson-type extraction of ``(A0, B0)`` from ``S0`` at large radii.

    With ``L = log r^2`` the remainder ``S0 + (A0 / 4 pi) L - B0`` expands as
    ``(a L^2 + b L + c) / r^2 + O(L^2 / r^4)``.  By default ``A0`` is taken from
    the mass identity (``bubble_mass("weighted")``) and ``B0, a, b`` are
    solved from three radii.  ``fit_log=True`` fits the log coefficient too
    and adds the ``1 / r^2`` column once five radii are given.
    """
    r = np.asarray(radii, dtype=float)
    L = np.log(r * r)
    cols = [np.ones_like(r), L**2 / r**2, L / r**2]
    y = np.atleast_1d(s0(r))
    if fit_log:
        if r.size < 4:
            raise ValueError("fitting the log coefficient needs at least 4 radii")
        cols = [-L] + cols + ([1 / r**2] if r.size >= 5 else [])
    else:
        if r.size < 3:
            raise ValueError("need at least 3 radii")
        a0 = bubble_mass("weighted")
        y = y + a0 / (4 * math.pi) * L
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    if fit_log:
        return 4 * math.pi * coef[0], coef[1]
    return a0, coef[0]


def rescale(x_center, mu: float, z, which: str = "t") -> float:
    """``T0`` or ``S0`` evaluated at ``|z - x_center| / mu``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    s = math.dist(tuple(x_center), tuple(z)) / mu
    if which == "t":
        return float(t0(s))
    if which == "s":
        return s0(s)
    raise ValueError("which must be 't' or 's'")


@dataclass(frozen=True, eq=False)
class BubbleTables:
    radii: np.ndarray
    t0: np.ndarray
    s0: np.ndarray
    dilog: np.ndarray
    A0: float = A0
    B0: float = B0


def build_tables(radii) -> BubbleTables:
    r = np.asarray(radii, dtype=float)
    return BubbleTables(r, t0(r), np.atleast_1d(s0(r)), np.atleast_1d(dilog_integral(r)))
