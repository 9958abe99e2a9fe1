"""Dirichlet Green's function of ``L``: closed form on disks, lattice solves elsewhere."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalAbort
from .mesh import CARTESIAN, DomainGrid, ScalarField

DISK = "disk-closed-form"
GRID = "grid-numeric"
MODES = (DISK, GRID)


def disk_green(x, y, radius: float = 1.0):
    """``G_x(y)`` for the disk of ``radius`` about the origin.

    On the unit disk ``G_x(y) = log(| |x| y - x / |x| | / |x - y|) / 2 pi``
    with the ``x = 0`` limit ``log(1 / |y|) / 2 pi``; other radii follow by
    scaling both points.  ``y`` may be an ``(m, 2)`` array.
    """
    x = np.asarray(x, dtype=float) / radius
    y = np.asarray(y, dtype=float) / radius
    d = np.linalg.norm(y - x, axis=-1)
    if np.any(d == 0):
        raise ValueError("Green's function is singular at coincident points")
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        num = np.ones_like(d)
    else:
        num = np.linalg.norm(nx * y - x / nx, axis=-1)
    out = np.log(num / d) / (2 * math.pi)
    return float(out) if out.ndim == 0 else out


def disk_green_grad(x, y, radius: float = 1.0, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``G_x`` in ``y``."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        out[:, k] = (disk_green(x, y + e, radius) - disk_green(x, y - e, radius)) / (2 * step)
    return out


@dataclass(frozen=True, eq=False)
class GreenOracle:
    grid: DomainGrid
    mode: str
    split: float
    _columns: dict = field(default_factory=dict, repr=False)

    @property
    def radius(self) -> float:
        return self.grid.domain.radius

    def column(self, node: int) -> np.ndarray:
        """Lattice Green's function with pole at ``node``: ``K g = e_node``."""
        if not self.grid.interior[node]:
            raise ValueError("pole must be an interior node")
        if node not in self._columns:
            e = np.zeros(self.grid.n_nodes)
            e[node] = 1.0 / self.grid.weights[node]
            self._columns[node] = self.grid.solve(e)
        return self._columns[node]

    def at_nodes(self, x_node: int, y_nodes) -> np.ndarray:
        y_nodes = np.asarray(y_nodes)
        if self.mode == DISK:
            P = self.grid.coords
            return disk_green(P[x_node], P[y_nodes], self.radius)
        return self.column(x_node)[y_nodes]


def make_oracle(g: DomainGrid, mode: str | None = None, split: float | None = None) -> GreenOracle:
    """Closed form on centred disks by default, lattice solves otherwise."""
    is_disk = g.domain.kind == "disk"
    if mode is None:
        mode = DISK if is_disk else GRID
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == DISK and not is_disk:
        raise ValueError("closed-form mode needs a disk domain")
    if split is None:
        split = 3 * g.h
    return GreenOracle(g, mode, split)


def _near_ball_integral(rho: float, z: np.ndarray, R: float) -> np.ndarray:
    # int over B_rho(z) of G_z(y) dy with the regular part frozen at y = z
    zz = np.sum(z * z, axis=-1) / (R * R)
    return 0.5 * rho * rho * (np.log(R / rho) + 0.5 + np.log1p(-zz))


def represent(
    oracle: GreenOracle, f: ScalarField, targets=None, chunk: int = 64
) -> ScalarField | np.ndarray:
    """``u(z) = int G_z(y) f(y) dy``.

    Grid mode applies the lattice inverse.  Closed-form mode uses nodal
    quadrature outside the ball of radius ``oracle.split`` about ``z`` and,
    inside it, integrates the logarithm exactly against ``f(z)`` on the disk
    with the same area as the excluded nodes' cells.  ``targets`` (node
    indices) restricts the evaluation and returns an array.
    """
    g = oracle.grid
    g.check_field(f)
    if oracle.mode == GRID:
        u = g.solve(f.values)
        return ScalarField(g, u) if targets is None else u[np.asarray(targets)]
    if g.kind != CARTESIAN:
        raise ValueError("closed-form quadrature needs a two-dimensional grid")
    idx = g.interior_nodes if targets is None else np.asarray(targets)
    src = np.flatnonzero(g.weights > 0)
    P = g.coords[src]
    wf = g.weights[src] * f.values[src]
    R = oracle.radius
    out = np.zeros(len(idx))
    for s in range(0, len(idx), chunk):
        sel = idx[s : s + chunk]
        Z = g.coords[sel]
        D = np.linalg.norm(P[None, :, :] - Z[:, None, :], axis=2)
        near = D <= oracle.split
        D = np.where(near, 1.0, D)
        nz = np.linalg.norm(Z, axis=1)[:, None, None]
        unit = Z[:, None, :] / np.where(nz > 0, nz, 1.0)
        num = np.linalg.norm(nz / (R * R) * P[None, :, :] - unit, axis=2)
        num = np.where(nz[:, :, 0] > 0, num, 1.0)
        G = np.log(num * R / D) / (2 * math.pi)
        G[near] = 0.0
        rho = np.sqrt((near * g.weights[src]).sum(axis=1) / math.pi)
        out[s : s + chunk] = G @ wf + f.values[sel] * _near_ball_integral(rho, Z, R)
    if not np.all(np.isfinite(out)):
        raise NumericalAbort("greens", "representation quadrature produced non-finite values")
    if targets is not None:
        return out
    vals = np.zeros(g.n_nodes)
    vals[idx] = out
    return ScalarField(g, vals)


@dataclass(frozen=True)
class GreenBoundReport:
    n_pairs: int
    positivity_violations: int
    C_log: float
    C_grad: float
    min_G: float
    distances: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def log_slack(self) -> np.ndarray:
        """``log(C_log / |x - y|) / 2 pi - G``, non-negative by construction."""
        return np.log(self.C_log / self.distances) / (2 * math.pi) - self.values


def sample_pairs(domain, n: int, rng: np.random.Generator, margin: float = 1e-3) -> np.ndarray:
    """``n`` pairs of distinct interior points, shape ``(n, 2, 2)``, by rejection."""
    x0, y0, x1, y1 = domain.bounds
    out = np.empty((0, 2))
    while len(out) < 2 * n:
        pts = rng.uniform((x0, y0), (x1, y1), size=(4 * n, 2))
        ok = domain.boundary_distance(pts[:, 0], pts[:, 1]) > margin
        out = np.concatenate([out, pts[ok]])
    pairs = out[: 2 * n].reshape(n, 2, 2)
    same = np.linalg.norm(pairs[:, 0] - pairs[:, 1], axis=1) == 0
    return pairs[~same]


def green_bound_check(oracle: GreenOracle, pairs) -> GreenBoundReport:
    """Smallest constants in ``0 < G <= log(C / |x - y|) / 2 pi`` and ``|grad G| <= C / |x - y|``.

    Closed-form mode takes arbitrary point pairs; grid mode snaps them to the
    nearest interior nodes and differentiates the lattice column centrally.
    """
    pairs = np.asarray(pairs, dtype=float)
    g = oracle.grid
    if oracle.mode == DISK:
        X, Y = pairs[:, 0], pairs[:, 1]
        G = np.array([disk_green(x, y, oracle.radius) for x, y in zip(X, Y)])
        grad = np.concatenate([disk_green_grad(x, y, oracle.radius) for x, y in zip(X, Y)])
        d = np.linalg.norm(X - Y, axis=1)
    else:
        idx = g.interior_nodes
        P = g.coords[idx]

        def snap(pts):
            return idx[np.argmin(np.linalg.norm(P[None] - pts[:, None], axis=2), axis=1)]

        xs, ys = snap(pairs[:, 0]), snap(pairs[:, 1])
        keep = xs != ys
        xs, ys = xs[keep], ys[keep]
        G = np.array([oracle.column(a)[b] for a, b in zip(xs, ys)])
        grad = np.array([_lattice_grad(oracle, a, b) for a, b in zip(xs, ys)])
        d = np.linalg.norm(g.coords[xs] - g.coords[ys], axis=1)
    viol = int(np.sum(~(G > 0)))
    pos = G > 0
    with np.errstate(over="ignore"):
        C_log = float(np.max(d[pos] * np.exp(2 * math.pi * G[pos]))) if pos.any() else float("nan")
    C_grad = float(np.max(d * np.linalg.norm(grad, axis=1)))
    return GreenBoundReport(len(G), viol, C_log, C_grad, float(G.min()), d, G)


def _lattice_grad(oracle: GreenOracle, a: int, b: int) -> np.ndarray:
    g = oracle.grid
    col = oracle.column(a)
    L = g.lattice_index
    iy, ix = np.argwhere(L == b)[0]
    out = np.zeros(2)
    for k, (dy, dx) in enumerate(((0, 1), (1, 0))):
        lo = L[iy - dy, ix - dx] if iy - dy >= 0 and ix - dx >= 0 else -1
        hi = L[iy + dy, ix + dx] if iy + dy < L.shape[0] and ix + dx < L.shape[1] else -1
        vlo = col[lo] if lo >= 0 else 0.0
        vhi = col[hi] if hi >= 0 else 0.0
        out[k] = (vhi - vlo) / (2 * g.h)
    return out


def radial_decay(oracle: GreenOracle, x, direction, n: int = 64) -> tuple[np.ndarray, np.ndarray, bool]:
    """``G_x`` along the ray from the midpoint between ``x`` and the boundary to the boundary.

    Returns ``(distance_to_boundary, values, monotone)`` where ``monotone`` says
    the values decrease strictly toward the boundary and end within ``1e-12`` of 0.
    """
    if oracle.mode != DISK:
        raise ValueError("radial decay check uses the closed form")
    x = np.asarray(x, dtype=float)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    R = oracle.radius
    # distance from x along e to the circle |y| = R
    b = float(x @ e)
    t_end = -b + math.sqrt(b * b + R * R - float(x @ x))
    t = np.linspace(0.5 * t_end, t_end, n)
    Y = x[None, :] + t[:, None] * e[None, :]
    vals = disk_green(x, Y, R)
    monotone = bool(np.all(np.diff(vals) < 0) and abs(vals[-1]) < 1e-12)
    return t_end - t, vals, monotone


@dataclass(frozen=True)
class PointwiseLawFit:
    slope: float
    intercept: float
    rms_residual: float
    n_points: int
    r_excluded: float


def pointwise_law_fit(
    v_alpha: ScalarField,
    v_eig: ScalarField,
    gamma: float,
    x_alpha,
    r_excluded: float,
    p: float = 2.0,
) -> PointwiseLawFit:
    """Regress ``v_alpha - ||v_alpha||_p v`` on ``log(1 / |x_alpha - z|^2) / gamma``.

    Uses interior nodes with ``|z - x_alpha| > r_excluded``.  ``v_eig`` is the
    positive eigenfunction with unit ``L^p`` norm.  Reported, never asserted.
    """
    g = v_alpha.grid
    g.check_field(v_eig)
    idx = g.interior_nodes
    if g.kind == CARTESIAN:
        d = np.linalg.norm(g.coords[idx] - np.asarray(x_alpha, dtype=float), axis=1)
    else:
        d = np.abs(g.coords[idx, 0] - float(np.asarray(x_alpha, dtype=float)[0]))
    keep = d > r_excluded
    if keep.sum() < 3:
        raise ValueError("fewer than 3 nodes outside the excluded ball")
    y = v_alpha.values[idx][keep] - v_alpha.norm(p) * v_eig.values[idx][keep]
    X = np.log(1 / d[keep] ** 2) / gamma
    M = np.column_stack([X, np.ones_like(X)])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    res = y - M @ coef
    return PointwiseLawFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2))), int(keep.sum()), r_excluded)
