"""Planar domains, their discretizations and nodal fields.

Two grid kinds are provided:

* ``radial-disk``: uniform nodes ``0 = r_0 < ... < r_{n-1} = R`` for radially
  symmetric fields on a disk.  Quadrature is the product trapezoid rule
  (piecewise-linear interpolant integrated exactly against ``2 pi r``) and the
  Laplacian is the matching P1 stiffness divided by those lumped weights.
* ``masked-cartesian``: the square lattice of spacing ``h`` clipped to the
  domain, with the 5-point stencil and zero extension outside the domain.

Both share the positive convention ``L = -(d_xx + d_yy)`` and store the
stiffness matrix ``K`` over interior nodes so that ``L = W^-1 K`` is
self-adjoint for the quadrature inner product ``<f, g> = sum w f g``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import shapely
from scipy import ndimage

from .errors import GridMismatch

RADIAL = "radial-disk"
CARTESIAN = "masked-cartesian"

FIELD_CSV_HEADER = ["index", "x", "y", "weight", "value"]


@dataclass(frozen=True)
class DomainSpec:
    """A bounded planar domain.

    ``disk`` is centred at the origin, ``rectangle`` is ``[0, a] x [0, b]``,
    ``polygon`` is a simple polygon given by its vertices.
    """

    kind: str
    radius: float = 1.0
    width: float = 1.0
    height: float = 1.0
    vertices: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "disk":
            if not self.radius > 0:
                raise ValueError(f"disk radius must be positive, got {self.radius}")
        elif self.kind == "rectangle":
            if not (self.width > 0 and self.height > 0):
                raise ValueError("rectangle sides must be positive")
        elif self.kind == "polygon":
            if len(self.vertices) < 3:
                raise ValueError("polygon needs at least 3 vertices")
            poly = shapely.Polygon(self.vertices)
            if not poly.is_valid or poly.area <= 0:
                raise ValueError(
                    f"polygon is not simple: {shapely.is_valid_reason(poly)}"
                )
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def disk(cls, radius: float = 1.0) -> DomainSpec:
        return cls("disk", radius=float(radius))

    @classmethod
    def rectangle(cls, width: float = 1.0, height: float = 1.0) -> DomainSpec:
        return cls("rectangle", width=float(width), height=float(height))

    @classmethod
    def polygon(cls, vertices: Sequence[Sequence[float]]) -> DomainSpec:
        return cls("polygon", vertices=tuple((float(x), float(y)) for x, y in vertices))

    @classmethod
    def parse(cls, text: str) -> DomainSpec:
        """Parse ``disk:R``, ``rectangle:a,b`` or ``polygon:x,y;x,y;...``."""
        kind, _, args = text.strip().partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "disk":
                return cls.disk(float(args) if args else 1.0)
            if kind == "rectangle":
                a, b = (float(s) for s in args.split(",")) if args else (1.0, 1.0)
                return cls.rectangle(a, b)
            if kind == "polygon":
                pts = [tuple(float(s) for s in p.split(",")) for p in args.split(";")]
                return cls.polygon(pts)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"bad domain spec {text!r}: {exc}") from exc
        raise ValueError(f"unknown domain kind {kind!r}")

    def __str__(self) -> str:
        if self.kind == "disk":
            return f"disk:{self.radius!r}"
        if self.kind == "rectangle":
            return f"rectangle:{self.width!r},{self.height!r}"
        return "polygon:" + ";".join(f"{x!r},{y!r}" for x, y in self.vertices)

    @cached_property
    def _shape(self):
        return shapely.Polygon(self.vertices)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        if self.kind == "disk":
            R = self.radius
            return (-R, -R, R, R)
        if self.kind == "rectangle":
            return (0.0, 0.0, self.width, self.height)
        return tuple(self._shape.bounds)

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return math.pi * self.radius**2
        if self.kind == "rectangle":
            return self.width * self.height
        return float(self._shape.area)

    def contains(self, x, y) -> np.ndarray:
        """Strict interior test, vectorized."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "disk":
            return x * x + y * y < self.radius**2 * (1.0 - 1e-12)
        if self.kind == "rectangle":
            eps = 1e-12 * max(self.width, self.height)
            return (x > eps) & (x < self.width - eps) & (y > eps) & (y < self.height - eps)
        inside = shapely.contains_xy(self._shape, x, y)
        return np.asarray(inside, dtype=bool)

    def boundary_distance(self, x, y) -> np.ndarray:
        """Distance to the boundary, negative outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "disk":
            return self.radius - np.hypot(x, y)
        if self.kind == "rectangle":
            d = np.minimum.reduce([x, self.width - x, y, self.height - y])
            return d
        xb, yb = np.broadcast_arrays(x, y)
        d = shapely.distance(self._shape.exterior, shapely.points(xb, yb))
        return np.where(self.contains(x, y), d, -d)


@dataclass(frozen=True, eq=False)
class DomainGrid:
    kind: str
    domain: DomainSpec
    h: float
    coords: np.ndarray
    weights: np.ndarray
    interior: np.ndarray
    stiffness: sp.csr_matrix
    lattice_index: np.ndarray | None = None
    lattice_origin: tuple[float, float] | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def n_interior(self) -> int:
        return len(self.interior_nodes)

    @cached_property
    def interior_weights(self) -> np.ndarray:
        return self.weights[self.interior_nodes]

    @cached_property
    def _factor(self):
        return spla.splu(self.stiffness.tocsc())

    def solve(self, density: np.ndarray) -> np.ndarray:
        """Nodal solution of ``L u = density`` with zero Dirichlet data."""
        idx = self.interior_nodes
        out = np.zeros(self.n_nodes)
        out[idx] = self._factor.solve(self.interior_weights * np.asarray(density)[idx])
        return out

    def energy(self, values: np.ndarray, other: np.ndarray | None = None) -> float:
        """Dirichlet form ``<grad a, grad b>`` of two nodal arrays."""
        idx = self.interior_nodes
        a = np.asarray(values)[idx]
        b = a if other is None else np.asarray(other)[idx]
        return float(a @ (self.stiffness @ b))

    def field(self, values) -> ScalarField:
        return ScalarField(self, np.asarray(values, dtype=float))

    def zeros(self) -> ScalarField:
        return ScalarField(self, np.zeros(self.n_nodes))

    def from_function(self, fn) -> ScalarField:
        """Sample ``fn(x, y)`` at interior nodes, zero on the boundary."""
        vals = np.zeros(self.n_nodes)
        idx = self.interior_nodes
        vals[idx] = fn(self.coords[idx, 0], self.coords[idx, 1])
        return ScalarField(self, vals)

    def radii(self, center=(0.0, 0.0)) -> np.ndarray:
        return np.hypot(self.coords[:, 0] - center[0], self.coords[:, 1] - center[1])

    def check_field(self, f: ScalarField) -> None:
        if f.grid is self:
            return
        if f.grid.n_nodes != self.n_nodes or not np.array_equal(f.grid.coords, self.coords):
            raise GridMismatch("field is defined on a different grid")

    @property
    def triangles(self) -> np.ndarray:
        """Friedrichs-Keller triangulation of the lattice, as node triples.

        The right-angle vertex comes first; on these triangles the P1
        Dirichlet energy coincides with the 5-point stiffness form.
        """
        if self.kind != CARTESIAN:
            raise ValueError("triangulation is only defined for Cartesian grids")
        if "triangles" not in self._cache:
            L = self.lattice_index
            sw, se, nw, ne = L[:-1, :-1], L[:-1, 1:], L[1:, :-1], L[1:, 1:]
            full = (sw >= 0) & (se >= 0) & (nw >= 0) & (ne >= 0)
            touches = (
                self.interior[np.where(sw >= 0, sw, 0)] & (sw >= 0)
                | self.interior[np.where(se >= 0, se, 0)] & (se >= 0)
                | self.interior[np.where(nw >= 0, nw, 0)] & (nw >= 0)
                | self.interior[np.where(ne >= 0, ne, 0)] & (ne >= 0)
            )
            keep = full & touches
            t1 = np.stack([se[keep], sw[keep], ne[keep]], axis=1)
            t2 = np.stack([nw[keep], sw[keep], ne[keep]], axis=1)
            self._cache["triangles"] = np.concatenate([t1, t2])
        return self._cache["triangles"]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a function on a :class:`DomainGrid`."""

    grid: DomainGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise GridMismatch(
                f"field has {vals.shape} values, grid has {self.grid.n_nodes} nodes"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def integral(self) -> float:
        return float(self.grid.weights @ self.values)

    def l2sq(self) -> float:
        return float(self.grid.weights @ (self.values * self.values))

    def norm(self, p: float = 2.0) -> float:
        if p == 2:
            return math.sqrt(self.l2sq())
        return float(self.grid.weights @ np.abs(self.values) ** p) ** (1.0 / p)

    def grad_norm_sq(self) -> float:
        return self.grid.energy(self.values)

    def max(self) -> float:
        return float(self.values.max())

    def argmax(self) -> int:
        return int(np.argmax(self.values))

    def argmax_point(self) -> tuple[float, float]:
        x, y = self.grid.coords[self.argmax()]
        return (float(x), float(y))

    def boundary_max(self) -> float:
        b = self.values[~self.grid.interior]
        return float(np.abs(b).max()) if b.size else 0.0

    def scaled(self, c: float) -> ScalarField:
        return ScalarField(self.grid, c * self.values)

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)


def integrate(f: ScalarField) -> float:
    return f.integral()


def build_radial_grid(R: float, n: int) -> DomainGrid:
    """Uniform radial nodes on ``[0, R]``; the node at ``R`` is the boundary."""
    if not R > 0:
        raise ValueError(f"radius must be positive, got {R}")
    if int(n) != n or n < 3:
        raise ValueError(f"need at least 3 radial nodes, got {n}")
    n = int(n)
    r = np.linspace(0.0, R, n)
    h = R / (n - 1)
    w = 2.0 * math.pi * h * r
    w[0] = 2.0 * math.pi * h * h / 6.0
    w[-1] = 2.0 * math.pi * (h * R / 2.0 - h * h / 6.0)

    # P1 stiffness 2 pi int phi_i' phi_j' r dr; the last node is Dirichlet.
    c = 2.0 * math.pi * 0.5 * (r[1:] + r[:-1]) / h
    diag = np.zeros(n)
    diag[:-1] += c
    diag[1:] += c
    m = n - 1
    K = sp.diags([diag[:m], -c[: m - 1], -c[: m - 1]], [0, 1, -1], format="csr")

    coords = np.column_stack([r, np.zeros(n)])
    interior = np.ones(n, dtype=bool)
    interior[-1] = False
    return DomainGrid(RADIAL, DomainSpec.disk(R), h, coords, w, interior, K)


def _lattice_origin(spec: DomainSpec) -> tuple[float, float]:
    if spec.kind == "disk":
        return (0.0, 0.0)
    if spec.kind == "rectangle":
        return (0.0, 0.0)
    xmin, ymin, _, _ = spec.bounds
    return (xmin, ymin)


def build_masked_grid(spec: DomainSpec | str, h: float) -> DomainGrid:
    """Square lattice of spacing ``h`` clipped to ``spec``.

    Interior nodes (strictly inside) carry weight ``h**2``; the stored ring of
    exterior lattice neighbours carries zero weight and zero values.
    """
    if isinstance(spec, str):
        spec = DomainSpec.parse(spec)
    if not h > 0:
        raise ValueError(f"mesh size must be positive, got {h}")
    x0, y0 = _lattice_origin(spec)
    xmin, ymin, xmax, ymax = spec.bounds
    i_lo = math.floor((xmin - x0) / h + 1e-9) - 1
    i_hi = math.ceil((xmax - x0) / h - 1e-9) + 1
    j_lo = math.floor((ymin - y0) / h + 1e-9) - 1
    j_hi = math.ceil((ymax - y0) / h - 1e-9) + 1
    xs = x0 + h * np.arange(i_lo, i_hi + 1)
    ys = y0 + h * np.arange(j_lo, j_hi + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    inside = spec.contains(X, Y)
    if not inside.any():
        raise ValueError(f"domain {spec} has empty interior at h={h}")
    jj, ii = np.nonzero(inside)
    if len(np.unique(ii)) < 3 or len(np.unique(jj)) < 3:
        raise ValueError(f"need at least 3 interior nodes per axis at h={h}")
    ring = ndimage.binary_dilation(inside, structure=np.ones((3, 3), dtype=bool)) & ~inside
    stored = inside | ring

    # row-major: y rows ascending, x ascending within a row
    index = -np.ones(X.shape, dtype=np.int64)
    index[stored] = np.arange(int(stored.sum()))
    coords = np.column_stack([X[stored], Y[stored]])
    interior = inside[stored]
    weights = np.where(interior, h * h, 0.0)

    int_nodes = np.flatnonzero(interior)
    local = -np.ones(len(interior), dtype=np.int64)
    local[int_nodes] = np.arange(len(int_nodes))
    rows = [np.arange(len(int_nodes))]
    cols = [np.arange(len(int_nodes))]
    vals = [np.full(len(int_nodes), 4.0)]
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb = index[jj + dj, ii + di]
        nb_local = local[nb]
        ok = nb_local >= 0
        rows.append(local[index[jj, ii]][ok])
        cols.append(nb_local[ok])
        vals.append(-np.ones(int(ok.sum())))
    n = len(int_nodes)
    K = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    origin = (float(xs[0]), float(ys[0]))
    return DomainGrid(CARTESIAN, spec, float(h), coords, weights, interior, K, index, origin)


def laplacian_apply(g: DomainGrid, f: ScalarField) -> ScalarField:
    """``L f`` with ``L = -(d_xx + d_yy)``; zero on boundary nodes."""
    g.check_field(f)
    if f.boundary_max() != 0.0:
        raise ValueError("laplacian_apply needs zero boundary values")
    idx = g.interior_nodes
    out = np.zeros(g.n_nodes)
    out[idx] = (g.stiffness @ f.values[idx]) / g.interior_weights
    return ScalarField(g, out)


def interpolate(f: ScalarField, x, y) -> np.ndarray:
    """Piecewise-linear (radial) or bilinear (lattice) interpolation."""
    g = f.grid
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if g.kind == RADIAL:
        return np.interp(np.hypot(x, y), g.coords[:, 0], f.values, right=0.0)
    L = g.lattice_index
    V = np.zeros(L.shape)
    V[L >= 0] = f.values[L[L >= 0]]
    s = (x - g.lattice_origin[0]) / g.h
    t = (y - g.lattice_origin[1]) / g.h
    i0 = np.floor(s).astype(int)
    j0 = np.floor(t).astype(int)
    ny, nx = L.shape
    if (i0 < 0).any() or (j0 < 0).any() or (i0 + 1 >= nx).any() or (j0 + 1 >= ny).any():
        raise ValueError("interpolation point outside the stored lattice")
    a = s - i0
    b = t - j0
    return (
        (1 - a) * (1 - b) * V[j0, i0]
        + a * (1 - b) * V[j0, i0 + 1]
        + (1 - a) * b * V[j0 + 1, i0]
        + a * b * V[j0 + 1, i0 + 1]
    )


def spherical_average(f: ScalarField, center=(0.0, 0.0), r: float = 0.0) -> float:
    """Mean of ``f`` over the circle of radius ``r`` about ``center``."""
    g = f.grid
    cx, cy = float(center[0]), float(center[1])
    if r < 0:
        raise ValueError("radius must be non-negative")
    if not g.domain.contains(cx, cy) or g.domain.boundary_distance(cx, cy) < r * (1 - 1e-12):
        raise ValueError(f"circle of radius {r} about {center} leaves the domain")
    if r == 0:
        return float(interpolate(f, np.array([cx]), np.array([cy]))[0])
    m = max(16, math.ceil(2 * math.pi * r / g.h))
    theta = 2 * math.pi * np.arange(m) / m
    vals = interpolate(f, cx + r * np.cos(theta), cy + r * np.sin(theta))
    return float(vals.mean())


def write_field_csv(path: str | Path, f: ScalarField) -> None:
    g = f.grid
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIELD_CSV_HEADER)
        for k in range(g.n_nodes):
            w.writerow(
                [k]
                + [format(float(v), ".17g") for v in (*g.coords[k], g.weights[k], f.values[k])]
            )


def read_field_csv(path: str | Path, grid: DomainGrid) -> ScalarField:
    """Load a field written by :func:`write_field_csv` onto ``grid``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != FIELD_CSV_HEADER:
        raise ValueError(f"{path}: not a field file")
    data = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    if len(data) != grid.n_nodes:
        raise GridMismatch(f"{path}: {len(data)} nodes, grid has {grid.n_nodes}")
    if not np.allclose(data[:, :2], grid.coords, rtol=0, atol=1e-12):
        raise GridMismatch(f"{path}: node coordinates differ from the grid")
    return ScalarField(grid, data[:, 3])
