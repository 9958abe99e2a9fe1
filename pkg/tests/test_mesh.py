import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moser_trudinger.errors import GridMismatch
from moser_trudinger.mesh import (
    DomainSpec,
    ScalarField,
    build_masked_grid,
    build_radial_grid,
    integrate,
    laplacian_apply,
    read_field_csv,
    spherical_average,
    write_field_csv,
)


def test_radial_nodes():
    g = build_radial_grid(1.0, 5)
    np.testing.assert_allclose(g.coords[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    assert g.interior.tolist() == [True, True, True, True, False]


def test_radial_area_exact():
    g = build_radial_grid(1.0, 17)
    assert abs(integrate(g.field(np.ones(g.n_nodes))) - math.pi) < 1e-10


def test_radial_second_moment():
    g = build_radial_grid(1.0, 4097)
    r = g.coords[:, 0]
    assert abs(integrate(g.field(r**2)) - math.pi / 2) < 1e-6


def test_radial_weights_exact_on_quadratics():
    # the rule integrates the P1 interpolant against 2 pi r exactly, so
    # f(r) with f linear is integrated without error
    g = build_radial_grid(2.0, 9)
    r = g.coords[:, 0]
    assert abs(integrate(g.field(3 - r)) - (2 * math.pi * (3 * 2 - 8 / 3))) < 1e-12


@pytest.mark.parametrize("R,n", [(0.0, 5), (-1.0, 5), (1.0, 2)])
def test_radial_rejects(R, n):
    with pytest.raises(ValueError):
        build_radial_grid(R, n)


def test_rectangle_interior_count():
    g = build_masked_grid("rectangle:1,1", 0.25)
    assert g.n_interior == 9


def test_masked_disk_area_first_order():
    errs = []
    for h in (1 / 32, 1 / 64, 1 / 128):
        g = build_masked_grid(DomainSpec.disk(1.0), h)
        errs.append(abs(g.weights.sum() - math.pi))
    assert errs[-1] < 0.02
    # O(h): the error shrinks but not necessarily monotonically at every step
    assert errs[-1] < errs[0]


def test_square_area_within_spec_bound():
    g = build_masked_grid("rectangle:1,1", 1 / 16)
    # interior cells of the unit square cover (1 - h)^2
    assert abs(g.weights.sum() - (1 - 1 / 16) ** 2) < 1e-12


def test_self_intersecting_polygon_rejected():
    with pytest.raises(ValueError):
        DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)])


def test_polygon_grid_builds():
    g = build_masked_grid("polygon:0,0;1,0;0.5,0.8", 1 / 32)
    assert g.n_interior > 50
    assert np.all(g.domain.contains(*g.coords[g.interior].T))


def test_empty_interior_rejected():
    with pytest.raises(ValueError):
        build_masked_grid("rectangle:0.1,0.1", 0.25)


def test_domain_parse_roundtrip():
    for text in ("disk:1.5", "rectangle:2,1", "polygon:0,0;1,0;0,1"):
        assert DomainSpec.parse(str(DomainSpec.parse(text))) == DomainSpec.parse(text)


def test_boundary_nodes_flagged_and_zero_weight():
    g = build_masked_grid("disk:1", 1 / 16)
    outside = ~g.domain.contains(*g.coords.T)
    assert np.all(~g.interior[outside])
    assert np.all(g.weights[~g.interior] == 0)


def test_laplacian_sine_eigenfunction():
    errs = []
    for h in (1 / 16, 1 / 32):
        g = build_masked_grid("rectangle:1,1", h)
        f = g.from_function(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y))
        Lf = laplacian_apply(g, f)
        errs.append(np.max(np.abs(Lf.values - 2 * np.pi**2 * f.values)))
    assert errs[1] < errs[0] / 3.5


def test_laplacian_zero():
    g = build_masked_grid("disk:1", 1 / 16)
    assert np.all(laplacian_apply(g, g.zeros()).values == 0)


def test_laplacian_exact_on_quadratic_slice():
    g = build_masked_grid("rectangle:1,1", 1 / 8)
    # x(1-x) y(1-y): along x the second difference of x(1-x) is exactly -2
    f = g.from_function(lambda x, y: x * (1 - x) * y * (1 - y))
    Lf = laplacian_apply(g, f)
    X, Y = g.coords[:, 0], g.coords[:, 1]
    exact = 2 * (Y * (1 - Y) + X * (1 - X))
    idx = g.interior_nodes
    np.testing.assert_allclose(Lf.values[idx], exact[idx], atol=1e-12)


def test_laplacian_needs_zero_boundary():
    g = build_masked_grid("rectangle:1,1", 1 / 8)
    with pytest.raises(ValueError):
        laplacian_apply(g, g.field(np.ones(g.n_nodes)))


def test_laplacian_grid_mismatch():
    g1 = build_masked_grid("rectangle:1,1", 1 / 8)
    g2 = build_masked_grid("rectangle:1,1", 1 / 16)
    with pytest.raises(GridMismatch):
        laplacian_apply(g1, g2.zeros())


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["disk:1", "rectangle:1,2", "radial"]))
def test_laplacian_symmetric(seed, which):
    g = build_radial_grid(1.0, 33) if which == "radial" else build_masked_grid(which, 1 / 8)
    rng = np.random.default_rng(seed)
    f = g.field(np.where(g.interior, rng.standard_normal(g.n_nodes), 0.0))
    h = g.field(np.where(g.interior, rng.standard_normal(g.n_nodes), 0.0))
    w = g.weights
    a = w @ (laplacian_apply(g, f).values * h.values)
    b = w @ (f.values * laplacian_apply(g, h).values)
    assert abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_integrate_linear_and_monotone(seed):
    g = build_masked_grid("disk:1", 1 / 8)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(g.n_nodes), rng.standard_normal(g.n_nodes)
    c = float(rng.standard_normal())
    lhs = integrate(g.field(a + c * b))
    rhs = integrate(g.field(a)) + c * integrate(g.field(b))
    assert abs(lhs - rhs) < 1e-12 * (1 + abs(lhs))
    lo = np.minimum(a, b)
    assert integrate(g.field(lo)) <= integrate(g.field(a)) + 1e-14
    assert np.all(g.weights >= 0) and np.all(g.interior_weights > 0)


def test_spherical_average_constant():
    g = build_masked_grid("disk:1", 1 / 32)
    f = g.field(np.where(g.interior, 2.5, 0.0))
    for r in (0.0, 0.1, 0.5):
        assert abs(spherical_average(f, (0, 0), r) - 2.5) < 1e-12


def test_spherical_average_odd_coordinate():
    g = build_masked_grid("disk:1", 1 / 32)
    f = g.from_function(lambda x, y: x)
    assert abs(spherical_average(f, (0, 0), 0.4)) < 1e-12


def test_spherical_average_quadratic():
    g = build_masked_grid("disk:1", 1 / 64)
    c = (0.1, -0.2)
    f = g.from_function(lambda x, y: (x - c[0]) ** 2 + (y - c[1]) ** 2)
    r = 0.3
    # dense-sampling oracle on the exact function is r^2; bilinear
    # interpolation of a quadratic errs by at most h^2 / 2 per sample
    assert abs(spherical_average(f, c, r) - r * r) < g.h**2


def test_spherical_average_leaves_domain():
    g = build_masked_grid("disk:1", 1 / 16)
    f = g.zeros()
    with pytest.raises(ValueError):
        spherical_average(f, (0.5, 0), 0.6)


def test_spherical_average_radial_grid():
    g = build_radial_grid(1.0, 65)
    f = g.field(1 - g.coords[:, 0] ** 2)
    assert abs(spherical_average(f, (0, 0), 0.5) - 0.75) < 1e-3


def test_field_csv_roundtrip(tmp_path):
    g = build_masked_grid("disk:1", 1 / 16)
    f = g.from_function(lambda x, y: np.cos(x) * y)
    p = tmp_path / "f.csv"
    write_field_csv(p, f)
    back = read_field_csv(p, g)
    assert np.array_equal(back.values, f.values)
    header = p.read_text().splitlines()[0]
    assert header == "index,x,y,weight,value"


def test_field_csv_mismatch(tmp_path):
    g = build_masked_grid("disk:1", 1 / 16)
    p = tmp_path / "f.csv"
    write_field_csv(p, g.zeros())
    with pytest.raises(GridMismatch):
        read_field_csv(p, build_masked_grid("disk:1", 1 / 8))


def test_row_major_ordering():
    g = build_masked_grid("rectangle:1,1", 0.25)
    P = g.coords
    keys = list(zip(P[:, 1], P[:, 0]))
    assert keys == sorted(keys)


def test_scalar_field_is_read_only():
    g = build_masked_grid("rectangle:1,1", 0.25)
    f = g.zeros()
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(3))


def test_field_energy_matches_triangles():
    g = build_masked_grid("disk:1", 1 / 16)
    f = g.from_function(lambda x, y: (1 - x * x - y * y) * np.exp(x))
    T = g.triangles
    v = f.values
    sq = ((v[T[:, 1]] - v[T[:, 0]]) ** 2 + (v[T[:, 2]] - v[T[:, 0]]) ** 2) / g.h**2
    assert abs(np.sum(sq) * g.h**2 / 2 - f.grad_norm_sq()) < 1e-12 * f.grad_norm_sq()
