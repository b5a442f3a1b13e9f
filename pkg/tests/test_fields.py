import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgm import fields as F


@pytest.fixture(scope="module")
def g32():
    return F.Grid2D(32, 32)


@pytest.fixture(scope="module")
def g64():
    return F.Grid2D(64, 64)


def test_grid_validation():
    for bad in [(7, 8), (8, 9), (6, 6)]:
        with pytest.raises(ValueError):
            F.Grid2D(*bad)
    with pytest.raises(ValueError):
        F.Grid2D(8, 8, Lx=-1.0)


def test_field_validation(g32):
    with pytest.raises(ValueError):
        F.Field("scalar", np.full(g32.shape, np.inf), g32)
    with pytest.raises(ValueError):
        F.Field("vector", np.zeros(g32.shape), g32)
    with pytest.raises(F.FieldKindError):
        F.Field("two_form", np.zeros(g32.shape), g32)


def test_lie_derivative_trivial(g32):
    rng = np.random.default_rng(0)
    u = F.VectorField(F.band_limited(g32, rng, components=2), g32)
    c = F.Field("scalar", np.full(g32.shape, 3.7), g32)
    assert np.max(np.abs(F.lie_derivative(u, c).values)) < 1e-12
    T = F.Field("one_form", F.band_limited(g32, rng, components=2), g32)
    assert np.all(F.lie_derivative(F.zeros(g32, "vector"), T).values == 0)


def test_lie_derivative_uniform_translation():
    g = F.Grid2D(32, 32, Lx=3.0, Ly=2.0)
    X, _ = g.coords
    k = 2 * np.pi / g.Lx
    u = F.VectorField(np.stack([np.ones(g.shape), np.zeros(g.shape)]), g)
    f = F.Field("scalar", np.sin(k * X), g)
    assert np.max(np.abs(F.lie_derivative(u, f).values - k * np.cos(k * X))) < 1e-10


def test_lie_derivative_errors(g32):
    other = F.Grid2D(16, 16)
    with pytest.raises(F.GridMismatchError):
        F.lie_derivative(F.zeros(other, "vector"), F.zeros(g32))
    with pytest.raises(F.FieldKindError):
        F.lie_derivative(F.zeros(g32, "one_form"), F.zeros(g32))


def test_lie_derivative_one_form_convention(g32):
    # (L_u a)_j = u^k d_k a_j + a_k d_j u^k, finite differences of analytic fields
    X, Y = g32.coords
    u = F.VectorField(np.stack([np.sin(Y), np.cos(X)]), g32)
    a = F.Field("one_form", np.stack([np.cos(Y), np.sin(X + Y)]), g32)
    want0 = np.sin(Y) * 0 + np.cos(X) * (-np.sin(Y)) + np.cos(Y) * 0 + np.sin(X + Y) * (-np.sin(X))
    want1 = np.sin(Y) * np.cos(X + Y) + np.cos(X) * np.cos(X + Y) + np.cos(Y) * np.cos(Y) + 0
    got = F.lie_derivative(u, a).values
    assert np.max(np.abs(got[0] - want0)) < 1e-10
    assert np.max(np.abs(got[1] - want1)) < 1e-10


def test_leibniz(g32):
    rng = np.random.default_rng(1)
    u = F.VectorField(F.band_limited(g32, rng, kmax=3, components=2), g32)
    f = F.Field("scalar", F.band_limited(g32, rng, kmax=3), g32)
    h = F.Field("scalar", F.band_limited(g32, rng, kmax=3), g32)
    lhs = F.lie_derivative(u, f.with_values(f.values * h.values)).values
    rhs = F.lie_derivative(u, f).values * h.values + f.values * F.lie_derivative(u, h).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8 * np.max(np.abs(lhs))


def test_density_lie_derivative_integrates_to_zero(g32):
    rng = np.random.default_rng(2)
    u = F.VectorField(F.band_limited(g32, rng, components=2), g32)
    rho = F.Field("density", 2.0 + F.band_limited(g32, rng), g32)
    assert abs(F.integrate_domain(F.lie_derivative(u, rho))) < 1e-10


def test_lie_derivative_refinement():
    errs = []
    for n in (32, 64):
        g = F.Grid2D(n, n)
        X, Y = g.coords
        # non-band-limited smooth data
        u = F.VectorField(np.stack([np.exp(np.sin(Y)), np.exp(np.cos(X))]), g)
        f = F.Field("scalar", np.exp(np.sin(X) * np.cos(Y)), g)
        fx = np.cos(X) * np.cos(Y) * f.values
        fy = -np.sin(X) * np.sin(Y) * f.values
        exact = u.values[0] * fx + u.values[1] * fy
        errs.append(np.max(np.abs(F.lie_derivative(u, f).values - exact)))
    assert errs[0] / errs[1] >= 4


def test_velocity_from_vorticity_taylor_green(g64):
    X, Y = g64.coords
    omega = F.Field("scalar", np.sin(X) * np.sin(Y), g64)
    psi = F.stream_function(omega)
    assert np.max(np.abs(psi.values - 0.5 * np.sin(X) * np.sin(Y))) < 1e-12
    u = F.velocity_from_vorticity(omega)
    assert np.max(np.abs(F.curl(u.values, g64) - omega.values)) < 1e-10
    assert np.max(np.abs(F.divergence(u.values, g64))) < 1e-12


def test_velocity_from_vorticity_zero_and_random(g32):
    assert np.all(F.velocity_from_vorticity(F.zeros(g32)).values == 0)
    rng = np.random.default_rng(3)
    om = F.Field("scalar", F.band_limited(g32, rng), g32)
    u = F.velocity_from_vorticity(om)
    assert np.max(np.abs(F.curl(u.values, g32) - om.values)) < 1e-10 * np.max(np.abs(om.values))


def test_velocity_from_vorticity_nonzero_mean(g32):
    with pytest.raises(F.NonzeroMeanError) as info:
        F.velocity_from_vorticity(F.Field("scalar", np.full(g32.shape, 0.25), g32))
    assert abs(info.value.mean - 0.25) < 1e-15


def test_interpolate_nodes_constants_and_empty(g32):
    rng = np.random.default_rng(4)
    f = F.Field("scalar", rng.normal(size=g32.shape), g32)
    X, Y = g32.coords
    pts = np.column_stack([X.ravel(), Y.ravel()])
    assert np.max(np.abs(F.interpolate(f, pts) - f.values.ravel())) < 1e-14
    c = F.Field("scalar", np.full(g32.shape, -1.5), g32)
    assert np.allclose(F.interpolate(c, rng.uniform(-10, 10, (50, 2))), -1.5, atol=1e-14)
    assert F.interpolate(f, np.zeros((0, 2))).shape == (0,)
    v = F.VectorField(rng.normal(size=(2,) + g32.shape), g32)
    assert F.interpolate(v, pts[:5]).shape == (5, 2)


def test_interpolate_off_node_error_bound(g32):
    X, _ = g32.coords
    f = F.Field("scalar", np.sin(X), g32)
    x = 5 * g32.dx + 0.3 * g32.dx
    err = abs(F.interpolate(f, np.array([[x, 1.0]]))[0] - np.sin(x))
    assert err < g32.dx**3


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=16, max_size=16), st.floats(0, 6.2), st.floats(0, 6.2))
def test_interpolate_exact_on_cubics(c, px, py):
    # a tensor cubic restricted to one stencil is reproduced exactly
    g = F.Grid2D(16, 16)
    X, Y = g.coords
    ix, iy = int(px // g.dx), int(py // g.dx)
    x0, y0 = ix * g.dx, iy * g.dx
    C = np.array(c).reshape(4, 4)
    poly = lambda x, y: sum(C[i, j] * ((x - x0) / g.dx) ** i * ((y - y0) / g.dy) ** j for i in range(4) for j in range(4))
    # evaluate on unwrapped coordinates near the stencil so periodicity does not interfere
    Xs = x0 - 2 * g.dx + np.mod(X - (x0 - 2 * g.dx) + 1e-9, g.Lx) - 1e-9
    Ys = y0 - 2 * g.dy + np.mod(Y - (y0 - 2 * g.dy) + 1e-9, g.Ly) - 1e-9
    f = F.Field("scalar", poly(Xs, Ys), g)
    fx, fy = x0 + 0.37 * g.dx, y0 + 0.81 * g.dy
    assert abs(F.interpolate(f, np.array([[fx, fy]]))[0] - poly(fx, fy)) < 1e-9 * max(1.0, np.abs(C).sum())


def test_fourier_interpolate_band_limited(g32):
    rng = np.random.default_rng(5)
    X, Y = g32.coords
    vals = np.cos(2 * X - Y) + 0.3 * np.sin(X + 3 * Y)
    p = rng.uniform(0, 2 * np.pi, (20, 2))
    want = np.cos(2 * p[:, 0] - p[:, 1]) + 0.3 * np.sin(p[:, 0] + 3 * p[:, 1])
    assert np.max(np.abs(F.fourier_interpolate(vals, g32, p) - want)) < 1e-12


def test_quadrature_and_musical(g32):
    one = F.Field("scalar", np.ones(g32.shape), g32)
    assert abs(F.integrate_domain(one) - g32.Lx * g32.Ly) < 1e-12
    rng = np.random.default_rng(6)
    u = F.VectorField(rng.normal(size=(2,) + g32.shape), g32)
    w = F.VectorField(rng.normal(size=(2,) + g32.shape), g32)
    assert np.array_equal(F.sharp(F.flat(u)).values, u.values)
    assert F.pair_fields(F.flat(u), w) == pytest.approx(np.sum(u.values * w.values) * g32.cell_area, rel=1e-14)
    with pytest.raises(F.FieldKindError):
        F.sharp(u)


def test_vector_lie_derivative_matches_bracket_sign(g64):
    # [u, w] = u.grad w - w.grad u  checked on analytic fields
    X, Y = g64.coords
    u = F.VectorField(np.stack([np.sin(Y), np.zeros(g64.shape)]), g64)
    w = F.VectorField(np.stack([np.zeros(g64.shape), np.sin(X)]), g64)
    got = F.lie_derivative(u, w).values
    want = np.stack([-np.sin(X) * np.cos(Y), np.sin(Y) * np.cos(X)])
    assert np.max(np.abs(got - want)) < 1e-10
