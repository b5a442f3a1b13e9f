import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from sgm import algebra as A
from sgm import fields as F

E = np.eye(3)

vec3 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3).map(np.array)


def hat(u):
    return np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])


def vee(M):
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def Rz(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def ht(u, b):
    return A.AlgebraElement(np.asarray(u, float), np.asarray(b, float), "heavy_top")


def htd(m, a):
    return A.DualElement(np.asarray(m, float), np.asarray(a, float), "heavy_top")


def rb(u):
    return A.AlgebraElement(np.asarray(u, float), None, "rigid_body")


def rbd(m):
    return A.DualElement(np.asarray(m, float), None, "rigid_body")


def rand_group(rng):
    return A.GroupElement(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3), "heavy_top")


# -- pairing -----------------------------------------------------------------


def test_pair_zero_dual_is_zero():
    assert A.pair(htd([0, 0, 0], [0, 0, 0]), ht([1, 2, 3], [4, 5, 6])) == 0.0


def test_pair_rigid_body_dot_product():
    assert A.pair(rbd([1, 2, 3]), rb([4, 5, 6])) == 32.0


def test_pair_heavy_top_sum_of_dots():
    assert A.pair(htd([1, 0, 0], [0, 1, 0]), ht([1, 0, 0], [0, 2, 0])) == 3.0


def test_pair_realization_mismatch():
    with pytest.raises(A.RealizationError):
        A.pair(rbd([1, 0, 0]), ht([1, 0, 0], [0, 0, 0]))


def test_nonfinite_element_rejected():
    with pytest.raises(ValueError):
        rb([np.nan, 0, 0])


# -- group -------------------------------------------------------------------


def test_group_identity_and_inverse():
    rng = np.random.default_rng(0)
    p = rand_group(rng)
    e = A.identity("heavy_top")
    q = A.group_mul(p, e)
    assert np.allclose(q.g, p.g, atol=1e-14) and np.allclose(q.v, p.v, atol=1e-14)
    r = A.group_mul(p, A.group_inv(p))
    assert np.allclose(r.g, np.eye(3), atol=1e-12) and np.allclose(r.v, 0, atol=1e-12)


def test_group_pushforward_example():
    p = A.GroupElement(np.eye(3), np.array([1.0, 0, 0]), "heavy_top")
    q = A.GroupElement(Rz(np.pi / 2), np.zeros(3), "heavy_top")
    assert np.allclose(A.group_mul(p, q).v, [0, 1, 0], atol=1e-15)


def test_group_rejects_non_orthogonal():
    with pytest.raises(A.GroupValidationError):
        A.GroupElement(np.diag([1.0, 2.0, 1.0]), np.zeros(3), "heavy_top")
    with pytest.raises(A.GroupValidationError):
        A.GroupElement(np.diag([1.0, 1.0, -1.0]), np.zeros(3), "heavy_top")


def test_group_associativity_random():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b, c = (rand_group(rng) for _ in range(3))
        l = A.group_mul(A.group_mul(a, b), c)
        r = A.group_mul(a, A.group_mul(b, c))
        assert np.allclose(l.g, r.g, atol=1e-12) and np.allclose(l.v, r.v, atol=1e-12)


def test_AD_cases():
    rng = np.random.default_rng(2)
    e = A.identity("heavy_top")
    p, q = rand_group(rng), rand_group(rng)
    x = A.AD(e, q)
    assert np.allclose(x.g, q.g, atol=1e-14) and np.allclose(x.v, q.v, atol=1e-14)
    y = A.AD(p, e)
    assert np.allclose(y.g, np.eye(3), atol=1e-12) and np.allclose(y.v, 0, atol=1e-12)
    # three-factor product oracle written with explicit matrices
    pi = (p.g.T, -p.g.T @ p.v)
    m1 = (q.g @ p.g, q.v + q.g @ p.v)
    want = (pi[0] @ m1[0], pi[1] + pi[0] @ m1[1])
    z = A.AD(p, q)
    assert np.allclose(z.g, want[0], atol=1e-12) and np.allclose(z.v, want[1], atol=1e-12)


def test_Ad_identity_and_rotation():
    y = ht([1, 2, 3], [4, 5, 6])
    z = A.Ad(A.identity("heavy_top"), y)
    assert np.array_equal(z.u, y.u) and np.array_equal(z.b, y.b)
    r = A.Ad(A.GroupElement(Rz(np.pi / 2), np.zeros(0), "rigid_body"), rb([1, 0, 0]))
    assert np.allclose(r.u, [0, 1, 0], atol=1e-15)


def test_Ad_star_duality_heavy_top():
    rng = np.random.default_rng(3)
    for _ in range(100):
        p = rand_group(rng)
        x = htd(rng.normal(size=3), rng.normal(size=3))
        y = ht(rng.normal(size=3), rng.normal(size=3))
        lhs = A.pair(A.Ad_star(A.group_inv(p), x), y)
        assert abs(lhs - A.pair(x, A.Ad(p, y))) < 1e-10


# -- ad / ad* / diamond ----------------------------------------------------------


def test_ad_self_is_zero():
    x = ht([1, 2, 3], [0.5, -1, 2])
    z = A.ad(x, x)
    assert np.all(z.u == 0) and np.all(z.b == 0)


def test_ad_rigid_body_matches_matrix_commutator():
    # bracket of the hat matrices, read back through vee
    got = A.ad(rb(E[0]), rb(E[1])).u
    assert np.allclose(got, vee(hat(E[0]) @ hat(E[1]) - hat(E[1]) @ hat(E[0])))
    assert np.allclose(got, E[2])


def test_ad_heavy_top_rotation_of_vector():
    z = A.ad(ht(E[0], [0, 0, 0]), ht([0, 0, 0], E[1]))
    assert np.allclose(z.u, 0) and np.allclose(z.b, E[2])


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, vec3, vec3)
def test_ad_antisymmetric(u1, b1, u2, b2):
    x, y = ht(u1, b1), ht(u2, b2)
    a, b = A.ad(x, y), A.ad(y, x)
    assert np.array_equal(a.u, -b.u) and np.array_equal(a.b, -b.b)


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, vec3)
def test_jacobi(u, v, w):
    x, y, z = ht(u, u), ht(v, w), ht(w, v)
    s = A.ad(x, A.ad(y, z)).u + A.ad(y, A.ad(z, x)).u + A.ad(z, A.ad(x, y)).u
    assert np.max(np.abs(s)) < 1e-12 * max(1.0, np.max(np.abs(u)) * np.max(np.abs(v)) * np.max(np.abs(w)))


def test_diamond_examples():
    assert np.allclose(A.diamond(np.zeros(3), E[1]), 0)
    assert np.allclose(A.diamond(E[0], E[1]), -E[2])


@settings(max_examples=60, deadline=None)
@given(vec3, vec3)
def test_diamond_defining_identity(v, a):
    d = A.diamond(v, a)
    for u in E:
        assert abs(d @ u + a @ np.cross(u, v)) < 1e-12 * max(1.0, np.abs(v).max() * np.abs(a).max())


def test_diamond_trivial_V_unsupported():
    with pytest.raises(A.RealizationError):
        A.diamond(np.zeros(3), np.zeros(3), "rigid_body")


def test_ad_star_examples():
    z = A.ad_star(ht([0, 0, 0], [0, 0, 0]), htd([1, 2, 3], [4, 5, 6]))
    assert np.all(z.m == 0) and np.all(z.a == 0)
    m = A.ad_star(rb(E[0]), rbd(E[1])).m
    assert np.allclose(m, -E[2])
    # duality against the ad(e1, .) basis
    for k in range(3):
        assert abs(m @ E[k] - E[1] @ A.ad(rb(E[0]), rb(E[k])).u) < 1e-15


def test_ad_star_duality_random():
    rng = np.random.default_rng(4)
    for _ in range(200):
        x, z = ht(*rng.normal(size=(2, 3))), ht(*rng.normal(size=(2, 3)))
        y = htd(*rng.normal(size=(2, 3)))
        assert abs(A.pair(A.ad_star(x, y), z) - A.pair(y, A.ad(x, z))) < 1e-10


# -- Casimirs ------------------------------------------------------------------


def test_casimir_values():
    assert A.casimir_values(rbd([3, 4, 0])) == [25.0]
    assert A.casimir_values(htd([1, 0, 0], [0, 1, 0])) == [0.0, 1.0]


def test_casimirs_annihilated_by_coadjoint_directions():
    rng = np.random.default_rng(5)
    for _ in range(100):
        y = htd(*rng.normal(size=(2, 3)))
        x = ht(*rng.normal(size=(2, 3)))
        step = A.ad_star(x, y)
        for grad in A.casimir_gradients(y):
            assert abs(A.pair(step, grad)) < 1e-12
        yr = rbd(rng.normal(size=3))
        (g,) = A.casimir_gradients(yr)
        assert abs(A.pair(A.ad_star(rb(rng.normal(size=3)), yr), g)) < 1e-12


def test_casimir_euler2d_unsupported():
    g = F.Grid2D(8, 8)
    y = A.DualElement(F.zeros(g, "one_form"), None, "euler2d")
    with pytest.raises(A.RealizationError):
        A.casimir_values(y)


# -- grid realization ------------------------------------------------------------


def _grid_elems(grid, rng):
    vec = lambda: F.VectorField(F.band_limited(grid, rng, components=2), grid)
    sca = lambda: F.Field("scalar", F.band_limited(grid, rng), grid)
    return vec, sca


def test_grid_ad_antisymmetry_and_duality():
    grid = F.Grid2D(32, 32)
    rng = np.random.default_rng(6)
    vec, sca = _grid_elems(grid, rng)
    x = A.AlgebraElement(vec(), sca(), "euler2d")
    z = A.AlgebraElement(vec(), sca(), "euler2d")
    a, b = A.ad(x, z), A.ad(z, x)
    scale = np.max(np.abs(a.u.values))
    assert np.max(np.abs(a.u.values + b.u.values)) < 1e-8 * scale
    y = A.DualElement(
        F.Field("one_form", F.band_limited(grid, rng, components=2), grid),
        F.Field("density", F.band_limited(grid, rng), grid),
        "euler2d",
    )
    lhs, rhs = A.pair(A.ad_star(x, y), z), A.pair(y, a)
    assert abs(lhs - rhs) < 1e-6 * max(abs(lhs), abs(rhs))


def test_grid_diamond_duality_20_fields():
    grid = F.Grid2D(32, 32)
    rng = np.random.default_rng(7)
    vec, sca = _grid_elems(grid, rng)
    b = sca()
    a = F.Field("density", F.band_limited(grid, rng), grid)
    d = A.diamond(b, a, "euler2d")
    for _ in range(20):
        u = vec()
        lhs = F.pair_fields(F.sharp(d), u)
        rhs = -F.pair_fields(a, F.lie_derivative(u, b))
        assert abs(lhs - rhs) < 1e-8 * max(abs(lhs), abs(rhs), 1e-300)


def test_grid_diamond_unsupported_kinds():
    grid = F.Grid2D(8, 8)
    with pytest.raises(F.FieldKindError):
        A.diamond(F.zeros(grid, "one_form"), F.zeros(grid, "density"), "euler2d")
