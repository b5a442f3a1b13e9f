"""Semidirect-product group and algebra actions.

Three realizations share one interface:

``rigid_body``
    so(3) with trivial V.  Axis vectors under the hat map.
``heavy_top``
    so(3) acting on V = R^3 by ``L_u v = u x v``.
``euler2d``
    divergence-free vector fields on the torus acting on scalar buoyancy
    fields; duals are one-form densities and densities.

Signs.  For the finite-dimensional realizations the algebra element ``u``
stands for the rotation vector field ``X_u(x) = u x x``, whose vector-field
commutator is ``[X_u, X_w] = -X_{u x w}``.  With the right-action minus sign
this gives ``ad_u w = u x w``.  Every other formula below follows from that
choice together with ``L_u v = u x v`` by duality, so the pairings

    <ad*_x y, z> = <y, ad_x z>,   <v <> a, u> = -<a, L_u v>

hold exactly.  Group composition ``(g1, v1) * (g2, v2)`` is the matrix
product ``g2 @ g1`` (apply ``g1`` first), which is what makes
``(g1 g2, v2 + g2 v1)`` associative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import fields as F

REALIZATIONS = ("rigid_body", "heavy_top", "euler2d")
FINITE = ("rigid_body", "heavy_top")


class RealizationError(ValueError):
    pass


class GroupValidationError(ValueError):
    pass


def _vec(x, n):
    a = np.asarray(x, dtype=np.float64).reshape(n)
    if not np.all(np.isfinite(a)):
        raise ValueError("algebra components must be finite")
    return a


def _v_dim(realization):
    return 3 if realization == "heavy_top" else 0


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """``(u, b)``: Lie-algebra part and vector-space part."""

    u: Any
    b: Any = None
    realization: str = "rigid_body"

    def __post_init__(self):
        if self.realization not in REALIZATIONS:
            raise RealizationError(f"unknown realization {self.realization!r}")
        if self.realization in FINITE:
            object.__setattr__(self, "u", _vec(self.u, 3))
            nb = _v_dim(self.realization)
            b = np.zeros(nb) if self.b is None else _vec(self.b, nb)
            object.__setattr__(self, "b", b)

    def __add__(self, other):
        _same(self, other)
        return AlgebraElement(self.u + other.u, _add_opt(self.b, other.b), self.realization)

    def __mul__(self, c):
        return AlgebraElement(self.u * c, None if self.b is None else self.b * c, self.realization)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class DualElement:
    """``(m, a)``: momentum and advected quantity."""

    m: Any
    a: Any = None
    realization: str = "rigid_body"

    def __post_init__(self):
        if self.realization not in REALIZATIONS:
            raise RealizationError(f"unknown realization {self.realization!r}")
        if self.realization in FINITE:
            object.__setattr__(self, "m", _vec(self.m, 3))
            na = _v_dim(self.realization)
            a = np.zeros(na) if self.a is None else _vec(self.a, na)
            object.__setattr__(self, "a", a)

    def __add__(self, other):
        _same(self, other)
        return DualElement(self.m + other.m, _add_opt(self.a, other.a), self.realization)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, c):
        return DualElement(self.m * c, None if self.a is None else self.a * c, self.realization)

    __rmul__ = __mul__

    def as_array(self):
        if self.realization not in FINITE:
            raise RealizationError("as_array is for finite-dimensional realizations")
        return np.concatenate([self.m, self.a])

    @classmethod
    def from_array(cls, arr, realization):
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr[:3], arr[3:], realization)


@dataclass(frozen=True, eq=False)
class GroupElement:
    """``(g, v)`` with ``g`` in SO(3); finite-dimensional realizations only."""

    g: np.ndarray
    v: Any = None
    realization: str = "heavy_top"

    def __post_init__(self):
        if self.realization not in FINITE:
            raise RealizationError("group elements are implemented for rigid_body and heavy_top")
        g = np.asarray(self.g, dtype=np.float64).reshape(3, 3)
        if not np.allclose(g.T @ g, np.eye(3), rtol=0, atol=1e-12) or abs(np.linalg.det(g) - 1) > 1e-12:
            raise GroupValidationError("g must be a rotation matrix (g^T g = I, det g = 1)")
        object.__setattr__(self, "g", g)
        nv = _v_dim(self.realization)
        v = np.zeros(nv) if self.v is None else _vec(self.v, nv)
        object.__setattr__(self, "v", v)


def identity(realization="heavy_top"):
    return GroupElement(np.eye(3), None, realization)


def _add_opt(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _same(x, y):
    if x.realization != y.realization:
        raise RealizationError(f"realization mismatch: {x.realization} vs {y.realization}")


def _cross_v(u, v):
    # L_u v on V; zero-dimensional V for the rigid body
    return np.cross(u, v) if v.size else v


# -- pairing -----------------------------------------------------------------


def pair(x: DualElement, y: AlgebraElement) -> float:
    _same(x, y)
    if x.realization in FINITE:
        return float(x.m @ y.u + x.a @ y.b)
    total = F.pair_fields(x.m, y.u)
    if x.a is not None and y.b is not None:
        total += F.pair_fields(x.a, y.b)
    return total


# -- group -------------------------------------------------------------------


def group_mul(p: GroupElement, q: GroupElement) -> GroupElement:
    _same(p, q)
    return GroupElement(q.g @ p.g, q.v + q.g @ p.v if p.v.size else q.v, p.realization)


def group_inv(p: GroupElement) -> GroupElement:
    gt = p.g.T
    return GroupElement(gt, -(gt @ p.v) if p.v.size else p.v, p.realization)


def AD(p: GroupElement, q: GroupElement) -> GroupElement:
    return group_mul(group_mul(p, q), group_inv(p))


def Ad(p: GroupElement, y: AlgebraElement) -> AlgebraElement:
    """``(g_* u, g^* b - g^* L_u v)`` with ``g_* = g`` and ``g^* = g^T``."""
    _same(p, y)
    g = p.g
    b = g.T @ y.b - g.T @ _cross_v(y.u, p.v) if y.b.size else y.b
    return AlgebraElement(g @ y.u, b, y.realization)


def Ad_star(p: GroupElement, x: DualElement) -> DualElement:
    """Coadjoint action, dual to ``Ad`` via ``<Ad*_{p^-1} x, y> = <x, Ad_p y>``."""
    _same(p, x)
    q = group_inv(p)
    g, v = q.g, q.v
    ga = g @ x.a if x.a.size else x.a
    m = g.T @ x.m
    if x.a.size:
        m = m + diamond(v, ga, x.realization)
    return DualElement(m, ga, x.realization)


# -- algebra -----------------------------------------------------------------


def ad(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    _same(x, y)
    if x.realization in FINITE:
        b = _cross_v(x.u, y.b) - _cross_v(y.u, x.b)
        return AlgebraElement(np.cross(x.u, y.u), b, x.realization)
    u = -F.lie_derivative(x.u, y.u)
    b = None
    if x.b is not None or y.b is not None:
        g = x.u.grid
        xb = x.b if x.b is not None else F.zeros(g)
        yb = y.b if y.b is not None else F.zeros(g)
        b = F.lie_derivative(x.u, yb) - F.lie_derivative(y.u, xb)
    return AlgebraElement(u, b, x.realization)


def diamond(v, a, realization="heavy_top"):
    """Dual of ``u -> L_u v``: ``<v <> a, u> = -<a, L_u v>``."""
    if realization == "heavy_top":
        v = np.asarray(v, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64)
        return -np.cross(v, a)
    if realization == "euler2d":
        g = v.grid
        if v.kind == "scalar" and a.kind == "density":
            # V = scalars, V* = densities: v <> a = -a grad v
            gx, gy = F.gradient(v.values, g)
            out = np.stack([-F.dealias(a.values * gx, g), -F.dealias(a.values * gy, g)])
        elif v.kind == "density" and a.kind == "scalar":
            # V = densities, V* = scalars (buoyancy): v <> a = v grad a
            gx, gy = F.gradient(a.values, g)
            out = np.stack([F.dealias(v.values * gx, g), F.dealias(v.values * gy, g)])
        else:
            raise F.FieldKindError(
                f"unsupported diamond pairing ({v.kind}, {a.kind}); need scalar/density duals"
            )
        return F.Field("one_form", out, g)
    raise RealizationError(f"diamond is not defined for {realization!r} (trivial V)")


def _times_div(div_u, m):
    return np.stack([F.dealias(div_u * m.values[c], m.grid) for c in range(2)])


def ad_star(x: AlgebraElement, y: DualElement) -> DualElement:
    _same(x, y)
    if x.realization in FINITE:
        m = -np.cross(x.u, y.m)
        if y.a.size:
            m = m + diamond(x.b, y.a, x.realization)
        return DualElement(m, -np.cross(x.u, y.a) if y.a.size else y.a, x.realization)
    m = F.lie_derivative(x.u, y.m)
    m = m.with_values(m.values + _times_div(F.divergence(x.u.values, x.u.grid), y.m))
    a = None
    if y.a is not None:
        if x.b is not None:
            m = m + diamond(x.b, y.a, "euler2d")
        a = -F.lie_derivative(x.u, y.a)
    return DualElement(m, a, x.realization)


# -- Casimirs ------------------------------------------------------------------


def casimir_values(y: DualElement):
    if y.realization == "rigid_body":
        return [float(y.m @ y.m)]
    if y.realization == "heavy_top":
        return [float(y.m @ y.a), float(y.a @ y.a)]
    raise RealizationError("Casimirs are provided for finite-dimensional realizations only")


def casimir_gradients(y: DualElement):
    """Gradients of :func:`casimir_values` as algebra elements."""
    if y.realization == "rigid_body":
        return [AlgebraElement(2 * y.m, None, "rigid_body")]
    if y.realization == "heavy_top":
        return [
            AlgebraElement(y.a, y.m, "heavy_top"),
            AlgebraElement(np.zeros(3), 2 * y.a, "heavy_top"),
        ]
    raise RealizationError("Casimirs are provided for finite-dimensional realizations only")
