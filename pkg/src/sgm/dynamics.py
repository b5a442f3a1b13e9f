"""Brownian paths, Stratonovich midpoint stepping and the SALT evolution laws.

Every stepper is implicit midpoint in Stratonovich form solved by fixed-point
iteration.  Drift and noise increments are accumulated separately so that a
zero-channel noise model reproduces the deterministic stepper bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import _accel
from . import algebra as A
from . import fields as F

FP_TOL = 1e-12
FP_MAX_ITER = 50
CFL_MAX = 0.5


class ConvergenceError(RuntimeError):
    def __init__(self, residual, iterations):
        super().__init__(
            f"fixed-point iteration did not converge: residual {residual:.3e} after {iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations


class CFLError(RuntimeError):
    pass


class CFLWarning(RuntimeWarning):
    pass


class SingularModelError(ValueError):
    pass


# -- noise -------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Data vector fields ``xi_i`` (3-vectors or vector Fields) with a common amplitude."""

    xis: tuple = ()
    labels: tuple = ()
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "xis", tuple(self.xis))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"xi{i + 1}" for i in range(len(self.xis))))
        grids = {x.grid for x in self.xis if isinstance(x, F.Field)}
        if len(grids) > 1:
            raise F.GridMismatchError("all noise fields must live on one grid")

    @property
    def M(self):
        return len(self.xis)

    def scaled(self):
        return [x * self.amplitude for x in self.xis] if self.amplitude != 1.0 else list(self.xis)


def _seed_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *key]))


def _odd_part(n):
    k = 0
    while n % 2 == 0:
        n //= 2
        k += 1
    return n, k


@dataclass(frozen=True, eq=False)
class NoisePath:
    seed: int
    dt: float
    n_steps: int
    increments: np.ndarray  # shape (n_steps, M)

    @property
    def M(self):
        return self.increments.shape[1]

    @property
    def T(self):
        return self.dt * self.n_steps

    def coarsen(self, factor=2):
        if self.n_steps % factor:
            raise ValueError("n_steps must be divisible by the coarsening factor")
        inc = self.increments.reshape(self.n_steps // factor, factor, self.M).sum(axis=1)
        return NoisePath(self.seed, self.dt * factor, self.n_steps // factor, inc)

    def path(self):
        """Brownian values ``W(t_k)``, shape (n_steps + 1, M)."""
        return np.vstack([np.zeros((1, self.M)), np.cumsum(self.increments, axis=0)])


def sample_brownian(seed, dt, n_steps, M):
    """Seeded Brownian increments built by dyadic bridge refinement.

    With ``n_steps = q * 2**k`` (q odd) the path is drawn as q coarse
    increments over ``T = dt*n_steps`` and refined k times; level ``l`` always
    uses the stream keyed by ``(seed, q, l)``.  Halving ``dt`` at fixed ``T``
    therefore refines the same path: each coarse increment is the sum of its
    two fine halves.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if int(n_steps) < 1 or int(M) < 0:
        raise ValueError("need n_steps >= 1 and M >= 0")
    n_steps, M = int(n_steps), int(M)
    if M == 0:
        return NoisePath(seed, dt, n_steps, np.zeros((n_steps, 0)))
    T = dt * n_steps
    q, k = _odd_part(n_steps)
    h = T / q
    inc = _seed_rng(seed, q, 0).standard_normal((q, M)) * np.sqrt(h)
    for level in range(1, k + 1):
        h /= 2
        z = _seed_rng(seed, q, level).standard_normal(inc.shape) * np.sqrt(h / 2)
        left = inc / 2 + z
        right = inc - left
        inc = np.stack([left, right], axis=1).reshape(-1, M)
    inc.setflags(write=False)
    return NoisePath(seed, dt, n_steps, inc)


# -- generic Stratonovich midpoint ------------------------------------------


def _converged(x_new, x_old, x0, tol):
    scale = max(1.0, float(np.max(np.abs(x0)))) if x0.size else 1.0
    res = float(np.max(np.abs(x_new - x_old))) if x0.size else 0.0
    return res <= tol * scale, res


def stratonovich_step(state, rhs, dt, dW, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """One implicit-midpoint step ``x1 = x0 + rhs((x0 + x1)/2, dt, dW)``.

    ``rhs`` returns the full increment ``f(x) dt + sum_i g_i(x) dW_i``.
    """
    x0 = np.asarray(state, dtype=np.float64)
    x1 = x0 + rhs(x0, dt, dW)
    res = np.inf
    for it in range(1, max_iter + 1):
        x_new = x0 + rhs(0.5 * (x0 + x1), dt, dW)
        ok, res = _converged(x_new, x1, x0, tol)
        x1 = x_new
        if ok:
            return x1
    raise ConvergenceError(res, max_iter)


def implicit_midpoint_step(state, f, dt, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """Deterministic implicit midpoint ``x1 = x0 + dt f((x0 + x1)/2)``."""
    x0 = np.asarray(state, dtype=np.float64)
    x1 = x0 + dt * f(x0)
    res = np.inf
    for it in range(1, max_iter + 1):
        x_new = x0 + dt * f(0.5 * (x0 + x1))
        ok, res = _converged(x_new, x1, x0, tol)
        x1 = x_new
        if ok:
            return x1
    raise ConvergenceError(res, max_iter)


# -- Lagrangian models ---------------------------------------------------------


class LagrangianModel:
    """Reduced Lagrangian ``l(u, a)`` with variational derivatives and Legendre map."""

    realization = "rigid_body"

    def lagrangian(self, u, a=None): ...

    def dl_du(self, u, a=None): ...

    def dl_da(self, u, a=None): ...

    def hamiltonian(self, m, a=None): ...

    def dh_dm(self, m, a=None): ...

    def dh_da(self, m, a=None): ...


def _check_inertia(inertia):
    I = np.asarray(inertia, dtype=np.float64).reshape(3)
    if np.any(~np.isfinite(I)) or np.any(I <= 0):
        raise SingularModelError(f"principal moments of inertia must be positive, got {I}")
    return I


class RigidBody(LagrangianModel):
    realization = "rigid_body"

    def __init__(self, inertia=(1.0, 2.0, 3.0)):
        self.inertia = _check_inertia(inertia)

    def lagrangian(self, u, a=None):
        u = np.asarray(u)
        return 0.5 * float(np.sum(self.inertia * u * u))

    def dl_du(self, u, a=None):
        return self.inertia * np.asarray(u)

    def dl_da(self, u, a=None):
        return np.zeros(0)

    def hamiltonian(self, m, a=None):
        m = np.asarray(m)
        return 0.5 * float(np.sum(m * m / self.inertia))

    def dh_dm(self, m, a=None):
        return np.asarray(m) / self.inertia

    def dh_da(self, m, a=None):
        return np.zeros(0)


class HeavyTop(LagrangianModel):
    """``l = 1/2 u.I u - mgl chi.a``; ``a`` is the gravity direction seen in the body."""

    realization = "heavy_top"

    def __init__(self, inertia=(1.0, 2.0, 3.0), mgl=1.0, chi=(0.0, 0.0, 1.0)):
        self.inertia = _check_inertia(inertia)
        self.mgl = float(mgl)
        self.chi = np.asarray(chi, dtype=np.float64).reshape(3)

    def lagrangian(self, u, a):
        u = np.asarray(u)
        return 0.5 * float(np.sum(self.inertia * u * u)) - self.mgl * float(self.chi @ a)

    def dl_du(self, u, a=None):
        return self.inertia * np.asarray(u)

    def dl_da(self, u, a=None):
        return -self.mgl * self.chi

    def hamiltonian(self, m, a):
        m = np.asarray(m)
        return 0.5 * float(np.sum(m * m / self.inertia)) + self.mgl * float(self.chi @ a)

    def dh_dm(self, m, a=None):
        return np.asarray(m) / self.inertia

    def dh_da(self, m, a=None):
        return self.mgl * self.chi


class Euler2D(LagrangianModel):
    """``l = 1/2 int |u|^2 - g int Z(y) b`` with unit density.

    ``Z(y) = (Ly/2pi) sin(2pi y/Ly)`` is a periodic height surrogate; with
    ``gravity = 0`` the model is plain incompressible Euler.
    """

    realization = "euler2d"

    def __init__(self, grid, gravity=0.0):
        self.grid = grid
        self.gravity = float(gravity)

    def height(self):
        _, Y = self.grid.coords
        L = self.grid.Ly
        return L / (2 * np.pi) * np.sin(2 * np.pi * Y / L)

    def height_slope(self):
        _, Y = self.grid.coords
        return np.cos(2 * np.pi * Y / self.grid.Ly)

    def lagrangian(self, u, a=None):
        val = 0.5 * F.pair_fields(u, u)
        if a is not None and self.gravity:
            val -= self.gravity * float(np.sum(self.height() * a.values) * self.grid.cell_area)
        return val

    def dl_du(self, u, a=None):
        return F.flat(u)

    def dl_da(self, u=None, a=None):
        return F.Field("density", -self.gravity * self.height(), self.grid)

    def hamiltonian(self, m, a=None):
        u = F.sharp(m)
        return F.pair_fields(m, u) - self.lagrangian(u, a)

    def dh_dm(self, m, a=None):
        return F.sharp(m)

    def dh_da(self, m=None, a=None):
        return F.Field("density", self.gravity * self.height(), self.grid)


def legendre_transform(L, u, a=None):
    """Return ``(m, h)`` with ``m = dl/du`` and ``h = <m, u> - l(u, a)``."""
    m = L.dl_du(u, a)
    if L.realization == "euler2d":
        h = F.pair_fields(m, u) - L.lagrangian(u, a)
    else:
        h = float(np.asarray(m) @ np.asarray(u)) - L.lagrangian(u, a)
    return m, h


# -- finite-dimensional Lie-Poisson ---------------------------------------------


def _require_finite(L, noise):
    if L.realization not in A.FINITE:
        raise A.RealizationError("lie_poisson_step is for rigid_body / heavy_top")
    if noise is not None and noise.M and any(np.shape(x) != (3,) for x in noise.xis):
        raise A.RealizationError("finite-dimensional noise fields must be 3-vectors")


def _lp_drift(L):
    R = L.realization

    def f(x):
        y = A.DualElement.from_array(x, R)
        dh = A.AlgebraElement(L.dh_dm(y.m, y.a), L.dh_da(y.m, y.a), R)
        return -A.ad_star(dh, y).as_array()

    return f


def lie_poisson_step(y, L, noise, dt, dW, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """One step of ``d(m,a) = -ad*_{dh}(m,a) dt - sum_i ad*_{(xi_i,0)}(m,a) o dW_i``."""
    _require_finite(L, noise)
    R = L.realization
    drift = _lp_drift(L)
    xis = noise.scaled() if noise is not None else []
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)
    if len(xis) != dW.size:
        raise ValueError(f"{len(xis)} noise fields but {dW.size} Brownian increments")

    if not xis:

        def rhs(x, dt, dW):
            return drift(x) * dt

    else:
        noise_dirs = [A.AlgebraElement(xi, None, R) for xi in xis]

        def rhs(x, dt, dW):
            yy = A.DualElement.from_array(x, R)
            out = drift(x) * dt
            for xi, w in zip(noise_dirs, dW):
                out = out - A.ad_star(xi, yy).as_array() * w
            return out

    x1 = stratonovich_step(y.as_array(), rhs, dt, dW, tol, max_iter)
    return A.DualElement.from_array(x1, R)


def lie_poisson_step_deterministic(y, L, dt, tol=FP_TOL, max_iter=FP_MAX_ITER):
    _require_finite(L, None)
    x1 = implicit_midpoint_step(y.as_array(), _lp_drift(L), dt, tol, max_iter)
    return A.DualElement.from_array(x1, L.realization)


@dataclass
class Trajectory:
    """States of a finite-dimensional run, one row per saved time."""

    times: np.ndarray
    states: np.ndarray
    realization: str
    noise_M: int = 0

    def duals(self):
        return [A.DualElement.from_array(s, self.realization) for s in self.states]


def _saved_times(path, save_every):
    idx = [0] + [n + 1 for n in range(path.n_steps) if (n + 1) % save_every == 0 or n + 1 == path.n_steps]
    return np.array(idx) * path.dt


def run_lie_poisson(y0, L, noise, path, tol=FP_TOL, save_every=1, kernel=True):
    """Integrate along a :class:`NoisePath`; returns a :class:`Trajectory`.

    ``kernel=True`` uses the compiled so(3) x R^3 loop from ``_accel``;
    ``kernel=False`` steps through :func:`lie_poisson_step` and the generic
    ``ad_star``.
    """
    _require_finite(L, noise)
    if path.M != (noise.M if noise is not None else 0):
        raise ValueError(f"noise path has {path.M} channels, noise model {noise.M if noise else 0}")
    if not kernel:
        y = y0
        states = [y0.as_array()]
        for n in range(path.n_steps):
            y = lie_poisson_step(y, L, noise, path.dt, path.increments[n], tol=tol)
            if (n + 1) % save_every == 0 or n + 1 == path.n_steps:
                states.append(y.as_array())
        return Trajectory(_saved_times(path, save_every), np.array(states), L.realization, path.M)

    x0 = np.zeros(6)
    x0[: y0.as_array().size] = y0.as_array()
    grav = L.dh_da(None) if L.realization == "heavy_top" else np.zeros(3)
    xis = np.array(noise.scaled(), dtype=np.float64).reshape(-1, 3) if noise is not None else np.zeros((0, 3))
    saved, status, res = _accel.lie_poisson_run(
        x0, L.inertia, np.asarray(grav, dtype=np.float64), xis,
        np.ascontiguousarray(path.increments, dtype=np.float64).reshape(path.n_steps, -1),
        float(path.dt), float(tol), FP_MAX_ITER, int(save_every),
    )
    if status:
        raise ConvergenceError(res, FP_MAX_ITER)
    n = 3 if L.realization == "rigid_body" else 6
    return Trajectory(_saved_times(path, save_every), saved[:, :n].copy(), L.realization, path.M)


# -- fluid ---------------------------------------------------------------------


def _noise_field(xis, dW, grid):
    tot = np.zeros((2,) + grid.shape)
    for xi, w in zip(xis, dW):
        tot = tot + xi.values * w
    return tot


_flux_div = F.flux_divergence


def _check_cfl(vel_dt, xis, dW, grid, cfl_max, mode):
    # per-node bound |u dt| + sum_i |xi_i| |dW_i|, in cells
    disp = np.hypot(vel_dt[0], vel_dt[1])
    for xi, w in zip(xis, dW):
        disp = disp + np.hypot(xi.values[0], xi.values[1]) * abs(w)
    c = float(np.max(disp)) / min(grid.dx, grid.dy)
    if c > cfl_max:
        msg = f"CFL number {c:.3f} exceeds {cfl_max}"
        if mode == "error":
            raise CFLError(msg)
        if mode == "warn":
            warnings.warn(msg, CFLWarning, stacklevel=3)
    return c


def _fluid_rhs(grid, xis, gravity_slope=None, with_b=False):
    def drift(x):
        omega = x[0]
        u = F.velocity_from_vorticity(F.Field("scalar", omega, grid)).values
        out = np.empty_like(x)
        out[0] = -_flux_div(u, omega, grid)
        if with_b:
            out[1] = -_flux_div(u, x[1], grid)
            if gravity_slope is not None:
                out[0] += F.dealias(gravity_slope * F.ddx(x[1], grid), grid)
        return out

    def rhs(x, dt, dW):
        out = drift(x) * dt
        if xis:
            vel = _noise_field(xis, dW, grid)
            noise = np.empty_like(x)
            for c in range(x.shape[0]):
                noise[c] = -_flux_div(vel, x[c], grid)
            out = out + noise
        return out

    return drift, rhs


def _stacked(omega, b=None):
    return omega.values[None] if b is None else np.stack([omega.values, b.values])


def salt_euler_step(
    omega, noise, dt, dW, tol=FP_TOL, max_iter=FP_MAX_ITER, cfl_max=CFL_MAX, cfl_mode="error"
):
    """Stratonovich midpoint step of ``d omega + (dchi . grad) omega = 0``."""
    g = omega.grid
    xis = noise.scaled() if noise is not None else []
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)
    if len(xis) != dW.size:
        raise ValueError(f"{len(xis)} noise fields but {dW.size} Brownian increments")
    if cfl_mode != "off":
        u = F.velocity_from_vorticity(omega).values
        _check_cfl(u * dt, xis, dW, g, cfl_max, cfl_mode)
    _, rhs = _fluid_rhs(g, xis)
    x1 = stratonovich_step(_stacked(omega), rhs, dt, dW, tol, max_iter)
    return omega.with_values(x1[0])


def euler_step(omega, dt, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """Deterministic 2D Euler in vorticity form, implicit midpoint."""
    drift, _ = _fluid_rhs(omega.grid, [])
    x1 = implicit_midpoint_step(_stacked(omega), drift, dt, tol, max_iter)
    return omega.with_values(x1[0])


def boussinesq_step(
    omega, b, model, noise, dt, dW, tol=FP_TOL, max_iter=FP_MAX_ITER, cfl_max=CFL_MAX, cfl_mode="error"
):
    """Co-evolve vorticity and buoyancy for :class:`Euler2D` with gravity.

    Vorticity gains ``g Z'(y) d_x b dt``, the curl of the diamond term.
    """
    g = omega.grid
    xis = noise.scaled() if noise is not None else []
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)
    if cfl_mode != "off":
        u = F.velocity_from_vorticity(omega).values
        _check_cfl(u * dt, xis, dW, g, cfl_max, cfl_mode)
    slope = model.gravity * model.height_slope() if model.gravity else None
    _, rhs = _fluid_rhs(g, xis, slope, with_b=True)
    x1 = stratonovich_step(_stacked(omega, b), rhs, dt, dW, tol, max_iter)
    return omega.with_values(x1[0]), b.with_values(x1[1])


# -- tracer advection ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StochIncrement:
    """``dchi = u dt + sum_i xi_i dW_i`` for one step; ``u`` may be None."""

    dt: float
    drift: Any = None
    noise: NoiseModel | None = None
    dW: Any = ()

    def noise_vector(self, grid):
        xis = self.noise.scaled() if self.noise is not None else []
        return F.VectorField(_noise_field(xis, np.asarray(self.dW).reshape(-1), grid), grid)

    @property
    def has_noise(self):
        return self.noise is not None and self.noise.M > 0


def advect_step(a, incr, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """Stratonovich midpoint step of ``da + L_dchi a = 0`` for ``a``'s kind."""
    g = a.grid
    ksi = incr.noise_vector(g) if incr.has_noise else None

    def rhs(x, dt, dW):
        am = a.with_values(x)
        out = np.zeros_like(x)
        if incr.drift is not None:
            out = -F.lie_derivative(incr.drift, am).values * dt
        if ksi is not None:
            out = out - F.lie_derivative(ksi, am).values
        return out

    x1 = stratonovich_step(a.values, rhs, incr.dt, incr.dW, tol, max_iter)
    return a.with_values(x1)


# -- particles -------------------------------------------------------------------


def particle_step(points, u0, u1, noise, dt, dW, tol=FP_TOL, max_iter=FP_MAX_ITER):
    """Midpoint update of ``dx = u(x) dt + sum_i xi_i(x) o dW_i``.

    ``u0``/``u1`` are velocity fields at the start and end of the step (either
    may be None); the midpoint-in-time field is their average.
    """
    p0 = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if u0 is None and u1 is None:
        umid = None
    elif u1 is None or u0 is None:
        umid = u0 if u1 is None else u1
    else:
        umid = F.VectorField(0.5 * (u0.values + u1.values), u0.grid)
    xis = noise.scaled() if noise is not None else []
    dW = np.asarray(dW, dtype=np.float64).reshape(-1)

    def rhs(x, dt, dW):
        out = np.zeros_like(x)
        if umid is not None:
            out = F.interpolate(umid, x) * dt
        for xi, w in zip(xis, dW):
            out = out + F.interpolate(xi, x) * w
        return out

    return stratonovich_step(p0, rhs, dt, dW, tol, max_iter)


def reconstruct_particles(points, u_series, noise, path, tol=FP_TOL):
    """Particle trajectories, shape (n_steps + 1, n_points, 2), unwrapped coordinates.

    ``u_series`` is None, a single steady vector Field, or a sequence of
    ``n_steps + 1`` Fields at the step times.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(p)):
        raise ValueError("particle positions must be finite")
    out = [p]
    for n in range(path.n_steps):
        if u_series is None or isinstance(u_series, F.Field):
            u0 = u1 = u_series
        else:
            u0, u1 = u_series[n], u_series[n + 1]
        p = particle_step(p, u0, u1, noise, path.dt, path.increments[n], tol=tol)
        out.append(p)
    return np.array(out)
