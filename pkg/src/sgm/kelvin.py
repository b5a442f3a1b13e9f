"""Material loops, circulation and the Kelvin-Noether budget."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import algebra as A
from . import dynamics as D
from . import fields as F


class NonpositiveDensityError(ValueError):
    pass


class MissingAdvectedQuantityError(ValueError):
    pass


MAX_SPACING_CELLS = 4.0


@dataclass(frozen=True, eq=False)
class MaterialLoop:
    """Closed polyline of material points in unwrapped torus coordinates."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if p.shape[0] < 16:
            raise ValueError(f"a material loop needs at least 16 points, got {p.shape[0]}")
        if not np.all(np.isfinite(p)):
            raise ValueError("loop points must be finite")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n(self):
        return self.points.shape[0]

    def segments(self):
        return np.roll(self.points, -1, axis=0) - self.points

    def max_spacing(self):
        return float(np.max(np.hypot(*self.segments().T)))

    def roll(self, k):
        return MaterialLoop(np.roll(self.points, k, axis=0))


def circle_loop(center, radius, n):
    s = 2 * np.pi * np.arange(n) / n
    c = np.asarray(center, dtype=np.float64)
    return MaterialLoop(np.column_stack([c[0] + radius * np.cos(s), c[1] + radius * np.sin(s)]))


def line_integral(loop, alpha):
    """Trapezoidal ``oint alpha`` of a one-form Field along the closed polyline.

    Segment contributions are summed with ``math.fsum`` so the value does not
    depend on which point is labelled first.
    """
    vals = F.interpolate(alpha, loop.points)
    seg = loop.segments()
    avg = 0.5 * (vals + np.roll(vals, -1, axis=0))
    return math.fsum(np.einsum("ij,ij->i", avg, seg))


def _divide_by_density(alpha, rho):
    if rho is None:
        return alpha
    r = rho.values
    if np.any(r <= 0):
        raise NonpositiveDensityError(f"density must be positive, min is {float(r.min()):.3e}")
    return alpha.with_values(alpha.values / r[None])


def circulation(loop, m, rho=None):
    """Kelvin-Noether quantity ``oint_loop m / rho``; ``rho=None`` means unit density."""
    if m.kind not in ("one_form", "vector"):
        raise F.FieldKindError("circulation needs a momentum one-form")
    alpha = m if m.kind == "one_form" else F.flat(m)
    return line_integral(loop, _divide_by_density(alpha, rho))


def diamond_source_integral(loop, dl_da, a, rho=None):
    """``oint_loop (1/rho)(dl/da <> a)`` with the diamond from :mod:`sgm.algebra`."""
    if a is None or dl_da is None:
        raise MissingAdvectedQuantityError("the diamond source needs an advected quantity and dl/da")
    src = A.diamond(dl_da, a, "euler2d")
    return line_integral(loop, _divide_by_density(src, rho))


def resample_loop(loop, n=None):
    """Equal-arclength resampling through a periodic cubic spline."""
    p = loop.points
    closed = np.vstack([p, p[:1]])
    s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(closed, axis=0).T))])
    spline = CubicSpline(s, closed, bc_type="periodic")
    n = n or loop.n
    return MaterialLoop(spline(np.linspace(0.0, s[-1], n, endpoint=False)))


def advect_loop(loop, u0, u1, noise, dt, dW, grid=None, resample=True, tol=D.FP_TOL):
    """Move every loop point with the particle stepper; resample if spacing degrades."""
    p = D.particle_step(loop.points, u0, u1, noise, dt, dW, tol=tol)
    new = MaterialLoop(p)
    grid = grid or (u0.grid if u0 is not None else None)
    if resample and grid is not None:
        limit = MAX_SPACING_CELLS * min(grid.dx, grid.dy)
        if new.max_spacing() > limit:
            length = float(np.sum(np.hypot(*new.segments().T)))
            n = max(new.n, int(math.ceil(length / (0.5 * limit))))
            new = resample_loop(new, n)
    return new


def pulled_back_one_form(alpha, node_positions):
    """``g^* alpha`` at grid nodes from the flow map sampled at the nodes.

    ``node_positions`` has shape (2, ny, nx): unwrapped images ``g(X)`` of the
    nodes.  Derivatives of the periodic displacement ``g(X) - X`` are spectral.
    """
    g = alpha.grid
    X, Y = g.coords
    disp = node_positions - np.stack([X, Y])
    jac = [[F.ddx(disp[k], g) + (k == 0), F.ddy(disp[k], g) + (k == 1)] for k in range(2)]
    pts = np.column_stack([node_positions[0].ravel(), node_positions[1].ravel()])
    at = F.interpolate(alpha, pts).reshape(g.ny, g.nx, 2)
    out = np.stack(
        [at[..., 0] * jac[0][j] + at[..., 1] * jac[1][j] for j in range(2)]
    )
    return F.Field("one_form", out, g)


@dataclass
class CirculationRecord:
    times: list = field(default_factory=list)
    I_values: list = field(default_factory=list)
    source_values: list = field(default_factory=list)

    def append(self, t, I, src):
        self.times.append(float(t))
        self.I_values.append(float(I))
        self.source_values.append(float(src))

    def relative_drift(self):
        I = np.asarray(self.I_values)
        return float(abs(I[-1] - I[0]) / abs(I[0]))

    def max_relative_drift(self):
        I = np.asarray(self.I_values)
        return float(np.max(np.abs(I - I[0])) / abs(I[0]))

    def budget_residual(self):
        """``|I(T) - I(0) - int source dt| / max |I|``."""
        I = np.asarray(self.I_values)
        return float(abs(I[-1] - I[0] - self.source_values[-1]) / np.max(np.abs(I)))


def run_circulation_budget(
    omega0,
    loop0,
    noise,
    dt,
    T,
    seed,
    model=None,
    b0=None,
    path=None,
    kelvin_tol=None,
    cfl_mode="error",
    callback=None,
    tol=D.FP_TOL,
):
    """Co-evolve vorticity (and buoyancy), and a material loop on one noise path.

    Returns a :class:`CirculationRecord` with ``I(t)`` and the cumulative
    diamond source ``int_0^t oint (1/rho)(dl/da <> a) ds``.  When
    ``kelvin_tol`` is given and there is no buoyancy, a relative drift above
    it raises ``AssertionError``.
    """
    grid = omega0.grid
    M = noise.M if noise is not None else 0
    n_steps = int(round(T / dt))
    if path is None:
        path = D.sample_brownian(seed, dt, n_steps, M)
    buoyant = b0 is not None and model is not None and model.gravity != 0.0
    omega, b, loop = omega0, b0, loop0
    u = F.velocity_from_vorticity(omega)
    dl_da = model.dl_da() if buoyant else None

    def source(loop, b):
        return diamond_source_integral(loop, dl_da, b) if buoyant else 0.0

    rec = CirculationRecord()
    s_prev = source(loop, b)
    cum = 0.0
    rec.append(0.0, circulation(loop, F.flat(u)), cum)
    for n in range(path.n_steps):
        dW = path.increments[n]
        if b is not None:
            omega, b = D.boussinesq_step(omega, b, model, noise, dt, dW, tol=tol, cfl_mode=cfl_mode)
        else:
            omega = D.salt_euler_step(omega, noise, dt, dW, tol=tol, cfl_mode=cfl_mode)
        u_new = F.velocity_from_vorticity(omega)
        loop = advect_loop(loop, u, u_new, noise, dt, dW, grid, tol=tol)
        u = u_new
        s_new = source(loop, b)
        cum += 0.5 * (s_prev + s_new) * dt
        s_prev = s_new
        rec.append((n + 1) * dt, circulation(loop, F.flat(u)), cum)
        if callback is not None:
            callback(n + 1, omega, b, loop)
    if kelvin_tol is not None and not buoyant:
        drift = rec.max_relative_drift()
        assert drift < kelvin_tol, f"Kelvin circulation drift {drift:.3e} exceeds {kelvin_tol:.3e}"
    return rec
