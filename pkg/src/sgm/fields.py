"""Tensor calculus on a doubly periodic 2D grid.

Values are stored node-centred with shape ``(ny, nx)`` for scalar kinds and
``(2, ny, nx)`` for ``one_form`` / ``vector`` kinds.  Node ``[j, i]`` sits at
``(i*dx, j*dy)``.  Derivatives are pseudo-spectral; products go through the
2/3-rule filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _accel

KINDS = ("scalar", "density", "one_form", "vector")
N_COMPONENTS = {"scalar": 1, "density": 1, "one_form": 2, "vector": 2}


class GridMismatchError(ValueError):
    pass


class FieldKindError(ValueError):
    pass


class NonzeroMeanError(ValueError):
    def __init__(self, mean):
        super().__init__(f"vorticity must have zero mean on the torus, got mean={mean:.3e}")
        self.mean = mean


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    Lx: float = 2 * np.pi
    Ly: float = 2 * np.pi

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 8 or n % 2:
                raise ValueError(f"grid sizes must be even and >= 8, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def dx(self):
        return self.Lx / self.nx

    @property
    def dy(self):
        return self.Ly / self.ny

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def shape(self):
        return (self.ny, self.nx)

    @cached_property
    def coords(self):
        """Meshgrid ``(X, Y)`` of node positions, each of shape (ny, nx)."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y)

    @cached_property
    def wavenumbers(self):
        kx = 2 * np.pi * np.fft.rfftfreq(self.nx, d=self.dx)
        ky = 2 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)
        KX, KY = np.meshgrid(kx, ky)
        # Nyquist modes are dropped from first derivatives to keep them real and skew
        ikx = 1j * KX
        iky = 1j * KY
        ikx[:, self.nx // 2] = 0.0
        iky[self.ny // 2, :] = 0.0
        return KX, KY, ikx, iky

    @cached_property
    def dealias_mask(self):
        kx = np.abs(np.fft.rfftfreq(self.nx, d=1.0 / self.nx))
        ky = np.abs(np.fft.fftfreq(self.ny, d=1.0 / self.ny))
        KX, KY = np.meshgrid(kx, ky)
        return (KX < self.nx / 3.0) & (KY < self.ny / 3.0)


@dataclass(frozen=True, eq=False)
class Field:
    kind: str
    values: np.ndarray
    grid: Grid2D = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FieldKindError(f"unknown field kind {self.kind!r}")
        values = np.asarray(self.values, dtype=np.float64)
        want = self.grid.shape if N_COMPONENTS[self.kind] == 1 else (2,) + self.grid.shape
        if values.shape != want:
            raise ValueError(f"{self.kind} field needs shape {want}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_components(self):
        return N_COMPONENTS[self.kind]

    def with_values(self, values, kind=None):
        return Field(kind or self.kind, values, self.grid)

    def __add__(self, other):
        _check_same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def VectorField(values, grid):
    return Field("vector", values, grid)


def zeros(grid, kind="scalar"):
    shape = grid.shape if N_COMPONENTS[kind] == 1 else (2,) + grid.shape
    return Field(kind, np.zeros(shape), grid)


def _check_same(a, b):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")
    if a.kind != b.kind:
        raise FieldKindError(f"kind mismatch: {a.kind} vs {b.kind}")


# -- spectral primitives on raw arrays ---------------------------------------


def ddx(f, grid):
    _, _, ikx, _ = grid.wavenumbers
    return np.fft.irfft2(ikx * np.fft.rfft2(f), s=grid.shape)


def ddy(f, grid):
    _, _, _, iky = grid.wavenumbers
    return np.fft.irfft2(iky * np.fft.rfft2(f), s=grid.shape)


def gradient(f, grid):
    fh = np.fft.rfft2(f)
    _, _, ikx, iky = grid.wavenumbers
    return np.fft.irfft2(ikx * fh, s=grid.shape), np.fft.irfft2(iky * fh, s=grid.shape)


def dealias(f, grid):
    return np.fft.irfft2(np.fft.rfft2(f) * grid.dealias_mask, s=grid.shape)


def divergence(u, grid):
    return ddx(u[0], grid) + ddy(u[1], grid)


def curl(u, grid):
    return ddx(u[1], grid) - ddy(u[0], grid)


def flux_divergence(vel, f, grid):
    """Dealiased ``div(vel * f)`` for a vector array ``vel`` and scalar array ``f``."""
    _, _, ikx, iky = grid.wavenumbers
    fh = ikx * np.fft.rfft2(vel[0] * f) + iky * np.fft.rfft2(vel[1] * f)
    return np.fft.irfft2(fh * grid.dealias_mask, s=grid.shape)


def _advective(u, f, grid):
    fx, fy = gradient(f, grid)
    return dealias(u[0] * fx + u[1] * fy, grid)


# -- operations on Fields ------------------------------------------------------


def lie_derivative(u, T):
    """Lie derivative of the tensor ``T`` along the vector field ``u``.

    One-form components follow ``(L_u a)_j = u^k d_k a_j + a_k d_j u^k``.
    The vector kind returns the commutator ``u.grad w - w.grad u``.
    """
    if u.kind != "vector":
        raise FieldKindError("lie_derivative needs a vector field to differentiate along")
    if u.grid != T.grid:
        raise GridMismatchError(f"grid mismatch: {u.grid} vs {T.grid}")
    g = T.grid
    uv = u.values
    f = T.values
    if T.kind == "scalar":
        out = _advective(uv, f, g)
    elif T.kind == "density":
        out = flux_divergence(uv, f, g)
    elif T.kind == "one_form":
        ux, uy = gradient(uv[0], g)
        vx, vy = gradient(uv[1], g)
        out = np.stack(
            [
                _advective(uv, f[0], g) + dealias(f[0] * ux + f[1] * vx, g),
                _advective(uv, f[1], g) + dealias(f[0] * uy + f[1] * vy, g),
            ]
        )
    elif T.kind == "vector":
        ux, uy = gradient(uv[0], g)
        vx, vy = gradient(uv[1], g)
        out = np.stack(
            [
                _advective(uv, f[0], g) - dealias(f[0] * ux + f[1] * uy, g),
                _advective(uv, f[1], g) - dealias(f[0] * vx + f[1] * vy, g),
            ]
        )
    else:  # pragma: no cover - guarded by Field
        raise FieldKindError(T.kind)
    return T.with_values(out)


def stream_function(omega):
    """Solve ``lap psi = -omega`` spectrally (zero-mean psi)."""
    g = omega.grid
    KX, KY, _, _ = g.wavenumbers
    k2 = KX**2 + KY**2
    k2[0, 0] = 1.0
    psih = np.fft.rfft2(omega.values) / k2
    psih[0, 0] = 0.0
    return Field("scalar", np.fft.irfft2(psih, s=g.shape), g)


def velocity_from_vorticity(omega, mean_tol=1e-10):
    """Divergence-free velocity ``u = (d_y psi, -d_x psi)`` whose curl is ``omega``."""
    if omega.kind != "scalar":
        raise FieldKindError("vorticity must be a scalar field")
    mean = float(np.mean(omega.values))
    scale = max(1.0, float(np.max(np.abs(omega.values))))
    if abs(mean) > mean_tol * scale:
        raise NonzeroMeanError(mean)
    g = omega.grid
    KX, KY, ikx, iky = g.wavenumbers
    k2 = KX**2 + KY**2
    k2[0, 0] = 1.0
    psih = np.fft.rfft2(omega.values) / k2
    psih[0, 0] = 0.0
    return VectorField(
        np.stack([np.fft.irfft2(iky * psih, s=g.shape), np.fft.irfft2(-ikx * psih, s=g.shape)]), g
    )


def velocity_from_stream(psi, grid):
    return VectorField(np.stack([ddy(psi, grid), -ddx(psi, grid)]), grid)


def wrap_points(points, grid):
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([np.mod(p[:, 0], grid.Lx), np.mod(p[:, 1], grid.Ly)])


def interpolate(T, points):
    """Bicubic (4-point Lagrange) values of ``T`` at arbitrary torus points.

    Returns shape (n,) for scalar kinds and (n, 2) for two-component kinds.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    g = T.grid
    if p.shape[0] == 0:
        return np.zeros((0,) if T.n_components == 1 else (0, 2))
    w = wrap_points(p, g)
    if T.n_components == 1:
        return _accel.bicubic(T.values, w[:, 0], w[:, 1], g.dx, g.dy)
    return np.column_stack(
        [_accel.bicubic(T.values[c], w[:, 0], w[:, 1], g.dx, g.dy) for c in range(2)]
    )


def fourier_interpolate(values, grid, points):
    """Trigonometric interpolant of a scalar array; exact for band-limited data."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    fh = np.fft.fft2(values) / (grid.nx * grid.ny)
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.ny, d=grid.dy)
    # Nyquist coefficients split symmetrically so the interpolant stays real
    fh[:, grid.nx // 2] = 0.0
    fh[grid.ny // 2, :] = 0.0
    ex = np.exp(1j * np.outer(p[:, 0], kx))
    ey = np.exp(1j * np.outer(p[:, 1], ky))
    return np.real(np.einsum("pj,ji,pi->p", ey, fh, ex))


def integrate_domain(T):
    return float(np.sum(T.values) * T.grid.cell_area) if T.n_components == 1 else np.sum(
        T.values, axis=(1, 2)
    ) * T.grid.cell_area


def flat(u):
    if u.kind != "vector":
        raise FieldKindError("flat expects a vector field")
    return u.with_values(u.values, kind="one_form")


def sharp(alpha):
    if alpha.kind != "one_form":
        raise FieldKindError("sharp expects a one_form field")
    return alpha.with_values(alpha.values, kind="vector")


def pair_fields(a, b):
    """Quadrature pairing ``sum(a*b) dA`` of two arrays on ``grid``."""
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")
    return float(np.sum(a.values * b.values) * a.grid.cell_area)


def band_limited(grid, rng, kmax=4, components=1, amplitude=1.0):
    """Random real field with Fourier support in ``|kx|, |ky| <= kmax``, zero mean."""
    out = []
    X, Y = grid.coords
    for _ in range(components):
        f = np.zeros(grid.shape)
        for kx in range(0, kmax + 1):
            for ky in range(-kmax, kmax + 1):
                if kx == 0 and ky <= 0:
                    continue
                a, b = rng.normal(size=2) * amplitude / (1 + kx * kx + ky * ky)
                phase = 2 * np.pi * (kx * X / grid.Lx + ky * Y / grid.Ly)
                f += a * np.cos(phase) + b * np.sin(phase)
        out.append(f)
    return out[0] if components == 1 else np.stack(out)
