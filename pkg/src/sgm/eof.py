"""Empirical orthogonal functions of velocity snapshot ensembles.

Modes are orthonormal under the cell-area weighted pairing, which is the
inner product in which they later act as noise vector fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from . import sgmf


class EOFRankError(ValueError):
    pass


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    grid: F.Grid2D
    snapshots: tuple
    source: str = ""
    times: tuple = field(default=())

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if len(snaps) < 2:
            raise EnsembleError(f"an ensemble needs at least 2 snapshots, got {len(snaps)}")
        for s in snaps:
            if s.kind != "vector":
                raise F.FieldKindError(f"snapshots must be vector fields, got {s.kind}")
            if s.grid != self.grid:
                raise F.GridMismatchError(f"snapshot grid {s.grid} differs from {self.grid}")
        object.__setattr__(self, "snapshots", snaps)
        times = tuple(self.times) if self.times else tuple(float(i) for i in range(len(snaps)))
        if len(times) != len(snaps):
            raise EnsembleError("times and snapshots differ in length")
        object.__setattr__(self, "times", times)

    @property
    def n(self):
        return len(self.snapshots)

    def matrix(self):
        return np.stack([s.values.ravel() for s in self.snapshots])


@dataclass(frozen=True, eq=False)
class EOFResult:
    modes: tuple
    singular_values: np.ndarray
    mean_field: F.Field
    rank: int
    total_variance: float

    @property
    def K(self):
        return len(self.modes)

    def captured_variance(self):
        return self.singular_values**2

    def project(self, f):
        """Coefficients of ``f - mean`` on the modes; ``f`` is a vector field or its flat."""
        if f.kind == "one_form":
            f = F.sharp(f)
        d = F.flat(f - self.mean_field)
        return np.array([F.pair_fields(d, m) for m in self.modes])

    def reconstruct(self, coeffs):
        out = self.mean_field.values.copy()
        for c, m in zip(coeffs, self.modes):
            out = out + c * m.values
        return self.mean_field.with_values(out)


def leray_project(u):
    """Divergence-free part of a vector field (spectral)."""
    g = u.grid
    KX, KY, _, _ = g.wavenumbers
    uh = np.fft.rfft2(u.values)
    k2 = KX**2 + KY**2
    k2[0, 0] = 1.0
    dot = (KX * uh[0] + KY * uh[1]) / k2
    out = np.stack([uh[0] - KX * dot, uh[1] - KY * dot])
    return u.with_values(np.fft.irfft2(out, s=g.shape))


def _fix_sign(v):
    big = np.abs(v) > 1e-12 * np.max(np.abs(v)) if v.size else np.zeros(0, bool)
    idx = np.flatnonzero(big)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def compute_eof(ens, K, divergence_free=False):
    """Top-``K`` EOF modes of the ensemble fluctuations.

    Singular values are those of the fluctuation matrix under the weighted
    pairing, so ``sum s_i^2`` equals the total fluctuation variance.
    """
    grid = ens.grid
    snaps = [leray_project(s) for s in ens.snapshots] if divergence_free else list(ens.snapshots)
    X = np.stack([s.values.ravel() for s in snaps])
    dof = X.shape[1]
    if not 1 <= K <= min(ens.n - 1, dof):
        raise EOFRankError(f"K={K} must lie in [1, {min(ens.n - 1, dof)}] for {ens.n} snapshots")
    mean = X.mean(axis=0)
    w = np.sqrt(grid.cell_area)
    fluct = (X - mean) * w
    _, s, vt = np.linalg.svd(fluct, full_matrices=False)
    tol = max(fluct.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    shape = (2,) + grid.shape
    modes = tuple(F.VectorField(_fix_sign(vt[i] / w).reshape(shape), grid) for i in range(K))
    sv = np.where(np.arange(K) < rank, s[:K], 0.0)
    mean_field = F.VectorField(mean.reshape(shape), grid)
    return EOFResult(modes, sv, mean_field, rank, float(np.sum(fluct**2)))


def load_ensemble(directory, source=None):
    """Velocity snapshots from a directory, in file-name order.

    Non-vector files (vorticity, buoyancy) sitting next to them are skipped,
    so a run's ``states/`` directory can be used as is.
    """
    files = sgmf.list_snapshot_files(directory)
    if len(files) < 2:
        raise EnsembleError(f"need at least 2 .sgmf snapshots in {directory}, found {len(files)}")
    fields = [sgmf.load_field(p) for p in files]
    snaps = [f for f in fields if f.kind == "vector"]
    if not snaps:
        kinds = sorted({f.kind for f in fields})
        raise F.FieldKindError(f"no vector-field snapshots in {directory} (found {', '.join(kinds)})")
    if len(snaps) < 2:
        raise EnsembleError(f"need at least 2 vector-field snapshots in {directory}, found {len(snaps)}")
    return SnapshotEnsemble(snaps[0].grid, snaps, source or str(directory))


def grassmann_distance(A_modes, B_modes):
    """Largest principal angle between the spans of two orthonormal mode sets."""
    if not A_modes:
        return 0.0
    w = A_modes[0].grid.cell_area
    A = np.stack([m.values.ravel() for m in A_modes]) * np.sqrt(w)
    B = np.stack([m.values.ravel() for m in B_modes]) * np.sqrt(w)
    cos = np.clip(np.linalg.svd(A @ B.T, compute_uv=False), -1.0, 1.0)
    return float(np.max(np.arccos(cos)))
