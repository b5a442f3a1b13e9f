"""Stochastic geometric mechanics on semidirect-product algebras.

Submodules: ``algebra`` (ad, ad*, diamond, group actions), ``fields``
(spectral calculus on the periodic plane), ``dynamics`` (stochastic
Lie-Poisson and fluid steppers), ``kelvin`` (material loops and
circulation), ``verification`` (numerical identity checks), ``eof`` and
``sgmf`` (noise calibration and field files), ``cli``.
"""

from . import algebra, dynamics, eof, fields, kelvin, sgmf, verification
from ._accel import NUMBA_AVAILABLE

__version__ = "0.1.0"

__all__ = [
    "NUMBA_AVAILABLE",
    "algebra",
    "dynamics",
    "eof",
    "fields",
    "kelvin",
    "sgmf",
    "verification",
]
