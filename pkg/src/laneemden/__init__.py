"""Numerical lab for the Lane-Emden problem ``-Lap u = |u|^(p-1) u`` on an annulus.

Modules: ``harmonics`` (spherical harmonics and multiplicities), ``radial``
(nodal radial solutions by shooting), ``spectrum`` (weighted radial
eigenvalues, Morse indices, degeneracies), ``bifurcation`` (nonradial
bifurcation points), ``continuation`` (planar branches), ``io`` and ``cli``.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .radial import Annulus, RadialProfile, energy, nodal_zones, shoot, solve_radial  # noqa: F401
from .spectrum import (  # noqa: F401
    SLSpectrum,
    Space,
    cone_index,
    is_degenerate,
    morse_index,
    morse_index_sym,
    sl_spectrum,
)
from .bifurcation import BifurcationPoint, find_bifurcation, parity_report, sweep  # noqa: F401
