"""Multiscale discrete Radon (planes) and John (lines) transforms of 3D volumes."""

from .adjinv import (
    InversionConfig,
    InversionDiverged,
    adjoint_cube,
    adjoint_djt3d_dodecant,
    adjoint_drt3d_dodecant,
    invert_drt3d,
    nrmsd,
)
from .djt3d import djt3d_all_dodecants, djt3d_dodecant
from .dlines import line_offset
from .drt2d import drt2d_full, drt2d_quadrant
from .drt3d import CORRECTED_TABLE, DODECANT_TABLE, drt3d_cube, drt3d_dodecant

__version__ = "0.1.0"

__all__ = [
    "CORRECTED_TABLE",
    "DODECANT_TABLE",
    "InversionConfig",
    "InversionDiverged",
    "adjoint_cube",
    "adjoint_djt3d_dodecant",
    "adjoint_drt3d_dodecant",
    "djt3d_all_dodecants",
    "djt3d_dodecant",
    "drt2d_full",
    "drt2d_quadrant",
    "drt3d_cube",
    "drt3d_dodecant",
    "invert_drt3d",
    "line_offset",
    "nrmsd",
]
