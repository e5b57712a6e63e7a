"""3D discrete Radon transform of planes.

One *dodecant* run sums the volume over every discrete plane

    z = l[s1](x) + l[s2](y) + delta,   0 <= s1, s2 < N,

whose normal lies in one twelfth of the hemisphere.  Twelve runs on
permuted/flipped copies of the volume cover the hemisphere and are merged
into a ``4N x 4N x (3N - 2)`` mosaic.

Displacement convention: dodecant outputs have shape ``(N, N, 3N)`` and
raw index ``d_raw = delta + 2N``.  Only ``d_raw >= 2`` can be non-zero,
which is why the cube keeps ``3N - 2`` displacements.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dlines import log2_exact

__all__ = [
    "CORRECTED_TABLE",
    "DODECANT_TABLE",
    "OrientationTable",
    "accumulator_dtype",
    "check_volume",
    "cube_block",
    "drt3d_cube",
    "drt3d_dodecant",
    "orient_input",
    "orient_output",
    "plane_normal",
    "populated_blocks",
    "unorient_input",
    "unorient_output",
]


def _signed_perm_ok(row):
    return sorted(abs(a) for a in row) == [1, 2, 3]


@dataclass(frozen=True)
class OrientationTable:
    """Signed axis permutations and mosaic cells for the twelve dodecants.

    ``in_order[k]`` and ``out_order[k]`` are 1-based signed axes: output
    axis ``i`` of the permutation is input axis ``abs(row[i]) - 1``, and it is
    reversed afterwards when ``row[i] < 0``.  ``coords[k]`` is the 0-based
    ``(row, col)`` block of the ``4 x 4`` mosaic.
    """

    in_order: tuple
    out_order: tuple
    coords: tuple

    def __post_init__(self):
        if not (len(self.in_order) == len(self.out_order) == len(self.coords) == 12):
            raise ValueError("orientation table needs 12 rows")
        for row in self.in_order + self.out_order:
            if not _signed_perm_ok(row):
                raise ValueError(f"{row} is not a signed permutation of (1, 2, 3)")
        if len(set(self.coords)) != 12:
            raise ValueError("dodecant block cells must be distinct")
        for r, c in self.coords:
            if not (0 <= r < 4 and 0 <= c < 4):
                raise ValueError(f"block cell {(r, c)} outside the 4x4 grid")


DODECANT_TABLE = OrientationTable(
    in_order=(
        (1, 2, 3), (-2, 1, 3), (-1, -2, 3), (2, -1, 3),
        (-1, -3, -2), (-3, -1, 2), (3, -1, -2), (1, 3, -2),
        (-3, -2, -1), (-2, -3, 1), (-2, 3, -1), (3, 2, -1),
    ),
    out_order=(
        (-2, -1, 3), (-1, 2, 3), (2, 1, 3), (1, -2, 3),
        (2, 1, 3), (1, -2, 3), (-1, 2, 3), (-2, -1, 3),
        (2, 1, 3), (-1, 2, 3), (1, -2, 3), (-2, -1, 3),
    ),
    coords=(
        (1, 1), (1, 2), (2, 2), (2, 1),
        (0, 2), (0, 1), (3, 2), (3, 1),
        (2, 0), (1, 0), (2, 3), (1, 3),
    ),
)

# The published input orders visit two normal quadrants twice (0-based rows 5/7 and
# 9/11) and miss two others.  Flipping one sign in rows 7 and 11 gives a table
# whose twelve runs cover every quadrant of the hemisphere exactly once.
CORRECTED_TABLE = OrientationTable(
    in_order=DODECANT_TABLE.in_order[:7]
    + ((1, -3, -2),)
    + DODECANT_TABLE.in_order[8:11]
    + ((-3, 2, -1),),
    out_order=DODECANT_TABLE.out_order,
    coords=DODECANT_TABLE.coords,
)


def check_volume(vol):
    vol = np.asarray(vol)
    if vol.ndim != 3 or len(set(vol.shape)) != 1:
        raise ValueError(f"expected a cubic 3D volume, got shape {vol.shape}")
    n = log2_exact(vol.shape[0])
    if n < 1:
        raise ValueError("volume side must be at least 2")
    return vol, n


def accumulator_dtype(vol, max_terms, dtype=None):
    """Pick the buffer dtype for a transform of `vol`.

    Integer input accumulates in int64 unless `dtype` asks for int32, in
    which case ``max_terms * max|vol|`` must stay below ``2**31``.  Real input
    is processed in float64.
    """
    if vol.dtype.kind == "f":
        return np.dtype(np.float64) if dtype is None else np.dtype(dtype)
    if vol.dtype.kind not in "iub":
        raise TypeError(f"unsupported volume dtype {vol.dtype}")
    if dtype is None:
        return np.dtype(np.int64)
    dtype = np.dtype(dtype)
    if dtype == np.int32:
        peak = int(np.abs(vol).max()) if vol.size else 0
        if max_terms * peak >= 2**31:
            raise OverflowError(
                f"int32 accumulator cannot hold {max_terms} x {peak}; use int64"
            )
    return dtype


def _apply_signed_order(arr, order):
    arr = np.transpose(arr, [abs(a) - 1 for a in order])
    flips = tuple(i for i, a in enumerate(order) if a < 0)
    return np.flip(arr, flips) if flips else arr


def _undo_signed_order(arr, order):
    flips = tuple(i for i, a in enumerate(order) if a < 0)
    if flips:
        arr = np.flip(arr, flips)
    return np.transpose(arr, np.argsort([abs(a) - 1 for a in order]))


def orient_input(vol, k, table=DODECANT_TABLE):
    """Permute then flip the axes of `vol` for dodecant `k` (returns a view)."""
    return _apply_signed_order(np.asarray(vol), table.in_order[k])


def unorient_input(vol, k, table=DODECANT_TABLE):
    """Inverse (and transpose) of :func:`orient_input`."""
    return _undo_signed_order(np.asarray(vol), table.in_order[k])


def orient_output(block, k, table=DODECANT_TABLE):
    return _apply_signed_order(block, table.out_order[k])


def unorient_output(block, k, table=DODECANT_TABLE):
    return _undo_signed_order(block, table.out_order[k])


def drt3d_dodecant(vol, dtype=None, out=None):
    """Plane sums of `vol` for the basic dodecant.

    Parameters
    ----------
    vol : array_like, shape (N, N, N)
        Volume indexed ``vol[x, y, z]``; ``N`` must be a power of two.
    dtype : numpy dtype, optional
        Accumulator type.  Integer volumes default to int64; pass
        ``np.int32`` for the narrower fast path.
    out : numpy.ndarray, optional
        C-contiguous ``(N, N, 3N)`` array of the accumulator dtype to write
        into, e.g. to reuse memory across calls.

    Returns
    -------
    numpy.ndarray, shape (N, N, 3N)
        ``out[s1, s2, delta + 2N]`` is the sum of ``vol[x, y, z]`` over
        ``z = l[s1](x) + l[s2](y) + delta``.
    """
    vol, n = check_volume(vol)
    N = vol.shape[0]
    acc = accumulator_dtype(vol, N * N, dtype)
    if out is None:
        out = np.empty((N, N, 3 * N), dtype=acc)
    elif out.shape != (N, N, 3 * N) or out.dtype != acc or not out.flags.c_contiguous:
        raise ValueError(f"out must be a C-contiguous {(N, N, 3 * N)} {acc} array")
    _kernels.drt3d_dodecant_kernel(np.ascontiguousarray(vol), out)
    return out


def drt3d_cube(vol, dtype=None, table=DODECANT_TABLE):
    """All twelve dodecants merged into a ``(4N, 4N, 3N - 2)`` mosaic.

    Block ``k`` occupies rows ``r*N:(r+1)*N`` and columns ``c*N:(c+1)*N``
    where ``(r, c) = table.coords[k]``; the four remaining blocks are zero.
    """
    vol, _ = check_volume(vol)
    N = vol.shape[0]
    acc = accumulator_dtype(vol, N * N, dtype)
    out = np.zeros((4 * N, 4 * N, 3 * N - 2), dtype=acc)
    for k in range(12):
        dod = drt3d_dodecant(np.ascontiguousarray(orient_input(vol, k, table)), acc)
        r, c = table.coords[k]
        out[r * N:(r + 1) * N, c * N:(c + 1) * N] = orient_output(dod[:, :, 2:], k, table)
    return out


def cube_block(cube, k, table=DODECANT_TABLE):
    """Recover dodecant `k` from a cube mosaic, as ``(N, N, 3N)`` with ``d_raw = delta + 2N``."""
    cube = np.asarray(cube)
    N = cube.shape[0] // 4
    if cube.shape != (4 * N, 4 * N, 3 * N - 2):
        raise ValueError(f"not a cube mosaic shape: {cube.shape}")
    r, c = table.coords[k]
    block = unorient_output(cube[r * N:(r + 1) * N, c * N:(c + 1) * N], k, table)
    out = np.zeros((N, N, 3 * N), dtype=cube.dtype)
    out[:, :, 2:] = block
    return out


def populated_blocks(table=DODECANT_TABLE):
    """Boolean ``4 x 4`` map of the mosaic cells that hold a dodecant."""
    grid = np.zeros((4, 4), dtype=bool)
    for r, c in table.coords:
        grid[r, c] = True
    return grid


def plane_normal(k, s1, s2, N, table=DODECANT_TABLE):
    """Integer normal, in original ``(x, y, z)`` axes, of plane ``(s1, s2)`` of dodecant `k`.

    In the oriented frame the plane ``z' = s1/(N-1) x' + s2/(N-1) y' + c``
    has normal ``(-s1, -s2, N - 1)``.
    """
    oriented = (-s1, -s2, N - 1)
    normal = [0, 0, 0]
    for i, a in enumerate(table.in_order[k]):
        normal[abs(a) - 1] += oriented[i] * (1 if a > 0 else -1)
    return tuple(normal)
