"""Brute-force references and dense-operator analysis.

Everything here is built from :func:`radon3d.dlines.line_offset` and plain
loops or numpy scatters, independent of the stage kernels it is used to
validate.  Cost grows like N**5, so keep N small.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .dlines import line_offset, log2_exact

__all__ = [
    "ConditionReport",
    "condition_number",
    "dense_operator",
    "oracle_djt_dodecant",
    "oracle_drt2d",
    "oracle_drt2d_quadrant",
    "oracle_drt_dodecant",
    "oracle_line_sum",
    "oracle_plane_sum",
]


def _offsets(n):
    N = 1 << n
    return [[line_offset(n, s, u) for u in range(N)] for s in range(N)]


def oracle_drt2d(img, s, delta):
    """Sum of ``img[u, l[s](u) + delta]`` over ``u``, zero outside the image."""
    img = np.asarray(img)
    N = img.shape[0]
    n = log2_exact(N)
    total = 0
    for u in range(N):
        y = line_offset(n, s, u) + delta
        if 0 <= y < N:
            total += img[u, y].item()
    return total


def oracle_plane_sum(vol, s1, s2, delta):
    vol = np.asarray(vol)
    N = vol.shape[0]
    n = log2_exact(N)
    total = 0
    for x in range(N):
        lx = line_offset(n, s1, x)
        for y in range(N):
            z = lx + line_offset(n, s2, y) + delta
            if 0 <= z < N:
                total += vol[x, y, z].item()
    return total


def oracle_line_sum(vol, s1, s2, delta1, delta2):
    vol = np.asarray(vol)
    N = vol.shape[0]
    n = log2_exact(N)
    total = 0
    for u in range(N):
        y = line_offset(n, s1, u) + delta1
        z = line_offset(n, s2, u) + delta2
        if 0 <= y < N and 0 <= z < N:
            total += vol[u, y, z].item()
    return total


def _sum_dtype(arr):
    return np.float64 if arr.dtype.kind == "f" else np.int64


def oracle_drt2d_quadrant(img):
    """Full ``(N, 2N - 1)`` table of :func:`oracle_drt2d`, ``d = delta + N - 1``."""
    img = np.asarray(img)
    N = img.shape[0]
    L = np.array(_offsets(log2_exact(N)))
    out = np.zeros((N, 2 * N - 1), dtype=_sum_dtype(img))
    u, y = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    for s in range(N):
        # Pixel (u, y) lies on the line of slope s with delta = y - l[s](u).
        np.add.at(out[s], y - L[s][u] + N - 1, img[u, y])
    return out


def oracle_drt_dodecant(vol):
    """Every plane sum of the basic dodecant, laid out like ``drt3d_dodecant``."""
    vol = np.asarray(vol)
    N = vol.shape[0]
    L = np.array(_offsets(log2_exact(N)))
    out = np.zeros((N, N, 3 * N), dtype=_sum_dtype(vol))
    x, y, z = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    # Scatter form of the same definition: each voxel lands on exactly one
    # displacement per slope pair.
    for s1 in range(N):
        for s2 in range(N):
            np.add.at(out[s1, s2], z - L[s1][x] - L[s2][y] + 2 * N, vol)
    return out


def oracle_djt_dodecant(vol):
    vol = np.asarray(vol)
    N = vol.shape[0]
    L = np.array(_offsets(log2_exact(N)))
    out = np.zeros((N, N, 2 * N, 2 * N), dtype=_sum_dtype(vol))
    u, y, z = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
    for s1 in range(N):
        for s2 in range(N):
            np.add.at(out[s1, s2], (y - L[s1][u] + N, z - L[s2][u] + N), vol)
    return out


def dense_operator(N, which="drt-dodecant", table=None):
    """Explicit 0/1 matrix of a transform, one column per voxel.

    Parameters
    ----------
    N : int
        Cube side (power of two).
    which : {"drt-dodecant", "drt-cube", "djt-dodecant"}
        The dodecant operators keep the full raw displacement range; the cube
        uses the trimmed mosaic.  Rows are the C-order flattening of the
        transform output.
    table : OrientationTable, optional
        Orientation table for ``"drt-cube"``.

    Returns
    -------
    numpy.ndarray of int8
    """
    from .drt3d import DODECANT_TABLE, orient_input

    n = log2_exact(N)
    L = _offsets(n)
    if which == "drt-dodecant":
        mat = np.zeros((N, N, 3 * N, N, N, N), dtype=np.int8)
        for s1 in range(N):
            for s2 in range(N):
                for x in range(N):
                    for y in range(N):
                        base = L[s1][x] + L[s2][y]
                        for z in range(N):
                            mat[s1, s2, z - base + 2 * N, x, y, z] = 1
        return mat.reshape(N * N * 3 * N, N**3)
    if which == "djt-dodecant":
        mat = np.zeros((N, N, 2 * N, 2 * N, N, N, N), dtype=np.int8)
        for s1 in range(N):
            for s2 in range(N):
                for u in range(N):
                    for y in range(N):
                        for z in range(N):
                            mat[s1, s2, y - L[s1][u] + N, z - L[s2][u] + N, u, y, z] = 1
        return mat.reshape(4 * N**4, N**3)
    if which == "drt-cube":
        table = DODECANT_TABLE if table is None else table
        dod = dense_operator(N, "drt-dodecant").reshape(N, N, 3 * N, N**3)
        cube = np.zeros((4 * N, 4 * N, 3 * N - 2, N**3), dtype=np.int8)
        index = np.arange(N**3).reshape(N, N, N)
        for k in range(12):
            # Column j of the oriented operator acts on original voxel perm[j].
            perm = np.asarray(orient_input(index, k, table)).ravel()
            cols = np.zeros_like(dod)
            cols[..., perm] = dod
            r, c = table.coords[k]
            cube[r * N:(r + 1) * N, c * N:(c + 1) * N] = _orient_rows(
                cols[:, :, 2:], table.out_order[k]
            )
        return cube.reshape(-1, N**3)
    raise ValueError(f"unknown operator {which!r}")


def _orient_rows(arr, order):
    # Signed axis permutation of the first three axes; trailing axes stay.
    axes = [abs(a) - 1 for a in order] + list(range(3, arr.ndim))
    arr = np.transpose(arr, axes)
    flips = tuple(i for i, a in enumerate(order) if a < 0)
    return np.flip(arr, flips) if flips else arr


@dataclass
class ConditionReport:
    condition: float
    sigma_max: float
    sigma_min: float
    rank: int
    columns: int

    @property
    def rank_deficient(self):
        return self.rank < self.columns


def condition_number(op, rtol=1e-10):
    """L2 condition number of a dense operator (largest / smallest non-zero singular value).

    All-zero rows are dropped first; they do not change the singular values.
    A rank-deficient matrix triggers a warning and reports the smallest
    non-zero singular value.
    """
    op = np.asarray(op, dtype=np.float64)
    op = op[np.any(op != 0, axis=1)]
    sv = np.linalg.svd(op, compute_uv=False)
    nonzero = sv[sv > rtol * sv[0]]
    report = ConditionReport(
        condition=float(nonzero[0] / nonzero[-1]),
        sigma_max=float(nonzero[0]),
        sigma_min=float(nonzero[-1]),
        rank=int(nonzero.size),
        columns=op.shape[1],
    )
    if report.rank_deficient:
        warnings.warn(f"operator is rank deficient ({report.rank} < {report.columns})")
    return report
