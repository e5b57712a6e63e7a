"""3D discrete John (X-ray) transform: sums along discrete lines.

A dodecant run sums the volume along every line

    y = l[s1](u) + delta1,   z = l[s2](u) + delta2,   0 <= u < N,

so the lines advance one voxel per step along the first axis.  Twelve runs
on re-oriented copies of the volume (the plane transform's input table)
reach the other line directions.  The twelve outputs are returned as they
are; they are not merged into one mosaic.

Outputs have shape ``(N, N, 2N, 2N)`` indexed ``[s1, s2, d1, d2]`` with
``delta_i = d_i - N``.
"""

import numpy as np

from . import _kernels
from .drt3d import DODECANT_TABLE, accumulator_dtype, check_volume, orient_input

__all__ = [
    "direction_multiplicity",
    "djt3d_all_dodecants",
    "djt3d_dodecant",
    "djt_threshold_denoise",
    "fraction_threshold",
    "line_direction",
]


def djt3d_dodecant(vol, dtype=None, out=None, scratch=None):
    """Line sums of `vol` for the basic dodecant.

    Parameters
    ----------
    vol : array_like, shape (N, N, N)
        Volume indexed ``vol[x, y, z]``; lines advance along ``x``.
    dtype : numpy dtype, optional
        Accumulator type; integer input defaults to int64 and may use
        ``np.int32`` when ``N * max|vol|`` fits.
    out, scratch : numpy.ndarray, optional
        Reusable C-contiguous buffers of the accumulator dtype with shapes
        ``(N, N, 2N, 2N)`` and at least ``(N * N // 2, 2N, 2N)``.

    Returns
    -------
    numpy.ndarray, shape (N, N, 2N, 2N)
        ``out[s1, s2, delta1 + N, delta2 + N]``.
    """
    vol, n = check_volume(vol)
    N = vol.shape[0]
    acc = accumulator_dtype(vol, N, dtype)
    # Stage buffers hold N * 2**m rows at stage m; the last one N * N.
    a = _buffer(out, (N, N, 2 * N, 2 * N), acc).reshape(N * N, 2 * N, 2 * N)
    b = _buffer(scratch, (N * N // 2, 2 * N, 2 * N), acc)
    # Ping-pong so that the final stage lands in the full-size buffer.
    bufs = (a, b) if n % 2 == 0 else (b, a)
    src = bufs[0][:N]
    src[...] = 0
    src[:, N:, N:] = vol
    lo = N
    for m in range(n):
        dst = bufs[(m + 1) % 2][: N << (m + 1)]
        lo = _kernels.djt3d_stage(src, dst, m, n, lo)
        src = dst
    return src.reshape(N, N, 2 * N, 2 * N)


def _buffer(buf, shape, dtype):
    if buf is None:
        return np.empty(shape, dtype=dtype)
    size = int(np.prod(shape))
    if buf.dtype != dtype or not buf.flags.c_contiguous or buf.size < size:
        raise ValueError(f"buffer must be C-contiguous {dtype} with at least {size} cells")
    return buf.reshape(-1)[:size].reshape(shape)


def djt3d_all_dodecants(vol, dtype=None, table=DODECANT_TABLE):
    """The twelve dodecant runs as a list; entry ``k`` transforms ``orient_input(vol, k)``."""
    vol, _ = check_volume(vol)
    return [
        djt3d_dodecant(np.ascontiguousarray(orient_input(vol, k, table)), dtype)
        for k in range(12)
    ]


def line_direction(k, s1, s2, N, table=DODECANT_TABLE):
    """Integer direction, in original axes, of line ``(s1, s2)`` of dodecant `k`.

    In the oriented frame the line advances by ``(N - 1, s1, s2)`` over the
    cube; the result is that vector mapped back through the input order.
    """
    oriented = (N - 1, s1, s2)
    direction = [0, 0, 0]
    for i, a in enumerate(table.in_order[k]):
        direction[abs(a) - 1] += oriented[i] * (1 if a > 0 else -1)
    return tuple(direction)


def direction_multiplicity(N, table=DODECANT_TABLE):
    """How many ``(k, s1, s2)`` triples produce each line direction.

    Directions are taken up to sign.  Lines on the boundary between two
    dodecants (for instance exact diagonals) are reached more than once;
    the transforms keep every copy rather than deduplicating.

    Returns
    -------
    dict
        ``{direction: count}`` with each direction normalised so that its
        first non-zero component is positive.
    """
    counts = {}
    for k in range(12):
        for s1 in range(N):
            for s2 in range(N):
                d = line_direction(k, s1, s2, N, table)
                first = next(c for c in d if c != 0)
                if first < 0:
                    d = tuple(-c for c in d)
                counts[d] = counts.get(d, 0) + 1
    return counts


def djt_threshold_denoise(coeffs, keep_fraction=None, threshold=None):
    """Zero the coefficients whose magnitude is below a threshold.

    Give exactly one of `keep_fraction` (keep roughly that fraction of the
    largest magnitudes, ties kept) or an absolute `threshold`.  Kept values
    are returned unchanged.
    """
    coeffs = np.asarray(coeffs)
    if (keep_fraction is None) == (threshold is None):
        raise ValueError("give exactly one of keep_fraction and threshold")
    if keep_fraction is not None:
        if not 0 < keep_fraction <= 1:
            raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
        threshold = fraction_threshold(coeffs, keep_fraction)
    out = coeffs.copy()
    out[np.abs(coeffs) < threshold] = 0
    return out


def fraction_threshold(coeffs, keep_fraction):
    """Magnitude at which ``keep_fraction`` of `coeffs` (or more, on ties) survive."""
    mags = np.abs(np.asarray(coeffs)).ravel()
    if keep_fraction >= 1:
        return 0
    k = max(int(np.ceil(keep_fraction * mags.size)), 1)
    return np.partition(mags, mags.size - k)[mags.size - k]
