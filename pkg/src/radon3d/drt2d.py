"""2D discrete Radon transform, one quadrant and the full 180 degree sinogram."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dlines import log2_exact

__all__ = ["Sinogram2D", "drt2d_full", "drt2d_quadrant", "quadrant_input"]


def _check_image(img):
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"expected a square image, got shape {img.shape}")
    if log2_exact(img.shape[0]) < 1:
        raise ValueError("image side must be at least 2")
    return img


def drt2d_quadrant(img, dtype=None):
    """Sums of `img` over the discrete lines ``y = l[s](u) + delta``.

    Parameters
    ----------
    img : array_like, shape (N, N)
        Image indexed ``img[u, y]``.
    dtype : numpy dtype, optional
        Accumulator; integer images default to int64, real ones to float64.

    Returns
    -------
    numpy.ndarray, shape (N, 2N - 1)
        ``out[s, delta + N - 1]``.
    """
    img = _check_image(img)
    N = img.shape[0]
    if dtype is None:
        dtype = np.float64 if img.dtype.kind == "f" else np.int64
    out = np.empty((N, 2 * N - 1), dtype=dtype)
    _kernels.drt2d_quadrant_kernel(np.ascontiguousarray(img), out)
    return out


def quadrant_input(img, q):
    """Mirrored copy of `img` whose basic quadrant is quadrant `q` of the original.

    ``q`` = 0 keeps the image, 1 transposes it (lines steeper than 45
    degrees), 2 transposes and reverses the new second axis, and 3 reverses
    the second axis (descending lines).
    """
    img = np.asarray(img)
    if q == 0:
        return img
    if q == 1:
        return img.T
    if q == 2:
        return img.T[:, ::-1]
    if q == 3:
        return img[:, ::-1]
    raise ValueError(f"quadrant must be 0..3, got {q}")


@dataclass
class Sinogram2D:
    """Four quadrant transforms, each ``(N, 2N - 1)``, in :func:`quadrant_input` order."""

    quadrants: np.ndarray

    def merged(self):
        """``(4N, 2N - 1)`` array ordered by angle from 0 to 180 degrees.

        Quadrants 1 and 3 have their slope axis reversed so the angle grows
        monotonically down the rows.
        """
        q = self.quadrants
        return np.concatenate([q[0], q[1][::-1], q[2], q[3][::-1]], axis=0)


def drt2d_full(img, dtype=None):
    img = _check_image(img)
    quads = [drt2d_quadrant(np.ascontiguousarray(quadrant_input(img, q)), dtype) for q in range(4)]
    return Sinogram2D(np.stack(quads))
