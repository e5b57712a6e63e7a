"""Adjoint transforms and multigrid inversion of the plane transform.

The adjoints are exact transposes of the forward kernels and stay in
integer arithmetic for integer input.  Inversion works in float64: it
filters back-projections with a small high-pass kernel and corrects the
estimate with coarse-to-fine passes over the residual.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from . import _kernels
from .drt3d import (
    DODECANT_TABLE,
    check_volume,
    cube_block,
    drt3d_cube,
    orient_output,
    unorient_input,
)
from .dlines import log2_exact

__all__ = [
    "HIGHPASS_KERNEL",
    "InversionConfig",
    "InversionDiverged",
    "InversionResult",
    "adjoint_cube",
    "adjoint_djt3d_dodecant",
    "adjoint_drt3d_dodecant",
    "blocks_to_cube",
    "calibrate_relaxation",
    "cube_to_blocks",
    "highpass",
    "invert_drt3d",
    "nrmsd",
    "prolong",
    "restrict_cube",
    "restrict_dodecant",
    "SCHEMES",
]

log = logging.getLogger(__name__)


def _work_dtype(arr):
    return np.float64 if arr.dtype.kind == "f" else np.int64


def adjoint_drt3d_dodecant(r):
    """Back-project a ``(N, N, 3N)`` dodecant onto an ``(N, N, N)`` volume.

    Every voxel receives the sum of the coefficients of the planes through
    it, so ``<drt3d_dodecant(f), r> == <f, adjoint_drt3d_dodecant(r)>``.
    Integer input is accumulated in int64, real input in float64.
    """
    r = np.asarray(r)
    N = r.shape[0]
    if r.ndim != 3 or r.shape != (N, N, 3 * N):
        raise ValueError(f"expected a (N, N, 3N) dodecant, got shape {r.shape}")
    log2_exact(N)
    g = np.ascontiguousarray(r, dtype=_work_dtype(r))
    out = np.empty((N, N, N), dtype=g.dtype)
    _kernels.drt3d_adjoint_kernel(g, out)
    return out


def adjoint_djt3d_dodecant(j):
    """Back-project a ``(N, N, 2N, 2N)`` line dodecant onto an ``(N, N, N)`` volume."""
    j = np.asarray(j)
    N = j.shape[0]
    if j.ndim != 4 or j.shape != (N, N, 2 * N, 2 * N):
        raise ValueError(f"expected a (N, N, 2N, 2N) dodecant, got shape {j.shape}")
    n = log2_exact(N)
    dt = _work_dtype(j)
    src = np.ascontiguousarray(j, dtype=dt).reshape(N * N, 2 * N, 2 * N)
    a = np.empty((N * N // 2, 2 * N, 2 * N), dtype=dt)
    b = np.empty_like(a)
    for m in range(n - 1, -1, -1):
        dst = (a if m % 2 else b)[: N << m]
        _kernels.djt3d_adjoint_stage(src, dst, m, n)
        src = dst
    return np.ascontiguousarray(src[:, N:, N:])


def cube_to_blocks(cube, table=DODECANT_TABLE):
    """The twelve ``(N, N, 3N)`` dodecants stored in a cube mosaic."""
    return np.stack([cube_block(cube, k, table) for k in range(12)])


def blocks_to_cube(blocks, table=DODECANT_TABLE):
    """Inverse of :func:`cube_to_blocks` (displacements below 2 are dropped)."""
    blocks = np.asarray(blocks)
    N = blocks.shape[1]
    cube = np.zeros((4 * N, 4 * N, 3 * N - 2), dtype=blocks.dtype)
    for k in range(12):
        r, c = table.coords[k]
        cube[r * N:(r + 1) * N, c * N:(c + 1) * N] = orient_output(blocks[k, :, :, 2:], k, table)
    return cube


def adjoint_cube(cube, table=DODECANT_TABLE):
    """Transpose of :func:`drt3d_cube`: the twelve dodecant adjoints, re-oriented and summed with unit weights."""
    cube = np.asarray(cube)
    N = cube.shape[0] // 4
    total = None
    for k in range(12):
        vol = unorient_input(adjoint_drt3d_dodecant(cube_block(cube, k, table)), k, table)
        total = vol.copy() if total is None else total + vol
    return total


def _highpass_kernel():
    b = np.array([0.25, 0.5, 0.25])
    k = -np.einsum("i,j,k->ijk", b, b, b)
    k[1, 1, 1] += 1.0
    return k


#: 3x3x3 filter: 7/8 at the centre, -1/16 on faces, -1/32 on edges and
#: -1/64 on corners.  It is the identity minus a separable binomial blur.
HIGHPASS_KERNEL = _highpass_kernel()


def highpass(vol):
    """Convolve with :data:`HIGHPASS_KERNEL`, zero outside the cube."""
    vol = np.asarray(vol, dtype=np.float64)
    return ndimage.convolve(vol, HIGHPASS_KERNEL, mode="constant", cval=0.0)


def prolong(vol):
    """Replicate each voxel into a 2x2x2 block."""
    vol = np.asarray(vol)
    return vol.repeat(2, axis=0).repeat(2, axis=1).repeat(2, axis=2)


def restrict_dodecant(r):
    """Halve the resolution of a ``(N, N, 3N)`` dodecant.

    ``out(s1, s2, delta) = (in(2 s1, 2 s2, 2 delta) + in(2 s1, 2 s2, 2 delta + 1)) / 8``
    in intercept coordinates, so that data of a volume restricts to data of
    its 2x2x2 block average.
    """
    r = np.asarray(r, dtype=np.float64)
    N = r.shape[0]
    if r.shape != (N, N, 3 * N) or N < 2:
        raise ValueError(f"expected a (N, N, 3N) dodecant with N >= 2, got {r.shape}")
    # Coarse d' = delta' + N maps to fine delta = 2 delta', i.e. d = 2 d'.
    return (r[::2, ::2, 0::2] + r[::2, ::2, 1::2]) / 8.0


def restrict_cube(cube, table=DODECANT_TABLE):
    blocks = cube_to_blocks(np.asarray(cube, dtype=np.float64), table)
    return blocks_to_cube(np.stack([restrict_dodecant(b) for b in blocks]), table)


def nrmsd(a, b):
    """Root-mean-square deviation of `a` from `b`, divided by the range of `b`."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    spread = b.max() - b.min()
    rms = np.sqrt(np.mean((a - b) ** 2))
    if spread == 0:
        return 0.0 if rms == 0 else float("inf")
    return float(rms / spread)


@lru_cache(maxsize=None)
def _relaxation(N, table):
    ones = np.ones((N, N, N))
    response = highpass(adjoint_cube(drt3d_cube(ones, table=table), table))
    return 1.0 / float(response.mean())


def calibrate_relaxation(N, table=DODECANT_TABLE):
    """Scale that gives ``highpass(adjoint_cube(drt3d_cube(1)))`` unit mean; cached per N."""
    check_volume(np.empty((N, N, N), dtype=np.uint8))
    return _relaxation(N, table)


class InversionDiverged(RuntimeError):
    """Raised when the iterate changes grow for several consecutive iterations."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


SCHEMES = ("multigrid", "richardson")


@dataclass
class InversionConfig:
    """Settings of :func:`invert_drt3d`.

    Attributes
    ----------
    max_outer_iterations : int
        Outer iterations at the finest level.
    tolerance : float
        Stop early once ``nrmsd(x_k, x_{k-1})`` drops below this value
        (0 disables early stopping).
    scheme : {"multigrid", "richardson"}
        ``"multigrid"`` runs a full coarse-to-fine correction of the current
        residual in every outer iteration.  ``"richardson"`` builds one
        coarse-to-fine start and then takes single filtered back-projection
        steps at the finest level.
    refinements_per_level : int
        Steps per level in each coarse-to-fine pass.
    spectrum_ratio : float
        Assumed ratio between the largest and smallest eigenvalue of the
        scaled, filtered normal operator.  It sets the Chebyshev step
        weights of the multigrid scheme; ``refinements_per_level`` plain steps of
        weight 1 are used when it is 1.
    coarsest_N : int
        Side of the coarsest level (power of two, at least 2).
    relaxation_scale : float or None
        Scale of the back-projection step; None calibrates it per level with
        :func:`calibrate_relaxation`.
    divergence_window : int
        Consecutive increases of the root-mean-square change of the iterate
        that count as divergence.
    """

    max_outer_iterations: int = 10
    tolerance: float = 0.0
    scheme: str = "multigrid"
    refinements_per_level: int = 16
    spectrum_ratio: float = 200.0
    coarsest_N: int = 4
    relaxation_scale: float = None
    divergence_window: int = 3

    def validate(self, N):
        log2_exact(self.coarsest_N)
        if self.coarsest_N < 2 or self.coarsest_N > N:
            raise ValueError(f"coarsest_N must be a power of two in [2, {N}]")
        if self.max_outer_iterations < 0 or self.refinements_per_level < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.spectrum_ratio >= 1:
            raise ValueError("spectrum_ratio must be at least 1")
        if self.relaxation_scale is not None and not self.relaxation_scale > 0:
            raise ValueError("relaxation_scale must be positive")


@dataclass
class InversionResult:
    volume: np.ndarray
    steps: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


# Upper end of the Chebyshev interval, relative to the calibrated scale.  The
# calibrated operator has its largest eigenvalue just below 1.
_SPECTRUM_TOP = 1.05


class _Solver:
    def __init__(self, config, table):
        self.config = config
        self.table = table

    def scale(self, n_side):
        if self.config.relaxation_scale is not None:
            return self.config.relaxation_scale
        return calibrate_relaxation(n_side, self.table)

    def correction(self, x, r):
        """``s * highpass(adjoint_cube(r - drt3d_cube(x)))``."""
        residual = r - drt3d_cube(x, table=self.table)
        return self.scale(x.shape[0]) * highpass(adjoint_cube(residual, self.table))

    def smooth(self, x, r):
        """``refinements_per_level`` steps ``x <- x + w_k * correction(x)``.

        The weights follow the Chebyshev recurrence on
        ``[top / spectrum_ratio, top]``, which damps the whole band evenly
        instead of mostly the top of the spectrum.
        """
        steps = self.config.refinements_per_level
        if steps == 0:
            return x
        if self.config.spectrum_ratio == 1:
            for _ in range(steps):
                x = x + self.correction(x, r)
            return x
        b = _SPECTRUM_TOP
        a = b / self.config.spectrum_ratio
        centre, half = (b + a) / 2, (b - a) / 2
        sigma = centre / half
        rho = 1 / sigma
        d = self.correction(x, r) / centre
        for k in range(steps):
            x = x + d
            if k == steps - 1:
                break
            rho_next = 1 / (2 * sigma - rho)
            d = rho_next * rho * d + (2 * rho_next / half) * self.correction(x, r)
            rho = rho_next
        return x

    def coarse_to_fine(self, r):
        levels = [r]
        while levels[-1].shape[0] // 4 > self.config.coarsest_N:
            levels.append(restrict_cube(levels[-1], self.table))
        n = levels[-1].shape[0] // 4
        x = self.smooth(np.zeros((n, n, n)), levels[-1])
        for data in reversed(levels[:-1]):
            x = self.smooth(prolong(x), data)
        return x


def invert_drt3d(r, config=None, table=DODECANT_TABLE, reference=None, callback=None):
    """Estimate the volume whose cube transform is `r`.

    The basic step is the filtered back-projection of the residual,
    ``s * highpass(adjoint_cube(r - drt3d_cube(x)))``, with ``s`` calibrated
    per level.  A coarse-to-fine pass restricts the data down to
    ``coarsest_N``, smooths there from zero, then prolongs and smooths on
    each finer level.

    With the default ``"multigrid"`` scheme the start is one such pass and
    every outer iteration adds a pass over the current residual,
    ``x <- x + coarse_to_fine(r - drt3d_cube(x))``.  The ``"richardson"``
    scheme keeps the same start but iterates single steps
    ``x <- x + s * highpass(adjoint_cube(r - drt3d_cube(x)))``; it is cheap
    per iteration but converges slowly on fine detail.

    Parameters
    ----------
    r : array_like, shape (4N, 4N, 3N - 2)
        Cube mosaic, e.g. from :func:`radon3d.drt3d.drt3d_cube`.
    config : InversionConfig, optional
    reference : array_like, optional
        Known volume; when given, ``nrmsd(x_k, reference)`` is recorded.
    callback : callable, optional
        Called as ``callback(k, x_k, step_nrmsd)`` after each outer
        iteration.

    Returns
    -------
    InversionResult
        ``steps[k-1]`` is ``nrmsd(x_k, x_{k-1})`` and ``errors[k]`` the error
        of ``x_k`` (``k = 0`` is the coarse-to-fine start) when a reference
        is given.

    Raises
    ------
    InversionDiverged
        If the iterate becomes non-finite or its root-mean-square change
        grows for ``divergence_window`` consecutive iterations.
    """
    config = InversionConfig() if config is None else config
    r = np.asarray(r, dtype=np.float64)
    N = r.shape[0] // 4
    if N < 2 or r.shape != (4 * N, 4 * N, 3 * N - 2):
        raise ValueError(f"not a cube mosaic shape: {r.shape}")
    config.validate(N)
    solver = _Solver(config, table)

    x = solver.coarse_to_fine(r)
    result = InversionResult(volume=x)
    if reference is not None:
        result.errors.append(nrmsd(x, reference))
    rising = 0
    moves = []
    for k in range(1, config.max_outer_iterations + 1):
        if config.scheme == "multigrid":
            x_new = x + solver.coarse_to_fine(r - drt3d_cube(x, table=table))
        else:
            x_new = x + solver.correction(x, r)
        step = nrmsd(x_new, x)
        # Divergence is judged on the absolute change: the relative step
        # stays flat when the iterate blows up geometrically.
        moves.append(float(np.sqrt(np.mean((x_new - x) ** 2))))
        x = x_new
        result.steps.append(step)
        if reference is not None:
            result.errors.append(nrmsd(x, reference))
        log.debug("iteration %d: step nrmsd %.3g", k, step)
        if callback is not None:
            callback(k, x, step)
        result.iterations = k
        if not np.isfinite(x).all():
            raise InversionDiverged(f"iterate became non-finite at iteration {k}", result.steps)
        if len(moves) > 1 and moves[-1] > moves[-2]:
            rising += 1
            if rising >= config.divergence_window:
                raise InversionDiverged(
                    f"iterate changes grew for {rising} consecutive iterations", result.steps
                )
        else:
            rising = 0
        if config.tolerance > 0 and step < config.tolerance:
            result.converged = True
            break
    result.volume = x
    return result
