"""Volume files, phantoms and the two demo applications.

VOL1 layout (all little-endian)::

    magic   4 bytes  b"VOL1"
    dtype   u8       0 = u8, 1 = i32, 2 = i64, 3 = f64
    ndims   u8       2..4
    spare   u16      must be 0
    dims    ndims x u32
    payload C order, last dimension contiguous
"""

import csv
import os
import struct
import time
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .adjinv import adjoint_djt3d_dodecant
from .djt3d import djt3d_all_dodecants, djt3d_dodecant, djt_threshold_denoise, fraction_threshold
from .dlines import is_power_of_two, line_offsets, log2_exact
from .drt3d import (
    DODECANT_TABLE,
    check_volume,
    drt3d_dodecant,
    orient_input,
    plane_normal,
    unorient_input,
)

__all__ = [
    "BenchRecord",
    "PHANTOMS",
    "PlaneHit",
    "SHEPP_LOGAN_3D",
    "VolFormatError",
    "bench",
    "denoise_ray",
    "detect_planes",
    "pad_to_power_of_two",
    "phantom",
    "plane_voxels",
    "read_vol",
    "scaling_ratios",
    "set_threads",
    "voxelize_depth",
    "write_bench_csv",
    "write_vol",
]

MAGIC = b"VOL1"
_CODES = {0: np.dtype("<u1"), 1: np.dtype("<i4"), 2: np.dtype("<i8"), 3: np.dtype("<f8")}
_KINDS = {dt.str[1:]: code for code, dt in _CODES.items()}


class VolFormatError(ValueError):
    """Malformed or unsupported VOL1 data."""


def write_vol(path, arr):
    """Write `arr` (u8, i32, i64 or f64; 2 to 4 dims) as a VOL1 file."""
    arr = np.asarray(arr)
    code = _KINDS.get(arr.dtype.str[1:])
    if code is None:
        raise VolFormatError(f"dtype {arr.dtype} has no VOL1 code")
    if not 2 <= arr.ndim <= 4:
        raise VolFormatError(f"VOL1 holds 2 to 4 dimensions, got {arr.ndim}")
    if any(d >= 2**32 for d in arr.shape):
        raise VolFormatError("dimension does not fit in u32")
    header = MAGIC + struct.pack("<BBH", code, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr, dtype=_CODES[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_vol(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8 or data[:4] != MAGIC:
        raise VolFormatError(f"{path}: bad magic")
    code, ndims, spare = struct.unpack_from("<BBH", data, 4)
    if code not in _CODES:
        raise VolFormatError(f"{path}: unknown dtype code {code}")
    if not 2 <= ndims <= 4:
        raise VolFormatError(f"{path}: ndims {ndims} outside 2..4")
    if spare != 0:
        raise VolFormatError(f"{path}: reserved field is {spare}, expected 0")
    head = 8 + 4 * ndims
    if len(data) < head:
        raise VolFormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndims}I", data, 8)
    dt = _CODES[code]
    expected = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
    if len(data) - head != expected:
        raise VolFormatError(
            f"{path}: payload is {len(data) - head} bytes, dims {dims} need {expected}"
        )
    arr = np.frombuffer(data, dtype=dt, offset=head).reshape(dims)
    return arr.astype(dt.newbyteorder("="), copy=True)


def pad_to_power_of_two(vol):
    """Zero-pad a 3D array at the high end of each axis to a power-of-two cube."""
    vol = np.asarray(vol)
    if vol.ndim != 3:
        raise ValueError(f"expected a 3D volume, got {vol.ndim} dims")
    side = max(max(vol.shape), 2)
    N = 1 << (side - 1).bit_length()
    out = np.zeros((N, N, N), dtype=vol.dtype)
    out[: vol.shape[0], : vol.shape[1], : vol.shape[2]] = vol
    return out


# --- phantoms ---------------------------------------------------------------

#: Ten ellipsoids of the 3D Shepp-Logan head with the high-contrast
#: intensities: value, semi-axes (a, b, c), centre (x0, y0, z0) and zxz
#: Euler angles (phi, theta, psi) in degrees, on the cube [-1, 1]^3.
SHEPP_LOGAN_3D = np.array([
    [1.0, 0.6900, 0.920, 0.810, 0.00, 0.0000, 0.00, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.780, 0.00, -0.0184, 0.00, 0.0, 0.0, 0.0],
    [-0.2, 0.1100, 0.310, 0.220, 0.22, 0.0000, 0.00, -18.0, 0.0, 10.0],
    [-0.2, 0.1600, 0.410, 0.280, -0.22, 0.0000, 0.00, 18.0, 0.0, 10.0],
    [0.1, 0.2100, 0.250, 0.410, 0.00, 0.3500, -0.15, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.046, 0.050, 0.00, 0.1000, 0.25, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.046, 0.050, 0.00, -0.1000, 0.25, 0.0, 0.0, 0.0],
    [0.1, 0.0460, 0.023, 0.050, -0.08, -0.6050, 0.00, 0.0, 0.0, 0.0],
    [0.1, 0.0230, 0.023, 0.020, 0.00, -0.6060, 0.00, 0.0, 0.0, 0.0],
    [0.1, 0.0230, 0.046, 0.020, 0.06, -0.6050, 0.00, 0.0, 0.0, 0.0],
])


def _euler_zxz(phi, theta, psi):
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    return np.array([
        [cp * cf - ct * sf * sp, cp * sf + ct * cf * sp, sp * st],
        [-sp * cf - ct * sf * cp, -sp * sf + ct * cf * cp, cp * st],
        [st * sf, -st * cf, ct],
    ])


def _shepp3d(N):
    axis = np.linspace(-1.0, 1.0, N)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
    vol = np.zeros((N, N, N))
    for value, a, b, c, x0, y0, z0, phi, theta, psi in SHEPP_LOGAN_3D:
        rot = _euler_zxz(*np.radians([phi, theta, psi]))
        p = grid @ rot.T - np.array([x0, y0, z0])
        inside = ((p / np.array([a, b, c])) ** 2).sum(axis=-1) <= 1.0
        vol[inside] += value
    return vol


def _ray(N, s1, s2, delta1, delta2, amplitude):
    for s, d in ((s1, delta1), (s2, delta2)):
        if not (0 <= s < N and 0 <= d and d + s <= N - 1):
            raise ValueError("ray must stay inside the cube: 0 <= s, delta and s + delta < N")
    L = line_offsets(log2_exact(N))
    u = np.arange(N)
    vol = np.zeros((N, N, N), dtype=np.asarray(amplitude).dtype)
    vol[u, L[s1] + delta1, L[s2] + delta2] = amplitude
    return vol


def phantom(kind, N, seed=0, **params):
    """Test volume of side `N`.

    Kinds
    -----
    delta
        One voxel at ``params.get("at", (0, 0, 0))``.
    ones
        Every voxel 1.
    corners-center
        The eight corners and the voxel ``(N/2, N/2, N/2)``.
    shepp3d
        :data:`SHEPP_LOGAN_3D` sampled at voxel centres (float64).
    ray
        Discrete line ``(u, l[s1](u) + delta1, l[s2](u) + delta2)`` of value
        ``amplitude``; defaults to the main diagonal.
    walls
        Three orthogonal voxel planes ``x = a``, ``y = b``, ``z = c``
        (``params["at"]``, default ``(N/4, N/2, 3N/4)``).
    smooth
        Gaussian-blurred white noise (width N/8) rescaled to [0, 1],
        seeded by `seed` (float64).
    """
    if not is_power_of_two(N) or N < 2:
        raise ValueError(f"N must be a power of two >= 2, got {N}")
    if kind == "delta":
        vol = np.zeros((N, N, N), dtype=np.uint8)
        vol[tuple(params.get("at", (0, 0, 0)))] = 1
        return vol
    if kind == "ones":
        return np.ones((N, N, N), dtype=np.uint8)
    if kind == "corners-center":
        vol = np.zeros((N, N, N), dtype=np.uint8)
        ends = (0, N - 1)
        vol[np.ix_(ends, ends, ends)] = 1
        vol[N // 2, N // 2, N // 2] = 1
        return vol
    if kind == "shepp3d":
        return _shepp3d(N)
    if kind == "ray":
        return _ray(
            N,
            params.get("s1", N - 1),
            params.get("s2", N - 1),
            params.get("delta1", 0),
            params.get("delta2", 0),
            params.get("amplitude", np.uint8(1)),
        )
    if kind == "walls":
        a, b, c = params.get("at", (N // 4, N // 2, 3 * N // 4))
        vol = np.zeros((N, N, N), dtype=np.uint8)
        vol[a, :, :] = 1
        vol[:, b, :] = 1
        vol[:, :, c] = 1
        return vol
    if kind == "smooth":
        rng = np.random.default_rng(seed)
        vol = ndimage.gaussian_filter(rng.standard_normal((N, N, N)), N / 8, mode="constant")
        return (vol - vol.min()) / (vol.max() - vol.min())
    raise ValueError(f"unknown phantom kind {kind!r}")


PHANTOMS = ("delta", "ones", "corners-center", "shepp3d", "ray", "walls", "smooth")


# --- plane detection ----------------------------------------------------------


def voxelize_depth(depth):
    """Occupancy cube of a square depth map.

    Pixel ``(x, y)`` with a positive finite depth fills voxel
    ``(x, y, round(depth * (N - 1) / max(depth)))``; other pixels are
    treated as missing.
    """
    depth = np.asarray(depth, dtype=np.float64)
    N = depth.shape[0]
    if depth.ndim != 2 or depth.shape != (N, N):
        raise ValueError(f"depth map must be square, got {depth.shape}")
    log2_exact(N)
    vol = np.zeros((N, N, N), dtype=np.uint8)
    valid = np.isfinite(depth) & (depth > 0)
    if not valid.any():
        return vol
    z = np.rint(depth[valid] * (N - 1) / depth[valid].max()).astype(np.int64)
    x, y = np.nonzero(valid)
    vol[x, y, z] = 1
    return vol


@dataclass(frozen=True)
class PlaneHit:
    dodecant: int
    s1: int
    s2: int
    delta: int
    votes: int

    def normal(self, N, table=DODECANT_TABLE):
        return plane_normal(self.dodecant, self.s1, self.s2, N, table)


def plane_voxels(k, s1, s2, delta, N, table=DODECANT_TABLE):
    """Flat C-order indices, in the original volume, of the voxels of a plane."""
    L = line_offsets(log2_exact(N))
    x, y = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    z = L[s1][x] + L[s2][y] + delta
    keep = (z >= 0) & (z < N)
    index = np.asarray(orient_input(np.arange(N**3).reshape(N, N, N), k, table))
    return np.sort(index[x[keep], y[keep], z[keep]])


def detect_planes(vol, top=1, threshold=0, orthogonal=False, orthogonal_tol=0,
                  neighborhood=3, table=DODECANT_TABLE):
    """Planes with the most voxels of `vol`.

    Every dodecant is transformed, candidates are local maxima of the vote
    counts over ``(s1, s2, delta)`` in a ``neighborhood``-wide window with
    more than `threshold` votes, and they are taken by decreasing votes
    (ties by dodecant, s1, s2, delta).  A candidate is skipped when it
    covers the same voxels as a plane already taken, as happens for planes
    on dodecant boundaries.  With `orthogonal`, planes after the first must
    have an integer normal whose dot product with the first plane's normal
    is at most `orthogonal_tol` in magnitude.

    Returns
    -------
    list of PlaneHit
        At most `top` planes; empty when the volume holds no voxel.
    """
    vol, _ = check_volume(vol)
    N = vol.shape[0]
    if top < 1:
        raise ValueError("top must be at least 1")
    cands = []
    for k in range(12):
        votes = drt3d_dodecant(np.ascontiguousarray(orient_input(vol, k, table)))
        peaks = votes == ndimage.maximum_filter(votes, size=neighborhood, mode="constant", cval=0)
        peaks &= votes > threshold
        for s1, s2, d in zip(*np.nonzero(peaks)):
            cands.append((-int(votes[s1, s2, d]), k, int(s1), int(s2), int(d) - 2 * N))
    cands.sort()
    hits, seen = [], []
    for neg, k, s1, s2, delta in cands:
        hit = PlaneHit(k, s1, s2, delta, -neg)
        if orthogonal and hits:
            n0 = np.array(hits[0].normal(N, table))
            if abs(int(np.dot(n0, hit.normal(N, table)))) > orthogonal_tol:
                continue
        voxels = plane_voxels(k, s1, s2, delta, N, table)
        if any(np.array_equal(voxels, v) for v in seen):
            continue
        hits.append(hit)
        seen.append(voxels)
        if len(hits) == top:
            break
    return hits


# --- ray denoising ----------------------------------------------------------------


def denoise_ray(vol, keep_fraction, table=DODECANT_TABLE):
    """Keep the largest line sums over all twelve dodecants and back-project.

    One global threshold is chosen so that `keep_fraction` of all
    coefficients survive; the surviving lines are back-projected, summed
    over the dodecants and divided by ``N``.
    """
    vol, _ = check_volume(vol)
    N = vol.shape[0]
    coeffs = djt3d_all_dodecants(vol.astype(np.float64), table=table)
    thr = fraction_threshold(np.concatenate([c.ravel() for c in coeffs]), keep_fraction)
    out = np.zeros((N, N, N))
    for k, c in enumerate(coeffs):
        kept = djt_threshold_denoise(c, threshold=thr)
        out += unorient_input(adjoint_djt3d_dodecant(kept), k, table)
    return out / N


# --- benchmark and threads ------------------------------------------------------------


def set_threads(threads=None):
    """Cap numba's worker pool; None reads ``RADON3D_THREADS`` (default: all).

    Returns the thread count in effect.
    """
    if threads is None:
        env = os.environ.get("RADON3D_THREADS")
        threads = int(env) if env else numba.config.NUMBA_NUM_THREADS
    if not 1 <= threads <= numba.config.NUMBA_NUM_THREADS:
        raise ValueError(
            f"threads must be in [1, {numba.config.NUMBA_NUM_THREADS}], got {threads}"
        )
    numba.set_num_threads(threads)
    return threads


@dataclass
class BenchRecord:
    transform: str
    N: int
    threads: int
    ms: float
    throughput: float


def bench(transform, sizes, threads=None, repeats=3, fresh=False, seed=0):
    """Time one dodecant of ``"drt3d"`` or ``"djt3d"`` on random int32 volumes.

    The best of `repeats` runs is kept, after one warm-up run.  Output
    buffers are allocated once and reused unless `fresh` is set, in which
    case every run allocates (and page-faults) its own.  Throughput counts
    output sums per second: ``3 N^3`` planes or ``4 N^4`` lines.
    """
    if transform not in ("drt3d", "djt3d"):
        raise ValueError(f"unknown transform {transform!r}")
    threads = set_threads(threads)
    rng = np.random.default_rng(seed)
    records = []
    for N in sizes:
        vol = rng.integers(0, 256, (N, N, N)).astype(np.int32)
        if transform == "drt3d":
            count = 3 * N**3
            buf = np.empty((N, N, 3 * N), dtype=np.int32)

            def run():
                drt3d_dodecant(vol, np.int32, out=None if fresh else buf)
        else:
            count = 4 * N**4
            out = np.empty((N, N, 2 * N, 2 * N), dtype=np.int32)
            scratch = np.empty((N * N // 2, 2 * N, 2 * N), dtype=np.int32)

            def run():
                if fresh:
                    djt3d_dodecant(vol, np.int32)
                else:
                    djt3d_dodecant(vol, np.int32, out=out, scratch=scratch)
        run()
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            run()
            best = min(best, time.perf_counter() - t0)
        records.append(BenchRecord(transform, N, threads, best * 1e3, count / best))
    return records


def scaling_ratios(records):
    """``T(2N) / T(N)`` for consecutive doubled sizes, keyed by ``(N, 2N)``."""
    by_n = {r.N: r.ms for r in records}
    return {(n, 2 * n): by_n[2 * n] / by_n[n] for n in sorted(by_n) if 2 * n in by_n}


def write_bench_csv(path_or_file, records):
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["transform", "N", "threads", "ms", "throughput"])
        for r in records:
            w.writerow([r.transform, r.N, r.threads, f"{r.ms:.4f}", f"{r.throughput:.6g}"])
    finally:
        if own:
            fh.close()
