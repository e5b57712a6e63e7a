"""Numba stage kernels for the multiscale transforms.

Parallel loops run over independent slabs or output rows, each output
cell has a single writer and every sum is taken in a fixed order, so
results do not depend on the thread count.

Displacement reads that fall outside the buffer contribute zero.
"""

import numba
import numpy as np
from numba import njit, prange

# The bundled TBB is too old on some systems and numba warns about it.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


# -- 3D planes ----------------------------------------------------------------
#
# A plane stage adds four shifted rows, one shift per slope axis.  The two
# shifts act on different row axes and commute, so the whole dodecant equals
# n two-term stages along the first axis (for every y) followed by n
# two-term stages along the second axis (for every s1).  Each pass works on
# one (N, D) slab at a time in scratch memory, which keeps the inner stages in
# cache and touches the big buffer only twice.
#
# A two-term stage is a butterfly: input rows i0 = sig + v*2**(m+1) and
# i0 + 2**m feed exactly the output rows 2*sig + v*2**(m+1) (shift sig) and
# the next one (shift sig + 1).  Outputs go to two spare rows and the freed
# input rows become the next spares, so a slab needs N + 2 rows and a map
# from logical to physical rows.
#
# Rows only hold non-zero values from a lower bound ``lo`` upward; a stage
# lowers it by at most 2**m.


@njit(inline="always")
def _log2(N):
    n = 0
    while (1 << n) < N:
        n += 1
    return n


@njit(inline="always")
def _row(arr, fixed, i, axis):
    if axis == 0:
        return arr[fixed, i]
    return arr[i, fixed]


@njit(inline="always")
def _butterfly(o0, o1, lo_out, a, b, sig, lo_in, off):
    # o0[d] = A(d) + B(d + sig) and o1[d] = A(d) + B(d + sig + 1) for
    # d >= lo_out, where A(d) = a[d - off] on [lo_in, D) and zero elsewhere.
    # Loops index sliced views from 0 so numba skips negative-index
    # handling and vectorizes.
    D = o0.shape[0]
    # Below lo_in only the shifted term can be non-zero.
    z0 = max(lo_out, lo_in - sig)
    z1 = max(lo_out, lo_in - sig - 1)
    o0[lo_out:z0] = 0
    o1[lo_out:z1] = 0
    t = o0[z0:lo_in]
    y = b[z0 + sig - off:lo_in + sig - off]
    for j in range(t.shape[0]):
        t[j] = y[j]
    t = o1[z1:lo_in]
    y = b[z1 + sig + 1 - off:lo_in + sig + 1 - off]
    for j in range(t.shape[0]):
        t[j] = y[j]
    # Both terms present.
    hi = max(lo_in, D - sig - 1)
    t0 = o0[lo_in:hi]
    t1 = o1[lo_in:hi]
    x = a[lo_in - off:hi - off]
    y0 = b[lo_in + sig - off:hi + sig - off]
    y1 = b[lo_in + sig + 1 - off:hi + sig + 1 - off]
    for j in range(t0.shape[0]):
        xj = x[j]
        t0[j] = xj + y0[j]
        t1[j] = xj + y1[j]
    # Tail: the shifted term runs off the end (one more cell for o0).
    for d in range(hi, D):
        v = a[d - off]
        if d + sig < D:
            o0[d] = v + b[d + sig - off]
        else:
            o0[d] = v
        o1[d] = v


@njit(cache=True)
def _stage_in(src, fix, axis, off, lo_in, slab, phys, m):
    # First stage: global rows in, slab rows out (physical = logical).
    N = phys.shape[0]
    S = 1 << m
    lo_out = max(lo_in - S, 0)
    for q in range(N >> 1):
        sig = q & (S - 1)
        i0 = sig + ((q >> m) << (m + 1))
        o0 = (sig << 1) + ((q >> m) << (m + 1))
        _butterfly(
            slab[o0], slab[o0 + 1], lo_out,
            _row(src, fix, i0, axis), _row(src, fix, i0 + S, axis),
            sig, lo_in, off,
        )
    for i in range(N):
        phys[i] = i
    return lo_out


@njit(cache=True)
def _stage_local(slab, phys, nphys, spare, lo_in, m):
    N = phys.shape[0]
    S = 1 << m
    lo_out = max(lo_in - S, 0)
    f0 = spare[0]
    f1 = spare[1]
    for q in range(N >> 1):
        sig = q & (S - 1)
        i0 = sig + ((q >> m) << (m + 1))
        o0 = (sig << 1) + ((q >> m) << (m + 1))
        p0 = phys[i0]
        p1 = phys[i0 + S]
        _butterfly(slab[f0], slab[f1], lo_out, slab[p0], slab[p1], sig, lo_in, 0)
        nphys[o0] = f0
        nphys[o0 + 1] = f1
        f0 = p0
        f1 = p1
    spare[0] = f0
    spare[1] = f1
    return lo_out


@njit(cache=True)
def _stage_out(slab, phys, lo_in, dst, fix, axis, m):
    # Last stage: slab rows in, global rows out.
    N = phys.shape[0]
    S = 1 << m
    lo_out = max(lo_in - S, 0)
    for q in range(N >> 1):
        sig = q & (S - 1)
        i0 = sig + ((q >> m) << (m + 1))
        o0 = (sig << 1) + ((q >> m) << (m + 1))
        _butterfly(
            _row(dst, fix, o0, axis), _row(dst, fix, o0 + 1, axis), lo_out,
            slab[phys[i0]], slab[phys[i0 + S]], sig, lo_in, 0,
        )
    return lo_out


@njit(cache=True)
def _slab_transform(src, sfix, saxis, off, lo, dst, dfix, daxis, slab, phys, nphys):
    # All n stages along one axis of a slab; returns the final lower bound.
    N = phys.shape[0]
    n = _log2(N)
    lo = _stage_in(src, sfix, saxis, off, lo, slab, phys, 0)
    spare = np.array([N, N + 1])
    for m in range(1, n - 1):
        lo = _stage_local(slab, phys, nphys, spare, lo, m)
        phys, nphys = nphys, phys
    if n > 1:
        return _stage_out(slab, phys, lo, dst, dfix, daxis, n - 1)
    for i in range(N):
        r = _row(dst, dfix, i, daxis)
        r[lo:] = slab[i, lo:]
    return lo


@njit(parallel=True, cache=True)
def drt3d_dodecant_kernel(vol, out):
    """Plane sums of `vol` into ``out`` of shape ``(N, N, D)``, ``D >= 3N``.

    The volume is seeded at ``d = D - N``; every entry of `out` is written.
    """
    N = vol.shape[0]
    D = out.shape[2]
    seed = D - N
    # Pass 1: stages along the x axis, one y slab at a time.  Reads of the
    # (small) volume and writes of the output are strided.
    for y in prange(N):
        slab = np.empty((N + 2, D), out.dtype)
        phys = np.empty(N, np.int64)
        nphys = np.empty(N, np.int64)
        _slab_transform(vol, y, 1, seed, seed, out, y, 1, slab, phys, nphys)
    lo1 = max(seed - (N - 1), 0)
    lo_end = max(lo1 - (N - 1), 0)
    # Pass 2: stages along the y axis on contiguous s1 slabs, in place (the
    # first stage has read every row before the last one writes).
    for s1 in prange(N):
        slab = np.empty((N + 2, D), out.dtype)
        phys = np.empty(N, np.int64)
        nphys = np.empty(N, np.int64)
        _slab_transform(out, s1, 0, 0, lo1, out, s1, 0, slab, phys, nphys)
        out[s1, :, :lo_end] = 0


@njit(cache=True)
def drt2d_quadrant_kernel(img, out):
    """Line sums of an ``(N, N)`` image into ``out`` of shape ``(N, D)``, seeded at ``D - N``."""
    N = img.shape[0]
    D = out.shape[1]
    slab = np.empty((N + 2, D), out.dtype)
    phys = np.empty(N, np.int64)
    nphys = np.empty(N, np.int64)
    src = img.reshape((1, N, N))
    dst = out.reshape((1, N, D))
    lo = _slab_transform(src, 0, 0, D - N, D - N, dst, 0, 0, slab, phys, nphys)
    out[:, :lo] = 0


@njit(inline="always")
def _adjoint_row(out, rows_src, fix, axis, i, m):
    # Transpose of one two-term stage for input row i.
    D = out.shape[0]
    S = 1 << m
    sig = i & (S - 1)
    o0 = (sig << 1) + ((i >> (m + 1)) << (m + 1))
    g0 = _row(rows_src, fix, o0, axis)
    g1 = _row(rows_src, fix, o0 + 1, axis)
    if (i >> m) & 1 == 0:
        for d in range(D):
            out[d] = g0[d] + g1[d]
        return
    # The row was read shifted by sig (even child) or sig + 1 (odd child).
    out[:sig] = 0
    if sig < D:
        out[sig] = g0[0]
    t = out[sig + 1:]
    x = g0[1:D - sig]
    y = g1[:D - sig - 1]
    for j in range(t.shape[0]):
        t[j] = x[j] + y[j]


@njit(cache=True)
def _adjoint_slab_stage(src, sfix, saxis, dst, dfix, daxis, m):
    N = dst.shape[1] if daxis == 0 else dst.shape[0]
    for i in range(N):
        _adjoint_row(_row(dst, dfix, i, daxis), src, sfix, saxis, i, m)


@njit(cache=True)
def _adjoint_slab(src, sfix, saxis, bufs):
    # Transposed stages m = n-1 .. 0 along one slab; returns the buffer index
    # holding the result.
    N = bufs.shape[1]
    n = _log2(N)
    _adjoint_slab_stage(src, sfix, saxis, bufs, 0, 0, n - 1)
    cur = 0
    for m in range(n - 2, -1, -1):
        _adjoint_slab_stage(bufs, cur, 0, bufs, 1 - cur, 0, m)
        cur = 1 - cur
    return cur


@njit(parallel=True, cache=True)
def drt3d_adjoint_kernel(g, out):
    """Transpose of :func:`drt3d_dodecant_kernel`.

    `g` has shape ``(N, N, D)``; `out` receives the ``(N, N, N)`` volume
    read back from ``d = D - N``.
    """
    N = g.shape[0]
    D = g.shape[2]
    seed = D - N
    work = np.empty((N, N, D), g.dtype)
    # Transposed y-axis stages on contiguous s1 slabs.
    for s1 in prange(N):
        bufs = np.empty((2, N, D), g.dtype)
        cur = _adjoint_slab(g, s1, 0, bufs)
        work[s1] = bufs[cur]
    # Transposed x-axis stages, one y slab at a time.
    for y in prange(N):
        bufs = np.empty((2, N, D), g.dtype)
        cur = _adjoint_slab(work, y, 1, bufs)
        for x in range(N):
            out[x, y] = bufs[cur, x, seed:]


# -- 3D lines -----------------------------------------------------------------
#
# Stage buffers have shape (N*N, 2N, 2N).  The row index packs, least
# significant first: the n-m remaining position bits v, then the m bits of
# s2, then the m bits of s1.  After n stages the row is s2 + N*s1, so the
# buffer reshapes to (s1, s2, d1, d2) without a copy.


@njit(inline="always")
def _shift_add_2d(out, a, b, sh1, sh2, lo):
    # out[d1, d2] = a[d1, d2] + b[d1 + sh1, d2 + sh2] (zero past the end) for
    # d1, d2 >= lo; cells below lo are zeroed.
    D1 = out.shape[0]
    D2 = out.shape[1]
    out[:lo] = 0
    for d1 in range(lo, D1):
        t = out[d1]
        t[:lo] = 0
        x = a[d1]
        if d1 + sh1 < D1:
            y = b[d1 + sh1]
            hi = max(lo, D2 - sh2)
            tt = t[lo:hi]
            xx = x[lo:hi]
            yy = y[lo + sh2:hi + sh2]
            for j in range(tt.shape[0]):
                tt[j] = xx[j] + yy[j]
            t[hi:] = x[hi:]
        else:
            t[lo:] = x[lo:]


@njit(parallel=True, cache=True)
def djt3d_stage(src, dst, m, n, lo_in):
    """Stage ``m -> m+1`` of the line transform; returns the new lower bound.

    Output row ``o`` reads the two rows that differ in the lowest remaining
    position bit and shifts the second one by ``(sig1 + b1, sig2 + b2)``.
    Entries below ``lo_in`` are zero in `src`; every entry of the used rows
    of `dst` is written.
    """
    S = 1 << m
    nv = n - m - 1  # position bits left after this stage
    rows = 1 << (n + m + 1)
    lo = max(lo_in - S, 0)
    for o in prange(rows):
        v = o & ((1 << nv) - 1)
        b2 = (o >> nv) & 1
        sig2 = (o >> (nv + 1)) & (S - 1)
        b1 = (o >> n) & 1
        sig1 = o >> (n + 1)
        r0 = (v << 1) + (sig2 << (n - m)) + (sig1 << n)
        _shift_add_2d(dst[o], src[r0], src[r0 + 1], sig1 + b1, sig2 + b2, lo)
    return lo


@njit(parallel=True, cache=True)
def djt3d_adjoint_stage(src, dst, m, n):
    """Transpose of :func:`djt3d_stage`: stage ``m+1`` rows to stage ``m`` rows."""
    D1 = src.shape[1]
    D2 = src.shape[2]
    S = 1 << m
    nv = n - m - 1
    rows = 1 << (n + m)
    for i in prange(rows):
        vm = i & 1
        v = (i >> 1) & ((1 << nv) - 1)
        sig2 = (i >> (n - m)) & (S - 1)
        sig1 = i >> n
        out = dst[i]
        for d1 in range(D1):
            for d2 in range(D2):
                out[d1, d2] = 0
        for b1 in range(2):
            sh1 = vm * (sig1 + b1)
            for b2 in range(2):
                sh2 = vm * (sig2 + b2)
                o = v + (b2 << nv) + (sig2 << (nv + 1)) + (b1 << n) + (sig1 << (n + 1))
                blk = src[o]
                for d1 in range(sh1, D1):
                    t = out[d1, sh2:]
                    x = blk[d1 - sh1, :D2 - sh2]
                    for j in range(t.shape[0]):
                        t[j] += x[j]
