"""Command-line front end: ``radon3d <command> ...``.

Exit codes: 0 success, 2 bad input, 3 no planes found.
"""

import argparse
import csv
import logging
import sys

import numpy as np

from . import volio
from .adjinv import (
    SCHEMES,
    InversionConfig,
    InversionDiverged,
    adjoint_cube,
    adjoint_djt3d_dodecant,
    adjoint_drt3d_dodecant,
    invert_drt3d,
    nrmsd,
)
from .djt3d import djt3d_all_dodecants, djt3d_dodecant
from .dlines import is_power_of_two
from .drt3d import CORRECTED_TABLE, DODECANT_TABLE, drt3d_cube, drt3d_dodecant, orient_input

log = logging.getLogger("radon3d")

EXIT_BAD_INPUT = 2
EXIT_NO_PLANES = 3


class InputError(Exception):
    pass


def _table(name):
    return CORRECTED_TABLE if name == "corrected" else DODECANT_TABLE


def _load(path):
    try:
        return volio.read_vol(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except volio.VolFormatError as exc:
        raise InputError(str(exc)) from exc


def _load_volume(path, pad=False):
    vol = _load(path)
    if vol.ndim != 3:
        raise InputError(f"{path}: expected a 3D volume, got {vol.ndim} dims")
    cubic = len(set(vol.shape)) == 1
    if cubic and is_power_of_two(vol.shape[0]) and vol.shape[0] >= 2:
        return vol
    if not pad:
        raise InputError(
            f"{path}: volume {vol.shape} is not a power-of-two cube (use --pad to zero-pad)"
        )
    return volio.pad_to_power_of_two(vol)


def _dodecant(k):
    if not 0 <= k < 12:
        raise InputError(f"dodecant must be in 0..11, got {k}")
    return k


def _int_output(arr):
    # VOL1 has no u16/i16/u32; widen to the nearest supported type.
    if arr.dtype.kind == "f":
        return arr.astype(np.float64)
    if arr.dtype == np.uint8:
        return arr
    return arr.astype(np.int32 if arr.dtype.itemsize <= 2 else np.int64)


def cmd_forward_drt(args):
    vol = _load_volume(args.input, args.pad)
    table = _table(args.table)
    if args.cube:
        out = drt3d_cube(vol, table=table)
    else:
        k = _dodecant(args.dodecant)
        out = drt3d_dodecant(np.ascontiguousarray(orient_input(vol, k, table)))
    volio.write_vol(args.output, _int_output(out))


def cmd_forward_djt(args):
    vol = _load_volume(args.input, args.pad)
    table = _table(args.table)
    if args.all:
        out = np.concatenate(djt3d_all_dodecants(vol, table=table))
    else:
        k = _dodecant(args.dodecant)
        out = djt3d_dodecant(np.ascontiguousarray(orient_input(vol, k, table)))
    volio.write_vol(args.output, _int_output(out))


def cmd_adjoint_drt(args):
    r = _load(args.input)
    N = r.shape[0] // 4 if r.ndim == 3 else 0
    if r.ndim == 3 and N >= 1 and r.shape == (4 * N, 4 * N, 3 * N - 2) and is_power_of_two(N):
        out = adjoint_cube(r.astype(np.float64) if r.dtype.kind == "f" else r.astype(np.int64),
                           _table(args.table))
    elif r.ndim == 3 and r.shape[0] == r.shape[1] and r.shape[2] == 3 * r.shape[0] \
            and is_power_of_two(r.shape[0]):
        out = adjoint_drt3d_dodecant(r)
    else:
        raise InputError(
            f"{args.input}: {r.shape} is neither a (N, N, 3N) dodecant nor a "
            "(4N, 4N, 3N-2) cube with N a power of two"
        )
    volio.write_vol(args.output, _int_output(out))


def cmd_adjoint_djt(args):
    j = _load(args.input)
    N = j.shape[0]
    if j.ndim != 4 or j.shape != (N, N, 2 * N, 2 * N) or not is_power_of_two(N):
        raise InputError(f"{args.input}: {j.shape} is not a (N, N, 2N, 2N) line dodecant")
    volio.write_vol(args.output, _int_output(adjoint_djt3d_dodecant(j)))


def cmd_invert_drt(args):
    r = _load(args.input)
    N = r.shape[0] // 4
    if r.ndim != 3 or N < 2 or r.shape != (4 * N, 4 * N, 3 * N - 2) or not is_power_of_two(N):
        raise InputError(f"{args.input}: {r.shape} is not a (4N, 4N, 3N-2) cube mosaic")
    reference = None
    if args.reference:
        reference = _load(args.reference)
        if reference.shape != (N, N, N):
            raise InputError(f"reference shape {reference.shape} does not match N={N}")
    config = InversionConfig(
        max_outer_iterations=args.iterations,
        tolerance=args.tol,
        scheme=args.scheme,
        refinements_per_level=args.refinements,
        coarsest_N=min(args.coarsest_n, N),
    )
    try:
        config.validate(N)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rows = []

    def record(k, x, step):
        value = nrmsd(x, reference) if reference is not None else step
        rows.append((k, value))
        log.info("iteration %d: nrmsd %.6g", k, value)

    try:
        result = invert_drt3d(r, config, _table(args.table), callback=record)
        volume, status = result.volume, 0
    except InversionDiverged as exc:
        log.error("%s; steps %s", exc, ", ".join(f"{s:.3g}" for s in exc.history))
        volume, status = None, 1
    if args.log:
        with open(args.log, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "nrmsd"])
            for k, value in rows:
                w.writerow([k, f"{value:.9g}"])
    if volume is not None:
        volio.write_vol(args.output, volume.astype(np.float64))
    return status


def cmd_detect_planes(args):
    data = _load(args.input)
    if data.ndim == 2:
        if data.shape[0] != data.shape[1] or not is_power_of_two(data.shape[0]):
            raise InputError(f"{args.input}: depth map {data.shape} must be a power-of-two square")
        vol = volio.voxelize_depth(data)
    else:
        vol = _load_volume(args.input, args.pad)
    hits = volio.detect_planes(
        vol,
        top=args.top,
        threshold=args.threshold,
        orthogonal=args.orthogonal,
        orthogonal_tol=args.orthogonal_tol,
        neighborhood=args.neighborhood,
        table=_table(args.table),
    )
    if not hits:
        print("no planes", file=sys.stderr)
        return EXIT_NO_PLANES
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["dodecant", "s1", "s2", "delta", "votes"])
        for h in hits:
            w.writerow([h.dodecant, h.s1, h.s2, h.delta, h.votes])
    finally:
        if args.output:
            fh.close()
    return 0


def cmd_denoise_ray(args):
    vol = _load_volume(args.input, args.pad)
    if not 0 < args.keep_fraction <= 1:
        raise InputError(f"--keep-fraction must be in (0, 1], got {args.keep_fraction}")
    volio.write_vol(args.output, volio.denoise_ray(vol, args.keep_fraction, _table(args.table)))


def cmd_bench(args):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError as exc:
        raise InputError(f"--sizes must be comma-separated integers: {args.sizes}") from exc
    if not sizes or not all(is_power_of_two(n) and n >= 2 for n in sizes):
        raise InputError(f"--sizes must be powers of two >= 2: {args.sizes}")
    try:
        records = volio.bench(args.transform, sizes, args.threads, args.repeats, args.fresh)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    volio.write_bench_csv(args.csv if args.csv else sys.stdout, records)
    for (a, b), ratio in volio.scaling_ratios(records).items():
        print(f"T({b})/T({a}) = {ratio:.2f}", file=sys.stderr)


def cmd_gen_phantom(args):
    if not is_power_of_two(args.n) or args.n < 2:
        raise InputError(f"--n must be a power of two >= 2, got {args.n}")
    params = {}
    if args.at:
        params["at"] = tuple(int(v) for v in args.at.split(","))
        if len(params["at"]) != 3 or not all(0 <= v < args.n for v in params["at"]):
            raise InputError(f"--at needs three coordinates in [0, {args.n})")
    if args.kind == "ray":
        params.update(s1=args.s1 if args.s1 is not None else args.n - 1,
                      s2=args.s2 if args.s2 is not None else args.n - 1,
                      delta1=args.delta1, delta2=args.delta2)
    try:
        vol = volio.phantom(args.kind, args.n, seed=args.seed, **params)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    volio.write_vol(args.output, vol)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $RADON3D_THREADS or all cores)")
    p = argparse.ArgumentParser(prog="radon3d", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, parents=[common])
        sp.set_defaults(func=func)
        return sp

    def io(sp, pad=True, table=True):
        sp.add_argument("--input", "-i", required=True)
        sp.add_argument("--output", "-o", required=True)
        if pad:
            sp.add_argument("--pad", action="store_true",
                            help="zero-pad to the next power-of-two cube")
        if table:
            sp.add_argument("--table", choices=("published", "corrected"), default="published",
                            help="dodecant orientation table")

    sp = add("forward-drt", cmd_forward_drt, "plane sums of a volume")
    io(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--dodecant", type=int, default=0, help="single dodecant 0..11 (default 0)")
    g.add_argument("--cube", action="store_true", help="all twelve as a (4N, 4N, 3N-2) mosaic")

    sp = add("forward-djt", cmd_forward_djt, "line sums of a volume")
    io(sp)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--dodecant", type=int, default=0)
    g.add_argument("--all", action="store_true",
                   help="twelve dodecants stacked along the first axis (12N, N, 2N, 2N)")

    sp = add("adjoint-drt", cmd_adjoint_drt, "back-project a plane dodecant or cube")
    io(sp, pad=False)
    sp = add("adjoint-djt", cmd_adjoint_djt, "back-project a line dodecant")
    io(sp, pad=False, table=False)

    sp = add("invert-drt", cmd_invert_drt, "multigrid inversion of a cube mosaic")
    io(sp, pad=False)
    sp.add_argument("--iterations", type=int, default=10)
    sp.add_argument("--tol", type=float, default=0.0,
                    help="stop once the step nrmsd drops below this (0: never)")
    sp.add_argument("--coarsest-n", type=int, default=4)
    sp.add_argument("--refinements", type=int, default=InversionConfig.refinements_per_level)
    sp.add_argument("--scheme", choices=SCHEMES, default="multigrid")
    sp.add_argument("--reference", help="known volume; the log then records its nrmsd")
    sp.add_argument("--log", help="CSV with columns iteration,nrmsd")

    sp = add("detect-planes", cmd_detect_planes, "planes holding the most voxels")
    sp.add_argument("--input", "-i", required=True, help="3D volume or 2D depth map")
    sp.add_argument("--output", "-o", help="CSV path (default stdout)")
    sp.add_argument("--pad", action="store_true")
    sp.add_argument("--table", choices=("published", "corrected"), default="published")
    sp.add_argument("--top", type=int, default=1)
    sp.add_argument("--threshold", type=int, default=0, help="minimum votes (exclusive)")
    sp.add_argument("--orthogonal", action="store_true",
                    help="later planes must be orthogonal to the first")
    sp.add_argument("--orthogonal-tol", type=int, default=0,
                    help="largest |dot product| of integer normals counted as orthogonal")
    sp.add_argument("--neighborhood", type=int, default=3, help="local-maximum window width")

    sp = add("denoise-ray", cmd_denoise_ray, "keep the strongest line sums and back-project")
    io(sp)
    sp.add_argument("--keep-fraction", type=float, default=1e-3)

    sp = add("bench", cmd_bench, "time one dodecant at several sizes")
    sp.add_argument("--transform", choices=("drt3d", "djt3d"), default="drt3d")
    sp.add_argument("--sizes", default="32,64,128")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--fresh", action="store_true",
                    help="allocate output buffers on every run")
    sp.add_argument("--csv", help="CSV path (default stdout)")

    sp = add("gen-phantom", cmd_gen_phantom, "write a test volume")
    sp.add_argument("--kind", choices=volio.PHANTOMS, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--output", "-o", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--at", help="x,y,z for delta; wall positions for walls")
    sp.add_argument("--s1", type=int)
    sp.add_argument("--s2", type=int)
    sp.add_argument("--delta1", type=int, default=0)
    sp.add_argument("--delta2", type=int, default=0)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        volio.set_threads(args.threads)
        status = args.func(args)
    except (InputError, ValueError) as exc:
        print(f"radon3d {args.command}: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    return status or 0


if __name__ == "__main__":
    sys.exit(main())
