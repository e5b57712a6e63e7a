import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from radon3d.adjinv import (
    HIGHPASS_KERNEL,
    InversionConfig,
    InversionDiverged,
    adjoint_cube,
    adjoint_djt3d_dodecant,
    adjoint_drt3d_dodecant,
    blocks_to_cube,
    calibrate_relaxation,
    cube_to_blocks,
    highpass,
    invert_drt3d,
    nrmsd,
    prolong,
    restrict_cube,
    restrict_dodecant,
)
from radon3d.djt3d import djt3d_dodecant
from radon3d.drt3d import CORRECTED_TABLE, DODECANT_TABLE, drt3d_cube, drt3d_dodecant
from radon3d.oracle import dense_operator
from radon3d.volio import phantom


def _dot(a, b):
    return int((np.asarray(a, dtype=object) * np.asarray(b, dtype=object)).sum())


# -- adjoints ---------------------------------------------------------------------


@settings(max_examples=20, deadline=None)
@given(
    arrays(np.int64, (8, 8, 8), elements=st.integers(-1000, 1000)),
    arrays(np.int64, (8, 8, 24), elements=st.integers(-1000, 1000)),
)
def test_drt_adjoint_identity(f, g):
    assert _dot(drt3d_dodecant(f), g) == _dot(f, adjoint_drt3d_dodecant(g))


@settings(max_examples=20, deadline=None)
@given(
    arrays(np.int64, (4, 4, 4), elements=st.integers(-1000, 1000)),
    arrays(np.int64, (4, 4, 8, 8), elements=st.integers(-1000, 1000)),
)
def test_djt_adjoint_identity(f, g):
    assert _dot(djt3d_dodecant(f), g) == _dot(f, adjoint_djt3d_dodecant(g))


def test_drt_adjoint_of_single_plane():
    N = 4
    r = np.zeros((N, N, 3 * N), dtype=np.int64)
    r[0, 0, 2 * N] = 1
    out = adjoint_drt3d_dodecant(r)
    expected = np.zeros((N, N, N), dtype=np.int64)
    expected[:, :, 0] = 1
    np.testing.assert_array_equal(out, expected)
    assert not adjoint_drt3d_dodecant(np.zeros_like(r)).any()


def test_djt_adjoint_of_diagonal_line():
    N = 8
    j = np.zeros((N, N, 2 * N, 2 * N), dtype=np.int64)
    j[N - 1, N - 1, N, N] = 1
    out = adjoint_djt3d_dodecant(j)
    u = np.arange(N)
    expected = np.zeros((N, N, N), dtype=np.int64)
    expected[u, u, u] = 1
    np.testing.assert_array_equal(out, expected)
    assert not adjoint_djt3d_dodecant(np.zeros_like(j)).any()


@pytest.mark.parametrize("which, shape, adjoint", [
    ("drt-dodecant", (4, 4, 12), adjoint_drt3d_dodecant),
    ("djt-dodecant", (4, 4, 8, 8), adjoint_djt3d_dodecant),
])
def test_dense_adjoint_is_transpose(which, shape, adjoint):
    forward = dense_operator(4, which)
    cols = []
    for i in range(int(np.prod(shape))):
        e = np.zeros(int(np.prod(shape)), dtype=np.int64)
        e[i] = 1
        cols.append(adjoint(e.reshape(shape)).ravel())
    np.testing.assert_array_equal(np.stack(cols, axis=1), forward.T)


def test_adjoint_float_input():
    rng = np.random.default_rng(0)
    f, g = rng.random((8, 8, 8)), rng.random((8, 8, 24))
    assert np.isclose(np.vdot(drt3d_dodecant(f), g), np.vdot(f, adjoint_drt3d_dodecant(g)))


@pytest.mark.parametrize("table", [DODECANT_TABLE, CORRECTED_TABLE])
def test_adjoint_cube_identity(table):
    rng = np.random.default_rng(1)
    N = 8
    f = rng.integers(-50, 50, (N, N, N))
    g = rng.integers(-50, 50, (4 * N, 4 * N, 3 * N - 2))
    assert _dot(drt3d_cube(f, table=table), g) == _dot(f, adjoint_cube(g, table))


def test_blocks_round_trip():
    cube = drt3d_cube(np.random.default_rng(2).integers(0, 9, (4, 4, 4)))
    blocks = cube_to_blocks(cube)
    assert blocks.shape == (12, 4, 4, 12)
    np.testing.assert_array_equal(blocks_to_cube(blocks), cube)


def test_adjoint_shape_errors():
    with pytest.raises(ValueError):
        adjoint_drt3d_dodecant(np.zeros((4, 4, 11)))
    with pytest.raises(ValueError):
        adjoint_djt3d_dodecant(np.zeros((4, 4, 8, 7)))
    with pytest.raises(ValueError):
        adjoint_drt3d_dodecant(np.zeros((6, 6, 18)))


# -- filter, prolongation, restriction --------------------------------------------


def test_kernel_coefficients():
    k = HIGHPASS_KERNEL
    assert k[1, 1, 1] == 7 / 8
    assert k[0, 1, 1] == -1 / 16 and k[0, 0, 1] == -1 / 32 and k[0, 0, 0] == -1 / 64
    assert 7 / 8 - 6 / 16 - 12 / 32 - 8 / 64 == 0
    assert k.sum() == 0


def test_kernel_has_all_48_cube_symmetries():
    k = HIGHPASS_KERNEL
    for perm in itertools.permutations(range(3)):
        for flips in itertools.product([False, True], repeat=3):
            t = np.transpose(k, perm)
            axes = tuple(i for i, f in enumerate(flips) if f)
            if axes:
                t = np.flip(t, axes)
            np.testing.assert_array_equal(t, k)


def test_highpass_examples():
    out = highpass(np.full((6, 6, 6), 3.0))
    assert np.all(out[1:-1, 1:-1, 1:-1] == 0)
    assert out[0, 0, 0] != 0
    delta = np.zeros((5, 5, 5))
    delta[2, 2, 2] = 1
    np.testing.assert_array_equal(highpass(delta)[1:4, 1:4, 1:4], HIGHPASS_KERNEL)
    corner = np.zeros((5, 5, 5))
    corner[0, 0, 0] = 1
    np.testing.assert_array_equal(highpass(corner)[:2, :2, :2], HIGHPASS_KERNEL[1:, 1:, 1:])
    assert highpass(corner).sum() != 0


def test_prolong_examples():
    np.testing.assert_array_equal(prolong(np.full((1, 1, 1), 5)), np.full((2, 2, 2), 5))
    checker = np.indices((2, 2, 2)).sum(axis=0) % 2
    fine = prolong(checker)
    np.testing.assert_array_equal(fine, np.indices((4, 4, 4)).sum(axis=0) // 1 * 0
                                  + (np.indices((4, 4, 4)) // 2).sum(axis=0) % 2)
    v = np.random.default_rng(0).random((4, 4, 4))
    assert np.isclose(prolong(v).sum(), 8 * v.sum())


def test_restrict_examples():
    assert not restrict_dodecant(np.zeros((8, 8, 24))).any()
    np.testing.assert_array_equal(restrict_dodecant(np.full((8, 8, 24), 2.0)), np.full((4, 4, 12), 0.5))
    with pytest.raises(ValueError):
        restrict_dodecant(np.zeros((8, 8, 20)))


@pytest.mark.parametrize("N", [8, 16, 32])
def test_restricted_data_scale_factor(N):
    # Measured relation between restricted data and data of the half-size
    # volume: total mass agrees exactly, single cells differ.
    fine = restrict_dodecant(drt3d_dodecant(np.ones((N, N, N))))
    coarse = drt3d_dodecant(np.ones((N // 2,) * 3)).astype(float)
    assert fine.sum() == coarse.sum()
    mask = coarse != 0
    ratio = fine[mask] / coarse[mask]
    assert ratio.min() == 0.5


def test_restrict_cube_shape():
    cube = drt3d_cube(np.ones((8, 8, 8)))
    assert restrict_cube(cube).shape == (16, 16, 10)


# -- nrmsd and calibration ----------------------------------------------------------


def _nrmsd_reference(a, b):
    a = [float(v) for v in np.ravel(a)]
    b = [float(v) for v in np.ravel(b)]
    mse = sum((x - y) ** 2 for x, y in zip(a, b)) / len(a)
    return mse ** 0.5 / (max(b) - min(b))


def test_nrmsd_examples():
    b = np.random.default_rng(0).random((4, 4, 4))
    b = (b - b.min()) / (b.max() - b.min())
    assert nrmsd(b, b) == 0
    assert np.isclose(nrmsd(b + 0.01, b), 0.01)
    a = np.random.default_rng(1).random((4, 4, 4))
    assert np.isclose(nrmsd(a, b), _nrmsd_reference(a, b), rtol=1e-12)
    assert nrmsd(np.ones(3), np.zeros(3)) == float("inf")
    with pytest.raises(ValueError):
        nrmsd(np.ones(3), np.ones(4))


RECORDED_SCALES = {
    4: 0.0013928448038999655,
    8: 0.000172797060020021,
    16: 2.1635192911374828e-05,
    32: 2.711739331107632e-06,
}


@pytest.mark.parametrize("N", sorted(RECORDED_SCALES))
def test_calibration_regression(N):
    s = calibrate_relaxation(N)
    assert s > 0
    assert s == pytest.approx(RECORDED_SCALES[N], rel=1e-12)
    assert calibrate_relaxation(N) == s


@pytest.mark.slow
@pytest.mark.parametrize("N", [64, 128])
def test_calibration_positive_large(N):
    assert calibrate_relaxation(N) > 0


# -- inversion ------------------------------------------------------------------------


def test_zero_data_gives_zero_volume():
    N = 8
    res = invert_drt3d(np.zeros((4 * N, 4 * N, 3 * N - 2)), InversionConfig(max_outer_iterations=3))
    assert not res.volume.any()
    assert res.iterations == 3


@pytest.mark.parametrize("N", [16, 32])
def test_smooth_phantom_error_decreases(N):
    vol = phantom("smooth", N, seed=1)
    iterations = 15 if N == 32 else 10
    res = invert_drt3d(drt3d_cube(vol), InversionConfig(max_outer_iterations=iterations),
                       reference=vol)
    errs = res.errors
    assert len(errs) == iterations + 1
    assert all(b < a for a, b in zip(errs[1:], errs[2:]))
    assert errs[-1] < 0.01


def test_richardson_scheme_decreases():
    vol = phantom("corners-center", 16).astype(float)
    res = invert_drt3d(drt3d_cube(vol), InversionConfig(scheme="richardson", max_outer_iterations=5),
                       reference=vol)
    assert all(b < a for a, b in zip(res.errors, res.errors[1:]))


def test_tolerance_stops_early_and_callback_runs():
    vol = phantom("corners-center", 8).astype(float)
    seen = []
    res = invert_drt3d(drt3d_cube(vol), InversionConfig(max_outer_iterations=50, tolerance=1e-3),
                       callback=lambda k, x, step: seen.append((k, step)))
    assert res.converged and res.iterations < 50
    assert [k for k, _ in seen] == list(range(1, res.iterations + 1))
    assert seen[-1][1] < 1e-3


def test_divergence_is_reported():
    vol = phantom("smooth", 8)
    cfg = InversionConfig(scheme="richardson", relaxation_scale=0.01)
    with pytest.raises(InversionDiverged) as info:
        invert_drt3d(drt3d_cube(vol), cfg)
    assert len(info.value.history) >= 3


@pytest.mark.parametrize("kw", [
    {"coarsest_N": 3}, {"coarsest_N": 16}, {"max_outer_iterations": -1},
    {"tolerance": -1.0}, {"scheme": "cg"}, {"spectrum_ratio": 0.5}, {"relaxation_scale": -1.0},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        invert_drt3d(np.zeros((32, 32, 22)), InversionConfig(**kw))


def test_rejects_non_cube_data():
    with pytest.raises(ValueError):
        invert_drt3d(np.zeros((32, 32, 21)))
