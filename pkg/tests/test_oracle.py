import warnings

import numpy as np
import pytest

from radon3d.djt3d import djt3d_dodecant
from radon3d.drt3d import CORRECTED_TABLE, drt3d_cube, drt3d_dodecant
from radon3d.oracle import (
    condition_number,
    dense_operator,
    oracle_drt2d,
    oracle_line_sum,
    oracle_plane_sum,
)


def test_scalar_oracles_on_delta_and_ones():
    img = np.zeros((4, 4), dtype=int)
    img[0, 0] = 1
    assert [oracle_drt2d(img, 2, d) for d in (-1, 0, 1)] == [0, 1, 0]
    assert all(oracle_drt2d(np.ones((4, 4), dtype=int), 0, d) == 4 for d in range(4))
    vol = np.zeros((4, 4, 4), dtype=int)
    vol[0, 0, 0] = 1
    assert oracle_plane_sum(vol, 1, 2, 0) == 1 and oracle_plane_sum(vol, 1, 2, 1) == 0
    assert oracle_line_sum(vol, 3, 1, 0, 0) == 1 and oracle_line_sum(vol, 3, 1, 0, 1) == 0
    assert oracle_plane_sum(np.ones((4, 4, 4), dtype=int), 0, 0, 2) == 16


def test_hand_enumerated_n2_matrix():
    # Voxel (x, y, z) is column 4x + 2y + z; row (s1, s2, d) holds the plane
    # z = l[s1](x) + l[s2](y) + d - 4 with l[0] = (0, 0) and l[1] = (0, 1).
    planes = {
        (0, 0, 4): {0, 2, 4, 6}, (0, 0, 5): {1, 3, 5, 7},
        (0, 1, 3): {2, 6}, (0, 1, 4): {0, 3, 4, 7}, (0, 1, 5): {1, 5},
        (1, 0, 3): {4, 6}, (1, 0, 4): {0, 2, 5, 7}, (1, 0, 5): {1, 3},
        (1, 1, 2): {6}, (1, 1, 3): {2, 4, 7}, (1, 1, 4): {0, 3, 5}, (1, 1, 5): {1},
    }
    expected = np.zeros((2, 2, 6, 8), dtype=np.int8)
    for (s1, s2, d), cols in planes.items():
        expected[s1, s2, d, sorted(cols)] = 1
    np.testing.assert_array_equal(dense_operator(2, "drt-dodecant"), expected.reshape(24, 8))


@pytest.mark.parametrize("N", [2, 4])
def test_dense_matches_fast_transforms(N):
    rng = np.random.default_rng(N)
    vol = rng.integers(-9, 9, (N, N, N))
    flat = vol.ravel()
    np.testing.assert_array_equal(dense_operator(N, "drt-dodecant") @ flat, drt3d_dodecant(vol).ravel())
    np.testing.assert_array_equal(dense_operator(N, "djt-dodecant") @ flat, djt3d_dodecant(vol).ravel())
    for table in (None, CORRECTED_TABLE):
        cube = drt3d_cube(vol) if table is None else drt3d_cube(vol, table=table)
        np.testing.assert_array_equal(dense_operator(N, "drt-cube", table) @ flat, cube.ravel())


def test_dense_slab_hits_each_voxel_once():
    N = 4
    mat = dense_operator(N, "drt-dodecant").reshape(N, N, 3 * N, N**3)
    assert set(np.unique(mat)) <= {0, 1}
    for s1 in range(N):
        for s2 in range(N):
            assert (mat[s1, s2].sum(axis=0) == 1).all()
            assert mat[s1, s2].sum() == N**3


def test_unknown_operator():
    with pytest.raises(ValueError):
        dense_operator(4, "fft")


def test_condition_number_identity_and_rank_deficiency():
    rep = condition_number(np.eye(5))
    assert rep.condition == pytest.approx(1.0) and not rep.rank_deficient
    with pytest.warns(UserWarning, match="rank deficient"):
        rep = condition_number(np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]]))
    assert rep.rank == 1 and rep.sigma_min == rep.sigma_max


def test_condition_numbers_n4_are_reproducible():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dod = condition_number(dense_operator(4, "drt-dodecant"))
        cube = condition_number(dense_operator(4, "drt-cube"))
    assert dod.condition == pytest.approx(54.637, rel=1e-4)
    assert cube.condition == pytest.approx(5.706, rel=1e-3)
    assert dod.rank == cube.rank == 64
