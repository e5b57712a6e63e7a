import pytest
from hypothesis import given, strategies as st

from radon3d.dlines import (
    bit_index,
    bits_of,
    is_power_of_two,
    line_offset,
    line_offset_closed_form,
    line_offsets,
    log2_exact,
)


@pytest.mark.parametrize("bits, value", [((0, 0, 0), 0), ((1, 0, 1), 5), ((1, 1, 1), 7)])
def test_bit_index(bits, value):
    assert bit_index(bits) == value


def test_bit_index_rejects_non_binary():
    with pytest.raises(ValueError):
        bit_index((0, 2))


@given(st.integers(0, 10).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
def test_bits_round_trip(case):
    n, value = case
    assert bit_index(bits_of(value, n)) == value


def test_flat_and_diagonal():
    assert all(line_offset(3, 0, u) == 0 for u in range(8))
    assert [line_offset(3, 7, u) for u in range(8)] == list(range(8))


def test_slope_three_by_hand():
    assert [line_offset(3, 3, u) for u in range(8)] == [0, 0, 1, 1, 2, 2, 3, 3]


def test_recursion_step_by_hand():
    # l[2, 1]: first half is l[1, 0] = (0, 0), second half adds (1 + 1) // 2 = 1.
    assert [line_offset(2, 1, u) for u in range(4)] == [0, 0, 1, 1]
    # l[2, 2]: l[1, 1] = (0, 1), lifted by (2 + 1) // 2 = 1.
    assert [line_offset(2, 2, u) for u in range(4)] == [0, 1, 1, 2]


@pytest.mark.parametrize("n", range(0, 7))
def test_endpoints_and_unit_steps(n):
    N = 1 << n
    for s in range(N):
        row = [line_offset(n, s, u) for u in range(N)]
        assert row[0] == 0 and row[-1] == s
        assert all(b - a in (0, 1) for a, b in zip(row, row[1:]))


@pytest.mark.parametrize("n", range(1, 7))
def test_self_similarity_on_first_half(n):
    # The first half of a line is the half-size line of slope s // 2 and the
    # second half is the same line lifted by (s + 1) // 2.
    N = 1 << n
    for s in range(N):
        for u in range(N // 2):
            half = line_offset(n - 1, s // 2, u)
            assert line_offset(n, s, u) == half
            assert line_offset(n, s, u + N // 2) == half + (s + 1) // 2


def test_even_positions_are_not_the_half_line():
    # Subsampling the even positions does not give l[n-1, s // 2].
    assert [line_offset(3, 3, u) for u in range(0, 8, 2)] == [0, 1, 2, 3]
    assert [line_offset(2, 1, u) for u in range(4)] == [0, 0, 1, 1]


@pytest.mark.parametrize("n", range(0, 7))
def test_closed_form_agrees(n):
    N = 1 << n
    for s in range(N):
        for u in range(N):
            assert line_offset_closed_form(n, s, u) == line_offset(n, s, u)


def test_offsets_table_matches_and_is_read_only():
    t = line_offsets(4)
    assert t.shape == (16, 16)
    assert t[5, 9] == line_offset(4, 5, 9)
    with pytest.raises(ValueError):
        t[0, 0] = 1


@pytest.mark.parametrize("args", [(3, 8, 0), (3, -1, 0), (3, 0, 8), (3, 0, -1)])
def test_out_of_range(args):
    with pytest.raises(ValueError):
        line_offset(*args)


def test_power_of_two_helpers():
    assert [is_power_of_two(v) for v in (0, 1, 2, 3, 64, 96)] == [False, True, True, False, True, False]
    assert log2_exact(64) == 6
    with pytest.raises(ValueError):
        log2_exact(48)
