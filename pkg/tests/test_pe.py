"""Bit-serial PE micro-ops against plain-integer oracles."""

import numpy as np
import pytest

from pimgold import (OutOfRange, OverlapError, PeArray, PeState, RegOperand,
                     WidthError)
from pimgold.pe import bits_from_values, serial_signed_add, values_from_bits


def wrap(v: int, width: int) -> int:
    """Two's-complement wrap of an arbitrary integer to `width` bits."""
    m = 1 << width
    return (v + (m >> 1)) % m - (m >> 1)


# -- encoding -----------------------------------------------------------------

@pytest.mark.parametrize("width", [1, 4, 8, 16, 32, 64])
def test_bits_values_roundtrip(width):
    rng = np.random.default_rng(width)
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    vals = rng.integers(lo, hi + 1, size=(5, 7), dtype=np.int64)
    assert np.array_equal(values_from_bits(bits_from_values(vals, width)), vals)


def test_values_sign_extension():
    bits = bits_from_values(np.array([-1, -8, 7]), 4)
    assert values_from_bits(bits).tolist() == [-1, -8, 7]


# -- serial add kernel --------------------------------------------------------

def test_serial_add_sign_extends_narrow_inputs():
    a = bits_from_values(np.array([[-3]]), 4)
    b = bits_from_values(np.array([[-120]]), 8)
    out = np.zeros((1, 1, 16), dtype=np.uint8)
    ovf = serial_signed_add(a, b, out)
    assert values_from_bits(out)[0, 0] == -123
    assert not ovf.any()


def test_serial_add_truncation_flags_misfit():
    a = bits_from_values(np.array([[300]]), 16)   # does not fit 8 bits
    b = bits_from_values(np.array([[1]]), 8)
    out = np.zeros((1, 1, 8), dtype=np.uint8)
    ovf = serial_signed_add(a, b, out)
    assert ovf[0, 0]
    # narrow value that fits is clean even though its container is wide
    a = bits_from_values(np.array([[-100]]), 16)
    ovf = serial_signed_add(a, b, out)
    assert not ovf.any()
    assert values_from_bits(out)[0, 0] == -99


def test_serial_add_in_place_accumulate():
    acc = bits_from_values(np.array([[1000]]), 32)
    b = bits_from_values(np.array([[-58]]), 16)
    ovf = serial_signed_add(acc, b, acc)
    assert values_from_bits(acc)[0, 0] == 942
    assert not ovf.any()


def test_serial_add_overflow_plane():
    a = bits_from_values(np.array([[100, -100, 50]]), 8)
    b = bits_from_values(np.array([[100, -100, -60]]), 8)
    out = np.empty_like(a)
    ovf = serial_signed_add(a, b, out)
    assert ovf[0].tolist() == [True, True, False]
    # wrapped results are still the modular sums
    assert values_from_bits(out)[0].tolist() == [wrap(200, 8), wrap(-200, 8), -10]


# -- single-PE ops ------------------------------------------------------------

A4, B4, D4 = RegOperand(0, 4), RegOperand(4, 4), RegOperand(8, 4)


def make_pe(**kw) -> PeState:
    return PeState(regfile_bits=64, **kw)


def test_add_wraps_and_reports_carry():
    pe = make_pe().write(A4, 5).write(B4, 3)
    cycles = pe.add(A4, B4, D4)
    assert pe.read(D4) == -8          # 5 + 3 wraps at 4 bits
    assert pe.carry == 0              # unsigned carry-out, not signed overflow
    assert cycles == 4 + 4


def test_add_unsigned_carry_out():
    pe = make_pe().write(A4, -1).write(B4, 1)   # 0b1111 + 0b0001
    pe.add(A4, B4, D4)
    assert pe.read(D4) == 0
    assert pe.carry == 1


def test_subtract():
    a, b, d = RegOperand(0, 16), RegOperand(16, 16), RegOperand(32, 16)
    pe = PeState(regfile_bits=64).write(a, 1000).write(b, 1234)
    cycles = pe.add(a, b, d, subtract=True)
    assert pe.read(d) == -234
    assert cycles == 20


def test_add_in_place_destination():
    pe = make_pe().write(A4, 2).write(B4, 3)
    pe.add(A4, B4, A4)                # dst == a exactly: legal accumulate
    assert pe.read(A4) == 5


def test_step_add_matches_full_add():
    a, b, d = RegOperand(0, 8), RegOperand(8, 8), RegOperand(16, 8)
    pe = PeState(regfile_bits=64).write(a, 77).write(b, -33)
    pe._array.clear_op_state()
    for i in range(8):
        pe.step_add(a, b, d, i)
    assert pe.read(d) == 44
    with pytest.raises(OutOfRange):
        pe.step_add(a, b, d, 8)


def test_copy_cycles_and_self_copy():
    src, dst = RegOperand(0, 32), RegOperand(32, 32)
    pe = PeState(regfile_bits=128).write(src, -123456)
    assert pe.copy(src, dst) == 36
    assert pe.read(dst) == -123456
    assert pe.copy(src, src) == 36    # self-copy is legal and still charged
    assert pe.read(src) == -123456


def test_partial_overlap_rejected():
    pe = make_pe()
    with pytest.raises(OverlapError):
        pe.add(A4, B4, RegOperand(2, 4))
    with pytest.raises(OverlapError):
        pe.copy(A4, RegOperand(1, 4))


def test_width_mismatch_rejected():
    pe = make_pe()
    with pytest.raises(WidthError):
        pe.add(A4, RegOperand(4, 8), RegOperand(16, 8))
    with pytest.raises(WidthError):
        pe.copy(A4, RegOperand(8, 5))


def test_bounds_checked_against_logical_size():
    pe = make_pe()
    with pytest.raises(OutOfRange):
        pe.read(RegOperand(60, 8))
    with pytest.raises(OutOfRange):
        RegOperand(-1, 4)


def test_phys_window_is_enforced():
    arr = PeArray(1, 1, logical_bits=1024, phys_bits=64)
    arr.write(RegOperand(0, 32), 7)
    with pytest.raises(OutOfRange):
        arr.read(RegOperand(48, 32))  # legal logically, outside the window


# -- Booth multiply -----------------------------------------------------------

def test_multiply_small_case_with_cycle_count():
    a, x, p = RegOperand(0, 8), RegOperand(8, 8), RegOperand(16, 16)
    pe = PeState(regfile_bits=64).write(a, 7).write(x, -3)
    cycles = pe.multiply_booth2(a, x, p)
    assert pe.read(p) == -21
    assert cycles == 8 * (8 + 4)


def test_multiply_booth_pair_latch_visible():
    a, x, p = RegOperand(0, 4), RegOperand(4, 4), RegOperand(8, 8)
    pe = make_pe().write(a, 3).write(x, 5)     # 0b0101: last pair is (0, 1)
    pe.multiply_booth2(a, x, p)
    assert pe.read(p) == 15
    assert pe.booth_pair == (0, 1)


def test_multiply_product_overlap_rejected():
    pe = make_pe()
    with pytest.raises(OverlapError):
        pe.multiply_booth2(A4, B4, RegOperand(6, 8))
    with pytest.raises(WidthError):
        pe.multiply_booth2(A4, B4, RegOperand(8, 10))
    with pytest.raises(WidthError):
        pe.multiply_booth2(A4, RegOperand(4, 8), RegOperand(16, 8))


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_multiply_random_exhaustive_edges(n):
    """2500 random pairs per width, plus forced extreme rows, vectorized."""
    rows, cols = 50, 50
    rng = np.random.default_rng(1000 + n)
    lo, hi = -(1 << (n - 1)), (1 << (n - 1)) - 1
    a = rng.integers(lo, hi + 1, size=(rows, cols), dtype=np.int64)
    x = rng.integers(lo, hi + 1, size=(rows, cols), dtype=np.int64)
    # force the corners: most negative value on either side and both
    a[0, :4] = [lo, lo, hi, 0]
    x[0, :4] = [lo, hi, lo, lo]
    a[1, :3] = [lo, -1, 1]
    x[1, :3] = [-1, lo, lo]

    arr = PeArray(rows, cols, logical_bits=4 * n)
    op_a, op_x = RegOperand(0, n), RegOperand(n, n)
    op_p = RegOperand(2 * n, 2 * n)
    arr.write(op_a, a)
    arr.write(op_x, x)
    cycles = arr.multiply_booth2(op_a, op_x, op_p)
    assert cycles == n * (n + 4)
    assert np.array_equal(arr.read(op_p), a * x)
    # operands must survive the multiply untouched
    assert np.array_equal(arr.read(op_a), a)
    assert np.array_equal(arr.read(op_x), x)


def test_multiply_masked_leaves_other_pes_alone():
    arr = PeArray(2, 2, logical_bits=32)
    op_a, op_x, op_p = RegOperand(0, 4), RegOperand(4, 4), RegOperand(8, 8)
    arr.write(op_a, 6)
    arr.write(op_x, 7)
    mask = np.array([[True, False], [False, False]])
    arr.multiply_booth2(op_a, op_x, op_p, where=mask)
    prods = arr.read(op_p)
    assert prods[0, 0] == 42
    assert (prods.ravel()[1:] == 0).all()


def test_view_bound_pe_shares_state():
    arr = PeArray(2, 3, logical_bits=64)
    pe = PeState(array=arr, row=1, col=2)
    pe.write(A4, -5)
    assert arr.read(A4)[1, 2] == -5
    assert (arr.read(A4).ravel()[:-1] == 0).all()
    pe.write(B4, 2)
    pe.add(A4, B4, D4)
    assert arr.read(D4)[1, 2] == -3
    assert (arr.read(D4).ravel()[:-1] == 0).all()
