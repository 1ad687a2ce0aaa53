"""Bit-serial processing elements over transposed storage.

Each PE owns one column of bit-cells (its register file) and a one-bit
datapath: a full adder, a carry latch, and a two-bit Booth pair latch.
Operands live bit-transposed, least significant bit at the lowest cell, so
every micro-op walks bit positions one cycle at a time.

State for a whole fabric is held as numpy planes indexed [row, col, cell]
and every micro-op vectorizes across the PE axes while looping over bit
position. A single PE is just a 1x1 instance of the same array, which keeps
unit-level and fabric-level semantics identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange, OverlapError, WidthError


@dataclass(frozen=True)
class RegOperand:
    """A bit-aligned operand: `width` cells starting at cell `base`."""

    base: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise WidthError(f"operand width must be >= 1, got {self.width}")
        if self.base < 0:
            raise OutOfRange(f"operand base must be >= 0, got {self.base}")

    @property
    def end(self) -> int:
        return self.base + self.width

    def overlaps(self, other: "RegOperand") -> bool:
        return self.base < other.end and other.base < self.end


def _m(where):
    # np.copyto treats where=None as "write nowhere"; normalize to all-on.
    return True if where is None else where


def _m3(where):
    return True if where is None else where[..., None]


def _require_dst_rule(dst: RegOperand, *sources: RegOperand) -> None:
    # A destination may alias a source only by being exactly that source;
    # partial overlap would corrupt bits the datapath still has to read.
    for src in sources:
        if dst == src:
            continue
        if dst.overlaps(src):
            raise OverlapError(
                f"destination [{dst.base},{dst.end}) partially overlaps "
                f"source [{src.base},{src.end})")


def values_from_bits(bits: np.ndarray) -> np.ndarray:
    """Decode little-endian two's-complement bit planes to int64 values."""
    width = bits.shape[-1]
    acc = np.zeros(bits.shape[:-1], dtype=np.uint64)
    for i in range(width):
        acc |= bits[..., i].astype(np.uint64) << np.uint64(i)
    shift = 64 - width
    return (acc << np.uint64(shift)).view(np.int64) >> shift


def bits_from_values(values, width: int) -> np.ndarray:
    """Encode integers as little-endian two's-complement bit planes."""
    vals = np.asarray(values, dtype=np.int64).astype(np.uint64)
    out = np.empty(vals.shape + (width,), dtype=np.uint8)
    for i in range(width):
        out[..., i] = (vals >> np.uint64(i)) & np.uint64(1)
    return out


def serial_signed_add(a_bits: np.ndarray, b_bits: np.ndarray,
                      out_bits: np.ndarray,
                      where: np.ndarray | None = None) -> np.ndarray:
    """Bit-serial two's-complement add of two bit regions into `out_bits`.

    Widths may differ: narrower inputs are sign-extended on the fly through
    a one-bit sign latch captured as the input's top bit streams past; wider
    inputs are truncated with a fit check. `out_bits` may alias `a_bits`
    (in-place accumulate); it must not alias `b_bits`.

    Returns a bool plane marking PEs whose mathematical sum does not fit the
    output width (or whose wide input did not fit it to begin with). The sum
    written is always the modular two's-complement result.
    """
    w_out = out_bits.shape[-1]
    w_a, w_b = a_bits.shape[-1], b_bits.shape[-1]
    # Latch signs and run fit checks before any write lands, so in-place
    # accumulation cannot corrupt what is still to be read.
    a_sign = a_bits[..., w_a - 1].copy()
    b_sign = b_bits[..., w_b - 1].copy()
    overflow = np.zeros(np.broadcast_shapes(a_sign.shape, b_sign.shape),
                        dtype=bool)
    for bits, w in ((a_bits, w_a), (b_bits, w_b)):
        if w > w_out:
            head = bits[..., w_out - 1][..., None]
            overflow = overflow | np.any(bits[..., w_out:] != head, axis=-1)
    eff_a_sign = a_bits[..., w_out - 1].copy() if w_a >= w_out else a_sign
    eff_b_sign = b_bits[..., w_out - 1].copy() if w_b >= w_out else b_sign

    carry = np.zeros_like(overflow, dtype=np.uint8)
    out_sign = None
    for i in range(w_out):
        ai = a_bits[..., i] if i < w_a else a_sign
        bi = b_bits[..., i] if i < w_b else b_sign
        s = ai ^ bi ^ carry
        carry = (ai & bi) | (carry & (ai | bi))
        if where is None:
            out_bits[..., i] = s
        else:
            np.copyto(out_bits[..., i], s, where=where)
        if i == w_out - 1:
            out_sign = s
    overflow |= (eff_a_sign == eff_b_sign) & (out_sign != eff_a_sign)
    if where is not None:
        overflow = overflow & where
    return overflow


class PeArray:
    """A grid of bit-serial PEs sharing one instruction stream.

    `logical_bits` is the addressable register-file size every operand is
    bounds-checked against. `phys_bits` (defaulting to it) is how many cells
    are actually allocated; a fabric running a known program can shrink the
    allocation to the window the program touches without changing semantics.
    """

    def __init__(self, rows: int, cols: int, logical_bits: int,
                 phys_bits: int | None = None):
        phys = logical_bits if phys_bits is None else phys_bits
        if not (rows >= 1 and cols >= 1 and 1 <= phys <= logical_bits):
            raise OutOfRange("bad PeArray shape")
        self.rows = rows
        self.cols = cols
        self.logical_bits = logical_bits
        self.phys_bits = phys
        self.bits = np.zeros((rows, cols, phys), dtype=np.uint8)
        self.carry = np.zeros((rows, cols), dtype=np.uint8)
        self.booth = np.zeros((rows, cols, 2), dtype=np.uint8)

    # -- addressing ---------------------------------------------------------

    def check_bounds(self, op: RegOperand) -> RegOperand:
        if op.end > self.logical_bits:
            raise OutOfRange(
                f"operand [{op.base},{op.end}) exceeds the "
                f"{self.logical_bits}-bit register file")
        if op.end > self.phys_bits:
            raise OutOfRange(
                f"operand [{op.base},{op.end}) is outside the allocated "
                f"{self.phys_bits}-cell window")
        return op

    def region(self, op: RegOperand) -> np.ndarray:
        """Writable (rows, cols, width) view of an operand's cells."""
        self.check_bounds(op)
        return self.bits[:, :, op.base:op.end]

    def read(self, op: RegOperand) -> np.ndarray:
        """Signed values of an operand across the grid, shape (rows, cols)."""
        return values_from_bits(self.region(op))

    def write(self, op: RegOperand, values,
              where: np.ndarray | None = None) -> None:
        """Store signed values (broadcastable to (rows, cols)) at an operand."""
        planes = bits_from_values(np.broadcast_to(
            np.asarray(values, dtype=np.int64), (self.rows, self.cols)),
            op.width)
        np.copyto(self.region(op), planes, where=_m3(where))

    # -- micro-ops ----------------------------------------------------------

    def clear_op_state(self, where: np.ndarray | None = None) -> None:
        """Reset carry and Booth latches, as every multicycle op does first."""
        if where is None:
            self.carry[:] = 0
            self.booth[:] = 0
        else:
            np.copyto(self.carry, np.uint8(0), where=where)
            np.copyto(self.booth, np.uint8(0), where=where[..., None])

    def step_add(self, a: RegOperand, b: RegOperand, dst: RegOperand,
                 i: int, where: np.ndarray | None = None) -> None:
        """One add step: dst[i] = a[i] ^ b[i] ^ carry, carry updated. 1 cycle."""
        if not (0 <= i < min(a.width, b.width, dst.width)):
            raise OutOfRange(f"bit index {i} outside the operand widths")
        _require_dst_rule(dst, a, b)
        ai = self.region(a)[..., i].copy()
        bi = self.region(b)[..., i].copy()
        s = ai ^ bi ^ self.carry
        c = (ai & bi) | (self.carry & (ai | bi))
        if where is None:
            self.region(dst)[..., i] = s
            self.carry[:] = c
        else:
            np.copyto(self.region(dst)[..., i], s, where=where)
            np.copyto(self.carry, c, where=where)

    def add(self, a: RegOperand, b: RegOperand, dst: RegOperand,
            pipe_overhead: int = 4, where: np.ndarray | None = None,
            subtract: bool = False) -> int:
        """Full-width add (or subtract) of equal-width operands.

        Modular two's-complement result; the final carry-out is left in the
        carry latch. Returns the cycle count, width + pipe_overhead.
        """
        if not (a.width == b.width == dst.width):
            raise WidthError("add operands must share one width")
        _require_dst_rule(dst, a, b)
        self.clear_op_state(where)
        if subtract:
            # a - b == a + ~b + 1: preset carry, invert b on the fly.
            if where is None:
                self.carry[:] = 1
            else:
                np.copyto(self.carry, np.uint8(1), where=where)
        for i in range(a.width):
            ai = self.region(a)[..., i].copy()
            bi = self.region(b)[..., i].copy()
            if subtract:
                bi = bi ^ 1
            s = ai ^ bi ^ self.carry
            c = (ai & bi) | (self.carry & (ai | bi))
            if where is None:
                self.region(dst)[..., i] = s
                self.carry[:] = c
            else:
                np.copyto(self.region(dst)[..., i], s, where=where)
                np.copyto(self.carry, c, where=where)
        return a.width + pipe_overhead

    def copy(self, src: RegOperand, dst: RegOperand, pipe_overhead: int = 4,
             where: np.ndarray | None = None) -> int:
        """Move src to dst one bit per cycle. Self-copy is legal (and charged)."""
        if src.width != dst.width:
            raise WidthError("copy operands must share one width")
        _require_dst_rule(dst, src)
        self.clear_op_state(where)
        if dst != src:
            np.copyto(self.region(dst), self.region(src), where=_m3(where))
        return src.width + pipe_overhead

    def multiply_booth2(self, multiplicand: RegOperand, multiplier: RegOperand,
                        product: RegOperand, pipe_overhead: int = 4,
                        where: np.ndarray | None = None) -> int:
        """Signed multiply, radix-2 Booth recoding over the A/Q register pair.

        Per iteration the Booth pair (current multiplier bit, previous bit)
        selects +M, -M, or no-op into the running upper half, then the pair
        shifts arithmetically right by one. N iterations of an N-bit serial
        add path: N * (N + pipe_overhead) cycles. The 2N-bit product must
        not overlap either operand.
        """
        n = multiplicand.width
        if multiplier.width != n:
            raise WidthError("multiplier width must match the multiplicand")
        if product.width != 2 * n:
            raise WidthError("product operand must be exactly double width")
        if product.overlaps(multiplicand) or product.overlaps(multiplier):
            raise OverlapError("product cells must not overlap the operands")
        self.clear_op_state(where)

        m = self.region(multiplicand)             # read-only view
        q = self.region(multiplier).copy()        # shifted locally
        # A carries one guard bit beyond N: subtracting the most negative
        # multiplicand transiently needs +2^(N-1), one past N-bit range.
        acc = np.zeros((self.rows, self.cols, n + 1), dtype=np.uint8)
        q_m1 = np.zeros((self.rows, self.cols), dtype=np.uint8)
        mask3 = _m3(where)
        carry = np.zeros_like(q_m1)
        for _ in range(n):
            q0 = q[..., 0]
            add_m = (q0 == 0) & (q_m1 == 1)
            sub_m = (q0 == 1) & (q_m1 == 0)
            active = add_m | sub_m
            np.copyto(self.booth[..., 0], q0, where=_m(where))
            np.copyto(self.booth[..., 1], q_m1, where=_m(where))
            # A += M or A -= M, bit-serially, only where the pair says so.
            carry = sub_m.astype(np.uint8)
            for i in range(n + 1):
                mi = (m[..., i] if i < n else m[..., n - 1]) ^ sub_m
                s = acc[..., i] ^ mi ^ carry
                carry = (acc[..., i] & mi) | (carry & (acc[..., i] | mi))
                np.copyto(acc[..., i], s, where=active)
            # Arithmetic right shift of (A, Q, q-1); A's sign bit repeats.
            q_m1 = q0.copy()
            q = np.concatenate([q[..., 1:], acc[..., :1]], axis=-1)
            acc = np.concatenate([acc[..., 1:], acc[..., -1:]], axis=-1)
        prod = self.region(product)
        np.copyto(prod[..., :n], q, where=mask3)
        np.copyto(prod[..., n:], acc[..., :n], where=mask3)
        np.copyto(self.carry, carry, where=_m(where))
        return n * (n + pipe_overhead)


class BitRegisterFile:
    """Single-PE view of the bit-cells, for direct inspection in tests."""

    def __init__(self, array: PeArray, row: int = 0, col: int = 0):
        self._array = array
        self._row = row
        self._col = col

    def __len__(self) -> int:
        return self._array.logical_bits

    def read_bit(self, cell: int) -> int:
        self._array.check_bounds(RegOperand(cell, 1))
        return int(self._array.bits[self._row, self._col, cell])

    def write_bit(self, cell: int, value: int) -> None:
        self._array.check_bounds(RegOperand(cell, 1))
        self._array.bits[self._row, self._col, cell] = 1 if value else 0

    def read(self, op: RegOperand) -> int:
        return int(values_from_bits(self._array.region(op)[self._row, self._col]))

    def write(self, op: RegOperand, value: int) -> None:
        planes = bits_from_values(np.asarray(value, dtype=np.int64), op.width)
        self._array.region(op)[self._row, self._col] = planes


class PeState:
    """One bit-serial PE.

    Standalone by default (its own 1x1 array), or bound as a live view onto
    one (row, col) of a shared PeArray, in which case its ops mask to that
    single PE and mutate the shared state.
    """

    def __init__(self, regfile_bits: int = 1024, *,
                 array: PeArray | None = None, row: int = 0, col: int = 0):
        if array is None:
            array = PeArray(1, 1, regfile_bits)
            self._where = None
        else:
            mask = np.zeros((array.rows, array.cols), dtype=bool)
            mask[row, col] = True
            self._where = mask
        self._array = array
        self._row = row
        self._col = col
        self.regfile = BitRegisterFile(array, row, col)

    @property
    def carry(self) -> int:
        return int(self._array.carry[self._row, self._col])

    @property
    def booth_pair(self) -> tuple[int, int]:
        pair = self._array.booth[self._row, self._col]
        return (int(pair[0]), int(pair[1]))

    def read(self, op: RegOperand) -> int:
        return self.regfile.read(op)

    def write(self, op: RegOperand, value: int) -> "PeState":
        self.regfile.write(op, value)
        return self

    def step_add(self, a: RegOperand, b: RegOperand, dst: RegOperand,
                 i: int) -> "PeState":
        self._array.step_add(a, b, dst, i, where=self._where)
        return self

    def add(self, a: RegOperand, b: RegOperand, dst: RegOperand,
            pipe_overhead: int = 4, subtract: bool = False) -> int:
        return self._array.add(a, b, dst, pipe_overhead, where=self._where,
                               subtract=subtract)

    def copy(self, src: RegOperand, dst: RegOperand,
             pipe_overhead: int = 4) -> int:
        return self._array.copy(src, dst, pipe_overhead, where=self._where)

    def multiply_booth2(self, multiplicand: RegOperand, multiplier: RegOperand,
                        product: RegOperand, pipe_overhead: int = 4) -> int:
        return self._array.multiply_booth2(multiplicand, multiplier, product,
                                           pipe_overhead, where=self._where)
