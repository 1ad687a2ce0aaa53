"""PIM blocks: k PEs behind one select/pointer interface, plus the
tree-reduction kernels shared by the scalar block and the full fabric.

A block's PEs reduce pairwise over log2(k) steps: at step s, the PE whose
column index is a multiple of 2^(s+1) adds its partner's value from
2^s columns east, in place, so the block total lands at PE 0. Across
blocks the same pairing runs over block columns, but each level first
drags the sender's bits through the boundary-register chain (one cycle
per block hopped) before the fused bit-serial add.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadOperand, InvalidGeometry, TopologyError, WidthError
from .pe import (PeArray, PeState, RegOperand, serial_signed_add,
                 values_from_bits)


# ---------------------------------------------------------------------------
# Select predicates


@dataclass(frozen=True)
class IdPredicate:
    """Block-id predicate used by SELECT to gate instruction execution."""

    kind: str
    row: int = 0
    col: int = 0
    mask: int = 0
    step: int = 1
    phase: int = 0

    @classmethod
    def all_blocks(cls) -> "IdPredicate":
        return cls("all")

    @classmethod
    def eq(cls, row: int, col: int) -> "IdPredicate":
        return cls("eq", row=row, col=col)

    @classmethod
    def col_mask(cls, mask: int) -> "IdPredicate":
        if mask < 0:
            raise BadOperand("column mask must be nonnegative")
        return cls("col_mask", mask=mask)

    @classmethod
    def stride(cls, step: int, phase: int) -> "IdPredicate":
        if step < 1 or not 0 <= phase < step:
            raise BadOperand(f"stride needs step >= 1 and 0 <= phase < step, "
                             f"got ({step}, {phase})")
        return cls("stride", step=step, phase=phase)

    def __call__(self, block_id: tuple[int, int]) -> bool:
        row, col = block_id
        if self.kind == "all":
            return True
        if self.kind == "eq":
            return (row, col) == (self.row, self.col)
        if self.kind == "col_mask":
            return bool((self.mask >> col) & 1)
        if self.kind == "stride":
            return col % self.step == self.phase
        raise BadOperand(f"unknown predicate kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Reduction kernels (shared between PimBlock and the fabric)


def inblock_reduce_kernel(arr: PeArray, k: int, src: RegOperand,
                          dst: RegOperand, pipe_overhead: int,
                          pe_rows: int | None = None,
                          block_cols: int | None = None,
                          block_enable: np.ndarray | None = None
                          ) -> tuple[int, bool]:
    """Reduce k values per block into PE 0's dst, every block in parallel.

    Step 0 reads src (sign-extending or fit-checking into dst's width);
    later steps accumulate dst in place. Cost is log2(k) serial adds at
    dst's width: (dst.width + pipe_overhead) * log2(k) cycles.

    Returns (cycles, overflowed). The bits written always wrap modulo
    2^width, so the result is permutation-invariant even on overflow;
    the flag lets the caller refuse to hand out a wrapped answer.
    """
    rows = arr.rows if pe_rows is None else pe_rows
    span = (arr.cols // k if block_cols is None else block_cols) * k
    steps = k.bit_length() - 1
    arr.check_bounds(src)
    arr.check_bounds(dst)
    pe_enable = None
    if block_enable is not None:
        pe_enable = np.repeat(block_enable[:rows], k, axis=1)
    overflowed = False
    for s in range(steps):
        stride, half = 2 << s, 1 << s
        reader = src if s == 0 else dst
        a = arr.bits[:rows, 0:span:stride, reader.base:reader.end]
        b = arr.bits[:rows, half:span:stride, reader.base:reader.end]
        out = arr.bits[:rows, 0:span:stride, dst.base:dst.end]
        wm = None if pe_enable is None else pe_enable[:, 0:span:stride]
        ovf = serial_signed_add(a, b, out, where=wm)
        overflowed = overflowed or bool(ovf.any())
    return steps * (dst.width + pipe_overhead), overflowed


def hop_reduce_kernel(arr: PeArray, k: int, n_block_cols: int,
                      op: RegOperand, pipe_overhead: int,
                      pe_rows: int | None = None,
                      block_enable: np.ndarray | None = None,
                      stage_sink: dict[str, np.ndarray] | None = None
                      ) -> tuple[int, bool]:
    """Reduce per-block totals across a row of blocks into block column 0.

    Binary hopping: ceil(log2(P)) levels; at level s each surviving block
    pulls its partner's value from 2^s block columns east through the
    boundary registers (2^s fill cycles) and fuses it into its own total
    with one serial add (op.width + pipe_overhead cycles). At powers of
    two this totals (W + overhead) * log2(P) + (P - 1).

    `stage_sink`, when given, receives the values latched at the east
    (receiver) and west (sender) boundary registers each level, keyed
    "east"/"west", shaped like (pe_rows, block_cols).
    """
    rows = arr.rows if pe_rows is None else pe_rows
    p = n_block_cols
    arr.check_bounds(op)
    levels = (p - 1).bit_length() if p > 1 else 0
    cycles = 0
    overflowed = False
    for s in range(levels):
        stride, half = 2 << s, 1 << s
        if p <= half:
            break
        n_pairs = (p - half + stride - 1) // stride
        step = stride * k
        recv = arr.bits[:rows, 0:(n_pairs - 1) * step + 1:step,
                        op.base:op.end]
        send = arr.bits[:rows, half * k:half * k + (n_pairs - 1) * step + 1:step,
                        op.base:op.end]
        wm = None
        if block_enable is not None:
            wm = (block_enable[:rows, 0:(n_pairs - 1) * stride + 1:stride]
                  & block_enable[:rows, half:half + (n_pairs - 1) * stride + 1:stride])
        if stage_sink is not None:
            vals = values_from_bits(send)
            for key, idx0 in (("east", 0), ("west", half)):
                plane = stage_sink[key]
                sel = plane[:rows, idx0:idx0 + (n_pairs - 1) * stride + 1:stride]
                np.copyto(sel, vals, where=True if wm is None else wm)
        ovf = serial_signed_add(recv, send, recv, where=wm)
        overflowed = overflowed or bool(ovf.any())
        cycles += half + op.width + pipe_overhead
    return cycles, overflowed


# ---------------------------------------------------------------------------
# Scalar block


@dataclass(frozen=True)
class HopStream:
    """Value in flight on the boundary-register chain, west-bound."""

    bits: np.ndarray          # (width,) uint8, a private copy
    origin: tuple[int, int]   # block id of the sender

    @property
    def width(self) -> int:
        return self.bits.shape[0]

    @property
    def value(self) -> int:
        return int(values_from_bits(self.bits[None, None, :])[0, 0])


class PimBlock:
    """One block: k PEs, an enable latch, a pointer register, and the
    east/west boundary registers that splice it into its fabric row."""

    def __init__(self, k: int = 16, regfile_bits: int = 1024,
                 block_id: tuple[int, int] = (0, 0),
                 accum_width: int = 32, pipe_overhead: int = 4):
        if k < 2 or (k & (k - 1)) != 0:
            raise InvalidGeometry(f"block width must be a power of two >= 2, got {k}")
        self.k = k
        self.block_id = block_id
        self.accum_width = accum_width
        self.pipe_overhead = pipe_overhead
        self.array = PeArray(1, k, regfile_bits)
        self.pes: list[PeState] = [PeState(array=self.array, row=0, col=i)
                                   for i in range(k)]
        self.enabled = True
        self.ptr_reg = 0
        self.west_stage = 0
        self.east_stage = 0
        self.overflowed = False

    def set_select(self, predicate: IdPredicate) -> "PimBlock":
        self.enabled = bool(predicate(self.block_id))
        return self

    def inblock_reduce(self, src: RegOperand, dst: RegOperand) -> int:
        """Sum the k resident values into PE 0. (W + overhead) * log2(k) cycles.

        Cycles are charged whether or not the block is enabled (the fabric
        clock runs regardless); a disabled block's state does not change.
        """
        w = dst.width
        if w > self.accum_width:
            raise WidthError(f"reduce width {w} exceeds the "
                             f"{self.accum_width}-bit accumulator")
        if src.width > w:
            raise WidthError("reduce cannot narrow: src wider than dst")
        cycles = (w + self.pipe_overhead) * (self.k.bit_length() - 1)
        if not self.enabled:
            self.array.check_bounds(src)
            self.array.check_bounds(dst)
            return cycles
        got, ovf = inblock_reduce_kernel(self.array, self.k, src, dst,
                                         self.pipe_overhead)
        assert got == cycles
        self.overflowed = self.overflowed or ovf
        return cycles

    def hop_send(self, src: RegOperand) -> HopStream:
        """Launch PE 0's value west on the boundary chain. Costed at receive."""
        self.array.check_bounds(src)
        bits = self.array.bits[0, 0, src.base:src.end].copy()
        self.west_stage = int(values_from_bits(bits[None, None, :])[0, 0])
        return HopStream(bits=bits, origin=self.block_id)

    def hop_receive(self, stream: HopStream, dst: RegOperand) -> int:
        """Absorb an east neighbor's value into PE 0's dst with a fused add.

        Costs (hop distance) + dst.width + pipe_overhead cycles: one cycle
        per block boundary crossed, then one serial add as the bits stream
        out of the east stage register.
        """
        if stream.origin == self.block_id:
            raise TopologyError("a block cannot hop a value to itself")
        if stream.origin[0] != self.block_id[0]:
            raise TopologyError("hops travel along one fabric row")
        distance = stream.origin[1] - self.block_id[1]
        if distance < 1:
            raise TopologyError("hop streams flow west; sender must be east "
                                "of the receiver")
        if stream.width != dst.width:
            raise WidthError("stream width must match the destination")
        if dst.width > self.accum_width:
            raise WidthError(f"hop add width {dst.width} exceeds the "
                             f"{self.accum_width}-bit accumulator")
        cycles = distance + dst.width + self.pipe_overhead
        if not self.enabled:
            self.array.check_bounds(dst)
            return cycles
        self.east_stage = stream.value
        out = self.array.bits[0:1, 0:1, dst.base:dst.end]
        ovf = serial_signed_add(out, stream.bits[None, None, :], out)
        self.overflowed = self.overflowed or bool(ovf.any())
        return cycles
