"""Instruction-driven GEMV fabric with cycle accounting.

The fabric maps a D x D matrix-vector product the way the hardware does:
matrix row i lives across PE row i (element j at PE column j, bit-transposed
in each PE's register file), the vector is broadcast down the columns, every
PE multiplies in place, then a two-stage reduction (inside each block, then
across the block columns of each row) leaves row sums in block column 0.

Execution is driven by an assembled instruction stream; the controller
charges one issue cycle per instruction, one Op-Params load per multicycle
instruction, and a one-time broadcast-tree fill. Data cycles land in the
phase buckets of a CycleReport.

Register-file layout used by generated GEMV programs (bit-cell indices):

    [0, N)        matrix element (resident, preloaded, not charged)
    [N, 2N)       vector element (broadcast in, charged as load)
    [2N, 4N)      product, double width
    [2N, 2N+W)    accumulator, widened in place over the product
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .arch import ArchConfig, ValidatedConfig, validate
from .block import IdPredicate, hop_reduce_kernel, inblock_reduce_kernel
from .errors import (AccumulatorOverflow, BadOperand, MappingError,
                     WidthError)
from .isa import (SELECT_ALL, SELECT_COL_MASK, SELECT_EQ, SELECT_STRIDE,
                  Instruction, assemble)
from .pe import PeArray, RegOperand, bits_from_values, values_from_bits

SUPPORTED_PRECISIONS = (4, 8, 16, 32)


# ---------------------------------------------------------------------------
# Problems and the functional oracle


@dataclass(frozen=True, eq=False)
class GemvProblem:
    """A dense D x D signed matrix-vector product at operand precision n_bits."""

    matrix: np.ndarray
    vector: np.ndarray
    n_bits: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.int64)
        v = np.asarray(self.vector, dtype=np.int64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MappingError(f"matrix must be square, got shape {m.shape}")
        if v.shape != (m.shape[0],):
            raise MappingError("vector length must match the matrix dimension")
        if self.n_bits not in SUPPORTED_PRECISIONS:
            raise WidthError(f"n_bits must be one of {SUPPORTED_PRECISIONS}")
        lo, hi = -(1 << (self.n_bits - 1)), (1 << (self.n_bits - 1)) - 1
        for name, arr in (("matrix", m), ("vector", v)):
            if arr.size and (arr.min() < lo or arr.max() > hi):
                raise WidthError(f"{name} entries exceed signed {self.n_bits}-bit range")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def safe_amplitude(d: int, n_bits: int, accum_width: int = 32) -> int:
    """Largest entry magnitude for which any D-term dot product provably
    fits the accumulator: min(operand range, isqrt(accum range / D))."""
    operand_max = (1 << (n_bits - 1)) - 1
    accum_max = (1 << (accum_width - 1)) - 1
    return min(operand_max, math.isqrt(accum_max // d))


def random_problem(d: int, n_bits: int, seed, accum_width: int = 32,
                   identity: bool = False) -> GemvProblem:
    """Seed-reproducible random problem, bounded to be overflow-free.

    With identity=True the matrix is the identity and only the vector is
    random (full operand range), so the expected result is the vector.
    """
    rng = np.random.default_rng(seed)
    if identity:
        bound = (1 << (n_bits - 1)) - 1
        matrix = np.eye(d, dtype=np.int64)
    else:
        bound = safe_amplitude(d, n_bits, accum_width)
        matrix = rng.integers(-bound, bound + 1, size=(d, d), dtype=np.int64)
    vector = rng.integers(-bound, bound + 1, size=d, dtype=np.int64)
    return GemvProblem(matrix=matrix, vector=vector, n_bits=n_bits)


def gemv_oracle(problem: GemvProblem) -> list[int]:
    """Exact matrix-vector product in unbounded Python integers."""
    m = problem.matrix.tolist()
    v = problem.vector.tolist()
    return [sum(a * b for a, b in zip(row, v)) for row in m]


# ---------------------------------------------------------------------------
# Controller and reporting


@dataclass
class OpParams:
    """Operand fields latched for the multicycle instruction in flight."""

    width: int
    addr1: int
    addr2: int
    flags: int


@dataclass
class ControllerState:
    """FSM and cycle ledger of the instruction sequencer."""

    fsm: str = "Idle"                 # Idle | SingleCycle | MultiCycle
    op_params: OpParams | None = None
    custom_width: int | None = None   # width used by prec=ptr, via SETPTR
    cycle_count: int = 0
    stage_a: bool = False             # optional sequencer pipeline stages;
    stage_b: bool = False             # each enabled stage deepens the
    stage_c: bool = False             # broadcast fill by exactly one cycle

    @property
    def extra_stages(self) -> int:
        return int(self.stage_a) + int(self.stage_b) + int(self.stage_c)


@dataclass
class CycleReport:
    """Cycle totals per GEMV phase. One fixed JSON shape, seven keys."""

    load: int = 0
    multiply: int = 0
    inblock: int = 0
    array: int = 0
    shiftout: int = 0
    controller: int = 0

    @property
    def total(self) -> int:
        return (self.load + self.multiply + self.inblock + self.array
                + self.shiftout + self.controller)

    @property
    def reduction(self) -> int:
        """Cycles spent reducing: in-block tree plus array-level hops."""
        return self.inblock + self.array

    def to_json(self) -> dict:
        return {
            "load": self.load,
            "multiply": self.multiply,
            "inblock": self.inblock,
            "array": self.array,
            "shiftout": self.shiftout,
            "controller": self.controller,
            "total": self.total,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def reduction_cycles(report: CycleReport) -> int:
    return report.reduction


# ---------------------------------------------------------------------------
# The fabric


class Fabric:
    """PE grid plus per-block control state, driven by instruction lists."""

    def __init__(self, cfg: ArchConfig | ValidatedConfig,
                 phys_window: int | None = None):
        v = validate(cfg)
        self.cfg = v
        self.k = v.pe_per_block
        self.array = PeArray(v.pe_rows, v.pe_cols, v.regfile_bits,
                             phys_bits=phys_window)
        grid = (v.block_rows, v.block_cols)
        self.enabled = np.ones(grid, dtype=bool)
        self.ptr = np.zeros(grid, dtype=np.int64)
        self.east_stage = np.zeros(grid, dtype=np.int64)
        self.west_stage = np.zeros(grid, dtype=np.int64)
        self.controller = ControllerState()
        # Region a mapped problem engages; ops outside it are value-inert
        # (all state there is zero and stays zero), so kernels skip it.
        self.active_rows = v.pe_rows
        self.active_bcols = v.block_cols
        self._staged: dict[int, np.ndarray] = {}
        self.readouts: list[np.ndarray] = []

    # -- staging ------------------------------------------------------------

    def stage_vector(self, bcol: int, values) -> None:
        """Queue k lane values for WRITEIN into one block column."""
        vals = np.zeros(self.k, dtype=np.int64)
        given = np.asarray(values, dtype=np.int64)
        vals[:given.shape[0]] = given
        self._staged[bcol] = vals

    def map_problem(self, problem: GemvProblem) -> None:
        """Preload the matrix as resident operands and stage the vector."""
        d, n = problem.dim, problem.n_bits
        if d > self.cfg.pe_rows:
            raise MappingError(f"D={d} exceeds the {self.cfg.pe_rows} PE rows")
        if d > self.cfg.pe_cols:
            raise MappingError(f"D={d} exceeds the {self.cfg.pe_cols} PE columns")
        p = -(-d // self.k)
        self.active_rows = d
        self.active_bcols = p
        planes = bits_from_values(problem.matrix, n)
        self.array.check_bounds(RegOperand(0, n))
        self.array.bits[:d, :d, 0:n] = planes
        for c in range(p):
            self.stage_vector(c, problem.vector[c * self.k:(c + 1) * self.k])

    # -- masks --------------------------------------------------------------

    def _block_mask(self) -> np.ndarray:
        mask = self.enabled.copy()
        mask[self.active_rows:, :] = False
        mask[:, self.active_bcols:] = False
        return mask

    def _pe_mask(self) -> np.ndarray:
        return np.repeat(self._block_mask(), self.k, axis=1)

    def _uniform_ptr(self) -> int:
        mask = self._block_mask()
        if not mask.any():
            return 0
        values = np.unique(self.ptr[mask])
        if values.shape[0] != 1:
            raise BadOperand("pointer registers diverge across enabled blocks; "
                             "a pointer-addressed op needs one uniform base")
        return int(values[0])

    # -- execution ----------------------------------------------------------

    def _resolve_width(self, instr: Instruction) -> int:
        width = instr.width
        if width is None:
            width = self.controller.custom_width
            if width is None:
                raise BadOperand("prec=ptr used before SETPTR latched a width")
        if width not in SUPPORTED_PRECISIONS:
            raise BadOperand(f"operand width {width} not in {SUPPORTED_PRECISIONS}")
        return width

    def execute(self, program: list[Instruction]) -> CycleReport:
        """Run a program to END (or exhaustion) and account every cycle."""
        ctrl = self.controller
        report = CycleReport()
        ctrl.cycle_count = self.cfg.fanout_levels + ctrl.extra_stages
        for instr in program:
            ctrl.cycle_count += 1
            if instr.is_multicycle:
                ctrl.fsm = "MultiCycle"
                ctrl.cycle_count += 1  # Op-Params load
                ctrl.op_params = OpParams(self._resolve_width(instr),
                                          instr.addr1, instr.addr2, instr.flags)
            else:
                ctrl.fsm = "SingleCycle"
            name = instr.mnemonic
            if name == "NOP":
                pass
            elif name == "SETPTR":
                np.copyto(self.ptr, np.int64(instr.addr1), where=self._block_mask())
                ctrl.custom_width = instr.addr2 if instr.addr2 else None
            elif name == "SELECT":
                self._op_select(instr)
            elif name == "WRITEIN":
                report.load += self._op_writein(instr)
            elif name == "READOUT":
                report.shiftout += self._op_readout(instr)
            elif name in ("MOV", "ADD", "SUB"):
                report.multiply += self._op_alu(instr)
            elif name == "MULT":
                report.multiply += self._op_mult(instr)
            elif name == "ACCUMBLK":
                report.inblock += self._op_accumblk(instr)
            elif name == "ACCUMROW":
                report.array += self._op_accumrow(instr)
            elif name == "END":
                ctrl.fsm = "Idle"
                break
        report.controller = ctrl.cycle_count
        return report

    def run_program(self, text: str) -> CycleReport:
        return self.execute(assemble(text))

    # -- per-op handlers ----------------------------------------------------

    def _op_select(self, instr: Instruction) -> None:
        mode = instr.flags
        if mode == SELECT_ALL:
            pred = IdPredicate.all_blocks()
        elif mode == SELECT_EQ:
            pred = IdPredicate.eq(instr.addr1, instr.addr2)
        elif mode == SELECT_COL_MASK:
            pred = IdPredicate.col_mask(instr.addr1 << 10 | instr.addr2)
        elif mode == SELECT_STRIDE:
            pred = IdPredicate.stride(instr.addr1, instr.addr2)
        else:
            raise BadOperand(f"SELECT flags={mode} is not an addressing mode")
        rows, cols = self.enabled.shape
        for r in range(rows):
            for c in range(cols):
                self.enabled[r, c] = pred((r, c))

    def _op_writein(self, instr: Instruction) -> int:
        width = self.controller.op_params.width
        bcol = instr.addr2
        if bcol >= self.cfg.block_cols:
            raise BadOperand(f"WRITEIN block column {bcol} outside the fabric")
        if bcol not in self._staged:
            raise MappingError(f"no vector data staged for block column {bcol}")
        dst = RegOperand(instr.addr1, width)
        region = self.array.region(dst)
        planes = bits_from_values(self._staged[bcol], width)  # (k, width)
        rows = self.active_rows
        sel = region[:rows, bcol * self.k:(bcol + 1) * self.k, :]
        mask = self._block_mask()[:rows, bcol][:, None, None]
        np.copyto(sel, np.broadcast_to(planes, sel.shape), where=mask)
        return width

    def _op_readout(self, instr: Instruction) -> int:
        width = self.controller.op_params.width
        bcol = instr.addr2
        src = RegOperand(instr.addr1, width)
        region = self.array.region(src)
        rows = self.active_rows
        lane0 = region[:rows, bcol * self.k, :]
        self.readouts.append(values_from_bits(lane0).copy())
        return rows  # one value leaves the column shift chain per cycle

    def _op_alu(self, instr: Instruction) -> int:
        width = self.controller.op_params.width
        a = RegOperand(instr.addr1, width)
        b = RegOperand(instr.addr2, width)
        mask = self._pe_mask()
        if instr.mnemonic == "MOV":
            return self.array.copy(a, b, self.cfg.pipe_overhead, where=mask)
        dst = RegOperand(self._uniform_ptr(), width)
        return self.array.add(a, b, dst, self.cfg.pipe_overhead, where=mask,
                              subtract=instr.mnemonic == "SUB")

    def _op_mult(self, instr: Instruction) -> int:
        width = self.controller.op_params.width
        a = RegOperand(instr.addr1, width)
        x = RegOperand(instr.addr2, width)
        prod = RegOperand(self._uniform_ptr(), 2 * width)
        return self.array.multiply_booth2(a, x, prod, self.cfg.pipe_overhead,
                                          where=self._pe_mask())

    def _op_accumblk(self, instr: Instruction) -> int:
        width = self.controller.op_params.width
        w = self.cfg.accum_width
        src = RegOperand(instr.addr1, 2 * width)
        dst = RegOperand(self._uniform_ptr(), w)
        cycles, overflowed = inblock_reduce_kernel(
            self.array, self.k, src, dst, self.cfg.pipe_overhead,
            pe_rows=self.active_rows, block_cols=self.active_bcols,
            block_enable=self._block_mask())
        if overflowed:
            raise AccumulatorOverflow(
                f"in-block reduction exceeded the {w}-bit accumulator")
        return cycles

    def _op_accumrow(self, instr: Instruction) -> int:
        w = self.cfg.accum_width
        p = instr.addr1 if instr.addr1 else self.active_bcols
        if p > self.cfg.block_cols:
            raise BadOperand(f"ACCUMROW over {p} block columns exceeds the fabric")
        op = RegOperand(self._uniform_ptr(), w)
        cycles, overflowed = hop_reduce_kernel(
            self.array, self.k, p, op, self.cfg.pipe_overhead,
            pe_rows=self.active_rows, block_enable=self._block_mask(),
            stage_sink={"east": self.east_stage, "west": self.west_stage})
        if overflowed:
            raise AccumulatorOverflow(
                f"array reduction exceeded the {w}-bit accumulator")
        return cycles


# ---------------------------------------------------------------------------
# GEMV front end


def regfile_window(n_bits: int, accum_width: int) -> int:
    """Cells a generated GEMV program touches: two operands, then the wider
    of (double-width product, accumulator) in place."""
    return 2 * n_bits + max(2 * n_bits, accum_width)


def build_gemv_program(d: int, n_bits: int, k: int) -> str:
    """Emit GEMV program text for a D-dim problem at one operand precision."""
    if n_bits not in SUPPORTED_PRECISIONS:
        raise WidthError(f"n_bits must be one of {SUPPORTED_PRECISIONS}")
    p = -(-d // k)
    x_base, prod_base = n_bits, 2 * n_bits
    prec = n_bits if n_bits in (8, 16, 32) else "ptr"
    custom = n_bits if prec == "ptr" else 0
    lines = [
        "SELECT flags=0                 # every block",
        f"SETPTR addr1={prod_base} addr2={custom}",
    ]
    lines += [f"WRITEIN prec={prec} addr1={x_base} addr2={c}" for c in range(p)]
    lines += [
        f"MULT prec={prec} addr1=0 addr2={x_base}",
        f"ACCUMBLK prec={prec} addr1={prod_base}",
    ]
    if p > 1:
        lines.append(f"ACCUMROW prec=32 addr1={p}")
    lines += [
        f"READOUT prec=32 addr1={prod_base} addr2=0",
        "END",
    ]
    return "\n".join(lines) + "\n"


def run_gemv(cfg: ArchConfig | ValidatedConfig, problem: GemvProblem, *,
             stage_a: bool = False, stage_b: bool = False,
             stage_c: bool = False) -> tuple[np.ndarray, CycleReport]:
    """Map, assemble, and execute one GEMV. Returns (result, CycleReport).

    The result is the W-bit accumulator contents of block column 0, top to
    bottom. Raises MappingError if the problem does not fit the fabric and
    AccumulatorOverflow if any reduction wraps.
    """
    v = validate(cfg)
    window = regfile_window(problem.n_bits, v.accum_width)
    fabric = Fabric(v, phys_window=min(window, v.regfile_bits))
    fabric.controller.stage_a = stage_a
    fabric.controller.stage_b = stage_b
    fabric.controller.stage_c = stage_c
    fabric.map_problem(problem)
    report = fabric.run_program(build_gemv_program(problem.dim,
                                                   problem.n_bits, v.pe_per_block))
    return fabric.readouts[-1], report
