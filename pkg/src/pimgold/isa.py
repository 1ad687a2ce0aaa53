"""30-bit fabric instruction set: encoding, decoding, and a text assembler.

Word layout, bit 29 down to bit 0 (stored right-aligned in a 32-bit word,
top two bits zero):

    opcode[29:26] | prec[25:24] | addr1[23:14] | addr2[13:4] | flags[3:0]

prec selects the operand width: 00 -> 8, 01 -> 16, 10 -> 32, 11 -> take the
width latched in the Op-Params module (set by SETPTR's addr2 field), which
is how widths outside the three direct codes (e.g. 4) are named.

Program text is one instruction per line: a mnemonic followed by optional
`field=value` pairs; `#` starts a comment. Binary form is one little-endian
32-bit word per instruction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import BadOperand, UnknownMnemonic

OPCODES = {
    "NOP":      0,
    "SETPTR":   1,
    "SELECT":   2,
    "WRITEIN":  3,
    "READOUT":  4,
    "MOV":      5,
    "ADD":      6,
    "SUB":      7,
    "MULT":     8,
    "ACCUMBLK": 9,
    "ACCUMROW": 10,
    "END":      11,
}
MNEMONICS = {code: name for name, code in OPCODES.items()}

# Ops that retire in their single issue cycle; everything else occupies the
# PE array for multiple cycles and loads the Op-Params module first.
SINGLE_CYCLE = {"NOP", "SETPTR", "SELECT", "END"}

PREC_ENCODE = {8: 0, 16: 1, 32: 2, "ptr": 3}
PREC_DECODE = {0: 8, 1: 16, 2: 32}

# SELECT addressing modes, carried in the flags field.
SELECT_ALL, SELECT_EQ, SELECT_COL_MASK, SELECT_STRIDE = range(4)

_FIELD_BITS = {"opcode": 4, "prec": 2, "addr1": 10, "addr2": 10, "flags": 4}


@dataclass(frozen=True)
class Instruction:
    opcode: int
    prec: int = 0
    addr1: int = 0
    addr2: int = 0
    flags: int = 0

    def __post_init__(self):
        for name, bits in _FIELD_BITS.items():
            value = getattr(self, name)
            if not 0 <= value < (1 << bits):
                raise BadOperand(
                    f"{name}={value} does not fit its {bits}-bit field")
        if self.opcode not in MNEMONICS:
            raise BadOperand(f"opcode {self.opcode} is not defined")

    @property
    def mnemonic(self) -> str:
        return MNEMONICS[self.opcode]

    @property
    def is_multicycle(self) -> bool:
        return self.mnemonic not in SINGLE_CYCLE

    @property
    def width(self) -> int | None:
        """Direct operand width, or None when prec defers to Op-Params."""
        return PREC_DECODE.get(self.prec)

    def encode(self) -> int:
        return (self.opcode << 26 | self.prec << 24
                | self.addr1 << 14 | self.addr2 << 4 | self.flags)

    @classmethod
    def decode(cls, word: int) -> "Instruction":
        if not 0 <= word < (1 << 30):
            raise BadOperand(f"word {word:#x} exceeds the 30-bit encoding")
        return cls(opcode=(word >> 26) & 0xF, prec=(word >> 24) & 0x3,
                   addr1=(word >> 14) & 0x3FF, addr2=(word >> 4) & 0x3FF,
                   flags=word & 0xF)

    def text(self) -> str:
        return (f"{self.mnemonic} prec={PREC_DECODE.get(self.prec, 'ptr')} "
                f"addr1={self.addr1} addr2={self.addr2} flags={self.flags}")


def assemble_line(line: str) -> Instruction | None:
    """One text line to an Instruction; None for blanks and pure comments."""
    body = line.split("#", 1)[0].strip()
    if not body:
        return None
    parts = body.split()
    name = parts[0].upper()
    if name not in OPCODES:
        raise UnknownMnemonic(f"unknown mnemonic {parts[0]!r}")
    fields = {"opcode": OPCODES[name]}
    for token in parts[1:]:
        if "=" not in token:
            raise BadOperand(f"expected field=value, got {token!r}")
        key, _, raw = token.partition("=")
        if key == "prec":
            if raw == "ptr":
                fields["prec"] = PREC_ENCODE["ptr"]
                continue
            try:
                fields["prec"] = PREC_ENCODE[int(raw)]
            except (KeyError, ValueError):
                raise BadOperand(
                    f"prec must be 8, 16, 32 or ptr, got {raw!r}") from None
        elif key in ("addr1", "addr2", "flags"):
            try:
                fields[key] = int(raw, 0)
            except ValueError:
                raise BadOperand(f"{key} must be an integer, got {raw!r}") from None
        else:
            raise BadOperand(f"unknown field {key!r}")
    return Instruction(**fields)


def assemble(lines) -> list[Instruction]:
    """Assemble program text (an iterable of lines, or one string)."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    program = []
    for lineno, line in enumerate(lines, start=1):
        try:
            instr = assemble_line(line)
        except (BadOperand, UnknownMnemonic) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
        if instr is not None:
            program.append(instr)
    return program


def to_binary(program: list[Instruction]) -> bytes:
    """Pack a program as little-endian 32-bit words."""
    return struct.pack(f"<{len(program)}I", *(i.encode() for i in program))


def from_binary(blob: bytes) -> list[Instruction]:
    if len(blob) % 4:
        raise BadOperand("binary program length must be a multiple of 4 bytes")
    words = struct.unpack(f"<{len(blob) // 4}I", blob)
    return [Instruction.decode(w) for w in words]


def to_text(program: list[Instruction]) -> str:
    return "\n".join(i.text() for i in program) + "\n"
