"""Fabric geometry, timing parameters, and FPGA device data.

The compute fabric is a grid of tiles, each tile a grid of blocks, each
block a row of bit-serial PEs sharing one dual-port memory column pair.
Geometry is therefore fully described by three numbers per axis; everything
else (total PE count, PE grid shape, reduction fan-in per row) is derived
here once and cached on a ValidatedConfig.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError, InvalidGeometry

# Widest operand precision any instruction can name. The register file must
# hold two operands of this width plus a double-width product/accumulator.
MAX_OPERAND_BITS = 32


@dataclass(frozen=True)
class ArchConfig:
    """User-facing architecture knobs. Raw; run validate() before use."""

    # Tile grid (rows, cols) stamped across the device.
    tile_grid: tuple[int, int]
    # Fabric clock in MHz.
    clock_mhz: float
    # PEs per block; one PE per memory bitline, so this is the block fan-in.
    pe_per_block: int = 16
    # Bit-cells in each PE's register file column.
    regfile_bits: int = 1024
    # Block grid (rows, cols) inside one tile.
    block_grid_per_tile: tuple[int, int] = (12, 2)
    # Extra cycles a bit-serial step spends in the read/compute/write pipeline.
    pipe_overhead: int = 4
    # Accumulator width used by all reduction steps.
    accum_width: int = 32
    # Instruction-broadcast tree depth; charged once as pipeline fill.
    fanout_levels: int = 2


@dataclass(frozen=True)
class ValidatedConfig:
    """An ArchConfig that passed every invariant, plus derived geometry."""

    arch: ArchConfig
    block_rows: int      # block-grid rows across the whole fabric
    block_cols: int      # block-grid cols across the whole fabric
    total_blocks: int
    total_pes: int
    pe_rows: int         # = block_rows (one PE row per block row)
    pe_cols: int         # = block_cols * pe_per_block
    blocks_per_row: int  # max reduction fan-in P along one fabric row

    @property
    def pe_per_block(self) -> int:
        return self.arch.pe_per_block

    @property
    def regfile_bits(self) -> int:
        return self.arch.regfile_bits

    @property
    def accum_width(self) -> int:
        return self.arch.accum_width

    @property
    def pipe_overhead(self) -> int:
        return self.arch.pipe_overhead

    @property
    def fanout_levels(self) -> int:
        return self.arch.fanout_levels

    @property
    def clock_mhz(self) -> float:
        return self.arch.clock_mhz


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def validate(cfg: ArchConfig | ValidatedConfig) -> ValidatedConfig:
    """Check every architecture invariant and derive the fabric geometry.

    Idempotent: validating a ValidatedConfig re-checks and returns an equal
    value. Raises InvalidGeometry on the first violated invariant.
    """
    arch = cfg.arch if isinstance(cfg, ValidatedConfig) else cfg

    k = arch.pe_per_block
    if k < 2 or not _is_pow2(k):
        raise InvalidGeometry(
            f"pe_per_block must be a power of two >= 2, got {k}"
        )
    needed = 2 * arch.accum_width + 2 * MAX_OPERAND_BITS
    if arch.regfile_bits < needed:
        raise InvalidGeometry(
            f"regfile_bits={arch.regfile_bits} cannot hold two max-width "
            f"operands plus a double-width accumulator (need >= {needed})"
        )
    for name, grid in (("block_grid_per_tile", arch.block_grid_per_tile),
                       ("tile_grid", arch.tile_grid)):
        if len(grid) != 2 or grid[0] < 1 or grid[1] < 1:
            raise InvalidGeometry(f"{name} must be positive (rows, cols), got {grid}")
    if arch.clock_mhz <= 0:
        raise InvalidGeometry(f"clock_mhz must be positive, got {arch.clock_mhz}")
    if arch.pipe_overhead < 0:
        raise InvalidGeometry("pipe_overhead must be >= 0")
    if arch.fanout_levels < 0:
        raise InvalidGeometry("fanout_levels must be >= 0")
    if arch.accum_width < 2 or arch.accum_width > 64:
        raise InvalidGeometry("accum_width must be in [2, 64]")

    brows = arch.block_grid_per_tile[0] * arch.tile_grid[0]
    bcols = arch.block_grid_per_tile[1] * arch.tile_grid[1]
    total_blocks = brows * bcols
    return ValidatedConfig(
        arch=arch,
        block_rows=brows,
        block_cols=bcols,
        total_blocks=total_blocks,
        total_pes=total_blocks * k,
        pe_rows=brows,
        pe_cols=bcols * k,
        blocks_per_row=bcols,
    )


# ---------------------------------------------------------------------------
# Device data


@dataclass(frozen=True)
class DeviceEntry:
    """One FPGA part: the resources that bound a fabric build on it."""

    ident: str            # vendor part number
    alias: str            # short name used on the command line
    family: str           # "UltraScale+" or "Virtex-7"
    bram36_count: int     # 36-kbit BRAM tiles on the part
    lut_to_bram_ratio: int  # LUTs per BRAM36; high means LUT-rich parts

    @property
    def bram_fmax_mhz(self) -> float:
        return FAMILY_BRAM_FMAX_MHZ[self.family]


# Highest BRAM clock per family, MHz. The Virtex-7 value is derived from the
# part's 1.839 ns minimum BRAM clock pulse width (UltraScale+ derives to
# 737.5 the same way, matching its published 737).
FAMILY_BRAM_FMAX_MHZ = {
    "UltraScale+": 737.0,
    "Virtex-7": 543.8,
}

_DEVICE_ROWS = [
    ("xcu55c-fsvh-2",    "U55",     "UltraScale+", 2016, 646),
    ("xc7vx330tffg-2",   "VX330T",  "Virtex-7",     750, 272),
    ("xc7vx485tffg-2",   "VX485T",  "Virtex-7",    1030, 295),
    ("xc7v2000tfhg-2",   "V2000T",  "Virtex-7",    1292, 946),
    ("xc7vx1140tflg-2",  "VX1140T", "Virtex-7",    1880, 379),
    ("xcvu3p-ffvc-3",    "VU3P",    "UltraScale+",  720, 547),
    ("xcvu23p-vsva-3",   "VU23P",   "UltraScale+", 2112, 488),
    ("xcvu19p-fsvb-2",   "VU19P",   "UltraScale+", 2160, 1892),
    ("xcvu29p-figd-3",   "VU29P",   "UltraScale+", 2688, 643),
]

DEVICE_TABLE: dict[str, DeviceEntry] = {
    ident: DeviceEntry(ident, alias, family, brams, ratio)
    for ident, alias, family, brams, ratio in _DEVICE_ROWS
}


def device_lookup(name: str,
                  extra: dict[str, DeviceEntry] | None = None) -> DeviceEntry:
    """Find a device by part number or alias, case-insensitively."""
    table = dict(DEVICE_TABLE)
    if extra:
        table.update(extra)
    want = name.lower()
    for dev in table.values():
        if want in (dev.ident.lower(), dev.alias.lower()):
            return dev
    raise ConfigError(f"unknown device {name!r}; known: "
                      + ", ".join(sorted(d.alias for d in table.values())))


def max_pes(device: DeviceEntry, pe_per_block: int = 16) -> int:
    """PE capacity of a part: every BRAM36 splits into two k-PE blocks."""
    if pe_per_block < 1:
        raise InvalidGeometry("pe_per_block must be >= 1")
    return device.bram36_count * 2 * pe_per_block


def kilo_pes(device: DeviceEntry, pe_per_block: int = 16) -> str:
    """Capacity as a thousands label, truncated ("64K" for 64512).

    Truncation, not round-half: the published capacity column truncates
    (32960 reads 32K, 67584 reads 67K).
    """
    return f"{max_pes(device, pe_per_block) // 1000}K"


# Published system clocks of the compared GEMV/GEMM accelerators, MHz.
SYSTEM_CLOCKS_MHZ = {
    "imagine": 737.0,
    "imagine-cb": 737.0,
    "ccb-gemv": 231.0,
    "comefa-a-gemv": 242.0,
    "comefa-d-gemm": 267.0,
    "spar2-usp": 200.0,
    "spar2-v7": 130.0,
    "rima-fast": 455.0,
    "rima-large": 278.0,
}


# ---------------------------------------------------------------------------
# INI loading


class LoadedConfig(NamedTuple):
    arch: ArchConfig | None
    devices: dict[str, DeviceEntry]


_ARCH_KEYS = {
    "tile_grid", "clock_mhz", "pe_per_block", "regfile_bits",
    "block_grid_per_tile", "pipe_overhead", "accum_width", "fanout_levels",
}
_DEVICE_KEYS = {"ident", "alias", "family", "bram36_count", "lut_to_bram_ratio"}


def parse_grid(text: str) -> tuple[int, int]:
    """Parse "RxC" into (rows, cols)."""
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ConfigError(f"grid must look like '14x12', got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"grid must be integer 'RxC', got {text!r}") from exc


def _get_int(section, key: str, default: int | None = None) -> int:
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return int(section[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r} must be an integer, got {section[key]!r}") from exc


def load_config(path: str) -> LoadedConfig:
    """Read an INI file with an optional [arch] section and [device.*] sections.

    Unknown sections or keys fail fast with ConfigError; a typo must never
    silently fall back to a default.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path!r}: {exc}") from exc

    arch = None
    devices: dict[str, DeviceEntry] = {}
    for section in parser.sections():
        if section == "arch":
            body = parser["arch"]
            unknown = set(body) - _ARCH_KEYS
            if unknown:
                raise ConfigError(f"unknown [arch] keys: {sorted(unknown)}")
            if "tile_grid" not in body or "clock_mhz" not in body:
                raise ConfigError("[arch] requires tile_grid and clock_mhz")
            try:
                clock = float(body["clock_mhz"])
            except ValueError as exc:
                raise ConfigError("clock_mhz must be a number") from exc
            arch = ArchConfig(
                tile_grid=parse_grid(body["tile_grid"]),
                clock_mhz=clock,
                pe_per_block=_get_int(body, "pe_per_block", 16),
                regfile_bits=_get_int(body, "regfile_bits", 1024),
                block_grid_per_tile=parse_grid(body.get("block_grid_per_tile", "12x2")),
                pipe_overhead=_get_int(body, "pipe_overhead", 4),
                accum_width=_get_int(body, "accum_width", 32),
                fanout_levels=_get_int(body, "fanout_levels", 2),
            )
        elif section.startswith("device."):
            body = parser[section]
            unknown = set(body) - _DEVICE_KEYS
            if unknown:
                raise ConfigError(f"unknown [{section}] keys: {sorted(unknown)}")
            name = section.split(".", 1)[1]
            family = body.get("family", "UltraScale+")
            if family not in FAMILY_BRAM_FMAX_MHZ:
                raise ConfigError(
                    f"unknown family {family!r}; known: "
                    + ", ".join(sorted(FAMILY_BRAM_FMAX_MHZ)))
            entry = DeviceEntry(
                ident=body.get("ident", name),
                alias=body.get("alias", name),
                family=family,
                bram36_count=_get_int(body, "bram36_count"),
                lut_to_bram_ratio=_get_int(body, "lut_to_bram_ratio", 0),
            )
            devices[entry.ident] = entry
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return LoadedConfig(arch, devices)
