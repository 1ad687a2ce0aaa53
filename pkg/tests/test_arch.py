"""Geometry derivation, invariants, device table, and INI loading."""

import pytest

from pimgold import (ArchConfig, ConfigError, DEVICE_TABLE, InvalidGeometry,
                     device_lookup, kilo_pes, load_config, max_pes, validate)
from pimgold.arch import parse_grid


def default_cfg(**kw):
    base = dict(tile_grid=(14, 12), clock_mhz=737.0)
    base.update(kw)
    return ArchConfig(**base)


def test_default_geometry_derivation():
    v = validate(default_cfg())
    assert v.block_rows == 12 * 14 == 168
    assert v.block_cols == 2 * 12 == 24
    assert v.total_blocks == 4032
    assert v.total_pes == 64512
    assert v.pe_rows == 168
    assert v.pe_cols == 24 * 16 == 384
    assert v.blocks_per_row == 24


def test_validate_idempotent():
    v1 = validate(default_cfg())
    v2 = validate(v1)
    assert v1 == v2


def test_single_tile_geometry():
    v = validate(default_cfg(tile_grid=(1, 1)))
    assert v.total_blocks == 24
    assert v.total_pes == 384


@pytest.mark.parametrize("k", [3, 6, 12, 0, 1, -4])
def test_non_pow2_k_rejected(k):
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(pe_per_block=k))


def test_regfile_must_hold_working_set():
    # two 32-bit operands plus a 64-bit product: 128 cells minimum
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(regfile_bits=127))
    validate(default_cfg(regfile_bits=128))


@pytest.mark.parametrize("grid", [(0, 2), (2, 0), (-1, 1)])
def test_empty_grids_rejected(grid):
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(tile_grid=grid))
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(block_grid_per_tile=grid))


def test_nonpositive_clock_rejected():
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(clock_mhz=0.0))
    with pytest.raises(InvalidGeometry):
        validate(default_cfg(clock_mhz=-100.0))


# -- devices -----------------------------------------------------------------

EXPECTED_CAPACITY = {
    "U55": (64512, "64K"),
    "VX330T": (24000, "24K"),
    "VX485T": (32960, "32K"),
    "V2000T": (41344, "41K"),
    "VX1140T": (60160, "60K"),
    "VU3P": (23040, "23K"),
    "VU23P": (67584, "67K"),
    "VU19P": (69120, "69K"),
    "VU29P": (86016, "86K"),
}


def test_device_capacity_all_rows():
    seen = {}
    for dev in DEVICE_TABLE.values():
        seen[dev.alias] = (max_pes(dev), kilo_pes(dev))
    assert seen == EXPECTED_CAPACITY


def test_capacity_label_truncates():
    # 32960 PEs reads 32K: the label floors, it does not round half up
    dev = device_lookup("VX485T")
    assert max_pes(dev) == 32960
    assert kilo_pes(dev) == "32K"


def test_device_lookup_by_ident_and_alias():
    assert device_lookup("xcu55c-fsvh-2").alias == "U55"
    assert device_lookup("u55").ident == "xcu55c-fsvh-2"
    with pytest.raises(ConfigError):
        device_lookup("nonexistent-part")


def test_family_clock():
    assert device_lookup("U55").bram_fmax_mhz == 737.0
    assert device_lookup("V2000T").bram_fmax_mhz == pytest.approx(543.8)


# -- INI ----------------------------------------------------------------------

def test_parse_grid():
    assert parse_grid("14x12") == (14, 12)
    assert parse_grid("1X3") == (1, 3)
    with pytest.raises(ConfigError):
        parse_grid("14")
    with pytest.raises(ConfigError):
        parse_grid("axb")


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "fabric.ini"
    path.write_text(
        "[arch]\n"
        "tile_grid = 2x3\n"
        "clock_mhz = 500\n"
        "pe_per_block = 8\n"
        "[device.mypart]\n"
        "bram36_count = 100\n"
        "family = Virtex-7\n"
        "alias = MP\n")
    loaded = load_config(str(path))
    assert loaded.arch.tile_grid == (2, 3)
    assert loaded.arch.pe_per_block == 8
    assert loaded.arch.regfile_bits == 1024  # default survives
    dev = device_lookup("MP", loaded.devices)
    assert dev.bram36_count == 100
    assert dev.bram_fmax_mhz == pytest.approx(543.8)


def test_load_config_unknown_key_fails(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[arch]\ntile_grid = 1x1\nclock_mhz = 500\npe_count = 9\n")
    with pytest.raises(ConfigError, match="pe_count"):
        load_config(str(path))


def test_load_config_missing_required_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[arch]\nclock_mhz = 500\n")
    with pytest.raises(ConfigError, match="tile_grid"):
        load_config(str(path))


def test_load_config_unknown_section_fails(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[fabric]\ntile_grid = 1x1\n")
    with pytest.raises(ConfigError, match="fabric"):
        load_config(str(path))


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("/no/such/file.ini")
