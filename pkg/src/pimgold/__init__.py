"""pimgold: cycle-accurate bit-serial PIM GEMV simulation and the
reduction-latency scaling model that grades such designs."""

from .arch import (ArchConfig, DEVICE_TABLE, DeviceEntry, SYSTEM_CLOCKS_MHZ,
                   ValidatedConfig, device_lookup, kilo_pes, load_config,
                   max_pes, validate)
from .block import HopStream, IdPredicate, PimBlock
from .errors import (AccumulatorOverflow, BadOperand, ConfigError,
                     DegenerateDesign, DomainError, InsufficientData,
                     InvalidGeometry, MappingError, OutOfRange, OverlapError,
                     PimgoldError, TopologyError, UnknownMnemonic,
                     UnsupportedDesign, WidthError)
from .fabric import (CycleReport, Fabric, GemvProblem, build_gemv_program,
                     gemv_oracle, random_problem, reduction_cycles, run_gemv,
                     safe_amplitude)
from .goldfit import GoldFit, SpeedLabels, classify, fit, fit_report, range_check
from .isa import Instruction, assemble, from_binary, to_binary
from .models import (DesignModel, PhaseBreakdown, array_latency,
                     block_latency, clock_ratio_table, controller_cycles,
                     cycles_per_mac, execution_time_us, fit_points,
                     gemv_latency, ideal_scaling, peak_tops)
from .pe import PeArray, PeState, RegOperand

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "ValidatedConfig", "validate", "DeviceEntry", "DEVICE_TABLE",
    "SYSTEM_CLOCKS_MHZ", "device_lookup", "load_config", "max_pes", "kilo_pes",
    "PeArray", "PeState", "RegOperand", "PimBlock", "IdPredicate", "HopStream",
    "Instruction", "assemble", "to_binary", "from_binary",
    "GemvProblem", "Fabric", "CycleReport", "run_gemv", "build_gemv_program",
    "random_problem", "gemv_oracle", "reduction_cycles", "safe_amplitude",
    "DesignModel", "PhaseBreakdown", "block_latency", "array_latency",
    "gemv_latency", "execution_time_us", "peak_tops", "cycles_per_mac",
    "ideal_scaling", "fit_points", "clock_ratio_table", "controller_cycles",
    "GoldFit", "SpeedLabels", "fit", "classify", "range_check", "fit_report",
    "PimgoldError", "InvalidGeometry", "ConfigError", "OutOfRange",
    "OverlapError", "WidthError", "TopologyError", "MappingError",
    "AccumulatorOverflow", "BadOperand", "UnknownMnemonic",
    "InsufficientData", "DegenerateDesign", "DomainError", "UnsupportedDesign",
    "__version__",
]
