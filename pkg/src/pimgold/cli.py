"""Command-line front end.

Subcommands:
    simulate   run GEMV problems on the fabric, check against exact integers
    model      closed-form phase breakdowns for the comparison designs
    compare    model sweep plus the relative-clock and ordering report
    fit        scaling-model fits (a, b, c) per design, optionally asserted
    verify     lock the simulator and the analytical model cycle-for-cycle
    scale      device capacity table and ideal scaling curves

Exit codes: 0 ok; 2 bad arguments, config, or domain; 3 a verification or
assertion failed; 4 numeric overflow in the simulated datapath.

Runs are deterministic: one seed fully determines every generated problem
(each sweep point derives its own child seed), worker-pool results are
collected in sweep order, and PIMGOLD_THREADS caps the pool size.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import fabric, goldfit, models
from .arch import (ArchConfig, DEVICE_TABLE, SYSTEM_CLOCKS_MHZ, DeviceEntry,
                   device_lookup, kilo_pes, load_config, max_pes, validate)
from .errors import AccumulatorOverflow, ConfigError, PimgoldError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY = 3
EXIT_NUMERIC = 4

MODEL_COLUMNS = ["design", "D", "N", "k", "P", "load", "multiply", "inblock",
                 "array", "total_cycles", "clock_mhz", "time_us"]

SIM_COLUMNS = ["D", "N", "seed", "load", "multiply", "inblock", "array",
               "shiftout", "controller", "total"]

FIT_DESIGNS = (models.SPAR2_LINEAR, models.SPAR2_BINARY, models.CCB_COMEFA,
               models.BINARY_HOPPING)

# Acceptance brackets for `fit --assert`, mirroring the published table.
FIT_BRACKETS = {
    models.SPAR2_LINEAR:
        lambda r: r["a"] <= 0.3 and abs(r["b"] - 96) <= 3 and r["c"] <= 40,
    models.SPAR2_BINARY:
        lambda r: abs(r["a"] - 2) <= 0.2 and abs(r["b"] - 32) <= 2 and r["c"] <= 20,
    models.CCB_COMEFA:
        lambda r: abs(r["a"] - 1 / 32) <= 0.02 and r["b"] <= 0.1,
    models.BINARY_HOPPING:
        lambda r: 1.0 <= r["a"] <= 1.3 and 0.8 <= r["b"] <= 1.1
        and 138 <= r["c"] <= 148,
}


class VerificationFailure(PimgoldError):
    """A check the run was asked to enforce did not hold."""


# ---------------------------------------------------------------------------
# Run specification


@dataclass
class RunSpec:
    """Everything a run depends on; equal specs give byte-identical output."""

    command: str
    d_values: list[int] = field(default_factory=list)
    n_values: list[int] = field(default_factory=list)
    designs: list[str] = field(default_factory=list)
    seed: int = 0
    config: str | None = None
    out: str | None = None
    fmt: str = "csv"
    assert_checks: bool = False
    identity: bool = False
    ccb_mode: str = "formula"
    clock_overrides: dict[str, float] = field(default_factory=dict)
    device: str | None = None
    samples: int = 9
    fit_p: list[int] = field(default_factory=lambda: [2, 4, 8, 16, 32, 64])
    stages: tuple[bool, bool, bool] = (False, False, False)


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _clock_override(text: str) -> tuple[str, float]:
    name, _, value = text.partition("=")
    try:
        mhz = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NAME=MHZ, got {text!r}")
    if mhz <= 0:
        raise argparse.ArgumentTypeError("clock override must be positive")
    return name.strip(), mhz


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pimgold",
        description="Bit-serial PIM GEMV simulator and latency-model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, d_default, n_default):
        p.add_argument("--config", help="INI architecture/device file")
        p.add_argument("--sweep-d", type=_int_list, default=d_default,
                       metavar="D1,D2,...", help="problem dimensions")
        p.add_argument("--precision", type=_int_list, default=n_default,
                       metavar="N1,N2,...", help="operand precisions (bits)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the table here instead of stdout")
        p.add_argument("--format", choices=["csv", "json"], default="csv",
                       dest="fmt")

    p = sub.add_parser("simulate", help="run GEMV on the fabric, exact-check")
    common(p, [16, 32, 64], [8])
    p.add_argument("--identity", action="store_true",
                   help="identity matrix, random vector (result == vector)")
    p.add_argument("--stages", type=_str_list, default=[],
                   metavar="a,b,c", help="enable controller pipeline stages")

    p = sub.add_parser("model", help="closed-form phase breakdowns")
    common(p, [64, 128, 256, 512, 1024, 2048], [8])
    p.add_argument("--designs", type=_str_list,
                   default=list(models.DESIGNS[:4]),
                   help="comma-separated design names")
    p.add_argument("--ccb-mode", choices=["formula", "constant"],
                   default="formula")
    p.add_argument("--clock", type=_clock_override, action="append",
                   default=[], metavar="NAME=MHZ",
                   help="override a design or system clock")

    p = sub.add_parser("compare", help="model sweep + clock-ratio report")
    common(p, [64, 128, 256, 512, 1024, 2048], [8])
    p.add_argument("--designs", type=_str_list,
                   default=[models.BINARY_HOPPING, models.CCB_COMEFA,
                            models.SPAR2_BINARY])
    p.add_argument("--ccb-mode", choices=["formula", "constant"],
                   default="formula")
    p.add_argument("--clock", type=_clock_override, action="append",
                   default=[], metavar="NAME=MHZ")
    p.add_argument("--assert", action="store_true", dest="assert_checks",
                   help="fail (exit 3) unless the expected ordering holds")

    p = sub.add_parser("fit", help="fit the reduction scaling model")
    common(p, [], [])
    p.add_argument("--designs", type=_str_list, default=list(FIT_DESIGNS))
    p.add_argument("--fit-p", type=_int_list, default=[2, 4, 8, 16, 32, 64],
                   metavar="P1,P2,...", help="partial-sum counts to fit over")
    p.add_argument("--ccb-mode", choices=["formula", "constant"],
                   default="formula")
    p.add_argument("--assert", action="store_true", dest="assert_checks",
                   help="fail (exit 3) if a fit leaves its published bracket")

    p = sub.add_parser("verify", help="simulator vs analytical model, lockstep")
    common(p, [16, 32, 64, 128, 256], [8, 16, 32])

    p = sub.add_parser("scale", help="device capacities and ideal scaling")
    common(p, [], [])
    p.add_argument("--device", help="plot the ideal scaling curve of this part")
    p.add_argument("--samples", type=int, default=9)

    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    stages_raw = [s.lower() for s in getattr(args, "stages", [])]
    unknown = set(stages_raw) - {"a", "b", "c"}
    if unknown:
        raise ConfigError(f"unknown controller stages: {sorted(unknown)}")
    return RunSpec(
        command=args.command,
        d_values=list(getattr(args, "sweep_d", [])),
        n_values=list(getattr(args, "precision", [])),
        designs=list(getattr(args, "designs", [])),
        seed=args.seed,
        config=args.config,
        out=args.out,
        fmt=args.fmt,
        assert_checks=getattr(args, "assert_checks", False),
        identity=getattr(args, "identity", False),
        ccb_mode=getattr(args, "ccb_mode", "formula"),
        clock_overrides=dict(getattr(args, "clock", [])),
        device=getattr(args, "device", None),
        samples=getattr(args, "samples", 9),
        fit_p=list(getattr(args, "fit_p", [2, 4, 8, 16, 32, 64])),
        stages=("a" in stages_raw, "b" in stages_raw, "c" in stages_raw),
    )


# ---------------------------------------------------------------------------
# Shared plumbing


def auto_arch(d: int, clock_mhz: float = 737.0) -> ArchConfig:
    """Smallest default-shaped fabric that fits a D x D problem."""
    cfg = ArchConfig(tile_grid=(max(1, -(-d // 12)), max(1, -(-d // 32))),
                     clock_mhz=clock_mhz)
    validate(cfg)
    return cfg


def _load_spec_config(spec: RunSpec):
    if spec.config is None:
        return None, {}
    loaded = load_config(spec.config)
    if loaded.arch is not None:
        validate(loaded.arch)
    return loaded.arch, loaded.devices


def worker_count(n_tasks: int) -> int:
    cap = os.cpu_count() or 1
    env = os.environ.get("PIMGOLD_THREADS")
    if env:
        try:
            cap = max(1, min(cap, int(env)))
        except ValueError:
            raise ConfigError(f"PIMGOLD_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, n_tasks))


def _pool_map(fn, tasks: list) -> list:
    workers = worker_count(len(tasks))
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))  # map preserves task order


def _emit(spec: RunSpec, text: str) -> None:
    if spec.out:
        with open(spec.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# simulate / verify workers (top level: must pickle into the pool)


def _simulate_point(task) -> dict:
    idx, d, n, seed, cfg, identity, stages = task
    if cfg is None:
        cfg = auto_arch(d)
    problem = fabric.random_problem(d, n, (seed, idx), identity=identity)
    result, report = fabric.run_gemv(cfg, problem, stage_a=stages[0],
                                     stage_b=stages[1], stage_c=stages[2])
    expected = fabric.gemv_oracle(problem)
    return {
        "idx": idx, "D": d, "N": n, "seed": seed,
        "ok": [int(v) for v in result] == expected,
        "cycles": report.to_json(),
    }


def _fit_sim_point(task) -> tuple[int, int]:
    p, seed = task
    d = 16 * p
    problem = fabric.random_problem(d, 8, (seed, 7001, p))
    _, report = fabric.run_gemv(auto_arch(d), problem)
    return p, report.reduction


def _sweep_tasks(spec: RunSpec, cfg) -> list:
    tasks = []
    idx = 0
    for d in spec.d_values:
        for n in spec.n_values:
            tasks.append((idx, d, n, spec.seed, cfg, spec.identity, spec.stages))
            idx += 1
    return tasks


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(spec: RunSpec) -> int:
    cfg, _ = _load_spec_config(spec)
    results = _pool_map(_simulate_point, _sweep_tasks(spec, cfg))
    bad = [r for r in results if not r["ok"]]
    rows = [{"D": r["D"], "N": r["N"], "seed": r["seed"], **r["cycles"]}
            for r in results]
    if spec.fmt == "json":
        _emit(spec, _json_text([{k: r[k] for k in ("D", "N", "seed", "ok", "cycles")}
                                for r in results]))
    else:
        _emit(spec, _csv_text(SIM_COLUMNS, rows))
    if bad:
        for r in bad:
            print(f"MISMATCH D={r['D']} N={r['N']}: fabric result differs "
                  f"from the exact integer product", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _model_rows(spec: RunSpec) -> list[dict]:
    rows = []
    for design in spec.designs:
        models.check_design(design)
        clock = spec.clock_overrides.get(design, models.design_clock_mhz(design))
        for d in spec.d_values:
            for n in spec.n_values:
                pb = models.gemv_latency(design, d, n, ccb_mode=spec.ccb_mode)
                rows.append({
                    "design": design, "D": d, "N": n, "k": pb.k, "P": pb.p,
                    "load": pb.load, "multiply": pb.multiply,
                    "inblock": pb.inblock, "array": pb.array,
                    "total_cycles": pb.total_cycles,
                    "clock_mhz": clock,
                    "time_us": round(models.execution_time_us(pb.total_cycles,
                                                              clock), 6),
                    "estimate": pb.estimate,
                })
    return rows


def cmd_model(spec: RunSpec) -> int:
    rows = _model_rows(spec)
    if any(r["estimate"] for r in rows):
        print("note: imagine-slice4 rows are analytical estimates with no "
              "simulator backing", file=sys.stderr)
    if spec.fmt == "json":
        _emit(spec, _json_text(rows))
    else:
        _emit(spec, _csv_text(MODEL_COLUMNS, rows))
    return EXIT_OK


def _ratio_lines(spec: RunSpec) -> list[str]:
    base = spec.clock_overrides.get("imagine", SYSTEM_CLOCKS_MHZ["imagine"])
    lines = ["relative system clocks (imagine / design):"]
    for name, clk in SYSTEM_CLOCKS_MHZ.items():
        clk = spec.clock_overrides.get(name, clk)
        lines.append(f"  imagine {base:.0f} MHz / {name} {clk:.0f} MHz "
                     f"= {base / clk:.2f}x")
    return lines


def cmd_compare(spec: RunSpec) -> int:
    rows = _model_rows(spec)
    ratio_lines = _ratio_lines(spec)
    if spec.fmt == "json":
        payload = {
            "rows": rows,
            "clock_ratios": {name: round(
                spec.clock_overrides.get("imagine", SYSTEM_CLOCKS_MHZ["imagine"])
                / spec.clock_overrides.get(name, clk), 2)
                for name, clk in SYSTEM_CLOCKS_MHZ.items()},
        }
        _emit(spec, _json_text(payload))
    else:
        _emit(spec, _csv_text(MODEL_COLUMNS, rows))
        report = "\n".join(ratio_lines) + "\n"
        if spec.out:
            sys.stdout.write(report)
        else:
            sys.stderr.write(report)
    if spec.assert_checks:
        _assert_ordering(spec, rows)
    return EXIT_OK


def _assert_ordering(spec: RunSpec, rows: list[dict]) -> None:
    """Where present, binary-hopping must beat ccb-comefa, which must beat
    spar2-binary, on modeled execution time at every common (D, N)."""
    times = {(r["design"], r["D"], r["N"]): r["time_us"] for r in rows}
    order = [models.BINARY_HOPPING, models.CCB_COMEFA, models.SPAR2_BINARY]
    for d in spec.d_values:
        for n in spec.n_values:
            chain = [times.get((des, d, n)) for des in order]
            present = [(des, t) for des, t in zip(order, chain) if t is not None]
            for (da, ta), (db, tb) in zip(present, present[1:]):
                if not ta < tb:
                    raise VerificationFailure(
                        f"ordering violated at D={d} N={n}: {da} {ta} us "
                        f"is not faster than {db} {tb} us")


def cmd_fit(spec: RunSpec) -> int:
    reports = []
    for design in spec.designs:
        models.check_design(design)
        if design == models.BINARY_HOPPING:
            tasks = [(p, spec.seed) for p in spec.fit_p]
            points = _pool_map(_fit_sim_point, tasks)
            source = "simulation"
        else:
            points = models.fit_points(design, spec.fit_p,
                                       ccb_mode=spec.ccb_mode)
            source = "formula"
        result = goldfit.fit(points, n_bits=32)
        report = goldfit.fit_report(design, result)
        report["source"] = source
        reports.append(report)
    if spec.fmt == "csv":
        cols = ["design", "N", "a", "b", "c", "residual_rms",
                "addition_label", "movement_label", "source"]
        _emit(spec, _csv_text(cols, reports))
    else:
        _emit(spec, _json_text(reports))
    if spec.assert_checks:
        for report in reports:
            check = FIT_BRACKETS.get(report["design"])
            if check and not check(report):
                raise VerificationFailure(
                    f"fit for {report['design']} left its bracket: "
                    f"a={report['a']} b={report['b']} c={report['c']}")
    return EXIT_OK


def cmd_verify(spec: RunSpec) -> int:
    cfg, _ = _load_spec_config(spec)
    results = _pool_map(_simulate_point, _sweep_tasks(spec, cfg))
    lines = []
    failures = []
    for r in results:
        pb = models.gemv_latency(models.BINARY_HOPPING, r["D"], r["N"], k=16)
        want = {"load": pb.load, "multiply": pb.multiply,
                "inblock": pb.inblock, "array": pb.array,
                "shiftout": pb.shiftout, "controller": pb.controller,
                "total": pb.full_total}
        got = r["cycles"]
        if got == want and r["ok"]:
            lines.append(f"OK D={r['D']} N={r['N']} total={got['total']}")
        else:
            failures.append((r, want))
            lines.append(f"FAIL D={r['D']} N={r['N']} simulated={got} "
                         f"modeled={want} exact={'yes' if r['ok'] else 'NO'}")
    _emit(spec, "\n".join(lines) + "\n")
    if failures:
        raise VerificationFailure(
            f"{len(failures)} of {len(results)} points diverged from the model")
    return EXIT_OK


def cmd_scale(spec: RunSpec) -> int:
    _, extra = _load_spec_config(spec)
    devices = list(DEVICE_TABLE.values()) + list(extra.values())
    if spec.device:
        dev = device_lookup(spec.device, extra)
        step = max(1, dev.bram36_count // max(1, spec.samples - 1))
        counts = list(range(0, dev.bram36_count + 1, step))
        if counts[-1] != dev.bram36_count:
            counts.append(dev.bram36_count)
        curve = models.ideal_scaling(counts, dev.bram_fmax_mhz)
        rows = [{"bram36": b, "pes": p, "tops": round(t, 6)}
                for b, p, t in curve]
        if spec.fmt == "json":
            _emit(spec, _json_text({"device": dev.ident, "curve": rows}))
        else:
            _emit(spec, _csv_text(["bram36", "pes", "tops"], rows))
        return EXIT_OK
    rows = [{
        "ident": dev.ident, "alias": dev.alias, "family": dev.family,
        "bram36_count": dev.bram36_count,
        "lut_to_bram_ratio": dev.lut_to_bram_ratio,
        "max_pes": max_pes(dev), "max_pes_label": kilo_pes(dev),
    } for dev in devices]
    if spec.fmt == "json":
        _emit(spec, _json_text(rows))
    else:
        _emit(spec, _csv_text(["ident", "alias", "family", "bram36_count",
                               "lut_to_bram_ratio", "max_pes",
                               "max_pes_label"], rows))
    return EXIT_OK


DISPATCH = {
    "simulate": cmd_simulate,
    "model": cmd_model,
    "compare": cmd_compare,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "scale": cmd_scale,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        spec = spec_from_args(args)
        return DISPATCH[spec.command](spec)
    except AccumulatorOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except PimgoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
