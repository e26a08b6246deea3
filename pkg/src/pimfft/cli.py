"""Command-line front end: ``pimfft {simulate,model,plan,sweep,report}``.

Sizes accept ``32``, ``2^5``, comma lists, and exponent ranges ``5..10`` or
``2^5..2^10``.  Output goes to ``--out`` (stdout by default) as CSV, YAML text
or x-y plot data; ``report`` writes every figure's data and PNG into a
directory.  Exit status: 0 ok, 1 validation/capacity error, 2 oracle mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np
import yaml

from .config import ConfigError, MachineConfig, load_config
from .fft import dft_naive, is_power_of_two
from .layout import CapacityError, MappingScheme, map_layout
from .machine import execute, validate
from .orchestrator import STANDARD_VARIANTS, SchedulingError, ScheduleVariant, build_stream
from .planner import FunctionalLimitError, evaluate, plan, simulate_plan, workload_batch
from . import experiments as ex
from .timing import _fmt

DEFAULT_SEED = 0xF47
EXIT_OK, EXIT_INVALID, EXIT_MISMATCH = 0, 1, 2


class UsageError(ValueError):
    pass


# -- argument parsing -------------------------------------------------------------

def _one_size(tok: str) -> int:
    tok = tok.strip()
    n = 1 << int(tok[2:]) if tok.startswith("2^") else int(tok)
    if not is_power_of_two(n) or n < 2:
        raise UsageError(f"size {tok!r} is not a power of two >= 2")
    return n


def parse_sizes(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = (p.strip() for p in part.split(".."))
            lo = int(a[2:]) if a.startswith("2^") else int(a)
            hi = int(b[2:]) if b.startswith("2^") else int(b)
            if lo > hi:
                raise UsageError(f"empty size range {part!r}")
            out += [1 << e for e in range(lo, hi + 1)]
        else:
            out.append(_one_size(part))
    return out


def parse_variants(text: str) -> list[ScheduleVariant]:
    if text == "all":
        return list(STANDARD_VARIANTS)
    return [ScheduleVariant.parse(t.strip()) for t in text.split(",")]


def _load_cfg(args) -> MachineConfig:
    return load_config(args.config) if args.config else MachineConfig()


# -- output -------------------------------------------------------------------------

def _header(command: str, args, meta: dict) -> str:
    items = [f"seed={args.seed:#x}"] + [f"{k}={_fmt(v)}" for k, v in sorted(meta.items())]
    return f"# pimfft {command} " + " ".join(items)


def render_table(table: ex.Table, fmt: str, header: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(header + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()
    if fmt == "txt":
        doc = {"experiment": table.name, "meta": table.meta,
               "rows": [dict(zip(table.columns, r)) for r in table.rows]}
        return header + "\n" + yaml.safe_dump(_plain(doc), sort_keys=False)
    if fmt == "xy":
        from .plots import xy_series
        x, y, series = table.xy
        lines = [header, f"# x={x} y={y} series={series or '-'}"]
        for label, pts in xy_series(table).items():
            lines.append(f"# series {label}")
            lines += [f"{_fmt(a)} {_fmt(b)}" for a, b in pts]
            lines.append("")
        return "\n".join(lines)
    raise UsageError(f"unknown format {fmt!r}")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands ----------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_cfg(args)
    rng = np.random.default_rng(args.seed)
    scheme = MappingScheme(args.mapping)
    batch = args.batch or cfg.lanes
    rows, worst = [], 0.0
    for n in parse_sizes(args.size or "2^5"):
        for v in parse_variants(args.variant):
            x = (rng.standard_normal((batch, n)) + 1j * rng.standard_normal((batch, n)))
            x = x.astype(np.complex64)
            if args.tile:
                p = evaluate(n, batch, _one_size(args.tile), cfg, v)
                out = simulate_plan(p, x, cfg)
                mode = f"plan:{p.tile}"
            elif args.plan:
                p = plan(n, cfg, v, batch)
                out = simulate_plan(p, x, cfg)
                mode = f"plan:{p.tile or 0}"
            else:
                layout = map_layout(cfg, scheme, n, batch)
                stream = build_stream(layout, v)
                problems = validate(stream, cfg)
                if problems:
                    raise SchedulingError("; ".join(problems[:5]))
                out = layout.readback(execute(layout.load(x), stream), bit_reversed=True)
                mode = scheme.value
            ref = dft_naive(x)
            err = float(np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-30))
            worst = max(worst, err)
            rows.append([n, batch, v.value, mode, err, "pass" if err <= args.tolerance else "FAIL"])
    table = ex.Table("simulate", ("size", "batch", "variant", "mapping", "max_rel_err", "status"),
                     rows, {"tolerance": args.tolerance}, ("size", "max_rel_err", "variant"))
    _emit(render_table(table, args.format, _header("simulate", args, table.meta)), args.out)
    return EXIT_OK if worst <= args.tolerance else EXIT_MISMATCH


def cmd_model(args) -> int:
    cfg = _load_cfg(args)
    table = ex.model_tiles(cfg, parse_sizes(args.size or "5..13"), parse_variants(args.variant),
                           MappingScheme(args.mapping), args.batch, args.jobs)
    _emit(render_table(table, args.format, _header("model", args, table.meta)), args.out)
    return EXIT_OK


def _utilization(cfg: MachineConfig, args) -> MachineConfig:
    if args.utilization == "calibrate":
        return ex.calibrated(cfg)
    if args.utilization is not None:
        return cfg.replace(gpu_utilization=float(args.utilization))
    return cfg


def cmd_plan(args) -> int:
    cfg = _utilization(_load_cfg(args), args)
    sizes = parse_sizes(args.size or "13..30")
    variants = parse_variants(args.variant)
    if args.format == "txt":
        blocks = [_header("plan", args, {"gpu_utilization": cfg.gpu_utilization})]
        for n in sizes:
            for v in variants:
                p = plan(n, cfg, v, args.batch or workload_batch(n, cfg))
                blocks.append(p.to_text())
                blocks.append(p.to_yaml().rstrip())
        _emit("\n".join(blocks) + "\n", args.out)
        return EXIT_OK
    table = ex.plan_sweep(cfg, sizes, variants, args.batch, args.jobs)
    _emit(render_table(table, args.format, _header("plan", args, table.meta)), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_cfg(args)
    if not args.key or not args.values:
        raise UsageError("sweep needs --key and --values")
    values = [v.strip() for v in args.values.split(",")]
    table = ex.sensitivity(cfg, args.key, values, parse_sizes(args.size or "5..13"),
                           parse_variants(args.variant), MappingScheme(args.mapping),
                           args.batch, args.jobs)
    _emit(render_table(table, args.format, _header("sweep", args, table.meta)), args.out)
    return EXIT_OK


def report_tables(cfg: MachineConfig, jobs: int = 1) -> list[tuple[ex.Table, str]]:
    colab_cfg = ex.calibrated(cfg)
    plans = ex.plan_sweep(colab_cfg, jobs=jobs)
    base_only = ex.Table("colab_pim_base", plans.columns,
                         [r for r in plans.rows if r[2] == ScheduleVariant.PIM_BASE.value],
                         plans.meta, plans.xy)
    variants = ex.Table("colab_variants", plans.columns, plans.rows, plans.meta, plans.xy)
    movement = ex.Table("data_movement", plans.columns, plans.rows, plans.meta,
                        ("size", "dm_savings", "variant"))
    return [
        (ex.multiplier_table(cfg), "PIM/GPU bandwidth multiplier"),
        (ex.pim_base_vs_gpu(cfg, jobs=jobs), "pim-base tile vs GPU"),
        (ex.mapping_comparison(cfg), "strided vs baseline mapping (pim-base)"),
        (ex.command_breakdown(cfg), "PIM time breakdown (pim-base)"),
        (base_only, "collaborative pim-base speedup"),
        (ex.tile_speedups(cfg, jobs=jobs), "tile speedup per variant"),
        (variants, "collaborative speedup per variant"),
        (movement, "data-movement savings"),
        (ex.sensitivity_figure(cfg), "sensitivity: tile speedup from doubling"),
    ]


def cmd_report(args) -> int:
    from .plots import render
    cfg = _load_cfg(args)
    out = Path(args.out or "report")
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for table, title in report_tables(cfg, args.jobs):
        header = _header("report", args, table.meta)
        (out / f"{table.name}.csv").write_text(render_table(table, "csv", header))
        (out / f"{table.name}.xy").write_text(render_table(table, "xy", header))
        render(table, out / f"{table.name}.png", title)
        if table.name == "colab_variants":
            summary["collaborative"] = ex.plan_summary(table)
            summary["gpu_utilization"] = table.meta["gpu_utilization"]
        if table.name == "pim_base_vs_gpu":
            summary["pim_base_mean_slowdown"] = table.meta["mean_slowdown"]
    (out / "summary.yaml").write_text(yaml.safe_dump(_plain(summary), sort_keys=True))
    print(f"wrote report to {out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--size", help="size(s): 32, 2^5, 2^5,2^7 or exponent range 5..10")
    common.add_argument("--batch", type=int, default=None, help="FFTs per batch")
    common.add_argument("--variant", default="base",
                        help="base, sw, hw, swhw, fused, a comma list, or all")
    common.add_argument("--mapping", default="strided", choices=[s.value for s in MappingScheme])
    common.add_argument("--config", help="YAML file overriding MachineConfig fields")
    common.add_argument("--out", help="output file (directory for report)")
    common.add_argument("--format", default="csv", choices=["csv", "txt", "xy"])
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED,
                        help="random seed for test vectors (default 0xF47)")

    p = argparse.ArgumentParser(prog="pimfft", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", parents=[common], help="functional simulation with oracle check")
    s.add_argument("--check", action="store_true", help="compare against the DFT oracle (always on)")
    s.add_argument("--plan", action="store_true", help="run the planned GPU+PIM decomposition")
    s.add_argument("--tile", help="force a GPU+PIM split with this PIM tile size")
    s.add_argument("--tolerance", type=float, default=1e-4)
    sub.add_parser("model", parents=[common], help="tile timing model")
    pl = sub.add_parser("plan", parents=[common], help="collaborative decomposition plans")
    pl.add_argument("--utilization", help="GPU bandwidth utilization, or 'calibrate'")
    sw = sub.add_parser("sweep", parents=[common], help="vary one config key")
    sw.add_argument("--key")
    sw.add_argument("--values", help="comma-separated values")
    sub.add_parser("report", parents=[common], help="all figure data + PNGs into a directory")
    return p


COMMANDS = {"simulate": cmd_simulate, "model": cmd_model, "plan": cmd_plan,
            "sweep": cmd_sweep, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CapacityError, ConfigError, UsageError, SchedulingError,
            FunctionalLimitError, ValueError) as exc:
        print(f"pimfft {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
