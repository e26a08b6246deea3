"""Experiment drivers: each returns a :class:`Table` of plain rows.

The CLI writes these as CSV / text / x-y data and the report renders them
as figures.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .config import MachineConfig, config_from_dict
from .layout import MappingScheme, map_layout
from .orchestrator import STANDARD_VARIANTS, ScheduleVariant, stream_counts
from .planner import calibrate_utilization, gpu_kernel_count, plan, workload_batch
from .timing import (CSV_COLUMNS, TimingReport, bw_multiplier, gpu_bytes, gpu_time,
                     pim_command_bytes, pim_time_from_counts)

CALIBRATION_TARGET = 1.07          # pim-base best collaborative speedup
PLAN_SIZES = tuple(1 << b for b in range(13, 31))
TILE_SIZES = tuple(1 << b for b in range(5, 14))


@dataclass
class Table:
    name: str
    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)
    # (x column, y column, series column or None) used for x-y data and plots
    xy: tuple = ()

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def full_batch(cfg: MachineConfig) -> int:
    """Batch that fills every lane of every unit exactly once."""
    return cfg.units_total * cfg.lanes


def tile_report(cfg: MachineConfig, n: int, batch: int, variant: ScheduleVariant,
                scheme: MappingScheme = MappingScheme.STRIDED) -> TimingReport:
    """A whole batched FFT of size ``n`` on PIM vs the GPU doing the same work."""
    layout = map_layout(cfg, scheme, n, batch)
    counts = stream_counts(cfg, scheme, n, variant)
    pim_ns = pim_time_from_counts(counts, layout.rounds, cfg)
    k = gpu_kernel_count(n, cfg)
    gpu_ns = gpu_time(n, batch, k, cfg)
    b_gpu = gpu_bytes(n, batch, k)
    b_pim = pim_command_bytes(counts, layout.units_used, layout.rounds, cfg)
    r = layout.rounds
    return TimingReport(n, batch, variant.value, scheme.value,
                        counts["Madd"] * r, counts["MaddSub"] * r, counts["Mov"] * r,
                        counts["Shift"] * r, counts.row_switches * r,
                        pim_ns, gpu_ns, gpu_ns / pim_ns if pim_ns else 0.0,
                        b_gpu, b_pim, b_gpu / b_pim if b_pim else 0.0, 1.0)


def _report_table(name: str, reports: list[TimingReport], **meta) -> Table:
    return Table(name, CSV_COLUMNS, [[getattr(r, c) for c in CSV_COLUMNS] for r in reports],
                 meta, ("size", "speedup", "variant"))


def _map(fn, args: list, jobs: int) -> list:
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star, [(fn, a) for a in args]))


def _star(item):
    fn, a = item
    return fn(*a)


# -- tile-level experiments ---------------------------------------------------

def model_tiles(cfg: MachineConfig, sizes, variants, scheme=MappingScheme.STRIDED,
                batch: int | None = None, jobs: int = 1, name: str = "model") -> Table:
    batch = batch or full_batch(cfg)
    args = [(cfg, n, batch, v, scheme) for n in sizes for v in variants]
    return _report_table(name, _map(tile_report, args, jobs), batch=batch)


def pim_base_vs_gpu(cfg: MachineConfig, sizes=tuple(1 << b for b in range(5, 19)),
                    jobs: int = 1) -> Table:
    t = model_tiles(cfg, sizes, [ScheduleVariant.PIM_BASE], jobs=jobs, name="pim_base_vs_gpu")
    sp = t.column("speedup")
    t.meta["mean_slowdown"] = 1.0 - sum(sp) / len(sp)
    return t


def tile_speedups(cfg: MachineConfig, sizes=TILE_SIZES, jobs: int = 1) -> Table:
    return model_tiles(cfg, sizes, STANDARD_VARIANTS, jobs=jobs, name="tile_speedups")


def mapping_comparison(cfg: MachineConfig, sizes=TILE_SIZES,
                       variant=ScheduleVariant.PIM_BASE) -> Table:
    rows = []
    for n in sizes:
        for scheme in MappingScheme:
            r = tile_report(cfg, n, full_batch(cfg), variant, scheme)
            cols = r.madd + r.maddsub + r.mov + r.shift
            rows.append([n, scheme.value, r.pim_ns, r.shift, r.shift / cols])
    return Table("strided_vs_baseline",
                 ("size", "mapping", "pim_ns", "shift", "shift_share"), rows,
                 {"variant": variant.value}, ("size", "pim_ns", "mapping"))


def command_breakdown(cfg: MachineConfig, sizes=TILE_SIZES,
                      variant=ScheduleVariant.PIM_BASE) -> Table:
    """Share of PIM time per command category."""
    rows = []
    per = cfg.pim_op_period_ns
    for n in sizes:
        r = tile_report(cfg, n, full_batch(cfg), variant)
        parts = {"compute": (r.madd + r.maddsub) * per, "mov": r.mov * per,
                 "shift": r.shift * per, "row_switch": r.row_switches * cfg.row_switch_ns}
        total = sum(parts.values())
        compute_cmds = r.madd + r.maddsub
        rows.append([n] + [parts[k] / total for k in parts]
                    + [r.madd / compute_cmds if compute_cmds else 0.0,
                       r.madd / (compute_cmds + r.mov)])
    return Table("time_breakdown",
                 ("size", "compute_share", "mov_share", "shift_share", "row_switch_share",
                  "madd_of_compute", "madd_of_compute_and_mov"),
                 rows, {"variant": variant.value}, ("size", "compute_share", None))


def multiplier_table(cfg: MachineConfig) -> Table:
    rows = []
    for banks in (16, 32, 64, 128):
        for units in (banks // 2, banks):
            c = cfg.replace(banks_per_pseudo_channel=banks, pim_units_per_pseudo_channel=units)
            counts = stream_counts(c, MappingScheme.STRIDED, 1 << 10, ScheduleVariant.PIM_BASE)
            rows.append([banks, units, bw_multiplier(c), bw_multiplier(c, counts)])
    return Table("bw_multiplier",
                 ("banks_per_pseudo_channel", "units_per_pseudo_channel", "peak", "workload_2p10"),
                 rows, {}, ("banks_per_pseudo_channel", "peak", "units_per_pseudo_channel"))


# -- collaborative plans ----------------------------------------------------------

def calibrated(cfg: MachineConfig, target: float = CALIBRATION_TARGET,
               sizes=PLAN_SIZES) -> MachineConfig:
    u = calibrate_utilization(cfg, target, list(sizes))
    return cfg.replace(gpu_utilization=round(u, 6))


def _plan_row(cfg, n, v, batch):
    p = plan(n, cfg, v, batch or workload_batch(n, cfg))
    return [getattr(p.report, c) for c in CSV_COLUMNS] + [p.tile or 0, p.gpu_only_ns]


# the timing column contract, then the chosen tile (0 = GPU-only) and GPU-only time
PLAN_COLUMNS = CSV_COLUMNS + ("tile", "gpu_only_ns")


def plan_sweep(cfg: MachineConfig, sizes=PLAN_SIZES, variants=STANDARD_VARIANTS,
               batch: int | None = None, jobs: int = 1, name: str = "plans") -> Table:
    rows = _map(_plan_row, [(cfg, n, v, batch) for n in sizes for v in variants], jobs)
    return Table(name, PLAN_COLUMNS, rows, {"gpu_utilization": cfg.gpu_utilization},
                 ("size", "speedup", "variant"))


def plan_summary(table: Table) -> dict:
    """Per-variant headline numbers over the collaborative plans of a sweep."""
    out = {}
    for v in dict.fromkeys(table.column("variant")):
        rows = [dict(zip(table.columns, r)) for r in table.rows if r[2] == v]
        colab = [r for r in rows if r["tile"]]
        out[v] = {
            "max_speedup": max(r["speedup"] for r in rows),
            "min_colab_speedup": min((r["speedup"] for r in colab), default=None),
            "dm_min": min((r["dm_savings"] for r in colab), default=None),
            "dm_max": max((r["dm_savings"] for r in colab), default=None),
            "dm_mean": (sum(r["dm_savings"] for r in colab) / len(colab)) if colab else None,
            "offload_mean": (sum(r["offload_fraction"] for r in colab) / len(colab)) if colab else None,
            "collaborative_sizes": len(colab),
        }
    return out


# -- sensitivity ------------------------------------------------------------------

def sensitivity(cfg: MachineConfig, key: str, values: list, sizes=TILE_SIZES,
                variants=(ScheduleVariant.PIM_BASE,), scheme=MappingScheme.STRIDED,
                batch: int | None = None, jobs: int = 1) -> Table:
    """Tile reports with one config key varied at a fixed batch (two base-config rounds)."""
    batch = batch or 2 * full_batch(cfg)
    rows = []
    for value in values:
        c = config_from_dict({key: value}, cfg)
        t = model_tiles(c, sizes, variants, scheme, batch, jobs)
        rows += [[key, getattr(c, key)] + r for r in t.rows]
    return Table(f"sweep_{key}", ("key", "value") + CSV_COLUMNS, rows, {"batch": batch},
                 ("size", "pim_ns", "value"))


def sensitivity_ratios(cfg: MachineConfig, key: str, base, changed, sizes=TILE_SIZES,
                       variant=ScheduleVariant.PIM_BASE) -> dict:
    """Per-tile time ratio t(base)/t(changed) at a fixed batch of two base-config rounds."""
    batch = 2 * full_batch(cfg)
    c0 = config_from_dict({key: base}, cfg)
    c1 = config_from_dict({key: changed}, cfg)
    return {n: tile_report(c0, n, batch, variant).pim_ns / tile_report(c1, n, batch, variant).pim_ns
            for n in sizes}


def sensitivity_figure(cfg: MachineConfig, sizes=TILE_SIZES) -> Table:
    rows = []
    for key, base, changed in (("pim_units_per_pseudo_channel", 8, 16),
                               ("row_bytes", 1024, 2048), ("rf_registers", 16, 32)):
        for n, ratio in sensitivity_ratios(cfg, key, base, changed, sizes).items():
            rows.append([key, n, ratio])
    return Table("sensitivity", ("key", "size", "speedup"), rows, {},
                 ("size", "speedup", "key"))
