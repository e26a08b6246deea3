"""Performance models: bandwidth-bound GPU time, command-level PIM time,
bandwidth multipliers and data-movement accounting."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .config import MachineConfig
from .machine import (Butterfly, CommandCounts, CommandStream, Madd, MaddSub,
                      RowOpen, count_commands)

BYTES_PER_ELEMENT = 8      # complex sample, 2 x 32-bit
GPU_PASSES = 2             # each kernel reads and writes its working set once

CSV_COLUMNS = ("size", "batch", "variant", "mapping", "madd", "maddsub", "mov",
               "shift", "row_switches", "pim_ns", "gpu_ns", "speedup",
               "bytes_gpu_only", "bytes_plan", "dm_savings", "offload_fraction")


def gpu_time(n: int, batch: int, kernels: int, cfg: MachineConfig) -> float:
    """Nanoseconds for ``kernels`` bandwidth-bound passes over ``batch`` FFTs of size ``n``."""
    if kernels < 0:
        raise ValueError("kernels must be >= 0")
    return gpu_bytes(n, batch, kernels) / cfg.gpu_bw


def gpu_bytes(n: int, batch: int, kernels: int) -> int:
    return kernels * GPU_PASSES * BYTES_PER_ELEMENT * n * batch


def pim_time_from_counts(counts: CommandCounts, rounds: int, cfg: MachineConfig) -> float:
    per_round = (counts.column_commands * cfg.pim_op_period_ns
                 + counts.row_switches * cfg.row_switch_ns)
    return rounds * per_round


def pim_time(stream: CommandStream, cfg: MachineConfig) -> float:
    """Wall time of ``stream``: every pseudo channel runs it in parallel, rounds run serially."""
    return pim_time_from_counts(count_commands(stream), stream.rounds, cfg)


def tras_violations(stream: CommandStream, cfg: MachineConfig) -> list[int]:
    """Indices of RowOpen commands that close a row open for less than tRAS."""
    now = 0.0
    opened = [None, None]     # (row, activation time) per parity
    bad = []
    for i, cmd in enumerate(stream.commands):
        if type(cmd) is RowOpen:
            cur = opened[cmd.parity]
            if cur is not None and cur[0] == cmd.row:
                continue
            if cur is not None and now - cur[1] < cfg.tRAS:
                bad.append(i)
            now += cfg.tRP if cur is not None else 0.0
            opened[cmd.parity] = (cmd.row, now)
            now += cfg.tRCD
        else:
            now += cfg.pim_op_period_ns
    return bad


def bw_multiplier(cfg: MachineConfig, counts: CommandCounts | None = None) -> float:
    """PIM vs GPU bandwidth ratio within one pseudo channel.

    Peak is ``units / issue_factor``; with ``counts`` the peak is divided by
    ``1 + row-switch time / column time`` of that workload.
    """
    peak = cfg.pim_units_per_pseudo_channel / cfg.pim_issue_factor
    if counts is None:
        return peak
    column = counts.column_commands * cfg.pim_op_period_ns
    if column == 0:
        return peak
    return peak / (1.0 + counts.row_switches * cfg.row_switch_ns / column)


def _scalar_bytes(cmd, cfg: MachineConfig) -> int:
    base = cfg.cmd_scalar_bytes.get(type(cmd).__name__, 0)
    # per-lane scalar vectors carry one value per lane instead of one
    scalars = ()
    if type(cmd) is Madd:
        scalars = (cmd.sa, cmd.sb)
    elif type(cmd) is MaddSub:
        scalars = (cmd.s,)
    elif type(cmd) is Butterfly:
        scalars = (cmd.wr, cmd.wi)
    extra = sum((len(s) - 1) * 4 for s in scalars if isinstance(s, tuple))
    return base + extra + cfg.cmd_header_bytes


def command_bytes(counts: CommandCounts, cfg: MachineConfig) -> int:
    """Bytes the GPU sends to one pseudo channel for one pass of a stream."""
    return sum(cnt * (cfg.cmd_scalar_bytes.get(kind, 0) + cfg.cmd_header_bytes)
               for kind, cnt in counts.kinds.items())


def stream_command_bytes(stream: CommandStream, cfg: MachineConfig) -> int:
    """Exact per-pass payload of a materialised stream (counts per-lane scalars)."""
    return sum(_scalar_bytes(c, cfg) for c in stream.commands)


def pseudo_channels_used(units_used: int, cfg: MachineConfig) -> int:
    return math.ceil(units_used / cfg.pim_units_per_pseudo_channel)


def pim_command_bytes(counts: CommandCounts, units_used: int, rounds: int,
                      cfg: MachineConfig) -> int:
    """Command traffic of a PIM stage: one copy per pseudo channel per round."""
    return command_bytes(counts, cfg) * pseudo_channels_used(units_used, cfg) * rounds


@dataclass
class TimingReport:
    size: int
    batch: int
    variant: str
    mapping: str
    madd: int
    maddsub: int
    mov: int
    shift: int
    row_switches: int
    pim_ns: float
    gpu_ns: float
    speedup: float
    bytes_gpu_only: int
    bytes_plan: int
    dm_savings: float
    offload_fraction: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and v < 0:
                raise ValueError(f"{f.name} must be nonnegative, got {v}")

    @property
    def total_ns(self) -> float:
        return self.gpu_ns + self.pim_ns

    def row(self) -> list:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]

    def as_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}" if abs(v) < 1e4 else f"{v:.1f}"
    return str(v)
