"""Collaborative GPU+PIM decomposition.

An FFT of size ``N = M1 * M2`` runs its first ``M1``-point stage (batch
``M2``, possibly itself split into several GPU kernels) on the GPU and the
final ``M2``-point stage (the PIM tile, batch ``M1``) on PIM.  Inter-stage
twiddles are applied by the GPU stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .config import MachineConfig
from .fft import fft as fft_ref, inter_stage_twiddles, is_power_of_two, log2i
from .layout import CapacityError, MappingScheme, capacity, map_layout
from .machine import execute
from .orchestrator import ScheduleVariant, build_stream, stream_counts
from .timing import (TimingReport, gpu_bytes, gpu_time, pim_command_bytes,
                     pim_time_from_counts)

FUNCTIONAL_LIMIT = 1 << 20


class FunctionalLimitError(ValueError):
    pass


def gpu_kernel_count(n: int, cfg: MachineConfig) -> int:
    """Fewest GPU kernels whose per-kernel FFT size fits the scratchpad."""
    if not is_power_of_two(n):
        raise ValueError(f"{n} is not a power of two")
    if n == 1:
        return 0
    return math.ceil(log2i(n) / math.log2(cfg.lds_max_elements))


def gpu_factors(n: int, cfg: MachineConfig) -> list[int]:
    """Split ``n`` into ``gpu_kernel_count(n)`` near-equal power-of-two factors."""
    k = gpu_kernel_count(n, cfg)
    if k == 0:
        return []
    bits = log2i(n)
    return [1 << (bits // k + (1 if i < bits % k else 0)) for i in range(k)]


def tile_range(cfg: MachineConfig) -> list[int]:
    lo, hi = log2i(cfg.tile_min_elements), log2i(cfg.tile_max_elements)
    return [1 << b for b in range(lo, hi + 1)]


def enumerate_tiles(n: int, cfg: MachineConfig,
                    variant: ScheduleVariant | None = None) -> list[tuple[int, int]]:
    """(M1, M2) splits that never raise the total kernel count."""
    total = gpu_kernel_count(n, cfg)
    cap = capacity(cfg, MappingScheme.STRIDED)
    out = []
    for m2 in tile_range(cfg):
        if m2 >= n or m2 > cap:
            continue
        m1 = n // m2
        if gpu_kernel_count(m1, cfg) + 1 <= total:
            out.append((m1, m2))
    return out


@dataclass(frozen=True)
class Stage:
    executor: str        # "GPU" or "PIM"
    fft_size: int
    batch: int


@dataclass
class DecompositionPlan:
    n: int
    batch: int
    variant: ScheduleVariant
    stages: list
    tile: int | None
    report: TimingReport
    gpu_only_ns: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def collaborative(self) -> bool:
        return self.tile is not None

    @property
    def total_ns(self) -> float:
        return self.report.total_ns

    def to_record(self) -> dict:
        r = self.report
        return {
            "size": self.n, "batch": self.batch, "variant": self.variant.value,
            "tile": self.tile,
            "stages": [{"executor": s.executor, "fft_size": s.fft_size, "batch": s.batch}
                       for s in self.stages],
            "predicted": {"total_ns": r.total_ns, "gpu_ns": r.gpu_ns, "pim_ns": r.pim_ns,
                          "gpu_only_ns": self.gpu_only_ns, "speedup": r.speedup,
                          "bytes_gpu_only": r.bytes_gpu_only, "bytes_plan": r.bytes_plan,
                          "dm_savings": r.dm_savings,
                          "offload_fraction": r.offload_fraction},
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_record(), sort_keys=False)

    def to_text(self) -> str:
        r = self.report
        lines = [f"FFT 2^{log2i(self.n)} x batch {self.batch}, variant {self.variant.value}"]
        for i, s in enumerate(self.stages, 1):
            lines.append(f"  stage {i}: {s.executor:3s} FFT 2^{log2i(s.fft_size)} x batch {s.batch}")
        lines.append(f"  predicted {r.total_ns:.1f} ns (GPU {r.gpu_ns:.1f}, PIM {r.pim_ns:.1f}); "
                     f"GPU-only {self.gpu_only_ns:.1f} ns; speedup {r.speedup:.3f}")
        lines.append(f"  data movement {r.bytes_plan} B vs {r.bytes_gpu_only} B "
                     f"(savings {r.dm_savings:.3f}); offload fraction {r.offload_fraction:.3f}")
        return "\n".join(lines)


def _gpu_stages(m: int, batch: int, cfg: MachineConfig) -> list[Stage]:
    return [Stage("GPU", f, batch * (m // f)) for f in gpu_factors(m, cfg)]


def evaluate(n: int, batch: int, m2: int | None, cfg: MachineConfig,
             variant: ScheduleVariant) -> DecompositionPlan:
    """Predicted cost of the GPU-only plan (``m2=None``) or of tile ``m2``."""
    k_all = gpu_kernel_count(n, cfg)
    gpu_only_ns = gpu_time(n, batch, k_all, cfg)
    bytes_gpu_only = gpu_bytes(n, batch, k_all)
    if m2 is None:
        report = TimingReport(n, batch, variant.value, "gpu", 0, 0, 0, 0, 0, 0.0,
                              gpu_only_ns, 1.0, bytes_gpu_only, bytes_gpu_only, 1.0, 0.0)
        return DecompositionPlan(n, batch, variant, _gpu_stages(n, batch, cfg), None,
                                 report, gpu_only_ns)
    m1 = n // m2
    k1 = gpu_kernel_count(m1, cfg)
    layout = map_layout(cfg, MappingScheme.STRIDED, m2, m1 * batch)
    counts = stream_counts(cfg, MappingScheme.STRIDED, m2, variant)
    pim_ns = pim_time_from_counts(counts, layout.rounds, cfg)
    gpu_ns = gpu_time(n, batch, k1, cfg)
    bytes_plan = gpu_bytes(n, batch, k1) + pim_command_bytes(
        counts, layout.units_used, layout.rounds, cfg)
    rounds = layout.rounds
    report = TimingReport(
        n, batch, variant.value, "strided",
        counts["Madd"] * rounds, counts["MaddSub"] * rounds, counts["Mov"] * rounds,
        counts["Shift"] * rounds, counts.row_switches * rounds,
        pim_ns, gpu_ns, gpu_only_ns / (gpu_ns + pim_ns),
        bytes_gpu_only, bytes_plan, bytes_gpu_only / bytes_plan,
        log2i(m2) / log2i(n))
    stages = _gpu_stages(m1, batch * m2, cfg) + [Stage("PIM", m2, batch * m1)]
    return DecompositionPlan(n, batch, variant, stages, m2, report, gpu_only_ns)


def candidates(n: int, cfg: MachineConfig, variant: ScheduleVariant,
               batch: int = 1) -> list[DecompositionPlan]:
    out = [evaluate(n, batch, None, cfg, variant)]
    for _, m2 in enumerate_tiles(n, cfg, variant):
        try:
            out.append(evaluate(n, batch, m2, cfg, variant))
        except CapacityError:
            continue
    return out


def plan(n: int, cfg: MachineConfig, variant: ScheduleVariant,
         batch: int = 1) -> DecompositionPlan:
    """Fastest plan; ties go to larger data-movement savings, then the smaller tile."""
    if n > cfg.max_fft_elements:
        raise CapacityError(f"FFT size {n} exceeds max_fft_elements={cfg.max_fft_elements}")
    return min(candidates(n, cfg, variant, batch),
               key=lambda p: (p.total_ns, -p.report.dm_savings, p.tile or 0))


def workload_batch(n: int, cfg: MachineConfig) -> int:
    """Batch that fills the modeled memory: ``max_fft_elements / n`` FFTs."""
    return max(1, cfg.max_fft_elements // n)


def simulate_plan(p: DecompositionPlan, x, cfg: MachineConfig) -> np.ndarray:
    """Run a plan functionally; GPU stages via the reference FFT, the tile on the PIM model."""
    x = np.asarray(x, dtype=np.complex128)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    batch, n = x.shape
    if n != p.n:
        raise ValueError(f"input size {n} does not match plan size {p.n}")
    if n * batch > FUNCTIONAL_LIMIT:
        raise FunctionalLimitError(
            f"{n * batch} elements exceed the functional limit {FUNCTIONAL_LIMIT}; use timing-only mode")
    if p.tile is None:
        out = fft_ref(x)
    else:
        m2 = p.tile
        m1 = n // m2
        grid = x.reshape(batch, m1, m2)                    # [b, c, r], index = m2*c + r
        cols = np.swapaxes(grid, -1, -2)                   # [b, r, c]
        stage1 = fft_ref(cols).astype(np.complex128) * inter_stage_twiddles(m1, m2)
        tiles = np.swapaxes(stage1, -1, -2).reshape(batch * m1, m2).astype(np.complex64)
        layout = map_layout(cfg, MappingScheme.STRIDED, m2, batch * m1)
        state = execute(layout.load(tiles), build_stream(layout, p.variant))
        res = layout.readback(state, bit_reversed=True).reshape(batch, m1, m2)   # [b, k1, k2]
        out = np.swapaxes(res, -1, -2).reshape(batch, n)   # index k1 + m1*k2
    return out[0] if squeeze else out


def calibrate_utilization(cfg: MachineConfig, target_speedup: float,
                          sizes: list[int], variant: ScheduleVariant = ScheduleVariant.PIM_BASE,
                          tol: float = 1e-9) -> float:
    """gpu_utilization at which ``variant``'s best planned speedup over ``sizes`` equals the target."""
    def best(u: float) -> float:
        c = cfg.replace(gpu_utilization=u)
        return max(plan(n, c, variant, workload_batch(n, c)).report.speedup for n in sizes)

    lo, hi = 1e-3, 1.0
    if best(hi) >= target_speedup:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if best(mid) >= target_speedup:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return lo
