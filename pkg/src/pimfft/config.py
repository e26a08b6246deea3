"""Machine configuration for the modeled HBM-PIM system.

Defaults describe a 4-stack HBM3 part with one PIM unit per bank pair::

    stacks: 4
    pseudo_channels_per_stack: 32
    banks_per_pseudo_channel: 16
    pim_units_per_pseudo_channel: 8
    rows_per_bank: 16384
    row_bytes: 1024
    ...

A config file is a YAML mapping of any subset of the field names below.
Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MachineConfig:
    # geometry
    stacks: int = 4
    pseudo_channels_per_stack: int = 32
    banks_per_pseudo_channel: int = 16
    pim_units_per_pseudo_channel: int = 8
    rows_per_bank: int = 1 << 14
    row_bytes: int = 1024
    word_bits: int = 256
    lane_bits: int = 32
    rf_registers: int = 16
    maddsub_support: bool = True

    # DRAM timing, ns
    tRP: float = 15.0
    tCCDL: float = 3.33
    tRAS: float = 33.0
    tRCD: float = 15.0

    # GPU side
    gpu_bw_per_stack: float = 614.4       # GB/s == bytes/ns
    pim_issue_factor: float = 2.0
    gpu_utilization: float = 1.0
    lds_max_elements: int = 1 << 12

    # planner
    tile_min_elements: int = 1 << 5
    tile_max_elements: int = 1 << 13
    max_fft_elements: int = 1 << 30

    # bytes the GPU sends per command, beyond the command encoding itself
    cmd_scalar_bytes: dict = field(default_factory=lambda: {
        "Madd": 8, "MaddSub": 4, "Mov": 0, "RowOpen": 0, "Shift": 0,
        "Butterfly": 8,
    })
    cmd_header_bytes: int = 4

    def __post_init__(self):
        problems = []
        if self.banks_per_pseudo_channel % 2:
            problems.append("banks_per_pseudo_channel must be even")
        if not 1 <= self.pim_units_per_pseudo_channel <= self.banks_per_pseudo_channel:
            problems.append("pim_units_per_pseudo_channel must be in 1..banks_per_pseudo_channel")
        if self.word_bits % self.lane_bits:
            problems.append("word_bits must be a multiple of lane_bits")
        if (self.row_bytes * 8) % self.word_bits:
            problems.append("row_bytes*8 must be a multiple of word_bits")
        if not 0.0 < self.gpu_utilization <= 1.0:
            problems.append("gpu_utilization must be in (0, 1]")
        for name in ("stacks", "pseudo_channels_per_stack", "rows_per_bank",
                     "rf_registers", "lds_max_elements"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive")
        if self.tile_min_elements > self.tile_max_elements:
            problems.append("tile_min_elements exceeds tile_max_elements")
        if problems:
            raise ConfigError("; ".join(problems))

    # derived geometry
    @property
    def lanes(self) -> int:
        return self.word_bits // self.lane_bits

    @property
    def word_bytes(self) -> int:
        return self.word_bits // 8

    @property
    def words_per_row(self) -> int:
        return self.row_bytes * 8 // self.word_bits

    @property
    def pseudo_channels(self) -> int:
        return self.stacks * self.pseudo_channels_per_stack

    @property
    def units_total(self) -> int:
        return self.pseudo_channels * self.pim_units_per_pseudo_channel

    @property
    def gpu_bw(self) -> float:
        """Effective GPU bandwidth in bytes/ns."""
        return self.stacks * self.gpu_bw_per_stack * self.gpu_utilization

    @property
    def pim_op_period_ns(self) -> float:
        per_pch = self.gpu_bw_per_stack / self.pseudo_channels_per_stack
        return self.pim_issue_factor * self.word_bytes / per_pch

    @property
    def row_switch_ns(self) -> float:
        return self.tRP + self.tRCD

    def replace(self, **changes) -> "MachineConfig":
        unknown = set(changes) - set(field_names())
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}; valid keys: {field_names()}")
        return dataclasses.replace(self, **changes)


def field_names() -> list[str]:
    return [f.name for f in fields(MachineConfig)]


def _coerce(name: str, value):
    default = MachineConfig.__dataclass_fields__[name]
    kind = type(getattr(MachineConfig(), name))
    if kind is bool:
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if kind is int:
        if isinstance(value, str):
            value = value.strip()
            if value.startswith("2^"):
                return 1 << int(value[2:])
            return int(value, 0)
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} expects an integer, got {value}")
        return int(value)
    if kind is float:
        return float(value)
    if kind is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{name} expects a mapping")
        merged = dict(default.default_factory())
        merged.update({str(k): int(v) for k, v in value.items()})
        return merged
    return value


def config_from_dict(data: dict, base: MachineConfig | None = None) -> MachineConfig:
    base = base or MachineConfig()
    unknown = set(data) - set(field_names())
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}; valid keys: {field_names()}")
    return dataclasses.replace(base, **{k: _coerce(k, v) for k, v in data.items()})


def load_config(path: str | Path) -> MachineConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key/value mapping")
    return config_from_dict(data)


def dump_config(cfg: MachineConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(cfg), sort_keys=False)
