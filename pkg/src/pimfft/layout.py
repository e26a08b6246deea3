"""Placement of batched FFT data onto PIM bank pairs.

Strided mapping gives every FFT its own SIMD lane: element ``i`` sits in
word ``i mod words_per_row`` of row ``i div words_per_row`` and the batch
fills lanes, then units, then pseudo channels (stacks are just further
pseudo channels), then serial rounds.  Baseline mapping stores each FFT
contiguously across lanes, ``lanes`` FFT slots per unit so both schemes
hold the same amount of data per unit.  Real parts live in the even bank,
imaginary parts in the odd bank of the same pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import MachineConfig
from .fft import bit_reverse_indices, is_power_of_two
from .machine import EVEN, ODD, MachineState

STRIDED_HARD_CAP = 1 << 18
BASELINE_HARD_CAP = 1 << 21


class MappingScheme(enum.Enum):
    STRIDED = "strided"
    BASELINE = "baseline"


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class PimAddress:
    pseudo_channel: int
    unit: int
    parity: int
    row: int
    word: int
    lane: int


def capacity(cfg: MachineConfig, scheme: MappingScheme) -> int:
    """Largest FFT a single bank pair can hold under ``scheme``."""
    per_lane = cfg.rows_per_bank * cfg.words_per_row
    if scheme is MappingScheme.STRIDED:
        return min(STRIDED_HARD_CAP, per_lane)
    return min(BASELINE_HARD_CAP, per_lane * cfg.lanes)


@dataclass(frozen=True)
class MappingLayout:
    scheme: MappingScheme
    n: int
    batch: int
    cfg: MachineConfig

    @property
    def lanes(self) -> int:
        return self.cfg.lanes

    @property
    def ffts_per_round(self) -> int:
        return self.cfg.units_total * self.cfg.lanes

    @property
    def rounds(self) -> int:
        return math.ceil(self.batch / self.ffts_per_round)

    @property
    def units_used(self) -> int:
        """Flattened units touched in one round."""
        return math.ceil(min(self.batch, self.ffts_per_round) / self.lanes)

    @property
    def words_per_fft(self) -> int:
        if self.scheme is MappingScheme.STRIDED:
            return self.n
        return self.n // self.lanes

    @property
    def rows_per_round(self) -> int:
        # both schemes hold lanes*words_per_fft = n words per unit per round
        return math.ceil(self.n / self.cfg.words_per_row)

    @property
    def rows_used(self) -> int:
        return self.rounds * self.rows_per_round

    def _slot(self, j: int) -> tuple[int, int, int]:
        rnd, jj = divmod(j, self.ffts_per_round)
        flat_unit, sub = divmod(jj, self.lanes)
        return rnd, flat_unit, sub

    def address_of(self, j: int, i: int, component: str) -> PimAddress:
        if not 0 <= j < self.batch:
            raise IndexError(f"FFT index {j} outside batch {self.batch}")
        if not 0 <= i < self.n:
            raise IndexError(f"element index {i} outside size {self.n}")
        if component not in ("re", "im"):
            raise ValueError("component must be 're' or 'im'")
        parity = EVEN if component == "re" else ODD
        rnd, flat_unit, sub = self._slot(j)
        words = self.cfg.words_per_row
        if self.scheme is MappingScheme.STRIDED:
            lane, g = sub, i
        else:
            lane, g = i % self.lanes, sub * self.words_per_fft + i // self.lanes
        pch, unit = divmod(flat_unit, self.cfg.pim_units_per_pseudo_channel)
        return PimAddress(pch, unit, parity, rnd * self.rows_per_round + g // words, g % words, lane)

    # vectorised placement -------------------------------------------------
    def _index_arrays(self):
        j = np.arange(self.batch)[:, None]
        i = np.arange(self.n)[None, :]
        rnd, jj = np.divmod(j, self.ffts_per_round)
        flat, sub = np.divmod(jj, self.lanes)
        words = self.cfg.words_per_row
        if self.scheme is MappingScheme.STRIDED:
            lane = np.broadcast_to(sub, (self.batch, self.n))
            g = np.broadcast_to(i, (self.batch, self.n))
        else:
            lane = np.broadcast_to(i % self.lanes, (self.batch, self.n))
            g = sub * self.words_per_fft + i // self.lanes
        row = rnd * self.rows_per_round + g // words
        return (np.broadcast_to(flat, (self.batch, self.n)), row, g % words, lane)

    def load(self, data) -> MachineState:
        data = np.asarray(data)
        if data.shape != (self.batch, self.n):
            raise ValueError(f"data shape {data.shape} does not match layout ({self.batch}, {self.n})")
        state = MachineState(self.cfg, self.units_used, self.rows_used)
        idx = self._index_arrays()
        state.mem[EVEN][idx] = data.real.astype(np.float32)
        state.mem[ODD][idx] = data.imag.astype(np.float32)
        return state

    def readback(self, state: MachineState, *, bit_reversed: bool = False) -> np.ndarray:
        """Gather the batch back out; ``bit_reversed`` undoes a bit-reversed element order."""
        idx = self._index_arrays()
        out = state.mem[EVEN][idx].astype(np.complex64)
        out.imag = state.mem[ODD][idx]
        if bit_reversed:
            out = out[:, bit_reverse_indices(self.n)]
        return out


def map_layout(cfg: MachineConfig, scheme: MappingScheme, n: int, batch: int) -> MappingLayout:
    if not is_power_of_two(n) or n < 2:
        raise ValueError(f"FFT size {n} must be a power of two >= 2")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    cap = capacity(cfg, scheme)
    if n > cap:
        per_lane = cfg.rows_per_bank * cfg.words_per_row
        if scheme is MappingScheme.STRIDED:
            why = ("strided hard cap 2^18" if cap == STRIDED_HARD_CAP
                   else f"rows_per_bank*words_per_row = {per_lane}")
        else:
            why = ("bank-pair cap 2^21" if cap == BASELINE_HARD_CAP
                   else f"rows_per_bank*words_per_row*lanes = {per_lane * cfg.lanes}")
        raise CapacityError(f"FFT size {n} exceeds {scheme.value} capacity {cap} ({why})")
    if scheme is MappingScheme.BASELINE and n < cfg.lanes:
        raise CapacityError(f"baseline mapping needs n >= lanes ({cfg.lanes})")
    layout = MappingLayout(scheme, n, batch, cfg)
    if layout.rows_used > cfg.rows_per_bank:
        raise CapacityError(f"batch {batch} of size {n} needs {layout.rows_used} rows "
                            f"(rows_per_bank={cfg.rows_per_bank})")
    return layout
