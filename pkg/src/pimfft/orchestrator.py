"""Compile FFT tiles into PIM command streams.

Data stays in natural element order in memory.  The DIT input bit reversal
is folded into addressing: logical butterfly position ``a`` lives at
physical element ``rev(a)``, so step ``s`` pairs physical elements whose
index differs in bit ``L - s`` and the result comes out bit-reversed (read it
back with ``bit_reversed=True``).

Schedule shape (strided mapping):

* steps whose partners share a DRAM row are grouped ``k`` at a time into
  register-blocked passes: a block of ``2^k`` elements is read straight from
  the row buffers by its first step, kept in registers for the remaining
  ``k - 1`` steps and stored once with ``Mov``;
* steps whose partners sit in different rows stream row pairs: a group of
  ``x1`` words is loaded into registers, the partner row is opened and the
  butterflies read ``x2`` from its row buffer, ``y2`` is stored there, then
  the first row is reopened to store ``y1``.

Baseline mapping runs the same machinery on whole words for the steps whose
partners are in different words and a shift/compute/shift/merge sequence
for the in-word (cross-lane) steps.
"""

from __future__ import annotations

import enum
import heapq
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .config import MachineConfig
from .fft import (SQRT_HALF, TwiddleClass, bit_reverse_indices, classify,
                  log2i, twiddle, twiddle_census)
from .layout import MappingLayout, MappingScheme
from .machine import (EVEN, ODD, Butterfly, CommandCounts, CommandStream, Madd,
                      MaddSub, Mov, Register, RowBufWord, RowOpen, Shift,
                      from_trace, to_trace)

__all__ = [
    "ScheduleVariant", "ButterflySchedule", "SchedulingError",
    "schedule_butterfly", "build_stream", "build_stream_baseline_mapping",
    "stream_counts", "avg_compute_per_butterfly", "block_size",
    "to_trace", "from_trace",
]


class ScheduleVariant(enum.Enum):
    PIM_BASE = "base"
    SW_OPT = "sw"
    HW_OPT = "hw"
    SW_HW_OPT = "swhw"
    # hypothetical one-command butterfly, limit study only
    FUSED = "fused"

    @classmethod
    def parse(cls, text: str) -> "ScheduleVariant":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown variant {text!r}; choose from "
                             f"{[v.value for v in cls]}") from None

    @property
    def uses_maddsub(self) -> bool:
        return self in (ScheduleVariant.HW_OPT, ScheduleVariant.SW_HW_OPT)


STANDARD_VARIANTS = (ScheduleVariant.PIM_BASE, ScheduleVariant.SW_OPT,
                     ScheduleVariant.HW_OPT, ScheduleVariant.SW_HW_OPT)


class SchedulingError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# per-butterfly schedules
#
# Ops are symbolic tuples over the names x1r x1i x2r x2i (inputs), y1r y1i
# y2r y2i (outputs) and t0 t1 (temporaries):
#   ("madd", dst, a, sa, b, sb)          dst = sa*a + sb*b
#   ("maddsub", dadd, dsub, c, m, s)     dadd = c + s*m, dsub = c - s*m
#   ("bfly", dsts4, srcs4, wr, wi)       hypothetical fused butterfly

INPUTS = ("x1r", "x1i", "x2r", "x2i")
OUTPUTS = ("y1r", "y1i", "y2r", "y2i")
_KIND = {"madd": "Madd", "maddsub": "MaddSub", "bfly": "Butterfly"}


def _neg(s):
    if isinstance(s, tuple):
        return tuple(-v for v in s)
    return -s


def _split(w):
    """(wr, wi) as floats or per-lane tuples."""
    if isinstance(w, tuple):
        return tuple(float(v.real) for v in w), tuple(float(v.imag) for v in w)
    return float(w.real), float(w.imag)


@dataclass(frozen=True)
class ButterflySchedule:
    twiddle_class: TwiddleClass
    variant: ScheduleVariant
    ops: tuple

    @property
    def kinds(self) -> Counter:
        return Counter(_KIND[op[0]] for op in self.ops)

    @property
    def compute_commands(self) -> int:
        return len(self.ops)

    def evaluate(self, x1: complex, x2: complex) -> tuple[complex, complex]:
        """Run the template on one lane in 32-bit arithmetic."""
        import numpy as np
        f = np.float32
        env = {"x1r": f(x1.real), "x1i": f(x1.imag), "x2r": f(x2.real), "x2i": f(x2.imag)}
        for op in self.ops:
            if op[0] == "madd":
                _, d, a, sa, b, sb = op
                env[d] = f(sa) * env[a] + f(sb) * env[b]
            elif op[0] == "maddsub":
                _, da, ds, c, m, s = op
                prod = f(s) * env[m]
                env[da], env[ds] = env[c] + prod, env[c] - prod
            else:
                _, dsts, srcs, wr, wi = op
                a, b, cr, ci = (env[n] for n in srcs)
                tr = f(wr) * cr - f(wi) * ci
                ti = f(wr) * ci + f(wi) * cr
                for n, v in zip(dsts, (a + tr, b + ti, a - tr, b - ti)):
                    env[n] = v
        return (complex(env["y1r"], env["y1i"]), complex(env["y2r"], env["y2i"]))


def _pim_base_ops(wr, wi):
    return (("madd", "y1r", "x1r", 1.0, "x2r", wr),
            ("madd", "y1r", "y1r", 1.0, "x2i", _neg(wi)),
            ("madd", "y1i", "x1i", 1.0, "x2i", wr),
            ("madd", "y1i", "y1i", 1.0, "x2r", wi),
            ("madd", "y2r", "x1r", 2.0, "y1r", -1.0),
            ("madd", "y2i", "x1i", 2.0, "y1i", -1.0))


def _hw_ops(wr, wi):
    # t = w*x2 formed once, then each component is one add/sub pair
    return (("madd", "t0", "x2r", wr, "x2i", _neg(wi)),
            ("madd", "t1", "x2i", wr, "x2r", wi),
            ("maddsub", "y1r", "y2r", "x1r", "t0", 1.0),
            ("maddsub", "y1i", "y2i", "x1i", "t1", 1.0))


def _sqrt_half_ops(wr, wi):
    # t0 = x2r + x2i, t1 = x2r - x2i; w*x2 is then +-c*t0 / +-c*t1
    prep = ("maddsub", "t0", "t1", "x2r", "x2i", 1.0)
    if (wr > 0) != (wi > 0):          # w = wr*(1 - j): w*x2 = (wr*t0, -wr*t1)
        return (prep, ("maddsub", "y1r", "y2r", "x1r", "t0", wr),
                ("maddsub", "y1i", "y2i", "x1i", "t1", -wr))
    # w = wr*(1 + j): w*x2 = (wr*t1, wr*t0)
    return (prep, ("maddsub", "y1r", "y2r", "x1r", "t1", wr),
            ("maddsub", "y1i", "y2i", "x1i", "t0", wr))


_ADD_ONE = (("madd", "y1r", "x1r", 1.0, "x2r", 1.0),
            ("madd", "y1i", "x1i", 1.0, "x2i", 1.0),
            ("madd", "y2r", "x1r", 2.0, "y1r", -1.0),
            ("madd", "y2i", "x1i", 2.0, "y1i", -1.0))
_ADD_MINUS_J = (("madd", "y1r", "x1r", 1.0, "x2i", 1.0),
                ("madd", "y1i", "x1i", 1.0, "x2r", -1.0),
                ("madd", "y2r", "x1r", 2.0, "y1r", -1.0),
                ("madd", "y2i", "x1i", 2.0, "y1i", -1.0))
_MS_ONE = (("maddsub", "y1r", "y2r", "x1r", "x2r", 1.0),
           ("maddsub", "y1i", "y2i", "x1i", "x2i", 1.0))
_MS_MINUS_J = (("maddsub", "y1r", "y2r", "x1r", "x2i", 1.0),
               ("maddsub", "y1i", "y2i", "x1i", "x2r", -1.0))


def _check_class(cls: TwiddleClass, w) -> None:
    values = w if isinstance(w, tuple) else (w,)
    if cls is TwiddleClass.GENERIC:
        return  # the generic schedules are correct for any twiddle
    if isinstance(w, tuple) and len(set(values)) != 1:
        raise ValueError(f"per-lane twiddles must be uniform for class {cls.value}")
    if classify(values[0]) is not cls:
        raise ValueError(f"twiddle {values[0]} is not of class {cls.value}")


def schedule_butterfly(variant: ScheduleVariant, cls: TwiddleClass, w) -> ButterflySchedule:
    """Command template computing (x1 + w*x2, x1 - w*x2).

    ``w`` is a complex scalar or a per-lane tuple of complex values.
    """
    _check_class(cls, w)
    if isinstance(w, tuple) and cls is not TwiddleClass.GENERIC:
        w = w[0]
    wr, wi = _split(w)
    V, C = ScheduleVariant, TwiddleClass
    special = {C.ONE: (_ADD_ONE, _MS_ONE), C.MINUS_J: (_ADD_MINUS_J, _MS_MINUS_J)}
    if variant is V.PIM_BASE:
        ops = _pim_base_ops(wr, wi)
    elif variant is V.SW_OPT:
        ops = special[cls][0] if cls in special else _pim_base_ops(wr, wi)
    elif variant is V.HW_OPT:
        ops = _hw_ops(wr, wi)
    elif variant is V.SW_HW_OPT:
        if cls in special:
            ops = special[cls][1]
        elif cls is C.SQRT_HALF:
            ops = _sqrt_half_ops(wr, wi)
        else:
            ops = _hw_ops(wr, wi)
    elif variant is V.FUSED:
        ops = (("bfly", OUTPUTS, INPUTS, wr, wi),)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return ButterflySchedule(cls, variant, ops)


_UNIT = {TwiddleClass.ONE: 1 + 0j, TwiddleClass.MINUS_J: -1j,
         TwiddleClass.SQRT_HALF: complex(SQRT_HALF, -SQRT_HALF),
         TwiddleClass.GENERIC: complex(0.6, -0.8)}


@lru_cache(maxsize=None)
def _class_kinds(variant: ScheduleVariant, cls: TwiddleClass) -> tuple:
    return tuple(sorted(schedule_butterfly(variant, cls, _UNIT[cls]).kinds.items()))


def avg_compute_per_butterfly(n: int, variant: ScheduleVariant) -> Fraction:
    """Census-weighted mean compute commands per butterfly for an ``n``-point FFT."""
    census = twiddle_census(n)
    total = sum(census.values())
    cmds = sum(cnt * sum(c for _, c in _class_kinds(variant, cls))
               for cls, cnt in census.items())
    return Fraction(cmds, total)


def _class_of_index(span: int, t: int) -> TwiddleClass:
    """Class of twiddle(span, t) for t < span/2 without evaluating it."""
    if t == 0:
        return TwiddleClass.ONE
    if 4 * t == span:
        return TwiddleClass.MINUS_J
    if 8 * t == span or 8 * t == 3 * span:
        return TwiddleClass.SQRT_HALF
    return TwiddleClass.GENERIC


# ---------------------------------------------------------------------------
# stream builder

def block_size(cfg: MachineConfig, variant: ScheduleVariant = ScheduleVariant.PIM_BASE) -> int:
    """Elements per register block: largest power of two with 2E + scratch <= registers.

    Every real schedule needs two scratch registers while a block is resident;
    the fused butterfly overwrites its own sources and needs none.
    """
    scratch = 0 if variant is ScheduleVariant.FUSED else 2
    e = 2
    while 2 * (2 * e) + scratch <= cfg.rf_registers:
        e *= 2
    if 2 * e + scratch > cfg.rf_registers:
        raise SchedulingError(f"rf_registers={cfg.rf_registers} cannot hold one butterfly block")
    return e


def stream_group(cfg: MachineConfig) -> int:
    """x1 words held in registers while streaming a row pair."""
    return max(1, (cfg.rf_registers - 2) // 2)


class _Builder:
    """Tracks open rows and registers while emitting (or just counting) commands."""

    def __init__(self, cfg: MachineConfig, variant: ScheduleVariant, emit: bool):
        self.cfg = cfg
        self.variant = variant
        self.emit = emit
        self.cmds: list = []
        self.kinds: Counter = Counter()
        self.switches = 0
        self.open = [None, None]
        self.free = list(range(cfg.rf_registers))
        heapq.heapify(self.free)

    # -- resources
    def alloc(self) -> int:
        if not self.free:
            raise SchedulingError(f"register pressure exceeds rf_registers={self.cfg.rf_registers}")
        return heapq.heappop(self.free)

    def release(self, r: int) -> None:
        heapq.heappush(self.free, r)

    def _put(self, kind: str, make) -> None:
        self.kinds[kind] += 1
        if self.emit:
            self.cmds.append(make())

    def open_row(self, row: int) -> None:
        for parity in (EVEN, ODD):
            if self.open[parity] != row:
                self.open[parity] = row
                self.switches += 1
                self._put("RowOpen", lambda p=parity: RowOpen(p, row))

    # -- data movement
    def load(self, word: int):
        if not self.emit:
            self.kinds["Mov"] += 2
            return None
        rr, ri = self.alloc(), self.alloc()
        self.cmds.append(Mov(False, Register(rr), RowBufWord(EVEN, word)))
        self.cmds.append(Mov(False, Register(ri), RowBufWord(ODD, word)))
        self.kinds["Mov"] += 2
        return ("reg", rr, ri)

    def store(self, word: int, loc) -> None:
        self.kinds["Mov"] += 2
        if not self.emit:
            return
        _, rr, ri = loc
        self.cmds.append(Mov(True, Register(rr), RowBufWord(EVEN, word)))
        self.cmds.append(Mov(True, Register(ri), RowBufWord(ODD, word)))
        self.release(rr)
        self.release(ri)

    # -- compute
    def butterfly(self, loc1, loc2, cls: TwiddleClass, w):
        if not self.emit:
            for kind, cnt in _class_kinds(self.variant, cls):
                self.kinds[kind] += cnt
            return None, None
        sched = schedule_butterfly(self.variant, cls, w)
        reg_of: dict[str, int] = {}
        operand = {}
        for (name_r, name_i), loc in ((("x1r", "x1i"), loc1), (("x2r", "x2i"), loc2)):
            if loc[0] == "rb":
                operand[name_r] = RowBufWord(EVEN, loc[1])
                operand[name_i] = RowBufWord(ODD, loc[1])
            else:
                reg_of[name_r], reg_of[name_i] = loc[1], loc[2]
        last_read = {}
        for i, op in enumerate(sched.ops):
            for name in _sources(op):
                last_read[name] = i
        for name in list(reg_of):
            if name not in last_read:
                self.release(reg_of.pop(name))
        for i, op in enumerate(sched.ops):
            srcs, dsts = _sources(op), _dests(op)
            src_ops = {n: (Register(reg_of[n]) if n in reg_of else operand[n]) for n in srcs}
            for n in set(srcs):
                if (n in reg_of and last_read[n] == i and n not in OUTPUTS
                        and n not in dsts):
                    self.release(reg_of.pop(n))
            for d in dsts:
                if d not in reg_of:
                    reg_of[d] = self.alloc()
            dst = {d: Register(reg_of[d]) for d in dsts}
            if op[0] == "madd":
                _, d, a, sa, b, sb = op
                self.cmds.append(Madd(dst[d], src_ops[a], sa, src_ops[b], sb))
            elif op[0] == "maddsub":
                _, da, ds, c, m, s = op
                self.cmds.append(MaddSub(dst[da], dst[ds], src_ops[c], src_ops[m], s))
            else:
                _, dn, sn, wr, wi = op
                self.cmds.append(Butterfly(tuple(dst[d] for d in dn),
                                           tuple(src_ops[s] for s in sn), wr, wi))
            self.kinds[_KIND[op[0]]] += 1
        leftover = set(reg_of) - set(OUTPUTS)
        if leftover:  # pragma: no cover - schedules always consume temporaries
            raise SchedulingError(f"temporaries {sorted(leftover)} left live")
        return ("reg", reg_of["y1r"], reg_of["y1i"]), ("reg", reg_of["y2r"], reg_of["y2i"])

    def shift(self, reg: int, lanes: int) -> None:
        self._put("Shift", lambda: Shift(Register(reg), lanes))

    def merge(self, keep: int, other: int, mask: tuple) -> None:
        inv = tuple(1.0 - m for m in mask)
        self._put("Madd", lambda: Madd(Register(keep), Register(keep), mask, Register(other), inv))


def _sources(op) -> tuple:
    if op[0] == "madd":
        return (op[2], op[4])
    if op[0] == "maddsub":
        return (op[3], op[4])
    return tuple(op[2])


def _dests(op) -> tuple:
    if op[0] == "madd":
        return (op[1],)
    if op[0] == "maddsub":
        return (op[1], op[2])
    return tuple(op[1])


@dataclass(frozen=True)
class _Step:
    bit: int           # element-index bit separating partners
    span: int          # twiddle denominator 2^s
    tindex: object     # element (bit clear) -> twiddle numerator


def _resolve(b: _Builder, step: _Step, e: int):
    t = step.tindex(e)
    cls = _class_of_index(step.span, t)
    return cls, (twiddle(step.span, t) if b.emit else None)


def _rows_from(b: _Builder, nrows: int) -> list[int]:
    start = b.open[EVEN] if b.open[EVEN] is not None and b.open[EVEN] < nrows else 0
    return list(range(start, nrows)) + list(range(start))


def _in_row_pass(b: _Builder, steps: list[_Step], n: int) -> None:
    words = b.cfg.words_per_row
    mask = 0
    for st in steps:
        mask |= 1 << st.bit
    offsets = [0]
    for st in steps:
        offsets = offsets + [o | (1 << st.bit) for o in offsets]
    offsets.sort()
    nrows = -(-n // words)
    for row in _rows_from(b, nrows):
        b.open_row(row)
        for base in range(row * words, min((row + 1) * words, n)):
            if base & mask:
                continue
            elems = [base + o for o in offsets]
            loc = {e: ("rb", e % words) for e in elems}
            for st in steps:
                bit = 1 << st.bit
                for e in elems:
                    if e & bit:
                        continue
                    cls, w = _resolve(b, st, e)
                    loc[e], loc[e | bit] = b.butterfly(loc[e], loc[e | bit], cls, w)
            for e in elems:
                b.store(e % words, loc[e])


def _cross_row_pass(b: _Builder, step: _Step, n: int) -> None:
    words = b.cfg.words_per_row
    row_stride = 1 << (step.bit - log2i(words))
    group = stream_group(b.cfg)
    nrows = n // words
    for ra in range(nrows):
        if ra & row_stride:
            continue
        rb = ra + row_stride
        for g0 in range(0, words, group):
            chunk = range(g0, min(g0 + group, words))
            b.open_row(ra)
            x1 = {w: b.load(w) for w in chunk}
            b.open_row(rb)
            y1 = {}
            for w in chunk:
                cls, tw = _resolve(b, step, ra * words + w)
                y1[w], y2 = b.butterfly(x1[w], ("rb", w), cls, tw)
                b.store(w, y2)
            b.open_row(ra)
            for w in chunk:
                b.store(w, y1[w])


def _run_steps(b: _Builder, steps: list[_Step], n: int) -> None:
    wbits = log2i(b.cfg.words_per_row)
    k = log2i(block_size(b.cfg, b.variant))
    i = 0
    while i < len(steps):
        if steps[i].bit >= wbits:
            _cross_row_pass(b, steps[i], n)
            i += 1
            continue
        j = i
        while j < len(steps) and j - i < k and steps[j].bit < wbits:
            j += 1
        _in_row_pass(b, steps[i:j], n)
        i = j


def _check_variant(cfg: MachineConfig, variant: ScheduleVariant) -> None:
    if variant.uses_maddsub and not cfg.maddsub_support:
        raise ValueError(f"variant {variant.value} needs MaddSub but maddsub_support is off")


def _strided_steps(n: int) -> list[_Step]:
    bits = log2i(n)
    rev = bit_reverse_indices(n).tolist()
    return [_Step(bits - s, 1 << s, lambda e, m=(1 << (s - 1)) - 1: rev[e] & m)
            for s in range(1, bits + 1)]


def _finish(b: _Builder, layout: MappingLayout) -> CommandStream:
    return CommandStream(b.cmds, 0, layout.units_used, layout.rounds, layout.rows_per_round)


def build_stream(layout: MappingLayout, variant: ScheduleVariant) -> CommandStream:
    """Command stream computing the FFT of every lane's data (output bit-reversed)."""
    if layout.scheme is MappingScheme.BASELINE:
        return build_stream_baseline_mapping(layout, variant)
    _check_variant(layout.cfg, variant)
    b = _Builder(layout.cfg, variant, emit=True)
    _run_steps(b, _strided_steps(layout.n), layout.n)
    return _finish(b, layout)


# -- baseline mapping -------------------------------------------------------

def _baseline(b: _Builder, n: int) -> None:
    cfg = b.cfg
    lanes, words = cfg.lanes, cfg.words_per_row
    bits, lbits = log2i(n), log2i(lanes)
    wpf = n // lanes
    rev = bit_reverse_indices(n).tolist()
    # steps whose partners are in different words: whole-word butterflies with a
    # lane-independent twiddle; the unit holds ``lanes`` FFT slots of wpf words
    word_steps = [_Step(bits - s - lbits, 1 << s,
                        lambda g, m=(1 << (s - 1)) - 1: rev[(g % wpf) * lanes] & m)
                  for s in range(1, bits - lbits + 1)]
    _run_steps(b, word_steps, n)
    nrows = -(-n // words)
    for s in range(bits - lbits + 1, bits + 1):
        d = 1 << (bits - s)
        span, m = 1 << s, (1 << (s - 1)) - 1
        mask = tuple(0.0 if l & d else 1.0 for l in range(lanes))
        for row in _rows_from(b, nrows):
            b.open_row(row)
            for g in range(row * words, min((row + 1) * words, n)):
                base = (g % wpf) * lanes
                active = [twiddle(span, rev[base + l] & m) for l in range(lanes) if not l & d]
                if len(set(active)) == 1:
                    w, cls = active[0], classify(active[0])
                else:
                    w = tuple(twiddle(span, rev[base + l] & m) if not l & d else 0j
                              for l in range(lanes))
                    cls = TwiddleClass.GENERIC
                _cross_lane(b, g % words, d, cls, w, mask)


def _cross_lane(b: _Builder, word: int, d: int, cls, w, mask) -> None:
    partner = b.load(word)
    if b.emit:
        b.shift(partner[1], -d)
        b.shift(partner[2], -d)
    else:
        b.kinds["Shift"] += 2
    y1, y2 = b.butterfly(("rb", word), partner, cls, w)
    if not b.emit:
        b.kinds["Shift"] += 2
        b.kinds["Madd"] += 2
        b.kinds["Mov"] += 2
        return
    b.shift(y2[1], d)
    b.shift(y2[2], d)
    b.merge(y1[1], y2[1], mask)
    b.merge(y1[2], y2[2], mask)
    b.release(y2[1])
    b.release(y2[2])
    b.store(word, y1)


def build_stream_baseline_mapping(layout: MappingLayout, variant: ScheduleVariant) -> CommandStream:
    if layout.scheme is not MappingScheme.BASELINE:
        raise ValueError("build_stream_baseline_mapping needs a baseline layout")
    _check_variant(layout.cfg, variant)
    b = _Builder(layout.cfg, variant, emit=True)
    _baseline(b, layout.n)
    return _finish(b, layout)


# -- counting without materialising the stream ------------------------------

@lru_cache(maxsize=4096)
def _counts_cached(key: tuple, scheme: MappingScheme, n: int, variant: ScheduleVariant):
    words_row_bytes, rf, word_bits, lane_bits = key
    cfg = MachineConfig(row_bytes=words_row_bytes, rf_registers=rf,
                        word_bits=word_bits, lane_bits=lane_bits)
    b = _Builder(cfg, variant, emit=False)
    if scheme is MappingScheme.STRIDED:
        _run_steps(b, _strided_steps(n), n)
    else:
        _baseline(b, n)
    return tuple(sorted(b.kinds.items())), b.switches


def stream_counts(cfg: MachineConfig, scheme: MappingScheme, n: int,
                  variant: ScheduleVariant) -> CommandCounts:
    """Per-round command counts of the tile stream, without building it.

    Equal to ``count_commands(build_stream(...))`` (checked in the tests) but
    cheap enough for tiles up to the strided capacity.
    """
    _check_variant(cfg, variant)
    key = (cfg.row_bytes, cfg.rf_registers, cfg.word_bits, cfg.lane_bits)
    kinds, switches = _counts_cached(key, scheme, n, variant)
    return CommandCounts(Counter(dict(kinds)), switches)
