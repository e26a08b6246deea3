"""PIM command vocabulary and a functional executor.

Every PIM unit owns a bank pair (even/odd parity), one open row per bank and
a small register file of ``lanes``-wide 32-bit words.  A command stream is
broadcast to a contiguous range of units, all of which execute it in
lockstep on their own data.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .config import MachineConfig

EVEN, ODD = 0, 1


@dataclass(frozen=True, slots=True)
class RowBufWord:
    parity: int
    word: int


@dataclass(frozen=True, slots=True)
class Register:
    idx: int


Operand = Union[RowBufWord, Register]
# a scalar immediate is a float broadcast to every lane, or a per-lane tuple
Scalar = Union[float, tuple]


@dataclass(frozen=True, slots=True)
class RowOpen:
    parity: int
    row: int


@dataclass(frozen=True, slots=True)
class Madd:
    """dst = sa*a + sb*b, lane-wise."""
    dst: Register
    a: Operand
    sa: Scalar
    b: Operand
    sb: Scalar


@dataclass(frozen=True, slots=True)
class MaddSub:
    """dst_add = c + s*m and dst_sub = c - s*m in one command."""
    dst_add: Register
    dst_sub: Register
    c: Operand
    m: Operand
    s: Scalar


@dataclass(frozen=True, slots=True)
class Mov:
    to_rowbuf: bool
    reg: Register
    word: RowBufWord


@dataclass(frozen=True, slots=True)
class Shift:
    """Rotate a register's lanes: lane l receives old lane (l - lanes) mod width."""
    reg: Register
    lanes: int


@dataclass(frozen=True, slots=True)
class Butterfly:
    """Hypothetical single-command butterfly used only by the limit study.

    ``src`` is (x1r, x1i, x2r, x2i), ``dst`` is (y1r, y1i, y2r, y2i); all
    sources are read before any destination is written.
    """
    dst: tuple
    src: tuple
    wr: float
    wi: float


PimCommand = Union[RowOpen, Madd, MaddSub, Mov, Shift, Butterfly]
COMMAND_KINDS = ("RowOpen", "Madd", "MaddSub", "Mov", "Shift", "Butterfly")
COLUMN_KINDS = ("Madd", "MaddSub", "Mov", "Shift", "Butterfly")
COMPUTE_KINDS = ("Madd", "MaddSub", "Butterfly")


@dataclass
class CommandStream:
    """Commands broadcast to units ``[unit_start, unit_start + unit_count)``.

    ``rounds`` repeats the stream with every row shifted by ``round_rows``.
    """
    commands: list = field(default_factory=list)
    unit_start: int = 0
    unit_count: int = 1
    rounds: int = 1
    round_rows: int = 0

    def __len__(self):
        return len(self.commands)

    def __iter__(self):
        return iter(self.commands)

    def concat(self, other: "CommandStream") -> "CommandStream":
        return CommandStream(self.commands + other.commands, self.unit_start,
                             self.unit_count, self.rounds, self.round_rows)


class ExecutionFault(RuntimeError):
    def __init__(self, index: int, message: str):
        super().__init__(f"command {index}: {message}")
        self.index = index


def _scalar_ok(s, lanes: int) -> bool:
    if isinstance(s, tuple):
        return len(s) == lanes
    return isinstance(s, (int, float, np.floating))


def validate(stream: CommandStream, cfg: MachineConfig) -> list[str]:
    """Return every statically detectable violation; empty means valid."""
    errors: list[str] = []
    nreg, lanes = cfg.rf_registers, cfg.lanes
    words = cfg.words_per_row
    max_row = cfg.rows_per_bank - stream.round_rows * (stream.rounds - 1)
    is_open = [False, False]

    def reg(i, r, what):
        if not isinstance(r, Register):
            errors.append(f"{i}: {what} must be a register")
        elif not 0 <= r.idx < nreg:
            errors.append(f"{i}: {what} register r{r.idx} out of bounds (rf_registers={nreg})")

    def src(i, op, what):
        if isinstance(op, Register):
            reg(i, op, what)
        elif isinstance(op, RowBufWord):
            if op.parity not in (EVEN, ODD):
                errors.append(f"{i}: {what} bad parity {op.parity}")
            elif not is_open[op.parity]:
                errors.append(f"{i}: {what} reads bank parity {op.parity} with no open row")
            if not 0 <= op.word < words:
                errors.append(f"{i}: {what} word {op.word} out of bounds (words_per_row={words})")
        else:
            errors.append(f"{i}: {what} is not an operand")

    if stream.unit_count < 1 or stream.unit_start < 0 \
            or stream.unit_start + stream.unit_count > cfg.units_total:
        errors.append("replication range outside the machine")

    for i, cmd in enumerate(stream.commands):
        kind = type(cmd)
        if kind is RowOpen:
            if cmd.parity not in (EVEN, ODD):
                errors.append(f"{i}: RowOpen bad parity {cmd.parity}")
                continue
            if not 0 <= cmd.row < max_row:
                errors.append(f"{i}: RowOpen row {cmd.row} out of bounds")
            is_open[cmd.parity] = True
        elif kind is Madd:
            reg(i, cmd.dst, "Madd dst")
            src(i, cmd.a, "Madd srcA")
            src(i, cmd.b, "Madd srcB")
            if not (_scalar_ok(cmd.sa, lanes) and _scalar_ok(cmd.sb, lanes)):
                errors.append(f"{i}: Madd scalar malformed")
        elif kind is MaddSub:
            reg(i, cmd.dst_add, "MaddSub dst_add")
            reg(i, cmd.dst_sub, "MaddSub dst_sub")
            if cmd.dst_add == cmd.dst_sub:
                errors.append(f"{i}: MaddSub destinations coincide")
            src(i, cmd.c, "MaddSub srcC")
            src(i, cmd.m, "MaddSub srcM")
            if not _scalar_ok(cmd.s, lanes):
                errors.append(f"{i}: MaddSub scalar malformed")
        elif kind is Mov:
            reg(i, cmd.reg, "Mov reg")
            src(i, cmd.word, "Mov word")
        elif kind is Shift:
            reg(i, cmd.reg, "Shift reg")
        elif kind is Butterfly:
            for r in cmd.dst:
                reg(i, r, "Butterfly dst")
            if len(set(cmd.dst)) != 4:
                errors.append(f"{i}: Butterfly destinations must be distinct")
            for op in cmd.src:
                src(i, op, "Butterfly src")
        else:
            errors.append(f"{i}: unknown command {cmd!r}")
    return errors


class MachineState:
    """Memory image of ``units`` bank pairs plus their register files.

    ``mem[parity]`` has shape (units, rows, words, lanes); rows are allocated
    lazily up to what the layout needs.
    """

    def __init__(self, cfg: MachineConfig, units: int, rows: int):
        if rows > cfg.rows_per_bank:
            raise ValueError(f"{rows} rows exceed rows_per_bank={cfg.rows_per_bank}")
        self.cfg = cfg
        shape = (units, rows, cfg.words_per_row, cfg.lanes)
        self.mem = [np.zeros(shape, np.float32), np.zeros(shape, np.float32)]
        self.regs = np.zeros((units, cfg.rf_registers, cfg.lanes), np.float32)
        self.open_row = [-1, -1]

    @property
    def units(self) -> int:
        return self.regs.shape[0]

    def copy(self) -> "MachineState":
        other = MachineState.__new__(MachineState)
        other.cfg = self.cfg
        other.mem = [m.copy() for m in self.mem]
        other.regs = self.regs.copy()
        other.open_row = list(self.open_row)
        return other

    def equals(self, other: "MachineState") -> bool:
        return (all(np.array_equal(a, b) for a, b in zip(self.mem, other.mem))
                and np.array_equal(self.regs, other.regs))


def _f32(s):
    if isinstance(s, tuple):
        return np.asarray(s, dtype=np.float32)
    return np.float32(s)


def execute(state: MachineState, stream: CommandStream, *, check: bool = True) -> MachineState:
    """Apply ``stream`` to a copy of ``state`` and return it."""
    cfg = state.cfg
    if check:
        problems = validate(stream, cfg)
        if problems:
            idx = int(problems[0].split(":", 1)[0]) if problems[0][0].isdigit() else -1
            raise ExecutionFault(idx, problems[0])
    out = state.copy()
    lo, hi = stream.unit_start, stream.unit_start + stream.unit_count
    if hi > out.units:
        raise ExecutionFault(-1, f"stream targets units up to {hi} but state has {out.units}")
    regs = out.regs[lo:hi]
    mem = [m[lo:hi] for m in out.mem]
    nrows = mem[0].shape[1]
    open_row = out.open_row

    def fetch(op):
        if type(op) is Register:
            return regs[:, op.idx]
        return mem[op.parity][:, open_row[op.parity], op.word]

    for rnd in range(stream.rounds):
        offset = rnd * stream.round_rows
        for i, cmd in enumerate(stream.commands):
            kind = type(cmd)
            if kind is Madd:
                a = fetch(cmd.a)
                b = fetch(cmd.b)
                regs[:, cmd.dst.idx] = _f32(cmd.sa) * a + _f32(cmd.sb) * b
            elif kind is Mov:
                if cmd.to_rowbuf:
                    mem[cmd.word.parity][:, open_row[cmd.word.parity], cmd.word.word] = regs[:, cmd.reg.idx]
                else:
                    regs[:, cmd.reg.idx] = mem[cmd.word.parity][:, open_row[cmd.word.parity], cmd.word.word]
            elif kind is MaddSub:
                c = fetch(cmd.c)
                prod = _f32(cmd.s) * fetch(cmd.m)
                add = c + prod
                sub = c - prod
                regs[:, cmd.dst_add.idx] = add
                regs[:, cmd.dst_sub.idx] = sub
            elif kind is RowOpen:
                row = cmd.row + offset
                if row >= nrows:
                    raise ExecutionFault(i, f"row {row} not backed by the memory image ({nrows} rows)")
                open_row[cmd.parity] = row
            elif kind is Shift:
                regs[:, cmd.reg.idx] = np.roll(regs[:, cmd.reg.idx], cmd.lanes, axis=-1)
            elif kind is Butterfly:
                x1r, x1i, x2r, x2i = (fetch(op).copy() for op in cmd.src)
                wr, wi = np.float32(cmd.wr), np.float32(cmd.wi)
                tr = wr * x2r - wi * x2i
                ti = wr * x2i + wi * x2r
                for reg_, val in zip(cmd.dst, (x1r + tr, x1i + ti, x1r - tr, x1i - ti)):
                    regs[:, reg_.idx] = val
            else:
                raise ExecutionFault(i, f"unknown command {cmd!r}")
    return out


@dataclass
class CommandCounts:
    kinds: Counter
    row_switches: int

    def __getitem__(self, kind: str) -> int:
        return self.kinds.get(kind, 0)

    @property
    def column_commands(self) -> int:
        return sum(self.kinds.get(k, 0) for k in COLUMN_KINDS)

    @property
    def compute_commands(self) -> int:
        return sum(self.kinds.get(k, 0) for k in COMPUTE_KINDS)

    def scaled(self, factor: int) -> "CommandCounts":
        return CommandCounts(Counter({k: v * factor for k, v in self.kinds.items()}),
                             self.row_switches * factor)


def count_commands(stream: CommandStream) -> CommandCounts:
    """Per-kind counts and per-bank row switches for one pass of the stream."""
    kinds = Counter(type(c).__name__ for c in stream.commands)
    switches = 0
    current = [None, None]
    for cmd in stream.commands:
        if type(cmd) is RowOpen and current[cmd.parity] != cmd.row:
            switches += 1
            current[cmd.parity] = cmd.row
    return CommandCounts(kinds, switches)


# ---------------------------------------------------------------------------
# text trace: one command per line

def _fmt_op(op) -> str:
    if isinstance(op, Register):
        return f"r{op.idx}"
    return f"{'e' if op.parity == EVEN else 'o'}{op.word}"


def _fmt_s(s) -> str:
    if isinstance(s, tuple):
        return "[" + ",".join(repr(float(v)) for v in s) + "]"
    return repr(float(s))


def format_command(cmd) -> str:
    kind = type(cmd)
    if kind is RowOpen:
        return f"ROWOPEN {'e' if cmd.parity == EVEN else 'o'} {cmd.row}"
    if kind is Madd:
        return f"MADD {_fmt_op(cmd.dst)} {_fmt_op(cmd.a)} {_fmt_s(cmd.sa)} {_fmt_op(cmd.b)} {_fmt_s(cmd.sb)}"
    if kind is MaddSub:
        return (f"MADDSUB {_fmt_op(cmd.dst_add)} {_fmt_op(cmd.dst_sub)} "
                f"{_fmt_op(cmd.c)} {_fmt_op(cmd.m)} {_fmt_s(cmd.s)}")
    if kind is Mov:
        if cmd.to_rowbuf:
            return f"MOV {_fmt_op(cmd.word)} {_fmt_op(cmd.reg)}"
        return f"MOV {_fmt_op(cmd.reg)} {_fmt_op(cmd.word)}"
    if kind is Shift:
        return f"SHIFT {_fmt_op(cmd.reg)} {cmd.lanes}"
    if kind is Butterfly:
        ops = " ".join(_fmt_op(o) for o in cmd.dst + cmd.src)
        return f"BFLY {ops} {_fmt_s(cmd.wr)} {_fmt_s(cmd.wi)}"
    raise TypeError(f"unknown command {cmd!r}")


def _parse_op(tok: str):
    if tok[0] == "r":
        return Register(int(tok[1:]))
    if tok[0] in "eo":
        return RowBufWord(EVEN if tok[0] == "e" else ODD, int(tok[1:]))
    raise ValueError(f"bad operand {tok!r}")


def _parse_s(tok: str):
    if tok.startswith("["):
        return tuple(float(v) for v in tok[1:-1].split(","))
    return float(tok)


def parse_command(line: str):
    kind, *args = line.split()
    if kind == "ROWOPEN":
        return RowOpen(EVEN if args[0] == "e" else ODD, int(args[1]))
    if kind == "MADD":
        return Madd(_parse_op(args[0]), _parse_op(args[1]), _parse_s(args[2]),
                    _parse_op(args[3]), _parse_s(args[4]))
    if kind == "MADDSUB":
        return MaddSub(_parse_op(args[0]), _parse_op(args[1]), _parse_op(args[2]),
                       _parse_op(args[3]), _parse_s(args[4]))
    if kind == "MOV":
        dst, src = _parse_op(args[0]), _parse_op(args[1])
        if isinstance(dst, RowBufWord):
            return Mov(True, src, dst)
        return Mov(False, dst, src)
    if kind == "SHIFT":
        return Shift(_parse_op(args[0]), int(args[1]))
    if kind == "BFLY":
        ops = [_parse_op(a) for a in args[:8]]
        return Butterfly(tuple(ops[:4]), tuple(ops[4:]), _parse_s(args[8]), _parse_s(args[9]))
    raise ValueError(f"unknown trace line {line!r}")


def to_trace(stream: CommandStream) -> str:
    head = (f"# units {stream.unit_start} {stream.unit_count} "
            f"rounds {stream.rounds} round_rows {stream.round_rows}\n")
    return head + "".join(format_command(c) + "\n" for c in stream.commands)


def from_trace(text: str) -> CommandStream:
    stream = CommandStream()
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if tok and tok[0] == "units":
                stream.unit_start, stream.unit_count = int(tok[1]), int(tok[2])
                stream.rounds, stream.round_rows = int(tok[4]), int(tok[6])
            continue
        stream.commands.append(parse_command(line))
    return stream
