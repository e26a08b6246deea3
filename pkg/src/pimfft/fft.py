"""Reference FFT mathematics.

Radix-2 decimation-in-time Cooley-Tukey with bit-reversed input, a naive DFT
oracle, the four-step factorisation, and twiddle-factor classification used
by the PIM schedules.

Oracle arithmetic runs in complex128; :func:`fft` rounds its result to
complex64 so it carries the same 32-bit precision as the simulated lanes.
"""

from __future__ import annotations

import enum
import math
from collections import Counter

import numpy as np

SQRT_HALF = math.sqrt(0.5)
TWIDDLE_ATOL = 1e-6


class TwiddleClass(enum.Enum):
    ONE = "one"
    MINUS_J = "minus_j"
    SQRT_HALF = "sqrt_half"
    GENERIC = "generic"


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def log2i(n: int) -> int:
    if not is_power_of_two(n):
        raise ValueError(f"{n} is not a power of two")
    return int(n).bit_length() - 1


def bit_reverse(i: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (i & 1)
        i >>= 1
    return out


def bit_reverse_indices(n: int) -> np.ndarray:
    """Permutation array ``p`` with ``p[i] = reverse(i)`` over log2(n) bits."""
    bits = log2i(n)
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def twiddle(n: int, k: int) -> complex:
    """e^(-2*pi*i*k/n), with the octant points returned exactly.

    Exact values for multiples of n/8 keep the 1 / -j special cases
    bit-exact, which the schedule equivalence tests rely on.
    """
    if not is_power_of_two(n):
        raise ValueError(f"twiddle size {n} is not a power of two")
    if not 0 <= k < n:
        raise ValueError(f"twiddle index {k} out of range for size {n}")
    if (8 * k) % n == 0:
        octant = (8 * k) // n
        c = SQRT_HALF
        return [1 + 0j, complex(c, -c), -1j, complex(-c, -c),
                -1 + 0j, complex(-c, c), 1j, complex(c, c)][octant]
    angle = -2.0 * math.pi * k / n
    return complex(math.cos(angle), math.sin(angle))


def butterfly(x1: complex, x2: complex, w: complex) -> tuple[complex, complex]:
    t = w * x2
    return x1 + t, x1 - t


def classify(w: complex) -> TwiddleClass:
    if abs(w.real - 1.0) <= TWIDDLE_ATOL and abs(w.imag) <= TWIDDLE_ATOL:
        return TwiddleClass.ONE
    if abs(w.real) <= TWIDDLE_ATOL and abs(w.imag + 1.0) <= TWIDDLE_ATOL:
        return TwiddleClass.MINUS_J
    if (abs(abs(w.real) - SQRT_HALF) <= TWIDDLE_ATOL
            and abs(abs(w.imag) - SQRT_HALF) <= TWIDDLE_ATOL):
        return TwiddleClass.SQRT_HALF
    return TwiddleClass.GENERIC


def step_twiddle_index(step: int, k: int) -> tuple[int, int]:
    """Twiddle (size, index) used by butterfly ``k`` within a group at ``step``."""
    return 1 << step, k


def classify_twiddle(n: int, step: int, k: int) -> TwiddleClass:
    """Class of the twiddle e^(-2*pi*i*k / 2^step) used at DIT ``step``.

    ``k`` ranges over 0 .. 2^(step-1) - 1; ``n`` only bounds ``step``.
    """
    bits = log2i(n)
    if not 1 <= step <= bits:
        raise ValueError(f"step {step} outside 1..{bits}")
    if not 0 <= k < (1 << (step - 1)):
        raise ValueError(f"twiddle index {k} invalid at step {step}")
    return classify(twiddle(1 << step, k))


def _step_class_counts(step: int) -> Counter:
    """Class counts over the 2^(step-1) distinct twiddles of one step.

    Closed form: index 0 is ONE; index half/2 (if step >= 2) is MINUS_J;
    indices half/4 and 3*half/4 (if step >= 3) are SQRT_HALF.
    """
    half = 1 << (step - 1)
    c = Counter()
    c[TwiddleClass.ONE] = 1
    if step >= 2:
        c[TwiddleClass.MINUS_J] = 1
    if step >= 3:
        c[TwiddleClass.SQRT_HALF] = 2
    c[TwiddleClass.GENERIC] = half - sum(c.values())
    return c


def twiddle_census(n: int) -> dict[TwiddleClass, int]:
    """Per-class butterfly counts over all (n/2)*log2(n) butterflies.

    Each step has n/2 butterflies spread evenly over its 2^(step-1) twiddles,
    so counting never allocates per-butterfly data.
    """
    bits = log2i(n)
    if bits < 1:
        raise ValueError("census needs n >= 2")
    total = Counter({c: 0 for c in TwiddleClass})
    for step in range(1, bits + 1):
        groups = n >> step
        for cls, cnt in _step_class_counts(step).items():
            total[cls] += cnt * groups
    return dict(total)


def _as_complex(x) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128)


def dft_naive(x, block: int = 256) -> np.ndarray:
    """Direct O(N^2) DFT in double precision, ``block`` output bins at a time."""
    x = _as_complex(x)
    n = x.shape[-1]
    m = np.arange(n)
    out = np.empty(x.shape, dtype=np.complex128)
    for k0 in range(0, n, block):
        k = np.arange(k0, min(k0 + block, n))
        # reduce k*m modulo n before forming the angle to keep large-n phases exact
        phase = (np.outer(k, m) % n) * (-2.0 * np.pi / n)
        out[..., k0:k0 + len(k)] = x @ np.exp(1j * phase).T
    return out


def _fft_double(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    bits = log2i(n)
    a = x[..., bit_reverse_indices(n)].copy()
    for step in range(1, bits + 1):
        span = 1 << step
        half = span >> 1
        w = np.array([twiddle(span, k) for k in range(half)])
        a = a.reshape(a.shape[:-1] + (n // span, span))
        top = a[..., :half].copy()
        bot = a[..., half:] * w
        a[..., :half] = top + bot
        a[..., half:] = top - bot
        a = a.reshape(a.shape[:-2] + (n,))
    return a


def fft(x) -> np.ndarray:
    """Radix-2 DIT FFT along the last axis, returned as complex64."""
    x = _as_complex(x)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"FFT size {n} is not a power of two")
    if n == 1:
        return x.astype(np.complex64)
    return _fft_double(x).astype(np.complex64)


def ifft(x) -> np.ndarray:
    x = _as_complex(x)
    n = x.shape[-1]
    return (np.conj(_fft_double(np.conj(x))) / n).astype(np.complex64)


def inter_stage_twiddles(m1: int, m2: int) -> np.ndarray:
    """Matrix e^(-2*pi*i*r*c/N) indexed [r, c] for r < m2, c < m1."""
    n = m1 * m2
    r = np.arange(m2)[:, None]
    c = np.arange(m1)[None, :]
    return np.exp(-2j * np.pi * ((r * c) % n) / n)


def four_step(x, m1: int, m2: int) -> np.ndarray:
    """FFT of size m1*m2 via m2 FFTs of size m1, twiddles, then m1 FFTs of size m2.

    Input index n = m2*c + r (r < m2, c < m1); output index k = k1 + m1*k2.
    """
    x = _as_complex(x)
    n = x.shape[-1]
    if m1 * m2 != n:
        raise ValueError(f"{m1} x {m2} does not factor {n}")
    if not (is_power_of_two(m1) and is_power_of_two(m2)):
        raise ValueError("four-step factors must be powers of two")
    lead = x.shape[:-1]
    grid = x.reshape(lead + (m1, m2))            # [c, r]
    cols = np.swapaxes(grid, -1, -2)             # [r, c]: m2 transforms of size m1
    stage1 = _fft_double(cols) if m1 > 1 else cols
    stage1 = stage1 * inter_stage_twiddles(m1, m2)
    rows = np.swapaxes(stage1, -1, -2)           # [k1, r]: m1 transforms of size m2
    stage2 = _fft_double(rows) if m2 > 1 else rows
    out = np.swapaxes(stage2, -1, -2)            # [k2, k1]
    return out.reshape(lead + (n,)).astype(np.complex64)
