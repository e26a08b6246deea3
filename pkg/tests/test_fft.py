import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pimfft.fft import (TwiddleClass, bit_reverse, bit_reverse_indices, butterfly,
                        classify_twiddle, dft_naive, fft, four_step, ifft,
                        twiddle, twiddle_census)

from conftest import rand_complex, rel_err


# -- oracle first: the naive DFT ------------------------------------------------

def test_dft_naive_trivial_cases():
    assert np.allclose(dft_naive([1.0]), [1.0])
    assert np.allclose(dft_naive([1, 0, 0, 0]), [1, 1, 1, 1])


def test_dft_naive_matches_hand_computed_length_4():
    # X[k] = sum x[n] (-j)^(kn) for x = [1, 2, 3, 4]
    assert np.allclose(dft_naive([1, 2, 3, 4]), [10, -2 + 2j, -2, -2 - 2j], atol=1e-12)


def test_dft_naive_linearity(rng):
    for _ in range(10):
        a, b = rng.standard_normal(8) + 1j * rng.standard_normal(8), rng.standard_normal(8)
        assert np.max(np.abs(dft_naive(a + b) - dft_naive(a) - dft_naive(b))) < 1e-9


def test_dft_naive_blocking_is_transparent(rng):
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert np.allclose(dft_naive(x, block=7), dft_naive(x, block=64), atol=1e-12)


# -- twiddles and butterflies ------------------------------------------------------

def test_twiddle_examples():
    assert twiddle(8, 0) == 1 + 0j
    assert twiddle(4, 1) == -1j
    w = twiddle(8, 1)
    # e^(-i pi/4), independent evaluation via the polar form
    ref = complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    assert abs(w - ref) < 1e-15
    assert abs(w.real - 0.7071068) < 1e-7 and abs(w.imag + 0.7071068) < 1e-7


@pytest.mark.parametrize("n,k", [(8, 8), (8, -1), (4, 9)])
def test_twiddle_out_of_range(n, k):
    with pytest.raises(ValueError):
        twiddle(n, k)


def test_twiddle_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        twiddle(6, 1)


@given(st.integers(1, 20), st.data())
def test_twiddle_unit_magnitude(bits, data):
    n = 1 << bits
    k = data.draw(st.integers(0, n - 1))
    w = twiddle(n, k)
    assert abs(abs(w) - 1.0) < 1e-12
    assert abs(w - np.exp(-2j * np.pi * k / n)) < 1e-12


def test_butterfly_examples():
    assert butterfly(1, 1, 1) == (2, 0)
    assert butterfly(0, 0, 0.3 - 0.2j) == (0, 0)
    y1, y2 = butterfly(1 + 2j, 3 + 4j, -1j)
    assert (y1, y2) == (5 - 1j, -3 + 5j)


def test_classify_twiddle_examples():
    assert classify_twiddle(32, 1, 0) is TwiddleClass.ONE
    assert classify_twiddle(32, 2, 1) is TwiddleClass.MINUS_J
    assert classify_twiddle(32, 3, 1) is TwiddleClass.SQRT_HALF
    assert classify_twiddle(32, 4, 1) is TwiddleClass.GENERIC
    with pytest.raises(ValueError):
        classify_twiddle(32, 3, 4)


def test_bit_reverse():
    assert bit_reverse(1, 3) == 4
    assert bit_reverse(6, 3) == 3
    assert bit_reverse_indices(8).tolist() == [0, 4, 2, 6, 1, 5, 3, 7]


# -- census ---------------------------------------------------------------------------

def _brute_census(n):
    c = {cls: 0 for cls in TwiddleClass}
    bits = n.bit_length() - 1
    for step in range(1, bits + 1):
        half = 1 << (step - 1)
        for _group in range(n >> step):
            for k in range(half):
                c[classify_twiddle(n, step, k)] += 1
    return c


def test_census_n32_frozen():
    c = twiddle_census(32)
    assert c[TwiddleClass.ONE] + c[TwiddleClass.MINUS_J] == 46
    assert c[TwiddleClass.SQRT_HALF] == 14
    assert c[TwiddleClass.GENERIC] == 20
    assert sum(c.values()) == 80
    assert c == _brute_census(32)


def test_census_n4():
    c = twiddle_census(4)
    assert c[TwiddleClass.ONE] + c[TwiddleClass.MINUS_J] == 4 and sum(c.values()) == 4


@pytest.mark.parametrize("bits", range(2, 10))
def test_census_matches_brute_force(bits):
    assert twiddle_census(1 << bits) == _brute_census(1 << bits)


@pytest.mark.parametrize("bits", range(2, 21))
def test_census_closed_forms(bits):
    n = 1 << bits
    c = twiddle_census(n)
    assert sum(c.values()) == (n // 2) * bits
    assert c[TwiddleClass.ONE] + c[TwiddleClass.MINUS_J] == 3 * n // 2 - 2
    if n >= 8:
        assert c[TwiddleClass.SQRT_HALF] == n // 2 - 2


def test_census_sw_opt_average_2p13():
    n = 1 << 13
    c = twiddle_census(n)
    avg = 6 - 2 * (c[TwiddleClass.ONE] + c[TwiddleClass.MINUS_J]) / sum(c.values())
    assert abs(avg - 5.538) < 1e-3


# -- fft ----------------------------------------------------------------------------------

def test_fft_impulse_and_constant():
    assert np.allclose(fft([1, 0, 0, 0, 0, 0, 0, 0]), np.ones(8))
    out = fft(np.full(16, 2.5))
    assert abs(out[0] - 40) < 1e-5 and np.max(np.abs(out[1:])) < 1e-5


def test_fft_random_16_vs_oracle(rng):
    x = rand_complex(rng, 16)
    assert rel_err(fft(x), dft_naive(x)) < 1e-5


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        fft(np.ones(12))


def test_fft_returns_32_bit():
    assert fft(np.ones(8)).dtype == np.complex64


@pytest.mark.parametrize("bits", range(1, 11))
def test_fft_matches_oracle_many_vectors(bits, rng):
    n = 1 << bits
    x = rand_complex(rng, (20, n))
    assert rel_err(fft(x), dft_naive(x)) < 1e-5


def test_fft_error_bound_2p16(rng):
    x = rand_complex(rng, 1 << 16)
    ref = np.fft.fft(x.astype(np.complex128))
    assert np.max(np.abs(fft(x) - ref)) <= 1e-4 * np.max(np.abs(x))


@given(st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_fft_inverse_round_trip(bits, seed):
    x = rand_complex(np.random.default_rng(seed), 1 << bits)
    assert rel_err(ifft(fft(x)), x) < 1e-4


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_parseval(bits, seed):
    x = rand_complex(np.random.default_rng(seed), 1 << bits).astype(np.complex128)
    X = fft(x).astype(np.complex128)
    lhs, rhs = np.sum(np.abs(x) ** 2), np.sum(np.abs(X) ** 2) / len(x)
    assert abs(lhs - rhs) <= 1e-3 * lhs


# -- four-step ------------------------------------------------------------------------------

def test_four_step_examples(rng):
    x = rand_complex(rng, 16)
    assert rel_err(four_step(x, 4, 4), dft_naive(x)) < 1e-5
    y = rand_complex(rng, 32)
    assert np.allclose(four_step(y, 32, 1), fft(y), atol=1e-5)
    imp = np.zeros(64)
    imp[0] = 1
    assert np.allclose(four_step(imp, 8, 8), np.ones(64), atol=1e-6)


def test_four_step_rejects_bad_factors():
    with pytest.raises(ValueError):
        four_step(np.ones(16), 4, 8)


@given(st.integers(4, 10), st.data())
def test_four_step_equals_fft(bits, data):
    m1_bits = data.draw(st.integers(0, bits))
    x = rand_complex(np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))), 1 << bits)
    assert rel_err(four_step(x, 1 << m1_bits, 1 << (bits - m1_bits)), fft(x)) < 1e-4
