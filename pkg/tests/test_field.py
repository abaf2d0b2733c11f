import numpy as np
import pytest
from hypothesis import given, strategies as st

from tpir import field

PRIMES = [2, 3, 5, 7, 11, 13, 101, 257, 65537]


def test_is_prime_small():
    primes_under_50 = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47}
    for n in range(-5, 50):
        assert field.is_prime(n) == (n in primes_under_50)


def test_is_prime_carmichael_and_large():
    # Carmichael numbers fool Fermat tests; these must be rejected
    for n in [561, 1105, 1729, 2465, 2821, 6601]:
        assert not field.is_prime(n)
    assert field.is_prime(2**31 - 1)
    assert not field.is_prime(2**32 + 1)


def test_smallest_prime_geq():
    assert field.smallest_prime_geq(2).q == 2
    assert field.smallest_prime_geq(9).q == 11
    assert field.smallest_prime_geq(16).q == 17
    assert field.smallest_prime_geq(17).q == 17
    assert field.smallest_prime_geq(1).q == 2


def test_element_arithmetic_examples():
    q = field.FieldModulus(7)
    a, b = field.FieldElement(3, q), field.FieldElement(4, q)
    assert (a + b).value == 0
    assert (a * b).value == 5
    assert (a - b).value == 6
    assert field.inv(a).value == 5  # 3 * 5 = 15 = 1 mod 7


def test_out_of_range_rejected():
    q = field.FieldModulus(7)
    with pytest.raises(ValueError):
        field.FieldElement(7, q)
    with pytest.raises(ValueError):
        field.FieldElement(-1, q)


@st.composite
def field_pair(draw):
    q = draw(st.sampled_from(PRIMES))
    m = field.FieldModulus(q)
    x = field.FieldElement(draw(st.integers(0, q - 1)), m)
    y = field.FieldElement(draw(st.integers(0, q - 1)), m)
    return x, y


@given(field_pair())
def test_field_axioms(pair):
    x, y = pair
    q = x.modulus
    zero = field.FieldElement(0, q)
    one = field.FieldElement(1, q)
    assert x + y == y + x
    assert x * y == y * x
    assert x + zero == x
    assert x * one == x
    assert (x - y) + y == x
    if x.value != 0:
        assert x * field.inv(x) == one


@given(st.sampled_from(PRIMES), st.integers(1, 64))
def test_bytes_round_trip(q, n):
    rng = np.random.default_rng(q * 1000 + n)
    values = rng.integers(0, q, size=n)
    buf = field.elements_to_bytes(values, q)
    assert len(buf) == n * field.element_width(q)
    back = field.elements_from_bytes(buf, q, n)
    assert np.array_equal(back, values)


def test_element_width_breakpoints():
    assert field.element_width(2) == 1
    assert field.element_width(257) == 2
    assert field.element_width(65537) == 4
    assert field.element_width(2**32 + 15) == 8


def test_bytes_reject_out_of_range():
    buf = field.elements_to_bytes(np.array([4]), 7)
    with pytest.raises(ValueError):
        field.elements_from_bytes(bytes([9]), 7, 1)
    assert field.elements_from_bytes(buf, 7, 1)[0] == 4
