import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sklsim.bits import (
    bits_to_hex,
    check_bits,
    hex_to_bits,
    inner_product_bits,
    int_to_bits,
    random_bits,
    split_blocks,
    xor_bits,
)

bitstrings = st.text(alphabet="01", max_size=80)


def loop_inner_product(x, r):
    acc = 0
    for a, b in zip(x, r):
        acc ^= int(a) & int(b)
    return acc


def test_inner_product_examples():
    assert inner_product_bits("1010", "1110") == 0
    assert inner_product_bits("1011", "0000") == 0
    assert inner_product_bits("", "") == 0


@given(bitstrings)
def test_self_inner_product_is_parity(x):
    assert inner_product_bits(x, x) == x.count("1") % 2


@given(st.integers(1, 64).flatmap(lambda n: st.tuples(
    st.text(alphabet="01", min_size=n, max_size=n), st.text(alphabet="01", min_size=n, max_size=n))))
def test_inner_product_matches_loop(pair):
    x, r = pair
    assert inner_product_bits(x, r) == loop_inner_product(x, r)


def test_inner_product_length_mismatch():
    with pytest.raises(ValueError):
        inner_product_bits("10", "1")


@given(bitstrings)
def test_hex_round_trip(s):
    assert hex_to_bits(bits_to_hex(s), len(s)) == s


def test_hex_padding():
    assert bits_to_hex("00000001") == "01"
    assert bits_to_hex("101") == "5"


def test_xor_and_int_conversions():
    assert xor_bits("1100", "1010") == "0110"
    assert int_to_bits(5, 4) == "0101"
    with pytest.raises(ValueError):
        int_to_bits(16, 4)
    with pytest.raises(ValueError):
        xor_bits("1", "10")


def test_check_bits_rejects_bad_input():
    with pytest.raises(ValueError):
        check_bits("012")
    with pytest.raises(ValueError):
        check_bits("01", 3)
    assert check_bits("", 0) == ""


def test_random_bits_deterministic():
    a = random_bits(np.random.default_rng(3), 100)
    b = random_bits(np.random.default_rng(3), 100)
    assert a == b and len(a) == 100 and set(a) <= {"0", "1"}
    assert random_bits(np.random.default_rng(3), 0) == ""


def test_split_blocks_big_endian():
    assert split_blocks("00011011", 4, 2) == ["00", "01", "10", "11"]
    with pytest.raises(ValueError):
        split_blocks("000", 2, 2)
