import math
from functools import reduce

import numpy as np
import pytest

from conftest import all_bitstrings
from sklsim import abeskl as A
from sklsim import qsim
from sklsim.bits import random_bits, xor_bits
from sklsim.circuits import eval_circuit


@pytest.fixture(scope="module")
def abe1():
    rng = np.random.default_rng(21)
    pk, msk = A.abe1_setup(4, 8, rng)
    return pk, msk


def test_toy_abe_n1_exhaustive(rng):
    pk, msk = A.toy_abe_setup(1, rng, msg_bits=8)
    for x in "01":
        for y in "01":
            sk = A.toy_abe_kg(msk, y)
            for _ in range(10):
                m = random_bits(rng, 8)
                got = A.toy_abe_dec(sk, x, A.toy_abe_enc(pk, x, m, rng))
                if A.relation(x, y):
                    assert got == m
                else:
                    assert got != m


def test_toy_abe_mismatch_rate(rng):
    pk, msk = A.toy_abe_setup(4, rng, msg_bits=16)
    sk = A.toy_abe_kg(msk, "0110")
    bad = 0
    for _ in range(500):
        m = random_bits(rng, 16)
        bad += A.toy_abe_dec(sk, "0111", A.toy_abe_enc(pk, "0111", m, rng)) != m
    assert bad / 500 >= 1 - 2**-16


def test_toy_abe_errors(rng):
    pk, msk = A.toy_abe_setup(2, rng, msg_bits=4)
    with pytest.raises(ValueError):
        A.toy_abe_kg(msk, "1")
    with pytest.raises(ValueError):
        A.toy_abe_enc(pk, "101", "0000", rng)
    with pytest.raises(ValueError):
        A.toy_abe_setup(0, rng)


def test_xor_skl_lifecycle(rng):
    keys = A.xor_skl_kg(8, rng)
    m = random_bits(rng, 8)
    ct = A.xor_skl_enc(keys.ek, m, random_bits(rng, 8))
    got, post = A.xor_skl_dec(keys.qdk, ct, rng)
    assert got == m and qsim.fidelity(post, keys.qdk) == pytest.approx(1)
    assert A.xor_skl_vrfy(keys.vk, post, rng).decision
    measured = qsim.measure_all(keys.qdk, rng)[1]
    assert qsim.projection_analysis(measured, A.xor_skl_target(keys.vk)).accept_probability == pytest.approx(0.5)
    with pytest.raises(ValueError):
        A.xor_skl_enc(keys.ek, "1", "1")


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_xor_skl_circuit_exhaustive(ell):
    for m in all_bitstrings(ell):
        for r in all_bitstrings(ell):
            c = A.xor_skl_enc_circuit(m, r)
            assert {g.op for g in c.gates} <= {"XOR", "CONST0", "CONST1"}
            for ek in all_bitstrings(2 * ell):
                assert eval_circuit(c, ek) == A.xor_skl_enc(ek, m, r).to_bits()


def test_xor_skl_circuit_random(rng):
    shapes = set()
    for _ in range(100):
        m, r, ek = random_bits(rng, 16), random_bits(rng, 16), random_bits(rng, 32)
        c = A.xor_skl_enc_circuit(m, r)
        shapes.add(c.skeleton())
        assert eval_circuit(c, ek) == A.xor_skl_enc(ek, m, r).to_bits()
    assert len(shapes) == 1


def test_abe1_setup_count(abe1):
    pk, _ = abe1
    assert pk.ell_ek == 16 and len(pk.pks) == 16 and all(len(p) == 2 for p in pk.pks)


def test_abe1_round_trip(abe1, rng):
    pk, msk = abe1
    usk, vk = A.abe1_kg(msk, "1001", rng)
    assert len(usk.abe_sks) == pk.ell_ek
    key = usk
    for _ in range(5):
        m = random_bits(rng, 8)
        got, key = A.abe1_dec(key, "1001", A.abe1_enc(pk, "1001", m, rng), rng)
        assert got == m
    assert A.abe1_vrfy(vk, key, rng).decision


def test_abe1_independent_keys(abe1, rng):
    _, msk = abe1
    a, _ = A.abe1_kg(msk, "0000", rng)
    b, _ = A.abe1_kg(msk, "0000", rng)
    assert a.skl_ek != b.skl_ek


def test_abe1_mismatch(abe1):
    pk, msk = abe1
    rng = np.random.default_rng(5)
    usk, _ = A.abe1_kg(msk, "1111", rng)
    fails = 0
    for _ in range(500):
        x = random_bits(rng, 4)
        if x == "1111":
            x = "0111"
        m = random_bits(rng, 8)
        fails += A.abe1_dec(usk, x, A.abe1_enc(pk, x, m, rng), rng)[0] != m
    assert fails == 500


def test_abe1_ct_size_independent_of_message(abe1, rng):
    pk, _ = abe1
    a = A.abe1_enc(pk, "0000", "0" * 8, rng)
    b = A.abe1_enc(pk, "0000", "1" * 8, rng)
    assert a.gc.size_bytes() == b.gc.size_bytes() and a.gc.shape == b.gc.shape


def test_abe1_kept_copy_survives_return(abe1, rng):
    # a classical copy of a measured branch keeps decrypting after the returned key passes
    pk, msk = abe1
    usk, vk = A.abe1_kg(msk, "0101", rng)
    for _ in range(20):
        measured = qsim.measure_all(usk.qdk, rng)[1]
        kept = A.Abe1UserKey(usk.abe_sks, usk.skl_ek, measured)
        if A.abe1_vrfy(vk, kept, rng).decision:
            break
    else:
        pytest.fail("measured key never accepted")
    m = random_bits(rng, 8)
    assert A.abe1_dec(kept, "0101", A.abe1_enc(pk, "0101", m, rng), rng)[0] == m


def test_abe1_measured_acceptance(abe1):
    _, msk = abe1
    rng = np.random.default_rng(77)
    usk, vk = A.abe1_kg(msk, "0000", rng)
    acc = 0
    for _ in range(1000):
        q = qsim.measure_all(usk.qdk, rng)[1]
        acc += A.abe1_vrfy(vk, A.Abe1UserKey(usk.abe_sks, usk.skl_ek, q), rng).decision
    assert 0.45 < acc / 1000 < 0.55
    assert not A.abe1_vrfy(vk, None, rng).decision


def test_qabe_params():
    assert A.qabe_params("selective", 8, 2) == (8, 4)
    assert A.qabe_params("adaptive", 4, 2, 4) == (16, 4)
    assert A.qabe_params("selective", 3, 1)[1] == 1
    with pytest.raises(ValueError):
        A.qabe_params("selective", 3, 0)
    with pytest.raises(ValueError):
        A.qabe_params("static", 3, 1)


def test_xor_shares(rng):
    for v in (1, 3, 8):
        m = random_bits(rng, 12)
        shares = A.xor_shares(m, v, rng)
        assert len(shares) == v and reduce(xor_bits, shares) == m


def test_qabe_round_trip_and_vrfy(rng):
    pk, msk = A.qabe_setup(3, 2, 2, 4, rng)
    qusk, vks = A.qabe_kg(msk, "10", rng)
    assert len(vks) == 3 and all(0 <= j < 2 for j in qusk.columns)
    m = random_bits(rng, 4)
    got, post = A.qabe_dec(qusk, "10", A.qabe_enc(pk, "10", m, rng), rng)
    assert got == m
    assert A.qabe_vrfy(vks, post, rng).decision
    assert A.qabe_dec(qusk, "11", A.qabe_enc(pk, "11", m, rng), rng)[0] is None


def test_qabe_all_measured_acceptance(rng):
    _, msk = A.qabe_setup(3, 2, 1, 2, rng)
    qusk, vks = A.qabe_kg(msk, "1", rng)
    acc = 0
    n = 2000
    for _ in range(n):
        keys = tuple(
            A.Abe1UserKey(k.abe_sks, k.skl_ek, qsim.measure_all(k.qdk, rng)[1]) for k in qusk.keys
        )
        acc += A.qabe_vrfy(vks, A.QAbeUserKey(qusk.columns, keys), rng).decision
    # 2^-3 = 0.125; 4-sigma band
    assert abs(acc / n - 0.125) < 4 * math.sqrt(0.125 * 0.875 / n)


def test_bins_probability_values():
    assert A.bins_distinctness_probability(1, 2, 2) == 0.5
    assert A.bins_distinctness_probability(5, 3, 1) == 0.0
    assert A.bins_distinctness_probability(2, 2, 3) == 1.0


def test_bins_enumeration():
    # v=1, w=3, q=2: 9 equally likely pairs, 3 collide
    assert A.bins_distinctness_probability(1, 3, 2) == pytest.approx(3 / 9)


def test_bins_monte_carlo(rng):
    p = A.bins_distinctness_probability(4, 4, 3)
    n = 100_000
    est = A.bins_monte_carlo(4, 4, 3, n, rng)
    assert abs(est - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_json_round_trips(rng):
    pk, msk = A.abe1_setup(2, 2, rng)
    usk, vk = A.abe1_kg(msk, "01", rng)
    pk2 = A.abe1_pk_from_json(A.abe1_pk_to_json(pk))
    usk2 = A.abe1_usk_from_json(A.abe1_usk_to_json(usk))
    ct = A.abe1_ct_from_json(A.abe1_ct_to_json(A.abe1_enc(pk2, "01", "10", rng)))
    assert A.abe1_dec(usk2, "01", ct, rng)[0] == "10"
    qpk, qmsk = A.qabe_setup(2, 1, 1, 2, rng)
    qusk, _ = A.qabe_kg(qmsk, "1", rng)
    qpk2 = A.qabe_pk_from_json(A.qabe_pk_to_json(qpk))
    qusk2 = A.qabe_usk_from_json(A.qabe_usk_to_json(qusk))
    qct = A.qabe_ct_from_json(A.qabe_ct_to_json(A.qabe_enc(qpk2, "1", "01", rng)))
    assert A.qabe_dec(qusk2, "1", qct, rng)[0] == "01"
