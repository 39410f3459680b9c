"""Classical PKE whose decryption keys the key-leasing layer puts in superposition.

A key pair is a one-key CPFE instance plus the key for a random attribute x.
Encryption of m encrypts the constant circuit C[m], laid out with the same
gates as the mux circuit so every ciphertext has the same shape. Decryption
is deterministic, which is what lets the leasing layer run it coherently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cpfe
from .bits import check_bits, random_bits
from .circuits import build_const_circuit
from .cpfe import CpfeCiphertext, CpfePublicKey, CpfeSecretKey

DEFAULT_ATTR_BITS = 8
DEFAULT_MSG_BITS = 16


@dataclass(frozen=True)
class CoicPublicKey:
    mpk: CpfePublicKey
    msg_len: int

    @property
    def attr_len(self) -> int:
        return self.mpk.ell


@dataclass(frozen=True)
class CoicKeyPair:
    ek: CoicPublicKey
    dk: CpfeSecretKey

    @property
    def attr_len(self) -> int:
        return self.ek.attr_len


@dataclass(frozen=True)
class CoicCiphertext:
    inner: CpfeCiphertext
    msg_len: int


def coic_kg(attr_len: int, msg_len: int, rng: np.random.Generator) -> CoicKeyPair:
    if attr_len < 1 or msg_len < 1:
        raise ValueError("attribute and message lengths must be at least 1")
    keys = cpfe.cpfe_setup(attr_len, rng)
    x = random_bits(rng, attr_len)
    return CoicKeyPair(CoicPublicKey(keys.mpk, msg_len), cpfe.cpfe_kg(keys.msk, x))


def coic_enc(ek: CoicPublicKey, m: str, rng: np.random.Generator) -> CoicCiphertext:
    check_bits(m, ek.msg_len, what="message")
    circuit = build_const_circuit(m, ek.attr_len)
    return CoicCiphertext(cpfe.cpfe_enc(ek.mpk, circuit, rng), ek.msg_len)


def coic_dec(dk: CpfeSecretKey, ct: CoicCiphertext) -> str:
    return cpfe.cpfe_dec(dk, ct.inner)


def dk_bit_length(attr_len: int = DEFAULT_ATTR_BITS, params=None) -> int:
    return CpfeSecretKey.bit_length(attr_len, params or cpfe.label_params())


def dk_from_bits(s: str, attr_len: int = DEFAULT_ATTR_BITS, params=None) -> CpfeSecretKey:
    return CpfeSecretKey.from_bits(s, attr_len, params or cpfe.label_params())


def ek_to_json(ek: CoicPublicKey) -> dict:
    return {"mpk": cpfe.mpk_to_json(ek.mpk), "msg_len": ek.msg_len}


def ek_from_json(obj: dict) -> CoicPublicKey:
    return CoicPublicKey(cpfe.mpk_from_json(obj["mpk"]), int(obj["msg_len"]))


def ct_to_json(ct: CoicCiphertext) -> dict:
    return {"inner": cpfe.ct_to_json(ct.inner), "msg_len": ct.msg_len}


def ct_from_json(obj: dict) -> CoicCiphertext:
    return CoicCiphertext(cpfe.ct_from_json(obj["inner"]), int(obj["msg_len"]))
