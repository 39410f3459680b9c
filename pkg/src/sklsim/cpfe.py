"""One-key ciphertext-policy functional encryption from PKE and garbling.

Setup makes one PKE key pair per (position i, bit b) of the attribute
string. The key for attribute x holds the decryption keys for (i, x_i).
Encrypting a circuit garbles it and encrypts input label ``lab_{i,b}``
under the (i, b) public key, so a key holder recovers exactly the labels
for x and learns C(x).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import pke
from .bits import check_bits, int_to_bits
from .circuits import (
    BoolCircuit,
    CircuitError,
    GarbledCircuit,
    InvalidLabelError,
    garble,
    garbled_from_json,
    garbled_to_json,
    gc_eval,
)
from .pke import PkeParams


class CorruptCiphertextError(ValueError):
    pass


def label_params(kappa: int = 128) -> PkeParams:
    return PkeParams(payload_bits=kappa)


class CpfePublicKey:
    """Master public key: ``eks[i][b]`` for i < ell, b in {0, 1}.

    Built either from explicit keys or from seeds; in the latter case the
    public matrices are computed on first access.
    """

    def __init__(self, ell: int, params: PkeParams, eks=None, *, _seeds=None, _public_seed=None):
        self.ell = ell
        self.params = params
        if eks is not None:
            self.__dict__["eks"] = [list(pair) for pair in eks]
        self._seeds = _seeds
        self._public_seed = _public_seed

    @cached_property
    def eks(self) -> list[list[pke.PkePublicKey]]:
        flat = pke.public_keys_from_seeds(self.params, self._seeds, self._public_seed)
        return [[flat[2 * i], flat[2 * i + 1]] for i in range(self.ell)]


@dataclass(frozen=True)
class CpfeMasterKeys:
    mpk: CpfePublicKey
    msk: tuple[tuple[pke.PkeSecretKey, pke.PkeSecretKey], ...]

    @property
    def ell(self) -> int:
        return self.mpk.ell


@dataclass(frozen=True)
class CpfeSecretKey:
    x: str
    dks: tuple[pke.PkeSecretKey, ...]

    @property
    def params(self) -> PkeParams:
        return self.dks[0].params

    def to_bits(self) -> str:
        return self.x + "".join(dk.to_bits() for dk in self.dks)

    @staticmethod
    def bit_length(ell: int, params: PkeParams) -> int:
        return ell + ell * params.seed_bits

    @classmethod
    def from_bits(cls, s: str, ell: int, params: PkeParams) -> "CpfeSecretKey":
        check_bits(s, cls.bit_length(ell, params), what="CPFE secret key")
        sb = params.seed_bits
        dks = tuple(
            pke.PkeSecretKey(params, int(s[ell + i * sb: ell + (i + 1) * sb], 2))
            for i in range(ell)
        )
        return cls(s[:ell], dks)


@dataclass(frozen=True)
class CpfeCiphertext:
    gc: GarbledCircuit
    label_cts: tuple[tuple[pke.PkeCiphertext, pke.PkeCiphertext], ...]


def cpfe_setup(ell: int, rng: np.random.Generator, params: PkeParams | None = None) -> CpfeMasterKeys:
    if ell < 1:
        raise ValueError("attribute length must be at least 1")
    params = params or label_params()
    seeds = tuple(pke.draw_seed(params.seed_bits, rng) for _ in range(2 * ell))
    public_seed = pke.draw_seed(64, rng)
    mpk = CpfePublicKey(ell, params, _seeds=seeds, _public_seed=public_seed)
    msk = tuple(
        (pke.PkeSecretKey(params, seeds[2 * i]), pke.PkeSecretKey(params, seeds[2 * i + 1]))
        for i in range(ell)
    )
    return CpfeMasterKeys(mpk, msk)


def cpfe_kg(msk, x: str) -> CpfeSecretKey:
    check_bits(x, len(msk), what="attribute")
    return CpfeSecretKey(x, tuple(msk[i][int(xi)] for i, xi in enumerate(x)))


def cpfe_enc(mpk: CpfePublicKey, c: BoolCircuit, rng: np.random.Generator) -> CpfeCiphertext:
    if c.input_width != mpk.ell:
        raise CircuitError(f"circuit takes {c.input_width} inputs, attribute length is {mpk.ell}")
    kappa = mpk.params.payload_bits
    pairs, gc = garble(c, rng, kappa=kappa)
    eks = [mpk.eks[i][b] for i in range(mpk.ell) for b in (0, 1)]
    msgs = [int_to_bits(pairs[i][b], kappa) for i in range(mpk.ell) for b in (0, 1)]
    cts = pke.pke_enc_many(eks, msgs, rng)
    return CpfeCiphertext(gc, tuple((cts[2 * i], cts[2 * i + 1]) for i in range(mpk.ell)))


def cpfe_dec(sk: CpfeSecretKey, ct: CpfeCiphertext) -> str:
    if len(ct.label_cts) != len(sk.x):
        raise CorruptCiphertextError("ciphertext and key have different attribute lengths")
    try:
        labels = [
            int(pke.pke_dec(dk, ct.label_cts[i][int(xi)]), 2)
            for i, (dk, xi) in enumerate(zip(sk.dks, sk.x))
        ]
        return gc_eval(ct.gc, labels)
    except (InvalidLabelError, pke.PayloadError, CircuitError) as exc:
        raise CorruptCiphertextError(str(exc)) from exc


# -- serialization -----------------------------------------------------------

def mpk_to_json(mpk: CpfePublicKey) -> dict:
    return {
        "ell": mpk.ell,
        "params": pke.params_to_json(mpk.params),
        "eks": [[pke.ek_to_json(ek) for ek in pair] for pair in mpk.eks],
    }


def mpk_from_json(obj: dict) -> CpfePublicKey:
    eks = [[pke.ek_from_json(e) for e in pair] for pair in obj["eks"]]
    return CpfePublicKey(int(obj["ell"]), pke.params_from_json(obj["params"]), eks)


def sk_to_json(sk: CpfeSecretKey) -> dict:
    return {"x": sk.x, "dks": [pke.dk_to_json(dk) for dk in sk.dks]}


def sk_from_json(obj: dict) -> CpfeSecretKey:
    return CpfeSecretKey(obj["x"], tuple(pke.dk_from_json(d) for d in obj["dks"]))


def msk_to_json(msk) -> list:
    return [[pke.dk_to_json(dk) for dk in pair] for pair in msk]


def msk_from_json(obj) -> tuple:
    return tuple(tuple(pke.dk_from_json(d) for d in pair) for pair in obj)


def ct_to_json(ct: CpfeCiphertext) -> dict:
    return {
        "gc": garbled_to_json(ct.gc),
        "label_cts": [[pke.ct_to_json(c) for c in pair] for pair in ct.label_cts],
    }


def ct_from_json(obj: dict) -> CpfeCiphertext:
    return CpfeCiphertext(
        garbled_from_json(obj["gc"]),
        tuple(tuple(pke.ct_from_json(c) for c in pair) for pair in obj["label_cts"]),
    )
