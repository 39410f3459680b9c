"""Toy Regev-style LWE public-key encryption with exact correctness.

Key generation draws a ternary secret matrix ``S`` (n x L) from a short
seed, a uniform public matrix ``A`` (n x n) and ternary noise ``E``, and
publishes ``B = A S + E``. Encrypting ``m`` picks a ternary vector ``r`` and
ternary ``e'`` and outputs ``u = A^T r``, ``v = B^T r + e' + m * floor(q/2)``.
Decryption computes ``v - S^T u = E^T r + e' + m * floor(q/2)``; the noise
term is at most ``n + 1`` in absolute value, so ``q > 4 (n + 1)`` makes
decryption exact.

The decryption key is the seed itself, which keeps classical keys short
enough to live in simulator registers. None of this is secure.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bits import check_bits, int_to_bits


class ParameterError(ValueError):
    pass


class PayloadError(ValueError):
    pass


@dataclass(frozen=True)
class PkeParams:
    n: int = 32
    q: int = 12289
    payload_bits: int = 16
    seed_bits: int = 64

    def __post_init__(self):
        if self.n < 1 or self.payload_bits < 1 or self.seed_bits < 1:
            raise ParameterError(f"non-positive parameter in {self}")
        if self.q <= 4 * (self.n + 1):
            raise ParameterError(
                f"q={self.q} must exceed 4(n+1)={4 * (self.n + 1)} for exact decryption"
            )
        if self.q >= 1 << 16:
            raise ParameterError("q must fit in 16 bits")

    @property
    def noise_bound(self) -> int:
        """Worst-case |E^T r + e'| for ternary E, r, e'."""
        return self.n + 1


@dataclass(frozen=True, eq=False)
class PkePublicKey:
    params: PkeParams
    a: np.ndarray  # (n, n)
    b: np.ndarray  # (n, L)


@dataclass(frozen=True)
class PkeSecretKey:
    params: PkeParams
    seed: int

    def to_bits(self) -> str:
        return int_to_bits(self.seed, self.params.seed_bits)


@dataclass(frozen=True)
class PkeKeyPair:
    ek: PkePublicKey
    dk: PkeSecretKey


@dataclass(frozen=True, eq=False)
class PkeCiphertext:
    u: np.ndarray  # (n,)
    v: np.ndarray  # (L,)
    length: int


@lru_cache(maxsize=8192)
def _secret_matrix(seed: int, n: int, payload_bits: int) -> np.ndarray:
    # SHAKE-256 seed expansion; bytes below 255 map uniformly onto {-1, 0, 1}
    need = n * payload_bits
    counter = 0
    vals = np.empty(0, dtype=np.int8)
    while vals.size < need:
        h = hashlib.shake_256(b"pke-secret%d:" % counter + seed.to_bytes(32, "big"))
        raw = np.frombuffer(h.digest(need + 64), dtype=np.uint8)
        vals = np.concatenate([vals, (raw[raw < 255] % 3).astype(np.int8) - 1])
        counter += 1
    s = vals[:need].reshape(n, payload_bits)
    s.setflags(write=False)
    return s


def draw_seed(bits: int, rng: np.random.Generator) -> int:
    nbytes = (bits + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - bits)


def public_keys_from_seeds(
    params: PkeParams, secret_seeds, public_seed: int
) -> list[PkePublicKey]:
    """Public keys for the given secret seeds, with A and E drawn from ``public_seed``.

    Deterministic in its arguments, so callers can draw seeds eagerly and
    materialize the (comparatively expensive) public matrices later.
    """
    n, q, L = params.n, params.q, params.payload_bits
    count = len(secret_seeds)
    rng = np.random.default_rng(public_seed)
    s = np.stack([_secret_matrix(sd, n, L) for sd in secret_seeds]).astype(np.float32)
    a = rng.integers(0, q, size=(count, n, n), dtype=np.int32)
    e = rng.integers(-1, 2, size=(count, n, L), dtype=np.int8)
    # float32 is exact: |a s + e| <= q * n + 1 < 2**24
    b = np.matmul(a.astype(np.float32), s) + e
    b -= q * np.floor(b / q)
    b = b.astype(np.int64)
    a = a.astype(np.int64)
    return [PkePublicKey(params, a[k], b[k]) for k in range(count)]


def pke_kg_many(params: PkeParams, count: int, rng: np.random.Generator) -> list[PkeKeyPair]:
    """``count`` independent key pairs, generated with batched matrix products."""
    seeds = [draw_seed(params.seed_bits, rng) for _ in range(count)]
    eks = public_keys_from_seeds(params, seeds, draw_seed(64, rng))
    return [PkeKeyPair(ek, PkeSecretKey(params, sd)) for ek, sd in zip(eks, seeds)]


def pke_kg(params: PkeParams, rng: np.random.Generator) -> PkeKeyPair:
    return pke_kg_many(params, 1, rng)[0]


def pke_enc(ek: PkePublicKey, m: str, rng: np.random.Generator) -> PkeCiphertext:
    p = ek.params
    check_bits(m, what="plaintext")
    if len(m) > p.payload_bits:
        raise PayloadError(f"{len(m)}-bit message exceeds payload width {p.payload_bits}")
    bits = np.zeros(p.payload_bits, dtype=np.int64)
    if m:
        bits[: len(m)] = np.frombuffer(m.encode(), dtype=np.uint8) - ord("0")
    r = rng.integers(-1, 2, size=p.n, dtype=np.int64)
    e1 = rng.integers(-1, 2, size=p.payload_bits, dtype=np.int64)
    u = (ek.a.T @ r) % p.q
    v = (ek.b.T @ r + e1 + bits * (p.q // 2)) % p.q
    return PkeCiphertext(u, v, len(m))


def pke_dec(dk: PkeSecretKey, ct: PkeCiphertext) -> str:
    p = dk.params
    if ct.u.shape != (p.n,) or ct.v.shape != (p.payload_bits,):
        raise PayloadError("ciphertext dimensions do not match key parameters")
    s = _secret_matrix(dk.seed, p.n, p.payload_bits)
    d = (ct.v - s.T @ ct.u) % p.q
    bits = (d > p.q // 4) & (d < p.q - p.q // 4)
    return (bits[: ct.length].astype(np.uint8) + ord("0")).tobytes().decode()


def pke_enc_many(eks, msgs, rng: np.random.Generator) -> list[PkeCiphertext]:
    """Encrypt ``msgs[k]`` under ``eks[k]`` for all k in one batched computation."""
    if len(eks) != len(msgs):
        raise ValueError("need one message per key")
    if not eks:
        return []
    p = eks[0].params
    if any(ek.params != p for ek in eks):
        return [pke_enc(ek, m, rng) for ek, m in zip(eks, msgs)]
    count = len(eks)
    bits = np.zeros((count, p.payload_bits), dtype=np.int64)
    for k, m in enumerate(msgs):
        check_bits(m, what="plaintext")
        if len(m) > p.payload_bits:
            raise PayloadError(f"{len(m)}-bit message exceeds payload width {p.payload_bits}")
        if m:
            bits[k, : len(m)] = np.frombuffer(m.encode(), dtype=np.uint8) - ord("0")
    a = np.stack([ek.a for ek in eks])
    b = np.stack([ek.b for ek in eks])
    r = rng.integers(-1, 2, size=(count, p.n), dtype=np.int64)
    e1 = rng.integers(-1, 2, size=(count, p.payload_bits), dtype=np.int64)
    u = np.einsum("kij,ki->kj", a, r) % p.q
    v = (np.einsum("kil,ki->kl", b, r) + e1 + bits * (p.q // 2)) % p.q
    return [PkeCiphertext(u[k], v[k], len(msgs[k])) for k in range(count)]


def secret_key_from_bits(params: PkeParams, s: str) -> PkeSecretKey:
    check_bits(s, params.seed_bits, what="PKE secret key")
    return PkeSecretKey(params, int(s, 2))


# -- serialization -----------------------------------------------------------

def _arr_to_json(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "u16": base64.b64encode(a.astype("<u2").tobytes()).decode(),
    }


def _arr_from_json(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["u16"])
    return np.frombuffer(raw, dtype="<u2").astype(np.int64).reshape(obj["shape"])


def params_to_json(p: PkeParams) -> dict:
    return {"n": p.n, "q": p.q, "payload_bits": p.payload_bits, "seed_bits": p.seed_bits}


def params_from_json(obj: dict) -> PkeParams:
    return PkeParams(int(obj["n"]), int(obj["q"]), int(obj["payload_bits"]), int(obj["seed_bits"]))


def ek_to_json(ek: PkePublicKey) -> dict:
    return {"params": params_to_json(ek.params), "a": _arr_to_json(ek.a), "b": _arr_to_json(ek.b)}


def ek_from_json(obj: dict) -> PkePublicKey:
    return PkePublicKey(params_from_json(obj["params"]), _arr_from_json(obj["a"]), _arr_from_json(obj["b"]))


def dk_to_json(dk: PkeSecretKey) -> dict:
    return {"params": params_to_json(dk.params), "seed": format(dk.seed, "x")}


def dk_from_json(obj: dict) -> PkeSecretKey:
    return PkeSecretKey(params_from_json(obj["params"]), int(obj["seed"], 16))


def ct_to_json(ct: PkeCiphertext) -> dict:
    return {"u": _arr_to_json(ct.u), "v": _arr_to_json(ct.v), "length": ct.length}


def ct_from_json(obj: dict) -> PkeCiphertext:
    return PkeCiphertext(_arr_from_json(obj["u"]), _arr_from_json(obj["v"]), int(obj["length"]))
