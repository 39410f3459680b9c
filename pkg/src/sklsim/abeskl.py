"""Attribute-based encryption with secure key leasing.

Three layers:

* A toy ABE for the equality relation (identity-based encryption). Setup
  makes a PKE key pair per (position, bit) of the identity; a ciphertext for
  identity x XOR-shares ``m || 0^16`` and encrypts share k under (k, x_k).
  A key for y decrypts every share with (k, y_k); for y != x at least one
  share comes out as noise and the zero tag catches it.
* ``XorSkl``: a key-leasing scheme whose encryption is XOR-only, so it can
  be written as a garbled circuit. ``ek = (p0, p1)``, the quantum key is
  (|0, p0> + |1, p1>)/sqrt(2), and ``Enc(m; R) = (m^p0^R, m^p1^R, R)``.
  It hides nothing on its own; hiding comes from the ABE and garbling
  layers around it.
* The one-key conversion (``abe1_*``) and the q-key balls-and-bins grid
  conversion (``qabe_*``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

from . import pke, qsim
from .bits import check_bits, int_to_bits, random_bits, xor_bits
from .circuits import (
    BoolCircuit,
    Gate,
    GarbledCircuit,
    InvalidLabelError,
    garble,
    garbled_from_json,
    garbled_to_json,
    gc_eval,
)
from .pke import PkeParams
from .qsim import Ket, LayoutError, RegisterLayout
from .skl import VerificationOutcome

TAG_BITS = 16
LABEL_BITS = 128


# -- toy ABE for the equality relation -----------------------------------------

class ToyAbePublicKey:
    def __init__(self, n: int, params: PkeParams, eks=None, *, _seeds=None, _public_seed=None):
        self.n = n
        self.params = params
        if eks is not None:
            self.__dict__["eks"] = [list(p) for p in eks]
        self._seeds = _seeds
        self._public_seed = _public_seed

    @property
    def msg_bits(self) -> int:
        return self.params.payload_bits - TAG_BITS

    @cached_property
    def eks(self) -> list[list[pke.PkePublicKey]]:
        flat = pke.public_keys_from_seeds(self.params, self._seeds, self._public_seed)
        return [[flat[2 * k], flat[2 * k + 1]] for k in range(self.n)]


@dataclass(frozen=True)
class ToyAbeMasterKey:
    dks: tuple[tuple[pke.PkeSecretKey, pke.PkeSecretKey], ...]


@dataclass(frozen=True)
class ToyAbeSecretKey:
    y: str
    dks: tuple[pke.PkeSecretKey, ...]


@dataclass(frozen=True)
class ToyAbeCiphertext:
    x: str
    cts: tuple[pke.PkeCiphertext, ...]


def relation(x: str, y: str) -> bool:
    return x == y


def toy_abe_setup(n: int, rng: np.random.Generator, msg_bits: int = LABEL_BITS):
    if n < 1:
        raise ValueError("identity length must be at least 1")
    params = PkeParams(payload_bits=msg_bits + TAG_BITS)
    seeds = tuple(pke.draw_seed(params.seed_bits, rng) for _ in range(2 * n))
    pk = ToyAbePublicKey(n, params, _seeds=seeds, _public_seed=pke.draw_seed(64, rng))
    msk = ToyAbeMasterKey(tuple(
        (pke.PkeSecretKey(params, seeds[2 * k]), pke.PkeSecretKey(params, seeds[2 * k + 1]))
        for k in range(n)
    ))
    return pk, msk


def toy_abe_kg(msk: ToyAbeMasterKey, y: str) -> ToyAbeSecretKey:
    check_bits(y, len(msk.dks), what="identity")
    return ToyAbeSecretKey(y, tuple(msk.dks[k][int(yk)] for k, yk in enumerate(y)))


def _share_requests(pk: ToyAbePublicKey, x: str, m: str, rng):
    check_bits(x, pk.n, what="identity")
    check_bits(m, pk.msg_bits, what="message")
    payload = m + "0" * TAG_BITS
    shares = [random_bits(rng, len(payload)) for _ in range(pk.n - 1)]
    shares.append(reduce(xor_bits, shares, payload))
    eks = [pk.eks[k][int(xk)] for k, xk in enumerate(x)]
    return eks, shares


def toy_abe_enc_many(pks, x: str, msgs, rng: np.random.Generator) -> list[ToyAbeCiphertext]:
    """Encrypt ``msgs[i]`` under ``pks[i]`` for identity x, batching the PKE work."""
    eks, plains, spans = [], [], []
    for pk, m in zip(pks, msgs):
        e, s = _share_requests(pk, x, m, rng)
        spans.append((len(eks), len(eks) + len(e)))
        eks += e
        plains += s
    cts = pke.pke_enc_many(eks, plains, rng)
    return [ToyAbeCiphertext(x, tuple(cts[a:b])) for a, b in spans]


def toy_abe_enc(pk: ToyAbePublicKey, x: str, m: str, rng: np.random.Generator) -> ToyAbeCiphertext:
    return toy_abe_enc_many([pk], x, [m], rng)[0]


def toy_abe_dec(sk: ToyAbeSecretKey, x: str, ct: ToyAbeCiphertext) -> str | None:
    """Plaintext, or None when the identity does not match (detected by the zero tag)."""
    if len(x) != len(sk.y) or len(ct.cts) != len(sk.y):
        raise ValueError("identity width mismatch")
    payload = reduce(xor_bits, (pke.pke_dec(dk, c) for dk, c in zip(sk.dks, ct.cts)))
    if payload[-TAG_BITS:] != "0" * TAG_BITS:
        return None
    return payload[:-TAG_BITS]


# -- XOR-only key-leasing scheme -------------------------------------------------

def _xor_layout(ell: int) -> RegisterLayout:
    return RegisterLayout.of(("b", 1), ("d", ell))


@dataclass(frozen=True)
class XorSklKeys:
    ek: str  # p0 || p1
    qdk: Ket
    vk: tuple[str, str]


@dataclass(frozen=True)
class XorSklCiphertext:
    c0: str
    c1: str
    r: str

    def to_bits(self) -> str:
        return self.c0 + self.c1 + self.r

    @classmethod
    def from_bits(cls, s: str, ell: int) -> "XorSklCiphertext":
        check_bits(s, 3 * ell, what="XorSkl ciphertext")
        return cls(s[:ell], s[ell:2 * ell], s[2 * ell:])


def xor_skl_target(vk: tuple[str, str]) -> Ket:
    p0, p1 = vk
    return qsim.superpose(_xor_layout(len(p0)), [(("0", p0), 1), (("1", p1), 1)])


def xor_skl_kg(ell: int, rng: np.random.Generator) -> XorSklKeys:
    if ell < 1:
        raise ValueError("message length must be at least 1")
    p0 = random_bits(rng, ell)
    p1 = random_bits(rng, ell)
    if p0 == p1:  # keep the two branches distinct so the key is a genuine superposition
        p1 = xor_bits(p1, "0" * (ell - 1) + "1")
    return XorSklKeys(p0 + p1, xor_skl_target((p0, p1)), (p0, p1))


def xor_skl_enc(ek: str, m: str, r: str) -> XorSklCiphertext:
    ell = len(m)
    check_bits(ek, 2 * ell, what="XorSkl encryption key")
    check_bits(r, ell, what="randomness")
    p0, p1 = ek[:ell], ek[ell:]
    mr = xor_bits(m, r)
    return XorSklCiphertext(xor_bits(mr, p0), xor_bits(mr, p1), r)


def xor_skl_enc_circuit(m: str, r: str) -> BoolCircuit:
    """E[m, R]: input wires are the ek bits (p0 || p1); outputs c0 || c1 || R.

    m and R enter only through which constant wire a gate reads, so the
    gate list depends on len(m) alone.
    """
    ell = len(m)
    check_bits(m, what="message")
    check_bits(r, ell, what="randomness")
    n_in = 2 * ell
    gates = [Gate("CONST0"), Gate("CONST1")]
    const = {"0": n_in, "1": n_in + 1}
    mr = xor_bits(m, r)
    outs0, outs1, outsr = [], [], []
    for j in range(ell):
        gates.append(Gate("XOR", (j, const[mr[j]])))
        outs0.append(n_in + len(gates) - 1)
    for j in range(ell):
        gates.append(Gate("XOR", (ell + j, const[mr[j]])))
        outs1.append(n_in + len(gates) - 1)
    for j in range(ell):
        gates.append(Gate("XOR", (const["0"], const[r[j]])))
        outsr.append(n_in + len(gates) - 1)
    return BoolCircuit(n_in, tuple(gates), tuple(outs0 + outs1 + outsr))


def _xor_dec_map(ct: XorSklCiphertext):
    def dec(b: str, d: str) -> str:
        c = ct.c1 if b == "1" else ct.c0
        return xor_bits(xor_bits(c, d), ct.r)
    return dec


def xor_skl_dec(qdk: Ket, ct: XorSklCiphertext, rng: np.random.Generator) -> tuple[str, Ket]:
    ell = len(ct.r)
    if qdk.layout != _xor_layout(ell):
        raise LayoutError("key layout does not match ciphertext length")
    with_out = qsim.apply_classical(qdk, ["b", "d"], ("out", ell), _xor_dec_map(ct))
    value, post = qsim.measure_register(with_out, "out", rng)
    return value, qsim.discard_register(post, "out")


def xor_skl_vrfy(vk: tuple[str, str], returned: Ket, rng: np.random.Generator) -> VerificationOutcome:
    if returned is None:
        return VerificationOutcome(False, None)
    target = xor_skl_target(vk)
    if returned.layout != target.layout:
        raise LayoutError("returned key layout differs from the issued key")
    ok, post = qsim.project(returned, target, rng)
    return VerificationOutcome(ok, post)


# -- one-key conversion ------------------------------------------------------------

@dataclass(frozen=True)
class Abe1PublicKey:
    pks: tuple[tuple[ToyAbePublicKey, ToyAbePublicKey], ...]
    n: int
    msg_bits: int

    @property
    def ell_ek(self) -> int:
        return len(self.pks)


@dataclass(frozen=True)
class Abe1MasterKey:
    msks: tuple[tuple[ToyAbeMasterKey, ToyAbeMasterKey], ...]
    msg_bits: int


@dataclass(frozen=True)
class Abe1UserKey:
    abe_sks: tuple[ToyAbeSecretKey, ...]
    skl_ek: str
    qdk: Ket


@dataclass(frozen=True)
class Abe1Ciphertext:
    gc: GarbledCircuit
    abe_cts: tuple[tuple[ToyAbeCiphertext, ToyAbeCiphertext], ...]
    x: str


def abe1_setup(n: int, msg_bits: int, rng: np.random.Generator):
    """2 * ell_ek toy-ABE instances, ell_ek = 2 * msg_bits (the XorSkl key length)."""
    if msg_bits < 1:
        raise ValueError("message length must be at least 1")
    ell_ek = 2 * msg_bits
    pks, msks = [], []
    for _ in range(ell_ek):
        (pk0, msk0), (pk1, msk1) = toy_abe_setup(n, rng), toy_abe_setup(n, rng)
        pks.append((pk0, pk1))
        msks.append((msk0, msk1))
    return Abe1PublicKey(tuple(pks), n, msg_bits), Abe1MasterKey(tuple(msks), msg_bits)


def abe1_kg(msk: Abe1MasterKey, y: str, rng: np.random.Generator) -> tuple[Abe1UserKey, tuple[str, str]]:
    skl = xor_skl_kg(msk.msg_bits, rng)
    sks = tuple(toy_abe_kg(msk.msks[i][int(bit)], y) for i, bit in enumerate(skl.ek))
    return Abe1UserKey(sks, skl.ek, skl.qdk), skl.vk


def abe1_enc(pk: Abe1PublicKey, x: str, m: str, rng: np.random.Generator) -> Abe1Ciphertext:
    check_bits(x, pk.n, what="attribute")
    check_bits(m, pk.msg_bits, what="message")
    r = random_bits(rng, pk.msg_bits)
    pairs, gc = garble(xor_skl_enc_circuit(m, r), rng, kappa=LABEL_BITS)
    flat_pks = [pk.pks[i][b] for i in range(pk.ell_ek) for b in (0, 1)]
    labels = [int_to_bits(pairs[i][b], LABEL_BITS) for i in range(pk.ell_ek) for b in (0, 1)]
    cts = toy_abe_enc_many(flat_pks, x, labels, rng)
    return Abe1Ciphertext(gc, tuple((cts[2 * i], cts[2 * i + 1]) for i in range(pk.ell_ek)), x)


def abe1_dec(
    qusk: Abe1UserKey, x: str, ct: Abe1Ciphertext, rng: np.random.Generator
) -> tuple[str | None, Abe1UserKey]:
    labels = []
    for i, bit in enumerate(qusk.skl_ek):
        lab = toy_abe_dec(qusk.abe_sks[i], x, ct.abe_cts[i][int(bit)])
        if lab is None:
            return None, qusk
        labels.append(int(lab, 2))
    try:
        skl_ct = XorSklCiphertext.from_bits(gc_eval(ct.gc, labels), len(qusk.skl_ek) // 2)
    except InvalidLabelError:
        return None, qusk
    m, post = xor_skl_dec(qusk.qdk, skl_ct, rng)
    return m, Abe1UserKey(qusk.abe_sks, qusk.skl_ek, post)


def abe1_vrfy(vk: tuple[str, str], returned: Abe1UserKey | None, rng) -> VerificationOutcome:
    """Verifies the quantum part only; the classical ABE keys are ignored."""
    if returned is None:
        return VerificationOutcome(False, None)
    out = xor_skl_vrfy(vk, returned.qdk, rng)
    post = None if out.post_key is None else Abe1UserKey(returned.abe_sks, returned.skl_ek, out.post_key)
    return VerificationOutcome(out.decision, post)


# -- q-key grid conversion -----------------------------------------------------------

@dataclass(frozen=True)
class QAbePublicKey:
    grid: tuple[tuple[Abe1PublicKey, ...], ...]  # [row i][column j]

    @property
    def v(self) -> int:
        return len(self.grid)

    @property
    def w(self) -> int:
        return len(self.grid[0])


@dataclass(frozen=True)
class QAbeMasterKey:
    grid: tuple[tuple[Abe1MasterKey, ...], ...]


@dataclass(frozen=True)
class QAbeUserKey:
    columns: tuple[int, ...]
    keys: tuple[Abe1UserKey, ...]


@dataclass(frozen=True)
class QAbeCiphertext:
    grid: tuple[tuple[Abe1Ciphertext, ...], ...]


def qabe_params(mode: str, lam: int, q: int, n: int = 0) -> tuple[int, int]:
    """Grid size (v, w) for q distinguishing keys."""
    if q < 1:
        raise ValueError("q must be at least 1")
    if mode == "selective":
        return lam, q * q
    if mode == "adaptive":
        return 2 * (lam + n), q * q
    raise ValueError(f"unknown mode {mode!r}")


def qabe_setup(v: int, w: int, n: int, msg_bits: int, rng: np.random.Generator):
    if v < 1 or w < 1:
        raise ValueError("grid dimensions must be at least 1")
    pks, msks = [], []
    for _ in range(v):
        row = [abe1_setup(n, msg_bits, rng) for _ in range(w)]
        pks.append(tuple(p for p, _ in row))
        msks.append(tuple(m for _, m in row))
    return QAbePublicKey(tuple(pks)), QAbeMasterKey(tuple(msks))


def qabe_kg(msk: QAbeMasterKey, y: str, rng: np.random.Generator):
    w = len(msk.grid[0])
    cols = tuple(int(rng.integers(0, w)) for _ in msk.grid)
    keys, vks = [], []
    for row, j in zip(msk.grid, cols):
        usk, vk = abe1_kg(row[j], y, rng)
        keys.append(usk)
        vks.append(vk)
    return QAbeUserKey(cols, tuple(keys)), tuple(vks)


def xor_shares(m: str, v: int, rng: np.random.Generator) -> list[str]:
    """v shares, uniformly random subject to XOR-ing to m."""
    shares = [random_bits(rng, len(m)) for _ in range(v - 1)]
    shares.append(reduce(xor_bits, shares, m))
    return shares


def qabe_enc(pk: QAbePublicKey, x: str, m: str, rng: np.random.Generator) -> QAbeCiphertext:
    shares = xor_shares(m, pk.v, rng)
    return QAbeCiphertext(tuple(
        tuple(abe1_enc(cell, x, mu, rng) for cell in row)
        for row, mu in zip(pk.grid, shares)
    ))


def qabe_dec(qusk: QAbeUserKey, x: str, ct: QAbeCiphertext, rng: np.random.Generator):
    shares, posts = [], []
    for j, usk, row in zip(qusk.columns, qusk.keys, ct.grid):
        mu, post = abe1_dec(usk, x, row[j], rng)
        posts.append(post)
        shares.append(mu)
    post_key = QAbeUserKey(qusk.columns, tuple(posts))
    if any(s is None for s in shares):
        return None, post_key
    return reduce(xor_bits, shares), post_key


def qabe_vrfy(vks, returned: QAbeUserKey | None, rng) -> VerificationOutcome:
    if returned is None:
        return VerificationOutcome(False, None)
    if len(returned.keys) != len(vks):
        raise LayoutError(f"returned key has {len(returned.keys)} rows, expected {len(vks)}")
    outcomes = [abe1_vrfy(vk, usk, rng) for vk, usk in zip(vks, returned.keys)]
    post = QAbeUserKey(returned.columns, tuple(
        o.post_key for o in outcomes
    ))
    return VerificationOutcome(all(o.decision for o in outcomes), post)


def bins_distinctness_probability(v: int, w: int, q: int) -> float:
    """Probability that no row gives q keys pairwise distinct columns.

    Each of q keys picks a column uniformly in every one of v rows.
    """
    if q > w:
        return 1.0
    all_distinct = math.perm(w, q) / w**q
    return (1.0 - all_distinct) ** v


def bins_monte_carlo(v: int, w: int, q: int, samples: int, rng: np.random.Generator) -> float:
    cols = rng.integers(0, w, size=(samples, v, q))
    cols.sort(axis=2)
    distinct_row = np.all(np.diff(cols, axis=2) != 0, axis=2) if q > 1 else np.ones((samples, v), bool)
    return float(np.mean(~distinct_row.any(axis=1)))


# -- serialization -----------------------------------------------------------------

def _toy_pk_to_json(pk: ToyAbePublicKey) -> dict:
    return {
        "n": pk.n,
        "params": pke.params_to_json(pk.params),
        "eks": [[pke.ek_to_json(e) for e in pair] for pair in pk.eks],
    }


def _toy_pk_from_json(obj: dict) -> ToyAbePublicKey:
    eks = [[pke.ek_from_json(e) for e in pair] for pair in obj["eks"]]
    return ToyAbePublicKey(int(obj["n"]), pke.params_from_json(obj["params"]), eks)


def _toy_sk_to_json(sk: ToyAbeSecretKey) -> dict:
    return {"y": sk.y, "dks": [pke.dk_to_json(d) for d in sk.dks]}


def _toy_sk_from_json(obj: dict) -> ToyAbeSecretKey:
    return ToyAbeSecretKey(obj["y"], tuple(pke.dk_from_json(d) for d in obj["dks"]))


def _toy_ct_to_json(ct: ToyAbeCiphertext) -> dict:
    return {"x": ct.x, "cts": [pke.ct_to_json(c) for c in ct.cts]}


def _toy_ct_from_json(obj: dict) -> ToyAbeCiphertext:
    return ToyAbeCiphertext(obj["x"], tuple(pke.ct_from_json(c) for c in obj["cts"]))


def abe1_pk_to_json(pk: Abe1PublicKey) -> dict:
    return {
        "n": pk.n,
        "msg_bits": pk.msg_bits,
        "pks": [[_toy_pk_to_json(p) for p in pair] for pair in pk.pks],
    }


def abe1_pk_from_json(obj: dict) -> Abe1PublicKey:
    pks = tuple(tuple(_toy_pk_from_json(p) for p in pair) for pair in obj["pks"])
    return Abe1PublicKey(pks, int(obj["n"]), int(obj["msg_bits"]))


def abe1_ct_to_json(ct: Abe1Ciphertext) -> dict:
    return {
        "x": ct.x,
        "gc": garbled_to_json(ct.gc),
        "abe_cts": [[_toy_ct_to_json(c) for c in pair] for pair in ct.abe_cts],
    }


def abe1_ct_from_json(obj: dict) -> Abe1Ciphertext:
    cts = tuple(tuple(_toy_ct_from_json(c) for c in pair) for pair in obj["abe_cts"])
    return Abe1Ciphertext(garbled_from_json(obj["gc"]), cts, obj["x"])


def abe1_usk_to_json(usk: Abe1UserKey) -> dict:
    """The quantum part goes through the ket format; the ABE keys and skl.ek are classical."""
    return {
        "abe_sks": [_toy_sk_to_json(s) for s in usk.abe_sks],
        "skl_ek": usk.skl_ek,
        "qdk": qsim.ket_to_json(usk.qdk),
    }


def abe1_usk_from_json(obj: dict) -> Abe1UserKey:
    return Abe1UserKey(
        tuple(_toy_sk_from_json(s) for s in obj["abe_sks"]),
        obj["skl_ek"],
        qsim.ket_from_json(obj["qdk"]),
    )


def qabe_pk_to_json(pk: QAbePublicKey) -> dict:
    return {"grid": [[abe1_pk_to_json(c) for c in row] for row in pk.grid]}


def qabe_pk_from_json(obj: dict) -> QAbePublicKey:
    return QAbePublicKey(tuple(tuple(abe1_pk_from_json(c) for c in row) for row in obj["grid"]))


def qabe_ct_to_json(ct: QAbeCiphertext) -> dict:
    return {"grid": [[abe1_ct_to_json(c) for c in row] for row in ct.grid]}


def qabe_ct_from_json(obj: dict) -> QAbeCiphertext:
    return QAbeCiphertext(tuple(tuple(abe1_ct_from_json(c) for c in row) for row in obj["grid"]))


def qabe_usk_to_json(usk: QAbeUserKey) -> dict:
    return {"columns": list(usk.columns), "keys": [abe1_usk_to_json(k) for k in usk.keys]}


def qabe_usk_from_json(obj: dict) -> QAbeUserKey:
    return QAbeUserKey(
        tuple(int(j) for j in obj["columns"]), tuple(abe1_usk_from_json(k) for k in obj["keys"])
    )
