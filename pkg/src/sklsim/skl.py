"""Public-key encryption with secure key leasing over the simulator.

Block i of the quantum decryption key is (|0, dk_{i,0}> + |1, dk_{i,1}>)/sqrt(2)
over registers ``b{i}`` and ``dk{i}``, where dk_{i,b} are decryption keys of
independent CoIC key pairs. Encryption encrypts message block i under both
(i, 0) and (i, 1). Decryption writes Dec(dk, ct_{i,b}) into a fresh register
branch by branch, measures it and drops it again; since both branches agree
on honest ciphertexts the key is left untouched. Verification is the
projection onto the honest key.

On top of the parallel-repetition scheme sit three wrappers:

* :class:`OmurScheme` runs a decryption test before verifying,
* :class:`GlScheme` encrypts one bit as ``(Enc(x), r, <x, r> XOR m)``,
* :func:`gl_enc_multi` / :func:`gl_dec_multi` encrypt bit by bit.

A key state is either a tuple of per-block kets (what honest parties hold)
or one joint ket over all block registers (what an entangling adversary may
return).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import coic, qsim
from .bits import check_bits, inner_product_bits, random_bits, split_blocks
from .coic import CoicCiphertext, CoicPublicKey
from .cpfe import CorruptCiphertextError, CpfeSecretKey
from .qsim import Ket, LayoutError, RegisterLayout

KeyState = Union[tuple[Ket, ...], Ket]


def b_reg(i: int) -> str:
    return f"b{i}"


def dk_reg(i: int) -> str:
    return f"dk{i}"


def out_reg(i: int) -> str:
    return f"out{i}"


@dataclass(frozen=True)
class SklPublicKey:
    blocks: tuple[tuple[CoicPublicKey, CoicPublicKey], ...]
    msg_bits: int

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def message_bits(self) -> int:
        return self.num_blocks * self.msg_bits


@dataclass(frozen=True)
class SklVerificationKey:
    dks: tuple[tuple[CpfeSecretKey, CpfeSecretKey], ...]

    @property
    def num_blocks(self) -> int:
        return len(self.dks)

    @property
    def attr_bits(self) -> int:
        return len(self.dks[0][0].x)

    @property
    def dk_width(self) -> int:
        return len(self.dks[0][0].to_bits())

    def block_layout(self, i: int) -> RegisterLayout:
        return RegisterLayout.of((b_reg(i), 1), (dk_reg(i), self.dk_width))

    def block_target(self, i: int) -> Ket:
        d0, d1 = self.dks[i]
        return qsim.superpose(
            self.block_layout(i), [(("0", d0.to_bits()), 1), (("1", d1.to_bits()), 1)]
        )

    def joint_target(self) -> Ket:
        return qsim.tensor_all([self.block_target(i) for i in range(self.num_blocks)])


@dataclass(frozen=True)
class SklKeyTriple:
    ek: object
    qdk: KeyState
    vk: object


@dataclass(frozen=True)
class SklCiphertext:
    blocks: tuple[tuple[CoicCiphertext, CoicCiphertext], ...]
    msg_bits: int


@dataclass(frozen=True)
class GlCiphertext:
    ow_ct: SklCiphertext
    r: str
    b: int


@dataclass(frozen=True)
class VerificationOutcome:
    decision: bool
    post_key: KeyState | None

    def __bool__(self) -> bool:
        return self.decision


# -- key states --------------------------------------------------------------

def merge_key(state: KeyState) -> Ket:
    """Joint ket over all block registers."""
    if isinstance(state, Ket):
        return state
    return qsim.tensor_all(list(state))


def key_blocks(state: KeyState) -> int:
    if isinstance(state, Ket):
        return sum(1 for n in state.layout.names if n.startswith("b"))
    return len(state)


# -- parallel-repetition scheme ----------------------------------------------

def skl_kg(
    num_blocks: int,
    rng: np.random.Generator,
    msg_bits: int = coic.DEFAULT_MSG_BITS,
    attr_bits: int = coic.DEFAULT_ATTR_BITS,
) -> SklKeyTriple:
    if num_blocks < 1:
        raise ValueError("need at least one block")
    pairs = [
        (coic.coic_kg(attr_bits, msg_bits, rng), coic.coic_kg(attr_bits, msg_bits, rng))
        for _ in range(num_blocks)
    ]
    ek = SklPublicKey(tuple((p0.ek, p1.ek) for p0, p1 in pairs), msg_bits)
    vk = SklVerificationKey(tuple((p0.dk, p1.dk) for p0, p1 in pairs))
    qdk = tuple(vk.block_target(i) for i in range(num_blocks))
    return SklKeyTriple(ek, qdk, vk)


def skl_enc(ek: SklPublicKey, m: str, rng: np.random.Generator) -> SklCiphertext:
    check_bits(m, what="message")
    parts = split_blocks(m, ek.num_blocks, ek.msg_bits)
    blocks = tuple(
        (coic.coic_enc(e0, mi, rng), coic.coic_enc(e1, mi, rng))
        for (e0, e1), mi in zip(ek.blocks, parts)
    )
    return SklCiphertext(blocks, ek.msg_bits)


def _decrypt_block(
    ket: Ket, i: int, ct: SklCiphertext, attr_bits: int, rng: np.random.Generator
) -> tuple[str | None, Ket]:
    """Coherent decryption of block i inside ``ket``; returns (m_i or None, post-state)."""
    width = ct.msg_bits
    branches = ct.blocks[i]
    fail = "1" + "0" * width

    def dec(b: str, dk_bits: str) -> str:
        try:
            dk = coic.dk_from_bits(dk_bits, attr_bits)
            return "0" + coic.coic_dec(dk, branches[int(b)])
        except (CorruptCiphertextError, ValueError):
            return fail

    with_out = qsim.apply_classical(ket, [b_reg(i), dk_reg(i)], (out_reg(i), width + 1), dec)
    value, post = qsim.measure_register(with_out, out_reg(i), rng)
    post = qsim.discard_register(post, out_reg(i))
    return (None if value[0] == "1" else value[1:]), post


def _attr_bits_of(ket: Ket, i: int) -> int:
    width = ket.layout.widths[ket.layout.index(dk_reg(i))]
    seed_bits = coic.cpfe.label_params().seed_bits
    if width % (seed_bits + 1):
        raise LayoutError(f"register {dk_reg(i)!r} has width {width}, not a CoIC key")
    return width // (seed_bits + 1)


def skl_dec(
    qdk: KeyState, ct: SklCiphertext, rng: np.random.Generator | None = None
) -> tuple[str | None, KeyState]:
    """Decrypt block by block; returns (message or None on failure, post-decryption key).

    ``rng`` drives the output-register measurements. It only matters for
    malformed keys whose branches disagree; honest decryption is deterministic.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    nblocks = len(ct.blocks)
    if key_blocks(qdk) != nblocks:
        raise LayoutError(f"key has {key_blocks(qdk)} blocks, ciphertext has {nblocks}")
    parts: list[str | None] = []
    if isinstance(qdk, Ket):
        state = qdk
        for i in range(nblocks):
            mi, state = _decrypt_block(state, i, ct, _attr_bits_of(state, i), rng)
            parts.append(mi)
        post: KeyState = state
    else:
        new_blocks = []
        for i, ket in enumerate(qdk):
            mi, ket = _decrypt_block(ket, i, ct, _attr_bits_of(ket, i), rng)
            parts.append(mi)
            new_blocks.append(ket)
        post = tuple(new_blocks)
    if any(p is None for p in parts):
        return None, post
    return "".join(parts), post


def skl_vrfy(vk: SklVerificationKey, returned: KeyState, rng: np.random.Generator) -> VerificationOutcome:
    """Projective verification onto the honest key; accepts iff every block does."""
    if returned is None:
        return VerificationOutcome(False, None)
    if isinstance(returned, Ket):
        target = vk.joint_target()
        if returned.layout != target.layout:
            raise LayoutError("returned key layout differs from the issued key")
        ok, post = qsim.project(returned, target, rng)
        return VerificationOutcome(ok, post)
    if len(returned) != vk.num_blocks:
        raise LayoutError(f"returned key has {len(returned)} blocks, expected {vk.num_blocks}")
    decisions, posts = [], []
    for i, ket in enumerate(returned):
        target = vk.block_target(i)
        if ket.layout != target.layout:
            raise LayoutError(f"block {i}: returned layout differs from the issued key")
        ok, post = qsim.project(ket, target, rng)
        decisions.append(ok)
        posts.append(post)
    return VerificationOutcome(all(decisions), tuple(posts))


def verification_probability(vk: SklVerificationKey, returned: KeyState) -> float:
    """Exact acceptance probability of :func:`skl_vrfy` on ``returned``."""
    if isinstance(returned, Ket):
        return qsim.projection_analysis(returned, vk.joint_target()).accept_probability
    p = 1.0
    for i, ket in enumerate(returned):
        p *= qsim.projection_analysis(ket, vk.block_target(i)).accept_probability
    return p


# -- Goldreich-Levin lift ----------------------------------------------------

def gl_enc(ek: SklPublicKey, m: int, rng: np.random.Generator) -> GlCiphertext:
    if m not in (0, 1):
        raise ValueError("plaintext must be a single bit")
    n = ek.message_bits
    x = random_bits(rng, n)
    r = random_bits(rng, n)
    return GlCiphertext(skl_enc(ek, x, rng), r, inner_product_bits(x, r) ^ m)


def gl_dec(
    qdk: KeyState, ct: GlCiphertext, rng: np.random.Generator | None = None
) -> tuple[int | None, KeyState]:
    x, post = skl_dec(qdk, ct.ow_ct, rng)
    if x is None:
        return None, post
    return inner_product_bits(x, ct.r) ^ ct.b, post


def gl_enc_multi(ek: SklPublicKey, m: str, rng: np.random.Generator) -> list[GlCiphertext]:
    check_bits(m, what="message")
    return [gl_enc(ek, int(bit), rng) for bit in m]


def gl_dec_multi(
    qdk: KeyState, cts: list[GlCiphertext], rng: np.random.Generator | None = None
) -> tuple[str | None, KeyState]:
    bits = []
    for ct in cts:
        bit, qdk = gl_dec(qdk, ct, rng)
        if bit is None:
            return None, qdk
        bits.append(str(bit))
    return "".join(bits), qdk


# -- one-more unreturnability wrapper ----------------------------------------

def omur_vrfy(
    vk: SklVerificationKey, ek: SklPublicKey, returned: KeyState, rng: np.random.Generator
) -> VerificationOutcome:
    """Decrypt a fresh random message with ``returned`` first, then verify."""
    if returned is None:
        return VerificationOutcome(False, None)
    m = random_bits(rng, ek.message_bits)
    ct = skl_enc(ek, m, rng)
    m2, post = skl_dec(returned, ct, rng)
    if m2 != m:
        return VerificationOutcome(False, post)
    return skl_vrfy(vk, post, rng)


# -- scheme objects ------------------------------------------------------------

@dataclass(frozen=True)
class OmurVerificationKey:
    vk: SklVerificationKey
    ek: SklPublicKey


class OwScheme:
    """Parallel repetition over ``num_blocks`` blocks; ``num_blocks=1`` is the basic scheme."""

    name = "ow"

    def __init__(self, num_blocks: int = 1, msg_bits: int = coic.DEFAULT_MSG_BITS,
                 attr_bits: int = coic.DEFAULT_ATTR_BITS):
        self.num_blocks = num_blocks
        self.msg_bits = msg_bits
        self.attr_bits = attr_bits

    def __repr__(self):
        return f"{type(self).__name__}(num_blocks={self.num_blocks}, msg_bits={self.msg_bits})"

    @property
    def message_bits(self) -> int:
        return self.num_blocks * self.msg_bits

    def sample_message(self, rng):
        return random_bits(rng, self.message_bits)

    def kg(self, rng) -> SklKeyTriple:
        return skl_kg(self.num_blocks, rng, self.msg_bits, self.attr_bits)

    def enc(self, ek, m, rng):
        return skl_enc(ek, m, rng)

    def dec(self, qdk, ct, rng=None):
        return skl_dec(qdk, ct, rng)

    def vrfy(self, vk, returned, rng) -> VerificationOutcome:
        return skl_vrfy(vk, returned, rng)

    def acceptance_probability(self, vk, returned) -> float:
        return verification_probability(vk, returned)


def basic_scheme(msg_bits: int = coic.DEFAULT_MSG_BITS) -> OwScheme:
    return OwScheme(1, msg_bits)


class OmurScheme:
    """Same keys, encryption and decryption as ``base``; verification adds a decryption test."""

    name = "omur"

    def __init__(self, base: OwScheme):
        self.base = base

    def __repr__(self):
        return f"OmurScheme({self.base!r})"

    num_blocks = property(lambda self: self.base.num_blocks)
    message_bits = property(lambda self: self.base.message_bits)

    def sample_message(self, rng):
        return self.base.sample_message(rng)

    def kg(self, rng) -> SklKeyTriple:
        t = self.base.kg(rng)
        return SklKeyTriple(t.ek, t.qdk, OmurVerificationKey(t.vk, t.ek))

    def enc(self, ek, m, rng):
        return self.base.enc(ek, m, rng)

    def dec(self, qdk, ct, rng=None):
        return self.base.dec(qdk, ct, rng)

    def vrfy(self, vk: OmurVerificationKey, returned, rng) -> VerificationOutcome:
        return omur_vrfy(vk.vk, vk.ek, returned, rng)


class GlScheme:
    """Single-bit scheme from a one-way scheme; key generation and verification are the base's."""

    name = "ind"
    message_bits = 1

    def __init__(self, base):
        self.base = base

    def __repr__(self):
        return f"GlScheme({self.base!r})"

    num_blocks = property(lambda self: self.base.num_blocks)

    def sample_message(self, rng):
        return str(int(rng.integers(0, 2)))

    def kg(self, rng) -> SklKeyTriple:
        return self.base.kg(rng)

    def enc(self, ek, m, rng):
        return gl_enc(ek, int(m), rng)

    def dec(self, qdk, ct, rng=None):
        bit, post = gl_dec(qdk, ct, rng)
        return (None if bit is None else str(bit)), post

    def vrfy(self, vk, returned, rng) -> VerificationOutcome:
        return self.base.vrfy(vk, returned, rng)


# -- serialization -----------------------------------------------------------

QUANTUM_BANNER = "SIMULATED-QUANTUM-STATE"


def key_state_to_json(state: KeyState) -> dict:
    if isinstance(state, Ket):
        return {"banner": QUANTUM_BANNER, "joint": qsim.ket_to_json(state)}
    return {"banner": QUANTUM_BANNER, "blocks": [qsim.ket_to_json(k) for k in state]}


def key_state_from_json(obj: dict) -> KeyState:
    if obj.get("banner") != QUANTUM_BANNER:
        raise LayoutError("key state file lacks the simulated-quantum-state banner")
    if "joint" in obj:
        return qsim.ket_from_json(obj["joint"])
    if "blocks" not in obj:
        raise LayoutError("key state needs a 'blocks' or 'joint' field")
    return tuple(qsim.ket_from_json(k) for k in obj["blocks"])


def ek_to_json(ek: SklPublicKey) -> dict:
    return {
        "msg_bits": ek.msg_bits,
        "blocks": [[coic.ek_to_json(e) for e in pair] for pair in ek.blocks],
    }


def ek_from_json(obj: dict) -> SklPublicKey:
    return SklPublicKey(
        tuple(tuple(coic.ek_from_json(e) for e in pair) for pair in obj["blocks"]),
        int(obj["msg_bits"]),
    )


def vk_to_json(vk: SklVerificationKey) -> dict:
    return {"dks": [[coic.cpfe.sk_to_json(d) for d in pair] for pair in vk.dks]}


def vk_from_json(obj: dict) -> SklVerificationKey:
    return SklVerificationKey(
        tuple(tuple(coic.cpfe.sk_from_json(d) for d in pair) for pair in obj["dks"])
    )


def ct_to_json(ct: SklCiphertext) -> dict:
    return {
        "msg_bits": ct.msg_bits,
        "blocks": [[coic.ct_to_json(c) for c in pair] for pair in ct.blocks],
    }


def ct_from_json(obj: dict) -> SklCiphertext:
    return SklCiphertext(
        tuple(tuple(coic.ct_from_json(c) for c in pair) for pair in obj["blocks"]),
        int(obj["msg_bits"]),
    )


def gl_ct_to_json(ct: GlCiphertext) -> dict:
    return {"ow_ct": ct_to_json(ct.ow_ct), "r": ct.r, "b": ct.b}


def gl_ct_from_json(obj: dict) -> GlCiphertext:
    return GlCiphertext(ct_from_json(obj["ow_ct"]), obj["r"], int(obj["b"]))
