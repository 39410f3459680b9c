"""Security experiments as Monte-Carlo games with pluggable adversaries.

Every game is a function of one ``numpy.random.Generator`` per trial. The
per-trial generators are spawned from the master seed by trial index, so a
report depends only on (game, strategy, trials, seed).

Strategies for the key-leasing games see the quantum key as a tuple of
per-block kets and return a list of key states to hand to the verification
oracle, plus side information they keep for the challenge phase.

The CoIC game has its own strategy shape because the adversary also picks
the challenge messages and gets a one-shot projection oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from . import coic, qsim
from .bits import random_bits
from .coic import CoicCiphertext
from .cpfe import CorruptCiphertextError
from .qsim import Ket, RegisterLayout
from .skl import KeyState


# -- reports -------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    accepted: bool | None = None  # did the returned key pass verification
    coin: int | None = None
    output: int | None = None


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    trials: int
    successes: int
    estimate: float
    wilson_ci_95: tuple[float, float]
    analytic: float | None
    seed: int
    extra: dict = field(default_factory=dict)

    def contains(self, p: float, confidence: float = 0.95) -> bool:
        lo, hi = wilson_interval(self.successes, self.trials, confidence)
        return lo <= p <= hi

    def to_json(self) -> dict:
        d = asdict(self)
        d["wilson_ci_95"] = list(self.wilson_ci_95)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _rate(k: int, n: int) -> float | None:
    return k / n if n else None


def monte_carlo(
    trial: Callable[[np.random.Generator], bool | TrialResult],
    trials: int,
    seed: int,
    name: str = "experiment",
    analytic: float | None = None,
) -> ExperimentReport:
    """Run ``trial`` on independent generators spawned from ``seed``."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    results = [trial(np.random.default_rng(ss)) for ss in np.random.SeedSequence(seed).spawn(trials)]
    results = [r if isinstance(r, TrialResult) else TrialResult(bool(r)) for r in results]
    k = sum(r.success for r in results)
    extra: dict = {}
    verified = [r for r in results if r.accepted is not None]
    if verified:
        acc = [r for r in verified if r.accepted]
        extra["accepted"] = len(acc)
        extra["acceptance_rate"] = len(acc) / len(verified)
        extra["conditional_successes"] = sum(r.success for r in acc)
        extra["conditional_estimate"] = _rate(extra["conditional_successes"], len(acc))
    coined = [r for r in results if r.coin is not None]
    if coined:
        ones = [[r.output for r in coined if r.coin == c] for c in (0, 1)]
        p = [_rate(sum(o), len(o)) for o in ones]
        extra["advantage"] = None if None in p else abs(p[0] - p[1])
    return ExperimentReport(name, trials, k, k / trials, wilson_interval(k, trials), analytic, seed, extra)


# -- strategies for the key-leasing games ----------------------------------------

@dataclass
class GameContext:
    scheme: object
    ek: object
    num_blocks: int


def _measure_blocks(key: KeyState, rng, count: int | None = None) -> tuple[Ket, ...]:
    blocks = list(key) if not isinstance(key, Ket) else [key]
    count = len(blocks) if count is None else count
    out = []
    for i, ket in enumerate(blocks):
        if i < count:
            _, ket = qsim.measure_all(ket, rng)
        out.append(ket)
    return tuple(out)


def _junk_like(key: KeyState, rng) -> tuple[Ket, ...]:
    blocks = list(key) if not isinstance(key, Ket) else [key]
    return tuple(
        qsim.basis_ket(k.layout, [random_bits(rng, w) for w in k.layout.widths]) for k in blocks
    )


def _decrypt_with(side, ct, ctx: GameContext, rng):
    try:
        m, _ = ctx.scheme.dec(side, ct, rng)
    except (qsim.LayoutError, ValueError):
        m = None
    return m if m is not None else ctx.scheme.sample_message(rng)


@dataclass(frozen=True)
class AdversaryStrategy:
    """``on_key(key, ctx, rng) -> (returns, side)``; ``on_challenge(side, ct, ctx, rng) -> guess``."""

    name: str
    on_key: Callable
    on_challenge: Callable
    descriptor: tuple = ()

    def __repr__(self):
        return f"AdversaryStrategy({self.name!r})"


def _guess(side, ct, ctx, rng):
    return ctx.scheme.sample_message(rng)


def strategy_honest() -> AdversaryStrategy:
    """Return the key untouched; guess at random afterwards."""
    return AdversaryStrategy("honest", lambda key, ctx, rng: ([key], None), _guess, ("honest",))


def strategy_measure_keep() -> AdversaryStrategy:
    """Measure every block, return the collapsed key and decrypt with a classical copy of it."""
    def on_key(key, ctx, rng):
        collapsed = _measure_blocks(key, rng)
        return [collapsed], collapsed

    return AdversaryStrategy("measure_keep", on_key, _decrypt_with, ("measure_keep",))


def strategy_partial_measure(k: int, num_blocks: int | None = None) -> AdversaryStrategy:
    """Measure the first k blocks, return the state, guess at random."""
    if k < 0 or (num_blocks is not None and k > num_blocks):
        raise ValueError(f"cannot measure {k} blocks of {num_blocks}")

    def on_key(key, ctx, rng):
        if k > ctx.num_blocks:
            raise ValueError(f"cannot measure {k} blocks of {ctx.num_blocks}")
        return [_measure_blocks(key, rng, k)], None

    return AdversaryStrategy(f"partial_measure({k})", on_key, _guess, ("partial_measure", k))


def strategy_never_return() -> AdversaryStrategy:
    """Keep the key and never query verification."""
    return AdversaryStrategy(
        "never_return", lambda key, ctx, rng: ([], key), _decrypt_with, ("never_return",)
    )


def strategy_junk() -> AdversaryStrategy:
    """Return uniformly random classical strings of the right layout; keep the real key."""
    return AdversaryStrategy(
        "junk", lambda key, ctx, rng: ([_junk_like(key, rng)], key), _decrypt_with, ("junk",)
    )


def strategy_measure_clone() -> AdversaryStrategy:
    """Measure the key, then return two copies of the collapsed classical key."""
    def on_key(key, ctx, rng):
        collapsed = _measure_blocks(key, rng)
        return [collapsed, collapsed], collapsed

    return AdversaryStrategy("measure_clone", on_key, _decrypt_with, ("measure_clone",))


STRATEGIES = {
    "honest": strategy_honest,
    "measure_keep": strategy_measure_keep,
    "never_return": strategy_never_return,
    "junk": strategy_junk,
    "measure_clone": strategy_measure_clone,
}


def strategy_by_name(name: str) -> AdversaryStrategy:
    base, _, arg = name.partition(":")
    if base == "partial_measure":
        return strategy_partial_measure(int(arg or 1))
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}") from None


def analytic_pass_probability(strategy, num_blocks: int) -> float:
    """Exact acceptance probability of one returned key, computed by projecting in the simulator.

    Uses a stand-in block (|0,d0> + |1,d1>)/sqrt(2) with d0 != d1; the
    acceptance of a collapsed block does not depend on the key values.
    """
    desc = strategy.descriptor if isinstance(strategy, AdversaryStrategy) else tuple(
        strategy if isinstance(strategy, (tuple, list)) else (strategy,)
    )
    kind = desc[0]
    if kind in ("never_return",):
        return 0.0
    if kind == "honest":
        measured = 0
    elif kind in ("measure_keep", "measure_clone"):
        measured = num_blocks
    elif kind == "partial_measure":
        measured = int(desc[1])
        if measured > num_blocks:
            raise ValueError(f"cannot measure {measured} blocks of {num_blocks}")
    else:
        raise ValueError(f"no analytic value for strategy {kind!r}")
    layout = RegisterLayout.of(("b", 1), ("dk", 1))
    target = qsim.superpose(layout, [(("0", "0"), 1), (("1", "1"), 1)])
    collapsed = qsim.basis_ket(layout, ("0", "0"))
    p_measured = qsim.projection_analysis(collapsed, target).accept_probability
    p_honest = qsim.projection_analysis(target, target).accept_probability
    return math.prod([p_measured] * measured + [p_honest] * (num_blocks - measured))


# -- key-leasing games -------------------------------------------------------------

def _deliver_and_verify(scheme, strategy, rng):
    keys = scheme.kg(rng)
    ctx = GameContext(scheme, keys.ek, getattr(scheme, "num_blocks", 1))
    returns, side = strategy.on_key(keys.qdk, ctx, rng)
    accepted = 0
    for r in returns:
        accepted += scheme.vrfy(keys.vk, r, rng).decision
    return keys, ctx, side, accepted


def acceptance_trial(scheme, strategy, rng) -> TrialResult:
    _, _, _, accepted = _deliver_and_verify(scheme, strategy, rng)
    return TrialResult(accepted > 0, accepted > 0)


def ow_kla_trial(scheme, strategy, rng) -> TrialResult:
    keys, ctx, side, accepted = _deliver_and_verify(scheme, strategy, rng)
    if not accepted:
        return TrialResult(False, False)  # V is still bottom: the experiment outputs 0
    m = scheme.sample_message(rng)
    ct = scheme.enc(keys.ek, m, rng)
    return TrialResult(strategy.on_challenge(side, ct, ctx, rng) == m, True)


def ind_kla_trial(scheme, strategy, rng) -> TrialResult:
    """Single-bit IND-KLA: output 0 if no key was accepted, else the guess; success iff output = coin."""
    coin = int(rng.integers(0, 2))
    keys, ctx, side, accepted = _deliver_and_verify(scheme, strategy, rng)
    if not accepted:
        return TrialResult(coin == 0, False, coin, 0)
    ct = scheme.enc(keys.ek, str(coin), rng)
    guess = strategy.on_challenge(side, ct, ctx, rng)
    out = int(guess) if guess in ("0", "1", 0, 1) else 0
    return TrialResult(out == coin, True, coin, out)


def omur_trial(scheme, strategy, rng) -> TrialResult:
    _, _, _, accepted = _deliver_and_verify(scheme, strategy, rng)
    return TrialResult(accepted >= 2, accepted > 0)


def _run(kind, trial_fn, scheme, strategy, trials, seed, analytic):
    return monte_carlo(
        lambda rng: trial_fn(scheme, strategy, rng),
        trials, seed, name=f"{kind}:{scheme!r}:{strategy.name}", analytic=analytic,
    )


def run_acceptance(scheme, strategy, trials: int, seed: int, analytic=None) -> ExperimentReport:
    return _run("acceptance", acceptance_trial, scheme, strategy, trials, seed, analytic)


def run_ow_kla(scheme, strategy, trials: int, seed: int, analytic=None) -> ExperimentReport:
    return _run("ow_kla", ow_kla_trial, scheme, strategy, trials, seed, analytic)


def run_ind_kla(scheme, strategy, trials: int, seed: int, analytic=None) -> ExperimentReport:
    return _run("ind_kla", ind_kla_trial, scheme, strategy, trials, seed, analytic)


def run_omur(scheme, strategy, trials: int, seed: int, analytic=None) -> ExperimentReport:
    return _run("omur", omur_trial, scheme, strategy, trials, seed, analytic)


# -- CoIC-KLA game -------------------------------------------------------------------

class ProtocolViolation(RuntimeError):
    pass


class OneShotOracle:
    """Projection onto the honest superposed key, usable once and, unless relaxed, only before the challenge."""

    def __init__(self, target: Ket, rng, allow_post_challenge: bool = False):
        self._target = target
        self._rng = rng
        self._allow_post = allow_post_challenge
        self.calls = 0
        self.challenge_issued = False

    def __call__(self, state: Ket) -> bool:
        if self.calls:
            raise ProtocolViolation("the verification oracle may be queried only once")
        if self.challenge_issued and not self._allow_post:
            raise ProtocolViolation("the verification oracle is not available after the challenge")
        self.calls += 1
        if state.layout != self._target.layout:
            raise qsim.LayoutError("queried state has the wrong layout")
        ok, _ = qsim.project(state, self._target, self._rng)
        return ok


@dataclass(frozen=True)
class CoicStrategy:
    """``choose(ek0, ek1, qdk, oracle, rng) -> (m0, m1, side)``; ``guess(side, ct0, ct1, oracle, rng) -> bit``."""

    name: str
    choose: Callable
    guess: Callable
    analytic: float | None = None


def coic_superposed_key(dk0, dk1) -> Ket:
    d0, d1 = dk0.to_bits(), dk1.to_bits()
    layout = RegisterLayout.of(("b", 1), ("dk", len(d0)))
    return qsim.superpose(layout, [(("0", d0), 1), (("1", d1), 1)])


def _distinct_pair(msg_bits: int, rng) -> tuple[str, str]:
    m0 = random_bits(rng, msg_bits)
    m1 = random_bits(rng, msg_bits)
    while m1 == m0:
        m1 = random_bits(rng, msg_bits)
    return m0, m1


def _coic_dec_bits(dk_bits: str, ct: CoicCiphertext, attr_bits: int) -> str | None:
    try:
        return coic.coic_dec(coic.dk_from_bits(dk_bits, attr_bits), ct)
    except (CorruptCiphertextError, ValueError):
        return None


def coic_random_guess() -> CoicStrategy:
    return CoicStrategy(
        "random_guess",
        lambda ctx, qdk, oracle, rng: (*_distinct_pair(ctx["msg_bits"], rng), None),
        lambda side, ct0, ct1, oracle, rng: int(rng.integers(0, 2)),
        0.5,
    )


def coic_measure_decrypt() -> CoicStrategy:
    """Measure the key, decrypt the ciphertext on the measured branch, guess "consistent".

    Branch beta reveals which of (m0, m1) ct_beta holds, i.e. a (beta = 0) or
    a XOR b (beta = 1). Either value is a uniform bit independent of b, so
    the guess is right with probability exactly 1/2.
    """
    def choose(ctx, qdk, oracle, rng):
        (beta, dk_bits), _ = qsim.measure_all(qdk, rng)
        m0, m1 = _distinct_pair(ctx["msg_bits"], rng)
        return m0, m1, (int(beta), dk_bits, m0, m1, ctx["attr_bits"])

    def guess(side, ct0, ct1, oracle, rng):
        beta, dk_bits, m0, m1, attr_bits = side
        seen = _coic_dec_bits(dk_bits, (ct0, ct1)[beta], attr_bits)
        if seen not in (m0, m1):
            return int(rng.integers(0, 2))
        return 0

    return CoicStrategy("measure_decrypt", choose, guess, 0.5)


def coic_coherent_decrypt_verify() -> CoicStrategy:
    """Decrypt (ct0, ct1) coherently on the key, then spend the oracle query.

    Consistent ciphertexts leave the key intact (accept with probability 1);
    inconsistent ones collapse it (accept with probability 1/2). Guessing
    "consistent" on accept wins with probability 3/4. Needs the oracle after
    the challenge, so it only runs in the relaxed game.
    """
    def choose(ctx, qdk, oracle, rng):
        m0, m1 = _distinct_pair(ctx["msg_bits"], rng)
        return m0, m1, (qdk, ctx["attr_bits"], ctx["msg_bits"])

    def guess(side, ct0, ct1, oracle, rng):
        qdk, attr_bits, msg_bits = side
        fail = "1" * (msg_bits + 1)

        def dec(b, dk_bits):
            m = _coic_dec_bits(dk_bits, (ct0, ct1)[int(b)], attr_bits)
            return fail if m is None else "0" + m

        state = qsim.apply_classical(qdk, ["b", "dk"], ("out", msg_bits + 1), dec)
        _, state = qsim.measure_register(state, "out", rng)
        state = qsim.discard_register(state, "out")
        return 0 if oracle(state) else 1

    return CoicStrategy("coherent_decrypt_verify", choose, guess, 0.75)


def coic_double_query() -> CoicStrategy:
    """Queries the oracle twice; the game must refuse."""
    def choose(ctx, qdk, oracle, rng):
        oracle(qdk)
        oracle(qdk)
        return (*_distinct_pair(ctx["msg_bits"], rng), None)

    return CoicStrategy("double_query", choose, lambda *a: 0)


COIC_STRATEGIES = {
    "random_guess": coic_random_guess,
    "measure_decrypt": coic_measure_decrypt,
    "coherent_decrypt_verify": coic_coherent_decrypt_verify,
    "double_query": coic_double_query,
}


def coic_trial(
    strategy: CoicStrategy,
    rng,
    attr_bits: int = coic.DEFAULT_ATTR_BITS,
    msg_bits: int = coic.DEFAULT_MSG_BITS,
    allow_post_challenge: bool = False,
) -> TrialResult:
    kp0 = coic.coic_kg(attr_bits, msg_bits, rng)
    kp1 = coic.coic_kg(attr_bits, msg_bits, rng)
    qdk = coic_superposed_key(kp0.dk, kp1.dk)
    oracle = OneShotOracle(qdk, rng, allow_post_challenge)
    ctx = {"ek0": kp0.ek, "ek1": kp1.ek, "attr_bits": attr_bits, "msg_bits": msg_bits}
    m0, m1, side = strategy.choose(ctx, qdk, oracle, rng)
    a, b = int(rng.integers(0, 2)), int(rng.integers(0, 2))
    msgs = (m0, m1)
    ct0 = coic.coic_enc(kp0.ek, msgs[a], rng)
    ct1 = coic.coic_enc(kp1.ek, msgs[a ^ b], rng)
    oracle.challenge_issued = True
    guess = strategy.guess(side, ct0, ct1, oracle, rng)
    return TrialResult(int(guess) == b, coin=b, output=int(guess))


def run_coic(
    strategy: CoicStrategy,
    trials: int,
    seed: int,
    attr_bits: int = coic.DEFAULT_ATTR_BITS,
    msg_bits: int = coic.DEFAULT_MSG_BITS,
    allow_post_challenge: bool = False,
) -> ExperimentReport:
    tag = "coic_relaxed" if allow_post_challenge else "coic"
    return monte_carlo(
        lambda rng: coic_trial(strategy, rng, attr_bits, msg_bits, allow_post_challenge),
        trials, seed, name=f"{tag}:{strategy.name}", analytic=strategy.analytic,
    )


def reports_to_json(reports: Sequence[ExperimentReport]) -> str:
    return json.dumps([r.to_json() for r in reports], sort_keys=True, indent=2)
