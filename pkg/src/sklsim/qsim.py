"""Exact sparse simulator for superpositions over classical registers.

A :class:`Ket` is a normalized map from basis labels to complex amplitudes.
A basis label is a tuple with one bitstring per register of the layout.
The only "gates" are classical functions written into fresh registers, which
are reversible and never make branches interfere, plus computational-basis
measurement and rank-one projective measurement. That is enough to model
quantum decryption keys that are superpositions of classical keys.

Kets are immutable; every operation returns a new value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .bits import bits_to_hex, check_bits, hex_to_bits

PRUNE_EPS = 1e-12
NORM_TOL = 1e-9
MAX_LABEL_WIDTH = 4096


class LayoutError(ValueError):
    pass


class DegenerateStateError(ValueError):
    pass


class ClassicalMapError(RuntimeError):
    """A function passed to :func:`apply_classical` failed on some basis label."""

    def __init__(self, label, cause):
        super().__init__(f"classical map failed on basis label {label!r}: {cause!r}")
        self.label = label
        self.cause = cause


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, width in self.registers:
            if not isinstance(width, int) or width < 1:
                raise LayoutError(f"register {name!r} has invalid width {width!r}")
        if self.total_width > MAX_LABEL_WIDTH:
            raise LayoutError(
                f"layout width {self.total_width} exceeds cap {MAX_LABEL_WIDTH}"
            )

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple((str(n), int(w)) for n, w in registers))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w for _, w in self.registers)

    @property
    def total_width(self) -> int:
        return sum(self.widths)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"no register named {name!r} in {self.names}") from None

    def check_label(self, values: Sequence[str]) -> tuple[str, ...]:
        values = tuple(values)
        if len(values) != len(self.registers):
            raise LayoutError(
                f"label has {len(values)} registers, layout has {len(self.registers)}"
            )
        for v, (name, width) in zip(values, self.registers):
            try:
                check_bits(v, width, what=f"register {name!r}")
            except ValueError as exc:
                raise LayoutError(str(exc)) from None
        return values


class Ket:
    """Normalized sparse state over a :class:`RegisterLayout`."""

    __slots__ = ("layout", "_terms")

    def __init__(self, layout: RegisterLayout, terms: Mapping[tuple[str, ...], complex]):
        # Trusted constructor: callers normalize and prune.
        self.layout = layout
        self._terms = MappingProxyType(dict(sorted(terms.items())))

    @property
    def terms(self) -> Mapping[tuple[str, ...], complex]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        parts = ", ".join(f"{lab}: {amp:.6g}" for lab, amp in list(self._terms.items())[:4])
        more = "" if len(self) <= 4 else f", ... ({len(self)} terms)"
        return f"Ket({self.layout.names}, {{{parts}{more}}})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Ket)
            and self.layout == other.layout
            and dict(self._terms) == dict(other._terms)
        )

    def __hash__(self):
        return hash((self.layout, tuple(self._terms.items())))

    def norm_squared(self) -> float:
        return sum(abs(a) ** 2 for a in self._terms.values())

    def is_basis(self) -> bool:
        return len(self._terms) == 1

    def register_values(self, name: str) -> set[str]:
        idx = self.layout.index(name)
        return {lab[idx] for lab in self._terms}


def _normalized(layout: RegisterLayout, terms: dict) -> Ket:
    terms = {lab: complex(a) for lab, a in terms.items() if abs(a) >= PRUNE_EPS}
    total = sum(abs(a) ** 2 for a in terms.values())
    if total < PRUNE_EPS**2 or not terms:
        raise DegenerateStateError("state has zero norm")
    scale = 1.0 / math.sqrt(total)
    return Ket(layout, {lab: a * scale for lab, a in terms.items()})


def basis_ket(layout: RegisterLayout, values: Sequence[str]) -> Ket:
    return Ket(layout, {layout.check_label(values): 1 + 0j})


def superpose(layout: RegisterLayout, terms: Iterable[tuple[Sequence[str], complex]]) -> Ket:
    """Build a normalized superposition; amplitudes are rescaled to unit norm."""
    collected: dict[tuple[str, ...], complex] = {}
    for values, amp in terms:
        label = layout.check_label(values)
        if label in collected:
            raise LayoutError(f"duplicate basis label {label!r}")
        collected[label] = complex(amp)
    if not collected:
        raise DegenerateStateError("superposition needs at least one term")
    return _normalized(layout, collected)


def tensor(a: Ket, b: Ket) -> Ket:
    clash = set(a.layout.names) & set(b.layout.names)
    if clash:
        raise LayoutError(f"register names collide: {sorted(clash)}")
    layout = RegisterLayout(a.layout.registers + b.layout.registers)
    terms = {la + lb: x * y for la, x in a.terms.items() for lb, y in b.terms.items()}
    return _normalized(layout, terms)


def tensor_all(kets: Sequence[Ket]) -> Ket:
    if not kets:
        raise LayoutError("nothing to tensor")
    out = kets[0]
    for k in kets[1:]:
        out = tensor(out, k)
    return out


def apply_classical(
    k: Ket,
    inputs: Sequence[str],
    output: tuple[str, int],
    f: Callable[..., str],
) -> Ket:
    """Write ``f(inputs)`` into a fresh zero-initialized register, branch by branch.

    ``f`` receives one bitstring per input register and must return a
    bitstring of the output width.
    """
    name, width = output
    if name in k.layout.names:
        raise LayoutError(f"output register {name!r} already exists")
    idxs = [k.layout.index(n) for n in inputs]
    layout = RegisterLayout(k.layout.registers + ((name, width),))
    terms = {}
    for label, amp in k.terms.items():
        try:
            value = f(*(label[i] for i in idxs))
            check_bits(value, width, what=f"output of map into {name!r}")
        except Exception as exc:
            raise ClassicalMapError(label, exc) from exc
        terms[label + (value,)] = amp
    return Ket(layout, terms)


def discard_register(k: Ket, name: str) -> Ket:
    """Drop a register that holds the same value on every branch.

    Dropping a register with a definite value is exact. A register still
    entangled with the rest would need a partial trace, which pure kets
    cannot express, so that case is rejected.
    """
    idx = k.layout.index(name)
    values = k.register_values(name)
    if len(values) != 1:
        raise LayoutError(f"register {name!r} is not in a definite state")
    layout = RegisterLayout(k.layout.registers[:idx] + k.layout.registers[idx + 1:])
    return Ket(layout, {lab[:idx] + lab[idx + 1:]: a for lab, a in k.terms.items()})


def rename_registers(k: Ket, mapping: Mapping[str, str]) -> Ket:
    layout = RegisterLayout(tuple((mapping.get(n, n), w) for n, w in k.layout.registers))
    return Ket(layout, k.terms)


def register_distribution(k: Ket, register: str) -> dict[str, float]:
    idx = k.layout.index(register)
    probs: dict[str, float] = {}
    for label, amp in k.terms.items():
        probs[label[idx]] = probs.get(label[idx], 0.0) + abs(amp) ** 2
    return probs


def measure_register(k: Ket, register: str, rng: np.random.Generator) -> tuple[str, Ket]:
    """Computational-basis measurement of one register (Born rule)."""
    idx = k.layout.index(register)
    probs = register_distribution(k, register)
    outcomes = sorted(probs)
    if len(outcomes) == 1:
        return outcomes[0], k
    p = np.array([probs[o] for o in outcomes])
    value = outcomes[int(rng.choice(len(outcomes), p=p / p.sum()))]
    post = {lab: a for lab, a in k.terms.items() if lab[idx] == value}
    return value, _normalized(k.layout, post)


def measure_all(k: Ket, rng: np.random.Generator) -> tuple[tuple[str, ...], Ket]:
    labels = list(k.terms)
    if len(labels) == 1:
        return labels[0], k
    p = np.array([abs(k.terms[lab]) ** 2 for lab in labels])
    label = labels[int(rng.choice(len(labels), p=p / p.sum()))]
    return label, Ket(k.layout, {label: 1 + 0j})


def _check_same_layout(a: Ket, b: Ket) -> None:
    if a.layout != b.layout:
        raise LayoutError(f"layout mismatch: {a.layout.registers} vs {b.layout.registers}")


def inner_product(a: Ket, b: Ket) -> complex:
    """<a|b>."""
    _check_same_layout(a, b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for label, amp in small.terms.items():
        other = large.terms.get(label)
        if other is not None:
            total += (amp.conjugate() * other) if small is a else (other.conjugate() * amp)
    return total


def fidelity(a: Ket, b: Ket) -> float:
    return abs(inner_product(a, b)) ** 2


@dataclass(frozen=True)
class ProjectionResult:
    accept_probability: float
    accepted_state: Ket | None
    rejected_state: Ket | None


def projection_analysis(k: Ket, target: Ket) -> ProjectionResult:
    """Outcome probabilities and post-states of the measurement {|t><t|, I - |t><t|}."""
    overlap = inner_product(target, k)
    p = min(1.0, max(0.0, abs(overlap) ** 2))
    accepted = target if p >= PRUNE_EPS else None
    rejected = None
    if 1.0 - p >= PRUNE_EPS:
        residual = dict(k.terms)
        for label, amp in target.terms.items():
            residual[label] = residual.get(label, 0j) - overlap * amp
        try:
            rejected = _normalized(k.layout, residual)
        except DegenerateStateError:
            rejected = None
    return ProjectionResult(p, accepted, rejected)


def project(k: Ket, target: Ket, rng: np.random.Generator) -> tuple[bool, Ket]:
    """Sample the binary projective measurement onto ``target``."""
    res = projection_analysis(k, target)
    if res.rejected_state is None:
        return True, res.accepted_state
    if res.accepted_state is None:
        return False, res.rejected_state
    if rng.random() < res.accept_probability:
        return True, res.accepted_state
    return False, res.rejected_state


def ket_to_json(k: Ket) -> dict:
    return {
        "layout": [{"name": n, "width": w} for n, w in k.layout.registers],
        "terms": [
            {"label": [bits_to_hex(v) for v in label], "re": amp.real, "im": amp.imag}
            for label, amp in k.terms.items()
        ],
    }


def ket_from_json(obj: Mapping) -> Ket:
    try:
        layout = RegisterLayout(tuple((r["name"], int(r["width"])) for r in obj["layout"]))
        terms = {}
        for t in obj["terms"]:
            label = tuple(hex_to_bits(h, w) for h, w in zip(t["label"], layout.widths))
            terms[layout.check_label(label)] = complex(float(t["re"]), float(t["im"]))
    except (KeyError, TypeError) as exc:
        raise LayoutError(f"malformed ket: missing or invalid field {exc}") from None
    if not terms:
        raise DegenerateStateError("serialized ket has no terms")
    norm = sum(abs(a) ** 2 for a in terms.values())
    if abs(norm - 1.0) > NORM_TOL:
        raise DegenerateStateError(f"serialized ket has norm^2 {norm}")
    return Ket(layout, terms)
