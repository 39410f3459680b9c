"""Boolean circuits, Yao garbling with point-and-permute, and circuit builders.

Wires ``0..input_width-1`` are the circuit inputs; gate ``g`` (0-based)
drives wire ``input_width + g``. Gates are stored in topological order.

Garbled rows are ``H(labA, labB, gate, row) XOR (out_label || 0^kappa)``,
where ``H`` is SHAKE-256. The all-zero tail authenticates the row so that a
wrong input label is detected instead of producing garbage.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .bits import check_bits

DEFAULT_KAPPA = 128

OPS = ("AND", "XOR", "NOT", "CONST0", "CONST1")
ARITY = {"AND": 2, "XOR": 2, "NOT": 1, "CONST0": 0, "CONST1": 0}
TRUTH = {"AND": lambda a, b: a & b, "XOR": lambda a, b: a ^ b}


class CircuitError(ValueError):
    pass


class InvalidLabelError(ValueError):
    """Garbled evaluation hit a row or output label that did not authenticate."""


@dataclass(frozen=True)
class Gate:
    op: str
    inputs: tuple[int, ...] = ()


@dataclass(frozen=True)
class BoolCircuit:
    input_width: int
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        if self.input_width < 0:
            raise CircuitError("negative input width")
        for g, gate in enumerate(self.gates):
            if gate.op not in ARITY:
                raise CircuitError(f"gate {g}: unknown op {gate.op!r}")
            if len(gate.inputs) != ARITY[gate.op]:
                raise CircuitError(f"gate {g}: {gate.op} takes {ARITY[gate.op]} inputs")
            wire = self.input_width + g
            for w in gate.inputs:
                if not 0 <= w < wire:
                    raise CircuitError(f"gate {g}: input wire {w} is not an earlier wire")
        for w in self.outputs:
            if not 0 <= w < self.num_wires:
                raise CircuitError(f"output wire {w} does not exist")

    @property
    def num_wires(self) -> int:
        return self.input_width + len(self.gates)

    @property
    def output_width(self) -> int:
        return len(self.outputs)

    def shape(self) -> "CircuitShape":
        return CircuitShape(
            input_width=self.input_width,
            output_width=self.output_width,
            gate_count=len(self.gates),
            op_counts=tuple(sorted(Counter(g.op for g in self.gates).items())),
        )

    def skeleton(self) -> tuple:
        """Gate ops plus wiring with constant-producing wires identified.

        Two circuits with equal skeletons differ only in which constant wire
        or which input wire feeds a gate.
        """
        const = {
            self.input_width + g
            for g, gate in enumerate(self.gates)
            if gate.op in ("CONST0", "CONST1")
        }

        def cls(w):
            if w < self.input_width:
                return "in"
            if w in const:
                return "const"
            return w

        ops = tuple(
            ("CONST" if gate.op.startswith("CONST") else gate.op,
             tuple(cls(w) for w in gate.inputs))
            for gate in self.gates
        )
        return (self.input_width, ops, tuple(cls(w) for w in self.outputs))


@dataclass(frozen=True)
class CircuitShape:
    input_width: int
    output_width: int
    gate_count: int
    op_counts: tuple[tuple[str, int], ...]


def eval_circuit(c: BoolCircuit, x: str) -> str:
    check_bits(x, c.input_width, what="circuit input")
    vals = [int(b) for b in x]
    for gate in c.gates:
        if gate.op == "CONST0":
            vals.append(0)
        elif gate.op == "CONST1":
            vals.append(1)
        elif gate.op == "NOT":
            vals.append(1 - vals[gate.inputs[0]])
        else:
            a, b = gate.inputs
            vals.append(TRUTH[gate.op](vals[a], vals[b]))
    return "".join(str(vals[w]) for w in c.outputs)


class _Builder:
    def __init__(self, input_width: int):
        self.input_width = input_width
        self.gates: list[Gate] = []

    def add(self, op: str, *inputs: int) -> int:
        self.gates.append(Gate(op, tuple(inputs)))
        return self.input_width + len(self.gates) - 1

    def build(self, outputs) -> BoolCircuit:
        return BoolCircuit(self.input_width, tuple(self.gates), tuple(outputs))


def build_mux_circuit(b: int, m0: str, m1: str, i: int, input_width: int) -> BoolCircuit:
    """Circuit mapping x to ``m_{b XOR x[i]}`` (``i`` is 1-based).

    Layout: CONST0, CONST1, s = x[i] XOR const(b), then per output bit
    d = const(m0_j) XOR const(m1_j), t = s AND d, o = const(m0_j) XOR t.
    Every data bit only chooses which constant wire a gate reads, so the
    gate list is independent of (b, m0, m1).
    """
    check_bits(m0, what="m0")
    check_bits(m1, len(m0), what="m1")
    if input_width < 1:
        raise CircuitError("input width must be at least 1")
    if not 1 <= i <= input_width:
        raise CircuitError(f"index {i} outside 1..{input_width}")
    if b not in (0, 1):
        raise CircuitError("selector bit must be 0 or 1")
    cb = _Builder(input_width)
    zero = cb.add("CONST0")
    one = cb.add("CONST1")
    k = {"0": zero, "1": one}
    s = cb.add("XOR", i - 1, k[str(b)])
    outs = []
    for a0, a1 in zip(m0, m1):
        d = cb.add("XOR", k[a0], k[a1])
        t = cb.add("AND", s, d)
        outs.append(cb.add("XOR", k[a0], t))
    return cb.build(outs)


def build_const_circuit(m: str, input_width: int) -> BoolCircuit:
    """Constant circuit for ``m``, laid out as the mux skeleton with both branches = m."""
    return build_mux_circuit(0, m, m, 1, input_width)


# -- circuit text format ---------------------------------------------------

def circuit_to_text(c: BoolCircuit) -> str:
    lines = [f"inputs {c.input_width} outputs {c.output_width}"]
    for g, gate in enumerate(c.gates):
        args = "".join(f" w{w}" for w in gate.inputs)
        lines.append(f"w{c.input_width + g} = {gate.op}{args}")
    lines.append("out" + "".join(f" w{w}" for w in c.outputs))
    return "\n".join(lines) + "\n"


def _wire(tok: str, lineno: int) -> int:
    if not tok.startswith("w") or not tok[1:].isdigit():
        raise CircuitError(f"line {lineno}: bad wire token {tok!r}")
    return int(tok[1:])


def circuit_from_text(text: str) -> BoolCircuit:
    lines = [
        (n, ln.split("#", 1)[0].split())
        for n, ln in enumerate(text.splitlines(), 1)
    ]
    lines = [(n, toks) for n, toks in lines if toks]
    if not lines:
        raise CircuitError("empty circuit text")
    n, head = lines[0]
    if len(head) != 4 or head[0] != "inputs" or head[2] != "outputs":
        raise CircuitError(f"line {n}: expected 'inputs L outputs K' header")
    input_width, output_width = int(head[1]), int(head[3])
    gates: list[Gate] = []
    outputs = None
    for n, toks in lines[1:]:
        if toks[0] == "out":
            outputs = tuple(_wire(t, n) for t in toks[1:])
            continue
        if len(toks) < 3 or toks[1] != "=":
            raise CircuitError(f"line {n}: expected 'wN = OP ...'")
        if _wire(toks[0], n) != input_width + len(gates):
            raise CircuitError(f"line {n}: gates must define wires in order")
        gates.append(Gate(toks[2], tuple(_wire(t, n) for t in toks[3:])))
    if outputs is None:
        raise CircuitError("missing 'out' line")
    c = BoolCircuit(input_width, tuple(gates), outputs)
    if c.output_width != output_width:
        raise CircuitError(f"header says {output_width} outputs, 'out' lists {c.output_width}")
    return c


# -- garbling --------------------------------------------------------------

_shake = hashlib.shake_256

def _prf(kappa: int, gate: int, row: int, la: int, lb: int) -> int:
    nbytes = kappa // 8
    data = b"%d:%d:%b%b" % (gate, row, la.to_bytes(nbytes, "big"), lb.to_bytes(nbytes, "big"))
    return int.from_bytes(_shake(data).digest(2 * nbytes), "big")


def _label_digest(kappa: int, label: int) -> bytes:
    return hashlib.sha256(b"out" + label.to_bytes(kappa // 8, "big")).digest()


@dataclass(frozen=True)
class WireLabelPair:
    lab0: int
    lab1: int

    def __getitem__(self, b: int) -> int:
        return self.lab1 if b else self.lab0


@dataclass(frozen=True)
class GarbledCircuit:
    """Garbled tables, constant-wire labels and output decode digests.

    ``tables[g]`` is empty for NOT/CONST gates, four rows for AND/XOR.
    ``consts[g]`` holds the active label of a CONST gate.
    ``decode[j]`` is (digest of 0-label, digest of 1-label) for output j.
    """

    shape: CircuitShape
    kappa: int
    gate_ops: tuple[str, ...]
    gate_inputs: tuple[tuple[int, ...], ...]
    outputs: tuple[int, ...]
    tables: tuple[tuple[int, ...], ...]
    consts: tuple[int | None, ...]
    decode: tuple[tuple[bytes, bytes], ...]

    def table_dims(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.tables)

    def size_bytes(self) -> int:
        row = 2 * self.kappa // 8
        n = sum(len(t) for t in self.tables) * row
        n += sum(self.kappa // 8 for c in self.consts if c is not None)
        return n + 64 * len(self.decode)


def _fresh_pairs(rng: np.random.Generator, kappa: int, count: int) -> list[WireLabelPair]:
    """Random label pairs; within a pair the last (color) bits differ."""
    nb = kappa // 8
    raw = rng.bytes(2 * nb * count)
    out = []
    for k in range(count):
        a = int.from_bytes(raw[2 * k * nb:(2 * k + 1) * nb], "big")
        b = int.from_bytes(raw[(2 * k + 1) * nb:(2 * k + 2) * nb], "big")
        out.append(WireLabelPair(a, (b & ~1) | ((a & 1) ^ 1)))
    return out


def _row_index(la: int, lb: int) -> int:
    return ((la & 1) << 1) | (lb & 1)


def garble(
    c: BoolCircuit, rng: np.random.Generator, kappa: int = DEFAULT_KAPPA
) -> tuple[list[WireLabelPair], GarbledCircuit]:
    if kappa % 8 or kappa < 16:
        raise CircuitError("kappa must be a multiple of 8, at least 16")
    fresh = iter(_fresh_pairs(rng, kappa, c.num_wires))
    pairs: list[WireLabelPair | None] = [None] * c.num_wires
    for w in range(c.input_width):
        pairs[w] = next(fresh)
    tables: list[tuple[int, ...]] = []
    consts: list[int | None] = []
    for g, gate in enumerate(c.gates):
        wire = c.input_width + g
        if gate.op == "NOT":
            src = pairs[gate.inputs[0]]
            pairs[wire] = WireLabelPair(src.lab1, src.lab0)
            tables.append(())
            consts.append(None)
            continue
        pairs[wire] = next(fresh)
        if gate.op in ("CONST0", "CONST1"):
            consts.append(pairs[wire][1 if gate.op == "CONST1" else 0])
            tables.append(())
            continue
        pa, pb = pairs[gate.inputs[0]], pairs[gate.inputs[1]]
        truth = TRUTH[gate.op]
        rows = [0] * 4
        for va in (0, 1):
            for vb in (0, 1):
                la, lb = pa[va], pb[vb]
                r = _row_index(la, lb)
                rows[r] = _prf(kappa, g, r, la, lb) ^ (pairs[wire][truth(va, vb)] << kappa)
        tables.append(tuple(rows))
        consts.append(None)
    decode = tuple(
        (_label_digest(kappa, pairs[w].lab0), _label_digest(kappa, pairs[w].lab1))
        for w in c.outputs
    )
    gc = GarbledCircuit(
        shape=c.shape(),
        kappa=kappa,
        gate_ops=tuple(g.op for g in c.gates),
        gate_inputs=tuple(g.inputs for g in c.gates),
        outputs=c.outputs,
        tables=tuple(tables),
        consts=tuple(consts),
        decode=decode,
    )
    return [pairs[w] for w in range(c.input_width)], gc


def gc_eval(gc: GarbledCircuit, labels) -> str:
    kappa = gc.kappa
    mask = (1 << kappa) - 1
    n_in = gc.shape.input_width
    if len(labels) != n_in:
        raise CircuitError(f"expected {n_in} input labels, got {len(labels)}")
    active = list(labels) + [0] * len(gc.gate_ops)
    for g, op in enumerate(gc.gate_ops):
        wire = n_in + g
        ins = gc.gate_inputs[g]
        if op == "NOT":
            active[wire] = active[ins[0]]
        elif op in ("CONST0", "CONST1"):
            active[wire] = gc.consts[g]
        else:
            la, lb = active[ins[0]], active[ins[1]]
            r = _row_index(la, lb)
            plain = gc.tables[g][r] ^ _prf(kappa, g, r, la, lb)
            if plain & mask:
                raise InvalidLabelError(f"gate {g}: row authenticator mismatch")
            active[wire] = plain >> kappa
    out = []
    for j, w in enumerate(gc.outputs):
        d = _label_digest(kappa, active[w])
        if d == gc.decode[j][0]:
            out.append("0")
        elif d == gc.decode[j][1]:
            out.append("1")
        else:
            raise InvalidLabelError(f"output {j}: label matches neither decode entry")
    return "".join(out)


def sim_gc(
    shape: CircuitShape,
    y: str,
    rng: np.random.Generator,
    kappa: int = DEFAULT_KAPPA,
    skeleton: BoolCircuit | None = None,
) -> tuple[list[int], GarbledCircuit]:
    """Simulate a garbled circuit of the given shape that evaluates to ``y``.

    The simulator garbles every gate so that each row outputs the wire's
    single active label, then makes output ``j`` decode to ``y[j]``. A
    skeleton fixes the wiring; without one the mux skeleton with the
    shape's widths is used.
    """
    check_bits(y, shape.output_width, what="simulated output")
    if skeleton is None:
        skeleton = build_mux_circuit(
            0, "0" * shape.output_width, "0" * shape.output_width, 1, shape.input_width
        )
    if skeleton.shape() != shape:
        raise CircuitError("skeleton does not match the requested shape")
    active = [int.from_bytes(rng.bytes(kappa // 8), "big") for _ in range(skeleton.num_wires)]
    tables: list[tuple[int, ...]] = []
    consts: list[int | None] = []
    n_in = skeleton.input_width
    for g, gate in enumerate(skeleton.gates):
        wire = n_in + g
        if gate.op == "NOT":
            active[wire] = active[gate.inputs[0]]
            tables.append(())
            consts.append(None)
        elif gate.op in ("CONST0", "CONST1"):
            consts.append(active[wire])
            tables.append(())
        else:
            la, lb = active[gate.inputs[0]], active[gate.inputs[1]]
            real = _row_index(la, lb)
            rows = [int.from_bytes(rng.bytes(2 * kappa // 8), "big") for _ in range(4)]
            rows[real] = _prf(kappa, g, real, la, lb) ^ (active[wire] << kappa)
            tables.append(tuple(rows))
            consts.append(None)
    decode = []
    for j, w in enumerate(skeleton.outputs):
        real = _label_digest(kappa, active[w])
        fake = hashlib.sha256(b"sim" + rng.bytes(kappa // 8)).digest()
        decode.append((real, fake) if y[j] == "0" else (fake, real))
    gc = GarbledCircuit(
        shape=shape,
        kappa=kappa,
        gate_ops=tuple(g.op for g in skeleton.gates),
        gate_inputs=tuple(g.inputs for g in skeleton.gates),
        outputs=skeleton.outputs,
        tables=tuple(tables),
        consts=tuple(consts),
        decode=tuple(decode),
    )
    return active[:n_in], gc


# -- serialization -----------------------------------------------------------

def garbled_to_json(gc: GarbledCircuit) -> dict:
    width = gc.kappa // 4
    return {
        "kappa": gc.kappa,
        "input_width": gc.shape.input_width,
        "gates": [
            {"op": op, "in": list(ins)} for op, ins in zip(gc.gate_ops, gc.gate_inputs)
        ],
        "outputs": list(gc.outputs),
        "tables": [[format(r, f"0{2 * width}x") for r in t] for t in gc.tables],
        "consts": [None if c is None else format(c, f"0{width}x") for c in gc.consts],
        "decode": [[d0.hex(), d1.hex()] for d0, d1 in gc.decode],
    }


def garbled_from_json(obj: dict) -> GarbledCircuit:
    gates = tuple(Gate(g["op"], tuple(g["in"])) for g in obj["gates"])
    skeleton = BoolCircuit(int(obj["input_width"]), gates, tuple(obj["outputs"]))
    return GarbledCircuit(
        shape=skeleton.shape(),
        kappa=int(obj["kappa"]),
        gate_ops=tuple(g.op for g in gates),
        gate_inputs=tuple(g.inputs for g in gates),
        outputs=skeleton.outputs,
        tables=tuple(tuple(int(r, 16) for r in t) for t in obj["tables"]),
        consts=tuple(None if c is None else int(c, 16) for c in obj["consts"]),
        decode=tuple((bytes.fromhex(a), bytes.fromhex(b)) for a, b in obj["decode"]),
    )
