import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

CORPUS = Path(__file__).parent / "corpus"


def _bits(n):
    return ["".join(t) for t in itertools.product("01", repeat=n)]


def _adder4(x):
    return format(int(x[:4], 2) + int(x[4:], 2), "05b")


# plain-Python reference semantics for every corpus circuit
CORPUS_ORACLES = {
    "identity1": lambda x: x,
    "and2": lambda x: str(int(x[0]) & int(x[1])),
    "xor2": lambda x: str(int(x[0]) ^ int(x[1])),
    "nand2": lambda x: str(1 - (int(x[0]) & int(x[1]))),
    "majority3": lambda x: "1" if x.count("1") >= 2 else "0",
    "full_adder": lambda x: format(x.count("1"), "02b"),
    "consts": lambda x: "10" + ("1" if x == "0" else "0"),
    "adder4": _adder4,
    "parity8": lambda x: str(x.count("1") % 2),
    "eq4": lambda x: "1" if x[:4] == x[4:] else "0",
    "mux_b1_i3_l5": lambda x: "0110" if x[2] == "0" else "1010",
    "const_l6": lambda x: "110011",
}

all_bitstrings = _bits


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number: int, title: str, checks: dict[str, bool], detail: str = "") -> bool:
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}"
        if detail:
            line += f" | {detail}"
        if failed:
            line += f" | failed: {', '.join(failed)}"
        _CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
