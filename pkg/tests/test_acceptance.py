"""End-to-end acceptance checks, one test per criterion.

Each test prints a single pass/fail line (also repeated in the terminal
summary) and then asserts. Tolerances are the stated ones; nothing is
loosened to make a check pass.
"""

import math
import shutil
import time
from functools import reduce

import numpy as np
from scipy.stats import chisquare

from conftest import CORPUS, all_bitstrings
from sklsim import abeskl as A
from sklsim import cpfe, harness as H, qsim, skl
from sklsim.bits import inner_product_bits, random_bits, xor_bits
from sklsim.circuits import (
    BoolCircuit,
    Gate,
    build_const_circuit,
    build_mux_circuit,
    circuit_from_text,
    eval_circuit,
    garble,
    gc_eval,
)
from sklsim.cli import main as cli_main


def test_criterion_01_lifecycle(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    failures = 0
    min_fid = 1.0
    rejects = 0
    for blocks in (1, 2, 4):
        t = skl.skl_kg(blocks, rng, msg_bits=16)
        key = t.qdk
        for _ in range(200):
            m = random_bits(rng, 16 * blocks)
            got, key = skl.skl_dec(key, skl.skl_enc(t.ek, m, rng), rng)
            failures += got != m
            min_fid = min(min_fid, float(np.prod([qsim.fidelity(a, b) for a, b in zip(key, t.qdk)])))
            out = skl.skl_vrfy(t.vk, key, rng)
            rejects += not out.decision
            key = out.post_key
    elapsed = time.perf_counter() - start
    ok = criterion(1, "lifecycle correctness", {
        "zero decryption failures": failures == 0,
        "post-key fidelity >= 1-1e-9": min_fid >= 1 - 1e-9,
        "vrfy always accepts": rejects == 0,
        "runtime < 60 s": elapsed < 60,
    }, f"failures={failures} min_fidelity={min_fid:.12f} rejects={rejects} time={elapsed:.1f}s")
    assert ok


def test_criterion_02_measure_and_return(criterion):
    keep = H.strategy_measure_keep()
    a1 = H.analytic_pass_probability(keep, 1)
    a4 = H.analytic_pass_probability(keep, 4)
    r1 = H.run_acceptance(skl.OwScheme(1), keep, 5000, seed=201, analytic=a1)
    r4 = H.run_acceptance(skl.OwScheme(4), keep, 20000, seed=202, analytic=a4)
    ok = criterion(2, "measure-and-return acceptance", {
        "lambda=1 rate in [0.47, 0.53]": 0.47 <= r1.estimate <= 0.53,
        "lambda=4 rate in [0.048, 0.078]": 0.048 <= r4.estimate <= 0.078,
        "analytic 0.5": abs(a1 - 0.5) <= 1e-12,
        "analytic 0.0625": abs(a4 - 0.0625) <= 1e-12,
    }, f"lambda1={r1.estimate:.4f} lambda4={r4.estimate:.4f} analytic=({a1}, {a4})")
    assert ok


def test_criterion_03_ow_kla(criterion):
    basic = skl.basic_scheme(16)
    keep = H.run_ow_kla(basic, H.strategy_measure_keep(), 5000, seed=301, analytic=0.5)
    honest = H.run_ow_kla(basic, H.strategy_honest(), 5000, seed=302, analytic=2.0**-16)
    bound = 3 * 2.0**-16
    ok = criterion(3, "OW-KLA game", {
        "measure_keep 0.5 +/- 0.03": abs(keep.estimate - 0.5) <= 0.03,
        "honest within 3*2^-16 + CI slack": honest.wilson_ci_95[0] <= bound,
    }, f"measure_keep={keep.estimate:.4f} honest={honest.successes}/{honest.trials} "
       f"honest_ci=({honest.wilson_ci_95[0]:.2e}, {honest.wilson_ci_95[1]:.2e})")
    assert ok


def test_criterion_04_gl(criterion):
    rng = np.random.default_rng(401)
    t = skl.skl_kg(1, rng)
    wrong = 0
    key = t.qdk
    for _ in range(1000):
        m = int(rng.integers(0, 2))
        bit, key = skl.gl_dec(key, skl.gl_enc(t.ek, m, rng), rng)
        wrong += bit != m
    mismatches = 0
    for _ in range(100_000):
        n = int(rng.integers(1, 65))
        x, r = random_bits(rng, n), random_bits(rng, n)
        acc = 0
        for a, b in zip(x, r):
            acc ^= (a == "1") & (b == "1")
        mismatches += inner_product_bits(x, r) != acc
    ok = criterion(4, "Goldreich-Levin lift", {
        "1000 round trips exact": wrong == 0,
        "inner product matches loop on 1e5 pairs": mismatches == 0,
    }, f"round_trip_errors={wrong} inner_product_mismatches={mismatches}")
    assert ok


def test_criterion_05_omur(criterion):
    rng = np.random.default_rng(501)
    t = skl.skl_kg(4, rng)
    honest = 0
    key = t.qdk
    for _ in range(100):
        out = skl.omur_vrfy(t.vk, t.ek, key, rng)
        honest += out.decision
        key = out.post_key
    junk_rejected = 0
    for _ in range(100):
        junk = tuple(qsim.basis_ket(k.layout, [random_bits(rng, w) for w in k.layout.widths]) for k in t.qdk)
        junk_rejected += not skl.omur_vrfy(t.vk, t.ek, junk, rng).decision
    omur = skl.OmurScheme(skl.OwScheme(4))
    clone = H.strategy_measure_clone()
    bound = H.analytic_pass_probability(clone, 4) ** 2
    game = H.run_omur(omur, clone, 10_000, seed=502, analytic=bound)
    ok = criterion(5, "OMUR wrapper", {
        "honest passes 100/100": honest == 100,
        "junk rejected >= 99/100": junk_rejected >= 99,
        "cloner rate within 2^-2lambda bound (CI)": game.wilson_ci_95[0] <= bound,
        "cloner double acceptance 0 observed in 1e4": game.successes == 0,
    }, f"honest={honest}/100 junk_rejected={junk_rejected}/100 "
       f"cloner={game.successes}/{game.trials} (analytic 2^-8={bound:.5f}, "
       f"ci=({game.wilson_ci_95[0]:.5f}, {game.wilson_ci_95[1]:.5f}))")
    assert ok


def _random_circuit(rng, ell):
    gates = []
    for g in range(int(rng.integers(1, 10))):
        op = str(rng.choice(["AND", "XOR", "NOT", "CONST0", "CONST1"]))
        k = {"AND": 2, "XOR": 2, "NOT": 1}.get(op, 0)
        gates.append(Gate(op, tuple(int(v) for v in rng.integers(0, ell + g, size=k))))
    outs = tuple(int(v) for v in rng.integers(0, ell + len(gates), size=int(rng.integers(1, 5))))
    return BoolCircuit(ell, tuple(gates), outs)


def test_criterion_06_gc_cpfe(criterion):
    rng = np.random.default_rng(601)
    gc_errors = checked = 0
    for path in sorted(CORPUS.glob("*.circ")):
        c = circuit_from_text(path.read_text())
        if c.input_width > 8:
            continue
        pairs, gc = garble(c, rng)
        for x in all_bitstrings(c.input_width):
            checked += 1
            gc_errors += gc_eval(gc, [pairs[i][int(b)] for i, b in enumerate(x)]) != eval_circuit(c, x)
    cpfe_errors = 0
    for _ in range(100):
        ell = int(rng.integers(1, 7))
        keys = cpfe.cpfe_setup(ell, rng)
        c = _random_circuit(rng, ell)
        x = random_bits(rng, ell)
        cpfe_errors += cpfe.cpfe_dec(cpfe.cpfe_kg(keys.msk, x), cpfe.cpfe_enc(keys.mpk, c, rng)) != eval_circuit(c, x)
    shape_ok = True
    for ell in range(1, 9):
        for k in (1, 8, 16):
            const = build_const_circuit(random_bits(rng, k), ell)
            for b in (0, 1):
                mux = build_mux_circuit(b, random_bits(rng, k), random_bits(rng, k), int(rng.integers(1, ell + 1)), ell)
                shape_ok &= const.shape() == mux.shape()
                shape_ok &= len(const.gates) == len(mux.gates)
                shape_ok &= [g.op for g in const.gates] == [g.op for g in mux.gates]
    ok = criterion(6, "garbling and CPFE oracle equivalence", {
        "corpus exhaustive": gc_errors == 0 and checked > 0,
        "CPFE 100 round trips": cpfe_errors == 0,
        "C[m] / C* shapes equal": shape_ok,
    }, f"corpus_inputs={checked} gc_errors={gc_errors} cpfe_errors={cpfe_errors}")
    assert ok


def test_criterion_07_abe_skl(criterion):
    rng = np.random.default_rng(701)
    exact = True
    fail_rates = {}
    for n in (1, 4):
        pk, msk = A.abe1_setup(n, 8, rng)
        y = random_bits(rng, n)
        usk, vk = A.abe1_kg(msk, y, rng)
        for _ in range(20):
            m = random_bits(rng, 8)
            got, usk = A.abe1_dec(usk, y, A.abe1_enc(pk, y, m, rng), rng)
            exact &= got == m
        fails = 0
        for _ in range(500):
            x = random_bits(rng, n)
            while x == y:
                x = random_bits(rng, n)
            m = random_bits(rng, 8)
            fails += A.abe1_dec(usk, x, A.abe1_enc(pk, x, m, rng), rng)[0] != m
        fail_rates[n] = fails / 500
    pk, msk = A.abe1_setup(4, 8, rng)
    honest_ok = 0
    for _ in range(100):
        usk, vk = A.abe1_kg(msk, "1010", rng)
        honest_ok += A.abe1_vrfy(vk, usk, rng).decision
    acc = 0
    for _ in range(2000):
        usk, vk = A.abe1_kg(msk, "1010", rng)
        measured = A.Abe1UserKey(usk.abe_sks, usk.skl_ek, qsim.measure_all(usk.qdk, rng)[1])
        acc += A.abe1_vrfy(vk, measured, rng).decision
    rate = acc / 2000
    ok = criterion(7, "ABE with key leasing", {
        "R=1 exact recovery": exact,
        "R=0 failure rate >= 1-2^-16": all(v >= 1 - 2**-16 for v in fail_rates.values()),
        "honest vrfy always": honest_ok == 100,
        "measured acceptance 0.5 +/- 0.05": abs(rate - 0.5) <= 0.05,
    }, f"mismatch_failure_rates={fail_rates} honest={honest_ok}/100 measured_acceptance={rate:.4f}")
    assert ok


def test_criterion_08_q_bounded(criterion):
    params_ok = (
        A.qabe_params("selective", 8, 2) == (8, 4)
        and A.qabe_params("adaptive", 4, 2, 4) == (16, 4)
        and all(A.qabe_params("selective", lam, q) == (lam, q * q) for lam in range(1, 6) for q in range(1, 5))
        and all(
            A.qabe_params("adaptive", lam, q, n) == (2 * (lam + n), q * q)
            for lam in range(1, 5) for q in range(1, 4) for n in range(1, 5)
        )
    )
    rng = np.random.default_rng(801)
    v, w = 3, 2
    pk, msk = A.qabe_setup(v, w, 2, 4, rng)
    cell_keys = [[A.abe1_kg(msk.grid[i][j], "01", rng)[0] for j in range(w)] for i in range(v)]
    shares_ok = True
    for _ in range(20):
        m = random_bits(rng, 4)
        ct = A.qabe_enc(pk, "01", m, rng)
        rows = []
        for i in range(v):
            cells = {A.abe1_dec(cell_keys[i][j], "01", ct.grid[i][j], rng)[0] for j in range(w)}
            shares_ok &= len(cells) == 1
            rows.append(cells.pop())
        shares_ok &= reduce(xor_bits, rows) == m
    for _ in range(200):
        m = random_bits(rng, 12)
        shares_ok &= reduce(xor_bits, A.xor_shares(m, int(rng.integers(1, 9)), rng)) == m
    mc = {}
    mc_ok = True
    n = 100_000
    for vwq in [(1, 2, 2), (4, 4, 3), (8, 4, 2)]:
        p = A.bins_distinctness_probability(*vwq)
        est = A.bins_monte_carlo(*vwq, n, rng)
        sigma = math.sqrt(p * (1 - p) / n)
        mc[vwq] = (round(p, 6), round(est, 6))
        mc_ok &= abs(est - p) <= 3 * sigma
    ok = criterion(8, "q-bounded conversion", {
        "parameter formulas": params_ok,
        "share XOR identity": shares_ok,
        "balls-and-bins Monte-Carlo within 3 sigma": mc_ok,
    }, f"(closed form, estimate)={mc}")
    assert ok


def test_criterion_09_simulator_invariants(criterion):
    rng = np.random.default_rng(901)
    layout = qsim.RegisterLayout.of(("a", 3), ("c", 2))
    other = qsim.RegisterLayout.of(("z", 2))

    def random_ket(lay):
        n = int(rng.integers(1, 9))
        labels = {tuple(random_bits(rng, w) for w in lay.widths) for _ in range(n)}
        return qsim.superpose(lay, [(lab, complex(*rng.normal(size=2))) for lab in labels])

    norm_ok = idem_ok = orth_ok = True
    for _ in range(500):
        k, t = random_ket(layout), random_ket(layout)
        norm_ok &= abs(k.norm_squared() - 1) < 1e-9
        norm_ok &= abs(qsim.tensor(k, random_ket(other)).norm_squared() - 1) < 1e-9
        f = lambda a, c: format((int(a, 2) ^ int(c, 2)) % 8, "03b")
        norm_ok &= abs(qsim.apply_classical(k, ["a", "c"], ("o", 3), f).norm_squared() - 1) < 1e-9
        res = qsim.projection_analysis(k, t)
        if res.accepted_state is not None:
            idem_ok &= abs(qsim.projection_analysis(res.accepted_state, t).accept_probability - 1) < 1e-9
        if res.accepted_state is not None and res.rejected_state is not None:
            orth_ok &= abs(qsim.inner_product(res.accepted_state, res.rejected_state)) < 1e-9
            norm_ok &= abs(res.rejected_state.norm_squared() - 1) < 1e-9
    reg = qsim.RegisterLayout.of(("r", 2))
    k = qsim.superpose(reg, [(("00",), 0.5), (("01",), 0.5), (("11",), math.sqrt(0.5))])
    counts = {"00": 0, "01": 0, "11": 0}
    samples = 20_000
    for _ in range(samples):
        counts[qsim.measure_register(k, "r", rng)[0]] += 1
    p_value = chisquare(list(counts.values()), [samples * 0.25, samples * 0.25, samples * 0.5]).pvalue
    ok = criterion(9, "simulator invariants", {
        "norm preservation": norm_ok,
        "projection idempotence": idem_ok,
        "post-state orthogonality": orth_ok,
        "chi-square at 0.001": p_value > 0.001,
    }, f"chi_square_p={p_value:.4f}")
    assert ok


def _cli_transcript(root, capsys):
    files = {}
    outputs = []

    def run(*argv):
        code = cli_main([str(a) for a in argv])
        outputs.append((code, capsys.readouterr().out))

    for scheme, extra in (("ow", []), ("ind", []), ("abe1", ["1"]), ("qabe", ["1"])):
        d = root / scheme
        common = ["--scheme", scheme, "--lambda-blocks", 2, "--msg-bits", 4, "--id-bits", 1]
        run("keygen", *extra, *common, "--seed", 1, "--out", d)
        run("encrypt", d / "ek.json", "c", *extra, "--seed", 2, "--out", d / "ct.json")
        run("decrypt", d / "qdk.json", d / "ct.json", "--seed", 3, "--out", d / "post.json")
        run("lease-return", d / "vk.json", d / "post.json", "--seed", 4, "--out", d / "ret.json")
        run("attack", "measure_keep", *common, "--trials", 30, "--seed", 5, "--out", d / "attack.json")
        run("bench", *common, "--trials", 20, "--seed", 6, "--out", d / "bench.json")
    for f in sorted(root.rglob("*.json")):
        files[str(f.relative_to(root))] = f.read_bytes()
    return outputs, files


def _experiments():
    gl = skl.GlScheme(skl.basic_scheme())
    reps = [
        H.run_acceptance(skl.OwScheme(2), H.strategy_measure_keep(), 40, seed=11),
        H.run_ow_kla(skl.basic_scheme(), H.strategy_measure_keep(), 40, seed=12),
        H.run_ind_kla(gl, H.strategy_measure_keep(), 40, seed=13),
        H.run_omur(skl.OmurScheme(skl.basic_scheme()), H.strategy_measure_clone(), 20, seed=14),
        H.run_coic(H.coic_measure_decrypt(), 20, seed=15),
        H.run_coic(H.coic_coherent_decrypt_verify(), 20, seed=16, allow_post_challenge=True),
    ]
    return H.reports_to_json(reps)


def test_criterion_10_determinism(criterion, tmp_path, capsys):
    root = tmp_path / "run"
    cli_a = _cli_transcript(root, capsys)
    shutil.rmtree(root)
    cli_b = _cli_transcript(root, capsys)
    exp_a, exp_b = _experiments(), _experiments()
    codes = [c for c, _ in cli_a[0]]
    ok = criterion(10, "determinism", {
        "CLI commands succeed": all(c == 0 for c in codes),
        "CLI outputs byte-identical": cli_a == cli_b,
        "experiment reports identical": exp_a == exp_b,
    }, f"cli_commands={len(codes)} files={len(cli_a[1])}")
    assert ok
