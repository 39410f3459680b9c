"""Command-line front end.

Every file the tool writes is a JSON envelope::

    {"scheme": ..., "kind": "ek" | "qdk" | "vk" | "ct", "config": {...}, "body": {...}}

Messages, identities and attributes are hex on the command line. All
randomness comes from ``--seed``, so repeating a command repeats its output
byte for byte.

Exit codes: 0 success, 1 error, 2 verification rejected.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import abeskl, harness, skl
from .bits import bits_to_hex, hex_to_bits

SCHEMES = ("basic", "ow", "ind", "abe1", "qabe")
EXIT_OK, EXIT_ERROR, EXIT_REJECTED = 0, 1, 2


class CliError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    scheme: str
    lambda_blocks: int
    msg_bits: int
    id_bits: int
    q: int
    mode: str

    @classmethod
    def from_args(cls, a) -> "Config":
        abe = a.scheme in ("abe1", "qabe")
        msg = a.msg_bits if a.msg_bits is not None else (8 if abe else 16)
        blocks = 1 if a.scheme == "basic" else a.lambda_blocks
        cfg = cls(a.scheme, blocks, msg, a.id_bits, a.q, a.mode)
        if min(cfg.lambda_blocks, cfg.msg_bits, cfg.id_bits, cfg.q) < 1:
            raise CliError("--lambda-blocks, --msg-bits, --id-bits and --q must be positive")
        return cfg

    @classmethod
    def from_json(cls, obj: dict) -> "Config":
        try:
            return cls(**{k: obj[k] for k in cls.__dataclass_fields__})
        except KeyError as exc:
            raise CliError(f"config is missing field {exc.args[0]!r}") from None

    @property
    def is_abe(self) -> bool:
        return self.scheme in ("abe1", "qabe")

    def grid(self) -> tuple[int, int]:
        return abeskl.qabe_params(self.mode, self.lambda_blocks, self.q, self.id_bits)

    def skl_scheme(self):
        base = skl.OwScheme(self.lambda_blocks, self.msg_bits)
        return skl.GlScheme(base) if self.scheme == "ind" else base


# -- file envelopes --------------------------------------------------------------

def _dump(path: Path, scheme: str, kind: str, cfg: Config, body) -> None:
    env = {"scheme": scheme, "kind": kind, "config": asdict(cfg), "body": body}
    path.write_text(json.dumps(env, sort_keys=True, separators=(",", ":")) + "\n")


def _load(path: str, kind: str) -> tuple[Config, object]:
    try:
        env = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from None
    for f in ("scheme", "kind", "config", "body"):
        if f not in env:
            raise CliError(f"{path}: missing field {f!r}")
    if env["kind"] != kind:
        raise CliError(f"{path}: expected a {kind} file, got {env['kind']!r}")
    cfg = Config.from_json(env["config"])
    if cfg.scheme != env["scheme"]:
        raise CliError(f"{path}: field 'scheme' disagrees with its config")
    return cfg, env["body"]


def _same_scheme(a: Config, b: Config, what: str) -> None:
    if a != b:
        raise CliError(f"scheme mismatch between files: {what} ({a.scheme} vs {b.scheme})")


def _parse(decoder, body, path: str):
    try:
        return decoder(body)
    except KeyError as exc:
        raise CliError(f"{path}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise CliError(f"{path}: malformed content ({exc})") from None


def _hex_arg(h: str, width: int, what: str) -> str:
    try:
        return hex_to_bits(h.removeprefix("0x"), width)
    except ValueError:
        raise CliError(f"{what} {h!r} is not a hex value that fits in {width} bits") from None


# -- codecs per scheme ---------------------------------------------------------------

def _qdk_codec(cfg: Config):
    if cfg.scheme == "abe1":
        return abeskl.abe1_usk_to_json, abeskl.abe1_usk_from_json
    if cfg.scheme == "qabe":
        return abeskl.qabe_usk_to_json, abeskl.qabe_usk_from_json
    return skl.key_state_to_json, skl.key_state_from_json


def _vk_codec(cfg: Config):
    if cfg.is_abe:
        return (lambda vks: [list(v) for v in vks]), (lambda obj: tuple(tuple(v) for v in obj))
    return skl.vk_to_json, skl.vk_from_json


def _ct_codec(cfg: Config):
    if cfg.scheme == "abe1":
        return abeskl.abe1_ct_to_json, abeskl.abe1_ct_from_json
    if cfg.scheme == "qabe":
        return abeskl.qabe_ct_to_json, abeskl.qabe_ct_from_json
    if cfg.scheme == "ind":
        return (
            lambda cts: [skl.gl_ct_to_json(c) for c in cts],
            lambda obj: [skl.gl_ct_from_json(c) for c in obj],
        )
    return skl.ct_to_json, skl.ct_from_json


def _ek_codec(cfg: Config):
    if cfg.scheme == "abe1":
        return abeskl.abe1_pk_to_json, abeskl.abe1_pk_from_json
    if cfg.scheme == "qabe":
        return abeskl.qabe_pk_to_json, abeskl.qabe_pk_from_json
    return skl.ek_to_json, skl.ek_from_json


# -- commands ----------------------------------------------------------------------

def cmd_keygen(a) -> int:
    cfg = Config.from_args(a)
    rng = np.random.default_rng(a.seed)
    out = Path(a.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    if cfg.is_abe:
        y = _hex_arg(a.value or "0", cfg.id_bits, "identity")
        if cfg.scheme == "abe1":
            pk, msk = abeskl.abe1_setup(cfg.id_bits, cfg.msg_bits, rng)
            qdk, vk = abeskl.abe1_kg(msk, y, rng)
            vks = (vk,)
        else:
            v, w = cfg.grid()
            pk, msk = abeskl.qabe_setup(v, w, cfg.id_bits, cfg.msg_bits, rng)
            qdk, vks = abeskl.qabe_kg(msk, y, rng)
        ek = pk
        vk_obj = vks
    else:
        keys = cfg.skl_scheme().kg(rng)
        ek, qdk, vk_obj = keys.ek, keys.qdk, keys.vk
    _dump(out / "ek.json", cfg.scheme, "ek", cfg, _ek_codec(cfg)[0](ek))
    _dump(out / "qdk.json", cfg.scheme, "qdk", cfg, _qdk_codec(cfg)[0](qdk))
    _dump(out / "vk.json", cfg.scheme, "vk", cfg, _vk_codec(cfg)[0](vk_obj))
    print(f"wrote {out / 'ek.json'} {out / 'qdk.json'} {out / 'vk.json'}")
    return EXIT_OK


def cmd_encrypt(a) -> int:
    if len(a.files) != 1 or a.value is None:
        raise CliError("usage: encrypt EK.json MESSAGE_HEX [ATTRIBUTE_HEX]")
    cfg, body = _load(a.files[0], "ek")
    ek = _parse(_ek_codec(cfg)[1], body, a.files[0])
    rng = np.random.default_rng(a.seed)
    if cfg.is_abe:
        m = _hex_arg(a.value, cfg.msg_bits, "message")
        x = _hex_arg(a.extra or "0", cfg.id_bits, "attribute")
        enc = abeskl.abe1_enc if cfg.scheme == "abe1" else abeskl.qabe_enc
        ct = enc(ek, x, m, rng)
    elif cfg.scheme == "ind":
        m = _hex_arg(a.value, 4 * len(a.value.removeprefix("0x")), "message")
        ct = skl.gl_enc_multi(ek, m, rng)
    else:
        m = _hex_arg(a.value, ek.message_bits, "message")
        ct = skl.skl_enc(ek, m, rng)
    out = Path(a.out or "ct.json")
    _dump(out, cfg.scheme, "ct", cfg, _ct_codec(cfg)[0](ct))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_decrypt(a) -> int:
    if len(a.files) != 2:
        raise CliError("usage: decrypt QDK.json CT.json")
    qcfg, qbody = _load(a.files[0], "qdk")
    ccfg, cbody = _load(a.files[1], "ct")
    _same_scheme(qcfg, ccfg, "key and ciphertext")
    qdk = _parse(_qdk_codec(qcfg)[1], qbody, a.files[0])
    ct = _parse(_ct_codec(ccfg)[1], cbody, a.files[1])
    rng = np.random.default_rng(a.seed)
    try:
        if qcfg.scheme == "abe1":
            m, post = abeskl.abe1_dec(qdk, ct.x, ct, rng)
        elif qcfg.scheme == "qabe":
            m, post = abeskl.qabe_dec(qdk, ct.grid[0][0].x, ct, rng)
        elif qcfg.scheme == "ind":
            m, post = skl.gl_dec_multi(qdk, ct, rng)
        else:
            m, post = skl.skl_dec(qdk, ct, rng)
    except skl.LayoutError as exc:
        raise CliError(f"key does not fit ciphertext: {exc}") from None
    out = Path(a.out or a.files[0])
    _dump(out, qcfg.scheme, "qdk", qcfg, _qdk_codec(qcfg)[0](post))
    if m is None:
        print("decryption failed")
        return EXIT_ERROR
    print(bits_to_hex(m))
    return EXIT_OK


def cmd_lease_return(a) -> int:
    if len(a.files) != 2:
        raise CliError("usage: lease-return VK.json QDK.json")
    vcfg, vbody = _load(a.files[0], "vk")
    qcfg, qbody = _load(a.files[1], "qdk")
    _same_scheme(vcfg, qcfg, "verification key and returned key")
    vk = _parse(_vk_codec(vcfg)[1], vbody, a.files[0])
    qdk = _parse(_qdk_codec(qcfg)[1], qbody, a.files[1])
    rng = np.random.default_rng(a.seed)
    try:
        if vcfg.scheme == "abe1":
            outcome = abeskl.abe1_vrfy(vk[0], qdk, rng)
        elif vcfg.scheme == "qabe":
            outcome = abeskl.qabe_vrfy(vk, qdk, rng)
        else:
            outcome = skl.skl_vrfy(vk, qdk, rng)
    except skl.LayoutError as exc:
        raise CliError(f"returned key has the wrong layout: {exc}") from None
    if a.out:
        _dump(Path(a.out), qcfg.scheme, "qdk", qcfg, _qdk_codec(qcfg)[0](outcome.post_key))
    print("⊤" if outcome.decision else "⊥")
    return EXIT_OK if outcome.decision else EXIT_REJECTED


def _abe_acceptance_trial(cfg: Config, strategy_name: str):
    def trial(rng):
        if cfg.scheme == "abe1":
            _, msk = abeskl.abe1_setup(cfg.id_bits, cfg.msg_bits, rng)
            usk, vk = abeskl.abe1_kg(msk, "0" * cfg.id_bits, rng)
            usks, vks = [usk], [vk]
        else:
            v, w = cfg.grid()
            _, msk = abeskl.qabe_setup(v, w, cfg.id_bits, cfg.msg_bits, rng)
            qusk, vks = abeskl.qabe_kg(msk, "0" * cfg.id_bits, rng)
            usks = list(qusk.keys)
        ok = True
        for usk, vk in zip(usks, vks):
            q = usk.qdk
            if strategy_name == "measure_keep":
                _, q = abeskl.qsim.measure_all(q, rng)
            elif strategy_name != "honest":
                raise CliError(f"strategy {strategy_name!r} is not available for {cfg.scheme}")
            ok &= abeskl.xor_skl_vrfy(vk, q, rng).decision
        return harness.TrialResult(ok, ok)

    return trial


def _attack_report(cfg: Config, name: str, trials: int, seed: int) -> harness.ExperimentReport:
    if cfg.is_abe:
        rows = 1 if cfg.scheme == "abe1" else cfg.grid()[0]
        analytic = {"honest": 1.0, "measure_keep": 0.5**rows}.get(name)
        return harness.monte_carlo(
            _abe_acceptance_trial(cfg, name), trials, seed,
            name=f"acceptance:{cfg.scheme}:{name}", analytic=analytic,
        )
    try:
        strategy = harness.strategy_by_name(name)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    scheme = cfg.skl_scheme()
    if name == "measure_clone":
        omur = skl.OmurScheme(skl.OwScheme(cfg.lambda_blocks, cfg.msg_bits))
        analytic = harness.analytic_pass_probability(strategy, cfg.lambda_blocks) ** 2
        return harness.run_omur(omur, strategy, trials, seed, analytic)
    if cfg.scheme == "ind":
        return harness.run_ind_kla(scheme, strategy, trials, seed)
    analytic = None
    if name in ("measure_keep", "never_return"):
        analytic = harness.analytic_pass_probability(strategy, cfg.lambda_blocks)
    return harness.run_ow_kla(scheme, strategy, trials, seed, analytic)


def _write_report(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")


def cmd_attack(a) -> int:
    if a.value is None:
        raise CliError("usage: attack STRATEGY")
    cfg = Config.from_args(a)
    report = _attack_report(cfg, a.value, a.trials, a.seed)
    text = json.dumps(report.to_json(), sort_keys=True, indent=2)
    _write_report(text, a.out)
    print(text)
    return EXIT_OK


def cmd_bench(a) -> int:
    cfg = Config.from_args(a)
    if cfg.is_abe:
        names = ["honest", "measure_keep"]
    else:
        names = ["honest", "measure_keep", "junk"] + [
            f"partial_measure:{k}" for k in range(1, cfg.lambda_blocks)
        ]
    rows = []
    for name in names:
        if cfg.is_abe:
            r = _attack_report(cfg, name, a.trials, a.seed)
        else:
            strategy = harness.strategy_by_name(name)
            analytic = None
            if name != "junk":
                analytic = harness.analytic_pass_probability(strategy, cfg.lambda_blocks)
            r = harness.run_acceptance(cfg.skl_scheme(), strategy, a.trials, a.seed, analytic)
        rows.append({"strategy": name, "analytic": r.analytic, "empirical": r.estimate,
                     "wilson_ci_95": list(r.wilson_ci_95), "trials": r.trials})
    _write_report(json.dumps({"config": asdict(cfg), "seed": a.seed, "rows": rows},
                             sort_keys=True, indent=2), a.out)
    print(f"{'strategy':<20} {'analytic':>10} {'empirical':>10}  95% CI")
    for row in rows:
        an = "-" if row["analytic"] is None else f"{row['analytic']:.6f}"
        lo, hi = row["wilson_ci_95"]
        print(f"{row['strategy']:<20} {an:>10} {row['empirical']:>10.6f}  [{lo:.4f}, {hi:.4f}]")
    return EXIT_OK


COMMANDS = {
    "keygen": cmd_keygen,
    "encrypt": cmd_encrypt,
    "decrypt": cmd_decrypt,
    "lease-return": cmd_lease_return,
    "attack": cmd_attack,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scheme", choices=SCHEMES, default="ow")
    common.add_argument("--lambda-blocks", type=int, default=1)
    common.add_argument("--msg-bits", type=int, default=None)
    common.add_argument("--id-bits", type=int, default=4)
    common.add_argument("--q", type=int, default=1)
    common.add_argument("--mode", choices=("selective", "adaptive"), default="selective")
    common.add_argument("--seed", type=int, required=True)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--out", default=None)

    p = argparse.ArgumentParser(prog="sklsim", description="Simulated key-leasing encryption toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    usage = {
        "keygen": ("[IDENTITY_HEX]", "generate ek.json, qdk.json, vk.json in --out"),
        "encrypt": ("EK.json MESSAGE_HEX [ATTRIBUTE_HEX]", "encrypt a hex message"),
        "decrypt": ("QDK.json CT.json", "decrypt; prints hex, rewrites the key file (or --out)"),
        "lease-return": ("VK.json QDK.json", "verify a returned key; exit 2 if rejected"),
        "attack": ("STRATEGY", "run a security game for one strategy"),
        "bench": ("", "acceptance table for the built-in strategies"),
    }
    for name, (args, help_) in usage.items():
        sp = sub.add_parser(name, parents=[common], help=help_, usage=f"%(prog)s {args} [options]")
        sp.add_argument("positional", nargs="*")
    return p


def _split_positional(a) -> None:
    pos = list(a.positional)
    a.files, a.value, a.extra = [], None, None
    if a.command == "encrypt":
        a.files, rest = pos[:1], pos[1:]
    elif a.command in ("decrypt", "lease-return"):
        a.files, rest = pos, []
    else:
        rest = pos
    if rest:
        a.value = rest[0]
    if len(rest) > 1:
        a.extra = rest[1]
    if len(rest) > 2:
        raise CliError(f"too many arguments: {' '.join(rest[2:])}")


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    try:
        _split_positional(a)
        if a.trials < 1:
            raise CliError("--trials must be at least 1")
        return COMMANDS[a.command](a)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
