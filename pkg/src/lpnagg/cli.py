"""Command-line entry point: ``lpnagg {optimize,simulate,fer,attack-check,selftest}``.

Configs are flat ``key = value`` text files with dotted keys; ``#`` starts a
comment.  ``--set key=value`` overrides file values.  Unknown keys are
rejected.  All randomness derives from ``--seed`` (default
:data:`DEFAULT_SEED`).

Exit codes: 0 success, 2 configuration error, 3 infeasible plan, 4 failed
check or session.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import checks, coding, params, protocol
from .errors import InfeasibleError, LpnAggError, ParameterError, SessionError

DEFAULT_SEED = 1
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_FAILED = 0, 2, 3, 4

_SIM_INPUTS, _SIM_SESSION = 11, 12


class ConfigError(LpnAggError):
    pass


# --- typed flat configs ----------------------------------------------------


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _list(conv: Callable[[str], object]) -> Callable[[str], list]:
    def parse(s: str) -> list:
        return [conv(x) for x in s.split(",") if x.strip()]

    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], object]
    default: str
    help: str = ""


SCHEMAS: dict[str, dict[str, Key]] = {
    "optimize": {
        "protocol.N": Key(int, "10", "users"),
        "protocol.z": Key(int, "5", "collusion parameter"),
        "protocol.M": Key(int, "8", "committee size (0 = trusted decryptor)"),
        "protocol.levels": Key(int, "65536", "quantization levels"),
        "protocol.k_C": Key(int, "10000", "input dimension"),
        "security.lambda": Key(float, "128", "bits of classical security"),
        "security.eps": Key(float, "0.1", "rate gap to capacity"),
        "security.mode": Key(str, "reduction", "reduction or solver"),
        "optimize.min_rate": Key(float, "0", "minimum code rate"),
        "optimize.prime_limit": Key(int, "65536", "moduli are primes below this"),
        "optimize.max_candidates": Key(int, "16", "moduli kept for subset search"),
        "optimize.per_decade": Key(int, "40", "p-grid points per decade"),
    },
    "simulate": {
        "protocol.N": Key(int, "10"),
        "protocol.z": Key(int, "2"),
        "protocol.M": Key(int, "5"),
        "protocol.levels": Key(int, "16"),
        "protocol.k_C": Key(int, "64"),
        "protocol.rounds": Key(int, "1"),
        "protocol.moduli": Key(_list(int), "251", "comma-separated primes"),
        "protocol.collude": Key(_bool, "false"),
        "kahe.p": Key(_list(float), "0.001", "one value or one per modulus"),
        "kahe.k": Key(_list(int), "128", "one value or one per modulus"),
        "code.family": Key(str, "repetition"),
        "code.r": Key(_list(int), "", "repetition factor; empty = size from target_fer"),
        "code.target_fer": Key(float, "0.001"),
        "code.n": Key(int, "0", "polar length; 0 = next power of two >= 2 k_C"),
        "simulate.sessions": Key(int, "1"),
    },
    "fer": {
        "code.family": Key(str, "repetition"),
        "code.rho": Key(int, "2"),
        "code.k": Key(int, "64"),
        "code.r": Key(int, "5"),
        "code.n": Key(int, "1024"),
        "code.design_rate": Key(float, "0.05"),
        "code.mc_trials": Key(int, "2000"),
        "fer.P": Key(_list(float), "0.01", "channel rates to evaluate"),
        "fer.trials": Key(int, "1000"),
    },
    "attack-check": {
        "attack.samples": Key(int, "100000", "samples or retained coordinates per test"),
    },
    "selftest": {},
}


def read_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def resolve(command: str, file_values: dict[str, str], overrides: list[str]) -> dict[str, object]:
    schema = SCHEMAS[command]
    raw = {k: v.default for k, v in schema.items()}
    merged = dict(file_values)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        merged[k] = v
    unknown = sorted(set(merged) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    raw.update(merged)
    out = {}
    for k, v in raw.items():
        try:
            out[k] = schema[k].parse(v)
        except ValueError as exc:
            raise ConfigError(f"{k}: {exc}") from None
    return out


# --- output ----------------------------------------------------------------


def write_atomic(path: str, text: str) -> None:
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None, stdout) -> None:
    if out:
        write_atomic(out, text)
    else:
        stdout.write(text)


def _num(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


# --- commands --------------------------------------------------------------

OPTIMIZE_COLUMNS = [
    "row", "moduli", "rho", "p", "P", "tau", "k", "R", "n", "M_t", "cost_bits", "pareto",
    "security_bits", "mode",
]


def cmd_optimize(cfg: dict, out: str | None, stdout) -> int:
    mode = params.SecurityMode(cfg["security.mode"])
    plan = params.optimize(
        N=cfg["protocol.N"],
        z=cfg["protocol.z"],
        M=cfg["protocol.M"],
        levels=cfg["protocol.levels"],
        k_C=cfg["protocol.k_C"],
        lam=cfg["security.lambda"],
        eps=cfg["security.eps"],
        mode=mode,
        min_rate=cfg["optimize.min_rate"],
        prime_limit=cfg["optimize.prime_limit"],
        max_candidates=cfg["optimize.max_candidates"],
        per_decade=cfg["optimize.per_decade"],
    )
    tag = "*".join(str(m.rho) for m in plan.moduli)
    rows = [["plan", tag, "", "", "", "", "", "", "", "", _num(plan.cost_bits), "", _num(plan.security_bits), mode.value]]
    for m in plan.moduli:
        rows.append(
            ["modulus", tag, m.rho, _num(m.p), _num(m.P), _num(m.tau), m.k, _num(m.R), m.n, m.M,
             _num(m.cost_bits), "", _num(m.security_bits), mode.value]
        )
    for rho in sorted(plan.sweeps):
        M_t = params.committee_size(rho, plan.M)
        for r in plan.sweeps[rho]:
            rows.append(
                ["sweep", tag, rho, _num(r["p"]), _num(r["P"]), _num(r["tau"]), r["k"], _num(r["R"]),
                 "", M_t, _num(r["cost"]), r["pareto"], _num(params.prange_bits(r["tau"], r["k"])), mode.value]
            )
    _emit(_csv(OPTIMIZE_COLUMNS, rows), out, stdout)
    return EXIT_OK


def _session_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed, _SIM_SESSION, i]).generate_state(1, np.uint64)[0])


def cmd_simulate(cfg: dict, out: str | None, stdout, seed: int) -> int:
    N, k_C, rounds = cfg["protocol.N"], cfg["protocol.k_C"], cfg["protocol.rounds"]
    moduli = cfg["protocol.moduli"]

    def per(v):
        return v[0] if len(v) == 1 else v

    r = cfg["code.r"]
    lines, csv_rows = [], []
    successes, ratios = 0, []
    decryptor_bytes = set()
    for i in range(cfg["simulate.sessions"]):
        pcfg = protocol.build_config(
            N, cfg["protocol.z"], cfg["protocol.M"], cfg["protocol.levels"], k_C, moduli,
            per(cfg["kahe.p"]), per(cfg["kahe.k"]),
            rounds=rounds, master_seed=_session_seed(seed, i), code=cfg["code.family"],
            r=per(r) if r else None, target_fer=cfg["code.target_fer"],
            polar_n=cfg["code.n"] or None, collude=cfg["protocol.collude"],
        )
        rng = np.random.default_rng([seed, _SIM_INPUTS, i])
        inputs = [rng.integers(0, pcfg.levels, size=k_C * rounds) for _ in range(N)]
        try:
            res = protocol.run_session(pcfg, inputs)
        except SessionError as exc:
            stdout.write(f"session {i}: failed at {exc}\n")
            return EXIT_FAILED
        successes += res.ok
        if not res.ok:
            bad = sum(sum(row) for row in res.mismatches)
            lines.append(f"session {i}: step 6 ({protocol.STEPS[6]}) decoded {bad} wrong residues")
        # key material is sent once, ciphertexts every round
        key_bits = key_formula(pcfg)
        formula = key_bits + rounds * (protocol.predicted_uplink_bits(pcfg) - key_bits)
        ratios.append(res.stats.uplink(0, payload_only=True) * 8 / formula)
        decryptor_bytes.add(res.stats.decryptor_path_bytes())
        for row in csv.reader(io.StringIO(res.stats.to_csv())):
            if row[0] != "party":
                csv_rows.append([i] + row)
    sessions = cfg["simulate.sessions"]
    lines.insert(0, f"sessions {sessions} success {successes} rate {successes / sessions:.4f}")
    lines.append(f"uplink_payload_over_formula {min(ratios):.6f} {max(ratios):.6f}")
    lines.append(f"decryptor_path_bytes {','.join(map(str, sorted(decryptor_bytes)))}")
    stdout.write("\n".join(lines) + "\n")
    text = _csv(["session", "party", "msg_type", "bytes", "round"], csv_rows)
    if out:
        write_atomic(out, text)
    return EXIT_OK


def key_formula(pcfg: protocol.ProtocolConfig) -> float:
    """Key-sharing part of the per-user cost formula, in bits."""
    z = pcfg.z if pcfg.M else 0
    total = 0.0
    for m in pcfg.moduli:
        M_t = m.sharing.M if m.sharing else 0
        total += m.kahe.k * params.share_factor(M_t, z) * np.log2(m.rho)
    return total


def cmd_fer(cfg: dict, out: str | None, stdout, seed: int) -> int:
    family, rho, k = cfg["code.family"], cfg["code.rho"], cfg["code.k"]
    if family == coding.REPETITION:
        spec = coding.repetition_code(rho, k, cfg["code.r"])
    elif family == coding.POLAR:
        spec = coding.polar_construct(
            rho, cfg["code.n"], cfg["code.design_rate"], k, mc_trials=cfg["code.mc_trials"], seed=seed
        )
    else:
        raise ConfigError(f"code.family must be repetition or polar, got {family!r}")
    rows = []
    for i, P in enumerate(cfg["fer.P"]):
        rng = np.random.default_rng([seed, i])
        fer = coding.fer_estimate(spec, P, cfg["fer.trials"], rng)
        bound = ""
        if family == coding.REPETITION:
            bound = _num(min(1.0, k * coding.repetition_block_failure_bound(cfg["code.r"], P)))
        rows.append([family, rho, spec.n, spec.k, _num(spec.rate), _num(P), cfg["fer.trials"], _num(fer), bound])
    _emit(_csv(["family", "rho", "n", "k", "rate", "P", "trials", "fer", "union_bound"], rows), out, stdout)
    return EXIT_OK


def _report(results, out, stdout) -> int:
    stdout.write(checks.format_report(results) + "\n")
    if out:
        rows = [[r.name, r.statistic, r.threshold, "pass" if r.passed else "fail"] for r in results]
        write_atomic(out, _csv(["test", "statistic", "threshold", "result"], rows))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_attack_check(cfg: dict, out: str | None, stdout, seed: int) -> int:
    return _report(checks.attack_checks(seed, cfg["attack.samples"]), out, stdout)


def cmd_selftest(out: str | None, stdout, seed: int) -> int:
    return _report(checks.selftest_checks(seed), out, stdout)


# --- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpnagg", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SCHEMAS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        if name == "optimize":
            p.add_argument("--mode", choices=[m.value for m in params.SecurityMode])
    return ap


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.seed < 0 or args.seed >= 2**64:
        stderr.write("error: --seed must be an unsigned 64-bit integer\n")
        return EXIT_CONFIG
    try:
        file_values = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    file_values = read_config_text(fh.read(), args.config)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
        overrides = list(args.set)
        if getattr(args, "mode", None):
            overrides.append(f"security.mode={args.mode}")
        cfg = resolve(args.command, file_values, overrides)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out, stdout)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, stdout, args.seed)
        if args.command == "fer":
            return cmd_fer(cfg, args.out, stdout, args.seed)
        if args.command == "attack-check":
            return cmd_attack_check(cfg, args.out, stdout, args.seed)
        return cmd_selftest(args.out, stdout, args.seed)
    except ConfigError as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except InfeasibleError as exc:
        stderr.write(f"infeasible ({exc.constraint}): {exc}\n")
        return EXIT_INFEASIBLE
    except (ParameterError, ValueError) as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
