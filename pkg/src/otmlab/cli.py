"""Command-line experiment driver.

    otmlab protocol        honest receiver correctness
    otmlab attack NAME     breidbart | naive-z | adaptive-guess | rewind | bounded-key
    otmlab bounds          table of the closed-form bounds
    otmlab verify-sdp      SDP witness certificate
    otmlab uc-distinguish  real-vs-ideal distinguishing experiment

Exit status is 0 when every verdict passes, 1 on a failed verdict and 2 on a
usage error. Reports are deterministic functions of the flags and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from math import sqrt

from . import adversaries as adv
from .bounds import interactive_bound, noninteractive_bound, sdp_certificate
from .protocol import distinguishing_experiment, honest_receiver_execute, sender_create
from .quantum import MAX_STATEVECTOR_QUBITS
from .rng import DEFAULT_SEED, make_rng
from .token import make_toy_ma_memory

ATTACKS = ("breidbart", "naive-z", "adaptive-guess", "rewind", "bounded-key")
UC_ADVERSARIES = ("honest", "breidbart", "naive-z", "adaptive-guess")
CHUNK = 1 << 16


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _bit(text: str) -> int:
    if text not in ("0", "1"):
        raise argparse.ArgumentTypeError(f"expected 0 or 1, got {text}")
    return int(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_positive, default=8, help="number of key qubits")
    common.add_argument("--trials", type=_positive, default=None)
    common.add_argument("--m", type=_positive, default=None, help="query budget")
    common.add_argument("--delta", type=_positive, default=2, help="keys per secret (MA memories)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--s0", type=_bit, default=None)
    common.add_argument("--s1", type=_bit, default=None)
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", default=None, help="write the report here instead of stdout")

    parser = argparse.ArgumentParser(prog="otmlab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("protocol", parents=[common], help="honest protocol correctness")
    p = sub.add_parser("attack", parents=[common], help="run a named attack")
    p.add_argument("name", choices=ATTACKS)
    p = sub.add_parser("bounds", parents=[common], help="tabulate bounds")
    p.add_argument("--n-max", type=_positive, default=20)
    p = sub.add_parser("verify-sdp", parents=[common], help="SDP witness certificate")
    p.add_argument("--tensor-n", type=_positive, default=1, help="also check tensor powers up to this n")
    p = sub.add_parser("uc-distinguish", parents=[common], help="real-vs-ideal experiment")
    p.add_argument("--adversary", choices=UC_ADVERSARIES, default="breidbart")
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


def _monte_carlo(batch, trials: int, seed: int) -> float:
    hits = 0
    for i, start in enumerate(range(0, trials, CHUNK)):
        hits += int(batch(min(CHUNK, trials - start), make_rng(seed, i)).sum())
    return hits / trials


def run_protocol(args) -> dict:
    trials = args.trials or 1000
    success = {}
    for b in (0, 1):
        ok = 0
        for t in range(trials):
            rng = make_rng(args.seed, b, t)
            s0 = int(rng.integers(0, 2)) if args.s0 is None else args.s0
            s1 = int(rng.integers(0, 2)) if args.s1 is None else args.s1
            out = sender_create(s0, s1, args.n, rng)
            ok += honest_receiver_execute(b, out, rng) == (s1 if b else s0)
        success[str(b)] = ok / trials
    return {
        "subcommand": "protocol",
        "n": args.n,
        "trials": trials,
        "seed": args.seed,
        "success_frequency": success,
        "verdict": "pass" if all(v == 1.0 for v in success.values()) else "fail",
        "config": _config(args),
    }


def run_attack(args) -> dict:
    name, n, seed = args.name, args.n, args.seed
    m = args.m or 2
    report = {"subcommand": "attack", "attack": name, "n": n, "m": m, "delta": args.delta, "seed": seed}
    if name in ("breidbart", "naive-z", "adaptive-guess"):
        trials = args.trials or 100_000
        if name == "breidbart":
            freq = _monte_carlo(lambda k, r: adv.breidbart_batch(n, k, r), trials, seed)
            reference, criterion = noninteractive_bound(n), "|frequency - alpha^n| <= 3 sigma"
        elif name == "naive-z":
            freq = _monte_carlo(lambda k, r: adv.naive_z_batch(n, k, r), trials, seed)
            reference, criterion = noninteractive_bound(n), "frequency <= alpha^n + 3 sigma"
        else:
            freq = _monte_carlo(lambda k, r: adv.adaptive_guess_batch(n, m, k, r), trials, seed)
            reference, criterion = interactive_bound(n, m), "frequency <= interactive_bound(n, m) + 3 sigma"
        sigma = sqrt(max(reference * (1 - reference), 1e-300) / trials)
        if name == "breidbart":
            ok = abs(freq - reference) <= 3 * sigma
        else:
            ok = freq <= reference + 3 * sigma
        report.update(trials=trials, frequency=freq, reference=reference, sigma=sigma, criterion=criterion)
    elif name == "rewind":
        trials = args.trials or 100
        probs = []
        for t in range(trials):
            rng = make_rng(seed, t)
            spec, psi = make_toy_ma_memory(n, args.delta, rng)
            probs.append(adv.rewind_attack_state(spec, psi, adv.SuperpositionOracle(spec)).success_probability)
        freq = min(probs)
        ok = freq >= 1 - 1e-10
        report.update(trials=trials, frequency=freq, reference=1.0, sigma=0.0,
                      criterion="exact success probability == 1 for every memory")
    else:
        trials = args.trials or 100_000
        spec, psi = make_toy_ma_memory(n, args.delta, make_rng(seed, 0))
        rng = make_rng(seed, 1)
        hits = 0
        for _ in range(trials):
            res = adv.bounded_key_attack(spec, psi, adv.ClassicalOracle(spec), rng)
            hits += adv.bounded_key_success(spec, res)
        freq = hits / trials
        reference = 1.0 / args.delta ** 2
        ok = freq >= reference
        report.update(trials=trials, frequency=freq, reference=reference,
                      sigma=sqrt(freq * (1 - freq) / trials), criterion="frequency >= 1/delta^2")
    report["verdict"] = "pass" if ok else "fail"
    report["config"] = _config(args)
    return report


def run_bounds(args) -> list[dict]:
    m = args.m or 10
    return [
        {"n": n, "m": m, "noninteractive_bound": noninteractive_bound(n),
         "interactive_bound": interactive_bound(n, m)}
        for n in range(1, args.n_max + 1)
    ]


def run_verify_sdp(args) -> dict:
    cert = sdp_certificate(tensor_n=args.tensor_n)
    cert["subcommand"] = "verify-sdp"
    cert["config"] = _config(args)
    return cert


def run_uc(args) -> dict:
    m = args.m or (1 if args.adversary == "honest" else 2)
    strategy = adv.classical_strategy(args.adversary, m=max(m, 2))
    report = distinguishing_experiment(
        strategy, args.n, args.trials or 10_000, args.seed, m_budget=m, s0=args.s0, s1=args.s1
    )
    d = report.to_dict()
    d["config"] = _config(args)
    return d


def _flatten(d: dict) -> dict:
    return {k: (json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v) for k, v in d.items()}


def render(payload, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    rows = payload if isinstance(payload, list) else [payload]
    rows = [_flatten(r) for r in rows]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.n > MAX_STATEVECTOR_QUBITS:
        parser.error(f"--n must be at most {MAX_STATEVECTOR_QUBITS}")
    if args.subcommand == "attack" and args.name == "adaptive-guess" and (args.m or 2) < 2:
        parser.error("adaptive-guess needs --m >= 2")
    if args.subcommand == "attack" and args.name in ("rewind", "bounded-key") and 2 * args.delta > 1 << args.n:
        parser.error("need 2 * delta <= 2^n")
    if args.subcommand == "attack" and args.name == "rewind" and args.n > 4:
        parser.error("rewind runs exact statevectors; use --n <= 4")

    handlers = {
        "protocol": run_protocol,
        "attack": run_attack,
        "bounds": run_bounds,
        "verify-sdp": run_verify_sdp,
        "uc-distinguish": run_uc,
    }
    payload = handlers[args.subcommand](args)
    fmt = args.format or ("csv" if args.subcommand == "bounds" else "json")
    text = render(payload, fmt)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if isinstance(payload, list):
        return 0
    return 0 if payload.get("verdict") == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
