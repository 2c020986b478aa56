"""Command-line entry point: ``growdp <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, verify
from .accountant import basic_compose, cdp_compose, dp_of_zcdp, zcdp_compose, zcdp_of_pure
from .noise import RandomSource

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

RUN_COMMANDS = {
    "run-pmwg": "pmwg",
    "run-scheduler": "scheduler",
    "run-improver": "improver",
    "run-sparse": "sparse",
    "run-ermg": "ermg",
}


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise harness.ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise harness.ConfigError(f"{path}: invalid JSON ({e})") from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment configuration (JSON)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--trials", type=int, help="number of independent trials (overrides the config)")
    parser.add_argument("--workers", type=int, help="worker processes for trials (output does not depend on it)")
    parser.add_argument("--out", help="output directory for results.csv and summary.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="growdp", description="Differential privacy on growing databases")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, algo in RUN_COMMANDS.items():
        p = sub.add_parser(name, help=f"run {algo} experiments from a config")
        _common(p)
        p.add_argument("--stream", help="stream file (JSONL); replaces config.stream")
        if name == "run-sparse":
            p.add_argument("--values", help="JSON list of {t, value} query values; replaces config.workload")
    p = sub.add_parser("compose", help="compose a JSON list of epsilon events")
    _common(p)
    p.add_argument("events", nargs="?", help="JSON file with a list of per-event epsilons")
    p.add_argument("--delta", type=float, default=1e-6, help="delta for the CDP and zCDP totals")
    p = sub.add_parser("dp-audit", help="Monte Carlo privacy audit of a built-in micro instance")
    _common(p)
    p.add_argument("--mechanism", choices=["laplace", "atg", "laplace-halved"], default="laplace")
    p.add_argument("--eps", type=float, default=0.5, help="privacy level of the Laplace instance")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--bins", type=int, default=20)
    p = sub.add_parser("validate", help="run the invariant suites")
    _common(p)
    p.add_argument("--full", action="store_true", help="run at acceptance-test size")
    return parser


def _run(args, algo: str) -> int:
    if not args.config:
        raise harness.ConfigError("--config is required")
    cfg = _load_json(args.config)
    if not isinstance(cfg, dict):
        raise harness.ConfigError("configuration must be a JSON object")
    if cfg.setdefault("algorithm", algo) != algo:
        raise harness.ConfigError(f"config.algorithm is {cfg['algorithm']!r}, expected {algo!r}")
    for key in ("seed", "trials", "workers"):
        if getattr(args, key) is not None:
            cfg[key] = getattr(args, key)
    if args.stream:
        cfg["stream"] = {"kind": "file", "path": args.stream}
    if getattr(args, "values", None):
        cfg["workload"] = {"kind": "values", "values": _load_json(args.values)}
    result = harness.run_experiment(cfg, args.out)
    print(json.dumps(result.summary, sort_keys=True))
    return EXIT_INVARIANT if result.summary["invariant_violations"] else EXIT_OK


def _compose(args) -> int:
    source = args.events or args.config
    if not source:
        raise harness.ConfigError("compose needs a JSON events file")
    events = _load_json(source)
    if not isinstance(events, list) or any(not isinstance(e, (int, float)) or e < 0 for e in events):
        raise harness.ConfigError("events must be a JSON list of nonnegative numbers")
    rho = zcdp_compose(zcdp_of_pure(e) for e in events)
    out = {
        "basic_eps": basic_compose(events).eps,
        "cdp_eps": cdp_compose(events, args.delta).eps,
        "zcdp_rho": rho,
        "zcdp_eps": dp_of_zcdp(rho, args.delta).eps,
        "delta": args.delta,
    }
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _dp_audit(args) -> int:
    if args.mechanism == "atg":
        pair, eps = harness.atg_audit_pair(), 1.0
    else:
        eps = args.eps
        pair = harness.laplace_audit_pair(eps, 0.5 if args.mechanism == "laplace-halved" else 1.0)
    rep = harness.dp_audit(*pair, eps, RandomSource(args.seed or 0), samples=args.samples, bins=args.bins)
    text = harness.render_csv(["bin", "count_a", "count_b", "ratio", "sigma", "flagged"], rep.rows())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "audit.csv").write_text(text)
    print(json.dumps({"mechanism": args.mechanism, "eps": eps, "max_ratio": rep.max_ratio,
                      "limit": rep.limit, "flagged": rep.flagged}, sort_keys=True))
    return EXIT_INVARIANT if rep.flagged else EXIT_OK


def _validate(args) -> int:
    reports = verify.run_all(quick=not args.full)
    for name, rep in reports.items():
        print(f"{'PASS' if rep['ok'] else 'FAIL'} {name} {json.dumps(rep, default=str, sort_keys=True)}")
    return EXIT_OK if all(r["ok"] for r in reports.values()) else EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in RUN_COMMANDS:
            return _run(args, RUN_COMMANDS[args.command])
        if args.command == "compose":
            return _compose(args)
        if args.command == "dp-audit":
            return _dp_audit(args)
        return _validate(args)
    except harness.ConfigError as e:
        print(f"growdp: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
