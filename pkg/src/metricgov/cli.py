"""``metricgov`` command-line interface.

Exit codes: 0 success, 1 verification mismatch, 2 configuration error,
3 protocol or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import examples, scenarios, sim
from .amendments import h_rule
from .protocol import InvalidVote, MaxRoundsExceeded, dump_trace
from .rule import InvalidThreshold

OK, MISMATCH, CONFIG_ERROR, RUNTIME_ERROR = 0, 1, 2, 3


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def cmd_epoch_run(args) -> int:
    try:
        doc = examples.load_document(args.config)
        cfg, votes = examples.epoch_config(doc)
        sources = examples.build_sources(doc.get("sources", []), cfg.space, args.seed)
    except examples.ConfigError as exc:
        return _fail(CONFIG_ERROR, str(exc))
    except InvalidVote as exc:
        return _fail(CONFIG_ERROR, str(exc))
    from .protocol import run_epoch

    try:
        outcome = run_epoch(cfg, votes, sources)
    except InvalidVote as exc:
        return _fail(CONFIG_ERROR, str(exc))
    except (MaxRoundsExceeded, RuntimeError, ValueError) as exc:
        return _fail(RUNTIME_ERROR, str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.jsonl").write_text(dump_trace(outcome.trace))
    result = examples.outcome_document(cfg, outcome)
    (out / "outcome.json").write_text(json.dumps(result, indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    print(json.dumps(result, ensure_ascii=False))
    return OK


def cmd_examples_verify(args) -> int:
    t0 = time.perf_counter()
    reports = examples.verify_all()
    print(examples.format_reports(reports))
    print(f"total {time.perf_counter() - t0:.2f}s")
    return OK if all(r.passed for r in reports) else MISMATCH


def cmd_sweep(args) -> int:
    try:
        doc = examples.load_document(args.config)
        configs = sim.configs_from_document(doc, args.seed)
        for c in configs:
            c.space()
    except (examples.ConfigError, KeyError, TypeError, ValueError) as exc:
        return _fail(CONFIG_ERROR, str(exc))
    try:
        stats = sim.run_sweep(configs, args.jobs)
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        return _fail(RUNTIME_ERROR, f"{type(exc).__name__}: {exc}")
    meta = sim.config_meta(configs)
    meta["seed"] = args.seed
    sim.write_outputs(stats, Path(args.out), meta)
    sys.stdout.write(sim.summary_csv(stats))
    return OK


def cmd_hrule(args) -> int:
    try:
        votes = [Fraction(v) for v in args.votes]
        modes = [args.mode] if args.mode != "both" else ["voted", "grid"]
        for mode in modes:
            new = h_rule(Fraction(args.sigma), votes, mode)
            print(f"{mode}: {new} ({float(new):g})")
    except (InvalidThreshold, ValueError, ZeroDivisionError) as exc:
        return _fail(CONFIG_ERROR, str(exc))
    return OK


def cmd_scenarios(args) -> int:
    results = scenarios.scenario_suite(args.seed, args.scale)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} trials={r.trials}")
        if not r.passed:
            print(f"      {r.failures[:3]}")
    if args.out:
        Path(args.out).write_text(json.dumps([r.to_dict() for r in results], indent=2, default=str) + "\n")
    return OK if all(r.passed for r in results) else MISMATCH


def cmd_schema_check(args) -> int:
    bad = 0
    for path in args.files:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            return _fail(CONFIG_ERROR, str(exc))
        problems = sim.check_summary_csv(text)
        for p in problems:
            print(f"{path}: {p}")
        bad += bool(problems)
    return MISMATCH if bad else OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metricgov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    epoch = sub.add_parser("epoch", help="run proposal epochs")
    esub = epoch.add_subparsers(dest="action", required=True)
    run = esub.add_parser("run", help="run one epoch from a config document")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="directory for trace.jsonl and outcome.json")
    run.add_argument("--seed", type=int, default=None, help="seed for random proposal sources")
    run.set_defaults(func=cmd_epoch_run)

    ex = sub.add_parser("examples", help="bundled worked examples")
    exsub = ex.add_subparsers(dest="action", required=True)
    exsub.add_parser("verify", help="check every fixture").set_defaults(func=cmd_examples_verify)

    sw = sub.add_parser("sweep", help="Monte-Carlo compromise-gap sweep")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--seed", type=int, required=True)
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    hr = sub.add_parser("hrule", help="apply the threshold amendment rule")
    hr.add_argument("--sigma", required=True)
    hr.add_argument("--votes", required=True, nargs="+")
    hr.add_argument("--mode", choices=("voted", "grid", "both"), default="both")
    hr.set_defaults(func=cmd_hrule)

    sc = sub.add_parser("scenarios", help="strategic-behaviour experiments")
    sc.add_argument("--seed", type=int, required=True)
    sc.add_argument("--scale", type=float, default=1.0, help="fraction of the default trial budgets")
    sc.add_argument("--out", default=None)
    sc.set_defaults(func=cmd_scenarios)

    sch = sub.add_parser("schema-check", help="validate summary CSV files")
    sch.add_argument("files", nargs="+")
    sch.set_defaults(func=cmd_schema_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except examples.ConfigError as exc:
        return _fail(CONFIG_ERROR, str(exc))


if __name__ == "__main__":
    sys.exit(main())
