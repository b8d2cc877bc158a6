"""Command-line runner.

Exit codes: 0 success, 1 property violation, 2 input error, 3 resource limit.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import random
import sys
import tempfile
from pathlib import Path
from typing import Sequence

from . import __version__
from .agents import TOURNAMENT_HEADER, Kind, scenario_from_config, tournament
from .auctions import (
    OUTCOME_HEADER,
    BidProfile,
    Rule,
    allocate_greedy,
    outcome_rows,
    parse_profile,
    run_auction,
    verify_monotonicity,
    verify_truthfulness,
)
from .errors import (
    ConfigurationError,
    ContractViolation,
    InstanceTooLargeError,
    LedgerImbalanceError,
    OracleLimitError,
    ParseError,
    SearchLimitError,
)
from .feemarket import BLOCK_HEADER, BaseFeeState, simulate_base_fee
from .knapsack import ALL_SOLVERS, RESULT_HEADER, SOLVERS, parse_instance
from .pipeline import COMPARE_HEADER, REPORT_HEADER, comparison_rows, compare_eras, parse_scenario

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3

log = logging.getLogger("blocklab")


class Output:
    """Writes CSV either to stdout or, atomically, into the ``--out`` directory."""

    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        self.text(name, buf.getvalue())

    def text(self, name: str, body: str) -> None:
        if self.dir is None:
            sys.stdout.write(body)
            return
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(body)
        os.replace(tmp, self.dir / name)


def _read(path: str | None) -> str:
    if path is None:
        raise ConfigurationError("no input file given")
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc


def write_manifest(out: Output, command: str, scenario: str | None, seed: int, canonical: str) -> dict:
    """Record how to reproduce the run. Written before any result file."""
    manifest = {
        "command": command,
        "scenario": scenario,
        "seed": seed,
        "out": str(out.dir) if out.dir else None,
        "version": __version__,
        "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
    }
    if out.dir is not None:
        out.text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def canonical_config(cp: configparser.ConfigParser) -> str:
    """Serialization that ignores key order, spacing and comments."""
    data = {s: dict(sorted(cp.items(s))) for s in sorted(cp.sections())}
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


# -- commands -------------------------------------------------------------------


def cmd_solve(args, out: Output) -> int:
    inst = parse_instance(_read(args.instance))
    names: list[str] = []
    for s in args.solver or ["exact"]:
        names.extend(ALL_SOLVERS if s == "all" else [s])
    rows = [SOLVERS[name](inst).as_row(name) for name in names]
    out.csv("solve.csv", RESULT_HEADER, rows)
    return EXIT_OK


def _suite(seed: int, count: int) -> list[tuple[BidProfile, dict[int, int]]]:
    """Small random instances for property scans: up to 4 bidders, values up to 20."""
    rng = random.Random(seed)
    suite = []
    for _ in range(count):
        n = rng.randint(1, 4)
        pairs = [(rng.randint(0, 20), rng.randint(1, 5)) for _ in range(n)]
        profile = BidProfile.from_pairs(pairs, rng.randint(1, 10))
        suite.append((profile, {b.agent_id: b.amount for b in profile.bids}))
    return suite


WITNESS_HEADER = ["check", "rule", "instance", "agent_id", "true_value", "deviation", "truthful_utility", "deviant_utility"]


def cmd_auction(args, out: Output) -> int:
    rule = Rule.parse(args.rule)
    if args.suite:
        suite = _suite(args.seed, args.suite)
    else:
        profile, values = parse_profile(_read(args.profile))
        suite = [(profile, values)]
    if not args.verify:
        rows = []
        for profile, _ in suite:
            rows.extend(outcome_rows(profile, run_auction(profile, rule)))
        out.csv("outcome.csv", OUTCOME_HEADER, rows)
        return EXIT_OK

    witnesses = []
    if args.verify == "truthful":
        for idx, (profile, values) in enumerate(suite):
            true_profile = BidProfile(
                tuple(b.__class__(b.agent_id, values[b.agent_id], b.size) for b in profile.bids), profile.capacity
            )
            rep = verify_truthfulness(rule, true_profile, max_bid=args.max_bid)
            if not rep.truthful:
                w = rep.witness
                witnesses.append(["truthful", rule.value, str(idx), str(w.agent_id), str(w.true_value),
                                  str(w.bid), str(w.truthful_utility), str(w.deviation_utility)])
    else:
        profiles = [p for p, _ in suite]
        rep = verify_monotonicity(allocate_greedy, profiles, max_bid=args.max_bid)
        if not rep.monotone:
            prof, agent, low, high = rep.counterexample
            idx = profiles.index(prof)
            witnesses.append(["monotone", "greedy", str(idx), str(agent), "", str(high), str(low), ""])
    out.csv("verify.csv", WITNESS_HEADER, witnesses)
    if args.expect_witness:
        return EXIT_OK if witnesses else EXIT_VIOLATION
    return EXIT_VIOLATION if witnesses else EXIT_OK


def _config_text(args) -> tuple[str | None, str]:
    path = getattr(args, "scenario", None) or args.config
    return path, (_read(path) if path else "")


def cmd_simulate(args, out: Output) -> int:
    path, text = _config_text(args)
    scenario, cp = parse_scenario(text)
    write_manifest(out, "simulate", path, args.seed, canonical_config(cp))
    results = compare_eras(scenario, None, args.seed)
    rows = [r.csv() for _era, rep in results for r in rep.rows]
    out.csv("report.csv", REPORT_HEADER, rows)
    if len(results) > 1:
        out.csv("compare.csv", COMPARE_HEADER, comparison_rows(results))
    bad = sum(rep.violations for _e, rep in results)
    if bad:
        log.error("%d blocks broke the payoff identity", bad)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_tournament(args, out: Output) -> int:
    path, text = _config_text(args)
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"bad scenario file: {exc}") from exc
    scenario = scenario_from_config(cp)
    if args.agents:
        scenario = dataclasses.replace(scenario, kind=Kind(args.agents.upper()))
    write_manifest(out, "tournament", path, args.seed, canonical_config(cp) + f"|{scenario!r}")
    seeds = range(args.seed, args.seed + args.seeds)
    report = tournament(scenario=scenario, seeds=seeds)
    out.csv("tournament.csv", TOURNAMENT_HEADER, report.rows())
    return EXIT_OK


def cmd_feemarket(args, out: Output) -> int:
    path, text = _config_text(args)
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"bad scenario file: {exc}") from exc
    fm = dict(cp.items("feemarket")) if cp.has_section("feemarket") else {}
    try:
        keys = {k: int(v) for k, v in fm.items()}
    except ValueError as exc:
        raise ConfigurationError(f"[feemarket]: {exc}") from exc
    unknown = set(keys) - {"target_gas", "max_gas", "adjustment_denominator", "min_base_fee", "initial_base_fee", "min_tip"}
    if unknown:
        raise ConfigurationError(f"[feemarket]: unknown keys {sorted(unknown)}")
    try:
        state = BaseFeeState(
            keys.get("initial_base_fee", args.base_fee),
            keys.get("target_gas", 15_000_000),
            keys.get("max_gas", 30_000_000),
            keys.get("adjustment_denominator", 8),
            0,
            keys.get("min_base_fee", 1),
        )
    except ContractViolation as exc:
        raise ConfigurationError(str(exc)) from exc
    rng = random.Random(args.seed)
    users = [(rng.randint(1, 100), rng.randint(21, 500) * 1000) for _ in range(args.users)]
    rows = simulate_base_fee(state, users, args.blocks, keys.get("min_tip", 1))
    out.csv("feemarket.csv", BLOCK_HEADER, [[str(x) for x in r] for r in rows])
    return EXIT_OK


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blocklab", description="Knapsack auctions and block production experiments.")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")
    p.add_argument("--out", help="directory for CSV output; stdout when omitted")
    p.add_argument("--config", help="scenario file (INI sections [era] [mempool] [feemarket] [agents])")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="pack a knapsack instance")
    s.add_argument("instance")
    s.add_argument("--solver", action="append", choices=sorted(SOLVERS) + ["all"],
                   help="repeatable; 'all' means exact, greedy, fractional and subsetsum")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("auction", help="run or verify a sealed-bid auction")
    a.add_argument("profile", nargs="?")
    a.add_argument("--rule", default="dp")
    a.add_argument("--verify", choices=["truthful", "monotone"])
    a.add_argument("--expect-witness", action="store_true", help="succeed only if a violation is found")
    a.add_argument("--suite", type=int, default=0, help="use N seeded random profiles instead of a file")
    a.add_argument("--max-bid", type=int, default=None)
    a.set_defaults(func=cmd_auction)

    m = sub.add_parser("simulate", help="simulate block production eras")
    m.add_argument("scenario", nargs="?")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tournament", help="train bidders and rank pricing rules")
    t.add_argument("scenario", nargs="?")
    t.add_argument("--seeds", type=int, default=30)
    t.add_argument("--agents", choices=["truthful", "shade", "qlearn"])
    t.set_defaults(func=cmd_tournament)

    f = sub.add_parser("feemarket", help="base-fee trajectory under a fixed seeded demand")
    f.add_argument("scenario", nargs="?")
    f.add_argument("--blocks", type=int, default=50)
    f.add_argument("--users", type=int, default=200)
    f.add_argument("--base-fee", type=int, default=20)
    f.set_defaults(func=cmd_feemarket)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, Output(args.out))
    except (ParseError, ConfigurationError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InstanceTooLargeError, OracleLimitError, SearchLimitError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except LedgerImbalanceError as exc:
        print(f"conservation failure: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
