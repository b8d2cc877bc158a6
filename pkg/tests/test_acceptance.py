"""Acceptance checks. Each prints one PASS/FAIL line; thresholds are fixed constants below.

Run alone with ``pytest tests/test_acceptance.py -v`` (lines appear in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

import hashlib
import os
import subprocess
import sys
import time

from blocklab.agents import AuctionScenario, tournament
from blocklab.auctions import (
    Rule,
    allocate_greedy,
    allocate_lowest_density_first,
    critical_payments,
    run_auction,
    verify_monotonicity,
    verify_truthfulness,
)
from blocklab.feemarket import BaseFeeState, find_contraction_threshold, update_base_fee
from blocklab.knapsack import KnapsackInstance, greedy_01, solve_brute_force, solve_exact
from blocklab.mev import MevClass, apply_extraction, run_pga
from blocklab.pipeline import Era, EraConfig, MempoolParams, generate_mempool, run_block, run_epochs

from suites import knapsack_suite, profile_suite, unit_profile_suite

RESULTS: list[str] = []

ORACLE_COUNT, ORACLE_MAX_N, ORACLE_SECONDS = 1000, 20, 10.0
MONO_COUNT, MONO_MAX_N = 500, 6
TRUTH_COUNT, TRUTH_MAX_N, TRUTH_MAX_VALUE = 200, 4, 20
LADDER_COUNT = 1000
TOURNAMENT_SEEDS, TOURNAMENT_SHARE, TOURNAMENT_SECONDS = 30, 2 / 3, 300.0
PBS_EPOCHS, PBS_SECONDS = 10, 30.0
PGA_MAX_VALUE, PGA_STRIDE = 10**4, 97


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_01_oracle_equivalence():
    suite = knapsack_suite(2024, ORACLE_COUNT, max_n=ORACLE_MAX_N)
    t0 = time.perf_counter()
    mismatches = 0
    for case in suite:
        e, b = solve_exact(case), solve_brute_force(case)
        mismatches += (e.selected, e.total_value) != (b.selected, b.total_value)
    dt = time.perf_counter() - t0
    report(1, mismatches == 0 and dt < ORACLE_SECONDS,
           f"exact vs brute force on {len(suite)} instances: {mismatches} mismatches in {dt:.2f}s")


def test_criterion_02_greedy_half_bound():
    suite = knapsack_suite(2024, ORACLE_COUNT, max_n=ORACLE_MAX_N)
    below = sum(2 * greedy_01(c).total_value < solve_exact(c).total_value for c in suite)
    fn = KnapsackInstance.from_pairs([(1, 1), (9, 10)], 10)
    off, on = greedy_01(fn, apply_step3=False).total_value, greedy_01(fn, apply_step3=True).total_value
    report(2, below == 0 and (off, on) == (1, 9),
           f"{below} of {len(suite)} below half the optimum; decoy instance gives {off} without step 3 and {on} with it")


def test_criterion_03_monotonicity():
    suite = profile_suite(303, MONO_COUNT, max_n=MONO_MAX_N)
    good = verify_monotonicity(allocate_greedy, suite)
    bad = verify_monotonicity(allocate_lowest_density_first, suite)
    report(3, good.monotone and not bad.monotone and bad.counterexample is not None,
           f"greedy monotone on {len(suite)} profiles ({good.checks} checks): {good.monotone}; "
           f"negative control witness found: {not bad.monotone}")


def test_criterion_04_truthfulness():
    suite = profile_suite(404, TRUTH_COUNT, max_n=TRUTH_MAX_N, max_value=TRUTH_MAX_VALUE)

    def witnesses(rule):
        return sum(not verify_truthfulness(rule, p).truthful for p in suite)

    counts = {r: witnesses(r) for r in (Rule.CRITICAL, Rule.VCG_EXACT, Rule.DP, Rule.GSP, Rule.VCG_GREEDY)}
    ok = (
        counts[Rule.CRITICAL] == 0
        and counts[Rule.VCG_EXACT] == 0
        and counts[Rule.DP] >= 1
        and counts[Rule.GSP] >= 1
        and counts[Rule.VCG_GREEDY] >= 1
    )
    detail = ", ".join(f"{r.value}={c}" for r, c in counts.items())
    report(4, ok, f"profiles with a profitable deviation out of {len(suite)}: {detail}")


def test_criterion_05_revenue_ladder():
    suite = unit_profile_suite(505, LADDER_COUNT)
    ladder_breaks = up_mismatch = compared = 0
    for prof in suite:
        dp, gsp, up = (run_auction(prof, r) for r in (Rule.DP, Rule.GSP, Rule.UP))
        ladder_breaks += not (dp.revenue >= gsp.revenue >= up.revenue)
        inst = KnapsackInstance.from_pairs([(b.amount, b.size) for b in prof.bids], prof.capacity)
        if greedy_01(inst).single_item_branch:
            continue
        compared += 1
        up_mismatch += up.payments != critical_payments(prof).payments
    report(5, ladder_breaks == 0 and up_mismatch == 0,
           f"{ladder_breaks} ladder breaks over {len(suite)} equal-size profiles; "
           f"UP differs from critical on {up_mismatch} of {compared}")


def test_criterion_06_tournament_orderings():
    t0 = time.perf_counter()
    rep = tournament(scenario=AuctionScenario(), seeds=range(TOURNAMENT_SEEDS))
    dt = time.perf_counter() - t0
    ok = rep.both_fraction >= TOURNAMENT_SHARE and dt < TOURNAMENT_SECONDS
    report(6, ok,
           f"{TOURNAMENT_SEEDS} seeds: revenue order {rep.revenue_fraction:.2f}, efficiency order "
           f"{rep.efficiency_fraction:.2f}, both {rep.both_fraction:.2f} (need {TOURNAMENT_SHARE:.2f}) in {dt:.0f}s")


def test_criterion_07_conservation():
    t0 = time.perf_counter()
    pbs = run_epochs(EraConfig(Era.PBS_ERA), PBS_EPOCHS, 7)
    dt = time.perf_counter() - t0
    other = sum(run_epochs(EraConfig(e), 1, 7).violations for e in Era if e is not Era.PBS_ERA)
    ok = len(pbs.rows) == 32 * PBS_EPOCHS and pbs.violations == 0 and other == 0 and dt < PBS_SECONDS
    report(7, ok,
           f"PBS {len(pbs.rows)} blocks with {pbs.violations} violations in {dt:.1f}s; "
           f"{other} violations in one epoch of each other era")


def test_criterion_08_base_fee_controller():
    s = BaseFeeState(1000)
    fixed = update_base_fee(s, s.target_gas).base_fee
    up = update_base_fee(s, s.max_gas).base_fee
    down = update_base_fee(s, 0).base_fee
    n_bar = find_contraction_threshold(10, lambda n: 2 * n / 1000)
    ok = (fixed, up, down, n_bar) == (1000, 1125, 875, 5001)
    report(8, ok, f"target keeps {fixed}, full block gives {up}, empty block gives {down}, threshold {n_bar}")


def test_criterion_09_pga_rent_extraction():
    short = 0
    values = sorted(set(range(0, PGA_MAX_VALUE + 1, PGA_STRIDE)) | {1, 2, PGA_MAX_VALUE})
    for v in values:
        for n in (2, 3):
            short += run_pga(v, n, 1, 0).miner_revenue < v - 2
    loser_free = 0
    checked = 0
    for v in range(10, 500, 7):
        for gas in (1, 3, 10):
            r = run_pga(v, 2, 5, gas)
            if r.winner is None:
                continue
            loser = 1 - r.winner
            if r.sunk[loser] == 0:
                continue
            checked += 1
            loser_free += r.payoffs[loser] >= 0
    ok = short == 0 and loser_free == 0 and checked > 0
    report(9, ok,
           f"{short} of {2 * len(values)} auctions left more than 2 to searchers; "
           f"losers escaped gas costs in {loser_free} of {checked} contests")


def test_criterion_10_mev_classification():
    broken = diverting = creating = 0
    params = MempoolParams(tx_count=120)
    for era in (Era.PGA_ERA, Era.RELAY_ERA, Era.EIP1559_ERA, Era.PBS_ERA):
        cfg = EraConfig(era)
        for seed in (1, 2):
            state = cfg.initial_state()
            for _ in range(16):
                users = generate_mempool(seed, params, state.slot)
                block, ledger, state = run_block(cfg, users, state, seed)
                ext = apply_extraction(block.txs)
                included = [t for t in block.txs if not t.is_searcher and t.tx_id in ext.realized]
                loss = sum(t.true_value - ext.realized[t.tx_id] for t in included)
                for ev in ext.events:
                    if ev.classification is MevClass.CREATING:
                        creating += 1
                        src = next(t for t in included if t.tx_id == ev.source_tx)
                        broken += ext.realized[src.tx_id] != src.true_value
                    else:
                        diverting += 1
                broken += loss != ext.diverted or ledger.diverted != ext.diverted
    report(10, broken == 0 and diverting > 0 and creating > 0,
           f"{diverting} diverting and {creating} creating events, {broken} accounting mismatches")


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "scenario.ini"
    cfg.write_text("[era]\neras = PGA, RELAY, PBS\nepochs = 1\n[mempool]\ntx_count = 80\n")
    digests = []
    for i, hashseed in enumerate(("0", "12345")):
        out = tmp_path / f"run{i}"
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        proc = subprocess.run(
            [sys.executable, "-m", "blocklab.cli", "--seed", "11", "--out", str(out), "simulate", str(cfg)],
            env=env, capture_output=True,
        )
        assert proc.returncode == 0, proc.stderr
        digests.append(tuple(hashlib.sha256((out / f).read_bytes()).hexdigest() for f in ("report.csv", "compare.csv")))
    report(11, digests[0] == digests[1], f"two runs in fresh processes give identical CSV: {digests[0] == digests[1]}")


if __name__ == "__main__":
    import pytest

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
