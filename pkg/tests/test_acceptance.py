"""Acceptance suite: one test per criterion, run at its stated tolerance.

``conftest.py`` prints a PASS/FAIL line per criterion at the end of the run.
"""

import dataclasses
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

from flashgov.attacks import AttackKind, AttackScenario, Unreachable, min_flip_capital, run_attack
from flashgov.governance import (
    Ballot,
    Decision,
    DecisionRule,
    Direction,
    cast_ballot,
    decide,
    open_voting,
    submit_proposal,
    tally,
)
from flashgov.harness import load_scenario, run
from flashgov.ledger import Ledger, LockPosition
from flashgov.mechanisms import (
    CurrentBalance,
    HoldingPeriod,
    SingleSnapshot,
    WeightedSnapshot,
    WeightVector,
    power,
    toward_oldest,
    vote_escrow_power,
)

from helpers import (
    LIQUIDITY_W,
    DECAY_W,
    SCENARIO_DIR,
    apply_actions,
    cream_setup,
    naive_apply,
    scan_min_flip,
)

CORPUS = sorted(SCENARIO_DIR.glob("*.toml"))
TWO_THIRDS = DecisionRule(Fraction(2, 3))


def test_c01_beanstalk_replay():
    config = load_scenario(SCENARIO_DIR / "beanstalk_current_balance.toml")
    assert config.attack.own_holdings == 0
    assert config.proposal.p == Fraction(2, 3)
    honest = sum(config.genesis.values())
    # the loan carries 80% of current-balance power
    assert Fraction(config.attack.budget, config.attack.budget + honest) == Fraction(4, 5)

    vectors = [WeightVector.parse(s) for s in (DECAY_W, LIQUIDITY_W, "0.2 0.2 0.2 0.2 0.2", "0 0 0 0 1", "1")]
    vectors += [toward_oldest(5, Fraction(k, 10)) for k in range(10)]
    defended = [WeightedSnapshot(w) for w in vectors]
    defended += [SingleSnapshot()] + [HoldingPeriod(h) for h in (1, 5, 100, 7200)]

    t0 = time.perf_counter()
    results = {}
    for spec in [CurrentBalance()] + defended:
        (row,) = run(dataclasses.replace(config, mechanism=spec, sweep=None))
        results[spec] = row.succeeded
    elapsed = time.perf_counter() - t0

    assert results.pop(CurrentBalance()) is True
    assert all(ok is False for ok in results.values()), results
    # the corpus files themselves
    for name in ("weighted_snapshot", "single_snapshot", "holding_period"):
        (row,) = run(load_scenario(SCENARIO_DIR / f"beanstalk_{name}.toml"))
        assert row.succeeded is False
    assert elapsed < 1.0, f"{elapsed:.3f}s"


def test_c02_decision_rule_exactness():
    rng = random.Random(2)
    failures = 0
    for _ in range(10**6):
        x = rng.randrange(1, 10**18)
        if decide(2 * x, x, TWO_THIRDS) is not Decision.APPROVE:
            failures += 1
        if decide(2 * x - 1, x, TWO_THIRDS) is not Decision.DISAPPROVE:
            failures += 1
    assert failures == 0


def _rand_fraction(rng, hi=10**9, den=10**6):
    return Fraction(rng.randrange(0, hi), rng.randrange(1, den))


def _scaled_config(config, c):
    mech = config.mechanism
    if isinstance(mech, WeightedSnapshot):
        mech = WeightedSnapshot(mech.weights.scaled(c))
    sweep = config.sweep
    if sweep is not None:
        # families expand lazily, so pin the expanded vectors before scaling
        sweep = dataclasses.replace(
            sweep, weight_vectors=[w.scaled(c) for w in sweep.all_weights()], family=None
        )
    return dataclasses.replace(config, mechanism=mech, sweep=sweep)


def test_c03_scale_invariance():
    rng = random.Random(3)
    for _ in range(10**4):
        v_a, v_d = _rand_fraction(rng), _rand_fraction(rng)
        p = Fraction(rng.randrange(1, 1000), 1000)
        c = _rand_fraction(rng) + Fraction(1, 10**9)
        rule = DecisionRule(p)
        assert decide(c * v_a, c * v_d, rule) is decide(v_a, v_d, rule)

    checked = 0
    for path in CORPUS:
        config = load_scenario(path)
        base = [(r.succeeded, r.min_flip_capital) for r in run(config)]
        for c in (2, 3, 7):
            scaled = [(r.succeeded, r.min_flip_capital) for r in run(_scaled_config(config, c))]
            assert scaled == base, (path.stem, c)
            checked += len(base)
    assert checked > 0


def test_c04_newest_snapshot_weight():
    w = WeightVector.parse(DECAY_W)
    spec = WeightedSnapshot(w)
    rng = random.Random(4)

    # only the newest snapshot is filled: power is exactly a tenth of the budget
    for _ in range(20):
        honest = tuple(rng.randrange(1, 2000) for _ in range(rng.randrange(1, 4)))
        p = Fraction(rng.randrange(1, 10), 10)
        led, prop, ballots = cream_setup(honest=honest, market=10**6, p=p)
        budget = rng.randrange(0, 10**6)
        out = run_attack(AttackScenario(AttackKind.SUSTAINED, "attacker", budget, prop, ballots, 0, 1), spec, led)
        assert out.attacker_power == Fraction(budget, 10)
        requirement = p / (1 - p) * w.total() * sum(honest)
        assert min_flip_capital(spec, prop, ballots, 1, led) == math.ceil(requirement / Fraction(1, 10))

    # bisection against the linear scan on small economies
    mismatches = 0
    instances = 0
    for _ in range(30):
        honest = tuple(rng.randrange(0, 400) for _ in range(rng.randrange(1, 4)))
        market = rng.randrange(0, 10**4 - sum(honest) + 1)
        span = rng.randrange(1, 6)
        weights = rng.choice([w, WeightVector.parse(LIQUIDITY_W),
                              WeightVector(tuple(Fraction(rng.randrange(0, 10), 10) for _ in range(4)) + (Fraction(1, 10),))])
        p = Fraction(rng.randrange(1, 10), 10)
        led, prop, ballots = cream_setup(honest=honest, market=market, p=p)
        assert led.total_supply <= 10**4
        spec_i = WeightedSnapshot(weights)
        expected = scan_min_flip(spec_i, prop, ballots, span, led, limit=market)
        try:
            got = min_flip_capital(spec_i, prop, ballots, span, led)
        except Unreachable:
            got = None
        mismatches += got != expected
        instances += 1
    assert instances == 30 and mismatches == 0


def test_c05_cost_monotonicity():
    config = load_scenario(SCENARIO_DIR / "liquidity_sweep.toml")
    family = config.sweep.family.expand()
    assert len(family) == 20
    oldest = [x[0] for x in family]
    assert oldest == sorted(oldest)

    led = Ledger(config.genesis)
    led.advance(10)
    pc = config.proposal
    prop = submit_proposal(led, pc.id, pc.action_tag, pc.proposer, pc.vote_start, pc.vote_end, pc.rule)
    ballots = list(config.ballots)
    rate = config.attack.carry_cost_rate
    costs = [min_flip_capital(WeightedSnapshot(w), prop, ballots, 1, led) * 1 * rate for w in family]
    violations = sum(b < a for a, b in zip(costs, costs[1:]))
    assert violations == 0, costs


def test_c06_curve_decay():
    rng = random.Random(6)
    for _ in range(10**3):
        max_lock = rng.randrange(1, 10**6)
        created = rng.randrange(0, 10**6)
        pos = LockPosition("d", rng.randrange(0, 10**12), created, created + rng.randrange(1, max_lock + 1))
        h = sorted(rng.randrange(pos.created, pos.unlock_height + 1) for _ in range(3))
        v = [vote_escrow_power(pos, x, max_lock) for x in h]
        assert (h[1] - h[0]) * (v[2] - v[0]) == (h[2] - h[0]) * (v[1] - v[0])
        assert vote_escrow_power(pos, pos.unlock_height, max_lock) == 0


def test_c07_holding_boundary():
    for H in (1, 5, 100):
        led = Ledger({"pool": 10**6, "d": 7})
        led.advance(3)
        led.open_block()
        led.transfer("pool", "d", 500)
        b = led.seal_block().height
        led.advance(H + 2)
        spec = HoldingPeriod(H)
        assert power(spec, led, "d", b + H) == 507
        assert power(spec, led, "d", b + H - 1) == 7


def _tally_reads(window, voters):
    led = Ledger({f"v{i}": 1 + i for i in range(voters)})
    led.advance(window)
    prop = submit_proposal(led, "P", "t", "v0", window + 1, window + 1, DecisionRule(Fraction(1, 2)))
    open_voting(prop, window + 1)
    for i in range(voters):
        cast_ballot(prop, Ballot(f"v{i}", Direction.APPROVE if i % 2 else Direction.DISAPPROVE, window + 1))
    led.advance(1)
    w = WeightVector(tuple(Fraction(1, window) for _ in range(window)))
    return tally(prop, None, WeightedSnapshot(w), led).snapshot_reads


def test_c08_snapshot_reads():
    for window, voters in ((5, 10), (50, 100)):
        assert _tally_reads(window, voters) == window * voters
    t0 = time.perf_counter()
    assert _tally_reads(500, 1000) == 500 * 1000
    assert time.perf_counter() - t0 < 5.0


def _random_block(rng, addrs, attacker):
    honest = [("transfer", rng.choice(addrs), rng.randrange(0, 150), rng.choice(addrs))
              for _ in range(rng.randrange(0, 10))]
    loan = rng.randrange(1, 10**6)
    attack = [("borrow", attacker, loan, None)]
    attack += [("transfer", attacker, rng.randrange(0, loan + 1), rng.choice(addrs))
               for _ in range(rng.randrange(0, 4))]
    if rng.random() < 0.5:
        attack.append(("repay", attacker, rng.randrange(0, loan), None))
    slots = sorted(rng.randrange(0, len(honest) + 1) for _ in attack)
    block = list(honest)
    for k, (slot, a) in enumerate(zip(slots, attack)):
        block.insert(slot + k, a)
    return block


def test_c09_ledger_atomicity():
    rng = random.Random(9)
    addrs = ["a", "b", "c", "d"]
    genesis = {"a": 100, "b": 80, "c": 0, "d": 20}
    for _ in range(10**3):
        led = Ledger(genesis)
        expected = dict(genesis)
        for _ in range(rng.randrange(1, 4)):
            led.open_block()
            executed = apply_actions(led, _random_block(rng, addrs, "x"))
            snap = led.seal_block()
            expected = naive_apply(expected, [a for a in executed if a[1] != "x"])
            assert dict(snap.balances) == expected
            assert sum(snap.balances.values()) == snap.total_supply == led.total_supply


def test_c10_corpus_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        cmd = [sys.executable, "-m", "flashgov", "run", *map(str, CORPUS), "--no-timing", "--out", str(out)]
        r = subprocess.run(cmd, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].count(b"\n") > len(CORPUS)
