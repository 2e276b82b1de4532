from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from flashgov.attacks import (
    AttackKind,
    AttackScenario,
    Unreachable,
    min_flip_capital,
    run_attack,
    run_direct_flash_loan,
    run_sustained_manipulation,
)
from flashgov.governance import Ballot, Decision, Direction, ProposalState
from flashgov.mechanisms import (
    CurrentBalance,
    HoldingPeriod,
    SingleSnapshot,
    WeightedSnapshot,
    WeightVector,
)

from helpers import DECAY_W, beanstalk_setup, cream_setup, scan_min_flip

W = WeightVector.parse(DECAY_W)
UNIFORM = WeightVector.parse("0.2 0.2 0.2 0.2 0.2")
DIRECT, SUSTAINED = AttackKind.DIRECT, AttackKind.SUSTAINED


def direct(prop, ballots, budget=4000):
    return AttackScenario(DIRECT, "attacker", budget, prop, ballots)


def sustained(prop, ballots, budget, span=1, rate=0):
    return AttackScenario(SUSTAINED, "attacker", budget, prop, ballots, 0, span, rate)


def test_direct_attack_beats_current_balance():
    led, prop, ballots = beanstalk_setup()
    out = run_direct_flash_loan(direct(prop, ballots), CurrentBalance(), led)
    assert out.succeeded and out.attacker_power == 4000
    assert out.decision is Decision.APPROVE
    assert out.proposal.state is ProposalState.APPROVED
    # the loan was repaid, so the block stands and the attacker ends with nothing
    assert out.ledger.balance("attacker") == 0
    assert out.ledger.head == prop.vote_end
    # the caller's objects are untouched
    assert led.head == 10 and prop.state is ProposalState.PENDING


@pytest.mark.parametrize("spec", [WeightedSnapshot(W), SingleSnapshot(), HoldingPeriod(5)])
def test_direct_attack_fails_against_history(spec):
    led, prop, ballots = beanstalk_setup()
    out = run_direct_flash_loan(direct(prop, ballots), spec, led)
    assert not out.succeeded and out.attacker_power == 0
    assert out.decision is Decision.DISAPPROVE


def test_direct_attack_huge_budget_still_fails_weighted():
    led, prop, ballots = beanstalk_setup(vote_end=20)
    out = run_attack(direct(prop, ballots, 10**18), WeightedSnapshot(W), led)
    assert out.attacker_power == 0 and not out.succeeded


def test_sustained_span_one_sees_newest_weight():
    led, prop, ballots = cream_setup()
    out = run_sustained_manipulation(sustained(prop, ballots, 2000, 1, "0.001"), WeightedSnapshot(W), led)
    assert out.attacker_power == 200  # 0.1 * 2000
    assert out.carry_cost == 2 and out.blocks_sustained == 1
    # honest side: 1.2 * 250 = 300 > 200
    assert not out.succeeded
    assert out.ledger.balance("market") == 20000


def test_sustained_full_span():
    led, prop, ballots = cream_setup()
    one = run_attack(sustained(prop, ballots, 2000, 1, "0.001"), WeightedSnapshot(W), led)
    five = run_attack(sustained(prop, ballots, 2000, 5, "0.001"), WeightedSnapshot(W), led)
    assert five.attacker_power == Fraction(12, 10) * 2000
    assert five.carry_cost == 5 * one.carry_cost
    assert five.succeeded


def test_uniform_weights_cost_more_at_short_span():
    led, prop, ballots = cream_setup()
    u = run_attack(sustained(prop, ballots, 2000), WeightedSnapshot(UNIFORM), led)
    p = run_attack(sustained(prop, ballots, 2000), WeightedSnapshot(W), led)
    assert u.attacker_power == 400 and p.attacker_power == 200


def test_sustained_span_too_long_for_history():
    led, prop, ballots = cream_setup(head=10, vote_start=12)
    with pytest.raises(ValueError, match="span"):
        run_attack(sustained(prop, ballots, 10, span=2), WeightedSnapshot(W), led)


def test_scenario_validation():
    led, prop, ballots = cream_setup()
    with pytest.raises(ValueError):
        AttackScenario(SUSTAINED, "attacker", 1, prop, ballots, span=0)
    with pytest.raises(ValueError):
        AttackScenario(SUSTAINED, "h0", 1, prop, ballots)
    with pytest.raises(ValueError):
        AttackScenario(DIRECT, "attacker", -1, prop, ballots)
    with pytest.raises(ValueError, match="own_holdings|tokens"):
        run_attack(AttackScenario(DIRECT, "h0", 1, prop, ballots[1:], own_holdings=0), CurrentBalance(), led)


def test_min_flip_examples():
    led, prop, ballots = cream_setup()
    spec = WeightedSnapshot(W)
    # need 0.1 * B >= 300, then 1.2 * B >= 300
    assert min_flip_capital(spec, prop, ballots, 1, led) == 3000
    assert min_flip_capital(spec, prop, ballots, 5, led) == 250


def test_min_flip_direct():
    led, prop, ballots = beanstalk_setup(vote_end=20)
    assert min_flip_capital(CurrentBalance(), prop, ballots, 0, led, kind=DIRECT) == 2000
    with pytest.raises(Unreachable):
        min_flip_capital(WeightedSnapshot(W), prop, ballots, 0, led, kind=DIRECT)


def test_min_flip_limited_by_market():
    led, prop, ballots = cream_setup(market=2999)
    with pytest.raises(Unreachable):
        min_flip_capital(WeightedSnapshot(W), prop, ballots, 1, led)


def test_min_flip_source_must_not_vote():
    led, prop, ballots = cream_setup()
    with pytest.raises(ValueError):
        min_flip_capital(WeightedSnapshot(W), prop, ballots, 1, led, source="h0")


def test_min_flip_zero_when_honest_side_already_approves():
    led, prop, _ = cream_setup()
    ballots = [Ballot("h0", Direction.APPROVE, 16), Ballot("h1", Direction.DISAPPROVE, 16)]
    assert min_flip_capital(WeightedSnapshot(W), prop, ballots, 1, led) == 0
    out = run_attack(sustained(prop, ballots, 0), WeightedSnapshot(W), led)
    assert out.decision is Decision.APPROVE and not out.succeeded


@pytest.mark.parametrize("span", [1, 2, 3, 5])
@pytest.mark.parametrize("weights", [DECAY_W, "0.2 0.2 0.2 0.2 0.2", "0, 0.1, 0.2, 0.2, 0.5"])
def test_bisection_matches_scan(span, weights):
    led, prop, ballots = cream_setup(honest=(15, 10), market=500)
    spec = WeightedSnapshot(WeightVector.parse(weights))
    expected = scan_min_flip(spec, prop, ballots, span, led, limit=500)
    if expected is None:
        with pytest.raises(Unreachable):
            min_flip_capital(spec, prop, ballots, span, led)
    else:
        assert min_flip_capital(spec, prop, ballots, span, led) == expected


# -- properties -------------------------------------------------------------

history_specs = st.sampled_from([WeightedSnapshot(W), WeightedSnapshot(UNIFORM), SingleSnapshot(), HoldingPeriod(3)])


@settings(max_examples=60, deadline=None)
@given(history_specs, st.integers(0, 10**15), st.lists(st.integers(0, 500), min_size=1, max_size=4))
def test_direct_flash_loan_never_wins_against_history(spec, budget, honest):
    led, prop, ballots = cream_setup(honest=tuple(honest), market=0, head=10, vote_start=12, vote_end=14)
    out = run_attack(direct(prop, ballots, budget), spec, led)
    assert out.attacker_power == 0
    assert not out.succeeded


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 10**6), min_size=5, max_size=5),
       st.lists(st.integers(1, 200), min_size=1, max_size=3))
def test_min_flip_non_increasing_in_span(micro, honest):
    w = WeightVector(tuple(Fraction(m, 10**6) for m in micro))
    led, prop, ballots = cream_setup(honest=tuple(honest), market=10**7)

    def cost(s):
        try:
            return min_flip_capital(WeightedSnapshot(w), prop, ballots, s, led)
        except Unreachable:
            return float("inf")

    costs = [cost(s) for s in range(1, 6)]
    assert costs == sorted(costs, reverse=True)
