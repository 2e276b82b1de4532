"""Flash-loan governance attack replays.

Two attack shapes are modelled:

``DIRECT``
    Borrow inside the block that closes the vote, vote, let the proposal be
    committed in that same block, repay, seal. This is the single-transaction
    pattern used against Beanstalk.

``SUSTAINED``
    Buy ``budget`` tokens from a liquidity source ``span`` blocks before voting
    opens and hold them through the vote, so the inflated balance appears in
    the newest ``span`` sealed snapshots. Holding costs
    ``budget * span * carry_cost_rate``.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from fractions import Fraction

from .governance import (
    Ballot,
    Decision,
    Direction,
    Proposal,
    Tally,
    advance_lifecycle,
    cast_ballot,
    decide,
    open_voting,
    tally,
)
from .ledger import Address, Ledger, check_amount
from .mechanisms import MechanismSpec

# flash-loan liquidity ceiling used when searching for a minimal direct budget
MAX_FLASH_LIQUIDITY = 10**18


class Unreachable(Exception):
    """No budget within the available liquidity flips the vote."""


class AttackKind(str, enum.Enum):
    DIRECT = "direct"
    SUSTAINED = "sustained"


@dataclass
class AttackScenario:
    kind: AttackKind
    attacker: Address
    budget: int
    target_proposal: Proposal
    honest_ballots: list = field(default_factory=list)
    own_holdings: int = 0
    span: int = 1
    carry_cost_rate: Fraction = Fraction(0)
    source: Address = "market"

    def __post_init__(self):
        self.kind = AttackKind(self.kind)
        check_amount(self.budget)
        check_amount(self.own_holdings)
        self.carry_cost_rate = Fraction(self.carry_cost_rate)
        if self.carry_cost_rate < 0:
            raise ValueError("carry_cost_rate must be >= 0")
        if self.kind is AttackKind.SUSTAINED and self.span < 1:
            raise ValueError("span must be at least one block")
        if any(b.voter == self.attacker for b in self.honest_ballots):
            raise ValueError("the attacker cannot also cast an honest ballot")


@dataclass
class AttackOutcome:
    succeeded: bool
    attacker_power: Fraction
    decision: Decision
    capital_used: int
    carry_cost: Fraction
    blocks_sustained: int
    tally: Tally | None = field(default=None, repr=False)
    proposal: Proposal | None = field(default=None, repr=False)
    ledger: Ledger | None = field(default=None, repr=False)


def _prepare(scenario: AttackScenario, ledger: Ledger) -> tuple[Ledger, Proposal]:
    if ledger.is_open:
        raise ValueError("attacks start between blocks")
    held = ledger.balance(scenario.attacker)
    if held != scenario.own_holdings:
        raise ValueError(
            f"ledger gives {scenario.attacker!r} {held} tokens, scenario says {scenario.own_holdings}"
        )
    return ledger.copy(), copy.deepcopy(scenario.target_proposal)


def _cast_all(proposal: Proposal, scenario: AttackScenario, attack_height: int) -> None:
    open_voting(proposal, max(attack_height, proposal.vote_start))
    for b in scenario.honest_ballots:
        cast_ballot(proposal, b)
    cast_ballot(proposal, Ballot(scenario.attacker, Direction.APPROVE, attack_height))


def _outcome(scenario, proposal, t, ledger, carry, blocks) -> AttackOutcome:
    decision = decide(t.v_a, t.v_d, proposal.rule)
    attacker_power = t.per_voter[scenario.attacker]
    # the attack succeeded only if the honest electorate alone would have said no
    baseline = decide(t.v_a - attacker_power, t.v_d, proposal.rule)
    succeeded = decision is Decision.APPROVE and baseline is Decision.DISAPPROVE
    return AttackOutcome(
        succeeded, attacker_power, decision, scenario.budget, carry, blocks, t, proposal, ledger
    )


def run_direct_flash_loan(
    scenario: AttackScenario, spec: MechanismSpec, ledger: Ledger
) -> AttackOutcome:
    """Borrow, vote, commit and repay inside the ``vote_end`` block."""
    if scenario.kind is not AttackKind.DIRECT:
        raise ValueError("scenario is not a direct flash-loan attack")
    led, proposal = _prepare(scenario, ledger)
    h = proposal.vote_end
    if led.head >= h:
        raise ValueError(f"voting on {proposal.id} closed at {h}; head is {led.head}")
    led.advance(h - 1 - led.head)
    _cast_all(proposal, scenario, h)

    led.open_block()
    led.flash_borrow(scenario.attacker, scenario.budget)
    # the commit happens mid-transaction, before the loan is repaid
    t = tally(proposal, None, spec, led)
    advance_lifecycle(proposal, t, h)
    led.flash_repay(scenario.attacker, scenario.budget)
    led.seal_block()
    return _outcome(scenario, proposal, t, led, Fraction(0), 0)


def run_sustained_manipulation(
    scenario: AttackScenario, spec: MechanismSpec, ledger: Ledger
) -> AttackOutcome:
    """Hold bought tokens over the newest ``span`` sealed blocks before the vote."""
    if scenario.kind is not AttackKind.SUSTAINED:
        raise ValueError("scenario is not a sustained manipulation")
    led, proposal = _prepare(scenario, ledger)
    start, end = proposal.vote_start, proposal.vote_end
    buy_at = start - scenario.span
    if buy_at <= led.head:
        raise ValueError(
            f"span {scenario.span} needs block {buy_at} before voting, but head is {led.head}"
        )
    led.advance(buy_at - 1 - led.head)
    led.open_block()
    led.transfer(scenario.source, scenario.attacker, scenario.budget)
    led.seal_block()
    led.advance(end - led.head)
    _cast_all(proposal, scenario, start)

    t = tally(proposal, None, spec, led)
    advance_lifecycle(proposal, t, led.height)
    led.open_block()
    led.transfer(scenario.attacker, scenario.source, scenario.budget)
    led.seal_block()
    carry = scenario.budget * scenario.span * scenario.carry_cost_rate
    return _outcome(scenario, proposal, t, led, carry, scenario.span)


def run_attack(scenario: AttackScenario, spec: MechanismSpec, ledger: Ledger) -> AttackOutcome:
    if scenario.kind is AttackKind.DIRECT:
        return run_direct_flash_loan(scenario, spec, ledger)
    return run_sustained_manipulation(scenario, spec, ledger)


def min_flip_capital(
    spec: MechanismSpec,
    proposal: Proposal,
    honest_ballots: list,
    span: int,
    ledger: Ledger,
    *,
    attacker: Address = "attacker",
    kind: AttackKind = AttackKind.SUSTAINED,
    source: Address = "market",
    limit: int | None = None,
) -> int:
    """Smallest budget whose attack turns the decision into Approve.

    Bisects over integers. The search space is capped by ``limit``: the
    source's balance for sustained attacks, ``MAX_FLASH_LIQUIDITY`` for direct
    ones. Raises :class:`Unreachable` if the cap itself does not flip.
    """
    kind = AttackKind(kind)
    if source in {b.voter for b in honest_ballots}:
        # selling out of a voter's balance would make the predicate non-monotone
        raise ValueError("the liquidity source must not vote")
    if limit is None:
        limit = ledger.balance(source) if kind is AttackKind.SUSTAINED else MAX_FLASH_LIQUIDITY
    own = ledger.balance(attacker)

    def flips(budget: int) -> bool:
        sc = AttackScenario(
            kind, attacker, budget, proposal, honest_ballots, own, span, source=source
        )
        return run_attack(sc, spec, ledger).decision is Decision.APPROVE

    if not flips(limit):
        raise Unreachable(f"no budget up to {limit} flips {proposal.id}")
    if flips(0):
        return 0
    lo, hi = 0, limit  # flips(lo) is False, flips(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if flips(mid):
            hi = mid
        else:
            lo = mid
    return hi
