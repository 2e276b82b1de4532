"""Proposal lifecycle, ballots, tallying and the approval rule.

A proposal moves ``PENDING -> VOTING -> APPROVED | REJECTED`` and an approved
one continues ``APPROVED -> QUEUED -> EXECUTED`` once its timelock has run.
Ballots only record direction; voting power is measured at tally time so
every voter is judged against the same snapshot window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .ledger import Address, Ledger
from .mechanisms import MechanismSpec, power, resolve


class GovernanceError(Exception):
    pass


class InvalidWindow(GovernanceError):
    pass


class DuplicateVote(GovernanceError):
    pass


class OutsideWindow(GovernanceError):
    pass


class WrongState(GovernanceError):
    pass


class TimelockNotElapsed(GovernanceError):
    pass


class Direction(str, enum.Enum):
    APPROVE = "approve"
    DISAPPROVE = "disapprove"


# the decision function returns the same two outcomes a ballot can carry
Decision = Direction


class ProposalState(str, enum.Enum):
    PENDING = "pending"
    VOTING = "voting"
    APPROVED = "approved"
    REJECTED = "rejected"
    QUEUED = "queued"
    EXECUTED = "executed"


@dataclass(frozen=True)
class DecisionRule:
    """Approve iff ``v_a >= p / (1 - p) * v_d``, optionally behind a participation floor."""

    p: Fraction
    min_participation: Fraction | None = None

    def __post_init__(self):
        p = Fraction(str(self.p)) if isinstance(self.p, float) else Fraction(self.p)
        if not 0 < p < 1:
            raise ValueError("p must lie strictly between 0 and 1")
        object.__setattr__(self, "p", p)
        if self.min_participation is not None:
            mp = Fraction(self.min_participation)
            if mp < 0:
                raise ValueError("min_participation must be >= 0")
            object.__setattr__(self, "min_participation", mp)

    @property
    def factor(self) -> Fraction:
        return self.p / (1 - self.p)


@dataclass(frozen=True)
class Ballot:
    voter: Address
    direction: Direction
    cast_at: int


@dataclass
class Proposal:
    id: str
    action_tag: str
    proposer: Address
    vote_start: int
    vote_end: int
    rule: DecisionRule
    timelock_blocks: int = 0
    state: ProposalState = ProposalState.PENDING
    ballots: dict = field(default_factory=dict)
    approval_height: int | None = None


@dataclass(frozen=True)
class Tally:
    v_a: Fraction
    v_d: Fraction
    per_voter: dict
    power_evaluations: int = 0
    snapshot_reads: int = 0


def submit_proposal(
    ledger: Ledger,
    id: str,
    action_tag: str,
    proposer: Address,
    vote_start: int,
    vote_end: int,
    rule: DecisionRule,
    timelock_blocks: int = 0,
) -> Proposal:
    if vote_start > vote_end:
        raise InvalidWindow(f"vote_start {vote_start} is after vote_end {vote_end}")
    if vote_start <= ledger.head:
        raise InvalidWindow(f"voting cannot start at {vote_start}: block {ledger.head} is already sealed")
    if timelock_blocks < 0:
        raise InvalidWindow("timelock_blocks must be >= 0")
    return Proposal(id, action_tag, proposer, vote_start, vote_end, rule, timelock_blocks)


def open_voting(proposal: Proposal, height: int) -> Proposal:
    if proposal.state is ProposalState.PENDING and height >= proposal.vote_start:
        proposal.state = ProposalState.VOTING
    return proposal


def cast_ballot(proposal: Proposal, ballot: Ballot) -> Proposal:
    if proposal.state is not ProposalState.VOTING:
        raise WrongState(f"proposal {proposal.id} is {proposal.state.value}, not voting")
    if not proposal.vote_start <= ballot.cast_at <= proposal.vote_end:
        raise OutsideWindow(
            f"ballot at {ballot.cast_at} outside [{proposal.vote_start}, {proposal.vote_end}]"
        )
    if ballot.voter in proposal.ballots:
        raise DuplicateVote(f"{ballot.voter!r} already voted on {proposal.id}")
    proposal.ballots[ballot.voter] = ballot
    return proposal


def tally(
    proposal: Proposal,
    ballots: Iterable[Ballot] | None,
    spec: MechanismSpec,
    ledger: Ledger,
) -> Tally:
    """Measure every voter once under ``spec`` and sum by direction.

    Voting closes at ``vote_end`` inclusive, so the tally may run inside the
    ``vote_end`` block itself.
    """
    if proposal.state is ProposalState.PENDING:
        raise WrongState(f"proposal {proposal.id} never opened for voting")
    now = ledger.height
    if now < proposal.vote_end:
        raise WrongState(f"voting on {proposal.id} is open until {proposal.vote_end}, now {now}")
    if ballots is None:
        ballots = proposal.ballots.values()
    spec = resolve(spec, ledger)
    reads_before = ledger.snapshot_reads
    per_voter = {}
    v_a = v_d = Fraction(0)
    for b in ballots:
        if b.voter in per_voter:
            raise DuplicateVote(f"{b.voter!r} appears twice in the tally")
        pw = power(spec, ledger, b.voter, now, vote_start=proposal.vote_start)
        per_voter[b.voter] = pw
        if b.direction is Direction.APPROVE:
            v_a += pw
        else:
            v_d += pw
    return Tally(v_a, v_d, per_voter, len(per_voter), ledger.snapshot_reads - reads_before)


def decide(v_a, v_d, rule: DecisionRule) -> Decision:
    """Exact comparison ``v_a * (1 - p) >= p * v_d`` on integer numerators."""
    if rule.min_participation is not None and v_a + v_d < rule.min_participation:
        return Decision.DISAPPROVE
    n, q = rule.p.numerator, rule.p.denominator
    a_num, a_den = v_a.numerator, v_a.denominator
    d_num, d_den = v_d.numerator, v_d.denominator
    if a_num * d_den * (q - n) >= n * d_num * a_den:
        return Decision.APPROVE
    return Decision.DISAPPROVE


def advance_lifecycle(proposal: Proposal, tally: Tally | None, current_height: int) -> Proposal:
    """Take one step along the lifecycle if its conditions hold at ``current_height``."""
    st = proposal.state
    if st is ProposalState.PENDING:
        open_voting(proposal, current_height)
    elif st is ProposalState.VOTING:
        if current_height >= proposal.vote_end:
            if tally is None:
                raise WrongState("closing a vote needs a tally")
            if decide(tally.v_a, tally.v_d, proposal.rule) is Decision.APPROVE:
                proposal.state = ProposalState.APPROVED
                proposal.approval_height = current_height
            else:
                proposal.state = ProposalState.REJECTED
    elif st is ProposalState.APPROVED:
        proposal.state = ProposalState.QUEUED
    elif st is ProposalState.QUEUED:
        if current_height >= proposal.approval_height + proposal.timelock_blocks:
            proposal.state = ProposalState.EXECUTED
    return proposal


def execute(proposal: Proposal, current_height: int) -> Proposal:
    if proposal.state is not ProposalState.QUEUED:
        raise WrongState(f"only queued proposals execute; {proposal.id} is {proposal.state.value}")
    ready = proposal.approval_height + proposal.timelock_blocks
    if current_height < ready:
        raise TimelockNotElapsed(f"{proposal.id} executable from {ready}, now {current_height}")
    proposal.state = ProposalState.EXECUTED
    return proposal


def cancel(proposal: Proposal) -> Proposal:
    """Community response during the timelock: a queued proposal ends rejected."""
    if proposal.state is not ProposalState.QUEUED:
        raise WrongState(f"only queued proposals can be cancelled; {proposal.id} is {proposal.state.value}")
    proposal.state = ProposalState.REJECTED
    return proposal
