"""Deterministic simulator of DAO token ledgers, voting-power mechanisms and
flash-loan governance attacks."""

from .ledger import Ledger, Snapshot
from .mechanisms import (
    CurrentBalance,
    HoldingPeriod,
    SingleSnapshot,
    VoteEscrow,
    WeightedSnapshot,
    WeightVector,
    power,
)
from .governance import Ballot, DecisionRule, Direction, Proposal, decide, tally
from .attacks import AttackKind, AttackScenario, min_flip_capital, run_attack

__version__ = "0.1.0"
