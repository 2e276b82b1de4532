"""Independent oracles and fixtures shared by the test modules."""

from fractions import Fraction

from flashgov.attacks import AttackKind, AttackScenario, run_attack
from flashgov.governance import Ballot, DecisionRule, Direction, Decision, submit_proposal
from flashgov.ledger import Ledger, LedgerError

DECAY_W = "0.5, 0.3, 0.2, 0.1, 0.1"
LIQUIDITY_W = "0, 0.1, 0.2, 0.2, 0.5"


def scan_min_flip(spec, proposal, ballots, span, ledger, *, kind=AttackKind.SUSTAINED,
                  attacker="attacker", source="market", limit):
    """Exhaustive linear scan: first budget in 0..limit whose replay approves, else None."""
    own = ledger.balance(attacker)
    for budget in range(limit + 1):
        sc = AttackScenario(kind, attacker, budget, proposal, ballots, own, span, source=source)
        if run_attack(sc, spec, ledger).decision is Decision.APPROVE:
            return budget
    return None


def naive_apply(genesis, actions):
    """Apply (kind, actor, amount, other) actions to plain dicts, skipping any that fail.

    Mirrors what a chain does with failed transactions. No flash-loan logic:
    callers hand it sequences that contain no borrows.
    """
    bal = dict(genesis)
    for kind, actor, amt, other in actions:
        assert kind == "transfer"
        if bal.get(actor, 0) >= amt:
            bal[actor] = bal.get(actor, 0) - amt
            bal[other] = bal.get(other, 0) + amt
    return {d: v for d, v in bal.items() if v}


def apply_actions(ledger, actions):
    """Run actions against the pending block; returns the ones that executed."""
    done = []
    for act in actions:
        kind, actor, amt, other = act
        try:
            if kind == "transfer":
                ledger.transfer(actor, other, amt)
            elif kind == "borrow":
                ledger.flash_borrow(actor, amt)
            elif kind == "repay":
                ledger.flash_repay(actor, amt)
        except LedgerError:
            continue
        done.append(act)
    return done


def cream_setup(honest=(150, 100), market=20_000, head=10, vote_start=16, vote_end=20, p=Fraction(1, 2)):
    """Constant honest holders who all oppose; returns (ledger, proposal, ballots)."""
    genesis = {f"h{i}": b for i, b in enumerate(honest)}
    genesis["market"] = market
    led = Ledger(genesis)
    led.advance(head)
    prop = submit_proposal(led, "drain", "transfer_treasury", "attacker", vote_start, vote_end, DecisionRule(p))
    ballots = [Ballot(f"h{i}", Direction.DISAPPROVE, vote_start) for i in range(len(honest))]
    return led, prop, ballots


SCENARIO_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "scenarios"


def beanstalk_setup(holders=5, each=200, vote_start=11, vote_end=7210, p=Fraction(2, 3)):
    """Honest holders who all oppose a proposal with a long voting window."""
    led = Ledger({f"h{i}": each for i in range(holders)})
    led.advance(vote_start - 1)
    prop = submit_proposal(led, "BIP-18", "transfer_treasury", "attacker", vote_start, vote_end, DecisionRule(p))
    ballots = [Ballot(f"h{i}", Direction.DISAPPROVE, vote_start) for i in range(holders)]
    return led, prop, ballots
