"""Attack cost as weight mass moves toward the oldest snapshot.

For each mix parameter t the weight vector is uniform*(1-t) plus t on the
oldest snapshot. Prints the minimal flipping budget and its carry cost for
every holding span, so the trade-off against recency share is visible.

    python3 scripts/cost_curve.py --length 5 --steps 20 --rate 0.001
"""

import argparse
import csv
import sys
from fractions import Fraction

from flashgov.attacks import Unreachable, min_flip_capital
from flashgov.governance import Ballot, DecisionRule, Direction, submit_proposal
from flashgov.harness.report import fmt_fraction
from flashgov.harness.runner import recency_share
from flashgov.ledger import Ledger
from flashgov.mechanisms import WeightedSnapshot, toward_oldest


def setup(length, honest, market):
    led = Ledger({"alice": honest[0], "bob": honest[1], "market": market})
    head = 2 * length
    led.advance(head)
    start = head + length + 1
    prop = submit_proposal(led, "drain", "transfer_treasury", "attacker", start, start + 4, DecisionRule("1/2"))
    ballots = [Ballot(d, Direction.DISAPPROVE, start) for d in ("alice", "bob")]
    return led, prop, ballots


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--length", type=int, default=5)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--rate", type=Fraction, default=Fraction("0.001"))
    ap.add_argument("--market", type=int, default=10**6)
    args = ap.parse_args()

    led, prop, ballots = setup(args.length, (150, 100), args.market)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["t", "span", "recency_share", "min_flip_capital", "carry_cost"])
    for k in range(args.steps):
        t = Fraction(k, args.steps)
        w = toward_oldest(args.length, t)
        for span in range(1, args.length + 1):
            try:
                budget = min_flip_capital(WeightedSnapshot(w), prop, ballots, span, led)
                carry = fmt_fraction(budget * span * args.rate)
            except Unreachable:
                budget, carry = "unreachable", ""
            out.writerow([fmt_fraction(t), span, fmt_fraction(recency_share(w, 1)), budget, carry])


if __name__ == "__main__":
    main()
