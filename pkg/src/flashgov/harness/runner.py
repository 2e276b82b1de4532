from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import partial

from ..attacks import AttackKind, AttackScenario, Unreachable, min_flip_capital, run_attack
from ..governance import GovernanceError, advance_lifecycle, cast_ballot, open_voting, submit_proposal, tally
from ..ledger import LedgerError
from ..mechanisms import MechanismSpec, WeightedSnapshot, WeightVector, describe
from .scenario import METRICS, ScenarioConfig, build_ledger, honest_ballots


class ScenarioRunError(Exception):
    def __init__(self, scenario_id: str, cause: Exception):
        self.scenario_id = scenario_id
        self.cause = cause
        super().__init__(f"scenario {scenario_id}: {type(cause).__name__}: {cause}")

    def __reduce__(self):
        return type(self), (self.scenario_id, self.cause)


@dataclass(frozen=True)
class ReportRow:
    scenario_id: str
    mechanism: str
    weights: str
    span: int
    succeeded: bool | None
    min_flip_capital: int | str | None
    carry_cost: Fraction | None
    recency_share: Fraction | None
    power_evals: int
    wall_time_ms: float | None


def recency_share(w: WeightVector, s: int) -> Fraction:
    """Share of the weight mass sitting on the ``s`` newest snapshots."""
    if not 1 <= s <= len(w):
        raise ValueError(f"s must lie in [1, {len(w)}]")
    return Fraction(sum(w.micro[-s:]), sum(w.micro))


def sweep_points(config: ScenarioConfig) -> list[tuple[WeightVector | None, int]]:
    """(weights, span) pairs in row order; ``None`` weights keep the configured mechanism."""
    base_span = config.attack.span if config.attack is not None else 0
    if config.attack is not None and config.attack.kind is AttackKind.DIRECT:
        base_span = 0
    if config.sweep is None:
        return [(None, base_span)]
    weights = config.sweep.all_weights() or [None]
    spans = config.sweep.spans or [base_span]
    return [(w, s) for w in weights for s in spans]


def run_point(config: ScenarioConfig, point: tuple[WeightVector | None, int]) -> ReportRow:
    weights, span = point
    t0 = time.perf_counter()
    spec: MechanismSpec = config.mechanism if weights is None else WeightedSnapshot(weights)
    outputs = config.sweep.outputs if config.sweep is not None else METRICS
    ledger = build_ledger(config)
    pc = config.proposal
    proposal = submit_proposal(
        ledger, pc.id, pc.action_tag, pc.proposer, pc.vote_start, pc.vote_end, pc.rule, pc.timelock_blocks
    )
    ballots = honest_ballots(config)

    succeeded = min_flip = carry = None
    a = config.attack
    if a is None:
        ledger.advance(max(0, pc.vote_end - ledger.head))
        open_voting(proposal, pc.vote_start)
        for b in ballots:
            cast_ballot(proposal, b)
        t = tally(proposal, None, spec, ledger)
        advance_lifecycle(proposal, t, ledger.height)
    else:
        sc = AttackScenario(
            a.kind, a.attacker, a.budget, proposal, ballots, a.own_holdings,
            max(span, 1), a.carry_cost_rate, a.source,
        )
        outcome = run_attack(sc, spec, ledger)
        t = outcome.tally
        succeeded = outcome.succeeded
        carry = outcome.carry_cost
        if "min_flip_capital" in outputs:
            try:
                min_flip = min_flip_capital(
                    spec, proposal, ballots, max(span, 1), ledger,
                    attacker=a.attacker, kind=a.kind, source=a.source,
                )
            except Unreachable:
                min_flip = "unreachable"

    share = None
    if isinstance(spec, WeightedSnapshot):
        share = recency_share(spec.weights, config.recency_newest)
    elapsed = (time.perf_counter() - t0) * 1000
    return ReportRow(
        scenario_id=config.id,
        mechanism=describe(spec),
        weights=str(spec.weights) if isinstance(spec, WeightedSnapshot) else "",
        span=span,
        succeeded=succeeded if "succeeded" in outputs else None,
        min_flip_capital=min_flip,
        carry_cost=carry if "carry_cost" in outputs else None,
        recency_share=share if "recency_share" in outputs else None,
        power_evals=t.power_evaluations if "power_evals" in outputs else 0,
        wall_time_ms=elapsed,
    )


def _guarded(config: ScenarioConfig, point) -> ReportRow:
    try:
        return run_point(config, point)
    except (LedgerError, GovernanceError, ValueError, Unreachable) as e:
        raise ScenarioRunError(config.id, e) from e


def run(config: ScenarioConfig, workers: int = 1) -> list[ReportRow]:
    """One row per sweep point, in sweep order regardless of ``workers``."""
    points = sweep_points(config)
    if workers <= 1 or len(points) == 1:
        return [_guarded(config, p) for p in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(partial(_guarded, config), points))

