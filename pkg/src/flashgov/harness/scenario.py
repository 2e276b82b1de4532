"""Scenario files: TOML in, validated :class:`ScenarioConfig` out.

Layout (every table except ``proposal`` and ``mechanism`` is optional)::

    id = "beanstalk"
    seed = 7

    [genesis]
    balances = { alice = 300, bob = 250, market = 100000 }

    [[script]]            # ledger actions applied after genesis, in order
    op = "advance"        # open | seal | transfer | borrow | repay | lock | advance
    blocks = 10

    [generator]           # alternative to genesis + script
    holders = 20
    low = 100
    high = 1000
    blocks = 30

    [mechanism]
    kind = "weighted_snapshot"
    weights = "0.5, 0.3, 0.2, 0.1, 0.1"

    [proposal]
    id = "BIP-18"
    vote_start = 11
    vote_end = 20
    p = "2/3"

    [[ballots]]
    voter = "alice"
    direction = "disapprove"
    cast_at = 11

    [attack]
    kind = "sustained"
    budget = 5000
    span = 2
    carry_cost_rate = "0.001"

    [sweep]
    weights = ["0.2 0.2 0.2 0.2 0.2"]
    family = { kind = "toward_oldest", length = 5, params = ["0", "0.5"] }
    spans = [1, 2, 3]

Weights are always written as strings so they stay exact. A comma between
two digits (``"0,1"``) is refused as ambiguous.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import tomli
import tomli_w

from ..attacks import AttackKind
from ..governance import Ballot, DecisionRule, Direction, InvalidWindow, submit_proposal
from ..ledger import Ledger, LedgerError
from ..mechanisms import (
    CurrentBalance,
    HoldingPeriod,
    MechanismSpec,
    SingleSnapshot,
    VoteEscrow,
    WeightedSnapshot,
    WeightSyntaxError,
    WeightVector,
    geometric_tilt,
    toward_oldest,
)

MAX_SEED = 2**64
DEFAULT_MAX_RUNS = 10**5
METRICS = ("succeeded", "min_flip_capital", "carry_cost", "recency_share", "power_evals")
FAMILIES = {"toward_oldest": toward_oldest, "geometric": geometric_tilt}
SCRIPT_OPS = {
    "open": (),
    "seal": (),
    "advance": ("blocks",),
    "transfer": ("from", "to", "amount"),
    "borrow": ("who", "amount"),
    "repay": ("who", "amount"),
    "lock": ("who", "amount", "unlock"),
}


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, msg, field=None, line=None):
        self.field = field
        self.line = line
        where = ""
        if field:
            where += f"{field}: "
        if line:
            where = f"line {line}: " + where
        super().__init__(where + msg)


class ValidationError(ScenarioError):
    pass


@dataclass
class GeneratorConfig:
    holders: int
    low: int
    high: int
    blocks: int = 0
    transfers_per_block: int = 0
    market: int = 0
    vote: str = "disapprove"
    prefix: str = "holder"


@dataclass
class ProposalConfig:
    id: str
    vote_start: int
    vote_end: int
    p: Fraction
    action_tag: str = "transfer_treasury"
    proposer: str = "attacker"
    timelock_blocks: int = 0
    min_participation: Fraction | None = None

    @property
    def rule(self) -> DecisionRule:
        return DecisionRule(self.p, self.min_participation)


@dataclass
class AttackConfig:
    kind: AttackKind
    budget: int
    attacker: str = "attacker"
    own_holdings: int = 0
    span: int = 1
    carry_cost_rate: Fraction = Fraction(0)
    source: str = "market"


@dataclass
class FamilySpec:
    kind: str
    length: int
    params: tuple

    def expand(self) -> list[WeightVector]:
        fn = FAMILIES[self.kind]
        return [fn(self.length, p) for p in self.params]


@dataclass
class SweepSpec:
    weight_vectors: list = field(default_factory=list)
    family: FamilySpec | None = None
    spans: list = field(default_factory=list)
    outputs: tuple = METRICS
    max_runs: int = DEFAULT_MAX_RUNS

    def all_weights(self) -> list[WeightVector]:
        return list(self.weight_vectors) + (self.family.expand() if self.family else [])


@dataclass
class ScenarioConfig:
    id: str
    mechanism: MechanismSpec
    proposal: ProposalConfig
    seed: int = 0
    genesis: dict = field(default_factory=dict)
    total_supply: int | None = None
    script: list = field(default_factory=list)
    generator: GeneratorConfig | None = None
    ballots: list = field(default_factory=list)
    attack: AttackConfig | None = None
    sweep: SweepSpec | None = None
    recency_newest: int = 1


# -- reading ----------------------------------------------------------------


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=|[{{,]\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


class _Reader:
    def __init__(self, text: str | None):
        self.text = text

    def fail(self, name: str, msg: str):
        raise ParseError(msg, name, _line_of(self.text, name.rsplit(".", 1)[-1]))

    def table(self, data, name, required=False):
        v = data.get(name.rsplit(".", 1)[-1])
        if v is None:
            if required:
                self.fail(name, "missing table")
            return None
        if not isinstance(v, dict):
            self.fail(name, "expected a table")
        return v

    def integer(self, data, name, default=..., minimum=None):
        key = name.rsplit(".", 1)[-1]
        if key not in data:
            if default is ...:
                self.fail(name, "missing value")
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(name, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise ValidationError(f"{name} must be >= {minimum}, got {v}")
        return v

    def string(self, data, name, default=...):
        key = name.rsplit(".", 1)[-1]
        if key not in data:
            if default is ...:
                self.fail(name, "missing value")
            return default
        v = data[key]
        if not isinstance(v, str):
            self.fail(name, f"expected a string, got {v!r}")
        return v

    def rational(self, data, name, default=...):
        key = name.rsplit(".", 1)[-1]
        if key not in data:
            if default is ...:
                self.fail(name, "missing value")
            return default
        v = data[key]
        if isinstance(v, bool):
            self.fail(name, "expected a number")
        if isinstance(v, str) and re.search(r"\d,\d", v):
            self.fail(name, f"ambiguous decimal comma in {v!r}; write a decimal point")
        try:
            return Fraction(v) if isinstance(v, (int, str)) else Fraction(repr(v))
        except (ValueError, TypeError, ZeroDivisionError):
            self.fail(name, f"not a rational number: {v!r}")

    def weights(self, value, name) -> WeightVector:
        try:
            if isinstance(value, str):
                return WeightVector.parse(value)
            if isinstance(value, list) and all(isinstance(x, str) for x in value):
                for x in value:
                    if "," in x:
                        self.fail(name, f"ambiguous comma in weight {x!r}; write 0.1")
                return WeightVector.parse(" ".join(value))
        except WeightSyntaxError as e:
            self.fail(name, str(e))
        except ValueError as e:
            raise ValidationError(f"{name}: {e}") from None
        self.fail(name, "write weights as a string such as \"0.5, 0.3, 0.2\" to keep them exact")


def _mechanism(r: _Reader, m: dict) -> MechanismSpec:
    kind = r.string(m, "mechanism.kind")
    try:
        if kind == "current_balance":
            return CurrentBalance()
        if kind == "single_snapshot":
            return SingleSnapshot(r.integer(m, "mechanism.at", None, minimum=0))
        if kind == "weighted_snapshot":
            if "weights" not in m:
                r.fail("mechanism.weights", "missing value")
            return WeightedSnapshot(r.weights(m["weights"], "mechanism.weights"))
        if kind == "holding_period":
            return HoldingPeriod(r.integer(m, "mechanism.period", minimum=1))
        if kind == "vote_escrow":
            return VoteEscrow(r.integer(m, "mechanism.max_lock", minimum=1))
    except ValueError as e:
        raise ValidationError(f"mechanism: {e}") from None
    r.fail("mechanism.kind", f"unknown mechanism {kind!r}")


def _script(r: _Reader, items) -> list[dict]:
    if not isinstance(items, list):
        r.fail("script", "expected an array of tables")
    out = []
    for i, step in enumerate(items):
        name = f"script[{i}]"
        if not isinstance(step, dict):
            r.fail(name, "expected a table")
        op = r.string(step, "op")
        if op not in SCRIPT_OPS:
            r.fail(f"{name}.op", f"unknown op {op!r}")
        clean = {"op": op}
        for key in SCRIPT_OPS[op]:
            if key in ("from", "to", "who"):
                clean[key] = r.string(step, key)
            else:
                clean[key] = r.integer(step, key, minimum=0)
        extra = set(step) - set(clean)
        if extra:
            r.fail(name, f"unexpected keys {sorted(extra)}")
        out.append(clean)
    return out


def config_from_dict(data: dict, text: str | None = None) -> ScenarioConfig:
    r = _Reader(text)
    sid = r.string(data, "id")
    seed = r.integer(data, "seed", 0, minimum=0)
    if seed >= MAX_SEED:
        raise ValidationError("seed must fit in 64 bits")

    genesis, total = {}, None
    g = r.table(data, "genesis")
    if g is not None:
        bal = g.get("balances", {})
        if not isinstance(bal, dict):
            r.fail("genesis.balances", "expected a table of address = amount")
        for d in bal:
            genesis[d] = r.integer(bal, d, minimum=0)
        total = r.integer(g, "genesis.total_supply", None, minimum=0)

    script = _script(r, data["script"]) if "script" in data else []

    gen = None
    gt = r.table(data, "generator")
    if gt is not None:
        gen = GeneratorConfig(
            holders=r.integer(gt, "generator.holders", minimum=1),
            low=r.integer(gt, "generator.low", minimum=0),
            high=r.integer(gt, "generator.high", minimum=0),
            blocks=r.integer(gt, "generator.blocks", 0, minimum=0),
            transfers_per_block=r.integer(gt, "generator.transfers_per_block", 0, minimum=0),
            market=r.integer(gt, "generator.market", 0, minimum=0),
            vote=r.string(gt, "generator.vote", "disapprove"),
            prefix=r.string(gt, "generator.prefix", "holder"),
        )

    mechanism = _mechanism(r, r.table(data, "mechanism", required=True))

    pt = r.table(data, "proposal", required=True)
    proposal = ProposalConfig(
        id=r.string(pt, "proposal.id"),
        vote_start=r.integer(pt, "proposal.vote_start", minimum=0),
        vote_end=r.integer(pt, "proposal.vote_end", minimum=0),
        p=r.rational(pt, "proposal.p"),
        action_tag=r.string(pt, "proposal.action_tag", "transfer_treasury"),
        proposer=r.string(pt, "proposal.proposer", "attacker"),
        timelock_blocks=r.integer(pt, "proposal.timelock_blocks", 0, minimum=0),
        min_participation=r.rational(pt, "proposal.min_participation", None),
    )

    ballots = []
    for i, b in enumerate(data.get("ballots", [])):
        name = f"ballots[{i}]"
        if not isinstance(b, dict):
            r.fail(name, "expected a table")
        direction = r.string(b, "direction")
        if direction not in ("approve", "disapprove"):
            r.fail(f"{name}.direction", f"expected approve or disapprove, got {direction!r}")
        ballots.append(Ballot(r.string(b, "voter"), Direction(direction), r.integer(b, "cast_at", minimum=0)))

    attack = None
    at = r.table(data, "attack")
    if at is not None:
        kind = r.string(at, "attack.kind")
        if kind not in ("direct", "sustained"):
            r.fail("attack.kind", f"expected direct or sustained, got {kind!r}")
        attack = AttackConfig(
            kind=AttackKind(kind),
            budget=r.integer(at, "attack.budget", minimum=0),
            attacker=r.string(at, "attack.attacker", "attacker"),
            own_holdings=r.integer(at, "attack.own_holdings", 0, minimum=0),
            span=r.integer(at, "attack.span", 1, minimum=1),
            carry_cost_rate=r.rational(at, "attack.carry_cost_rate", Fraction(0)),
            source=r.string(at, "attack.source", "market"),
        )

    sweep = None
    st = r.table(data, "sweep")
    if st is not None:
        ws = st.get("weights", [])
        if not isinstance(ws, list):
            r.fail("sweep.weights", "expected an array of weight strings")
        vectors = [r.weights(w, f"sweep.weights") for w in ws]
        family = None
        if "family" in st:
            ft = st["family"]
            if not isinstance(ft, dict):
                r.fail("sweep.family", "expected a table")
            fk = r.string(ft, "sweep.family.kind")
            if fk not in FAMILIES:
                r.fail("sweep.family.kind", f"unknown family {fk!r}")
            params = ft.get("params", [])
            if not isinstance(params, list) or not params:
                r.fail("sweep.family.params", "expected a non-empty array")
            family = FamilySpec(
                fk,
                r.integer(ft, "sweep.family.length", minimum=1),
                tuple(r.rational({"params": p}, "sweep.family.params") for p in params),
            )
        spans = st.get("spans", [])
        if not isinstance(spans, list):
            r.fail("sweep.spans", "expected an array of integers")
        spans = [r.integer({"spans": s}, "sweep.spans", minimum=1) for s in spans]
        outputs = st.get("outputs", list(METRICS))
        if not isinstance(outputs, list) or any(o not in METRICS for o in outputs):
            r.fail("sweep.outputs", f"metrics must be drawn from {list(METRICS)}")
        sweep = SweepSpec(
            vectors, family, spans, tuple(outputs), r.integer(st, "sweep.max_runs", DEFAULT_MAX_RUNS, minimum=1)
        )

    rt = r.table(data, "report") or {}
    config = ScenarioConfig(
        id=sid,
        mechanism=mechanism,
        proposal=proposal,
        seed=seed,
        genesis=genesis,
        total_supply=total,
        script=script,
        generator=gen,
        ballots=ballots,
        attack=attack,
        sweep=sweep,
        recency_newest=r.integer(rt, "report.recency_newest", 1, minimum=1),
    )
    validate_config(config)
    return config


def loads_scenario(text: str) -> ScenarioConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ParseError(str(e)) from None
    return config_from_dict(data, text)


def load_scenario(path) -> ScenarioConfig:
    return loads_scenario(Path(path).read_text(encoding="utf-8"))


# -- building ---------------------------------------------------------------


def genesis_balances(config: ScenarioConfig) -> dict:
    bal = dict(config.genesis)
    if config.generator is not None:
        g = config.generator
        rng = random.Random(config.seed)
        for i in range(g.holders):
            bal[f"{g.prefix}{i:04d}"] = rng.randint(g.low, g.high)
        if g.market:
            bal["market"] = bal.get("market", 0) + g.market
    if config.attack is not None and config.attack.own_holdings:
        bal.setdefault(config.attack.attacker, config.attack.own_holdings)
    return bal


def holders(config: ScenarioConfig) -> list[str]:
    g = config.generator
    return [] if g is None else [f"{g.prefix}{i:04d}" for i in range(g.holders)]


def build_ledger(config: ScenarioConfig) -> Ledger:
    """Genesis, then generator history (if any), then the explicit script."""
    ledger = Ledger(genesis_balances(config))
    g = config.generator
    if g is not None and g.blocks:
        # separate stream from the genesis draw so adding blocks keeps balances stable
        rng = random.Random(config.seed ^ 0x5DEECE66D)
        hs = holders(config)
        for _ in range(g.blocks):
            ledger.open_block()
            for _ in range(g.transfers_per_block if len(hs) > 1 else 0):
                a, b = rng.sample(hs, 2)
                ledger.transfer(a, b, rng.randint(0, ledger.balance(a)))
            ledger.seal_block()
    for step in config.script:
        op = step["op"]
        if op == "open":
            ledger.open_block()
        elif op == "seal":
            ledger.seal_block()
        elif op == "advance":
            ledger.advance(step["blocks"])
        elif op == "transfer":
            ledger.transfer(step["from"], step["to"], step["amount"])
        elif op == "borrow":
            ledger.flash_borrow(step["who"], step["amount"])
        elif op == "repay":
            ledger.flash_repay(step["who"], step["amount"])
        elif op == "lock":
            ledger.lock(step["who"], step["amount"], step["unlock"])
    if ledger.is_open:
        ledger.seal_block()
    return ledger


def honest_ballots(config: ScenarioConfig) -> list[Ballot]:
    if config.ballots or config.generator is None or config.generator.vote == "none":
        return list(config.ballots)
    d = Direction(config.generator.vote)
    return [Ballot(h, d, config.proposal.vote_start) for h in holders(config)]


def validate_config(config: ScenarioConfig) -> None:
    """Check cross-field invariants; raises :class:`ValidationError`."""
    if config.generator is not None:
        g = config.generator
        if g.low > g.high:
            raise ValidationError("generator.low must not exceed generator.high")
        if g.vote not in ("approve", "disapprove", "none"):
            raise ValidationError("generator.vote must be approve, disapprove or none")
    a = config.attack
    if a is not None and a.attacker in config.genesis and config.genesis[a.attacker] != a.own_holdings:
        raise ValidationError(
            f"genesis gives {a.attacker} {config.genesis[a.attacker]} but attack.own_holdings={a.own_holdings}"
        )
    bal = genesis_balances(config)
    if config.total_supply is not None and config.total_supply != sum(bal.values()):
        raise ValidationError(
            f"genesis balances sum to {sum(bal.values())}, total_supply says {config.total_supply}"
        )
    try:
        config.proposal.rule
    except ValueError as e:
        raise ValidationError(f"proposal: {e}") from None
    try:
        ledger = build_ledger(config)
    except (LedgerError, ValueError, TypeError) as e:
        raise ValidationError(f"script: {e}") from None
    pc = config.proposal
    try:
        submit_proposal(ledger, pc.id, pc.action_tag, pc.proposer, pc.vote_start, pc.vote_end, pc.rule)
    except InvalidWindow as e:
        raise ValidationError(f"proposal: {e}") from None
    seen = set()
    for b in honest_ballots(config):
        if b.voter in seen:
            raise ValidationError(f"duplicate ballot from {b.voter}")
        seen.add(b.voter)
        if not pc.vote_start <= b.cast_at <= pc.vote_end:
            raise ValidationError(f"ballot from {b.voter} at {b.cast_at} is outside the voting window")
    if a is not None:
        if a.attacker in seen:
            raise ValidationError("the attacker cannot also cast an honest ballot")
        if a.carry_cost_rate < 0:
            raise ValidationError("attack.carry_cost_rate must be >= 0")
        spans = config.sweep.spans if config.sweep and config.sweep.spans else [a.span]
        if a.kind is AttackKind.SUSTAINED:
            if a.source in seen:
                raise ValidationError("the liquidity source must not vote")
            if pc.vote_start - max(spans) <= ledger.head:
                raise ValidationError(
                    f"span {max(spans)} needs the attacker to buy before block {ledger.head + 1}"
                )
            if ledger.balance(a.source) < a.budget:
                raise ValidationError(f"source {a.source} holds less than the budget {a.budget}")
        elif config.sweep and config.sweep.spans:
            raise ValidationError("sweeping spans needs a sustained attack")
    if config.sweep is not None:
        sw = config.sweep
        weights = sw.all_weights()
        n = max(1, len(weights)) * max(1, len(sw.spans))
        if not weights and not sw.spans:
            raise ValidationError("sweep needs weights, a family, or spans")
        if n > sw.max_runs:
            raise ValidationError(f"sweep expands to {n} runs, above the cap of {sw.max_runs}")
        for w in weights:
            if len(w) > pc.vote_start:
                raise ValidationError(f"weight window {len(w)} reaches below genesis")
    if isinstance(config.mechanism, WeightedSnapshot) and len(config.mechanism.weights) > pc.vote_start:
        raise ValidationError("weight window reaches below genesis")
    n_newest = config.recency_newest
    for w in _all_vectors(config):
        if n_newest > len(w):
            raise ValidationError(f"report.recency_newest={n_newest} exceeds window {len(w)}")


def _all_vectors(config: ScenarioConfig) -> list[WeightVector]:
    out = []
    if isinstance(config.mechanism, WeightedSnapshot):
        out.append(config.mechanism.weights)
    if config.sweep is not None:
        out.extend(config.sweep.all_weights())
    return out


# -- writing ----------------------------------------------------------------


def config_to_dict(config: ScenarioConfig) -> dict:
    out: dict = {"id": config.id, "seed": config.seed}
    if config.genesis or config.total_supply is not None:
        g: dict = {"balances": dict(config.genesis)}
        if config.total_supply is not None:
            g["total_supply"] = config.total_supply
        out["genesis"] = g
    if config.script:
        out["script"] = [dict(s) for s in config.script]
    if config.generator is not None:
        out["generator"] = dict(vars(config.generator))
    m = config.mechanism
    if isinstance(m, CurrentBalance):
        out["mechanism"] = {"kind": "current_balance"}
    elif isinstance(m, SingleSnapshot):
        out["mechanism"] = {"kind": "single_snapshot"}
        if m.at is not None:
            out["mechanism"]["at"] = m.at
    elif isinstance(m, WeightedSnapshot):
        out["mechanism"] = {"kind": "weighted_snapshot", "weights": ", ".join(str(m.weights).split())}
    elif isinstance(m, HoldingPeriod):
        out["mechanism"] = {"kind": "holding_period", "period": m.period}
    elif isinstance(m, VoteEscrow):
        out["mechanism"] = {"kind": "vote_escrow", "max_lock": m.max_lock}
    pc = config.proposal
    p = {
        "id": pc.id,
        "action_tag": pc.action_tag,
        "proposer": pc.proposer,
        "vote_start": pc.vote_start,
        "vote_end": pc.vote_end,
        "p": str(pc.p),
        "timelock_blocks": pc.timelock_blocks,
    }
    if pc.min_participation is not None:
        p["min_participation"] = str(pc.min_participation)
    out["proposal"] = p
    if config.ballots:
        out["ballots"] = [
            {"voter": b.voter, "direction": b.direction.value, "cast_at": b.cast_at} for b in config.ballots
        ]
    if config.attack is not None:
        a = config.attack
        out["attack"] = {
            "kind": a.kind.value,
            "attacker": a.attacker,
            "budget": a.budget,
            "own_holdings": a.own_holdings,
            "span": a.span,
            "carry_cost_rate": str(a.carry_cost_rate),
            "source": a.source,
        }
    if config.sweep is not None:
        sw = config.sweep
        s: dict = {"weights": [str(w) for w in sw.weight_vectors], "spans": list(sw.spans)}
        if sw.family is not None:
            s["family"] = {
                "kind": sw.family.kind,
                "length": sw.family.length,
                "params": [str(x) for x in sw.family.params],
            }
        s["outputs"] = list(sw.outputs)
        s["max_runs"] = sw.max_runs
        out["sweep"] = s
    out["report"] = {"recency_newest": config.recency_newest}
    return out


def dumps_scenario(config: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(config))
