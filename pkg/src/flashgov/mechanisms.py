"""Voting-power mechanisms.

Five families are supported:

* ``CurrentBalance`` counts whatever an address holds right now, flash loans
  included. It is the naive baseline.
* ``SingleSnapshot`` reads one sealed height.
* ``WeightedSnapshot`` takes the dot product of a weight vector with the
  address's balance history over a window of sealed blocks, ending at the
  last block sealed before voting opens.
* ``HoldingPeriod`` counts only token lots held for at least ``period`` blocks.
* ``VoteEscrow`` gives locked tokens power proportional to remaining lock
  time, decaying linearly to zero at unlock.

Powers are returned as :class:`fractions.Fraction` so that tallies and
decisions stay exact.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Union

from .ledger import Address, Ledger, LockPosition

__all__ = [
    "WEIGHT_SCALE",
    "WeightSyntaxError",
    "WeightVector",
    "SnapshotWindow",
    "HoldingPeriodBook",
    "LockPosition",
    "CurrentBalance",
    "SingleSnapshot",
    "WeightedSnapshot",
    "HoldingPeriod",
    "VoteEscrow",
    "MechanismSpec",
    "weighted_power",
    "current_balance_power",
    "single_snapshot_power",
    "holding_period_power",
    "vote_escrow_power",
    "resolve",
    "power",
    "describe",
    "toward_oldest",
    "geometric_tilt",
]

# weights are fixed-point with six decimal places
WEIGHT_SCALE = 10**6

_AMBIGUOUS_COMMA = re.compile(r"\d,\d")
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


class WeightSyntaxError(ValueError):
    pass


def _to_fraction(x) -> Fraction:
    if isinstance(x, bool):
        raise TypeError("booleans are not weights")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Decimal)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot read a weight from {x!r}")


@dataclass(frozen=True)
class WeightVector:
    """Non-negative weights over a snapshot window; index 0 is the oldest block.

    The vector need not sum to one.
    """

    weights: tuple
    micro: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ws = tuple(_to_fraction(w) for w in self.weights)
        if not ws:
            raise ValueError("weight vector must not be empty")
        if any(w < 0 for w in ws):
            raise ValueError("weights ≥ 0")
        if not any(w > 0 for w in ws):
            raise ValueError("at least one weight > 0")
        micro = []
        for w in ws:
            scaled = w * WEIGHT_SCALE
            if scaled.denominator != 1:
                raise ValueError(f"weight {w} is finer than the 1e-6 weight precision")
            micro.append(scaled.numerator)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "micro", tuple(micro))

    @classmethod
    def parse(cls, text: str) -> WeightVector:
        """Read ``"0.5, 0.3, 0.2"`` or ``"(0.5 0.3 0.2)"``.

        A comma between two digits (``0,1``) is rejected: it could be a decimal
        comma or a separator, and guessing would change the vector's length.
        """
        m = _AMBIGUOUS_COMMA.search(text)
        if m:
            raise WeightSyntaxError(
                f"ambiguous '{m.group()}' in weights {text!r}: write a decimal point "
                "(0.1) or separate entries with ', '"
            )
        body = text.strip()
        if body[:1] in "([" and body[-1:] in ")]":
            body = body[1:-1]
        tokens = [t for t in re.split(r"[,\s]+", body) if t]
        for t in tokens:
            if not _NUMBER.match(t):
                raise WeightSyntaxError(f"not a decimal weight: {t!r}")
        return cls(tuple(tokens))

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def __getitem__(self, i):
        return self.weights[i]

    def __str__(self):
        return " ".join(_fmt_exact(w) for w in self.weights)

    def dot(self, values: Iterable[int]) -> Fraction:
        values = list(values)
        if len(values) != len(self.micro):
            raise ValueError(f"history of length {len(values)} against {len(self.micro)} weights")
        return Fraction(sum(w * t for w, t in zip(self.micro, values)), WEIGHT_SCALE)

    def scaled(self, c) -> WeightVector:
        c = _to_fraction(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return WeightVector(tuple(w * c for w in self.weights))

    def total(self) -> Fraction:
        return Fraction(sum(self.micro), WEIGHT_SCALE)


def _fmt_exact(w: Fraction) -> str:
    # exact for anything on the 1e-6 grid
    d = Decimal(w.numerator) / Decimal(w.denominator)
    s = format(d.normalize(), "f")
    return s


def toward_oldest(length: int, t) -> WeightVector:
    """Uniform weights with a share ``t`` of the mass moved onto the oldest index.

    Increasing ``t`` shifts mass monotonically from the newer snapshots to the
    oldest one; ``t = 0`` is uniform and ``t = 1`` puts everything on index 0.
    """
    t = _to_fraction(t)
    if not 0 <= t <= 1:
        raise ValueError("t must lie in [0, 1]")
    base = Fraction(1, length)
    ws = [base * (1 - t) for _ in range(length)]
    ws[0] += t
    return WeightVector(tuple(_quantize(w) for w in ws))


def geometric_tilt(length: int, ratio) -> WeightVector:
    """Weights proportional to ``ratio**i`` (index 0 oldest), normalised and rounded to 1e-6.

    ``ratio < 1`` favours old snapshots; ``ratio > 1`` favours recent ones.
    """
    ratio = _to_fraction(ratio)
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    raw = [ratio**i for i in range(length)]
    total = sum(raw)
    return WeightVector(tuple(_quantize(r / total) for r in raw))


def _quantize(w: Fraction) -> Fraction:
    scaled = w * WEIGHT_SCALE
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    return Fraction(q, WEIGHT_SCALE)


@dataclass(frozen=True)
class SnapshotWindow:
    """Number of sealed snapshots a weighted vote consults.

    The window always ends at the last block sealed strictly before voting
    starts, so it can never include the pending block.
    """

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("window size must be positive")

    @staticmethod
    def anchor(vote_start: int) -> int:
        return vote_start - 1


@dataclass
class HoldingPeriodBook:
    """Per-address token lots with acquisition heights.

    A lot votes once ``now >= acquired + period``. Outgoing transfers consume
    the oldest lots first.
    """

    period: int
    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("holding period must be at least one block")

    def acquire(self, d: Address, amount: int, height: int) -> None:
        if amount:
            self.entries.setdefault(d, deque()).append((amount, height))

    def release(self, d: Address, amount: int) -> None:
        lots = self.entries.get(d, deque())
        while amount:
            if not lots:
                raise ValueError(f"{d!r} releases more than the book holds")
            amt, h = lots[0]
            if amt <= amount:
                lots.popleft()
                amount -= amt
            else:
                lots[0] = (amt - amount, h)
                amount = 0

    def matured(self, d: Address, now: int) -> int:
        return sum(a for a, h in self.entries.get(d, ()) if h + self.period <= now)

    def escrowed(self, d: Address, now: int) -> int:
        return sum(a for a, h in self.entries.get(d, ()) if h + self.period > now)

    @classmethod
    def from_ledger(cls, ledger: Ledger, period: int, upto: int | None = None) -> HoldingPeriodBook:
        """Rebuild lots from sealed balance changes; genesis balances date from height 0."""
        upto = ledger.head if upto is None else upto
        book = cls(period)
        prev = None
        for snap in ledger.sealed[: upto + 1]:
            if prev is None:
                for d, amt in snap.balances.items():
                    book.acquire(d, amt, snap.height)
            elif snap.balances is not prev.balances:
                for d in set(prev.balances) | set(snap.balances):
                    delta = snap.balance(d) - prev.balance(d)
                    if delta > 0:
                        book.acquire(d, delta, snap.height)
                    elif delta < 0:
                        book.release(d, -delta)
            prev = snap
        return book


@dataclass(frozen=True)
class CurrentBalance:
    pass


@dataclass(frozen=True)
class SingleSnapshot:
    # None anchors at the last block sealed before voting starts
    at: int | None = None


@dataclass(frozen=True)
class WeightedSnapshot:
    weights: WeightVector
    window: SnapshotWindow | None = None

    def __post_init__(self):
        if not isinstance(self.weights, WeightVector):
            object.__setattr__(self, "weights", WeightVector(tuple(self.weights)))
        if self.window is None:
            object.__setattr__(self, "window", SnapshotWindow(len(self.weights)))
        elif self.window.size != len(self.weights):
            raise ValueError("weight vector length must match the snapshot window")


@dataclass(frozen=True)
class HoldingPeriod:
    period: int
    book: HoldingPeriodBook | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("holding period must be at least one block")


@dataclass(frozen=True)
class VoteEscrow:
    max_lock: int
    positions: tuple | None = None

    def __post_init__(self):
        if self.max_lock < 1:
            raise ValueError("max_lock must be positive")
        if self.positions is not None:
            object.__setattr__(self, "positions", tuple(self.positions))
            for p in self.positions:
                if p.unlock_height - p.created > self.max_lock:
                    raise ValueError(f"lock of {p.owner!r} exceeds max_lock={self.max_lock}")


MechanismSpec = Union[CurrentBalance, SingleSnapshot, WeightedSnapshot, HoldingPeriod, VoteEscrow]


def weighted_power(ledger: Ledger, d: Address, weights: WeightVector, at: int) -> Fraction:
    return weights.dot(ledger.history_vector(d, len(weights), at))


def current_balance_power(ledger: Ledger, d: Address) -> Fraction:
    return Fraction(ledger.balance(d))


def single_snapshot_power(ledger: Ledger, d: Address, at: int) -> Fraction:
    return Fraction(ledger.balance_at(d, at))


def holding_period_power(
    ledger: Ledger, d: Address, book: HoldingPeriodBook | None, now: int, period: int | None = None
) -> Fraction:
    if book is None:
        if period is None:
            raise ValueError("need either a book or a period")
        book = HoldingPeriodBook.from_ledger(ledger, period)
    return Fraction(book.matured(d, now))


def vote_escrow_power(position: LockPosition, now: int, max_lock: int) -> Fraction:
    """``locked * (unlock - now) / max_lock``, zero outside the lock's lifetime.

    Equivalently ``bias - slope * now`` with ``slope = locked / max_lock``.
    """
    if now > position.unlock_height or now < position.created:
        return Fraction(0)
    return Fraction(position.locked * (position.unlock_height - now), max_lock)


def resolve(spec: MechanismSpec, ledger: Ledger) -> MechanismSpec:
    """Fill in ledger-derived state (holding lots, lock positions) once per evaluation."""
    if isinstance(spec, HoldingPeriod) and spec.book is None:
        return HoldingPeriod(spec.period, HoldingPeriodBook.from_ledger(ledger, spec.period))
    if isinstance(spec, VoteEscrow) and spec.positions is None:
        return VoteEscrow(spec.max_lock, tuple(ledger.locks))
    return spec


def power(
    spec: MechanismSpec, ledger: Ledger, d: Address, now: int, *, vote_start: int | None = None
) -> Fraction:
    """Voting power of ``d`` under ``spec``.

    ``now`` is the evaluation height. History-based variants anchor at the
    last block sealed before ``vote_start`` (or before ``now`` if no vote
    start is given).
    """
    start = now if vote_start is None else vote_start
    if isinstance(spec, CurrentBalance):
        return current_balance_power(ledger, d)
    if isinstance(spec, SingleSnapshot):
        at = SnapshotWindow.anchor(start) if spec.at is None else spec.at
        return single_snapshot_power(ledger, d, at)
    if isinstance(spec, WeightedSnapshot):
        return weighted_power(ledger, d, spec.weights, spec.window.anchor(start))
    if isinstance(spec, HoldingPeriod):
        return holding_period_power(ledger, d, spec.book, now, spec.period)
    if isinstance(spec, VoteEscrow):
        positions = spec.positions if spec.positions is not None else tuple(ledger.locks)
        return sum(
            (vote_escrow_power(p, now, spec.max_lock) for p in positions if p.owner == d),
            Fraction(0),
        )
    raise TypeError(f"unknown mechanism {spec!r}")


def describe(spec: MechanismSpec) -> str:
    if isinstance(spec, CurrentBalance):
        return "current_balance"
    if isinstance(spec, SingleSnapshot):
        return "single_snapshot" if spec.at is None else f"single_snapshot(at={spec.at})"
    if isinstance(spec, WeightedSnapshot):
        return "weighted_snapshot"
    if isinstance(spec, HoldingPeriod):
        return f"holding_period(H={spec.period})"
    if isinstance(spec, VoteEscrow):
        return f"vote_escrow(max_lock={spec.max_lock})"
    raise TypeError(f"unknown mechanism {spec!r}")
