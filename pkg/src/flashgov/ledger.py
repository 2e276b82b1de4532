"""Single-chain token ledger with per-block snapshots and atomic flash loans.

Balances live in integer base units. A ledger holds a contiguous run of
sealed :class:`Snapshot` objects (genesis is height 0) and at most one open
pending block. Every pending-block action is attributed to an acting address
so that a borrower who leaves a flash loan outstanding at seal time can have
all of their actions reverted, together with anything that depended on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Hashable, Iterable, Mapping

Address = Hashable


class LedgerError(Exception):
    pass


class BlockAlreadyOpen(LedgerError):
    pass


class NoOpenBlock(LedgerError):
    pass


class InsufficientBalance(LedgerError):
    pass


class NoOutstandingLoan(LedgerError):
    pass


class UnsealedHeight(LedgerError):
    pass


class WindowTooLarge(LedgerError):
    pass


def check_amount(amt) -> int:
    # bool is an int subclass; reject it along with floats
    if isinstance(amt, bool) or not isinstance(amt, int):
        raise TypeError(f"amounts are integer base units, got {amt!r}")
    if amt < 0:
        raise ValueError(f"amount must be >= 0, got {amt}")
    return amt


@dataclass(frozen=True)
class Snapshot:
    height: int
    balances: Mapping[Address, int]
    total_supply: int

    def balance(self, d: Address) -> int:
        return self.balances.get(d, 0)


@dataclass(frozen=True)
class LockPosition:
    """Tokens escrowed by ``owner`` from ``created`` until ``unlock_height``."""

    owner: Address
    locked: int
    created: int
    unlock_height: int

    def __post_init__(self):
        check_amount(self.locked)
        if self.unlock_height <= self.created:
            raise ValueError("unlock_height must be after the creation height")


@dataclass(frozen=True)
class Event:
    height: int
    kind: str
    address: Address
    amount: int = 0
    counterparty: Address | None = None


@dataclass(frozen=True)
class _Action:
    kind: str
    actor: Address
    amount: int
    other: Address | None = None
    until: int | None = None


class _BlockState:
    """Mutable balances of one pending block; shared by live ops and replay."""

    def __init__(self, height: int, base: Snapshot, locked: Mapping[Address, int]):
        self.height = height
        self.balances: dict = dict(base.balances)
        self.loans: dict = {}
        self.locked: dict = dict(locked)
        self.new_locks: list[LockPosition] = []

    def available(self, d: Address) -> int:
        return self.balances.get(d, 0) - self.locked.get(d, 0)

    def apply(self, a: _Action) -> None:
        if a.kind == "transfer":
            if self.available(a.actor) < a.amount:
                raise InsufficientBalance(
                    f"{a.actor!r} has {self.available(a.actor)} transferable, needs {a.amount}"
                )
            if a.amount == 0:
                return
            self.balances[a.actor] -= a.amount
            self.balances[a.other] = self.balances.get(a.other, 0) + a.amount
        elif a.kind == "borrow":
            if a.amount == 0:
                return
            self.balances[a.actor] = self.balances.get(a.actor, 0) + a.amount
            self.loans[a.actor] = self.loans.get(a.actor, 0) + a.amount
        elif a.kind == "repay":
            if a.amount == 0:
                return
            if a.actor not in self.loans or self.loans[a.actor] < a.amount:
                raise NoOutstandingLoan(
                    f"{a.actor!r} owes {self.loans.get(a.actor, 0)}, tried to repay {a.amount}"
                )
            if self.available(a.actor) < a.amount:
                raise InsufficientBalance(f"{a.actor!r} cannot repay {a.amount}")
            self.balances[a.actor] -= a.amount
            self.loans[a.actor] -= a.amount
            if self.loans[a.actor] == 0:
                del self.loans[a.actor]
        elif a.kind == "lock":
            if a.until <= self.height:
                raise ValueError("unlock height must lie after the current block")
            if self.available(a.actor) < a.amount:
                raise InsufficientBalance(f"{a.actor!r} cannot lock {a.amount}")
            self.locked[a.actor] = self.locked.get(a.actor, 0) + a.amount
            self.new_locks.append(LockPosition(a.actor, a.amount, self.height, a.until))
        else:  # pragma: no cover
            raise ValueError(f"unknown action {a.kind}")

    def freeze(self, total_supply: int) -> Snapshot:
        balances = {d: v for d, v in self.balances.items() if v}
        return Snapshot(self.height, MappingProxyType(balances), total_supply)


class Ledger:
    """Deterministic token ledger.

    Mutating operations act on the pending block only; sealed snapshots are
    never modified. ``snapshot_reads`` counts historical balance reads so
    callers can check how much snapshot data a computation touched.
    """

    def __init__(self, genesis: Mapping[Address, int] | Iterable[tuple] = ()):
        items = genesis.items() if isinstance(genesis, Mapping) else genesis
        balances: dict = {}
        for d, amt in items:
            balances[d] = balances.get(d, 0) + check_amount(amt)
        supply = sum(balances.values())
        self.sealed: list[Snapshot] = [
            Snapshot(0, MappingProxyType({d: v for d, v in balances.items() if v}), supply)
        ]
        self.total_supply = supply
        self.locks: list[LockPosition] = []
        self.events: list[Event] = []
        self.snapshot_reads = 0
        self._block: _BlockState | None = None
        self._actions: list[_Action] = []

    # -- inspection ---------------------------------------------------------

    @property
    def head(self) -> int:
        return self.sealed[-1].height

    @property
    def is_open(self) -> bool:
        return self._block is not None

    @property
    def height(self) -> int:
        """Height of the block currently being built (pending if open, else head)."""
        return self.head + 1 if self._block is not None else self.head

    @property
    def pending(self) -> Mapping[Address, int]:
        if self._block is None:
            raise NoOpenBlock("no pending block")
        return MappingProxyType(self._block.balances)

    @property
    def open_flash_loans(self) -> Mapping[Address, int]:
        if self._block is None:
            return MappingProxyType({})
        return MappingProxyType(self._block.loans)

    def balance(self, d: Address) -> int:
        """Current balance: pending if a block is open, else the head snapshot."""
        if self._block is not None:
            return self._block.balances.get(d, 0)
        return self.sealed[-1].balance(d)

    def snapshot(self, height: int) -> Snapshot:
        if height < 0 or height > self.head:
            raise UnsealedHeight(f"height {height} is not sealed (head={self.head})")
        return self.sealed[height]

    def balance_at(self, d: Address, height: int) -> int:
        snap = self.snapshot(height)
        self.snapshot_reads += 1
        return snap.balance(d)

    def history_vector(self, d: Address, window: int, at: int) -> list[int]:
        """Balances of ``d`` over ``window`` sealed blocks ending at ``at``, oldest first."""
        if at < 0 or at > self.head:
            raise UnsealedHeight(f"height {at} is not sealed (head={self.head})")
        if window < 1:
            raise ValueError("window must be positive")
        if window > at + 1:
            raise WindowTooLarge(f"window {window} reaches below genesis from height {at}")
        start = at - window + 1
        return [self.balance_at(d, h) for h in range(start, at + 1)]

    def locked_at(self, d: Address, height: int) -> int:
        return sum(p.locked for p in self.locks if p.owner == d and p.unlock_height > height)

    # -- block lifecycle ----------------------------------------------------

    def open_block(self) -> None:
        if self._block is not None:
            raise BlockAlreadyOpen(f"block {self.head + 1} is already open")
        self._block = self._fresh_block()
        self._actions = []

    def _fresh_block(self) -> _BlockState:
        h = self.head + 1
        locked: dict = {}
        for p in self.locks:
            if p.unlock_height > h:
                locked[p.owner] = locked.get(p.owner, 0) + p.locked
        return _BlockState(h, self.sealed[-1], locked)

    def _act(self, action: _Action) -> None:
        if self._block is None:
            raise NoOpenBlock("open a block first")
        self._block.apply(action)
        self._actions.append(action)
        self.events.append(
            Event(self._block.height, action.kind, action.actor, action.amount, action.other)
        )

    def transfer(self, frm: Address, to: Address, amt: int) -> None:
        self._act(_Action("transfer", frm, check_amount(amt), to))

    def flash_borrow(self, borrower: Address, amt: int) -> None:
        self._act(_Action("borrow", borrower, check_amount(amt)))

    def flash_repay(self, borrower: Address, amt: int) -> None:
        self._act(_Action("repay", borrower, check_amount(amt)))

    def lock(self, owner: Address, amt: int, unlock_height: int) -> None:
        self._act(_Action("lock", owner, check_amount(amt), until=unlock_height))

    def seal_block(self) -> Snapshot:
        """Seal the pending block, reverting every delinquent borrower first."""
        if self._block is None:
            raise NoOpenBlock("no pending block to seal")
        block = self._block
        if block.loans:
            block = self._revert(set(block.loans))
        snap = block.freeze(self.total_supply)
        assert sum(snap.balances.values()) == self.total_supply
        self.sealed.append(snap)
        self.locks.extend(block.new_locks)
        self.events.append(Event(snap.height, "seal", None))
        self._block = None
        self._actions = []
        return snap

    def _revert(self, delinquent: set) -> _BlockState:
        # Replay the block without the delinquent borrowers. Actions that fail
        # without the reverted funds are dropped; anyone left owing after the
        # replay joins the delinquent set and the replay restarts.
        while True:
            block = self._fresh_block()
            dropped = []
            for a in self._actions:
                if a.actor in delinquent:
                    continue
                try:
                    block.apply(a)
                except LedgerError:
                    dropped.append(a)
            extra = set(block.loans) - delinquent
            if not extra:
                break
            delinquent |= extra
        h = block.height
        for d in sorted(delinquent, key=repr):
            n = sum(1 for a in self._actions if a.actor == d)
            self.events.append(Event(h, "revert", d, n))
        for a in dropped:
            self.events.append(Event(h, "drop", a.actor, a.amount, a.other))
        return block

    def advance(self, n: int = 1) -> None:
        """Seal ``n`` empty blocks; empty blocks share the head's balance map."""
        if self._block is not None:
            raise BlockAlreadyOpen("seal the pending block before advancing")
        if n < 0:
            raise ValueError("cannot advance a negative number of blocks")
        last = self.sealed[-1]
        for _ in range(n):
            last = Snapshot(last.height + 1, last.balances, last.total_supply)
            self.sealed.append(last)
        if n:
            self.events.append(Event(last.height, "advance", None, n))

    def copy(self) -> Ledger:
        if self._block is not None:
            raise BlockAlreadyOpen("copy is only defined between blocks")
        other = Ledger.__new__(Ledger)
        other.sealed = list(self.sealed)
        other.total_supply = self.total_supply
        other.locks = list(self.locks)
        other.events = list(self.events)
        other.snapshot_reads = 0
        other._block = None
        other._actions = []
        return other

    def __eq__(self, other):
        if not isinstance(other, Ledger):
            return NotImplemented
        return (
            [(s.height, dict(s.balances)) for s in self.sealed]
            == [(s.height, dict(s.balances)) for s in other.sealed]
            and self.locks == other.locks
            and self.events == other.events
            and (self._block is None) == (other._block is None)
            and (self._block is None or self._block.balances == other._block.balances)
        )

    __hash__ = None
