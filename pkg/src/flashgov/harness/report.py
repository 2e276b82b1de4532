"""CSV output for report rows and ledger event logs."""

from __future__ import annotations

import csv
import io
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from ..ledger import Event
from .runner import ReportRow

COLUMNS = (
    "scenario_id",
    "mechanism",
    "weights",
    "span",
    "succeeded",
    "min_flip_capital",
    "carry_cost",
    "recency_share",
    "power_evals",
    "wall_time_ms",
)
EVENT_COLUMNS = ("height", "kind", "address", "amount", "counterparty")

_MICRO = Decimal("0.000001")


def fmt_fraction(x: Fraction) -> str:
    """Six decimal places, ties to even."""
    with localcontext() as ctx:
        ctx.prec = max(28, len(str(x.numerator)) + 10)
        d = Decimal(x.numerator) / Decimal(x.denominator)
        return str(d.quantize(_MICRO, rounding=ROUND_HALF_EVEN))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return fmt_fraction(v)
    return str(v)


def row_cells(row: ReportRow, timing: bool = True) -> list[str]:
    cells = [_cell(getattr(row, c)) for c in COLUMNS[:-1]]
    cells.append(f"{row.wall_time_ms:.3f}" if timing and row.wall_time_ms is not None else "")
    return cells


def format_csv(rows: Sequence[ReportRow], timing: bool = True) -> str:
    if not rows:
        raise ValueError("refusing to write a report with no rows")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(row_cells(r, timing))
    return buf.getvalue()


def emit_csv(rows: Sequence[ReportRow], path, timing: bool = True) -> None:
    text = format_csv(rows, timing)
    Path(path).write_text(text, encoding="utf-8")


def format_events(events: Iterable[Event]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for e in events:
        w.writerow([e.height, e.kind, "" if e.address is None else e.address, e.amount,
                    "" if e.counterparty is None else e.counterparty])
    return buf.getvalue()
