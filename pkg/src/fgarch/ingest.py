"""
Curve and price file I/O.

Curves CSV (wide): header ``day,t_1,...,t_T``, one row per curve, values
written with 17 significant digits so that a write/read cycle is exact.

Prices CSV (long): header ``day,slot,price`` with ``slot = 0..P``; slot 0 is
the opening reference price and only serves as the lag of the first return.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from fgarch.errors import DataError, DimensionError, ParseError
from fgarch.function_space import Curve, Grid

__all__ = [
    "PriceDay",
    "filter_days",
    "prices_to_log_returns",
    "read_curves_csv",
    "read_curves_table",
    "read_prices_csv",
    "write_curves_csv",
]

log = logging.getLogger(__name__)

SLOTS_PER_DAY = 78


@dataclass(frozen=True, eq=False)
class PriceDay:
    day_id: str
    prices: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=float))


def filter_days(days: Sequence[PriceDay], expected_length: int):
    """
    Split ``days`` into those with ``expected_length`` prices and the rest.

    Returns ``(kept, dropped)`` where ``dropped`` is a list of
    ``(day_id, reason)`` pairs; input order is preserved in both.
    """
    kept, dropped = [], []
    for day in days:
        if len(day.prices) == expected_length:
            kept.append(day)
        else:
            dropped.append((day.day_id, f"has {len(day.prices)} prices, expected {expected_length}"))
    return kept, dropped


def prices_to_log_returns(days: Sequence[PriceDay], expected_length: int | None = None) -> list[Curve]:
    """
    Intraday log-return curves ``log p(t) - log p(t - h)``.

    A day with ``P + 1`` prices yields a curve of ``P`` returns on the grid
    ``j / P``. Days whose length differs from ``expected_length`` (default:
    the length of the first day) are dropped and logged.

    Raises
    ------
    DataError
        If a kept day contains a nonpositive or non-finite price.
    """
    days = list(days)
    if not days:
        return []
    if expected_length is None:
        expected_length = len(days[0].prices)
    if expected_length < 2:
        raise DataError("a day needs at least two prices")
    kept, dropped = filter_days(days, expected_length)
    for day_id, reason in dropped:
        log.warning("dropping day %s: %s", day_id, reason)
    grid = Grid(expected_length - 1)
    curves = []
    for day in kept:
        p = day.prices
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise DataError(f"day {day.day_id}: prices must be positive and finite")
        curves.append(Curve(grid, np.diff(np.log(p))))
    return curves


def read_prices_csv(path) -> tuple[list[PriceDay], list[tuple[str, str]]]:
    """
    Read a long-form prices file.

    Returns ``(days, dropped)``. A day whose slots are not exactly
    ``0, 1, ..., k`` (a gap or duplicate) is dropped whole rather than
    imputed.
    """
    path = Path(path)
    rows: OrderedDict[str, dict[int, float]] = OrderedDict()
    dropped: list[tuple[str, str]] = []
    bad: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [], []
        if [h.strip() for h in header] != ["day", "slot", "price"]:
            raise ParseError(f"{path}: expected header 'day,slot,price', got {header}", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}", row=lineno)
            day = rec[0].strip()
            try:
                slot = int(rec[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: slot {rec[1]!r} is not an integer", row=lineno, column=2) from None
            try:
                price = float(rec[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: price {rec[2]!r} is not a number", row=lineno, column=3) from None
            slots = rows.setdefault(day, {})
            if slot in slots:
                bad.add(day)
            slots[slot] = price

    days = []
    for day, slots in rows.items():
        if day in bad:
            dropped.append((day, "duplicate slot"))
            continue
        if sorted(slots) != list(range(len(slots))):
            dropped.append((day, "missing slot"))
            continue
        days.append(PriceDay(day, [slots[k] for k in range(len(slots))]))
    return days, dropped


def write_curves_csv(sample, path, days: Sequence | None = None, T: int | None = None) -> None:
    """
    Write curves in wide form.

    ``sample`` is a sequence of Curves or an ``(n, T)`` array; ``days`` labels
    rows (default ``1..n``). ``T`` is needed only for an empty sample.
    """
    if isinstance(sample, np.ndarray):
        values = np.atleast_2d(sample) if sample.size else np.zeros((0, T or sample.shape[-1]))
    else:
        curves = list(sample)
        if curves:
            values = np.array([c.values for c in curves])
        else:
            if T is None:
                raise ValueError("T is required to write an empty sample")
            values = np.zeros((0, T))
    n, T = values.shape
    if days is None:
        days = range(1, n + 1)
    days = list(days)
    if len(days) != n:
        raise DimensionError("number of day labels does not match the number of curves")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["day"] + [f"t_{j}" for j in range(1, T + 1)])
        for day, row in zip(days, values):
            writer.writerow([day] + ["%.17g" % v for v in row])


def read_curves_table(path) -> tuple[list[str], np.ndarray]:
    """Day labels and the ``(n, T)`` value array of a wide curves file."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0].strip() != "day":
            raise ParseError(f"{path}: expected header 'day,t_1,...,t_T'", row=1)
        T = len(header) - 1
        if T < 1:
            raise ParseError(f"{path}: header lists no grid points", row=1)
        days, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != T + 1:
                raise ParseError(f"{path}:{lineno}: expected {T + 1} fields, got {len(rec)}", row=lineno)
            vals = []
            for col, cell in enumerate(rec[1:], start=2):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}:{col}: {cell!r} is not a number", row=lineno, column=col) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{lineno}:{col}: value is not finite", row=lineno, column=col)
                vals.append(v)
            days.append(rec[0])
            rows.append(vals)
    return days, np.array(rows, dtype=float).reshape(len(rows), T)


def read_curves_csv(path) -> list[Curve]:
    _, values = read_curves_table(path)
    grid = Grid(values.shape[1])
    return [Curve(grid, row) for row in values]
