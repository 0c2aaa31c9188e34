"""Small shared helpers."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Apply fn to each item, preserving input order.

    jobs > 1 fans out over a thread pool; results still come back in
    input order so downstream artifacts stay deterministic.
    """
    seq: Sequence[T] = list(items)
    if jobs <= 1 or len(seq) <= 1:
        return [fn(item) for item in seq]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, seq))


def _quantize2(value: float) -> Decimal:
    # half-up on the shortest decimal repr, the documented boundary rule
    return Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def round2(value: float) -> float:
    return float(_quantize2(value)) + 0.0  # +0.0 folds -0.0 away


def fmt2(value: float) -> str:
    text = f"{_quantize2(value):.2f}"
    return "0.00" if text == "-0.00" else text
