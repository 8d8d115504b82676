"""Finite unions of closed intervals on the extended real line."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


def _fmt(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, disjoint closed intervals; endpoints may be infinite."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        items = []
        for lo, hi in self.intervals:
            lo, hi = float(lo), float(hi)
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise DomainError(f"invalid interval [{lo}, {hi}]")
            items.append((lo, hi))
        items.sort()
        merged: list[tuple[float, float]] = []
        for lo, hi in items:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf),))

    @classmethod
    def parse(cls, text: str) -> "IntervalSet":
        """Parse ``"lo:hi[,lo:hi...]"``; ``inf``/``-inf`` are accepted."""
        parts = []
        for item in text.replace(" ", "").split(","):
            if not item:
                continue
            try:
                lo, hi = item.split(":")
                parts.append((float(lo), float(hi)))
            except ValueError as exc:
                raise DomainError(f"bad interval {item!r}; expected lo:hi") from exc
        if not parts:
            raise DomainError("empty interval list")
        return cls(tuple(parts))

    def __str__(self) -> str:
        return ",".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def is_real_line(self) -> bool:
        return self.intervals == ((-math.inf, math.inf),)

    def contains(self, v: float) -> bool:
        return any(lo <= v <= hi for lo, hi in self.intervals)

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        """Intersection with ``[lo, hi]``, dropping empty pieces."""
        out = []
        for a, b in self.intervals:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 < b2:
                out.append((a2, b2))
        return IntervalSet(tuple(out))

    def affine(self, scale: float, shift: float) -> "IntervalSet":
        """Image under ``v -> scale * v + shift`` for ``scale > 0``."""
        if not scale > 0:
            raise DomainError("affine map needs a positive scale")
        return IntervalSet(tuple((scale * a + shift, scale * b + shift) for a, b in self.intervals))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    out.append((lo, hi))
        return IntervalSet(tuple(out))

    @property
    def hull(self) -> tuple[float, float]:
        return self.intervals[0][0], self.intervals[-1][1]
