"""Extended non-negative reals: a finite float or +infinity, tagged explicitly.

Divergent Laplace transforms and infinite tilted means are legal answers, so
they are carried as ``ExtendedReal(inf=True)`` instead of a float sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ExtendedReal:
    value: float = 0.0
    inf: bool = False

    def __post_init__(self):
        if not self.inf and not math.isfinite(self.value):
            raise ValueError(f"finite ExtendedReal got {self.value!r}; use ExtendedReal.infinity()")

    @classmethod
    def infinity(cls) -> "ExtendedReal":
        return cls(0.0, True)

    @classmethod
    def of(cls, x) -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        x = float(x)
        if x == math.inf:
            return cls.infinity()
        return cls(x)

    @property
    def finite(self) -> bool:
        return not self.inf

    def __float__(self) -> float:
        return math.inf if self.inf else self.value

    def __lt__(self, other):
        return float(self) < float(other)

    def __le__(self, other):
        return float(self) <= float(other)

    def __gt__(self, other):
        return float(self) > float(other)

    def __ge__(self, other):
        return float(self) >= float(other)

    def reciprocal_times(self, c: float) -> float:
        """``c / self`` with the convention ``c / inf = 0``."""
        if self.inf:
            return 0.0
        return c / self.value

    def __str__(self) -> str:
        return "inf" if self.inf else repr(self.value)


INF = ExtendedReal.infinity()
