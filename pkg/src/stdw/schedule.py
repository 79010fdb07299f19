"""Cyclic batch matching between neighbouring domains and mixing-weight schedules.

Batch indices here are 1-based: ``left_index(t, n)`` walks the left domain's
``n`` batches in order, and ``right_index`` walks the right domain's ``m``
batches with a skew of one position every time the left side wraps.  Use
:meth:`PairPlan.zero_based` when indexing Python lists.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError

SCHEDULE_KINDS = ("equal", "fixed", "rand", "sorted")


def _positive(name, value):
    if int(value) != value or value < 1:
        raise UsageError(f"{name} must be a positive integer, got {value}")


def left_index(t: int, n: int) -> int:
    _positive("n", n)
    return t % n + 1


def right_index(t: int, n: int, m: int) -> int:
    _positive("n", n)
    _positive("m", m)
    return (t + t // n) % m + 1


@dataclass(frozen=True)
class PairPlan:
    n: int
    m: int
    pairs: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.pairs)

    def zero_based(self) -> list[tuple[int, int]]:
        return [(i - 1, j - 1) for i, j in self.pairs]


def build_pair_plan(n: int, m: int, T: int) -> PairPlan:
    _positive("T", T)
    pairs = tuple((left_index(t, n), right_index(t, n, m)) for t in range(T))
    return PairPlan(n, m, pairs)


@dataclass(frozen=True)
class RhoSchedule:
    kind: str
    values: tuple[float, ...]
    steps: int
    seed: int | None = None
    fixed_value: float | None = None

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def make_rho_schedule(kind: str, s: int, seed: int = 0, fixed_value: float = 0.5) -> RhoSchedule:
    """Mixing weights for one domain transition, always ``s + 1`` stages long.

    ``equal`` is 0, 1/s, ..., 1 computed as ``i / s`` so the endpoints are
    exact.  ``rand`` draws iid U(0, 1) values and ``sorted`` is the same
    draw in ascending order.
    """
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"unknown schedule {kind!r}; choose from {', '.join(SCHEDULE_KINDS)}")
    if int(s) != s or s < 1:
        raise ConfigError(f"schedule steps must be >= 1, got {s}")
    s = int(s)
    if kind == "equal":
        values = [i / s for i in range(s + 1)]
        return RhoSchedule(kind, tuple(values), s)
    if kind == "fixed":
        if not 0.0 <= fixed_value <= 1.0:
            raise ConfigError(f"fixed_value must lie in [0, 1], got {fixed_value}")
        return RhoSchedule(kind, (float(fixed_value),) * (s + 1), s, fixed_value=float(fixed_value))
    draws = np.random.default_rng(seed).uniform(0.0, 1.0, s + 1)
    if kind == "sorted":
        draws = np.sort(draws)
    return RhoSchedule(kind, tuple(float(v) for v in draws), s, seed=seed)
