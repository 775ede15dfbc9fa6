"""Global statistics combining m local statistics into one scalar per tick.

All functions reduce over the last axis, so a (replications, m) panel gives
one value per replication.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pool import QuantileTable, SteadyStatePool, empirical_cdf, expected_quantiles, quantile_positions

__all__ = [
    "gt",
    "gtz",
    "logistic_quantile_transform",
    "gl_soft",
    "g_max",
    "g_sum",
    "QuantileGt",
    "ZouGz",
    "SoftThreshold",
    "MaxStat",
    "SumStat",
    "logistic_table",
]


def gt(values, table: QuantileTable | np.ndarray):
    """Sum of squared upward gaps between sorted values and expected quantiles."""
    q = table.expected_q if isinstance(table, QuantileTable) else np.asarray(table, dtype=float)
    w = np.sort(np.asarray(values, dtype=float), axis=-1)
    if w.shape[-1] != q.shape[-1]:
        raise ValueError(f"got {w.shape[-1]} values for a table of m={q.shape[-1]}")
    gap = w - q
    return np.sum(np.where(gap > 0.0, gap * gap, 0.0), axis=-1)


def logistic_quantile_transform(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("p must lie strictly inside (0, 1)")
    return np.log(p) - np.log1p(-p)  # -log(1/p - 1), accurate near both ends


def gtz(u_values):
    """Goodness-of-fit global statistic on probability-integral-transformed values."""
    u = np.sort(np.asarray(u_values, dtype=float), axis=-1)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise ValueError("u values must lie strictly inside (0, 1)")
    p = quantile_positions(u.shape[-1])
    # log[(1/u - 1) / (1/p - 1)] as a difference of log-odds, stable near 0 and 1
    term = logistic_quantile_transform(u) - logistic_quantile_transform(p)
    return np.sum(np.where(u > p, term * term, 0.0), axis=-1)


def gl_soft(values, b: float):
    return np.sum(np.maximum(np.asarray(values, dtype=float) - b, 0.0), axis=-1)


def g_max(values):
    v = np.asarray(values, dtype=float)
    if v.shape[-1] == 0:
        raise ValueError("g_max of an empty set")
    return np.max(v, axis=-1)


def g_sum(values):
    v = np.asarray(values, dtype=float)
    if v.shape[-1] == 0:
        raise ValueError("g_sum of an empty set")
    return np.sum(v, axis=-1)


# --- kinds: what a monitoring scheme evaluates each tick --------------------


@dataclass(frozen=True, eq=False)
class QuantileGt:
    table: QuantileTable
    kind: str = field(default="quantile", init=False)

    @classmethod
    def from_pool(cls, pool: SteadyStatePool, m: int) -> QuantileGt:
        return cls(expected_quantiles(pool, m))

    @property
    def label(self) -> str:
        return "G"

    def evaluate(self, values):
        return gt(values, self.table)


@dataclass(frozen=True, eq=False)
class ZouGz:
    pool: SteadyStatePool
    kind: str = field(default="zou", init=False)

    @property
    def label(self) -> str:
        return "GZ"

    def evaluate(self, values):
        return gtz(empirical_cdf(self.pool, values))


@dataclass(frozen=True)
class SoftThreshold:
    b: float
    kind: str = field(default="soft", init=False)

    def __post_init__(self):
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")

    @property
    def label(self) -> str:
        return f"GL(b={self.b:.4g})"

    def evaluate(self, values):
        return gl_soft(values, self.b)


@dataclass(frozen=True)
class MaxStat:
    kind: str = field(default="max", init=False)
    label = "Gmax"

    def evaluate(self, values):
        return g_max(values)


@dataclass(frozen=True)
class SumStat:
    kind: str = field(default="sum", init=False)
    label = "Gsum"

    def evaluate(self, values):
        return g_sum(values)


def logistic_table(m: int) -> np.ndarray:
    """Expected quantiles on the standard logistic scale."""
    return logistic_quantile_transform(quantile_positions(m))
