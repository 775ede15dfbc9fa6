"""Per-stream CUSUM recursions.

The step functions accept scalars or numpy arrays of any shape, so the same
code updates one stream or a whole (replications, streams) panel.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "CusumParams",
    "CusumState",
    "cusum_step",
    "cusum_oracle",
    "AdaptiveParams",
    "AdaptiveCusumState",
    "adaptive_mu_hats",
    "adaptive_cusum_step",
    "adaptive_stat",
    "CusumFamily",
    "AdaptiveFamily",
]


@dataclass(frozen=True)
class CusumParams:
    mu: float = 0.5

    def __post_init__(self):
        if self.mu == 0:
            raise ValueError("mu must be nonzero")


@dataclass
class CusumState:
    s_plus: float | np.ndarray = 0.0


def cusum_step(state: CusumState, x, params: CusumParams) -> CusumState:
    mu = params.mu
    return CusumState(np.maximum(0.0, state.s_plus + mu * (x - mu / 2.0)))


def cusum_oracle(observations: Sequence[float], params: CusumParams) -> float:
    """Non-recursive CUSUM: the largest partial sum over all start points.

    Quadratic in the sequence length; meant for checking ``cusum_step``.
    """
    mu = params.mu
    incs = [mu * (x - mu / 2.0) for x in observations]
    best = 0.0
    for k in range(len(incs)):
        best = max(best, sum(incs[k:]))
    return best


@dataclass(frozen=True)
class AdaptiveParams:
    """rho: smallest meaningful shift; s0/t0: prior sum and prior count."""

    rho: float = 0.25
    s0: float = 1.0
    t0: float = 4.0

    def __post_init__(self):
        if not self.rho > 0 or self.s0 < 0 or self.t0 < 0:
            raise ValueError(f"invalid adaptive parameters {self}")


@dataclass
class AdaptiveCusumState:
    c1: float | np.ndarray = 0.0
    c2: float | np.ndarray = 0.0
    s1: float | np.ndarray = 0.0
    s2: float | np.ndarray = 0.0
    t1: float | np.ndarray = 0.0
    t2: float | np.ndarray = 0.0
    x_prev: float | np.ndarray = 0.0


def adaptive_mu_hats(state: AdaptiveCusumState, params: AdaptiveParams):
    d1 = params.t0 + state.t1
    d2 = params.t0 + state.t2
    if np.any(np.asarray(d1) == 0) or np.any(np.asarray(d2) == 0):
        raise ValueError("t0 + T is zero; the shift estimate is undefined")
    mu1 = np.maximum(params.rho, (params.s0 + state.s1) / d1)
    mu2 = np.minimum(-params.rho, (-params.s0 + state.s2) / d2)
    return mu1, mu2


def adaptive_cusum_step(state: AdaptiveCusumState, x, params: AdaptiveParams) -> AdaptiveCusumState:
    # (S, T) consume the previous C and the previous observation
    on1 = state.c1 > 0
    on2 = state.c2 > 0
    s1 = np.where(on1, state.s1 + state.x_prev, 0.0)
    t1 = np.where(on1, state.t1 + 1.0, 0.0)
    s2 = np.where(on2, state.s2 + state.x_prev, 0.0)
    t2 = np.where(on2, state.t2 + 1.0, 0.0)
    mu1, mu2 = adaptive_mu_hats(AdaptiveCusumState(s1=s1, s2=s2, t1=t1, t2=t2), params)
    c1 = np.maximum(0.0, state.c1 + mu1 * (x - mu1 / 2.0))
    c2 = np.maximum(0.0, state.c2 + mu2 * (x - mu2 / 2.0))
    return AdaptiveCusumState(c1, c2, s1, s2, t1, t2, np.asarray(x, dtype=float).copy())


def adaptive_stat(state: AdaptiveCusumState):
    return np.maximum(state.c1, state.c2)


# --- families: the uniform interface used by pools and the simulators ------


@dataclass(frozen=True)
class CusumFamily:
    """Known-shift upper CUSUM as a pool/simulation family."""

    params: CusumParams = CusumParams()

    kind = "cusum"
    tag = 1
    reference_size = 0
    field_names = ("s_plus",)
    n_fields = 1

    def cold_state(self, shape, reference=None) -> CusumState:
        return CusumState(np.zeros(shape))

    def step(self, state: CusumState, x) -> CusumState:
        return cusum_step(state, x, self.params)

    def stat(self, state: CusumState) -> np.ndarray:
        return np.asarray(state.s_plus)

    def to_records(self, state: CusumState) -> np.ndarray:
        return np.asarray(state.s_plus, dtype=float)[..., None]

    def from_records(self, records: np.ndarray, reference=None) -> CusumState:
        return CusumState(np.array(records[..., 0], dtype=float))

    def param_block(self) -> bytes:
        return struct.pack("<d", self.params.mu)

    @classmethod
    def from_param_block(cls, block: bytes) -> CusumFamily:
        (mu,) = struct.unpack("<d", block)
        return cls(CusumParams(mu))

    def describe(self) -> str:
        return f"cusum(mu={self.params.mu:g})"


_ADAPTIVE_FIELDS = ("s1", "s2", "t1", "t2", "c1", "c2", "x_prev")


@dataclass(frozen=True)
class AdaptiveFamily:
    """Two-sided adaptive CUSUM; records hold (S1, S2, T1, T2, C1, C2, X)."""

    params: AdaptiveParams = AdaptiveParams()

    kind = "adaptive"
    tag = 2
    reference_size = 0
    field_names = _ADAPTIVE_FIELDS
    n_fields = 7

    def cold_state(self, shape, reference=None) -> AdaptiveCusumState:
        return AdaptiveCusumState(*(np.zeros(shape) for _ in range(7)))

    def step(self, state, x):
        return adaptive_cusum_step(state, x, self.params)

    def stat(self, state) -> np.ndarray:
        return np.asarray(adaptive_stat(state))

    def to_records(self, state) -> np.ndarray:
        return np.stack([np.asarray(getattr(state, f), dtype=float) for f in _ADAPTIVE_FIELDS], axis=-1)

    def from_records(self, records: np.ndarray, reference=None) -> AdaptiveCusumState:
        cols = {f: np.array(records[..., k], dtype=float) for k, f in enumerate(_ADAPTIVE_FIELDS)}
        return AdaptiveCusumState(**cols)

    def param_block(self) -> bytes:
        p = self.params
        return struct.pack("<3d", p.rho, p.s0, p.t0)

    @classmethod
    def from_param_block(cls, block: bytes) -> AdaptiveFamily:
        return cls(AdaptiveParams(*struct.unpack("<3d", block)))

    def describe(self) -> str:
        p = self.params
        return f"adaptive(rho={p.rho:g}, s0={p.s0:g}, t0={p.t0:g})"
