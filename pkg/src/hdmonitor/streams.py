"""Observation models for simulated data streams.

Every random draw in the package comes from a substream derived from a
master seed and an integer key ``(replication, stream, attempt)``. Two
substreams with different keys are statistically independent, and a given
key always reproduces the same sequence, no matter how many workers run or
in which order the substreams are consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "DistributionKind",
    "DistributionSpec",
    "StreamSpec",
    "OcKind",
    "ScenarioConfig",
    "substream",
    "standardization_constants",
    "sample_ic",
    "sample_block",
    "sample_observation",
    "build_scenario",
    "NORMAL",
]

# spawn-key tag for scenario construction; replication keys are 3-tuples
_SCENARIO_KEY = (0x5CE7A810,)


def substream(seed: int, replication: int, stream: int, attempt: int = 0) -> np.random.Generator:
    """Independent generator for one (replication, stream, attempt) cell."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replication), int(stream), int(attempt)))
    return np.random.Generator(np.random.PCG64(ss))


class DistributionKind(str, Enum):
    NORMAL = "normal"
    STUDENT_T = "student_t"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class DistributionSpec:
    """In-control distribution of one stream.

    ``df`` is used only for ``student_t``; ``log_mean``/``log_sd`` only for
    ``lognormal``. With ``standardized`` set the draws are shifted and scaled
    to mean 0 and standard deviation 1.
    """

    kind: DistributionKind = DistributionKind.NORMAL
    df: float = 2.5
    log_mean: float = 1.0
    log_sd: float = 0.5
    standardized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", DistributionKind(self.kind))
        if self.kind is DistributionKind.STUDENT_T and not self.df > 2:
            raise ValueError(f"student_t needs df > 2 for a finite variance, got {self.df}")
        if self.kind is DistributionKind.LOGNORMAL and not self.log_sd > 0:
            raise ValueError(f"lognormal needs log_sd > 0, got {self.log_sd}")


NORMAL = DistributionSpec()


def standardization_constants(spec: DistributionSpec) -> tuple[float, float]:
    """Mean and standard deviation of the raw (unstandardized) distribution."""
    if spec.kind is DistributionKind.NORMAL:
        return 0.0, 1.0
    if spec.kind is DistributionKind.STUDENT_T:
        if spec.df <= 2:
            raise ValueError(f"student_t needs df > 2, got {spec.df}")
        return 0.0, math.sqrt(spec.df / (spec.df - 2.0))
    s2 = spec.log_sd**2
    mean = math.exp(spec.log_mean + s2 / 2.0)
    return mean, math.sqrt(math.expm1(s2)) * mean


def sample_ic(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    if spec.kind is DistributionKind.NORMAL:
        return rng.standard_normal(size)
    if spec.kind is DistributionKind.STUDENT_T:
        raw = rng.standard_t(spec.df, size)
    else:
        raw = rng.lognormal(spec.log_mean, spec.log_sd, size)
    if not spec.standardized:
        return raw
    mean, sd = standardization_constants(spec)
    return (raw - mean) / sd


@dataclass(frozen=True)
class StreamSpec:
    """One stream: IC draws up to ``change_point``, ``scale * Z + shift`` after."""

    ic: DistributionSpec = NORMAL
    shift: float = 0.0
    scale: float = 1.0
    change_point: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.change_point < 0:
            raise ValueError(f"change_point must be >= 0, got {self.change_point}")

    @property
    def is_ic(self) -> bool:
        return self.shift == 0.0 and self.scale == 1.0


def sample_block(stream: StreamSpec, t_start: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Observations for ticks ``t_start .. t_start + size - 1`` (ticks are 1-based)."""
    z = sample_ic(stream.ic, rng, size)
    if stream.is_ic:
        return z
    first_oc = stream.change_point + 1 - t_start
    if first_oc <= 0:
        return stream.scale * z + stream.shift
    if first_oc < size:
        z[first_oc:] = stream.scale * z[first_oc:] + stream.shift
    return z


def sample_observation(stream: StreamSpec, t: int, rng: np.random.Generator) -> float:
    return float(sample_block(stream, t, 1, rng)[0])


class OcKind(str, Enum):
    MEAN_SHIFT = "mean_shift"
    RANDOM_SIGN_SHIFT = "random_sign_shift"
    MIXED_LOCATION_SCALE = "mixed_location_scale"


@dataclass(frozen=True)
class ScenarioConfig:
    """An m-stream experiment in which the last ``m1`` streams change.

    ``ic_mixture`` is ``"normal"`` (all N(0,1)) or ``"mixed"`` (half normal,
    a fifth standardized t(2.5), the rest standardized lognormal(1, 0.5),
    assigned by a seeded permutation).
    """

    m: int
    m1: int = 0
    change_point: int = 0
    oc_kind: OcKind = OcKind.MEAN_SHIFT
    delta: float = 0.5
    gamma: float = 1.5
    ic_mixture: str = "normal"
    seed: int = 0
    t_dist: DistributionSpec = field(default_factory=lambda: DistributionSpec(DistributionKind.STUDENT_T, df=2.5))
    lognormal_dist: DistributionSpec = field(
        default_factory=lambda: DistributionSpec(DistributionKind.LOGNORMAL, log_mean=1.0, log_sd=0.5)
    )

    def __post_init__(self):
        object.__setattr__(self, "oc_kind", OcKind(self.oc_kind))
        if self.m < 1:
            raise ValueError(f"m must be positive, got {self.m}")
        if not 0 <= self.m1 <= self.m:
            raise ValueError(f"m1 must lie in [0, m={self.m}], got {self.m1}")
        if self.ic_mixture not in ("normal", "mixed"):
            raise ValueError(f"unknown ic_mixture {self.ic_mixture!r}")


def build_scenario(config: ScenarioConfig) -> list[StreamSpec]:
    m, m1 = config.m, config.m1
    if not 0 <= m1 <= m:
        raise ValueError(f"m1={m1} outside [0, m={m}]")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(config.seed), spawn_key=_SCENARIO_KEY)))

    ics = [NORMAL] * m
    if config.ic_mixture == "mixed":
        perm = rng.permutation(m)
        n_norm, n_t = m // 2, m // 5
        for i in perm[n_norm : n_norm + n_t]:
            ics[i] = config.t_dist
        for i in perm[n_norm + n_t :]:
            ics[i] = config.lognormal_dist

    tau = config.change_point
    specs = [StreamSpec(ic=ics[i], change_point=tau) for i in range(m)]
    oc = range(m - m1, m)
    if config.oc_kind is OcKind.MEAN_SHIFT:
        for i in oc:
            specs[i] = StreamSpec(ics[i], shift=config.delta, change_point=tau)
    elif config.oc_kind is OcKind.RANDOM_SIGN_SHIFT:
        signs = np.where(rng.random(m1) < 0.5, -1.0, 1.0)
        for i, sgn in zip(oc, signs):
            specs[i] = StreamSpec(ics[i], shift=float(sgn) * config.delta, change_point=tau)
    else:
        n_loc = -(-m1 // 2)
        for k, i in enumerate(oc):
            if k < n_loc:
                specs[i] = StreamSpec(ics[i], shift=config.delta, change_point=tau)
            else:
                specs[i] = StreamSpec(ics[i], scale=config.gamma, change_point=tau)
    return specs
