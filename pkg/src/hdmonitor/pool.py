"""Steady-state pools of local-statistic states.

A pool holds K state snapshots, each taken after ``burn_in`` in-control steps
from a cold start. Monitoring starts every stream from a snapshot drawn with
replacement, so the in-control law of each local statistic is (close to)
stationary from the first tick on and one table of expected quantiles serves
every time point.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._parallel import ordered_map
from .local import AdaptiveFamily, CusumFamily
from .nonparametric import NonparametricFamily
from .streams import NORMAL, sample_ic, substream

__all__ = [
    "PoolConfig",
    "SteadyStatePool",
    "QuantileTable",
    "generate_pool",
    "draw_initial_state",
    "quantile_positions",
    "expected_quantiles",
    "empirical_cdf",
    "save_pool",
    "load_pool",
    "PoolFileError",
    "PoolFormatError",
    "PoolVersionError",
    "PoolTruncatedError",
    "PoolChecksumError",
    "PoolKindMismatchError",
    "FAMILIES",
]

FAMILIES = {cls.tag: cls for cls in (CusumFamily, AdaptiveFamily, NonparametricFamily)}

MAGIC = b"SSPOOL"
FORMAT_VERSION = 1
# pool sequences use their own stream id so they never coincide with a
# monitoring replication that happens to share the seed
_POOL_STREAM = 2**32 - 1
_CHUNK = 2000


@dataclass(frozen=True)
class PoolConfig:
    family: object
    pool_size: int = 20_000
    burn_in: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")
        if self.burn_in < 1:
            raise ValueError(f"burn_in must be >= 1, got {self.burn_in}")


@dataclass
class SteadyStatePool:
    config: PoolConfig
    snapshots: np.ndarray  # (K, n_fields)
    sorted_values: np.ndarray  # (K,)

    @property
    def family(self):
        return self.config.family

    @property
    def size(self) -> int:
        return self.sorted_values.size

    def __eq__(self, other):
        if not isinstance(other, SteadyStatePool):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.snapshots, other.snapshots)
            and np.array_equal(self.sorted_values, other.sorted_values)
        )


@dataclass(frozen=True)
class QuantileTable:
    m: int
    positions: np.ndarray
    expected_q: np.ndarray


def _pool_chunk(config: PoolConfig, start: int, stop: int) -> np.ndarray:
    fam = config.family
    n_ref = fam.reference_size
    gens = [substream(config.seed, k, _POOL_STREAM) for k in range(start, stop)]
    ref = np.stack([g.standard_normal(n_ref) for g in gens]) if n_ref else None
    obs = np.stack([sample_ic(NORMAL, g, config.burn_in) for g in gens])
    state = fam.cold_state((stop - start,), reference=ref)
    for t in range(config.burn_in):
        state = fam.step(state, obs[:, t])
    return fam.to_records(state)


def generate_pool(config: PoolConfig, workers: int = 1) -> SteadyStatePool:
    """Run K independent N(0,1) sequences for ``burn_in`` steps each."""
    bounds = [(s, min(s + _CHUNK, config.pool_size)) for s in range(0, config.pool_size, _CHUNK)]
    parts = ordered_map(_pool_chunk_star, bounds, workers, shared=config)
    snaps = np.concatenate(parts, axis=0)
    return _finish(config, snaps)


def _pool_chunk_star(config, bounds):
    return _pool_chunk(config, *bounds)


def _finish(config: PoolConfig, snaps: np.ndarray) -> SteadyStatePool:
    fam = config.family
    shape = (snaps.shape[0],)
    ref = np.zeros(shape + (fam.reference_size,)) if fam.reference_size else None
    values = np.asarray(fam.stat(fam.from_records(snaps, ref)), dtype=float).reshape(-1)
    return SteadyStatePool(config, snaps, np.sort(values))


def draw_indices(pool: SteadyStatePool, rng: np.random.Generator, size=None):
    return rng.integers(pool.size, size=size)


def draw_initial_state(pool: SteadyStatePool, rng: np.random.Generator, reference=None):
    """One live state from a uniformly drawn snapshot.

    The nonparametric family additionally needs ``n`` reference observations;
    if none are given they are drawn from N(0,1) with ``rng``.
    """
    fam = pool.family
    rec = pool.snapshots[draw_indices(pool, rng)]
    if fam.reference_size:
        if reference is None:
            reference = rng.standard_normal(fam.reference_size)
        return fam.from_records(rec[None, :], np.asarray(reference, dtype=float)[None, :])
    return fam.from_records(rec)


def quantile_positions(m: int) -> np.ndarray:
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    i = np.arange(1, m + 1, dtype=float)
    return (i - 0.75) / (m - 0.5)


def expected_quantiles(pool: SteadyStatePool, m: int) -> QuantileTable:
    """Linear-interpolation sample quantiles of the pool values at p_i.

    The p-quantile sits at 1-based position ``1 + p (K - 1)`` of the sorted values.
    """
    p = quantile_positions(m)
    v = pool.sorted_values
    pos = p * (v.size - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, v.size - 1)
    frac = pos - lo
    q = v[lo] + frac * (v[hi] - v[lo])
    return QuantileTable(m, p, q)


def empirical_cdf(pool: SteadyStatePool, value):
    """Mid-rank empirical CDF, clamped to [1/(2K), 1 - 1/(2K)]."""
    v = pool.sorted_values
    k = v.size
    below = np.searchsorted(v, value, side="left")
    ties = np.searchsorted(v, value, side="right") - below
    u = (below + ties / 2.0) / k
    return np.clip(u, 0.5 / k, 1.0 - 0.5 / k)


# --- persistence ------------------------------------------------------------


class PoolFileError(Exception):
    pass


class PoolFormatError(PoolFileError):
    pass


class PoolVersionError(PoolFileError):
    pass


class PoolTruncatedError(PoolFileError):
    pass


class PoolChecksumError(PoolFileError):
    pass


class PoolKindMismatchError(PoolFileError):
    pass


def _checksum(body: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(body, digest_size=8).digest(), "little")


def save_pool(pool: SteadyStatePool, destination) -> None:
    cfg = pool.config
    fam = cfg.family
    params = fam.param_block()
    header = MAGIC + struct.pack("<3I", FORMAT_VERSION, fam.tag, len(params)) + params
    header += struct.pack("<4Q", pool.size, cfg.burn_in, cfg.seed, pool.snapshots.shape[1])
    body = np.ascontiguousarray(pool.snapshots, dtype="<f8").tobytes()
    body += np.ascontiguousarray(pool.sorted_values, dtype="<f8").tobytes()
    Path(destination).write_bytes(header + body + struct.pack("<Q", _checksum(body)))


def load_pool(source, expected_kind: str | None = None) -> SteadyStatePool:
    raw = Path(source).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise PoolFormatError(f"{source}: not a pool file (bad magic)")
    off = len(MAGIC)
    if len(raw) < off + 12:
        raise PoolTruncatedError(f"{source}: header truncated")
    version, tag, plen = struct.unpack_from("<3I", raw, off)
    off += 12
    if version != FORMAT_VERSION:
        raise PoolVersionError(f"{source}: format version {version}, expected {FORMAT_VERSION}")
    if tag not in FAMILIES:
        raise PoolFormatError(f"{source}: unknown statistic tag {tag}")
    if len(raw) < off + plen + 32:
        raise PoolTruncatedError(f"{source}: header truncated")
    family = FAMILIES[tag].from_param_block(raw[off : off + plen])
    off += plen
    if expected_kind is not None and family.kind != expected_kind:
        raise PoolKindMismatchError(f"{source}: pool holds {family.kind!r} states, expected {expected_kind!r}")
    k, burn_in, seed, n_fields = struct.unpack_from("<4Q", raw, off)
    off += 32
    body_len = 8 * k * (n_fields + 1)
    if len(raw) < off + body_len + 8:
        raise PoolTruncatedError(f"{source}: expected {body_len} body bytes plus checksum")
    if len(raw) > off + body_len + 8:
        raise PoolFormatError(f"{source}: trailing bytes after checksum")
    body = raw[off : off + body_len]
    (stored,) = struct.unpack_from("<Q", raw, off + body_len)
    if stored != _checksum(body):
        raise PoolChecksumError(f"{source}: checksum mismatch")
    vals = np.frombuffer(body, dtype="<f8").astype(float)
    snaps = vals[: k * n_fields].reshape(k, n_fields)
    config = PoolConfig(family, pool_size=int(k), burn_in=int(burn_in), seed=int(seed))
    return SteadyStatePool(config, snaps, vals[k * n_fields :].copy())
