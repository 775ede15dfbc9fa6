"""Run-length simulation, control-limit calibration and ARL tables.

Simulations are vectorized over a batch of replications: each tick updates a
(replications, m) panel of local states and evaluates the global statistic
row by row. Every (replication, stream) cell draws from its own substream, so
a replication's outcome never depends on which batch or worker ran it.

Calibration simulates in-control traces once and keeps only the record
values of G_t (``RecordMaxTrace``). The first passage over any limit h is the
first record above h, so the run length at every candidate h is available
without re-simulating, and the search for h runs on common random numbers.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import ordered_map
from .global_stats import MaxStat, QuantileGt, SoftThreshold, SumStat, ZouGz
from .nonparametric import NpBatchState
from .pool import SteadyStatePool
from .streams import NORMAL, ScenarioConfig, StreamSpec, build_scenario, sample_block, sample_ic, substream

__all__ = [
    "MonitorScheme",
    "make_global",
    "RecordMaxTrace",
    "RunRecord",
    "ArlRow",
    "CalibrationError",
    "simulate_ic_traces",
    "simulate_ic_trace",
    "arl_at",
    "calibrate",
    "calibrate_from_traces",
    "calibrate_many",
    "run_lengths",
    "simulate_oc_run",
    "arl1_table",
    "g_trace",
    "initial_state",
]

log = logging.getLogger(__name__)

BATCH = 100  # replications per work unit; fixed so output ignores worker count
CHUNK = 128  # ticks of observations drawn per substream call
MAX_ATTEMPTS = 10_000


class CalibrationError(RuntimeError):
    pass


def make_global(kind: str, pool: SteadyStatePool, m: int, b: float | None = None):
    """Global statistic by name: quantile, zou, soft (needs b), max, sum."""
    if kind == "quantile":
        return QuantileGt.from_pool(pool, m)
    if kind == "zou":
        return ZouGz(pool)
    if kind == "soft":
        if b is None:
            raise ValueError("soft thresholding needs b")
        return SoftThreshold(float(b))
    if kind == "max":
        return MaxStat()
    if kind == "sum":
        return SumStat()
    raise ValueError(f"unknown global statistic {kind!r}")


@dataclass
class MonitorScheme:
    family: object
    global_kind: object
    pool: SteadyStatePool
    m: int
    h: float | None = None
    target_arl0: float | None = None

    def __post_init__(self):
        if self.pool.family != self.family:
            raise ValueError(
                f"pool holds {self.pool.family.describe()} states but the scheme uses {self.family.describe()}"
            )
        table = getattr(self.global_kind, "table", None)
        if table is not None and table.m != self.m:
            raise ValueError(f"quantile table is for m={table.m}, scheme has m={self.m}")

    @classmethod
    def build(cls, family, kind: str, pool: SteadyStatePool, m: int, b: float | None = None, h=None):
        return cls(family, make_global(kind, pool, m, b), pool, m, h)

    @property
    def scheme_id(self) -> str:
        return f"{self.family.describe()}/{self.global_kind.label}"


@dataclass
class RecordMaxTrace:
    """Record values of G_t over ``1..horizon`` for one replication."""

    replication: int
    times: np.ndarray
    values: np.ndarray
    horizon: int
    censored: bool = True  # observed to the horizon; passages beyond it are censored

    def first_passage(self, h: float) -> tuple[int, bool]:
        k = np.searchsorted(self.values, h, side="right")
        if k == self.values.size:
            return self.horizon, True
        return int(self.times[k]), False


@dataclass
class RunRecord:
    replication: int
    run_length: int
    censored: bool
    discards: int = 0


@dataclass
class ArlRow:
    scheme_id: str
    global_kind: str
    m: int
    m1: int
    scenario_id: str
    target_arl0: float
    h: float
    replications: int
    mean_rl: float
    sd_rl: float
    censored_fraction: float
    discard_rate: float
    wall_seconds: float
    error: str | None = field(default=None, compare=False)


# --- batch simulation core -------------------------------------------------


def _take(state, keep):
    if isinstance(state, NpBatchState):
        return state.take(keep)
    return dataclasses.replace(state, **{f.name: getattr(state, f.name)[keep] for f in dataclasses.fields(state)})


class _Batch:
    """Generators and local states for a batch of replications."""

    def __init__(self, family, pool, streams, seed, reps, attempts):
        self.family = family
        self.streams = streams
        self.reps = np.asarray(reps)
        m = len(streams)
        self.gens = [[substream(seed, r, i, a) for i in range(m)] for r, a in zip(reps, attempts)]
        idx = np.array([[g.integers(pool.size) for g in row] for row in self.gens], dtype=np.int64)
        idx = idx.reshape(len(reps), m)
        ref = None
        n_ref = family.reference_size
        if n_ref:
            ref = np.array(
                [[sample_ic(streams[i].ic, g, n_ref) for i, g in enumerate(row)] for row in self.gens]
            ).reshape(len(reps), m, n_ref)
        self.state = family.from_records(pool.snapshots[idx], ref)

    def observations(self, t_start: int, size: int) -> np.ndarray:
        """(size, R, m) block of observations for ticks t_start .. t_start+size-1."""
        out = np.empty((len(self.gens), len(self.streams), size))
        for r, row in enumerate(self.gens):
            for i, g in enumerate(row):
                out[r, i] = sample_block(self.streams[i], t_start, size, g)
        return np.ascontiguousarray(out.transpose(2, 0, 1))

    def step(self, x: np.ndarray) -> np.ndarray:
        self.state = self.family.step(self.state, x)
        return self.family.stat(self.state)

    def keep(self, mask: np.ndarray) -> None:
        self.state = _take(self.state, mask)
        self.gens = [g for g, k in zip(self.gens, mask) if k]
        self.reps = self.reps[mask]


def _trace_unit(ctx, reps):
    family, pool, kinds, streams, seed, horizon = ctx
    batch = _Batch(family, pool, streams, seed, reps, [0] * len(reps))
    nk, nr = len(kinds), len(reps)
    runmax = np.full((nk, nr), -np.inf)
    bp_t = [[[] for _ in range(nr)] for _ in range(nk)]
    bp_v = [[[] for _ in range(nr)] for _ in range(nk)]
    t = 0
    while t < horizon:
        size = min(CHUNK, horizon - t)
        xs = batch.observations(t + 1, size)
        for k in range(size):
            t += 1
            w = batch.step(xs[k])
            for j, kind in enumerate(kinds):
                g = kind.evaluate(w)
                new = g > runmax[j]
                if new.any():
                    for r in np.flatnonzero(new):
                        bp_t[j][r].append(t)
                        bp_v[j][r].append(g[r])
                    runmax[j] = np.where(new, g, runmax[j])
    return [
        [
            RecordMaxTrace(int(rep), np.array(bp_t[j][r], dtype=np.int64), np.array(bp_v[j][r]), horizon)
            for r, rep in enumerate(reps)
        ]
        for j in range(nk)
    ]


def _passage_unit(ctx, reps):
    """Run lengths for one batch, redrawing replications that alarm by tau."""
    family, pool, kind, streams, seed, h, horizon = ctx
    tau = max((s.change_point for s in streams), default=0)
    pending = np.asarray(reps)
    attempts = np.zeros(len(reps), dtype=np.int64)
    results: dict[int, RunRecord] = {}
    while pending.size:
        if attempts.max() >= MAX_ATTEMPTS:
            raise RuntimeError(f"more than {MAX_ATTEMPTS} false alarms before the change point; h={h} too low")
        batch = _Batch(family, pool, streams, seed, pending, attempts)
        att = attempts.copy()
        active = np.ones(pending.size, dtype=bool)  # indexes the current (compacted) batch
        alive_reps = pending.copy()
        alive_att = att.copy()
        redo = []
        t = 0
        while t < tau + horizon and alive_reps.size:
            size = min(CHUNK, tau + horizon - t)
            xs = batch.observations(t + 1, size)
            for k in range(size):
                t += 1
                g = kind.evaluate(batch.step(xs[k]))
                hit = active & (g > h)
                for r in np.flatnonzero(hit):
                    rep = int(alive_reps[r])
                    if t <= tau:
                        redo.append((rep, int(alive_att[r]) + 1))
                    else:
                        results[rep] = RunRecord(rep, t - tau, False, int(alive_att[r]))
                active &= ~hit
                if not active.any():
                    break
            if not active.any():
                break
            if active.sum() < 0.5 * active.size:
                batch.keep(active)
                alive_reps = alive_reps[active]
                alive_att = alive_att[active]
                active = np.ones(alive_reps.size, dtype=bool)
        for r in np.flatnonzero(active):
            rep = int(alive_reps[r])
            results[rep] = RunRecord(rep, horizon, True, int(alive_att[r]))
        redo.sort()
        pending = np.array([r for r, _ in redo], dtype=np.int64)
        attempts = np.array([a for _, a in redo], dtype=np.int64)
    return [results[int(r)] for r in reps]


def _units(n: int, first: int = 0):
    return [list(range(s, min(s + BATCH, first + n))) for s in range(first, first + n, BATCH)]


def _ic_streams(m: int, streams):
    if streams is None:
        return [StreamSpec(NORMAL)] * m
    streams = list(streams)
    if len(streams) != m:
        raise ValueError(f"expected {m} streams, got {len(streams)}")
    # in-control versions of the given streams
    return [StreamSpec(s.ic) for s in streams]


def simulate_ic_traces(family, pool, kinds: Sequence, m: int, num_traces: int, T_max: int,
                       seed: int = 0, workers: int = 1, streams=None) -> list[list[RecordMaxTrace]]:
    """Record-max traces for several global statistics on shared simulations."""
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    ctx = (family, pool, list(kinds), _ic_streams(m, streams), seed, int(T_max))
    parts = ordered_map(_trace_unit, _units(num_traces), workers, shared=ctx)
    return [[tr for part in parts for tr in part[j]] for j in range(len(kinds))]


def simulate_ic_trace(scheme: MonitorScheme, T_max: int, seed: int = 0, replication: int = 0,
                      streams=None) -> RecordMaxTrace:
    ctx = (scheme.family, scheme.pool, [scheme.global_kind], _ic_streams(scheme.m, streams), seed, int(T_max))
    return _trace_unit(ctx, [replication])[0][0]


def arl_at(h: float, traces: Sequence[RecordMaxTrace]) -> tuple[float, float]:
    """Mean first-passage time over ``h`` (censored runs count as the horizon)."""
    if not traces:
        raise ValueError("no traces")
    total = 0
    censored = 0
    for tr in traces:
        rl, c = tr.first_passage(h)
        total += rl
        censored += c
    return total / len(traces), censored / len(traces)


def calibrate_from_traces(traces: Sequence[RecordMaxTrace], target_arl0: float, rel_tol: float = 0.02) -> float:
    """Control limit whose trace ARL is within ``rel_tol`` of the target.

    ARL(h) is a nondecreasing step function that only changes at record
    values, so bisection over the sorted record values is exact. Of the two
    limits bracketing the target, the one with ARL closer to it is returned.
    """
    cand = np.unique(np.concatenate([tr.values for tr in traces]))
    if cand.size == 0:
        raise CalibrationError("traces hold no record values")
    top_arl, top_cens = arl_at(cand[-1], traces)
    if top_arl < target_arl0:
        raise CalibrationError(
            f"target ARL0 {target_arl0} unreachable: ARL at the largest record is {top_arl:.1f}"
        )
    lo, hi = 0, cand.size - 1  # invariant: arl(cand[hi]) >= target
    while lo < hi:
        mid = (lo + hi) // 2
        if arl_at(cand[mid], traces)[0] >= target_arl0:
            hi = mid
        else:
            lo = mid + 1
    options = [hi - 1, hi] if hi > 0 else [hi]
    scored = []
    for k in options:
        a, c = arl_at(cand[k], traces)
        scored.append((abs(a - target_arl0), k, a, c))
    err, k, a, cens = min(scored)
    if cens > 0.2:
        raise CalibrationError(f"{cens:.0%} of traces censored at h={cand[k]:.4g}; increase T_max")
    if err > rel_tol * target_arl0:
        raise CalibrationError(
            f"no limit within {rel_tol:.1%} of ARL0={target_arl0}: closest ARL {a:.2f}; use more traces"
        )
    return float(cand[k])


def _check_calibration_args(target_arl0, num_traces, T_max):
    if T_max is None:
        T_max = int(round(20 * target_arl0))
    if T_max < 10 * target_arl0:
        raise ValueError(f"T_max={T_max} is below 10 x ARL0; censoring would bias the calibration")
    if num_traces < 100:
        raise ValueError("calibration needs at least 100 traces")
    return T_max


def calibrate(scheme: MonitorScheme, target_arl0: float, num_traces: int = 1000, T_max: int | None = None,
              rel_tol: float = 0.02, seed: int = 0, workers: int = 1, streams=None) -> float:
    """Monte-Carlo control limit for an in-control ARL target; sets ``scheme.h``."""
    return calibrate_many([scheme], target_arl0, num_traces, T_max, rel_tol, seed, workers, streams)[0]


def calibrate_many(schemes: Sequence[MonitorScheme], target_arl0: float, num_traces: int = 1000,
                   T_max: int | None = None, rel_tol: float = 0.02, seed: int = 0, workers: int = 1,
                   streams=None) -> list[float]:
    """Calibrate several schemes; schemes sharing family, pool and m share traces."""
    T_max = _check_calibration_args(target_arl0, num_traces, T_max)
    groups: dict[tuple, list[int]] = {}
    for k, s in enumerate(schemes):
        groups.setdefault((s.family, id(s.pool), s.m), []).append(k)
    hs: list[float] = [math.nan] * len(schemes)
    for idx in groups.values():
        first = schemes[idx[0]]
        traces = simulate_ic_traces(first.family, first.pool, [schemes[k].global_kind for k in idx], first.m,
                                    num_traces, T_max, seed, workers, streams)
        for k, trs in zip(idx, traces):
            hs[k] = calibrate_from_traces(trs, target_arl0, rel_tol)
            schemes[k].h = hs[k]
            schemes[k].target_arl0 = target_arl0
            log.info("calibrated %s: h=%.6g", schemes[k].scheme_id, hs[k])
    return hs


def run_lengths(scheme: MonitorScheme, streams: Sequence[StreamSpec], h: float, replications: int,
                seed: int = 0, T_max: int = 10_000, workers: int = 1, first_replication: int = 0) -> list[RunRecord]:
    """First-passage run lengths over ``h``, counted from the change point.

    Replications that alarm at or before the change point are discarded and
    redrawn from fresh substreams; ``RunRecord.discards`` counts them.
    """
    streams = list(streams)
    if len(streams) != scheme.m:
        raise ValueError(f"expected {scheme.m} streams, got {len(streams)}")
    ctx = (scheme.family, scheme.pool, scheme.global_kind, streams, seed, float(h), int(T_max))
    parts = ordered_map(_passage_unit, _units(replications, first_replication), workers, shared=ctx)
    return [rec for part in parts for rec in part]


def simulate_oc_run(scheme: MonitorScheme, scenario, h: float, seed: int = 0, replication: int = 0,
                    T_max: int = 10_000) -> RunRecord:
    streams = build_scenario(scenario) if isinstance(scenario, ScenarioConfig) else list(scenario)
    ctx = (scheme.family, scheme.pool, scheme.global_kind, streams, seed, float(h), int(T_max))
    return _passage_unit(ctx, [replication])[0]


def _scenario_id(sc: ScenarioConfig) -> str:
    parts = [sc.oc_kind.value, f"m1={sc.m1}", f"tau={sc.change_point}", f"ic={sc.ic_mixture}"]
    return ";".join(parts)


def arl1_table(schemes: Sequence[MonitorScheme], scenarios: Sequence[ScenarioConfig], replications: int,
               seed: int = 0, T_max: int | None = None, workers: int = 1, timing: bool = True) -> list[ArlRow]:
    """One row of run-length summaries per (scheme, scenario).

    Every cell uses the same simulation seed, so schemes are compared on
    common random numbers. A failing cell yields a row with NaN statistics
    and ``error`` set; the remaining cells still run.
    """
    rows = []
    for scheme in schemes:
        if scheme.h is None:
            raise ValueError(f"{scheme.scheme_id} has no control limit; calibrate first")
        horizon = T_max or int(round(20 * (scheme.target_arl0 or 500)))
        for sc in scenarios:
            t0 = time.perf_counter()
            err = None
            try:
                if sc.m != scheme.m:
                    raise ValueError(f"scenario m={sc.m} does not match scheme m={scheme.m}")
                recs = run_lengths(scheme, build_scenario(sc), scheme.h, replications, seed, horizon, workers)
                rl = np.array([r.run_length for r in recs], dtype=float)
                mean = float(rl.mean())
                sd = float(rl.std(ddof=1)) if rl.size > 1 else 0.0
                cens = float(np.mean([r.censored for r in recs]))
                disc = sum(r.discards for r in recs)
                disc_rate = disc / (disc + len(recs))
            except Exception as exc:  # noqa: BLE001 - reported per cell
                log.error("cell %s / %s failed: %s", scheme.scheme_id, _scenario_id(sc), exc)
                err = str(exc)
                mean = sd = cens = disc_rate = math.nan
            wall = time.perf_counter() - t0 if timing else math.nan
            rows.append(ArlRow(
                scheme.scheme_id, scheme.global_kind.kind, scheme.m, sc.m1, _scenario_id(sc),
                float(scheme.target_arl0) if scheme.target_arl0 else math.nan, float(scheme.h), replications,
                mean, sd, cens, disc_rate, wall, err,
            ))
    return rows


def initial_state(scheme: MonitorScheme, seed: int = 0, replication: int = 0, reference=None):
    """Pool-drawn initial states for one (1, m) panel.

    Draws exactly what replication ``replication`` of a simulation with
    ``seed`` draws first, so a simulated panel replays to the same G_t path.
    ``reference`` (n, m) seeds the nonparametric history.
    """
    fam = scheme.family
    gens = [substream(seed, replication, i, 0) for i in range(scheme.m)]
    idx = np.array([g.integers(scheme.pool.size) for g in gens], dtype=np.int64)
    ref = None
    if fam.reference_size:
        if reference is None:
            raise ValueError("the nonparametric statistic needs reference observations")
        ref = np.asarray(reference, dtype=float).T[None, :, :]
    return fam.from_records(scheme.pool.snapshots[idx][None, :, :], ref)


def g_trace(scheme: MonitorScheme, observations: np.ndarray, seed: int = 0, replication: int = 0,
            reference: np.ndarray | None = None) -> np.ndarray:
    """G_t along a given (T, m) observation panel."""
    obs = np.asarray(observations, dtype=float)
    fam = scheme.family
    state = initial_state(scheme, seed, replication, reference)
    out = np.empty(obs.shape[0])
    for t in range(obs.shape[0]):
        state = fam.step(state, obs[t][None, :])
        out[t] = scheme.global_kind.evaluate(fam.stat(state))[0]
    return out
