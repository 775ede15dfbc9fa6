"""Distribution-free self-starting CUSUM built on rank regions.

Each observation is classified against sample quantiles of everything seen
so far (the n reference points plus all earlier observations), once on a
left-to-right partition into ``d`` regions and once on a center-outward
partition. Four CUSUMs compare the observed cumulative cell frequencies with
Bayes-smoothed estimates of the post-change cell probabilities; the local
statistic is the largest of the four.

Region membership only needs ``r``, the number of history values strictly
below the new observation: the k-th threshold is the ``ceil(k N / D)``-th
order statistic, and it lies strictly below ``x`` iff ``r >= ceil(k N / D)``.
This keeps the whole statistic invariant under strictly increasing
transformations of the data.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit

__all__ = [
    "NpParams",
    "NpState",
    "default_alphas",
    "np_thresholds",
    "np_indicators",
    "np_init",
    "np_step",
    "np_stat",
    "NonparametricFamily",
    "NpBatchState",
]

# component order for the four CUSUMs: (k1, k2) = (1,1), (1,2), (2,1), (2,2)


def default_alphas(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Linearly increasing / decreasing priors, each with total mass 1."""
    j = np.arange(1, d + 1, dtype=float)
    norm = d * (d + 1) / 2.0
    return j / norm, (d + 1 - j) / norm


@dataclass(frozen=True)
class NpParams:
    d: int = 20
    n: int = 40
    alpha1: tuple = None
    alpha2: tuple = None

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"d must be at least 2, got {self.d}")
        if self.n < 2 * self.d - 1:
            raise ValueError(f"n={self.n} < 2d-1={2 * self.d - 1}: the statistic is not distribution-free")
        a1, a2 = default_alphas(self.d)
        for name, default in (("alpha1", a1), ("alpha2", a2)):
            val = getattr(self, name)
            val = default if val is None else np.asarray(val, dtype=float)
            if val.shape != (self.d,) or not np.all(val > 0):
                raise ValueError(f"{name} must hold {self.d} positive values")
            object.__setattr__(self, name, tuple(float(v) for v in val))

    @property
    def alpha(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])


@dataclass
class NpState:
    history: np.ndarray  # sorted ascending
    shat: np.ndarray = field(default_factory=lambda: np.zeros(4))
    n_count: np.ndarray = None
    n_cell: np.ndarray = None
    y_prev: np.ndarray = None

    def __post_init__(self):
        d = None
        for arr in (self.n_cell, self.y_prev):
            if arr is not None:
                d = np.shape(arr)[-1]
        if d is None:
            raise ValueError("NpState needs n_cell or y_prev to fix d")
        if self.n_count is None:
            self.n_count = np.zeros(4)
        if self.n_cell is None:
            self.n_cell = np.zeros((4, d))
        if self.y_prev is None:
            self.y_prev = np.zeros((2, d))


def _order_positions(size: int, parts: int) -> np.ndarray:
    k = np.arange(1, parts)
    return -(-(k * size) // parts)  # ceil(k * size / parts), exact in integers


def np_thresholds(history, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample quantiles at j/d (d-1 values) and k/(2d) (2d-1 values).

    Pure order statistics: the q-quantile is the ceil(qN)-th smallest value.
    """
    h = np.sort(np.asarray(history, dtype=float))
    if h.size < 2 * d - 1:
        raise ValueError(f"history of size {h.size} is too small for d={d} (need {2 * d - 1})")
    q1 = h[_order_positions(h.size, d) - 1]
    q2 = h[_order_positions(h.size, 2 * d) - 1]
    return q1, q2


def np_indicators(x: float, q1, q2) -> tuple[np.ndarray, np.ndarray]:
    """One-hot region memberships of ``x`` (left-to-right, center-outward)."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d = q1.size + 1
    y1 = np.zeros(d)
    y1[int(np.sum(q1 < x))] = 1.0
    u = int(np.sum(q2 < x))  # fine interval index among 2d intervals
    y2 = np.zeros(d)
    y2[d - 1 - u if u <= d - 1 else u - d] = 1.0
    return y1, y2


def np_init(reference, params: NpParams) -> NpState:
    ref = np.asarray(reference, dtype=float)
    if ref.size != params.n:
        raise ValueError(f"reference must have n={params.n} values, got {ref.size}")
    d = params.d
    return NpState(history=np.sort(ref), n_cell=np.zeros((4, d)), y_prev=np.zeros((2, d)))


def np_stat(state) -> float:
    return float(np.max(state.shat))


def np_step(state: NpState, x: float, params: NpParams) -> NpState:
    d = params.d
    batch = NpBatchState(
        hist=np.asarray(state.history, dtype=float)[None, :].copy(),
        hlen=np.array([state.history.size], dtype=np.int64),
        shat=np.array(state.shat, dtype=float)[None, :].copy(),
        ncount=np.array(state.n_count, dtype=float)[None, :].copy(),
        ncell=np.array(state.n_cell, dtype=float).reshape(1, 4, d).copy(),
        yprev=np.array(state.y_prev, dtype=float).reshape(1, 2, d).copy(),
    )
    batch.ensure_capacity(1)
    _np_tick(batch.hist, batch.hlen, batch.shat, batch.ncount, batch.ncell, batch.yprev,
             np.array([x], dtype=float), params.alpha, *_constants(d))
    return NpState(
        history=batch.hist[0, : batch.hlen[0]].copy(),
        shat=batch.shat[0].copy(),
        n_count=batch.ncount[0].copy(),
        n_cell=batch.ncell[0].copy(),
        y_prev=batch.yprev[0].copy(),
    )


def _constants(d: int):
    j = np.arange(1, d, dtype=float)
    weight = d / (j * (d - j))  # (1/d) * d^2 / (j (d - j))
    return weight, j / d


@njit(cache=True)
def _np_tick(hist, hlen, shat, ncount, ncell, yprev, x, alpha, weight, frac):
    """Advance every row of a flat batch by one observation, in place."""
    nb = x.shape[0]
    d = alpha.shape[1]
    asum0 = alpha[0].sum()
    asum1 = alpha[1].sum()
    for b in range(nb):
        # counts accumulate while the component stayed positive, else reset
        for c in range(4):
            k1 = c // 2
            if shat[b, c] > 0.0:
                ncount[b, c] += 1.0
                for l in range(d):
                    ncell[b, c, l] += yprev[b, k1, l]
            else:
                ncount[b, c] = 0.0
                for l in range(d):
                    ncell[b, c, l] = 0.0

        n = hlen[b]
        xv = x[b]
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) // 2
            if hist[b, mid] < xv:
                lo = mid + 1
            else:
                hi = mid
        r = lo

        idx1 = 0
        for j in range(1, d):
            if (j * n + d - 1) // d <= r:
                idx1 += 1
        u = 0
        for k in range(1, 2 * d):
            if (k * n + 2 * d - 1) // (2 * d) <= r:
                u += 1
        if u <= d - 1:
            idx2 = d - 1 - u
        else:
            idx2 = u - d

        for c in range(4):
            k1 = c // 2
            k2 = c % 2
            idx = idx1 if k1 == 0 else idx2
            denom = (asum0 if k2 == 0 else asum1) + ncount[b, c]
            cum = 0.0
            inc = 0.0
            for j in range(1, d):
                cum += alpha[k2, j - 1] + ncell[b, c, j - 1]
                if idx < j:
                    inc += weight[j - 1] * math.log((cum / denom) / frac[j - 1])
                else:
                    inc += weight[j - 1] * math.log(((denom - cum) / denom) / (1.0 - frac[j - 1]))
            s = shat[b, c] + inc
            shat[b, c] = s if s > 0.0 else 0.0

        for i in range(n, r, -1):
            hist[b, i] = hist[b, i - 1]
        hist[b, r] = xv
        hlen[b] = n + 1

        for l in range(d):
            yprev[b, 0, l] = 0.0
            yprev[b, 1, l] = 0.0
        yprev[b, 0, idx1] = 1.0
        yprev[b, 1, idx2] = 1.0


@dataclass
class NpBatchState:
    """Flat batch of nonparametric states; rows are independent streams.

    ``shape`` is the logical (replications, streams) shape the flat rows map to.
    """

    hist: np.ndarray
    hlen: np.ndarray
    shat: np.ndarray
    ncount: np.ndarray
    ncell: np.ndarray
    yprev: np.ndarray
    shape: tuple = None

    def take(self, keep: np.ndarray) -> NpBatchState:
        """Keep the replications (first logical axis) selected by ``keep``."""
        lead = self.shape[0]

        def sel(a):
            return a.reshape((lead, -1) + a.shape[1:])[keep].reshape((-1,) + a.shape[1:])

        kept = int(np.count_nonzero(keep)) if np.asarray(keep).dtype == bool else len(keep)
        return NpBatchState(sel(self.hist), sel(self.hlen), sel(self.shat), sel(self.ncount),
                            sel(self.ncell), sel(self.yprev), (kept,) + tuple(self.shape[1:]))

    def ensure_capacity(self, extra: int) -> None:
        need = int(self.hlen.max()) + extra
        cap = self.hist.shape[1]
        if need <= cap:
            return
        grown = np.empty((self.hist.shape[0], max(need, 2 * cap)))
        grown[:, :cap] = self.hist
        self.hist = grown


@dataclass(frozen=True)
class NonparametricFamily:
    """Family wrapper; records hold (S^, N, N_l, Y_prev) without history."""

    params: NpParams = NpParams()

    kind = "nonparametric"
    tag = 3

    @property
    def reference_size(self) -> int:
        return self.params.n

    @property
    def n_fields(self) -> int:
        return 8 + 6 * self.params.d

    def _empty(self, reference: np.ndarray, shape) -> NpBatchState:
        d = self.params.d
        ref = np.sort(np.asarray(reference, dtype=float).reshape(-1, self.params.n), axis=1)
        nb = ref.shape[0]
        hist = np.empty((nb, self.params.n + 64))
        hist[:, : self.params.n] = ref
        return NpBatchState(
            hist=hist,
            hlen=np.full(nb, self.params.n, dtype=np.int64),
            shat=np.zeros((nb, 4)),
            ncount=np.zeros((nb, 4)),
            ncell=np.zeros((nb, 4, d)),
            yprev=np.zeros((nb, 2, d)),
            shape=tuple(shape),
        )

    def cold_state(self, shape, reference=None) -> NpBatchState:
        if reference is None:
            raise ValueError("the nonparametric statistic needs n reference observations per stream")
        return self._empty(reference, shape)

    def step(self, state: NpBatchState, x) -> NpBatchState:
        state.ensure_capacity(1)
        _np_tick(state.hist, state.hlen, state.shat, state.ncount, state.ncell, state.yprev,
                 np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1)),
                 self.params.alpha, *_constants(self.params.d))
        return state

    def stat(self, state: NpBatchState) -> np.ndarray:
        return state.shat.max(axis=1).reshape(state.shape)

    def to_records(self, state: NpBatchState) -> np.ndarray:
        nb = state.shat.shape[0]
        rec = np.concatenate(
            [state.shat, state.ncount, state.ncell.reshape(nb, -1), state.yprev.reshape(nb, -1)], axis=1
        )
        return rec.reshape(tuple(state.shape) + (self.n_fields,))

    def from_records(self, records: np.ndarray, reference=None) -> NpBatchState:
        d = self.params.d
        shape = records.shape[:-1]
        rec = records.reshape(-1, self.n_fields)
        state = self.cold_state(shape, reference)
        nb = rec.shape[0]
        state.shat[:] = rec[:, 0:4]
        state.ncount[:] = rec[:, 4:8]
        state.ncell[:] = rec[:, 8 : 8 + 4 * d].reshape(nb, 4, d)
        state.yprev[:] = rec[:, 8 + 4 * d :].reshape(nb, 2, d)
        return state

    def param_block(self) -> bytes:
        p = self.params
        return struct.pack(f"<2I{2 * p.d}d", p.d, p.n, *p.alpha1, *p.alpha2)

    @classmethod
    def from_param_block(cls, block: bytes) -> NonparametricFamily:
        d, n = struct.unpack_from("<2I", block)
        vals = struct.unpack_from(f"<{2 * d}d", block, 8)
        return cls(NpParams(d, n, tuple(vals[:d]), tuple(vals[d:])))

    def describe(self) -> str:
        return f"nonparametric(d={self.params.d}, n={self.params.n})"
