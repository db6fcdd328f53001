"""RLNC layer-recovery analytics and a Monte Carlo rank oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cache

import numpy as np

from .gf import FieldSpec

TTI_SECONDS = 1e-3

# above this many factors the product is accumulated as a sum of logs
_LOG_SPACE_THRESHOLD = 64


@dataclass(frozen=True)
class DecodeQuery:
    k: int
    n: int
    field: FieldSpec = FieldSpec()

    def __post_init__(self):
        if self.k < 0 or self.n < 0:
            raise ValueError(f"K and N must be non-negative, got K={self.k}, N={self.n}")


@dataclass(frozen=True)
class CodingMatrix:
    """K x N matrix of coding coefficients over ``field``."""

    entries: np.ndarray
    field: FieldSpec = FieldSpec()

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.ndim != 2:
            raise ValueError(f"coding matrix must be 2-D, got shape {arr.shape}")
        if not self.field.contains(arr):
            raise ValueError(f"coding matrix has entries outside GF({self.field.order})")
        object.__setattr__(self, "entries", arr.astype(np.int64))

    @property
    def shape(self):
        return self.entries.shape


@cache
def _checked_order(q: int) -> int:
    return FieldSpec(q).order


def decode_probability(k, n: int | None = None, field: FieldSpec | int = 256) -> float:
    """Probability that K x N uniform random coefficients over GF(q) have rank K.

    ``prod_{j=0}^{K-1} (1 - q^-(N-j))``, which is 0 when N < K and 1 when K == 0.
    Accepts either ``(k, n, field)`` or a single :class:`DecodeQuery`.
    """
    if isinstance(k, DecodeQuery):
        k, n, field = k.k, k.n, k.field
    q = field.order if isinstance(field, FieldSpec) else _checked_order(int(field))
    if k < 0 or n < 0:
        raise ValueError("K and N must be non-negative")
    if k == 0:
        return 1.0
    if n < k:
        return 0.0
    exps = range(n - k + 1, n + 1)
    if k <= _LOG_SPACE_THRESHOLD:
        prob = 1.0
        for e in exps:
            prob *= -math.expm1(-e * math.log(q))
        return prob
    return math.exp(math.fsum(math.log1p(-(q ** -float(e))) for e in exps))


def received_symbols(rate_bps: float, t: int, symbol_size_bits: float,
                     tti_seconds: float = TTI_SECONDS) -> int:
    """Number of coded elements delivered by ``t`` TTIs at ``rate_bps``."""
    if symbol_size_bits <= 0:
        raise ValueError("symbol_size_bits must be positive")
    if tti_seconds <= 0:
        raise ValueError("tti_seconds must be positive")
    if rate_bps < 0 or t < 0:
        raise ValueError("rate and transmission count must be non-negative")
    x = tti_seconds * rate_bps * t / symbol_size_bits
    # absorb binary rounding of exact quotients such as 4.096e6 * 1e-3 * 10 / 4096
    return math.floor(x * (1 + 1e-12) + 1e-12)


def batch_rank(mats: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Rank of each matrix in a ``(T, K, N)`` stack, by Gauss-Jordan elimination."""
    mats = np.array(mats, dtype=np.int64, copy=True)
    if mats.ndim != 3:
        raise ValueError("expected a (T, K, N) stack")
    if mats.shape[2] > mats.shape[1]:
        # fewer pivot sweeps on the transpose
        mats = np.ascontiguousarray(mats.transpose(0, 2, 1))
    trials, rows, cols = mats.shape
    rank = np.zeros(trials, dtype=np.int64)
    if rows == 0 or cols == 0:
        return rank
    tab = field.tables()
    add, mul, neg, inv = (x.astype(np.int64) for x in (tab.add, tab.mul, tab.neg, tab.inv))
    row_ids = np.arange(rows)
    for c in range(cols):
        eligible = (mats[:, :, c] != 0) & (row_ids[None, :] >= rank[:, None])
        has = eligible.any(axis=1) & (rank < rows)
        if not has.any():
            continue
        b = np.nonzero(has)[0]
        piv = np.argmax(eligible[b], axis=1)
        dst = rank[b]
        pivot_rows = mats[b, piv].copy()
        mats[b, piv] = mats[b, dst]
        # scale pivot row to a leading 1
        scale = inv[pivot_rows[:, c]]
        pivot_rows = mul[scale[:, None], pivot_rows]
        mats[b, dst] = pivot_rows
        # clear column c from every other row
        factors = mats[b, :, c]
        factors[np.arange(len(b)), dst] = 0
        prod = mul[factors[:, :, None], pivot_rows[:, None, :]]
        mats[b] = add[mats[b], neg[prod]]
        rank[b] += 1
    return rank


def matrix_rank(m: CodingMatrix | np.ndarray, field: FieldSpec | None = None) -> int:
    if not isinstance(m, CodingMatrix):
        m = CodingMatrix(np.asarray(m), field or FieldSpec())
    return int(batch_rank(m.entries[None], m.field)[0])


def monte_carlo_full_rank(k: int, n: int, field: FieldSpec, trials: int, seed: int,
                          shard_size: int = 20_000) -> float:
    """Fraction of ``trials`` uniform K x N matrices over the field with rank K.

    Trials are drawn in shards; shard ``i`` uses the stream spawned from
    ``(seed, i)`` so the estimate does not depend on how shards are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if k == 0:
        return 1.0
    if n < k:
        return 0.0
    hits = 0
    n_shards = math.ceil(trials / shard_size)
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(n_shards)):
        size = min(shard_size, trials - i * shard_size)
        rng = np.random.default_rng(ss)
        mats = rng.integers(0, field.order, size=(size, k, n))
        hits += int(np.count_nonzero(batch_rank(mats, field) == k))
    return hits / trials
