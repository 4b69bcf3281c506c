"""Extreme-value experiments on continued-fraction digit sequences.

Exceedance counting, partial maxima and k-th maxima, Frechet/Poisson limit
comparison, and convergence-rate probes.  The Monte Carlo drivers draw
Lebesgue-uniform starts (the limit laws hold for any absolutely continuous
initial measure) and certify every digit by two-precision agreement.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.stats

from .engines import Family, hccf_digit_stream, nicf_digit_stream, rcf_digit_stream
from .errors import DualityViolation, MissingConstants, PrecisionExhausted
from .measures import CuspConstants
from .numerics import PRECISION_CAP, RandomStream, default_initial_bits

LOG_2 = math.log(2.0)
LOG_G = math.log((1.0 + math.sqrt(5.0)) / 2.0)


# ---------------------------------------------------------------------------
# Scaling families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFamily:
    """Normalizing thresholds u_n(r) and limit intensity tau(r) per family."""

    family: Family
    constant: Optional[float] = None  # C = sqrt(H) for the Hurwitz family

    def u(self, n: int, r: float) -> float:
        if self.family is Family.RCF:
            return n * r / LOG_2
        if self.family is Family.NICF:
            return n * r / LOG_G
        return self.constant * r * math.sqrt(n)

    def tau(self, r: float) -> float:
        if r <= 0:
            raise ValueError("r must be positive")
        if self.family is Family.HCCF:
            return 1.0 / (r * r)
        return 1.0 / r


def scaling_family(family: Family, constants: Optional[CuspConstants] = None) -> ScalingFamily:
    family = Family(family)
    if family is Family.HCCF:
        if constants is None:
            raise MissingConstants(
                "the Hurwitz scaling needs estimated cusp constants (C = sqrt(pi*C~))"
            )
        return ScalingFamily(family, constants.c)
    return ScalingFamily(family)


# ---------------------------------------------------------------------------
# Exceedance counts and order statistics
# ---------------------------------------------------------------------------


def count_exceedances(moduli: Sequence[float], v: float) -> int:
    """S_n(v): how many of the digit moduli exceed v."""
    if len(moduli) == 0:
        raise ValueError("empty digit sequence")
    if v < 0:
        raise ValueError("threshold must be >= 0")
    return int(sum(1 for m in moduli if m > v))


def maxima(moduli: Sequence[float], k: int) -> tuple[float, ...]:
    """The k largest digit moduli, descending (M^(1) >= ... >= M^(k))."""
    n = len(moduli)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    return tuple(sorted(moduli, reverse=True)[:k])


class StreamingExtremes:
    """Single-pass exceedance counts and top-k; matches the sort oracle."""

    def __init__(self, thresholds: Sequence[float], k: int):
        self.thresholds = tuple(thresholds)
        self.k = k
        self.counts = [0] * len(self.thresholds)
        self._heap: list[float] = []  # min-heap of the k largest so far
        self.n = 0

    def update(self, value: float) -> None:
        self.n += 1
        for i, v in enumerate(self.thresholds):
            if value > v:
                self.counts[i] += 1
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, value)
        elif value > self._heap[0]:
            heapq.heapreplace(self._heap, value)

    def top(self) -> tuple[float, ...]:
        return tuple(sorted(self._heap, reverse=True))


@dataclass(frozen=True)
class ExceedanceTable:
    """Per-sample exceedance counts S_n at one threshold."""

    n: int
    v: float
    r: float
    counts: np.ndarray  # (samples,) int64

    def __post_init__(self):
        if np.any(self.counts < 0) or np.any(self.counts > self.n):
            raise ValueError("counts must lie in [0, n]")


@dataclass(frozen=True)
class MaximaSample:
    """Per-sample top-k digit moduli, descending along axis 1."""

    n: int
    k: int
    values: np.ndarray  # (samples, k) float64

    def __post_init__(self):
        if np.any(self.values[:, 1:] > self.values[:, :-1]):
            raise ValueError("order statistics must be descending")


def kth_max_duality_check(table: ExceedanceTable, maxima_sample: MaximaSample, k: int) -> bool:
    """Verify M^(k) <= v  <=>  S_n(v) <= k-1 on every sample."""
    if not 1 <= k <= maxima_sample.k:
        raise ValueError("k exceeds the stored order statistics")
    lhs = maxima_sample.values[:, k - 1] <= table.v
    rhs = table.counts <= k - 1
    if not np.array_equal(lhs, rhs):
        bad = int(np.nonzero(lhs != rhs)[0][0])
        raise DualityViolation(f"duality broken at sample {bad} (k={k}, v={table.v})")
    return True


# ---------------------------------------------------------------------------
# Limit laws
# ---------------------------------------------------------------------------


def frechet_limit(family: Family, r: float, k: int, ) -> float:
    """Limit P(M_n^(k) <= u_n(r)): exp(-tau) * sum_{j<k} tau^j / j!."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tau = ScalingFamily(Family(family), constant=1.0).tau(r)
    return math.exp(-tau) * sum(tau ** j / math.factorial(j) for j in range(k))


def poisson_pmf(tau: float, j: int) -> float:
    """exp(-tau) tau^j / j!, handled in log space for large j."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if j < 0:
        raise ValueError("j must be >= 0")
    if tau == 0.0:
        return 1.0 if j == 0 else 0.0
    return math.exp(-tau + j * math.log(tau) - math.lgamma(j + 1))


# ---------------------------------------------------------------------------
# Bulk certified digit statistics
# ---------------------------------------------------------------------------


def _draw_start(family: Family, sub: RandomStream, bits: int):
    """Integer orbit start (num/den pairs) for a Lebesgue-uniform draw."""
    half = 1 << (bits - 1)
    if family is Family.RCF:
        k = sub.mantissa_bits(0, bits) or 1
        return (k, 1 << bits)
    if family is Family.NICF:
        k = sub.mantissa_bits(0, bits) or 1
        return (k - half, 1 << bits)
    kre = sub.mantissa_bits(0, bits)
    kim = sub.mantissa_bits(1, bits)
    return (kre - half, kim - half, 1 << bits)


def _digit_tokens(family: Family, start, n: int):
    if family is Family.RCF:
        return rcf_digit_stream(start[0], start[1], n)
    if family is Family.NICF:
        return nicf_digit_stream(start[0], start[1], n)
    return hccf_digit_stream(start[0], start[1], start[2], 0, n)


def _certified_moduli(family: Family, sub: RandomStream, n: int, p0: int) -> np.ndarray:
    """Two-precision certified digit moduli of one uniform draw."""
    p = p0
    lo, lo_term = _digit_tokens(family, _draw_start(family, sub, p), n)
    while True:
        if 2 * p > PRECISION_CAP:
            raise PrecisionExhausted(f"no {n}-digit agreement below {PRECISION_CAP} bits")
        hi, hi_term = _digit_tokens(family, _draw_start(family, sub, 2 * p), n)
        agree = 0
        for a, b in zip(lo, hi):
            if a != b:
                break
            agree += 1
        if agree >= n:
            break
        if lo_term and hi_term and len(lo) == len(hi) == agree:
            raise PrecisionExhausted("draw is an exact rational; cannot produce n digits")
        p *= 2
        lo, lo_term = hi, hi_term
    if family is Family.RCF:
        return np.array(lo[:n], dtype=np.float64)
    if family is Family.NICF:
        return np.array([t[0] for t in lo[:n]], dtype=np.float64)
    return np.array([math.hypot(t[0], t[1]) for t in lo[:n]], dtype=np.float64)


def _extremes_chunk(seed: int, base_index: int, family_value: str, n: int,
                    start: int, count: int, thresholds: tuple, k_top: int,
                    p0: int) -> tuple:
    family = Family(family_value)
    stream = RandomStream(seed)
    thr = np.array(thresholds, dtype=np.float64)
    counts = np.empty((count, thr.shape[0]), dtype=np.int64)
    topk = np.empty((count, k_top), dtype=np.float64)
    for i in range(count):
        sub = stream.substream(base_index + start + i)
        mods = _certified_moduli(family, sub, n, p0)
        counts[i] = (mods[None, :] > thr[:, None]).sum(axis=1)
        if k_top == 1:
            topk[i, 0] = mods.max()
        else:
            part = np.partition(mods, mods.shape[0] - k_top)[-k_top:]
            topk[i] = np.sort(part)[::-1]
    return counts, topk


def collect_digit_extremes(
    family: Family,
    n: int,
    samples: int,
    thresholds: Sequence[float],
    k_top: int,
    stream: RandomStream,
    p0: Optional[int] = None,
    workers: Optional[int] = None,
    chunk: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Certified exceedance counts and top-k moduli for `samples` draws.

    Sample i uses substream ``stream.stream_index + i``; results are
    independent of worker count and chunking.
    """
    family = Family(family)
    if p0 is None:
        p0 = default_initial_bits(n)
    if k_top < 1 or k_top > n:
        raise ValueError("need 1 <= k_top <= n")
    from .measures import _run_tasks

    tasks = [
        (stream.seed, stream.stream_index, family.value, n, s,
         min(chunk, samples - s), tuple(float(t) for t in thresholds), k_top, p0)
        for s in range(0, samples, chunk)
    ]
    results = _run_tasks(_extremes_chunk, tasks, workers)
    counts = np.vstack([r[0] for r in results])
    topk = np.vstack([r[1] for r in results])
    return counts, topk


# ---------------------------------------------------------------------------
# Extreme value law experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvlRow:
    r: float
    k: int
    u_n: float
    empirical: float
    limit: float
    deviation: float
    stderr: float


@dataclass
class EvlReport:
    family: Family
    n: int
    samples: int
    k_max: int
    rows: list[EvlRow]
    ks_distance: dict[int, float]
    exceedances: list[ExceedanceTable]
    maxima: MaximaSample
    constant: Optional[float] = None

    def row(self, r: float, k: int) -> EvlRow:
        for row in self.rows:
            if row.k == k and math.isclose(row.r, r):
                return row
        raise KeyError((r, k))


def run_evl_experiment(
    family: Family,
    n: int,
    samples: int,
    r_grid: Sequence[float],
    k: int,
    stream: RandomStream,
    constants: Optional[CuspConstants] = None,
    p0: Optional[int] = None,
    workers: Optional[int] = None,
) -> EvlReport:
    """Empirical P(M_n^(j) <= u_n(r)) for j <= k against the Frechet limits."""
    family = Family(family)
    if samples < 1:
        raise ValueError("samples must be positive")
    sf = scaling_family(family, constants)
    r_grid = [float(r) for r in r_grid]
    thresholds = [sf.u(n, r) for r in r_grid]
    counts, topk = collect_digit_extremes(
        family, n, samples, thresholds, k, stream, p0=p0, workers=workers
    )
    rows = []
    ks: dict[int, float] = {}
    for kk in range(1, k + 1):
        worst = 0.0
        for i, r in enumerate(r_grid):
            emp = float(np.mean(topk[:, kk - 1] <= thresholds[i]))
            lim = frechet_limit(family, r, kk)
            se = math.sqrt(max(emp * (1.0 - emp), 1e-12) / samples)
            dev = abs(emp - lim)
            worst = max(worst, dev)
            rows.append(EvlRow(r, kk, thresholds[i], emp, lim, dev, se))
        ks[kk] = worst
    tables = [
        ExceedanceTable(n, thresholds[i], r_grid[i], counts[:, i])
        for i in range(len(r_grid))
    ]
    return EvlReport(
        family, n, samples, k, rows, ks,
        tables, MaximaSample(n, k, topk),
        constant=sf.constant,
    )


# ---------------------------------------------------------------------------
# Poisson law experiment
# ---------------------------------------------------------------------------


@dataclass
class PoissonReport:
    family: Family
    n: int
    samples: int
    r: float
    tau: float
    u_n: float
    js: list  # retained histogram cells; the last one pools the tail
    observed: np.ndarray
    expected: np.ndarray
    pooled_from: int  # smallest j folded into the tail cell
    chi2: float
    dof: int
    pvalue: float
    counts: np.ndarray  # raw per-sample S_n
    constant: Optional[float] = None


def run_poisson_experiment(
    family: Family,
    n: int,
    samples: int,
    r: float,
    j_max: int,
    stream: RandomStream,
    constants: Optional[CuspConstants] = None,
    p0: Optional[int] = None,
    workers: Optional[int] = None,
) -> PoissonReport:
    """Observed counts of {S_n = j} against the Poisson(tau(r)) prediction.

    Cells with expected count below 5 are pooled into the tail cell before
    the chi-square statistic is formed (standard validity condition).
    """
    family = Family(family)
    if j_max < 3:
        raise ValueError("j_max must be >= 3")
    sf = scaling_family(family, constants)
    u = sf.u(n, float(r))
    tau = sf.tau(float(r))
    counts, _ = collect_digit_extremes(
        family, n, samples, [u], 1, stream, p0=p0, workers=workers
    )
    s = counts[:, 0]
    observed_full = np.array(
        [np.count_nonzero(s == j) for j in range(j_max)]
        + [np.count_nonzero(s >= j_max)],
        dtype=np.float64,
    )
    pmf = np.array([poisson_pmf(tau, j) for j in range(j_max)])
    expected_full = np.concatenate([pmf * samples, [max(samples * (1.0 - pmf.sum()), 0.0)]])
    # pool undersized cells into the tail
    keep = expected_full[:-1] >= 5.0
    pooled_from = j_max
    for j in range(j_max):
        if not keep[j]:
            pooled_from = min(pooled_from, j)
    observed = list(observed_full[:-1][keep]) + [observed_full[-1] + observed_full[:-1][~keep].sum()]
    expected = list(expected_full[:-1][keep]) + [expected_full[-1] + expected_full[:-1][~keep].sum()]
    observed = np.array(observed)
    expected = np.array(expected)
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    dof = observed.shape[0] - 1
    pvalue = float(scipy.stats.chi2.sf(chi2, dof))
    js = [j for j in range(j_max) if keep[j]] + [f">={pooled_from if pooled_from < j_max else j_max}"]
    return PoissonReport(
        family, n, samples, float(r), tau, u, js, observed, expected,
        pooled_from, chi2, dof, pvalue, s, constant=sf.constant,
    )


# ---------------------------------------------------------------------------
# Convergence-rate probe
# ---------------------------------------------------------------------------


def l_solver(n: float, theta: float = 0.75) -> float:
    """Unique positive solution of l = n * theta**l (bisection to 1e-12).

    This is the fixed-point reading of the rate sequence: l_n grows like
    log(n)/log(1/theta), so l_n/n is the familiar (log n)/n envelope.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must be in (0, 1)")
    f = lambda l: n * theta ** l - l
    lo, hi = 0.0, float(n)
    while hi - lo > 1e-13 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    l = 0.5 * (lo + hi)
    if abs(n * theta ** l - l) > 1e-9:
        raise ArithmeticError("bisection failed to reach the required residual")
    return l


@dataclass
class RateProbe:
    family: Family
    r: float
    theta: float
    n_grid: list[int]
    l_values: list[float]
    deviations: list[float]
    envelope: list[float]
    samples: int


def rate_curve(
    family: Family,
    n_grid: Sequence[int],
    r: float,
    samples: int,
    stream: RandomStream,
    constants: Optional[CuspConstants] = None,
    theta: float = 0.75,
    p0: Optional[int] = None,
    workers: Optional[int] = None,
) -> RateProbe:
    """EVL deviation |empirical - limit| vs the l_n/n rate envelope.

    The same substreams back every n (nested maxima share their noise), so
    the decay of the deviation reflects n, not resampling luck.
    """
    family = Family(family)
    n_grid = [int(n) for n in n_grid]
    devs = []
    ls = []
    env = []
    scale = 1.0 / min(r, r * r)
    for n in n_grid:
        rep = run_evl_experiment(
            family, n, samples, [r], 1, stream,
            constants=constants, p0=p0, workers=workers,
        )
        devs.append(rep.rows[0].deviation)
        l = l_solver(n, theta)
        ls.append(l)
        env.append(scale * l / n)
    return RateProbe(family, float(r), theta, n_grid, ls, devs, env, samples)
