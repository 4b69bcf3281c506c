"""Invariant measures: exact Gauss/nearest-integer densities and tails, the
empirical Hurwitz density with its 12-region dissection, cusp-constant
estimation, and the small-disk geometry bounds behind the digit tail law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InsufficientMass, MissingConstants, OutsideDomain
from .numerics import AdaptiveComplex, RandomStream
from . import _kernels

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
LOG_2 = math.log(2.0)
LOG_G = math.log(GOLDEN)

BOUNDARY_TOL = 2.0 ** -50


# ---------------------------------------------------------------------------
# Exact densities and digit tails (Gauss, nearest-integer)
# ---------------------------------------------------------------------------


def gauss_density(x: float) -> float:
    """Invariant density 1/(log2 * (1+x)) of the Gauss map on (0,1)."""
    if not 0.0 < x < 1.0:
        raise OutsideDomain(f"{x} not in (0, 1)")
    return 1.0 / (LOG_2 * (1.0 + x))


def gauss_digit_tail(j) -> float:
    """P(first regular CF digit > j) under the Gauss measure.

    The digit is integer-valued, so a real threshold j is equivalent to the
    integer threshold floor(j): the event is {x < 1/(floor(j)+1)}.
    """
    jf = math.floor(j)
    if jf < 1:
        raise ValueError("threshold must be >= 1")
    return math.log1p(1.0 / (jf + 1)) / LOG_2


def nicf_density(x: float) -> float:
    """Invariant density of the nearest-integer map on [-1/2, 1/2)."""
    if not -0.5 <= x < 0.5:
        raise OutsideDomain(f"{x} not in [-1/2, 1/2)")
    if x >= 0.0:
        return 1.0 / (LOG_G * (GOLDEN + x))
    return 1.0 / (LOG_G * (GOLDEN + 1.0 + x))


def nicf_digit_tail(j) -> float:
    """P(first nearest-integer digit b > j) under the invariant measure.

    {b1 > j} = {|x| <= 1/(floor(j)+1/2)} exactly, and the measure of that
    interval has a two-log closed form.  (The intermediate display in the
    source derivation carries a sign slip; this form matches direct
    quadrature of the density, which the tests enforce.)
    """
    jf = math.floor(j)
    if jf < 2:
        raise ValueError("threshold must be >= 2 (digits are >= 2)")
    t = 1.0 / (jf + 0.5)
    pos = math.log1p(t / GOLDEN)
    neg = math.log((GOLDEN + 1.0) / (GOLDEN + 1.0 - t))
    return (pos + neg) / LOG_G


@dataclass(frozen=True)
class TailCurve:
    """Digit-modulus tail probabilities at increasing thresholds."""

    family: str
    js: tuple[float, ...]
    tails: tuple[float, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.js, self.js[1:])):
            raise ValueError("thresholds must be increasing")
        if any(b > a + 1e-15 for a, b in zip(self.tails, self.tails[1:])):
            raise ValueError("tail must be nonincreasing")


def exact_tail_curve(family: str, js: Sequence[float]) -> TailCurve:
    from .engines import Family

    fam = Family(family)
    if fam is Family.RCF:
        tails = [gauss_digit_tail(j) for j in js]
    elif fam is Family.NICF:
        tails = [nicf_digit_tail(j) for j in js]
    else:
        raise MissingConstants("the Hurwitz tail has no closed form; use an empirical curve")
    return TailCurve(fam.value, tuple(float(j) for j in js), tuple(tails))


# ---------------------------------------------------------------------------
# 12-region dissection of the fundamental square
# ---------------------------------------------------------------------------


class RegionTag(IntEnum):
    """Canonical labels for the 12 analyticity regions of B.

    A1..A4: quadrant-bulk regions touching 0 (inside exactly two of the unit
    circles centered at +-1, +-i), counterclockwise from the first quadrant.
    A5..A8: parabolic slivers along the +x, +y, -x, -y half-axes (inside
    exactly one such circle).  A9..A12: corner regions cut off by the unit
    circles centered at +-1+-i, counterclockwise from the corner near
    (1+i)/2.  BOUNDARY marks points within tolerance of a dissection arc.
    """

    BOUNDARY = 0
    A1 = 1
    A2 = 2
    A3 = 3
    A4 = 4
    A5 = 5
    A6 = 6
    A7 = 7
    A8 = 8
    A9 = 9
    A10 = 10
    A11 = 11
    A12 = 12


_AXIS_CENTERS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))
_CORNER_CENTERS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


def region_classify(z, tol: float = BOUNDARY_TOL) -> RegionTag:
    """Classify a point of B into its dissection region.

    Points within ``tol`` (on the squared-distance residual) of any arc are
    tagged BOUNDARY.  Raises OutsideDomain for points outside B.
    """
    if isinstance(z, AdaptiveComplex):
        z = z.to_complex()
    x, y = float(z.real), float(z.imag)
    if not (-0.5 <= x < 0.5 and -0.5 <= y < 0.5):
        raise OutsideDomain(f"{z} not in B")
    codes = region_classify_arrays(np.array([x]), np.array([y]), tol)
    return RegionTag(int(codes[0]))


def region_classify_arrays(x: np.ndarray, y: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorized region classification; returns int8 RegionTag codes."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(x.shape, dtype=np.int8)
    boundary = np.zeros(x.shape, dtype=bool)

    inside_axis = []
    for cx, cy in _AXIS_CENTERS:
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        boundary |= np.abs(d2 - 1.0) <= tol
        inside_axis.append(d2 < 1.0)
    inside_corner = []
    for cx, cy in _CORNER_CENTERS:
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        boundary |= np.abs(d2 - 1.0) <= tol
        inside_corner.append(d2 < 1.0)

    in1, ini, inm1, inmi = inside_axis
    # corners win (they are carved out of the bulk regions)
    for k, mask in enumerate(inside_corner):
        out[mask] = RegionTag.A9 + k
    none_corner = ~(inside_corner[0] | inside_corner[1] | inside_corner[2] | inside_corner[3])
    bulk_pairs = (in1 & ini, inm1 & ini, inm1 & inmi, in1 & inmi)
    for k, mask in enumerate(bulk_pairs):
        out[mask & none_corner] = RegionTag.A1 + k
    count = in1.astype(np.int8) + ini + inm1 + inmi
    single = (count == 1) & none_corner
    for k, mask in enumerate(inside_axis):
        out[single & mask] = RegionTag.A5 + k
    out[boundary] = RegionTag.BOUNDARY
    return out


# ---------------------------------------------------------------------------
# Small-disk geometry (tail-law bounds)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskGeometry:
    """Closed-form geometry of the radius-1/j disk at the cusp."""

    j: float
    r_in: float
    r_out: float
    disk_area: float
    sliver_height: float
    sliver_bound: float
    bulk_bounds: tuple[float, float]


def disk_geometry(j: float) -> DiskGeometry:
    if j <= 2:
        raise ValueError("j must exceed 2")
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    return DiskGeometry(
        j=float(j),
        r_in=1.0 / (j + inv_sqrt2),
        r_out=1.0 / (j - inv_sqrt2),
        disk_area=math.pi / j ** 2,
        sliver_height=1.0 / (2.0 * j ** 2),
        sliver_bound=1.0 / j ** 3,
        bulk_bounds=(math.pi / (4.0 * j ** 2) - 1.0 / j ** 3, math.pi / (4.0 * j ** 2)),
    )


def bulk_sector_area(j: float) -> float:
    """Exact area of one quadrant-bulk sector of the disk |z| <= 1/j.

    In polar coordinates the sector is r < min(1/j, 2 sin t, 2 cos t); the
    sine constraint bites for t < asin(1/(2j)), giving the closed form.
    """
    if j <= 1:
        raise ValueError("j must exceed 1")
    th = math.asin(1.0 / (2.0 * j))
    return (math.pi / 4.0 - th) / j ** 2 + (2.0 * th - math.sin(2.0 * th))


def sliver_sector_area(j: float) -> float:
    """Exact area of one axis sliver inside the disk |z| <= 1/j."""
    if j <= 1:
        raise ValueError("j must exceed 1")
    th = math.asin(1.0 / (2.0 * j))
    return th / j ** 2 - (2.0 * th - math.sin(2.0 * th))


# ---------------------------------------------------------------------------
# Stationary sampling of the Hurwitz invariant measure
# ---------------------------------------------------------------------------


@dataclass
class HurwitzSample:
    """Push-forward Monte Carlo sample of the Hurwitz invariant measure.

    ``x, y`` are the iterates after ``burn_in`` exact map applications from
    uniform draws on B; ``dig_re, dig_im`` give the first digit of each
    iterate (clipped to int32, far beyond any threshold in use).
    """

    x: np.ndarray
    y: np.ndarray
    dig_re: np.ndarray
    dig_im: np.ndarray
    burn_in: int
    bits: int
    seed: int
    base_stream_index: int

    @property
    def count(self) -> int:
        return self.x.shape[0]

    def digit_moduli(self) -> np.ndarray:
        dr = self.dig_re.astype(np.float64)
        di = self.dig_im.astype(np.float64)
        return np.hypot(dr, di)

    def subset(self, n: int) -> "HurwitzSample":
        """First n samples (substream draws make prefixes well-defined)."""
        if n > self.count:
            raise ValueError("subset larger than sample")
        return HurwitzSample(
            self.x[:n], self.y[:n], self.dig_re[:n], self.dig_im[:n],
            self.burn_in, self.bits, self.seed, self.base_stream_index,
        )


def _sampler_bits(burn_in: int) -> int:
    # 8 bits/step headroom (~6.3 observed), rounded up to whole 512-bit blocks
    need = 64 + 8 * (burn_in + 2)
    blocks = -(-need // 512)
    return 512 * blocks


_MAX_REDRAWS = 5
_DIG_CLIP = 2 ** 31 - 1


def _sample_chunk(seed: int, base_index: int, start: int, count: int,
                  burn_in: int, bits: int) -> tuple:
    """One deterministic chunk of stationary samples (worker function)."""
    stream = RandomStream(seed)
    limbs = _kernels.LIMBS * (bits // 512)
    nblocks = bits // 512

    def draw_digests(indices: np.ndarray, attempt: int, coord: int) -> bytes:
        parts = []
        for s in indices:
            sub = stream.substream(base_index + int(s))
            for blk in range(nblocks):
                parts.append(sub.block(2 * attempt + coord, blk))
        return b"".join(parts)

    idx = np.arange(start, start + count, dtype=np.int64)
    out_x = np.empty(count)
    out_y = np.empty(count)
    out_ar = np.zeros(count, dtype=np.int64)
    out_ai = np.zeros(count, dtype=np.int64)

    pending = np.arange(count, dtype=np.int64)
    attempt = 0
    while pending.size:
        if attempt >= _MAX_REDRAWS:
            raise RuntimeError("too many terminated redraws; RNG misbehaving")
        pend_idx = idx[pending]
        nre = _pack_draw(draw_digests(pend_idx, attempt, 0), pending.size, bits, limbs)
        nim = _pack_draw(draw_digests(pend_idx, attempt, 1), pending.size, bits, limbs)
        dre = np.zeros((pending.size, limbs), dtype=np.int64)
        dim = np.zeros((pending.size, limbs), dtype=np.int64)
        dre[:, bits // 32] = 1  # denominator 2^bits
        cx = np.empty(pending.size)
        cy = np.empty(pending.size)
        car = np.zeros(pending.size, dtype=np.int64)
        cai = np.zeros(pending.size, dtype=np.int64)
        fl = np.zeros(pending.size, dtype=np.int64)
        _kernels.hurwitz_burnin_batch(nre, nim, dre, dim, burn_in, cx, cy, car, cai, fl)

        uncertain = np.nonzero(fl == _kernels.FLAG_UNCERTAIN)[0]
        for u in uncertain:
            s = int(pend_idx[u])
            sub = stream.substream(base_index + s)
            kre = sub.mantissa_bits(2 * attempt + 0, bits) - (1 << (bits - 1))
            kim = sub.mantissa_bits(2 * attempt + 1, bits) - (1 << (bits - 1))
            ex, ey, ear, eai, term = _kernels.hurwitz_orbit_exact(kre, kim, bits, burn_in)
            if term:
                fl[u] = _kernels.FLAG_TERMINATED
            else:
                cx[u], cy[u], car[u], cai[u] = ex, ey, ear, eai
                fl[u] = _kernels.FLAG_OK

        good = fl == _kernels.FLAG_OK
        rows = pending[good]
        out_x[rows] = cx[good]
        out_y[rows] = cy[good]
        out_ar[rows] = car[good]
        out_ai[rows] = cai[good]
        pending = pending[~good]
        attempt += 1

    dig_re = np.clip(out_ar, -_DIG_CLIP, _DIG_CLIP).astype(np.int32)
    dig_im = np.clip(out_ai, -_DIG_CLIP, _DIG_CLIP).astype(np.int32)
    return out_x, out_y, dig_re, dig_im


def _pack_draw(digests: bytes, count: int, bits: int, limbs: int) -> np.ndarray:
    """Centered limb rows (K - 2^(bits-1)) from concatenated digest blocks."""
    words = np.frombuffer(digests, dtype=">u4").reshape(count, bits // 32)[:, ::-1]
    out = np.zeros((count, limbs), dtype=np.int64)
    out[:, : bits // 32] = words.astype(np.int64)
    # subtract 2^(bits-1) mod 2^(32*limbs)
    top = (bits - 1) // 32
    out[:, top] += 0x80000000
    for i in range(top + 1, limbs):
        out[:, i] += 0xFFFFFFFF
    carry = np.zeros(count, dtype=np.int64)
    for i in range(limbs):
        acc = out[:, i] + carry
        out[:, i] = acc & 0xFFFFFFFF
        carry = acc >> 32
    return out


def stationary_sample_hccf(
    stream: RandomStream,
    count: int,
    burn_in: int = 50,
    bits: Optional[int] = None,
    workers: Optional[int] = None,
    chunk: int = 50_000,
) -> HurwitzSample:
    """Samples approximately distributed as the Hurwitz invariant measure.

    Each sample i draws z uniformly on B from substream
    ``stream.stream_index + i``, applies the exact Hurwitz map ``burn_in``
    times and emits the iterate together with its first digit.  Exponential
    mixing makes the push-forward bias negligible at the default burn-in.
    Rational draws that terminate are redrawn from the next draw slot.
    Results are independent of ``workers`` and ``chunk``.
    """
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    if bits is None:
        bits = _sampler_bits(burn_in)
    if bits % 512 != 0 or bits < 512:
        raise ValueError("sampler precision must be a positive multiple of 512 bits")
    _kernels.warm_up()
    tasks = [
        (stream.seed, stream.stream_index, s, min(chunk, count - s), burn_in, bits)
        for s in range(0, count, chunk)
    ]
    results = _run_tasks(_sample_chunk, tasks, workers)
    xs, ys, drs, dis = zip(*results)
    return HurwitzSample(
        np.concatenate(xs),
        np.concatenate(ys),
        np.concatenate(drs),
        np.concatenate(dis),
        burn_in,
        bits,
        stream.seed,
        stream.stream_index,
    )


def _run_tasks(fn: Callable, tasks: list, workers: Optional[int]) -> list:
    import os

    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    import multiprocessing as mp

    with mp.Pool(workers) as pool:
        return pool.starmap(fn, tasks)


def single_orbit_sample_hccf(stream: RandomStream, count: int, stride: int = 1,
                             bits: Optional[int] = None) -> np.ndarray:
    """Diagnostic single-orbit (Birkhoff) sampler: one long exact orbit.

    Returns complex iterates z_stride, z_2*stride, ...; cross-check only,
    the push-forward sampler is the primary estimator.
    """
    from gmpy2 import mpz

    steps = count * stride
    if bits is None:
        bits = 64 + 8 * (steps + 2)
    sub = stream.substream(stream.stream_index)
    kre = sub.mantissa_bits(0, bits) - (1 << (bits - 1))
    kim = sub.mantissa_bits(1, bits) - (1 << (bits - 1))
    xr, xi = mpz(kre), mpz(kim)
    yr, yi = mpz(1) << bits, mpz(0)
    out = np.empty(count, dtype=np.complex128)
    emitted = 0
    for k in range(1, steps + 1):
        if not (xr or xi):
            raise RuntimeError("single orbit terminated; widen precision or reseed")
        m2 = xr * xr + xi * xi
        wre = yr * xr + yi * xi
        wim = yi * xr - yr * xi
        ar = -((m2 - 2 * wre) // (2 * m2))
        ai = -((m2 - 2 * wim) // (2 * m2))
        nxr = yr - (ar * xr - ai * xi)
        nxi = yi - (ar * xi + ai * xr)
        yr, yi = xr, xi
        xr, xi = nxr, nxi
        if k % stride == 0:
            md = yr * yr + yi * yi
            out[emitted] = complex(
                _kernels._ratio_float(xr * yr + xi * yi, md),
                _kernels._ratio_float(xi * yr - xr * yi, md),
            )
            emitted += 1
    return out


# ---------------------------------------------------------------------------
# Density histogram and symmetry defect
# ---------------------------------------------------------------------------


@dataclass
class DensityGrid:
    """Square-cell histogram over B with row = imaginary, col = real index."""

    resolution: int
    counts: np.ndarray  # (resolution, resolution) int64
    total: int

    def masses(self) -> np.ndarray:
        return self.counts.astype(np.float64) / float(self.total)

    def densities(self) -> np.ndarray:
        cell_area = 1.0 / self.resolution ** 2
        return self.masses() / cell_area


def density_histogram(x: np.ndarray, y: np.ndarray, resolution: int = 64) -> DensityGrid:
    if resolution < 1:
        raise ValueError("resolution must be positive")
    # emitted iterates live in [-1/2, 1/2] up to float rounding; the closed
    # right edge is measure zero and is folded into the last cell
    hi = np.nextafter(0.5, 0.0)
    cx = np.clip(np.asarray(x, dtype=np.float64), -0.5, hi)
    cy = np.clip(np.asarray(y, dtype=np.float64), -0.5, hi)
    edges = np.linspace(-0.5, 0.5, resolution + 1)
    counts, _, _ = np.histogram2d(cy, cx, bins=(edges, edges))
    return DensityGrid(resolution, counts.astype(np.int64), cx.shape[0])


def _symmetry_orbit(a: np.ndarray) -> list[np.ndarray]:
    """The 8 grids obtained from conjugation and multiplication by i.

    With counts[iy, ix], multiplication by i maps cell (ix, iy) to
    (R-1-iy, ix), which is a 90-degree array rotation; conjugation flips the
    row axis.  Cell centers map exactly onto cell centers.
    """
    rots = [a, np.rot90(a, 1), np.rot90(a, 2), np.rot90(a, 3)]
    flipped = [np.flipud(r) for r in rots]
    return rots + flipped


def symmetry_defect(grid: DensityGrid) -> float:
    """L1 distance between the cell masses and their symmetry-group average."""
    p = grid.masses()
    avg = np.mean(_symmetry_orbit(p), axis=0)
    return float(np.abs(p - avg).sum())


def grid_l1_distance(a: DensityGrid, b: DensityGrid) -> float:
    if a.resolution != b.resolution:
        raise ValueError("grids have different resolutions")
    return float(np.abs(a.masses() - b.masses()).sum())


# ---------------------------------------------------------------------------
# Cusp constants
# ---------------------------------------------------------------------------


@dataclass
class CuspConstants:
    """Estimated cusp limits of the Hurwitz invariant density.

    c_tilde is the common density limit through the quadrant-bulk regions,
    c_prime through the slivers; h = pi * c_tilde and c = sqrt(h) are always
    derived, never stored independently.
    """

    c_tilde: float
    c_tilde_se: float
    c_prime: float
    c_prime_se: float
    j_grid: tuple[float, ...]
    samples: int
    plateau_ratio: float
    bulk_estimates: np.ndarray  # (len(j_grid), 4)
    sliver_estimates: np.ndarray  # (len(j_grid), 4)
    bulk_se: np.ndarray
    sliver_se: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return math.pi * self.c_tilde

    @property
    def h_se(self) -> float:
        return math.pi * self.c_tilde_se

    @property
    def c(self) -> float:
        return math.sqrt(self.h)

    @property
    def c_se(self) -> float:
        return self.h_se / (2.0 * self.c)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "c_tilde": self.c_tilde,
            "c_tilde_se": self.c_tilde_se,
            "c_prime": self.c_prime,
            "c_prime_se": self.c_prime_se,
            "h": self.h,
            "h_se": self.h_se,
            "c": self.c,
            "c_se": self.c_se,
            "j_grid": list(self.j_grid),
            "samples": self.samples,
            "plateau_ratio": self.plateau_ratio,
            "bulk_estimates": self.bulk_estimates.tolist(),
            "sliver_estimates": self.sliver_estimates.tolist(),
            "bulk_se": self.bulk_se.tolist(),
            "sliver_se": self.sliver_se.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CuspConstants":
        return cls(
            c_tilde=d["c_tilde"],
            c_tilde_se=d["c_tilde_se"],
            c_prime=d["c_prime"],
            c_prime_se=d["c_prime_se"],
            j_grid=tuple(d["j_grid"]),
            samples=d["samples"],
            plateau_ratio=d["plateau_ratio"],
            bulk_estimates=np.array(d["bulk_estimates"]),
            sliver_estimates=np.array(d["sliver_estimates"]),
            bulk_se=np.array(d["bulk_se"]),
            sliver_se=np.array(d["sliver_se"]),
            provenance=d.get("provenance", {}),
        )


def estimate_cusp_constants(
    sample: HurwitzSample,
    j_grid: Sequence[float],
    min_sector_count: int = 100,
) -> CuspConstants:
    """Estimate the cusp constants from sector densities of small disks.

    For each j, the empirical measure of each bulk sector (disk of radius
    1/j intersected with A1..A4) is divided by the exact sector area; the
    sliver sectors A5..A8 likewise.  Estimates are averaged over the four
    symmetric copies and over the j grid, with a plateau diagnostic
    (max/min over j) recording how stable the limit already is.
    """
    if len(j_grid) < 3:
        raise ValueError("j_grid needs at least 3 values")
    n = sample.count
    x, y = sample.x, sample.y
    r2 = x * x + y * y
    bulk = np.empty((len(j_grid), 4))
    sliver = np.empty((len(j_grid), 4))
    bulk_se = np.empty((len(j_grid), 4))
    sliver_se = np.empty((len(j_grid), 4))
    for row, j in enumerate(j_grid):
        inside = r2 <= (1.0 / j) ** 2
        tags = region_classify_arrays(x[inside], y[inside])
        area_b = bulk_sector_area(j)
        area_s = sliver_sector_area(j)
        for k in range(4):
            cb = int(np.count_nonzero(tags == RegionTag.A1 + k))
            cs = int(np.count_nonzero(tags == RegionTag.A5 + k))
            if cb < min_sector_count or cs < min_sector_count:
                raise InsufficientMass(
                    f"sector count below {min_sector_count} at j={j}: "
                    f"bulk={cb}, sliver={cs}; enlarge the sample or shrink j"
                )
            mu_b = cb / n
            mu_s = cs / n
            bulk[row, k] = mu_b / area_b
            sliver[row, k] = mu_s / area_s
            bulk_se[row, k] = math.sqrt(mu_b * (1.0 - mu_b) / n) / area_b
            sliver_se[row, k] = math.sqrt(mu_s * (1.0 - mu_s) / n) / area_s
    per_j = bulk.mean(axis=1)
    plateau = float(per_j.max() / per_j.min())
    c_tilde = float(bulk.mean())
    c_prime = float(sliver.mean())
    # nested disks are strongly correlated across j: take the most uncertain
    # j level (rather than an independence-based shrinkage) as the SE
    c_tilde_se = float(max(np.sqrt((bulk_se[row] ** 2).sum()) / 4.0 for row in range(len(j_grid))))
    c_prime_se = float(max(np.sqrt((sliver_se[row] ** 2).sum()) / 4.0 for row in range(len(j_grid))))
    return CuspConstants(
        c_tilde=c_tilde,
        c_tilde_se=c_tilde_se,
        c_prime=c_prime,
        c_prime_se=c_prime_se,
        j_grid=tuple(float(j) for j in j_grid),
        samples=n,
        plateau_ratio=plateau,
        bulk_estimates=bulk,
        sliver_estimates=sliver,
        bulk_se=bulk_se,
        sliver_se=sliver_se,
        provenance={
            "seed": sample.seed,
            "base_stream_index": sample.base_stream_index,
            "burn_in": sample.burn_in,
            "bits": sample.bits,
        },
    )


def empirical_hccf_tail(sample: HurwitzSample) -> Callable[[float], float]:
    """Empirical P(|a_1| > v) from the stationary sample's first digits."""
    moduli = np.sort(sample.digit_moduli())
    n = moduli.shape[0]

    def tail(v: float) -> float:
        return float(n - np.searchsorted(moduli, v, side="right")) / n

    return tail


def empirical_tail_curve(sample: HurwitzSample, js: Sequence[float]) -> TailCurve:
    tail = empirical_hccf_tail(sample)
    return TailCurve("hccf", tuple(float(j) for j in js), tuple(tail(j) for j in js))


# ---------------------------------------------------------------------------
# Scaling check: n * tail(u_n(r)) -> tau(r)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRow:
    n: int
    u_n: float
    n_tail: float
    tau: float
    deviation: float


def scaling_check(
    family: str,
    n_grid: Sequence[int],
    r: float,
    constants: Optional[CuspConstants] = None,
    hccf_tail: Optional[Callable[[float], float]] = None,
) -> list[ScalingRow]:
    """Tabulate n * tail(u_n(r)) against its limit tau(r).

    Exact tails back the real families; the Hurwitz family needs estimated
    cusp constants (for u_n) and an empirical tail function.
    """
    from .engines import Family
    from .evt import scaling_family

    fam = Family(family)
    sf = scaling_family(fam, constants)
    if fam is Family.HCCF and hccf_tail is None:
        raise MissingConstants("pass hccf_tail= an empirical tail function for the Hurwitz family")
    if fam is Family.RCF:
        tail = gauss_digit_tail
    elif fam is Family.NICF:
        tail = nicf_digit_tail
    else:
        tail = hccf_tail
    rows = []
    tau = sf.tau(r)
    for n in n_grid:
        u = sf.u(n, r)
        nt = n * tail(u)
        rows.append(ScalingRow(int(n), float(u), float(nt), float(tau), float(abs(nt - tau))))
    return rows
