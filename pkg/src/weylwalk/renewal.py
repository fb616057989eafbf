"""Renewal statistics of the scalar Cartan coordinate.

The scalar observable is ``t_1 - t_2`` for d = 2 (hyperbolic displacement)
and ``t_1`` otherwise; see :func:`weylwalk.walk.scalar_observable`.
Intervals are half-open, ``[lo, hi)``, so adjacent intervals add up exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._util import stream
from .lie import cartan_decompose, as_group_element, random_group_element
from .walk import MeasureSpec, lyapunov_estimate, run_walk, scalar_observable

__all__ = [
    "VisitCounter",
    "HittingReport",
    "EscapeReport",
    "RenewalCurve",
    "TailReport",
    "observable_rate",
    "choose_horizon",
    "observable_paths",
    "visit_counts",
    "hitting_probability",
    "minimal_hitting_length",
    "escape_probability",
    "log_norm_renewal",
    "count_tail",
    "random_starts",
]

LATE_THRESHOLD = 1e-3


def observable_rate(mu: MeasureSpec, n: int = 2000, n_traj: int = 8, seed: int = 0):
    """Drift of the scalar observable and its standard error."""
    lam, err = lyapunov_estimate(mu, n, n_traj, seed)
    if mu.dim == 2:
        return float(lam[0] - lam[1]), float(err[0] + err[1])
    return float(lam[0]), float(err[0])


def choose_horizon(top: float, rate: float, stderr: float, factor: int = 3, cap: int = 100_000) -> int:
    """``factor`` times the steps needed to climb to ``top`` at a pessimistic rate."""
    slow = rate - 10.0 * stderr
    if slow <= 0:
        return cap
    return int(min(cap, factor * math.ceil(max(top, 1.0) / slow)))


def observable_paths(mu: MeasureSpec, horizon: int, n_traj: int, seed: int, g0=None,
                     offset: int = 0) -> np.ndarray:
    """Scalar observable of ``g0 b_1 ... b_n`` for n = 0..horizon, one row per trajectory."""
    start = None
    if g0 is not None:
        f = cartan_decompose(as_group_element(g0))
        start = f
    out = np.empty((n_traj, horizon + 1))
    for i in range(n_traj):
        ch = mu.sample(stream(seed, offset + i), horizon)
        t_seq, *_ = run_walk(mu, ch, start)
        out[i] = scalar_observable(t_seq)
    return out


def _batch_stderr(x: np.ndarray, n_batches: int = 20) -> np.ndarray:
    """Standard error of the mean along axis -1 from batch means."""
    m = x.shape[-1]
    nb = min(n_batches, m)
    if nb < 2:
        return np.full(x.shape[:-1], np.nan)
    parts = np.array_split(np.arange(m), nb)
    means = np.stack([x[..., p].mean(axis=-1) for p in parts], axis=-1)
    return means.std(axis=-1, ddof=1) / math.sqrt(nb)


def _count(paths: np.ndarray, lo: float, hi: float, shifts: np.ndarray) -> np.ndarray:
    out = np.empty((len(shifts), paths.shape[0]), dtype=np.int64)
    for j, t in enumerate(shifts):
        out[j] = ((paths >= lo + t) & (paths < hi + t)).sum(axis=1)
    return out


@dataclass(eq=False)
class VisitCounter:
    """Per-shift visit counts ``#{n >= 0 : s_n in I + t}``."""

    interval: tuple
    shifts: np.ndarray
    counts: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    horizon: int
    late_fraction: float
    rate: float

    @property
    def lower_bound(self) -> bool:
        """True when visits late in the run suggest the horizon truncates counts."""
        return self.late_fraction > LATE_THRESHOLD

    @property
    def target(self) -> float:
        return (self.interval[1] - self.interval[0]) / self.rate if self.rate > 0 else float("inf")


def _late_fraction(paths: np.ndarray, lo: float, hi: float) -> float:
    h = paths.shape[1] - 1
    tail = paths[:, h - h // 3:]
    return float(np.any((tail >= lo) & (tail < hi), axis=1).mean())


def visit_counts(mu: MeasureSpec, interval, shifts, n_traj: int, seed: int, horizon: int | None = None,
                 g0=None, rate: tuple | None = None) -> VisitCounter:
    """Visit counts of the scalar observable to shifted copies of ``interval``.

    The horizon defaults to three times the number of steps needed to pass
    the highest shifted interval at the drift minus ten standard errors.
    """
    lo, hi = map(float, interval)
    if hi < lo:
        raise ValueError("interval must have hi >= lo")
    shifts = np.asarray(shifts, dtype=float)
    r, se = rate if rate is not None else observable_rate(mu, seed=seed + 7919)
    if horizon is None:
        horizon = choose_horizon(hi + shifts.max(), r, se)
    paths = observable_paths(mu, horizon, n_traj, seed, g0)
    counts = _count(paths, lo, hi, shifts)
    late = _late_fraction(paths, lo + shifts.min(), hi + shifts.max())
    return VisitCounter((lo, hi), shifts, counts, counts.mean(axis=1), _batch_stderr(counts.astype(float)),
                        horizon, late, r)


@dataclass(eq=False)
class HittingReport:
    interval: tuple
    shifts: np.ndarray
    probability: np.ndarray
    horizon: int
    late_fraction: float


def hitting_probability(mu: MeasureSpec, interval, shifts, g0, n_traj: int, seed: int,
                        horizon: int | None = None, rate: tuple | None = None) -> HittingReport:
    """Probability that ``s(g0 b_1 .. b_n)`` enters ``I + s`` for some n >= 0."""
    lo, hi = map(float, interval)
    shifts = np.asarray(shifts, dtype=float)
    r, se = rate if rate is not None else observable_rate(mu, seed=seed + 7919)
    start = 0.0 if g0 is None else float(scalar_observable(cartan_decompose(as_group_element(g0)).t))
    if horizon is None:
        horizon = choose_horizon(max(hi + shifts.max() - start, 1.0), r, se)
    paths = observable_paths(mu, horizon, n_traj, seed, g0)
    prob = np.array([float(np.any((paths >= lo + t) & (paths < hi + t), axis=1).mean()) for t in shifts])
    late = _late_fraction(paths, lo + shifts.min(), hi + shifts.max())
    return HittingReport((lo, hi), shifts, prob, horizon, late)


def minimal_hitting_length(mu: MeasureSpec, lengths, shifts, starts, n_traj: int, seed: int,
                           level: float = 0.95):
    """Smallest interval length whose hitting probability reaches ``level``
    for every shift and every start.

    Returns ``(L_star, table)`` where ``table[i, j, k]`` is the probability
    for length i, start j, shift k; ``L_star`` is None if no length works.
    """
    lengths = np.asarray(lengths, dtype=float)
    table = np.empty((len(lengths), len(starts), len(shifts)))
    for j, g0 in enumerate(starts):
        r = observable_rate(mu, seed=seed + 7919)
        for i, length in enumerate(lengths):
            rep = hitting_probability(mu, (0.0, length), shifts, g0, n_traj, seed + 104729 * j, rate=r)
            table[i, j] = rep.probability
    ok = np.flatnonzero(table.min(axis=(1, 2)) >= level)
    return (float(lengths[ok[0]]) if ok.size else None), table


@dataclass(eq=False)
class EscapeReport:
    radius: float
    n0_grid: np.ndarray
    probability: np.ndarray
    horizon: int

    def n0_star(self, eps: float) -> int | None:
        """Smallest grid n0 with probability >= 1 - eps for every start."""
        ok = np.flatnonzero(self.probability.min(axis=1) >= 1.0 - eps)
        return int(self.n0_grid[ok[0]]) if ok.size else None


def escape_probability(mu: MeasureSpec, radius: float, n0_grid, starts, n_traj: int, seed: int,
                       horizon: int | None = None) -> EscapeReport:
    """Probability that ``s(g0 b_1..b_n) >= s(g0) + R`` for all n0 <= n <= horizon."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    n0_grid = np.asarray(n0_grid, dtype=int)
    if horizon is None:
        horizon = int(2 * n0_grid.max())
    prob = np.empty((len(n0_grid), len(starts)))
    for j, g0 in enumerate(starts):
        paths = observable_paths(mu, horizon, n_traj, seed + 104729 * j, g0)
        base = paths[:, :1]
        above = paths >= base + radius
        # suffix_ok[:, n] is True when every step from n on is above
        suffix_ok = np.flip(np.logical_and.accumulate(np.flip(above, axis=1), axis=1), axis=1)
        for i, n0 in enumerate(n0_grid):
            prob[i, j] = float(suffix_ok[:, min(n0, horizon)].mean())
    return EscapeReport(float(radius), n0_grid, prob, horizon)


@dataclass(eq=False)
class RenewalCurve:
    interval: tuple
    shifts: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    rate: float
    target: float
    horizon: int
    late_fraction: float

    def flatness_slope(self):
        """Regression slope of mean count on shift over the upper half of the grid."""
        half = len(self.shifts) // 2
        fit = stats.linregress(self.shifts[half:], self.mean[half:])
        return float(fit.slope), float(fit.stderr)


def log_norm_renewal(mu: MeasureSpec, v, interval, shifts, n_traj: int, seed: int,
                     horizon: int | None = None, rate: tuple | None = None) -> RenewalCurve:
    """Visit counts of ``log |S_n v|`` with ``S_n = b_n^T ... b_1^T``.

    The limit of the mean count at large shifts is ``leb(I) / lambda_1``;
    ``lambda_1`` is estimated independently with :func:`lyapunov_estimate`.
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("v must be nonzero")
    lo, hi = map(float, interval)
    shifts = np.asarray(shifts, dtype=float)
    if rate is None:
        lam, err = lyapunov_estimate(mu, 2000, 8, seed + 7919)
        rate = (float(lam[0]), float(err[0]))
    lam1, se = rate
    if horizon is None:
        horizon = choose_horizon(hi + shifts.max() - math.log(np.linalg.norm(v)), lam1, se)
    choices = np.stack([mu.sample(stream(seed, i), horizon) for i in range(n_traj)])
    at = np.transpose(mu.atoms, (0, 2, 1))
    vec = np.tile(v / np.linalg.norm(v), (n_traj, 1))
    logn = np.empty((n_traj, horizon + 1))
    logn[:, 0] = math.log(np.linalg.norm(v))
    for n in range(horizon):
        vec = np.einsum("tij,tj->ti", at[choices[:, n]], vec)
        nrm = np.linalg.norm(vec, axis=1)
        vec /= nrm[:, None]
        logn[:, n + 1] = logn[:, n] + np.log(nrm)
    counts = _count(logn, lo, hi, shifts)
    late = _late_fraction(logn, lo + shifts.min(), hi + shifts.max())
    return RenewalCurve((lo, hi), shifts, counts.mean(axis=1), _batch_stderr(counts.astype(float)),
                        lam1, (hi - lo) / lam1, horizon, late)


@dataclass(eq=False)
class TailReport:
    k: np.ndarray
    survival: np.ndarray
    slope: float
    slope_stderr: float
    r_squared: float

    @property
    def decreasing(self) -> bool:
        return bool(self.slope < 0 and np.all(np.diff(self.survival) <= 0))


def count_tail(counts, min_prob: float = 1e-3) -> TailReport:
    """Empirical ``P(count >= k)`` and a log-linear fit over k >= 1.

    Points with probability below ``min_prob`` are dropped from the fit.
    """
    c = np.asarray(counts).ravel()
    kmax = int(c.max())
    k = np.arange(1, kmax + 1)
    surv = np.array([(c >= j).mean() for j in k])
    keep = surv >= min_prob
    k, surv = k[keep], surv[keep]
    if len(k) < 3:
        return TailReport(k, surv, float("nan"), float("nan"), float("nan"))
    fit = stats.linregress(k, np.log(surv))
    return TailReport(k, surv, float(fit.slope), float(fit.stderr), float(fit.rvalue ** 2))


def random_starts(d: int, count: int, seed: int, scales=(0.5, 1.0, 2.0, 4.0)) -> list:
    """Random starting elements with increasingly spread Cartan projections."""
    rng = stream(seed, 1 << 48)
    return [random_group_element(d, rng, scale=scales[i % len(scales)]) for i in range(count)]
