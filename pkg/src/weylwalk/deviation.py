"""Deviation of a random product from its Weyl chamber, and related statistics.

Along a trajectory ``P_i = b_1 ... b_i = k_i a_{t_i} l_i`` with limit frame
``k_inf`` (estimated at step ``n + n_burn``) the deviation is

    dev_i = d(P_i K, k_inf a_{t_i} K).

Both points are far from the origin, so the distance is computed in the
frame of ``P_i`` from the flag ``eta_i = P_i^-1 xi_b``, where ``xi_b`` is the
limit flag.  The flags ``eta_i`` come from pushing ``l_N^T xi_0`` back
through the increments, so no large matrix is ever formed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._core import kernels
from ._util import pmap, stream
from .lie import (
    FlagPoint,
    NotTransverseError,
    OptimizerWarning,
    flag_distance,
    flag_of,
    flat_from_flags,
    flat_projection,
    is_transverse,
    opposite_flag_of,
    reversal,
    standard_opposite_flag,
)
from .walk import MeasureSpec, run_walk

__all__ = [
    "DeviationSeries",
    "DensityCurve",
    "AngularReport",
    "BirkhoffReport",
    "FlatMassReport",
    "default_burn",
    "deviation_series",
    "density_curve",
    "angular_rate_check",
    "birkhoff_flat_distance",
    "stationary_flags",
    "stationary_flat_mass",
    "distform_envelope",
    "line_flag",
]


def default_burn(n: int) -> int:
    return max(1000, n // 4)


@dataclass(eq=False)
class DeviationSeries:
    """``dev[i-1]`` is the deviation at step i, for i = 1..n."""

    dev: np.ndarray
    t: np.ndarray
    seed: int
    index: int
    n_burn: int
    stability_gap: float
    angular: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.dev)

    @property
    def flagged(self) -> bool:
        return not self.stability_gap <= 0.1

    def occupancy(self, r) -> np.ndarray:
        """Fraction of steps with ``dev <= r``; vectorized over ``r``."""
        s = np.sort(self.dev)
        return np.searchsorted(s, np.asarray(r, dtype=float), side="right") / len(s)


def _backward_flags(mu: MeasureSpec, choices: np.ndarray, l_final: np.ndarray) -> np.ndarray:
    """``eta_i = b_{i+1} ... b_N l_N^T xi_0`` for i = 0..N."""
    n = len(choices)
    out = np.empty((n + 1, mu.dim, mu.dim))
    kernels.flag_orbit(mu.atoms, np.ascontiguousarray(choices[::-1]), np.ascontiguousarray(l_final.T), out)
    return out[::-1]


def deviation_series(mu: MeasureSpec, n: int, seed: int, index: int = 0, n_burn: int | None = None,
                     keep_angular: bool = False) -> DeviationSeries:
    """Deviations for steps 1..n of one trajectory.

    The walk runs ``n + n_burn`` steps; the final frame stands in for the
    limit.  The stability gap compares the limit flag at ``n + n_burn`` with
    the one at ``n + n_burn // 2``.
    """
    n_burn = default_burn(n) if n_burn is None else int(n_burn)
    total = n + n_burn
    rng = stream(seed, index)
    choices = mu.sample(rng, total)
    half = n + n_burn // 2
    _, _, _, _, mid = run_walk(mu, choices[:half])
    t_seq, _, l_seq, _, final = run_walk(mu, choices, store_l=True)
    gap = flag_distance(flag_of(final.k), flag_of(mid.k))
    eta = _backward_flags(mu, choices, final.l)
    dev = np.empty(n)
    ang = np.empty((n, mu.dim, mu.dim))
    kernels.deviation_terms(np.ascontiguousarray(t_seq[1:n + 1]), np.ascontiguousarray(l_seq[1:n + 1]),
                            np.ascontiguousarray(eta[1:n + 1]), dev, ang)
    return DeviationSeries(dev, t_seq[1:n + 1].copy(), seed, index, n_burn, gap,
                           ang if keep_angular else None)


def _prefix_liminf(dev: np.ndarray, grid: np.ndarray, window: float) -> np.ndarray:
    n = len(dev)
    start = max(1, int(math.ceil((1.0 - window) * n)))
    m = np.arange(start, n + 1)
    out = np.empty(len(grid))
    for j, r in enumerate(grid):
        c = np.cumsum(dev <= r)
        out[j] = float((c[m - 1] / m).min())
    return out


@dataclass(eq=False)
class DensityCurve:
    grid: np.ndarray
    density_p10: np.ndarray
    density_median: np.ndarray
    per_seed: np.ndarray
    n_traj: int
    n_steps: int
    seed: int
    n_flagged: int = 0
    median_dev: np.ndarray | None = None

    def first_radius(self, level: float, coverage: float = 0.9) -> float | None:
        """Smallest grid radius whose per-seed density exceeds ``level`` in a
        ``coverage`` fraction of seeds."""
        frac = (self.per_seed > level).mean(axis=0)
        hits = np.flatnonzero(frac >= coverage)
        return float(self.grid[hits[0]]) if hits.size else None


def _density_job(args):
    mu, n, seed, index, n_burn, grid, window = args
    s = deviation_series(mu, n, seed, index, n_burn)
    return _prefix_liminf(s.dev, grid, window), s.flagged, s.dev


def density_curve(mu: MeasureSpec, r_grid, n: int, n_traj: int, seed: int, window: float = 0.2,
                  n_burn: int | None = None, jobs: int = 1) -> DensityCurve:
    """Per-seed liminf proxies of the occupation density of ``{dev <= R}``.

    The liminf is replaced by the minimum of prefix densities over the last
    ``window`` fraction of the run.  Flagged trajectories (unstable limit)
    are excluded from the aggregates.
    """
    grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("R grid must be sorted ascending")
    jobs_args = [(mu, n, seed, i, n_burn, grid, window) for i in range(n_traj)]
    res = pmap(_density_job, jobs_args, jobs)
    per_seed = np.array([r[0] for r in res if not r[1]]).reshape(-1, len(grid))
    devs = np.array([r[2] for r in res if not r[1]])
    n_flagged = sum(1 for r in res if r[1])
    if len(per_seed) == 0:
        nan = np.full(len(grid), np.nan)
        return DensityCurve(grid, nan, nan, per_seed, n_traj, n, seed, n_flagged)
    return DensityCurve(grid, np.percentile(per_seed, 10, axis=0), np.median(per_seed, axis=0),
                        per_seed, n_traj, n, seed, n_flagged, np.median(devs, axis=0))


@dataclass(eq=False)
class AngularReport:
    """Per entry (i, j): envelope of ``|(k_n^T k_inf)_ij| exp(t_j - t_i)``.

    Rows are listed for every off-diagonal entry; only ``i > j`` carries a
    claim (``below`` is True), the rest is informational.
    """

    entries: list
    envelope: np.ndarray
    log_slope: np.ndarray
    p_value: np.ndarray
    below: np.ndarray
    subset_fraction: float

    @property
    def growth_flag(self) -> bool:
        """Some below-diagonal entry has a significantly positive slope."""
        m = self.below
        return bool(np.any((self.log_slope[m] > 0) & (self.p_value[m] < 0.05)))


def angular_rate_check(series: DeviationSeries, eps: float = 0.1, n_batches: int = 25,
                       floor: float = 1e-12) -> AngularReport:
    """Angular convergence check on a density-(1 - eps) set of steps.

    The subset keeps the steps whose deviation is at most its (1 - eps)
    quantile.  Batch maxima of the log ratio over ``n_batches`` consecutive
    time blocks are regressed on time; a positive slope with two-sided
    p < 0.05 flags growth.
    """
    if series.angular is None:
        raise ValueError("series was computed without angular data; use keep_angular=True")
    ang = np.abs(series.angular)
    cut = np.quantile(series.dev, 1.0 - eps)
    keep = np.flatnonzero(series.dev <= cut)
    d = ang.shape[1]
    entries = [(i, j) for i in range(d) for j in range(d) if i != j]
    env = np.empty(len(entries))
    slope = np.empty(len(entries))
    pval = np.empty(len(entries))
    blocks = np.array_split(keep, n_batches)
    centers = np.array([b.mean() for b in blocks if b.size])
    for e, (i, j) in enumerate(entries):
        vals = ang[keep, i, j]
        env[e] = float(vals.max())
        logs = np.log(np.maximum(ang[:, i, j], floor))
        y = np.array([logs[b].max() for b in blocks if b.size])
        if np.ptp(y) == 0:
            slope[e], pval[e] = 0.0, 1.0
        else:
            fit = stats.linregress(centers, y)
            slope[e], pval[e] = fit.slope, fit.pvalue
    below = np.array([i > j for i, j in entries])
    return AngularReport(entries, env, slope, pval, below, len(keep) / series.n)


def line_flag(theta: float) -> FlagPoint:
    """Opposite flag of R^2 whose line has angle ``theta``."""
    return FlagPoint(np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]),
                     check=False)


def _distance_from_origin(minus: FlagPoint, plus: FlagPoint, tau: float):
    pair = is_transverse(minus, plus, tau)
    flat = flat_from_flags(pair, tau)
    _, val, ok = flat_projection(np.eye(minus.dim), flat)
    return val, ok


def _lu_nopivot(m):
    d = m.shape[0]
    lo = np.eye(d)
    up = m.copy()
    for j in range(d - 1):
        lo[j + 1:, j] = up[j + 1:, j] / up[j, j]
        up[j + 1:, j:] -= np.outer(lo[j + 1:, j], up[j, j:])
    return lo, np.triu(up)


def _batched_lu(m):
    """LU without pivoting of a stack of matrices; returns (L, diag U)."""
    up = np.array(m, dtype=float)
    d = up.shape[-1]
    lo = np.broadcast_to(np.eye(d), up.shape).copy()
    for j in range(d - 1):
        f = up[:, j + 1:, j] / up[:, j, j][:, None]
        lo[:, j + 1:, j] = f
        up[:, j + 1:, :] -= f[:, :, None] * up[:, j, None, :]
    return lo, np.diagonal(up, axis1=1, axis2=2)


def _scaled(m: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``a_-t m a_t`` computed entrywise in log scale."""
    gap = t[None, :] - t[:, None]
    with np.errstate(divide="ignore"):
        mag = np.log(np.abs(m))
    out = np.sign(m) * np.exp(np.where(m == 0, -np.inf, mag + gap))
    return out


@dataclass(eq=False)
class BirkhoffReport:
    steps: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: float
    rhs_all: np.ndarray
    skipped: int
    radius: float
    birkhoff_mean: float
    not_converged: int = 0


def birkhoff_flat_distance(mu: MeasureSpec, xi_minus: FlagPoint | None, n: int, seed: int,
                           radius: float = 5.0, n_sample: int = 200, index: int = 0,
                           n_burn: int | None = None, max_gap: float = 600.0,
                           tau: float = 1e-9) -> BirkhoffReport:
    """Both sides of the flat-distance identity along one trajectory.

    Left side, from the forward factored product:
        d(P_i, F(xi^-, xi_b)) = d(e, F(a_-t k_i^T xi^-, a_-t k_i^T xi_b)),
    with ``k_i^T xi_b`` obtained from the aligned increments.
    Right side, from the shifted sequence:
        d(e, F(b_i^-1 ... b_1^-1 xi^-, eta_i)).
    The left side needs ``k_i^T k_inf`` at full relative precision and is
    evaluated on ``n_sample`` steps with root gap below ``max_gap``; the right
    side is computed at every step and feeds the Birkhoff average of
    ``{dist <= radius}``.
    """
    d = mu.dim
    xi_minus = standard_opposite_flag(d) if xi_minus is None else xi_minus
    n_burn = default_burn(n) if n_burn is None else int(n_burn)
    total = n + n_burn
    rng = stream(seed, index)
    choices = mu.sample(rng, total)
    t_seq, k_seq, _, inc, final = run_walk(mu, choices, store_k=True, store_l=False, store_increments=True)
    eta = _backward_flags(mu, choices, final.l)

    zeta = np.empty((n + 1, d, d))
    inv = np.ascontiguousarray(np.linalg.inv(mu.atoms))
    kernels.flag_orbit(inv, np.ascontiguousarray(choices[:n]), np.ascontiguousarray(xi_minus.frame), zeta)

    skipped = 0
    not_conv = 0
    rhs_all = np.full(n, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizerWarning)
        for i in range(1, n + 1):
            try:
                val, ok = _distance_from_origin(FlagPoint(zeta[i], check=False), FlagPoint(eta[i], check=False), tau)
            except NotTransverseError:
                skipped += 1
                continue
            not_conv += not ok
            rhs_all[i - 1] = val

    # k_i^T k_N for the sampled steps, by backward accumulation
    gaps = t_seq[:, 0] - t_seq[:, -1]
    eligible = np.flatnonzero((np.arange(total + 1) >= 1) & (np.arange(total + 1) <= n) & (gaps <= max_gap))
    pick_rng = stream(seed, index + (1 << 32))
    if len(eligible) > n_sample:
        steps = np.sort(pick_rng.choice(eligible, size=n_sample, replace=False))
    else:
        steps = eligible
    rel = {}
    acc = np.eye(d)
    wanted = set(int(s) for s in steps)
    lowest = int(steps.min()) if len(steps) else total
    for i in range(total - 1, lowest - 1, -1):
        acc = inc[i] @ acc
        if i in wanted:
            rel[i] = acc.copy()

    jr = reversal(d)
    lhs = np.empty(len(steps))
    rhs = np.empty(len(steps))
    minus_rev = xi_minus.frame[:, ::-1]
    for s, i in enumerate(steps):
        t = t_seq[i]
        z = _scaled(rel[i], t)
        plus = flag_of(z)
        m = k_seq[i].T @ minus_rev
        lo, _ = _lu_nopivot(jr @ m @ jr)
        u1 = jr @ lo @ jr
        minus = opposite_flag_of(_scaled(u1, t))
        try:
            lhs[s], _ = _distance_from_origin(minus, plus, tau)
        except NotTransverseError:
            lhs[s] = np.nan
        rhs[s] = rhs_all[i - 1]
    good = np.isfinite(lhs) & np.isfinite(rhs)
    residual = float(np.abs(lhs[good] - rhs[good]).max()) if good.any() else float("nan")
    valid = rhs_all[np.isfinite(rhs_all)]
    mean = float((valid <= radius).mean()) if valid.size else float("nan")
    return BirkhoffReport(steps, lhs, rhs, residual, rhs_all, skipped, radius, mean, not_conv)


@dataclass(eq=False)
class FlatMassReport:
    grid: np.ndarray
    fraction: np.ndarray
    r_star: float | None
    distances: np.ndarray
    n_discarded: int
    n_samples: int


def stationary_flags(mu: MeasureSpec, n_samples: int, seed: int, n_push: int = 500,
                     n_spread: int = 32, diameter: float = 1e-4):
    """Sample flags from the stationary measure.

    Each sample is the limit flag ``k_N xi_0`` of an ``n_push`` step
    product.  The images of ``n_spread`` fixed random flags under the same
    product must agree to ``diameter``; the bound used is twice the largest
    strictly-lower entry of ``a_t L a_-t`` over the spread, where
    ``l_N F_j = L U``, which dominates the flag distance to ``k_N xi_0``.

    Returns
    -------
    frames : ndarray, shape (m, d, d)
    n_discarded : int
    """
    d = mu.dim
    spread_rng = stream(seed, (1 << 40) + 1)
    spread = []
    for _ in range(n_spread):
        q, _ = np.linalg.qr(spread_rng.normal(size=(d, d)))
        spread.append(q)
    spread = np.array(spread)
    frames = []
    discarded = 0
    for s in range(n_samples):
        rng = stream(seed, s)
        ch = mu.sample(rng, n_push)
        t_seq, _, _, _, fin = run_walk(mu, ch)
        lo, piv = _batched_lu(np.einsum("ij,sjk->sik", fin.l, spread))
        if np.any(np.abs(piv) < 1e-300):
            worst = np.inf
        else:
            t = fin.t
            low = np.tril(lo, -1)
            with np.errstate(divide="ignore"):
                mag = np.where(low == 0, -np.inf, np.log(np.abs(low)) + (t[:, None] - t[None, :]))
            worst = float(np.exp(mag.max()))
        if 2 * worst > diameter:
            discarded += 1
            continue
        frames.append(fin.k)
    return np.array(frames).reshape(-1, d, d), discarded


def stationary_flat_mass(mu: MeasureSpec, r_grid, n_samples: int, seed: int,
                         xi_minus: FlagPoint | None = None, n_push: int = 500, frames=None,
                         tau: float = 1e-12) -> FlatMassReport:
    """Stationary mass of ``{xi : d(e, F(xi^-, xi)) <= R'}`` over a grid of R'.

    ``frames`` may carry a precomputed stationary sample (see
    :func:`stationary_flags`) to share it between several ``xi^-``.
    """
    d = mu.dim
    xi_minus = standard_opposite_flag(d) if xi_minus is None else xi_minus
    discarded = 0
    if frames is None:
        frames, discarded = stationary_flags(mu, n_samples, seed, n_push)
    dist = np.full(len(frames), np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OptimizerWarning)
        for s, f in enumerate(frames):
            try:
                dist[s], _ = _distance_from_origin(xi_minus, FlagPoint(f, check=False), tau)
            except NotTransverseError:
                dist[s] = np.inf
    grid = np.asarray(r_grid, dtype=float)
    frac = np.array([(dist <= r).mean() for r in grid]) if len(dist) else np.zeros(len(grid))
    hits = np.flatnonzero(frac > 2.0 / 3.0)
    r_star = float(grid[hits[0]]) if hits.size else None
    return FlatMassReport(grid, frac, r_star, dist, discarded, len(frames))


def distform_envelope(dev: np.ndarray, flat_dist: np.ndarray) -> float:
    """Smallest C with ``dev <= C * flat_dist + C`` on the given steps."""
    dev = np.asarray(dev, dtype=float)
    fd = np.asarray(flat_dist, dtype=float)
    ok = np.isfinite(dev) & np.isfinite(fd)
    return float(np.max(dev[ok] / (fd[ok] + 1.0))) if ok.any() else float("nan")
