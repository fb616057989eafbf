"""Experiment runners behind the command-line interface.

Each runner takes a validated :class:`~weylwalk.config.ExperimentConfig`
and returns a :class:`Result`: named scalar metrics (what assertion blocks
test), CSV tables, JSON reports and raised numerical flags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import deviation as dv
from . import quotient as qt
from . import renewal as rn
from ._util import pmap, stream
from .config import ConfigError, Param
from .lie import (
    HYPERBOLIC_SCALE,
    base_pair,
    cartan_decompose,
    cartan_projection,
    diag_exp,
    distance_to_flat,
    flat_from_flags,
    is_transverse,
    random_group_element,
    same_flat,
    symspace_distance,
    weyl_orbit,
)
from .walk import scalar_observable


@dataclass
class Result:
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    reports: dict = field(default_factory=dict)  # file name -> JSON-able object
    flags: dict = field(default_factory=dict)  # flag name -> bool


@dataclass(frozen=True)
class ExperimentSpec:
    run: object
    params: dict
    metrics: tuple
    flags: tuple = ()
    needs_measure: bool = False
    needs_group: bool = False


def _p(default, kind, *choices, optional=False):
    return Param(default, kind, tuple(choices), optional)


# -- cartan-selftest ------------------------------------------------------


def run_selftest(cfg, jobs):
    p = cfg.params
    rng = stream(cfg.seed, 0)
    rows = []
    recon = sym = origin = 0.0
    for d in p["dims"]:
        d = int(d)
        r_err = s_err = o_err = 0.0
        for _ in range(p["n_matrices"]):
            g = random_group_element(d, rng, scale=p["scale"])
            c = cartan_decompose(g)
            r_err = max(r_err, float(np.linalg.norm(c.matrix() - g) / np.linalg.norm(g)))
            s_err = max(s_err, float(np.abs(cartan_projection(np.linalg.inv(g)) + c.t[::-1]).max()))
            s = rng.normal(scale=p["scale"], size=d)
            s -= s.mean()
            o_err = max(o_err, abs(symspace_distance(np.eye(d), diag_exp(s)) - float(np.linalg.norm(s))))
        rows += [("reconstruction", d, p["n_matrices"], r_err), ("kappa_symmetry", d, p["n_matrices"], s_err),
                 ("origin_distance", d, p["n_matrices"], o_err)]
        recon, sym, origin = max(recon, r_err), max(sym, s_err), max(origin, o_err)
    fiber_ok = True
    equi = 0.0
    for d in (2, 3):
        pair = base_pair(d)
        h = random_group_element(d, rng)
        pair_h = is_transverse(pair.minus.moved_by(h), pair.plus.moved_by(h))
        orbit = weyl_orbit(pair_h)
        fiber_ok &= len(orbit) == math.factorial(d)
        flat = flat_from_flags(pair_h)
        fiber_err = max(same_flat(flat_from_flags(q), flat, n_samples=4) for q in orbit)
        e = same_flat(flat_from_flags(pair).moved_by(h), flat, n_samples=8)
        equi = max(equi, e, fiber_err)
        rows += [("weyl_fiber", d, len(orbit), fiber_err), ("flat_equivariance", d, 8, e)]
    flat = flat_from_flags(base_pair(2))
    sl2 = 0.0
    for _ in range(p["n_sl2"]):
        g = random_group_element(2, rng, scale=p["scale"])
        z = qt.upper_point(g)
        exact = math.asinh(abs(z.real) / z.imag) / HYPERBOLIC_SCALE
        sl2 = max(sl2, abs(distance_to_flat(g, flat) - exact))
    rows.append(("sl2_flat_distance", 2, p["n_sl2"], sl2))
    metrics = {"max_reconstruction_error": recon, "max_kappa_symmetry_error": sym,
               "max_origin_distance_error": origin, "weyl_fiber_ok": bool(fiber_ok),
               "max_flat_equivariance_error": equi, "max_sl2_flat_error": sl2}
    return Result(metrics, {"selftest.csv": (("check", "dim", "n", "max_error"), rows)})


# -- deviation / angular --------------------------------------------------


def _birkhoff_job(args):
    mu, n, seed, index, n_burn, n_sample = args
    return dv.birkhoff_flat_distance(mu, None, n, seed, n_sample=n_sample, index=index, n_burn=n_burn)


def _density(cfg, jobs, metrics, tables, flags):
    p = cfg.params
    mu = cfg.measure
    curve = dv.density_curve(mu, p["r_grid"], p["n"], p["n_traj"], cfg.seed, p["window"], p["n_burn"], jobs)
    frac = (curve.per_seed > p["level"]).mean(axis=0) if len(curve.per_seed) else np.zeros(len(curve.grid))
    r_star = curve.first_radius(p["level"], p["coverage"])
    monotone = bool(np.all(np.diff(curve.per_seed, axis=1) >= 0)) if len(curve.per_seed) else False
    rows = [(r, a, b, f) for r, a, b, f in zip(curve.grid, curve.density_p10, curve.density_median, frac)]
    s = dv.deviation_series(mu, p["n"], cfg.seed, 0, p["n_burn"])
    srows = [(i + 1, s.dev[i], *s.t[i]) for i in range(s.n)]
    metrics.update({
        "r_star": float("nan") if r_star is None else r_star,
        "best_coverage": float(frac.max()),
        "coverage_at_r_star": float(frac[np.searchsorted(curve.grid, r_star)]) if r_star is not None else 0.0,
        "monotone": monotone,
        "n_flagged": curve.n_flagged,
        "n_used": int(len(curve.per_seed)),
        "max_median_dev": float(np.max(curve.median_dev)) if curve.median_dev is not None else float("nan"),
    })
    tables["density.csv"] = (("R", "density_p10", "density_median", "seed_fraction_above_level"), rows)
    tables["deviation_series.csv"] = (("step", "dev") + tuple(f"t_{k + 1}" for k in range(mu.dim)), srows)
    flags["unstable_limit"] = curve.n_flagged > 0


def _birkhoff(cfg, jobs, metrics, tables, flags):
    p = cfg.params
    args = [(cfg.measure, p["n"], cfg.seed, i, p["n_burn"], p["birkhoff_samples"])
            for i in range(p["birkhoff_traj"])]
    reps = pmap(_birkhoff_job, args, jobs)
    rows = [(i, int(st), a, b) for i, r in enumerate(reps) for st, a, b in zip(r.steps, r.lhs, r.rhs)]
    res = [r.residual for r in reps]
    metrics.update({
        "birkhoff_residual": float(max(res)) if res else float("nan"),
        "birkhoff_pairs": sum(int(np.isfinite(r.lhs).sum()) for r in reps),
        "birkhoff_not_converged": sum(r.not_converged for r in reps),
        "birkhoff_mean": float(np.mean([r.birkhoff_mean for r in reps])),
    })
    tables["birkhoff.csv"] = (("seed_index", "step", "forward", "shifted"), rows)
    flags["not_transverse"] = sum(r.skipped for r in reps) > 0


def _flat_mass(cfg, jobs, metrics, tables, flags):
    p = cfg.params
    mu = cfg.measure
    if mu.dim != 2:
        raise ConfigError(["params.flat_mass_samples: the direction grid needs d = 2"])
    frames, discarded = dv.stationary_flags(mu, p["flat_mass_samples"], cfg.seed)
    rows = []
    r_primes = []
    at_zero = []
    m = p["flat_mass_directions"]
    for j in range(m):
        theta = math.pi * j / m
        rep = dv.stationary_flat_mass(mu, p["flat_mass_grid"], len(frames), cfg.seed,
                                      xi_minus=dv.line_flag(theta), frames=frames)
        rows += [(theta, r, f) for r, f in zip(rep.grid, rep.fraction)]
        r_primes.append(float("inf") if rep.r_star is None else rep.r_star)
        at_zero.append(float(rep.fraction[0]) if rep.grid[0] == 0.0 else float("nan"))
    metrics.update({
        "flat_mass_r_prime": max(r_primes),
        "flat_mass_at_zero": max(at_zero),
        "flat_mass_used": int(len(frames)),
        "flat_mass_discarded": int(discarded),
    })
    tables["flat_mass.csv"] = (("direction", "R_prime", "fraction"), rows)
    flags["spread_discard"] = discarded > 0


def run_deviation(cfg, jobs):
    """Density of bounded deviation, plus optional two-route flat distance
    checks (``birkhoff_traj > 0``) and stationary flat mass over a grid of
    opposite-flag directions (``flat_mass_samples > 0``)."""
    p = cfg.params
    metrics, tables, flags = {}, {}, {}
    if p["density"]:
        _density(cfg, jobs, metrics, tables, flags)
    if p["birkhoff_traj"]:
        _birkhoff(cfg, jobs, metrics, tables, flags)
    if p["flat_mass_samples"]:
        _flat_mass(cfg, jobs, metrics, tables, flags)
    return Result(metrics, tables, flags=flags)


def _angular_job(args):
    mu, n, seed, index, n_burn, eps, n_batches = args
    s = dv.deviation_series(mu, n, seed, index, n_burn, keep_angular=True)
    if s.flagged:
        return index, None
    return index, dv.angular_rate_check(s, eps, n_batches)


def run_angular(cfg, jobs):
    p = cfg.params
    args = [(cfg.measure, p["n"], cfg.seed, i, p["n_burn"], p["eps"], p["n_batches"]) for i in range(p["n_traj"])]
    res = pmap(_angular_job, args, jobs)
    rows = []
    growth = 0
    used = 0
    env = 0.0
    for index, rep in res:
        if rep is None:
            continue
        used += 1
        growth += rep.growth_flag
        for e, (i, j) in enumerate(rep.entries):
            rows.append((index, i + 1, j + 1, rep.envelope[e], rep.log_slope[e], rep.p_value[e], bool(rep.below[e])))
            if rep.below[e]:
                env = max(env, float(rep.envelope[e]))
    metrics = {"n_used": used, "n_growth": growth,
               "fraction_no_growth": (used - growth) / p["n_traj"], "max_envelope": env}
    return Result(metrics, {"angular.csv": (("seed_index", "i", "j", "envelope", "log_slope", "p_value", "claimed"),
                                            rows)}, flags={"unstable_limit": used < p["n_traj"]})


# -- renewal family -------------------------------------------------------


def run_renewal(cfg, jobs):
    p = cfg.params
    mu = cfg.measure
    shifts = np.asarray(p["shifts"], dtype=float)
    rate = rn.observable_rate(mu, seed=cfg.seed + 7919)
    large = shifts >= p["shift_min"]
    tables = {}
    metrics = {}
    if p["observable"] == "kesten":
        v = p["v"] if p["v"] is not None else [1.0] + [0.0] * (mu.dim - 1)
        curve = rn.log_norm_renewal(mu, v, p["interval"], shifts, p["n_traj"], cfg.seed, p["horizon"])
        mean, se, target, horizon, late = curve.mean, curve.stderr, curve.target, curve.horizon, curve.late_fraction
        counts = None
        lam = curve.rate
    else:
        vc = rn.visit_counts(mu, p["interval"], shifts, p["n_traj"], cfg.seed, p["horizon"], rate=rate)
        mean, se, target, horizon, late = vc.mean, vc.stderr, vc.target, vc.horizon, vc.late_fraction
        counts = vc.counts
        lam = vc.rate
    header = ["shift", "mean_count", "stderr", "n_effective"]
    band = p["conjecture_band"]
    if band:
        header += ["band_lo", "band_hi", "in_band"]
    rows = []
    for i, s in enumerate(shifts):
        row = [s, mean[i], se[i], p["n_traj"]]
        if band:
            lo, hi = 0.7 * target, 1.3 * target
            row += [lo, hi, bool(lo <= mean[i] <= hi)]
        rows.append(tuple(row))
    tables["renewal.csv"] = (tuple(header), rows)
    sel = mean[large] if large.any() else np.array([np.nan])
    metrics.update({
        "rate": lam,
        "target": target,
        "horizon": horizon,
        "late_fraction": late,
        "sup_mean": float(np.max(mean)),
        "max_rel_error_large_shift": float(np.max(np.abs(sel / target - 1.0))),
        "max_min_ratio_large_shift": float(np.max(sel) / np.min(sel)) if np.min(sel) > 0 else float("inf"),
    })
    if counts is not None and large.any():
        tail = rn.count_tail(counts[large].ravel(), p["tail_min_prob"])
        tables["tail.csv"] = (("k", "survival"), list(zip(tail.k, tail.survival)))
        metrics.update({"tail_slope": tail.slope, "tail_slope_stderr": tail.slope_stderr,
                        "tail_r_squared": tail.r_squared, "tail_decreasing": tail.decreasing,
                        "tail_points": int(len(tail.k))})
    else:
        metrics.update({"tail_slope": float("nan"), "tail_slope_stderr": float("nan"),
                        "tail_r_squared": float("nan"), "tail_decreasing": False, "tail_points": 0})
    return Result(metrics, tables, flags={"horizon": late > rn.LATE_THRESHOLD})


def run_hitting(cfg, jobs):
    p = cfg.params
    mu = cfg.measure
    starts = rn.random_starts(mu.dim, p["n_starts"], cfg.seed + 1)
    shifts = np.asarray(p["shifts"], dtype=float)
    l_star, table = rn.minimal_hitting_length(mu, p["lengths"], shifts, starts, p["n_traj"], cfg.seed, p["level"])
    rows = []
    for i, length in enumerate(p["lengths"]):
        for j in range(len(starts)):
            for k, s in enumerate(shifts):
                rows.append((length, j, s, table[i, j, k]))
    metrics = {"L_star": float("nan") if l_star is None else l_star,
               "min_probability_longest": float(table[-1].min())}
    return Result(metrics, {"hitting.csv": (("length", "start", "shift", "probability"), rows)})


def run_escape(cfg, jobs):
    p = cfg.params
    mu = cfg.measure
    starts = rn.random_starts(mu.dim, p["n_starts"], cfg.seed + 1, scales=tuple(p["start_scales"]))
    rep = rn.escape_probability(mu, p["radius"], p["n0_grid"], starts, p["n_traj"], cfg.seed, p["horizon"])
    rows = []
    for j, g0 in enumerate(starts):
        t0 = float(scalar_observable(cartan_decompose(g0).t))
        for i, n0 in enumerate(rep.n0_grid):
            rows.append((j, t0, int(n0), rep.probability[i, j]))
    n0 = rep.n0_star(p["eps"])
    metrics = {"n0_star": float("nan") if n0 is None else n0,
               "min_probability_last": float(rep.probability[-1].min()), "horizon": rep.horizon}
    return Result(metrics, {"escape.csv": (("start", "start_observable", "n0", "probability"), rows)})


# -- quotient family ------------------------------------------------------


def _target(cfg):
    p = cfg.params
    center = p["center"] if p["center"] is not None else cfg.group.basepoint
    return qt.BallTarget(center, p["radius"], cfg.group)


def run_quotient_green(cfg, jobs):
    p = cfg.params
    target = _target(cfg)
    start = p["start"] if p["start"] is not None else target.center
    x0 = qt.frame_at(start, p["start_angle"])
    flags = {"not_injective": not target.injective()}
    if p["process"] == "walk":
        if cfg.measure is None:
            from .config import ConfigError

            raise ConfigError(["measure: required when params.process is 'walk'"])
        g = qt.walk_green(cfg.group, cfg.measure, x0, target, p["n_max"], p["n_traj"], cfg.seed)
        rows = [(i, v) for i, v in enumerate(g.per_traj)]
        metrics = {"estimate": g.estimate, "stderr": g.stderr, "tail_flag": g.tail_flag,
                   "global_rate": g.global_rate, "late_rate": g.late_rate}
        flags["greedy_cap"] = g.caps > 0
        header = ("trajectory", "visits")
    else:
        rng = stream(cfg.seed, 0)
        starts = [x0 @ qt.rotation(th) for th in rng.uniform(0, 2 * math.pi, p["n_traj"])]
        g = qt.geodesic_green(cfg.group, starts, target, p["t_max"], p["dt"])
        rows = [(i, v) for i, v in enumerate(g.per_start)]
        metrics = {"estimate": g.estimate, "stderr": float(np.std(g.per_start, ddof=1) / math.sqrt(len(starts)))
                   if len(starts) > 1 else float("nan"), "tail_flag": g.tail_flag,
                   "global_rate": g.global_rate, "late_rate": g.late_rate}
        header = ("start", "time_in_target")
    return Result(metrics, {"green.csv": (header, rows)}, flags=flags)


def run_poincare(cfg, jobs):
    p = cfg.params
    z1 = p["z1"] if p["z1"] is not None else cfg.group.basepoint
    z2 = p["z2"] if p["z2"] is not None else cfg.group.basepoint
    ps = qt.poincare_series(cfg.group, z1, z2, p["s"], p["word_len_max"])
    fit = qt.critical_exponent(cfg.group, z1, z2, p["r_max"])
    metrics = {"partial_sum": ps.partial_sum, "growth_diagnostic": ps.growth_diagnostic,
               "diverging": ps.diverging, "collision_rate": ps.collision_rate, "n_elements": ps.n_elements,
               "delta": fit.delta, "delta_stderr": fit.stderr, "n_points": fit.n_points,
               "delta_lo3": fit.delta - 3 * fit.stderr, "delta_hi3": fit.delta + 3 * fit.stderr}
    tables = {"poincare_shells.csv": (("word_length", "shell_sum"), list(enumerate(ps.shell_sums))),
              "orbit_counts.csv": (("R", "log_count"), list(zip(fit.radii, fit.log_counts)))}
    return Result(metrics, tables, flags={"collision": ps.flagged, "wide": fit.wide})


def run_dichotomy(cfg, jobs):
    p = cfg.params
    target = _target(cfg)
    v = qt.dichotomy_experiment(cfg.group, cfg.measure, target, p["n_max"], p["n_traj"], p["t_max"], p["dt"],
                                p["n_starts"], cfg.seed)
    report = {"lambda": cfg.group.to_dict(), "mu_hash": cfg.measure.digest(), "verdict": v.verdict,
              "evidence": v.evidence}
    rows = []
    for proc in ("walk", "geodesic"):
        e = v.evidence[proc]
        rows.append((proc, e["estimate_short"], e["estimate_long"], e["global_rate"], e["late_rate"],
                     e["tail_flag"], e["signature"]))
    metrics = {"verdict": v.verdict, "walk_signature": v.walk, "geodesic_signature": v.geodesic,
               "inconsistent": v.verdict == "inconsistent"}
    return Result(metrics, {"dichotomy.csv": (("process", "estimate_short", "estimate_long", "global_rate",
                                               "late_rate", "tail_flag", "signature"), rows)},
                  {"dichotomy.json": report}, {"not_injective": not target.injective()})


def run_volume(cfg, jobs):
    p = cfg.params
    t = np.asarray(p["t_grid"], dtype=float)
    sigma, ratio = qt.volume_density_check(t)
    est, se, exact = qt.ball_volume_monte_carlo(p["radius"], p["n_samples"], cfg.seed)
    rows = list(zip(t, sigma, ratio))
    metrics = {"ratio_at_max_t": float(ratio[-1]), "limit_error": abs(float(ratio[-1]) - 0.5),
               "sigma_at_zero": float(sigma[0]) if t[0] == 0 else float("nan"),
               "mc_volume": est, "mc_stderr": se, "exact_volume": exact, "mc_rel_error": abs(est / exact - 1.0)}
    return Result(metrics, {"volume.csv": (("t", "sigma", "ratio"), rows)})


R_GRID = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0]

REGISTRY = {
    "cartan-selftest": ExperimentSpec(run_selftest, {
        "n_matrices": _p(1000, "posint"), "dims": _p([2, 3, 4, 5, 6], "intgrid"), "scale": _p(1.0, "posreal"),
        "n_sl2": _p(200, "posint"),
    }, ("max_reconstruction_error", "max_kappa_symmetry_error", "max_origin_distance_error", "weyl_fiber_ok",
        "max_flat_equivariance_error", "max_sl2_flat_error")),
    "deviation": ExperimentSpec(run_deviation, {
        "n": _p(5000, "posint"), "n_traj": _p(100, "posint"), "n_burn": _p(1000, "nonnegint", optional=True),
        "r_grid": _p(R_GRID, "grid"), "window": _p(0.2, "prob"), "level": _p(0.9, "prob"),
        "coverage": _p(0.9, "prob"), "density": _p(True, "bool"),
        "birkhoff_traj": _p(0, "nonnegint"), "birkhoff_samples": _p(200, "posint"),
        "flat_mass_samples": _p(0, "nonnegint"), "flat_mass_directions": _p(8, "posint"),
        "flat_mass_grid": _p([0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0], "grid"),
    }, ("r_star", "best_coverage", "coverage_at_r_star", "monotone", "n_flagged", "n_used", "max_median_dev",
        "birkhoff_residual", "birkhoff_pairs", "birkhoff_not_converged", "birkhoff_mean",
        "flat_mass_r_prime", "flat_mass_at_zero", "flat_mass_used", "flat_mass_discarded"),
        ("unstable_limit", "not_transverse", "spread_discard"), needs_measure=True),
    "angular": ExperimentSpec(run_angular, {
        "n": _p(5000, "posint"), "n_traj": _p(100, "posint"), "n_burn": _p(1000, "nonnegint", optional=True),
        "eps": _p(0.1, "prob"), "n_batches": _p(25, "posint"),
    }, ("n_used", "n_growth", "fraction_no_growth", "max_envelope"), ("unstable_limit",), needs_measure=True),
    "renewal": ExperimentSpec(run_renewal, {
        "observable": _p("cartan", "choice", "cartan", "kesten"), "interval": _p([0.0, 2.0], "grid"),
        "shifts": _p([0.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0], "grid"), "n_traj": _p(10000, "posint"),
        "horizon": _p(None, "posint", optional=True), "v": _p(None, "vector", optional=True),
        "shift_min": _p(40.0, "real"), "tail_min_prob": _p(1e-3, "prob"), "conjecture_band": _p(False, "bool"),
    }, ("rate", "target", "horizon", "late_fraction", "sup_mean", "max_rel_error_large_shift",
        "max_min_ratio_large_shift", "tail_slope", "tail_slope_stderr", "tail_r_squared", "tail_decreasing",
        "tail_points"), ("horizon",), needs_measure=True),
    "hitting": ExperimentSpec(run_hitting, {
        "lengths": _p([0.5, 1.0, 2.0, 4.0, 8.0], "grid"), "shifts": _p([10.0, 20.0, 30.0, 40.0, 50.0, 60.0], "grid"),
        "n_starts": _p(8, "posint"), "n_traj": _p(1000, "posint"), "level": _p(0.95, "prob"),
    }, ("L_star", "min_probability_longest"), needs_measure=True),
    "escape": ExperimentSpec(run_escape, {
        "radius": _p(5.0, "posreal"), "n0_grid": _p([5, 10, 20, 40, 80], "intgrid"), "n_starts": _p(8, "posint"),
        "n_traj": _p(1000, "posint"), "eps": _p(0.05, "prob"), "horizon": _p(None, "posint", optional=True),
        "start_scales": _p([0.5, 1.0, 2.0, 4.0], "grid"),
    }, ("n0_star", "min_probability_last", "horizon"), needs_measure=True),
    "quotient-green": ExperimentSpec(run_quotient_green, {
        "process": _p("walk", "choice", "walk", "geodesic"), "center": _p(None, "point", optional=True),
        "radius": _p(0.18, "posreal"), "start": _p(None, "point", optional=True), "start_angle": _p(0.0, "real"),
        "n_max": _p(2000, "posint"), "n_traj": _p(32, "posint"), "t_max": _p(200.0, "posreal"),
        "dt": _p(None, "posreal", optional=True),
    }, ("estimate", "stderr", "tail_flag", "global_rate", "late_rate"), ("not_injective", "greedy_cap"),
        needs_group=True),
    "poincare": ExperimentSpec(run_poincare, {
        "s": _p(1.0, "nonnegreal"), "word_len_max": _p(12, "posint"), "z1": _p(None, "point", optional=True),
        "z2": _p(None, "point", optional=True), "r_max": _p(10.0, "posreal"),
    }, ("partial_sum", "growth_diagnostic", "diverging", "collision_rate", "n_elements", "delta", "delta_stderr",
        "n_points", "delta_lo3", "delta_hi3"), ("collision", "wide"), needs_group=True),
    "dichotomy": ExperimentSpec(run_dichotomy, {
        "center": _p(None, "point", optional=True), "radius": _p(0.18, "posreal"), "n_max": _p(2000, "posint"),
        "n_traj": _p(32, "posint"), "t_max": _p(200.0, "posreal"), "dt": _p(None, "posreal", optional=True),
        "n_starts": _p(16, "posint"),
    }, ("verdict", "walk_signature", "geodesic_signature", "inconsistent"), ("not_injective",),
        needs_measure=True, needs_group=True),
    "volume-check": ExperimentSpec(run_volume, {
        "t_grid": _p([0.0, 1.0, 2.0, 5.0, 10.0, 20.0], "grid"), "radius": _p(6.0, "posreal"),
        "n_samples": _p(2_000_000, "posint"),
    }, ("ratio_at_max_t", "limit_error", "sigma_at_zero", "mc_volume", "mc_stderr", "exact_volume",
        "mc_rel_error")),
}
