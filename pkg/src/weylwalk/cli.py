"""``weylwalk`` command line.

Exit codes: 0 when every assertion passes, 1 when an assertion fails or a
flag marked fatal is raised, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._core import BACKEND
from ._util import default_jobs
from .config import ConfigError, check_assertions, default_out, load_config
from .experiments import REGISTRY

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Shortest round-trip text for a CSV cell."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(type(x))


def _clean(x):
    # JSON has no NaN/inf
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    return x


def execute(cfg, out: Path, jobs: int, conjecture_band: bool = False) -> int:
    spec = REGISTRY[cfg.experiment]
    if conjecture_band and "conjecture_band" in cfg.params:
        cfg.params["conjecture_band"] = True
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = spec.run(cfg, jobs)
    wall = time.perf_counter() - t0
    files = []
    for name, (header, rows) in result.tables.items():
        write_csv(out / name, header, rows)
        files.append(name)
    for name, obj in result.reports.items():
        (out / name).write_text(json.dumps(_clean(obj), indent=2, default=_json_default) + "\n")
        files.append(name)
    checks = check_assertions(cfg.assertions, result.metrics)
    raised = sorted(k for k, v in result.flags.items() if v)
    fatal = [f for f in raised if f in cfg.fatal_flags]
    messages = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    ok = all(c[1] for c in checks) and not fatal
    manifest = {
        "config": cfg.echo(),
        "seed": cfg.seed,
        "jobs": jobs,
        "version": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": wall,
        "outputs": files + ["summary.txt"],
        "metrics": result.metrics,
        "flags": result.flags,
        "warnings": messages,
        "assertions": [{"check": c, "passed": p, "observed": o} for c, p, o in checks],
        "passed": ok,
    }
    (out / "manifest.json").write_text(json.dumps(_clean(manifest), indent=2, default=_json_default) + "\n")
    lines = [f"experiment: {cfg.experiment}", f"seed: {cfg.seed}", f"wall time: {wall:.2f} s", ""]
    lines += [f"{k} = {fmt(v)}" for k, v in result.metrics.items()]
    lines.append("")
    for c, p, o in checks:
        lines.append(f"{'PASS' if p else 'FAIL'}  {c}  (observed {fmt(o)})")
    for f in raised:
        lines.append(f"{'FATAL' if f in fatal else 'WARN'}  flag {f}")
    for m in messages:
        lines.append(f"WARN  {m}")
    lines.append("")
    lines.append("result: " + ("pass" if ok else "fail"))
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weylwalk", description="Random walk and quotient experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (default: $WEYLWALK_OUT/<kind>)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--jobs", type=int, help="worker processes (default: logical CPUs)")
        p.add_argument("--conjecture-band", action="store_true",
                       help="renewal: report a +-30%% band around leb(I)/lambda")

    for kind in REGISTRY:
        common(sub.add_parser(kind, help=f"run a {kind} experiment"), config_required=kind != "cartan-selftest")
    common(sub.add_parser("run", help="run the experiment named in the config"))
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    return parser


def _selftest_default():
    from .config import parse_config

    return parse_config({"experiment": "cartan-selftest"}, REGISTRY)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = None if args.command in ("run", "validate") else args.command
    try:
        if args.command == "cartan-selftest" and args.config is None:
            cfg = _selftest_default()
        else:
            cfg = load_config(args.config, REGISTRY, kind)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.experiment}")
        return EXIT_OK
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            print("config error: --seed must lie in [0, 2^64)", file=sys.stderr)
            return EXIT_CONFIG
        cfg.seed = args.seed
    jobs = args.jobs or cfg.jobs or default_jobs()
    if jobs < 1:
        print("config error: --jobs must be positive", file=sys.stderr)
        return EXIT_CONFIG
    out = default_out(cfg.experiment, args.out, cfg.out)
    try:
        return execute(cfg, out, jobs, args.conjecture_band)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
