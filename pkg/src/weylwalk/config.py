"""Experiment configuration: loading, schema checks and assertion blocks.

A config is a JSON object::

    {
      "experiment": "deviation",
      "measure": "../measures/reference.json",
      "seed": 7,
      "params": {"n": 5000, "n_traj": 100},
      "assertions": [{"metric": "best_coverage", "op": ">=", "value": 0.9}],
      "fatal_flags": ["unstable_limit"]
    }

Relative paths resolve against the config file's directory.  Unknown keys
anywhere are errors.
"""
from __future__ import annotations

import json
import math
import operator
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lie import InvalidInputError
from .quotient import FuchsianGroup
from .walk import MeasureSpec

TOP_KEYS = {"experiment", "description", "measure", "group", "seed", "jobs", "out", "params",
            "assertions", "fatal_flags"}

OPS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


class ConfigError(Exception):
    """Raised with a list of diagnostics, one per problem."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("\n".join(diagnostics))
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class Param:
    default: object
    kind: str  # posint, nonnegint, posreal, nonnegreal, real, grid, intgrid, point, vector, choice, bool, prob
    choices: tuple = ()
    optional: bool = False


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    jobs: int | None = None
    out: str | None = None
    measure: MeasureSpec | None = None
    measure_source: str | dict | None = None
    group: FuchsianGroup | None = None
    group_source: str | dict | None = None
    assertions: list = field(default_factory=list)
    fatal_flags: list = field(default_factory=list)
    description: str = ""
    path: str | None = None

    def echo(self) -> dict:
        """Everything needed to recompute the outputs."""
        return {
            "experiment": self.experiment,
            "description": self.description,
            "seed": self.seed,
            "jobs": self.jobs,
            "params": _jsonable(self.params),
            "measure": None if self.measure is None else {**self.measure.to_dict(), "digest": self.measure.digest(),
                                                          "source": self.measure_source},
            "group": None if self.group is None else {**self.group.to_dict(), "source": self.group_source},
            "assertions": self.assertions,
            "fatal_flags": self.fatal_flags,
            "config_path": self.path,
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _check_param(name: str, spec: Param, value, diags: list[str]):
    where = f"params.{name}"
    if value is None:
        if spec.optional:
            return None
        diags.append(f"{where}: must not be null")
        return None
    k = spec.kind
    try:
        if k in ("posint", "nonnegint"):
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError("expected an integer")
            if value < (1 if k == "posint" else 0):
                raise ValueError(f"must be {'positive' if k == 'posint' else 'non-negative'}, got {value}")
            return value
        if k in ("posreal", "nonnegreal", "real", "prob"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError("expected a number")
            v = float(value)
            if not math.isfinite(v):
                raise ValueError("must be finite")
            if k == "posreal" and v <= 0:
                raise ValueError(f"must be positive, got {value}")
            if k == "nonnegreal" and v < 0:
                raise ValueError(f"must be non-negative, got {value}")
            if k == "prob" and not 0 <= v <= 1:
                raise ValueError(f"must lie in [0, 1], got {value}")
            return v
        if k in ("grid", "intgrid"):
            if not isinstance(value, list) or not value:
                raise TypeError("expected a non-empty list of numbers")
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
                raise TypeError("expected a list of numbers")
            if k == "intgrid" and any(not isinstance(v, int) or v < 0 for v in value):
                raise ValueError("expected non-negative integers")
            if any(b < a for a, b in zip(value, value[1:])):
                raise ValueError("must be sorted ascending")
            return list(value)
        if k in ("point", "vector"):
            if not isinstance(value, list) or len(value) < 2 or any(
                    isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
                raise TypeError("expected a list of numbers")
            if k == "point":
                if len(value) != 2 or value[1] <= 0:
                    raise ValueError("expected [x, y] with y > 0")
                return complex(value[0], value[1])
            return list(map(float, value))
        if k == "choice":
            if value not in spec.choices:
                raise ValueError(f"must be one of {', '.join(map(str, spec.choices))}, got {value!r}")
            return value
        if k == "bool":
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
    except (TypeError, ValueError) as exc:
        diags.append(f"{where}: {exc}")
        return None
    raise AssertionError(k)


def _load_json(path: Path, diags: list[str], what: str):
    try:
        text = path.read_text()
    except OSError as exc:
        diags.append(f"{what}: cannot read {path}: {exc.strerror or exc}")
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        diags.append(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
        return None


def _measure(source, base: Path, diags: list[str]):
    data = source
    if isinstance(source, str):
        data = _load_json((base / source).resolve(), diags, "measure")
        if data is None:
            return None
    if not isinstance(data, dict) or "atoms" not in data:
        diags.append("measure: expected an object with an 'atoms' list")
        return None
    extra = set(data) - {"dim", "atoms", "name"}
    if extra:
        diags.append(f"measure: unknown keys {sorted(extra)}")
        return None
    try:
        for i, a in enumerate(data["atoms"]):
            if set(a) - {"matrix", "weight"}:
                diags.append(f"measure.atoms[{i}]: unknown keys {sorted(set(a) - {'matrix', 'weight'})}")
                return None
        return MeasureSpec.from_dict(data)
    except (InvalidInputError, KeyError, TypeError, ValueError) as exc:
        diags.append(f"measure: {exc}")
        return None


def _group(source, base: Path, diags: list[str]):
    data = source
    if isinstance(source, str):
        data = _load_json((base / source).resolve(), diags, "group")
        if data is None:
            return None
    if not isinstance(data, dict):
        diags.append("group: expected an object")
        return None
    extra = set(data) - {"name", "generators", "reduction_mode", "basepoint"}
    if extra:
        diags.append(f"group: unknown keys {sorted(extra)}")
        return None
    try:
        return FuchsianGroup.from_dict(data)
    except (InvalidInputError, TypeError, ValueError) as exc:
        diags.append(f"group: {exc}")
        return None


def parse_config(data, registry: dict, base: Path | str = ".", kind: str | None = None,
                 path: str | None = None) -> ExperimentConfig:
    """Validate a decoded config against the experiment registry.

    Raises ConfigError listing every problem found.
    """
    base = Path(base)
    diags: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["config: expected a JSON object at top level"])
    for key in sorted(set(data) - TOP_KEYS):
        diags.append(f"{key}: unknown key")
    exp = data.get("experiment", kind)
    if kind is not None and exp != kind:
        diags.append(f"experiment: config is for {exp!r}, not {kind!r}")
    if exp not in registry:
        diags.append(f"experiment: unknown kind {exp!r}; expected one of {', '.join(sorted(registry))}")
        raise ConfigError(diags)
    spec = registry[exp]
    raw = data.get("params", {}) or {}
    if not isinstance(raw, dict):
        diags.append("params: expected an object")
        raw = {}
    for key in sorted(set(raw) - set(spec.params)):
        diags.append(f"params.{key}: unknown parameter for {exp}")
    params = {}
    for name, p in spec.params.items():
        params[name] = _check_param(name, p, raw.get(name, p.default), diags)
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        diags.append("seed: expected an integer in [0, 2^64)")
    jobs = data.get("jobs")
    if jobs is not None and (isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1):
        diags.append("jobs: expected a positive integer")
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        diags.append("out: expected a path string")
    measure = None
    if spec.needs_measure:
        if "measure" not in data:
            diags.append("measure: required for this experiment")
        else:
            measure = _measure(data["measure"], base, diags)
    elif "measure" in data:
        measure = _measure(data["measure"], base, diags)
    group = None
    if spec.needs_group:
        if "group" not in data:
            diags.append("group: required for this experiment")
        else:
            group = _group(data["group"], base, diags)
    elif "group" in data:
        diags.append("group: not used by this experiment")
    if measure is not None and spec.needs_group and measure.dim != 2:
        diags.append(f"measure: quotient experiments need dim 2, got {measure.dim}")
    assertions = data.get("assertions", []) or []
    if not isinstance(assertions, list):
        diags.append("assertions: expected a list")
        assertions = []
    for i, a in enumerate(assertions):
        where = f"assertions[{i}]"
        if not isinstance(a, dict):
            diags.append(f"{where}: expected an object")
            continue
        for key in sorted(set(a) - {"metric", "op", "value", "note"}):
            diags.append(f"{where}.{key}: unknown key")
        if a.get("metric") not in spec.metrics:
            diags.append(f"{where}.metric: unknown metric {a.get('metric')!r} for {exp}; "
                         f"available: {', '.join(spec.metrics)}")
        op = a.get("op")
        if op == "between":
            v = a.get("value")
            if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
                diags.append(f"{where}.value: 'between' needs [lo, hi]")
        elif op not in OPS:
            diags.append(f"{where}.op: expected one of {', '.join(list(OPS) + ['between'])}")
        elif "value" not in a:
            diags.append(f"{where}.value: missing")
    fatal = data.get("fatal_flags", []) or []
    if not isinstance(fatal, list) or any(f not in spec.flags for f in fatal):
        diags.append(f"fatal_flags: expected a list drawn from {', '.join(spec.flags) or '(none)'}")
        fatal = []
    if diags:
        raise ConfigError(diags)
    return ExperimentConfig(exp, params, seed, jobs, out, measure, data.get("measure"), group,
                            data.get("group"), assertions, fatal, data.get("description", ""), path)


def load_config(path, registry: dict, kind: str | None = None) -> ExperimentConfig:
    path = Path(path)
    diags: list[str] = []
    data = _load_json(path, diags, "config")
    if data is None:
        raise ConfigError(diags)
    return parse_config(data, registry, path.parent, kind, str(path))


def check_assertions(assertions: list, metrics: dict) -> list[tuple[str, bool, object]]:
    """Evaluate an assertion block; returns (description, passed, observed) rows."""
    rows = []
    for a in assertions:
        name, op, target = a["metric"], a["op"], a.get("value")
        observed = metrics.get(name)
        if op == "between":
            ok = observed is not None and _num(observed) and target[0] <= observed <= target[1]
            desc = f"{name} in [{target[0]}, {target[1]}]"
        else:
            try:
                ok = observed is not None and bool(OPS[op](observed, target))
                if isinstance(observed, float) and math.isnan(observed):
                    ok = False
            except TypeError:
                ok = False
            desc = f"{name} {op} {target!r}"
        rows.append((desc, bool(ok), observed))
    return rows


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def default_out(kind: str, cli_out: str | None, cfg_out: str | None) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg_out:
        return Path(cfg_out)
    env = os.environ.get("WEYLWALK_OUT")
    if env:
        return Path(env) / kind
    return Path("weylwalk-out") / kind
