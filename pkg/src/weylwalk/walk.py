"""Random walks on SL_d(R) with overflow-free factored products.

A product ``b_1 ... b_n`` is carried as ``k_n diag(exp t_n) l_n``.  Each step
orthogonalizes the rows of ``diag(exp t_n) l_n b_{n+1}`` by Jacobi rotations
computed in log scale, so the raw product is never formed and ``t_n`` can
grow without bound.  The frames ``k_n`` are sign-aligned from one step to the
next, which makes them converge along a typical trajectory.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._core import kernels
from ._util import stream
from .lie import (
    CartanTriple,
    FlagPoint,
    InvalidInputError,
    as_group_element,
    cartan_decompose,
    flag_distance,
    flag_of,
    simple_roots,
)

__all__ = [
    "MeasureSpec",
    "WalkState",
    "TrajectoryRecord",
    "LimitFlag",
    "RootGrowth",
    "ZariskiScreen",
    "dirac",
    "rotation",
    "rotated_pair_measure",
    "initial_state",
    "advance",
    "trajectory",
    "run_walk",
    "lyapunov_estimate",
    "limit_flag",
    "root_growth_check",
    "zariski_screen",
    "scalar_observable",
]


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Finitely supported probability measure on SL_d(R).

    Atoms are rescaled to determinant one on construction.  ``zariski_dense``
    is ``None`` until :func:`zariski_screen` has been run.
    """

    atoms: np.ndarray
    weights: np.ndarray
    name: str = ""
    zariski_dense: bool | None = None

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 2:
            atoms = atoms[None]
        if atoms.ndim != 3 or len(atoms) == 0:
            raise InvalidInputError("need at least one square atom")
        atoms = np.ascontiguousarray([as_group_element(a) for a in atoms])
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.shape != (len(atoms),):
            raise InvalidInputError(f"{len(atoms)} atoms but {w.size} weights")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise InvalidInputError("weights must be positive")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-12:
            raise InvalidInputError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return len(self.atoms)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "atoms": [{"matrix": a.tolist(), "weight": float(w)} for a, w in zip(self.atoms, self.weights)],
        }

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "MeasureSpec":
        atoms = [np.asarray(a["matrix"], dtype=float) for a in data["atoms"]]
        weights = [float(a["weight"]) for a in data["atoms"]]
        d = int(data.get("dim", atoms[0].shape[0]))
        for a in atoms:
            if a.shape != (d, d):
                raise InvalidInputError(f"atom of shape {a.shape} in a measure of dim {d}")
        return cls(np.array(atoms), np.array(weights), name=name or data.get("name", ""))

    def digest(self) -> str:
        """SHA-256 of the atoms and weights at 17 significant digits."""
        payload = json.dumps(
            [[[format(x, ".17g") for x in row] for row in a] for a in self.atoms]
            + [[format(w, ".17g") for w in self.weights]]
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def inverse(self) -> "MeasureSpec":
        return MeasureSpec(np.linalg.inv(self.atoms), self.weights, name=self.name + "^-1")

    def transpose(self) -> "MeasureSpec":
        return MeasureSpec(np.transpose(self.atoms, (0, 2, 1)).copy(), self.weights, name=self.name + "^T")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Atom indices of ``n`` independent draws."""
        if self.size == 1:
            return np.zeros(n, dtype=np.int64)
        return rng.choice(self.size, size=n, p=self.weights).astype(np.int64)


def dirac(g, name: str = "") -> MeasureSpec:
    return MeasureSpec(np.asarray(g, dtype=float)[None], np.array([1.0]), name=name)


def rotated_pair_measure(c: float = math.log(2.0), angle: float = math.pi / 4) -> MeasureSpec:
    """Uniform measure on ``g`` and ``R(angle) g R(-angle)``, ``g = diag(e^c, e^-c)``.

    The default is the pair diag(2, 1/2) and its conjugate by a rotation of
    pi/4: two hyperbolic elements with transverse axes.
    """
    g1 = np.diag([math.exp(c), math.exp(-c)])
    g2 = rotation(angle) @ g1 @ rotation(-angle)
    return MeasureSpec(np.array([g1, g2]), np.array([0.5, 0.5]), name="rotated-pair")


@dataclass(eq=False)
class WalkState:
    """Position ``b_1 ... b_n`` of a walk, in factored form.

    ``factored.k`` is the sign-aligned frame; :meth:`canonical` gives the
    per-call canonical decomposition, which differs from it by a sign
    diagonal.
    """

    step: int
    factored: CartanTriple
    rng: np.random.Generator

    @property
    def k_aligned(self) -> np.ndarray:
        return self.factored.k

    def canonical(self) -> CartanTriple:
        f = self.factored
        k = f.k.copy()
        l = f.l.copy()
        if not np.any(f.t[:-1] - f.t[1:] < 1e-10):
            for j in range(len(f.t)):
                nz = np.flatnonzero(np.abs(k[:, j]) > 1e-12)
                if nz.size and k[nz[0], j] < 0:
                    k[:, j] = -k[:, j]
                    l[j] = -l[j]
        return CartanTriple(k, f.t.copy(), l, f.logscale)


def initial_state(dim: int, seed: int = 0, index: int = 0, g0=None) -> WalkState:
    if g0 is None:
        f = CartanTriple(np.eye(dim), np.zeros(dim), np.eye(dim))
    else:
        f = cartan_decompose(as_group_element(g0))
        f = CartanTriple(f.k, f.t, f.l, 0.0, f.degenerate)
    return WalkState(0, f, stream(seed, index))


def advance(state: WalkState, mu: MeasureSpec) -> WalkState:
    """One step ``b_1..b_n -> b_1..b_n b_{n+1}`` with ``b_{n+1} ~ mu``."""
    f = state.factored
    if f.k.shape[0] != mu.dim:
        raise InvalidInputError("dimension mismatch between state and measure")
    choice = mu.sample(state.rng, 1)
    k = f.k.copy()
    t = f.t.copy()
    l = f.l.copy()
    t_out = np.empty((2, mu.dim))
    kernels.walk(mu.atoms, choice, k, t, l, t_out)
    return WalkState(state.step + 1, CartanTriple(k, t, l, f.logscale), state.rng)


@dataclass(eq=False)
class TrajectoryRecord:
    """Factored trajectory.  Index ``n`` of every sequence refers to step n.

    ``increments[n]`` is the aligned increment ``k_n^T k_{n+1}``.
    """

    t_seq: np.ndarray
    k_seq: np.ndarray | None
    seed: int
    n_steps: int
    index: int = 0
    choices: np.ndarray | None = None
    l_seq: np.ndarray | None = None
    increments: np.ndarray | None = None
    final: CartanTriple | None = None
    measure_digest: str = ""

    @property
    def dim(self) -> int:
        return self.t_seq.shape[1]


def run_walk(mu: MeasureSpec, choices: np.ndarray, start: CartanTriple | None = None,
             store_k: bool = False, store_l: bool = False, store_increments: bool = False):
    """Run the kernel on a fixed choice sequence.

    Returns ``(t_seq, k_seq, l_seq, increments, final)`` with ``None`` for
    sequences not requested.
    """
    d = mu.dim
    n = len(choices)
    if start is None:
        k, t, l = np.eye(d), np.zeros(d), np.eye(d)
    else:
        k, t, l = start.k.copy(), start.t.copy(), start.l.copy()
    k = np.ascontiguousarray(k)
    l = np.ascontiguousarray(l)
    t = np.ascontiguousarray(t)
    t_seq = np.empty((n + 1, d))
    k_seq = np.empty((n + 1, d, d)) if store_k else None
    l_seq = np.empty((n + 1, d, d)) if store_l else None
    inc = np.empty((n, d, d)) if store_increments else None
    kernels.walk(mu.atoms, np.ascontiguousarray(choices, dtype=np.int64), k, t, l, t_seq, k_seq, l_seq, inc)
    return t_seq, k_seq, l_seq, inc, CartanTriple(k, t, l)


def trajectory(mu: MeasureSpec, n: int, seed: int, index: int = 0, store_k: bool = True,
               store_l: bool = False, store_increments: bool = False, g0=None) -> TrajectoryRecord:
    """Trajectory of ``n`` steps, a pure function of ``(mu, n, seed, index)``."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = stream(seed, index)
    choices = mu.sample(rng, n)
    start = initial_state(mu.dim, seed, index, g0).factored if g0 is not None else None
    t_seq, k_seq, l_seq, inc, final = run_walk(mu, choices, start, store_k, store_l, store_increments)
    return TrajectoryRecord(t_seq, k_seq, seed, n, index, choices, l_seq, inc, final, mu.digest())


def scalar_observable(t_seq: np.ndarray) -> np.ndarray:
    """Rank-one scalar of a chamber sequence.

    For d = 2 this is ``t_1 - t_2``, the hyperbolic displacement; for larger d
    the top coordinate ``t_1``.
    """
    t_seq = np.asarray(t_seq)
    if t_seq.shape[-1] == 2:
        return t_seq[..., 0] - t_seq[..., 1]
    return t_seq[..., 0]


def lyapunov_estimate(mu: MeasureSpec, n: int, n_traj: int = 16, seed: int = 0, n_batches: int = 10):
    """Mean of ``t_n / n`` with a standard error.

    With several trajectories each one is a batch; a single trajectory is
    cut into ``n_batches`` consecutive blocks whose increments of ``t`` are
    the batch means.

    Returns
    -------
    lam : ndarray
        Estimated Lyapunov vector (a chamber vector).
    stderr : ndarray
    """
    if n < 100:
        raise InvalidInputError("n must be >= 100")
    if n_traj >= 2:
        rates = np.array([trajectory(mu, n, seed, i, store_k=False).t_seq[-1] / n for i in range(n_traj)])
        return rates.mean(axis=0), rates.std(axis=0, ddof=1) / math.sqrt(n_traj)
    rec = trajectory(mu, n, seed, 0, store_k=False)
    edges = np.linspace(0, n, n_batches + 1).astype(int)
    blocks = np.array([(rec.t_seq[b] - rec.t_seq[a]) / (b - a) for a, b in zip(edges[:-1], edges[1:])])
    return rec.t_seq[-1] / n, blocks.std(axis=0, ddof=1) / math.sqrt(n_batches)


@dataclass(frozen=True)
class LimitFlag:
    flag: FlagPoint
    stability_gap: float
    stable: bool


def limit_flag(rec: TrajectoryRecord, threshold: float = 0.1) -> LimitFlag:
    """Estimate of the limit flag from the final aligned frame.

    The stability gap is the flag distance between the frames at n and n/2.
    """
    if rec.k_seq is None:
        raise InvalidInputError("record has no frames; rerun with store_k=True")
    n = rec.n_steps
    xi = flag_of(rec.k_seq[n])
    gap = flag_distance(xi, flag_of(rec.k_seq[n // 2]))
    return LimitFlag(xi, gap, gap <= threshold)


@dataclass(frozen=True)
class RootGrowth:
    """Per simple root: tail minimum and least-squares slope of alpha_i(t_n)."""

    tail_min: np.ndarray
    slope: np.ndarray
    slope_stderr: np.ndarray

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.slope > 0) and np.all(self.tail_min > 0))

    @property
    def compact_like(self) -> bool:
        return bool(np.all(np.abs(self.slope) <= 3 * self.slope_stderr + 1e-12))


def root_growth_check(rec: TrajectoryRecord, tail: float = 0.5) -> RootGrowth:
    alpha = simple_roots(rec.t_seq[1:])
    n = len(alpha)
    steps = np.arange(1, n + 1, dtype=float)
    start = int(n * (1 - tail))
    tail_min = alpha[start:].min(axis=0)
    slopes = []
    errs = []
    for i in range(alpha.shape[1]):
        y = alpha[:, i]
        if np.ptp(y) == 0:
            slopes.append(0.0 if n < 2 else float((y[-1] - y[0]) / max(n - 1, 1)))
            errs.append(0.0)
            continue
        fit = stats.linregress(steps, y)
        slopes.append(float(fit.slope))
        errs.append(float(fit.stderr))
    return RootGrowth(tail_min, np.array(slopes), np.array(errs))


@dataclass(frozen=True)
class ZariskiScreen:
    """Heuristic density screen; a report, never a certificate."""

    top_gap_slope: float
    min_singular_value: float
    clusters: int
    passed: bool
    notes: list = field(default_factory=list)


def zariski_screen(mu: MeasureSpec, n: int = 10_000, n_seeds: int = 16, seed: int = 0,
                   tol: float = 1e-3) -> ZariskiScreen:
    """Screen a measure for Zariski density.

    Passes when the top root gap grows linearly along one long product, and
    the limit lines from ``n_seeds`` independent trajectories neither lie
    within ``tol`` of a common hyperplane nor collapse onto at most d points.
    """
    d = mu.dim
    rec = trajectory(mu, n, seed, 0, store_k=False)
    growth = root_growth_check(rec)
    slope = float(growth.slope[0])
    lines = []
    for i in range(n_seeds):
        r = trajectory(mu, 400, seed, i + 1, store_k=False)
        lines.append(r.final.k[:, 0])
    lines = np.array(lines)
    sv = np.linalg.svd(lines.T, compute_uv=False)
    smin = float(sv[-1] / sv[0])
    reps: list[np.ndarray] = []
    for x in lines:
        if not any(math.sqrt(max(0.0, 1.0 - float(x @ y) ** 2)) < tol for y in reps):
            reps.append(x)
    notes = []
    if slope <= 3 * float(growth.slope_stderr[0]) or slope <= 1e-3:
        notes.append("top root gap does not grow linearly")
    if smin < tol:
        notes.append("limit lines close to a common hyperplane")
    if len(reps) <= d:
        notes.append("limit lines concentrate on few points")
    return ZariskiScreen(slope, smin, len(reps), not notes, notes)
