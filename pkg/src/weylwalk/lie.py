"""Linear-algebra primitives on SL_d(R) and its symmetric space SL_d(R)/SO(d).

Conventions
-----------
* ``a_t = diag(exp(t))`` for a trace-free vector ``t``.
* The Cartan projection ``kappa(g)`` is the vector of log singular values,
  sorted in decreasing order.
* The distance on ``G/K`` is ``d(gK, hK) = ||kappa(g^-1 h)||_2``.  For d = 2 the
  hyperbolic distance (curvature -1) is ``HYPERBOLIC_SCALE`` times this value.
* A full flag is stored as an orthogonal frame whose first k columns span the
  k-dimensional subspace.  Opposite flags (points of the opposite flag
  variety) are stored the same way, so the base opposite flag is the
  reversed identity frame.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HYPERBOLIC_SCALE",
    "InvalidInputError",
    "NotTransverseError",
    "OptimizerWarning",
    "CartanTriple",
    "FlagPoint",
    "FlagPair",
    "MaximalFlat",
    "as_group_element",
    "random_group_element",
    "diag_exp",
    "reversal",
    "cartan_decompose",
    "cartan_projection",
    "simple_roots",
    "is_chamber_vector",
    "symspace_distance",
    "hyperbolic_distance",
    "standard_flag",
    "standard_opposite_flag",
    "flag_of",
    "opposite_flag_of",
    "flag_distance",
    "is_transverse",
    "base_pair",
    "flat_from_flags",
    "flat_projection",
    "distance_to_flat",
    "weyl_orbit",
    "same_flat",
    "highest_weight_constant",
]

#: d_hyperbolic = HYPERBOLIC_SCALE * ||kappa|| for SL_2.
HYPERBOLIC_SCALE = math.sqrt(2.0)

_TIE = 1e-10


class InvalidInputError(ValueError):
    """Raised for non-finite, non-square or non-invertible input."""


class NotTransverseError(ValueError):
    """Raised when two flags are not in general position.

    Attributes
    ----------
    index : int
        1-based size of the first leading principal minor below tolerance.
    minor : float
        Absolute value of that minor.
    """

    def __init__(self, index: int, minor: float, tau: float):
        super().__init__(f"leading minor {index} is {minor:.3e} (tolerance {tau:.1e})")
        self.index = index
        self.minor = minor
        self.tau = tau


class OptimizerWarning(RuntimeWarning):
    pass


def _check_square(m, name="matrix") -> np.ndarray:
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise InvalidInputError(f"{name} must be a square matrix of size >= 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return a


def as_group_element(m) -> np.ndarray:
    """Return ``m`` rescaled to determinant one.

    Negative determinants are fixed by a sign flip when d is odd and rejected
    when d is even.
    """
    a = _check_square(m)
    d = a.shape[0]
    sign, logdet = np.linalg.slogdet(a)
    if sign == 0 or not np.isfinite(logdet):
        raise InvalidInputError("matrix is singular")
    if sign < 0:
        if d % 2 == 0:
            raise InvalidInputError("negative determinant cannot be normalized in even dimension")
        a = -a
    return a * math.exp(-logdet / d)


def random_group_element(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Gaussian matrix with a row sign fixed so that the determinant is positive, then unimodularized."""
    m = rng.normal(scale=scale, size=(d, d))
    if np.linalg.det(m) < 0:
        m[0] = -m[0]
    return as_group_element(m)


def diag_exp(t) -> np.ndarray:
    return np.diag(np.exp(np.asarray(t, dtype=float)))


def reversal(d: int) -> np.ndarray:
    """The antidiagonal permutation matrix J."""
    return np.eye(d)[::-1].copy()


@dataclass(frozen=True, eq=False)
class CartanTriple:
    """``g = exp(logscale) * k @ diag(exp(t)) @ l``.

    ``degenerate`` is set when two entries of ``t`` are closer than 1e-10, in
    which case the frames are not unique.
    """

    k: np.ndarray
    t: np.ndarray
    l: np.ndarray
    logscale: float = 0.0
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return len(self.t)

    def matrix(self) -> np.ndarray:
        return math.exp(self.logscale) * (self.k * np.exp(self.t)) @ self.l


def _canonicalize(u: np.ndarray, vh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = u.copy()
    vh = vh.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            vh[j, :] = -vh[j, :]
    return u, vh


def cartan_decompose(g, canonical: bool = True) -> CartanTriple:
    """Cartan (KAK) decomposition of an invertible matrix.

    The log singular values are split as ``t + logscale`` with ``sum(t) = 0``,
    so unimodular input gives ``logscale`` = 0 up to rounding.  With
    ``canonical`` and a regular ``t`` the first nonzero entry of every column
    of ``k`` is positive.  For positive determinant ``det k = det l``.
    """
    a = _check_square(g)
    u, s, vh = np.linalg.svd(a)
    if s[-1] <= 0:
        raise InvalidInputError("matrix is singular")
    logs = np.log(s)
    logscale = float(logs.mean())
    t = logs - logscale
    gaps = t[:-1] - t[1:]
    degenerate = bool(np.any(gaps < _TIE))
    if canonical and not degenerate:
        u, vh = _canonicalize(u, vh)
    return CartanTriple(k=u, t=t, l=vh, logscale=logscale, degenerate=degenerate)


def cartan_projection(g) -> np.ndarray:
    """Sorted log singular values of ``g`` (trace-free part)."""
    a = _check_square(g)
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= 0:
        raise InvalidInputError("matrix is singular")
    logs = np.log(s)
    return logs - logs.mean()


def simple_roots(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return t[..., :-1] - t[..., 1:]


def is_chamber_vector(t, tol: float = 1e-9) -> bool:
    t = np.asarray(t, dtype=float)
    return bool(abs(t.sum()) <= tol and np.all(simple_roots(t) >= -1e-10))


def symspace_distance(g, h) -> float:
    """``||kappa(g^-1 h)||``: distance between ``gK`` and ``hK``."""
    a = _check_square(g, "g")
    b = _check_square(h, "h")
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(cartan_projection(np.linalg.solve(a, b))))


def hyperbolic_distance(z1: complex, z2: complex) -> float:
    """Distance in the upper half-plane model, curvature -1."""
    num = abs(z1 - z2) ** 2
    return float(math.acosh(1.0 + num / (2.0 * z1.imag * z2.imag)))


# -- flags ---------------------------------------------------------------


def _orth_frame(m: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(m)
    # fix the signs so that R has a positive diagonal; purely cosmetic
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s


class FlagPoint:
    """Full flag of R^d, stored as an orthogonal frame up to column signs."""

    __slots__ = ("frame",)

    def __init__(self, frame, check: bool = True):
        f = np.array(frame, dtype=float)
        if check:
            f = _check_square(f, "frame")
            err = np.abs(f.T @ f - np.eye(f.shape[0])).max()
            if err > 1e-10:
                raise InvalidInputError(f"frame is not orthogonal (error {err:.2e})")
        self.frame = f

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    def __eq__(self, other):
        if not isinstance(other, FlagPoint):
            return NotImplemented
        return self.dim == other.dim and flag_distance(self, other) <= 1e-9

    __hash__ = None

    def __repr__(self):
        return f"FlagPoint(dim={self.dim})"

    def moved_by(self, g) -> "FlagPoint":
        """The flag ``g . xi``."""
        return FlagPoint(_orth_frame(np.asarray(g, dtype=float) @ self.frame), check=False)


def standard_flag(d: int) -> FlagPoint:
    return FlagPoint(np.eye(d), check=False)


def standard_opposite_flag(d: int) -> FlagPoint:
    return FlagPoint(reversal(d), check=False)


def flag_of(g) -> FlagPoint:
    """``g . xi_0``: the flag spanned by the leading columns of ``g``."""
    return FlagPoint(_orth_frame(np.asarray(g, dtype=float)), check=False)


def opposite_flag_of(g) -> FlagPoint:
    """``g . xi_0^-``: the flag spanned by the trailing columns of ``g``."""
    a = np.asarray(g, dtype=float)
    return FlagPoint(_orth_frame(a[:, ::-1]), check=False)


def flag_distance(xi: FlagPoint, eta: FlagPoint) -> float:
    """Max over k of the sine distance between the k-planes of two flags.

    For k-planes with principal angles theta_i this is
    ``sqrt(1 - prod cos^2 theta_i)``, the projective sine distance between
    the wedge products of the frames.  Computed from the sines of the angles
    so that nearby flags keep full relative precision.
    """
    a, b = xi.frame, eta.frame
    if a.shape != b.shape:
        raise InvalidInputError("dimension mismatch")
    d = a.shape[0]
    best = 0.0
    for k in range(1, d):
        sines = np.linalg.svd(a[:, k:].T @ b[:, :k], compute_uv=False)
        sines = np.minimum(sines, 1.0)
        if np.all(sines < 1.0):
            val = -math.expm1(float(np.sum(np.log1p(-(sines * sines)))))
        else:
            val = 1.0
        best = max(best, math.sqrt(max(val, 0.0)))
    return best


def _leading_minors(m: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    return np.array([np.linalg.det(m[:k, :k]) for k in range(1, d + 1)])


@dataclass(frozen=True, eq=False)
class FlagPair:
    """Transverse pair (opposite flag, flag) with its transversality margin."""

    minus: FlagPoint
    plus: FlagPoint
    margin: float

    @property
    def dim(self) -> int:
        return self.plus.dim

    def moved_by(self, g) -> "FlagPair":
        return FlagPair(self.minus.moved_by(g), self.plus.moved_by(g), float("nan"))


def is_transverse(xi_minus: FlagPoint, xi: FlagPoint, tau: float = 1e-6) -> FlagPair:
    """Check general position and return the pair.

    The pair is transverse iff every leading principal minor of
    ``(F^- J)^T F`` is nonzero; the margin is the smallest absolute minor.

    Raises
    ------
    NotTransverseError
        If some minor is at most ``tau`` in absolute value.
    """
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    if xi_minus.dim != xi.dim:
        raise InvalidInputError("dimension mismatch")
    m = (xi_minus.frame[:, ::-1]).T @ xi.frame
    minors = np.abs(_leading_minors(m))
    for i, v in enumerate(minors):
        if not v > tau:
            raise NotTransverseError(i + 1, float(v), tau)
    return FlagPair(xi_minus, xi, float(min(minors.min(), 1.0)))


def base_pair(d: int) -> FlagPair:
    return FlagPair(standard_opposite_flag(d), standard_flag(d), 1.0)


def _lu_nopivot(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = m.shape[0]
    lo = np.eye(d)
    up = m.astype(float).copy()
    for j in range(d - 1):
        piv = up[j, j]
        lo[j + 1:, j] = up[j + 1:, j] / piv
        up[j + 1:, j:] -= np.outer(lo[j + 1:, j], up[j, j:])
        up[j + 1:, j] = 0.0
    return lo, up


@dataclass(frozen=True, eq=False)
class MaximalFlat:
    """The flat ``base . exp(a) . K`` in G/K."""

    base: np.ndarray
    source: FlagPair | None = None

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    def point(self, s) -> np.ndarray:
        return self.base * np.exp(np.asarray(s, dtype=float))

    def moved_by(self, g) -> "MaximalFlat":
        g = np.asarray(g, dtype=float)
        src = self.source.moved_by(g) if self.source is not None else None
        return MaximalFlat(g @ self.base, src)

    def offset(self, x) -> float:
        """Relative off-diagonal size of ``h h^T`` for ``h = base^-1 x``.

        Zero exactly when ``xK`` lies on the flat.
        """
        h = np.linalg.solve(self.base, np.asarray(x, dtype=float))
        p = h @ h.T
        dg = np.sqrt(np.abs(np.diag(p)))
        q = p / np.outer(dg, dg)
        return float(np.abs(q - np.diag(np.diag(q))).max())


def flat_from_flags(pair: FlagPair, tau: float = 1e-6) -> MaximalFlat:
    """Flat through a transverse pair.

    With ``k1`` the reversed opposite frame and ``k2`` the frame of the flag,
    ``k1^T k2 = L U`` without pivoting and ``g = k1 L`` satisfies
    ``g xi_0^- = xi^-`` and ``g xi_0 = xi``.
    """
    k1 = pair.minus.frame[:, ::-1]
    k2 = pair.plus.frame
    m = k1.T @ k2
    minors = np.abs(_leading_minors(m))
    for i, v in enumerate(minors):
        if not v > tau:
            raise NotTransverseError(i + 1, float(v), tau)
    lo, _ = _lu_nopivot(m)
    g = k1 @ lo
    if np.linalg.det(g) < 0:
        g[:, 0] = -g[:, 0]
    return MaximalFlat(g, pair)


def _sum_zero_basis(d: int) -> np.ndarray:
    # orthonormal basis of {s : sum(s) = 0}, shape (d, d-1)
    q, _ = np.linalg.qr(np.vstack([np.ones(d), np.eye(d)[:-1]]).T)
    return q[:, 1:]


def _flat_objective(p: np.ndarray, s: np.ndarray):
    e = np.exp(s)
    n = p * np.outer(e, e)
    lam, v = np.linalg.eigh(n)
    lam = np.maximum(lam, 1e-300)
    ll = np.log(lam)
    f = 0.25 * float(ll @ ll)
    grad = (v * v) @ ll  # d f / d s_j = (log N)_jj
    diff = lam[:, None] - lam[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = (lam[:, None] + lam[None, :]) * (ll[:, None] - ll[None, :]) / diff
    close = np.abs(diff) <= 1e-12 * (lam[:, None] + lam[None, :])
    phi[close] = 2.0
    z = v[:, :, None] * v[:, None, :]
    hess = np.einsum("jab,kab,ab->jk", z, z, phi)
    return f, grad, hess


def flat_projection(g, flat: MaximalFlat, multistart: int = 0, rng=None,
                    tol: float = 1e-12, max_iter: int = 100):
    """Nearest point of a flat.

    Minimizes ``f(s) = d(gK, base a_s K)^2`` over trace-free ``s``.  The
    function is geodesically convex along the flat, so damped Newton from a
    diagonal-matching start converges to the global minimum; ``multistart``
    adds random starts in the box ``|s|_inf <= |kappa(g)| + 5`` as a guard.

    Returns
    -------
    s : ndarray
        Minimizer.
    value : float
        Distance at ``s``.
    converged : bool
    """
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if flat.base.shape != g.shape:
        raise InvalidInputError("dimension mismatch")
    h = np.linalg.solve(flat.base, g)
    hinv = np.linalg.inv(h)
    p = hinv.T @ hinv
    basis = _sum_zero_basis(d)
    s0 = -0.5 * np.log(np.abs(np.diag(p)))
    starts = [basis.T @ s0]
    if multistart:
        rng = np.random.default_rng(0) if rng is None else rng
        box = float(np.linalg.norm(cartan_projection(g))) + 5.0
        for _ in range(multistart):
            starts.append(basis.T @ rng.uniform(-box, box, size=d))

    best = None
    for y in starts:
        y = np.array(y, dtype=float)
        f, gr, he = _flat_objective(p, basis @ y)
        converged = False
        for _ in range(max_iter):
            gy = basis.T @ gr
            if float(np.abs(gy).max()) <= tol:
                converged = True
                break
            hy = basis.T @ he @ basis
            try:
                step = -np.linalg.solve(hy, gy)
            except np.linalg.LinAlgError:
                step = -gy
            if float(step @ gy) >= 0:
                step = -gy
            norm = float(np.linalg.norm(step))
            if norm > 4.0:
                step *= 4.0 / norm
            a = 1.0
            while True:
                y_new = y + a * step
                f_new, gr_new, he_new = _flat_objective(p, basis @ y_new)
                if f_new <= f + 1e-4 * a * float(step @ gy) or a < 1e-12:
                    break
                a *= 0.5
            if a < 1e-12:
                # no further decrease at double precision
                converged = float(np.abs(gy).max()) <= 1e-7
                break
            small = float(np.abs(a * step).max()) <= 1e-14 * (1.0 + float(np.abs(y).max()))
            y, f, gr, he = y_new, f_new, gr_new, he_new
            if small:
                converged = True
                break
        if best is None or f < best[1]:
            best = (y, f, converged)
    y, f, converged = best
    s = basis @ y
    # final value from singular values: full precision near zero
    value = float(np.linalg.norm(cartan_projection(hinv * np.exp(s))))
    return s, value, converged


def distance_to_flat(g, flat: MaximalFlat, multistart: int = 0) -> float:
    """Distance from ``gK`` to a maximal flat.

    Emits ``OptimizerWarning`` and returns the best value found if the
    Newton iteration does not converge.
    """
    _, value, converged = flat_projection(g, flat, multistart=multistart)
    if not converged:
        warnings.warn("distance_to_flat did not converge; returning best value",
                      OptimizerWarning, stacklevel=2)
    return value


def _signed_permutations(d: int):
    for perm in itertools.permutations(range(d)):
        w = np.eye(d)[:, list(perm)]
        if np.linalg.det(w) < 0:
            w[:, 0] = -w[:, 0]
        yield w


def weyl_orbit(pair: FlagPair) -> list[FlagPair]:
    """The d! pairs ``(g w xi_0^-, g w xi_0)`` sharing the flat of ``pair``."""
    g = flat_from_flags(pair).base
    out = []
    for w in _signed_permutations(pair.dim):
        gw = g @ w
        minus, plus = opposite_flag_of(gw), flag_of(gw)
        out.append(is_transverse(minus, plus, tau=1e-12))
    return out


def same_flat(f1: MaximalFlat, f2: MaximalFlat, n_samples: int = 32,
              spread: float = 2.0, rng=None) -> float:
    """Sampled Hausdorff-type discrepancy between two flats.

    Points ``base_1 a_s`` of the first flat are tested for membership in the
    second and vice versa; the largest distance to the other flat is
    returned.  Two equal flats give a value at rounding level.
    """
    rng = np.random.default_rng(12345) if rng is None else rng
    d = f1.dim
    worst = 0.0
    for a, b in ((f1, f2), (f2, f1)):
        for _ in range(n_samples):
            s = rng.normal(scale=spread, size=d)
            s -= s.mean()
            _, val, _ = flat_projection(a.point(s), b)
            worst = max(worst, val)
    return worst


def highest_weight_constant(d: int) -> float:
    """Constant for ``||s - t|| <= C ||kappa(a_-s u k a_t)|| + C``.

    Valid when every leading k x k minor of ``u k`` and of ``(u k)^-1`` is at
    least 1/2 in absolute value.  Each fundamental weight
    ``chi_k(x) = x_1 + ... + x_k`` then satisfies
    ``|chi_k(t - s)| <= |chi_k| ||kappa|| + log 2`` by looking at one matrix
    coefficient of the k-th exterior power, and ``||x|| <= 2 sum |chi_k(x)|``
    on trace-free vectors.  Weight norms are ``sqrt(k (d - k) / d)``.
    """
    norms = sum(math.sqrt(k * (d - k) / d) for k in range(1, d))
    return 2.0 * max(norms, (d - 1) * math.log(2.0))
