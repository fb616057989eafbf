"""Pure-Python kernels; reference implementation of ``_kernels.pyx``.

Both modules expose the same functions with the same argument conventions
and must produce the same numbers up to rounding.
"""
import math

import numpy as np

MAX_SWEEPS = 30
ORTH_TOL = 4e-16

MODE_TRIVIAL = 0
MODE_MODULAR = 1
MODE_CYCLIC = 2
MODE_GREEDY = 3

GREEDY_CAP = 10000
ESCAPE_NORM2 = 1e60
RENORM_NORM2 = 1e8  # beyond this ad - bc is dominated by cancellation


def _graded_jacobi(rows, scale, acc):
    """Orthogonalize the rows ``exp(scale[i]) * rows[i]`` in place.

    ``rows`` holds unit vectors and ``scale`` their log lengths.  Row pairs
    are rotated until mutually orthogonal; rotations accumulate into the
    columns of ``acc``.  All rotation angles are computed from the ratio
    ``rho = exp(s_small - s_large) <= 1`` so nothing overflows.
    """
    d = len(scale)
    for _ in range(MAX_SWEEPS):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                rp = rows[p]
                rq = rows[q]
                gamma = rp[0] * rq[0]
                for c in range(1, d):
                    gamma += rp[c] * rq[c]
                if abs(gamma) <= ORTH_TOL:
                    continue
                rotated = True
                if scale[p] >= scale[q]:
                    a, b = p, q
                else:
                    a, b = q, p
                rho = math.exp(scale[b] - scale[a])
                num = 1.0 - rho * rho
                den = 2.0 * rho * gamma
                if abs(num) >= abs(den):
                    w = den / num
                    root = 1.0 + math.sqrt(1.0 + w * w)
                    tau = -w / root
                    # tau / rho without dividing by a possibly tiny rho
                    tau_rho = -(2.0 * gamma / num) / root
                else:
                    zeta = num / den
                    tau = -1.0 / (zeta + math.copysign(math.sqrt(1.0 + zeta * zeta), zeta))
                    tau_rho = tau / rho
                cs = 1.0 / math.sqrt(1.0 + tau * tau)
                sn = cs * tau
                ra = rows[a]
                rb = rows[b]
                new_a = [cs * ra[c] - sn * rho * rb[c] for c in range(d)]
                new_b = [cs * tau_rho * ra[c] + cs * rb[c] for c in range(d)]
                na = math.sqrt(sum(x * x for x in new_a))
                nb = math.sqrt(sum(x * x for x in new_b))
                rows[a] = [x / na for x in new_a]
                rows[b] = [x / nb for x in new_b]
                scale[a] += math.log(na)
                scale[b] += math.log(nb)
                for r in range(d):
                    ua = acc[r][a]
                    ub = acc[r][b]
                    acc[r][a] = cs * ua - sn * ub
                    acc[r][b] = sn * ua + cs * ub
        if not rotated:
            break


def _step(k, t, l, b):
    d = len(t)
    rows = []
    scale = []
    for i in range(d):
        li = l[i]
        row = [sum(li[m] * b[m][c] for m in range(d)) for c in range(d)]
        nrm = math.sqrt(sum(x * x for x in row))
        rows.append([x / nrm for x in row])
        scale.append(t[i] + math.log(nrm))
    acc = [[1.0 if r == c else 0.0 for c in range(d)] for r in range(d)]
    _graded_jacobi(rows, scale, acc)

    order = sorted(range(d), key=lambda i: -scale[i])
    acc = [[acc[r][j] for j in order] for r in range(d)]
    rows = [rows[j] for j in order]
    scale = [scale[j] for j in order]

    # sign-diagonal closest to the identity with det(acc * S) = +1
    signs = [1.0 if acc[j][j] >= 0 else -1.0 for j in range(d)]
    det = np.linalg.det(np.array(acc))
    if det * np.prod(signs) < 0:
        j = min(range(d), key=lambda i: abs(acc[i][i]))
        signs[j] = -signs[j]
    inc = [[acc[r][c] * signs[c] for c in range(d)] for r in range(d)]
    new_l = [[signs[i] * x for x in rows[i]] for i in range(d)]
    new_k = [[sum(k[r][m] * inc[m][c] for m in range(d)) for c in range(d)] for r in range(d)]
    mean = sum(scale) / d
    new_t = [s - mean for s in scale]
    return new_k, new_t, new_l, inc


def walk(atoms, choices, k, t, l, t_out, k_out=None, l_out=None, inc_out=None):
    """Advance the factored product ``k diag(exp t) l`` by ``atoms[choices]``.

    ``k``, ``t`` and ``l`` are updated in place.  Row 0 of each output holds
    the initial state; ``inc_out[j]`` is the aligned increment
    ``k_j^T k_{j+1}``.
    """
    kk = k.tolist()
    tt = t.tolist()
    ll = l.tolist()
    mats = [a.tolist() for a in atoms]
    t_out[0] = tt
    if k_out is not None:
        k_out[0] = kk
    if l_out is not None:
        l_out[0] = ll
    for j, c in enumerate(choices):
        kk, tt, ll, inc = _step(kk, tt, ll, mats[c])
        t_out[j + 1] = tt
        if k_out is not None:
            k_out[j + 1] = kk
        if l_out is not None:
            l_out[j + 1] = ll
        if inc_out is not None:
            inc_out[j] = inc
    k[...] = kk
    t[...] = tt
    l[...] = ll


def _gram_schmidt(m):
    d = m.shape[0]
    q = m.copy()
    for _ in range(2):
        for j in range(d):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
            q[:, j] /= math.sqrt(q[:, j] @ q[:, j])
    return q


def flag_orbit(mats, order, f0, out):
    """``out[j+1] = orth(mats[order[j]] @ out[j])``, frames up to column signs."""
    out[0] = f0
    f = np.array(f0, dtype=float)
    for j, c in enumerate(order):
        f = _gram_schmidt(mats[c] @ f)
        out[j + 1] = f


def _lu(m):
    d = m.shape[0]
    lo = np.eye(d)
    up = m.copy()
    for j in range(d - 1):
        lo[j + 1:, j] = up[j + 1:, j] / up[j, j]
        up[j + 1:, j:] -= np.outer(lo[j + 1:, j], up[j, j:])
        up[j + 1:, j] = 0.0
    return lo, up


def _log_singular_values(m):
    d = m.shape[0]
    rows = []
    scale = []
    for i in range(d):
        nrm = math.sqrt(float(m[i] @ m[i]))
        rows.append([x / nrm for x in m[i]])
        scale.append(math.log(nrm))
    acc = [[0.0] * d for _ in range(d)]
    _graded_jacobi(rows, scale, acc)
    return np.array(sorted(scale, reverse=True))


def deviation_terms(t_seq, l_seq, eta, dev_out, ang_out):
    """Deviation and angular matrices along a trajectory.

    For each step, ``Y = l F(eta)`` is factored ``Y = L U`` and
    ``N = a_t L a_-t = Q R``.  Then ``D = U^-1 a_-t R^-1 a_t`` satisfies
    ``kappa(D) = kappa(k^-1 b_1..b_i ... )`` for the deviation, and
    ``Y D = a_-t Q a_t`` is the normalized angular matrix.  Every entry used
    is bounded, so nothing overflows however large the gaps in ``t`` are.
    """
    n, d = t_seq.shape
    for i in range(n):
        t = t_seq[i]
        y = l_seq[i] @ eta[i]
        lo, up = _lu(y)
        gap = t[:, None] - t[None, :]
        nn = np.eye(d) + np.tril(lo, -1) * np.exp(np.tril(gap, -1))
        q, r = np.linalg.qr(nn)
        s = np.sign(np.diag(r))
        r = r * s[:, None]
        rinv = np.linalg.inv(r)
        # a_-t R^-1 a_t: entries (i <= j) scaled by exp(t_j - t_i) <= 1
        core = np.triu(rinv) * np.exp(np.triu(-gap))
        dm = np.linalg.solve(up, core)
        dev_out[i] = math.sqrt(float(np.sum(_log_singular_values(dm) ** 2)))
        ang_out[i] = y @ dm


def _reduce_modular(a, b, c, d):
    steps = 0
    while steps < GREEDY_CAP:
        den = c * c + d * d
        x = (a * c + b * d) / den
        n = math.floor(x + 0.5)
        if n != 0:
            a -= n * c
            b -= n * d
            steps += 1
            continue
        if a * a + b * b < den * (1.0 - 1e-13):
            a, b, c, d = -c, -d, a, b
            steps += 1
            continue
        return a, b, c, d, steps, False
    return a, b, c, d, steps, True


def _reduce_cyclic(a, b, c, d, log_l2):
    # z -> l^2 z; keep 0 <= log|z| < log l^2
    r = 0.5 * math.log((a * a + b * b) / (c * c + d * d))
    n = math.floor(r / log_l2)
    if n != 0:
        f = math.exp(-0.5 * n * log_l2)
        a *= f
        b *= f
        c /= f
        d /= f
    return a, b, c, d, abs(n), False


def _reduce_greedy(a, b, c, d, gens, base_inv):
    h = base_inv
    steps = 0
    while steps < GREEDY_CAP:
        p00 = h[0, 0] * a + h[0, 1] * c
        p01 = h[0, 0] * b + h[0, 1] * d
        p10 = h[1, 0] * a + h[1, 1] * c
        p11 = h[1, 0] * b + h[1, 1] * d
        cur = p00 * p00 + p01 * p01 + p10 * p10 + p11 * p11
        best = cur * (1.0 - 1e-12)
        pick = -1
        for j in range(gens.shape[0]):
            g = gens[j]
            na = g[0, 0] * a + g[0, 1] * c
            nb = g[0, 0] * b + g[0, 1] * d
            nc = g[1, 0] * a + g[1, 1] * c
            nd = g[1, 0] * b + g[1, 1] * d
            q00 = h[0, 0] * na + h[0, 1] * nc
            q01 = h[0, 0] * nb + h[0, 1] * nd
            q10 = h[1, 0] * na + h[1, 1] * nc
            q11 = h[1, 0] * nb + h[1, 1] * nd
            val = q00 * q00 + q01 * q01 + q10 * q10 + q11 * q11
            if val < best:
                best = val
                pick = j
        if pick < 0:
            return a, b, c, d, steps, False
        g = gens[pick]
        a, b, c, d = (g[0, 0] * a + g[0, 1] * c, g[0, 0] * b + g[0, 1] * d,
                      g[1, 0] * a + g[1, 1] * c, g[1, 0] * b + g[1, 1] * d)
        steps += 1
    return a, b, c, d, steps, True


def reduce_one(m, mode, gens, base_inv, log_l2):
    """Reduce a 2x2 matrix on the left; returns (matrix, capped)."""
    a, b, c, d = float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1])
    if mode == MODE_MODULAR:
        a, b, c, d, steps, capped = _reduce_modular(a, b, c, d)
    elif mode == MODE_CYCLIC:
        a, b, c, d, steps, capped = _reduce_cyclic(a, b, c, d, log_l2)
    elif mode == MODE_GREEDY:
        a, b, c, d, steps, capped = _reduce_greedy(a, b, c, d, gens, base_inv)
    else:
        capped = False
    return np.array([[a, b], [c, d]]), capped


def quotient_path(x0, mats, order, mode, gens, base_inv, log_l2, out):
    """Reduced representatives of ``x0 m_1 ... m_j`` in a Fuchsian quotient.

    Returns the number of greedy-cap hits and the step at which the path
    escaped (norm^2 above ``ESCAPE_NORM2``), or -1.  After an escape the
    remaining rows of ``out`` are filled with NaN.
    """
    cur, capped = reduce_one(x0, mode, gens, base_inv, log_l2)
    caps = int(capped)
    out[0] = cur
    n = len(order)
    for j in range(n):
        nxt = cur @ mats[order[j]]
        # the atoms are unimodular; renormalize drift only while det is well conditioned
        if float(np.sum(nxt * nxt)) < RENORM_NORM2:
            det = nxt[0, 0] * nxt[1, 1] - nxt[0, 1] * nxt[1, 0]
            if det > 0:
                nxt /= math.sqrt(det)
        cur, capped = reduce_one(nxt, mode, gens, base_inv, log_l2)
        caps += int(capped)
        if float(np.sum(cur * cur)) > ESCAPE_NORM2:
            out[j + 1:] = np.nan
            return caps, j + 1
        out[j + 1] = cur
    return caps, -1
