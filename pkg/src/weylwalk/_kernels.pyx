# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.  Same contract as ``_fallback``; see the docstrings there."""
from libc.math cimport exp, log, sqrt, fabs, floor, copysign, NAN

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    MAXD = 8
    MAX_SWEEPS = 30
    GREEDY_CAP = 10000

cdef double ORTH_TOL = 4e-16
cdef double ESCAPE_NORM2 = 1e60
cdef double RENORM_NORM2 = 1e8

MODE_TRIVIAL = 0
MODE_MODULAR = 1
MODE_CYCLIC = 2
MODE_GREEDY = 3


cdef void _graded_jacobi(double[:, ::1] rows, double* scale, double[:, ::1] acc,
                         int d, bint track) noexcept nogil:
    cdef int sweep, p, q, a, b, c, r
    cdef double gamma, rho, num, den, w, root, tau, tau_rho, zeta, cs, sn
    cdef double na, nb, xa, xb, ua, ub
    cdef bint rotated
    for sweep in range(MAX_SWEEPS):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                gamma = 0.0
                for c in range(d):
                    gamma += rows[p, c] * rows[q, c]
                if fabs(gamma) <= ORTH_TOL:
                    continue
                rotated = True
                if scale[p] >= scale[q]:
                    a = p
                    b = q
                else:
                    a = q
                    b = p
                rho = exp(scale[b] - scale[a])
                num = 1.0 - rho * rho
                den = 2.0 * rho * gamma
                if fabs(num) >= fabs(den):
                    w = den / num
                    root = 1.0 + sqrt(1.0 + w * w)
                    tau = -w / root
                    tau_rho = -(2.0 * gamma / num) / root
                else:
                    zeta = num / den
                    tau = -1.0 / (zeta + copysign(sqrt(1.0 + zeta * zeta), zeta))
                    tau_rho = tau / rho
                cs = 1.0 / sqrt(1.0 + tau * tau)
                sn = cs * tau
                na = 0.0
                nb = 0.0
                for c in range(d):
                    xa = cs * rows[a, c] - sn * rho * rows[b, c]
                    xb = cs * tau_rho * rows[a, c] + cs * rows[b, c]
                    rows[a, c] = xa
                    rows[b, c] = xb
                    na += xa * xa
                    nb += xb * xb
                na = sqrt(na)
                nb = sqrt(nb)
                for c in range(d):
                    rows[a, c] /= na
                    rows[b, c] /= nb
                scale[a] += log(na)
                scale[b] += log(nb)
                if track:
                    for r in range(d):
                        ua = acc[r, a]
                        ub = acc[r, b]
                        acc[r, a] = cs * ua - sn * ub
                        acc[r, b] = sn * ua + cs * ub
        if not rotated:
            break


cdef double _det(double[:, ::1] m, int d) noexcept nogil:
    # Gaussian elimination with partial pivoting on a scratch copy
    cdef double w[MAXD][MAXD]
    cdef int i, j, r, piv
    cdef double det = 1.0, f, tmp, best
    for i in range(d):
        for j in range(d):
            w[i][j] = m[i, j]
    for j in range(d):
        piv = j
        best = fabs(w[j][j])
        for r in range(j + 1, d):
            if fabs(w[r][j]) > best:
                best = fabs(w[r][j])
                piv = r
        if best == 0.0:
            return 0.0
        if piv != j:
            for i in range(d):
                tmp = w[j][i]
                w[j][i] = w[piv][i]
                w[piv][i] = tmp
            det = -det
        det *= w[j][j]
        for r in range(j + 1, d):
            f = w[r][j] / w[j][j]
            for i in range(j, d):
                w[r][i] -= f * w[j][i]
    return det


def walk(double[:, :, ::1] atoms, long[::1] choices, double[:, ::1] k, double[::1] t,
         double[:, ::1] l, double[:, ::1] t_out, k_out=None, l_out=None, inc_out=None):
    cdef int d = t.shape[0]
    cdef Py_ssize_t n = choices.shape[0], j
    cdef int i, m, c, r, atom, idx, tmpi
    cdef double nrm, mean, best, det, prod
    cdef double scale[MAXD]
    cdef double sorted_scale[MAXD]
    cdef double signs[MAXD]
    cdef int order[MAXD]
    cdef double[:, ::1] rows = np.empty((d, d))
    cdef double[:, ::1] acc = np.empty((d, d))
    cdef double[:, ::1] inc = np.empty((d, d))
    cdef double[:, ::1] knew = np.empty((d, d))
    cdef double[:, :, ::1] kv
    cdef double[:, :, ::1] lv
    cdef double[:, :, ::1] iv
    cdef bint store_k = k_out is not None
    cdef bint store_l = l_out is not None
    cdef bint store_inc = inc_out is not None
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernel")
    if store_k:
        kv = k_out
    if store_l:
        lv = l_out
    if store_inc:
        iv = inc_out
    for i in range(d):
        t_out[0, i] = t[i]
        if store_k:
            for c in range(d):
                kv[0, i, c] = k[i, c]
        if store_l:
            for c in range(d):
                lv[0, i, c] = l[i, c]
    with nogil:
        for j in range(n):
            atom = choices[j]
            for i in range(d):
                nrm = 0.0
                for c in range(d):
                    rows[i, c] = 0.0
                    for m in range(d):
                        rows[i, c] += l[i, m] * atoms[atom, m, c]
                    nrm += rows[i, c] * rows[i, c]
                nrm = sqrt(nrm)
                for c in range(d):
                    rows[i, c] /= nrm
                scale[i] = t[i] + log(nrm)
                for c in range(d):
                    acc[i, c] = 1.0 if i == c else 0.0
            _graded_jacobi(rows, scale, acc, d, True)
            # stable insertion sort, decreasing scale
            for i in range(d):
                order[i] = i
            for i in range(1, d):
                tmpi = order[i]
                r = i - 1
                while r >= 0 and scale[order[r]] < scale[tmpi]:
                    order[r + 1] = order[r]
                    r -= 1
                order[r + 1] = tmpi
            for i in range(d):
                for r in range(d):
                    inc[r, i] = acc[r, order[i]]
            for i in range(d):
                signs[i] = 1.0 if inc[i, i] >= 0 else -1.0
            det = _det(inc, d)
            prod = 1.0
            for i in range(d):
                prod *= signs[i]
            if det * prod < 0:
                idx = 0
                best = fabs(inc[0, 0])
                for i in range(1, d):
                    if fabs(inc[i, i]) < best:
                        best = fabs(inc[i, i])
                        idx = i
                signs[idx] = -signs[idx]
            for r in range(d):
                for c in range(d):
                    inc[r, c] *= signs[c]
            mean = 0.0
            for i in range(d):
                sorted_scale[i] = scale[order[i]]
                mean += sorted_scale[i]
            mean /= d
            for i in range(d):
                t[i] = sorted_scale[i] - mean
                for c in range(d):
                    l[i, c] = signs[i] * rows[order[i], c]
            for r in range(d):
                for c in range(d):
                    knew[r, c] = 0.0
                    for m in range(d):
                        knew[r, c] += k[r, m] * inc[m, c]
            for r in range(d):
                for c in range(d):
                    k[r, c] = knew[r, c]
            for i in range(d):
                t_out[j + 1, i] = t[i]
            if store_k:
                for r in range(d):
                    for c in range(d):
                        kv[j + 1, r, c] = k[r, c]
            if store_l:
                for r in range(d):
                    for c in range(d):
                        lv[j + 1, r, c] = l[r, c]
            if store_inc:
                for r in range(d):
                    for c in range(d):
                        iv[j, r, c] = inc[r, c]


cdef void _gram_schmidt(double[:, ::1] q, int d) noexcept nogil:
    cdef int rep, i, j, r
    cdef double dot, nrm
    for rep in range(2):
        for j in range(d):
            for i in range(j):
                dot = 0.0
                for r in range(d):
                    dot += q[r, i] * q[r, j]
                for r in range(d):
                    q[r, j] -= dot * q[r, i]
            nrm = 0.0
            for r in range(d):
                nrm += q[r, j] * q[r, j]
            nrm = sqrt(nrm)
            for r in range(d):
                q[r, j] /= nrm


def flag_orbit(double[:, :, ::1] mats, long[::1] order, double[:, ::1] f0, double[:, :, ::1] out):
    cdef int d = f0.shape[0]
    cdef Py_ssize_t n = order.shape[0], j
    cdef int r, c, m, a
    cdef double[:, ::1] q = np.empty((d, d))
    for r in range(d):
        for c in range(d):
            out[0, r, c] = f0[r, c]
    with nogil:
        for j in range(n):
            a = order[j]
            for r in range(d):
                for c in range(d):
                    q[r, c] = 0.0
                    for m in range(d):
                        q[r, c] += mats[a, r, m] * out[j, m, c]
            _gram_schmidt(q, d)
            for r in range(d):
                for c in range(d):
                    out[j + 1, r, c] = q[r, c]


def deviation_terms(double[:, ::1] t_seq, double[:, :, ::1] l_seq, double[:, :, ::1] eta,
                    double[::1] dev_out, double[:, :, ::1] ang_out):
    cdef Py_ssize_t n = t_seq.shape[0], s
    cdef int d = t_seq.shape[1]
    cdef int i, j, r, m
    cdef double[:, ::1] y = np.empty((d, d))
    cdef double[:, ::1] lo = np.empty((d, d))
    cdef double[:, ::1] up = np.empty((d, d))
    cdef double[:, ::1] nn = np.empty((d, d))
    cdef double[:, ::1] rr = np.empty((d, d))
    cdef double[:, ::1] rinv = np.empty((d, d))
    cdef double[:, ::1] dm = np.empty((d, d))
    cdef double[:, ::1] rows = np.empty((d, d))
    cdef double[:, ::1] dummy = np.empty((d, d))
    cdef double scale[MAXD]
    cdef double f, acc2, nrm, tot
    with nogil:
        for s in range(n):
            # Y = l F(eta)
            for i in range(d):
                for j in range(d):
                    f = 0.0
                    for m in range(d):
                        f += l_seq[s, i, m] * eta[s, m, j]
                    y[i, j] = f
                    up[i, j] = f
                    lo[i, j] = 1.0 if i == j else 0.0
            for j in range(d - 1):
                for i in range(j + 1, d):
                    f = up[i, j] / up[j, j]
                    lo[i, j] = f
                    for m in range(j, d):
                        up[i, m] -= f * up[j, m]
                    up[i, j] = 0.0
            # N = a_t L a_-t, QR by modified Gram-Schmidt on columns
            for i in range(d):
                for j in range(d):
                    if i > j:
                        nn[i, j] = lo[i, j] * exp(t_seq[s, i] - t_seq[s, j])
                    elif i == j:
                        nn[i, j] = 1.0
                    else:
                        nn[i, j] = 0.0
                    rr[i, j] = 0.0
            for j in range(d):
                for i in range(j):
                    f = 0.0
                    for r in range(d):
                        f += nn[r, i] * nn[r, j]
                    rr[i, j] += f
                    for r in range(d):
                        nn[r, j] -= f * nn[r, i]
                # second pass for orthogonality
                for i in range(j):
                    f = 0.0
                    for r in range(d):
                        f += nn[r, i] * nn[r, j]
                    rr[i, j] += f
                    for r in range(d):
                        nn[r, j] -= f * nn[r, i]
                nrm = 0.0
                for r in range(d):
                    nrm += nn[r, j] * nn[r, j]
                nrm = sqrt(nrm)
                rr[j, j] = nrm
                for r in range(d):
                    nn[r, j] /= nrm
            # inverse of upper-triangular R
            for j in range(d):
                for i in range(d):
                    rinv[i, j] = 0.0
                rinv[j, j] = 1.0 / rr[j, j]
                for i in range(j - 1, -1, -1):
                    f = 0.0
                    for m in range(i + 1, j + 1):
                        f += rr[i, m] * rinv[m, j]
                    rinv[i, j] = -f / rr[i, i]
            # core = a_-t R^-1 a_t (upper), then dm = U^-1 core
            for i in range(d):
                for j in range(d):
                    if j >= i:
                        dm[i, j] = rinv[i, j] * exp(t_seq[s, j] - t_seq[s, i])
                    else:
                        dm[i, j] = 0.0
            for j in range(d):
                for i in range(d - 1, -1, -1):
                    f = dm[i, j]
                    for m in range(i + 1, d):
                        f -= up[i, m] * dm[m, j]
                    dm[i, j] = f / up[i, i]
            for i in range(d):
                for j in range(d):
                    f = 0.0
                    for m in range(d):
                        f += y[i, m] * dm[m, j]
                    ang_out[s, i, j] = f
            for i in range(d):
                nrm = 0.0
                for j in range(d):
                    nrm += dm[i, j] * dm[i, j]
                nrm = sqrt(nrm)
                for j in range(d):
                    rows[i, j] = dm[i, j] / nrm
                scale[i] = log(nrm)
            _graded_jacobi(rows, scale, dummy, d, False)
            tot = 0.0
            for i in range(d):
                tot += scale[i] * scale[i]
            dev_out[s] = sqrt(tot)


cdef int _reduce(double* m, int mode, double[:, :, ::1] gens, double[:, ::1] h,
                 double log_l2) noexcept nogil:
    """Reduce m = (a, b, c, d) in place; returns 1 if the step cap was hit."""
    cdef double a = m[0], b = m[1], c = m[2], d = m[3]
    cdef double den, x, nf, r, f, cur, best, val, na, nb, nc, nd
    cdef double p00, p01, p10, p11
    cdef int steps = 0, j, pick, capped = 0
    cdef Py_ssize_t ng
    if mode == 1:
        capped = 1
        while steps < GREEDY_CAP:
            den = c * c + d * d
            x = (a * c + b * d) / den
            nf = floor(x + 0.5)
            if nf != 0:
                a -= nf * c
                b -= nf * d
                steps += 1
                continue
            if a * a + b * b < den * (1.0 - 1e-13):
                x = a
                a = -c
                c = x
                x = b
                b = -d
                d = x
                steps += 1
                continue
            capped = 0
            break
    elif mode == 2:
        r = 0.5 * log((a * a + b * b) / (c * c + d * d))
        nf = floor(r / log_l2)
        if nf != 0:
            f = exp(-0.5 * nf * log_l2)
            a *= f
            b *= f
            c /= f
            d /= f
    elif mode == 3:
        ng = gens.shape[0]
        capped = 1
        while steps < GREEDY_CAP:
            p00 = h[0, 0] * a + h[0, 1] * c
            p01 = h[0, 0] * b + h[0, 1] * d
            p10 = h[1, 0] * a + h[1, 1] * c
            p11 = h[1, 0] * b + h[1, 1] * d
            cur = p00 * p00 + p01 * p01 + p10 * p10 + p11 * p11
            best = cur * (1.0 - 1e-12)
            pick = -1
            for j in range(ng):
                na = gens[j, 0, 0] * a + gens[j, 0, 1] * c
                nb = gens[j, 0, 0] * b + gens[j, 0, 1] * d
                nc = gens[j, 1, 0] * a + gens[j, 1, 1] * c
                nd = gens[j, 1, 0] * b + gens[j, 1, 1] * d
                p00 = h[0, 0] * na + h[0, 1] * nc
                p01 = h[0, 0] * nb + h[0, 1] * nd
                p10 = h[1, 0] * na + h[1, 1] * nc
                p11 = h[1, 0] * nb + h[1, 1] * nd
                val = p00 * p00 + p01 * p01 + p10 * p10 + p11 * p11
                if val < best:
                    best = val
                    pick = j
            if pick < 0:
                capped = 0
                break
            na = gens[pick, 0, 0] * a + gens[pick, 0, 1] * c
            nb = gens[pick, 0, 0] * b + gens[pick, 0, 1] * d
            nc = gens[pick, 1, 0] * a + gens[pick, 1, 1] * c
            nd = gens[pick, 1, 0] * b + gens[pick, 1, 1] * d
            a = na
            b = nb
            c = nc
            d = nd
            steps += 1
    m[0] = a
    m[1] = b
    m[2] = c
    m[3] = d
    return capped


def reduce_one(m, int mode, double[:, :, ::1] gens, double[:, ::1] base_inv, double log_l2):
    cdef double v[4]
    cdef int capped
    v[0] = m[0, 0]
    v[1] = m[0, 1]
    v[2] = m[1, 0]
    v[3] = m[1, 1]
    capped = _reduce(v, mode, gens, base_inv, log_l2)
    return np.array([[v[0], v[1]], [v[2], v[3]]]), bool(capped)


def quotient_path(double[:, ::1] x0, double[:, :, ::1] mats, long[::1] order, int mode,
                  double[:, :, ::1] gens, double[:, ::1] base_inv, double log_l2,
                  double[:, :, ::1] out):
    cdef Py_ssize_t n = order.shape[0], j, jj
    cdef double v[4]
    cdef double w[4]
    cdef double det, sq
    cdef int caps = 0, a
    cdef Py_ssize_t escaped = -1
    v[0] = x0[0, 0]
    v[1] = x0[0, 1]
    v[2] = x0[1, 0]
    v[3] = x0[1, 1]
    with nogil:
        caps += _reduce(v, mode, gens, base_inv, log_l2)
        out[0, 0, 0] = v[0]
        out[0, 0, 1] = v[1]
        out[0, 1, 0] = v[2]
        out[0, 1, 1] = v[3]
        for j in range(n):
            a = order[j]
            w[0] = v[0] * mats[a, 0, 0] + v[1] * mats[a, 1, 0]
            w[1] = v[0] * mats[a, 0, 1] + v[1] * mats[a, 1, 1]
            w[2] = v[2] * mats[a, 0, 0] + v[3] * mats[a, 1, 0]
            w[3] = v[2] * mats[a, 0, 1] + v[3] * mats[a, 1, 1]
            v[0] = w[0]
            v[1] = w[1]
            v[2] = w[2]
            v[3] = w[3]
            sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2] + w[3] * w[3]
            if sq < RENORM_NORM2:
                det = w[0] * w[3] - w[1] * w[2]
                if det > 0:
                    det = sqrt(det)
                    v[0] = w[0] / det
                    v[1] = w[1] / det
                    v[2] = w[2] / det
                    v[3] = w[3] / det
            caps += _reduce(v, mode, gens, base_inv, log_l2)
            sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]
            if sq > ESCAPE_NORM2:
                escaped = j + 1
                for jj in range(j + 1, n + 1):
                    out[jj, 0, 0] = NAN
                    out[jj, 0, 1] = NAN
                    out[jj, 1, 0] = NAN
                    out[jj, 1, 1] = NAN
                break
            out[j + 1, 0, 0] = v[0]
            out[j + 1, 0, 1] = v[1]
            out[j + 1, 1, 0] = v[2]
            out[j + 1, 1, 1] = v[3]
    return caps, escaped
