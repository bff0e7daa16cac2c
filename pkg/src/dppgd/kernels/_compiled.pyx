# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled round kernel for the separable nonsmooth test problem.

Same contract as ``dppgd.kernels._numpy``.
"""
import numpy as np
from libc.math cimport fabs, sqrt, NAN, isfinite

cdef double SLACK = 8 * 2.220446049250313e-16
cdef int SETTLE_ITERS = 8


cdef inline double local_cost(const double* p, Py_ssize_t n, double w) noexcept nogil:
    cdef double s = 0.0, r
    cdef Py_ssize_t d
    for d in range(n - 1):
        r = 1.0 + p[d + 1] - 2.0 * p[d]
        s += r * r
    return w * fabs(p[0] - 1.0) + s


cdef inline double global_cost(const double* p, Py_ssize_t n, double total_w, double n_agents) noexcept nogil:
    cdef double s = 0.0, r
    cdef Py_ssize_t d
    for d in range(n - 1):
        r = 1.0 + p[d + 1] - 2.0 * p[d]
        s += r * r
    return total_w * fabs(p[0] - 1.0) + n_agents * s


cdef inline double sign(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


cdef void project_row(double* v, Py_ssize_t n, int kind, const double* lo, const double* hi,
                      const double* center, double radius, const double* normal,
                      double offset) noexcept nogil:
    cdef Py_ssize_t d
    cdef int it
    cdef double dist, excess, tol, aa, scale, vmax, cmax
    if kind == 1:
        for d in range(n):
            if v[d] < lo[d]:
                v[d] = lo[d]
            if v[d] > hi[d]:
                v[d] = hi[d]
    elif kind == 2:
        for it in range(SETTLE_ITERS):
            dist = 0.0
            vmax = 0.0
            cmax = 0.0
            for d in range(n):
                dist += (v[d] - center[d]) * (v[d] - center[d])
                if fabs(v[d]) > vmax:
                    vmax = fabs(v[d])
                if fabs(center[d]) > cmax:
                    cmax = fabs(center[d])
            dist = sqrt(dist)
            if not (dist > radius + SLACK * (radius + vmax + cmax)):
                break
            scale = radius / dist
            for d in range(n):
                v[d] = center[d] + (v[d] - center[d]) * scale
    elif kind == 3:
        aa = 0.0
        for d in range(n):
            aa += normal[d] * normal[d]
        for it in range(SETTLE_ITERS):
            excess = 0.0
            tol = 0.0
            for d in range(n):
                excess += v[d] * normal[d]
                tol += fabs(v[d]) * fabs(normal[d])
            excess -= offset
            tol = SLACK * (fabs(offset) + tol)
            if not (excess > tol):
                break
            for d in range(n):
                v[d] = v[d] - excess * normal[d] / aa


cdef void metrics_into(double[:, ::1] x, double[:, ::1] y, double[:, ::1] xh,
                       const double[::1] lw, double[::1] out, double[::1] zbar) noexcept nogil:
    cdef Py_ssize_t N = x.shape[0], n = x.shape[1], i, d
    cdef double total_w = 0.0, acc = 0.0, v, best, s, t
    for i in range(N):
        total_w += lw[i]
    for d in range(n):
        s = 0.0
        for i in range(N):
            s += x[i, d]
        t = 0.0
        for i in range(N):
            t += y[i, d]
        zbar[d] = (s + t) / N
    for i in range(N):
        v = global_cost(&xh[i, 0], n, total_w, <double>N)
        out[5 + i] = v
        acc += v
    out[0] = acc / N
    out[1] = global_cost(&zbar[0], n, total_w, <double>N)
    best = 0.0
    for i in range(N):
        s = 0.0
        for d in range(n):
            s += (x[i, d] - zbar[d]) * (x[i, d] - zbar[d])
        s = sqrt(s)
        if s > best:
            best = s
    out[2] = best
    best = 0.0
    for i in range(N):
        s = 0.0
        for d in range(n):
            s += y[i, d] * y[i, d]
        s = sqrt(s)
        if s > best:
            best = s
    out[3] = best
    out[4] = NAN


def state_metrics(double[:, ::1] x, double[:, ::1] y, double[:, ::1] xh,
                  const double[::1] lw, double[::1] out):
    zbar = np.empty(x.shape[1])
    cdef double[::1] zb = zbar
    with nogil:
        metrics_into(x, y, xh, lw, out, zb)


def run_rounds(double[:, ::1] x, double[:, ::1] y, double[:, ::1] xh, double alpha_sum,
               const double[:, ::1] a_r, const double[:, ::1] a_c, double eps,
               const double[::1] lw, const double[::1] alphas, const double[::1] b1,
               const double[::1] b2, const double[:, :, :, ::1] xi,
               const unsigned char[::1] record, double[:, ::1] out,
               int kind, const double[::1] lo, const double[::1] hi, const double[::1] center,
               double radius, const double[::1] normal, double offset, int use_sub,
               double limit):
    cdef Py_ssize_t N = x.shape[0], n = x.shape[1], C = record.shape[0]
    cdef Py_ssize_t c, i, j, d
    cdef Py_ssize_t rows = 0
    cdef int status = 0
    cdef Py_ssize_t bad = -1
    cdef double alpha, alpha_next, w, diff, beta1, beta2, s, G, r
    xn_a = np.empty((N, n))
    yn_a = np.empty((N, n))
    mix_a = np.empty((N, n))
    g_a = np.empty((N, n))
    base_a = np.empty(n)
    pert_a = np.empty(n)
    zb_a = np.empty(n)
    cdef double[:, ::1] xn = xn_a
    cdef double[:, ::1] yn = yn_a
    cdef double[:, ::1] mix = mix_a
    cdef double[:, ::1] g = g_a
    cdef double[::1] base = base_a
    cdef double[::1] pert = pert_a
    cdef double[::1] zb = zb_a

    with nogil:
        for c in range(C):
            if record[c]:
                metrics_into(x, y, xh, lw, out[rows], zb)
            alpha = alphas[c]
            # pseudo-gradients (or exact subgradients)
            for i in range(N):
                if use_sub:
                    for d in range(n):
                        g[i, d] = 0.0
                    g[i, 0] = lw[i] * sign(x[i, 0] - 1.0)
                    for d in range(n - 1):
                        r = 1.0 + x[i, d + 1] - 2.0 * x[i, d]
                        g[i, d + 1] += 2.0 * r
                        g[i, d] -= 4.0 * r
                else:
                    beta1 = b1[c]
                    beta2 = b2[c]
                    for d in range(n):
                        base[d] = x[i, d] + beta1 * xi[i, c, 0, d]
                        pert[d] = base[d] + beta2 * xi[i, c, 1, d]
                    diff = local_cost(&pert[0], n, lw[i]) - local_cost(&base[0], n, lw[i])
                    for d in range(n):
                        g[i, d] = diff / beta2 * xi[i, c, 1, d]
            # mixing
            for i in range(N):
                for d in range(n):
                    s = 0.0
                    for j in range(N):
                        s += a_r[i, j] * x[j, d]
                    mix[i, d] = s
                    s = 0.0
                    for j in range(N):
                        s += a_c[i, j] * y[j, d]
                    xn[i, d] = mix[i, d] + eps * y[i, d] - alpha * g[i, d]
                    yn[i, d] = x[i, d] - mix[i, d] + s - eps * y[i, d]
                project_row(&xn[i, 0], n, kind, &lo[0], &hi[0], &center[0], radius, &normal[0], offset)
            for i in range(N):
                for d in range(n):
                    if not (fabs(xn[i, d]) <= limit and fabs(yn[i, d]) <= limit):
                        status = 1
            if status:
                bad = c
                break
            if record[c]:
                G = 0.0
                for i in range(N):
                    s = 0.0
                    for d in range(n):
                        r = xn[i, d] - mix[i, d] - eps * y[i, d]
                        s += r * r
                    G += sqrt(s)
                out[rows, 4] = G
                rows += 1
            alpha_next = alphas[c + 1]
            alpha_sum += alpha_next
            w = alpha_next / alpha_sum if alpha_sum > 0 else 0.0
            for i in range(N):
                for d in range(n):
                    xh[i, d] += w * (xn[i, d] - xh[i, d])
                    x[i, d] = xn[i, d]
                    y[i, d] = yn[i, d]
    return alpha_sum, rows, status, bad
