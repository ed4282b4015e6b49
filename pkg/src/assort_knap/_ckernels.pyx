# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; a line-by-line port of ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

cdef double PIVOT_TOL = 1e-11
cdef double TIE_TOL = 1e-12
cdef int STALL_LIMIT = 50

cdef enum:
    OPTIMAL = 0
    INFEASIBLE = 1
    UNBOUNDED = 2
    ITERATION_LIMIT = 3

cdef enum:
    NO_PURCHASE = -1
    HORIZON = -2
    MEMBER_INFEASIBLE = -3


cdef void _reduced_costs(double[:, ::1] T, Py_ssize_t[::1] head, char[::1] is_basic,
                         double[::1] cost, Py_ssize_t m, Py_ssize_t ncol,
                         double[::1] d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for j in range(ncol):
        if is_basic[j]:
            d[j] = 0.0
            continue
        acc = cost[j]
        for i in range(m):
            acc -= cost[head[i]] * T[i, j]
        d[j] = acc


cdef int _iterate(double[:, ::1] T, double[::1] beta, Py_ssize_t[::1] head,
                  char[::1] is_basic, char[::1] at_upper, double[::1] upper,
                  double[::1] cost, Py_ssize_t m, Py_ssize_t ncol, double opt_tol,
                  long max_iter, long* it, double[::1] d) noexcept nogil:
    cdef Py_ssize_t i, j, q, r, leaving
    cdef int direction, degenerate = 0
    cdef bint bland = False, to_upper, r_to_upper, take
    cdef double best, score, theta, a, mag, lim, ub, r_mag, step, x_q, piv, f
    while True:
        if it[0] >= max_iter:
            return ITERATION_LIMIT
        _reduced_costs(T, head, is_basic, cost, m, ncol, d)

        q = -1
        best = 0.0
        for j in range(ncol):
            if is_basic[j] or upper[j] <= 0.0:
                continue
            if at_upper[j]:
                score = -d[j]
            else:
                score = d[j]
            if score > opt_tol:
                if bland:
                    q = j
                    break
                if score > best:
                    best = score
                    q = j
        if q < 0:
            return OPTIMAL
        direction = -1 if at_upper[q] else 1

        theta = upper[q]
        r = -1
        r_to_upper = False
        r_mag = 0.0
        for i in range(m):
            a = T[i, q]
            if fabs(a) <= PIVOT_TOL:
                continue
            mag = fabs(a)
            if direction * a > 0.0:
                lim = beta[i] / mag
                to_upper = False
            else:
                ub = upper[head[i]]
                if ub == INFINITY:
                    continue
                lim = (ub - beta[i]) / mag
                to_upper = True
            if lim < 0.0:
                lim = 0.0
            if lim < theta - TIE_TOL:
                take = True
            elif r >= 0 and fabs(lim - theta) <= TIE_TOL:
                if bland:
                    take = head[i] < head[r]
                else:
                    take = mag > r_mag or (mag == r_mag and head[i] < head[r])
            else:
                take = False
            if take:
                theta = lim
                r = i
                r_to_upper = to_upper
                r_mag = mag
        if theta == INFINITY:
            return UNBOUNDED

        step = direction * theta
        for i in range(m):
            beta[i] -= step * T[i, q]
        x_q = (upper[q] if at_upper[q] else 0.0) + step

        if r < 0:
            at_upper[q] = not at_upper[q]
        else:
            leaving = head[r]
            is_basic[leaving] = False
            at_upper[leaving] = r_to_upper
            is_basic[q] = True
            at_upper[q] = False
            head[r] = q
            beta[r] = x_q
            piv = T[r, q]
            for j in range(ncol):
                T[r, j] /= piv
            T[r, q] = 1.0
            for i in range(m):
                if i == r:
                    continue
                f = T[i, q]
                if f != 0.0:
                    for j in range(ncol):
                        T[i, j] -= f * T[r, j]
                    T[i, q] = 0.0

        it[0] += 1
        if theta <= TIE_TOL:
            degenerate += 1
            if degenerate > STALL_LIMIT:
                bland = True
        else:
            degenerate = 0


def simplex(c, A, b, u, double feas_tol, double opt_tol, long max_iter):
    """Bounded-variable primal simplex for ``max c.x  s.t.  A x <= b, 0 <= x <= u``.

    Returns ``(status, x, duals, iterations)``.
    """
    cdef double[:, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t m = Av.shape[0], n = Av.shape[1]
    cdef Py_ssize_t i, j, k, n_art = 0, ncol
    cdef long it = 0
    cdef int status
    cdef double infeas
    for i in range(m):
        if bv[i] < 0.0:
            n_art += 1
    ncol = n + m + n_art

    T_arr = np.zeros((m, ncol))
    cdef double[:, ::1] T = T_arr
    cdef double[::1] beta = np.zeros(m)
    cdef Py_ssize_t[::1] head = np.zeros(m, dtype=np.intp)
    cdef char[::1] is_basic = np.zeros(ncol, dtype=np.int8)
    cdef char[::1] at_upper = np.zeros(ncol, dtype=np.int8)
    cdef double[::1] upper = np.full(ncol, np.inf)
    cdef double[::1] cost = np.zeros(ncol)
    cdef double[::1] d = np.zeros(ncol)
    for j in range(n):
        upper[j] = uv[j]

    k = 0
    for i in range(m):
        if bv[i] < 0.0:
            for j in range(n):
                T[i, j] = -Av[i, j]
            T[i, n + i] = -1.0
            T[i, n + m + k] = 1.0
            beta[i] = -bv[i]
            head[i] = n + m + k
            k += 1
        else:
            for j in range(n):
                T[i, j] = Av[i, j]
            T[i, n + i] = 1.0
            beta[i] = bv[i]
            head[i] = n + i
        is_basic[head[i]] = 1

    if n_art > 0:
        for j in range(n + m, ncol):
            cost[j] = -1.0
        with nogil:
            status = _iterate(T, beta, head, is_basic, at_upper, upper, cost,
                              m, ncol, opt_tol, max_iter, &it, d)
        if status == ITERATION_LIMIT:
            return status, np.full(n, np.nan), np.zeros(m), it
        infeas = 0.0
        for i in range(m):
            if head[i] >= n + m:
                infeas += beta[i]
        if infeas > feas_tol:
            return INFEASIBLE, np.full(n, np.nan), np.zeros(m), it
        for j in range(n + m, ncol):
            upper[j] = 0.0
            at_upper[j] = 0

    for j in range(ncol):
        cost[j] = cv[j] if j < n else 0.0
    with nogil:
        status = _iterate(T, beta, head, is_basic, at_upper, upper, cost,
                          m, ncol, opt_tol, max_iter, &it, d)

    x_arr = np.empty(n)
    cdef double[::1] x = x_arr
    for j in range(n):
        x[j] = upper[j] if at_upper[j] else 0.0
    for i in range(m):
        if head[i] < n:
            x[head[i]] = beta[i]
    _reduced_costs(T, head, is_basic, cost, m, ncol, d)
    duals_arr = np.empty(m)
    cdef double[::1] duals = duals_arr
    for i in range(m):
        duals[i] = -d[n + i]
    return status, x_arr, duals_arr, it


def reduced_bvn(vals, int k, double tol):
    """Decompose ``vals`` (entries in (0,1), summing to integer ``k``) into size-k sets.

    Returns ``(status, weights, members)``; status 1 means the iteration cap
    of ``len(vals) + 2`` was hit.
    """
    cdef double[::1] src = np.ascontiguousarray(vals, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0]
    cdef Py_ssize_t i, best, it = 0, max_iter = n + 2, kk
    cdef bint done, pi, pb
    cdef double alpha
    y_arr = np.array(src, dtype=np.float64)
    yb_arr = np.empty(n)
    cdef double[::1] y = y_arr
    cdef double[::1] yb = yb_arr
    for i in range(n):
        yb[i] = 1.0 - y[i]
    w_arr = np.empty(max_iter)
    rows_arr = np.zeros((max_iter, n), dtype=np.uint8)
    cdef double[::1] weights = w_arr
    cdef unsigned char[:, ::1] rows = rows_arr
    cdef char[::1] chosen = np.zeros(n, dtype=np.int8)
    cdef int status = 0
    while True:
        done = True
        for i in range(n):
            if y[i] > 0.0 or yb[i] > 0.0:
                done = False
                break
        if done:
            break
        if it >= max_iter:
            status = 1
            break
        for i in range(n):
            chosen[i] = 0
        for kk in range(k):
            best = -1
            for i in range(n):
                if chosen[i]:
                    continue
                if best < 0:
                    best = i
                    continue
                pi = yb[i] == 0.0
                pb = yb[best] == 0.0
                if (pi and not pb) or (pi == pb and y[i] > y[best]):
                    best = i
            chosen[best] = 1
        alpha = INFINITY
        for i in range(n):
            if chosen[i]:
                if y[i] > 0.0 and y[i] < alpha:
                    alpha = y[i]
            elif yb[i] > 0.0 and yb[i] < alpha:
                alpha = yb[i]
        if alpha == INFINITY:
            break
        for i in range(n):
            if chosen[i]:
                y[i] -= alpha
                if y[i] <= tol:
                    y[i] = 0.0
            else:
                yb[i] -= alpha
                if yb[i] <= tol:
                    yb[i] = 0.0
        weights[it] = alpha
        for i in range(n):
            rows[it, i] = 1 if chosen[i] else 0
        it += 1
    return status, w_arr[:it].copy(), rows_arr[:it].copy()


def run_epoch(support, v, A, inventory, u, Py_ssize_t t_start, Py_ssize_t t_stop,
              bint drop_infeasible, purchases):
    """Offer ``support`` period by period; see ``_pykernels.run_epoch``."""
    cdef Py_ssize_t[::1] sup = np.ascontiguousarray(support, dtype=np.intp)
    cdef double[::1] vv = v
    cdef double[:, ::1] Av = A
    cdef double[::1] inv = inventory
    cdef double[::1] uu = u
    cdef long long[::1] pur = purchases
    cdef Py_ssize_t M = Av.shape[1], ns = sup.shape[0]
    cdef Py_ssize_t t = t_start, a, j, s, k, chosen
    cdef Py_ssize_t[::1] offered = np.empty(max(ns, 1), dtype=np.intp)
    cdef double denom, w, acc
    cdef bint ok
    cdef int code = HORIZON
    with nogil:
        while t < t_stop:
            k = 0
            denom = 1.0
            for a in range(ns):
                s = sup[a]
                ok = True
                for j in range(M):
                    if inv[j] < Av[s, j]:
                        ok = False
                        break
                if not ok:
                    if not drop_infeasible:
                        code = MEMBER_INFEASIBLE
                        break
                    continue
                offered[k] = s
                k += 1
                denom += vv[s]
            if code == MEMBER_INFEASIBLE:
                break
            w = uu[t] * denom
            t += 1
            acc = 0.0
            chosen = -1
            for a in range(k):
                s = offered[a]
                acc += vv[s]
                if w < acc:
                    chosen = s
                    break
            if chosen < 0:
                code = NO_PURCHASE
                break
            pur[chosen] += 1
            for j in range(M):
                inv[j] -= Av[chosen, j]
    return t, code
