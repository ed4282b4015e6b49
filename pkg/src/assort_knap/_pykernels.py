"""Pure-Python kernels.

Reference implementation of the three hot loops; ``_ckernels.pyx`` mirrors
this file operation for operation so both backends produce the same floats.
Only used when the compiled extension is unavailable or explicitly requested.
"""
import math

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

NO_PURCHASE = -1
HORIZON = -2
MEMBER_INFEASIBLE = -3

PIVOT_TOL = 1e-11
TIE_TOL = 1e-12
STALL_LIMIT = 50

INF = math.inf


def _reduced_costs(T, head, is_basic, cost, m, ncol):
    d = [0.0] * ncol
    for j in range(ncol):
        if is_basic[j]:
            continue
        acc = cost[j]
        for i in range(m):
            acc -= cost[head[i]] * T[i][j]
        d[j] = acc
    return d


def _iterate(T, beta, head, is_basic, at_upper, upper, cost, m, ncol,
             opt_tol, max_iter, it0):
    """Run primal simplex iterations for the given cost; returns (status, iterations)."""
    it = it0
    degenerate = 0
    bland = False
    while True:
        if it >= max_iter:
            return ITERATION_LIMIT, it
        d = _reduced_costs(T, head, is_basic, cost, m, ncol)

        q = -1
        direction = 0
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
            return OPTIMAL, it
        direction = -1 if at_upper[q] else 1

        theta = upper[q]
        r = -1
        r_to_upper = False
        r_mag = 0.0
        for i in range(m):
            a = T[i][q]
            if abs(a) <= PIVOT_TOL:
                continue
            mag = abs(a)
            if direction * a > 0.0:
                lim = beta[i] / mag
                to_upper = False
            else:
                ub = upper[head[i]]
                if ub == INF:
                    continue
                lim = (ub - beta[i]) / mag
                to_upper = True
            if lim < 0.0:
                lim = 0.0
            if lim < theta - TIE_TOL:
                take = True
            elif r >= 0 and abs(lim - theta) <= TIE_TOL:
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
        if theta == INF:
            return UNBOUNDED, it

        step = direction * theta
        for i in range(m):
            beta[i] -= step * T[i][q]
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
            row = T[r]
            piv = row[q]
            for j in range(ncol):
                row[j] /= piv
            row[q] = 1.0
            for i in range(m):
                if i == r:
                    continue
                f = T[i][q]
                if f != 0.0:
                    Ti = T[i]
                    for j in range(ncol):
                        Ti[j] -= f * row[j]
                    Ti[q] = 0.0

        it += 1
        if theta <= TIE_TOL:
            degenerate += 1
            if degenerate > STALL_LIMIT:
                bland = True
        else:
            degenerate = 0


def simplex(c, A, b, u, feas_tol, opt_tol, max_iter):
    """Bounded-variable primal simplex for ``max c.x  s.t.  A x <= b, 0 <= x <= u``.

    Returns ``(status, x, duals, iterations)``.
    """
    m, n = A.shape
    c = [float(v) for v in c]
    b = [float(v) for v in b]
    u = [float(v) for v in u]
    n_art = 0
    for i in range(m):
        if b[i] < 0.0:
            n_art += 1
    ncol = n + m + n_art

    T = [[0.0] * ncol for _ in range(m)]
    beta = [0.0] * m
    head = [0] * m
    is_basic = [False] * ncol
    at_upper = [False] * ncol
    upper = u + [INF] * (m + n_art)

    k = 0
    for i in range(m):
        Ti = T[i]
        Ai = A[i]
        if b[i] < 0.0:
            for j in range(n):
                Ti[j] = -float(Ai[j])
            Ti[n + i] = -1.0
            Ti[n + m + k] = 1.0
            beta[i] = -b[i]
            head[i] = n + m + k
            k += 1
        else:
            for j in range(n):
                Ti[j] = float(Ai[j])
            Ti[n + i] = 1.0
            beta[i] = b[i]
            head[i] = n + i
        is_basic[head[i]] = True

    it = 0
    if n_art > 0:
        cost = [0.0] * (n + m) + [-1.0] * n_art
        status, it = _iterate(T, beta, head, is_basic, at_upper, upper, cost,
                              m, ncol, opt_tol, max_iter, it)
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
            at_upper[j] = False

    cost = c + [0.0] * (m + n_art)
    status, it = _iterate(T, beta, head, is_basic, at_upper, upper, cost,
                          m, ncol, opt_tol, max_iter, it)

    x = np.empty(n)
    for j in range(n):
        x[j] = upper[j] if at_upper[j] else 0.0
    for i in range(m):
        if head[i] < n:
            x[head[i]] = beta[i]
    d = _reduced_costs(T, head, is_basic, cost, m, ncol)
    duals = np.empty(m)
    for i in range(m):
        duals[i] = -d[n + i]
    return status, x, duals, it


def reduced_bvn(vals, k, tol):
    """Decompose ``vals`` (entries in (0,1), summing to integer ``k``) into size-k sets.

    Returns ``(status, weights, members)``; status 1 means the iteration cap
    of ``len(vals) + 2`` was hit.
    """
    n = len(vals)
    y = [float(v) for v in vals]
    yb = [1.0 - v for v in y]
    weights = []
    rows = []
    chosen = [False] * n
    max_iter = n + 2
    it = 0
    while True:
        done = True
        for i in range(n):
            if y[i] > 0.0 or yb[i] > 0.0:
                done = False
                break
        if done:
            break
        if it >= max_iter:
            return 1, np.asarray(weights), np.asarray(rows, dtype=np.uint8).reshape(len(rows), n)
        for i in range(n):
            chosen[i] = False
        for _ in range(k):
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
            chosen[best] = True
        alpha = INF
        for i in range(n):
            if chosen[i]:
                if y[i] > 0.0 and y[i] < alpha:
                    alpha = y[i]
            elif yb[i] > 0.0 and yb[i] < alpha:
                alpha = yb[i]
        if alpha == INF:
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
        weights.append(alpha)
        rows.append([1 if c else 0 for c in chosen])
        it += 1
    return 0, np.asarray(weights, dtype=float), np.asarray(rows, dtype=np.uint8).reshape(len(rows), n)


def run_epoch(support, v, A, inventory, u, t_start, t_stop, drop_infeasible, purchases):
    """Offer ``support`` period by period starting at ``t_start``.

    Period ``t`` uses uniform ``u[t]``. Stops at the first no-purchase, at
    ``t_stop``, or (unless ``drop_infeasible``) as soon as a member of the
    support can no longer be sold. ``inventory`` and ``purchases`` are
    updated in place. Returns ``(t_end, code)``.
    """
    M = A.shape[1]
    offered = []
    t = t_start
    while t < t_stop:
        offered.clear()
        denom = 1.0
        for s in support:
            ok = True
            for j in range(M):
                if inventory[j] < A[s, j]:
                    ok = False
                    break
            if not ok:
                if not drop_infeasible:
                    return t, MEMBER_INFEASIBLE
                continue
            offered.append(s)
            denom += v[s]
        w = u[t] * denom
        t += 1
        acc = 0.0
        chosen = -1
        for s in offered:
            acc += v[s]
            if w < acc:
                chosen = s
                break
        if chosen < 0:
            return t, NO_PURCHASE
        purchases[chosen] += 1
        for j in range(M):
            inventory[j] -= A[chosen, j]
    return t, HORIZON
