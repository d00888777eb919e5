"""Compiled inner loops for the per-slot transmission subproblem.

Everything here works on plain float64 arrays for the offloading device
subset. cs[i] is the normalized receive SNR numerator Gamma_i * p_i /
(N0 * omega); dcoefs[i] is (Q_i - T_i) * omega * tau / ln2, the scale of
the marginal bandwidth value. Devices with dcoef <= 0 or c <= 0 take the
bandwidth floor and are never bisected.
"""

import math

import numpy as np
from numba import njit

LN2 = math.log(2.0)


@njit(cache=True, inline="always")
def _phi(alpha, c, dcoef):
    # marginal value of bandwidth: dcoef * (ln(1+u) - u/(1+u)), u = c/alpha;
    # strictly decreasing in alpha, -> inf as alpha -> 0+, -> 0 as alpha -> inf
    u = c / alpha
    return dcoef * (math.log1p(u) - u / (1.0 + u))


@njit(cache=True)
def bw_lagrangian(cs, dcoefs, eps_a, budget, xi, i_max, varsigma, alpha_out):
    """Water-filling style bandwidth split via bisection on the multiplier.

    Returns (outer_iterations, converged). alpha_out receives the split:
    floors eps_a for valueless devices, max(eps_a, root) otherwise, with a
    final proportional trim of the above-floor excess if the sum overshoots
    the budget.

    Each multiplier step refines the per-device root brackets only far
    enough to decide, with margin xi, which side of the budget the clamped
    sum lands on; full varsigma-width roots are computed only when the
    residual test could actually fire. The multiplier trajectory is the
    one a fully refined bisection would take.
    """
    n = cs.shape[0]
    n_active = 0
    lam_lo = 0.0
    lam_hi = 0.0
    for i in range(n):
        alpha_out[i] = eps_a
        if cs[i] > 0.0 and dcoefs[i] > 0.0:
            n_active += 1
            v_lo = _phi(budget, cs[i], dcoefs[i])
            v_hi = _phi(eps_a, cs[i], dcoefs[i])
            if v_lo > lam_lo:
                lam_lo = v_lo
            if v_hi > lam_hi:
                lam_hi = v_hi
    if n_active == 0:
        return 0, True

    # per-device root brackets; roots shrink when the multiplier grows, so
    # each outer step tightens one side and later bisections start narrow
    r_lo = np.zeros(n)
    r_hi = np.full(n, budget)
    b_lo = np.zeros(n)
    b_hi = np.zeros(n)
    ssum = n * eps_a
    iters = 0
    while abs(ssum - budget) >= xi and iters < i_max:
        lam = 0.5 * (lam_lo + lam_hi)
        iters += 1
        for i in range(n):
            if cs[i] > 0.0 and dcoefs[i] > 0.0:
                b_lo[i] = r_lo[i]
                b_hi[i] = r_hi[i]
        sign = 0
        s_lo = 0.0
        s_hi = 0.0
        while True:
            s_lo = 0.0
            s_hi = 0.0
            for i in range(n):
                if cs[i] > 0.0 and dcoefs[i] > 0.0:
                    a = b_lo[i] if b_lo[i] > eps_a else eps_a
                    s_lo += a
                    a = b_hi[i] if b_hi[i] > eps_a else eps_a
                    s_hi += a
                else:
                    s_lo += eps_a
                    s_hi += eps_a
            if iters < i_max:
                # clamped-sum interval clear of the budget by xi: the
                # direction is certain and the residual test cannot fire
                if s_lo - budget >= xi:
                    sign = 1
                    break
                if budget - s_hi >= xi:
                    sign = -1
                    break
            # halve the widest unresolved contribution; floored brackets
            # (hi <= eps_a) contribute exactly eps_a and need no work
            pick = -1
            wmax = 0.0
            for i in range(n):
                if (cs[i] > 0.0 and dcoefs[i] > 0.0 and b_hi[i] > eps_a
                        and b_hi[i] - b_lo[i] > varsigma * b_hi[i]):
                    w = b_hi[i] - (b_lo[i] if b_lo[i] > eps_a else eps_a)
                    if w > wmax:
                        wmax = w
                        pick = i
            if pick < 0:
                break
            mid = 0.5 * (b_lo[pick] + b_hi[pick])
            if _phi(mid, cs[pick], dcoefs[pick]) > lam:
                b_lo[pick] = mid
            else:
                b_hi[pick] = mid
        if sign == 0:
            ssum = 0.0
            for i in range(n):
                if cs[i] > 0.0 and dcoefs[i] > 0.0:
                    r = 0.5 * (b_lo[i] + b_hi[i])
                    a = r if r > eps_a else eps_a
                else:
                    a = eps_a
                alpha_out[i] = a
                ssum += a
        elif sign > 0:
            ssum = s_lo
        else:
            ssum = s_hi
        if ssum > budget:
            lam_lo = lam
            for i in range(n):
                r_hi[i] = b_hi[i]
        else:
            lam_hi = lam
            for i in range(n):
                r_lo[i] = b_lo[i]

    converged = abs(ssum - budget) < xi
    if ssum > budget:
        # trim the excess above the floors so the budget binds exactly
        scale = (budget - n * eps_a) / (ssum - n * eps_a)
        for i in range(n):
            alpha_out[i] = eps_a + scale * (alpha_out[i] - eps_a)
    return iters, converged


@njit(cache=True)
def p_star(alphas, deltas, gains, ws, pmaxs, v, omega, tau, n0, p_out):
    """Closed-form transmit power given the bandwidth split."""
    for i in range(alphas.shape[0]):
        if ws[i] <= 0.0:
            p_out[i] = pmaxs[i]
        elif gains[i] <= 0.0:
            p_out[i] = 0.0
        else:
            level = deltas[i] * tau / (LN2 * v * ws[i]) - n0 / gains[i]
            if level < 0.0:
                level = 0.0
            p = alphas[i] * omega * level
            p_out[i] = p if p < pmaxs[i] else pmaxs[i]


@njit(cache=True)
def sp2_objective(p, alphas, deltas, gains, ws, v, omega, tau, n0):
    """Drift-plus-penalty value of the transmission block (to minimize)."""
    total = 0.0
    for i in range(p.shape[0]):
        u = gains[i] * p[i] / (alphas[i] * n0 * omega)
        rate = alphas[i] * omega * tau * math.log1p(u) / LN2
        total += v * ws[i] * p[i] - deltas[i] * rate
    return total


@njit(cache=True)
def gs_solve(deltas, gains, ws, pmaxs, eps_a, budget, v, omega, tau, n0,
             tol, max_iter, xi, i_max, varsigma, p_out, alpha_out, hist_out):
    """Alternate the closed-form power step and the bandwidth bisection.

    Starts from an equal split of the budget. Stops on relative objective
    change below tol, on an objective increase (numerical floor of the
    bisection tolerance: the previous sweep is kept), or at max_iter.
    Returns (sweeps, converged, history_length, all_bw_converged).
    """
    n = deltas.shape[0]
    a_cur = np.full(n, budget / n)
    p_tmp = np.empty(n)
    a_tmp = np.empty(n)
    j_prev = np.inf
    n_hist = 0
    sweeps = 0
    converged = False
    bw_ok = True
    while sweeps < max_iter:
        sweeps += 1
        p_star(a_cur, deltas, gains, ws, pmaxs, v, omega, tau, n0, p_tmp)
        cs = gains * p_tmp / (n0 * omega)
        dcoefs = deltas * omega * tau / LN2
        _, bwc = bw_lagrangian(cs, dcoefs, eps_a, budget, xi, i_max,
                               varsigma, a_tmp)
        if not bwc:
            bw_ok = False
        j = sp2_objective(p_tmp, a_tmp, deltas, gains, ws, v, omega, tau, n0)
        if j > j_prev:
            sweeps -= 1
            converged = True
            break
        for i in range(n):
            p_out[i] = p_tmp[i]
            alpha_out[i] = a_tmp[i]
        hist_out[n_hist] = j
        n_hist += 1
        # j_prev is inf on the first sweep; the change test needs two sweeps
        if np.isfinite(j_prev) and j_prev - j <= tol * abs(j_prev):
            converged = True
            break
        j_prev = j
        for i in range(n):
            a_cur[i] = alpha_out[i]
    return sweeps, converged, n_hist, bw_ok


@njit(cache=True)
def _project_alpha(y, eps_a, budget):
    """Euclidean projection onto {a >= eps_a, sum a <= budget}, in place."""
    n = y.shape[0]
    free = budget - n * eps_a
    total = 0.0
    for i in range(n):
        w = y[i] - eps_a
        if w < 0.0:
            w = 0.0
        y[i] = w
        total += w
    if total > free:
        # shift-and-clip simplex projection on the sorted excess
        u = np.sort(y)[::-1]
        cum = 0.0
        theta = 0.0
        for j in range(n):
            cum += u[j]
            t = (cum - free) / (j + 1.0)
            if u[j] - t > 0.0:
                theta = t
        for i in range(n):
            w = y[i] - theta
            y[i] = w if w > 0.0 else 0.0
    total = 0.0
    for i in range(n):
        y[i] += eps_a
        total += y[i]
    if total > budget:
        # y - theta cancels poorly when the input is huge; trim the dust
        scale = (budget - n * eps_a) / (total - n * eps_a)
        for i in range(n):
            y[i] = eps_a + scale * (y[i] - eps_a)


@njit(cache=True)
def pg_solve(deltas, gains, ws, pmaxs, eps_a, budget, v, omega, tau, n0,
             iters, n_phases):
    """Projected gradient descent on (p, alpha) with a backtracking step.

    Powers are scaled to [0, 1] by their caps. A trial step is accepted on
    sufficient decrease against the squared projected move; accepted steps
    double the next trial, rejected ones halve it, so the step finds the
    local curvature scale on its own. iters caps the total number of
    objective evaluations across all phases. Each phase restarts from the
    best point found so far; the loop exits early once the projected step
    no longer moves the iterate.
    """
    n = deltas.shape[0]
    p_n = np.full(n, 0.5)
    alpha = np.full(n, budget / n)
    gp = np.empty(n)
    ga = np.empty(n)
    p_t = np.empty(n)
    a_t = np.empty(n)

    best_p = p_n.copy()
    best_a = alpha.copy()
    best_j = sp2_objective(p_n * pmaxs, alpha, deltas, gains, ws, v, omega, tau, n0)
    evals = 1

    for _ in range(n_phases if n_phases > 0 else 1):
        for i in range(n):
            p_n[i] = best_p[i]
            alpha[i] = best_a[i]
        j_cur = best_j
        s = 1.0
        while evals < iters:
            for i in range(n):
                u = gains[i] * p_n[i] * pmaxs[i] / (alpha[i] * n0 * omega)
                gp[i] = (v * ws[i]
                         - deltas[i] * tau * gains[i] / (n0 * LN2 * (1.0 + u))) * pmaxs[i]
                ga[i] = -_phi(alpha[i], gains[i] * p_n[i] * pmaxs[i] / (n0 * omega),
                              deltas[i] * omega * tau / LN2)
            moved = False
            while evals < iters:
                for i in range(n):
                    w = p_n[i] - s * gp[i]
                    if w < 0.0:
                        w = 0.0
                    elif w > 1.0:
                        w = 1.0
                    p_t[i] = w
                    a_t[i] = alpha[i] - s * ga[i]
                _project_alpha(a_t, eps_a, budget)
                move2 = 0.0
                for i in range(n):
                    move2 += (p_t[i] - p_n[i]) ** 2 + (a_t[i] - alpha[i]) ** 2
                if move2 < 1e-28:
                    break
                j_t = sp2_objective(p_t * pmaxs, a_t, deltas, gains, ws, v,
                                    omega, tau, n0)
                evals += 1
                if j_t <= j_cur - 0.1 * move2 / s:
                    for i in range(n):
                        p_n[i] = p_t[i]
                        alpha[i] = a_t[i]
                    j_cur = j_t
                    s *= 2.0
                    moved = True
                    break
                s *= 0.5
                if s < 1e-20:
                    break
            if not moved:
                break
        if j_cur < best_j:
            best_j = j_cur
            for i in range(n):
                best_p[i] = p_n[i]
                best_a[i] = alpha[i]
    return best_p * pmaxs, best_a, best_j
