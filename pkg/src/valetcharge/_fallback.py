"""Pure numpy / Python versions of the hot kernels.

Signatures mirror the compiled module ``_kernels`` exactly.  ``consts`` is
the packed float64 vector built by ``kernels.pack``.
"""
import heapq
import math

import numpy as np

# positions inside the packed constants vector
AREA, THETA, PHI, ALPHA, BETA, T_CHARGE, M0, COORD, N0, ETA, W0, \
    TAU_L0, EPS1, EPS2, C_SELF, C_FUEL = range(16)


def _log_demand(c, consts):
    e1, e2 = consts[EPS1], consts[EPS2]
    c_ev = -np.logaddexp(-e2 * c, -e2 * consts[C_SELF]) / e2
    return (math.log(consts[TAU_L0]) - np.logaddexp(0.0, e1 * (c_ev - consts[C_FUEL]))
            - np.logaddexp(0.0, e2 * (c - consts[C_SELF])))


def inverse_demand_array(lams, lo, hi, consts):
    """Vectorized bisection for c_v(lambda) on a common bracket [lo, hi]."""
    lams = np.asarray(lams, dtype=float)
    target = np.log(lams)
    a = np.full(lams.shape, lo)
    b = np.full(lams.shape, hi)
    for _ in range(80):
        mid = 0.5 * (a + b)
        above = _log_demand(mid, consts) > target
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
    return 0.5 * (a + b)


def profit_grid(lams, cvs, ns, k, p_tax, r, consts):
    """Platform profit on the (lambda, N) grid; -inf marks infeasible points.

    ``cvs[i]`` is the inverse demand at ``lams[i]``.  Rows index lambda.
    """
    lam = np.asarray(lams, dtype=float)[:, None]
    cv = np.asarray(cvs, dtype=float)[:, None]
    n = np.asarray(ns, dtype=float)[None, :]
    t_d = consts[THETA] * math.sqrt(consts[AREA] / k)
    with np.errstate(all="ignore"):
        p = 2.0 * lam * t_d - n
        q = 2.0 * lam * consts[PHI] * math.sqrt(consts[AREA])
        ok = (p < 0) & (-(4.0 * p ** 3 + 27.0 * q ** 2) >= 0)
        m = 2.0 * np.sqrt(-p / 3.0)
        u = m * np.cos(np.arccos(np.clip(3.0 * q / (p * m), -1.0, 1.0)) / 3.0)
        t_p = consts[PHI] * np.sqrt(consts[AREA]) / u
        rho = 2.0 * lam * (t_p + t_d) / n
        ok &= rho < 1
        t_r = np.exp(np.sqrt(2.0 * n + 2.0) * np.log(rho)) / (2.0 * lam * (1.0 - rho))
        chargers = consts[M0] + lam * p_tax / r
        rho_c = lam * consts[T_CHARGE] / chargers
        ok = ok & (rho_c < 1)
        s = chargers / k
        t_w = k / lam * np.exp(np.sqrt(2.0 * s + 2.0) * np.log(rho_c)) / (1.0 - rho_c)
        price = cv - consts[ALPHA] * (t_r + t_p) - consts[BETA] * (2.0 * t_d + t_w)
        ok = ok & (price > 0) & np.isfinite(cv)
        wage = consts[W0] + np.log(n / (consts[N0] - n)) / consts[ETA]
        profit = lam * (price - p_tax) - n * wage - k * consts[COORD]
    return np.where(ok, profit, -np.inf)


def mmn_waits(interarrivals, services, servers):
    """FCFS queueing delays of successive customers in an N-server queue."""
    free = [0.0] * int(servers)
    out = np.empty(len(interarrivals))
    t = 0.0
    for i in range(len(interarrivals)):
        t += interarrivals[i]
        earliest = free[0]
        start = earliest if earliest > t else t
        out[i] = start - t
        heapq.heapreplace(free, start + services[i])
    return out
