# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _fallback.py for the reference implementations."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, exp, cos, acos, INFINITY, isfinite

cnp.import_array()

cdef enum:
    AREA = 0
    THETA = 1
    PHI = 2
    ALPHA = 3
    BETA = 4
    T_CHARGE = 5
    M0 = 6
    COORD = 7
    N0 = 8
    ETA = 9
    W0 = 10
    TAU_L0 = 11
    EPS1 = 12
    EPS2 = 13
    C_SELF = 14
    C_FUEL = 15


cdef inline double _logaddexp(double a, double b) nogil:
    if a > b:
        return a + log(1.0 + exp(b - a))
    return b + log(1.0 + exp(a - b))


cdef inline double _log_demand(double c, const double[::1] k) nogil:
    cdef double e1 = k[EPS1], e2 = k[EPS2]
    cdef double c_ev = -_logaddexp(-e2 * c, -e2 * k[C_SELF]) / e2
    return (log(k[TAU_L0]) - _logaddexp(0.0, e1 * (c_ev - k[C_FUEL]))
            - _logaddexp(0.0, e2 * (c - k[C_SELF])))


def inverse_demand_array(lams, double lo, double hi, consts):
    cdef const double[::1] lv = np.ascontiguousarray(lams, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(consts, dtype=np.float64)
    cdef Py_ssize_t i, it, n = lv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double a, b, mid, target
    with nogil:
        for i in range(n):
            target = log(lv[i])
            a = lo
            b = hi
            for it in range(80):
                mid = 0.5 * (a + b)
                if _log_demand(mid, kv) > target:
                    a = mid
                else:
                    b = mid
            ov[i] = 0.5 * (a + b)
    return out


def profit_grid(lams, cvs, ns, double k, double p_tax, double r, consts):
    cdef const double[::1] lv = np.ascontiguousarray(lams, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(cvs, dtype=np.float64)
    cdef const double[::1] nv = np.ascontiguousarray(ns, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(consts, dtype=np.float64)
    cdef Py_ssize_t i, j, nl = lv.shape[0], nn = nv.shape[0]
    out = np.empty((nl, nn))
    cdef double[:, ::1] ov = out
    cdef double t_d = kv[THETA] * sqrt(kv[AREA] / k)
    cdef double sqa = sqrt(kv[AREA])
    cdef double lam, n, p, q, m, arg, u, t_p, rho, t_r, chargers, rho_c, s, t_w, price, wage
    with nogil:
        for i in range(nl):
            lam = lv[i]
            q = 2.0 * lam * kv[PHI] * sqa
            chargers = kv[M0] + lam * p_tax / r
            rho_c = lam * kv[T_CHARGE] / chargers
            if rho_c < 1.0 and isfinite(cv[i]):
                s = chargers / k
                t_w = k / lam * exp(sqrt(2.0 * s + 2.0) * log(rho_c)) / (1.0 - rho_c)
            for j in range(nn):
                ov[i, j] = -INFINITY
                if not (rho_c < 1.0 and isfinite(cv[i])):
                    continue
                n = nv[j]
                p = 2.0 * lam * t_d - n
                if p >= 0.0 or -(4.0 * p * p * p + 27.0 * q * q) < 0.0:
                    continue
                m = 2.0 * sqrt(-p / 3.0)
                arg = 3.0 * q / (p * m)
                if arg < -1.0:
                    arg = -1.0
                elif arg > 1.0:
                    arg = 1.0
                u = m * cos(acos(arg) / 3.0)
                t_p = kv[PHI] * sqa / u
                rho = 2.0 * lam * (t_p + t_d) / n
                if rho >= 1.0:
                    continue
                t_r = exp(sqrt(2.0 * n + 2.0) * log(rho)) / (2.0 * lam * (1.0 - rho))
                price = cv[i] - kv[ALPHA] * (t_r + t_p) - kv[BETA] * (2.0 * t_d + t_w)
                if price <= 0.0:
                    continue
                wage = kv[W0] + log(n / (kv[N0] - n)) / kv[ETA]
                ov[i, j] = lam * (price - p_tax) - n * wage - k * kv[COORD]
    return out


def mmn_waits(interarrivals, services, long servers):
    cdef const double[::1] ia = np.ascontiguousarray(interarrivals, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(services, dtype=np.float64)
    cdef Py_ssize_t i, pos, child, n = ia.shape[0]
    cdef Py_ssize_t size = servers
    heap_arr = np.zeros(size)
    out = np.empty(n)
    cdef double[::1] h = heap_arr
    cdef double[::1] ov = out
    cdef double t = 0.0, start, val
    with nogil:
        for i in range(n):
            t += ia[i]
            start = h[0] if h[0] > t else t
            ov[i] = start - t
            # replace the root with the new finishing time and sift down
            val = start + sv[i]
            pos = 0
            while True:
                child = 2 * pos + 1
                if child >= size:
                    break
                if child + 1 < size and h[child + 1] < h[child]:
                    child += 1
                if h[child] >= val:
                    break
                h[pos] = h[child]
                pos = child
            h[pos] = val
    return out
