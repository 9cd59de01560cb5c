"""Steady-state queueing formulas for the courier fleet and the charging stations.

All times are in hours and all rates per hour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, Infeasible
from .params import ModelParams


@dataclass(frozen=True)
class QueueSolution:
    n_idle: float
    t_response: float
    t_pickup: float
    t_delivery: float
    t_wait: float
    rho_d: float
    rho_c: float
    servers_per_station: float
    lambda_delivery: float
    lambda_station: float

    def minutes(self) -> dict:
        return {"t_r": 60 * self.t_response, "t_p": 60 * self.t_pickup,
                "t_d": 60 * self.t_delivery, "t_w": 60 * self.t_wait}


def _power(rho, exponent):
    # rho**exponent for large exponents, clamped to zero on underflow
    if rho <= 0.0:
        return 0.0
    x = exponent * math.log(rho)
    return math.exp(x) if x > -745.0 else 0.0


def erlang_c_wait(arrival_rate, mean_service, servers):
    """Exact M/M/N mean wait in queue.

    Uses the Erlang B recurrence B_k = a B_{k-1} / (k + a B_{k-1}) and the
    identity C = N B / (N - a (1 - B)), so no factorials are formed.
    """
    n = int(servers)
    if n != servers or n < 1:
        raise DomainError("servers must be a positive integer")
    if arrival_rate < 0 or mean_service <= 0:
        raise DomainError("arrival rate must be nonnegative and service time positive")
    a = arrival_rate * mean_service
    if a >= n:
        raise DomainError(f"unstable queue: utilization {a / n:.6g} >= 1")
    if a == 0:
        return 0.0
    b = 1.0
    for k in range(1, n + 1):
        b = a * b / (k + a * b)
    p_wait = n * b / (n - a * (1.0 - b))
    return p_wait * mean_service / (n - a)


def sakasegawa_wait(arrival_rate, mean_service, servers):
    """Approximate M/M/N mean wait, (1/lambda) rho^sqrt(2N+2) / (1 - rho).

    ``servers`` may be real-valued.  Exact for a single server.
    """
    if servers <= 0:
        raise DomainError("servers must be positive")
    if arrival_rate < 0 or mean_service <= 0:
        raise DomainError("arrival rate must be nonnegative and service time positive")
    if arrival_rate == 0:
        return 0.0
    rho = arrival_rate * mean_service / servers
    if rho >= 1:
        raise DomainError(f"unstable queue: utilization {rho:.6g} >= 1")
    return _power(rho, math.sqrt(2.0 * servers + 2.0)) / (arrival_rate * (1.0 - rho))


def delivery_time(k, params: ModelParams):
    if k < 1:
        raise DomainError("k must be at least 1")
    return params.theta * math.sqrt(params.area / k)


def pickup_time(n_idle, params: ModelParams):
    return params.phi * math.sqrt(params.area / n_idle)


def _cubic_real_roots(p, q):
    """Real roots of u^3 + p u + q = 0, descending."""
    disc = -(4.0 * p ** 3 + 27.0 * q ** 2)
    if disc >= 0 and p < 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = min(1.0, max(-1.0, 3.0 * q / (p * m)))
        phi = math.acos(arg) / 3.0
        roots = [m * math.cos(phi - 2.0 * math.pi * j / 3.0) for j in range(3)]
        return sorted(roots, reverse=True)
    if p == 0 and q == 0:
        return [0.0]
    # one real root (Cardano)
    s = math.sqrt(max(q * q / 4.0 + p ** 3 / 27.0, 0.0))
    return [math.copysign(abs(-q / 2 + s) ** (1 / 3), -q / 2 + s)
            + math.copysign(abs(-q / 2 - s) ** (1 / 3), -q / 2 - s)]


def solve_idle_couriers(lam, n, t_delivery, params: ModelParams):
    """Positive solutions N_i of the idle-courier fixed point, largest first.

    With u = sqrt(N_i) the fixed point is u^3 - (N - 2 lam t_d) u + 2 lam phi sqrt(A) = 0.
    The first entry is the normal-regime root, the second (if any) the
    wild-goose-chase root.  A double root is returned once.
    """
    if n <= 0 or lam < 0:
        raise DomainError("need n > 0 and lambda >= 0")
    if lam == 0:
        return (float(n),)
    p = -(n - 2.0 * lam * t_delivery)
    q = 2.0 * lam * params.phi * math.sqrt(params.area)
    if p >= 0 or -(4.0 * p ** 3 + 27.0 * q ** 2) < 0:
        raise Infeasible("no_idle_root",
                         f"lambda={lam:.6g}, n={n:.6g}: idle-courier cubic has no positive root")
    out = []
    for u in _cubic_real_roots(p, q):
        if u <= 0:
            continue
        fp = 3.0 * u * u + p
        if abs(fp) > 1e-12 * max(1.0, abs(p)):
            u -= (u ** 3 + p * u + q) / fp
        out.append(u * u)
    if len(out) == 2 and out[0] == out[1]:
        out = out[:1]
    return tuple(out)


def response_time(lam, n, t_pickup, t_delivery):
    """Mean wait for a courier to be assigned (delivery-queue wait)."""
    if lam == 0:
        return 0.0
    rho = 2.0 * lam * (t_pickup + t_delivery) / n
    if rho >= 1:
        raise DomainError(f"fleet utilization {rho:.6g} >= 1")
    return _power(rho, math.sqrt(2.0 * n + 2.0)) / (2.0 * lam * (1.0 - rho))


def charging_wait(lam, k, m, t_charge):
    """Mean queueing delay at a station with real-valued S = M/K chargers."""
    if lam == 0:
        return 0.0
    if lam * t_charge >= m:
        raise DomainError(f"charger capacity exceeded: lambda*t_c={lam * t_charge:.6g} >= M={m:.6g}")
    return sakasegawa_wait(lam / k, t_charge, m / k)


def queue_state(lam, n, k, m, params: ModelParams, root="larger"):
    """All steady-state times at (lambda, N) with K stations and M chargers.

    Raises Infeasible when the point has no steady state.
    """
    t_d = delivery_time(k, params)
    roots = solve_idle_couriers(lam, n, t_d, params)
    n_idle = roots[0] if root == "larger" else roots[-1]
    t_p = pickup_time(n_idle, params)
    rho_d = 2.0 * lam * (t_p + t_d) / n
    if rho_d >= 1:
        raise Infeasible("fleet_utilization", f"rho_d={rho_d:.6g}")
    rho_c = lam * params.t_charge / m
    if rho_c >= 1:
        raise Infeasible("charger_occupancy", f"rho_c={rho_c:.6g}")
    return QueueSolution(
        n_idle=n_idle,
        t_response=response_time(lam, n, t_p, t_d),
        t_pickup=t_p,
        t_delivery=t_d,
        t_wait=charging_wait(lam, k, m, params.t_charge),
        rho_d=rho_d,
        rho_c=rho_c,
        servers_per_station=m / k,
        lambda_delivery=2.0 * lam,
        lambda_station=lam / k,
    )


def pickup_partials(lam, q: QueueSolution):
    """(dt_p/dN, dt_p/dlambda) at fixed K along the normal-regime root."""
    denom = q.n_idle - lam * q.t_pickup
    t_p = q.t_pickup
    return -0.5 * t_p / denom, (t_p + q.t_delivery) * t_p / denom


def response_partials(lam, n, q: QueueSolution):
    """(dt_r/dN, dt_r/dlambda) at fixed K, including the dependence through t_p."""
    if lam == 0 or q.t_response == 0:
        return 0.0, 0.0
    tp_n, tp_l = pickup_partials(lam, q)
    rho = q.rho_d
    s = math.sqrt(2.0 * n + 2.0)
    rho_n = 2.0 * lam * tp_n / n - rho / n
    rho_l = 2.0 * (q.t_pickup + q.t_delivery) / n + 2.0 * lam * tp_l / n
    g = s / rho + 1.0 / (1.0 - rho)
    dln_n = math.log(rho) / s + g * rho_n
    dln_l = g * rho_l - 1.0 / lam
    return q.t_response * dln_n, q.t_response * dln_l
