"""Discrete-event simulation of the M/M/N queue and of the delivery-charging network."""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import kernels
from .errors import DomainError, Unstable
from .params import ModelParams
from .queueing import delivery_time, pickup_time, solve_idle_couriers


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    ``horizon`` and ``warmup`` count customers (arrivals); the first
    ``warmup`` are discarded, by default 20% of the horizon.  The queue
    fields are only needed by ``simulate_mmn``.
    """

    arrival_rate: Optional[float] = None
    servers: Optional[int] = None
    mean_service: Optional[float] = None
    horizon: int = 200_000
    warmup: Optional[int] = None
    replications: int = 30
    seed: int = 0

    @property
    def discard(self):
        return int(0.2 * self.horizon) if self.warmup is None else self.warmup

    def check(self):
        if self.horizon <= self.discard:
            raise DomainError("horizon must exceed warmup")
        if self.replications < 1:
            raise DomainError("need at least one replication")
        return self


@dataclass
class SimResult:
    mean: float
    ci_halfwidth: float
    replications: np.ndarray = field(repr=False)

    def covers(self, value):
        return abs(value - self.mean) <= self.ci_halfwidth

    @classmethod
    def from_samples(cls, xs, level=0.95):
        xs = np.asarray(xs, dtype=float)
        if len(xs) < 2:
            return cls(float(xs.mean()), math.nan, xs)
        half = stats.t.ppf(0.5 + level / 2, len(xs) - 1) * xs.std(ddof=1) / math.sqrt(len(xs))
        return cls(float(xs.mean()), float(half), xs)


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def simulate_mmn(config: SimConfig) -> SimResult:
    """Mean queueing delay of an FCFS M/M/N queue, with a 95% CI across replications."""
    config.check()
    if config.servers is None or config.servers < 1:
        raise DomainError("servers must be a positive integer")
    if config.arrival_rate * config.mean_service >= config.servers:
        raise DomainError("unstable queue: utilization >= 1")
    means = []
    for rng in _streams(config.seed, config.replications):
        ia = rng.exponential(1.0 / config.arrival_rate, config.horizon)
        sv = rng.exponential(config.mean_service, config.horizon)
        waits = kernels.mmn_waits(ia, sv, config.servers)
        means.append(waits[config.discard:].mean())
    return SimResult.from_samples(means)


# --------------------------------------------------------------------------
# coupled network

@dataclass
class NetworkResult:
    t_response: SimResult
    t_pickup: SimResult
    t_wait: SimResult
    rho_d: SimResult
    rho_c: SimResult
    busy_couriers: SimResult       # time-average couriers on a job
    little_rhs: SimResult          # delivery rate times mean job duration
    servers: list


def station_servers(m, k):
    """Integer chargers per station: round(m) split evenly, the remainder to the first stations."""
    total, k = int(round(m)), int(k)
    q, rem = divmod(total, k)
    return [q + 1 if i < rem else q for i in range(k)]


_ARRIVE, _JOB_DONE, _CHARGE_DONE = 0, 1, 2


def _network_replication(lam, n, k, servers, params, horizon, discard, rng, max_queue, fixed_tp):
    t_d = delivery_time(k, params)
    phi_sqrt_a = params.phi * math.sqrt(params.area)
    n = int(round(n))
    idle = n
    queue = deque()                        # waiting delivery jobs: (request time, ev, leg)
    st_busy = [0] * k
    st_queue = [deque() for _ in range(k)]
    events = []
    seq = 0

    stats_on = False
    t_on = 0.0
    last_t = 0.0
    busy_area = 0.0
    charge_area = 0.0
    n_charging = 0
    tr_sum = tp_sum = dur_sum = tw_sum = 0.0
    tr_n = tw_n = jobs_done = 0
    arrivals = 0

    def start_job(now, req_t, ev, leg):
        nonlocal idle, seq, tr_sum, tr_n, tp_sum
        # pickup time from the idle couriers available at dispatch
        t_p = phi_sqrt_a / math.sqrt(idle) if fixed_tp is None else fixed_tp
        idle -= 1
        dur = rng.exponential(t_p + t_d)
        if ev >= discard:
            tr_sum += now - req_t
            tp_sum += t_p
            tr_n += 1
        seq += 1
        heapq.heappush(events, (now + dur, seq, _JOB_DONE, ev, leg, dur))

    def start_charge(now, arr_t, ev, s):
        nonlocal seq, tw_sum, tw_n, n_charging
        st_busy[s] += 1
        n_charging += 1
        if ev >= discard:
            tw_sum += now - arr_t
            tw_n += 1
        seq += 1
        heapq.heappush(events, (now + rng.exponential(params.t_charge), seq, _CHARGE_DONE, ev, s, 0.0))

    heapq.heappush(events, (rng.exponential(1.0 / lam), 0, _ARRIVE, 0, 0, 0.0))
    while events:
        now, _, kind, ev, arg, dur = heapq.heappop(events)
        if stats_on:
            busy_area += (n - idle) * (now - last_t)
            charge_area += n_charging * (now - last_t)
        last_t = now
        if kind == _ARRIVE:
            if ev == discard:
                stats_on, t_on = True, now
            if ev >= horizon:
                break
            arrivals += 1
            if idle > 0:
                start_job(now, now, ev, 0)
            else:
                queue.append((now, ev, 0))
                if len(queue) > max_queue:
                    raise Unstable(f"delivery queue exceeded {max_queue} jobs at t={now:.1f} hr")
            seq += 1
            heapq.heappush(events, (now + rng.exponential(1.0 / lam), seq, _ARRIVE, ev + 1, 0, 0.0))
        elif kind == _JOB_DONE:
            idle += 1
            if ev >= discard and stats_on:
                dur_sum += dur
                jobs_done += 1
            if queue:
                req_t, ev2, leg2 = queue.popleft()
                start_job(now, req_t, ev2, leg2)
            if arg == 0:
                s = int(rng.integers(k))
                if st_busy[s] < servers[s]:
                    start_charge(now, now, ev, s)
                else:
                    st_queue[s].append((now, ev))
        else:
            s = arg
            st_busy[s] -= 1
            n_charging -= 1
            if st_queue[s]:
                arr_t, ev2 = st_queue[s].popleft()
                start_charge(now, arr_t, ev2, s)
            # return trip
            if idle > 0:
                start_job(now, now, ev, 1)
            else:
                queue.append((now, ev, 1))
    span = last_t - t_on
    busy = busy_area / span
    return dict(t_response=tr_sum / tr_n, t_pickup=tp_sum / tr_n, t_wait=tw_sum / tw_n,
                rho_d=busy / n, rho_c=charge_area / span / sum(servers),
                busy_couriers=busy, little_rhs=2.0 * lam * dur_sum / jobs_done)


def simulate_network(lam, n, k, m, params: ModelParams, sim: SimConfig = SimConfig(),
                     pickup="state") -> NetworkResult:
    """Simulate EVs through pickup, charging at a uniformly chosen station, and return.

    Delivery jobs share one FCFS pool of ``n`` couriers; each job's duration
    is exponential with mean t_p + t_d.  With ``pickup="state"`` t_p comes
    from the idle couriers at dispatch; with ``pickup="mean"`` it is held at
    the normal-regime fixed point.  Stations get integer charger counts from
    ``station_servers``.

    The state-dependent fleet can fall into the low-idle regime, where every
    dispatch travels far and the queue never clears; that raises Unstable.
    """
    sim.check()
    if pickup not in ("state", "mean"):
        raise ValueError("pickup must be 'state' or 'mean'")
    fixed_tp = None
    if pickup == "mean":
        n_idle = solve_idle_couriers(lam, n, delivery_time(k, params), params)[0]
        fixed_tp = pickup_time(n_idle, params)
    k = int(k)
    servers = station_servers(m, k)
    if lam * params.t_charge >= sum(servers):
        raise DomainError("charger capacity exceeded")
    max_queue = 50 * int(round(n)) + 10_000
    reps = [_network_replication(lam, n, k, servers, params, sim.horizon, sim.discard, rng,
                                 max_queue, fixed_tp)
            for rng in _streams(sim.seed, sim.replications)]
    pick = lambda key: SimResult.from_samples([r[key] for r in reps])
    return NetworkResult(t_response=pick("t_response"), t_pickup=pick("t_pickup"),
                         t_wait=pick("t_wait"), rho_d=pick("rho_d"), rho_c=pick("rho_c"),
                         busy_couriers=pick("busy_couriers"), little_rhs=pick("little_rhs"),
                         servers=servers)
