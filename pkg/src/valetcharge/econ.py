"""Nested-logit demand, logit courier supply and the surplus integrals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import expit

from .errors import DomainError
from .params import ModelParams
from .queueing import QueueSolution

NO_VALET = math.inf   # c_valet sentinel: valet service absent


@dataclass(frozen=True)
class ChoiceState:
    c_valet: float
    c_ev: float
    p_vc: float
    p_ev: float
    lam: float
    n_supply: Optional[float] = None
    wage: Optional[float] = None


def valet_cost(price, times: QueueSolution, params: ModelParams):
    """Generalized cost of one valet trip; charging time itself is normalized out."""
    return (price + params.alpha * (times.t_response + times.t_pickup)
            + params.beta * (2.0 * times.t_delivery + times.t_wait))


def composite_cost(c_valet, params: ModelParams):
    """Log-sum of valet and self-charging costs (numpy-friendly)."""
    e2 = params.eps2
    return -np.logaddexp(-e2 * np.asarray(c_valet, dtype=float), -e2 * params.c_self) / e2


def valet_share(c_valet, params: ModelParams):
    return expit(params.eps2 * (params.c_self - np.asarray(c_valet, dtype=float)))


def ev_share(c_ev, params: ModelParams):
    return expit(params.eps1 * (params.c_fuel - np.asarray(c_ev, dtype=float)))


def demand_rate(c_valet, params: ModelParams):
    """Valet demand lambda(c_v); accepts arrays."""
    c_ev = composite_cost(c_valet, params)
    return params.tau * params.lambda0 * ev_share(c_ev, params) * valet_share(c_valet, params)


def log_demand_rate(c_valet, params: ModelParams):
    """log lambda(c_v), accurate far into the tail."""
    c = np.asarray(c_valet, dtype=float)
    c_ev = composite_cost(c, params)
    log_vc = -np.logaddexp(0.0, params.eps2 * (c - params.c_self))
    log_ev = -np.logaddexp(0.0, params.eps1 * (c_ev - params.c_fuel))
    return math.log(params.tau * params.lambda0) + log_ev + log_vc


def demand(c_valet, params: ModelParams) -> ChoiceState:
    if c_valet == NO_VALET:
        p_ev = float(ev_share(params.c_self, params))
        return ChoiceState(c_valet=NO_VALET, c_ev=params.c_self, p_vc=0.0, p_ev=p_ev, lam=0.0)
    c_ev = float(composite_cost(c_valet, params))
    p_vc = float(valet_share(c_valet, params))
    p_ev = float(ev_share(c_ev, params))
    return ChoiceState(c_valet=float(c_valet), c_ev=c_ev, p_vc=p_vc, p_ev=p_ev,
                       lam=params.tau * params.lambda0 * p_ev * p_vc)


def baseline_penetration(params: ModelParams):
    return demand(NO_VALET, params).p_ev


def max_demand(params: ModelParams):
    """Supremum of the valet demand, approached as c_v -> -inf."""
    return params.tau * params.lambda0


def inverse_demand(lam, params: ModelParams):
    """The c_v at which demand equals ``lam``."""
    if not 0 < lam < max_demand(params):
        raise DomainError(f"lambda={lam!r} outside the achievable demand range")
    target = math.log(lam)
    f = lambda c: float(log_demand_rate(c, params)) - target
    lo, hi = params.c_self - 50.0, params.c_self + 50.0
    width = 100.0
    while f(lo) < 0:
        width *= 2
        lo -= width
    while f(hi) > 0:
        width *= 2
        hi += width
    return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)


def supply(wage, params: ModelParams):
    return params.n0 * expit(params.eta * (np.asarray(wage, dtype=float) - params.w_outside))


def inverse_supply(n, params: ModelParams):
    if not 0 < n < params.n0:
        raise DomainError(f"n={n!r} outside (0, {params.n0})")
    return params.w_outside + math.log(n / (params.n0 - n)) / params.eta


def marginal_labor_cost(n, params: ModelParams):
    """d(N w(N))/dN = w + N w'(N)."""
    return inverse_supply(n, params) + params.n0 / (params.eta * (params.n0 - n))


def customer_surplus(c_valet, params: ModelParams, rel_cut=1e-12):
    """tau lambda0 times the integral of the valet choice probability above c_v."""
    if c_valet == NO_VALET:
        return 0.0
    log_f0 = float(log_demand_rate(c_valet, params))
    g = lambda x: float(log_demand_rate(x, params)) - log_f0 - math.log(rel_cut)
    step = 10.0 / params.eps2
    hi = c_valet + step
    while g(hi) > 0:
        hi += step
    upper = optimize.brentq(g, c_valet, hi, xtol=1e-9)
    # demand_rate already carries the tau*lambda0 factor
    val, _ = integrate.quad(lambda x: float(demand_rate(x, params)), c_valet, upper,
                            epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def courier_surplus(wage, params: ModelParams):
    """N0 times the integral of the courier participation probability from 0 to w."""
    if wage < 0:
        raise DomainError("wage must be nonnegative")
    ew0 = params.eta * params.w_outside
    return params.n0 / params.eta * float(np.logaddexp(ew0, params.eta * wage) - np.logaddexp(ew0, 0.0))
