"""Market outcomes at a decision pair (lambda, N) and the platform's profit maximization."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import econ, kernels
from .errors import DomainError, Infeasible, Unviable
from .params import ModelParams, PolicyConfig
from .queueing import QueueSolution, queue_state, pickup_partials, response_partials


@dataclass
class MarketOutcome:
    lam: float
    n: float
    k: float
    p_tax: float
    queue: QueueSolution
    c_valet: float
    price: float
    wage: float
    per_time_pay: float
    per_delivery_pay: float
    profit: float
    customer_surplus: float
    courier_surplus: float
    social_welfare: float
    ev_penetration: float
    tax_paid: float
    chargers: float
    marginal_cost: float = math.nan
    marginal_revenue: float = math.nan
    lerner: float = math.nan
    marginals_reliable: bool = False
    shutdown: bool = False          # best point is the no-service corner of the search box

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["queue"] = dataclasses.asdict(self.queue)
        return d


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the profit search.

    A ``coarse`` x ``coarse`` grid over the feasible box is followed by
    ``stages`` refinements.  Each refinement lays ``2*half*zoom+1`` points per
    axis over +-``half`` incumbent cells, so the cell shrinks by ``zoom``; the
    window re-centres until the best point is interior.
    """

    coarse: int = 200
    stages: int = 6
    zoom: int = 10
    half: int = 2
    max_recentre: int = 50


def effective_chargers(lam, policy: PolicyConfig, params: ModelParams):
    """Nominal charger stock plus the chargers bought with tax revenue."""
    return policy.nominal_chargers(params) + lam * policy.p_tax / policy.charger_cost


def evaluate(lam, n, policy: PolicyConfig, params: ModelParams, chargers=None) -> MarketOutcome:
    """Full market outcome at (lam, n); raises Infeasible if there is no steady state.

    ``chargers`` overrides the effective charger stock when given.
    """
    if lam < 0 or not 0 < n < params.n0:
        raise DomainError("need lambda >= 0 and 0 < n < N0")
    k, p_t = policy.k, policy.p_tax
    m = effective_chargers(lam, policy, params) if chargers is None else chargers
    if lam >= econ.max_demand(params):
        raise Infeasible("demand_range", f"lambda={lam:.6g}")
    q = queue_state(lam, n, k, m, params)
    wage = econ.inverse_supply(n, params)
    if lam == 0:
        c_v, price = econ.NO_VALET, math.nan
        revenue = 0.0
    else:
        c_v = econ.inverse_demand(lam, params)
        price = c_v - params.alpha * (q.t_response + q.t_pickup) \
            - params.beta * (2.0 * q.t_delivery + q.t_wait)
        if price <= 0:
            raise Infeasible("nonpositive_price", f"price={price:.6g}")
        revenue = lam * (price - p_t)
    profit = revenue - n * wage - k * params.coordinator_cost
    cs = econ.customer_surplus(c_v, params)
    cour = econ.courier_surplus(max(wage, 0.0), params)
    per_delivery = wage * n / (2.0 * lam) if lam > 0 else math.nan
    per_time = per_delivery / (q.t_pickup + q.t_delivery) if lam > 0 else math.nan
    return MarketOutcome(
        lam=lam, n=n, k=k, p_tax=p_t, queue=q, c_valet=c_v, price=price, wage=wage,
        per_time_pay=per_time, per_delivery_pay=per_delivery, profit=profit,
        customer_surplus=cs, courier_surplus=cour,
        social_welfare=profit + lam * p_t + cs + cour,
        ev_penetration=econ.demand(c_v, params).p_ev,
        tax_paid=lam * p_t, chargers=m,
    )


# --------------------------------------------------------------------------
# search box

def demand_cap(policy: PolicyConfig, params: ModelParams):
    """Largest lambda worth searching: demand at zero cost, and charger capacity."""
    cap = float(econ.demand_rate(0.0, params))
    m0 = policy.nominal_chargers(params)
    slack = params.t_charge - policy.p_tax / policy.charger_cost
    if slack > 0:
        cap = min(cap, 0.999 * m0 / slack)
    return cap


def fleet_cap(lam_hi, params: ModelParams):
    """N beyond which labour cost alone exceeds any attainable revenue.

    Revenue is at most max lambda*c_v(lambda) over (0, lam_hi]; at N above the
    returned bound N*w(N) exceeds it, so profit is below -K*C, the value
    approached with no service and no couriers.
    """
    def neg_rev(lam):
        return -lam * econ.inverse_demand(lam, params)
    res = optimize.minimize_scalar(neg_rev, bounds=(1e-9 * lam_hi, lam_hi), method="bounded",
                                   options={"xatol": 1e-6 * lam_hi})
    r_max = max(-res.fun, -neg_rev(lam_hi)) * 1.001 + 10.0
    f = lambda n: n * econ.inverse_supply(n, params) - r_max
    lo = params.n0 * 0.5
    if f(lo) < 0:
        return params.n0 * (1 - 1e-9)
    # N*w(N) is increasing wherever w > 0
    n_pos = params.n0 / (1.0 + math.exp(params.eta * params.w_outside))
    return optimize.brentq(f, max(n_pos, 1e-9), lo)


def _window(center, half_width, lo, hi, m):
    a, b = max(lo, center - half_width), min(hi, center + half_width)
    return np.linspace(a, b, m), a > lo + 1e-15 * abs(lo), b < hi - 1e-15 * abs(hi)


class _Search:
    def __init__(self, policy, params, grid):
        self.policy, self.params, self.grid = policy, params, grid
        self.consts = kernels.pack(params.replace(m0=policy.nominal_chargers(params)))
        self.lam_hi = demand_cap(policy, params)
        self.n_hi = fleet_cap(self.lam_hi, params)
        self.c_lo = -1.0
        self.c_hi = econ.inverse_demand(self.lam_hi * 1e-6, params) + 1.0
        self.evaluations = 0
        self.lam_lo = self.lam_hi / (grid.coarse * 1e4)
        self.n_lo = self.n_hi / (grid.coarse * 1e4)

    def profits(self, lams, ns):
        cvs = kernels.inverse_demand_array(lams, self.c_lo, self.c_hi, self.consts)
        self.evaluations += len(lams) * len(ns)
        return kernels.profit_grid(lams, cvs, ns, self.policy.k, self.policy.p_tax,
                                   self.policy.charger_cost, self.consts)

    def run(self):
        g = self.grid
        lam_lo, n_lo = self.lam_lo, self.n_lo
        lams = np.linspace(self.lam_hi / g.coarse, self.lam_hi, g.coarse)
        ns = np.linspace(self.n_hi / g.coarse, self.n_hi, g.coarse)
        dl, dn = lams[1] - lams[0], ns[1] - ns[0]
        pr = self.profits(lams, ns)
        i, j = np.unravel_index(np.argmax(pr), pr.shape)
        if not np.isfinite(pr[i, j]):
            raise Infeasible("empty_grid", f"no feasible (lambda, N) at K={self.policy.k}")
        best = (lams[i], ns[j], pr[i, j])
        m = 2 * g.half * g.zoom + 1
        for _ in range(g.stages):
            for _ in range(g.max_recentre):
                lams, l_open_lo, l_open_hi = _window(best[0], g.half * dl, lam_lo, self.lam_hi, m)
                ns, n_open_lo, n_open_hi = _window(best[1], g.half * dn, n_lo, self.n_hi, m)
                pr = self.profits(lams, ns)
                i, j = np.unravel_index(np.argmax(pr), pr.shape)
                best = (lams[i], ns[j], pr[i, j])
                at_edge = (i == 0 and l_open_lo) or (i == m - 1 and l_open_hi) \
                    or (j == 0 and n_open_lo) or (j == m - 1 and n_open_hi)
                if not at_edge:
                    break
            dl /= g.zoom
            dn /= g.zoom
        # a stationary point only if the final window did not clip against the box
        interior = 0 < i < m - 1 and 0 < j < m - 1
        return best, bool(interior)


def maximize_profit(policy: PolicyConfig, params: ModelParams, grid: GridSpec = GridSpec(),
                    with_marginals=True, require_viable=True) -> MarketOutcome:
    """Profit-maximizing outcome by certified grid search with local refinement.

    Ties resolve to the lowest lambda, then the lowest N.  When no point beats
    closing down, the search ends at the smallest lambda in the box and the
    outcome is marked ``shutdown``.  Under a positive tax
    the platform must break even; otherwise Unviable is raised (unless
    ``require_viable`` is False, in which case the loss-making optimum is returned).
    """
    search = _Search(policy, params, grid)
    (lam, n, _), interior = search.run()
    out = evaluate(float(lam), float(n), policy, params)
    out.shutdown = bool(lam <= search.lam_lo * (1 + 1e-9))
    if require_viable and policy.p_tax > 0 and out.profit < 0:
        raise Unviable(f"best profit {out.profit:.4g} < 0 at p_tax={policy.p_tax}", out)
    if with_marginals:
        attach_marginals(out, policy, params, reliable=interior)
    return out


# --------------------------------------------------------------------------
# marginal cost and revenue along the optimality locus

def _foc_n(lam, n, policy, params, chargers):
    """d(profit)/dN at fixed lambda: -alpha*lam*(dt_r/dN + dt_p/dN) - d(N w)/dN."""
    q = queue_state(lam, n, policy.k, chargers, params)
    tp_n, _ = pickup_partials(lam, q)
    tr_n, _ = response_partials(lam, n, q)
    return -params.alpha * lam * (tr_n + tp_n) - econ.marginal_labor_cost(n, params)


def marginals(outcome: MarketOutcome, policy: PolicyConfig, params: ModelParams, h=1e-3):
    """(marginal_cost, marginal_revenue, lerner) at an optimum.

    dN/dlambda follows from implicit differentiation of the N first-order
    condition, with its partials taken by central differences.  Charger stock
    is held at the outcome's value.
    """
    lam, n, m = outcome.lam, outcome.n, outcome.chargers
    g = lambda a, b: _foc_n(a, b, policy, params, m)
    g_l = (g(lam + h, n) - g(lam - h, n)) / (2 * h)
    g_n = (g(lam, n + h) - g(lam, n - h)) / (2 * h)
    dn_dl = -g_l / g_n
    mc = policy.p_tax + econ.marginal_labor_cost(n, params) * dn_dl

    def revenue(a):
        o = evaluate(a, n + dn_dl * (a - lam), policy, params)
        return a * o.price
    mr = (revenue(lam + h) - revenue(lam - h)) / (2 * h)
    return mc, mr, (outcome.price - mc) / outcome.price


def attach_marginals(outcome, policy, params, reliable=True):
    try:
        mc, mr, lerner = marginals(outcome, policy, params)
    except (Infeasible, DomainError):
        outcome.marginals_reliable = False
        return outcome
    outcome.marginal_cost, outcome.marginal_revenue, outcome.lerner = mc, mr, lerner
    outcome.marginals_reliable = reliable
    return outcome
