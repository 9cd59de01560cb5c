"""Planning sweeps over station count, the tax-and-invest study, r-threshold search
and the sensitivity batch."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import BracketError, Infeasible, Unviable
from .market import GridSpec, MarketOutcome, attach_marginals, maximize_profit
from .params import PARAM_NAMES, ModelParams, PolicyConfig

SENSITIVITY_PARAMS = ("lambda0", "n0", "m0", "coordinator_cost", "t_charge", "alpha", "beta",
                      "theta", "phi", "eps1", "eps2", "eta")
SENSITIVITY_FACTORS = (0.5, 0.75, 1.25, 1.5)


@dataclass
class SweepRow:
    k: float
    p_tax: float
    outcome: Optional[MarketOutcome] = None
    viable: bool = True
    reason: str = ""

    @property
    def feasible(self):
        return self.outcome is not None


@dataclass
class SweepTable:
    variable: str            # "k" or "p_tax"
    rows: list = field(default_factory=list)

    def feasible_rows(self):
        return [r for r in self.rows if r.feasible]

    def column(self, name):
        """Values of an outcome attribute, NaN for infeasible rows."""
        return np.array([getattr(r.outcome, name) if r.feasible else math.nan for r in self.rows])

    def swept(self):
        return np.array([getattr(r, self.variable) for r in self.rows], dtype=float)


@dataclass
class PlanningSummary:
    k_star_n: float
    k_star_lambda: float
    k_star_profit: float
    k_star_welfare: float
    peak_n: float
    peak_lambda: float
    peak_profit: float
    peak_welfare: float


@dataclass
class TaxSummary:
    p_star_lambda: float
    p_star_welfare: float
    k_star_of_pt: dict
    added_chargers: float       # lambda p_t / r at p*_{t,lambda}
    demand_gain: float          # relative to p_t = 0
    lerner_at_p_star: float
    price_base: float
    price_at_p_star: float
    profit_change: float        # relative to p_t = 0


def _argmax_first(values):
    # ties go to the first (smallest swept value); NaN ignored
    v = np.where(np.isnan(values), -np.inf, values)
    return int(np.argmax(v))


# --------------------------------------------------------------------------
# infrastructure planning

def _solve_row(args):
    k, policy, params, grid = args
    pol = policy.replace(k=k)
    try:
        return SweepRow(k=k, p_tax=pol.p_tax, outcome=maximize_profit(pol, params, grid))
    except (Infeasible, Unviable) as exc:
        return SweepRow(k=k, p_tax=pol.p_tax, reason=str(exc))


def _map(fn, tasks, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def summarize_planning(table: SweepTable) -> PlanningSummary:
    ks = table.swept()
    cols = {name: table.column(name) for name in ("n", "lam", "profit", "social_welfare")}
    if all(np.isnan(c).all() for c in cols.values()):
        raise Infeasible("empty_grid", "every K in the sweep is infeasible")
    idx = {name: _argmax_first(c) for name, c in cols.items()}
    return PlanningSummary(
        k_star_n=ks[idx["n"]], k_star_lambda=ks[idx["lam"]],
        k_star_profit=ks[idx["profit"]], k_star_welfare=ks[idx["social_welfare"]],
        peak_n=cols["n"][idx["n"]], peak_lambda=cols["lam"][idx["lam"]],
        peak_profit=cols["profit"][idx["profit"]],
        peak_welfare=cols["social_welfare"][idx["social_welfare"]],
    )


def sweep_k(k_values: Sequence[int], params: ModelParams, policy: PolicyConfig = PolicyConfig(),
            grid: GridSpec = GridSpec(), workers=1):
    """Profit-maximizing outcome at each station count, plus the four argmaxes."""
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ValueError("empty K range")
    rows = _map(_solve_row, [(k, policy, params, grid) for k in k_values], workers)
    table = SweepTable("k", rows)
    return table, summarize_planning(table)


# --------------------------------------------------------------------------
# taxation

@dataclass
class _DemandAtK:
    """lambda*(K) for a fixed tax, memoized; K without a steady state gives -inf.

    The platform's problem is solved without the break-even constraint so
    that lambda*(K) stays smooth in K; viability is judged on the result.
    """
    policy: PolicyConfig
    params: ModelParams
    grid: GridSpec
    cache: dict = field(default_factory=dict)

    def outcome(self, k):
        k = float(k)
        if k not in self.cache:
            try:
                self.cache[k] = maximize_profit(self.policy.replace(k=k), self.params, self.grid,
                                                with_marginals=False, require_viable=False)
            except Infeasible:
                self.cache[k] = None
        return self.cache[k]

    def __call__(self, k):
        o = self.outcome(k)
        return -math.inf if o is None else o.lam


def _vertex(f, k):
    # peak of the parabola through (k-1, k, k+1)
    a, b, c = f(k - 1), f(k), f(k + 1)
    curv = a - 2 * b + c
    if not curv < 0:
        return b
    return b - (c - a) ** 2 / (8 * curv)


def best_k(policy: PolicyConfig, params: ModelParams, grid: GridSpec = GridSpec(),
           k_start=57, continuous=True, k_max=1000, screen_below=None):
    """K maximizing the platform's optimal demand under ``policy.p_tax``.

    An integer hill climb from ``k_start`` (lambda*(K) is unimodal) locates
    the best integer K; with ``continuous`` a bounded scalar search then
    refines K within one station either side.  If ``screen_below`` is given
    and the parabola through the three best integer points peaks below it,
    the refinement is skipped.  Returns (K, outcome), or (None, None) when
    no K admits a steady state.
    """
    f = _DemandAtK(policy, params, grid)
    k = max(2, int(round(k_start)))
    if f(k) == -math.inf:
        cands = [c for c in range(2, k_max + 1, 5) if f(c) > -math.inf]
        if not cands:
            return None, None
        k = max(cands, key=f)
    while True:
        up = f(k + 1) if k < k_max else -math.inf
        down = f(k - 1) if k > 2 else -math.inf
        if up > f(k) and up >= down:
            k += 1
        elif down > f(k):
            k -= 1
        else:
            break
    if not continuous or (screen_below is not None and _vertex(f, k) < screen_below):
        return float(k), f.outcome(k)
    res = optimize.minimize_scalar(lambda x: -f(x) if f(x) > -math.inf else 1e300,
                                   bounds=(k - 1.0, k + 1.0), method="bounded",
                                   options={"xatol": 1e-3})
    k_best = float(res.x) if f(res.x) >= f(k) else float(k)
    return k_best, f.outcome(k_best)


def _tax_row(p_t, k_start, policy, params, grid, continuous):
    pol = policy.replace(p_tax=p_t)
    k, out = best_k(pol, params, grid, k_start=k_start, continuous=continuous)
    if out is None:
        return SweepRow(k=math.nan, p_tax=p_t, reason="no steady state at any K")
    attach_marginals(out, pol.replace(k=k), params)
    viable = p_t == 0 or out.profit >= 0
    return SweepRow(k=k, p_tax=p_t, outcome=out, viable=viable,
                    reason="" if viable else "unviable: negative profit")


def stackelberg_tax(pt_values: Sequence[float], params: ModelParams,
                    policy: PolicyConfig = PolicyConfig(), grid: GridSpec = GridSpec(),
                    k_start=57, continuous=True):
    """Leader's sweep over tax rates; the follower's K*(p_t) maximizes demand.

    Rows are solved in increasing p_t, each warm-started from the previous K*.
    Rows where the platform cannot break even are kept but flagged unviable
    and excluded from the summary.
    """
    pts = sorted(float(p) for p in pt_values)
    rows = []
    k_prev = k_start
    for p_t in pts:
        row = _tax_row(p_t, k_prev, policy, params, grid, continuous)
        rows.append(row)
        if row.feasible:
            k_prev = row.k
    table = SweepTable("p_tax", rows)
    return table, summarize_tax(table, params, policy, grid, k_start, continuous)


def summarize_tax(table: SweepTable, params, policy, grid=GridSpec(), k_start=57, continuous=True):
    pts = table.swept()
    ok = np.array([r.feasible and r.viable for r in table.rows])
    lam = np.where(ok, table.column("lam"), np.nan)
    welfare = np.where(ok, table.column("social_welfare"), np.nan)
    if not ok.any():
        raise Unviable("platform unviable at every tax rate")
    i_l, i_w = _argmax_first(lam), _argmax_first(welfare)
    base = next((r for r in table.rows if r.p_tax == 0 and r.feasible), None)
    if base is None:
        base = _tax_row(0.0, k_start, policy, params, grid, continuous)
    best = table.rows[i_l].outcome
    return TaxSummary(
        p_star_lambda=pts[i_l], p_star_welfare=pts[i_w],
        k_star_of_pt={float(r.p_tax): r.k for r in table.rows},
        added_chargers=best.lam * best.p_tax / policy.charger_cost,
        demand_gain=best.lam / base.outcome.lam - 1.0,
        lerner_at_p_star=best.lerner,
        price_base=base.outcome.price, price_at_p_star=best.price,
        profit_change=best.profit / base.outcome.profit - 1.0,
    )


def tax_raises_demand(r, params: ModelParams, pt_grid: Sequence[float],
                      policy: PolicyConfig = PolicyConfig(), grid: GridSpec = GridSpec(),
                      k_start=57, base_lambda=None):
    """True if some viable positive tax in ``pt_grid`` lifts lambda* above its untaxed value."""
    pol = policy.replace(charger_cost=r)
    if base_lambda is None:
        k_start, base = best_k(pol.replace(p_tax=0.0), params, grid, k_start)
        base_lambda = base.lam
    k_prev = k_start
    for p_t in sorted(p for p in pt_grid if p > 0):
        k, out = best_k(pol.replace(p_tax=p_t), params, grid, k_prev,
                        screen_below=base_lambda - 1e-3)
        if out is None:
            continue
        if out.profit >= 0 and out.lam > base_lambda:
            return True
        k_prev = k
    return False


def find_r_threshold(params: ModelParams, pt_grid: Sequence[float], r_bracket=(12.5, 62.5),
                     tol=0.25, policy: PolicyConfig = PolicyConfig(), grid: GridSpec = GridSpec()):
    """Charger cost at which taxation stops being able to raise peak demand.

    Bisection on r over the predicate ``tax_raises_demand``; the predicate
    must hold at the low end and fail at the high end.
    """
    k0, base = best_k(policy.replace(p_tax=0.0), params, grid)
    if base is None or base.profit < 0:
        raise Unviable("the untaxed platform is not profitable")
    pred = lambda r: tax_raises_demand(r, params, pt_grid, policy, grid, k0, base.lam)
    lo, hi = r_bracket
    if not pred(lo) or pred(hi):
        raise BracketError(f"predicate does not change sign over r in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class OccupancyPoint:
    p_tax: float
    rho_c: float
    slope: float           # central difference of rho_c along the sweep
    demand_term: float     # (t_c/M) dlambda/dp_t
    supply_term: float     # -(lambda t_c/M^2) dM/dp_t

    @property
    def decomposed(self):
        return self.demand_term + self.supply_term


def occupancy_response(table: SweepTable, params: ModelParams, policy: PolicyConfig = PolicyConfig()):
    """d(rho_c)/dp_t at interior sweep points, numerically and as its two-term split."""
    rows = table.feasible_rows()
    out = []
    for a, b, c in zip(rows, rows[1:], rows[2:]):
        h = c.p_tax - a.p_tax
        o = b.outcome
        dlam = (c.outcome.lam - a.outcome.lam) / h
        m = o.chargers
        dm = (o.lam + o.p_tax * dlam) / policy.charger_cost
        out.append(OccupancyPoint(
            p_tax=b.p_tax, rho_c=o.queue.rho_c,
            slope=(c.outcome.queue.rho_c - a.outcome.queue.rho_c) / h,
            demand_term=params.t_charge / m * dlam,
            supply_term=-o.lam * params.t_charge / m ** 2 * dm,
        ))
    return out


# --------------------------------------------------------------------------
# sensitivity

@dataclass
class SensitivityCell:
    name: str
    factor: float
    value: float
    summary: Optional[PlanningSummary]
    ks: np.ndarray
    lam: np.ndarray
    n: np.ndarray
    profit: np.ndarray
    active: np.ndarray          # False where the row is infeasible or the market shuts down
    reason: str = ""


def _extend_k(table, summary, params, policy, grid, k_floor, k_ceiling):
    """Widen the K range until no argmax sits on a range end that can still move."""
    while True:
        ks = table.swept()
        lo, hi = int(ks[0]), int(ks[-1])
        stars = (summary.k_star_n, summary.k_star_lambda, summary.k_star_profit,
                 summary.k_star_welfare)
        step = max(10, (hi - lo) // 2)
        new_lo = max(k_floor, lo - step) if lo > k_floor and lo in stars else lo
        new_hi = min(k_ceiling, hi + step) if hi < k_ceiling and hi in stars else hi
        if (new_lo, new_hi) == (lo, hi):
            return table, summary
        below = sweep_k(range(new_lo, lo), params, policy, grid)[0].rows if new_lo < lo else []
        above = sweep_k(range(hi + 1, new_hi + 1), params, policy, grid)[0].rows if new_hi > hi else []
        table = SweepTable("k", below + table.rows + above)
        summary = summarize_planning(table)


def _sensitivity_cell(args):
    name, factor, params, k_values, policy, grid, k_limits = args
    value = getattr(params, name) * factor
    p = params.replace(**{name: value}) if factor != 1.0 else params
    try:
        table, summary = sweep_k(k_values, p, policy, grid)
        if k_limits is not None:
            table, summary = _extend_k(table, summary, p, policy, grid, *k_limits)
    except (Infeasible, Unviable, ValueError) as exc:
        nan = np.full(len(k_values), math.nan)
        return SensitivityCell(name, factor, value, None, np.asarray(k_values), nan, nan, nan,
                               np.zeros(len(k_values), dtype=bool), reason=str(exc))
    active = np.array([r.feasible and not r.outcome.shutdown for r in table.rows])
    return SensitivityCell(name, factor, value, summary, table.swept(), table.column("lam"),
                           table.column("n"), table.column("profit"), active)


def sensitivity_batch(params: ModelParams, names: Sequence[str] = SENSITIVITY_PARAMS,
                      factors: Sequence[float] = SENSITIVITY_FACTORS,
                      k_values: Sequence[int] = range(20, 121),
                      policy: PolicyConfig = PolicyConfig(), grid: GridSpec = GridSpec(), workers=1,
                      k_limits=(1, 400)):
    """Re-run the planning sweep with one parameter scaled at a time.

    With ``k_limits`` = (floor, ceiling) the K range of a run is widened
    whenever one of its four argmaxes lands on a range end; None keeps the
    range fixed.
    """
    unknown = [n for n in names if n not in PARAM_NAMES]
    if unknown:
        raise ValueError(f"unknown parameter(s): {', '.join(unknown)}")
    tasks = [(n, f, params, list(k_values), policy, grid, k_limits) for n in names for f in factors]
    return _map(_sensitivity_cell, tasks, workers)


def single_peaked(values):
    """True if the finite first differences change sign at most once, from + to -."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    d = np.sign(np.diff(v))
    d = d[d != 0]
    return bool(np.all(np.diff(d) <= 0))
