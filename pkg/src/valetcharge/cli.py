"""Command-line front end.

Exit status: 0 on success, 2 when the model has no admissible outcome
(infeasible, unviable or unstable), 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import desim, kernels, market, policy, queueing
from .errors import BracketError, DomainError, Infeasible, ParameterError, Unstable, Unviable
from .params import (PAPER_PARAMS, PARAM_NAMES, POLICY_NAMES, PolicyConfig, calibrate_theta,
                     read_config, split_config)

SWEEP_COLUMNS = ("lambda", "N", "price", "wage", "profit", "customer_surplus", "courier_surplus",
                 "social_welfare", "ev_penetration", "lerner", "marginal_cost",
                 "t_r_min", "t_p_min", "t_d_min", "t_w_min", "rho_d", "rho_c", "feasible")

EPILOG = ("Sweep CSV columns, in order: <swept variable> (k or p_tax), "
          + ", ".join(SWEEP_COLUMNS) + ".  Times are in minutes; money in HK$, rates per hour.")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_range(text, integer=False):
    """'a:b' or 'a:b:step', both ends inclusive; step defaults to 1."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise UsageError(f"bad range {text!r}; expected start:stop[:step]")
    try:
        a, b = float(parts[0]), float(parts[1])
        step = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError:
        raise UsageError(f"bad range {text!r}") from None
    if step <= 0 or b < a:
        raise UsageError(f"bad range {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    values = np.round(a + step * np.arange(count), 10)
    return [int(v) for v in values] if integer else [float(v) for v in values]


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _clean(obj):
    # JSON-safe: NaN/inf become null, numpy scalars become Python numbers
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump(obj):
    return json.dumps(_clean(obj), indent=2) + "\n"


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# --------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="valetcharge", description="Valet-charging market equilibrium solver.",
                epilog=EPILOG)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, grid=True):
        sp.add_argument("--config", help="key = value parameter file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter or policy field (repeatable)")
        sp.add_argument("--out", help="directory for CSV/JSON outputs and the run manifest")
        if grid:
            sp.add_argument("--grid", default="200,6",
                            help="coarse points per axis and refinement stages (default 200,6)")
        return sp

    sp = common(sub.add_parser("solve", help="profit-maximizing outcome at one K"))
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--tax", type=float, default=None)
    sp.add_argument("--r", type=float, default=None, help="per-charger cost")

    sp = common(sub.add_parser("queue-eval", help="queueing times at a given (lambda, N, K, M)"), grid=False)
    sp.add_argument("--lam", type=float, required=True)
    sp.add_argument("--n", type=float, required=True)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--m", type=float, default=None)

    sp = common(sub.add_parser("sweep-k", help="planning sweep over station count", epilog=EPILOG))
    sp.add_argument("--k", default="20:120", help="K range, e.g. 20:120")
    sp.add_argument("--tax", type=float, default=None)
    sp.add_argument("--workers", type=int, default=1)

    sp = common(sub.add_parser("sweep-tax", help="Stackelberg tax sweep", epilog=EPILOG))
    sp.add_argument("--pt", default="0:25:0.2", help="tax grid start:stop:step")
    sp.add_argument("--r", type=float, default=None)
    sp.add_argument("--k-start", type=float, default=57)
    sp.add_argument("--integer-k", action="store_true", help="restrict K*(p_t) to integers")

    sp = common(sub.add_parser("find-rhat", help="charger-cost threshold for effective taxation"))
    sp.add_argument("--pt", default="0:25:0.2")
    sp.add_argument("--r-lo", type=float, default=12.5)
    sp.add_argument("--r-hi", type=float, default=62.5)
    sp.add_argument("--tol", type=float, default=0.25)

    sp = common(sub.add_parser("sensitivity", help="one-at-a-time parameter perturbation"))
    sp.add_argument("--params", default=",".join(policy.SENSITIVITY_PARAMS))
    sp.add_argument("--factors", default=",".join(str(f) for f in policy.SENSITIVITY_FACTORS))
    sp.add_argument("--k", default="20:120")
    sp.add_argument("--fixed-k", action="store_true",
                    help="do not widen the K range when an argmax lands on its end")
    sp.add_argument("--workers", type=int, default=1)

    sp = common(sub.add_parser("simulate", help="discrete-event simulation vs analytical times"),
                grid=False)
    sp.add_argument("--mode", choices=("mmn", "network"), default="network")
    sp.add_argument("--lam", type=float, help="network: valet demand; mmn: arrival rate")
    sp.add_argument("--n", type=float, help="network: couriers; mmn: servers")
    sp.add_argument("--k", type=float)
    sp.add_argument("--m", type=float)
    sp.add_argument("--service", type=float, help="mmn: mean service time (hr)")
    sp.add_argument("--pickup", choices=("state", "mean"), default="state")
    sp.add_argument("--horizon", type=int, default=200_000)
    sp.add_argument("--warmup", type=int, default=None)
    sp.add_argument("--replications", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)

    sp = common(sub.add_parser("calibrate-theta", help="Monte-Carlo delivery-time coefficient"),
                grid=False)
    sp.add_argument("--area", type=float, default=None)
    sp.add_argument("--k", default="20:120")
    sp.add_argument("--speed", type=float, required=True, help="courier speed, km/hr")
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _resolve(args):
    values = read_config(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        values[key] = None if val.lower() == "none" else _float_list(val)[0]
    for key in values:
        if key not in PARAM_NAMES and key not in POLICY_NAMES:
            raise ParameterError(key, f"unknown key {key!r}")
    return split_config(values, PAPER_PARAMS, PolicyConfig())


def _grid(args):
    try:
        coarse, stages = (int(x) for x in args.grid.split(","))
    except ValueError:
        raise UsageError(f"bad --grid {args.grid!r}; expected COARSE,STAGES") from None
    return market.GridSpec(coarse=coarse, stages=stages)


def _sweep_row(row, variable):
    o = row.outcome
    if o is None:
        vals = [math.nan] * (len(SWEEP_COLUMNS) - 1) + [False]
    else:
        q = o.queue.minutes()
        vals = [o.lam, o.n, o.price, o.wage, o.profit, o.customer_surplus, o.courier_surplus,
                o.social_welfare, o.ev_penetration, o.lerner, o.marginal_cost,
                q["t_r"], q["t_p"], q["t_d"], q["t_w"], o.queue.rho_d, o.queue.rho_c,
                bool(row.viable)]
    return [getattr(row, variable)] + vals


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_sweep(path, table):
    write_csv(path, [table.variable] + list(SWEEP_COLUMNS),
              [_sweep_row(r, table.variable) for r in table.rows])


class Run:
    """Collects outputs for one invocation and writes them with the manifest."""

    def __init__(self, args, params, pol, settings):
        self.args, self.params, self.policy, self.settings = args, params, pol, settings
        self.out = Path(args.out) if args.out else None
        self.t0 = time.perf_counter()
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name):
        return self.out / name if self.out else None

    def json(self, name, obj, echo=True):
        text = _dump(obj)
        if self.out:
            (self.out / name).write_text(text, encoding="utf-8")
        if echo:
            sys.stdout.write(text)

    def finish(self, argv):
        if not self.out:
            return
        manifest = {
            "subcommand": self.args.command,
            "argv": list(argv),
            "params": self.params.as_dict(),
            "policy": self.policy.as_dict(),
            "settings": self.settings,
            "seed": getattr(self.args, "seed", None),
            "version": _version(),
            "kernels": kernels.BACKEND,
            "duration_s": time.perf_counter() - self.t0,
        }
        (self.out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")


def _outcome_json(o):
    d = o.as_dict()
    d["queue_minutes"] = o.queue.minutes()
    return d


def cmd_solve(args, params, pol, run):
    changes = {"k": args.k}
    if args.tax is not None:
        changes["p_tax"] = args.tax
    if args.r is not None:
        changes["charger_cost"] = args.r
    pol = pol.replace(**changes)
    run.policy = pol
    run.json("solve.json", _outcome_json(market.maximize_profit(pol, params, _grid(args))))


def cmd_queue_eval(args, params, pol, run):
    m = args.m if args.m is not None else pol.nominal_chargers(params)
    q = queueing.queue_state(args.lam, args.n, args.k, m, params)
    d = dataclasses.asdict(q)
    d["minutes"] = q.minutes()
    run.json("queue.json", d)


def cmd_sweep_k(args, params, pol, run):
    if args.tax is not None:
        pol = pol.replace(p_tax=args.tax)
        run.policy = pol
    table, summary = policy.sweep_k(parse_range(args.k, integer=True), params, pol, _grid(args),
                                    workers=args.workers)
    if run.out:
        write_sweep(run.path("sweep_k.csv"), table)
    run.json("summary.json", dataclasses.asdict(summary))


def cmd_sweep_tax(args, params, pol, run):
    if args.r is not None:
        pol = pol.replace(charger_cost=args.r)
        run.policy = pol
    table, summary = policy.stackelberg_tax(parse_range(args.pt), params, pol, _grid(args),
                                            k_start=args.k_start, continuous=not args.integer_k)
    if run.out:
        write_sweep(run.path("sweep_tax.csv"), table)
    run.json("summary.json", dataclasses.asdict(summary))


def cmd_find_rhat(args, params, pol, run):
    r_hat = policy.find_r_threshold(params, parse_range(args.pt), (args.r_lo, args.r_hi),
                                    args.tol, pol, _grid(args))
    run.json("rhat.json", {"r_hat": r_hat, "tolerance": args.tol})


def cmd_sensitivity(args, params, pol, run):
    names = [s for s in args.params.split(",") if s]
    cells = policy.sensitivity_batch(params, names, _float_list(args.factors),
                                     parse_range(args.k, integer=True), pol, _grid(args),
                                     workers=args.workers,
                                     k_limits=None if args.fixed_k else (1, 400))
    summary = []
    for name in names:
        mine = [c for c in cells if c.name == name]
        if run.out:
            rows = [(c.factor, c.value, k, lam, n, pr, bool(a))
                    for c in mine for k, lam, n, pr, a in zip(c.ks, c.lam, c.n, c.profit, c.active)]
            write_csv(run.path(f"sensitivity_{name}.csv"),
                      ["factor", "value", "k", "lambda", "N", "profit", "active"], rows)
        for c in mine:
            entry = {"param": name, "factor": c.factor, "value": c.value, "reason": c.reason}
            entry.update(dataclasses.asdict(c.summary) if c.summary else {})
            entry["k_range"] = [float(c.ks[0]), float(c.ks[-1])]
            entry["lambda_single_peaked"] = policy.single_peaked(c.lam[c.active])
            entry["n_single_peaked"] = policy.single_peaked(c.n[c.active])
            summary.append(entry)
    run.json("summary.json", summary)


def _sim_json(r):
    return {"mean": r.mean, "ci_halfwidth": r.ci_halfwidth}


def cmd_simulate(args, params, pol, run):
    sim = desim.SimConfig(horizon=args.horizon, warmup=args.warmup,
                          replications=args.replications, seed=args.seed)
    if args.mode == "mmn":
        if None in (args.lam, args.n, args.service):
            raise UsageError("mmn mode needs --lam, --n (servers) and --service")
        servers = int(args.n)
        cfg = dataclasses.replace(sim, arrival_rate=args.lam, servers=servers,
                                  mean_service=args.service)
        res = desim.simulate_mmn(cfg)
        run.json("simulate.json", {
            "simulated_wait": _sim_json(res),
            "erlang_c_wait": queueing.erlang_c_wait(args.lam, args.service, servers),
            "sakasegawa_wait": queueing.sakasegawa_wait(args.lam, args.service, servers),
        })
        return
    if None in (args.lam, args.n, args.k):
        raise UsageError("network mode needs --lam, --n and --k")
    m = args.m if args.m is not None else pol.nominal_chargers(params)
    q = queueing.queue_state(args.lam, args.n, args.k, m, params)
    res = desim.simulate_network(args.lam, args.n, int(args.k), m, params, sim, pickup=args.pickup)
    servers = res.servers
    exact_tw = float(np.mean([queueing.erlang_c_wait(args.lam / int(args.k), params.t_charge, s)
                              for s in servers]))
    run.json("simulate.json", {
        "pickup": args.pickup,
        "simulated_hr": {k: _sim_json(getattr(res, k))
                         for k in ("t_response", "t_pickup", "t_wait", "rho_d", "rho_c")},
        "analytical_hr": {"t_response": q.t_response, "t_pickup": q.t_pickup,
                          "t_wait": q.t_wait, "rho_d": q.rho_d, "rho_c": q.rho_c},
        "exact_erlang_c_t_wait_hr": exact_tw,
        "little": {"busy_couriers": _sim_json(res.busy_couriers),
                   "rate_times_duration": _sim_json(res.little_rhs)},
    })


def cmd_calibrate(args, params, pol, run):
    area = args.area if args.area is not None else params.area
    cal = calibrate_theta(area, parse_range(args.k, integer=True), args.speed, args.samples, args.seed)
    if run.out:
        write_csv(run.path("theta_samples.csv"), ["k", "sqrt_area_per_k", "t_d_hr"], cal.table)
    run.json("theta.json", {"theta": cal.theta, "intercept": cal.intercept,
                            "r_squared": cal.r_squared, "stderr": cal.stderr,
                            "expected": cal.expected, "speed": cal.speed,
                            "samples": cal.samples, "seed": cal.seed})


COMMANDS = {"solve": cmd_solve, "queue-eval": cmd_queue_eval, "sweep-k": cmd_sweep_k,
            "sweep-tax": cmd_sweep_tax, "find-rhat": cmd_find_rhat,
            "sensitivity": cmd_sensitivity, "simulate": cmd_simulate,
            "calibrate-theta": cmd_calibrate}


def run(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        params, pol = _resolve(args)
        settings = {"grid": getattr(args, "grid", None)}
        r = Run(args, params, pol, settings)
        COMMANDS[args.command](args, params, pol, r)
        r.finish(argv)
        return 0
    except (UsageError, ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (Infeasible, Unviable, Unstable, BracketError, DomainError) as exc:
        print(f"no admissible outcome: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
