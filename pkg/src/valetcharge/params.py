"""Exogenous model parameters, planner levers, config files and theta calibration."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class ModelParams:
    """Exogenous parameters of the valet-charging market.

    Units: persons, chargers, km^2, HK$ and hours.
    """

    lambda0: float = 6e5        # potential private-vehicle owners
    n0: float = 5e4             # potential couriers
    m0: float = 3e3             # nominal public chargers
    area: float = 1e3           # km^2
    coordinator_cost: float = 60.0  # HK$/hr per station
    c_self: float = 80.0        # HK$
    c_fuel: float = 75.0        # HK$
    w_outside: float = 110.0    # HK$/hr
    t_charge: float = 5.0       # hr
    alpha: float = 60.0         # HK$/hr, before pickup
    beta: float = 10.0          # HK$/hr, after pickup
    tau: float = 0.01           # share of EVs needing a charge per hour
    theta: float = 0.06         # delivery-time coefficient
    phi: float = 0.04           # pickup-time coefficient
    eps1: float = 0.11          # upper nest (EV vs fuel)
    eps2: float = 0.1           # lower nest (valet vs self)
    eta: float = 0.1            # courier supply sensitivity

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


PAPER_PARAMS = ModelParams()
PARAM_NAMES = tuple(f.name for f in dataclasses.fields(ModelParams))


@dataclass(frozen=True)
class PolicyConfig:
    """Planner-controlled levers.

    ``k`` is the station count; sweeps use integers, the taxation study
    refines it continuously.  When ``budget`` is set the charger stock is
    ``budget / gamma`` and overrides ``ModelParams.m0``.
    """

    k: float = 57
    p_tax: float = 0.0
    charger_cost: float = 25.0
    budget: Optional[float] = None
    gamma: Optional[float] = None

    def replace(self, **changes) -> "PolicyConfig":
        return dataclasses.replace(self, **changes)

    def nominal_chargers(self, params: ModelParams) -> float:
        if self.budget is None:
            return params.m0
        return self.budget / self.gamma

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


POLICY_NAMES = tuple(f.name for f in dataclasses.fields(PolicyConfig))


def validate(params: ModelParams) -> ModelParams:
    """Return ``params`` unchanged, or raise ParameterError on the first violation."""
    for name in PARAM_NAMES:
        value = getattr(params, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParameterError(name, f"{name} must be a finite number")
        if value <= 0:
            raise ParameterError(name, f"{name} must be positive")
    if params.alpha <= params.beta:
        raise ParameterError("alpha", "alpha must exceed beta")
    if params.tau > 1:
        raise ParameterError("tau", "tau must not exceed 1")
    return params


def validate_policy(policy: PolicyConfig) -> PolicyConfig:
    if not policy.k >= 1:
        raise ParameterError("k", "k must be at least 1")
    if not policy.p_tax >= 0:
        raise ParameterError("p_tax", "p_tax must be nonnegative")
    if not policy.charger_cost > 0:
        raise ParameterError("charger_cost", "charger_cost must be positive")
    if policy.budget is not None:
        if policy.gamma is None or not policy.gamma > 0:
            raise ParameterError("gamma", "gamma must be positive when budget is given")
        if not policy.budget > 0:
            raise ParameterError("budget", "budget must be positive")
    return policy


# --------------------------------------------------------------------------
# config files: one ``key = value`` per line, '#' starts a comment

def read_config(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError("", f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_NAMES and key not in POLICY_NAMES:
            raise ParameterError(key, f"{path}:{lineno}: unknown key {key!r}")
        if value.lower() in ("", "none"):
            values[key] = None
            continue
        try:
            values[key] = float(value)
        except ValueError:
            raise ParameterError(key, f"{path}:{lineno}: {key} is not a number") from None
    return values


def split_config(values: Mapping, params: ModelParams = PAPER_PARAMS,
                 policy: PolicyConfig = PolicyConfig()) -> tuple[ModelParams, PolicyConfig]:
    p_changes = {k: v for k, v in values.items() if k in PARAM_NAMES}
    q_changes = {k: v for k, v in values.items() if k in POLICY_NAMES}
    if any(v is None for v in p_changes.values()):
        missing = [k for k, v in p_changes.items() if v is None]
        raise ParameterError(missing[0], f"missing required parameter {missing[0]}")
    return validate(params.replace(**p_changes)), validate_policy(policy.replace(**q_changes))


def write_config(path, params: ModelParams, policy: Optional[PolicyConfig] = None) -> None:
    lines = ["# valet-charging model parameters"]
    lines += [f"{k} = {v!r}" for k, v in params.as_dict().items()]
    if policy is not None:
        lines.append("# policy")
        lines += [f"{k} = {v!r}" for k, v in policy.as_dict().items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# Monte-Carlo calibration of the delivery-time coefficient

@dataclass
class ThetaCalibration:
    theta: float
    intercept: float
    r_squared: float
    stderr: float
    speed: float
    samples: int
    seed: int
    table: list = field(default_factory=list)   # (k, sqrt(A/K), mean travel time)

    @property
    def expected(self) -> float:
        """Large-sample limit of the slope for centre-of-zone stations."""
        return 1.0 / (2.0 * self.speed)


def calibrate_theta(area: float, k_values: Sequence[int], speed: float,
                    samples: int = 100_000, seed: int = 0) -> ThetaCalibration:
    """Regress mean Manhattan travel time to the zone centre on sqrt(A/K).

    Each of the K stations serves a square zone of side sqrt(A/K) with the
    station at its centre; customers are uniform within the zone.
    """
    k_values = [int(k) for k in k_values]
    if samples < 100:
        raise DomainError("samples must be at least 100")
    if speed <= 0 or area <= 0:
        raise DomainError("speed and area must be positive")
    if len(set(k_values)) < 2:
        raise DomainError("degenerate regression: need at least two distinct K values")

    rng = np.random.default_rng(seed)
    sides, times, table = [], [], []
    for k in k_values:
        side = math.sqrt(area / k)
        pts = rng.uniform(0.0, side, size=(samples, 2))
        dist = np.abs(pts - 0.5 * side).sum(axis=1).mean()
        t = dist / speed
        sides.append(side)
        times.append(t)
        table.append((k, side, t))

    fit = stats.linregress(sides, times)
    return ThetaCalibration(theta=float(fit.slope), intercept=float(fit.intercept),
                            r_squared=float(fit.rvalue ** 2), stderr=float(fit.stderr),
                            speed=speed, samples=samples, seed=seed, table=table)
