"""Equilibrium solver for an on-demand EV valet-charging market."""
from .errors import BracketError, DomainError, Infeasible, ParameterError, Unstable, Unviable
from .params import PAPER_PARAMS, ModelParams, PolicyConfig, calibrate_theta, validate
from .market import GridSpec, MarketOutcome, evaluate, marginals, maximize_profit
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
