"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``VALETCHARGE_KERNELS=python`` to force the fallback.
"""
import os

import numpy as np

from . import _fallback
from .params import ModelParams

BACKEND = "python"
_impl = _fallback
if os.environ.get("VALETCHARGE_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback


def pack(params: ModelParams):
    return np.array([params.area, params.theta, params.phi, params.alpha, params.beta,
                     params.t_charge, params.m0, params.coordinator_cost, params.n0,
                     params.eta, params.w_outside, params.tau * params.lambda0,
                     params.eps1, params.eps2, params.c_self, params.c_fuel])


def backend(name=None):
    """The kernel module for ``name`` ("cython" / "python"), default the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    from . import _kernels
    return _kernels


def inverse_demand_array(lams, lo, hi, consts):
    return _impl.inverse_demand_array(lams, lo, hi, consts)


def profit_grid(lams, cvs, ns, k, p_tax, r, consts):
    return _impl.profit_grid(lams, cvs, ns, float(k), float(p_tax), float(r), consts)


def mmn_waits(interarrivals, services, servers):
    return _impl.mmn_waits(interarrivals, services, int(servers))
