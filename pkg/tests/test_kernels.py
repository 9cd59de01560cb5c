import os
import subprocess
import sys

import numpy as np
import pytest

from valetcharge import _fallback, econ, kernels
from valetcharge.params import PAPER_PARAMS as P

cython = pytest.importorskip("valetcharge._kernels")


def test_inverse_demand_array_matches_scalar():
    consts = kernels.pack(P)
    lams = np.linspace(1.0, 590.0, 60)
    for impl in (_fallback, cython):
        cvs = impl.inverse_demand_array(lams, -1.0, 400.0, consts)
        ref = [econ.inverse_demand(l, P) for l in lams]
        assert np.allclose(cvs, ref, rtol=1e-10, atol=1e-9)


def test_profit_grid_backends_agree():
    consts = kernels.pack(P)
    lams = np.linspace(3.0, 599.0, 80)
    ns = np.linspace(10.0, 3000.0, 70)
    cvs = _fallback.inverse_demand_array(lams, -1.0, 400.0, consts)
    a = _fallback.profit_grid(lams, cvs, ns, 57.0, 0.0, 25.0, consts)
    b = cython.profit_grid(lams, cvs, ns, 57.0, 0.0, 25.0, consts)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    ok = np.isfinite(a)
    assert ok.sum() > 100
    assert np.allclose(a[ok], b[ok], rtol=1e-10, atol=1e-8)
    taxed_a = _fallback.profit_grid(lams, cvs, ns, 57.0, 5.0, 25.0, consts)
    taxed_b = cython.profit_grid(lams, cvs, ns, 57.0, 5.0, 25.0, consts)
    ok = np.isfinite(taxed_a)
    assert np.allclose(taxed_a[ok], taxed_b[ok], rtol=1e-10, atol=1e-8)


def test_mmn_waits_backends_agree():
    rng = np.random.default_rng(5)
    ia = rng.exponential(1 / 9.0, 20_000)
    sv = rng.exponential(1.0, 20_000)
    for servers in (1, 3, 10):
        a = _fallback.mmn_waits(ia, sv, servers)
        b = cython.mmn_waits(ia, sv, servers)
        assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_mmn_waits_small_case():
    # two servers: third customer waits for the first to finish
    w = _fallback.mmn_waits(np.array([0.0, 0.1, 0.1]), np.array([1.0, 1.0, 1.0]), 2)
    assert np.allclose(w, [0.0, 0.0, 0.8])
    assert np.allclose(cython.mmn_waits(np.array([0.0, 0.1, 0.1]), np.array([1.0, 1.0, 1.0]), 2),
                       [0.0, 0.0, 0.8])


def test_environment_selects_fallback():
    env = dict(os.environ, VALETCHARGE_KERNELS="python")
    out = subprocess.run([sys.executable, "-c", "import valetcharge; print(valetcharge.KERNEL_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND == "cython"
