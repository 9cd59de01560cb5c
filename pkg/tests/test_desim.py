import numpy as np
import pytest

from valetcharge.desim import (SimConfig, SimResult, simulate_mmn, simulate_network,
                               station_servers)
from valetcharge.errors import DomainError, Unstable
from valetcharge.params import PAPER_PARAMS as P
from valetcharge.queueing import erlang_c_wait, queue_state, sakasegawa_wait


def mmn(lam, servers, service, **kw):
    kw.setdefault("horizon", 100_000)
    return simulate_mmn(SimConfig(arrival_rate=lam, servers=servers, mean_service=service, **kw))


def test_mm1():
    r = mmn(0.5, 1, 1.0)
    assert r.covers(1.0)
    assert r.ci_halfwidth > 0


def test_mm2():
    assert mmn(1.0, 2, 1.0).covers(1 / 3)


def test_fast_service_twenty_servers():
    mu, rho, n = 2.4, 0.9, 20
    r = mmn(rho * n * mu, n, 1 / mu)
    exact = erlang_c_wait(rho * n * mu, 1 / mu, n)
    assert r.covers(exact)
    # the approximation stays visibly close at this load
    assert abs(sakasegawa_wait(rho * n * mu, 1 / mu, n) / exact - 1) < 0.02


def test_fifty_servers_heavy_load():
    r = mmn(0.95 * 50, 50, 1.0, horizon=200_000)
    assert r.covers(erlang_c_wait(0.95 * 50, 1.0, 50))


def test_reproducible_streams():
    a = mmn(1.5, 2, 1.0, horizon=5000, replications=4, seed=9)
    b = mmn(1.5, 2, 1.0, horizon=5000, replications=4, seed=9)
    c = mmn(1.5, 2, 1.0, horizon=5000, replications=4, seed=10)
    assert np.array_equal(a.replications, b.replications)
    assert not np.array_equal(a.replications, c.replications)
    assert len(set(a.replications)) == 4


def test_config_checks():
    with pytest.raises(DomainError):
        mmn(1.0, 1, 1.0)
    with pytest.raises(DomainError):
        SimConfig(horizon=100, warmup=100).check()
    with pytest.raises(DomainError):
        SimConfig(replications=0).check()
    assert SimConfig(horizon=1000).discard == 200


def test_ci_from_samples():
    r = SimResult.from_samples([1.0, 2.0, 3.0])
    assert r.mean == 2.0
    # Student t quantile with 2 degrees of freedom: (2p-1)/sqrt(2p(1-p))
    t = 0.95 / np.sqrt(2 * 0.975 * 0.025)
    assert r.ci_halfwidth == pytest.approx(t / np.sqrt(3), rel=1e-10)


def test_station_servers():
    assert station_servers(3000, 57) == [53] * 36 + [52] * 21
    assert sum(station_servers(3217.6, 40)) == 3218


def test_network_light_traffic():
    r = simulate_network(1.0, 500, 57, 3000, P, SimConfig(horizon=4000, replications=5))
    assert r.t_response.mean == 0.0
    assert r.t_wait.mean == 0.0
    assert r.t_pickup.mean == pytest.approx(P.phi * np.sqrt(P.area / 500), rel=0.01)


@pytest.fixture(scope="module")
def network_k57():
    lam, n = 496.2268, 472.325
    # the charging stage relaxes on the 5 h charging time; 20k discarded arrivals is ~40 h
    r = simulate_network(lam, n, 57, 3000, P, SimConfig(horizon=100_000, replications=8),
                         pickup="mean")
    return lam, n, r


def test_network_littles_law(network_k57):
    _, _, r = network_k57
    gap = abs(r.busy_couriers.mean - r.little_rhs.mean)
    assert gap <= r.busy_couriers.ci_halfwidth + r.little_rhs.ci_halfwidth


def test_network_utilizations(network_k57):
    lam, n, r = network_k57
    q = queue_state(lam, n, 57, 3000, P)
    assert r.rho_d.covers(q.rho_d)
    assert r.rho_c.covers(q.rho_c)


def test_network_reproducible():
    cfg = SimConfig(horizon=3000, replications=2, seed=4)
    a = simulate_network(300.0, 800, 57, 3000, P, cfg)
    b = simulate_network(300.0, 800, 57, 3000, P, cfg)
    assert np.array_equal(a.t_wait.replications, b.t_wait.replications)
    assert np.array_equal(a.t_pickup.replications, b.t_pickup.replications)


@pytest.mark.parametrize("lam,n", [(300.0, 800.0), (100.0, 300.0)])
def test_state_dependent_pickup_matches_fixed_point(lam, n):
    q = queue_state(lam, n, 57, 3000, P)
    r = simulate_network(lam, n, 57, 3000, P, SimConfig(horizon=20_000, replications=10))
    assert r.t_pickup.covers(q.t_pickup)
    assert r.rho_d.covers(q.rho_d)


def test_overloaded_fleet_is_unstable():
    with pytest.raises(Unstable):
        simulate_network(100.0, 60, 57, 3000, P, SimConfig(horizon=200_000, replications=1))


def test_network_preconditions():
    with pytest.raises(DomainError):
        simulate_network(700.0, 5000, 57, 3000, P, SimConfig(horizon=1000, replications=1))
    with pytest.raises(ValueError):
        simulate_network(10.0, 500, 57, 3000, P, pickup="random")
