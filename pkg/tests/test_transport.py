import numpy as np
import pytest

from plapflow.flow import constant_source, evolve
from plapflow.limitdyn import LipschitzConstraintSet, ProjectionResolvent
from plapflow.mesh import (GeodesicTable, boundary_pairwise_distances,
                           build_interval_mesh)
from plapflow.oracles import brute_force_transport
from plapflow.transport import (TransportPlan, UnbalancedMasses, solve_dual,
                                solve_primal, verify_potential)


def _line_table(pts):
    pts = np.asarray(pts, dtype=float)
    return GeodesicTable(dist=np.abs(pts[:, None] - pts[None]))


def test_primal_identical_measures():
    geo = _line_table([0.0, 0.5, 1.0])
    mu = np.array([0.2, 0.3, 0.5])
    plan = solve_primal(mu, mu, geo)
    assert abs(plan.cost) < 1e-10
    assert plan.gap < 1e-8


def test_primal_single_pair_unit_distance():
    geo = _line_table([0.0, 1.0])
    plan = solve_primal(np.array([1.0, 0.0]), np.array([0.0, 1.0]), geo)
    assert abs(plan.cost - 1.0) < 1e-10
    assert abs(plan.theta[0, 1] - 1.0) < 1e-10


def test_primal_split_shipment():
    # one unit at the middle splits to the two ends, half a unit each way
    geo = _line_table([0.0, 0.5, 1.0])
    mu = np.array([0.0, 1.0, 0.0])
    nu = np.array([0.5, 0.0, 0.5])
    plan = solve_primal(mu, nu, geo)
    assert abs(plan.cost - 0.5) < 1e-10


def test_primal_scaling():
    geo = _line_table([0.0, 0.3, 1.0])
    mu = np.array([0.7, 0.0, 0.3])
    nu = np.array([0.0, 0.6, 0.4])
    c1 = solve_primal(mu, nu, geo).cost
    c3 = solve_primal(3 * mu, 3 * nu, geo).cost
    assert abs(c3 - 3 * c1) < 1e-9


def test_primal_marginals_respected():
    rng = np.random.default_rng(5)
    pts = np.sort(rng.uniform(0, 1, 6))
    geo = _line_table(pts)
    mu = rng.uniform(0, 1, 6)
    nu = rng.uniform(0, 1, 6)
    nu *= mu.sum() / nu.sum()
    plan = solve_primal(mu, nu, geo)
    assert np.abs(plan.theta.sum(axis=1) - mu).max() < 1e-8
    assert np.abs(plan.theta.sum(axis=0) - nu).max() < 1e-8
    assert plan.theta.min() > -1e-10


def test_primal_matches_brute_force():
    rng = np.random.default_rng(17)
    pts = np.sort(rng.uniform(0, 1, 5))
    dist = np.abs(pts[:, None] - pts[None])
    geo = GeodesicTable(dist=dist)
    for _ in range(10):
        mu = np.zeros(5)
        nu = np.zeros(5)
        mu[rng.choice(5, 2, replace=False)] = rng.uniform(0.2, 1.0, 2)
        nu[rng.choice(5, 3, replace=False)] = rng.uniform(0.2, 1.0, 3)
        nu *= mu.sum() / nu.sum()
        cost = solve_primal(mu, nu, geo).cost
        assert abs(cost - brute_force_transport(mu, nu, dist)) < 1e-8


def test_primal_rejects_unbalanced():
    geo = _line_table([0.0, 1.0])
    with pytest.raises(UnbalancedMasses):
        solve_primal(np.array([1.0, 0.0]), np.array([0.0, 2.0]), geo)


def test_dual_two_point():
    # delta = (+1, -1) at unit distance: v = (1, 0) attains value 1
    geo = _line_table([0.0, 1.0])
    v, val = solve_dual(np.array([1.0, -1.0]), geo)
    assert abs(val - 1.0) < 1e-10
    assert abs((v[0] - v[1]) - 1.0) < 1e-10


def test_dual_zero_measure():
    geo = _line_table([0.0, 0.5, 1.0])
    v, val = solve_dual(np.zeros(3), geo)
    assert val == 0.0
    assert np.allclose(v, 0.0)


def test_dual_feasible_and_matches_primal():
    rng = np.random.default_rng(23)
    pts = np.sort(rng.uniform(0, 1, 6))
    geo = _line_table(pts)
    mu = rng.uniform(0, 1, 6)
    nu = rng.uniform(0, 1, 6)
    nu *= mu.sum() / nu.sum()
    cost = solve_primal(mu, nu, geo).cost
    v, val = solve_dual(mu - nu, geo)
    diff = np.abs(v[:, None] - v[None]) - geo.dist
    assert diff.max() <= 1e-8
    assert abs(val - cost) < 1e-8
    assert v.min() == 0.0


def test_verify_potential_flow_state():
    mesh = build_interval_mesh(4)
    geo = boundary_pairwise_distances(mesh)
    res = ProjectionResolvent(LipschitzConstraintSet(geo),
                              mesh.boundary_weights)
    f = constant_source([0.0, 1.0])
    traj = evolve(res, np.zeros(2), f, T=2.0, tau=1e-3)
    k = int(np.argmin(np.abs(traj.times - 1.5)))
    rep = verify_potential(traj, f, geo, mesh.boundary_weights, k)
    assert rep.transport_applicable
    assert abs(rep.rel_gap) <= 1e-6 + 10 * 1e-3
    assert rep.max_violation <= 1e-8
    assert rep.value_at_u_printed_sign == -rep.value_at_u


def test_verify_potential_requires_interior_index():
    mesh = build_interval_mesh(4)
    geo = boundary_pairwise_distances(mesh)
    res = ProjectionResolvent(LipschitzConstraintSet(geo),
                              mesh.boundary_weights)
    traj = evolve(res, np.zeros(2), constant_source([0.0, 1.0]),
                  T=0.5, tau=0.1)
    with pytest.raises(ValueError):
        verify_potential(traj, constant_source([0.0, 1.0]), geo,
                         mesh.boundary_weights, 0)
