"""Slow, exhaustive reference solvers for cross-checking on small instances.

These deliberately avoid the algorithms used by the fast paths: the
projection oracle enumerates KKT active sets, the transport oracle
enumerates spanning-tree vertices of the coupling polytope, and the 1D
proximal oracle reduces to a bounded scalar minimization via a
mean/difference split.  The enumerative ones are exponential in the
instance size and guarded accordingly.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.optimize import minimize_scalar


def _is_forest(n_nodes, pair_list):
    """Union-find acyclicity test for an undirected edge subset."""
    parent = list(range(n_nodes))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pair_list:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def brute_force_projection(g, dist, sigma, feas_tol: float = 1e-9) -> np.ndarray:
    """Weighted L2 projection onto {v : |v_i - v_j| <= dist[i,j]} by
    exhaustive active-set enumeration.

    For every forest of candidate active pairs (at most B-1 of them) and
    every orientation of the tight inequalities, the equality-constrained
    minimizer and its multipliers are computed in closed form; the unique
    KKT-consistent candidate is the projection.  Exponential in B; intended
    for B <= 6.
    """
    g = np.asarray(g, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    dist = np.asarray(dist, dtype=float)
    B = len(g)
    if B > 7:
        raise ValueError("active-set enumeration is limited to 7 nodes")
    pairs = [(i, j) for i in range(B) for j in range(i + 1, B)]
    scale = max(float(dist.max()), 1.0)

    def violation(v):
        return max(float((np.abs(v[:, None] - v[None, :]) - dist).max()), 0.0)

    if violation(g) <= feas_tol * scale:
        return g.copy()

    inv_sigma = 1.0 / sigma
    for k in range(1, B):
        for subset in combinations(range(len(pairs)), k):
            active = [pairs[c] for c in subset]
            if not _is_forest(B, active):
                continue
            A = np.zeros((k, B))
            d_act = np.empty(k)
            for r, (i, j) in enumerate(active):
                A[r, i] = 1.0
                A[r, j] = -1.0
                d_act[r] = dist[i, j]
            M = (A * inv_sigma) @ A.T
            Ag = A @ g
            # sign pattern s in {+1,-1}^k orients each tight constraint as
            # s*(v_i - v_j) = d; with w = s*mu the KKT system is M w = Ag - s*d
            signs = np.array(np.meshgrid(*([[1.0, -1.0]] * k),
                                         indexing="ij")).reshape(k, -1)
            try:
                W = np.linalg.solve(M, Ag[:, None] - signs * d_act[:, None])
            except np.linalg.LinAlgError:
                continue
            mu = signs * W
            ok = np.all(mu >= -feas_tol * scale, axis=0)
            for c in np.nonzero(ok)[0]:
                v = g - inv_sigma * (A.T @ W[:, c])
                if violation(v) <= feas_tol * scale:
                    return v
    raise RuntimeError("active-set enumeration found no KKT point")


@lru_cache(maxsize=64)
def _tree_plans(m: int, n: int):
    """All spanning trees of the complete bipartite m x n support graph,
    each with a leaf-elimination schedule that determines the flows.

    A schedule entry is (edge, side, node, other): eliminate ``node`` (a leaf
    on ``side`` 0 = supply, 1 = demand) through ``edge`` = (a, b).
    """
    edges = [(a, b) for a in range(m) for b in range(n)]
    need = m + n - 1
    if len(edges) < need:
        return ()
    n_subsets = 1
    for r in range(need):
        n_subsets = n_subsets * (len(edges) - r) // (r + 1)
    if n_subsets > 300000:
        raise ValueError("support too large for spanning-tree enumeration")
    plans = []
    for subset in combinations(range(len(edges)), need):
        chosen = [edges[c] for c in subset]
        deg = [0] * (m + n)
        adj = {e: True for e in chosen}
        for a, b in chosen:
            deg[a] += 1
            deg[m + b] += 1
        schedule = []
        live = dict.fromkeys(chosen, True)
        degw = deg[:]
        progress = True
        while live and progress:
            progress = False
            for e in list(live):
                a, b = e
                if degw[a] == 1:
                    schedule.append((e, 0, a, b))
                elif degw[m + b] == 1:
                    schedule.append((e, 1, b, a))
                else:
                    continue
                del live[e]
                degw[a] -= 1
                degw[m + b] -= 1
                progress = True
        if live:  # cycle or disconnected piece: not a spanning tree
            continue
        plans.append((chosen, schedule))
    return tuple(plans)


def brute_force_transport(mu, nu, dist, tol: float = 1e-11) -> float:
    """Minimal coupling cost by enumerating vertices of the coupling polytope.

    Every vertex is supported on a spanning tree of the bipartite support
    graph, and its flows follow from leaf elimination; the minimum over all
    nonnegative vertices is exact.  Exponential in the support sizes.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    dist = np.asarray(dist, dtype=float)
    total = float(mu.sum())
    if abs(total - float(nu.sum())) > 1e-9 * (1.0 + total):
        raise ValueError("masses must balance")
    I = np.nonzero(mu > tol)[0]
    J = np.nonzero(nu > tol)[0]
    if len(I) == 0:
        return 0.0
    m, n = len(I), len(J)
    cost_sub = dist[np.ix_(I, J)]
    mu_sub = mu[I]
    nu_sub = nu[J]
    best = np.inf
    for chosen, schedule in _tree_plans(m, n):
        supply = mu_sub.copy()
        demand = nu_sub.copy()
        cost = 0.0
        ok = True
        for (a, b), side, node, _other in schedule:
            x = supply[a] if side == 0 else demand[b]
            if x < -1e-9:
                ok = False
                break
            supply[a] -= x
            demand[b] -= x
            cost += x * cost_sub[a, b]
        if ok and cost < best:
            best = cost
    if not np.isfinite(best):
        raise RuntimeError("no feasible spanning-tree vertex found")
    return float(best)


def brute_force_prox_interval(g, lam: float, p: float) -> np.ndarray:
    """Resolvent of the unit-interval p-energy (counting measure on the two
    endpoints), by an independent reduction.

    One-dimensional energy minimizers with fixed endpoints are linear, so
    the objective is (1/p)|v1-v0|^p + (1/2lam)((v0-g0)^2 + (v1-g1)^2).  In
    mean/difference variables the mean decouples (m* = (g0+g1)/2) and the
    difference solves a bounded scalar minimization, robust for any p.
    """
    g = np.asarray(g, dtype=float)
    gap = g[1] - g[0]
    lim = abs(gap) + 1e-9

    def obj(s):
        return (abs(s) ** p) / p + (s - gap) ** 2 / (4.0 * lam)

    res = minimize_scalar(obj, bounds=(-lim, lim), method="bounded",
                          options={"xatol": 1e-13})
    m = (g[0] + g[1]) / 2.0
    return np.array([m - res.x / 2.0, m + res.x / 2.0])
