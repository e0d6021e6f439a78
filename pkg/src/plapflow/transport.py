"""Discrete Monge-Kantorovich transport with geodesic cost, primal and dual.

Both problems are linear programs over the geodesic table: the primal over
couplings with prescribed marginals, the dual over functions satisfying the
pairwise Lipschitz constraints.  The dual is used to certify optimality of
the flow's limit states (they should maximize the dual objective against
the measure f - du/dt).

Sign convention: the verification pairs the state with delta = f - du/dt.
Kantorovich duality is often quoted with the opposite sign, but the flow
states attain the maximum only with this orientation (the two-point case
makes that explicit); reports carry both signed values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from plapflow.flow import SourceTerm, Trajectory
from plapflow.mesh import GeodesicTable


class UnbalancedMasses(ValueError):
    def __init__(self, excess: float):
        super().__init__(f"total masses differ by {excess:.3e}")
        self.excess = excess


class InfeasibleTolerance(RuntimeError):
    """LP solver could not certify the requested duality gap."""


def _check_balance(delta: np.ndarray):
    excess = float(abs(delta.sum()))
    if excess > 1e-8 * float(np.abs(delta).sum()) + 1e-12:
        raise UnbalancedMasses(excess)


@dataclass(frozen=True)
class TransportPlan:
    theta: np.ndarray   # (B, B) nonnegative coupling
    cost: float
    potential: np.ndarray  # dual certificate from the LP
    gap: float


def solve_primal(mu: np.ndarray, nu: np.ndarray, geo: GeodesicTable) -> TransportPlan:
    """Optimal coupling between nonnegative measures with equal total mass."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    d = geo.dist
    B = len(mu)
    if len(nu) != B or d.shape != (B, B):
        raise ValueError("measure/table size mismatch")
    if np.any(mu < -1e-12) or np.any(nu < -1e-12):
        raise ValueError("primal measures must be nonnegative")
    if B > 512:
        raise ValueError("primal solver is limited to 512 boundary nodes")
    _check_balance(mu - nu)

    # equality rows: B row sums = mu, then B-1 column sums = nu (last is redundant)
    rows = []
    for i in range(B):
        a = sp.lil_matrix((1, B * B))
        a[0, i * B:(i + 1) * B] = 1.0
        rows.append(a)
    for j in range(B - 1):
        a = sp.lil_matrix((1, B * B))
        a[0, j::B] = 1.0
        rows.append(a)
    A_eq = sp.vstack(rows).tocsr()
    b_eq = np.concatenate([mu, nu[:-1]])
    res = linprog(c=d.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise InfeasibleTolerance(f"primal LP failed: {res.message}")
    theta = res.x.reshape(B, B)
    cost = float(res.fun)
    # dual certificate from the equality multipliers
    marg = np.asarray(res.eqlin.marginals)
    dual_val = float(marg @ b_eq)
    gap = abs(cost - dual_val)
    if gap > 1e-6 * (1.0 + abs(cost)):
        raise InfeasibleTolerance(f"duality gap {gap:.3e} too large")
    pot = marg[:B].copy()
    return TransportPlan(theta=theta, cost=cost, potential=pot, gap=gap)


def solve_dual(delta: np.ndarray, geo: GeodesicTable):
    """Maximize sum(v * delta) over |v_i - v_j| <= dist[i, j].

    ``delta`` is a signed, balanced measure (already sigma-integrated).
    Returns the potential normalized to min v = 0 and the optimal value.
    """
    delta = np.asarray(delta, dtype=float)
    d = geo.dist
    B = len(delta)
    if d.shape != (B, B):
        raise ValueError("measure/table size mismatch")
    _check_balance(delta)
    if not np.any(delta):
        return np.zeros(B), 0.0
    iu, ju = np.triu_indices(B, k=1)
    npairs = len(iu)
    rows = np.repeat(np.arange(2 * npairs), 2)
    cols = np.concatenate([np.column_stack([iu, ju]).ravel(),
                           np.column_stack([ju, iu]).ravel()])
    vals = np.tile([1.0, -1.0], 2 * npairs)
    A_ub = sp.csr_matrix((vals, (rows, cols)), shape=(2 * npairs, B))
    b_ub = np.concatenate([d[iu, ju], d[iu, ju]])
    res = linprog(c=-delta, A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs")
    if not res.success:
        raise InfeasibleTolerance(f"dual LP failed: {res.message}")
    v = res.x - res.x.min()
    return v, float(-res.fun)


@dataclass(frozen=True)
class PotentialReport:
    """Duality diagnostics for one trajectory state."""

    t: float
    delta: np.ndarray          # sigma * (f - du/dt)
    delta_sum: float
    transport_applicable: bool  # balanced within tolerance
    value_at_u: float
    value_opt: float
    rel_gap: float
    max_violation: float       # Lipschitz feasibility of the state
    value_at_u_printed_sign: float  # objective with delta = du/dt - f


def verify_potential(traj: Trajectory, f: SourceTerm, geo: GeodesicTable,
                     weights: np.ndarray, t_index: int) -> PotentialReport:
    """Check that a limit-flow state maximizes the dual transport objective.

    The time derivative is the central difference at an interior grid index;
    its O(tau) error enters the reported gap.
    """
    if not (0 < t_index < len(traj.times) - 1):
        raise ValueError("t_index must be interior to the time grid")
    t = float(traj.times[t_index])
    dt = traj.times[t_index + 1] - traj.times[t_index - 1]
    dudt = (traj.states[t_index + 1] - traj.states[t_index - 1]) / dt
    u = traj.states[t_index]
    sigma = np.asarray(weights, dtype=float)
    delta = sigma * (f(t) - dudt)
    delta_sum = float(delta.sum())
    balanced = abs(delta_sum) <= 1e-8 * float(np.abs(delta).sum()) + 1e-12

    value_at_u = float(u @ delta)
    if balanced and np.any(delta):
        _, value_opt = solve_dual(delta, geo)
    else:
        value_opt = value_at_u if not np.any(delta) else float("nan")
    rel_gap = (value_opt - value_at_u) / (1.0 + abs(value_opt)) if balanced else float("nan")
    diff = np.abs(u[:, None] - u[None, :]) - geo.dist
    return PotentialReport(
        t=t,
        delta=delta,
        delta_sum=delta_sum,
        transport_applicable=balanced,
        value_at_u=value_at_u,
        value_opt=value_opt,
        rel_gap=rel_gap,
        max_violation=float(max(diff.max(), 0.0)),
        value_at_u_printed_sign=-value_at_u,
    )
