"""The p = infinity side: projection onto the 1-Lipschitz set and exact oracles.

The constraint set is the pairwise form {v : |v_i - v_j| <= d_ij} over
boundary nodes, with d the geodesic table; a function satisfying these
inequalities extends to a 1-Lipschitz function of the interior metric via
inf-convolution, so this is the boundary realization of the unit-gradient
set.  The projection is computed by cyclic Dykstra over two-variable slabs
in the sigma-weighted inner product; each slab projection is closed form.

Also provided: closed-form solutions for the two-point interval flows and
the sandpile growth law u(x, t) = (a(t) - d(x, Gamma))_+ with a(t) obtained
by inverting the piecewise-linear accumulated level measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from plapflow.mesh import DomainMesh, GeodesicTable, geodesic_distance


class MaxIterations(RuntimeError):
    """Dykstra hit its cycle cap with the worst violation still too large."""

    def __init__(self, violation: float, cycles: int):
        super().__init__(f"worst violation {violation:.3e} after {cycles} cycles")
        self.violation = violation
        self.cycles = cycles


@dataclass(frozen=True)
class LipschitzConstraintSet:
    """Pairwise-distance constraints |v_i - v_j| <= dist[i, j]."""

    geodesic: GeodesicTable
    tolerance: float = -1.0  # < 0: use 1e-8 * max distance

    def feasibility_tol(self) -> float:
        if self.tolerance >= 0:
            return self.tolerance
        return 1e-8 * max(float(self.geodesic.dist.max()), 1.0)

    def max_violation(self, v: np.ndarray) -> float:
        diff = np.abs(v[:, None] - v[None, :]) - self.geodesic.dist
        return float(max(diff.max(), 0.0))

    def is_feasible(self, v: np.ndarray) -> bool:
        return self.max_violation(v) <= self.feasibility_tol()


@njit(cache=True)
def _dykstra_kernel(v, sigma, dvals, pi, pj, tol, max_cycles):
    npairs = pi.shape[0]
    corr_i = np.zeros(npairs)
    corr_j = np.zeros(npairs)
    cycles = 0
    for cycle in range(max_cycles):
        cycles = cycle + 1
        max_change = 0.0
        for k in range(npairs):
            i = pi[k]
            j = pj[k]
            a = v[i] + corr_i[k]
            b = v[j] + corr_j[k]
            d = dvals[k]
            diff = a - b
            if diff > d:
                excess = diff - d
                ti = sigma[j] / (sigma[i] + sigma[j])
                na = a - ti * excess
                nb = b + (1.0 - ti) * excess
            elif diff < -d:
                excess = diff + d
                ti = sigma[j] / (sigma[i] + sigma[j])
                na = a - ti * excess
                nb = b + (1.0 - ti) * excess
            else:
                na = a
                nb = b
            corr_i[k] = a - na
            corr_j[k] = b - nb
            ci = na - v[i]
            cj = nb - v[j]
            if abs(ci) > max_change:
                max_change = abs(ci)
            if abs(cj) > max_change:
                max_change = abs(cj)
            v[i] = na
            v[j] = nb
        if max_change <= tol:
            break
    return cycles


def project_Ainf(g: np.ndarray, cset: LipschitzConstraintSet, weights: np.ndarray,
                 stop_tol: float = 1e-10, max_cycles: int = 100000):
    """sigma-weighted L2 projection of boundary data onto the Lipschitz set.

    This is the resolvent of dE_inf for every step size: the indicator's
    resolvent (I + lam dE_inf)^{-1} equals the metric projection.
    """
    g = np.asarray(g, dtype=float)
    dist = cset.geodesic.dist
    B = len(g)
    if dist.shape[0] != B or len(weights) != B:
        raise ValueError("field, weights and geodesic table sizes differ")
    iu, ju = np.triu_indices(B, k=1)
    v = g.copy()
    cycles = _dykstra_kernel(v, np.asarray(weights, dtype=float),
                             dist[iu, ju].copy(), iu.astype(np.int64),
                             ju.astype(np.int64), stop_tol, max_cycles)
    violation = cset.max_violation(v)
    if violation > cset.feasibility_tol():
        raise MaxIterations(violation, cycles)
    return v, {"cycles": cycles, "max_violation": violation}


class ProjectionResolvent:
    """Resolvent adapter around :func:`project_Ainf`; ignores the step size."""

    def __init__(self, cset: LipschitzConstraintSet, weights: np.ndarray,
                 stop_tol: float = 1e-10, max_cycles: int = 100000):
        self.cset = cset
        self.weights = np.asarray(weights, dtype=float)
        self.stop_tol = stop_tol
        self.max_cycles = max_cycles
        self.last_info = {}

    def __call__(self, g: np.ndarray, lam: float) -> np.ndarray:
        v, info = project_Ainf(g, self.cset, self.weights,
                               stop_tol=self.stop_tol, max_cycles=self.max_cycles)
        self.last_info = info
        return v


def example1_exact(t: float) -> np.ndarray:
    """Unit interval, unit source at x = 1, zero start: values at (x=0, x=1).

    Linear filling at x = 1 until the unit-slope constraint binds at t = 1,
    then both endpoints rise at speed 1/2.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t <= 1.0:
        return np.array([0.0, t])
    return np.array([(t - 1.0) / 2.0, (t - 1.0) / 2.0 + 1.0])


def example2_exact(u0_at_0: float, u0_at_1: float, t: float) -> np.ndarray:
    """Interval flow with nontrivial admissible start (values at x=0, x=1)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if abs(u0_at_1 - u0_at_0) > 1.0 + 1e-12:
        raise ValueError("initial data admits no 1-Lipschitz extension on (0,1)")
    t0 = u0_at_0 - u0_at_1 + 1.0
    if t <= t0:
        return np.array([u0_at_0, u0_at_1 + t])
    return np.array([u0_at_0 + (t - t0) / 2.0,
                     u0_at_1 + (t - t0) / 2.0 + t0])


def arc_weights(mesh: DomainMesh, gamma_nodes) -> np.ndarray:
    """Indicator of the boundary region spanned by the given boundary nodes.

    Returned per boundary node, scaled so that sum(sigma * w) equals the
    surface measure of the region: interior nodes of the arc get 1, its
    endpoints 1/2 (their sigma weight covers one half-edge outside the arc).
    In 1D (counting measure) the weights are simply 1 on the given nodes.
    """
    gamma = np.atleast_1d(np.asarray(gamma_nodes, dtype=int))
    if gamma.size == 0:
        raise ValueError("gamma must be nonempty")
    border = mesh.boundary_nodes
    pos = {int(n): k for k, n in enumerate(border)}
    try:
        idx = np.array([pos[int(n)] for n in gamma])
    except KeyError as exc:
        raise ValueError(f"node {exc} is not a boundary node") from None
    w = np.zeros(mesh.n_boundary)
    if mesh.dim == 1:
        w[idx] = 1.0
        return w
    B = mesh.n_boundary
    inarc = np.zeros(B, dtype=bool)
    inarc[idx] = True
    seg = np.linalg.norm(mesh.nodes[border] - mesh.nodes[np.roll(border, -1)], axis=1)
    # half-edge (k, k+1) belongs to the region iff both endpoints are marked
    for k in range(B):
        if inarc[k] and inarc[(k + 1) % B]:
            w[k] += 0.5 * seg[k] / mesh.boundary_weights[k]
            w[(k + 1) % B] += 0.5 * seg[k] / mesh.boundary_weights[(k + 1) % B]
    if not w.any():
        # isolated nodes span no edge; fall back to full node weights
        w[idx] = 1.0
    return w


@dataclass(frozen=True)
class SandpileState:
    """Level-measure data for the growth law u = (a(t) - d(., Gamma))_+.

    ``levels``/``masses`` store the left-continuous step function
    m(a) = sigma-measure of {d < a}; ``t_at_level`` is the accumulated
    (1/|Gamma|) integral of m at each breakpoint, so height a(t) is the exact
    piecewise-linear inverse.
    """

    gamma_nodes: np.ndarray
    gamma_mass: float
    boundary_dist: np.ndarray  # d(x_i, Gamma) per boundary node
    levels: np.ndarray         # sorted distinct distance values, starting at 0
    masses: np.ndarray         # m on (levels[k], levels[k+1]]
    t_at_level: np.ndarray
    total_measure: float

    def height(self, t: float) -> float:
        """Invert the accumulated level measure: a with t(a) = t."""
        if t < 0:
            raise ValueError("time must be nonnegative")
        k = int(np.searchsorted(self.t_at_level, t, side="right")) - 1
        if k >= len(self.levels) - 1:
            # past the largest distance the whole boundary grows uniformly
            k = len(self.levels) - 1
            return self.levels[k] + (t - self.t_at_level[k]) * self.gamma_mass / self.total_measure
        rate = self.gamma_mass / self.masses[k]
        return self.levels[k] + (t - self.t_at_level[k]) * rate


def make_sandpile_state(mesh: DomainMesh, gamma_nodes,
                        source_weights: np.ndarray | None = None) -> SandpileState:
    """Build the growth-law state for a source supported on a boundary region."""
    gamma = np.atleast_1d(np.asarray(gamma_nodes, dtype=int))
    w = arc_weights(mesh, gamma) if source_weights is None else np.asarray(source_weights, float)
    sigma = mesh.boundary_weights
    gamma_mass = float((sigma * w).sum())
    d = geodesic_distance(mesh, gamma)[mesh.boundary_nodes]
    order = np.argsort(d)
    levels = [0.0]
    masses = []
    acc = 0.0
    k = 0
    dvals = d[order]
    svals = sigma[order]
    while k < len(dvals):
        a = dvals[k]
        while k < len(dvals) and dvals[k] <= a + 1e-12:
            acc += svals[k]
            k += 1
        if k < len(dvals):
            levels.append(float(dvals[k]))
            masses.append(acc)
    levels = np.asarray(levels)
    # m on the final ray (a > max distance) is the whole boundary measure
    masses = np.asarray(masses + [float(sigma.sum())])
    t_at = np.zeros(len(levels))
    for i in range(1, len(levels)):
        t_at[i] = t_at[i - 1] + (levels[i] - levels[i - 1]) * masses[i - 1] / gamma_mass
    return SandpileState(
        gamma_nodes=gamma,
        gamma_mass=gamma_mass,
        boundary_dist=d,
        levels=levels,
        masses=masses,
        t_at_level=t_at,
        total_measure=float(sigma.sum()),
    )


def sandpile_exact(state: SandpileState, mesh: DomainMesh, t: float) -> np.ndarray:
    """Exact growth-law solution (a(t) - d)_+ on the boundary nodes."""
    a = state.height(t)
    return np.maximum(a - state.boundary_dist, 0.0)


def uniform_phase_speed(state: SandpileState) -> float:
    """Late-time growth speed once the pile covers the whole boundary."""
    return state.gamma_mass / state.total_measure
