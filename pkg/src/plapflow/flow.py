"""Implicit-Euler (minimizing movement) integration of u_t + dPsi(u) = f.

The integrator only sees a resolvent callable (g, lam) -> boundary field, so
the same loop drives both the p-energy flow (via the proximal map) and the
limit flow (via the Lipschitz projection, which ignores the step size).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from plapflow.mesh import DomainMesh
from plapflow.penergy import PEnergyConfig, discrete_energy, p_extension


@dataclass(frozen=True)
class SourceTerm:
    """Boundary source f(., t): a time evaluator plus its declared regularity."""

    evaluator: object                   # t -> (B,) array
    regularity: str = "continuous"      # "piecewise-constant" | "continuous"

    def __post_init__(self):
        if self.regularity not in ("piecewise-constant", "continuous"):
            raise ValueError("unknown regularity flag")

    def __call__(self, t: float) -> np.ndarray:
        v = np.asarray(self.evaluator(t), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"source is not finite at t={t}")
        return v


def constant_source(values) -> SourceTerm:
    vals = np.asarray(values, dtype=float)
    return SourceTerm(evaluator=lambda t: vals, regularity="continuous")


def indicator_source(mesh: DomainMesh, gamma_nodes, rate: float = 1.0) -> SourceTerm:
    """chi_Gamma source; endpoint nodes of the arc carry half weight so the
    injected sigma-mass rate equals ``rate`` times the measure of the region."""
    from plapflow.limitdyn import arc_weights

    vals = rate * arc_weights(mesh, gamma_nodes)
    return SourceTerm(evaluator=lambda t: vals, regularity="continuous")


def table_source(times, values, interpolation: str = "previous") -> SourceTerm:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(times) != len(values):
        raise ValueError("times and values length mismatch")

    if interpolation == "previous":
        def ev(t):
            k = max(0, int(np.searchsorted(times, t, side="right")) - 1)
            return values[k]
        return SourceTerm(evaluator=ev, regularity="piecewise-constant")
    if interpolation == "linear":
        def ev(t):
            return np.array([np.interp(t, times, values[:, j])
                             for j in range(values.shape[1])])
        return SourceTerm(evaluator=ev, regularity="continuous")
    raise ValueError("interpolation must be 'previous' or 'linear'")


@dataclass(frozen=True)
class Trajectory:
    """Time grid, boundary states and per-step solver metadata."""

    times: np.ndarray          # (K+1,)
    states: np.ndarray         # (K+1, B)
    step_meta: tuple = ()

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)
        if len(self.times) != len(self.states):
            raise ValueError("times/states length mismatch")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite states")


@dataclass(frozen=True)
class BoundsReport:
    """A-priori quantities tracked along a p-energy trajectory."""

    sup_abs_u: float
    time_integral_ut_sq: float
    grad_p_norm: float
    mass_balance_residual: float


class StepFailure(RuntimeError):
    """Resolvent failure, annotated with the step at which it occurred."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"resolvent failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


def time_grid(T: float, tau: float) -> np.ndarray:
    if tau <= 0 or T <= 0 or tau > T + 1e-15:
        raise ValueError("need 0 < tau <= T")
    k = int(np.floor(T / tau + 1e-12))
    times = tau * np.arange(k + 1)
    if times[-1] < T - 1e-12 * max(1.0, T):
        times = np.append(times, T)
    else:
        times[-1] = T
    return times


def evolve(resolvent, u0: np.ndarray, f: SourceTerm, T: float, tau: float) -> Trajectory:
    """Backward Euler for u_t + dPsi(u) = f with uniform step tau.

    Each step solves u_{k+1} = resolvent(u_k + tau f(t_{k+1}), tau); the last
    step is truncated to land on T exactly.
    """
    u = np.asarray(u0, dtype=float).copy()
    if not np.all(np.isfinite(u)):
        raise ValueError("initial data must be finite")
    times = time_grid(T, tau)
    states = [u.copy()]
    meta = []
    for k in range(len(times) - 1):
        step = times[k + 1] - times[k]
        g = u + step * f(times[k + 1])
        try:
            u = np.asarray(resolvent(g, step), dtype=float)
        except Exception as exc:  # noqa: BLE001 - annotate and rethrow
            raise StepFailure(k, exc) from exc
        states.append(u.copy())
        meta.append(dict(getattr(resolvent, "last_info", {})))
    return Trajectory(times=times, states=np.array(states), step_meta=tuple(meta))


def diagnostics(traj: Trajectory, mesh: DomainMesh, cfg: PEnergyConfig,
                f: SourceTerm) -> BoundsReport:
    """Discrete counterparts of the a-priori bounds for a p-energy trajectory."""
    sigma = mesh.boundary_weights
    if traj.states.shape[1] != mesh.n_boundary:
        raise ValueError("trajectory does not match the mesh boundary")
    taus = np.diff(traj.times)
    du = np.diff(traj.states, axis=0) / taus[:, None]
    ut_sq = float((taus * (sigma * du * du).sum(axis=1)).sum())

    grad_int = 0.0
    warm = None
    for k in range(1, len(traj.times)):
        v = p_extension(mesh, traj.states[k], cfg, v0=warm)
        warm = v
        grad_int += taus[k - 1] * cfg.p * discrete_energy(mesh, v, cfg)
    grad_p_norm = float(grad_int ** (1.0 / cfg.p)) if grad_int > 0 else 0.0

    injected = sum(taus[k] * float((sigma * f(traj.times[k + 1])).sum())
                   for k in range(len(taus)))
    mass_res = float((sigma * traj.states[-1]).sum()
                     - (sigma * traj.states[0]).sum() - injected)
    return BoundsReport(
        sup_abs_u=float(np.abs(traj.states).max()),
        time_integral_ut_sq=ut_sq,
        grad_p_norm=grad_p_norm,
        mass_balance_residual=mass_res,
    )


def compare_trajectories(a: Trajectory, b: Trajectory, weights: np.ndarray) -> float:
    """sup over grid times of the sigma-weighted L2 distance between states."""
    if a.states.shape != b.states.shape or not np.allclose(a.times, b.times,
                                                           rtol=0, atol=1e-12):
        raise ValueError("trajectories must share the time grid and boundary")
    diff = a.states - b.states
    return float(np.sqrt((weights * diff * diff).sum(axis=1)).max())
