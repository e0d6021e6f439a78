"""Computable convergence checks: resolvents along a p ladder, energy bounds.

Epigraph convergence of the energies is not a finite computation; what is
computable is pointwise convergence of the resolvents to the Lipschitz
projection, and the vanishing upper bound |Omega|/p for the energy of a
feasible state (realized by the constant recovery sequence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from plapflow.limitdyn import LipschitzConstraintSet, project_Ainf
from plapflow.mesh import DomainMesh, GeodesicTable
from plapflow.penergy import NonConvergence, PEnergyConfig, energy_Ep, prox_Ep


@dataclass(frozen=True)
class MoscoReport:
    lambdas: tuple
    p_ladder: tuple
    resolvent_errors: np.ndarray  # (len(lambdas), len(p_ladder)); nan = solver failure
    cell_errors: tuple            # (lambda, p, message) for failed cells
    projection: np.ndarray
    prox_violations: np.ndarray   # worst pairwise violation of each prox output


def _sigma_norm(x, sigma):
    return float(np.sqrt((sigma * x * x).sum()))


def resolvent_convergence_test(g: np.ndarray, lambdas, p_ladder, mesh: DomainMesh,
                               geo: GeodesicTable, cfg: PEnergyConfig | None = None
                               ) -> MoscoReport:
    """Compare (I + lam dE_p)^{-1} g with the Lipschitz projection of g.

    The error table should decrease along each row as p grows; failed solver
    cells are recorded, not fatal.
    """
    g = np.asarray(g, dtype=float)
    lambdas = tuple(float(l) for l in lambdas)
    p_ladder = tuple(float(p) for p in p_ladder)
    if any(l <= 0 for l in lambdas):
        raise ValueError("lambdas must be positive")
    if list(p_ladder) != sorted(set(p_ladder)) or p_ladder[0] < 2:
        raise ValueError("p ladder must be increasing with entries >= 2")
    base = cfg or PEnergyConfig(p=2)
    sigma = mesh.boundary_weights
    cset = LipschitzConstraintSet(geodesic=geo)
    proj, _ = project_Ainf(g, cset, sigma)

    errors = np.full((len(lambdas), len(p_ladder)), np.nan)
    violations = np.full((len(lambdas), len(p_ladder)), np.nan)
    failures = []
    for a, lam in enumerate(lambdas):
        for b, p in enumerate(p_ladder):
            cfg_p = PEnergyConfig(p=p, eps_reg=base.eps_reg,
                                  newton_tol=base.newton_tol, max_iter=base.max_iter)
            try:
                prox = prox_Ep(mesh, g, lam, cfg_p)
            except NonConvergence as exc:
                failures.append((lam, p, str(exc)))
                continue
            errors[a, b] = _sigma_norm(prox - proj, sigma)
            violations[a, b] = cset.max_violation(prox)
    return MoscoReport(
        lambdas=lambdas,
        p_ladder=p_ladder,
        resolvent_errors=errors,
        cell_errors=tuple(failures),
        projection=proj,
        prox_violations=violations,
    )


def limsup_condition_check(u: np.ndarray, p_ladder, mesh: DomainMesh,
                           cfg: PEnergyConfig | None = None,
                           geo: GeodesicTable | None = None,
                           slack_ratio: float = 1.0) -> list:
    """Energy of a feasible state along the p ladder against the |Omega|/p bound.

    ``slack_ratio`` absorbs the grid-metric overestimate of the geodesic
    table: discrete feasibility only guarantees slightly-more-than-1-Lipschitz
    continuum extensions, so the bound is checked with factor slack_ratio**p.
    """
    u = np.asarray(u, dtype=float)
    base = cfg or PEnergyConfig(p=2)
    if geo is not None:
        cset = LipschitzConstraintSet(geodesic=geo)
        if not cset.is_feasible(u):
            raise ValueError("state violates the pairwise Lipschitz constraints")
    vol = mesh.volume()
    rows = []
    for p in p_ladder:
        cfg_p = PEnergyConfig(p=float(p), eps_reg=base.eps_reg,
                              newton_tol=base.newton_tol, max_iter=base.max_iter)
        e = energy_Ep(mesh, u, cfg_p)
        bound = (slack_ratio ** p) * vol / p
        rows.append({
            "p": float(p),
            "energy": e,
            "bound": bound,
            "ratio": e * p / vol,
            "passed": e <= bound + 1e-10,
        })
    return rows
