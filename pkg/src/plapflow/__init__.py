"""Boundary flows driven by the p-Dirichlet energy and their p -> infinity limit.

The package is organized around a small set of immutable data objects
(meshes, boundary fields, trajectories) and pure operations on them:

- :mod:`plapflow.mesh`      -- interval / polygon meshes and geodesic distances
- :mod:`plapflow.penergy`   -- p-Dirichlet energy, extensions and proximal maps
- :mod:`plapflow.limitdyn`  -- projection onto the 1-Lipschitz set and exact
  closed-form reference solutions (including the sandpile growth law)
- :mod:`plapflow.flow`      -- implicit-Euler integration of u_t + dPsi(u) = f
- :mod:`plapflow.transport` -- discrete Monge-Kantorovich primal/dual solvers
- :mod:`plapflow.mosco`     -- resolvent-convergence and energy-bound reports
- :mod:`plapflow.cli`       -- command line front end
"""

from plapflow.mesh import (
    DomainMesh,
    GeodesicTable,
    build_interval_mesh,
    build_polygon_mesh,
    boundary_pairwise_distances,
    geodesic_distance,
)
from plapflow.penergy import PEnergyConfig, discrete_energy, energy_Ep, p_extension, prox_Ep
from plapflow.limitdyn import (
    LipschitzConstraintSet,
    SandpileState,
    example1_exact,
    example2_exact,
    make_sandpile_state,
    project_Ainf,
    sandpile_exact,
    uniform_phase_speed,
)
from plapflow.flow import SourceTerm, Trajectory, compare_trajectories, diagnostics, evolve
from plapflow.transport import solve_dual, solve_primal, verify_potential

__all__ = [
    "DomainMesh",
    "GeodesicTable",
    "build_interval_mesh",
    "build_polygon_mesh",
    "boundary_pairwise_distances",
    "geodesic_distance",
    "PEnergyConfig",
    "discrete_energy",
    "energy_Ep",
    "p_extension",
    "prox_Ep",
    "LipschitzConstraintSet",
    "SandpileState",
    "example1_exact",
    "example2_exact",
    "make_sandpile_state",
    "project_Ainf",
    "sandpile_exact",
    "uniform_phase_speed",
    "SourceTerm",
    "Trajectory",
    "compare_trajectories",
    "diagnostics",
    "evolve",
    "solve_dual",
    "solve_primal",
    "verify_potential",
]

__version__ = "0.1.0"
