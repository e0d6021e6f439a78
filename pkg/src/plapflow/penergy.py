"""Discrete p-Dirichlet energy: evaluation, constrained extension, proximal map.

Fields are continuous piecewise-linear on the mesh, so the gradient is
constant per element and the energy sum(|T| (|grad v|^2 + eps^2)^{p/2} / p)
is exact on the discrete space.  Minimization uses damped Newton with
continuation in the exponent; the Hessian degenerates where grad v = 0,
which the small regularization eps and a diagonal ridge keep solvable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from plapflow.mesh import DomainMesh

_DENSE_LIMIT = 400  # free dofs below this use a dense factorization


class NonConvergence(RuntimeError):
    """Newton failed to reach the residual tolerance within max_iter."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(f"residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


def _default_ladder(p: float) -> tuple:
    ladder = [2.0]
    while ladder[-1] * 2 < p:
        ladder.append(ladder[-1] * 2)
    if ladder[-1] != p:
        ladder.append(float(p))
    return tuple(ladder)


@dataclass(frozen=True)
class PEnergyConfig:
    """Exponent and solver knobs for the p-Dirichlet energy."""

    p: float
    eps_reg: float = 1e-8
    newton_tol: float = 1e-10
    max_iter: int = 200
    continuation: tuple = ()

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("exponent must be >= 2")
        if self.eps_reg < 0:
            raise ValueError("regularization must be nonnegative")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        ladder = tuple(self.continuation) or _default_ladder(self.p)
        if list(ladder) != sorted(set(ladder)) or ladder[-1] != self.p:
            raise ValueError("continuation ladder must be strictly increasing and end at p")
        object.__setattr__(self, "continuation", ladder)


class _ElementOps:
    """Per-element constant-gradient operator for P1 fields."""

    def __init__(self, mesh: DomainMesh):
        self.mesh = mesh
        elem = mesh.elements
        nodes = mesh.nodes
        if mesh.dim == 1:
            length = (nodes[elem[:, 1], 0] - nodes[elem[:, 0], 0])
            g = np.empty((len(elem), 1, 2))
            g[:, 0, 0] = -1.0 / length
            g[:, 0, 1] = 1.0 / length
            self.G = g
        else:
            a = nodes[elem[:, 0]]
            jac = np.stack([nodes[elem[:, 1]] - a, nodes[elem[:, 2]] - a], axis=1)  # rows = edges
            jinv = np.linalg.inv(jac)
            # grad v = E^{-1} [v1-v0, v2-v0] with E rows the edge vectors
            g = np.empty((len(elem), 2, 3))
            g[:, :, 1] = jinv[:, :, 0]
            g[:, :, 2] = jinv[:, :, 1]
            g[:, :, 0] = -(g[:, :, 1] + g[:, :, 2])
            self.G = g
        self.elem = elem
        self.vol = mesh.volumes

    def grads(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("mde,me->md", self.G, v[self.elem])

    def energy(self, v, p, eps):
        g = self.grads(v)
        s = (g * g).sum(axis=1) + eps * eps
        return float((self.vol * s ** (p / 2)).sum() / p)

    def gradient(self, v, p, eps):
        g = self.grads(v)
        s = (g * g).sum(axis=1) + eps * eps
        w = s ** (p / 2 - 1)
        contrib = (self.vol * w)[:, None] * np.einsum("mde,md->me", self.G, g)
        out = np.zeros(self.mesh.n_nodes)
        np.add.at(out, self.elem, contrib)
        return out

    def hessian(self, v, p, eps) -> sp.csr_matrix:
        g = self.grads(v)
        s = (g * g).sum(axis=1) + eps * eps
        w = s ** (p / 2 - 1)
        gtg = np.einsum("mde,mdf->mef", self.G, self.G)
        btg = np.einsum("mde,md->me", self.G, g)
        blocks = (self.vol * w)[:, None, None] * gtg
        if p != 2:
            coef = self.vol * (p - 2) * s ** (p / 2 - 2)
            blocks = blocks + coef[:, None, None] * np.einsum("me,mf->mef", btg, btg)
        k = self.elem.shape[1]
        rows = np.repeat(self.elem, k, axis=1).ravel()
        cols = np.tile(self.elem, (1, k)).ravel()
        n = self.mesh.n_nodes
        return sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


_OPS_CACHE: dict = {}


def _ops(mesh: DomainMesh) -> _ElementOps:
    ops = _OPS_CACHE.get(id(mesh))
    if ops is None or ops.mesh is not mesh:
        ops = _ElementOps(mesh)
        _OPS_CACHE[id(mesh)] = ops
    return ops


def discrete_energy(mesh: DomainMesh, v: np.ndarray, cfg: PEnergyConfig,
                    p: float | None = None) -> float:
    """Energy of the piecewise-linear field ``v`` at exponent p."""
    return _ops(mesh).energy(np.asarray(v, dtype=float), p or cfg.p, cfg.eps_reg)


def energy_gradient(mesh: DomainMesh, v: np.ndarray, cfg: PEnergyConfig,
                    p: float | None = None) -> np.ndarray:
    return _ops(mesh).gradient(np.asarray(v, dtype=float), p or cfg.p, cfg.eps_reg)


def _solve(H, rhs):
    if H.shape[0] <= _DENSE_LIMIT:
        return np.linalg.solve(H.toarray(), rhs)
    return spla.spsolve(H.tocsc(), rhs)


def _newton(mesh, v0, p, cfg, free, quad_w, quad_c):
    """Minimize energy_p(v) + 0.5 sum(quad_w (v - quad_c)^2) over v[free]."""
    ops = _ops(mesh)
    eps = cfg.eps_reg
    v = v0.copy()

    def fval(v):
        return ops.energy(v, p, eps) + 0.5 * float((quad_w * (v - quad_c) ** 2).sum())

    # the residual scales with the quadratic weight (1/lam for the prox) and
    # with the data (|grad| ~ |v|^{p-1}), so the tolerance is relative to
    # both scales; for O(1) inputs it reduces to the configured value
    qscale = float(quad_w.max()) if quad_w.size else 1.0
    tol = cfg.newton_tol * max(1.0, qscale)
    hmin = float(mesh.edge_lengths.min())
    eps_mach = np.finfo(float).eps
    f = fval(v)
    it = 0
    residual = np.inf
    for it in range(cfg.max_iter):
        grad = ops.gradient(v, p, eps) + quad_w * (v - quad_c)
        residual = float(np.abs(grad[free]).max()) if free.any() else 0.0
        if it == 0:
            tol = cfg.newton_tol * max(1.0, qscale, residual)
        # individual gradient terms scale like p*f/h; their rounding noise
        # is an absolute floor below which the residual cannot be driven
        floor = 128.0 * eps_mach * p * (abs(f) + 1.0) / hmin
        if residual <= max(tol, floor):
            return v, it, residual
        H = ops.hessian(v, p, eps) + sp.diags(quad_w)
        Hf = H[free][:, free]
        rhs = -grad[free]
        ridge = 0.0
        while True:
            try:
                step = _solve(Hf + ridge * sp.eye(Hf.shape[0]) if ridge else Hf, rhs)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)) and float(step @ rhs) > 0:
                break
            ridge = max(10 * ridge, 1e-12 * max(1.0, abs(Hf.diagonal()).max()))
            if ridge > 1e12:
                raise NonConvergence(residual, it)
        direction = np.zeros_like(v)
        direction[free] = step
        slope = float(grad @ direction)
        # near the optimum the true decrease drops below the rounding noise
        # of f; without the noise term the test would reject full steps and
        # the residual would stall geometrically above the tolerance
        noise = 32.0 * np.finfo(float).eps * (abs(f) + 1.0)
        t = 1.0
        for _ in range(60):
            trial = v + t * direction
            ft = fval(trial)
            if ft <= f + 1e-4 * t * slope + noise:
                v, f = trial, ft
                break
            t *= 0.5
        else:
            raise NonConvergence(residual, it)
    grad = ops.gradient(v, p, eps) + quad_w * (v - quad_c)
    residual = float(np.abs(grad[free]).max()) if free.any() else 0.0
    floor = 128.0 * eps_mach * p * (abs(f) + 1.0) / hmin
    if residual <= max(tol, floor):
        return v, cfg.max_iter, residual
    raise NonConvergence(residual, cfg.max_iter)


def _continuation(mesh, v0, cfg, free, quad_w, quad_c, warm: bool):
    """Warm-started Newton; fall back to the exponent ladder if direct fails."""
    if warm:
        try:
            return _newton(mesh, v0, cfg.p, cfg, free, quad_w, quad_c)
        except NonConvergence:
            pass
    v = v0.copy()
    for pe in cfg.continuation:
        v, it, res = _newton(mesh, v, pe, cfg, free, quad_w, quad_c)
    return v, it, res


def p_extension(mesh: DomainMesh, u: np.ndarray, cfg: PEnergyConfig,
                v0: np.ndarray | None = None) -> np.ndarray:
    """Minimal p-energy extension of boundary data ``u`` into the mesh."""
    u = np.asarray(u, dtype=float)
    free = np.ones(mesh.n_nodes, dtype=bool)
    free[mesh.boundary_nodes] = False
    warm = v0 is not None
    if v0 is None:
        v0 = np.full(mesh.n_nodes,
                     float((mesh.boundary_weights * u).sum() / mesh.boundary_weights.sum()))
    else:
        v0 = np.asarray(v0, dtype=float).copy()
    v0[mesh.boundary_nodes] = u
    quad_w = np.zeros(mesh.n_nodes)
    v, _, _ = _continuation(mesh, v0, cfg, free, quad_w, v0, warm)
    return v


def energy_Ep(mesh: DomainMesh, u: np.ndarray, cfg: PEnergyConfig) -> float:
    """E_p of boundary data: the energy of its minimal extension."""
    return discrete_energy(mesh, p_extension(mesh, u, cfg), cfg)


def prox_Ep(mesh: DomainMesh, g: np.ndarray, lam: float, cfg: PEnergyConfig,
            v0: np.ndarray | None = None, return_full: bool = False):
    """Resolvent (I + lam dE_p)^{-1} g over boundary data.

    Minimizes energy(v) + (1/2 lam) sum(sigma_i (v_i - g_i)^2) over all nodal
    values, boundary unpinned, and returns the boundary trace.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    g = np.asarray(g, dtype=float)
    free = np.ones(mesh.n_nodes, dtype=bool)
    quad_w = np.zeros(mesh.n_nodes)
    quad_w[mesh.boundary_nodes] = mesh.boundary_weights / lam
    quad_c = np.zeros(mesh.n_nodes)
    quad_c[mesh.boundary_nodes] = g
    warm = v0 is not None
    if v0 is None:
        v0 = np.full(mesh.n_nodes,
                     float((mesh.boundary_weights * g).sum() / mesh.boundary_weights.sum()))
        v0 = v0.copy()
        v0[mesh.boundary_nodes] = g
    else:
        v0 = np.asarray(v0, dtype=float).copy()
    v, it, res = _continuation(mesh, v0, cfg, free, quad_w, quad_c, warm)
    trace = v[mesh.boundary_nodes]
    if return_full:
        return trace, v, {"iterations": it, "residual": res}
    return trace


class PProxResolvent:
    """Callable resolvent of dE_p with warm starting across calls.

    Suitable as the ``resolvent`` argument of :func:`plapflow.flow.evolve`.
    """

    def __init__(self, mesh: DomainMesh, cfg: PEnergyConfig):
        self.mesh = mesh
        self.cfg = cfg
        self._warm = None
        self.last_info = {}

    def __call__(self, g: np.ndarray, lam: float) -> np.ndarray:
        trace, full, info = prox_Ep(self.mesh, g, lam, self.cfg,
                                    v0=self._warm, return_full=True)
        self._warm = full
        self.last_info = info
        return trace


def gradient_check(mesh: DomainMesh, v: np.ndarray, cfg: PEnergyConfig,
                   rng=None, n_coords: int = 20) -> float:
    """Max relative mismatch between the analytic gradient and central differences."""
    if cfg.eps_reg <= 0:
        raise ValueError("gradient check needs a smooth energy (eps_reg > 0)")
    rng = np.random.default_rng(rng)
    v = np.asarray(v, dtype=float)
    grad = energy_gradient(mesh, v, cfg)
    scale = max(1.0, float(np.abs(v).max()))
    step = 1e-6 * scale
    coords = rng.choice(mesh.n_nodes, size=min(n_coords, mesh.n_nodes), replace=False)
    # floor the denominator at 1e-6 of the gradient scale so FD roundoff on
    # near-zero entries does not dominate the relative error
    floor = 1e-6 * max(1e-6, float(np.abs(grad).max()))
    worst = 0.0
    for i in coords:
        vp = v.copy(); vp[i] += step
        vm = v.copy(); vm[i] -= step
        fd = (discrete_energy(mesh, vp, cfg) - discrete_energy(mesh, vm, cfg)) / (2 * step)
        denom = max(abs(grad[i]), abs(fd), floor)
        worst = max(worst, abs(grad[i] - fd) / denom)
    return worst
