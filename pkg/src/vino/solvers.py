"""Same-mesh FEM reference solvers: dataset targets and minimality oracles.

The solvers assemble exactly the element matrices the variational losses use,
so the discrete solutions returned here are the exact minimizers of those
losses over interior nodal values.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import elements
from .grids import Field, Grid1D, Grid2D
from .losses import (ProblemSpec, element_center_values, edge_load_vector,
                     physics_loss, LossKind)
from .tensor import Tensor

# acceptance oracles need interior loss gradients at 1e-10 relative, so the
# solver runs two orders tighter than that bound
CG_TOL = 1e-12


def pcg(A: sp.csr_matrix, b: np.ndarray, tol: float = CG_TOL,
        maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients to a relative residual."""
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    norm_b = np.linalg.norm(b)
    x = np.zeros_like(b)
    if norm_b == 0.0:
        return x
    inv_diag = 1.0 / A.diagonal()
    r = b.copy()
    z = inv_diag * r
    d = z.copy()
    rz = float(r @ z)
    for _ in range(maxiter):
        Ad = A @ d
        alpha = rz / float(d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        if np.linalg.norm(r) <= tol * norm_b:
            return x
        z = inv_diag * r
        rz_new = float(r @ z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise RuntimeError(f"CG did not converge within {maxiter} iterations; "
                       f"relative residual {np.linalg.norm(r) / norm_b:.3e}")


# -- 1-D two-point boundary value problem ---------------------------------------

def solve_antiderivative_1d(p: Field) -> Field:
    """Solve s'' + p = 0, s(0) = s(1) = 0 by direct tridiagonal elimination."""
    grid = p.grid
    if not isinstance(grid, Grid1D):
        raise ValueError("solve_antiderivative_1d needs a 1-D field")
    if grid.n < 3:
        raise ValueError("need at least 3 nodes")
    n, h = grid.n, grid.h
    pv = p.values

    # consistent right-hand side M p from the assembled element mass matrices
    rhs = np.zeros(n)
    rhs[0] = h / 6.0 * (2.0 * pv[0] + pv[1])
    rhs[-1] = h / 6.0 * (pv[-2] + 2.0 * pv[-1])
    rhs[1:-1] = h / 6.0 * (pv[:-2] + 4.0 * pv[1:-1] + pv[2:])

    m = n - 2
    diag = np.full(m, 2.0 / h)
    off = -1.0 / h
    b = rhs[1:-1].copy()
    # Thomas algorithm (constant coefficients)
    cp = np.empty(m)
    cp[0] = off / diag[0]
    b[0] = b[0] / diag[0]
    for i in range(1, m):
        denom = diag[i] - off * cp[i - 1]
        cp[i] = off / denom
        b[i] = (b[i] - off * b[i - 1]) / denom
    for i in range(m - 2, -1, -1):
        b[i] -= cp[i] * b[i + 1]
    s = np.zeros(n)
    s[1:-1] = b

    resid = (2.0 * s[1:-1] - s[:-2] - s[2:]) / h - rhs[1:-1]
    # backward-stable criterion: the 1/h-scaled stiffness makes a pure
    # ||rhs||-relative bound unattainable in float64 on fine grids
    scale = max(np.abs(rhs).max(), (4.0 / h) * np.abs(s).max(), 1e-300)
    if np.abs(resid).max() > 1e-12 * scale:
        raise RuntimeError(f"tridiagonal solve residual {np.abs(resid).max():.3e} "
                           f"exceeds 1e-12 * {scale:.3e}")
    return Field(grid, s)


# -- 2-D diffusion (Poisson / Darcy) --------------------------------------------

def _element_connectivity(grid: Grid2D) -> np.ndarray:
    """Node ids of every element, counterclockwise from lower-left; [E, 4]."""
    ix, iy = np.meshgrid(np.arange(grid.nx - 1), np.arange(grid.ny - 1))
    base = (iy * grid.nx + ix).ravel()
    return np.stack([base, base + 1, base + grid.nx + 1, base + grid.nx], axis=1)


def _boundary_mask(grid: Grid2D) -> np.ndarray:
    mask = np.zeros((grid.ny, grid.nx), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask.ravel()


def _assemble_scalar(grid: Grid2D, pe: np.ndarray) -> sp.csr_matrix:
    geom = elements.ElementGeom2D(grid.hx / 2.0, grid.hy / 2.0)
    K = elements.stiffness_2d(geom)
    conn = _element_connectivity(grid)
    vals = pe.ravel()[:, None, None] * K[None]
    rows = np.repeat(conn[:, :, None], 4, axis=2)
    cols = np.repeat(conn[:, None, :], 4, axis=1)
    n = grid.n_nodes
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(n, n)).tocsr()


def _mass_rhs(grid: Grid2D, f_nodal: np.ndarray) -> np.ndarray:
    geom = elements.ElementGeom2D(grid.hx / 2.0, grid.hy / 2.0)
    M = elements.mass_2d(geom)
    conn = _element_connectivity(grid)
    fe = f_nodal.ravel()[conn]
    rhs = np.zeros(grid.n_nodes)
    np.add.at(rhs, conn, fe @ M.T)
    return rhs


def _solve_diffusion(grid: Grid2D, pe: np.ndarray, f_nodal: np.ndarray) -> np.ndarray:
    if grid.nx < 3 or grid.ny < 3:
        raise ValueError("need at least 3 nodes per axis")
    A = _assemble_scalar(grid, pe)
    rhs = _mass_rhs(grid, f_nodal)
    boundary = _boundary_mask(grid)
    free = np.flatnonzero(~boundary)
    x = np.zeros(grid.n_nodes)
    x[free] = pcg(A[free][:, free].tocsr(), rhs[free])
    return x.reshape(grid.ny, grid.nx)


def solve_poisson_2d(f: Field) -> Field:
    """laplace(s) + f = 0 on the unit square with zero boundary values."""
    grid = f.grid
    pe = np.ones((grid.ny - 1, grid.nx - 1))
    return Field(grid, _solve_diffusion(grid, pe, f.values))


def solve_darcy_2d(p: Field, f: float = 1.0) -> Field:
    """-div(p grad s) = f with piecewise conductivity, element-centered."""
    grid = p.grid
    if np.any(p.values <= 0.0):
        raise ValueError("Darcy conductivity must be strictly positive")
    pe = element_center_values(p.values[None])[0]
    return Field(grid, _solve_diffusion(grid, pe, np.full((grid.ny, grid.nx), f)))


# -- plane-stress elasticity -----------------------------------------------------

def solve_elasticity_2d(E: Field, traction: Field, nu: float = 1.0 / 3.0) -> np.ndarray:
    """Beam clamped on both vertical edges, y-traction on the top edge.

    Returns displacements shaped [2, ny, nx] (u, v channels).
    """
    grid = E.grid
    geom = elements.ElementGeom2D(grid.hx / 2.0, grid.hy / 2.0)
    K8 = elements.elasticity_stiffness_2d(geom, elements.plane_stress_D(nu))
    pe = element_center_values(E.values[None])[0]
    conn = _element_connectivity(grid)
    dofs = np.empty((conn.shape[0], 8), dtype=np.int64)
    dofs[:, 0::2] = 2 * conn
    dofs[:, 1::2] = 2 * conn + 1
    vals = pe.ravel()[:, None, None] * K8[None]
    rows = np.repeat(dofs[:, :, None], 8, axis=2)
    cols = np.repeat(dofs[:, None, :], 8, axis=1)
    ndof = 2 * grid.n_nodes
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                      shape=(ndof, ndof)).tocsr()

    rhs = np.zeros(ndof)
    load = edge_load_vector(traction.values, grid.hx)
    top_nodes = (grid.ny - 1) * grid.nx + np.arange(grid.nx)
    rhs[2 * top_nodes + 1] = load

    clamped = np.zeros((grid.ny, grid.nx), dtype=bool)
    clamped[:, 0] = clamped[:, -1] = True
    fixed = np.repeat(clamped.ravel(), 2)
    free = np.flatnonzero(~fixed)
    x = np.zeros(ndof)
    x[free] = pcg(A[free][:, free].tocsr(), rhs[free])
    return np.stack([x[0::2].reshape(grid.ny, grid.nx),
                     x[1::2].reshape(grid.ny, grid.nx)])


# -- functional evaluation --------------------------------------------------------

def functional_at(solution: np.ndarray, problem: ProblemSpec,
                  inputs: dict[str, np.ndarray]) -> float:
    """Value of the discrete variational functional used by the matching loss.

    `solution` is one sample shaped [channels, grid...]; inputs are the
    per-sample parameter fields without a batch axis.
    """
    solution = np.asarray(solution, dtype=np.float64)
    if solution.ndim == (1 if isinstance(problem.grid, Grid1D) else 2):
        solution = solution[None]
    pred = Tensor(solution[None])
    batched = {k: np.asarray(v, dtype=np.float64)[None] for k, v in inputs.items()}
    return physics_loss(problem, LossKind("vino"), pred, batched).item()
