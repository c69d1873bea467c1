"""Gaussian random field sampling for input-function generation.

Fields are drawn as mean + L z with L the Cholesky factor of the squared
exponential covariance over all grid nodes.  Dense factorization keeps the
sampler exact; grids are capped at 64^2 nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grids import Field, Grid, Grid1D, Grid2D
from .tensor import RngStream

MAX_NODES = 64 * 64
MAX_JITTER = 1e-4

# Darcy two-phase conductivity: values with the benchmark ratio of 4
DARCY_LOW = 3.0
DARCY_HIGH = 12.0

# traction / modulus generation constants for the porous-beam problem
TRACTION_STD = 0.15
TRACTION_MEAN = 0.2
TRACTION_LENGTH_SCALE = 0.1
MODULUS_LENGTH_SCALE = 0.025
MODULUS_RANGE = (20.0, 380.0)
MODULUS_SCALE = MODULUS_RANGE[1]  # global normalization constant for model inputs


@dataclass(frozen=True)
class GrfSpec:
    length_scale: float
    mean: float
    grid: Grid
    jitter: float = 1e-8

    def __post_init__(self):
        if self.length_scale <= 0:
            raise ValueError(f"length scale must be positive, got {self.length_scale}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be nonnegative, got {self.jitter}")


def covariance(spec: GrfSpec) -> np.ndarray:
    """Dense covariance exp(-|xi - xj|^2 / (2 l^2)) + jitter on the diagonal."""
    pts = spec.grid.points()
    n = pts.shape[0]
    if n > MAX_NODES:
        raise ValueError(f"dense GRF sampling limited to {MAX_NODES} nodes, grid has {n}")
    sq = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    K = np.exp(-sq / (2.0 * spec.length_scale ** 2))
    K[np.diag_indices(n)] += spec.jitter
    return K


def _field_shape(grid: Grid) -> tuple[int, ...]:
    return (grid.n,) if isinstance(grid, Grid1D) else (grid.ny, grid.nx)


class GrfSampler:
    """Holds the Cholesky factor of one GrfSpec and draws fields from it."""

    def __init__(self, spec: GrfSpec):
        self.spec = spec
        K = covariance(spec)
        jitter = max(spec.jitter, 1e-12)
        n = K.shape[0]
        while True:
            try:
                self.chol = np.linalg.cholesky(K)
                break
            except np.linalg.LinAlgError:
                if jitter > MAX_JITTER:
                    raise np.linalg.LinAlgError(
                        f"GRF covariance not factorizable even with jitter {jitter:.1e} "
                        f"(length scale {spec.length_scale})")
                K[np.diag_indices(n)] += jitter * 9.0  # escalate total jitter x10
                jitter *= 10.0

    def sample(self, rng: RngStream, scale: float = 1.0) -> Field:
        z = rng.normal(self.chol.shape[0])
        values = self.spec.mean + scale * (self.chol @ z)
        return Field(self.spec.grid, values.reshape(_field_shape(self.spec.grid)))

    def sample_batch(self, master_seed: int, count: int, first_index: int = 0,
                     scale: float = 1.0) -> np.ndarray:
        """Independent samples, one RngStream per index; shape [count, *grid]."""
        out = np.empty((count,) + _field_shape(self.spec.grid))
        for k in range(count):
            out[k] = self.sample(RngStream(master_seed, first_index + k), scale).values
        return out


@lru_cache(maxsize=8)
def cached_sampler(spec: GrfSpec) -> GrfSampler:
    """Reuse the Cholesky factor across samples drawn from the same spec."""
    return GrfSampler(spec)


def sample(spec: GrfSpec, rng: RngStream) -> Field:
    return cached_sampler(spec).sample(rng)


def darcy_coefficient(g: Field) -> Field:
    """Threshold a zero-mean GRF into the two-phase conductivity {3, 12}."""
    values = np.where(g.values >= 0.0, DARCY_HIGH, DARCY_LOW)
    return Field(g.grid, values)


def traction_and_modulus(grid: Grid2D, rng: RngStream,
                         traction_std: float = TRACTION_STD,
                         traction_mean: float = TRACTION_MEAN) -> tuple[Field, Field]:
    """Random top-edge traction and domain modulus field for the beam problem.

    traction = 0.15 * GRF(l=0.1) + 0.2 on the top edge; the modulus is a
    GRF(l=0.025) sample rescaled affinely onto [E_min, E_max] with the two
    endpoints drawn uniformly from [20, 380].
    """
    edge_grid = Grid1D(grid.nx, grid.x0, grid.x1)
    t_raw = cached_sampler(GrfSpec(TRACTION_LENGTH_SCALE, 0.0, edge_grid)).sample(rng)
    traction = Field(edge_grid, traction_std * t_raw.values + traction_mean)

    e_draws = rng.uniform(MODULUS_RANGE[0], MODULUS_RANGE[1], 2)
    e_min, e_max = float(np.min(e_draws)), float(np.max(e_draws))
    g = cached_sampler(GrfSpec(MODULUS_LENGTH_SCALE, 0.0, grid)).sample(rng)
    g_min, g_max = float(g.values.min()), float(g.values.max())
    if g_max == g_min:
        values = np.full_like(g.values, e_min)  # degenerate draw: constant field
    else:
        values = (e_max - e_min) / (g_max - g_min) * (g.values - g_min) + e_min
    return traction, Field(grid, values)
