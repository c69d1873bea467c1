"""Training objectives: supervised data loss, strong-form residuals, and
element-wise variational (energy) losses.

Variational losses evaluate the discrete functional

    sum_e [ 1/2 s_e^T K^e s_e - s_e^T M^e p_e ]   (and its mechanical variants)

with the exactly integrated element matrices, so the same-mesh FEM solution is
their exact minimizer over interior nodal values.  They may be negative; data
and strong losses are nonnegative by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import elements
from .grids import Grid, Grid1D, Grid2D
from .tensor import Tensor, add, concat, einsum2, mul, neg, scale, stack, sub, take, tensor_mean, tensor_sum

LOSS_TAGS = ("data", "strong", "vino", "vino_plus_data", "strong_plus_data",
             "quadrature_baseline")
QUADRATURE_SCHEMES = ("midpoint", "trapezoid", "simpson")


class InvalidLossError(RuntimeError):
    """Raised when a loss is undefined for the current prediction (e.g. an
    inverted element in the hyperelastic energy)."""


@dataclass(frozen=True)
class LossKind:
    tag: str
    data_weight: float = 1.0
    scheme: str | None = None

    def __post_init__(self):
        if self.tag not in LOSS_TAGS:
            raise ValueError(f"unknown loss tag {self.tag!r}, expected one of {LOSS_TAGS}")
        if self.tag.endswith("_plus_data") and not self.data_weight > 0:
            raise ValueError(f"{self.tag} requires a positive data weight, got {self.data_weight}")
        if self.tag == "quadrature_baseline" and self.scheme not in QUADRATURE_SCHEMES:
            raise ValueError(f"quadrature baseline needs a scheme in {QUADRATURE_SCHEMES}")

    @property
    def needs_targets(self) -> bool:
        return self.tag == "data" or self.tag.endswith("_plus_data")

    @property
    def has_physics(self) -> bool:
        return self.tag != "data"


@dataclass(frozen=True)
class MooneyRivlin:
    """Material constants; d = 2(c1 + 2 c2) keeps the reference state stress-free."""

    c: float = 1.5
    c1: float = 0.5
    c2: float = 0.5

    @property
    def d(self) -> float:
        return 2.0 * (self.c1 + 2.0 * self.c2)


PDE_TAGS = ("antiderivative1d", "poisson2d", "darcy2d", "elasticity2d", "hyperelastic2d")


@dataclass(frozen=True)
class ProblemSpec:
    pde: str
    grid: Grid
    nu: float = 1.0 / 3.0
    mooney: MooneyRivlin = field(default_factory=MooneyRivlin)

    def __post_init__(self):
        if self.pde not in PDE_TAGS:
            raise ValueError(f"unknown pde {self.pde!r}, expected one of {PDE_TAGS}")
        if self.pde == "antiderivative1d" and not isinstance(self.grid, Grid1D):
            raise ValueError("antiderivative1d needs a 1-D grid")
        if self.pde != "antiderivative1d" and not isinstance(self.grid, Grid2D):
            raise ValueError(f"{self.pde} needs a 2-D grid")

    @property
    def out_channels(self) -> int:
        return 2 if self.pde in ("elasticity2d", "hyperelastic2d") else 1

    @property
    def in_channels(self) -> int:
        return {"antiderivative1d": 1, "poisson2d": 1, "darcy2d": 1,
                "elasticity2d": 2, "hyperelastic2d": 1}[self.pde]

    @property
    def traction_edge(self) -> str | None:
        return {"elasticity2d": "top", "hyperelastic2d": "right"}.get(self.pde)

    def bc(self) -> "DirichletBC":
        if self.pde in ("antiderivative1d", "poisson2d", "darcy2d"):
            return zero_boundary_bc(self.grid)
        if self.pde == "elasticity2d":
            return clamped_edges_bc(self.grid, ("left", "right"))
        return clamped_edges_bc(self.grid, ("left",))


# -- Dirichlet handling -------------------------------------------------------

@dataclass
class DirichletBC:
    """Hard boundary enforcement: mask is 1 on free nodes, 0 on prescribed
    ones; values holds the prescribed nodal values (zero elsewhere)."""

    mask: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.mask.shape != self.values.shape:
            raise ValueError("mask and values must share a shape")
        spatial = self.mask.shape[1:]
        interior = np.ones(spatial, dtype=bool)
        if len(spatial) == 1:
            interior[0] = interior[-1] = False
        else:
            interior[0, :] = interior[-1, :] = False
            interior[:, 0] = interior[:, -1] = False
        if np.any((self.mask == 0.0) & interior[None]):
            raise ValueError("Dirichlet nodes must lie on the grid boundary")


def zero_boundary_bc(grid: Grid, channels: int = 1) -> DirichletBC:
    if isinstance(grid, Grid1D):
        mask = np.ones((channels, grid.n))
        mask[:, 0] = mask[:, -1] = 0.0
    else:
        mask = np.ones((channels, grid.ny, grid.nx))
        mask[:, 0, :] = mask[:, -1, :] = 0.0
        mask[:, :, 0] = mask[:, :, -1] = 0.0
    return DirichletBC(mask, np.zeros_like(mask))


def clamped_edges_bc(grid: Grid2D, edges=("left", "right")) -> DirichletBC:
    """Both displacement components pinned to zero along the named vertical edges."""
    mask = np.ones((2, grid.ny, grid.nx))
    for edge in edges:
        if edge == "left":
            mask[:, :, 0] = 0.0
        elif edge == "right":
            mask[:, :, -1] = 0.0
        else:
            raise ValueError(f"unsupported clamped edge {edge!r}")
    return DirichletBC(mask, np.zeros_like(mask))


def apply_dirichlet(pred: Tensor, bc: DirichletBC) -> Tensor:
    """Overwrite prescribed nodal values; gradients vanish on overwritten nodes."""
    if pred.shape[1:] != bc.mask.shape:
        raise ValueError(f"prediction {pred.shape} does not match BC {bc.mask.shape}")
    masked = mul(pred, Tensor(np.broadcast_to(bc.mask[None], pred.shape)))
    if not np.any(bc.values):
        return masked
    return add(masked, Tensor(np.broadcast_to(bc.values[None], pred.shape)))


# -- supervised loss ----------------------------------------------------------

def data_loss(pred: Tensor, target: np.ndarray, measure: float = 1.0) -> Tensor:
    """Batch-mean squared L2 distance: mean squared nodal error x domain measure."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} vs target {target.shape}")
    diff = sub(pred, Tensor(target))
    return scale(tensor_mean(mul(diff, diff)), measure)


# -- strong-form residual losses ----------------------------------------------

def strong_loss(pred: Tensor, p: np.ndarray, problem: ProblemSpec) -> Tensor:
    """Mean squared PDE residual at interior nodes, second-order central FD."""
    grid = problem.grid
    if problem.pde == "antiderivative1d":
        if grid.n < 3:
            raise ValueError("strong residual needs at least 3 nodes")
        s = take(pred, (slice(None), 0))
        h2 = grid.h ** 2
        sxx = scale(add(sub(take(s, (slice(None), slice(2, None))),
                            scale(take(s, (slice(None), slice(1, -1))), 2.0)),
                        take(s, (slice(None), slice(None, -2)))), 1.0 / h2)
        r = add(sxx, Tensor(p[:, 1:-1]))
        return tensor_mean(mul(r, r))

    if grid.nx < 3 or grid.ny < 3:
        raise ValueError("strong residual needs at least 3 nodes per axis")
    s = take(pred, (slice(None), 0))
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    mid = take(s, (slice(None), slice(1, -1), slice(1, -1)))
    sxx = scale(add(sub(take(s, (slice(None), slice(1, -1), slice(2, None))),
                        scale(mid, 2.0)),
                    take(s, (slice(None), slice(1, -1), slice(None, -2)))), 1.0 / hx2)
    syy = scale(add(sub(take(s, (slice(None), slice(2, None), slice(1, -1))),
                        scale(mid, 2.0)),
                    take(s, (slice(None), slice(None, -2), slice(1, -1)))), 1.0 / hy2)
    lap = add(sxx, syy)

    if problem.pde == "poisson2d":
        r = add(lap, Tensor(p[:, 1:-1, 1:-1]))
        return tensor_mean(mul(r, r))

    if problem.pde == "darcy2d":
        # residual of div(p grad s) + f, f = 1, expanded by the product rule
        sx = scale(sub(take(s, (slice(None), slice(1, -1), slice(2, None))),
                       take(s, (slice(None), slice(1, -1), slice(None, -2)))),
                   1.0 / (2.0 * grid.hx))
        sy = scale(sub(take(s, (slice(None), slice(2, None), slice(1, -1))),
                       take(s, (slice(None), slice(None, -2), slice(1, -1)))),
                   1.0 / (2.0 * grid.hy))
        px = (p[:, 1:-1, 2:] - p[:, 1:-1, :-2]) / (2.0 * grid.hx)
        py = (p[:, 2:, 1:-1] - p[:, :-2, 1:-1]) / (2.0 * grid.hy)
        r = add(add(add(mul(Tensor(px), sx), mul(Tensor(py), sy)),
                    mul(Tensor(p[:, 1:-1, 1:-1]), lap)),
                1.0)
        return tensor_mean(mul(r, r))

    raise ValueError(f"strong-form loss is not defined for {problem.pde}")


# -- element gathers ----------------------------------------------------------

def _corner_stack_1d(s: Tensor) -> Tensor:
    """[B, n] -> [B, 2, n-1] nodal pairs per element."""
    return stack([take(s, (slice(None), slice(None, -1))),
                  take(s, (slice(None), slice(1, None)))], axis=1)


_CORNER_KEYS_2D = (
    (slice(None, -1), slice(None, -1)),  # node 1: lower-left
    (slice(None, -1), slice(1, None)),   # node 2: lower-right
    (slice(1, None), slice(1, None)),    # node 3: upper-right
    (slice(1, None), slice(None, -1)),   # node 4: upper-left
)


def _corner_stack_2d(s: Tensor) -> Tensor:
    """[B, ny, nx] -> [B, 4, ny-1, nx-1] in counterclockwise node order."""
    return stack([take(s, (slice(None),) + key) for key in _CORNER_KEYS_2D], axis=1)


def _corners_np(a: np.ndarray) -> np.ndarray:
    return np.stack([a[(slice(None),) + key] for key in _CORNER_KEYS_2D], axis=1)


def element_center_values(p: np.ndarray) -> np.ndarray:
    """Node-stored coefficient -> element value (mean of the four corners)."""
    return 0.25 * (p[..., :-1, :-1] + p[..., :-1, 1:] + p[..., 1:, 1:] + p[..., 1:, :-1])


def _geom(grid: Grid2D) -> elements.ElementGeom2D:
    return elements.ElementGeom2D(grid.hx / 2.0, grid.hy / 2.0)


# -- variational losses -------------------------------------------------------

def vino_loss_1d(pred: Tensor, p: np.ndarray, grid: Grid1D) -> Tensor:
    """(1/n) sum_i sum_e [ 1/2 s^T K^e s - s^T M^e p ] on 1-D linear elements."""
    s = take(pred, (slice(None), 0)) if pred.data.ndim == 3 else pred
    st = _corner_stack_1d(s)
    K = elements.stiffness_1d(grid.h)
    M = elements.mass_1d(grid.h)
    pt = np.stack([p[:, :-1], p[:, 1:]], axis=1)
    ks = einsum2("ab,nbe->nae", Tensor(K), st)
    internal = scale(einsum2("nae,nae->n", st, ks), 0.5)
    mp = np.einsum("ab,nbe->nae", M, pt)
    source = einsum2("nae,nae->n", st, Tensor(mp))
    return tensor_mean(sub(internal, source))


def vino_loss_poisson(pred: Tensor, f: np.ndarray, grid: Grid2D) -> Tensor:
    s = take(pred, (slice(None), 0)) if pred.data.ndim == 4 else pred
    st = _corner_stack_2d(s)
    K = elements.stiffness_2d(_geom(grid))
    M = elements.mass_2d(_geom(grid))
    ks = einsum2("ab,nbij->naij", Tensor(K), st)
    internal = scale(einsum2("naij,naij->n", st, ks), 0.5)
    mf = np.einsum("ab,nbij->naij", M, _corners_np(f))
    source = einsum2("naij,naij->n", st, Tensor(mf))
    return tensor_mean(sub(internal, source))


def vino_loss_darcy(pred: Tensor, p: np.ndarray, grid: Grid2D) -> Tensor:
    """Poisson functional with a per-element conductivity scaling the stiffness."""
    pe = element_center_values(p)
    if np.any(pe <= 0.0):
        raise ValueError("Darcy coefficient must be strictly positive on every element")
    s = take(pred, (slice(None), 0)) if pred.data.ndim == 4 else pred
    st = _corner_stack_2d(s)
    K = elements.stiffness_2d(_geom(grid))
    M = elements.mass_2d(_geom(grid))
    ks = einsum2("ab,nbij->naij", Tensor(K), st)
    ks = mul(ks, Tensor(np.broadcast_to(pe[:, None], ks.shape)))
    internal = scale(einsum2("naij,naij->n", st, ks), 0.5)
    f_ones = np.ones((p.shape[0], 4) + pe.shape[1:])
    mf = np.einsum("ab,nbij->naij", M, f_ones)
    source = einsum2("naij,naij->n", st, Tensor(mf))
    return tensor_mean(sub(internal, source))


def edge_load_vector(traction: np.ndarray, h: float) -> np.ndarray:
    """Consistent nodal load on an edge: assembled 2x2 edge-mass contributions."""
    M = elements.edge_mass(h)
    w = np.zeros_like(traction)
    tl, tr = traction[..., :-1], traction[..., 1:]
    w[..., :-1] += M[0, 0] * tl + M[0, 1] * tr
    w[..., 1:] += M[1, 0] * tl + M[1, 1] * tr
    return w


def _edge_displacement(pred: Tensor, edge: str, component: int) -> Tensor:
    if edge == "top":
        return take(pred, (slice(None), component, -1))
    if edge == "right":
        return take(pred, (slice(None), component, slice(None), -1))
    raise ValueError(f"unsupported traction edge {edge!r}")


def _interleaved_stack(pred: Tensor) -> Tensor:
    """[B, 2, ny, nx] -> [B, 8, Ey, Ex] element dofs (u1, v1, ..., u4, v4)."""
    parts = []
    for key in _CORNER_KEYS_2D:
        parts.append(take(pred, (slice(None), 0) + key))
        parts.append(take(pred, (slice(None), 1) + key))
    return stack(parts, axis=1)


def vino_loss_elasticity(pred: Tensor, E: np.ndarray, traction: np.ndarray,
                         grid: Grid2D, nu: float) -> Tensor:
    """Plane-stress strain energy minus the work of the top-edge traction."""
    q = _interleaved_stack(pred)
    K8 = elements.elasticity_stiffness_2d(_geom(grid), elements.plane_stress_D(nu))
    Ee = element_center_values(E)
    kq = einsum2("ab,nbij->naij", Tensor(K8), q)
    kq = mul(kq, Tensor(np.broadcast_to(Ee[:, None], kq.shape)))
    internal = scale(einsum2("naij,naij->n", q, kq), 0.5)
    load = edge_load_vector(traction, grid.hx)
    work = einsum2("na,na->n", Tensor(load), _edge_displacement(pred, "top", 1))
    return tensor_mean(sub(internal, work))


def log_taylor4(j: Tensor) -> Tensor:
    """Fourth-order Taylor expansion of log(J) about J = 1."""
    x = sub(j, 1.0)
    x2 = mul(x, x)
    x3 = mul(x2, x)
    x4 = mul(x2, x2)
    return add(sub(x, scale(x2, 0.5)), sub(scale(x3, 1.0 / 3.0), scale(x4, 0.25)))


def mooney_rivlin_energy(f11: Tensor, f12: Tensor, f21: Tensor, f22: Tensor,
                         constants: MooneyRivlin) -> tuple[Tensor, Tensor]:
    """Plane-strain Mooney-Rivlin energy density; returns (psi, J).

    C = F^T F is embedded as 3x3 with C33 = 1, so I1 = tr(C2) + 1 and
    I2 = (I1^2 - tr(C3^2)) / 2; log(J) is replaced by its quartic Taylor
    polynomial so the integrand stays polynomial in the nodal values.
    """
    j = sub(mul(f11, f22), mul(f12, f21))
    c11 = add(mul(f11, f11), mul(f21, f21))
    c22 = add(mul(f12, f12), mul(f22, f22))
    c12 = add(mul(f11, f12), mul(f21, f22))
    i1 = add(add(c11, c22), 1.0)
    tr_c2 = add(add(mul(c11, c11), mul(c22, c22)), add(scale(mul(c12, c12), 2.0), 1.0))
    i2 = scale(sub(mul(i1, i1), tr_c2), 0.5)
    jm1 = sub(j, 1.0)
    psi = add(sub(scale(mul(jm1, jm1), constants.c), scale(log_taylor4(j), constants.d)),
              add(scale(sub(i1, 3.0), constants.c1), scale(sub(i2, 3.0), constants.c2)))
    return psi, j


def pk1_stress(F: np.ndarray, constants: MooneyRivlin) -> np.ndarray:
    """First Piola-Kirchhoff stress P = dPsi/dF of the 2x2 plane-strain F."""
    comps = [Tensor(np.array([F[i, j]]), requires_grad=True)
             for i in range(2) for j in range(2)]
    psi, _ = mooney_rivlin_energy(*comps, constants)
    tensor_sum(psi).backward()
    return np.array([[comps[0].grad_array()[0], comps[1].grad_array()[0]],
                     [comps[2].grad_array()[0], comps[3].grad_array()[0]]])


def vino_loss_hyperelastic(pred: Tensor, traction: np.ndarray, grid: Grid2D,
                           constants: MooneyRivlin, traction_edge: str = "right",
                           traction_component: int = 1) -> Tensor:
    """Total potential: Gauss-integrated Mooney-Rivlin energy minus edge work."""
    geom = _geom(grid)
    qu = stack([take(pred, (slice(None), 0) + key) for key in _CORNER_KEYS_2D], axis=1)
    qv = stack([take(pred, (slice(None), 1) + key) for key in _CORNER_KEYS_2D], axis=1)
    pts, wts = elements.gauss_points_2x2(geom)
    internal = None
    for (xp, yp), w in zip(pts, wts):
        B = elements.shape_gradients(geom, xp, yp)
        bx, by = Tensor(B[0]), Tensor(B[1])
        f11 = add(einsum2("a,naij->nij", bx, qu), 1.0)
        f12 = einsum2("a,naij->nij", by, qu)
        f21 = einsum2("a,naij->nij", bx, qv)
        f22 = add(einsum2("a,naij->nij", by, qv), 1.0)
        psi, j = mooney_rivlin_energy(f11, f12, f21, f22, constants)
        jmin = float(j.data.min())
        if jmin <= 0.0:
            b, iy, ix = np.unravel_index(int(np.argmin(j.data)), j.data.shape)
            raise InvalidLossError(
                f"inverted element (J = {jmin:.3e} <= 0) in sample {b}, element ({iy}, {ix})")
        contrib = scale(tensor_sum(psi, axis=(1, 2)), w)
        internal = contrib if internal is None else add(internal, contrib)
    edge_h = grid.hy if traction_edge == "right" else grid.hx
    load = edge_load_vector(traction, edge_h)
    work = einsum2("na,na->n", Tensor(load),
                   _edge_displacement(pred, traction_edge, traction_component))
    return tensor_mean(sub(internal, work))


# -- quadrature + finite-difference baselines -----------------------------------

def _fd_gradient(s: Tensor, h: float, axis: int) -> Tensor:
    """Nodal derivative: central in the interior, one-sided 2nd order at the ends."""
    nd = s.data.ndim

    def sl(spec):
        key = [slice(None)] * nd
        key[axis] = spec
        return tuple(key)

    interior = scale(sub(take(s, sl(slice(2, None))), take(s, sl(slice(None, -2)))),
                     1.0 / (2.0 * h))
    left = scale(add(sub(scale(take(s, sl(slice(1, 2))), 4.0),
                         scale(take(s, sl(slice(0, 1))), 3.0)),
                     neg(take(s, sl(slice(2, 3))))), 1.0 / (2.0 * h))
    right = scale(add(sub(scale(take(s, sl(slice(-1, None))), 3.0),
                          scale(take(s, sl(slice(-2, -1))), 4.0)),
                      take(s, sl(slice(-3, -2)))), 1.0 / (2.0 * h))
    return concat([left, interior, right], axis=axis)


def _composite_weights(n: int, h: float, scheme: str) -> np.ndarray:
    if scheme == "trapezoid":
        w = np.ones(n)
        w[0] = w[-1] = 0.5
        return w * h
    if scheme == "simpson":
        if n % 2 == 0:
            raise ValueError(f"Simpson's rule requires an odd node count per axis, got {n}")
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * h / 3.0
    raise ValueError(f"unknown composite scheme {scheme!r}")


def quadrature_loss(pred: Tensor, p: np.ndarray, grid: Grid, scheme: str) -> Tensor:
    """Variational functional integrated by a classical composite rule with FD
    gradients -- the baselines the element-wise formulation is compared against."""
    if scheme not in QUADRATURE_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {QUADRATURE_SCHEMES}")
    if isinstance(grid, Grid1D):
        s = take(pred, (slice(None), 0)) if pred.data.ndim == 3 else pred
        ds = _fd_gradient(s, grid.h, axis=1)
        if scheme == "midpoint":
            # cell-center evaluation of the integrand, every field quantity
            # (value, source, nodal-FD gradient) interpolated to the midpoint
            pair_mean = lambda t: scale(add(take(t, (slice(None), slice(1, None))),
                                            take(t, (slice(None), slice(None, -1)))), 0.5)
            sc, dc = pair_mean(s), pair_mean(ds)
            pc = 0.5 * (p[:, 1:] + p[:, :-1])
            integrand = sub(scale(mul(dc, dc), 0.5), mul(Tensor(pc), sc))
            return tensor_mean(scale(tensor_sum(integrand, axis=1), grid.h))
        integrand = sub(scale(mul(ds, ds), 0.5), mul(Tensor(p), s))
        w = _composite_weights(grid.n, grid.h, scheme)
        return tensor_mean(einsum2("i,ni->n", Tensor(w), integrand))

    s = take(pred, (slice(None), 0)) if pred.data.ndim == 4 else pred
    dsx = _fd_gradient(s, grid.hx, axis=2)
    dsy = _fd_gradient(s, grid.hy, axis=1)
    if scheme == "midpoint":
        def cell_mean(t):
            st = _corner_stack_2d(t)
            return scale(tensor_sum(st, axis=1), 0.25)

        sc, dxc, dyc = cell_mean(s), cell_mean(dsx), cell_mean(dsy)
        pc = element_center_values(p)
        integrand = sub(scale(add(mul(dxc, dxc), mul(dyc, dyc)), 0.5), mul(Tensor(pc), sc))
        return tensor_mean(scale(tensor_sum(integrand, axis=(1, 2)), grid.hx * grid.hy))
    integrand = sub(scale(add(mul(dsx, dsx), mul(dsy, dsy)), 0.5), mul(Tensor(p), s))
    w2 = np.outer(_composite_weights(grid.ny, grid.hy, scheme),
                  _composite_weights(grid.nx, grid.hx, scheme))
    return tensor_mean(einsum2("ij,nij->n", Tensor(w2), integrand))


# -- dispatch -----------------------------------------------------------------

def physics_loss(problem: ProblemSpec, kind: LossKind, pred: Tensor,
                 inputs: dict[str, np.ndarray]) -> Tensor:
    """The physics part of a LossKind for one problem; pred has BCs applied."""
    grid = problem.grid
    if kind.tag == "quadrature_baseline":
        if problem.pde not in ("poisson2d", "antiderivative1d"):
            raise ValueError("quadrature baselines are defined for the Poisson functional")
        return quadrature_loss(pred, inputs["input"], grid, kind.scheme)
    if kind.tag in ("strong", "strong_plus_data"):
        key = "coefficient" if problem.pde == "darcy2d" else "input"
        return strong_loss(pred, inputs[key], problem)
    if problem.pde == "antiderivative1d":
        return vino_loss_1d(pred, inputs["input"], grid)
    if problem.pde == "poisson2d":
        return vino_loss_poisson(pred, inputs["input"], grid)
    if problem.pde == "darcy2d":
        return vino_loss_darcy(pred, inputs["coefficient"], grid)
    if problem.pde == "elasticity2d":
        return vino_loss_elasticity(pred, inputs["coefficient"], inputs["traction"],
                                    grid, problem.nu)
    return vino_loss_hyperelastic(pred, inputs["traction"], grid, problem.mooney)


def combined_loss(kind: LossKind, physics: Tensor | None, data: Tensor | None) -> Tensor:
    """L = L_physics + w * L_data, degenerating to either part alone."""
    if kind.tag == "data":
        if data is None:
            raise ValueError("data loss requested but no data term supplied")
        return data
    if kind.needs_targets:
        if physics is None or data is None:
            raise ValueError(f"{kind.tag} needs both a physics and a data term")
        return add(physics, scale(data, kind.data_weight))
    if physics is None:
        raise ValueError(f"{kind.tag} needs a physics term")
    return physics
