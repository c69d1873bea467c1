"""Shape functions and exactly integrated element matrices.

Uniform-grid rectangles with bilinear interpolation: one stiffness/mass pair
serves every element of a grid.  Node order is counterclockwise starting at
the lower-left corner:

    4 (-a, b) --- 3 ( a, b)
    |                 |
    1 (-a,-b) --- 2 ( a,-b)

"Analytic" integration is realized as Gauss quadrature of exactly sufficient
order (2x2 for the bilinear integrands), which reproduces the closed forms to
machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ElementGeom2D:
    """Rectangle of side lengths 2a x 2b in local coordinates (x', y')."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"element half-widths must be positive, got a={self.a}, b={self.b}")


_GAUSS_1D = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))


def gauss_points_2x2(geom: ElementGeom2D) -> tuple[np.ndarray, np.ndarray]:
    """2x2 Gauss rule on the element: (points [4,2] in local coords, weights [4])."""
    pts = np.array([(geom.a * gx, geom.b * gy) for gy in _GAUSS_1D for gx in _GAUSS_1D])
    wts = np.full(4, geom.a * geom.b)
    return pts, wts


@dataclass(frozen=True)
class ElementMatrices:
    """Per-element stiffness/mass pair with shape-function gradients at the
    2x2 Gauss points; identical for every element of a uniform grid."""

    K: np.ndarray
    M: np.ndarray
    B_at_gauss: np.ndarray  # [4 points, 2, 4]


def element_matrices(geom: ElementGeom2D) -> ElementMatrices:
    pts, _ = gauss_points_2x2(geom)
    B = np.stack([shape_gradients(geom, x, y) for x, y in pts])
    return ElementMatrices(stiffness_2d(geom), mass_2d(geom), B)


def shape_values(geom: ElementGeom2D, xp: float, yp: float) -> np.ndarray:
    if abs(xp) > geom.a + 1e-12 * geom.a or abs(yp) > geom.b + 1e-12 * geom.b:
        raise ValueError(f"point ({xp}, {yp}) lies outside element with a={geom.a}, b={geom.b}")
    xi = xp / geom.a
    eta = yp / geom.b
    return 0.25 * np.array([
        (1 - xi) * (1 - eta),
        (1 + xi) * (1 - eta),
        (1 + xi) * (1 + eta),
        (1 - xi) * (1 + eta),
    ])


def shape_gradients(geom: ElementGeom2D, xp: float, yp: float) -> np.ndarray:
    """B matrix: rows (dN/dx, dN/dy) at a local point, shape [2, 4]."""
    if abs(xp) > geom.a + 1e-12 * geom.a or abs(yp) > geom.b + 1e-12 * geom.b:
        raise ValueError(f"point ({xp}, {yp}) lies outside element with a={geom.a}, b={geom.b}")
    xi = xp / geom.a
    eta = yp / geom.b
    dn_dx = 0.25 / geom.a * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    dn_dy = 0.25 / geom.b * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return np.vstack([dn_dx, dn_dy])


def stiffness_2d(geom: ElementGeom2D) -> np.ndarray:
    """K^e = integral of B^T B over the element, shape [4, 4]."""
    pts, wts = gauss_points_2x2(geom)
    K = np.zeros((4, 4))
    for (xp, yp), w in zip(pts, wts):
        B = shape_gradients(geom, xp, yp)
        K += w * (B.T @ B)
    return K


def mass_2d(geom: ElementGeom2D) -> np.ndarray:
    """M^e = integral of N^T N over the element, shape [4, 4]."""
    pts, wts = gauss_points_2x2(geom)
    M = np.zeros((4, 4))
    for (xp, yp), w in zip(pts, wts):
        N = shape_values(geom, xp, yp)
        M += w * np.outer(N, N)
    return M


def stiffness_1d(h: float) -> np.ndarray:
    if h <= 0:
        raise ValueError(f"element length must be positive, got {h}")
    return np.array([[1.0, -1.0], [-1.0, 1.0]]) / h


def mass_1d(h: float) -> np.ndarray:
    if h <= 0:
        raise ValueError(f"element length must be positive, got {h}")
    return np.array([[2.0, 1.0], [1.0, 2.0]]) * (h / 6.0)


def edge_mass(h: float) -> np.ndarray:
    """Mass matrix of a boundary edge of length h (for traction work terms)."""
    return mass_1d(h)


def plane_stress_D(nu: float) -> np.ndarray:
    """Constitutive matrix with the modulus factored out (sigma = E * D * eps)."""
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio out of range: {nu}")
    return np.array([
        [1.0, nu, 0.0],
        [nu, 1.0, 0.0],
        [0.0, 0.0, (1.0 - nu) / 2.0],
    ]) / (1.0 - nu * nu)


def strain_displacement(geom: ElementGeom2D, xp: float, yp: float) -> np.ndarray:
    """B_eps [3, 8] mapping interleaved (u1,v1,...,u4,v4) to (e_xx, e_yy, gamma_xy)."""
    B = shape_gradients(geom, xp, yp)
    Be = np.zeros((3, 8))
    Be[0, 0::2] = B[0]
    Be[1, 1::2] = B[1]
    Be[2, 0::2] = B[1]
    Be[2, 1::2] = B[0]
    return Be


def elasticity_stiffness_2d(geom: ElementGeom2D, D: np.ndarray, E_e: float = 1.0) -> np.ndarray:
    """K_el = E_e * integral of B_eps^T D B_eps, shape [8, 8], dofs interleaved."""
    D = np.asarray(D, dtype=np.float64)
    if D.shape != (3, 3) or not np.allclose(D, D.T, atol=1e-12):
        raise ValueError("constitutive matrix must be symmetric 3x3")
    if np.any(np.linalg.eigvalsh(D) <= 0):
        raise ValueError("constitutive matrix must be positive definite")
    pts, wts = gauss_points_2x2(geom)
    K = np.zeros((8, 8))
    for (xp, yp), w in zip(pts, wts):
        Be = strain_displacement(geom, xp, yp)
        K += w * (Be.T @ D @ Be)
    return E_e * K


def deformation_gradient(geom: ElementGeom2D, u: np.ndarray,
                         point: tuple[float, float]) -> tuple[np.ndarray, bool]:
    """F = I + grad(u) at a local point, from interleaved nodal displacements.

    Returns (F, det_positive); det_positive is False when the element is
    inverted (J <= 0) at that point.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (8,):
        raise ValueError(f"expected 8 nodal displacement dofs, got shape {u.shape}")
    B = shape_gradients(geom, *point)
    ux, vy = u[0::2], u[1::2]
    grad_u = np.array([
        [B[0] @ ux, B[1] @ ux],
        [B[0] @ vy, B[1] @ vy],
    ])
    F = np.eye(2) + grad_u
    return F, bool(np.linalg.det(F) > 0.0)
