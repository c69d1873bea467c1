"""Shared oracles for the test suite: finite differences and direct DFTs."""
import numpy as np

from vino.tensor import Tensor, gradients


def fd_vs_autodiff(f, arrays, n_points: int = 10, h: float = 1e-6, seed: int = 0):
    """Worst relative gap |autodiff - centralFD| / max(1, |centralFD|) over
    n_points randomly chosen components of every input array."""
    leaves = [Tensor(np.array(a, dtype=a.dtype), requires_grad=True) for a in arrays]
    loss = f(*leaves)
    grads = gradients(loss, leaves)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for leaf, g in zip(leaves, grads):
        flat = leaf.data.ravel()
        gflat = g.ravel()
        for _ in range(n_points):
            i = int(rng.integers(flat.size))
            steps = [(h, "real")]
            if np.iscomplexobj(flat):
                steps.append((1j * h, "imag"))
            for step, part in steps:
                orig = flat[i]
                flat[i] = orig + step
                fp = f(*leaves).item()
                flat[i] = orig - step
                fm = f(*leaves).item()
                flat[i] = orig
                fd = (fp - fm) / (2.0 * h)
                ad = gflat[i].real if part == "real" else gflat[i].imag
                worst = max(worst, abs(ad - fd) / max(1.0, abs(fd)))
    return worst


def dft_direct(x: np.ndarray) -> np.ndarray:
    """O(n^2) discrete Fourier transform, the oracle for the fast path."""
    n = x.shape[-1]
    j = np.arange(n)
    k = np.arange(n // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, j) / n)
    return x @ basis.T


def gauss_legendre_2d(a: float, b: float, order: int = 5):
    """Tensor-product Gauss rule on [-a,a] x [-b,b]; the over-integration oracle."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    pts, wts = [], []
    for gx, wx in zip(nodes, weights):
        for gy, wy in zip(nodes, weights):
            pts.append((a * gx, b * gy))
            wts.append(wx * wy * a * b)
    return np.array(pts), np.array(wts)
