"""Dense float64 tensors with define-by-run reverse-mode autodiff.

The graph is rebuilt on every forward pass: each operation that involves a
gradient-tracked tensor records its parents and a backward closure on the
result.  Calling ``Tensor.backward()`` on a scalar walks the recorded
operations once, in reverse topological order.

Complex (complex128) tensors appear only as Fourier spectra.  Gradients of a
complex tensor store d(loss)/d(real part) + 1j * d(loss)/d(imag part), which
makes the backward rule of a complex-linear map the conjugate transpose.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as _fft
from scipy.special import erf

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))
# transforms are independent per signal, so worker threads do not affect results
_FFT_WORKERS = 2


class RngStream:
    """Counter-based random stream: (seed, stream) fully determines draws."""

    def __init__(self, seed: int, stream: int = 0):
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF],
                       dtype=np.uint64)
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normal(self, shape=()) -> np.ndarray:
        return self._gen.standard_normal(size=shape, dtype=np.float64)

    def uniform(self, low: float, high: float, shape=()) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if np.iscomplexobj(arr):
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction of op results -------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- autodiff ----------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar loss; fills .grad on tracked leaves."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if not self.requires_grad:
            return
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)
                # interior grads are single-use; free them to bound memory
                node.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        # backward closures hand over fresh arrays and nothing mutates a stored
        # grad in place, so aliasing is safe without a defensive copy
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    def grad_array(self) -> np.ndarray:
        """Gradient of the last backward pass; zeros if this leaf was unused."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, c):
        if isinstance(c, Tensor):
            raise TypeError("tensor/tensor division is not supported; divide by a scalar")
        return scale(self, 1.0 / float(c))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _conj(a: np.ndarray) -> np.ndarray:
    return np.conj(a) if np.iscomplexobj(a) else a


def gradients(loss: Tensor, leaves) -> list[np.ndarray]:
    """Run backward on `loss` and return gradients for `leaves` (zeros if unused)."""
    for leaf in leaves:
        leaf.zero_grad()
    loss.backward()
    return [leaf.grad_array() for leaf in leaves]


# -- elementwise ops --------------------------------------------------------

def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch for {op}: {a.data.shape} vs {b.data.shape}")


def add(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        a = _as_tensor(a)
        data = a.data + float(b)
        return Tensor._result(data, (a,), lambda g, a=a: a._accumulate(g))
    if not isinstance(a, Tensor):
        return add(b, a)
    _check_same_shape("add", a, b)

    def backward(g, a=a, b=b):
        a._accumulate(g)
        b._accumulate(g)

    return Tensor._result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    if not isinstance(a, Tensor):
        return add(neg(b), a)
    _check_same_shape("sub", a, b)

    def backward(g, a=a, b=b):
        a._accumulate(g)
        b._accumulate(-g)

    return Tensor._result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, float(b))
    if not isinstance(a, Tensor):
        return scale(b, float(a))
    _check_same_shape("mul", a, b)

    def backward(g, a=a, b=b):
        a._accumulate(g * _conj(b.data))
        b._accumulate(g * _conj(a.data))

    return Tensor._result(a.data * b.data, (a, b), backward)


def scale(a: Tensor, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return Tensor._result(a.data * c, (a,), lambda g, a=a: a._accumulate(g * c))


def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return Tensor._result(-a.data, (a,), lambda g, a=a: a._accumulate(-g))


# -- reductions ---------------------------------------------------------------

def tensor_sum(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis)

    def backward(g, a=a, axis=axis):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())
        else:
            g_exp = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g_exp, a.data.shape).copy())

    return Tensor._result(data, (a,), backward)


def tensor_mean(a: Tensor, axis=None) -> Tensor:
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    return scale(tensor_sum(a, axis), 1.0 / count)


# -- linear algebra -----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}")

    def backward(g, a=a, b=b):
        a._accumulate(g @ _conj(b.data).T)
        b._accumulate(_conj(a.data).T @ g)

    return Tensor._result(a.data @ b.data, (a, b), backward)


_EINSUM_CACHE: dict[str, tuple[str, str, str, str, str]] = {}


def _parse_einsum(subscripts: str) -> tuple[str, str, str, str, str]:
    cached = _EINSUM_CACHE.get(subscripts)
    if cached is not None:
        return cached
    lhs, out = subscripts.replace(" ", "").split("->")
    sub_a, sub_b = lhs.split(",")
    for sub in (sub_a, sub_b):
        if len(set(sub)) != len(sub):
            raise ValueError(f"einsum2 does not support repeated indices in one operand: {subscripts}")
    for ch in sub_a:
        if ch not in out and ch not in sub_b:
            raise ValueError(f"einsum2 cannot differentiate '{subscripts}': index {ch} summed within one operand")
    for ch in sub_b:
        if ch not in out and ch not in sub_a:
            raise ValueError(f"einsum2 cannot differentiate '{subscripts}': index {ch} summed within one operand")
    grad_a_spec = f"{out},{sub_b}->{sub_a}"
    grad_b_spec = f"{sub_a},{out}->{sub_b}"
    parsed = (sub_a, sub_b, out, grad_a_spec, grad_b_spec)
    _EINSUM_CACHE[subscripts] = parsed
    return parsed


def einsum2(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum, differentiable w.r.t. both operands."""
    a = _as_tensor(a)
    b = _as_tensor(b)
    _, _, _, grad_a_spec, grad_b_spec = _parse_einsum(subscripts)
    data = np.einsum(subscripts, a.data, b.data)

    def backward(g, a=a, b=b):
        a._accumulate(np.einsum(grad_a_spec, g, _conj(b.data)))
        b._accumulate(np.einsum(grad_b_spec, _conj(a.data), g))

    return Tensor._result(data, (a, b), backward)


def channel_linear(w: Tensor, x: Tensor) -> Tensor:
    """Pointwise channel mixing: w[out,in] applied over axis 1 of x[b,in,...]."""
    w = _as_tensor(w)
    x = _as_tensor(x)
    if w.data.ndim != 2 or x.data.ndim < 2 or w.data.shape[1] != x.data.shape[1]:
        raise ValueError(f"channel_linear mismatch: weights {w.data.shape}, input {x.data.shape}")
    shape = x.data.shape
    xf = x.data.reshape(shape[0], shape[1], -1)
    out_shape = (shape[0], w.data.shape[0]) + shape[2:]
    data = np.matmul(w.data, xf).reshape(out_shape)

    def backward(g, w=w, x=x, xf=xf, shape=shape):
        gf = g.reshape(g.shape[0], g.shape[1], -1)
        w._accumulate(np.matmul(gf, xf.transpose(0, 2, 1)).sum(axis=0))
        x._accumulate(np.matmul(w.data.T, gf).reshape(shape))

    return Tensor._result(data, (w, x), backward)


def add_channel_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add per-channel bias b[c] along axis 1 of x[batch, c, ...]."""
    x = _as_tensor(x)
    b = _as_tensor(b)
    if b.data.ndim != 1 or x.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"bias mismatch: {b.data.shape} vs input {x.data.shape}")
    view = b.data.reshape((1, -1) + (1,) * (x.data.ndim - 2))

    def backward(g, x=x, b=b):
        x._accumulate(g)
        axes = (0,) + tuple(range(2, x.data.ndim))
        b._accumulate(g.sum(axis=axes))

    return Tensor._result(x.data + view, (x, b), backward)


# -- nonlinearity -------------------------------------------------------------

def gelu(x: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x) with the standard normal CDF via erf."""
    x = _as_tensor(x)
    if np.iscomplexobj(x.data):
        raise ValueError("gelu is defined for real tensors only")
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    data = x.data * cdf

    def backward(g, x=x, cdf=cdf):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
        x._accumulate(g * (cdf + x.data * pdf))

    return Tensor._result(data, (x,), backward)


# -- structural ops -----------------------------------------------------------

def take(a: Tensor, key) -> Tensor:
    """Basic slicing; backward scatters the gradient back into a zero tensor."""
    a = _as_tensor(a)
    data = a.data[key]

    def backward(g, a=a, key=key):
        buf = np.zeros_like(a.data)
        buf[key] = g
        a._accumulate(buf)

    return Tensor._result(data.copy(), (a,), backward)


def embed(a: Tensor, shape: tuple[int, ...], key) -> Tensor:
    """Place `a` into a zero tensor of `shape` at slice `key` (inverse of take)."""
    a = _as_tensor(a)
    buf = np.zeros(shape, dtype=a.data.dtype)
    buf[key] = a.data
    return Tensor._result(buf, (a,), lambda g, a=a, key=key: a._accumulate(g[key]))


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g, tensors=tensors, axis=axis):
        parts = np.split(g, len(tensors), axis=axis)
        for t, part in zip(tensors, parts):
            t._accumulate(np.squeeze(part, axis=axis))

    return Tensor._result(data, tuple(tensors), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g, tensors=tensors, sizes=sizes, axis=axis):
        offsets = np.cumsum(sizes)[:-1]
        for t, part in zip(tensors, np.split(g, offsets, axis=axis)):
            t._accumulate(part)

    return Tensor._result(data, tuple(tensors), backward)


# -- real FFTs ----------------------------------------------------------------

def _last_axis_interior(nbins: int, n_out: int):
    # bins of the half spectrum that stand for a conjugate pair in the full one
    return slice(1, nbins - 1) if n_out % 2 == 0 else slice(1, nbins)


def rfftn(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    """Real FFT over trailing `axes`; forward transform is unnormalized."""
    x = _as_tensor(x)
    if np.iscomplexobj(x.data):
        raise ValueError("rfftn expects a real tensor")
    axes = tuple(axes)
    lens = tuple(x.data.shape[ax] for ax in axes)
    if any(n < 1 for n in lens):
        raise ValueError(f"rfftn transform lengths must be >= 1, got {lens}")
    data = _fft.rfftn(x.data, axes=axes, workers=_FFT_WORKERS)

    def backward(g, x=x, axes=axes, lens=lens):
        gh = g.copy()
        nbins = gh.shape[axes[-1]]
        sel = [slice(None)] * gh.ndim
        sel[axes[-1]] = _last_axis_interior(nbins, lens[-1])
        gh[tuple(sel)] *= 0.5
        total = int(np.prod(lens))
        x._accumulate(_fft.irfftn(gh, s=lens, axes=axes, workers=_FFT_WORKERS) * total)

    return Tensor._result(data, (x,), backward)


def irfftn(spectrum: Tensor, axes: tuple[int, ...], out_lens: tuple[int, ...]) -> Tensor:
    """Inverse real FFT with 1/n normalization, recovering `out_lens` samples."""
    spectrum = _as_tensor(spectrum)
    axes = tuple(axes)
    out_lens = tuple(out_lens)
    expected = out_lens[-1] // 2 + 1
    got = spectrum.data.shape[axes[-1]]
    if got != expected:
        raise ValueError(
            f"inconsistent spectrum length: got {got} bins on the last axis, "
            f"output length {out_lens[-1]} requires {expected}")
    for ax, n in zip(axes[:-1], out_lens[:-1]):
        if spectrum.data.shape[ax] != n:
            raise ValueError(
                f"inconsistent spectrum length on axis {ax}: {spectrum.data.shape[ax]} vs {n}")
    data = _fft.irfftn(spectrum.data, s=out_lens, axes=axes, workers=_FFT_WORKERS)

    def backward(g, spectrum=spectrum, axes=axes, out_lens=out_lens):
        total = int(np.prod(out_lens))
        gs = _fft.rfftn(g, axes=axes, workers=_FFT_WORKERS) * (2.0 / total)
        nbins = gs.shape[axes[-1]]
        sel = [slice(None)] * gs.ndim
        edge = [0] if out_lens[-1] % 2 != 0 else [0, nbins - 1]
        for idx in edge:
            sel[axes[-1]] = idx
            gs[tuple(sel)] *= 0.5
        spectrum._accumulate(gs)

    return Tensor._result(data, (spectrum,), backward)


def _modes_first(a: np.ndarray) -> np.ndarray:
    # [p, q, *modes] -> [prod(modes), p, q] for batched matmul over the modes
    nm = a.ndim - 2
    moved = np.moveaxis(a, tuple(range(2, a.ndim)), tuple(range(nm)))
    return np.ascontiguousarray(moved.reshape(-1, a.shape[0], a.shape[1]))


def _modes_last(a: np.ndarray, mode_shape: tuple[int, ...]) -> np.ndarray:
    nm = len(mode_shape)
    full = a.reshape(mode_shape + a.shape[1:])
    return np.moveaxis(full, tuple(range(nm)), tuple(range(2, 2 + nm)))


def spectral_multiply(x: Tensor, w: Tensor) -> Tensor:
    """Complex per-mode channel mixing: x[b,i,*m] with w[i,o,*m] -> [b,o,*m]."""
    x = _as_tensor(x)
    w = _as_tensor(w)
    if x.data.shape[1] != w.data.shape[0] or x.data.shape[2:] != w.data.shape[2:]:
        raise ValueError(f"spectral_multiply mismatch: input {x.data.shape}, weights {w.data.shape}")
    mode_shape = x.data.shape[2:]
    xm = _modes_first(x.data)                     # [M, b, i]
    wm = _modes_first(w.data)                     # [M, i, o]
    data = _modes_last(np.matmul(xm, wm), mode_shape)

    def backward(g, x=x, w=w, xm=xm, wm=wm, mode_shape=mode_shape):
        gm = _modes_first(g)                      # [M, b, o]
        x._accumulate(_modes_last(np.matmul(gm, np.conj(wm).transpose(0, 2, 1)),
                                  mode_shape))
        w._accumulate(_modes_last(np.matmul(np.conj(xm).transpose(0, 2, 1), gm),
                                  mode_shape))

    return Tensor._result(np.ascontiguousarray(data), (x, w), backward)
