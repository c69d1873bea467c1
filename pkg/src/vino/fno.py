"""Fourier neural operator: lifting, spectral + pointwise layers, projection.

Parameter shapes depend only on the configuration, never on the grid, so one
model evaluates at any resolution that supports its retained modes.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .tensor import (Tensor, RngStream, add, add_channel_bias, channel_linear,
                     concat, embed, gelu, irfftn, rfftn, spectral_multiply, take)


def _proj_hidden(width: int) -> int:
    return max(2 * width, 16)


@dataclass(frozen=True)
class FnoConfig:
    spatial_dim: int
    in_channels: int
    out_channels: int
    width: int
    modes: int
    layers: int = 4
    append_coords: bool = True

    def __post_init__(self):
        if self.spatial_dim not in (1, 2):
            raise ValueError(f"spatial_dim must be 1 or 2, got {self.spatial_dim}")
        if self.layers < 1 or self.width < 1 or self.modes < 1:
            raise ValueError("layers, width and modes must all be >= 1")

    @staticmethod
    def default_1d(in_channels: int = 1, out_channels: int = 1, **kw) -> "FnoConfig":
        return FnoConfig(1, in_channels, out_channels, width=kw.pop("width", 64),
                         modes=kw.pop("modes", 16), **kw)

    @staticmethod
    def default_2d(in_channels: int = 1, out_channels: int = 1, **kw) -> "FnoConfig":
        return FnoConfig(2, in_channels, out_channels, width=kw.pop("width", 32),
                         modes=kw.pop("modes", 12), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_modes(config: FnoConfig, spatial: tuple[int, ...]) -> None:
    m = config.modes
    if config.spatial_dim == 1:
        avail = spatial[0] // 2 + 1
        if m > avail:
            raise ValueError(f"modes={m} exceed the {avail} available frequencies "
                             f"of a {spatial[0]}-point grid")
    else:
        ny, nx = spatial
        avail_x = nx // 2 + 1
        if m > avail_x:
            raise ValueError(f"modes={m} exceed the {avail_x} available frequencies "
                             f"of the {nx}-point axis")
        if 2 * m > ny:
            raise ValueError(f"modes={m} needs {2 * m} rows but the grid has only {ny}")


def spectral_conv(x: Tensor, weights, modes: int) -> Tensor:
    """Truncated-mode convolution: rfft -> complex channel mixing -> irfft.

    `weights` is one complex tensor [w, w, modes] in 1D, or the pair
    (positive-row block, negative-row block) of [w, w, modes, modes] in 2D.
    """
    spatial = x.shape[2:]
    if len(spatial) == 1:
        if modes > spatial[0] // 2 + 1:
            raise ValueError(f"modes={modes} exceed the {spatial[0] // 2 + 1} "
                             f"available frequencies of a {spatial[0]}-point grid")
        spec = rfftn(x, axes=(-1,))
        key = (slice(None), slice(None), slice(0, modes))
        block = spectral_multiply(take(spec, key), weights)
        full = embed(block, spec.shape, key)
        return irfftn(full, axes=(-1,), out_lens=spatial)

    ny, nx = spatial
    if modes > nx // 2 + 1:
        raise ValueError(f"modes={modes} exceed the {nx // 2 + 1} available "
                         f"frequencies of the {nx}-point axis")
    if 2 * modes > ny:
        raise ValueError(f"modes={modes} needs {2 * modes} rows but the grid has only {ny}")
    w_pos, w_neg = weights
    spec = rfftn(x, axes=(-2, -1))
    key_pos = (slice(None), slice(None), slice(0, modes), slice(0, modes))
    key_neg = (slice(None), slice(None), slice(ny - modes, ny), slice(0, modes))
    out_pos = embed(spectral_multiply(take(spec, key_pos), w_pos), spec.shape, key_pos)
    out_neg = embed(spectral_multiply(take(spec, key_neg), w_neg), spec.shape, key_neg)
    return irfftn(add(out_pos, out_neg), axes=(-2, -1), out_lens=spatial)


class FnoModel:
    """The surrogate operator G_theta shared by data, strong-form and
    variational training."""

    def __init__(self, config: FnoConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self._params: dict[str, Tensor] = {}
        self._coord_cache: dict[tuple[int, ...], np.ndarray] = {}
        rng = RngStream(self.seed, stream=0x494E4954)
        w = config.width
        d = config.spatial_dim
        in_total = config.in_channels + (d if config.append_coords else 0)

        def uniform_param(name, shape, fan_in):
            bound = np.sqrt(1.0 / fan_in)
            self._params[name] = Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

        def zero_param(name, shape):
            self._params[name] = Tensor(np.zeros(shape), requires_grad=True)

        uniform_param("lift.w1", (w, in_total), in_total)
        zero_param("lift.b1", (w,))
        uniform_param("lift.w2", (w, w), w)
        zero_param("lift.b2", (w,))
        spec_scale = 1.0 / (w * w)
        mshape = (w, w, config.modes) if d == 1 else (w, w, config.modes, config.modes)
        for l in range(config.layers):
            if d == 1:
                re = rng.normal(mshape)
                im = rng.normal(mshape)
                self._params[f"layer{l}.spec"] = Tensor(spec_scale * (re + 1j * im),
                                                        requires_grad=True)
            else:
                for tag in ("spec_pos", "spec_neg"):
                    re = rng.normal(mshape)
                    im = rng.normal(mshape)
                    self._params[f"layer{l}.{tag}"] = Tensor(spec_scale * (re + 1j * im),
                                                             requires_grad=True)
            uniform_param(f"layer{l}.point", (w, w), w)
        hidden = _proj_hidden(w)
        uniform_param("proj.w1", (hidden, w), w)
        zero_param("proj.b1", (hidden,))
        # zero-initialized head: the model starts at the zero field, which
        # satisfies the homogeneous BCs and keeps early energy steps small
        zero_param("proj.w2", (config.out_channels, hidden))
        zero_param("proj.b2", (config.out_channels,))

    # -- parameters ------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self._params.values())

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self._params)

    def n_parameters(self) -> int:
        return sum(2 * p.size if np.iscomplexobj(p.data) else p.size
                   for p in self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        """Float64 arrays only; complex weights split into .re / .im pairs."""
        out = {}
        for name, p in self._params.items():
            if np.iscomplexobj(p.data):
                out[name + ".re"] = p.data.real.copy()
                out[name + ".im"] = p.data.imag.copy()
            else:
                out[name] = p.data.copy()
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self._params.items():
            if np.iscomplexobj(p.data):
                loaded = state[name + ".re"].astype(np.float64) \
                    + 1j * state[name + ".im"].astype(np.float64)
            else:
                loaded = state[name].astype(np.float64)
            if loaded.shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}: "
                                 f"{loaded.shape} vs {p.data.shape}")
            p.data = loaded

    # -- evaluation --------------------------------------------------------

    def _coords(self, batch: int, spatial: tuple[int, ...]) -> np.ndarray:
        cached = self._coord_cache.get(spatial)
        if cached is None:
            if len(spatial) == 1:
                cached = np.linspace(0.0, 1.0, spatial[0])[None, :]
            else:
                ny, nx = spatial
                xs = np.broadcast_to(np.linspace(0.0, 1.0, nx)[None, :], (ny, nx))
                ys = np.broadcast_to(np.linspace(0.0, 1.0, ny)[:, None], (ny, nx))
                cached = np.stack([xs, ys])
            self._coord_cache[spatial] = cached
        return np.broadcast_to(cached[None], (batch,) + cached.shape).copy()

    def _pointwise_pair(self, x: Tensor, prefix: str) -> Tensor:
        h = add_channel_bias(channel_linear(self._params[f"{prefix}.w1"], x),
                             self._params[f"{prefix}.b1"])
        h = gelu(h)
        return add_channel_bias(channel_linear(self._params[f"{prefix}.w2"], h),
                                self._params[f"{prefix}.b2"])

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.config
        if x.data.ndim != cfg.spatial_dim + 2:
            raise ValueError(f"expected [batch, channels, grid...] with {cfg.spatial_dim} "
                             f"spatial axes, got shape {x.shape}")
        if x.shape[1] != cfg.in_channels:
            raise ValueError(f"channel-count mismatch: model expects {cfg.in_channels}, "
                             f"input has {x.shape[1]}")
        spatial = x.shape[2:]
        _check_modes(cfg, spatial)
        if cfg.append_coords:
            coords = Tensor(self._coords(x.shape[0], spatial))
            x = concat([x, coords], axis=1)
        h = self._pointwise_pair(x, "lift")
        for l in range(cfg.layers):
            if cfg.spatial_dim == 1:
                weights = self._params[f"layer{l}.spec"]
            else:
                weights = (self._params[f"layer{l}.spec_pos"],
                           self._params[f"layer{l}.spec_neg"])
            y = add(spectral_conv(h, weights, cfg.modes),
                    channel_linear(self._params[f"layer{l}.point"], h))
            h = gelu(y) if l < cfg.layers - 1 else y
        return self._pointwise_pair(h, "proj")
