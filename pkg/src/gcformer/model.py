"""Dual-branch GCformer forecaster.

Inputs are ``(batch, N, C)`` arrays. Channels are processed independently:
they are folded into the batch for both branches and only mix when the
decoder attends across the channel axis.

Parameters live in a flat, ordered ``{name: ndarray}`` table. The forward
pass wraps them in :class:`~gcformer.autodiff.Tensor` leaves, so the same
code path serves inference and gradient computation.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import autodiff as ad
from .errors import InvalidArgumentError, InvalidStateError, NumericError
from .kernels import KernelSpec, kernel_basis, msk_num_scales

DECODER_MODES = ("attention", "concat", "series_gl", "series_lg", "local_only", "global_only")
ATTENTION_AXES = ("token", "channel")


@dataclass(frozen=True)
class ModelConfig:
    input_len: int = 336
    local_len: int = 96
    pred_len: int = 96
    channels: int = 1
    kernel: str = "msk"
    msk_base_len: int = 16
    msk_scales: int = 0  # 0 picks the smallest count covering input_len
    msk_decay: float = 0.5
    freq_modes: int = 64
    leg_order: int = 64
    leg_kernel_len: int = 8
    leg_theta: float = 0.0  # 0 means the input length
    patch_len: int = 16
    patch_stride: int = 8
    hidden_dim: int = 16
    decoder_mode: str = "attention"
    attention_axis: str = "token"
    channel_independent: bool = True
    mlp_depth: int = 1
    decoder_residual: bool = True
    revin_eps: float = 1e-5
    kernel_init_std: float = 1e-2

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise InvalidArgumentError("; ".join(errors))

    def validation_errors(self):
        errs = []
        for name in ("input_len", "local_len", "pred_len", "channels", "patch_len", "patch_stride",
                     "hidden_dim", "mlp_depth", "msk_base_len", "freq_modes", "leg_order", "leg_kernel_len"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if self.local_len > self.input_len:
            errs.append(f"local_len {self.local_len} exceeds input_len {self.input_len}")
        if self.patch_len > self.local_len:
            errs.append(f"patch_len {self.patch_len} exceeds local_len {self.local_len}")
        if self.kernel not in ("msk", "freq", "leg"):
            errs.append(f"kernel must be msk, freq or leg, got {self.kernel!r}")
        if self.kernel == "freq" and self.freq_modes > self.input_len // 2 + 1:
            errs.append(f"freq_modes {self.freq_modes} exceeds {self.input_len // 2 + 1} available modes")
        if self.kernel == "leg" and self.leg_kernel_len > self.input_len:
            errs.append(f"leg_kernel_len {self.leg_kernel_len} exceeds input_len {self.input_len}")
        if self.msk_scales < 0:
            errs.append("msk_scales must be >= 0")
        if not 0 < self.msk_decay <= 1:
            errs.append(f"msk_decay must lie in (0, 1], got {self.msk_decay}")
        if self.decoder_mode not in DECODER_MODES:
            errs.append(f"decoder_mode must be one of {DECODER_MODES}, got {self.decoder_mode!r}")
        if self.attention_axis not in ATTENTION_AXES:
            errs.append(f"attention_axis must be one of {ATTENTION_AXES}, got {self.attention_axis!r}")
        if self.revin_eps < 0:
            errs.append("revin_eps must be >= 0")
        return errs

    @property
    def num_patches(self):
        return (self.local_len - self.patch_len) // self.patch_stride + 1

    @property
    def num_scales(self):
        return self.msk_scales or msk_num_scales(self.input_len, self.msk_base_len)

    @property
    def kernel_channels(self):
        return 1 if self.channel_independent else self.channels

    @property
    def theta(self):
        return self.leg_theta or float(self.input_len)

    def kernel_shape(self):
        if self.kernel == "msk":
            return dict(num_scales=self.num_scales, base_len=self.msk_base_len, decay=self.msk_decay)
        if self.kernel == "freq":
            return dict(modes=self.freq_modes)
        return dict(kernel_len=self.leg_kernel_len, order=self.leg_order, theta=self.theta)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise InvalidArgumentError(f"unknown model config keys: {', '.join(unknown)}")
        return cls(**d)

    def replace(self, **kw):
        return replace(self, **kw)


# RevIN


@dataclass(frozen=True)
class RevinState:
    mean: np.ndarray
    var: np.ndarray
    gamma: object
    beta: object
    eps: float


def revin_normalize(x, gamma=None, beta=None, eps=1e-5, axis=-2):
    """Standardize each channel over time, then apply the affine ``gamma, beta``.

    ``x`` is ``(..., T, C)``; statistics use the population variance and are
    treated as constants. ``gamma``/``beta`` may be arrays or tensors.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[axis] < 1:
        raise InvalidArgumentError("RevIN needs at least one time step")
    C = x.shape[-1]
    gamma = np.ones(C) if gamma is None else gamma
    beta = np.zeros(C) if beta is None else beta
    # reduce along a contiguous last axis so every channel sees the same summation order
    xt = np.ascontiguousarray(np.moveaxis(x, axis, -1))
    mu = xt.mean(axis=-1, keepdims=True)
    mean = np.moveaxis(mu, -1, axis)
    var = np.moveaxis(((xt - mu) ** 2).mean(axis=-1, keepdims=True), -1, axis)
    z = (x - mean) / np.sqrt(var + eps)
    state = RevinState(mean, var, gamma, beta, float(eps))
    return z * gamma + beta, state


def revin_denormalize(y, state):
    """Invert :func:`revin_normalize` with the stored instance statistics."""
    g = state.gamma.data if isinstance(state.gamma, ad.Tensor) else np.asarray(state.gamma)
    if np.any(g == 0):
        raise InvalidStateError("cannot invert RevIN with a zero gamma")
    return (y - state.beta) / state.gamma * np.sqrt(state.var + state.eps) + state.mean


def cross_attention(q, k, v):
    """``softmax(q k^T / sqrt(h)) v`` over the last two axes."""
    q, k, v = np.asarray(q, float), np.asarray(k, float), np.asarray(v, float)
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise InvalidArgumentError(f"incompatible shapes {q.shape}, {k.shape}, {v.shape}")
    return _attention(ad.Tensor(q), ad.Tensor(k), ad.Tensor(v)).data


def _attention(q, k, v):
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(q.shape[-1]))
    return ad.softmax(scores, axis=-1) @ v


# parameters


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _mlp_params(rng, prefix, h, depth):
    out = OrderedDict()
    for i in range(depth):
        out[f"{prefix}.{i}.weight"] = _uniform(rng, (h, h), h)
        out[f"{prefix}.{i}.bias"] = np.zeros(h)
    return out


def head_tokens(cfg):
    mode = cfg.decoder_mode
    if mode in ("series_gl", "local_only"):
        return cfg.num_patches
    if mode == "series_lg":
        return cfg.local_len
    return cfg.input_len


def init_params(cfg, seed=0):
    rng = np.random.default_rng(seed)
    h, C, N, P = cfg.hidden_dim, cfg.channels, cfg.input_len, cfg.num_patches
    d = cfg.kernel_channels
    p = OrderedDict()
    p["revin.gamma"] = np.ones(C)
    p["revin.beta"] = np.zeros(C)
    mode = cfg.decoder_mode
    uses_global = mode != "local_only"
    uses_local = mode != "global_only"
    if uses_global:
        std = cfg.kernel_init_std
        if cfg.kernel == "msk":
            p["global.kernel"] = rng.normal(0.0, std, size=(d, cfg.num_scales, cfg.msk_base_len))
        elif cfg.kernel == "freq":
            p["global.kernel.real"] = rng.normal(0.0, std, size=(d, cfg.freq_modes))
            p["global.kernel.imag"] = rng.normal(0.0, std, size=(d, cfg.freq_modes))
        else:
            p["global.kernel"] = rng.normal(0.0, std, size=(d, cfg.leg_kernel_len, cfg.leg_order))
        p["global.proj.weight"] = _uniform(rng, (1, h), 1)
        p["global.proj.bias"] = np.zeros(h)
    if uses_local:
        p["local.embed.weight"] = _uniform(rng, (cfg.patch_len, h), cfg.patch_len)
        p["local.embed.bias"] = np.zeros(h)
        p["local.pos"] = np.zeros((P, h))  # learned; zero start keeps constant inputs exact
        for name in ("q", "k", "v"):
            p[f"local.attn.{name}"] = _uniform(rng, (h, h), h)
    if mode == "attention":
        for name in ("q", "k", "v"):
            p.update(_mlp_params(rng, f"decoder.{name}", h, cfg.mlp_depth))
        if cfg.attention_axis == "channel":
            p["decoder.align.weight"] = _uniform(rng, (P, N), P)
    elif mode == "concat":
        p["decoder.align.weight"] = _uniform(rng, (P, N), P)
        # start by passing the global tokens through; the local half is learned from zero
        p["decoder.merge.weight"] = np.concatenate([np.eye(N), np.zeros((N, N))], axis=0)
        p["decoder.merge.bias"] = np.zeros(N)
    elif mode == "series_lg":
        p["decoder.unpatch.weight"] = _uniform(rng, (P * h, cfg.local_len), P * h)
        p["decoder.unpatch.bias"] = np.zeros(cfg.local_len)
    T = head_tokens(cfg)
    p["head.weight"] = _uniform(rng, (T * h, cfg.pred_len), T * h)
    p["head.bias"] = np.zeros(cfg.pred_len)
    return p


class GCformerModel:
    def __init__(self, config, params):
        self.config = config
        expected = init_params(config, 0)
        if list(params) != list(expected):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise InvalidArgumentError(f"parameter table mismatch; missing={missing} unexpected={extra}")
        for name, arr in params.items():
            if np.shape(arr) != expected[name].shape:
                raise InvalidArgumentError(f"{name}: shape {np.shape(arr)} != {expected[name].shape}")
        self.params = OrderedDict((k, np.array(v, dtype=float)) for k, v in params.items())
        self._bases = {}

    @classmethod
    def init(cls, config, seed=0):
        return cls(config, init_params(config, seed))

    def copy(self, params=None):
        new = GCformerModel(self.config, self.params if params is None else params)
        new._bases = self._bases
        return new

    @property
    def parameter_names(self):
        return list(self.params)

    def num_parameters(self):
        return int(sum(v.size for v in self.params.values()))

    def parameter_groups(self):
        """Learnable reals per component (``revin``, ``global.kernel``, ``global.proj``, ``local``, ``decoder``, ``head``)."""
        groups = OrderedDict()
        for name, v in self.params.items():
            parts = name.split(".")
            key = ".".join(parts[:2]) if parts[0] == "global" else parts[0]
            groups[key] = groups.get(key, 0) + int(v.size)
        return groups

    def flat_parameters(self):
        return np.concatenate([v.reshape(-1) for v in self.params.values()])

    def with_flat_parameters(self, flat):
        out, i = OrderedDict(), 0
        for k, v in self.params.items():
            out[k] = np.asarray(flat[i:i + v.size], dtype=float).reshape(v.shape)
            i += v.size
        return self.copy(out)

    def kernel_basis(self, n=None):
        n = self.config.input_len if n is None else n
        if n not in self._bases:
            self._bases[n] = kernel_basis(self.config.kernel, n, **self.config.kernel_shape())
        return self._bases[n]

    def kernel_spec(self):
        cfg, p = self.config, self.params
        if cfg.kernel == "msk":
            return KernelSpec.msk(p["global.kernel"], cfg.msk_decay)
        if cfg.kernel == "freq":
            return KernelSpec.freq(p["global.kernel.real"] + 1j * p["global.kernel.imag"])
        return KernelSpec.leg(p["global.kernel"], cfg.theta)

    def materialized_kernel(self, n=None):
        return _kernel(self, _leaves(self.params, False), n).data

    def forward(self, X):
        """Forecast ``(B, H, C)`` from ``(B, N, C)`` (or ``(H, C)`` from ``(N, C)``)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2
        Y = _forward(self, _leaves(self.params, False), X[None] if single else X).data
        return Y[0] if single else Y

    __call__ = forward


def _leaves(params, requires_grad):
    return OrderedDict((k, ad.Tensor(v, requires_grad=requires_grad)) for k, v in params.items())


# forward pieces operating on tensors


def _kernel(model, p, n=None):
    cfg = model.config
    basis = model.kernel_basis(cfg.input_len)
    if cfg.kernel == "freq":
        flat = ad.concat([p["global.kernel.real"], p["global.kernel.imag"]], axis=-1)
    else:
        w = p["global.kernel"]
        flat = w.reshape(w.shape[0], -1)
    k = flat @ basis.T  # (d, N)
    if n is not None and n != cfg.input_len:
        k = k[:, :n]
    return k


def _mlp(p, prefix, x, depth):
    for i in range(depth):
        x = x @ p[f"{prefix}.{i}.weight"] + p[f"{prefix}.{i}.bias"]
        if i < depth - 1:
            x = ad.gelu(x)
    return x


def _pointwise(p, y):
    # (..., T) -> (..., T, h)
    return y.reshape(*y.shape, 1) @ p["global.proj.weight"] + p["global.proj.bias"]


def _global_series(model, p, x):
    """Causal global convolution of ``(B, C, T)`` with the per-channel kernel."""
    T = x.shape[-1]
    return ad.causal_conv(x, _kernel(model, p, T))


def _global_branch(model, p, x):
    return _pointwise(p, _global_series(model, p, x))


def _patch_index(cfg):
    starts = np.arange(cfg.num_patches) * cfg.patch_stride
    return starts[:, None] + np.arange(cfg.patch_len)[None, :]


def _local_branch(model, p, x_tail):
    cfg = model.config
    patches = x_tail[..., _patch_index(cfg)]  # (B, C, P, L)
    e = patches @ p["local.embed.weight"] + p["local.embed.bias"] + p["local.pos"]
    q, k, v = e @ p["local.attn.q"], e @ p["local.attn.k"], e @ p["local.attn.v"]
    return e + _attention(q, k, v)


def _align(p, z):
    # (B, C, P, h) -> (B, C, N, h) by a learned map over the token axis
    return (z.swapaxes(-1, -2) @ p["decoder.align.weight"]).swapaxes(-1, -2)


def _decode(model, p, z_global, z_local):
    cfg = model.config
    mode = cfg.decoder_mode
    if mode == "attention":
        d = cfg.mlp_depth
        q = _mlp(p, "decoder.q", z_global, d)
        if cfg.attention_axis == "channel":
            z_local = _align(p, z_local)
        k = _mlp(p, "decoder.k", z_local, d)
        v = _mlp(p, "decoder.v", z_local, d)
        if cfg.attention_axis == "channel":
            perm = (0, 2, 1, 3)
            out = _attention(q.transpose(*perm), k.transpose(*perm), v.transpose(*perm)).transpose(*perm)
        else:
            out = _attention(q, k, v)
        z = out + q if cfg.decoder_residual else out
    elif mode == "concat":
        z = ad.concat([z_global, _align(p, z_local)], axis=-2)
        z = (z.swapaxes(-1, -2) @ p["decoder.merge.weight"] + p["decoder.merge.bias"]).swapaxes(-1, -2)
    elif mode == "global_only":
        z = z_global
    elif mode == "local_only":
        z = z_local
    else:
        raise InvalidArgumentError(f"decoder mode {mode!r} composes branches serially; use the model forward")
    return _head(p, z)


def _head(p, z):
    B, C, T, h = z.shape
    return z.reshape(B, C, T * h) @ p["head.weight"] + p["head.bias"]


def _forward_normalized(model, p, xn):
    """``xn``: normalized tensor ``(B, C, N)`` -> normalized forecast ``(B, C, H)``."""
    cfg = model.config
    tail = xn[..., cfg.input_len - cfg.local_len:]
    mode = cfg.decoder_mode
    if mode == "series_gl":
        g = _global_series(model, p, xn)
        return _head(p, _local_branch(model, p, g[..., cfg.input_len - cfg.local_len:]))
    if mode == "series_lg":
        z = _local_branch(model, p, tail)
        B, C, P, h = z.shape
        s = z.reshape(B, C, P * h) @ p["decoder.unpatch.weight"] + p["decoder.unpatch.bias"]
        return _head(p, _global_branch(model, p, s))
    z_global = _global_branch(model, p, xn) if mode != "local_only" else None
    z_local = _local_branch(model, p, tail) if mode != "global_only" else None
    return _decode(model, p, z_global, z_local)


def _check_input(cfg, X):
    if X.ndim != 3 or X.shape[1] != cfg.input_len or X.shape[2] != cfg.channels:
        raise InvalidArgumentError(f"expected input (B, {cfg.input_len}, {cfg.channels}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("input contains non-finite values")


def _forward(model, p, X):
    cfg = model.config
    _check_input(cfg, X)
    stats_from = X[:, -cfg.local_len:] if cfg.decoder_mode == "local_only" else X
    _, state = revin_normalize(stats_from, eps=cfg.revin_eps)
    z = (X - state.mean) / np.sqrt(state.var + cfg.revin_eps)
    xn = z * p["revin.gamma"] + p["revin.beta"]  # (B, N, C)
    yn = _forward_normalized(model, p, xn.swapaxes(1, 2)).swapaxes(1, 2)  # (B, H, C)
    state = RevinState(state.mean, state.var, p["revin.gamma"], p["revin.beta"], cfg.revin_eps)
    return revin_denormalize(yn, state)


# public per-stage entry points (numpy in, numpy out)


def _normalized_channels(model, X):
    X = np.asarray(X, dtype=float)
    p = _leaves(model.params, False)
    xn, _ = revin_normalize(X, p["revin.gamma"].data, p["revin.beta"].data, model.config.revin_eps)
    return p, xn.T[None]  # (1, C, N)


def global_branch_forward(model, X):
    """``(N, C)`` -> ``(C, N, h)`` global features (expects already-normalized input)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != model.config.input_len:
        raise InvalidArgumentError(f"global branch expects {model.config.input_len} steps, got {X.shape[0]}")
    p = _leaves(model.params, False)
    return _global_branch(model, p, ad.Tensor(X.T[None])).data[0]


def local_branch_forward(model, X_tail):
    """``(N', C)`` -> ``(C, P, h)`` patch-attention features."""
    cfg = model.config
    X_tail = np.asarray(X_tail, dtype=float)
    if cfg.patch_len > X_tail.shape[0]:
        raise InvalidArgumentError(f"patch_len {cfg.patch_len} exceeds tail length {X_tail.shape[0]}")
    if X_tail.shape[0] != cfg.local_len:
        raise InvalidArgumentError(f"local branch expects {cfg.local_len} steps, got {X_tail.shape[0]}")
    p = _leaves(model.params, False)
    return _local_branch(model, p, ad.Tensor(X_tail.T[None])).data[0]


def decode(model, z_global, z_local):
    """Fuse ``(C, N, h)`` and ``(C, P, h)`` features into a normalized ``(C, H)`` forecast."""
    p = _leaves(model.params, False)
    zg = None if z_global is None else ad.Tensor(np.asarray(z_global, float)[None])
    zl = None if z_local is None else ad.Tensor(np.asarray(z_local, float)[None])
    head_in = head_tokens(model.config) * model.config.hidden_dim
    if p["head.weight"].shape[0] != head_in:
        raise InvalidArgumentError("head size does not match decoder mode")
    return _decode(model, p, zg, zl).data[0]


def gcformer_forward(model, X):
    return model.forward(X)


# gradients


def mse_loss(pred, target):
    diff = pred - target
    return (diff * diff).mean()


def parameter_gradients(model, X, Y, loss=mse_loss):
    """Loss value and ``{name: gradient}`` aligned with ``model.params``."""
    p = _leaves(model.params, True)
    out = loss(_forward(model, p, np.asarray(X, dtype=float)), np.asarray(Y, dtype=float))
    value = float(out.data)
    if not np.isfinite(value):
        raise NumericError("loss is not finite")
    out.backward()
    grads = OrderedDict()
    for k, t in p.items():
        grads[k] = np.zeros_like(t.data) if t.grad is None else t.grad
    return value, grads


def loss_value(model, X, Y, loss=mse_loss):
    return float(loss(ad.Tensor(model.forward(X)), ad.Tensor(np.asarray(Y, dtype=float))).data)
