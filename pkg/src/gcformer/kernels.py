"""Global convolution kernels with sublinear parameter counts.

Three parameterizations share one contract: given a target length ``n`` they
produce a time-domain kernel (or apply themselves natively). Parameter
arrays may carry leading channel axes; everything broadcasts over them.

* ``msk``  - multi-scale sub-kernels, upsampled and decayed per scale
* ``freq`` - complex weights on the lowest ``m`` rFFT modes
* ``leg``  - a short kernel acting on LegT coefficient channels
"""

from dataclasses import dataclass, field

import numpy as np

from . import legendre
from .errors import InvalidArgumentError
from .numerics import irfft, rfft

VARIANTS = ("msk", "freq", "leg")


@dataclass(frozen=True)
class MultiScaleKernelParams:
    sub_kernels: np.ndarray  # (..., S, l0)
    decay: float = 0.5

    @property
    def num_scales(self):
        return self.sub_kernels.shape[-2]

    @property
    def base_len(self):
        return self.sub_kernels.shape[-1]

    @property
    def full_length(self):
        return self.base_len * (2 ** self.num_scales - 1)


@dataclass(frozen=True)
class FreqKernelParams:
    weights: np.ndarray  # complex (..., m)

    @property
    def modes(self):
        return self.weights.shape[-1]


@dataclass(frozen=True)
class LegKernelParams:
    weights: np.ndarray  # (..., m, d_leg)
    theta: float | None = None

    @property
    def kernel_len(self):
        return self.weights.shape[-2]

    @property
    def order(self):
        return self.weights.shape[-1]


_PAYLOADS = {"msk": MultiScaleKernelParams, "freq": FreqKernelParams, "leg": LegKernelParams}


@dataclass(frozen=True)
class KernelSpec:
    variant: str
    payload: object = field(repr=False)

    def __post_init__(self):
        if self.variant not in _PAYLOADS:
            raise InvalidArgumentError(f"unknown kernel variant {self.variant!r}; expected one of {VARIANTS}")
        if not isinstance(self.payload, _PAYLOADS[self.variant]):
            raise InvalidArgumentError(
                f"{self.variant} kernel needs {_PAYLOADS[self.variant].__name__}, got {type(self.payload).__name__}"
            )

    @classmethod
    def msk(cls, sub_kernels, decay=0.5):
        return cls("msk", MultiScaleKernelParams(np.asarray(sub_kernels, dtype=float), float(decay)))

    @classmethod
    def freq(cls, weights):
        return cls("freq", FreqKernelParams(np.asarray(weights, dtype=complex)))

    @classmethod
    def leg(cls, weights, theta=None):
        return cls("leg", LegKernelParams(np.asarray(weights, dtype=float), theta))


def msk_num_scales(n, base_len):
    """Smallest S with ``base_len * (2**S - 1) >= n``."""
    if base_len < 1 or n < 1:
        raise InvalidArgumentError("length and base_len must be positive")
    s = 1
    while base_len * (2 ** s - 1) < n:
        s += 1
    return s


def upsample_linear(length, factor):
    """``(length*factor, length)`` linear-interpolation matrix (half-pixel centres, edge clamped)."""
    out = length * factor
    src = np.clip((np.arange(out) + 0.5) / factor - 0.5, 0.0, length - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, length - 1)
    frac = src - lo
    M = np.zeros((out, length))
    np.add.at(M, (np.arange(out), lo), 1.0 - frac)
    np.add.at(M, (np.arange(out), hi), frac)
    return M


def msk_basis(num_scales, base_len, decay, n):
    """Linear map from flattened ``(S, l0)`` sub-kernels to the length-``n`` kernel."""
    if num_scales < 1 or base_len < 1:
        raise InvalidArgumentError(f"need S >= 1 and l0 >= 1, got S={num_scales}, l0={base_len}")
    blocks = []
    for i in range(num_scales):
        up = upsample_linear(base_len, 2 ** i) * decay ** i
        block = np.zeros((up.shape[0], num_scales * base_len))
        block[:, i * base_len:(i + 1) * base_len] = up
        blocks.append(block)
    full = np.concatenate(blocks, axis=0)
    if full.shape[0] >= n:
        return full[:n]
    return np.concatenate([full, np.zeros((n - full.shape[0], full.shape[1]))], axis=0)


def materialize_msk(params, n):
    """Concatenate upsampled, decayed sub-kernels and fit the result to length ``n``."""
    w = np.asarray(params.sub_kernels, dtype=float)
    if w.ndim < 2:
        raise InvalidArgumentError("sub_kernels must have shape (..., S, l0)")
    S, l0 = w.shape[-2:]
    basis = msk_basis(S, l0, params.decay, int(n))
    return w.reshape(*w.shape[:-2], S * l0) @ basis.T


def _check_modes(m, n):
    if m > n // 2 + 1:
        raise InvalidArgumentError(f"{m} modes requested but length {n} has only {n // 2 + 1}")


def apply_freq_kernel(u, params):
    """Multiply the lowest ``m`` modes of ``rfft(u)`` by the weights, zero the rest, invert."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    w = np.asarray(params.weights, dtype=complex)
    m = w.shape[-1]
    _check_modes(m, n)
    U = rfft(u)
    Y = np.zeros(np.broadcast_shapes(U.shape, w.shape[:-1] + U.shape[-1:]), dtype=complex)
    Y[..., :m] = U[..., :m] * w
    return irfft(Y, n)


def freq_basis(m, n):
    """``(n, 2m)`` map from ``[Re w, Im w]`` to ``irfft(pad(w), n)``."""
    _check_modes(m, n)
    t = np.arange(n)[:, None]
    k = np.arange(m)[None, :]
    scale = np.where((k == 0) | ((n % 2 == 0) & (k == n // 2)), 1.0, 2.0) / n
    ang = 2.0 * np.pi * k * t / n
    re = scale * np.cos(ang)
    im = -scale * np.sin(ang)
    # irfft ignores the imaginary part of the DC and Nyquist bins
    im[:, (k[0] == 0) | ((n % 2 == 0) & (k[0] == n // 2))] = 0.0
    return np.concatenate([re, im], axis=1)


def materialize_freq(params, n):
    w = np.asarray(params.weights, dtype=complex)
    m = w.shape[-1]
    _check_modes(m, n)
    spec = np.zeros(w.shape[:-1] + (n // 2 + 1,), dtype=complex)
    spec[..., :m] = w
    return irfft(spec, n)


def materialize_kernel(spec, n):
    """Length-``n`` time-domain kernel for any variant."""
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"kernel length must be >= 1, got {n}")
    p = spec.payload
    if spec.variant == "msk":
        return materialize_msk(p, n)
    if spec.variant == "freq":
        return materialize_freq(p, n)
    return legendre.materialize_leg_kernel(p.weights, n, p.theta)


def kernel_basis(spec_or_variant, n, **shape):
    """Linear map from the flat real parameter vector of one channel to its length-``n`` kernel.

    Accepts a :class:`KernelSpec` or a variant name plus hyperparameters
    (``num_scales``, ``base_len``, ``decay`` / ``modes`` / ``kernel_len``,
    ``order``, ``theta``).
    """
    if isinstance(spec_or_variant, KernelSpec):
        p = spec_or_variant.payload
        variant = spec_or_variant.variant
        if variant == "msk":
            shape = dict(num_scales=p.num_scales, base_len=p.base_len, decay=p.decay)
        elif variant == "freq":
            shape = dict(modes=p.modes)
        else:
            shape = dict(kernel_len=p.kernel_len, order=p.order, theta=p.theta)
    else:
        variant = spec_or_variant
    if variant == "msk":
        return msk_basis(shape["num_scales"], shape["base_len"], shape.get("decay", 0.5), n)
    if variant == "freq":
        return freq_basis(shape["modes"], n)
    if variant == "leg":
        return legendre.leg_kernel_basis(shape["kernel_len"], shape["order"], n, shape.get("theta"))
    raise InvalidArgumentError(f"unknown kernel variant {variant!r}")


def param_count(spec, n, d):
    """Learnable reals for ``d`` channels: ``S*l0*d``, ``2*m*d`` or ``m*d_leg*d``.

    For ``msk`` the scale count follows ``n`` when the spec is given as a
    variant name with ``base_len``; a concrete spec uses its own ``S``.
    """
    if isinstance(spec, KernelSpec):
        p = spec.payload
        if spec.variant == "msk":
            per = p.num_scales * p.base_len
        elif spec.variant == "freq":
            per = 2 * p.modes
        else:
            per = p.kernel_len * p.order
        return int(per * d)
    raise InvalidArgumentError("param_count expects a KernelSpec")


def msk_param_count(n, base_len, d):
    """Count for an msk kernel sized to cover ``n`` with sub-kernels of ``base_len``."""
    return msk_num_scales(n, base_len) * base_len * d


def dense_param_count(n, d):
    return n * d


def kernel_to_csv_rows(kernel):
    """``(channel, index, value)`` rows for a ``(n,)`` or ``(d, n)`` kernel."""
    k = np.atleast_2d(np.asarray(kernel, dtype=float))
    return [(c, i, float(v)) for c in range(k.shape[0]) for i, v in enumerate(k[c])]
