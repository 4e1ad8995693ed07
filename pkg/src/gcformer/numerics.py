"""Real FFT, FFT-based convolution and finite-difference gradients.

All transforms act on the last axis and broadcast over leading axes.
Normalization lives entirely on the inverse transform.
"""

import numpy as np

from .errors import InvalidArgumentError, NumericError


def _as_real(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise InvalidArgumentError(f"{name} must have at least one axis")
    return x


def rfft(signal):
    """Forward DFT of a real signal, non-redundant half (``n // 2 + 1`` modes)."""
    signal = _as_real(signal, "signal")
    if signal.shape[-1] == 0:
        raise InvalidArgumentError("rfft of an empty signal")
    return np.fft.rfft(signal, axis=-1)


def irfft(spec, n):
    """Inverse of :func:`rfft` with the 1/n factor; ``spec`` must hold ``n // 2 + 1`` modes."""
    spec = np.asarray(spec, dtype=complex)
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"irfft length must be >= 1, got {n}")
    if spec.ndim == 0 or spec.shape[-1] != n // 2 + 1:
        got = None if spec.ndim == 0 else spec.shape[-1]
        raise InvalidArgumentError(f"spectrum has {got} modes, length {n} needs {n // 2 + 1}")
    return np.fft.irfft(spec, n=n, axis=-1)


def _check_pair(u, k):
    u = _as_real(u, "u")
    k = _as_real(k, "k")
    if u.shape[-1] != k.shape[-1]:
        raise InvalidArgumentError(f"length mismatch: {u.shape[-1]} vs {k.shape[-1]}")
    if u.shape[-1] == 0:
        raise InvalidArgumentError("empty signal")
    return u, k


def circular_convolve(u, k):
    """Periodic convolution ``y_t = sum_i k_i u_{(t-i) mod n}``."""
    u, k = _check_pair(u, k)
    n = u.shape[-1]
    return irfft(rfft(u) * rfft(k), n)


def causal_convolve(u, k):
    """Causal convolution ``y_t = sum_{i<=t} k_i u_{t-i}``.

    Both inputs are zero-padded to ``2n`` so the circular wraparound never
    reaches the first ``n`` outputs.
    """
    u, k = _check_pair(u, k)
    n = u.shape[-1]
    m = 2 * n
    y = np.fft.irfft(np.fft.rfft(u, n=m, axis=-1) * np.fft.rfft(k, n=m, axis=-1), n=m, axis=-1)
    return y[..., :n]


def causal_correlate(g, k):
    """Adjoint of :func:`causal_convolve` in its first argument.

    ``out_s = sum_{t>=s} g_t k_{t-s}``; also yields the kernel gradient when
    ``k`` is the input signal.
    """
    return causal_convolve(g[..., ::-1], k)[..., ::-1]


def finite_difference_gradient(f, x, h=1e-5):
    """Central-difference gradient of a scalar function at ``x``."""
    if not h > 0:
        raise InvalidArgumentError(f"step must be positive, got {h}")
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value while perturbing coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
