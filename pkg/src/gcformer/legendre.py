"""Translated-Legendre (LegT) state-space machinery.

The LegT generator ``(A, B)`` is a continuous-time system; it is scaled by
``1/theta`` with the HiPPO sign convention ``dx/dt = -A/theta x + B/theta u``
and discretized with the bilinear transform at one sample per step. The
state ``x_k`` then holds Legendre coefficients of the last ``theta`` samples,
so that ``u(t - r*theta) ~= sum_j x_j P_j(2r - 1)`` for delay fraction ``r``.
The trapezoidal rule behind the bilinear transform centres sample ``k - i``
at delay ``(i + 1/2) / theta``; reconstruction grids use those midpoints.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre

from .errors import InvalidArgumentError, NumericError
from .numerics import causal_convolve


@dataclass(frozen=True)
class StateSpaceSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0
    discrete: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d):
            raise InvalidArgumentError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(-1)
        if B.size != d or C.size != d:
            raise InvalidArgumentError(f"B and C need {d} entries, got {B.size} and {C.size}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(self.D))

    @property
    def order(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class LegendreCoeffs:
    """Per-step LegT coefficients: ``values[k]`` describes the window ending at step ``k``."""

    values: np.ndarray
    theta: float

    @property
    def order(self):
        return self.values.shape[-1]

    def __len__(self):
        return self.values.shape[0]


def legt_matrices(d):
    """Integer LegT generator: ``A[n,k] = (2n+1)(-1)^(n-k)`` for ``k <= n`` else ``2n+1``; ``B[n] = (2n+1)(-1)^n``."""
    d = int(d)
    if d < 1:
        raise InvalidArgumentError(f"LegT order must be >= 1, got {d}")
    n = np.arange(d)
    r = (2 * n + 1).astype(float)
    row, col = np.meshgrid(n, n, indexing="ij")
    sign = np.where(col <= row, (-1.0) ** (row - col), 1.0)
    return sign * r[:, None], r * (-1.0) ** n


def legt_continuous(d, theta):
    """LegT generator with window ``theta`` in the ``dx/dt = A' x + B' u`` convention."""
    if not theta > 0:
        raise InvalidArgumentError(f"window must be positive, got {theta}")
    A, B = legt_matrices(d)
    return -A / theta, B / theta


def discretize(A, B, dt=1.0, method="bilinear"):
    """Bilinear (Tustin) discretization of ``dx/dt = A x + B u`` with step ``dt``."""
    if method != "bilinear":
        raise InvalidArgumentError(f"unsupported discretization {method!r}")
    if not dt > 0:
        raise InvalidArgumentError(f"step must be positive, got {dt}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    eye = np.eye(A.shape[0])
    lhs = eye - 0.5 * dt * A
    cond = np.linalg.cond(lhs)
    if not np.isfinite(cond) or cond > 1.0 / np.finfo(float).eps:
        raise NumericError(f"I - dt/2*A is singular (condition number {cond:.3e})")
    Ad = np.linalg.solve(lhs, eye + 0.5 * dt * A)
    Bd = np.linalg.solve(lhs, dt * B.reshape(A.shape[0], -1)).reshape(B.shape)
    return Ad, Bd


def readout_vector(d, theta):
    """Weights reading the reconstruction at the newest sample (delay ``1/(2 theta)``)."""
    return eval_legendre(np.arange(d), 1.0 / theta - 1.0)


def legt_system(d, theta, dt=1.0, C=None, D=0.0):
    """Discrete LegT system; the default ``C`` is :func:`readout_vector`."""
    A, B = discretize(*legt_continuous(d, theta), dt=dt)
    if C is None:
        C = readout_vector(d, theta)
    return StateSpaceSystem(A, B, C, D, discrete=True)


def spectral_radius(A):
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(A)))))


def power_spectral_bound(A, steps=200):
    """Gelfand estimate ``||A^k||_2^(1/k)`` via repeated multiplication."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M = np.eye(A.shape[0])
    log_scale = 0.0
    for _ in range(steps):
        M = A @ M
        s = np.linalg.norm(M, 2)
        if s == 0.0:
            return 0.0
        log_scale += np.log(s)
        M /= s
    return float(np.exp(log_scale / steps))


def _require_discrete(sys):
    if not sys.discrete:
        raise InvalidArgumentError("system must be discretized first")


def ssm_recurrence(sys, u):
    """Run ``x_k = A x_{k-1} + B u_k``, ``y_k = C x_k + D u_k`` from ``x_0 = 0``."""
    _require_discrete(sys)
    u = np.asarray(u, dtype=float)
    x = np.zeros(sys.order)
    y = np.empty(u.shape[0])
    for k, uk in enumerate(u):
        x = sys.A @ x + sys.B * uk
        if not np.all(np.isfinite(x)):
            raise NumericError(f"state diverged at step {k}")
        y[k] = sys.C @ x + sys.D * uk
    return y


def _impulse_states(sys, n):
    # rows are A^i B, i = 0..n-1
    out = np.empty((n, sys.order))
    v = sys.B.copy()
    for i in range(n):
        out[i] = v
        v = sys.A @ v
    if not np.all(np.isfinite(out)):
        raise NumericError("kernel overflow while iterating A^i B")
    return out


def materialize_ssm_kernel(sys, n):
    """``K_i = C A^i B`` for ``i < n``, by iterated matrix-vector products."""
    _require_discrete(sys)
    return _impulse_states(sys, int(n)) @ sys.C


def legt_project(u, d_leg, theta=None):
    """Run the discretized LegT system over ``u`` and keep every state."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    if n < 1:
        raise InvalidArgumentError("cannot project an empty signal")
    theta = float(n if theta is None else theta)
    sys = legt_system(d_leg, theta)
    x = np.zeros(d_leg)
    out = np.empty((n, d_leg))
    for k in range(n):
        x = sys.A @ x + sys.B * u[k]
        out[k] = x
    if not np.all(np.isfinite(out)):
        raise NumericError("LegT projection diverged")
    return LegendreCoeffs(out, theta)


def legendre_basis(order, delays):
    """Orthonormal Legendre basis ``g_j(r) = sqrt(2j+1) P_j(2r - 1)`` on delay fractions ``r``."""
    j = np.arange(order)
    return np.sqrt(2 * j + 1)[None, :] * eval_legendre(j[None, :], 2.0 * np.asarray(delays, float)[:, None] - 1.0)


def legt_reconstruct(coeffs, theta=None, step=-1):
    """Rebuild the window behind ``coeffs.values[step]``, oldest sample first.

    The state is expanded as ``sum_j c_j g_j`` with ``c_j = x_j / sqrt(2j+1)``
    and the orthonormal basis of :func:`legendre_basis`, evaluated at the
    sample midpoints ``(i + 1/2) / theta``.
    """
    theta = coeffs.theta if theta is None else float(theta)
    length = max(int(round(theta)), 1)
    x = np.asarray(coeffs.values, dtype=float)
    x = x[step] if x.ndim == 2 else x
    j = np.arange(x.shape[-1])
    c = x / np.sqrt(2 * j + 1)
    delays = (np.arange(length) + 0.5) / theta
    return (legendre_basis(x.shape[-1], delays) @ c)[::-1]


def legt_readout(coeffs, theta=None):
    """Reconstruction at the newest sample of each step's window."""
    if isinstance(coeffs, LegendreCoeffs):
        values, theta = coeffs.values, coeffs.theta if theta is None else theta
    else:
        values = np.asarray(coeffs)
    return values @ readout_vector(values.shape[-1], theta)


def _leg_weights(params, d_leg=None):
    w = np.asarray(params.weights if hasattr(params, "weights") else params, dtype=float)
    if d_leg is not None and w.shape[-1] != d_leg:
        raise InvalidArgumentError(f"kernel has order {w.shape[-1]}, projection uses {d_leg}")
    return w


def apply_leg_kernel(u, params, theta=None):
    """Project, causally filter each coefficient channel with its kernel column, read out.

    ``params.weights`` has shape ``(m, d_leg)``; column ``j`` filters
    coefficient ``j`` along time.
    """
    w = _leg_weights(params)
    if w.ndim != 2:
        raise InvalidArgumentError("apply_leg_kernel takes a single (m, d_leg) kernel")
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    m, d_leg = w.shape
    if m > n:
        raise InvalidArgumentError(f"kernel length {m} exceeds signal length {n}")
    coeffs = legt_project(u, d_leg, theta)
    kern = np.zeros((d_leg, n))
    kern[:, :m] = w.T
    filtered = causal_convolve(coeffs.values.T, kern).T
    return legt_readout(filtered, coeffs.theta)


def leg_kernel_basis(m, d_leg, n, theta=None):
    """Linear map from flattened ``(m, d_leg)`` kernel weights to the equivalent length-``n`` time kernel.

    Column ``i * d_leg + j`` is the impulse response of coefficient ``j``
    delayed by ``i`` samples and read out at the newest sample.
    """
    theta = float(n if theta is None else theta)
    if m > n:
        raise InvalidArgumentError(f"kernel length {m} exceeds length {n}")
    resp = _impulse_states(legt_system(d_leg, theta), n) * readout_vector(d_leg, theta)
    basis = np.zeros((n, m, d_leg))
    for i in range(m):
        basis[i:, i, :] = resp[: n - i]
    return basis.reshape(n, m * d_leg)


def materialize_leg_kernel(weights, n, theta=None):
    """Time-domain kernel ``k`` with ``causal_convolve(u, k) == apply_leg_kernel(u, weights)``."""
    w = _leg_weights(weights)
    m, d_leg = w.shape[-2:]
    basis = leg_kernel_basis(m, d_leg, n, theta)
    return w.reshape(*w.shape[:-2], m * d_leg) @ basis.T
