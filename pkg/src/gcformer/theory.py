"""Monte Carlo checks of the noise-accumulation and column-selection bounds.

Noise accumulation: for ``x_t = A x_{t-1} + b + eps_{t-1}`` the noise term
unrolled over a window is ``S = sum_{i=1}^{theta-1} A^i eps_{t-i}``. With
unitary ``A`` its per-coordinate scale is ``sigma * sqrt(theta - 1)``; an
expanding ``A`` blows it up geometrically.

Column selection: keeping the first ``s`` columns of ``A`` and approximating
the rest, whose entries are bounded by ``a_min``, costs at most
``sqrt(d (n - s)) * a_min`` in Frobenius norm.

Trial ``i`` draws from ``default_rng([seed, i])`` so results do not depend on
how trials are batched.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError

MATRIX_KINDS = ("unitary_random", "identity", "expanding")
PROJECTIONS = ("zero", "svd", "sampled")


@dataclass(frozen=True)
class NoiseAccumConfig:
    dim: int = 8
    theta: int = 256
    sigma: float = 1.0
    trials: int = 10_000
    kind: str = "unitary_random"
    rho: float = 1.05
    seed: int = 0

    def __post_init__(self):
        if self.trials < 100:
            raise InvalidArgumentError("need at least 100 trials")
        if self.theta < 1 or self.dim < 1:
            raise InvalidArgumentError("theta and dim must be >= 1")
        if self.sigma < 0:
            raise InvalidArgumentError("sigma must be >= 0")
        if self.kind not in MATRIX_KINDS:
            raise InvalidArgumentError(f"kind must be one of {MATRIX_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class NoiseAccumReport:
    config: NoiseAccumConfig
    norms: np.ndarray  # per-trial ||S||_2 / sqrt(dim)
    scale: float  # sqrt(mean ||S||^2 / dim)
    ratio: float  # scale / (sigma sqrt(theta))
    tail_rate: float  # fraction of trials with ||S||/sqrt(dim) >= 3 sigma sqrt(theta)
    diverged: bool

    @property
    def bound(self):
        return 3.0 * self.config.sigma * np.sqrt(self.config.theta)

    @property
    def passed(self):
        """Unitary/identity: scale is O(sigma sqrt(theta)) and the 3-sigma tail stays under 5%."""
        if self.config.sigma == 0:
            return bool(np.all(self.norms == 0))
        return (not self.diverged) and 0.5 <= self.ratio <= 2.0 and self.tail_rate < 0.05

    def to_csv(self):
        return _csv_rows(("trial", "value", "bound"), ((i, v, self.bound) for i, v in enumerate(self.norms)))

    def summary(self):
        c = self.config
        status = "PASS" if self.passed else ("DIVERGED" if self.diverged else "FAIL")
        return (f"noise_accumulation kind={c.kind} theta={c.theta} dim={c.dim} sigma={c.sigma} "
                f"scale={self.scale:.6g} ratio={self.ratio:.4f} tail={self.tail_rate:.4f} {status}")


def random_unitary(dim, rng):
    """Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def transition_matrix(config, rng=None):
    rng = np.random.default_rng([config.seed, -1 % 2**32]) if rng is None else rng
    if config.kind == "identity":
        return np.eye(config.dim)
    Q = random_unitary(config.dim, rng)
    return Q * config.rho if config.kind == "expanding" else Q


def check_unitary(A, samples=16, seed=0, tol=1e-10):
    """Largest ``| ||Ax|| - ||x|| |`` over random unit vectors; raises above ``tol``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, A.shape[0]))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    err = float(np.max(np.abs(np.linalg.norm(x @ A.T, axis=1) - 1.0)))
    if err > tol:
        raise NumericError(f"matrix is not norm-preserving (error {err:.3e})")
    return err


def _matrix_powers(A, count):
    """``[A^1, ..., A^count]`` stacked along axis 0."""
    out = np.empty((count, *A.shape))
    P = np.eye(A.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(count):
            P = P @ A
            out[i] = P
    return out


def noise_accumulation(config=None, chunk=256, **kw):
    """Sample ``S = sum_{i=1}^{theta-1} A^i eps_{t-i}`` across trials."""
    config = config or NoiseAccumConfig(**kw)
    A = transition_matrix(config)
    if config.kind == "unitary_random":
        check_unitary(A)
    steps = config.theta - 1
    # powers[i-1] = A^i pairs with eps_{t-i}; flattened so each chunk is one GEMM
    powers = _matrix_powers(A, steps).transpose(0, 2, 1).reshape(steps * config.dim, config.dim)
    S = np.zeros((config.trials, config.dim))
    for lo in range(0, config.trials, chunk):
        hi = min(lo + chunk, config.trials)
        eps = np.stack([np.random.default_rng([config.seed, i]).standard_normal((steps, config.dim))
                        for i in range(lo, hi)]) * config.sigma
        with np.errstate(over="ignore", invalid="ignore"):
            S[lo:hi] = eps.reshape(hi - lo, -1) @ powers if steps else 0.0
    norms = np.linalg.norm(S, axis=1) / np.sqrt(config.dim)
    diverged = not np.all(np.isfinite(norms))
    finite = norms[np.isfinite(norms)]
    scale = float(np.sqrt(np.mean(finite ** 2))) if finite.size else np.inf
    ref = config.sigma * np.sqrt(config.theta)
    ratio = scale / ref if ref > 0 else 0.0
    tail = float(np.mean(norms >= 3.0 * ref)) if ref > 0 else 0.0
    if config.kind == "expanding" and ratio > 10:
        diverged = True
    return NoiseAccumReport(config, norms, scale, ratio, tail, diverged)


@dataclass(frozen=True)
class ColumnSelectConfig:
    rows: int = 8
    cols: int = 16
    keep: int = 8
    a_min: float = 0.1
    sampled: int = 2
    trials: int = 100
    projection: str = "zero"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.keep <= self.cols:
            raise InvalidArgumentError(f"keep must lie in [0, {self.cols}], got {self.keep}")
        if self.a_min < 0:
            raise InvalidArgumentError("a_min must be >= 0")
        if self.rows < 1 or self.cols < 1 or self.trials < 1:
            raise InvalidArgumentError("rows, cols and trials must be >= 1")
        if self.projection not in PROJECTIONS:
            raise InvalidArgumentError(f"projection must be one of {PROJECTIONS}, got {self.projection!r}")


@dataclass(frozen=True)
class ColumnSelectReport:
    config: ColumnSelectConfig
    errors: np.ndarray
    bound: float
    violations: int

    @property
    def passed(self):
        return self.violations == 0

    def to_csv(self):
        return _csv_rows(("trial", "value", "bound"), ((i, v, self.bound) for i, v in enumerate(self.errors)))

    def summary(self):
        c = self.config
        return (f"column_selection d={c.rows} n={c.cols} s={c.keep} a_min={c.a_min} proj={c.projection} "
                f"max_error={self.errors.max():.6g} bound={self.bound:.6g} violations={self.violations} "
                f"{'PASS' if self.passed else 'FAIL'}")


def select_columns(A, keep, projection="zero", sampled=2, rng=None):
    """``P(A)``: first ``keep`` columns verbatim, the tail zeroed or approximated."""
    out = np.zeros_like(A)
    out[:, :keep] = A[:, :keep]
    tail = A[:, keep:]
    if tail.shape[1] == 0 or projection == "zero":
        return out
    k = min(sampled, tail.shape[1])
    if projection == "svd":
        U, s, Vt = np.linalg.svd(tail, full_matrices=False)
        out[:, keep:] = (U[:, :k] * s[:k]) @ Vt[:k]
    else:
        rng = rng or np.random.default_rng(0)
        cols = tail[:, rng.choice(tail.shape[1], size=k, replace=False)]
        Q, _ = np.linalg.qr(cols)
        out[:, keep:] = Q @ (Q.T @ tail)
    return out


def column_selection_check(config=None, **kw):
    config = config or ColumnSelectConfig(**kw)
    d, n, s, a = config.rows, config.cols, config.keep, config.a_min
    bound = float(np.sqrt(d * (n - s)) * a)
    errors = np.empty(config.trials)
    for i in range(config.trials):
        rng = np.random.default_rng([config.seed, i])
        A = np.empty((d, n))
        A[:, :s] = rng.standard_normal((d, s))
        A[:, s:] = rng.uniform(-a, a, size=(d, n - s))
        P = select_columns(A, s, config.projection, config.sampled, rng)
        errors[i] = np.linalg.norm(A - P, "fro")
    violations = int(np.sum(errors > bound * (1.0 + 1e-12)))
    return ColumnSelectReport(config, errors, bound, violations)


def _csv_rows(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r[0], *(repr(float(x)) for x in r[1:])])
    return buf.getvalue()
