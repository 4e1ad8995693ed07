"""ETT-style CSV I/O, chronological splits, windowing and synthetic series."""

import csv
import math
import os
from dataclasses import dataclass, field, replace
from datetime import datetime

import numpy as np

from .errors import (
    DataError,
    DatasetNotFoundError,
    InvalidArgumentError,
    MalformedRowError,
    NonMonotoneTimestampError,
    NonNumericCellError,
)


@dataclass(frozen=True)
class Series:
    timestamps: tuple
    values: np.ndarray  # (T, C)
    names: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InvalidArgumentError(f"values must be (T, C), got shape {values.shape}")
        ts = tuple(self.timestamps)
        if len(ts) != values.shape[0]:
            raise InvalidArgumentError(f"{len(ts)} timestamps for {values.shape[0]} rows")
        names = tuple(self.names) or tuple(f"ch{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise InvalidArgumentError(f"{len(names)} channel names for {values.shape[1]} channels")
        keys = [_ts_key(t) for t in ts]
        for i in range(1, len(keys)):
            if not keys[i] > keys[i - 1]:
                raise NonMonotoneTimestampError(f"timestamp {ts[i]!r} does not follow {ts[i - 1]!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "names", names)

    def __len__(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    def slice(self, start, stop):
        return Series(self.timestamps[start:stop], self.values[start:stop], self.names)

    @classmethod
    def from_array(cls, values, start=0, names=()):
        values = np.asarray(values, dtype=float)
        return cls(tuple(range(start, start + values.shape[0])), values, names)


def _ts_key(t):
    if isinstance(t, (int, np.integer)):
        return (0, int(t))
    if isinstance(t, datetime):
        return (1, t)
    return _parse_ts(str(t))


def _parse_ts(text):
    text = text.strip()
    try:
        return (0, int(text))
    except ValueError:
        pass
    try:
        return (1, datetime.fromisoformat(text))
    except ValueError:
        raise MalformedRowError(f"timestamp {text!r} is neither an integer nor ISO-8601") from None


def load_csv(path):
    """Read ``date,<ch1>,...`` CSV; integer timestamps become ints, others stay strings."""
    if not os.path.isfile(path):
        raise DatasetNotFoundError(f"dataset not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedRowError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise MalformedRowError(f"{path}: header needs a date column and at least one channel")
    body = [r for r in rows[1:] if r]
    if not body:
        raise MalformedRowError(f"{path}: no data rows")
    stamps, values = [], np.empty((len(body), len(header) - 1))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise MalformedRowError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        kind, key = _parse_ts(row[0])
        stamps.append(key if kind == 0 else row[0].strip())
        for j, cell in enumerate(row[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCellError(f"{path}:{line}: column {header[j + 1]!r} holds {cell!r}") from None
            if not math.isfinite(v):
                raise NonNumericCellError(f"{path}:{line}: column {header[j + 1]!r} is not finite")
            values[i, j] = v
    return Series(tuple(stamps), values, tuple(h.strip() for h in header[1:]))


def write_csv(series, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *series.names])
        for t, row in zip(series.timestamps, series.values):
            w.writerow([t, *(repr(float(v)) for v in row)])


def split_712(series):
    """Chronological 70/10/20 split (remainder goes to test)."""
    T = len(series)
    if T < 10:
        raise InvalidArgumentError(f"need at least 10 rows to split, got {T}")
    # integer arithmetic: int(0.7 * T) can land one below floor(0.7T)
    n_train, n_val = (7 * T) // 10, T // 10
    return (
        series.slice(0, n_train),
        series.slice(n_train, n_train + n_val),
        series.slice(n_train + n_val, T),
    )


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray  # (S, N, C)
    targets: np.ndarray  # (S, H, C)
    split: str = ""
    offsets: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.inputs.shape[0]

    def __getitem__(self, i):
        return self.inputs[i], self.targets[i]


def sliding_windows(segment, N, H, stride=1, split=""):
    """All ``(input, target)`` pairs with the target right after its input."""
    values = segment.values if isinstance(segment, Series) else np.asarray(segment, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    T = values.shape[0]
    if N < 1 or H < 1 or stride < 1:
        raise InvalidArgumentError("N, H and stride must be positive")
    if T < N + H:
        raise InvalidArgumentError(f"segment of {T} rows is shorter than N+H={N + H}")
    offsets = np.arange(0, T - N - H + 1, stride)
    idx_in = offsets[:, None] + np.arange(N)
    idx_out = offsets[:, None] + N + np.arange(H)
    return WindowedDataset(values[idx_in], values[idx_out], split, offsets)


@dataclass(frozen=True)
class ForecastDataset:
    """Train/val/test segments of one series plus the windowing that turns them into samples."""

    train: Series
    val: Series
    test: Series
    input_len: int
    pred_len: int
    stride: int = 1

    @classmethod
    def from_series(cls, series, input_len, pred_len, stride=1):
        return cls(*split_712(series), input_len, pred_len, stride)

    def segment(self, split):
        if split not in ("train", "val", "test"):
            raise InvalidArgumentError(f"unknown split {split!r}")
        return getattr(self, split)

    def windows(self, split):
        seg = self.segment(split)
        if len(seg) < self.input_len + self.pred_len:
            raise InvalidArgumentError(
                f"{split} split has {len(seg)} rows, fewer than N+H={self.input_len + self.pred_len}"
            )
        return sliding_windows(seg, self.input_len, self.pred_len, self.stride, split)

    def with_train(self, train):
        return replace(self, train=train)


SYNTH_KINDS = ("sin_mix", "trend_seasonal_noise", "random_walk")


def synth_generate(kind, T, C, seed=0, **params):
    """Deterministic synthetic series.

    ``sin_mix``: ``periods``, ``amplitudes`` (one per period), ``noise_std``;
    each channel draws its own phases.
    ``trend_seasonal_noise``: ``slope``, ``period``, ``amplitude``, ``noise_std``.
    ``random_walk``: ``sigma`` step size, ``start``.
    """
    if T < 1 or C < 1:
        raise InvalidArgumentError(f"need T >= 1 and C >= 1, got T={T}, C={C}")
    rng = np.random.default_rng(seed)
    t = np.arange(T, dtype=float)[:, None]
    if kind == "sin_mix":
        periods = np.atleast_1d(np.asarray(params.get("periods", (24.0, 168.0)), dtype=float))
        amps = np.atleast_1d(np.asarray(params.get("amplitudes", np.ones(periods.size)), dtype=float))
        if amps.size != periods.size:
            raise InvalidArgumentError("sin_mix needs one amplitude per period")
        noise = float(params.get("noise_std", 0.0))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(periods.size, C))
        values = np.zeros((T, C))
        for a, p, ph in zip(amps, periods, phases):
            values += a * np.sin(2.0 * np.pi * t / p + ph)
        values += noise * rng.standard_normal((T, C))
    elif kind == "trend_seasonal_noise":
        slope = float(params.get("slope", 0.01))
        period = float(params.get("period", 24.0))
        amp = float(params.get("amplitude", 1.0))
        noise = float(params.get("noise_std", 0.1))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=C)
        values = slope * t + amp * np.sin(2.0 * np.pi * t / period + phases) + noise * rng.standard_normal((T, C))
    elif kind == "random_walk":
        sigma = float(params.get("sigma", 1.0))
        start = float(params.get("start", 0.0))
        values = start + np.cumsum(sigma * rng.standard_normal((T, C)), axis=0)
    else:
        raise InvalidArgumentError(f"unknown generator {kind!r}; expected one of {SYNTH_KINDS}")
    return Series.from_array(values, names=tuple(f"ch{i}" for i in range(C)))


def noise_mask(shape, p, seed):
    """Boolean mask with exactly ``round(p * size)`` cells set, chosen uniformly."""
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"noise fraction must lie in [0, 1], got {p}")
    size = int(np.prod(shape))
    count = int(round(p * size))
    rng = np.random.default_rng(seed)
    mask = np.zeros(size, dtype=bool)
    mask[rng.choice(size, size=count, replace=False)] = True
    return mask.reshape(shape)


def inject_noise(dataset, p, scale, seed=0):
    """Add Gaussian noise to a ``p`` fraction of training cells.

    Noise std is ``scale`` times the per-channel std of the training segment.
    Validation and test segments are left untouched. Accepts a
    :class:`ForecastDataset` or a bare :class:`Series`.
    """
    series = dataset.train if isinstance(dataset, ForecastDataset) else dataset
    values = series.values
    mask = noise_mask(values.shape, p, seed)
    rng = np.random.default_rng([seed, 1])
    std = values.std(axis=0, keepdims=True)
    noisy = values + mask * (scale * std) * rng.standard_normal(values.shape)
    out = Series(series.timestamps, noisy, series.names)
    return dataset.with_train(out) if isinstance(dataset, ForecastDataset) else out


def autocorrelation(x, lag):
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    denom = np.dot(x, x)
    if denom == 0.0:
        raise DataError("autocorrelation of a constant signal is undefined")
    return float(np.dot(x[:-lag], x[lag:]) / denom) if lag else 1.0
