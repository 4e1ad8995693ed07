"""Metrics, Adam and the deterministic training loop."""

import csv
import io
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NumericError
from .model import parameter_gradients


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise InvalidArgumentError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def mse(pred, target):
    pred, target = _pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred, target):
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


@dataclass(frozen=True)
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **kw):
        zeros = OrderedDict((k, np.zeros_like(v)) for k, v in params.items())
        return cls(m=zeros, v=OrderedDict((k, z.copy()) for k, z in zeros.items()), **kw)


def adam_step(state, params, grads):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {k}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1 ** t, 1.0 - b2 ** t
    new_p, new_m, new_v = OrderedDict(), OrderedDict(), OrderedDict()
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m.get(k, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(k, 0.0) + (1.0 - b2) * g * g
        new_p[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[k], new_v[k] = m, v
    return new_p, replace(state, step=t, m=new_m, v=new_v)


def clip_grad_norm(grads, max_norm):
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if max_norm is None or max_norm <= 0 or total <= max_norm:
        return grads, total
    scale = max_norm / total
    return OrderedDict((k, g * scale) for k, g in grads.items()), total


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 5e-4
    patience: int = 5
    clip_norm: float = 5.0
    seed: int = 0
    eval_batch: int = 256

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")
        if self.batch_size < 1 or self.eval_batch < 1:
            raise InvalidArgumentError("batch sizes must be >= 1")
        if not self.lr > 0:
            raise InvalidArgumentError("lr must be positive")


@dataclass(frozen=True)
class TrainReport:
    train_loss: tuple
    val_loss: tuple
    best_epoch: int
    test_mse: float
    test_mae: float
    seed: int

    @property
    def epochs(self):
        return len(self.train_loss)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for i, (tr, va) in enumerate(zip(self.train_loss, self.val_loss)):
            w.writerow([i, repr(tr), repr(va)])
        w.writerow([f"# best_epoch={self.best_epoch} test_mse={self.test_mse!r} "
                    f"test_mae={self.test_mae!r} seed={self.seed}"])
        return buf.getvalue()


def predict(model, inputs, batch=256):
    inputs = np.asarray(inputs, dtype=float)
    return np.concatenate([model.forward(inputs[i:i + batch]) for i in range(0, len(inputs), batch)], axis=0)


def evaluate(model, windows, batch=256):
    """``(mse, mae)`` of ``model`` on a :class:`~gcformer.data.WindowedDataset`."""
    pred = predict(model, windows.inputs, batch)
    return mse(pred, windows.targets), mae(pred, windows.targets)


def train(model, dataset, config=None, **overrides):
    """Minibatch Adam on the train split; keep the parameters with the lowest validation MSE.

    ``dataset`` is a :class:`~gcformer.data.ForecastDataset`. Returns
    ``(best_model, TrainReport)``; identical inputs give identical results.
    """
    config = replace(config or TrainConfig(), **overrides)
    tr, va, te = (dataset.windows(s) for s in ("train", "val", "test"))
    for w in (tr, va, te):
        if len(w) == 0:
            raise InvalidArgumentError(f"{w.split} split has no windows")
    rng = np.random.default_rng(config.seed)
    params = model.params
    state = AdamState.for_params(params, lr=config.lr)
    best = (np.inf, -1, model)
    train_curve, val_curve = [], []
    stale = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(tr))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = np.sort(order[start:start + config.batch_size])
            loss, grads = parameter_gradients(model, tr.inputs[idx], tr.targets[idx])
            grads, _ = clip_grad_norm(grads, config.clip_norm)
            params, state = adam_step(state, params, grads)
            model = model.copy(params)
            total += loss * len(idx)
            count += len(idx)
        train_curve.append(total / count)
        val_mse, _ = evaluate(model, va, config.eval_batch)
        val_curve.append(val_mse)
        if val_mse < best[0]:
            best = (val_mse, epoch, model)
            stale = 0
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                break
    best_model = best[2]
    test_mse, test_mae = evaluate(best_model, te, config.eval_batch)
    report = TrainReport(tuple(train_curve), tuple(val_curve), best[1], test_mse, test_mae, config.seed)
    return best_model, report
