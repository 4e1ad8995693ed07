"""Command-line entry point: ``gcformer <command> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or checkpoint
error, 4 numeric failure (including a violated theory bound), 5 for the
expanding-matrix theory run when it diverges as expected.
"""

import argparse
import csv
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import checkpoint
from .config import RunConfig, load_config, read_config
from .data import (
    SYNTH_KINDS,
    ForecastDataset,
    inject_noise,
    load_csv,
    synth_generate,
    write_csv,
)
from .errors import CheckpointError, ConfigError, DataError, GCFormerError, InvalidArgumentError, NumericError
from .kernels import dense_param_count, kernel_to_csv_rows, msk_param_count
from .model import DECODER_MODES, GCformerModel, head_tokens
from .theory import ColumnSelectConfig, NoiseAccumConfig, column_selection_check, noise_accumulation
from .training import mse, mae, predict, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_CONTRAST = 0, 2, 3, 4, 5


class UsageError(GCFormerError):
    pass


# shared plumbing


def _common(parser):
    parser.add_argument("--config", metavar="PATH", help="INI config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    parser.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="seed for training and theory runs")


def _run_config(args, extra=()):
    overrides = list(args.overrides) + list(extra)
    if args.seed is not None:
        overrides += [f"training.seed={args.seed}", f"theory.seed={args.seed}"]
    if args.config:
        return read_config(args.config, overrides)
    return load_config(None, overrides)


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _out_path(args, name):
    if os.path.basename(name) != name or name in ("", ".", ".."):
        raise UsageError(f"output name {name!r} must be a plain file name inside --out")
    return os.path.join(_outdir(args), name)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


def _series_for(cfg):
    d = cfg.data
    if d.path:
        return load_csv(d.path)
    params = {}
    if d.kind == "sin_mix":
        params = dict(periods=d.periods, amplitudes=d.amplitudes, noise_std=d.noise_std)
    elif d.kind == "trend_seasonal_noise":
        params = dict(noise_std=d.noise_std)
    return synth_generate(d.kind, d.length, d.channels, d.seed, **params)


def _dataset_for(cfg, series=None):
    series = _series_for(cfg) if series is None else series
    m = cfg.model
    if series.values.shape[1] != m.channels:
        raise ConfigError(f"dataset has {series.values.shape[1]} channels but model.channels={m.channels}")
    ds = ForecastDataset.from_series(series, m.input_len, m.pred_len, cfg.data.stride)
    if cfg.noise.p > 0:
        ds = inject_noise(ds, cfg.noise.p, cfg.noise.scale, cfg.noise.seed)
    return ds


def _model_flags(parser):
    parser.add_argument("--decoder-mode", choices=DECODER_MODES)
    parser.add_argument("--kernel", choices=("msk", "freq", "leg"))
    parser.add_argument("--attention-axis", choices=("token", "channel"))
    parser.add_argument("--input-len", type=int)
    parser.add_argument("--local-len", type=int)
    parser.add_argument("--pred-len", type=int)
    parser.add_argument("--hidden-dim", type=int)


def _model_overrides(args):
    out = []
    for flag in ("decoder_mode", "kernel", "attention_axis", "input_len", "local_len", "pred_len", "hidden_dim"):
        value = getattr(args, flag, None)
        if value is not None:
            out.append(f"model.{flag}={value}")
    return out


# commands


def cmd_generate(args):
    if args.len < 1:
        raise UsageError(f"--len must be >= 1, got {args.len}")
    if args.channels < 1:
        raise UsageError(f"--channels must be >= 1, got {args.channels}")
    params = {}
    if args.kind == "sin_mix":
        params["periods"] = tuple(float(x) for x in args.periods.split(","))
        params["amplitudes"] = (tuple(float(x) for x in args.amplitudes.split(","))
                                if args.amplitudes else (1.0,) * len(params["periods"]))
        params["noise_std"] = args.noise_std
    elif args.kind == "trend_seasonal_noise":
        params.update(slope=args.slope, period=args.period, amplitude=args.amplitude, noise_std=args.noise_std)
    else:
        params.update(sigma=args.sigma, start=args.start)
    series = synth_generate(args.kind, args.len, args.channels, args.seed or 0, **params)
    path = _out_path(args, args.name or f"{args.kind}.csv")
    try:
        write_csv(series, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
    print(f"wrote {path}: {series.values.shape[0]} rows x {series.values.shape[1]} channels")
    return EXIT_OK


def cmd_train(args):
    extra = _model_overrides(args)
    if args.data:
        extra.append(f"data.path={args.data}")
    if args.epochs is not None:
        extra.append(f"training.epochs={args.epochs}")
    if args.noise_p is not None:
        extra.append(f"noise.p={args.noise_p}")
    cfg = _run_config(args, extra)
    ds = _dataset_for(cfg)
    model = GCformerModel.init(cfg.model, cfg.training.seed)
    best, report = train(model, ds, cfg.training)
    meta = {"data": _jsonable(asdict(cfg.data)), "noise": asdict(cfg.noise), "training": asdict(cfg.training)}
    checkpoint.save(best, _out_path(args, "model.gcf"), meta)
    with open(_out_path(args, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    with open(_out_path(args, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_ini())
    _write_forecast(args, best, ds)
    print(f"epochs={report.epochs} best_epoch={report.best_epoch} "
          f"test_mse={report.test_mse:.6g} test_mae={report.test_mae:.6g}")
    return EXIT_OK


def _jsonable(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _write_forecast(args, model, ds):
    """First test window: the input context followed by actual vs predicted horizon."""
    w = ds.windows("test")
    x, y = w.inputs[0], w.targets[0]
    yhat = model.forward(x)
    start = int(w.offsets[0])
    stamps = ds.test.timestamps
    rows = []
    for c, name in enumerate(ds.test.names):
        for i in range(x.shape[0]):
            rows.append([stamps[start + i], name, _fmt(x[i, c]), ""])
        for i in range(y.shape[0]):
            rows.append([stamps[start + x.shape[0] + i], name, _fmt(y[i, c]), _fmt(yhat[i, c])])
    _write_rows(_out_path(args, "forecast.csv"), ["time", "channel", "actual", "predicted"], rows)


def cmd_evaluate(args):
    model, meta = checkpoint.load(args.checkpoint)
    cfg = _run_config(args)
    data = dict(meta.get("data", {}))
    data["periods"] = tuple(data.get("periods", cfg.data.periods))
    data["amplitudes"] = tuple(data.get("amplitudes", cfg.data.amplitudes))
    cfg = replace(cfg, model=model.config, data=replace(cfg.data, **data))
    if args.data:
        cfg = replace(cfg, data=replace(cfg.data, path=args.data))
    series = _series_for(cfg)
    if series.values.shape[1] != model.config.channels:
        raise CheckpointError(f"checkpoint expects {model.config.channels} channels, "
                              f"dataset has {series.values.shape[1]}", checkpoint.VERSION)
    ds = ForecastDataset.from_series(series, model.config.input_len, model.config.pred_len, cfg.data.stride)
    w = ds.windows(args.split)
    pred = predict(model, w.inputs, int(meta.get("training", {}).get("eval_batch", 256)))
    total_mse, total_mae = mse(pred, w.targets), mae(pred, w.targets)
    err = pred - w.targets
    rows = [[i + 1, _fmt(np.mean(err[:, i] ** 2)), _fmt(np.mean(np.abs(err[:, i])))] for i in range(err.shape[1])]
    rows.append(["all", _fmt(total_mse), _fmt(total_mae)])
    _write_rows(_out_path(args, f"metrics_{args.split}.csv"), ["horizon", "mse", "mae"], rows)
    print(f"split={args.split} windows={len(w)} mse={total_mse!r} mae={total_mae!r}")
    return EXIT_OK


def cmd_inspect_kernel(args):
    extra = _model_overrides(args)
    cfg = _run_config(args, extra)
    if args.checkpoint:
        model, _ = checkpoint.load(args.checkpoint)
    else:
        model = GCformerModel.init(cfg.model, cfg.training.seed)
    if args.fill is not None:
        params = dict(model.params)
        for k in params:
            if k.startswith("global.kernel"):
                params[k] = np.full_like(params[k], args.fill)
        model = model.copy(params)
    if model.config.decoder_mode == "local_only":
        raise UsageError("local_only models have no global kernel")
    n = args.length or model.config.input_len
    if n > model.config.input_len:
        raise UsageError(f"--length {n} exceeds the model input length {model.config.input_len}")
    kernel = model.materialized_kernel(n)
    rows = [[c, i, _fmt(v)] for c, i, v in kernel_to_csv_rows(kernel)]
    _write_rows(_out_path(args, "kernel.csv"), ["channel", "index", "value"], rows)
    with open(_out_path(args, "kernel.svg"), "w", encoding="utf-8") as fh:
        fh.write(svg_polyline(kernel, title=f"{model.config.kernel} kernel, n={n}"))
    print(f"kernel {model.config.kernel}: {kernel.shape[0]} channel(s) x {n} taps")
    return EXIT_OK


def svg_polyline(curves, width=640, height=320, pad=32, title=""):
    """Minimal SVG line plot, one polyline per row of ``curves``."""
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    n = curves.shape[1]
    lo, hi = float(curves.min()), float(curves.max())
    if hi - lo < 1e-300:
        lo, hi = lo - 1.0, hi + 1.0
    xs = pad + (width - 2 * pad) * (np.arange(n) / max(n - 1, 1))
    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if lo < 0 < hi:
        y0 = pad + (height - 2 * pad) * (hi / (hi - lo))
        lines.append(f'<line x1="{pad}" y1="{y0:.2f}" x2="{width - pad}" y2="{y0:.2f}" stroke="#bbb"/>')
    for c, row in enumerate(curves):
        ys = pad + (height - 2 * pad) * ((hi - row) / (hi - lo))
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
        lines.append(f'<polyline fill="none" stroke="{colours[c % len(colours)]}" stroke-width="1.5" points="{pts}"/>')
    if title:
        lines.append(f'<text x="{pad}" y="{pad - 10}" font-family="sans-serif" font-size="13">{title}</text>')
    lines.append(f'<text x="{pad}" y="{height - 8}" font-family="sans-serif" font-size="11">'
                 f'range [{lo:.4g}, {hi:.4g}]</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def parameter_table(model_cfg):
    """Learnable reals per component for a freshly built model."""
    return GCformerModel.init(model_cfg, 0).parameter_groups()


def kernel_scaling(lengths, base_len, d):
    """``(n, msk params, dense params)`` rows."""
    return [(n, msk_param_count(n, base_len, d), dense_param_count(n, d)) for n in lengths]


def reduction_percent(before, after):
    if before == 0:
        raise InvalidArgumentError("reference model has no parameters")
    return 100.0 * (before - after) / before


def cmd_param_count(args):
    cfg = _run_config(args, _model_overrides(args))
    groups = parameter_table(cfg.model)
    total = sum(groups.values())
    rows = [[k, v] for k, v in groups.items()] + [["total", total]]
    print(f"{'component':<16}{'params':>12}")
    for k, v in rows:
        print(f"{k:<16}{v:>12}")
    _write_rows(_out_path(args, "param_count.csv"), ["component", "params"], rows)

    lengths = [int(x) for x in args.lengths.split(",")]
    d = cfg.model.kernel_channels
    scale = kernel_scaling(lengths, cfg.model.msk_base_len, d)
    print(f"\nkernel scaling (l0={cfg.model.msk_base_len}, d={d})")
    print(f"{'n':>8}{'msk':>10}{'dense':>10}")
    for n, a, b in scale:
        print(f"{n:>8}{a:>10}{b:>10}")
    _write_rows(_out_path(args, "kernel_scaling.csv"), ["n", "msk", "dense"], scale)

    if args.compare or args.compare_set:
        other = read_config(args.compare, args.compare_set) if args.compare else load_config(None, args.compare_set)
        other_total = sum(parameter_table(other.model).values())
        pct = reduction_percent(other_total, total)
        print(f"\nreference total {other_total}, this total {total}, reduction {pct:.2f}%")
        _write_rows(_out_path(args, "reduction.csv"), ["reference", "candidate", "reduction_percent"],
                    [[other_total, total, f"{pct:.2f}"]])
    return EXIT_OK


def cmd_theory(args):
    extra = []
    for flag in ("kind", "theta", "trials", "dim", "sigma", "rho"):
        value = getattr(args, flag)
        if value is not None:
            extra.append(f"theory.{flag}={value}")
    for flag in ("keep", "cols", "rows", "a_min"):
        value = getattr(args, flag)
        if value is not None:
            extra.append(f"theory.cs_{flag}={value}")
    t = _run_config(args, extra).theory
    try:
        nc = NoiseAccumConfig(t.dim, t.theta, t.sigma, t.trials, t.kind, t.rho, t.seed)
        cc = ColumnSelectConfig(t.cs_rows, t.cs_cols, t.cs_keep, t.cs_a_min, t.cs_sampled, t.cs_trials,
                                t.cs_projection, t.seed)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None
    noise = noise_accumulation(nc)
    cols = column_selection_check(cc)
    with open(_out_path(args, "noise_accumulation.csv"), "w", encoding="utf-8") as fh:
        fh.write(noise.to_csv())
    with open(_out_path(args, "column_selection.csv"), "w", encoding="utf-8") as fh:
        fh.write(cols.to_csv())
    print(noise.summary())
    print(cols.summary())
    if t.kind == "expanding":
        # divergence is the point of this mode, not a failure
        return EXIT_CONTRAST if noise.diverged and cols.passed else EXIT_NUMERIC
    return EXIT_OK if noise.passed and cols.passed else EXIT_NUMERIC


# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="gcformer", description="Global-local forecasting toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="write a synthetic CSV series")
    _common(p)
    p.add_argument("--kind", choices=SYNTH_KINDS, default="sin_mix")
    p.add_argument("--len", type=int, default=2000, help="number of rows")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--periods", default="240,24", help="sin_mix periods, comma separated")
    p.add_argument("--amplitudes", default="", help="sin_mix amplitudes (default 1 each)")
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--slope", type=float, default=0.01)
    p.add_argument("--period", type=float, default=24.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0, help="random_walk step size")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--name", help="output file name inside --out (default <kind>.csv)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model and write checkpoint, report and forecast")
    _common(p)
    p.add_argument("--data", metavar="CSV", help="dataset (default: generate from [data])")
    p.add_argument("--epochs", type=int)
    p.add_argument("--noise-p", type=float, help="fraction of training cells to perturb")
    _model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on one split")
    _common(p)
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--data", metavar="CSV", help="dataset (default: the one recorded in the checkpoint)")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect-kernel", help="materialize the global kernel as CSV and SVG")
    _common(p)
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--length", type=int, help="taps to materialize (default input length)")
    p.add_argument("--fill", type=float, help="set every kernel parameter to this value")
    _model_flags(p)
    p.set_defaults(func=cmd_inspect_kernel)

    p = sub.add_parser("param-count", help="learnable parameters per component")
    _common(p)
    p.add_argument("--lengths", default="256,512,1024,2048", help="kernel lengths for the scaling table")
    p.add_argument("--compare", metavar="PATH", help="reference config for a reduction percentage")
    p.add_argument("--compare-set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override for the reference config (repeatable)")
    _model_flags(p)
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("theory", help="Monte Carlo checks of the noise and column-selection bounds")
    _common(p)
    p.add_argument("--kind", choices=("unitary_random", "identity", "expanding"))
    p.add_argument("--theta", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--rows", type=int, help="column selection: rows d")
    p.add_argument("--cols", type=int, help="column selection: columns n")
    p.add_argument("--keep", type=int, help="column selection: kept prefix s")
    p.add_argument("--a-min", type=float, help="column selection: tail bound")
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
