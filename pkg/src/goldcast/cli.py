"""``goldcast`` command line: optimize -> train -> evaluate -> predict -> backtest.

Each stage reads its inputs from, and writes its outputs to, the ``--out``
directory, then records a ``manifest_<stage>.txt`` with the config hash,
every derived seed and a sha256 of each file it wrote.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from .backtest import (
    DatedForecast,
    read_forecast_csv,
    run_backtest,
    write_equity_csv,
    write_forecast_csv,
    write_trades_csv,
)
from .baselines import baseline_reports
from .config import RunConfig, load_config, render_config
from .data import load_aux_csv, load_macro_csv, load_ohlc_csv, macro_to_series, resample_monthly
from .errors import ConfigError, DataError, NumericError
from .gwo import NetworkArch, write_trace_csv
from .pipeline import (
    ALL_SUBNETWORKS,
    ForecastModels,
    MarketData,
    SubnetworkId,
    derive_seed,
    evaluate,
    optimize_architectures,
    persistence_report,
    predict_next_day,
    predict_samples,
    prepare,
    train_all,
    write_eval_csv,
)
from .synthetic import write_fixture

logger = logging.getLogger("goldcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
ARCH_HEADER = ["subnetwork", "architecture", "val_rmse", "evaluations", "cache_hits"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ----------------------------------------------------------------------------
# shared plumbing


def load_market(cfg: RunConfig) -> MarketData:
    cfg.check_files()
    daily = load_ohlc_csv(cfg.path("daily_csv"), "daily")
    mpath = cfg.path("monthly_csv")
    monthly = load_ohlc_csv(mpath, "monthly") if mpath else resample_monthly(daily)
    aux = [load_aux_csv(p) for p in cfg.aux_paths()]
    macro_path = cfg.path("macro_csv")
    macro = macro_to_series(load_macro_csv(macro_path)) if macro_path else []
    return MarketData(daily, monthly, aux, macro)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, stage: str, cfg: RunConfig, outputs: list[Path], extra=()) -> Path:
    seed = cfg.values["seed"]
    lines = [
        f"stage = {stage}",
        f"goldcast_version = {__version__}",
        f"config_hash = {cfg.config_hash()}",
        f"seed = {seed}",
    ]
    for sub in ALL_SUBNETWORKS:
        for label in ("gwo", "init", "train"):
            lines.append(f"seed.{label}.{sub.key} = {derive_seed(seed, label, sub.key)}")
    lines.extend(extra)
    for p in sorted(outputs):
        lines.append(f"output.{p.relative_to(out).as_posix()} = {_sha256(p)}")
    lines.append("[config]")
    lines.extend(cfg.canonical_text().splitlines())
    path = out / f"manifest_{stage}.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_architectures(path: Path, result) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ARCH_HEADER)
        for sub in ALL_SUBNETWORKS:
            w.writerow([sub.key, str(result.archs[sub]), repr(float(result.best_fitness.get(sub, float("nan")))),
                        result.evaluations.get(sub, 0), result.cache_hits.get(sub, 0)])


def read_architectures(path: Path) -> dict[SubnetworkId, NetworkArch]:
    if not path.is_file():
        raise DataError(f"missing architecture manifest {path}; run `goldcast optimize` first")
    archs = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ARCH_HEADER:
            raise DataError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            try:
                archs[SubnetworkId.parse(row["subnetwork"])] = NetworkArch.parse(row["architecture"])
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from None
    missing = [s.key for s in ALL_SUBNETWORKS if s not in archs]
    if missing:
        raise DataError(f"{path}: no architecture for {', '.join(missing)}")
    return archs


def _checkpoint_scalers(sub: SubnetworkId, prep, fm: ForecastModels | None = None) -> dict:
    if sub.network == "fusion_mlp":
        out = {"targets": prep.daily.target_scaler}
        if fm is not None:
            out["fusion_inputs"] = fm.fusion_scaler
        return out
    tf = prep.daily if sub.network == "daily_lstm" else prep.monthly
    return {"features": tf.scaler, "targets": tf.target_scaler}


def save_models(models_dir: Path, fm: ForecastModels, prep) -> list[Path]:
    models_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sub in ALL_SUBNETWORKS:
        p = models_dir / f"{sub.key}.ckpt"
        checkpoint.save(p, fm.models[sub], sub.key, _checkpoint_scalers(sub, prep, fm),
                        {"architecture": str(fm.archs[sub])})
        paths.append(p)
    return paths


def _same_scaler(a, b) -> bool:
    return list(a.columns) == list(b.columns) and np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)


def load_models(models_dir: Path, prep) -> ForecastModels:
    """Load the nine checkpoints and check them against freshly prepared data."""
    models, archs, fusion_scaler = {}, {}, None
    for sub in ALL_SUBNETWORKS:
        p = models_dir / f"{sub.key}.ckpt"
        if not p.is_file():
            raise DataError(f"missing checkpoint {p}; run `goldcast train` first")
        model, scalers, doc = checkpoint.load(p)
        if doc.get("subnetwork") != sub.key:
            raise DataError(f"{p}: holds {doc.get('subnetwork')!r}, expected {sub.key!r}")
        for name, expected in _checkpoint_scalers(sub, prep).items():
            if name not in scalers or not _same_scaler(scalers[name], expected):
                raise DataError(f"{p}: {name} scaler does not match the configured data (schema mismatch)")
        if sub.network == "fusion_mlp":
            if "fusion_inputs" not in scalers:
                raise DataError(f"{p}: missing fusion input scaler")
            if fusion_scaler is not None and not _same_scaler(fusion_scaler, scalers["fusion_inputs"]):
                raise DataError(f"{p}: fusion input scaler differs between fusion checkpoints")
            fusion_scaler = scalers["fusion_inputs"]
        models[sub] = model
        archs[sub] = NetworkArch.parse(doc.get("extra", {}).get("architecture", "0-0-0"))
    return ForecastModels(models, archs, fusion_scaler)


# ----------------------------------------------------------------------------
# stages


def cmd_optimize(cfg: RunConfig, out: Path) -> tuple[list[Path], list[str]]:
    prep = prepare(load_market(cfg), cfg.pipeline_config())
    result = optimize_architectures(prep)
    arch_path = out / "architectures.csv"
    write_architectures(arch_path, result)
    trace_dir = out / "traces"
    trace_dir.mkdir(exist_ok=True)
    outputs = [arch_path]
    for sub in ALL_SUBNETWORKS:
        p = trace_dir / f"{sub.key}.csv"
        write_trace_csv(result.traces[sub], p)
        outputs.append(p)
    extra = []
    for sub in ALL_SUBNETWORKS:
        logger.info("%s: %s", sub.key, result.archs[sub])
        extra.append(f"arch.{sub.key} = {result.archs[sub]}")
        extra.append(f"val_rmse.{sub.key} = {result.best_fitness[sub]!r}")
    return outputs, extra


def cmd_train(cfg: RunConfig, out: Path) -> tuple[list[Path], list[str]]:
    archs = read_architectures(out / "architectures.csv")
    prep = prepare(load_market(cfg), cfg.pipeline_config())
    fm = train_all(archs, prep)
    return save_models(out / "models", fm, prep), [f"arch.{s.key} = {a}" for s, a in fm.archs.items()]


def cmd_evaluate(cfg: RunConfig, out: Path) -> tuple[list[Path], list[str]]:
    prep = prepare(load_market(cfg), cfg.pipeline_config())
    fm = load_models(out / "models", prep)
    reports = [evaluate(fm, prep), persistence_report(prep)]
    if cfg.values["baselines"]:
        reports.extend(baseline_reports(prep, seed=cfg.values["seed"]))
    path = out / "eval_report.csv"
    write_eval_csv(reports, path)
    for tf, comp, r, m in reports[0].rows():
        logger.info("%s %s: rmse %.4f mae %.4f", tf, comp, r, m)
    extra = [f"metric.{rep.model}.{tf}.{comp} = rmse {r:.10g} mae {m:.10g}"
             for rep in reports for tf, comp, r, m in rep.rows()]
    return [path], extra


def cmd_predict(cfg: RunConfig, out: Path) -> tuple[list[Path], list[str]]:
    prep = prepare(load_market(cfg), cfg.pipeline_config())
    fm = load_models(out / "models", prep)
    kept, preds = predict_samples(fm, prep, prep.daily.split.test_indices)
    forecasts = [DatedForecast(prep.daily.target_date(int(s)), *map(float, p)) for s, p in zip(kept, preds)]
    fpath = out / "forecasts.csv"
    write_forecast_csv(forecasts, fpath)
    day, month = predict_next_day(fm, prep)
    npath = out / "next_forecast.csv"
    with npath.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["horizon", "date", "high", "low", "close"])
        for t in (day, month):
            w.writerow([t.horizon, t.date.isoformat(), repr(t.high), repr(t.low), repr(t.close)])
    logger.info("next day %s: high %.2f low %.2f close %.2f", day.date, day.high, day.low, day.close)
    return [fpath, npath], []


def cmd_backtest(cfg: RunConfig, out: Path, forecasts_path: Path | None = None) -> tuple[list[Path], list[str]]:
    forecasts = read_forecast_csv(forecasts_path or out / "forecasts.csv")
    cfg.check_files()
    bars = load_ohlc_csv(cfg.path("daily_csv"), "daily")
    log = run_backtest(forecasts, bars, cfg.values["initial_balance"], cfg.trading_params())
    tpath, epath = out / "trades.csv", out / "equity.csv"
    write_trades_csv(log, tpath)
    write_equity_csv(log, epath)
    filled = [t for t in log.trades if t.filled]
    logger.info("%d orders, %d filled, balance %.2f -> %.2f", len(log.trades), len(filled),
                log.initial_balance, log.final_balance)
    return [tpath, epath], [f"final_balance = {log.final_balance:.2f}", f"orders = {len(log.trades)}",
                            f"filled = {len(filled)}"]


def cmd_synth(out: Path, n_days: int, seed: int) -> list[Path]:
    paths = write_fixture(out, n_days, seed)
    aux = ",".join(p.name for k, p in paths.items() if k not in ("daily", "monthly", "macro"))
    cfg_path = out / "config.txt"
    text = "# synthetic desk-scale run\n" + render_config({
        "daily_csv": paths["daily"].name,
        "monthly_csv": paths["monthly"].name,
        "macro_csv": paths["macro"].name,
        "daily_aux": aux,
        "max_epochs": 40,
        "learning_rate": 0.01,
        "search_epochs": 4,
        "gwo_iterations": 2,
        "gwo_upper_bound": 32,
        "seed": seed,
    })
    cfg_path.write_text(text, encoding="utf-8")
    return [*paths.values(), cfg_path]


STAGES = ("optimize", "train", "evaluate", "predict", "backtest")
STAGE_FUNCS = {"optimize": cmd_optimize, "train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
               "backtest": cmd_backtest}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="run config (key = value)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--out", type=Path, default=Path("run"), help="artifact directory (default: run)")
    common.add_argument("--search-epochs", type=int, help="override search_epochs")
    common.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    parser = _Parser(prog="goldcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"goldcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("optimize", parents=[common], help="GWO search over the nine subnetworks")
    sub.add_parser("train", parents=[common], help="train the nine subnetworks and write checkpoints")
    sub.add_parser("evaluate", parents=[common], help="test-block RMSE/MAE for the model, persistence and baselines")
    sub.add_parser("predict", parents=[common], help="test-block forecasts and the next-day forecast")
    bt = sub.add_parser("backtest", parents=[common], help="trade forecasts against the daily bars")
    bt.add_argument("--forecasts", type=Path, help="forecast CSV (default: OUT/forecasts.csv)")
    sub.add_parser("run", parents=[common], help="all five stages in order")
    syn = sub.add_parser("synth", help="write a synthetic dataset and a matching config")
    syn.add_argument("--out", type=Path, required=True)
    syn.add_argument("--days", type=int, default=1200)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--quiet", action="store_true")
    return parser


def _run(args) -> None:
    if args.command == "synth":
        if args.days < 60:
            raise ConfigError("--days must be at least 60")
        for p in cmd_synth(args.out, args.days, args.seed):
            logger.info("wrote %s", p)
        return
    cfg = load_config(args.config).with_overrides(seed=args.seed, search_epochs=args.search_epochs)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    stages = STAGES if args.command == "run" else (args.command,)
    for stage in stages:
        logger.info("stage %s", stage)
        if stage == "backtest":
            outputs, extra = cmd_backtest(cfg, out, getattr(args, "forecasts", None))
        else:
            outputs, extra = STAGE_FUNCS[stage](cfg, out)
        write_manifest(out, stage, cfg, outputs, extra)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        _run(args)
    except ConfigError as exc:
        print(f"goldcast: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"goldcast: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError) as exc:
        print(f"goldcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
