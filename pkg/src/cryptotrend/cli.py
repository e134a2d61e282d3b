"""Command-line entry point.

Exit codes: 0 success, 3 configuration error, 4 data error, 5 pipeline
error, 6 evaluation error.
"""

from __future__ import annotations

import datetime as dt
import functools
import json
import logging
import sys
from pathlib import Path

import click

from .config import BACKEND_KINDS, RunConfig, load_config
from .coordination import date_range, predictions_from_jsonl, predictions_to_jsonl, run_pipeline
from .evaluation import (
    comparison_csv,
    compare,
    evaluate,
    long_format_csv,
    render_table,
    reports_csv,
)
from .exceptions import ConfigError, DataError, EvaluationError, PipelineError
from .market_data import Horizon, ground_truth, parse_candles, write_candles
from .news import dump_corpus, lexicon_records, load_corpus
from .synthetic import make_candles, make_corpus

EXIT_CONFIG, EXIT_DATA, EXIT_PIPELINE, EXIT_EVALUATION = 3, 4, 5, 6

log = logging.getLogger("cryptotrend")


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(f"config error: {exc}", EXIT_CONFIG)
        except DataError as exc:
            _fail(f"data error: {exc}", EXIT_DATA)
        except PipelineError as exc:
            _fail(f"pipeline error: {exc}", EXIT_PIPELINE)
        except EvaluationError as exc:
            _fail(f"evaluation error: {exc}", EXIT_EVALUATION)

    return wrapper


def _fail(message, code):
    click.echo(message, err=True)
    sys.exit(code)


@click.group()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI run configuration.")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Override [data] output_dir.")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
@click.option("--backend", type=click.Choice(BACKEND_KINDS), help="Override [backend] kind.")
@click.option("--seed", type=int, help="Override [backend] seed for the mock backend.")
@click.pass_context
def main(ctx, config_path, output_dir, verbose, backend, seed):
    """Crypto trend prediction backtests: ingest, predict, evaluate, report."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {
        "config_path": config_path,
        "overrides": {
            "output_dir": Path(output_dir).resolve() if output_dir else None,
            "backend": backend,
            "seed": seed,
        },
    }


def _config(ctx) -> RunConfig:
    if "config" not in ctx.obj:
        ctx.obj["config"] = load_config(ctx.obj["config_path"], **ctx.obj["overrides"])
    return ctx.obj["config"]


def _load_inputs(cfg: RunConfig):
    cfg.require_inputs()
    try:
        series = parse_candles(Path(cfg.candles).read_bytes(), asset=cfg.asset)
        corpus = load_corpus(Path(cfg.corpus).read_bytes())
    except OSError as exc:
        raise ConfigError(f"cannot read input: {exc}") from None
    return series, corpus


def _prediction_dates(cfg: RunConfig, series) -> list[dt.date]:
    dates = series.dates
    if len(dates) <= cfg.params.warmup + max(cfg.horizons):
        raise DataError("candle series too short for the indicator warm-up plus the longest horizon")
    start = cfg.start or dates[cfg.params.warmup]
    end = cfg.end or dates[len(dates) - 1 - max(cfg.horizons)]
    return date_range(start, end)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


@main.command()
@click.pass_context
@_exit_codes
def ingest(ctx):
    """Validate candle and news inputs and print a summary."""
    cfg = _config(ctx)
    series, corpus = _load_inputs(cfg)
    first, last = series.dates[0], series.dates[-1]
    click.echo(f"candles: {len(series)} bars {first.isoformat()} .. {last.isoformat()} ({cfg.asset})")
    click.echo(f"articles: {len(corpus)}")
    if not corpus:
        click.echo("warning: news corpus is empty", err=True)


def _predict(cfg: RunConfig, series, corpus, kind: str):
    dates = _prediction_dates(cfg, series)
    backend = cfg.make_backend(kind)
    predictions, stats = run_pipeline(
        corpus, series, dates, cfg.horizon_objects, backend, cfg.pipeline_config()
    )
    system = "baseline" if backend is None else "ours"
    out = Path(cfg.output_dir)
    _write(out / f"predictions_{system}.jsonl", predictions_to_jsonl(predictions))
    _write(out / f"stats_{system}.json", json.dumps(stats.to_record(), sort_keys=True) + "\n")
    return predictions, stats, out / f"predictions_{system}.jsonl"


@main.command()
@click.pass_context
@_exit_codes
def predict(ctx):
    """Run the agent pipeline and write predictions plus run statistics."""
    cfg = _config(ctx)
    series, corpus = _load_inputs(cfg)
    predictions, stats, path = _predict(cfg, series, corpus, cfg.backend)
    click.echo(
        f"wrote {len(predictions)} predictions to {path} "
        f"(articles_scored={stats.articles_scored} fallbacks_used={stats.fallbacks_used} "
        f"agent_failures={stats.agent_failures} messages_sent={stats.messages_sent})"
    )


def _evaluate(cfg: RunConfig, series, prediction_paths) -> dict:
    by_system: dict[str, list] = {}
    for path in prediction_paths:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read predictions {path}: {exc.strerror}") from None
        try:
            preds = predictions_from_jsonl(text)
        except (ValueError, KeyError) as exc:
            raise EvaluationError(f"malformed prediction file {path}: {exc}") from None
        for p in preds:
            by_system.setdefault(p.system, []).append(p)
    if not by_system:
        raise EvaluationError("no predictions to evaluate")

    horizons = cfg.horizon_objects
    reports: dict[tuple[str, int], object] = {}
    for system, preds in sorted(by_system.items()):
        present = {p.horizon.days for p in preds}
        for h in horizons:
            if h.days not in present:
                raise EvaluationError(f"horizon {h.label} absent from {system} predictions")
        try:
            labels = ground_truth(series, sorted({p.date for p in preds}), horizons)
        except DataError as exc:
            raise EvaluationError(f"cannot label prediction window: {exc}") from None
        for h in horizons:
            reports[(system, h.days)] = evaluate(preds, labels, system, h)

    out = Path(cfg.output_dir)
    all_reports = list(reports.values())
    _write(out / "reports.csv", reports_csv(all_reports, cfg.asset))
    _write(out / "metrics_long.csv", long_format_csv(all_reports))
    result = {"reports": all_reports, "rows": None}
    if {"Baseline", "Ours"} <= set(by_system):
        rows = compare((reports[("Baseline", h.days)], reports[("Ours", h.days)]) for h in horizons)
        _write(out / "comparison.csv", comparison_csv(rows, cfg.asset))
        result["rows"] = rows
    return result


@main.command("evaluate")
@click.option(
    "--predictions", "prediction_paths", multiple=True, type=click.Path(dir_okay=False),
    help="Prediction file(s); defaults to predictions_*.jsonl in the output directory.",
)
@click.pass_context
@_exit_codes
def evaluate_cmd(ctx, prediction_paths):
    """Score predictions against ground-truth labels and write report files."""
    cfg = _config(ctx)
    cfg.require_inputs()
    series = parse_candles(Path(cfg.candles).read_bytes(), asset=cfg.asset)
    if not prediction_paths:
        prediction_paths = sorted(Path(cfg.output_dir).glob("predictions_*.jsonl"))
    result = _evaluate(cfg, series, prediction_paths)
    if result["rows"]:
        click.echo(render_table(result["rows"], cfg.asset), nl=False)
    else:
        click.echo(reports_csv(result["reports"], cfg.asset), nl=False)


@main.command("dump-lexicon")
def dump_lexicon():
    """Print the compiled keyword lexicon, one JSON record per category."""
    for rec in lexicon_records():
        click.echo(json.dumps(rec, sort_keys=True))


@main.command()
@click.pass_context
@_exit_codes
def report(ctx):
    """Run both systems (configured backend and keyword baseline) and compare them."""
    cfg = _config(ctx)
    series, corpus = _load_inputs(cfg)
    if cfg.backend == "baseline":
        raise ConfigError("report compares against the baseline; configure mock or remote")
    _, _, ours = _predict(cfg, series, corpus, cfg.backend)
    _, _, base = _predict(cfg, series, corpus, "baseline")
    result = _evaluate(cfg, series, [base, ours])
    click.echo(render_table(result["rows"], cfg.asset), nl=False)


@main.command()
@click.argument("directory", type=click.Path(file_okay=False))
@click.option("--days", default=60, show_default=True, help="Number of prediction days.")
@click.option("--per-day", default=4, show_default=True, help="Articles per day.")
@click.option("--fixture-seed", default=0, show_default=True)
def synth(directory, days, per_day, fixture_seed):
    """Write a synthetic candle file, news corpus and config into DIRECTORY."""
    directory = Path(directory)
    warmup, tail = 30, 16
    series = make_candles(warmup + days + tail, seed=fixture_seed)
    window = series.dates[warmup : warmup + days]
    corpus = make_corpus(window, per_day=per_day, seed=fixture_seed)
    _write(directory / "candles.csv", write_candles(series))
    _write(directory / "news.jsonl", dump_corpus(corpus))
    _write(
        directory / "config.ini",
        "[data]\ncandles = candles.csv\ncorpus = news.jsonl\noutput_dir = out\n\n"
        f"[run]\nstart = {window[0].isoformat()}\nend = {window[-1].isoformat()}\n"
        "horizons = 1, 7, 15\nworkers = 4\nfallback = true\n\n"
        f"[backend]\nkind = mock\nseed = {fixture_seed}\n",
    )
    click.echo(f"wrote {len(series)} bars and {len(corpus)} articles to {directory}")


if __name__ == "__main__":
    main()
