from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from .bagging import BaggedModel, ConstantSampler
from .core import Hyperparameters, InteractionEvent, Recommender
from .exceptions import ConfigError, EvaluationAborted, StreamRecError
from .ingest import DatasetSpec, load_events, split_warmup, threshold_filter
from .isgd import IsgdModel
from .prequential import (
    EvalConfig,
    PrequentialEvaluator,
    SeenSets,
    StepRecord,
    moving_average,
    recall_series,
    summarize,
    timing_series,
    warm_up,
)
from .synthetic import generate_clustered_stream, write_stream
from .types import Aggregation, ModelKind, SummaryRow, WarmupMode
from .utils import fmt_ms, parse_int_list

_logger = logging.getLogger(__name__)

SUMMARY_CSV = "summary.csv"
STEPS_CSV = "steps.csv"
RECALL_MA_CSV = "recall20_ma.csv"
TIMING_MA_CSV = "timing_ma.csv"

BASELINE_LABEL = "ISGD"
ENSEMBLE_LABEL = "BaggedISGD"


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    hp: Hyperparameters = field(default_factory=Hyperparameters)
    model: ModelKind = "isgd"
    nodes: int = 64
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 42
    threads: int = 1
    output_dir: Path = Path("results")
    aggregation: Aggregation = "zero"
    warmup_mode: WarmupMode = "stream"
    stub_sampler_one: bool = False
    simultaneous: bool = False
    timing: bool = True
    sweep_nodes: Tuple[int, ...] = (8, 16, 32, 64)

    def __post_init__(self) -> None:
        if self.model not in ("isgd", "bagged"):
            raise ConfigError(f"model must be 'isgd' or 'bagged', got {self.model!r}")
        if self.model == "bagged" and self.nodes < 1:
            raise ConfigError(f"nodes must be >= 1, got {self.nodes}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if any(m < 1 for m in self.sweep_nodes):
            raise ConfigError(f"sweep node counts must be >= 1, got {list(self.sweep_nodes)}")


# ---------- Model runs ----------
def build_model(cfg: RunConfig) -> Recommender:
    if cfg.model == "isgd":
        return IsgdModel(cfg.hp, seed=cfg.seed, simultaneous=cfg.simultaneous)
    factory = (lambda ordinal, seed: ConstantSampler(1)) if cfg.stub_sampler_one else None
    return BaggedModel(
        cfg.hp,
        cfg.nodes,
        seed=cfg.seed,
        threads=cfg.threads,
        aggregation=cfg.aggregation,
        sampler_factory=factory,
        simultaneous=cfg.simultaneous,
    )


def run_label(cfg: RunConfig) -> Tuple[str, Optional[int]]:
    if cfg.model == "isgd":
        return BASELINE_LABEL, None
    return ENSEMBLE_LABEL, cfg.nodes


def prepare_stream(cfg: RunConfig) -> Tuple[List[InteractionEvent], List[InteractionEvent]]:
    events = load_events(cfg.dataset)
    if cfg.dataset.has_rating:
        events = threshold_filter(events, cfg.dataset)
    warmup, evaluation = split_warmup(events, cfg.eval.warmup_fraction)
    _logger.info("warm-up %d events, evaluation %d events", len(warmup), len(evaluation))
    return warmup, evaluation


def evaluate(
    cfg: RunConfig,
    warmup: Sequence[InteractionEvent],
    evaluation: Sequence[InteractionEvent],
) -> Tuple[SummaryRow, List[StepRecord]]:
    """Warm up a fresh model, then run the prequential loop on `evaluation`."""
    label, nodes = run_label(cfg)
    model = build_model(cfg)
    seen = SeenSets()
    try:
        warm_up(model, warmup, seen, mode=cfg.warmup_mode)
        evaluator = PrequentialEvaluator(model, cfg.eval, seen).on(
            "progress", lambda n: _logger.info("%s%s: %d steps", label, f" M={nodes}" if nodes else "", n)
        )
        records = evaluator.run(evaluation)
    finally:
        close = getattr(model, "close", None)
        if callable(close):
            close()
    return summarize(records, cfg.eval.cutoffs, model=label, nodes=nodes), records


# ---------- Output ----------
def _recall_col(c: int) -> str:
    return f"recall@{c}"


def summary_frame(rows: Sequence[SummaryRow], cutoffs: Sequence[int], *, timing: bool = True) -> pd.DataFrame:
    top = max(cutoffs)
    baseline = next((r for r in rows if r["model"] == BASELINE_LABEL), None)
    base_top = baseline["recall"][top] if baseline else None
    table: Dict[str, list] = {
        "model": [r["model"] for r in rows],
        "nodes": pd.array([r["nodes"] for r in rows], dtype="Int64"),
        "n_steps": [r["n_steps"] for r in rows],
        "n_scored": [r["n_scored"] for r in rows],
        "n_skipped_unknown_user": [r["n_skipped_unknown_user"] for r in rows],
        "n_skipped_repeat": [r["n_skipped_repeat"] for r in rows],
    }
    for c in cutoffs:
        table[_recall_col(c)] = [r["recall"][c] for r in rows]
    gains: List[Optional[float]] = []
    for r in rows:
        value = r["recall"][top]
        if r is baseline or not base_top or value is None:
            gains.append(None)
        else:
            gains.append((value - base_top) / base_top)
    table[f"{_recall_col(top)}_gain"] = gains
    if timing:
        table["update_ms"] = [fmt_ms(r["update_ms"]) for r in rows]
        table["rec_ms"] = [fmt_ms(r["rec_ms"]) for r in rows]
    return pd.DataFrame(table)


def steps_frame(records: Sequence[StepRecord], cutoffs: Sequence[int], *, timing: bool = True) -> pd.DataFrame:
    table: Dict[str, object] = {
        "position": [r.position for r in records],
        "user": [r.user for r in records],
        "item": [r.item for r in records],
        "status": [r.status for r in records],
        "rank": pd.array([r.rank for r in records], dtype="Int64"),
    }
    for c in cutoffs:
        table[_recall_col(c)] = pd.array([r.recall[c] if r.recall else None for r in records], dtype="Int64")
    if timing:
        table["update_ms"] = [fmt_ms(None if r.update_time is None else r.update_time * 1000.0) for r in records]
        table["rec_ms"] = [fmt_ms(None if r.rec_time is None else r.rec_time * 1000.0) for r in records]
    return pd.DataFrame(table)


def recall_ma_frame(records: Sequence[StepRecord], cutoff: int, window: int) -> pd.DataFrame:
    smoothed = moving_average(recall_series(records, cutoff), window)
    return pd.DataFrame({"step": range(1, len(smoothed) + 1), f"{_recall_col(cutoff)}_ma": smoothed})


def timing_ma_frame(records: Sequence[StepRecord], window: int) -> pd.DataFrame:
    parts = []
    for series, attr in (("update", "update_time"), ("rec", "rec_time")):
        smoothed = moving_average(timing_series(records, attr), window)
        parts.append(pd.DataFrame({"series": series, "step": range(1, len(smoothed) + 1), "ms_ma": smoothed}))
    return pd.concat(parts, ignore_index=True)


def _to_csv(df: pd.DataFrame, path: Path, float_format: str = "%.6f") -> None:
    df.to_csv(path, index=False, float_format=float_format, na_rep="", lineterminator="\n")


def write_run_outputs(cfg: RunConfig, records: Sequence[StepRecord], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    cutoffs = cfg.eval.cutoffs
    window = cfg.eval.moving_avg_window
    _to_csv(steps_frame(records, cutoffs, timing=cfg.timing), out_dir / STEPS_CSV)
    _to_csv(recall_ma_frame(records, max(cutoffs), window), out_dir / RECALL_MA_CSV)
    if cfg.timing:
        _to_csv(timing_ma_frame(records, window), out_dir / TIMING_MA_CSV, float_format="%.3f")


def write_summary(cfg: RunConfig, rows: Sequence[SummaryRow], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _to_csv(summary_frame(rows, cfg.eval.cutoffs, timing=cfg.timing), out_dir / SUMMARY_CSV)


# ---------- Commands ----------
def execute(cfg: RunConfig) -> int:
    """Single run: warm-up, prequential evaluation, three result files."""
    try:
        warmup, evaluation = prepare_stream(cfg)
        try:
            row, records = evaluate(cfg, warmup, evaluation)
        except EvaluationAborted as e:
            write_run_outputs(cfg, e.records, cfg.output_dir)
            raise
        write_run_outputs(cfg, records, cfg.output_dir)
        write_summary(cfg, [row], cfg.output_dir)
    except (StreamRecError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    _logger.info("results written to %s", cfg.output_dir)
    return 0


def sweep(cfg: RunConfig, node_counts: Sequence[int]) -> int:
    """Baseline ISGD plus one ensemble run per M, all from the same seed and input."""
    if cfg.model != "bagged":
        raise ConfigError("sweep requires model='bagged'")
    rows: List[SummaryRow] = []
    try:
        warmup, evaluation = prepare_stream(cfg)
        runs = [replace(cfg, model="isgd")] + [replace(cfg, nodes=m) for m in node_counts]
        for run_cfg in runs:
            label, nodes = run_label(run_cfg)
            sub_dir = cfg.output_dir / (label if nodes is None else f"M{nodes}")
            try:
                row, records = evaluate(run_cfg, warmup, evaluation)
            except EvaluationAborted as e:
                write_run_outputs(run_cfg, e.records, sub_dir)
                raise
            write_run_outputs(run_cfg, records, sub_dir)
            rows.append(row)
            write_summary(cfg, rows, cfg.output_dir)
    except (StreamRecError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


# ---------- Argument parsing ----------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="streamrec",
        description="Prequential evaluation of ISGD and online-bagged ISGD on a positive-only stream.",
    )
    p.add_argument("--input", required=True, help="TSV file: user, item[, rating[, timestamp]]")
    p.add_argument("--header", action="store_true", help="Skip the first line.")
    p.add_argument("--has-rating", action="store_true", help="Third column is a rating; keep only top-rated events.")
    p.add_argument("--scale-min", type=float, help="Lowest rating on the source scale.")
    p.add_argument("--scale-max", type=float, help="Highest rating on the source scale.")
    p.add_argument("--keep-top-frac", type=float, default=0.2, help="Top fraction of the rating scale kept (0.2).")

    p.add_argument("--model", choices=["isgd", "bagged"], default="isgd")
    p.add_argument("--nodes", type=int, default=64, help="Bootstrap nodes M for --model bagged (64).")
    p.add_argument("--sweep", action="store_true", help="Run ISGD plus bagged ISGD for every M in --sweep-nodes.")
    p.add_argument("--sweep-nodes", type=parse_int_list, default=[8, 16, 32, 64], help="Comma list (8,16,32,64).")

    p.add_argument("--k", type=int, default=8, help="Latent features (8).")
    p.add_argument("--iter", type=int, default=1, help="SGD passes per event (1).")
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.01, help="Regularization (0.01).")
    p.add_argument("--eta", type=float, default=0.05, help="Learn rate (0.05).")
    p.add_argument("--simultaneous-update", action="store_true", help="Update B_i from the pre-step A_u.")

    p.add_argument("--cutoffs", type=parse_int_list, default=[1, 5, 10, 20], help="Recall cutoffs (1,5,10,20).")
    p.add_argument("--list-size", type=int, default=20, help="Recommendation list length (20).")
    p.add_argument("--warmup-frac", type=float, default=0.1, help="Leading fraction used for warm-up (0.1).")
    p.add_argument("--warmup-mode", choices=["stream", "copy"], default="stream",
                   help="Ensemble warm-up: resample per node, or copy one trained node into all.")
    p.add_argument("--ma-window", type=int, default=10_000, help="Moving-average window (10000).")

    p.add_argument("--seed", type=int, default=42, help="Master seed (42).")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="Worker threads for ensemble scoring.")
    p.add_argument("--agg-missing", choices=["zero", "skip"], default="zero",
                   help="Nodes lacking a factor row score 0 (zero) or are left out of the mean (skip).")
    p.add_argument("--stub-sampler-one", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--no-timing", action="store_true", help="Leave timing columns out of the CSV outputs.")
    p.add_argument("--out", default="results", help="Output directory (results).")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug.")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    dataset = DatasetSpec(
        path=args.input,
        has_rating=args.has_rating,
        rating_scale_min=args.scale_min,
        rating_scale_max=args.scale_max,
        keep_top_fraction=args.keep_top_frac,
        header=args.header,
    )
    hp = Hyperparameters(k=args.k, iter=args.iter, lambda_=args.lambda_, eta=args.eta)
    ev = EvalConfig(
        cutoffs=tuple(args.cutoffs),
        list_size=args.list_size,
        moving_avg_window=args.ma_window,
        warmup_fraction=args.warmup_frac,
    )
    return RunConfig(
        dataset=dataset,
        hp=hp,
        model="bagged" if args.sweep else args.model,
        nodes=args.nodes,
        eval=ev,
        seed=args.seed,
        threads=args.threads,
        output_dir=Path(args.out),
        aggregation=args.agg_missing,
        warmup_mode=args.warmup_mode,
        stub_sampler_one=args.stub_sampler_one,
        simultaneous=args.simultaneous_update,
        timing=not args.no_timing,
        sweep_nodes=tuple(args.sweep_nodes),
    )


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    p = build_parser()
    args = p.parse_args(argv)

    # Validation
    if args.has_rating and (args.scale_min is None or args.scale_max is None):
        p.error("--has-rating requires --scale-min and --scale-max.")

    _configure_logging(args.verbose)
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    if args.sweep:
        return sweep(cfg, cfg.sweep_nodes)
    return execute(cfg)


def synth_main(argv: Optional[Sequence[str]] = None) -> int:
    p = argparse.ArgumentParser(prog="streamrec-synth", description="Write a clustered synthetic stream as TSV.")
    p.add_argument("output", help="Destination TSV path.")
    p.add_argument("--users", type=int, default=5000)
    p.add_argument("--items", type=int, default=500)
    p.add_argument("--events", type=int, default=100_000)
    p.add_argument("--clusters", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.2, help="Fraction of uniformly random events (0.2).")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    try:
        events = generate_clustered_stream(
            args.users, args.items, args.events, n_clusters=args.clusters, noise=args.noise, seed=args.seed
        )
        write_stream(events, args.output)
    except (StreamRecError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0
