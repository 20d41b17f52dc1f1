"""``gyrocal`` command line: simulate | train | calibrate | evaluate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import CalibrationResult, Method, calibrate_scenario
from .config import RunConfig
from .evaluation import DEFAULT_WINDOWS, EvalReport, evaluate, learned_estimate
from .nn import Model, TrainConfig, TrainingDiverged, load_checkpoint, save_checkpoint, train
from .pipeline import (CorpusSpec, build_datapoints, build_synthetic_corpus, load_corpus,
                       split_train_val, to_arrays)
from .sensor_model import Orientation, RecordingFormatError, Scenario, read_recording_csv

log = logging.getLogger("gyrocal")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# --- commands -----------------------------------------------------------------

def cmd_simulate(config: RunConfig, out_dir) -> dict:
    """Generate the synthetic corpus and write CSVs plus ``manifest.json``."""
    _, manifest = build_synthetic_corpus(
        spec=config.corpus, seed=config.seeds.corpus, out_dir=out_dir,
        extra={"config_hash": config.hash()})
    return manifest


def cmd_train(config: RunConfig, corpus_dir, out_model, history_path=None):
    """Assemble the dataset from the corpus, train, save the best checkpoint and history CSV."""
    try:
        manifest, train_sc, _ = load_corpus(corpus_dir)
    except FileNotFoundError as exc:
        raise DataError(f"corpus not found: {exc}") from exc
    if not train_sc:
        raise DataError(f"{corpus_dir}: corpus has no training scenarios")
    if any(sc.labels is None for sc in train_sc):
        raise DataError(f"{corpus_dir}: training scenarios must be labelled")
    pc = config.pipeline
    points = build_datapoints(train_sc, segment_s=pc.segment_s, usable_s=pc.usable_s,
                              window_len=pc.window_len, stride=pc.stride)
    split = split_train_val(points, pc.split_ratio, config.seeds.split)
    tc = config.training
    hyper = TrainConfig(lr=tc.lr, batch_size=tc.batch_size, epochs=tc.epochs,
                        seed=config.seeds.training, patience=tc.patience)
    model = Model(config.model, seed=config.seeds.training)
    model, history = train(model, to_arrays(split.train), to_arrays(split.val), hyper,
                           progress=lambda r: log.info("epoch %d train %.5f val %.5f",
                                                       r.epoch, r.train_loss, r.val_loss))
    chash = config.hash()
    save_checkpoint(model, out_model, train_seed=config.seeds.training,
                    extra={"config_hash": chash, "corpus_hash": manifest.get("config_hash"),
                           "best_epoch": history.best_epoch})
    history_path = Path(history_path) if history_path else Path(out_model).with_suffix(".history.csv")
    with open(history_path, "w", newline="") as fh:
        fh.write(f"# config_hash={chash}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tl, vl in history.rows():
            wr.writerow([epoch, repr(tl), repr(vl)])
    return model, history


def cmd_calibrate(up_csv, down_csv, rate_dps: float, window_s: float, method: str = "Baseline",
                  checkpoint=None, fs_hz: Optional[float] = None) -> CalibrationResult:
    method = Method(method)
    if method is Method.LEARNED and checkpoint is None:
        raise UsageError("--checkpoint is required with --method Learned")
    up = read_recording_csv(up_csv, Orientation.UP, rate_dps, fs_hz)
    down = read_recording_csv(down_csv, Orientation.DOWN, rate_dps, fs_hz if fs_hz else up.sample_rate_hz)
    sc = Scenario(up, down)
    if method is Method.BASELINE:
        return calibrate_scenario(sc, window_s)
    model, _ = load_checkpoint(checkpoint)
    scale, bias = learned_estimate(model, sc, window_s)
    return CalibrationResult(scale=scale, bias=bias, window_s=window_s, method=Method.LEARNED)


def cmd_evaluate(checkpoint, corpus_dir, out_dir, windows: Sequence[float] = DEFAULT_WINDOWS) -> EvalReport:
    try:
        model, meta = load_checkpoint(checkpoint)
        _, _, test_sc = load_corpus(corpus_dir)
    except FileNotFoundError as exc:
        raise DataError(f"missing input: {exc}") from exc
    if not test_sc:
        raise DataError(f"{corpus_dir}: corpus has no test split")
    report = evaluate(model, test_sc, windows, config_hash=meta.get("config_hash", ""))
    report.write(out_dir)
    return report


# --- argument parsing -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config(p):
    p.add_argument("--config", type=Path, help="run config JSON (defaults used when omitted)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gyrocal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a labelled synthetic corpus")
    _add_config(p)
    p.add_argument("--out", type=Path, help="output directory (default: paths.corpus_dir)")
    p.add_argument("--seed", type=int, help="corpus seed (overrides seeds.corpus)")
    p.add_argument("--n-scenarios", type=int, help="number of scenarios")
    p.add_argument("--n-test", type=int, help="held-out scenarios taken from the end")
    p.add_argument("--noise-sigma", type=float, help="per-sample white noise std [DPS]")

    p = sub.add_parser("train", help="train the learned calibrator on a corpus")
    _add_config(p)
    p.add_argument("--corpus", type=Path, help="corpus directory (default: paths.corpus_dir)")
    p.add_argument("--out", type=Path, help="checkpoint path (default: paths.checkpoint)")
    p.add_argument("--history", type=Path, help="history CSV path (default: <out>.history.csv)")
    p.add_argument("--epochs", type=int, help="maximum epochs")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--batch-size", type=int, help="mini-batch size")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs")
    p.add_argument("--seed", type=int, help="training seed (overrides seeds.training)")
    p.add_argument("--split-seed", type=int, help="train/val split seed (overrides seeds.split)")

    p = sub.add_parser("calibrate", help="calibrate one up/down recording pair")
    p.add_argument("--up", type=Path, required=True, help="z-up recording CSV (t_s,omega_z_dps)")
    p.add_argument("--down", type=Path, required=True, help="z-down recording CSV")
    p.add_argument("--rate", type=float, default=78.0, help="turntable rate [DPS] (default 78)")
    p.add_argument("--window", type=float, required=True, help="calibration window [s]")
    p.add_argument("--method", choices=[m.value for m in Method], default="Baseline",
                   help="Baseline (closed form) or Learned (needs --checkpoint)")
    p.add_argument("--checkpoint", type=Path, help="model checkpoint for --method Learned")
    p.add_argument("--fs", type=float, help="sample rate [Hz]; inferred from t_s when omitted")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = sub.add_parser("evaluate", help="compare learned and baseline calibration on the test split")
    _add_config(p)
    p.add_argument("--checkpoint", type=Path, help="model checkpoint (default: paths.checkpoint)")
    p.add_argument("--corpus", type=Path, help="corpus directory (default: paths.corpus_dir)")
    p.add_argument("--out", type=Path, help="report directory (default: paths.report_dir)")
    p.add_argument("--windows", type=float, nargs="+", help="calibration windows [s] (default 2 4 6)")
    return parser


def _load_config(args) -> RunConfig:
    try:
        return RunConfig.load(args.config) if args.config else RunConfig()
    except FileNotFoundError as exc:
        raise DataError(f"config not found: {args.config}") from exc
    except (TypeError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"invalid config {args.config}: {exc}") from exc


def _run(args) -> int:
    if args.command == "calibrate":
        res = cmd_calibrate(args.up, args.down, args.rate, args.window, args.method,
                            args.checkpoint, args.fs)
        print(json.dumps(res.to_dict()))
        return EXIT_OK

    cfg = _load_config(args)
    if args.command == "simulate":
        cfg = cfg.override("seeds", corpus=args.seed)
        cfg = cfg.override("corpus", n_scenarios=args.n_scenarios, n_test=args.n_test,
                           noise_sigma=args.noise_sigma)
        out = args.out or Path(cfg.paths.corpus_dir)
        manifest = cmd_simulate(cfg, out)
        n_test = sum(e["split"] == "test" for e in manifest["scenarios"])
        print(f"wrote {len(manifest['scenarios'])} scenarios ({n_test} test) to {out}")
    elif args.command == "train":
        cfg = cfg.override("training", epochs=args.epochs, lr=args.lr,
                           batch_size=args.batch_size, patience=args.patience)
        cfg = cfg.override("seeds", training=args.seed, split=args.split_seed)
        out = args.out or Path(cfg.paths.checkpoint)
        _, history = cmd_train(cfg, args.corpus or Path(cfg.paths.corpus_dir), out, args.history)
        print(f"best epoch {history.best_epoch}: val loss {history.best_val_loss:.6g} "
              f"(initial {history.initial_val_loss:.6g}); checkpoint {out}")
    elif args.command == "evaluate":
        out = args.out or Path(cfg.paths.report_dir)
        report = cmd_evaluate(args.checkpoint or Path(cfg.paths.checkpoint),
                              args.corpus or Path(cfg.paths.corpus_dir), out,
                              tuple(args.windows) if args.windows else DEFAULT_WINDOWS)
        print(f"wrote {len(report.rows)} rows to {out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except UsageError as exc:
        print(f"gyrocal: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, np.linalg.LinAlgError, ZeroDivisionError, FloatingPointError) as exc:
        print(f"gyrocal: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, RecordingFormatError, OSError, ValueError, KeyError) as exc:
        print(f"gyrocal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
