"""End to end: synthetic corpus, learned calibrator, comparison with the baseline.

Runs a short training (a few epochs) so the demo finishes in about a minute.
Pass ``--epochs 300`` for the full default schedule.  Outputs land in a
temporary directory unless ``--out`` is given.
"""

import argparse
import tempfile
from pathlib import Path

from gyrocal.cli import cmd_evaluate, cmd_simulate, cmd_train
from gyrocal.config import RunConfig

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--epochs", type=int, default=10)
parser.add_argument("--out", type=Path)
args = parser.parse_args()

out = args.out or Path(tempfile.mkdtemp(prefix="gyrocal-demo-"))
cfg = RunConfig().override("training", epochs=args.epochs)

manifest = cmd_simulate(cfg, out / "corpus")
print(f"corpus: {len(manifest['scenarios'])} scenarios in {out / 'corpus'}")

_, history = cmd_train(cfg, out / "corpus", out / "model.json")
print(f"trained {len(history.epochs)} epochs, best epoch {history.best_epoch} "
      f"(val loss {history.best_val_loss:.4f}, initial {history.initial_val_loss:.4f})")

report = cmd_evaluate(out / "model.json", out / "corpus", out / "report")
print(f"{'scenario':>8} {'win':>4} {'scale ours':>11} {'scale base':>11} {'bias ours':>10} {'bias base':>10}")
for row in report.rows:
    print(f"{row.scenario:>8} {row.window_s:>4} {row.scale.ae_ours:>11.2e} {row.scale.ae_baseline:>11.2e} "
          f"{row.bias.ae_ours:>10.2e} {row.bias.ae_baseline:>10.2e}")
print(f"report files in {out / 'report'}")
