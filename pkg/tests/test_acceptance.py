"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary."""

import time

import numpy as np
import pytest

from conftest import avg_pool_loops, central_difference, conv2d_loops
from gyrocal.calibration import (SixPositionInput, calibrate_scenario, calibrate_six_position,
                                 error_terms_from_matrix, six_position_gt_matrix)
from gyrocal.cli import cmd_evaluate, cmd_simulate, cmd_train
from gyrocal.config import RunConfig
from gyrocal.evaluation import conv_time_improvement, improvement_pct
from gyrocal.nn import BatchNormState, Model, Tensor, avg_pool, batch_norm, conv2d_forward, loss_rmse100
from gyrocal.pipeline import CorpusSpec, build_datapoints, generate_corpus, split_train_val
from gyrocal.sensor_model import GyroErrorTerms, generate_scenario

# printed accuracy table: (scenario, window, term) -> (ours AE, baseline AE, printed improvement)
AE_TABLE = {
    ("TS1", 2, "scale"): (0.00015, 0.00053, 71.7), ("TS1", 2, "bias"): (0.02195, 0.03408, 35.6),
    ("TS1", 4, "scale"): (0.00013, 0.00025, 48.0), ("TS1", 4, "bias"): (0.00283, 0.00335, 15.5),
    ("TS1", 6, "scale"): (0.00008, 0.00028, 71.4), ("TS1", 6, "bias"): (0.00703, 0.01697, 58.6),
    ("TS2", 2, "scale"): (0.00024, 0.00084, 71.4), ("TS2", 2, "bias"): (0.02615, 0.07856, 66.7),
    ("TS2", 4, "scale"): (0.00023, 0.00083, 72.3), ("TS2", 4, "bias"): (0.01272, 0.05125, 75.2),
    ("TS2", 6, "scale"): (0.00013, 0.00069, 81.2), ("TS2", 6, "bias"): (0.00572, 0.02877, 80.1),
}

# printed convergence table: (scenario, window, term) -> (T_conv, printed improvement)
CONV_TABLE = {
    ("TS1", 2, "scale"): (17, 88.2), ("TS1", 2, "bias"): (4, 50.0),
    ("TS1", 4, "scale"): (23, 82.6), ("TS1", 4, "bias"): (26, 84.6),
    ("TS1", 6, "scale"): (25, 76.0), ("TS1", 6, "bias"): (21, 71.4),
    ("TS2", 2, "scale"): (17, 88.2), ("TS2", 2, "bias"): (9, 77.8),
    ("TS2", 4, "scale"): (17, 76.5), ("TS2", 4, "bias"): (15, 73.3),
    ("TS2", 6, "scale"): (34, 82.4), ("TS2", 6, "bias"): (21, 71.4),
}

N_REPLICATES = 10


def test_criterion_1_metric_reproduction(report_criterion):
    worst = 0.0
    for ours, base, printed in AE_TABLE.values():
        worst = max(worst, abs(improvement_pct(base, ours) - printed))
    for (_, window, _), (tc, printed) in CONV_TABLE.items():
        worst = max(worst, abs(conv_time_improvement(tc, window) - printed))
    n = len(AE_TABLE) + len(CONV_TABLE)
    report_criterion(1, n == 24 and worst <= 0.1,
                     f"{n} printed percentages reproduced, worst deviation {worst:.3f} pp (tol 0.1)")


def test_criterion_2_baseline_oracle(report_criterion):
    rng = np.random.default_rng(2024)
    worst_s = worst_b = 0.0
    for i in range(100):
        s, b = rng.uniform(-0.02, 0.02), rng.uniform(-1, 1)
        rate = rng.uniform(10, 300)
        res = calibrate_scenario(generate_scenario(rate, 2, 145, GyroErrorTerms(s, b), i))
        worst_s, worst_b = max(worst_s, abs(res.scale - s)), max(worst_b, abs(res.bias - b))
    worst_6 = 0.0
    for _ in range(100):
        scale, bias = rng.uniform(-0.02, 0.02, 3), rng.uniform(-1, 1, 3)
        g = six_position_gt_matrix(rng.uniform(10, 300))
        z = np.hstack([np.diag(1 + scale), bias[:, None]])
        s_hat, b_hat = error_terms_from_matrix(calibrate_six_position(SixPositionInput(z @ g, g)))
        worst_6 = max(worst_6, np.abs(s_hat - scale).max(), np.abs(b_hat - bias).max())
    ok = worst_s <= 1e-12 and worst_b <= 1e-12 and worst_6 <= 1e-10
    report_criterion(2, ok, f"single-axis max err scale {worst_s:.2e}, bias {worst_b:.2e} (tol 1e-12); "
                            f"six-position max err {worst_6:.2e} (tol 1e-10)")


def test_criterion_3_pipeline_counts(report_criterion):
    spec = CorpusSpec()
    scenarios = generate_corpus(spec, seed=0)[:spec.n_scenarios - spec.n_test]
    points = build_datapoints(scenarios)
    split = split_train_val(points, 0.8, 0)
    counts = (len(scenarios), len(points), len(split.train), len(split.val))
    report_criterion(3, counts == (46, 1472, 1177, 295),
                     f"{counts[0]} scenarios -> {counts[1]} points, split {counts[2]}/{counts[3]} "
                     "(expected 1472, 1177/295)")


def test_criterion_4_gradient_check(report_criterion, tiny_config):
    rng = np.random.default_rng(4)
    n = 4
    s, b = rng.uniform(0.003, 0.005, n), rng.uniform(-0.1, 0, n)
    up = (1 + s)[:, None] * 78 + b[:, None] + rng.normal(0, 0.03, (n, 12))
    down = -(1 + s)[:, None] * 78 + b[:, None] + rng.normal(0, 0.03, (n, 12))
    x = np.stack([up, down, np.full((n, 12), 78.0)], axis=1)
    y = np.stack([s, b], axis=1)
    m = Model(tiny_config, seed=3).train()

    def loss():
        m.reseed_dropout(5)
        return loss_rmse100(m(x), y)

    m.zero_grad()
    loss().backward()
    worst, count = 0.0, 0
    for _, p in m.named_parameters():
        num = central_difference(lambda: loss().item(), p, step=1e-5)
        rel = np.abs(p.grad - num) / np.maximum(np.maximum(np.abs(p.grad), np.abs(num)), 1e-8)
        worst, count = max(worst, rel.max()), count + p.data.size
    report_criterion(4, worst <= 1e-4,
                     f"{count} parameter entries, worst relative error {worst:.2e} (tol 1e-4)")


def test_criterion_5_layer_oracles(report_criterion):
    rng = np.random.default_rng(5)
    worst_conv = worst_pool = 0.0
    for _ in range(1000):
        b, cin, cout = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
        h, w = rng.integers(1, 6), rng.integers(1, 10)
        n, m = rng.integers(1, h + 1), rng.integers(1, w + 1)
        x = rng.normal(size=(b, cin, h, w))
        k, bias = rng.normal(size=(cout, cin, n, m)), rng.normal(size=cout)
        out = conv2d_forward(Tensor(x), Tensor(k), Tensor(bias)).data
        worst_conv = max(worst_conv, np.abs(out - conv2d_loops(x, k, bias)).max())
        pool = avg_pool(Tensor(x), n, m).data
        worst_pool = max(worst_pool, np.abs(pool - avg_pool_loops(x, n, m)).max())
    x = rng.normal(4.0, 3.0, (8, 3, 2, 20))
    bn_out = batch_norm(Tensor(x), BatchNormState(3), training=True).data
    bn_mean = np.abs(bn_out.mean(axis=(0, 2, 3))).max()
    losses = (loss_rmse100(Tensor(np.full((3, 2), 0.25)), np.full((3, 2), 0.25)).item(),
              loss_rmse100(Tensor(np.full((3, 2), 0.01)), np.zeros((3, 2))).item(),
              loss_rmse100(Tensor([[0.03]]), [[0.0]]).item())
    ok = worst_conv <= 1e-12 and worst_pool <= 1e-12 and bn_mean <= 1e-6 and losses == (0.0, 1.0, 3.0)
    report_criterion(5, ok, f"conv max diff {worst_conv:.1e}, pool {worst_pool:.1e} over 1000 shapes; "
                            f"BN |mean| {bn_mean:.1e}; loss examples {losses}")


@pytest.fixture(scope="module")
def replicates(tmp_path_factory):
    """Full default run per replicate; seed r drives corpus, split and training."""
    out = []
    for r in range(N_REPLICATES):
        root = tmp_path_factory.mktemp(f"rep{r}")
        cfg = RunConfig().override("seeds", corpus=r, split=r, training=r)
        start = time.perf_counter()
        cmd_simulate(cfg, root / "corpus")
        _, history = cmd_train(cfg, root / "corpus", root / "model.json")
        report = cmd_evaluate(root / "model.json", root / "corpus", root / "report")
        out.append((root, history, report, time.perf_counter() - start))
    return out


def _two_second(report):
    rows = [r for r in report.rows if r.window_s == 2]
    mean = lambda term, attr: float(np.mean([getattr(getattr(r, term), attr) for r in rows]))  # noqa: E731
    return rows, {t: (mean(t, "ae_ours"), mean(t, "ae_baseline")) for t in ("scale", "bias")}


def _beats(report):
    _, means = _two_second(report)
    return all(ours < base for ours, base in means.values())


@pytest.mark.slow
def test_criterion_6_directional_claim(report_criterion, replicates):
    wins = 0
    for r, (_, history, report, secs) in enumerate(replicates):
        _, means = _two_second(report)
        wins += _beats(report)
        print(f"replicate {r}: best epoch {history.best_epoch}, val {history.best_val_loss:.4f}, "
              f"scale AE ours/base {means['scale'][0]:.2e}/{means['scale'][1]:.2e}, "
              f"bias AE ours/base {means['bias'][0]:.2e}/{means['bias'][1]:.2e}, {secs:.0f} s")
    total = sum(rep[3] for rep in replicates)
    report_criterion(6, wins >= 0.7 * N_REPLICATES and total <= 1800,
                     f"learned beats baseline at 2 s on both terms in {wins}/{N_REPLICATES} "
                     f"replicates (need >= 7); {total:.0f} s total")


@pytest.mark.slow
def test_criterion_7_convergence_property(report_criterion, replicates):
    beating, violations, curve_ok = 0, [], True
    for r, (root, _, report, _) in enumerate(replicates):
        lines = (root / "report" / "ae_curves.csv").read_text().splitlines()[2:]
        keys = [tuple(ln.split(",")[:2]) for ln in lines]
        curve_ok &= all(keys.count((sc.scenario, t)) == 70
                        for sc in report.curves for t in ("scale", "bias"))
        if not _beats(report):
            continue
        beating += 1
        rows, _ = _two_second(report)
        for row in rows:
            for term in ("scale", "bias"):
                tr = getattr(row, term)
                if tr.ae_ours >= tr.ae_baseline:
                    continue
                conv = tr.conv_improvement_pct
                if not (tr.t_conv is None or tr.t_conv > 2) or not (conv is None or conv > 0):
                    violations.append((r, row.scenario, term, tr.t_conv, conv))
    detail = (f"{beating} beating replicates checked, {len(violations)} violations; "
              f"curve CSV 70 rows per scenario per term: {curve_ok}")
    if beating == 0:
        detail += " (property holds vacuously: no replicate beats the baseline)"
    report_criterion(7, curve_ok and not violations, detail)


def test_criterion_8_determinism(report_criterion, tmp_path):
    cfg = RunConfig().override("training", epochs=2).override("seeds", corpus=3, split=4, training=5)
    for run in ("a", "b"):
        root = tmp_path / run
        cmd_simulate(cfg, root / "corpus")
        cmd_train(cfg, root / "corpus", root / "model.json")
        cmd_evaluate(root / "model.json", root / "corpus", root / "report")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    differ = [str(f) for f in files if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    report_criterion(8, not differ and len(files) > 0,
                     f"{len(files)} output files compared, {len(differ)} differ")
