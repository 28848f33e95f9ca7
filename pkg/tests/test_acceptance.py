"""End-to-end acceptance gates for the package.

Each test covers one release criterion and prints a single
``ACCEPTANCE <name>: PASS/FAIL`` line with the measured numbers (visible
under ``pytest -s``), then asserts.  The statistical gates run on seeds
fixed a priori; their synthetic-design constants were chosen on a disjoint
exploration seed range (100+) so the seeds used here stay out-of-sample.
"""

import json
import time

import numpy as np

from qxs import (
    LinearSpec,
    MpsSpec,
    NeuralNetSpec,
    PanelData,
    QclSpec,
    RandomScoreSpec,
    SyntheticSpec,
    TrainConfig,
    apply_rotation,
    apply_unitary,
    compute_metrics,
    expectation_z,
    exponentiate_hamiltonian,
    generate_synthetic,
    init_mps,
    init_zero_state,
    make_random_hamiltonian,
    month_index,
    mps_forward,
    mps_to_full_tensor,
    run_backtest,
)
from qxs.backtest import _run_fold
from qxs.gradcheck import mps_gradient_check, nn_gradient_check, qcl_gradient_check

THREADS = 4


def _gate(name: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


def test_qcl_gradient_oracle():
    t0 = time.perf_counter()
    worst = qcl_gradient_check(n_qubits=4, depth=2, seed=0, fixtures=10, eps=1e-4)
    dt = time.perf_counter() - t0
    _gate("qcl-gradient", worst < 1e-6 and dt < 10.0,
          f"max dev {worst:.3e} < 1e-6, {dt:.2f}s < 10s")


def test_mps_gradient_oracle():
    t0 = time.perf_counter()
    worst = mps_gradient_check(n_sites=5, bond_dim=2, seed=0, fixtures=10, eps=1e-6)
    dt = time.perf_counter() - t0
    _gate("mps-gradient", worst < 1e-8 and dt < 5.0,
          f"max dev {worst:.3e} < 1e-8, {dt:.2f}s < 5s")


def test_nn_gradient_oracle():
    worst = nn_gradient_check(layer_sizes=(6, 4, 1), seed=0, fixtures=10)
    _gate("nn-gradient", worst < 1e-6, f"max dev {worst:.3e} < 1e-6")


def test_mps_matches_full_tensor_contraction():
    # 50 randomized chains across every (n <= 8, m <= 4) regime; the oracle
    # contracts the exponentially large full tensor, so it shares no code
    # with the chain-sweep forward.
    rng = np.random.default_rng(0)
    worst = 0.0
    for k in range(50):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 5))
        weights = init_mps(n, m, seed=k, noise_scale=0.7)
        x = rng.uniform(0.0, 1.0, size=n)
        tensor = mps_to_full_tensor(weights)
        for x_j in reversed(x):
            tensor = tensor @ np.array([1.0, x_j])
        worst = max(worst, abs(mps_forward(weights, x) - float(tensor)))
    _gate("mps-full-tensor", worst < 1e-10, f"max dev {worst:.3e} < 1e-10 over 50")


def test_simulator_invariants():
    rng = np.random.default_rng(0)
    state = init_zero_state(6)
    drift = 0.0
    for _ in range(1000):
        axis = ("X", "Y", "Z")[rng.integers(3)]
        state = apply_rotation(state, axis, int(rng.integers(6)),
                               float(rng.uniform(0.0, 2.0 * np.pi)))
        drift = max(drift, abs(np.linalg.norm(state.amplitudes) - 1.0))

    unit_dev = 0.0
    for seed in range(5):
        u = exponentiate_hamiltonian(make_random_hamiltonian(4, 1.0, seed=seed))
        gram = u.entries.conj().T @ u.entries
        unit_dev = max(unit_dev, float(np.max(np.abs(gram - np.eye(16)))))

    closed_dev = 0.0
    for seed in range(5):
        for tau in (0.3, 1.0, 2.5):
            spec = make_random_hamiltonian(1, tau, seed=seed)
            evolved = apply_unitary(init_zero_state(1),
                                    exponentiate_hamiltonian(spec))
            z = expectation_z(evolved, 0)
            expected = np.cos(2.0 * float(spec.coefficients_a[0]) * tau)
            closed_dev = max(closed_dev, abs(z - expected))

    ok = drift < 1e-12 and unit_dev < 1e-10 and closed_dev < 1e-10
    _gate("simulator-invariants", ok,
          f"norm drift {drift:.2e} < 1e-12, unitarity {unit_dev:.2e} < 1e-10, "
          f"closed form {closed_dev:.2e} < 1e-10")


def test_metric_fixtures():
    flat = compute_metrics(np.full(12, 0.01))
    dev_er = abs(flat.excess_return - (1.01 ** 12 - 1.0))
    two = compute_metrics(np.array([0.01, -0.01]))
    dev_te = abs(two.tracking_error - np.sqrt(12.0 * 0.0002))
    dev_er2 = abs(two.excess_return - (0.9999 ** 6 - 1.0))
    zero = compute_metrics(np.zeros(3))
    ok = (dev_er < 1e-9 and dev_te < 1e-9 and dev_er2 < 1e-9
          and flat.tracking_error == 0.0 and flat.information_ratio is None
          and zero.excess_return == 0.0 and zero.information_ratio is None)
    _gate("metric-fixtures", ok,
          f"ER dev {dev_er:.2e}, TE dev {dev_te:.2e}, ER2 dev {dev_er2:.2e}, "
          f"IR undefined at TE=0: {flat.information_ratio is None}")


def test_parameter_count_conformance():
    spec = SyntheticSpec(n_stocks=12, n_months=5, n_features=10, seed=0,
                         linear_weights=(0.005,) * 10, noise_sigma=0.01)
    panel, bench = generate_synthetic(spec)
    qcl_rep = run_backtest(
        panel, bench, QclSpec(),
        TrainConfig(seed=0, epochs=1, target_rescale="to_symmetric"),
        train_months=2, test_months=1,
    )
    mps_rep = run_backtest(panel, bench, MpsSpec(), TrainConfig(seed=0, epochs=1),
                           train_months=2, test_months=1)
    note = mps_rep.parameter_count_note or ""
    ok = (qcl_rep.parameter_count == 90 and mps_rep.parameter_count == 72
          and "72" in note and "76" in note)
    _gate("parameter-count", ok,
          f"qcl reports {qcl_rep.parameter_count}, tn reports "
          f"{mps_rep.parameter_count} with 76-vs-72 note: {'76' in note}")


def _interaction_panel(seed: int):
    spec = SyntheticSpec(
        n_stocks=100, n_months=96, n_features=4, seed=seed,
        linear_weights=(0.0, 0.0, 0.0, 0.0),
        interaction_pairs=((0, 1, 0.012), (2, 3, 0.012)),
        noise_sigma=0.04,
    )
    return generate_synthetic(spec)


def _interaction_ir(model_spec, seed: int, **cfg_kw) -> float:
    panel, bench = _interaction_panel(seed)
    cfg = TrainConfig(seed=seed, epochs=40, **cfg_kw)
    report = run_backtest(panel, bench, model_spec, cfg,
                          train_months=24, test_months=12, threads=THREADS)
    return report.metrics.information_ratio


def test_null_calibration_random_scores():
    irs = [_interaction_ir(RandomScoreSpec(), seed) for seed in range(20)]
    med = float(np.median(irs))
    _gate("null-calibration", -0.3 <= med <= 0.3,
          f"median IR {med:+.3f} over 20 seeds in [-0.3, +0.3]")


def test_linear_signal_recovery():
    t0 = time.perf_counter()
    irs = []
    for seed in range(5):
        spec = SyntheticSpec(
            n_stocks=200, n_months=120, n_features=10, seed=seed,
            linear_weights=(0.008, -0.006, 0.005, 0.004, -0.003,
                            0.0, 0.0, 0.0, 0.0, 0.0),
            noise_sigma=0.02,
        )
        panel, bench = generate_synthetic(spec)
        report = run_backtest(panel, bench, LinearSpec(), TrainConfig(seed=seed),
                              threads=THREADS)
        irs.append(report.metrics.information_ratio)
    med = float(np.median(irs))
    dt = time.perf_counter() - t0
    _gate("linear-recovery", med > 0.5 and dt < 120.0,
          f"median IR {med:.2f} > 0.5 over 5 seeds, {dt:.0f}s < 120s")


def test_nonlinearity_separation():
    # Interaction-only target: the best linear predictor of x0*x1 + x2*x3 on
    # independent symmetric features is the constant zero, so the linear
    # model is a null strategy here while multilinear and nonlinear models
    # can represent the signal exactly.
    t0 = time.perf_counter()
    seeds = range(5)
    lin = float(np.median([_interaction_ir(LinearSpec(), s) for s in seeds]))
    tn = float(np.median([_interaction_ir(MpsSpec(bond_dim=2), s) for s in seeds]))
    nn = float(np.median([_interaction_ir(NeuralNetSpec(layer_sizes=(4, 7, 1)), s)
                          for s in seeds]))
    qcl = float(np.median([
        _interaction_ir(QclSpec(depth=2), s, target_rescale="to_symmetric")
        for s in seeds
    ]))
    dt = time.perf_counter() - t0
    ok = (tn - lin >= 0.3 and nn - lin >= 0.3 and abs(lin) < 0.2
          and qcl > lin and dt < 1800.0)
    _gate("nonlinearity-separation", ok,
          f"medians lin {lin:+.3f} (|.| < 0.2), tn {tn:+.3f} (+{tn - lin:.2f}), "
          f"nn {nn:+.3f} (+{nn - lin:.2f}), qcl {qcl:+.3f} > lin; {dt:.0f}s < 1800s")


def test_determinism_byte_identical_reports(tmp_path):
    from qxs import cli

    config = {
        "model": "linear",
        "train": {"seed": 3, "epochs": 2},
        "synthetic": {"n_stocks": 50, "n_months": 30, "n_features": 4,
                      "seed": 3, "noise_sigma": 0.02},
        "schedule": {"train_months": 12, "test_months": 6},
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "run"
    assert cli.main(["backtest", "--config", str(cfg), "--out", str(out)]) == 0
    first = {name: (out / name).read_bytes()
             for name in ("report.json", "monthly.csv", "cumulative.csv")}
    assert cli.main(["backtest", "--config", str(cfg), "--out", str(out),
                     "--force"]) == 0
    same = all((out / name).read_bytes() == blob for name, blob in first.items())
    _gate("determinism", same,
          "two identical invocations, byte-identical report.json + CSVs: "
          f"{same}")


def _poison_panel(panel, month_cut: int, feature_value: float,
                  price_value: float | None) -> PanelData:
    frame = panel.frame.copy()
    rows_after = [month_index(d) > month_cut for d in frame["date"]]
    assert any(rows_after)
    for col in panel.feature_names:
        frame.loc[rows_after, col] = feature_value
    if price_value is not None:
        frame.loc[rows_after, "price"] = price_value
    return PanelData.from_frame(
        frame[["date", "stock_id", "price", *panel.feature_names]],
        feature_names=panel.feature_names,
    )


def test_no_lookahead_poisoning():
    spec = SyntheticSpec(n_stocks=20, n_months=40, n_features=3, seed=7,
                         linear_weights=(0.02, -0.015, 0.01), noise_sigma=0.01)
    panel, bench = generate_synthetic(spec)
    cfg = TrainConfig(epochs=2, seed=7)

    # Whole-report check: the last test month's realized return reads the
    # next month's price, so the first fully unread month is two past it.
    last_test = "2011-03"
    base = run_backtest(panel, bench, LinearSpec(), cfg, train_months=24,
                        test_months=6, last_month=last_test)
    horizon = month_index(last_test) + 1
    poisoned = _poison_panel(panel, horizon, feature_value=0.77, price_value=5.0)
    after = run_backtest(poisoned, bench, LinearSpec(), cfg, train_months=24,
                         test_months=6, last_month=last_test)
    report_same = (json.dumps(base.to_json_dict(), sort_keys=True)
                   == json.dumps(after.to_json_dict(), sort_keys=True))

    # Fold-granular check: corrupting months after a fold's training window
    # must leave that fold's fitted parameters and loss trace unchanged.
    mps_spec = MpsSpec(bond_dim=2)
    report = run_backtest(panel, bench, mps_spec, cfg, train_months=24,
                          test_months=8)
    fold0 = report.schedule.folds[0]
    fold_poisoned = _poison_panel(panel, month_index(fold0.train_end),
                                  feature_value=0.123, price_value=None)
    refit = _run_fold(fold_poisoned, bench, fold0, mps_spec, cfg)
    params_same = (json.dumps(refit.model_json, sort_keys=True)
                   == json.dumps(report.fold_results[0].model_json, sort_keys=True)
                   and np.array_equal(refit.loss_trace,
                                      report.fold_results[0].loss_trace))

    _gate("no-lookahead", report_same and params_same,
          f"past-horizon report identical: {report_same}, "
          f"fold params untouched by future months: {params_same}")
