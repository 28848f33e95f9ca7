"""Walk-forward backtest on a synthetic stock panel.

Generates a panel whose returns carry a pure two-feature interaction (no
linear component), then runs the full protocol for an ordinary linear
model and a bond-dimension-2 tensor chain: rank features per month, fit on
each rolling train window, hold the predicted top quintile, compare to the
equal-weight benchmark.
"""

import numpy as np

from qxs import LinearSpec, MpsSpec, SyntheticSpec, TrainConfig, generate_synthetic, run_backtest

spec = SyntheticSpec(
    n_stocks=100, n_months=96, n_features=4, seed=11,
    linear_weights=(0.0, 0.0, 0.0, 0.0),
    interaction_pairs=((0, 1, 0.012), (2, 3, 0.012)),
    noise_sigma=0.04,
)
panel, benchmark = generate_synthetic(spec)
print(f"panel: {spec.n_stocks} stocks x {spec.n_months} months, "
      f"{spec.n_features} features, interaction-only signal")

results = {}
for label, model in [("linear", LinearSpec()), ("tensor chain", MpsSpec(bond_dim=2))]:
    report = run_backtest(
        panel, benchmark, model,
        TrainConfig(seed=11, epochs=40),
        train_months=24, test_months=12, threads=4,
    )
    results[label] = report
    m = report.metrics
    ir = "n/a" if m.information_ratio is None else f"{m.information_ratio:8.2f}"
    print(f"{label:>13}: ER {m.excess_return * 100:7.2f}%  "
          f"TE {m.tracking_error * 100:6.2f}%  IR {ir}  "
          f"({m.n_months} test months, {report.parameter_count} parameters)")

# The linear model has nothing to fit: the interaction is orthogonal to
# every linear score, so its IR hovers near zero while the chain, whose
# function class contains the product exactly, separates.

chain_report = results["tensor chain"]
print("\nfirst test months (tensor chain):")
print("  month     portfolio  benchmark   alpha")
for record in chain_report.records[:6]:
    print(f"  {record.date}   {record.portfolio_return:+.4f}    "
          f"{record.benchmark_return:+.4f}   {record.alpha:+.4f}")

alphas = np.array([r.alpha for r in chain_report.records])
print(f"\nmean monthly alpha: {alphas.mean() * 100:.2f}% over {alphas.size} months")
print("report is deterministic: rerunning this script reproduces it byte for byte")
