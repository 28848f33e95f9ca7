"""Walk-forward cross-sectional backtest with quintile portfolios.

Folds tile the panel: a training window of ``train_months`` followed by a
test window of ``test_months``, advancing by ``test_months`` so consecutive
test windows are disjoint and contiguous.  Each fold re-fits its model from
scratch (re-initialized from the config seed) on month-by-month rank-
transformed features and forward returns, then scores every test month's
cross-section, holds the equal-weight top quintile (floor(N/5) names, score
ties broken by ascending stock id), and records the excess return over the
benchmark.

Metrics over the concatenated monthly excess returns alpha_t:

    ER = prod(1 + alpha_t)^(12/T) - 1          (annualized excess return)
    TE = sqrt(12 / (T-1) * sum (alpha_t - mean)^2)   (annualized tracking error)
    IR = ER / TE, undefined when TE = 0 or T < 2 (never +/-inf)

A trailing partial test window is scheduled and reported but excluded from
the headline metrics unless explicitly included.  Reports are plain JSON
types and serialize byte-identically across repeated runs.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import training
from .errors import ConfigurationError, DataError, UsageError
from .panel import PanelData, add_months, month_index, month_range, rank_transform

__all__ = [
    "Fold",
    "FoldSchedule",
    "build_schedule",
    "select_top_quintile",
    "portfolio_return",
    "Metrics",
    "compute_metrics",
    "PortfolioRecord",
    "FoldResult",
    "BacktestReport",
    "run_backtest",
]

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

MIN_UNIVERSE = 5  # below this a quintile has no names to hold


@dataclass(frozen=True)
class Fold:
    index: int
    train_start: str
    train_end: str
    test_start: str
    test_end: str
    partial: bool = False

    def train_range(self) -> list:
        return month_range(self.train_start, self.train_end)

    def test_range(self) -> list:
        return month_range(self.test_start, self.test_end)


@dataclass(frozen=True)
class FoldSchedule:
    train_months: int
    test_months: int
    folds: tuple

    def __post_init__(self):
        if not self.folds:
            raise ConfigurationError("schedule has no folds")
        for fold in self.folds:
            if not (month_index(fold.train_end) == month_index(fold.train_start)
                    + self.train_months - 1
                    and month_index(fold.test_start)
                    == month_index(fold.train_end) + 1):
                raise ConfigurationError(f"malformed fold {fold}")
        for prev, cur in zip(self.folds, self.folds[1:]):
            if month_index(cur.test_start) != month_index(prev.test_end) + 1:
                raise ConfigurationError(
                    f"test windows must tile contiguously: fold {prev.index} "
                    f"ends {prev.test_end}, fold {cur.index} starts {cur.test_start}"
                )

    def test_month_count(self, include_partial: bool = True) -> int:
        return sum(len(f.test_range()) for f in self.folds
                   if include_partial or not f.partial)


def build_schedule(first_month: str, last_month: str, train_months: int = 36,
                   test_months: int = 12) -> FoldSchedule:
    """Tile [first_month, last_month] into train/test folds.

    The first fold trains on the opening ``train_months`` months; each
    subsequent fold advances by ``test_months``.  A trailing window shorter
    than ``test_months`` becomes a fold flagged partial.
    """
    if train_months < 1 or test_months < 1:
        raise ConfigurationError(
            f"window lengths must be >= 1, got train={train_months}, "
            f"test={test_months}"
        )
    lo, hi = month_index(first_month), month_index(last_month)
    if hi - lo + 1 < train_months + 1:
        raise ConfigurationError(
            f"span {first_month}..{last_month} has {hi - lo + 1} months; "
            f"need at least {train_months + 1} for one train window plus a "
            f"test month"
        )
    folds = []
    test_start = lo + train_months
    index = 0
    while test_start <= hi:
        test_end = min(test_start + test_months - 1, hi)
        folds.append(Fold(
            index=index,
            train_start=add_months(first_month, test_start - lo - train_months),
            train_end=add_months(first_month, test_start - lo - 1),
            test_start=add_months(first_month, test_start - lo),
            test_end=add_months(first_month, test_end - lo),
            partial=(test_end - test_start + 1) < test_months,
        ))
        test_start += test_months
        index += 1
    return FoldSchedule(train_months=train_months, test_months=test_months,
                        folds=tuple(folds))


def select_top_quintile(scores) -> list:
    """Top floor(N/5) stock ids by score, ties broken by ascending id.

    ``scores`` maps stock id -> predicted value.  Returns ids sorted
    ascending for deterministic downstream iteration.
    """
    items = list(scores.items())
    if len(items) < MIN_UNIVERSE:
        raise UsageError(
            f"need at least {MIN_UNIVERSE} scored stocks, got {len(items)}"
        )
    for sid, value in items:
        if not np.isfinite(value):
            raise UsageError(f"score for {sid!r} is not finite: {value!r}")
    k = len(items) // 5
    ranked = sorted(items, key=lambda item: (-item[1], item[0]))
    return sorted(sid for sid, _ in ranked[:k])


def portfolio_return(holdings, realized) -> float:
    """Equal-weight mean return of the holdings.

    A holding with no realized return (delisted before month end) exits at
    its last price: it stays in the denominator with zero marginal return.
    """
    holdings = list(holdings)
    if not holdings:
        raise UsageError("cannot price an empty portfolio")
    total = 0.0
    for sid in holdings:
        value = realized.get(sid)
        if value is None or not np.isfinite(value):
            logger.warning("holding %s has no realized return; exits flat", sid)
            value = 0.0
        total += value
    return total / len(holdings)


@dataclass(frozen=True)
class Metrics:
    """Annualized excess return / tracking error / information ratio."""

    excess_return: float
    tracking_error: float | None
    information_ratio: float | None
    n_months: int

    def to_json_dict(self) -> dict:
        return {
            "excess_return": self.excess_return,
            "tracking_error": self.tracking_error,
            "information_ratio": self.information_ratio,
            "n_months": self.n_months,
        }


def compute_metrics(alphas) -> Metrics:
    """Annualize monthly excess returns; undefined ratios become None."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.ndim != 1 or alphas.size == 0:
        raise UsageError(f"need a non-empty 1-D alpha series, got {alphas.shape}")
    if not np.all(np.isfinite(alphas)):
        raise UsageError("alpha series contains non-finite values")
    t = alphas.size
    er = float(np.prod(1.0 + alphas) ** (12.0 / t) - 1.0)
    if t < 2:
        return Metrics(excess_return=er, tracking_error=None,
                       information_ratio=None, n_months=t)
    if np.ptp(alphas) == 0.0:
        # A constant series deviates from its float mean by round-off only;
        # that noise must not leak into the ratio.
        te = 0.0
    else:
        te = float(np.sqrt(12.0 / (t - 1) * np.sum((alphas - alphas.mean()) ** 2)))
    ir = er / te if te > 0.0 else None
    return Metrics(excess_return=er, tracking_error=te,
                   information_ratio=ir, n_months=t)


@dataclass(frozen=True)
class PortfolioRecord:
    date: str
    fold_index: int
    holdings: tuple
    portfolio_return: float
    benchmark_return: float
    alpha: float
    n_universe: int
    in_partial_fold: bool = False

    def to_json_dict(self) -> dict:
        return {
            "date": self.date,
            "fold_index": self.fold_index,
            "holdings": list(self.holdings),
            "portfolio_return": self.portfolio_return,
            "benchmark_return": self.benchmark_return,
            "alpha": self.alpha,
            "n_universe": self.n_universe,
            "in_partial_fold": self.in_partial_fold,
        }


@dataclass
class FoldResult:
    fold: Fold
    train_rows: int
    loss_trace: np.ndarray
    model_json: dict
    records: list
    skipped_months: list

    def to_json_dict(self) -> dict:
        return {
            "index": self.fold.index,
            "train_start": self.fold.train_start,
            "train_end": self.fold.train_end,
            "test_start": self.fold.test_start,
            "test_end": self.fold.test_end,
            "partial": self.fold.partial,
            "train_rows": self.train_rows,
            "loss_trace": [float(v) for v in self.loss_trace],
            "model_params": self.model_json,
            "skipped_months": list(self.skipped_months),
        }


@dataclass
class BacktestReport:
    schema_version: int
    model_kind: str
    parameter_count: int
    parameter_count_note: str | None
    hyperparams: dict
    train_config: dict
    schedule: FoldSchedule
    include_partial: bool
    seed: int
    fold_results: list
    metrics: Metrics

    @property
    def records(self) -> list:
        out = []
        for fr in self.fold_results:
            out.extend(fr.records)
        return out

    def to_json_dict(self) -> dict:
        model = {
            "kind": self.model_kind,
            "parameter_count": self.parameter_count,
            "hyperparams": self.hyperparams,
        }
        if self.parameter_count_note is not None:
            model["parameter_count_note"] = self.parameter_count_note
        return {
            "schema_version": self.schema_version,
            "model": model,
            "train_config": self.train_config,
            "schedule": {
                "train_months": self.schedule.train_months,
                "test_months": self.schedule.test_months,
                "include_partial": self.include_partial,
            },
            "seed": self.seed,
            "metrics": self.metrics.to_json_dict(),
            "folds": [fr.to_json_dict() for fr in self.fold_results],
            "records": [r.to_json_dict() for r in self.records],
        }

    def monthly_frame(self) -> pd.DataFrame:
        records = self.records
        return pd.DataFrame({
            "date": [r.date for r in records],
            "portfolio_return": [r.portfolio_return for r in records],
            "benchmark_return": [r.benchmark_return for r in records],
            "alpha": [r.alpha for r in records],
        })

    def cumulative_frame(self) -> pd.DataFrame:
        """Compounded cumulative returns: prod(1 + r) - 1 up to each month."""
        monthly = self.monthly_frame()
        return pd.DataFrame({
            "date": monthly["date"],
            "cum_portfolio": np.cumprod(1.0 + monthly["portfolio_return"]) - 1.0,
            "cum_benchmark": np.cumprod(1.0 + monthly["benchmark_return"]) - 1.0,
            "cum_excess": np.cumprod(1.0 + monthly["alpha"]) - 1.0,
        })


def _ranked_train_window(panel: PanelData, months, skipped: list):
    """Stack month-by-month rank-transformed (features, forward returns)."""
    xs, ys = [], []
    for date in months:
        if not panel.has_date(date):
            skipped.append(f"{date}: no panel rows")
            continue
        cs = panel.cross_section(date)
        keep = np.all(np.isfinite(cs.features), axis=1) & np.isfinite(cs.fwd_returns)
        if int(keep.sum()) < 2:
            skipped.append(f"{date}: fewer than 2 complete training rows")
            continue
        feats = cs.features[keep]
        xs.append(np.column_stack([rank_transform(feats[:, j])
                                   for j in range(feats.shape[1])]))
        ys.append(rank_transform(cs.fwd_returns[keep]))
    if not xs:
        return np.empty((0, panel.n_features)), np.empty(0)
    return np.vstack(xs), np.concatenate(ys)


def _run_fold(panel: PanelData, benchmark: pd.Series, fold: Fold, model_spec,
              cfg: training.TrainConfig) -> FoldResult:
    skipped = []
    x, y = _ranked_train_window(panel, fold.train_range(), skipped)
    if x.shape[0] == 0:
        raise DataError(
            f"fold {fold.index}: no usable training rows in "
            f"{fold.train_start}..{fold.train_end}"
        )
    predictor = training.fit(model_spec, x, y, cfg)

    records = []
    for date in fold.test_range():
        if not panel.has_date(date):
            skipped.append(f"{date}: no panel rows")
            continue
        cs = panel.cross_section(date)
        keep = np.all(np.isfinite(cs.features), axis=1)
        n_universe = int(keep.sum())
        if n_universe < MIN_UNIVERSE:
            skipped.append(f"{date}: universe below {MIN_UNIVERSE} stocks")
            logger.warning("skipping %s: universe below %d", date, MIN_UNIVERSE)
            continue
        if not np.any(np.isfinite(cs.fwd_returns[keep])):
            # A lone delisting exits flat, but a month with no realized
            # returns at all is not scoreable.
            skipped.append(f"{date}: no realized returns")
            logger.warning("skipping %s: no realized returns", date)
            continue
        feats = cs.features[keep]
        ranked = np.column_stack([rank_transform(feats[:, j])
                                  for j in range(feats.shape[1])])
        ids = cs.stock_ids[keep]
        scores = dict(zip(ids, predictor.predict(ranked)))
        holdings = select_top_quintile(scores)
        realized = dict(zip(ids, cs.fwd_returns[keep]))
        if date not in benchmark.index:
            raise DataError(f"benchmark has no return for test month {date}")
        bench = float(benchmark.loc[date])
        port = portfolio_return(holdings, realized)
        records.append(PortfolioRecord(
            date=date,
            fold_index=fold.index,
            holdings=tuple(holdings),
            portfolio_return=port,
            benchmark_return=bench,
            alpha=port - bench,
            n_universe=n_universe,
            in_partial_fold=fold.partial,
        ))
    return FoldResult(
        fold=fold,
        train_rows=int(x.shape[0]),
        loss_trace=predictor.loss_trace,
        model_json=predictor.model_json(),
        records=records,
        skipped_months=skipped,
    )


def run_backtest(panel: PanelData, benchmark: pd.Series, model_spec,
                 cfg: training.TrainConfig, train_months: int = 36,
                 test_months: int = 12, first_month: str | None = None,
                 last_month: str | None = None, include_partial: bool = False,
                 threads: int = 1) -> BacktestReport:
    """Walk the panel, fit per fold, and aggregate monthly excess returns.

    The schedule defaults to the panel's feature-bearing month range.  Folds
    are independent given the panel; with ``threads > 1`` they run in a
    thread pool, and results are assembled in fold order either way, so the
    report does not depend on scheduling.
    """
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    feature_dates = panel.feature_dates()
    if not feature_dates:
        raise DataError("panel has no months with complete feature rows")
    schedule = build_schedule(
        first_month or feature_dates[0],
        last_month or feature_dates[-1],
        train_months=train_months,
        test_months=test_months,
    )

    if threads == 1:
        fold_results = [_run_fold(panel, benchmark, fold, model_spec, cfg)
                        for fold in schedule.folds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_fold, panel, benchmark, fold,
                                   model_spec, cfg)
                       for fold in schedule.folds]
            fold_results = [f.result() for f in futures]

    alphas = [r.alpha for fr in fold_results for r in fr.records
              if include_partial or not fr.fold.partial]
    if not alphas:
        raise DataError("backtest produced no scoreable test months")
    metrics = compute_metrics(np.asarray(alphas))

    n_features = panel.n_features
    note = None
    if model_spec.kind == "tn":
        m = model_spec.bond_dim
        note = (
            f"open-boundary chain: 2*(2*{m}) boundary + "
            f"({n_features}-2)*(2*{m}^2) interior = "
            f"{model_spec.parameter_count(n_features)} parameters; layouts "
            f"that pad boundary bonds or carry an output leg count 76 at "
            f"n=10, m=2"
        )
    return BacktestReport(
        schema_version=REPORT_SCHEMA_VERSION,
        model_kind=model_spec.kind,
        parameter_count=model_spec.parameter_count(n_features),
        parameter_count_note=note,
        hyperparams=model_spec.hyperparams(),
        train_config={
            "optimizer": cfg.optimizer,
            "learning_rate": cfg.learning_rate,
            "adam_beta1": cfg.adam_beta1,
            "adam_beta2": cfg.adam_beta2,
            "adam_eps": cfg.adam_eps,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "seed": cfg.seed,
            "target_rescale": cfg.target_rescale,
        },
        schedule=schedule,
        include_partial=include_partial,
        seed=cfg.seed,
        fold_results=fold_results,
        metrics=metrics,
    )
