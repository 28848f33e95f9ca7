"""Monthly stock panel: schema, derived features, ranking, synthetic data.

A panel is a long frame with one row per (month, stock): a price, optional
feature columns, and a forward return derived from prices.  Months are
"YYYY-MM" strings; the forward return at month t is (p_{t+1} - p_t) / p_t and
exists only where the stock has a price in both consecutive calendar months.
Universes may differ across months, and anything derived at month t uses data
up to t only.

CSV interchange formats:

* panel:      ``date,stock_id,price,f_1,...,f_n`` (missing values as empty
  fields; forward returns are never stored, always recomputed from prices)
* benchmark:  ``date,return`` where the row at month t holds the benchmark
  return realized over t -> t+1, aligned with the panel's forward returns.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .errors import ConfigurationError, DataError, NumericalError, UsageError

__all__ = [
    "month_index",
    "month_str",
    "add_months",
    "month_range",
    "rank_transform",
    "compute_forward_returns",
    "momentum",
    "size_feature",
    "beta_feature",
    "FeatureSpec",
    "DEFAULT_FEATURES",
    "SyntheticSpec",
    "generate_synthetic",
    "CrossSection",
    "PanelData",
    "save_panel_csv",
    "load_panel_csv",
    "save_benchmark_csv",
    "load_benchmark_csv",
]

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")

_RESERVED_COLUMNS = ("date", "stock_id", "price", "fwd_return")


def month_index(month: str) -> int:
    """Months since 0000-01 for "YYYY-MM" strings; rejects anything else."""
    m = _MONTH_RE.match(str(month))
    if not m:
        raise UsageError(f"month must look like YYYY-MM, got {month!r}")
    year, mon = int(m.group(1)), int(m.group(2))
    if not 1 <= mon <= 12:
        raise UsageError(f"month number out of range in {month!r}")
    return year * 12 + (mon - 1)


def month_str(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


def add_months(month: str, k: int) -> str:
    return month_str(month_index(month) + k)


def month_range(first: str, last: str) -> list:
    """All consecutive months from first to last inclusive."""
    lo, hi = month_index(first), month_index(last)
    if hi < lo:
        raise UsageError(f"month range is empty: {first} > {last}")
    return [month_str(i) for i in range(lo, hi + 1)]


def rank_transform(values: np.ndarray) -> np.ndarray:
    """Map a cross-section to ascending ranks scaled into [0, 1].

    Rank 0 is the smallest value, N-1 the largest, ties get the average rank,
    and everything is divided by N-1.  Strictly increasing transforms of the
    input leave the output unchanged.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise UsageError(
            f"need a 1-D cross-section with >= 2 values, got shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise UsageError("cross-section contains non-finite values")
    return (rankdata(values, method="average") - 1.0) / (values.size - 1.0)


def compute_forward_returns(prices: pd.DataFrame) -> pd.DataFrame:
    """Forward returns from a wide price frame (rows months, columns stocks).

    The row index must already cover consecutive calendar months; the return
    at month t is (p_{t+1} - p_t)/p_t and is NaN wherever either price is
    missing.  The last row is all-NaN by construction.
    """
    months = list(prices.index)
    for prev, cur in zip(months, months[1:]):
        if month_index(cur) != month_index(prev) + 1:
            raise UsageError(
                f"price rows must be consecutive months; gap between "
                f"{prev} and {cur}"
            )
    values = prices.to_numpy(dtype=np.float64)
    if np.any(np.nan_to_num(values, nan=1.0) <= 0):
        bad = np.argwhere(np.nan_to_num(values, nan=1.0) <= 0)[0]
        raise DataError(
            f"non-positive price for stock {prices.columns[bad[1]]!r} at "
            f"{months[bad[0]]}"
        )
    fwd = np.full_like(values, np.nan)
    fwd[:-1] = values[1:] / values[:-1] - 1.0
    return pd.DataFrame(fwd, index=prices.index, columns=prices.columns)


def momentum(prices: np.ndarray, k_months: int) -> np.ndarray:
    """Trailing total return p_t / p_{t-k} - 1 along axis 0; NaN where the
    window reaches before the series start."""
    if k_months < 1:
        raise UsageError(f"k_months must be >= 1, got {k_months}")
    prices = np.asarray(prices, dtype=np.float64)
    if prices.shape[0] <= k_months:
        raise UsageError(
            f"need at least {k_months + 1} monthly prices, got {prices.shape[0]}"
        )
    if np.any(np.nan_to_num(prices, nan=1.0) <= 0):
        raise DataError("prices must be positive")
    out = np.full_like(prices, np.nan)
    out[k_months:] = prices[k_months:] / prices[:-k_months] - 1.0
    return out


def size_feature(market_value) -> np.ndarray:
    """Natural log of market value."""
    mv = np.asarray(market_value, dtype=np.float64)
    if np.any(~np.isfinite(mv)) or np.any(mv <= 0):
        raise DataError("market value must be positive and finite")
    return np.log(mv)


def beta_feature(stock_returns: np.ndarray, market_returns: np.ndarray) -> float:
    """OLS slope (with intercept) of stock returns on market returns.

    Callers assemble 60-month windows and leave the feature missing when the
    history is shorter.
    """
    stock = np.asarray(stock_returns, dtype=np.float64)
    market = np.asarray(market_returns, dtype=np.float64)
    if stock.shape != market.shape or stock.ndim != 1 or stock.size < 2:
        raise UsageError(
            f"need matching 1-D windows with >= 2 observations, got "
            f"{stock.shape} and {market.shape}"
        )
    if not (np.all(np.isfinite(stock)) and np.all(np.isfinite(market))):
        raise UsageError("return windows must be finite")
    dm = market - market.mean()
    denom = float(dm @ dm)
    if denom == 0.0:
        raise NumericalError("market returns are constant; slope undefined")
    return float(dm @ (stock - stock.mean()) / denom)


@dataclass(frozen=True)
class FeatureSpec:
    """Catalog entry: how a feature column is sourced.

    ``source`` is "ingested" for fundamentals supplied with the panel, or one
    of the price-derived kinds; ``window`` is the months of history consumed.
    """

    name: str
    source: str  # "ingested" | "momentum" | "size" | "beta"
    window: int = 0


DEFAULT_FEATURES = (
    FeatureSpec("book_to_price", "ingested"),
    FeatureSpec("earnings_to_price", "ingested"),
    FeatureSpec("sales_to_price", "ingested"),
    FeatureSpec("roe", "ingested"),
    FeatureSpec("momentum_1m", "momentum", window=1),
    FeatureSpec("momentum_3m", "momentum", window=3),
    FeatureSpec("momentum_6m", "momentum", window=6),
    FeatureSpec("momentum_12m", "momentum", window=12),
    FeatureSpec("log_market_cap", "size"),
    FeatureSpec("beta_60m", "beta", window=60),
)


class CrossSection(NamedTuple):
    """One month's universe: aligned ids, raw features, forward returns."""

    date: str
    stock_ids: np.ndarray
    features: np.ndarray      # (n_stocks, n_features), NaN = missing
    fwd_returns: np.ndarray   # (n_stocks,), NaN = missing
    prices: np.ndarray


@dataclass
class PanelData:
    """Validated long panel plus fast per-month access."""

    frame: pd.DataFrame
    feature_names: list

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, feature_names=None) -> "PanelData":
        """Validate a raw long frame and derive forward returns.

        Checks the schema (required columns, month format, numeric types,
        finite values, positive prices, unique (date, stock) keys); rows out
        of date order are accepted with a warning and sorted.
        """
        frame = frame.copy()
        for col in ("date", "stock_id", "price"):
            if col not in frame.columns:
                raise DataError(f"panel is missing required column {col!r}")
        if feature_names is None:
            feature_names = [c for c in frame.columns
                             if c not in _RESERVED_COLUMNS]
        missing = [c for c in feature_names if c not in frame.columns]
        if missing:
            raise DataError(f"panel is missing feature columns {missing}")

        frame["date"] = frame["date"].astype(str)
        frame["stock_id"] = frame["stock_id"].astype(str)
        month_idx = np.empty(len(frame), dtype=np.int64)
        for pos, value in enumerate(frame["date"].to_numpy()):
            try:
                month_idx[pos] = month_index(value)
            except UsageError as exc:
                raise DataError(f"row {pos}: {exc}") from exc

        for col in ["price", *feature_names]:
            try:
                frame[col] = pd.to_numeric(frame[col], errors="raise")
            except (ValueError, TypeError) as exc:
                raise DataError(f"column {col!r} is not numeric: {exc}") from exc
            values = frame[col].to_numpy(dtype=np.float64)
            inf_rows = np.flatnonzero(np.isinf(values))
            if inf_rows.size:
                raise DataError(
                    f"column {col!r} has a non-finite value at row {inf_rows[0]}"
                )

        dup = frame.duplicated(subset=["date", "stock_id"])
        if dup.any():
            row = int(np.flatnonzero(dup.to_numpy())[0])
            raise DataError(
                f"duplicate (date, stock_id) key at row {row}: "
                f"({frame['date'].iat[row]}, {frame['stock_id'].iat[row]})"
            )

        prices = frame["price"].to_numpy(dtype=np.float64)
        bad_price = np.flatnonzero(~np.isnan(prices) & (prices <= 0))
        if bad_price.size:
            row = int(bad_price[0])
            raise DataError(
                f"non-positive price for stock {frame['stock_id'].iat[row]!r} "
                f"at {frame['date'].iat[row]}"
            )

        if not np.all(month_idx[:-1] <= month_idx[1:]):
            warnings.warn("panel rows out of date order; sorting", UserWarning)
        frame = (frame.assign(_midx=month_idx)
                 .sort_values(["_midx", "stock_id"], kind="mergesort")
                 .drop(columns="_midx")
                 .reset_index(drop=True))

        wide = frame.pivot(index="date", columns="stock_id", values="price")
        wide = wide.reindex(month_range(frame["date"].iat[0],
                                        frame["date"].iat[-1]))
        wide.index.name = "date"
        fwd = compute_forward_returns(wide).stack(future_stack=True)
        fwd.name = "fwd_return"
        frame = frame.merge(fwd.reset_index(), on=["date", "stock_id"], how="left")
        return cls(frame=frame, feature_names=list(feature_names))

    def __post_init__(self):
        self._slices = {}
        start = 0
        dates = self.frame["date"].to_numpy()
        for pos in range(1, len(dates) + 1):
            if pos == len(dates) or dates[pos] != dates[start]:
                self._slices[dates[start]] = (start, pos)
                start = pos

    @property
    def dates(self) -> list:
        return list(self._slices.keys())

    def has_date(self, date: str) -> bool:
        return date in self._slices

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def feature_dates(self) -> list:
        """Months where at least one stock has a complete feature row."""
        out = []
        for date in self.dates:
            cs = self.cross_section(date)
            if np.any(np.all(np.isfinite(cs.features), axis=1)):
                out.append(date)
        return out

    def cross_section(self, date: str) -> CrossSection:
        if date not in self._slices:
            raise UsageError(f"panel has no rows at {date!r}")
        lo, hi = self._slices[date]
        rows = self.frame.iloc[lo:hi]
        return CrossSection(
            date=date,
            stock_ids=rows["stock_id"].to_numpy(),
            features=rows[self.feature_names].to_numpy(dtype=np.float64),
            fwd_returns=rows["fwd_return"].to_numpy(dtype=np.float64),
            prices=rows["price"].to_numpy(dtype=np.float64),
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a fully seeded synthetic panel.

    Features are i.i.d. uniform on [-1, 1] per stock-month (symmetric, so
    pure interaction terms carry no linear component).  The latent one-month
    return is ``linear_weights . x + sum c_jk x_j x_k + N(0, noise_sigma^2)``;
    prices integrate those returns from 100, with one trailing price-only
    month so every feature month has a forward return derivable from stored
    prices.
    """

    n_stocks: int = 200
    n_months: int = 120
    n_features: int = 10
    seed: int = 0
    linear_weights: tuple = ()
    interaction_pairs: tuple = ()  # ((j, k, coefficient), ...)
    noise_sigma: float = 0.01
    start_month: str = "2008-06"

    def __post_init__(self):
        object.__setattr__(self, "linear_weights",
                           tuple(float(w) for w in self.linear_weights))
        object.__setattr__(
            self, "interaction_pairs",
            tuple((int(j), int(k), float(c)) for j, k, c in self.interaction_pairs),
        )
        if self.n_stocks < 5:
            raise ConfigurationError(
                f"need at least 5 stocks for quintiles, got {self.n_stocks}"
            )
        if self.n_months < 2:
            raise ConfigurationError(f"n_months must be >= 2, got {self.n_months}")
        if self.n_features < 1:
            raise ConfigurationError(
                f"n_features must be >= 1, got {self.n_features}"
            )
        if self.linear_weights and len(self.linear_weights) != self.n_features:
            raise ConfigurationError(
                f"linear_weights must have length {self.n_features}, "
                f"got {len(self.linear_weights)}"
            )
        if not self.noise_sigma >= 0:
            raise ConfigurationError(
                f"noise_sigma must be >= 0, got {self.noise_sigma}"
            )
        for j, k, c in self.interaction_pairs:
            if not (0 <= j < self.n_features and 0 <= k < self.n_features and j != k):
                raise ConfigurationError(
                    f"interaction pair ({j}, {k}) out of range for "
                    f"{self.n_features} features"
                )
            if c == 0.0:
                raise ConfigurationError(
                    f"interaction pair ({j}, {k}) has a zero coefficient"
                )
        month_index(self.start_month)


def generate_synthetic(spec: SyntheticSpec):
    """Return (PanelData, benchmark series) for a synthetic spec.

    The benchmark is the equal-weight universe mean of the forward returns,
    indexed by decision month.  Fully deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    t, s, f = spec.n_months, spec.n_stocks, spec.n_features
    x = rng.uniform(-1.0, 1.0, size=(t, s, f))
    latent = np.zeros((t, s))
    if spec.linear_weights:
        latent += x @ np.asarray(spec.linear_weights)
    for j, k, c in spec.interaction_pairs:
        latent += c * x[:, :, j] * x[:, :, k]
    if spec.noise_sigma > 0:
        latent += rng.normal(0.0, spec.noise_sigma, size=(t, s))
    if np.any(latent <= -0.99):
        raise ConfigurationError(
            "synthetic returns reach -99%; shrink the weights or noise"
        )

    prices = np.empty((t + 1, s))
    prices[0] = 100.0
    for step in range(t):
        prices[step + 1] = prices[step] * (1.0 + latent[step])

    dates = [add_months(spec.start_month, i) for i in range(t + 1)]
    stock_ids = [f"S{i:04d}" for i in range(s)]
    feature_cols = [f"f_{i + 1}" for i in range(f)]
    rows = {
        "date": np.repeat(dates, s),
        "stock_id": np.tile(stock_ids, t + 1),
        "price": prices.ravel(),
    }
    features_full = np.full((t + 1, s, f), np.nan)
    features_full[:t] = x
    for i, col in enumerate(feature_cols):
        rows[col] = features_full[:, :, i].ravel()
    panel = PanelData.from_frame(pd.DataFrame(rows), feature_names=feature_cols)

    bench = pd.Series(
        [float(np.mean(panel.cross_section(d).fwd_returns)) for d in dates[:-1]],
        index=pd.Index(dates[:-1], name="date"),
        name="return",
    )
    return panel, bench


# %.17g round-trips float64 exactly; pandas' default formatter does not.
_FLOAT_FORMAT = "%.17g"


def save_panel_csv(panel: PanelData, path) -> None:
    """Write the interchange CSV (prices and features only; returns are
    derived, never stored)."""
    cols = ["date", "stock_id", "price", *panel.feature_names]
    panel.frame[cols].to_csv(path, index=False, na_rep="",
                             float_format=_FLOAT_FORMAT)


def load_panel_csv(path) -> PanelData:
    try:
        # round_trip: the default float parser can be off by an ulp, which
        # breaks save -> load -> save byte identity.
        frame = pd.read_csv(path, dtype={"date": str, "stock_id": str},
                            float_precision="round_trip")
    except FileNotFoundError:
        raise DataError(f"panel file not found: {path}") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"panel file {path} is not parseable CSV: {exc}") from exc
    return PanelData.from_frame(frame)


def save_benchmark_csv(benchmark: pd.Series, path) -> None:
    frame = benchmark.rename("return").rename_axis("date").reset_index()
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT)


def load_benchmark_csv(path) -> pd.Series:
    try:
        frame = pd.read_csv(path, dtype={"date": str},
                            float_precision="round_trip")
    except FileNotFoundError:
        raise DataError(f"benchmark file not found: {path}") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"benchmark file {path} is not parseable CSV: {exc}") from exc
    for col in ("date", "return"):
        if col not in frame.columns:
            raise DataError(f"benchmark is missing required column {col!r}")
    for pos, value in enumerate(frame["date"].to_numpy()):
        try:
            month_index(value)
        except UsageError as exc:
            raise DataError(f"benchmark row {pos}: {exc}") from exc
    values = pd.to_numeric(frame["return"], errors="coerce").to_numpy()
    if np.any(~np.isfinite(values)):
        row = int(np.flatnonzero(~np.isfinite(values))[0])
        raise DataError(f"benchmark row {row} has a non-finite return")
    if frame["date"].duplicated().any():
        row = int(np.flatnonzero(frame["date"].duplicated().to_numpy())[0])
        raise DataError(f"benchmark has duplicate month at row {row}")
    series = pd.Series(values, index=pd.Index(frame["date"], name="date"),
                       name="return")
    return series.sort_index()
