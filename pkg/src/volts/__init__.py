"""Volatility-regime clustering, Granger predictor graphs and trend-following backtests."""

from .anomaly import AnomalyReport, clean_window, detect, knn_scores
from .backtest import (
    BacktestResult, Trade, calmar, max_drawdown, report, sharpe, simulate, sortino,
    standardized_returns, total_return,
)
from .causality import (
    ArFit, CausalGraph, GrangerEdge, fit_ar, granger_f, granger_test, lag_sweep, pair_scan, prune_to_dag,
)
from .clustering import ClusterResult, kmeans_dtw, pick_mid_cluster, seed_centroids
from .dtw import DtwConfig, dtw
from .marketdata import CsvProvider, OhlcBar, Panel, PriceProvider, PriceSeries, align, load_csv, slice_window
from .strategy import Action, Signal, StrategyConfig, bh_signals, moving_average, mr_signals, tf_signals
from .volatility import (
    EstimatorKind, VolSeries, garman_klass, mean_hv, parkinson, rogers_satchell, rolling, yang_zhang,
)

__version__ = "0.1.0"
