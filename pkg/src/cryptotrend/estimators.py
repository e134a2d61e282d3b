"""scikit-learn compatible wrappers around the indicator, news and fusion kernels.

These make the pieces usable inside ``sklearn.pipeline`` objects and with
``get_params``/``set_params``/``clone``::

    feats = TechnicalIndicatorTransformer(ema_period=10).fit_transform(ohlc)
    clf = VolatilityFusionClassifier().fit(history_rows)
    classes = clf.predict(rows)   # rows: [s_news, s_technical, volatility]
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fusion import RegimeKind, alpha_for, classify, detect_regime, fuse
from .indicators import INDICATOR_COLUMNS, IndicatorParams, indicator_arrays
from .market_data import CLASS_ORDER
from .news import DIMENSIONS, NewsArticle, keyword_score, score_article

OHLC_COLUMNS = ("open", "high", "low", "close")


def check_ohlc(X) -> np.ndarray:
    """Validate an ``(n_bars, 4)`` open/high/low/close array or DataFrame."""
    if hasattr(X, "columns"):
        missing = [c for c in OHLC_COLUMNS if c not in X.columns]
        if missing:
            raise ValueError(f"missing OHLC column(s): {', '.join(missing)}")
        X = X[list(OHLC_COLUMNS)]
    X = check_array(X, dtype=np.float64)
    if X.shape[1] != 4:
        raise ValueError(f"expected 4 columns (open, high, low, close), got {X.shape[1]}")
    o, h, lo, c = X.T
    if (X <= 0).any():
        raise ValueError("prices must be strictly positive")
    if (lo > np.minimum(o, c)).any() or (h < np.maximum(o, c)).any():
        raise ValueError("bars violate low <= min(open, close) and high >= max(open, close)")
    return X


def check_signed_unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.isnan(x).any() or (np.abs(x) > 1).any():
        raise ValueError(f"{name} must lie in [-1, 1]")
    return x


class TechnicalIndicatorTransformer(TransformerMixin, BaseEstimator):
    """OHLC bars -> indicator columns plus the aggregate technical signal.

    Output columns follow ``INDICATOR_COLUMNS``; rows before an indicator's
    warm-up hold NaN.
    """

    def __init__(
        self,
        ema_period=20,
        macd_fast=12,
        macd_slow=26,
        macd_signal=9,
        rsi_period=14,
        kdj_period=9,
        bb_period=20,
        bb_width=2.0,
        vol_window=14,
    ):
        self.ema_period = ema_period
        self.macd_fast = macd_fast
        self.macd_slow = macd_slow
        self.macd_signal = macd_signal
        self.rsi_period = rsi_period
        self.kdj_period = kdj_period
        self.bb_period = bb_period
        self.bb_width = bb_width
        self.vol_window = vol_window

    def fit(self, X, y=None):
        check_ohlc(X)
        self.params_ = IndicatorParams(**self.get_params())
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_ohlc(X)
        cols = indicator_arrays(X[:, 1], X[:, 2], X[:, 3], self.params_)
        return np.column_stack([cols[name] for name in INDICATOR_COLUMNS])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(INDICATOR_COLUMNS, dtype=object)


class KeywordSentimentTransformer(TransformerMixin, BaseEstimator):
    """Texts -> keyword-baseline sentiment, shape ``(n, 1)``. Stateless."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return np.array([[keyword_score(str(text)).value] for text in X])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(["keyword_sentiment"], dtype=object)


class DimensionScoreTransformer(TransformerMixin, BaseEstimator):
    """Articles -> seven dimension scores and the weighted composite, shape ``(n, 8)``."""

    def __init__(self, backend=None, policy=None):
        self.backend = backend
        self.policy = policy

    def fit(self, X, y=None):
        if self.backend is None:
            raise ValueError("a scoring backend is required")
        self.backend_ = self.backend
        return self

    def transform(self, X):
        check_is_fitted(self, "backend_")
        rows = []
        for item in X:
            article = item if isinstance(item, NewsArticle) else NewsArticle(**item)
            dims = score_article(article, self.backend_, self.policy)
            rows.append(dims.as_tuple() + (dims.composite,))
        return np.array(rows, dtype=float).reshape(-1, len(DIMENSIONS) + 1)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(DIMENSIONS + ("composite",), dtype=object)


class VolatilityFusionClassifier(ClassifierMixin, BaseEstimator):
    """Fuses news and technical signals with a volatility-dependent news weight.

    ``X`` rows are ``[s_news, s_technical, volatility]``. ``fit`` keeps the
    trailing ``lookback`` volatilities as the reference history for regime
    detection; ``y`` is accepted for API compatibility and ignored.
    """

    def __init__(self, alpha_high=0.9, alpha_normal=0.8, alpha_low=0.65, band=0.3, lookback=90):
        self.alpha_high = alpha_high
        self.alpha_normal = alpha_normal
        self.alpha_low = alpha_low
        self.band = band
        self.lookback = lookback

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 3:
            raise ValueError("expected columns [s_news, s_technical, volatility]")
        check_signed_unit(X[:, 0], "s_news")
        check_signed_unit(X[:, 1], "s_technical")
        if (X[:, 2] < 0).any():
            raise ValueError("volatility must be non-negative")
        return X

    def fit(self, X, y=None):
        X = self._validate(X)
        self.volatility_history_ = X[-self.lookback :, 2].copy()
        self.alpha_table_ = {
            RegimeKind.HIGH: self.alpha_high,
            RegimeKind.NORMAL: self.alpha_normal,
            RegimeKind.LOW: self.alpha_low,
        }
        self.classes_ = np.array([c.value for c in CLASS_ORDER])
        self.n_features_in_ = 3
        return self

    def alphas(self, X) -> np.ndarray:
        check_is_fitted(self, "volatility_history_")
        X = self._validate(X)
        history = list(self.volatility_history_)
        return np.array(
            [
                alpha_for(detect_regime(v, history, self.lookback), self.alpha_table_).alpha
                for v in X[:, 2]
            ]
        )

    def decision_function(self, X) -> np.ndarray:
        """Fused score ``p_final`` per row."""
        X = self._validate(X)
        alphas = self.alphas(X)
        return np.array([fuse(n, t, a) for (n, t, _), a in zip(X, alphas)])

    def predict(self, X) -> np.ndarray:
        return np.array([classify(p, self.band).value for p in self.decision_function(X)])
