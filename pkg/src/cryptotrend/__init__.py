"""Multi-agent crypto trend prediction: seven-dimension news scoring,
technical indicators, volatility-conditional fusion and backtest evaluation."""

from .coordination import PipelineConfig, PipelineStats, balance_load, run_pipeline
from .estimators import (
    DimensionScoreTransformer,
    KeywordSentimentTransformer,
    TechnicalIndicatorTransformer,
    VolatilityFusionClassifier,
)
from .evaluation import ConfusionMatrix, accuracy, balanced_accuracy, confusion, macro_f1
from .fusion import Prediction, alpha_for, classify, detect_regime, fuse
from .gateway import BackendPolicy, HttpBackend, MockBackend
from .indicators import IndicatorParams, bollinger, ema, kdj, macd, rsi
from .market_data import (
    HORIZONS,
    Candle,
    CandleSeries,
    Horizon,
    TrendClass,
    forward_return,
    label_return,
    parse_candles,
)
from .news import NewsArticle, composite_score, keyword_score, load_corpus, to_sentiment

__version__ = "0.1.0"
