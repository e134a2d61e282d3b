"""Run configuration: an INI file with command-line overrides.

Precedence is flag > file > default. Relative paths are resolved against the
directory of the config file. Credentials are never read from the file; the
``[backend] api_key_env`` key names the environment variable that holds them.

Example::

    [data]
    candles = data/btc_1d.csv
    corpus = data/news.jsonl
    output_dir = out
    asset = BTC

    [run]
    start = 2025-07-21
    end = 2025-09-06
    horizons = 1, 7, 15
    workers = 4
    fallback = true

    [backend]
    kind = mock            # mock | remote | baseline
    seed = 7
    endpoint = https://scoring.example/v1/score
    api_key_env = CRYPTOTREND_API_KEY
    timeout = 30
    max_retries = 3
    backoff_initial = 0.5
    backoff_multiplier = 2.0
    max_in_flight = 8

    [indicators]
    ema_period = 20
    macd_fast = 12
    macd_slow = 26
    macd_signal = 9
    rsi_period = 14
    kdj_period = 9
    bb_period = 20
    bb_width = 2.0
    vol_window = 14

    [fusion]
    alpha_high = 0.90
    alpha_normal = 0.80
    alpha_low = 0.65
    band = 0.3
    regime_lookback = 90
"""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .coordination import PipelineConfig
from .exceptions import ConfigError
from .fusion import RegimeKind
from .gateway import BackendPolicy, HttpBackend, MockBackend
from .indicators import IndicatorParams
from .market_data import Horizon

BACKEND_KINDS = ("mock", "remote", "baseline")

_KNOWN = {
    "data": {"candles", "corpus", "output_dir", "asset"},
    "run": {"start", "end", "horizons", "workers", "fallback"},
    "backend": {
        "kind", "seed", "endpoint", "api_key_env", "model", "timeout", "max_retries",
        "backoff_initial", "backoff_multiplier", "max_in_flight", "mock_low", "mock_high",
    },
    "indicators": {f.name for f in fields(IndicatorParams)},
    "fusion": {"alpha_high", "alpha_normal", "alpha_low", "band", "regime_lookback"},
}
_SECRET_HINTS = ("api_key", "token", "secret", "password")


@dataclass(frozen=True)
class RunConfig:
    candles: Path | None = None
    corpus: Path | None = None
    output_dir: Path = Path("out")
    asset: str = "BTC"
    start: dt.date | None = None
    end: dt.date | None = None
    horizons: tuple = (1, 7, 15)
    workers: int = 4
    fallback: bool = True
    backend: str = "mock"
    seed: int = 0
    endpoint: str | None = None
    api_key_env: str | None = None
    model: str | None = None
    mock_range: tuple = (0.0, 1.0)
    policy: BackendPolicy = BackendPolicy()
    max_in_flight: int = 8
    params: IndicatorParams = IndicatorParams()
    alpha_table: dict = field(
        default_factory=lambda: {RegimeKind.HIGH: 0.9, RegimeKind.NORMAL: 0.8, RegimeKind.LOW: 0.65}
    )
    band: float = 0.3
    regime_lookback: int = 90

    def __post_init__(self):
        if self.backend not in BACKEND_KINDS:
            raise ConfigError(f"backend must be one of {BACKEND_KINDS}, got {self.backend!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for k, v in self.alpha_table.items():
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"alpha for {RegimeKind(k).value} must lie in [0, 1]")
        try:
            for h in self.horizons:
                Horizon.from_days(h)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.backend == "remote" and not self.endpoint:
            raise ConfigError("remote backend requires [backend] endpoint")
        if self.start and self.end and self.end < self.start:
            raise ConfigError("end date precedes start date")

    @property
    def horizon_objects(self) -> list[Horizon]:
        return [Horizon.from_days(h) for h in self.horizons]

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            params=self.params,
            alpha_table=dict(self.alpha_table),
            band=self.band,
            regime_lookback=self.regime_lookback,
            workers=self.workers,
            fallback=self.fallback,
            policy=self.policy,
            max_in_flight=self.max_in_flight,
        )

    def make_backend(self, kind: str | None = None):
        kind = kind or self.backend
        if kind == "baseline":
            return None
        if kind == "mock":
            return MockBackend(self.seed, self.mock_range)
        return HttpBackend(self.endpoint, self.api_key_env, self.model)

    def require_inputs(self):
        for name in ("candles", "corpus"):
            path = getattr(self, name)
            if path is None:
                raise ConfigError(f"[data] {name} is not configured")
            if not Path(path).is_file():
                raise ConfigError(f"[data] {name}: file not found: {path}")


def _parse_bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from an INI file plus keyword overrides.

    Overrides whose value is ``None`` are ignored, so unset CLI flags fall
    through to the file and then to the defaults.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"invalid config {path}: {exc}") from None
        values = _from_parser(parser, path.parent)

    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _from_parser(parser: configparser.ConfigParser, base: Path) -> dict:
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if any(h in key for h in _SECRET_HINTS) and key != "api_key_env":
                raise ConfigError(
                    f"[{section}] {key}: credentials must be supplied via an environment "
                    "variable named by [backend] api_key_env"
                )
            if key not in _KNOWN[section]:
                raise ConfigError(f"unknown config key [{section}] {key}")

    out: dict = {}
    try:
        if parser.has_section("data"):
            d = parser["data"]
            for key in ("candles", "corpus", "output_dir"):
                if key in d:
                    out[key] = (base / d[key]).resolve()
            if "asset" in d:
                out["asset"] = d["asset"].strip()
        if parser.has_section("run"):
            r = parser["run"]
            for key in ("start", "end"):
                if key in r:
                    out[key] = dt.date.fromisoformat(r[key].strip())
            if "horizons" in r:
                out["horizons"] = tuple(
                    int(x.strip().rstrip("d")) for x in r["horizons"].split(",") if x.strip()
                )
            if "workers" in r:
                out["workers"] = r.getint("workers")
            if "fallback" in r:
                out["fallback"] = _parse_bool(r["fallback"], "[run] fallback")
        if parser.has_section("backend"):
            b = parser["backend"]
            for key in ("kind", "endpoint", "api_key_env", "model"):
                if key in b:
                    out["backend" if key == "kind" else key] = b[key].strip()
            if "seed" in b:
                out["seed"] = b.getint("seed")
            if "max_in_flight" in b:
                out["max_in_flight"] = b.getint("max_in_flight")
            policy = {}
            for key in ("timeout", "backoff_initial", "backoff_multiplier"):
                if key in b:
                    policy[key] = b.getfloat(key)
            if "max_retries" in b:
                policy["max_retries"] = b.getint("max_retries")
            if policy:
                out["policy"] = replace(BackendPolicy(), **policy)
            if "mock_low" in b or "mock_high" in b:
                out["mock_range"] = (b.getfloat("mock_low", 0.0), b.getfloat("mock_high", 1.0))
        if parser.has_section("indicators"):
            ind = parser["indicators"]
            kw = {}
            for f in fields(IndicatorParams):
                if f.name in ind:
                    kw[f.name] = ind.getfloat(f.name) if f.name == "bb_width" else ind.getint(f.name)
            out["params"] = IndicatorParams(**kw)
        if parser.has_section("fusion"):
            fu = parser["fusion"]
            table = {RegimeKind.HIGH: 0.9, RegimeKind.NORMAL: 0.8, RegimeKind.LOW: 0.65}
            for key, kind in (
                ("alpha_high", RegimeKind.HIGH),
                ("alpha_normal", RegimeKind.NORMAL),
                ("alpha_low", RegimeKind.LOW),
            ):
                if key in fu:
                    table[kind] = fu.getfloat(key)
            out["alpha_table"] = table
            if "band" in fu:
                out["band"] = fu.getfloat("band")
            if "regime_lookback" in fu:
                out["regime_lookback"] = fu.getint("regime_lookback")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid config value: {exc}") from None
    return out
