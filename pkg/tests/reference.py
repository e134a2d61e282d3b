"""Independent reference implementations used as test oracles.

Plain-Python transcriptions of the textbook definitions. Nothing here imports
from ``cryptotrend``.
"""

import math
import statistics


def ema(xs, period):
    k = 2 / (period + 1)
    out = [xs[0]]
    for x in xs[1:]:
        out.append(k * x + (1 - k) * out[-1])
    return out


def macd(xs, fast, slow, signal):
    f, s = ema(xs, fast), ema(xs, slow)
    line = [a - b for a, b in zip(f, s)]
    sig = ema(line, signal)
    return line, sig, [a - b for a, b in zip(line, sig)]


def rsi(xs, period):
    out = [None] * len(xs)
    changes = [xs[i] - xs[i - 1] for i in range(1, len(xs))]
    up = [max(c, 0.0) for c in changes]
    down = [max(-c, 0.0) for c in changes]
    ag = sum(up[:period]) / period
    al = sum(down[:period]) / period

    def value(g, l):
        if l == 0:
            return 50.0 if g == 0 else 100.0
        return 100 - 100 / (1 + g / l)

    out[period] = value(ag, al)
    for i in range(period, len(changes)):
        ag = (ag * (period - 1) + up[i]) / period
        al = (al * (period - 1) + down[i]) / period
        out[i + 1] = value(ag, al)
    return out


def kdj(highs, lows, closes, period):
    n = len(closes)
    k = [None] * n
    for i in range(period - 1, n):
        hh = max(highs[i - period + 1 : i + 1])
        ll = min(lows[i - period + 1 : i + 1])
        k[i] = 50.0 if hh == ll else (closes[i] - ll) / (hh - ll) * 100
    d = [None] * n
    j = [None] * n
    for i in range(period + 1, n):
        d[i] = (k[i] + k[i - 1] + k[i - 2]) / 3
        j[i] = 3 * k[i] - 2 * d[i]
    return k, d, j


def bollinger(xs, period, width):
    n = len(xs)
    mid, up, lo = [None] * n, [None] * n, [None] * n
    for i in range(period - 1, n):
        w = xs[i - period + 1 : i + 1]
        m = sum(w) / period
        sd = math.sqrt(sum((v - m) ** 2 for v in w) / period)
        mid[i], up[i], lo[i] = m, m + width * sd, m - width * sd
    return mid, up, lo


def realized_volatility(xs, window):
    tail = xs[-(window + 1):]
    rets = [math.log(tail[i] / tail[i - 1]) for i in range(1, len(tail))]
    return statistics.pstdev(rets)


def random_walk(rng, n=1000, start=100.0, vol=0.02):
    """Geometric random walk bars: (highs, lows, closes) as lists, using ``random.Random``."""
    closes = [start]
    for _ in range(n - 1):
        closes.append(closes[-1] * math.exp(rng.gauss(0.0, vol)))
    opens = [closes[0]] + closes[:-1]
    highs = [max(o, c) * (1 + abs(rng.gauss(0, vol / 3))) for o, c in zip(opens, closes)]
    lows = [min(o, c) * (1 - abs(rng.gauss(0, vol / 3))) for o, c in zip(opens, closes)]
    return opens, highs, lows, closes


# --- classification metrics from raw samples --------------------------------


def expand(matrix):
    """Confusion counts -> parallel (true, predicted) sample lists."""
    y_true, y_pred = [], []
    for i, row in enumerate(matrix):
        for j, count in enumerate(row):
            y_true += [i] * count
            y_pred += [j] * count
    return y_true, y_pred


def accuracy(y_true, y_pred):
    return sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)


def _prf(y_true, y_pred, cls):
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
    predicted = sum(1 for p in y_pred if p == cls)
    actual = sum(1 for t in y_true if t == cls)
    precision = tp / predicted if predicted else 0.0
    recall = tp / actual if actual else None
    return precision, recall


def macro_f1(y_true, y_pred, classes=(0, 1, 2)):
    scores = []
    for c in classes:
        p, r = _prf(y_true, y_pred, c)
        r = r or 0.0
        scores.append(0.0 if p + r == 0 else 2 * p * r / (p + r))
    return sum(scores) / len(scores)


def balanced_accuracy(y_true, y_pred, classes=(0, 1, 2)):
    recalls = [r for r in (_prf(y_true, y_pred, c)[1] for c in classes) if r is not None]
    return sum(recalls) / len(recalls)
