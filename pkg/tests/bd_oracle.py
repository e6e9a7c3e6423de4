"""Independent BD-rate oracle: hand-written monotone cubic Hermite
interpolation (weighted harmonic mean slopes) and a dense trapezoid rule."""

import math


def _slopes(x, y):
    n = len(x)
    h = [x[i + 1] - x[i] for i in range(n - 1)]
    delta = [(y[i + 1] - y[i]) / h[i] for i in range(n - 1)]
    if n == 2:
        return [delta[0], delta[0]]
    d = [0.0] * n
    for k in range(1, n - 1):
        if delta[k - 1] * delta[k] <= 0:
            d[k] = 0.0
        else:
            w1 = 2 * h[k] + h[k - 1]
            w2 = h[k] + 2 * h[k - 1]
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])

    def end(h0, h1, m0, m1):
        s = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
        if s * m0 <= 0:
            return 0.0
        if m0 * m1 <= 0 and abs(s) > abs(3 * m0):
            return 3 * m0
        return s

    d[0] = end(h[0], h[1], delta[0], delta[1])
    d[-1] = end(h[-1], h[-2], delta[-1], delta[-2])
    return d


def pchip(x, y):
    d = _slopes(x, y)

    def f(t):
        k = 0
        while k < len(x) - 2 and t > x[k + 1]:
            k += 1
        hk = x[k + 1] - x[k]
        s = (t - x[k]) / hk
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * y[k] + h10 * hk * d[k] + h01 * y[k + 1] + h11 * hk * d[k + 1]

    return f


def bd_rate_oracle(ref, test, samples=20001):
    """ref/test: lists of (rate, quality) points."""
    def curve(points):
        pts = sorted(points, key=lambda p: p[1])
        return pchip([p[1] for p in pts], [math.log10(p[0]) for p in pts])

    lo = max(min(q for _, q in ref), min(q for _, q in test))
    hi = min(max(q for _, q in ref), max(q for _, q in test))
    fr, ft = curve(ref), curve(test)
    step = (hi - lo) / (samples - 1)
    diffs = [ft(lo + i * step) - fr(lo + i * step) for i in range(samples)]
    area = step * (sum(diffs) - 0.5 * (diffs[0] + diffs[-1]))
    return (10 ** (area / (hi - lo)) - 1) * 100
