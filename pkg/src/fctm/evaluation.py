"""Rate/fidelity evaluation: feature fidelity, rate curves, BD-rate, complexity.

Task accuracy needs task networks that are not part of this package, so the
quality axis of the curves built here is the cosine similarity between the
original and decoded features. It is a proxy, not mAP or MOTA.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NoQualityOverlap, ShapeMismatch, TooFewPoints, ZeroTiming
from .inner_codec import CodecId
from .pipeline import EncoderConfig, decode, encode
from .tensors import FeatureSequence, atomic_write_bytes, shape_signature


# -- fidelity ----------------------------------------------------------------

@dataclass(frozen=True)
class Fidelity:
    layer_mse: tuple[float, ...]
    mse: float
    psnr: float
    cosine: float


def fidelity(x: FeatureSequence, x_hat: FeatureSequence) -> Fidelity:
    """Per-layer MSE, element-weighted aggregate MSE, PSNR and cosine similarity.

    PSNR uses the dynamic range (max - min) of ``x`` as the peak.
    """
    if len(x) != len(x_hat) or shape_signature(x) != shape_signature(x_hat):
        raise ShapeMismatch("sequences differ in length or layer shapes")
    if not x.sets:
        raise ShapeMismatch("cannot compare empty sequences")
    n_layers = len(x.sets[0].layers)
    sq_err = [0.0] * n_layers
    counts = [0] * n_layers
    dot = norm_a = norm_b = 0.0
    lo, hi = math.inf, -math.inf
    for a_set, b_set in zip(x, x_hat):
        for i, (a, b) in enumerate(zip(a_set.layers, b_set.layers)):
            a64 = a.data.astype(np.float64).ravel()
            b64 = b.data.astype(np.float64).ravel()
            sq_err[i] += float(np.square(a64 - b64).sum())
            counts[i] += a64.size
            dot += float(a64 @ b64)
            norm_a += float(a64 @ a64)
            norm_b += float(b64 @ b64)
            lo, hi = min(lo, float(a64.min())), max(hi, float(a64.max()))
    layer_mse = tuple(e / c for e, c in zip(sq_err, counts))
    mse = sum(sq_err) / sum(counts)
    peak = hi - lo
    if mse == 0.0:
        psnr = math.inf
    elif peak == 0.0:
        psnr = -math.inf
    else:
        psnr = 10.0 * math.log10(peak * peak / mse)
    if norm_a == 0.0 or norm_b == 0.0:
        cosine = 1.0 if norm_a == norm_b else 0.0
    else:
        cosine = dot / math.sqrt(norm_a * norm_b)
    return Fidelity(layer_mse, mse, psnr, cosine)


# -- rate curves and BD-rate ---------------------------------------------------

@dataclass(frozen=True)
class RateCurve:
    rates: tuple[float, ...]
    qualities: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        quals = tuple(float(q) for q in self.qualities)
        if len(rates) != len(quals):
            raise ValueError("rates and qualities differ in length")
        if len(rates) < 2:
            raise TooFewPoints(f"a rate curve needs at least 2 points, got {len(rates)}")
        if any(r <= 0 or not math.isfinite(r) for r in rates):
            raise ValueError("rates must be positive and finite")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("rates must be strictly increasing")
        if not all(math.isfinite(q) for q in quals):
            raise ValueError("qualities must be finite")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "qualities", quals)

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "RateCurve":
        pts = sorted((float(r), float(q)) for r, q in points)
        if len(pts) < 2:
            raise TooFewPoints(f"a rate curve needs at least 2 points, got {len(pts)}")
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.rates, self.qualities))


def _log_rate_of_quality(curve: RateCurve) -> PchipInterpolator:
    order = np.argsort(curve.qualities, kind="stable")
    q = np.asarray(curve.qualities)[order]
    if np.any(np.diff(q) <= 0):
        raise ValueError("qualities must be distinct to interpolate rate over quality")
    return PchipInterpolator(q, np.log10(np.asarray(curve.rates)[order]))


def bd_rate(reference: RateCurve, test: RateCurve) -> float:
    """Average bitrate difference of ``test`` against ``reference`` in percent,
    at equal quality. Negative means ``test`` needs fewer bits.

    log10(rate) is interpolated over quality with a monotone piecewise cubic
    (PCHIP), integrated exactly over the common quality interval.
    """
    for c in (reference, test):
        if len(c.rates) < 2:
            raise TooFewPoints("BD-rate needs at least 2 points per curve")
    lo = max(min(reference.qualities), min(test.qualities))
    hi = min(max(reference.qualities), max(test.qualities))
    if not hi > lo:
        raise NoQualityOverlap(f"quality ranges do not overlap (common interval [{lo}, {hi}])")
    ref_int = _log_rate_of_quality(reference).integrate(lo, hi)
    test_int = _log_rate_of_quality(test).integrate(lo, hi)
    avg_diff = (float(test_int) - float(ref_int)) / (hi - lo)
    return (10.0 ** avg_diff - 1.0) * 100.0


def read_curve_csv(path: str | os.PathLike) -> RateCurve:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if rows and not {"rate", "quality"} <= set(rows[0]):
        raise ValueError(f"{path}: expected a 'rate,quality' header")
    return RateCurve.from_points((float(r["rate"]), float(r["quality"])) for r in rows)


def curve_csv(curve: RateCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rate", "quality"])
    for r, q in curve.points():
        w.writerow([repr(r), repr(q)])
    return buf.getvalue()


def write_curve_csv(curve: RateCurve, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, curve_csv(curve).encode())


# -- complexity --------------------------------------------------------------

@dataclass(frozen=True)
class ComplexityReport:
    encoder_seconds: float
    decoder_seconds: float
    nn_part1_seconds: float
    nn_part2_seconds: float

    def __post_init__(self):
        if min(self.encoder_seconds, self.decoder_seconds,
               self.nn_part1_seconds, self.nn_part2_seconds) < 0:
            raise ValueError("timings must be non-negative")

    @property
    def ratios(self) -> tuple[float, float]:
        return complexity_ratios(self)

    @property
    def flags(self) -> tuple[bool, bool]:
        """(encoder ratio >= 1, decoder ratio >= 1): True marks a missed target."""
        enc, dec = self.ratios
        return enc >= 1.0, dec >= 1.0


def complexity_ratios(report: ComplexityReport) -> tuple[float, float]:
    """Encoder time over NN part 2 time, decoder time over NN part 1 time.

    Below 1 means the codec is cheaper than the network half it stands in for.
    """
    times = (report.encoder_seconds, report.decoder_seconds,
             report.nn_part1_seconds, report.nn_part2_seconds)
    if any(t <= 0 for t in times):
        raise ZeroTiming("all four timings must be positive")
    return (report.encoder_seconds / report.nn_part2_seconds,
            report.decoder_seconds / report.nn_part1_seconds)


def aggregate(values: Sequence[float], weights: Optional[Sequence[float]] = None) -> float:
    """Weighted arithmetic mean (unweighted when no weights are given)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("nothing to aggregate")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != v.shape or (w < 0).any() or w.sum() == 0:
        raise ValueError("weights must match the values and be non-negative, not all zero")
    return float((v * w).sum() / w.sum())


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    task: str
    dataset: str
    bd_rate: float
    encode_ratio: float
    decode_ratio: float


REPORT_COLUMNS = ("task", "dataset", "bd_rate", "encode_ratio", "decode_ratio")


def report_csv(rows: Sequence[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([r.task, r.dataset, f"{r.bd_rate:.2f}", f"{r.encode_ratio:.2f}",
                    f"{r.decode_ratio:.2f}"])
    return buf.getvalue()


def report_text(rows: Sequence[ReportRow], overall: bool = True) -> str:
    """Aligned table; ratios at or above 1 are marked with '!'."""
    def fmt_ratio(x):
        return f"{x:.2f}" + ("!" if x >= 1.0 else " ")

    table = [("Task", "Dataset", "BD-Rate", "Enc ratio", "Dec ratio")]
    for r in rows:
        table.append((r.task, r.dataset, f"{r.bd_rate:.2f}%",
                      fmt_ratio(r.encode_ratio), fmt_ratio(r.decode_ratio)))
    if overall and rows:
        table.append(("Overall", "",
                      f"{aggregate([r.bd_rate for r in rows]):.2f}%",
                      fmt_ratio(aggregate([r.encode_ratio for r in rows])),
                      fmt_ratio(aggregate([r.decode_ratio for r in rows]))))
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    lines = []
    for j, row in enumerate(table):
        cells = [c.ljust(widths[i]) if i < 2 else c.rjust(widths[i]) for i, c in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    qshift: int
    bytes: int
    bits_per_element: float
    cosine: float
    mse: float


def sweep_points(seq: FeatureSequence, base: EncoderConfig,
                 qshifts: Sequence[int]) -> list[SweepPoint]:
    unique = sorted(set(int(q) for q in qshifts))
    if len(unique) < 2:
        raise TooFewPoints("a sweep needs at least 2 distinct qshift values")
    n_elements = seq.element_count
    points = []
    for q in unique:
        codec = replace(base.codec, codec_id=CodecId.REF_LOSSY, qshift=q)
        data = encode(seq, replace(base, codec=codec))
        fid = fidelity(seq, decode(data))
        points.append(SweepPoint(q, len(data), 8 * len(data) / n_elements, fid.cosine, fid.mse))
    return points


def sweep(seq: FeatureSequence, base: EncoderConfig, qshifts: Sequence[int]) -> RateCurve:
    """Encode/decode once per qshift with the reference lossy codec; returns
    (bits per element, cosine similarity) points sorted by rate."""
    pts = sweep_points(seq, base, qshifts)
    return RateCurve.from_points((p.bits_per_element, p.cosine) for p in pts)
