"""Estimator chain: start-stop histogramming, comb peak detection, FSR and
linewidth fits, noise floor, windowed coincidence rates, the normalized
cross-correlation with error bars, effective-mode counting, and the
multimode classical bound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.signal import find_peaks

from .errors import EstimationError, FitError, ParameterError
from .montecarlo import EventStream

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class HistogramConfig:
    bin_width: float = 0.2e-9
    range: tuple[float, float] = (-0.5e-6, 2.2e-6)
    start_channel: str = "idler"
    stop_channel: str = "signal"

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ParameterError("bin_width must be > 0")
        if not self.range[0] < self.range[1]:
            raise ParameterError("histogram range min must be < max")

    @property
    def bin_edges(self) -> np.ndarray:
        lo, hi = self.range
        n = int(math.ceil((hi - lo) / self.bin_width - 1e-9))
        return lo + np.arange(n + 1) * self.bin_width


@dataclass
class CorrelationHistogram:
    """Binned start-stop delay counts; the TIA emulation."""

    counts: np.ndarray
    bin_edges: np.ndarray
    total_start_counts: int
    total_stop_counts: int
    duration: float

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ParameterError("histogram counts must be nonnegative")

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])


def build_histogram(events: EventStream, cfg: HistogramConfig) -> CorrelationHistogram:
    """Multi-stop start-stop histogram: every stop in range counts, for
    every start."""
    starts = events.times_s(cfg.start_channel)
    stops = events.times_s(cfg.stop_channel)
    edges = cfg.bin_edges
    lo, hi = edges[0], edges[-1]
    counts = np.zeros(len(edges) - 1, dtype=np.int64)
    if len(starts) and len(stops):
        i0 = np.searchsorted(stops, starts + lo, side="left")
        i1 = np.searchsorted(stops, starts + hi, side="left")
        n_per = i1 - i0
        total = int(n_per.sum())
        if total:
            flat = np.arange(total) - np.repeat(np.cumsum(n_per) - n_per, n_per) \
                + np.repeat(i0, n_per)
            delays = stops[flat] - np.repeat(starts, n_per)
            counts, _ = np.histogram(delays, bins=edges)
            counts = counts.astype(np.int64)
    return CorrelationHistogram(
        counts=counts, bin_edges=edges,
        total_start_counts=len(starts), total_stop_counts=len(stops),
        duration=events.duration_s if len(events) else 0.0)


def merge_histograms(a: CorrelationHistogram, b: CorrelationHistogram) -> CorrelationHistogram:
    """Bin-wise sum of two partial histograms built on shared edges."""
    if not np.array_equal(a.bin_edges, b.bin_edges):
        raise ParameterError("histograms must share bin edges")
    return CorrelationHistogram(
        counts=a.counts + b.counts, bin_edges=a.bin_edges,
        total_start_counts=a.total_start_counts + b.total_start_counts,
        total_stop_counts=a.total_stop_counts + b.total_stop_counts,
        duration=max(a.duration, b.duration))


def detect_peaks(hist: CorrelationHistogram, min_prominence: float) -> list[tuple[float, float]]:
    """Local maxima above the prominence threshold, with 3-point parabolic
    sub-bin refinement, sorted by delay."""
    y = hist.counts.astype(float)
    if len(y) == 0:
        raise ParameterError("histogram is empty")
    idx, _ = find_peaks(y, prominence=min_prominence)
    centers = hist.bin_centers
    out = []
    for i in idx:
        if 0 < i < len(y) - 1:
            denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
            d = 0.5 * (y[i - 1] - y[i + 1]) / denom if denom != 0 else 0.0
            delay = centers[i] + d * hist.bin_width
            height = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * d
        else:
            delay, height = centers[i], y[i]
        out.append((float(delay), float(height)))
    out.sort()
    return out


@dataclass(frozen=True)
class FsrEstimate:
    fsr_hz: float
    fsr_err_hz: float
    interval_s: float
    interval_err_s: float


def estimate_fsr(peaks: list[tuple[float, float]], k_max: int = 30) -> FsrEstimate:
    """Mean peak interval from the 0th (nearest zero delay) peak up to the
    k_max-th on the positive side; FSR is its reciprocal."""
    if not peaks:
        raise EstimationError("no peaks")
    delays = np.array([d for d, _ in peaks])
    zero = int(np.argmin(np.abs(delays)))
    d = delays[zero:zero + k_max + 1]
    if len(d) < 2:
        raise EstimationError("need at least 2 peaks on the positive side")
    iv = np.diff(d)
    if np.any(iv <= 0):
        raise EstimationError("peak delays must be strictly increasing")
    # a faint peak may go undetected, leaving an interval that spans
    # several comb periods; snap each interval to its multiple.  A spurious
    # sub-peak splits one period in two short intervals; the shorter one
    # snaps to zero steps and the pair merges back into a single period.
    steps = np.rint(iv / np.median(iv))
    if np.sum(steps) < 1:
        raise EstimationError("peak intervals collapse to zero comb periods")
    good = steps >= 1
    per = iv[good] / steps[good]
    dt = float(np.sum(iv) / np.sum(steps))
    if dt <= 0:
        raise EstimationError("nonpositive mean peak interval")
    dt_err = float(np.std(per, ddof=1) / math.sqrt(len(per))) if len(per) > 1 else 0.0
    return FsrEstimate(fsr_hz=1.0 / dt, fsr_err_hz=dt_err / dt ** 2,
                       interval_s=dt, interval_err_s=dt_err)


def fit_envelope(hist: CorrelationHistogram, side: str, *, floor: float = 0.0,
                 min_prominence: float | None = None) -> tuple[float, float]:
    """Cavity linewidth from the exponential decay of the comb peak heights.

    Weighted least squares of log(height - floor) against |delay| over the
    detected peaks, with Poisson weights; the magnitude of the slope is
    2 pi times the linewidth.  Returns (linewidth_hz, error_hz).
    """
    if side not in ("positive", "negative"):
        raise ParameterError("side must be 'positive' or 'negative'")
    if min_prominence is None:
        min_prominence = max(5.0 * math.sqrt(max(floor, 0.0)), 1.0)
    peaks = detect_peaks(hist, min_prominence)
    half_bin = hist.bin_width / 2
    if side == "positive":
        pts = [(d, h) for d, h in peaks if d > half_bin]
    else:
        pts = [(-d, h) for d, h in peaks if d < -half_bin]
    pts = [(x, h - floor) for x, h in pts if h - floor > 0]
    if len(pts) < 10:
        raise FitError(f"need >= 10 usable peaks on the {side} side, got {len(pts)}")
    x = np.array([p[0] for p in pts])
    h = np.array([p[1] for p in pts])
    # var(log h) ~ 1/h for Poisson counts
    coef, cov = np.polyfit(x, np.log(h), 1, w=np.sqrt(h), cov="unscaled")
    return -float(coef[0]) / TWO_PI, float(math.sqrt(cov[0, 0])) / TWO_PI


def noise_floor(hist: CorrelationHistogram, region: tuple[float, float]) -> tuple[float, float]:
    """Mean and standard error of the bin counts over a quiet delay region."""
    rmin, rmax = region
    edges = hist.bin_edges
    if rmin < edges[0] - 1e-15 or rmax > edges[-1] + 1e-15:
        raise ParameterError("floor region lies outside the histogram range")
    sel = (edges[:-1] >= rmin - 1e-15) & (edges[1:] <= rmax + 1e-15)
    n = int(np.count_nonzero(sel))
    if n < 10:
        raise ParameterError("floor region must contain at least 10 bins")
    c = hist.counts[sel].astype(float)
    return float(np.mean(c)), float(np.std(c, ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    error: float
    clamped: bool = False


def coincidence_rate(hist: CorrelationHistogram, window: float, center: float,
                     floor: float, floor_err: float = 0.0) -> RateEstimate:
    """Floor-subtracted coincidence rate inside the window, counts/s."""
    lo, hi = center - window / 2, center + window / 2
    edges = hist.bin_edges
    if lo < edges[0] - 1e-15 or hi > edges[-1] + 1e-15:
        raise ParameterError("coincidence window does not fit in the histogram")
    sel = (edges[:-1] >= lo - 1e-15) & (edges[1:] <= hi + 1e-15)
    raw = float(hist.counts[sel].sum())
    n = int(np.count_nonzero(sel))
    net = raw - floor * n
    err = math.sqrt(raw + (floor_err * n) ** 2) / hist.duration if hist.duration else 0.0
    clamped = net < 0
    rate = max(net, 0.0) / hist.duration if hist.duration else 0.0
    return RateEstimate(rate=rate, error=err, clamped=clamped)


@dataclass(frozen=True)
class G2Estimate:
    value: float
    error: float
    coincidences: int
    starts: int
    stops: int
    live_time: float
    undefined: bool = False
    upper_bound: float | None = None


def g2_estimate(events: EventStream, window: float, center: float,
                start_channel: str = "idler", stop_channel: str = "signal") -> G2Estimate:
    """Normalized cross-correlation g2 = C T / (S I window).

    C counts start-stop pairs with delay inside the window; S and I are
    the singles counts inside measurement phases; T is the live
    measurement time.  Error bars propagate Poisson counting noise.
    """
    starts = events.times_s(start_channel)
    stops = events.times_s(stop_channel)
    if len(starts) == 0 or len(stops) == 0:
        raise EstimationError("both channels must be nonempty")
    lo, hi = center - window / 2, center + window / 2
    c = int((np.searchsorted(stops, starts + hi, side="right")
             - np.searchsorted(stops, starts + lo, side="left")).sum())
    g = events.gating()
    if g is not None:
        s_n = int(np.count_nonzero(g.measuring_mask(starts)))
        i_n = int(np.count_nonzero(g.measuring_mask(stops)))
    else:
        s_n, i_n = len(starts), len(stops)
    t_live = events.live_time_s()
    if s_n == 0 or i_n == 0:
        raise EstimationError("no singles inside measurement phases")
    scale = t_live / (s_n * i_n * window)
    if c == 0:
        return G2Estimate(value=0.0, error=0.0, coincidences=0, starts=s_n,
                          stops=i_n, live_time=t_live, undefined=True,
                          upper_bound=scale)
    val = c * scale
    err = val * math.sqrt(1.0 / c + 1.0 / s_n + 1.0 / i_n)
    return G2Estimate(value=val, error=err, coincidences=c, starts=s_n,
                      stops=i_n, live_time=t_live)


def classical_limit(n_modes: int) -> float:
    """Upper bound on g2 for a classical n-mode field: 1 + 1/N."""
    if n_modes < 1:
        raise ParameterError("mode count must be >= 1")
    return 1.0 + 1.0 / n_modes


def effective_modes(rate_multi: tuple[float, float],
                    rate_single: tuple[float, float]) -> tuple[float, float]:
    """Coincidence-rate gain over single-mode operation, with errors in
    quadrature."""
    rm, em = rate_multi
    rs, es = rate_single
    if rs <= 0:
        raise EstimationError("single-mode reference rate must be positive")
    ratio = rm / rs
    err = abs(ratio) * math.sqrt((em / rm) ** 2 + (es / rs) ** 2) if rm != 0 else es / rs
    return ratio, err


def shuffle_channel(events: EventStream, channel: str, seed: int) -> EventStream:
    """Destroy correlations by re-drawing one channel's timestamps
    uniformly over the measurement phases."""
    from .montecarlo import CHANNEL_NAMES, make_rng  # local to avoid cycle

    rng = make_rng(seed)
    code = CHANNEL_NAMES[channel]
    n = int(np.count_nonzero(events.channels == code))
    g = events.gating()
    live = events.live_time_s()
    t = rng.random(n) * live
    if g is not None:
        t = g.live_to_abs(t)
    new_ps = np.rint(t * 1e12).astype(np.uint64)
    ts = events.timestamps_ps.copy()
    ts[events.channels == code] = np.sort(new_ps)
    order = np.lexsort((events.channels, ts))
    meta = dict(events.metadata)
    meta["shuffled_channel"] = channel
    return EventStream(channels=events.channels[order], timestamps_ps=ts[order],
                       metadata=meta)


@dataclass
class AnalysisReport:
    """All derived observables of one run."""

    fsr_hz: float
    fsr_err_hz: float
    interval_s: float
    interval_err_s: float
    linewidth_signal_hz: float
    linewidth_signal_err_hz: float
    linewidth_idler_hz: float
    linewidth_idler_err_hz: float
    echo_delay_s: float
    noise_floor_counts: float
    noise_floor_err: float
    coincidence_rate_cps: float
    coincidence_rate_err: float
    g2: float
    g2_err: float
    n_effective: float
    n_effective_err: float
    classical_limit: float
    nonclassical: bool
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = bool(self.g2 - self.g2_err > self.classical_limit)
        if self.nonclassical != expected:
            raise ParameterError("nonclassical flag inconsistent with g2 and limit")

    def to_json(self) -> str:
        d = asdict(self)
        d["schema_version"] = 1
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        d = json.loads(text)
        d.pop("schema_version", None)
        return cls(**d)
