"""Objective decay analysis: octave filterbank, Schroeder EDC, T30, knees.

T30/T20/EDT follow the standard convention: a least-squares line fitted to
the energy decay curve over -5..-35 / -5..-25 / 0..-10 dB, extrapolated to
60 dB of decay. When a dual-slope knee is detected above -35 dB the T30
fit range is truncated at the knee so the estimate reflects the main
room's decay rather than a mixture of both slopes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfilt

from .bands import DEFAULT_BANDS, BandLayout
from .errors import AnalysisError, ComparisonError, ConfigurationError, DecayRangeError

#: knee acceptance thresholds of the two-segment fit
KNEE_RESIDUAL_FACTOR = 0.5    # two-segment RSS must be <= 50% of single-line RSS
KNEE_SLOPE_DELTA = 0.3        # slopes must differ by >= 30% of the shallower slope
KNEE_GRID_DB = 0.5            # candidate knee spacing
KNEE_SEARCH_RANGE_DB = (-10.0, -38.0)


@dataclass(frozen=True)
class DualSlope:
    knee_db: float          # knee level below the EDC peak (negative)
    knee_time_s: float
    early_t60: float        # 60 dB extrapolation of the early segment
    late_t60: float
    residual_ratio: float   # two-segment RSS / single-line RSS


@dataclass(frozen=True)
class DecayAnalysis:
    sample_rate: float
    edc_db: np.ndarray
    times_s: np.ndarray
    t30: float
    t20: float
    edt: float
    t30_per_band: np.ndarray | None
    broadband_t30: float
    dual_slope: DualSlope | None


def octave_filterbank(
    signal: np.ndarray,
    fs: float,
    bands: BandLayout = DEFAULT_BANDS,
    order: int = 6,
) -> np.ndarray:
    """Split a signal into octave bands with 6th-order Butterworth bandpasses.

    Returns (n_bands, n) band signals. The top band's upper edge is clipped
    just below Nyquist. Raises ConfigurationError when the rate cannot
    represent the top band at all.
    """
    signal = np.asarray(signal, dtype=float)
    nyq = fs / 2.0
    edges = bands.edges_hz()
    if fs < 2.0 * bands.centers_hz[-1] or edges[-1, 0] >= nyq:
        raise ConfigurationError(
            f"sample rate {fs} Hz too low for the {bands.centers_hz[-1]} Hz octave band"
        )
    outs = np.empty((bands.n_bands, len(signal)))
    for b, (lo, hi) in enumerate(edges):
        hi = min(hi, 0.985 * nyq)
        sos = butter(order // 2, [lo / nyq, hi / nyq], btype="band", output="sos")
        outs[b] = sosfilt(sos, signal)
    return outs


def band_energies_db(signal: np.ndarray, fs: float, bands: BandLayout = DEFAULT_BANDS) -> np.ndarray:
    """Octave-band energies in dB via the Butterworth filterbank (unnormalized)."""
    parts = octave_filterbank(signal, fs, bands)
    energy = np.sum(parts**2, axis=1)
    return 10.0 * np.log10(np.maximum(energy, 1e-300))


def band_energies_fft_db(
    signal: np.ndarray, fs: float, bands: BandLayout = DEFAULT_BANDS
) -> np.ndarray:
    """Octave-band energies in dB from FFT power integrated over band edges.

    Brick-wall band boundaries: no filter-skirt leakage, which matters when
    adjacent bands differ by many dB (e.g. recolored pulses).
    """
    spectrum = np.fft.rfft(np.asarray(signal, dtype=float))
    power = np.abs(spectrum) ** 2
    freqs = np.fft.rfftfreq(len(signal), 1.0 / fs)
    out = np.empty(bands.n_bands)
    for b, (lo, hi) in enumerate(bands.edges_hz()):
        sel = (freqs >= lo) & (freqs < min(hi, fs / 2.0))
        out[b] = 10.0 * np.log10(max(float(np.sum(power[sel])), 1e-300))
    return out


def schroeder_edc(ir: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward-integrated energy decay curve in dB, normalized to 0 dB.

    Returns (edc_db, times_s). Non-increasing by construction; raises
    AnalysisError on an all-zero channel.
    """
    h = np.asarray(ir, dtype=float)
    if h.ndim != 1:
        raise AnalysisError("schroeder_edc expects a single channel")
    energy = h * h
    total = float(np.sum(energy))
    if total <= 0.0:
        raise AnalysisError("silent channel: EDC undefined")
    tail = np.cumsum(energy[::-1])[::-1]
    edc_db = 10.0 * np.log10(np.maximum(tail / total, 1e-300))
    times = np.arange(len(h)) / fs
    return edc_db, times


def _fit_line(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope/intercept plus residual sum of squares."""
    a = np.vstack([t, np.ones_like(t)]).T
    coef, rss, *_ = np.linalg.lstsq(a, y, rcond=None)
    if rss.size == 0:
        rss = np.array([float(np.sum((a @ coef - y) ** 2))])
    return float(coef[0]), float(coef[1]), float(rss[0])


def _range_indices(edc_db: np.ndarray, hi_db: float, lo_db: float) -> slice:
    """Index slice where the EDC lies within (hi_db, lo_db], hi > lo."""
    start = int(np.searchsorted(-edc_db, -hi_db))
    stop = int(np.searchsorted(-edc_db, -lo_db))
    return slice(start, max(stop, start + 2))


def _decay_time_from_fit(t: np.ndarray, edc_db: np.ndarray, hi_db: float, lo_db: float) -> float:
    floor = usable_floor_db(edc_db)
    if floor > lo_db:
        raise DecayRangeError(
            f"EDC only reaches {floor:.1f} dB before end truncation, needs {lo_db} dB",
            achieved_floor_db=floor,
        )
    idx = _range_indices(edc_db, hi_db, lo_db)
    slope, _, _ = _fit_line(t[idx], edc_db[idx])
    if slope >= 0:
        raise DecayRangeError("EDC not decaying over the fit range")
    return -60.0 / slope


def _two_segment_fit(t: np.ndarray, y: np.ndarray, knee_idx: int):
    """Two independent lines split at the breakpoint; returns both fits + RSS."""
    s1, b1, r1 = _fit_line(t[:knee_idx], y[:knee_idx])
    s2, b2, r2 = _fit_line(t[knee_idx:], y[knee_idx:])
    return (s1, b1), (s2, b2), r1 + r2


def _early_component_t60(
    t: np.ndarray, y: np.ndarray, knee_db: float, late_t60: float
):
    """T60 of the early decay above the knee via an exp-plus-constant fit.

    Above its onset, a later-arriving coupled tail contributes a constant to
    the backward-integrated energy, so the region above the knee follows
    A * 10^(s t / 10) + C exactly: the classic decay-over-floor problem.
    The rate is found by a 1-D search, solving (A, C) linearly per
    candidate; one local refinement pass tightens the estimate.
    """
    sel = (y <= -5.0) & (y >= knee_db + 1.5)
    if np.count_nonzero(sel) < 12:
        sel = (y <= -4.0) & (y >= knee_db + 0.75)
    if np.count_nonzero(sel) < 12:
        return None
    tt, energy = t[sel], 10.0 ** (y[sel] / 10.0)

    def residual(t60: float) -> tuple[float, float]:
        g = 10.0 ** (-6.0 * tt / t60)
        # linear LSQ for (A, C), clipped to physical non-negative values
        m = np.vstack([g, np.ones_like(g)]).T
        coef, *_ = np.linalg.lstsq(m, energy, rcond=None)
        a, c = max(coef[0], 0.0), max(coef[1], 0.0)
        return float(np.sum((a * g + c - energy) ** 2)), a

    lo, hi = 0.05, max(0.1, 0.97 * late_t60)
    grid = np.geomspace(lo, hi, 60)
    errs = [residual(x)[0] for x in grid]
    best = int(np.argmin(errs))
    fine = np.geomspace(grid[max(0, best - 1)], grid[min(len(grid) - 1, best + 1)], 40)
    errs = [residual(x)[0] for x in fine]
    t60 = float(fine[int(np.argmin(errs))])
    if t60 <= lo * 1.01 or t60 >= hi * 0.999:
        return None
    return t60


def usable_floor_db(edc_db: np.ndarray) -> float:
    """EDC level at 95% of the length, before the end-truncation plunge.

    The backward integral collapses toward -inf over the last samples of
    any finite IR; levels below this point are truncation artifacts, not
    decay range.
    """
    return float(edc_db[int(0.95 * (len(edc_db) - 1))])


def detect_dual_slope(edc_db: np.ndarray, times_s: np.ndarray) -> DualSlope | None:
    """Two-segment piecewise-linear scan over a 0.5 dB grid of candidate knees.

    A knee is accepted when the best two-segment fit reduces the residual
    of a single line by at least 50% and the segment slopes differ by at
    least 30%. The reported knee level is the estimated crossing of the two
    decay components: the point where the curve sits 3 dB above the fitted
    late line. The search starts below -5 dB so the onset transient of a
    room response cannot masquerade as a knee.
    """
    floor = usable_floor_db(edc_db)
    lo_limit = max(KNEE_SEARCH_RANGE_DB[1], floor + 5.0)
    fit_lo = max(-40.0, floor + 3.0)
    if lo_limit >= KNEE_SEARCH_RANGE_DB[0] or fit_lo >= -10.0:
        return None

    region = _range_indices(edc_db, -5.0, fit_lo)
    t, y = times_s[region], edc_db[region]
    if len(t) < 16:
        return None
    stride = max(1, len(t) // 4000)  # EDCs are smooth; decimation leaves fits unchanged
    t, y = t[::stride], y[::stride]
    _, _, rss_single = _fit_line(t, y)

    best = None
    for knee_db in np.arange(KNEE_SEARCH_RANGE_DB[0], lo_limit, -KNEE_GRID_DB):
        knee_idx = int(np.searchsorted(-y, -knee_db))
        if knee_idx < 8 or knee_idx > len(y) - 8:
            continue
        line1, line2, rss = _two_segment_fit(t, y, knee_idx)
        if best is None or rss < best[-1]:
            best = (knee_idx, line1, line2, rss)
    if best is None:
        return None

    knee_idx, (s1, _), (s2, b2), rss = best
    if rss_single <= 0 or rss > KNEE_RESIDUAL_FACTOR * rss_single:
        return None
    if s1 >= 0 or s2 >= 0:
        return None
    if abs(s1 - s2) < KNEE_SLOPE_DELTA * min(abs(s1), abs(s2)):
        return None

    # refit the late line over the deepest 60% of its segment, where the
    # early component has died out and the line matches the true asymptote
    mid = knee_idx + int(0.4 * (len(y) - knee_idx))
    s2r, b2r, _ = _fit_line(t[mid:], y[mid:])
    if s2r < 0:
        s2, b2 = s2r, b2r

    # the components cross where the curve sits 3 dB above the late line;
    # the knee level is the late line's (= either component's) value there
    above = y - (s2 * t + b2)
    past = np.nonzero(above < 3.01)[0]
    cross_idx = int(past[0]) if len(past) else knee_idx
    cross_idx = max(1, min(cross_idx, len(y) - 1))
    early_seg = -60.0 / s1
    late = -60.0 / s2
    knee_level = float(s2 * t[cross_idx] + b2)
    early_t60 = _early_component_t60(t, y, knee_level, late)
    early = float(early_t60) if early_t60 else early_seg
    # coupled-volume structure: the late decay is the slower one, and the
    # decomposed early estimate agrees with the early segment's slope;
    # anything else is curve wobble, not a knee
    if late <= early or not (0.5 <= early / early_seg <= 2.0):
        return None
    return DualSlope(
        knee_db=knee_level,
        knee_time_s=float(t[cross_idx]),
        early_t60=early,
        late_t60=late,
        residual_ratio=rss / rss_single,
    )


def estimate_decay(
    ir: np.ndarray,
    fs: float,
    bands: BandLayout | None = DEFAULT_BANDS,
) -> DecayAnalysis:
    """Full decay analysis of one IR channel.

    Computes the Schroeder EDC, T30/T20/EDT, optional per-band T30, and
    dual-slope detection. Needs the EDC to reach -35 dB; raises
    DecayRangeError (with the achieved floor) otherwise.
    """
    edc_db, times = schroeder_edc(ir, fs)
    floor = usable_floor_db(edc_db)
    if floor > -35.0:
        raise DecayRangeError(
            f"EDC floor {floor:.1f} dB above -35 dB; lengthen the IR",
            achieved_floor_db=floor,
        )

    dual = detect_dual_slope(edc_db, times)
    if dual is not None and dual.knee_db > -35.0:
        # a knee inside the fit range: T30 reflects the early (main room)
        # decay, recovered by subtracting the late component
        t30 = dual.early_t60
    else:
        t30 = _decay_time_from_fit(times, edc_db, -5.0, -35.0)
    t20 = _decay_time_from_fit(times, edc_db, -5.0, -25.0)
    edt = _decay_time_from_fit(times, edc_db, 0.0, -10.0)

    t30_bands = None
    broadband = t30
    if bands is not None:
        parts = octave_filterbank(ir, fs, bands)
        t30_bands = np.full(bands.n_bands, np.nan)
        for b in range(bands.n_bands):
            try:
                sub_edc, sub_t = schroeder_edc(parts[b], fs)
                sub_dual = detect_dual_slope(sub_edc, sub_t)
                if sub_dual is not None and sub_dual.knee_db > -35.0:
                    t30_bands[b] = sub_dual.early_t60
                else:
                    t30_bands[b] = _decay_time_from_fit(sub_t, sub_edc, -5.0, -35.0)
            except (AnalysisError, DecayRangeError):
                pass
        # broadband value: energy-weighted mean of the 500 Hz and 1 kHz bands
        i500 = bands.index_of(500.0)
        i1k = bands.index_of(1000.0)
        pair = t30_bands[[i500, i1k]]
        if np.all(np.isfinite(pair)):
            w = np.array([np.sum(parts[i500] ** 2), np.sum(parts[i1k] ** 2)])
            if w.sum() > 0:
                broadband = float(np.average(pair, weights=w))

    return DecayAnalysis(
        sample_rate=fs,
        edc_db=edc_db,
        times_s=times,
        t30=t30,
        t20=t20,
        edt=edt,
        t30_per_band=t30_bands,
        broadband_t30=broadband,
        dual_slope=dual,
    )


@dataclass(frozen=True)
class IrDifference:
    band_level_delta_db: np.ndarray   # per-band level difference a - b
    spectral_distance_db: float       # mean absolute per-band difference
    edc_difference_area: float        # integral of |EDC_a - EDC_b| in dB*s
    t30_delta: float


def compare_irs(a, b, fs: float | None = None) -> IrDifference:
    """Objective difference report between two impulse responses.

    Accepts ImpulseResponse-like objects (with .samples/.sample_rate/.layout)
    or raw arrays plus ``fs``. Identical inputs give all-zero metrics.
    """
    a_samples, a_fs, a_layout = _coerce_ir(a, fs)
    b_samples, b_fs, b_layout = _coerce_ir(b, fs)
    if a_fs != b_fs:
        raise ComparisonError(f"sample rates differ: {a_fs} vs {b_fs}")
    if a_layout != b_layout:
        raise ComparisonError(f"channel layouts differ: {a_layout} vs {b_layout}")

    mono_a, mono_b = a_samples.mean(axis=0), b_samples.mean(axis=0)
    if np.array_equal(mono_a, mono_b):
        n = DEFAULT_BANDS.n_bands
        return IrDifference(np.zeros(n), 0.0, 0.0, 0.0)

    lev_a = band_energies_db(mono_a, a_fs)
    lev_b = band_energies_db(mono_b, b_fs)
    delta = lev_a - lev_b

    edc_a, t_a = schroeder_edc(mono_a, a_fs)
    edc_b, t_b = schroeder_edc(mono_b, b_fs)
    n = min(len(edc_a), len(edc_b))
    lim = np.maximum(np.minimum(edc_a[:n], edc_b[:n]), -60.0)
    mask = lim > -59.9
    area = float(np.trapezoid(np.abs(edc_a[:n] - edc_b[:n])[mask], t_a[:n][mask]))

    t30_a = estimate_decay(mono_a, a_fs, bands=None).t30
    t30_b = estimate_decay(mono_b, b_fs, bands=None).t30
    return IrDifference(
        band_level_delta_db=delta,
        spectral_distance_db=float(np.mean(np.abs(delta))),
        edc_difference_area=area,
        t30_delta=float(t30_a - t30_b),
    )


def _coerce_ir(obj, fs):
    if hasattr(obj, "samples"):
        return np.atleast_2d(obj.samples), float(obj.sample_rate), getattr(obj, "layout", None)
    if fs is None:
        raise ComparisonError("raw arrays need an explicit sample rate")
    return np.atleast_2d(np.asarray(obj, dtype=float)), float(fs), None
