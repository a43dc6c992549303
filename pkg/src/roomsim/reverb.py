"""Feedback-delay-network late reverberation with physically-based delays.

Delay lengths come from axial and diagonal path lengths of the room,
nudged to a pairwise-coprime set; the feedback matrix is a Householder
reflection (orthonormal, lossless before attenuation); per-line decay
gains realize the target T30 per octave band. A coupled volume is a
second, slower FDN mixed in so its energy decay crosses the main decay at
a configurable level below the peak, producing a dual-slope EDC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .bands import DEFAULT_BANDS, N_BANDS
from .errors import ConfigurationError, DesignError, StabilityError, ValidationError
from .scene import SPEED_OF_SOUND, ReverbTarget, RoomGeometry

DEFAULT_N_LINES = 12
ORTHONORMALITY_TOL = 1e-9
MIN_DELAY_SAMPLES = 16
#: delays above this are halved until they fit, keeping large rooms' tails
#: dense enough for a smooth decay while staying tied to the room's paths
MAX_DELAY_SECONDS = 0.075

#: path-length multipliers (per room axis) used to propose delay lengths
_PATH_WEIGHTS = np.array([
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [1, 1, 0], [1, 0, 1], [0, 1, 1],
    [1, 1, 1],
    [2, 1, 0], [1, 2, 0], [0, 1, 2], [2, 0, 1], [1, 1, 2],
    [2, 1, 1], [1, 2, 1], [2, 2, 1], [2, 1, 2], [1, 2, 2], [2, 2, 2],
    [3, 1, 1], [1, 3, 1], [3, 2, 1], [2, 3, 1], [3, 1, 2], [1, 3, 2],
], dtype=float)


@dataclass(frozen=True)
class CoupledStage:
    spec: "FdnSpec"
    knee_db: float       # target EDC crossing level below the main decay's peak
    description: str


@dataclass(frozen=True)
class FdnSpec:
    """Validated FDN design: delays, feedback matrix, gains, onset."""

    delays: tuple[int, ...]
    feedback: np.ndarray               # (n, n) orthonormal
    band_gains: np.ndarray             # (n, n_bands) in (0, 1)
    input_gains: np.ndarray
    output_gains: np.ndarray
    sample_rate: float
    onset_s: float = 0.0
    coupled: CoupledStage | None = None

    def __post_init__(self):
        n = len(self.delays)
        if len(set(self.delays)) != n:
            raise ValidationError("delay lengths must be pairwise distinct")
        for i in range(n):
            for j in range(i + 1, n):
                if math.gcd(self.delays[i], self.delays[j]) != 1:
                    raise ValidationError(
                        f"delays {self.delays[i]} and {self.delays[j]} are not coprime"
                    )
        q = self.feedback
        err = np.max(np.abs(q.T @ q - np.eye(n)))
        if err > ORTHONORMALITY_TOL:
            raise ValidationError(f"feedback matrix not orthonormal (max dev {err:.2e})")
        if self.band_gains.shape != (n, N_BANDS):
            raise ValidationError(f"band gains must be ({n}, {N_BANDS})")
        if np.any(self.band_gains <= 0.0) or np.any(self.band_gains >= 1.0):
            raise ValidationError("per-band gains must lie in (0, 1)")

    @property
    def n_lines(self) -> int:
        return len(self.delays)


def householder_matrix(n: int) -> np.ndarray:
    """Householder reflection about the diagonal unit vector: orthonormal, cheap."""
    return np.eye(n) - (2.0 / n) * np.ones((n, n))


def _coprime_nudge(targets: list[int]) -> list[int]:
    """Nearest pairwise-coprime, pairwise-distinct set to the proposed lengths."""
    chosen: list[int] = []
    for m in sorted(targets):
        found = None
        for offset in range(0, 2000):
            for cand in (m + offset, m - offset) if offset else (m,):
                if cand < MIN_DELAY_SAMPLES or cand in chosen:
                    continue
                if all(math.gcd(cand, c) == 1 for c in chosen):
                    found = cand
                    break
            if found is not None:
                break
        if found is None:
            raise DesignError("could not find a coprime delay set near the room's path lengths")
        chosen.append(found)
    return chosen


def design_fdn(
    geometry: RoomGeometry,
    target: ReverbTarget,
    fs: float = 44100.0,
    n_lines: int = DEFAULT_N_LINES,
) -> FdnSpec:
    """Design an FDN whose tail decays at the target T30 in every band.

    Delays are the room's axial/diagonal path lengths over c (rounded to a
    coprime set); line i's band-b gain is 10^(-3 m_i / (fs T30_b)).
    """
    if n_lines < 4 or n_lines % 2:
        raise DesignError("n_lines must be even and at least 4")
    dims = np.asarray(geometry.dims, dtype=float)
    paths = np.linalg.norm(_PATH_WEIGHTS[:, None, :] * dims[None, None, :], axis=2).ravel()
    samples = paths / SPEED_OF_SOUND * fs
    cap = MAX_DELAY_SECONDS * fs
    while np.any(samples > cap):
        samples = np.where(samples > cap, samples / 2.0, samples)
    samples = np.unique(np.round(samples).astype(int))
    samples = samples[samples >= MIN_DELAY_SAMPLES]
    if len(samples) < n_lines:
        raise DesignError(
            f"room too small for {n_lines} distinct delay lines at fs={fs}"
        )
    delays = _coprime_nudge(list(samples[:n_lines]))

    m = np.asarray(delays, dtype=float)[:, None]
    t30 = np.asarray(target.t30_per_band, dtype=float)[None, :]
    band_gains = 10.0 ** (-3.0 * m / (fs * t30))
    if np.any(band_gains >= 1.0):
        raise DesignError("target decay produced a non-attenuating line gain")

    n = n_lines
    return FdnSpec(
        delays=tuple(int(d) for d in delays),
        feedback=householder_matrix(n),
        band_gains=band_gains,
        input_gains=np.ones(n),
        output_gains=np.full(n, 1.0 / np.sqrt(n)),
        sample_rate=float(fs),
    )


def _peaking_sos(fc: float, fs: float, gain_db: float, q: float = 1.414) -> np.ndarray:
    """One biquad section of a peaking equalizer (cookbook form)."""
    a_lin = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * np.pi * fc / fs
    alpha = np.sin(w0) / (2.0 * q)
    b = np.array([1.0 + alpha * a_lin, -2.0 * np.cos(w0), 1.0 - alpha * a_lin])
    a = np.array([1.0 + alpha / a_lin, -2.0 * np.cos(w0), 1.0 - alpha / a_lin])
    return np.concatenate([b / a[0], a / a[0]])


def fit_band_filter(
    gains: np.ndarray,
    fs: float,
    max_iter: int = 40,
    tol_db: float = 0.45,
) -> tuple[float, np.ndarray]:
    """Scalar base gain plus a 10-biquad peaking cascade matching band gains.

    Iteratively refines one peaking section per octave center until the
    cascade magnitude at every center is within ``tol_db`` of the target.
    Raises DesignError if the fit does not converge.
    """
    from scipy.signal import sosfreqz

    centers = np.asarray(DEFAULT_BANDS.centers_hz)
    target_db = 20.0 * np.log10(np.asarray(gains, dtype=float))
    base_db = float(np.mean(target_db))
    resid = target_db - base_db
    params = resid.copy()
    sos = None
    for _ in range(max_iter):
        sos = np.stack([_peaking_sos(fc, fs, p) for fc, p in zip(centers, params)])
        _, h = sosfreqz(sos, worN=2.0 * np.pi * centers / fs)
        achieved = 20.0 * np.log10(np.maximum(np.abs(h), 1e-12))
        err = resid - achieved
        if np.max(np.abs(err)) < tol_db:
            return 10.0 ** (base_db / 20.0), sos
        params += 0.6 * err
    raise DesignError(
        f"band attenuation fit did not reach {tol_db} dB at every octave center"
    )


def _line_filters(spec: FdnSpec) -> tuple[np.ndarray, list | None]:
    """Per-line attenuation: a bare scalar when the band targets are flat,
    otherwise a scalar plus a fitted peaking-EQ cascade (state kept by the
    render loop)."""
    gains = spec.band_gains
    spread = gains.max(axis=1) / gains.min(axis=1)
    if np.all(spread < 1.0 + 1e-9):
        return gains[:, 0].copy(), None

    scalars = np.empty(spec.n_lines)
    cascades = []
    for i in range(spec.n_lines):
        scalars[i], sos = fit_band_filter(gains[i], spec.sample_rate)
        cascades.append(sos)
    return scalars, cascades


def stability_check(spec: FdnSpec) -> None:
    if np.any(spec.band_gains >= 1.0):
        raise StabilityError("effective loop gain >= 1; refusing to render")


def run_fdn(
    spec: FdnSpec,
    length_s: float,
    fs: float | None = None,
    include_coupled: bool = True,
) -> np.ndarray:
    """Render the FDN's impulse response tail, (n_lines, n_samples).

    A unit impulse is injected at the spec's onset time. Processing is
    block-based with block length bounded by the shortest delay line, so
    the recursion is exact yet vectorized. Deterministic: equal specs give
    bit-identical output.
    """
    fs = float(fs or spec.sample_rate)
    if fs != spec.sample_rate:
        raise ConfigurationError("render rate must match the design rate")
    if length_s <= spec.onset_s:
        raise ConfigurationError("render length must exceed the onset time")
    stability_check(spec)

    main = _run_single(spec, length_s, fs)
    if spec.coupled is None or not include_coupled:
        return main

    coupled = _run_single(spec.coupled.spec, length_s, fs)
    gain, shift = resolve_coupled_mix(
        main_energy=np.sum(main**2, axis=0),
        coupled_energy=np.sum(coupled**2, axis=0),
        fs=fs,
        knee_db=spec.coupled.knee_db,
    )
    return main + gain * shift_tail(coupled, shift)


def shift_tail(channels: np.ndarray, shift: int) -> np.ndarray:
    """Delay a rendered tail by ``shift`` samples, zero-filling the front."""
    if shift <= 0:
        return channels
    out = np.zeros_like(channels)
    out[..., shift:] = channels[..., : channels.shape[-1] - shift]
    return out


def _run_single(spec: FdnSpec, length_s: float, fs: float) -> np.ndarray:
    n = spec.n_lines
    total = int(round(length_s * fs))
    onset = int(round(spec.onset_s * fs))
    scalar_gain, cascades = _line_filters(spec)

    delays = np.asarray(spec.delays)
    buffers = [np.zeros(m) for m in spec.delays]
    out = np.zeros((n, total))
    block = max(1, int(delays.min()))

    q = spec.feedback
    b_in = spec.input_gains
    c_out = spec.output_gains
    zi = None
    if cascades is not None:
        zi = [np.zeros((cascades[i].shape[0], 2)) for i in range(n)]

    t0 = 0
    while t0 < total:
        cur = min(block, total - t0)
        reads = np.empty((n, cur))
        idx_cache = []
        for i in range(n):
            idx = (t0 + np.arange(cur)) % delays[i]
            idx_cache.append(idx)
            reads[i] = buffers[i][idx]

        if cascades is None:
            atten = reads * scalar_gain[:, None]
        else:
            from scipy.signal import sosfilt

            atten = np.empty_like(reads)
            for i in range(n):
                filtered, zi[i] = sosfilt(cascades[i], reads[i], zi=zi[i])
                atten[i] = scalar_gain[i] * filtered

        out[:, t0 : t0 + cur] = c_out[:, None] * atten
        mixed = q @ atten
        if t0 <= onset < t0 + cur:
            mixed[:, onset - t0] += b_in
        for i in range(n):
            buffers[i][idx_cache[i]] = mixed[i]
        t0 += cur
    return out


def resolve_coupled_mix(
    main_energy: np.ndarray,
    coupled_energy: np.ndarray,
    fs: float,
    knee_db: float,
) -> tuple[float, int]:
    """Gain and onset shift placing the coupled tail's knee at ``knee_db``.

    The coupled tail is delayed to the time where the main EDC has decayed
    to the knee level (the returning coupled energy dominates only after
    the main room has decayed), then its level is set so the combined EDC
    bends at ``knee_db`` below the peak. The level is refined with the
    dual-slope detector in the loop; when the knee is intrinsically
    undetectable (slopes too similar, or the level far below the analysis
    range) the analytic placement is kept. Works on measured energy
    curves, so early-reflection energy in ``main_energy`` is accounted for.
    """
    from .analysis import detect_dual_slope

    edc_main = np.cumsum(main_energy[::-1], dtype=float)[::-1]
    peak = float(edc_main[0])
    if peak <= 0 or not np.any(coupled_energy > 0):
        raise ConfigurationError("cannot mix coupled stage into silent decay")

    knee_abs = peak * 10.0 ** (knee_db / 10.0)
    below = np.nonzero(edc_main <= knee_abs)[0]
    shift = int(below[0]) if len(below) else len(edc_main) - 1
    # keep at least the head of the coupled tail inside the render window
    nz = np.nonzero(coupled_energy > 0)[0]
    if len(nz) == 0:
        raise ConfigurationError("coupled stage rendered silence")
    n = len(main_energy)
    shift = min(shift, max(0, n - 1 - int(nz[0]) - int(0.05 * fs)))

    shifted = np.zeros(n)
    shifted[shift:] = coupled_energy[: n - shift]
    edc_coup = np.cumsum(shifted[::-1], dtype=float)[::-1]
    if edc_coup[0] <= 0:
        raise ConfigurationError("coupled tail too short to reach the knee point")
    times = np.arange(n) / fs

    def placed(level_db: float) -> tuple[float, float | None]:
        # level_db: total coupled energy relative to the combined peak
        g_sq = peak * 10.0 ** (level_db / 10.0) / float(edc_coup[0])
        combined = edc_main + g_sq * edc_coup
        db = 10.0 * np.log10(np.maximum(combined / combined[0], 1e-300))
        found = detect_dual_slope(db, times)
        return g_sq, (found.knee_db if found is not None else None)

    level = knee_db - 2.0
    analytic_gain_sq, knee = placed(level)
    gain_sq = analytic_gain_sq
    if knee is None:
        # the initial placement may sit just past the detectability edge
        for back in (1.5, 3.0, 4.5):
            g2, k2 = placed(level - back)
            if k2 is not None:
                gain_sq, knee, level = g2, k2, level - back
                break
        else:
            # knee intrinsically undetectable; keep the analytic placement
            return float(np.sqrt(analytic_gain_sq)), shift

    # walk the level in small steps; reported knee is monotone in level but
    # detection fails when the stage gets too loud, so never step past a None
    step = 0.4
    for _ in range(14):
        if abs(knee - knee_db) < 0.3:
            break
        direction = 1.0 if knee < knee_db else -1.0
        g2, k2 = placed(level + direction * step)
        if k2 is None:
            break
        crossed = (knee - knee_db) * (k2 - knee_db) <= 0
        if crossed and abs(k2 - knee_db) > abs(knee - knee_db):
            break
        level += direction * step
        gain_sq, knee = g2, k2
        if crossed:
            break
    return float(np.sqrt(gain_sq)), shift


def couple_volumes(
    main: FdnSpec,
    coupled_geometry: RoomGeometry,
    coupled_t30: float,
    knee_level_db: float,
    n_lines: int | None = None,
    description: str = "coupled volume",
) -> FdnSpec:
    """Attach a slower coupled-volume stage to an FDN design.

    The second stage is designed for the coupled geometry and decay; its
    mix level is resolved at render time from the measured decays so the
    combined EDC shows a knee at ``knee_level_db`` below the peak.
    """
    main_t30 = _broadband_t30(main)
    if coupled_t30 <= main_t30:
        raise ConfigurationError(
            f"coupled decay ({coupled_t30} s) must be slower than the main decay ({main_t30:.3g} s)"
        )
    if knee_level_db >= 0:
        raise ConfigurationError("knee level must be negative dB")

    stage = design_fdn(
        coupled_geometry,
        ReverbTarget.flat(coupled_t30),
        fs=main.sample_rate,
        n_lines=n_lines or main.n_lines,
    )
    stage = replace(stage, onset_s=main.onset_s)
    return replace(main, coupled=CoupledStage(stage, knee_level_db, description))


def _broadband_t30(spec: FdnSpec) -> float:
    m = np.asarray(spec.delays, dtype=float)
    g = spec.band_gains.mean(axis=1)
    # invert g = 10^(-3 m / (fs T30)) per line, average
    return float(np.mean(-3.0 * m / (spec.sample_rate * np.log10(g))))
