"""Shared signal primitives: fractional delays, smear kernels, multiband FIRs.

The multiband synthesis bank is a set of linear-phase FIRs whose magnitude
responses partition unity across frequency (raised-cosine crossovers in
log-frequency). Scaling band b by g_b and summing therefore reshapes a
signal's octave-band levels, while flat gains reconstruct a pure delay,
which callers compensate exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .bands import DEFAULT_BANDS, BandLayout

SINC_TAPS = 32  # fractional-delay kernel length


def _hann_at(x: np.ndarray, taps: int) -> np.ndarray:
    # Hann window evaluated at the shifted sinc arguments
    w = 0.5 * (1.0 + np.cos(2.0 * np.pi * x / taps))
    return np.where(np.abs(x) <= taps / 2, w, 0.0)


def fractional_delay_bank(fracs, taps: int = SINC_TAPS) -> np.ndarray:
    """(n, taps) windowed-sinc kernels, one row per fractional delay in [0, 1).

    Row i realizes a delay of fracs[i] samples relative to index taps//2;
    place it starting at integer_delay - taps//2 for integer_delay + frac.
    """
    n = np.arange(taps) - taps // 2
    x = n[None, :] - np.atleast_1d(np.asarray(fracs, dtype=float))[:, None]
    return np.sinc(x) * _hann_at(x, taps)


def fractional_delay_kernel(frac: float, taps: int = SINC_TAPS) -> np.ndarray:
    return fractional_delay_bank([frac], taps)[0]


def place_kernels(buffer: np.ndarray, starts: np.ndarray, kernels: np.ndarray) -> None:
    """Accumulate rows of ``kernels`` into ``buffer`` at per-row start indices.

    Samples that would land outside the buffer are dropped. Mutates ``buffer``.
    """
    n, k = kernels.shape
    length = len(buffer)
    idx = np.asarray(starts, dtype=np.int64)[:, None] + np.arange(k)[None, :]
    valid = (idx >= 0) & (idx < length)
    np.add.at(buffer, idx[valid], kernels[valid])


def smear_kernel(duration_s: float, fs: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-energy exponentially decaying noise burst of the given duration.

    The envelope decays by 60 dB across the kernel, approximating scattering
    from room clutter while preserving the tap's energy exactly.
    """
    n = max(2, int(round(duration_s * fs)))
    env = 10.0 ** (-3.0 * np.arange(n) / n)
    kernel = env * rng.standard_normal(n)
    return kernel / np.linalg.norm(kernel)


# ---------------------------------------------------------------------------
# Linear-phase multiband synthesis bank
# ---------------------------------------------------------------------------

def _band_weight_masks(freqs: np.ndarray, bands: BandLayout, xover_octaves: float) -> np.ndarray:
    """(n_bands, n_freqs) weights summing to exactly one at every frequency.

    F_b(f) is the cumulative share owned by bands 0..b: a raised-cosine
    step from 1 to 0 across the geometric band edge, of total width
    2*xover_octaves in log2 frequency. Band masks are successive
    differences of the F_b, so the partition is exact by construction.
    """
    centers = np.asarray(bands.centers_hz)
    n_bands = len(centers)
    logf = np.log2(np.maximum(freqs, 1e-9))
    edges = np.log2(np.sqrt(centers[:-1] * centers[1:]))

    cum = np.empty((n_bands - 1, len(freqs)))
    for b, edge in enumerate(edges):
        x = np.clip((logf - (edge - xover_octaves)) / (2.0 * xover_octaves), 0.0, 1.0)
        cum[b] = 0.5 * (1.0 + np.cos(np.pi * x))

    masks = np.empty((n_bands, len(freqs)))
    masks[0] = cum[0]
    for b in range(1, n_bands - 1):
        masks[b] = cum[b] - cum[b - 1]
    masks[-1] = 1.0 - cum[-1]
    return masks


class MultibandBank:
    """Linear-phase FIR bank partitioning the spectrum into octave bands.

    ``filter_taps`` controls low-frequency resolution; the latency is
    exactly ``group_delay`` = filter_taps // 2 samples and is compensated
    by the application methods, which return time-aligned signals.
    """

    def __init__(
        self,
        fs: float,
        bands: BandLayout = DEFAULT_BANDS,
        filter_taps: int = 2048,
        xover_octaves: float = 0.25,
    ):
        if filter_taps % 2:
            filter_taps += 1
        self.fs = float(fs)
        self.bands = bands
        self.group_delay = filter_taps // 2

        n_fft = 2 * filter_taps
        freqs = np.fft.rfftfreq(n_fft, d=1.0 / fs)
        masks = _band_weight_masks(freqs, bands, xover_octaves)
        shift = np.exp(-2j * np.pi * np.arange(len(freqs)) * self.group_delay / n_fft)
        spectra = masks * shift[None, :]
        self.kernels = np.fft.irfft(spectra, n=n_fft, axis=1)[:, : filter_taps + 1]

    def apply_gains(self, signal: np.ndarray, gains_db, keep_length: bool = True) -> np.ndarray:
        """Reshape octave-band levels by per-band dB offsets, time-aligned.

        With ``keep_length=False`` the filter tail is kept (the output grows
        by the kernel length), which preserves low-band energy exactly.
        """
        g = 10.0 ** (np.asarray(gains_db, dtype=float) / 20.0)
        combined = np.tensordot(g, self.kernels, axes=(0, 0))
        out = fftconvolve(signal, combined)
        if keep_length:
            return out[self.group_delay : self.group_delay + len(signal)]
        return out[self.group_delay :]

    def split(self, signal: np.ndarray) -> np.ndarray:
        """(n_bands, len(signal)) time-aligned band components summing to the input."""
        outs = fftconvolve(signal[None, :], self.kernels, axes=1)
        return outs[:, self.group_delay : self.group_delay + len(signal)]


def pink_kernel(fs: float, length: int, f_lo: float = 20.0, f_hi: float = 20000.0) -> np.ndarray:
    """Linear-phase kernel with magnitude proportional to f^(-1/2).

    Magnitude is held constant outside [f_lo, f_hi]. Peak-normalized, so
    filtering a unit impulse with it yields a pink pulse.
    """
    n_fft = int(length)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / fs)
    mag = np.clip(freqs, f_lo, min(f_hi, fs / 2.0)) ** -0.5
    center = n_fft // 2
    shift = np.exp(-2j * np.pi * np.arange(len(freqs)) * center / n_fft)
    h = np.fft.irfft(mag * shift, n=n_fft)
    return h / np.max(np.abs(h))
