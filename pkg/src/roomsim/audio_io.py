"""WAV read/write (32-bit float RIFF) and sample-rate conversion."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import FormatError


def write_wav(path, samples: np.ndarray, fs: float) -> None:
    """Write (channels, n) float samples as 32-bit float WAV."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float32))
    if not np.all(np.isfinite(samples)):
        raise FormatError("refusing to write non-finite samples")
    wavfile.write(str(path), int(round(fs)), samples.T.copy())


def read_wav(path) -> tuple[np.ndarray, float]:
    """Read a WAV file as ((channels, n) float64 in [-1, 1], rate)."""
    p = Path(path)
    if not p.exists():
        raise FormatError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(str(p))
    except ValueError as exc:
        raise FormatError(f"unreadable WAV file {path}: {exc}")
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[:, None]
    return data.T.copy(), float(rate)


def resample(samples: np.ndarray, rate_in: float, rate_out: float) -> np.ndarray:
    """Polyphase resampling along the last axis; exact rational ratio."""
    if rate_in == rate_out:
        return samples
    g = np.gcd(int(round(rate_in)), int(round(rate_out)))
    up, down = int(round(rate_out)) // g, int(round(rate_in)) // g
    return resample_poly(samples, up, down, axis=-1)
