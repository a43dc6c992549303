"""Octave band layout used everywhere a per-band quantity appears.

Ten octave bands with centers from 31.5 Hz to 16 kHz. Band edges are a
factor sqrt(2) around each center; the top band's upper edge is clipped to
just below Nyquist when filters are designed (see analysis.octave_filterbank).
"""

from dataclasses import dataclass, field

import numpy as np

OCTAVE_CENTERS_HZ = (31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0)
N_BANDS = len(OCTAVE_CENTERS_HZ)

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class BandLayout:
    """Fixed set of octave band centers (Hz)."""

    centers_hz: tuple[float, ...] = field(default=OCTAVE_CENTERS_HZ)

    @property
    def n_bands(self) -> int:
        return len(self.centers_hz)

    def edges_hz(self) -> np.ndarray:
        """(n_bands, 2) array of lower/upper band edges."""
        c = np.asarray(self.centers_hz)
        return np.stack([c / _SQRT2, c * _SQRT2], axis=1)

    def index_of(self, center_hz: float) -> int:
        c = np.asarray(self.centers_hz)
        i = int(np.argmin(np.abs(c - center_hz)))
        if not np.isclose(c[i], center_hz, rtol=1e-6):
            raise ValueError(f"{center_hz} Hz is not a band center of this layout")
        return i


DEFAULT_BANDS = BandLayout()
