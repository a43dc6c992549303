"""Test stimuli: pink pulses, spectral recoloring, and a bundled speech proxy.

The pink pulse is a unit impulse through a linear-phase f^(-1/2) kernel, so
every octave band carries equal energy. Recoloring boosts five randomly
chosen bands by 6 dB and cuts the other five by 6 dB through a
linear-phase partition-of-unity filterbank; the pattern is seeded and
recorded. Speech comes from user-supplied mono files (the matrix-sentence
corpus is licensed); a synthetic spoken-word-like signal ships for CI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import read_wav, resample
from .bands import N_BANDS
from .dsp import MultibandBank, pink_kernel
from .errors import FormatError, ValidationError

RECOLOR_STEP_DB = 6.0
N_BOOST = 5


@dataclass(frozen=True)
class Stimulus:
    """Sampled test signal plus its construction metadata."""

    samples: np.ndarray
    sample_rate: float
    kind: str                          # pink_pulse | pulse_variant | speech
    band_pattern: tuple[int, ...] = () # indices of the +6 dB bands (variants)
    seed: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind == "pulse_variant" and len(self.band_pattern) != N_BOOST:
            raise ValidationError(
                f"a pulse variant must boost exactly {N_BOOST} bands"
            )


def make_pink_pulse(fs: float, length: int = 8192) -> Stimulus:
    """Peak-normalized pulse with a pink (1/f power) spectrum."""
    if length < 4096:
        raise ValidationError("pink pulse needs length >= 4096 samples")
    samples = pink_kernel(fs, length)
    return Stimulus(samples=samples, sample_rate=fs, kind="pink_pulse", label="pulse")


_RECOLOR_BANKS: dict[float, MultibandBank] = {}


def _recolor_bank(fs: float) -> MultibandBank:
    if fs not in _RECOLOR_BANKS:
        _RECOLOR_BANKS[fs] = MultibandBank(fs, filter_taps=16384, xover_octaves=0.1)
    return _RECOLOR_BANKS[fs]


def recolor_pulse(pulse: Stimulus, seed: int) -> Stimulus:
    """Boost a seeded random choice of 5 octave bands by 6 dB, cut the rest.

    Deterministic per seed; the boosted-band indices are recorded in the
    returned Stimulus. Gains are trimmed over a few iterations so the
    octave-band energies measured against the original pulse land on
    exactly +-6 dB (crossover leakage compensated).
    """
    if pulse.kind != "pink_pulse":
        raise ValidationError("recolor_pulse expects a pink_pulse stimulus")
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5EED]))
    boost = tuple(sorted(rng.choice(N_BANDS, size=N_BOOST, replace=False).tolist()))
    return _apply_pattern(pulse, boost, seed)


def _apply_pattern(pulse: Stimulus, boost: tuple[int, ...], seed: int) -> Stimulus:
    from .analysis import band_energies_fft_db

    target_db = np.full(N_BANDS, -RECOLOR_STEP_DB)
    target_db[list(boost)] = +RECOLOR_STEP_DB
    bank = _recolor_bank(pulse.sample_rate)
    base_levels = band_energies_fft_db(pulse.samples, pulse.sample_rate)

    gains_db = target_db.copy()
    out = bank.apply_gains(pulse.samples, gains_db, keep_length=False)
    for _ in range(6):
        measured = band_energies_fft_db(out, pulse.sample_rate) - base_levels
        err = target_db - measured
        if np.max(np.abs(err)) < 0.1:
            break
        gains_db = gains_db + np.clip(err, -3.0, 3.0)
        out = bank.apply_gains(pulse.samples, gains_db, keep_length=False)
    return Stimulus(
        samples=out,
        sample_rate=pulse.sample_rate,
        kind="pulse_variant",
        band_pattern=boost,
        seed=seed,
        label=f"pulse_variant_{seed}",
    )


def make_pulse_variants(pulse: Stimulus, count: int, seed: int) -> list[Stimulus]:
    """``count`` recolored variants with pairwise distinct band patterns.

    Colliding patterns are re-drawn (deterministically, by advancing the
    sub-seed) so each variant sounds distinct.
    """
    variants: list[Stimulus] = []
    seen: set[tuple[int, ...]] = set()
    sub = 0
    while len(variants) < count:
        candidate = recolor_pulse(pulse, seed * 1000 + sub)
        sub += 1
        if candidate.band_pattern in seen:
            continue
        seen.add(candidate.band_pattern)
        variants.append(candidate)
        if sub > 1000:
            raise ValidationError("could not draw distinct recolor patterns")
    return variants


def load_speech(path, fs: float, label: str = "speech") -> Stimulus:
    """Load a user-supplied mono speech file, resampling to the session rate."""
    samples, rate = read_wav(path)
    if samples.shape[0] != 1:
        raise FormatError("speech stimuli must be mono")
    mono = samples[0]
    if rate != fs:
        mono = resample(mono, rate, fs)
    peak = np.max(np.abs(mono))
    if peak > 0:
        mono = mono / peak
    return Stimulus(samples=mono, sample_rate=fs, kind="speech", label=label)


def make_synthetic_speech(fs: float, duration_s: float = 1.6, seed: int = 0) -> Stimulus:
    """Spoken-word-like test signal for CI: vowel bursts with pauses.

    Not speech, but shares its coarse envelope and spectral tilt; used
    where the licensed sentence corpus cannot ship.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x5B]))
    n = int(duration_s * fs)
    out = np.zeros(n)
    t = 0.05
    while t < duration_s - 0.3:
        word_len = rng.uniform(0.12, 0.28)
        f0 = rng.uniform(90.0, 140.0)
        formants = rng.uniform([300, 900, 2200], [800, 1800, 3200])
        start = int(t * fs)
        length = int(word_len * fs)
        tt = np.arange(length) / fs
        env = np.sin(np.pi * tt / word_len) ** 2
        glottal = np.zeros(length)
        for h in range(1, 18):
            glottal += np.sin(2 * np.pi * f0 * h * tt + rng.uniform(0, 2 * np.pi)) / h
        voiced = glottal
        for fmt in formants:
            voiced = voiced + 0.6 * np.sin(2 * np.pi * fmt * tt) * glottal / len(formants)
        out[start : start + length] += env * voiced
        t += word_len + rng.uniform(0.05, 0.15)
    out /= np.max(np.abs(out))
    return Stimulus(samples=out, sample_rate=fs, kind="speech", label="synthetic_speech")
