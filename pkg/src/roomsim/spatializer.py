"""Direction rendering backends: HRIR sets, an analytic head, VBAP layouts.

Directions are unit vectors in the head frame (x front, y left, z up).
Azimuth is counterclockwise from front (+90 deg = left), elevation positive
upward. Three backends render a direction: measured HRIR pairs
(nearest-direction lookup), an analytic head model (Woodworth ITD plus a
first-order head shadow), and loudspeaker gain vectors (VBAP over the
triangulated layout).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly
from scipy.spatial import ConvexHull, cKDTree

from .dsp import fractional_delay_kernel
from .errors import CoverageError, FormatError, SceneFormatError, ValidationError
from .scene import SPEED_OF_SOUND

HEAD_RADIUS_M = 0.0875
MAX_COVERAGE_GAP_DEG = 15.0


def direction_from_angles(az_deg: float, el_deg: float) -> np.ndarray:
    az, el = np.radians(az_deg), np.radians(el_deg)
    return np.array([
        np.cos(el) * np.cos(az),
        np.cos(el) * np.sin(az),
        np.sin(el),
    ])


def angles_from_direction(d) -> tuple[float, float]:
    d = np.asarray(d, dtype=float)
    az = np.degrees(np.arctan2(d[1], d[0]))
    el = np.degrees(np.arcsin(np.clip(d[2], -1.0, 1.0)))
    return float(az), float(el)


# ---------------------------------------------------------------------------
# HRIR sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HrirSet:
    """Direction-indexed left/right impulse response pairs, one rate."""

    sample_rate: float
    directions_deg: np.ndarray   # (n, 2) azimuth/elevation
    left: np.ndarray             # (n, taps)
    right: np.ndarray            # (n, taps)

    def __post_init__(self):
        n = len(self.directions_deg)
        if self.left.shape != self.right.shape or self.left.shape[0] != n:
            raise ValidationError("HRIR arrays must share (n_directions, n_taps)")
        gap = coverage_gap_deg(self.directions_deg)
        if gap > MAX_COVERAGE_GAP_DEG:
            raise CoverageError(
                f"direction coverage gap {gap:.1f} deg exceeds {MAX_COVERAGE_GAP_DEG} deg"
            )
        vecs = np.stack([direction_from_angles(a, e) for a, e in self.directions_deg])
        object.__setattr__(self, "_tree", cKDTree(vecs))

    def nearest(self, direction) -> int:
        d = np.asarray(direction, dtype=float)
        return int(self._tree.query(d / np.linalg.norm(d))[1])

    def kernels_for(self, direction) -> tuple[np.ndarray, np.ndarray]:
        """Left/right impulse responses of the nearest measured direction."""
        i = self.nearest(direction)
        return self.left[i], self.right[i]


def coverage_gap_deg(directions_deg: np.ndarray, probes: int = 500) -> float:
    """Largest angle from any probe direction to its nearest set member."""
    vecs = np.stack([direction_from_angles(a, e) for a, e in directions_deg])
    tree = cKDTree(vecs)
    # Fibonacci sphere probe grid
    i = np.arange(probes) + 0.5
    phi = np.arccos(1 - 2 * i / probes)
    theta = np.pi * (1 + 5**0.5) * i
    probe = np.stack([
        np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)
    ], axis=1)
    chord, _ = tree.query(probe)
    return float(np.degrees(2 * np.arcsin(np.clip(chord / 2, 0, 1))).max())


def load_hrir(path, session_rate: float | None = None) -> HrirSet:
    """Load an HRIR set from AES69/SOFA (HDF5) or the documented .npz fallback.

    The .npz fallback stores ``rate`` (scalar), ``directions`` (n, 2) in
    degrees azimuth/elevation, and ``left``/``right`` (n, taps). Sets whose
    rate differs from ``session_rate`` are resampled with a polyphase
    resampler.
    """
    p = Path(path)
    if not p.exists():
        raise FormatError(f"HRIR file not found: {path}")
    if p.suffix.lower() == ".sofa":
        rate, dirs, left, right = _read_sofa(p)
    elif p.suffix.lower() == ".npz":
        data = np.load(p)
        try:
            rate = float(np.asarray(data["rate"]).ravel()[0])
            dirs = np.asarray(data["directions"], dtype=float)
            left = np.asarray(data["left"], dtype=float)
            right = np.asarray(data["right"], dtype=float)
        except KeyError as exc:
            raise FormatError(f"HRIR npz missing field {exc}")
    else:
        raise FormatError(f"unsupported HRIR container '{p.suffix}' (use .sofa or .npz)")

    if session_rate is not None and session_rate != rate:
        up, down = (np.array([session_rate, rate]) / np.gcd(
            int(session_rate), int(rate)
        )).astype(int)
        left = resample_poly(left, up, down, axis=1)
        right = resample_poly(right, up, down, axis=1)
        rate = float(session_rate)
    return HrirSet(sample_rate=rate, directions_deg=dirs, left=left, right=right)


def _read_sofa(path: Path):
    import h5py

    with h5py.File(path, "r") as f:
        try:
            ir = np.asarray(f["Data.IR"])
            rate = float(np.asarray(f["Data.SamplingRate"]).ravel()[0])
            pos = np.asarray(f["SourcePosition"])
        except KeyError as exc:
            raise FormatError(f"SOFA file missing dataset {exc}")
    if ir.ndim != 3 or ir.shape[1] < 2:
        raise FormatError("SOFA Data.IR must be (measurements, 2 receivers, taps)")
    dirs = pos[:, :2].astype(float)  # azimuth, elevation in degrees
    return rate, dirs, ir[:, 0, :].astype(float), ir[:, 1, :].astype(float)


# ---------------------------------------------------------------------------
# Analytic head model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticHead:
    """Spherical-head fallback: Woodworth ITD plus one-pole head shadow.

    Both ear kernels share a base latency of ``base_delay`` samples so the
    interaural difference equals the full ITD; callers placing kernels on a
    timeline subtract ``base_delay``.
    """

    sample_rate: float
    radius_m: float = HEAD_RADIUS_M
    kernel_taps: int = 64
    base_delay: int = 17

    def itd_seconds(self, direction) -> float:
        """Woodworth ITD (a/c)(theta + sin theta); positive = left ear leads."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        lateral = float(np.arcsin(np.clip(d[1], -1.0, 1.0)))
        return (self.radius_m / SPEED_OF_SOUND) * (lateral + np.sin(lateral))

    def kernels_for(self, direction) -> tuple[np.ndarray, np.ndarray]:
        """Per-ear kernels embedding the ITD and the contralateral shadow.

        The shadow applies only on the hemisphere away from the source, so
        a frontal direction yields bit-identical ears.
        """
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        itd = self.itd_seconds(d)
        lag = abs(itd) * self.sample_rate

        kernels = []
        for ear_y in (1.0, -1.0):  # left ear axis +y, right ear axis -y
            toward_ear = float(d[1] * ear_y)
            if abs(toward_ear) < 1e-9:
                toward_ear = 0.0
            delay = self.base_delay + (lag if toward_ear < 0 else 0.0)
            k = _delayed_kernel(delay, self.kernel_taps)
            if toward_ear < 0:
                shadow = _shadow_kernel(-toward_ear, self.sample_rate, self.kernel_taps)
                k = np.convolve(k, shadow)[: self.kernel_taps]
            kernels.append(k)
        return kernels[0], kernels[1]


def _delayed_kernel(delay_samples: float, taps: int) -> np.ndarray:
    """Windowed sinc realizing the given (possibly fractional) delay."""
    n = int(np.floor(delay_samples))
    frac = delay_samples - n
    kernel = np.zeros(taps)
    base = fractional_delay_kernel(frac, 32)  # nominal center at index 16
    start = n - 16
    for i, v in enumerate(base):
        j = start + i
        if 0 <= j < taps:
            kernel[j] += v
    return kernel


def _shadow_kernel(away: float, fs: float, taps: int) -> np.ndarray:
    """One-pole lowpass; ``away`` in (0, 1] is how contralateral the source is.

    Cutoff falls from ~16 kHz (grazing) to ~1.2 kHz (fully opposite side).
    """
    cutoff = 16000.0 * (1.0 - 0.925 * min(1.0, away))
    a = float(np.exp(-2.0 * np.pi * cutoff / fs))
    n = np.arange(taps)
    return (1.0 - a) * a**n


# ---------------------------------------------------------------------------
# Loudspeaker layouts and VBAP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeakerLayout:
    """Named speaker array: unit directions plus distances, triangulated."""

    name: str
    directions: np.ndarray       # (n, 3) unit vectors, file order = channel order
    distances_m: np.ndarray      # (n,)

    def __post_init__(self):
        norms = np.linalg.norm(self.directions, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValidationError("speaker directions must be unit length")
        hull = ConvexHull(self.directions)
        object.__setattr__(self, "triangles", hull.simplices)
        object.__setattr__(self, "_tree", cKDTree(self.directions))
        bases = np.linalg.inv(
            self.directions[hull.simplices].transpose(0, 2, 1)
        )
        object.__setattr__(self, "_bases", bases)

    @property
    def n_speakers(self) -> int:
        return len(self.directions)

    def nearest(self, direction) -> int:
        d = np.asarray(direction, dtype=float)
        return int(self._tree.query(d / np.linalg.norm(d))[1])


def load_layout(path) -> SpeakerLayout:
    """Load a speaker layout JSON ({schema_version, name, speakers:[{az_deg,...}]})."""
    if isinstance(path, str) and path == "vr_lab" and not Path(path).exists():
        text = resources.files("roomsim").joinpath("presets", "vr_lab.json").read_text()
        name_hint = "vr_lab"
    else:
        p = Path(path)
        if not p.exists():
            raise SceneFormatError(f"layout file not found: {path}")
        text = p.read_text()
        name_hint = p.stem
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(exc.msg, line=exc.lineno)
    if data.get("schema_version") != 1:
        raise SceneFormatError("unsupported layout schema_version")
    speakers = data.get("speakers", [])
    if len(speakers) < 4:
        raise ValidationError("a layout needs at least 4 speakers for triangulation")
    dirs = np.stack([
        direction_from_angles(s["az_deg"], s["el_deg"]) for s in speakers
    ])
    dist = np.array([float(s.get("dist_m", 1.0)) for s in speakers])
    return SpeakerLayout(name=data.get("name", name_hint), directions=dirs, distances_m=dist)


def vbap_gains(layout: SpeakerLayout, direction) -> tuple[np.ndarray, bool]:
    """Power-normalized VBAP gains over the layout triangulation.

    Returns (gains, used_fallback). When no triangle yields non-negative
    gains (degenerate direction), falls back to the nearest speaker with
    gain 1 and flags it.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    sols = np.einsum("tij,j->ti", layout._bases, d)
    mins = sols.min(axis=1)
    best_t = int(np.argmax(mins))
    if mins[best_t] >= -1e-9:
        g = np.clip(sols[best_t], 0.0, None)
        gains = np.zeros(layout.n_speakers)
        gains[layout.triangles[best_t]] = g / np.linalg.norm(g)
        return gains, False
    gains = np.zeros(layout.n_speakers)
    gains[layout.nearest(d)] = 1.0
    return gains, True


def front_only_gains(layout: SpeakerLayout) -> np.ndarray:
    """Route everything to the frontal speaker (diotic loudspeaker mode)."""
    gains = np.zeros(layout.n_speakers)
    gains[layout.nearest([1.0, 0.0, 0.0])] = 1.0
    return gains


# ---------------------------------------------------------------------------
# Tap-level dispatch and diotic collapse
# ---------------------------------------------------------------------------

def spatialize_tap(direction, backend):
    """Render one direction through a backend.

    HrirSet / AnalyticHead return a (left, right) kernel pair; SpeakerLayout
    returns (gains, used_fallback).
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if not np.isclose(norm, 1.0, atol=1e-6):
        raise ValidationError("tap direction must be unit length")
    if isinstance(backend, (HrirSet, AnalyticHead)):
        return backend.kernels_for(d)
    if isinstance(backend, SpeakerLayout):
        return vbap_gains(backend, d)
    raise ValidationError(f"unknown spatializer backend {type(backend).__name__}")


def diotic_collapse(stereo: np.ndarray) -> np.ndarray:
    """Return both channels bit-identical to the input's left channel."""
    stereo = np.asarray(stereo)
    if stereo.ndim != 2 or stereo.shape[0] != 2:
        raise FormatError("diotic collapse expects a (2, n) signal")
    return np.stack([stereo[0], stereo[0].copy()])


def fdn_channel_directions(n: int) -> np.ndarray:
    """n approximately uniform unit directions for spatializing FDN channels.

    n=12 uses the icosahedron vertices; other counts use a Fibonacci sphere.
    """
    if n == 12:
        phi = (1 + 5**0.5) / 2
        raw = np.array([
            [0, 1, phi], [0, -1, phi], [0, 1, -phi], [0, -1, -phi],
            [1, phi, 0], [-1, phi, 0], [1, -phi, 0], [-1, -phi, 0],
            [phi, 0, 1], [-phi, 0, 1], [phi, 0, -1], [-phi, 0, -1],
        ], dtype=float)
    else:
        i = np.arange(n) + 0.5
        ph = np.arccos(1 - 2 * i / n)
        th = np.pi * (1 + 5**0.5) * i
        raw = np.stack([
            np.sin(ph) * np.cos(th), np.sin(ph) * np.sin(th), np.cos(ph)
        ], axis=1)
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)
