"""Impulse-response assembly: taps + FDN tail + spatialization + audio ops.

The renderer turns a SimulationPlan into a sampled multichannel IR:
image-source taps are placed with 32-tap windowed-sinc fractional delays,
per-band gains route through a linear-phase synthesis bank when they are
not flat, temporal smearing convolves order>=2 taps with seeded
exponential-noise kernels, and the FDN tail crossfades in after the early
reflections. Cross-room scenes compose two stages through the connecting
aperture; coupled volumes add a slower parallel tail mixed to the
configured knee level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import oaconvolve

from .audio_io import read_wav, resample, write_wav
from .bands import DEFAULT_BANDS, N_BANDS
from .dsp import MultibandBank, fractional_delay_bank, place_kernels, smear_kernel
from .errors import ConfigurationError, FormatError, NormalizationError
from .ism import TapList, apply_jitter, enumerate_images, image_taps, reflect_finite_surfaces
from .reverb import couple_volumes, design_fdn, resolve_coupled_mix, run_fdn, shift_tail
from .scene import (
    SPEED_OF_SOUND,
    Aperture,
    CoupledMode,
    OutputMode,
    Pose,
    SimulationPlan,
)
from .spatializer import (
    AnalyticHead,
    HrirSet,
    SpeakerLayout,
    diotic_collapse,
    fdn_channel_directions,
    front_only_gains,
    load_layout,
    vbap_gains,
)

SINC_CENTER = 16          # fractional-delay kernel nominal center
FDN_LINES = 12
CROSSFADE_S = 0.005

#: air attenuation per octave band, dB per meter (20 degC, mid humidity),
#: applied to paths longer than AIR_GATE_M
AIR_DB_PER_M = np.array([0.0, 0.0, 0.0002, 0.0006, 0.0012, 0.0024,
                         0.0059, 0.0207, 0.0727, 0.2])
AIR_GATE_M = 10.0


@dataclass(frozen=True)
class ImpulseResponse:
    """Sampled multichannel IR with rate, layout and provenance."""

    sample_rate: float
    samples: np.ndarray          # (channels, n)
    layout: str                  # binaural | speaker:<name> | diotic
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise FormatError("impulse response contains non-finite samples")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    def to_wav(self, path) -> None:
        write_wav(path, self.samples.astype(np.float32), self.sample_rate)


def default_backend(plan: SimulationPlan, hrir: HrirSet | None = None,
                    layout: SpeakerLayout | None = None):
    if plan.output_mode is OutputMode.LOUDSPEAKER:
        return layout if layout is not None else load_layout("vr_lab")
    return hrir if hrir is not None else AnalyticHead(sample_rate=plan.sample_rate)


# ---------------------------------------------------------------------------
# Tap placement
# ---------------------------------------------------------------------------

def _apply_air_absorption(taps: TapList, enabled: bool) -> np.ndarray:
    gains = taps.band_gains
    if not enabled:
        return gains
    dists = taps.delays * SPEED_OF_SOUND
    far = dists > AIR_GATE_M
    if not np.any(far):
        return gains
    gains = gains.copy()
    atten = 10.0 ** (-AIR_DB_PER_M[None, :] * dists[far, None] / 20.0)
    gains[far] *= atten
    return gains


def _ear_kernel_table(backend, directions: np.ndarray):
    """Kernel pair + placement offset per tap, deduplicated by direction.

    Returns (keys, table) where keys[i] indexes table, and each table entry
    is (left_kernel, right_kernel, offset_samples).
    """
    if isinstance(backend, AnalyticHead):
        # kernels depend only on the lateral component; quantize it
        q = np.clip(((directions[:, 1] + 1.0) * 256).astype(int), 0, 511)
        table = {}
        keys = np.empty(len(directions), dtype=int)
        for i, qi in enumerate(q):
            if qi not in table:
                lateral = qi / 256.0 - 1.0
                d = np.array([np.sqrt(max(0.0, 1 - lateral**2)), lateral, 0.0])
                left, right = backend.kernels_for(d)
                table[qi] = (left, right, backend.base_delay)
            keys[i] = qi
        return keys, table
    if isinstance(backend, HrirSet):
        keys = np.array([backend.nearest(d) for d in directions])
        table = {}
        for k in np.unique(keys):
            table[int(k)] = (backend.left[k], backend.right[k], 0)
        return keys, table
    raise ConfigurationError(f"no ear kernels for backend {type(backend).__name__}")


def _tap_time_kernels(taps: TapList, plan_seed: int, smearing: bool, fs: float):
    """Per-tap time kernel (fractional sinc, optionally smeared) + offsets.

    Returns a list of (kernel, start_offset) aligned with the tap order;
    start_offset is relative to floor(delay_samples).
    """
    delays = taps.delays * fs
    ints = np.floor(delays).astype(int)
    fracs = delays - ints
    sincs = fractional_delay_bank(fracs)
    kernels = []
    for i in range(len(taps)):
        k = sincs[i]
        if smearing and taps.smear[i]:
            rng = np.random.default_rng(
                np.random.SeedSequence([plan_seed & 0xFFFFFFFF, 0x53EA, i])
            )
            dur = 0.001 * int(taps.orders[i])
            k = np.convolve(k, smear_kernel(dur, fs, rng))
        kernels.append(k)
    return ints, kernels


def _render_taps(
    taps: TapList,
    backend,
    length: int,
    plan: SimulationPlan,
    omni: bool = False,
    front_only: bool = False,
) -> np.ndarray:
    """Place every tap into the output buffers for the chosen backend."""
    fs = plan.sample_rate
    gains = _apply_air_absorption(taps, plan.air_absorption)
    flat = gains.max(axis=1) - gains.min(axis=1) <= 1e-12 * gains.max(axis=1)
    scalar = gains.mean(axis=1)
    ints, kernels = _tap_time_kernels(taps, plan.seed, plan.smearing, fs)

    if omni:
        out = np.zeros((1, length))
        chans = [(np.ones(1), 0)]
        gain_vectors = np.ones((len(taps), 1))
    elif isinstance(backend, SpeakerLayout):
        out = np.zeros((backend.n_speakers, length))
        if front_only:
            fg = front_only_gains(backend)
            gain_vectors = np.tile(fg, (len(taps), 1))
        else:
            gain_vectors = np.stack([
                vbap_gains(backend, d)[0] for d in taps.directions
            ])
    else:
        out = np.zeros((2, length))
        keys, table = _ear_kernel_table(backend, taps.directions)

    bank = MultibandBank(fs) if not np.all(flat) else None
    band_buffers = None

    for i in range(len(taps)):
        time_kernel = kernels[i]
        start = ints[i] - SINC_CENTER

        if omni or isinstance(backend, SpeakerLayout):
            targets = np.nonzero(gain_vectors[i] > 1e-12)[0]
            if flat[i]:
                for ch in targets:
                    _add(out[ch], start, time_kernel * (scalar[i] * gain_vectors[i][ch]))
            else:
                if band_buffers is None:
                    band_buffers = np.zeros((out.shape[0], N_BANDS, length))
                for ch in targets:
                    for b in range(N_BANDS):
                        _add(band_buffers[ch, b], start,
                             time_kernel * (gains[i, b] * gain_vectors[i][ch]))
        else:
            left, right, offset = table[int(keys[i])]
            kl = np.convolve(time_kernel, left)
            kr = np.convolve(time_kernel, right)
            if flat[i]:
                _add(out[0], start - offset, kl * scalar[i])
                _add(out[1], start - offset, kr * scalar[i])
            else:
                if band_buffers is None:
                    band_buffers = np.zeros((2, N_BANDS, length))
                for b in range(N_BANDS):
                    _add(band_buffers[0, b], start - offset, kl * gains[i, b])
                    _add(band_buffers[1, b], start - offset, kr * gains[i, b])

    if band_buffers is not None:
        for ch in range(out.shape[0]):
            shaped = oaconvolve(band_buffers[ch], bank.kernels, axes=1)
            summed = shaped.sum(axis=0)
            out[ch] += summed[bank.group_delay : bank.group_delay + length]
    return out


def _add(buffer: np.ndarray, start: int, kernel: np.ndarray) -> None:
    k0 = max(0, -start)
    k1 = min(len(kernel), len(buffer) - start)
    if k1 > k0:
        buffer[start + k0 : start + k1] += kernel[k0:k1]


# ---------------------------------------------------------------------------
# Tail rendering
# ---------------------------------------------------------------------------

def _spatialize_tail(tail: np.ndarray, backend, length: int,
                     front_only: bool = False) -> np.ndarray:
    """Mix N decorrelated FDN channels through fixed uniform directions."""
    n = tail.shape[0]
    dirs = fdn_channel_directions(n)
    if isinstance(backend, SpeakerLayout):
        out = np.zeros((backend.n_speakers, length))
        for i in range(n):
            g = front_only_gains(backend) if front_only else vbap_gains(backend, dirs[i])[0]
            targets = np.nonzero(g > 1e-12)[0]
            seg = tail[i, :length]
            for ch in targets:
                out[ch, : len(seg)] += g[ch] * seg
        return out
    out = np.zeros((2, length))
    for i in range(n):
        left, right, offset = _single_kernel(backend, dirs[i])
        lo = oaconvolve(tail[i], left)[offset : offset + length]
        ro = oaconvolve(tail[i], right)[offset : offset + length]
        out[0, : len(lo)] += lo
        out[1, : len(ro)] += ro
    return out


def _single_kernel(backend, direction):
    if isinstance(backend, AnalyticHead):
        left, right = backend.kernels_for(direction)
        return left, right, backend.base_delay
    left, right = backend.kernels_for(direction)
    return left, right, 0


def _crossfade_in(signal: np.ndarray, onset: int, fs: float) -> np.ndarray:
    ramp_len = int(CROSSFADE_S * fs)
    n = signal.shape[-1]
    envelope = np.ones(n)
    envelope[: min(onset, n)] = 0.0
    if onset < n and ramp_len > 0:
        end = min(onset + ramp_len, n)
        t = np.arange(end - onset) / ramp_len
        envelope[onset:end] = 0.5 * (1.0 - np.cos(np.pi * t))
    return signal * envelope


def _fdn_onset_s(direct_delay_s: float, order: int, volume: float, surface: float) -> float:
    """Diffuse tail start: after the rendered order's early reflections.

    (order + 1) mean free paths past the direct arrival approximates the
    arrival of the last modeled reflection order without stretching to the
    lattice shell's far corner in elongated rooms.
    """
    mean_free_path = 4.0 * volume / surface
    return direct_delay_s + (order + 1) * mean_free_path / SPEED_OF_SOUND + CROSSFADE_S


def _tap_limit_s(direct_delay_s: float, order: int, volume: float, surface: float) -> float:
    """Taps beyond the rendered order's reach duplicate tail energy."""
    return _fdn_onset_s(direct_delay_s, order, volume, surface) + CROSSFADE_S


def _tail_gain(spat_tail: np.ndarray, taps: TapList, backend,
               source_distance_m: float, volume: float, t60: float,
               omni: bool = False, front_only: bool = False) -> float:
    """Scale for the diffuse tail from the classic energy balance.

    Reverberant-to-direct energy ratio equals (r / r_c)^2 with the critical
    distance r_c = 0.057 sqrt(V / T60); the direct energy is taken from the
    actual rendered direct tap (1/r amplitude through its ear kernels or
    gains), the tail energy from the spatialized tail buffers.
    """
    tail_energy = float(np.sum(spat_tail**2))
    if tail_energy <= 0.0:
        return 0.0
    direct_scalar = float(taps.band_gains[0].mean())
    direction = taps.directions[0]
    if omni:
        kernel_energy = 1.0
    elif isinstance(backend, SpeakerLayout):
        kernel_energy = 1.0  # VBAP gains are power-normalized
    else:
        left, right = backend.kernels_for(direction)
        kernel_energy = float(np.sum(left**2) + np.sum(right**2))
    direct_energy = direct_scalar**2 * kernel_energy
    r_c = 0.057 * np.sqrt(volume / t60)
    target = direct_energy * (source_distance_m / r_c) ** 2
    return float(np.sqrt(target / tail_energy))


# ---------------------------------------------------------------------------
# Scene rendering
# ---------------------------------------------------------------------------

def _stage_taps(plan: SimulationPlan, room_id: str, source: Pose, receiver: Pose,
                include_reflectors: bool) -> TapList:
    pr = plan.room(room_id)
    images = enumerate_images(pr.geometry, source, plan.ism_order, absorption=pr.absorption)
    if plan.jitter:
        images = apply_jitter(images, seed=plan.seed)
    if include_reflectors and plan.reflectors:
        extra = reflect_finite_surfaces(source, receiver, plan.reflectors, pr.geometry)
        if len(extra):
            images = images.merged_with(extra)
    return image_taps(images, receiver, c=SPEED_OF_SOUND, fs=plan.sample_rate)


def _door_pose(aperture: Aperture) -> Pose:
    return Pose(position=aperture.center)


def _truncate_taps(taps: TapList, limit_s: float) -> TapList:
    """Drop taps arriving after the FDN onset; the tail models them."""
    keep = taps.delays <= limit_s
    if np.all(keep):
        return taps
    return TapList(
        sample_rate=taps.sample_rate,
        delays=taps.delays[keep],
        directions=taps.directions[keep],
        band_gains=taps.band_gains[keep],
        orders=taps.orders[keep],
        smear=taps.smear[keep],
    )


def plan_taps(plan: SimulationPlan) -> TapList:
    """Diagnostic: the tap list of the receiver-room stage of a plan."""
    if plan.source_room == plan.receiver_room:
        return _stage_taps(plan, plan.receiver_room, plan.source, plan.receiver,
                           plan.include_reflectors)
    door = _door_pose(plan.apertures[0])
    return _stage_taps(plan, plan.receiver_room, door, plan.receiver,
                       plan.include_reflectors)


def _render_single_room(plan: SimulationPlan, backend, length: int) -> np.ndarray:
    taps = _stage_taps(plan, plan.receiver_room, plan.source, plan.receiver,
                       plan.include_reflectors)
    if not plan.fdn:
        return _render_taps(taps, backend, length, plan, front_only=plan.front_only)

    pr = plan.room(plan.receiver_room)
    onset = _fdn_onset_s(float(taps.delays[0]), plan.ism_order,
                         pr.geometry.volume, pr.geometry.surface_area)
    onset = min(onset, float(taps.delays[-1]) + CROSSFADE_S)
    taps = _truncate_taps(taps, onset + CROSSFADE_S)
    out = _render_taps(taps, backend, length, plan, front_only=plan.front_only)
    spec = design_fdn(pr.geometry, pr.target, fs=plan.sample_rate, n_lines=FDN_LINES)
    tail = run_fdn(spec, length / plan.sample_rate, include_coupled=False)
    tail = _crossfade_in(tail, int(onset * plan.sample_rate), plan.sample_rate)
    spat = _spatialize_tail(tail, backend, length, front_only=plan.front_only)
    distance = float(taps.delays[0]) * SPEED_OF_SOUND
    out += spat * _tail_gain(spat, taps, backend, distance,
                             pr.geometry.volume, pr.target.broadband_t30,
                             front_only=plan.front_only)

    if plan.coupled_mode is CoupledMode.FULL and plan.coupled_stage is not None:
        out = _add_coupled_stage(out, plan, backend, length, onset)
    return out


def _add_coupled_stage(assembled: np.ndarray, plan: SimulationPlan, backend,
                       length: int, onset_s: float) -> np.ndarray:
    from .scene import ReverbTarget, RoomGeometry

    stage = plan.coupled_stage
    geom = RoomGeometry(dims=stage.dims)
    spec = design_fdn(geom, ReverbTarget.flat(stage.t60), fs=plan.sample_rate,
                      n_lines=FDN_LINES)
    raw = run_fdn(spec, length / plan.sample_rate)
    raw = _crossfade_in(raw, int(onset_s * plan.sample_rate), plan.sample_rate)
    coupled = _spatialize_tail(raw, backend, length, front_only=plan.front_only)

    gain, shift = resolve_coupled_mix(
        main_energy=np.sum(assembled**2, axis=0),
        coupled_energy=np.sum(coupled**2, axis=0),
        fs=plan.sample_rate,
        knee_db=stage.knee_db,
    )
    return assembled + gain * shift_tail(coupled, shift)


def _render_cross_room(plan: SimulationPlan, backend, length: int) -> np.ndarray:
    if not plan.apertures:
        raise ConfigurationError("cross-room rendering needs an aperture")
    door = _door_pose(plan.apertures[0])
    fs = plan.sample_rate

    if plan.coupled_mode is CoupledMode.CASCADE:
        stage1, stage2 = render_cascade_stages(plan, backend, length)
        out = np.stack([
            oaconvolve(stage2[ch], stage1[0])[:length] for ch in range(stage2.shape[0])
        ])
        return out

    # FULL mode: early two-stage composition + receiver-room tail
    # with the source room's slower tail as the coupled stage
    taps1 = _stage_taps(plan, plan.source_room, plan.source, door, False)
    taps2 = _stage_taps(plan, plan.receiver_room, door, plan.receiver,
                        plan.include_reflectors)
    if plan.fdn:
        pr1 = plan.room(plan.source_room)
        taps1 = _truncate_taps(taps1, _tap_limit_s(
            float(taps1.delays[0]), plan.ism_order,
            pr1.geometry.volume, pr1.geometry.surface_area))
        pr2 = plan.room(plan.receiver_room)
        taps2 = _truncate_taps(taps2, _tap_limit_s(
            float(taps2.delays[0]), plan.ism_order,
            pr2.geometry.volume, pr2.geometry.surface_area))
    early1 = _render_taps(taps1, backend, length, plan, omni=True)
    early2 = _render_taps(taps2, backend, length, plan, front_only=plan.front_only)
    out = np.stack([
        oaconvolve(early2[ch], early1[0])[:length] for ch in range(early2.shape[0])
    ])
    if not plan.fdn:
        return out

    pr = plan.room(plan.receiver_room)
    direct_total = float(taps1.delays[0]) + float(taps2.delays[0])
    onset = _fdn_onset_s(direct_total, plan.ism_order,
                         pr.geometry.volume, pr.geometry.surface_area)
    spec = design_fdn(pr.geometry, pr.target, fs=fs, n_lines=FDN_LINES)
    tail = run_fdn(spec, length / fs, include_coupled=False)
    tail = _crossfade_in(tail, int(onset * fs), fs)
    spat = _spatialize_tail(tail, backend, length, front_only=plan.front_only)
    # the door radiates the source room's total energy (direct plus its
    # diffuse field) into the receiver room
    r2 = float(taps2.delays[0]) * SPEED_OF_SOUND
    g = _tail_gain(spat, taps2, backend, r2, pr.geometry.volume,
                   pr.target.broadband_t30, front_only=plan.front_only)
    pr1 = plan.room(plan.source_room)
    r1 = float(taps1.delays[0]) * SPEED_OF_SOUND
    r_c1 = 0.057 * np.sqrt(pr1.geometry.volume / pr1.target.broadband_t30)
    feed = (1.0 / r1**2) * (1.0 + (r1 / r_c1) ** 2)
    out += spat * (g * np.sqrt(feed))

    if plan.coupled_stage is not None:
        out = _add_coupled_stage(out, plan, backend, length, onset)
    return out


def render_cascade_stages(plan: SimulationPlan, backend=None, length: int | None = None):
    """The two cascade stages: source room to door (omni), door to receiver.

    Exposed so the composition invariant (cascade == convolution of the
    stages) is directly testable.
    """
    if backend is None:
        backend = default_backend(plan)
    if length is None:
        length = int(round(plan.tail_seconds * plan.sample_rate))
    door = _door_pose(plan.apertures[0])
    fs = plan.sample_rate

    stage1_taps = _stage_taps(plan, plan.source_room, plan.source, door, False)
    if plan.fdn:
        pr1 = plan.room(plan.source_room)
        onset1 = _fdn_onset_s(float(stage1_taps.delays[0]), plan.ism_order,
                              pr1.geometry.volume, pr1.geometry.surface_area)
        stage1_taps = _truncate_taps(stage1_taps, _tap_limit_s(
            float(stage1_taps.delays[0]), plan.ism_order,
            pr1.geometry.volume, pr1.geometry.surface_area))
    stage1 = _render_taps(stage1_taps, backend, length, plan, omni=True)
    if plan.fdn:
        spec1 = design_fdn(pr1.geometry, pr1.target, fs=fs, n_lines=FDN_LINES)
        tail1 = run_fdn(spec1, length / fs, include_coupled=False)
        tail1 = _crossfade_in(tail1, int(onset1 * fs), fs)[:1]  # one decorrelated line
        r1 = float(stage1_taps.delays[0]) * SPEED_OF_SOUND
        g1 = _tail_gain(tail1, stage1_taps, backend, r1, pr1.geometry.volume,
                        pr1.target.broadband_t30, omni=True)
        stage1 = stage1 + g1 * tail1

    stage2_taps = _stage_taps(plan, plan.receiver_room, door, plan.receiver,
                              plan.include_reflectors)
    if plan.fdn:
        pr2 = plan.room(plan.receiver_room)
        onset2 = _fdn_onset_s(float(stage2_taps.delays[0]), plan.ism_order,
                              pr2.geometry.volume, pr2.geometry.surface_area)
        stage2_taps = _truncate_taps(stage2_taps, _tap_limit_s(
            float(stage2_taps.delays[0]), plan.ism_order,
            pr2.geometry.volume, pr2.geometry.surface_area))
    stage2 = _render_taps(stage2_taps, backend, length, plan,
                          front_only=plan.front_only)
    if plan.fdn:
        spec2 = design_fdn(pr2.geometry, pr2.target, fs=fs, n_lines=FDN_LINES)
        tail2 = run_fdn(spec2, length / fs, include_coupled=False)
        tail2 = _crossfade_in(tail2, int(onset2 * fs), fs)
        spat2 = _spatialize_tail(tail2, backend, length, front_only=plan.front_only)
        r2 = float(stage2_taps.delays[0]) * SPEED_OF_SOUND
        g2 = _tail_gain(spat2, stage2_taps, backend, r2, pr2.geometry.volume,
                        pr2.target.broadband_t30, front_only=plan.front_only)
        stage2 = stage2 + g2 * spat2
    return stage1, stage2


def synthesize_ir(plan: SimulationPlan, hrir: HrirSet | None = None,
                  layout: SpeakerLayout | None = None) -> ImpulseResponse:
    """Render the full impulse response for a simulation plan.

    Deterministic: the plan digest and seed fully determine the output.
    """
    backend = default_backend(plan, hrir=hrir, layout=layout)
    if plan.output_mode is not OutputMode.LOUDSPEAKER and isinstance(backend, SpeakerLayout):
        raise ConfigurationError("headphone output modes cannot use a speaker layout")
    if plan.output_mode is OutputMode.LOUDSPEAKER and not isinstance(backend, SpeakerLayout):
        raise ConfigurationError("loudspeaker output mode needs a speaker layout")

    length = int(round(plan.tail_seconds * plan.sample_rate))
    if plan.source_room == plan.receiver_room:
        samples = _render_single_room(plan, backend, length)
    else:
        samples = _render_cross_room(plan, backend, length)

    if plan.output_mode is OutputMode.DIOTIC:
        samples = diotic_collapse(samples)
        layout_tag = "diotic"
    elif plan.output_mode is OutputMode.LOUDSPEAKER:
        layout_tag = f"speaker:{backend.name}"
    else:
        layout_tag = "binaural"

    return ImpulseResponse(
        sample_rate=plan.sample_rate,
        samples=samples,
        layout=layout_tag,
        provenance={
            "plan_digest": plan.digest(),
            "scene": plan.scene_name,
            "preset": plan.preset.value,
            "seed": plan.seed,
            "plan": json.loads(plan.to_json()),
        },
    )


# ---------------------------------------------------------------------------
# Signal operations
# ---------------------------------------------------------------------------

def convolve(stimulus, ir: ImpulseResponse) -> np.ndarray:
    """Render a stimulus through an IR (partitioned FFT convolution).

    Output is (channels, len(signal) + len(ir) - 1).
    """
    samples = stimulus.samples if hasattr(stimulus, "samples") else np.asarray(stimulus)
    rate = getattr(stimulus, "sample_rate", ir.sample_rate)
    if rate != ir.sample_rate:
        raise FormatError(f"stimulus rate {rate} != IR rate {ir.sample_rate}")
    if samples.ndim != 1:
        raise FormatError("stimulus must be mono")
    return np.stack([oaconvolve(samples, ch) for ch in ir.samples])


def ingest_measured(path, label: str, session_rate: float = 44100.0) -> ImpulseResponse:
    """Register an externally measured two-channel BRIR file.

    Files at other rates are resampled to the session rate and flagged in
    the provenance.
    """
    samples, rate = read_wav(path)
    if samples.shape[0] != 2:
        raise FormatError(
            f"measured BRIRs must have exactly 2 channels, got {samples.shape[0]}"
        )
    resampled = False
    if rate != session_rate:
        samples = resample(samples, rate, session_rate)
        resampled = True
    return ImpulseResponse(
        sample_rate=session_rate,
        samples=samples,
        layout="binaural",
        provenance={
            "source": "measured",
            "label": label,
            "original_rate": rate,
            "resampled": resampled,
        },
    )


def normalize_loudness(rendered: list[np.ndarray]) -> np.ndarray:
    """Per-stimulus gains equalizing RMS over each signal's active region.

    The active region spans the first to last sample above -60 dB of the
    signal's own peak. Raises NormalizationError on silent input.
    """
    rms = np.empty(len(rendered))
    for i, sig in enumerate(rendered):
        mono = np.asarray(sig)
        if mono.ndim > 1:
            mono = mono.mean(axis=0)
        peak = np.max(np.abs(mono))
        if peak <= 0:
            raise NormalizationError(f"stimulus {i} is silent")
        active = np.nonzero(np.abs(mono) > peak * 1e-3)[0]
        segment = mono[active[0] : active[-1] + 1]
        rms[i] = np.sqrt(np.mean(segment**2))
    return rms.max() / rms
