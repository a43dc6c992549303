"""Scenes: room geometry, acoustic targets, poses, and simulation plans.

A scene file (JSON, ``schema_version: 1``) describes one or two shoebox
rooms with reverberation targets, optional apertures between rooms,
optional finite reflectors near the receiver, optional extra coupled
volumes (for dual-slope decay), and the source/receiver poses. Three
presets ship with the package: ``living_room``, ``pub`` and
``underground``. An ALOD preset (acoustic level of detail) expands a scene
into a concrete, immutable SimulationPlan consumed by the renderer.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

import numpy as np

from .bands import DEFAULT_BANDS, BandLayout, N_BANDS
from .errors import (
    CalibrationError,
    ConfigurationError,
    SceneFormatError,
    ValidationError,
)

SCHEMA_VERSION = 1
SPEED_OF_SOUND = 343.0  # m/s, dry air at ~20 degC

#: Eyring constant: T = 0.161 V / (-S ln(1 - alpha))
_EYRING_K = 0.161

WALL_FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoomGeometry:
    """Axis-aligned shoebox room.

    ``dims`` is (length, width, height) in meters along world x/y/z,
    ``origin`` the corner with the smallest coordinates. ``volume_override``
    lets a scene declare the acoustically effective volume when the real
    room is not a perfect box (the box volume is still ``box_volume``).
    """

    dims: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    volume_override: float | None = None

    def __post_init__(self):
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ValidationError(f"room dimensions must be strictly positive, got {self.dims}")
        if self.volume_override is not None and self.volume_override <= 0:
            raise ValidationError("volume_override must be positive")

    @property
    def box_volume(self) -> float:
        l, w, h = self.dims
        return l * w * h

    @property
    def volume(self) -> float:
        return self.volume_override if self.volume_override is not None else self.box_volume

    @property
    def surface_area(self) -> float:
        l, w, h = self.dims
        return 2.0 * (l * w + l * h + w * h)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float) - np.asarray(self.origin, dtype=float)
        d = np.asarray(self.dims, dtype=float)
        return bool(np.all(p >= -tol) and np.all(p <= d + tol))


@dataclass(frozen=True)
class ReverbTarget:
    """Reverberation time targets per octave band plus a broadband value."""

    t30_per_band: tuple[float, ...]
    broadband_t30: float

    def __post_init__(self):
        if len(self.t30_per_band) != N_BANDS:
            raise ValidationError(
                f"expected {N_BANDS} per-band T30 values, got {len(self.t30_per_band)}"
            )
        if any(t <= 0 for t in self.t30_per_band) or self.broadband_t30 <= 0:
            raise ValidationError("T30 values must be strictly positive")
        lo, hi = min(self.t30_per_band), max(self.t30_per_band)
        if not (lo - 1e-12 <= self.broadband_t30 <= hi + 1e-12):
            raise ValidationError(
                f"broadband T30 {self.broadband_t30} outside per-band range [{lo}, {hi}]"
            )

    @classmethod
    def flat(cls, t30: float) -> "ReverbTarget":
        return cls(t30_per_band=(t30,) * N_BANDS, broadband_t30=t30)


@dataclass(frozen=True)
class AbsorptionProfile:
    """Absorption coefficient per octave band for each of the six walls.

    ``alpha`` has shape (6, n_bands), wall order fixed by WALL_FACES.
    """

    alpha: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (6, N_BANDS):
            raise ValidationError(f"alpha must be (6, {N_BANDS}), got {a.shape}")
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ValidationError("every absorption coefficient must lie in (0, 1)")

    @classmethod
    def uniform(cls, alpha_per_band) -> "AbsorptionProfile":
        row = tuple(float(a) for a in alpha_per_band)
        return cls(alpha=(row,) * 6)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def reflection_factors(self) -> np.ndarray:
        """Per-wall per-band pressure reflection factor sqrt(1 - alpha)."""
        return np.sqrt(1.0 - self.as_array())


@dataclass(frozen=True)
class Aperture:
    """Opening in a wall shared by two rooms (e.g. an open door)."""

    wall: str                      # "room_id/face", face in WALL_FACES
    center: tuple[float, float, float]
    width: float                   # extent along the wall's first in-plane axis
    height: float                  # extent along the wall's second in-plane axis
    connects: tuple[str, str]
    coupling_db: float = -30.0     # level of the other room's late tail, dB below main EDC peak

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("aperture extents must be positive")
        if len(self.connects) != 2 or self.connects[0] == self.connects[1]:
            raise ValidationError("aperture must connect two distinct rooms")


@dataclass(frozen=True)
class FiniteReflector:
    """Rectangular reflecting surface given by center, normal and extents."""

    center: tuple[float, float, float]
    normal: tuple[float, float, float]
    extents: tuple[float, float]          # width along `axis`, height along normal x axis
    alpha_per_band: tuple[float, ...]
    label: str
    axis: tuple[float, float, float] | None = None  # first in-plane axis; derived when omitted

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if not math.isclose(float(np.linalg.norm(n)), 1.0, abs_tol=1e-6):
            raise ValidationError(f"reflector '{self.label}' normal must be unit length")
        if any(e <= 0 for e in self.extents):
            raise ValidationError(f"reflector '{self.label}' extents must be positive")
        if len(self.alpha_per_band) != N_BANDS:
            raise ValidationError(f"reflector '{self.label}' needs {N_BANDS} absorption values")
        if any(a < 0 or a >= 1 for a in self.alpha_per_band):
            raise ValidationError(f"reflector '{self.label}' absorption must lie in [0, 1)")

    def in_plane_axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal (u, v) spanning the rectangle; u = declared axis if any."""
        n = np.asarray(self.normal, dtype=float)
        if self.axis is not None:
            u = np.asarray(self.axis, dtype=float)
            u = u - np.dot(u, n) * n
            norm = np.linalg.norm(u)
            if norm < 1e-9:
                raise ValidationError(f"reflector '{self.label}' axis parallel to normal")
            u = u / norm
        else:
            ref = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
            u = np.cross(ref, n)
            u = u / np.linalg.norm(u)
        v = np.cross(n, u)
        return u, v

    def reflection_gains(self) -> np.ndarray:
        return np.sqrt(1.0 - np.asarray(self.alpha_per_band, dtype=float))


@dataclass(frozen=True)
class Pose:
    """Position plus yaw/pitch orientation.

    World frame is right-handed: x front, y left, z up. Yaw rotates
    counterclockwise (toward +y) about +z; pitch tilts the nose up.
    """

    position: tuple[float, float, float]
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0

    def rotation(self) -> np.ndarray:
        """Head-to-world rotation matrix."""
        cy, sy = math.cos(math.radians(self.yaw_deg)), math.sin(math.radians(self.yaw_deg))
        cp, sp = math.cos(math.radians(self.pitch_deg)), math.sin(math.radians(self.pitch_deg))
        rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        # nose-up pitch rotates +x toward +z
        ry = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
        return rz @ ry

    def to_head_frame(self, world_vec: np.ndarray) -> np.ndarray:
        return self.rotation().T @ np.asarray(world_vec, dtype=float)


class AlodPreset(enum.Enum):
    """Acoustic level-of-detail tiers, highest to lowest, plus diotic."""

    RAZR_FULL = "razr"
    RAZR_1ST_ORDER = "razr1"
    RAZR_SIMPLE = "simple"
    PLAIN_ISM = "ism"
    DIOTIC = "diotic"

    @classmethod
    def parse(cls, name: str) -> "AlodPreset":
        name = name.strip().lower()
        for preset in cls:
            if preset.value == name or preset.name.lower() == name:
                return preset
        raise ValidationError(
            f"unknown ALOD preset '{name}' (choose from {[p.value for p in cls]})"
        )


@dataclass(frozen=True)
class CoupledVolume:
    """Extra reverberant volume feeding a slower second decay (e.g. tunnels)."""

    dims: tuple[float, float, float]
    t60: float
    knee_db: float
    label: str = "coupled"

    def __post_init__(self):
        if any(d <= 0 for d in self.dims) or self.t60 <= 0:
            raise ValidationError("coupled volume dims and t60 must be positive")
        if self.knee_db >= 0:
            raise ValidationError("coupled volume knee level must be negative dB")


@dataclass(frozen=True)
class SceneConfig:
    """Validated scene: rooms, connections, reflectors, poses, targets."""

    name: str
    rooms: dict[str, RoomGeometry]
    targets: dict[str, ReverbTarget]
    source: Pose
    receiver: Pose
    apertures: tuple[Aperture, ...] = ()
    reflectors: tuple[FiniteReflector, ...] = ()
    coupled_volume: CoupledVolume | None = None
    simple_feature: str | None = None   # which feature the RazrSimple tier drops
    bands: BandLayout = field(default=DEFAULT_BANDS)

    @property
    def source_room(self) -> str:
        return _room_of(self, self.source, "source")

    @property
    def receiver_room(self) -> str:
        return _room_of(self, self.receiver, "receiver")


def _room_of(scene: SceneConfig, pose: Pose, label: str) -> str:
    hits = [rid for rid, room in scene.rooms.items() if room.contains(pose.position)]
    if len(hits) != 1:
        raise ValidationError(
            f"{label} position {pose.position} must lie inside exactly one room, found {hits}"
        )
    return hits[0]


# ---------------------------------------------------------------------------
# Simulation plan
# ---------------------------------------------------------------------------

class CoupledMode(enum.Enum):
    FULL = "full"        # parallel slower tail mixed at the configured knee level
    CASCADE = "cascade"  # strict two-stage convolution through the (closed) door
    OFF = "off"


class OutputMode(enum.Enum):
    BINAURAL = "binaural"
    LOUDSPEAKER = "loudspeaker"
    DIOTIC = "diotic"    # binaural render collapsed to two identical channels


@dataclass(frozen=True)
class PlanRoom:
    """Per-room slice of a plan: geometry, target, calibrated absorption."""

    room_id: str
    geometry: RoomGeometry
    target: ReverbTarget
    absorption: AbsorptionProfile


@dataclass(frozen=True)
class CoupledStagePlan:
    dims: tuple[float, float, float]
    t60: float
    knee_db: float
    label: str


@dataclass(frozen=True)
class SimulationPlan:
    """Everything the renderer needs, resolved and immutable."""

    scene_name: str
    preset: AlodPreset
    rooms: tuple[PlanRoom, ...]
    source: Pose
    source_room: str
    receiver: Pose
    receiver_room: str
    ism_order: int
    jitter: bool
    smearing: bool
    fdn: bool
    coupled_mode: CoupledMode
    coupled_stage: CoupledStagePlan | None
    include_reflectors: bool
    reflectors: tuple[FiniteReflector, ...]
    apertures: tuple[Aperture, ...]
    output_mode: OutputMode
    front_only: bool          # loudspeaker diotic: route everything to the frontal speaker
    sample_rate: float
    tail_seconds: float
    seed: int
    air_absorption: bool

    def room(self, room_id: str) -> PlanRoom:
        for pr in self.rooms:
            if pr.room_id == room_id:
                return pr
        raise KeyError(room_id)

    def digest(self) -> str:
        """Stable content hash; two plans with equal digests render identically."""
        payload = asdict(self)
        payload["preset"] = self.preset.value
        payload["coupled_mode"] = self.coupled_mode.value
        payload["output_mode"] = self.output_mode.value
        blob = json.dumps(payload, sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_json(self) -> str:
        payload = asdict(self)
        payload["preset"] = self.preset.value
        payload["coupled_mode"] = self.coupled_mode.value
        payload["output_mode"] = self.output_mode.value
        return json.dumps(payload, sort_keys=True, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def calibrate_absorption(geometry: RoomGeometry, target: ReverbTarget) -> AbsorptionProfile:
    """Invert the Eyring relation to a uniform per-band absorption.

    alpha(band) = 1 - exp(-0.161 V / (S * T30(band))). Raises
    CalibrationError when the target is unreachable for this geometry
    (alpha would leave (0, 1)).
    """
    v, s = geometry.volume, geometry.surface_area
    t30 = np.asarray(target.t30_per_band, dtype=float)
    alpha = 1.0 - np.exp(-_EYRING_K * v / (s * t30))
    if np.any(alpha <= 0.0) or np.any(alpha >= 1.0):
        raise CalibrationError(
            f"target T30 {target.t30_per_band} unreachable for V={v:.1f} m^3, S={s:.1f} m^2"
        )
    return AbsorptionProfile.uniform(alpha)


def eyring_t30(geometry: RoomGeometry, absorption: AbsorptionProfile) -> np.ndarray:
    """Forward Eyring T30 per band for a uniform-by-wall absorption profile."""
    a = absorption.as_array()
    mean_alpha = a.mean(axis=0)  # walls share the same alpha for calibrated profiles
    return _EYRING_K * geometry.volume / (-geometry.surface_area * np.log(1.0 - mean_alpha))


def _find_wall(scene_rooms: dict[str, RoomGeometry], wall: str) -> tuple[str, str]:
    try:
        room_id, face = wall.split("/")
    except ValueError:
        raise ValidationError(f"wall reference '{wall}' must look like 'room_id/face'")
    if room_id not in scene_rooms:
        raise ValidationError(f"wall reference '{wall}' names unknown room '{room_id}'")
    if face not in WALL_FACES:
        raise ValidationError(f"wall face '{face}' not one of {WALL_FACES}")
    return room_id, face


def _validate_aperture(scene_rooms: dict[str, RoomGeometry], ap: Aperture) -> None:
    room_id, face = _find_wall(scene_rooms, ap.wall)
    room = scene_rooms[room_id]
    axis = "xyz".index(face[0])
    origin = np.asarray(room.origin)
    dims = np.asarray(room.dims)
    plane = origin[axis] + (dims[axis] if face[1] == "+" else 0.0)
    c = np.asarray(ap.center, dtype=float)
    if not math.isclose(c[axis], plane, abs_tol=1e-6):
        raise ValidationError(
            f"aperture center {ap.center} not on wall plane {face[0]}={plane:.3f}"
        )
    in_plane = [i for i in range(3) if i != axis]
    half = (ap.width / 2.0, ap.height / 2.0)
    for (i, h) in zip(in_plane, half):
        lo, hi = origin[i], origin[i] + dims[i]
        if c[i] - h < lo - 1e-6 or c[i] + h > hi + 1e-6:
            raise ValidationError(
                f"aperture rectangle exceeds wall bounds along axis {'xyz'[i]}"
            )
    for rid in ap.connects:
        if rid not in scene_rooms:
            raise ValidationError(f"aperture connects unknown room '{rid}'")


def _parse_reverb_target(spec, where: str) -> ReverbTarget:
    if isinstance(spec, (int, float)):
        return ReverbTarget.flat(float(spec))
    if isinstance(spec, dict):
        broadband = spec.get("broadband")
        per_band = spec.get("per_band")
        if per_band is None and broadband is None:
            raise SceneFormatError(f"{where}: t30 needs 'broadband' and/or 'per_band'")
        if per_band is None:
            return ReverbTarget.flat(float(broadband))
        per_band = tuple(float(t) for t in per_band)
        if broadband is None:
            broadband = float(np.mean(per_band))
        return ReverbTarget(t30_per_band=per_band, broadband_t30=float(broadband))
    raise SceneFormatError(f"{where}: t30 must be a number or an object")


def _parse_pose(spec, where: str) -> Pose:
    try:
        return Pose(
            position=tuple(float(v) for v in spec["position"]),
            yaw_deg=float(spec.get("yaw_deg", 0.0)),
            pitch_deg=float(spec.get("pitch_deg", 0.0)),
        )
    except (KeyError, TypeError) as exc:
        raise SceneFormatError(f"{where}: bad pose ({exc})")


def parse_scene(data: dict, name_hint: str = "scene") -> SceneConfig:
    """Build and validate a SceneConfig from already-parsed JSON data."""
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SceneFormatError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"
        )
    name = data.get("name", name_hint)

    rooms: dict[str, RoomGeometry] = {}
    targets: dict[str, ReverbTarget] = {}
    for spec in data.get("rooms", []):
        rid = spec.get("id")
        if not rid:
            raise SceneFormatError("every room needs an 'id'")
        rooms[rid] = RoomGeometry(
            dims=tuple(float(d) for d in spec["dims"]),
            origin=tuple(float(o) for o in spec.get("origin", (0.0, 0.0, 0.0))),
            volume_override=(
                float(spec["volume"]) if spec.get("volume") is not None else None
            ),
        )
        targets[rid] = _parse_reverb_target(spec.get("t30"), f"room '{rid}'")
    if not rooms:
        raise SceneFormatError("scene has no rooms")

    apertures = tuple(
        Aperture(
            wall=spec["wall"],
            center=tuple(float(v) for v in spec["center"]),
            width=float(spec["width"]),
            height=float(spec["height"]),
            connects=tuple(spec["connects"]),
            coupling_db=float(spec.get("coupling_db", -30.0)),
        )
        for spec in data.get("apertures", [])
    )
    for ap in apertures:
        _validate_aperture(rooms, ap)

    reflectors = tuple(
        FiniteReflector(
            center=tuple(float(v) for v in spec["center"]),
            normal=tuple(float(v) for v in spec["normal"]),
            extents=tuple(float(v) for v in spec["extents"]),
            alpha_per_band=tuple(float(a) for a in spec["alpha_per_band"]),
            label=spec.get("label", "reflector"),
            axis=tuple(float(v) for v in spec["axis"]) if spec.get("axis") else None,
        )
        for spec in data.get("reflectors", [])
    )

    coupled = None
    if data.get("coupled_volume"):
        spec = data["coupled_volume"]
        coupled = CoupledVolume(
            dims=tuple(float(d) for d in spec["dims"]),
            t60=float(spec["t60"]),
            knee_db=float(spec.get("knee_db", -15.0)),
            label=spec.get("label", "coupled"),
        )

    scene = SceneConfig(
        name=name,
        rooms=rooms,
        targets=targets,
        source=_parse_pose(data["source"], "source"),
        receiver=_parse_pose(data["receiver"], "receiver"),
        apertures=apertures,
        reflectors=reflectors,
        coupled_volume=coupled,
        simple_feature=data.get("simple_feature"),
    )
    # forces the inside-exactly-one-room invariant
    scene.source_room
    scene.receiver_room
    if scene.simple_feature is not None and scene.simple_feature not in (
        "cascade", "reflectors", "coupled_volume",
    ):
        raise SceneFormatError(
            f"simple_feature '{scene.simple_feature}' not one of cascade/reflectors/coupled_volume"
        )
    return scene


def bundled_preset_names() -> tuple[str, ...]:
    return ("living_room", "pub", "underground")


def _preset_path(name: str):
    return resources.files("roomsim").joinpath("presets", f"{name}.json")


def load_scene(path) -> SceneConfig:
    """Load a scene from a JSON file or a bundled preset name."""
    name_hint = None
    if isinstance(path, str) and path in bundled_preset_names() and not Path(path).exists():
        text = _preset_path(path).read_text()
        name_hint = path
    else:
        p = Path(path)
        if not p.exists():
            raise SceneFormatError(f"scene file not found: {path}")
        text = p.read_text()
        name_hint = p.stem
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(exc.msg, line=exc.lineno)
    return parse_scene(data, name_hint=name_hint)


def expand_alod_preset(
    scene: SceneConfig,
    preset: AlodPreset,
    output_mode: OutputMode = OutputMode.BINAURAL,
    *,
    sample_rate: float = 44100.0,
    tail_seconds: float = 2.0,
    seed: int = 0,
    air_absorption: bool = True,
) -> SimulationPlan:
    """Resolve an ALOD preset against a scene into a concrete plan.

    The RazrSimple tier drops the scene's declared feature: the coupled-room
    path collapses to a two-stage cascade (living room), finite reflectors
    are removed (pub), or the coupled volume is dropped (underground).
    """
    cross_room = scene.source_room != scene.receiver_room

    if preset is AlodPreset.PLAIN_ISM:
        order, jitter, smearing, fdn = 15, False, False, False
        coupled_mode = CoupledMode.CASCADE if cross_room else CoupledMode.OFF
        include_reflectors = False
    else:
        order = 1 if preset is AlodPreset.RAZR_1ST_ORDER else 3
        jitter = smearing = fdn = True
        coupled_mode = CoupledMode.FULL
        include_reflectors = bool(scene.reflectors)

    if preset is AlodPreset.RAZR_SIMPLE:
        feature = scene.simple_feature
        if feature is None:
            raise ConfigurationError(
                f"scene '{scene.name}' declares no feature for the RazrSimple tier"
            )
        if feature == "cascade":
            coupled_mode = CoupledMode.CASCADE
        elif feature == "reflectors":
            include_reflectors = False
        elif feature == "coupled_volume":
            coupled_mode = CoupledMode.OFF

    # Resolve the coupled late-reverb stage for FULL mode.
    coupled_stage = None
    if coupled_mode is CoupledMode.FULL and fdn:
        if scene.coupled_volume is not None:
            cv = scene.coupled_volume
            coupled_stage = CoupledStagePlan(
                dims=cv.dims, t60=cv.t60, knee_db=cv.knee_db, label=cv.label
            )
        elif cross_room:
            # the source room's slower tail leaks through the aperture
            other = scene.rooms[scene.source_room]
            other_t30 = scene.targets[scene.source_room].broadband_t30
            knee = scene.apertures[0].coupling_db if scene.apertures else -30.0
            main_t30 = scene.targets[scene.receiver_room].broadband_t30
            if other_t30 > main_t30:
                coupled_stage = CoupledStagePlan(
                    dims=other.dims, t60=other_t30, knee_db=knee,
                    label=scene.source_room,
                )
        if coupled_stage is None:
            coupled_mode = CoupledMode.OFF

    if cross_room and coupled_mode is CoupledMode.CASCADE and not scene.apertures:
        raise ConfigurationError("cascade mode needs an aperture between the two rooms")
    if coupled_mode is CoupledMode.CASCADE and not cross_room:
        raise ConfigurationError("cascade mode only applies when source and receiver rooms differ")

    plan_rooms = tuple(
        PlanRoom(
            room_id=rid,
            geometry=scene.rooms[rid],
            target=scene.targets[rid],
            absorption=calibrate_absorption(scene.rooms[rid], scene.targets[rid]),
        )
        for rid in sorted(scene.rooms)
    )

    front_only = preset is AlodPreset.DIOTIC and output_mode is OutputMode.LOUDSPEAKER
    if preset is AlodPreset.DIOTIC and output_mode is not OutputMode.LOUDSPEAKER:
        output_mode = OutputMode.DIOTIC

    return SimulationPlan(
        scene_name=scene.name,
        preset=preset,
        rooms=plan_rooms,
        source=scene.source,
        source_room=scene.source_room,
        receiver=scene.receiver,
        receiver_room=scene.receiver_room,
        ism_order=order,
        jitter=jitter,
        smearing=smearing,
        fdn=fdn,
        coupled_mode=coupled_mode,
        coupled_stage=coupled_stage,
        include_reflectors=include_reflectors,
        reflectors=scene.reflectors if include_reflectors else (),
        apertures=scene.apertures,
        output_mode=output_mode,
        front_only=front_only,
        sample_rate=float(sample_rate),
        tail_seconds=float(tail_seconds),
        seed=int(seed),
        air_absorption=bool(air_absorption),
    )
