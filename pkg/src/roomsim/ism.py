"""Shoebox image-source enumeration, jitter, finite reflectors, and taps.

Images are indexed per axis by a parity bit p (0: same orientation as the
source, 1: mirrored) and a period index r, giving the mirror-lattice
position x = (-1)^p * x_s + 2 r L in room-local coordinates. The number of
wall reflections along one axis is |2r - p|; summing the three axes gives
the image's reflection order. A true shoebox needs no visibility test;
finite reflectors use an explicit specular-point-in-rectangle test instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bands import N_BANDS
from .errors import DegenerateGeometryError, DomainError
from .scene import (
    SPEED_OF_SOUND,
    AbsorptionProfile,
    FiniteReflector,
    Pose,
    RoomGeometry,
)

#: jitter magnitude per reflection order, meters per axis
JITTER_PER_ORDER_M = 0.05

#: images closer than this to a receiver raise a degenerate-distance error
MIN_TAP_DISTANCE_M = 1e-3


@dataclass(frozen=True)
class ImageSet:
    """Image sources of one room (plus any finite-reflector images).

    Arrays share the leading image axis: ``positions`` (n, 3) world frame,
    ``orders`` (n,), ``band_gains`` (n, n_bands) cumulative wall reflection
    factors, ``parities``/``periods`` (n, 3) lattice provenance (zeros for
    reflector images), ``labels`` reflector provenance (empty string for
    lattice images).
    """

    room: RoomGeometry
    source: Pose
    positions: np.ndarray
    orders: np.ndarray
    band_gains: np.ndarray
    parities: np.ndarray
    periods: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.positions)
        if not self.labels:
            object.__setattr__(self, "labels", ("",) * n)
        assert self.orders.shape == (n,)
        assert self.band_gains.shape == (n, N_BANDS)

    def __len__(self) -> int:
        return len(self.positions)

    def merged_with(self, other: "ImageSet") -> "ImageSet":
        return ImageSet(
            room=self.room,
            source=self.source,
            positions=np.concatenate([self.positions, other.positions]),
            orders=np.concatenate([self.orders, other.orders]),
            band_gains=np.concatenate([self.band_gains, other.band_gains]),
            parities=np.concatenate([self.parities, other.parities]),
            periods=np.concatenate([self.periods, other.periods]),
            labels=self.labels + other.labels,
        )


@dataclass(frozen=True)
class TapList:
    """Per-tap render records, sorted by delay.

    ``delays`` seconds, ``directions`` (n, 3) unit vectors in the receiver's
    head frame, ``band_gains`` (n, n_bands) including 1/r spreading,
    ``orders`` reflection orders, ``smear`` flags taps subject to temporal
    smearing.
    """

    sample_rate: float
    delays: np.ndarray
    directions: np.ndarray
    band_gains: np.ndarray
    orders: np.ndarray
    smear: np.ndarray

    def __len__(self) -> int:
        return len(self.delays)


def _axis_combinations(max_order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (parity, period) pairs with per-axis reflection count <= max_order."""
    parities, periods, counts = [0], [0], [0]
    for n in range(1, max_order + 1):
        p = n % 2
        if p == 0:
            parities += [0, 0]
            periods += [n // 2, -(n // 2)]
        else:
            parities += [1, 1]
            periods += [(n + 1) // 2, -(n - 1) // 2]
        counts += [n, n]
    return (
        np.array(parities, dtype=np.int64),
        np.array(periods, dtype=np.int64),
        np.array(counts, dtype=np.int64),
    )


def _wall_hit_counts(parities: np.ndarray, periods: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reflections at the low/high wall of one axis for each (p, r) pair."""
    p, r = parities, periods
    lo = np.where(p == 0, np.abs(r), np.where(r >= 1, r - 1, 1 - r))
    hi = np.where(p == 0, np.abs(r), np.where(r >= 1, r, -r))
    return lo, hi


def enumerate_images(
    room: RoomGeometry,
    source: Pose,
    max_order: int,
    absorption: AbsorptionProfile | None = None,
) -> ImageSet:
    """Enumerate every lattice image with reflection order <= max_order.

    With an absorption profile the cumulative band gain of each image is
    the product of sqrt(1 - alpha) over the walls its lattice path hits;
    without one all gains are 1. Raises DomainError when the source lies
    outside the room.
    """
    if max_order < 0:
        raise DomainError("max_order must be non-negative")
    if not room.contains(source.position):
        raise DomainError(f"source position {source.position} outside room")

    local = np.asarray(source.position, dtype=float) - np.asarray(room.origin, dtype=float)
    dims = np.asarray(room.dims, dtype=float)

    p1, r1, n1 = _axis_combinations(max_order)
    k = len(p1)
    # cross product of the three axes, filtered to total order <= max_order
    idx = np.indices((k, k, k)).reshape(3, -1)
    total = n1[idx[0]] + n1[idx[1]] + n1[idx[2]]
    keep = total <= max_order
    idx = idx[:, keep]
    orders = total[keep]

    parities = np.stack([p1[idx[0]], p1[idx[1]], p1[idx[2]]], axis=1)
    periods = np.stack([r1[idx[0]], r1[idx[1]], r1[idx[2]]], axis=1)

    signs = 1.0 - 2.0 * parities
    positions = signs * local[None, :] + 2.0 * periods * dims[None, :]
    positions = positions + np.asarray(room.origin, dtype=float)[None, :]

    if absorption is not None:
        beta = absorption.reflection_factors()  # (6, n_bands), wall order x-,x+,y-,y+,z-,z+
        log_beta = np.log(beta)
        counts = np.empty((len(orders), 6), dtype=np.int64)
        for ax in range(3):
            lo, hi = _wall_hit_counts(parities[:, ax], periods[:, ax])
            counts[:, 2 * ax] = lo
            counts[:, 2 * ax + 1] = hi
        band_gains = np.exp(counts @ log_beta)
    else:
        band_gains = np.ones((len(orders), N_BANDS))

    # direct sound first, then ascending order for stable downstream seeding
    sort = np.lexsort((periods[:, 2], periods[:, 1], periods[:, 0],
                       parities[:, 2], parities[:, 1], parities[:, 0], orders))
    return ImageSet(
        room=room,
        source=source,
        positions=positions[sort],
        orders=orders[sort],
        band_gains=band_gains[sort],
        parities=parities[sort],
        periods=periods[sort],
    )


def apply_jitter(images: ImageSet, seed: int) -> ImageSet:
    """Displace every order >= 1 image by a seeded uniform offset.

    Offsets are uniform per axis in +-(0.05 m * order). Jittered images are
    kept strictly outside the room box (offsets are shrunk per axis when
    needed), so no interior receiver can end up at zero delay. The direct
    image never moves; equal seeds give identical output.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, 0x1A6E]))
    offsets = rng.uniform(-1.0, 1.0, size=images.positions.shape)
    offsets *= JITTER_PER_ORDER_M * images.orders[:, None]
    offsets[images.orders == 0] = 0.0

    jittered = images.positions + offsets
    lo = np.asarray(images.room.origin, dtype=float)
    hi = lo + np.asarray(images.room.dims, dtype=float)
    margin = 1e-3
    inside = np.all((jittered > lo) & (jittered < hi), axis=1)
    inside &= images.orders >= 1
    for i in np.nonzero(inside)[0]:
        # shrink the offset along the axes where the unjittered image sits
        # outside the box (at least one exists for order >= 1)
        orig = images.positions[i]
        pos = jittered[i]
        for ax in range(3):
            if orig[ax] <= lo[ax]:
                pos[ax] = min(pos[ax], lo[ax] - margin)
            elif orig[ax] >= hi[ax]:
                pos[ax] = max(pos[ax], hi[ax] + margin)
        jittered[i] = pos
    return replace(images, positions=jittered)


def reflect_finite_surfaces(
    source: Pose,
    receiver: Pose,
    reflectors: list[FiniteReflector] | tuple[FiniteReflector, ...],
    room: RoomGeometry,
) -> ImageSet:
    """First-order images off finite rectangles with a valid specular point.

    The specular point is the intersection of the mirrored-source-to-receiver
    segment with the reflector plane; reflectors whose intersection falls
    outside their rectangle (or behind either endpoint) contribute nothing.
    """
    src = np.asarray(source.position, dtype=float)
    rcv = np.asarray(receiver.position, dtype=float)

    positions, gains, labels = [], [], []
    for refl in reflectors:
        c = np.asarray(refl.center, dtype=float)
        n = np.asarray(refl.normal, dtype=float)
        dist = float(np.dot(src - c, n))
        image = src - 2.0 * dist * n

        seg = rcv - image
        denom = float(np.dot(seg, n))
        if abs(denom) < 1e-12:
            continue
        t = float(np.dot(c - image, n)) / denom
        if not (1e-9 < t < 1.0 - 1e-9):
            continue
        hit = image + t * seg
        u, v = refl.in_plane_axes()
        du = float(np.dot(hit - c, u))
        dv = float(np.dot(hit - c, v))
        if abs(du) > refl.extents[0] / 2.0 or abs(dv) > refl.extents[1] / 2.0:
            continue
        positions.append(image)
        gains.append(refl.reflection_gains())
        labels.append(refl.label)

    n_found = len(positions)
    return ImageSet(
        room=room,
        source=source,
        positions=np.array(positions, dtype=float).reshape(n_found, 3),
        orders=np.ones(n_found, dtype=np.int64),
        band_gains=np.array(gains, dtype=float).reshape(n_found, N_BANDS),
        parities=np.zeros((n_found, 3), dtype=np.int64),
        periods=np.zeros((n_found, 3), dtype=np.int64),
        labels=tuple(labels),
    )


def image_taps(
    images: ImageSet,
    receiver: Pose,
    c: float = SPEED_OF_SOUND,
    fs: float = 44100.0,
) -> TapList:
    """Convert images to delay/direction/gain taps for one receiver.

    delay = |image - receiver| / c, amplitude scales with 1/distance, and
    the direction is the receiver-to-image unit vector rotated into the
    receiver's head frame.
    """
    if c <= 0:
        raise DomainError("speed of sound must be positive")
    rcv = np.asarray(receiver.position, dtype=float)
    vecs = images.positions - rcv[None, :]
    dists = np.linalg.norm(vecs, axis=1)
    if np.any(dists < MIN_TAP_DISTANCE_M):
        raise DegenerateGeometryError(
            f"image within {MIN_TAP_DISTANCE_M} m of receiver; distance degenerate"
        )

    directions_world = vecs / dists[:, None]
    directions = directions_world @ receiver.rotation()  # == (R^T @ d^T)^T
    delays = dists / c
    band_gains = images.band_gains / dists[:, None]
    smear = images.orders >= 2

    sort = np.argsort(delays, kind="stable")
    return TapList(
        sample_rate=float(fs),
        delays=delays[sort],
        directions=directions[sort],
        band_gains=band_gains[sort],
        orders=images.orders[sort],
        smear=smear[sort],
    )


def order_counts(images: ImageSet, max_order: int) -> np.ndarray:
    """Histogram of image counts per reflection order 0..max_order."""
    return np.bincount(images.orders, minlength=max_order + 1)
