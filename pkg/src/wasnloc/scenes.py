"""Room, microphone and source geometry, plus seeded random scene sampling.

A scene is one simulated world: a shoebox room with a reverberation time,
M microphones and a single static source. Scenes are sampled from a
configurable distribution (uniform room dimensions and T60, uniform device
placement with a minimum mutual/wall separation) and are a pure function of
(distribution, seed). All types are treated as immutable after construction
and are safe to share between workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_MIN_SEPARATION = 0.5

SCENE_JSON_VERSION = 1


class PlacementError(RuntimeError):
    """Rejection sampling ran out of attempts (over-constrained config)."""


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room dimensions in meters and reverberation time in seconds."""

    width: float
    length: float
    height: float
    t60: float

    def __post_init__(self):
        for name in ("width", "length", "height", "t60"):
            if not getattr(self, name) > 0:
                raise ValueError(f"RoomSpec.{name} must be > 0")

    @property
    def dims(self) -> np.ndarray:
        return np.array([self.width, self.length, self.height])

    @property
    def volume(self) -> float:
        return self.width * self.length * self.height

    @property
    def surface_area(self) -> float:
        w, l, h = self.width, self.length, self.height
        return 2.0 * (w * l + w * h + l * h)


@dataclass(frozen=True, eq=False)
class MicArray:
    """Microphone positions as an (M, 3) array in meters."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("MicArray.positions must have shape (M, 3), M >= 1")
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True, eq=False)
class SourceSpec:
    """Source position in meters and an identifier of its waveform."""

    position: np.ndarray
    signal_id: str = "synthetic"

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True, eq=False)
class Scene:
    room: RoomSpec
    mics: MicArray
    source: SourceSpec
    seed: int

    @property
    def m(self) -> int:
        return len(self.mics)


@dataclass(frozen=True)
class SceneDistribution:
    """Sampling ranges for random scenes.

    ``mic_counts`` is the set of allowed microphone counts; one count is
    drawn uniformly per scene. All devices (mics and source) are placed
    uniformly at least ``min_separation`` meters from each other and from
    every wall, by rejection sampling with at most ``max_attempts``
    candidate draws per scene.
    """

    width_range: tuple[float, float] = (3.0, 6.0)
    length_range: tuple[float, float] = (3.0, 6.0)
    height_range: tuple[float, float] = (2.0, 4.0)
    t60_range: tuple[float, float] = (0.3, 0.6)
    mic_counts: tuple[int, ...] = (5, 7)
    min_separation: float = DEFAULT_MIN_SEPARATION
    max_attempts: int = 10_000

    def __post_init__(self):
        for name in ("width_range", "length_range", "height_range", "t60_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"SceneDistribution.{name}: need 0 < lo <= hi, got ({lo}, {hi})")
        if not self.mic_counts or any(int(m) < 2 for m in self.mic_counts):
            raise ValueError("SceneDistribution.mic_counts must be non-empty, all counts >= 2")
        if not 0 <= self.min_separation:
            raise ValueError("SceneDistribution.min_separation must be >= 0")
        for name in ("width_range", "length_range", "height_range"):
            lo, _ = getattr(self, name)
            if lo <= 2 * self.min_separation:
                raise ValueError(
                    f"SceneDistribution.{name}: lower bound {lo} leaves no room for "
                    f"min_separation {self.min_separation}"
                )
        if self.max_attempts < 1:
            raise ValueError("SceneDistribution.max_attempts must be >= 1")


def sample_scene(config: SceneDistribution, rng_seed) -> Scene:
    """Draw one scene. Pure function of (config, rng_seed).

    Draw order (fixed, part of the determinism contract): width, length,
    height, t60, microphone count, then the M microphone positions followed
    by the source position, each by rejection against the already-placed
    devices.

    Raises
    ------
    PlacementError
        If ``config.max_attempts`` candidate positions are exhausted.
    """
    rng = np.random.default_rng(rng_seed)
    width = float(rng.uniform(*config.width_range))
    length = float(rng.uniform(*config.length_range))
    height = float(rng.uniform(*config.height_range))
    t60 = float(rng.uniform(*config.t60_range))
    room = RoomSpec(width, length, height, t60)

    m = int(config.mic_counts[rng.integers(len(config.mic_counts))])

    sep = config.min_separation
    lo = np.full(3, sep)
    hi = room.dims - sep
    placed: list[np.ndarray] = []
    attempts = 0
    while len(placed) < m + 1:
        if attempts >= config.max_attempts:
            raise PlacementError(
                f"could not place {m} mics + source after {attempts} attempts "
                f"(room {width:.2f}x{length:.2f}x{height:.2f}, separation {sep})"
            )
        cand = rng.uniform(lo, hi)
        attempts += 1
        if all(np.linalg.norm(cand - q) >= sep for q in placed):
            placed.append(cand)

    mics = MicArray(np.array(placed[:m]))
    source = SourceSpec(placed[m], signal_id=f"synthetic:{rng_seed}")
    return Scene(room=room, mics=mics, source=source, seed=int(rng_seed))


def validate_scene(scene: Scene, min_separation: float = DEFAULT_MIN_SEPARATION) -> None:
    """Raise ValueError unless all joint scene invariants hold."""
    dims = scene.room.dims
    devices = np.vstack([scene.mics.positions, scene.source.position[None, :]])
    if np.any(devices <= 0.0) or np.any(devices >= dims[None, :]):
        raise ValueError("device outside the room interior")
    if np.any(devices < min_separation - 1e-12) or np.any(
        devices > dims[None, :] - min_separation + 1e-12
    ):
        raise ValueError("device closer than min_separation to a wall")
    n = devices.shape[0]
    if len(scene.mics) < 2:
        raise ValueError("scene needs at least 2 microphones")
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(devices[i] - devices[j]) < min_separation - 1e-12:
                raise ValueError(f"devices {i} and {j} closer than min_separation")


def build_metadata(scene: Scene) -> np.ndarray:
    """Flat metadata vector: mic 1 xyz, ..., mic M xyz, room width/length/height.

    Length is 3M + 3. Values are raw meters (no normalization).
    """
    return np.concatenate([scene.mics.positions.ravel(), scene.room.dims])


def parse_metadata(vector: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`build_metadata`: returns ((M, 3) mics, (3,) room dims)."""
    vec = np.asarray(vector, dtype=float).ravel()
    if vec.size < 6 or (vec.size - 3) % 3 != 0:
        raise ValueError(f"metadata vector length {vec.size} is not 3M + 3")
    return vec[:-3].reshape(-1, 3), vec[-3:]


def pair_metadata(scene: Scene, i: int, j: int) -> np.ndarray:
    """Normalized 9-vector describing microphone pair (i, j) and its room.

    Layout: mic i xyz, mic j xyz (each coordinate divided by the matching
    room dimension, so in-room coordinates land in [0, 1]), then the room
    dimensions divided by 10 m. Requires i < j < M.
    """
    m = scene.m
    if not (0 <= i < j < m):
        raise IndexError(f"need 0 <= i < j < M={m}, got i={i}, j={j}")
    return pair_metadata_vector(
        scene.mics.positions[i], scene.mics.positions[j], scene.room.dims
    )


def pair_metadata_vector(p_i: np.ndarray, p_j: np.ndarray, room_dims: np.ndarray) -> np.ndarray:
    dims = np.asarray(room_dims, dtype=float)
    return np.concatenate([p_i / dims, p_j / dims, dims / 10.0])


def scene_to_json(scene: Scene) -> str:
    """Serialize a scene to a canonical JSON document (stable key order)."""
    obj = {
        "version": SCENE_JSON_VERSION,
        "seed": scene.seed,
        "room": {
            "width": scene.room.width,
            "length": scene.room.length,
            "height": scene.room.height,
            "t60": scene.room.t60,
        },
        "mics": [[float(c) for c in p] for p in scene.mics.positions],
        "source": {
            "position": [float(c) for c in scene.source.position],
            "signal_id": scene.source.signal_id,
        },
    }
    return json.dumps(obj, indent=2) + "\n"


def scene_from_json(text: str) -> Scene:
    obj = json.loads(text)
    if obj.get("version") != SCENE_JSON_VERSION:
        raise ValueError(f"unsupported scene JSON version {obj.get('version')!r}")
    room = RoomSpec(**obj["room"])
    mics = MicArray(np.array(obj["mics"], dtype=float))
    src = SourceSpec(
        np.array(obj["source"]["position"], dtype=float),
        signal_id=obj["source"]["signal_id"],
    )
    return Scene(room=room, mics=mics, source=src, seed=int(obj["seed"]))


def with_signal_id(scene: Scene, signal_id: str) -> Scene:
    return replace(scene, source=replace(scene.source, signal_id=signal_id))
