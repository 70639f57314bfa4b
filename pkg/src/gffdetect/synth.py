"""
Seeded generator of synthetic multi-face videos.

A scenario lists personas, each with a kind, a presence on the frame
axis, a box trajectory, a fakeness model and a base identity embedding.
The generator emits one observation per persona and present frame.  Real
videos contain small faces with high fakeness (a passer-by, a portrait
on the wall) and fake videos a small face with low fakeness, so that
fakeness alone does not separate the classes; the size of the faces
does.

Named templates build scenario specs for the typical layouts and
`generate_dataset` mixes them into a labelled benchmark.
"""

import dataclasses
from dataclasses import dataclass, field
import json
import logging
import math
import os

import numpy as np
from astropy.table import Table

from .exceptions import SpecInvalid, DataError, IoFailure
from .ingest import FrameDims, FaceObservation, VideoObservations, validate_video, write_video, read_video
from .util import derive_seed
from .validate import ValidationError, validate_tree, error_message


__all__ = [
    "KINDS",
    "TEMPLATES",
    "DEFAULT_MIX",
    "PersonaSpec",
    "ScenarioSpec",
    "MixEntry",
    "ManifestRow",
    "generate_scenario",
    "template_spec",
    "allocate",
    "generate_dataset",
    "load_scenario",
    "write_dataset",
    "read_manifest",
    "load_dataset",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


KINDS = ("primary_real", "primary_fake", "passerby", "portrait", "background_crowd")

DEFAULT_FAKENESS = {
    "primary_real": 0.15,
    "primary_fake": 0.8,
    "passerby": 0.8,
    "portrait": 0.8,
    "background_crowd": 0.3,
}

MANIFEST_NAME = "manifest.csv"

# Largest integer asdf validates as a literal, plus one
MAX_SEED = 1 << 63


def _per_channel(value, channels, what):
    if isinstance(value, tuple):
        if len(value) != channels:
            raise SpecInvalid(f"Persona gives {len(value)} {what} for {channels} channels")
        return np.array(value)
    return np.full(channels, float(value))


@dataclass(frozen=True)
class PersonaSpec:
    """
    One person of a scenario.

    Attributes
    ----------
    kind : str
        One of `KINDS`.
    presence : tuple of (int, int), optional
        Half-open frame intervals; `None` means every frame.
    position : (float, float)
        Box center on frame 0 as fractions of the frame width and height.
    size : float
        Box side as a fraction of the shorter frame side, in (0, 1].
    velocity : (float, float)
        Center displacement per frame, in the units of ``position``.
    bbox_jitter : float
        Gaussian noise on the center, in pixels.
    fakeness_mean : float or tuple, optional
        Mean fakeness, one value for every channel or one per channel;
        `None` takes the default of the kind.
    fakeness_sigma : float or tuple
        Standard deviation of the per-frame fakeness noise, one value for
        every channel or one per channel.
    embedding_jitter : float
        Gaussian noise added to the base embedding before renormalizing.
    """
    kind: str
    presence: tuple = None
    position: tuple = (0.5, 0.5)
    size: float = 0.2
    velocity: tuple = (0.0, 0.0)
    bbox_jitter: float = 0.0
    fakeness_mean: object = None
    fakeness_sigma: object = 0.05
    embedding_jitter: float = 0.01

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecInvalid(f"Unknown persona kind {self.kind!r}")
        if self.presence is not None:
            object.__setattr__(self, "presence", tuple(tuple(int(v) for v in span) for span in self.presence))
            for start, stop in self.presence:
                if not 0 <= start < stop:
                    raise SpecInvalid(f"Presence interval [{start}, {stop}) is empty or negative")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if not 0 < self.size <= 1:
            raise SpecInvalid(f"Persona size must be in (0, 1], got {self.size}")
        for name in ("fakeness_mean", "fakeness_sigma"):
            if isinstance(getattr(self, name), (list, tuple)):
                object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if min(self.bbox_jitter, self.embedding_jitter, np.min(self.fakeness_sigma, initial=0.0)) < 0:
            raise SpecInvalid("Noise levels must be >= 0")
        if self.fakeness_mean is not None and not np.all(
                (np.asarray(self.fakeness_mean) >= 0) & (np.asarray(self.fakeness_mean) <= 1)):
            raise SpecInvalid(f"Fakeness means must be in [0, 1], got {self.fakeness_mean}")

    def frames(self, num_frames):
        """Sorted frame indices the persona is visible on."""
        if self.presence is None:
            return list(range(num_frames))
        frames = set()
        for start, stop in self.presence:
            frames.update(range(start, stop))
        return sorted(frames)

    def mean_fakeness(self, channels):
        mean = DEFAULT_FAKENESS[self.kind] if self.fakeness_mean is None else self.fakeness_mean
        return _per_channel(mean, channels, "fakeness means")

    def sigma_fakeness(self, channels):
        return _per_channel(self.fakeness_sigma, channels, "fakeness sigmas")

    def to_dict(self):
        tree = dataclasses.asdict(self)
        for key, value in tree.items():
            if isinstance(value, tuple):
                tree[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        return tree


@dataclass(frozen=True)
class ScenarioSpec:
    """
    A complete synthetic video.

    ``label`` may be left `None`; it then follows from the personas (fake
    iff some persona is ``primary_fake``).  A given label must agree.
    """
    personas: tuple
    frame_dims: FrameDims = FrameDims(640, 360)
    num_frames: int = 32
    label: int = None
    seed: int = 0
    video_id: str = "scenario"
    embedding_dim: int = 32
    fakeness_channels: int = 1
    margin: float = 1.4

    def __post_init__(self):
        object.__setattr__(self, "personas", tuple(self.personas))
        if self.num_frames < 1:
            raise SpecInvalid(f"num_frames must be >= 1, got {self.num_frames}")
        if self.embedding_dim < 1 or self.fakeness_channels < 1:
            raise SpecInvalid("embedding_dim and fakeness_channels must be >= 1")
        if not 0 <= self.seed < MAX_SEED:
            raise SpecInvalid(f"seed must be in [0, 2**63), got {self.seed}")
        for persona in self.personas:
            if persona.presence is not None and any(stop > self.num_frames for _, stop in persona.presence):
                raise SpecInvalid(
                    f"Presence {persona.presence} of a {persona.kind} exceeds {self.num_frames} frames")
            persona.mean_fakeness(self.fakeness_channels)
            persona.sigma_fakeness(self.fakeness_channels)
        if self.label is not None and self.label != self.derived_label:
            raise SpecInvalid(f"Label {self.label} contradicts the personas (expected {self.derived_label})")

    @property
    def derived_label(self):
        return int(any(p.kind == "primary_fake" for p in self.personas))

    @classmethod
    def from_dict(cls, tree):
        """
        Build from a JSON scenario tree validated against
        ``scenario.schema.yaml``.
        """
        try:
            validate_tree(tree, "scenario")
        except ValidationError as error:
            raise SpecInvalid(error_message(list(error.path) or "scenario", error)) from None
        tree = dict(tree)
        personas = tuple(PersonaSpec(**p) for p in tree.pop("personas"))
        dims = FrameDims(tree.pop("width", 640), tree.pop("height", 360))
        return cls(personas=personas, frame_dims=dims, **tree)

    def to_dict(self):
        tree = {
            "video_id": self.video_id,
            "width": self.frame_dims.width,
            "height": self.frame_dims.height,
            "num_frames": self.num_frames,
            "embedding_dim": self.embedding_dim,
            "fakeness_channels": self.fakeness_channels,
            "seed": self.seed,
            "label": self.label,
            "margin": self.margin,
            "personas": [p.to_dict() for p in self.personas],
        }
        return tree


def load_scenario(path):
    """Read a JSON scenario file."""
    try:
        with open(path) as fd:
            tree = json.load(fd)
    except OSError as err:
        raise IoFailure(f"Cannot read scenario {path}: {err}") from err
    except ValueError as err:
        raise SpecInvalid(f"Scenario {path} is not JSON: {err}") from None
    return ScenarioSpec.from_dict(tree)


def _base_embeddings(count, dim, margin, rng, max_draws=100000):
    """
    Unit vectors pairwise at least ``margin`` radians apart, by
    sequential rejection sampling.
    """
    accepted = []
    draws = 0
    while len(accepted) < count:
        draws += 1
        if draws > max_draws:
            raise SpecInvalid(
                f"Cannot place {count} embeddings of length {dim} at least {margin} rad apart")
        v = rng.normal(size=dim)
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v = v / norm
        if all(math.acos(min(1.0, max(-1.0, float(v @ u)))) >= margin for u in accepted):
            accepted.append(v)
    return accepted


def generate_scenario(spec):
    """
    Observations of one synthetic video.

    Parameters
    ----------
    spec : ScenarioSpec

    Returns
    -------
    VideoObservations
        Labelled, observations in frame order and persona order within a
        frame.

    Raises
    ------
    SpecInvalid
    """
    rng = np.random.default_rng(spec.seed)
    W, H = spec.frame_dims.width, spec.frame_dims.height
    E, D = spec.embedding_dim, spec.fakeness_channels
    bases = _base_embeddings(len(spec.personas), E, spec.margin, rng)
    presence = [set(p.frames(spec.num_frames)) for p in spec.personas]
    means = [p.mean_fakeness(D) for p in spec.personas]
    sigmas = [p.sigma_fakeness(D) for p in spec.personas]
    sides = [min(max(1, int(round(p.size * min(W, H)))), min(W, H)) for p in spec.personas]

    observations = []
    for t in range(spec.num_frames):
        for i, persona in enumerate(spec.personas):
            if t not in presence[i]:
                continue
            cx = (persona.position[0] + persona.velocity[0] * t) * W
            cy = (persona.position[1] + persona.velocity[1] * t) * H
            if persona.bbox_jitter > 0:
                cx += rng.normal(0.0, persona.bbox_jitter)
                cy += rng.normal(0.0, persona.bbox_jitter)
            side = sides[i]
            x = min(max(int(round(cx - side / 2)), 0), W - side)
            y = min(max(int(round(cy - side / 2)), 0), H - side)

            embedding = bases[i]
            if persona.embedding_jitter > 0:
                embedding = embedding + rng.normal(0.0, persona.embedding_jitter, size=E)
                embedding = embedding / np.linalg.norm(embedding)
            fakeness = means[i]
            if np.any(sigmas[i] > 0):
                fakeness = np.clip(fakeness + rng.normal(0.0, sigmas[i]), 0.0, 1.0)
            observations.append(FaceObservation(t, (x, y, side, side), embedding, fakeness))

    video = VideoObservations(
        video_id=spec.video_id,
        label=spec.derived_label,
        frame_dims=spec.frame_dims,
        num_frames=spec.num_frames,
        observations=observations,
        embedding_dim=E,
        fakeness_channels=D,
    )
    validate_video(video)
    return video


# Templates: each returns the personas and frame count of one layout,
# drawing its free parameters from ``rng``.  Both labels of a layout carry
# the same number of faces scored like fakes: real videos through small
# decoys, fake videos through the fake primary, with one small background
# face scored like a real face in its place.

REAL_LOOKING = 0.15


def _primaries(count, fake_slot, positions, size, jitter):
    return [
        PersonaSpec("primary_fake" if k == fake_slot else "primary_real",
                    position=positions[k], size=size, bbox_jitter=jitter)
        for k in range(count)
    ]


def _figure(label, rng):
    fake_slot = int(rng.integers(2)) if label else -1
    personas = _primaries(2, fake_slot, [(0.28, 0.55), (0.72, 0.55)], 0.7, 2.0)
    start = int(rng.integers(0, 14))
    personas.append(PersonaSpec("passerby", presence=((start, start + 3),), position=(rng.uniform(0.1, 0.9), 0.2),
                                size=0.12, velocity=(0.02, 0.0), bbox_jitter=1.0))
    personas.append(PersonaSpec("portrait", position=(0.9, 0.15), size=0.1,
                                fakeness_mean=REAL_LOOKING if label else None))
    return personas, 16


def _interview(label, rng):
    fake_slot = int(rng.integers(2)) if label else -1
    size = rng.uniform(0.6, 0.75)
    personas = _primaries(2, fake_slot, [(0.28, rng.uniform(0.45, 0.6)), (0.72, rng.uniform(0.45, 0.6))],
                          size, 2.0)
    for k in range(int(rng.integers(1, 3))):
        personas.append(PersonaSpec("portrait", position=(rng.uniform(0.05, 0.95), rng.uniform(0.1, 0.25)),
                                    size=rng.uniform(0.06, 0.12),
                                    fakeness_mean=REAL_LOOKING if label and k == 0 else None))
    return personas, 32


def _conference(label, rng):
    count = int(rng.integers(3, 7))
    cols = math.ceil(count / 2)
    fake_slot = int(rng.integers(count)) if label else -1
    positions = [((k % cols + 0.5) / cols, 0.27 + 0.46 * (k // cols)) for k in range(count)]
    personas = _primaries(count, fake_slot, positions, 0.4, 1.0)
    personas.append(PersonaSpec("portrait", position=(rng.uniform(0.1, 0.9), 0.5), size=0.07,
                                fakeness_mean=REAL_LOOKING if label else None))
    return personas, 32


def _crowd(label, rng):
    n_primary = int(rng.integers(1, 3))
    fake_slot = int(rng.integers(n_primary)) if label else -1
    personas = _primaries(n_primary, fake_slot, [(0.3, 0.6), (0.7, 0.6)], 0.6, 2.0)
    for k in range(int(rng.integers(5, 13))):
        decoy = REAL_LOOKING if label else DEFAULT_FAKENESS["primary_fake"]
        personas.append(PersonaSpec("background_crowd", position=(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.3)),
                                    size=0.05, velocity=(rng.uniform(-0.005, 0.005), 0.0), bbox_jitter=0.5,
                                    fakeness_mean=decoy if k == 0 else None))
    return personas, 32


def _single(label, rng):
    kind = "primary_fake" if label else "primary_real"
    return [PersonaSpec(kind, position=(rng.uniform(0.35, 0.65), 0.5), size=0.6, bbox_jitter=2.0)], 32


TEMPLATES = {
    "figure": _figure,
    "interview": _interview,
    "conference": _conference,
    "crowd": _crowd,
    "single": _single,
}


def template_spec(name, label, seed, video_id=None, embedding_dim=32, fakeness_channels=1):
    """
    Scenario spec of a named template.

    Parameters
    ----------
    name : str
        Key of `TEMPLATES`.
    label : {0, 1}
    seed : int
        Drives both the layout and the observation noise.

    Returns
    -------
    ScenarioSpec
    """
    if name not in TEMPLATES:
        raise SpecInvalid(f"Unknown template {name!r}; choose from {', '.join(TEMPLATES)}")
    if label not in (0, 1):
        raise SpecInvalid(f"Template label must be 0 or 1, got {label!r}")
    rng = np.random.default_rng(derive_seed(seed, 0))
    personas, num_frames = TEMPLATES[name](label, rng)
    return ScenarioSpec(
        personas=personas,
        num_frames=num_frames,
        label=label,
        seed=derive_seed(seed, 1),
        video_id=video_id or f"{name}-{label}-{seed}",
        embedding_dim=embedding_dim,
        fakeness_channels=fakeness_channels,
    )


@dataclass(frozen=True)
class MixEntry:
    template: str
    label: int
    weight: float


DEFAULT_MIX = tuple(
    MixEntry(template, label, 0.125)
    for template in ("figure", "interview", "conference", "crowd")
    for label in (0, 1)
)


def allocate(n_videos, weights):
    """
    Split ``n_videos`` over ``weights`` by largest remainders.

    Examples
    --------
    >>> allocate(10, [0.5, 0.25, 0.25])
    [5, 3, 2]
    >>> allocate(0, [1.0])
    [0]
    """
    quotas = [n_videos * w for w in weights]
    counts = [int(math.floor(q)) for q in quotas]
    left = n_videos - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:left]:
        counts[i] += 1
    return counts


def _mix_entries(scenario_mix):
    entries = [m if isinstance(m, MixEntry) else MixEntry(*m) for m in scenario_mix]
    if not entries:
        raise SpecInvalid("Scenario mix is empty")
    if any(e.weight < 0 for e in entries) or not math.isclose(sum(e.weight for e in entries), 1.0, abs_tol=1e-9):
        raise SpecInvalid("Scenario mix weights must be non-negative and sum to 1")
    for e in entries:
        if e.template not in TEMPLATES or e.label not in (0, 1):
            raise SpecInvalid(f"Invalid mix entry {e}")
    return entries


def generate_dataset(n_videos, scenario_mix=DEFAULT_MIX, seed=0, embedding_dim=32, fakeness_channels=1):
    """
    Labelled synthetic benchmark.

    Parameters
    ----------
    n_videos : int
    scenario_mix : sequence of MixEntry or (template, label, weight)
        Weights sum to 1.
    seed : int
        Video ``i`` is generated from ``derive_seed(seed, i)``.

    Returns
    -------
    list of (VideoObservations, int)
    """
    entries = _mix_entries(scenario_mix)
    if n_videos < 0:
        raise SpecInvalid(f"n_videos must be >= 0, got {n_videos}")
    plan = []
    for entry, count in zip(entries, allocate(n_videos, [e.weight for e in entries])):
        plan.extend([entry] * count)
    order = np.random.default_rng(np.random.SeedSequence([int(seed), n_videos])).permutation(len(plan))

    dataset = []
    for i, index in enumerate(order.tolist()):
        entry = plan[index]
        spec = template_spec(entry.template, entry.label, derive_seed(seed, i),
                             video_id=f"synth{i:05d}", embedding_dim=embedding_dim,
                             fakeness_channels=fakeness_channels)
        dataset.append((generate_scenario(spec), entry.label))
    log.info(f"Generated {len(dataset)} videos, {sum(label for _, label in dataset)} fake")
    return dataset


def write_dataset(dataset, directory):
    """
    Write every video as ``<video_id>.jsonl`` plus ``manifest.csv``.

    Returns
    -------
    str
        Path of the manifest.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as err:
        raise IoFailure(f"Cannot create {directory}: {err}") from err
    rows = []
    for video, label in dataset:
        name = f"{video.video_id}.jsonl"
        write_video(video, os.path.join(directory, name))
        rows.append((video.video_id, int(label), name))
    table = Table(rows=rows or None, names=("video_id", "label", "path"), dtype=(str, int, str))
    manifest = os.path.join(directory, MANIFEST_NAME)
    table.write(manifest, format="ascii.csv", overwrite=True)
    log.info(f"Wrote {len(rows)} videos and {manifest}")
    return manifest


@dataclass(frozen=True)
class ManifestRow:
    video_id: str
    label: int
    path: str = field(compare=False)


def read_manifest(path):
    """
    Rows of a manifest, with paths resolved against its directory.

    Returns
    -------
    list of ManifestRow
    """
    try:
        table = Table.read(path, format="ascii.csv")
    except FileNotFoundError as err:
        raise IoFailure(f"No such manifest: {path}") from err
    except ValueError as err:
        raise DataError(f"Cannot parse manifest {path}: {err}") from None
    missing = {"video_id", "label", "path"} - set(table.colnames)
    if missing:
        raise DataError(f"Manifest {path} lacks columns {sorted(missing)}")
    base = os.path.dirname(os.path.abspath(path))
    return [
        ManifestRow(str(row["video_id"]), int(row["label"]), os.path.join(base, str(row["path"])))
        for row in table
    ]


def load_dataset(manifest):
    """``(VideoObservations, label)`` pairs listed in a manifest."""
    return [(read_video(row.path), row.label) for row in read_manifest(manifest)]
