"""
On-disk observation format.

A video is stored as JSON lines: a header object describing the video
followed by one object per detected face and frame.  The format is what
decouples the pipeline from the upstream face detector, recognizer and
frame-level fakeness classifiers; anything able to write these lines can
feed it.

Header::

    {"video_id": str, "label": 0 | 1 | null, "width": int, "height": int,
     "num_frames": int, "embedding_dim": int, "fakeness_channels": int}

Body::

    {"frame": int, "x": num, "y": num, "w": num, "h": num,
     "embedding": [num, ...], "fakeness": [num, ...]}

Box coordinates are absolute pixels.
"""

from dataclasses import dataclass
import io
import json
import logging
import math

import numpy as np

from .exceptions import MalformedLine, MissingHeader, InvariantViolation, IoFailure
from .validate import ValidationError, validate_tree, error_field


__all__ = [
    "FrameDims",
    "FaceObservation",
    "VideoObservations",
    "parse_observations",
    "write_observations",
    "validate_video",
    "read_video",
    "write_video",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


_HEADER_KEYS = ("video_id", "label", "width", "height", "num_frames", "embedding_dim", "fakeness_channels")


def _frozen_array(values):
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FrameDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvariantViolation("frame_dims", reason=f"{self.width}x{self.height} is not a valid frame size")

    @property
    def area(self):
        return self.width * self.height


@dataclass(frozen=True, eq=False)
class FaceObservation:
    """
    One detected face on one frame.

    Attributes
    ----------
    frame_index : int
    bbox : tuple of float
        ``(x, y, w, h)`` in pixels.
    embedding : ndarray
        Identity embedding of length E.
    fakeness : ndarray
        D fakeness scores, each in [0, 1].
    """
    frame_index: int
    bbox: tuple
    embedding: np.ndarray
    fakeness: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
        object.__setattr__(self, "embedding", _frozen_array(self.embedding))
        object.__setattr__(self, "fakeness", _frozen_array(self.fakeness))

    @property
    def area(self):
        return self.bbox[2] * self.bbox[3]

    def __eq__(self, other):
        if not isinstance(other, FaceObservation):
            return NotImplemented
        return (
            self.frame_index == other.frame_index
            and self.bbox == other.bbox
            and np.array_equal(self.embedding, other.embedding)
            and np.array_equal(self.fakeness, other.fakeness)
        )

    def __hash__(self):
        return hash((self.frame_index, self.bbox))

    def to_dict(self):
        x, y, w, h = self.bbox
        return {
            "frame": int(self.frame_index),
            "x": x,
            "y": y,
            "w": w,
            "h": h,
            "embedding": self.embedding.tolist(),
            "fakeness": self.fakeness.tolist(),
        }


@dataclass(frozen=True, eq=False)
class VideoObservations:
    """
    Every face observation of one video, in frame order.
    """
    video_id: str
    label: int
    frame_dims: FrameDims
    num_frames: int
    observations: tuple = ()
    embedding_dim: int = 1
    fakeness_channels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))

    def __eq__(self, other):
        if not isinstance(other, VideoObservations):
            return NotImplemented
        return self.header() == other.header() and self.observations == other.observations

    def __hash__(self):
        return hash((self.video_id, self.num_frames, len(self.observations)))

    def __len__(self):
        return len(self.observations)

    def header(self):
        return {
            "video_id": self.video_id,
            "label": self.label,
            "width": self.frame_dims.width,
            "height": self.frame_dims.height,
            "num_frames": self.num_frames,
            "embedding_dim": self.embedding_dim,
            "fakeness_channels": self.fakeness_channels,
        }

    def by_frame(self):
        """
        Observations grouped by frame.

        Returns
        -------
        dict
            frame index -> list of `FaceObservation` in input order.
        """
        frames = {}
        for obs in self.observations:
            frames.setdefault(obs.frame_index, []).append(obs)
        return frames


def _check_observation(obs, video, line_no=None):
    """
    Enforce the per-observation invariants against the video header.
    """
    if not 0 <= obs.frame_index < video.num_frames:
        raise InvariantViolation("frame", line_no, f"{obs.frame_index} is outside [0, {video.num_frames})")
    x, y, w, h = obs.bbox
    if not all(math.isfinite(v) for v in obs.bbox):
        raise InvariantViolation("bbox", line_no, "coordinates must be finite")
    if w <= 0 or h <= 0:
        raise InvariantViolation("bbox", line_no, f"box size {w}x{h} must be positive")
    if x < 0 or y < 0 or x + w > video.frame_dims.width or y + h > video.frame_dims.height:
        raise InvariantViolation(
            "bbox", line_no,
            f"box ({x}, {y}, {w}, {h}) is not inside a "
            f"{video.frame_dims.width}x{video.frame_dims.height} frame"
        )
    if obs.embedding.shape != (video.embedding_dim,):
        raise InvariantViolation(
            "embedding", line_no, f"expected length {video.embedding_dim}, got {obs.embedding.size}")
    if not np.all(np.isfinite(obs.embedding)):
        raise InvariantViolation("embedding", line_no, "values must be finite")
    if obs.fakeness.shape != (video.fakeness_channels,):
        raise InvariantViolation(
            "fakeness", line_no, f"expected {video.fakeness_channels} channels, got {obs.fakeness.size}")
    # NaN fails both comparisons
    if not np.all((obs.fakeness >= 0.0) & (obs.fakeness <= 1.0)):
        raise InvariantViolation("fakeness", line_no, f"values {obs.fakeness.tolist()} are not in [0, 1]")


def validate_video(video):
    """
    Check every invariant of an in-memory video.

    Raises
    ------
    InvariantViolation
        Naming the offending field; ``line_no`` is the line the
        observation would occupy in the serialized stream.
    """
    try:
        validate_tree(video.header(), "observation_header")
    except ValidationError as error:
        raise InvariantViolation(error_field(error), 1, error.message) from None
    previous = 0
    for index, obs in enumerate(video.observations):
        line_no = index + 2
        _check_observation(obs, video, line_no)
        if obs.frame_index < previous:
            raise InvariantViolation("frame", line_no, "observations must be sorted by frame")
        previous = obs.frame_index


def _load_line(raw, line_no):
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as err:
            raise MalformedLine(line_no, f"not UTF-8 ({err.reason})") from None
    try:
        tree = json.loads(raw)
    except (ValueError, RecursionError) as err:
        raise MalformedLine(line_no, str(err)) from None
    if not isinstance(tree, dict):
        raise MalformedLine(line_no, "expected a JSON object")
    return tree


def _parse_header(tree):
    if "frame" in tree or "video_id" not in tree:
        raise MissingHeader("The first line of an observation stream must be the video header")
    try:
        validate_tree(tree, "observation_header")
    except ValidationError as error:
        raise InvariantViolation(error_field(error), 1, error.message) from None
    if isinstance(tree["label"], bool):
        raise InvariantViolation("label", 1, "must be 0, 1 or null")
    return VideoObservations(
        video_id=tree["video_id"],
        label=tree["label"],
        frame_dims=FrameDims(tree["width"], tree["height"]),
        num_frames=tree["num_frames"],
        embedding_dim=tree["embedding_dim"],
        fakeness_channels=tree["fakeness_channels"],
    )


def parse_observations(source):
    """
    Parse and validate an observation stream.

    Parameters
    ----------
    source : binary or text file object, bytes, or iterable of lines
        JSON lines, header first.  Blank lines are ignored.

    Returns
    -------
    VideoObservations

    Raises
    ------
    MissingHeader
        The stream is empty or does not start with a header.
    MalformedLine
        A line is not a JSON object.
    InvariantViolation
        A value breaks the format's invariants.
    """
    if isinstance(source, (bytes, str)):
        source = io.BytesIO(source.encode("utf-8") if isinstance(source, str) else source)

    video = None
    observations = []
    previous = 0
    try:
        for line_no, raw in enumerate(source, start=1):
            if not raw.strip():
                continue
            tree = _load_line(raw, line_no)
            if video is None:
                video = _parse_header(tree)
                continue
            try:
                validate_tree(tree, "observation")
            except ValidationError as error:
                raise InvariantViolation(error_field(error), line_no, error.message) from None
            try:
                obs = FaceObservation(
                    frame_index=tree["frame"],
                    bbox=(tree["x"], tree["y"], tree["w"], tree["h"]),
                    embedding=tree["embedding"],
                    fakeness=tree["fakeness"],
                )
            except OverflowError as err:
                raise InvariantViolation("observation", line_no, str(err)) from None
            _check_observation(obs, video, line_no)
            if obs.frame_index < previous:
                raise InvariantViolation("frame", line_no, "observations must be sorted by frame")
            previous = obs.frame_index
            observations.append(obs)
    except OSError as err:
        raise IoFailure(f"Cannot read observations: {err}") from err

    if video is None:
        raise MissingHeader("Observation stream is empty")

    log.debug(f"Parsed {len(observations)} observations of video {video.video_id}")
    return VideoObservations(
        video_id=video.video_id,
        label=video.label,
        frame_dims=video.frame_dims,
        num_frames=video.num_frames,
        observations=observations,
        embedding_dim=video.embedding_dim,
        fakeness_channels=video.fakeness_channels,
    )


def _dumps(tree):
    return json.dumps(tree, separators=(",", ":"), allow_nan=False) + "\n"


def write_observations(video, sink):
    """
    Serialize a video as JSON lines.

    Parameters
    ----------
    video : VideoObservations
    sink : writable file object
        Binary sinks receive UTF-8 bytes, text sinks receive str.

    Returns
    -------
    int
        Number of bytes written.
    """
    header = video.header()
    lines = [_dumps({k: header[k] for k in _HEADER_KEYS})]
    lines.extend(_dumps(obs.to_dict()) for obs in video.observations)
    payload = "".join(lines)
    data = payload.encode("utf-8")
    try:
        if isinstance(sink, io.TextIOBase):
            sink.write(payload)
        else:
            sink.write(data)
    except OSError as err:
        raise IoFailure(f"Cannot write observations of {video.video_id}: {err}") from err
    return len(data)


def read_video(path):
    """Parse the observation file at ``path``."""
    try:
        with open(path, "rb") as fd:
            return parse_observations(fd)
    except FileNotFoundError as err:
        raise IoFailure(f"No such observation file: {path}") from err


def write_video(video, path):
    """Write ``video`` to ``path``, returning the byte count."""
    try:
        with open(path, "wb") as fd:
            return write_observations(video, fd)
    except OSError as err:
        raise IoFailure(f"Cannot write {path}: {err}") from err
