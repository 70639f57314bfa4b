"""
Assembly of geometric-fakeness feature (GFF) matrices.

For a group of ``N`` face slots and ``L`` sampled frames a GFF matrix has
``L`` rows and ``N * (1 + D)`` columns: per slot one geometry column
followed by ``D`` fakeness columns.  Tracks are sorted by decreasing mean
fakeness and cut into windows of ``N``; the last window is padded.
Frames on which a track has no face carry 0 geometry and ``pad_value``
fakeness; padded slots are ``pad_value`` throughout.
"""

from dataclasses import dataclass
import logging
import os

import numpy as np
from astropy.table import Table

from .config import GffConfig
from .exceptions import ShapeMismatch
from .geometry import geometry_series


__all__ = [
    "GffMatrix",
    "sample_frames",
    "fakeness_series",
    "sort_faces",
    "assemble_gffs",
    "column_names",
    "stack_gffs",
    "write_gff_csv",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass(frozen=True, eq=False)
class GffMatrix:
    """
    One GFF matrix.

    Attributes
    ----------
    data : ndarray
        ``(L, N * (1 + D))`` float64.
    slot_track_ids : tuple
        Track id per slot, `None` for padded slots.
    frames : ndarray
        The ``L`` sampled frame indices.
    fakeness_channels : int
    """
    data: np.ndarray
    slot_track_ids: tuple
    frames: np.ndarray
    fakeness_channels: int

    @property
    def shape(self):
        return self.data.shape

    def geometry_columns(self):
        return self.data[:, ::1 + self.fakeness_channels]


def sample_frames(num_frames, L):
    """
    ``L`` frame indices spread uniformly over ``[0, num_frames)``.

    Index ``k`` maps to ``floor(k * num_frames / L)``; short videos repeat
    frames.

    Examples
    --------
    >>> sample_frames(32, 4).tolist()
    [0, 8, 16, 24]
    >>> sample_frames(2, 4).tolist()
    [0, 0, 1, 1]
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    return (np.arange(L, dtype=np.int64) * int(num_frames)) // int(L)


def fakeness_series(track, sampled_frames, fakeness_channels, pad_value=0.0):
    """
    ``(L, D)`` fakeness of ``track`` on the sampled frames, ``pad_value``
    where it is absent.
    """
    values = np.full((len(sampled_frames), fakeness_channels), float(pad_value))
    for k, frame in enumerate(np.asarray(sampled_frames).tolist()):
        obs = track.slots.get(frame)
        if obs is not None:
            values[k] = obs.fakeness
    return values


def sort_faces(tracks):
    """
    Order tracks by decreasing mean fakeness, ties by ascending track id.

    The mean runs over every frame a track appears on and over all
    fakeness channels.
    """
    return sorted(tracks, key=lambda t: (-t.mean_fakeness(), t.track_id))


def _windows(n, size, stride):
    if n == 0:
        return [[]]
    windows = []
    start = 0
    while start < n:
        windows.append(list(range(start, min(start + size, n))))
        if start + size >= n:
            break
        start += stride
    return windows


def assemble_gffs(video, tracks, cfg=None):
    """
    Build the GFF matrices of a video.

    Parameters
    ----------
    video : VideoObservations
    tracks : sequence of FaceTrack
        Tracks of ``video``, in any order.
    cfg : GffConfig, optional

    Returns
    -------
    list of GffMatrix
        One matrix per window of ``face_slots`` fakeness-sorted tracks;
        exactly one when the video has at most ``face_slots`` tracks.
    """
    if cfg is None:
        cfg = GffConfig()
    D = cfg.fakeness_channels or video.fakeness_channels
    if D != video.fakeness_channels:
        raise ShapeMismatch(
            f"Video {video.video_id} has {video.fakeness_channels} fakeness channels, configuration expects {D}")
    N = cfg.face_slots
    width = 1 + D
    frames = sample_frames(video.num_frames, cfg.frames_per_matrix)
    ordered = sort_faces(tracks)
    by_frame = video.by_frame()

    blocks = {}
    for track in ordered:
        block = np.empty((len(frames), width))
        if cfg.use_geometry:
            block[:, 0] = geometry_series(track, video, frames, by_frame).values
        else:
            block[:, 0] = cfg.pad_value
        block[:, 1:] = fakeness_series(track, frames, D, cfg.pad_value)
        blocks[track.track_id] = block

    matrices = []
    for window in _windows(len(ordered), N, cfg.stride):
        data = np.full((len(frames), N * width), float(cfg.pad_value))
        slot_ids = [None] * N
        for slot, index in enumerate(window):
            track = ordered[index]
            data[:, slot * width:(slot + 1) * width] = blocks[track.track_id]
            slot_ids[slot] = track.track_id
        matrices.append(GffMatrix(data=data, slot_track_ids=tuple(slot_ids), frames=frames, fakeness_channels=D))
    log.debug(f"Video {video.video_id}: {len(ordered)} tracks -> {len(matrices)} GFF matrices")
    return matrices


def stack_gffs(matrices):
    """Stack matrices into a ``(G, L, C)`` array."""
    return np.stack([m.data for m in matrices])


def column_names(face_slots, fakeness_channels):
    """
    Names of the GFF columns.

    Examples
    --------
    >>> column_names(2, 1)
    ['slot0_geo', 'slot0_fake0', 'slot1_geo', 'slot1_fake0']
    """
    names = []
    for k in range(face_slots):
        names.append(f"slot{k}_geo")
        names.extend(f"slot{k}_fake{d}" for d in range(fakeness_channels))
    return names


def write_gff_csv(matrices, directory, video_id):
    """
    Dump each matrix as ``<video_id>_gff<g>.csv`` in ``directory``.

    Returns
    -------
    list of str
        Paths written.
    """
    paths = []
    for g, matrix in enumerate(matrices):
        n_slots = len(matrix.slot_track_ids)
        table = Table(matrix.data, names=column_names(n_slots, matrix.fakeness_channels))
        path = os.path.join(directory, f"{video_id}_gff{g}.csv")
        table.write(path, format="ascii.csv", overwrite=True)
        paths.append(path)
    return paths
