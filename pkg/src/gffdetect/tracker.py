"""
Grouping of face observations into per-person tracks.

Frames are processed in order.  Every track keeps a weighted moving
average (WMA) of the embeddings of its previous appearances; a face joins
the track whose WMA vector is nearest, provided the distance is below the
configured threshold, otherwise it opens a new track.  Matching within a
frame is greedy and one-to-one: candidate (face, track) pairs are taken in
order of increasing distance, ties broken by track id and then by the
face's position in the frame.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .config import TrackerConfig
from .exceptions import DimensionMismatch, EmptyHistory


__all__ = [
    "FaceTrack",
    "wma_update",
    "embedding_distance",
    "assign_frame",
    "build_tracks",
    "track_report",
]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass
class FaceTrack:
    """
    Observations attributed to one person.

    Attributes
    ----------
    track_id : int
        Order of first appearance in the video.
    slots : dict
        frame index -> `~gffdetect.ingest.FaceObservation`, at most one per frame.
    wma_history : list of ndarray
        Moving-average vector after each appearance, oldest first.
    """
    track_id: int
    slots: dict = field(default_factory=dict)
    wma_history: list = field(default_factory=list)

    @property
    def wma(self):
        """Current moving-average vector."""
        return self.wma_history[-1]

    @property
    def frames(self):
        return sorted(self.slots)

    @property
    def observations(self):
        return [self.slots[f] for f in self.frames]

    def __len__(self):
        return len(self.slots)

    def recent_history(self, window):
        """The last ``window`` moving-average vectors, most recent first."""
        return self.wma_history[-window:][::-1]

    def mean_fakeness(self):
        """Fakeness averaged over every appearance and channel."""
        if not self.slots:
            return 0.0
        return float(np.mean([self.slots[f].fakeness for f in self.frames]))

    def add(self, obs, wma):
        if obs.frame_index in self.slots:
            raise ValueError(f"Track {self.track_id} already holds a face on frame {obs.frame_index}")
        self.slots[obs.frame_index] = obs
        self.wma_history.append(wma)


def wma_update(new_embedding, history, alpha):
    """
    Moving average of a track's embedding after a new appearance.

    Parameters
    ----------
    new_embedding : array-like
        Embedding of the face that joined the track.
    history : sequence of array-like
        Previous moving-average vectors, most recent first, already cut
        to the averaging window.
    alpha : float
        Weight of the new embedding, in (0, 1].

    Returns
    -------
    ndarray
        ``alpha * e + (1 - alpha) * sum_f (1 - alpha)**f * h_f / sum_f (1 - alpha)**f``
        with ``f`` running from 1 over the history.

    Examples
    --------
    >>> wma_update([0.0, 1.0], [[1.0, 0.0]], 0.5).tolist()
    [0.5, 0.5]
    """
    e = np.asarray(new_embedding, dtype=np.float64)
    if len(history) == 0:
        raise EmptyHistory("A moving-average update needs at least one previous vector")
    shapes = [np.shape(h) for h in history]
    if e.ndim != 1 or any(s != e.shape for s in shapes):
        raise DimensionMismatch(f"Embedding shape {e.shape} does not match history shapes {shapes}")
    past = np.asarray(history, dtype=np.float64)
    if alpha == 1:
        return e.copy()
    # (1 - alpha)**f over its own sum, shifted to start at f = 0
    weights = (1.0 - alpha) ** np.arange(len(past))
    smoothed = weights @ past / weights.sum()
    return alpha * e + (1.0 - alpha) * smoothed


def embedding_distance(a, b, metric="euclidean"):
    """
    Distance between embeddings ``a`` (n, E) and ``b`` (m, E).

    Returns
    -------
    ndarray
        (n, m) matrix.  Cosine distance treats zero vectors as orthogonal
        to everything.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"Embedding lengths differ: {a.shape[1]} and {b.shape[1]}")
    if metric == "euclidean":
        return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    norm_a = np.linalg.norm(a, axis=1)
    norm_b = np.linalg.norm(b, axis=1)
    denom = np.outer(norm_a, norm_b)
    dots = a @ b.T
    cos = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return 1.0 - cos


def assign_frame(frame_obs, active_tracks, cfg, window=1, next_track_id=None):
    """
    Attach the faces of one frame to tracks.

    Parameters
    ----------
    frame_obs : sequence of FaceObservation
        All faces of a single frame, in input order.
    active_tracks : sequence of FaceTrack
        Tracks carrying a current moving-average vector.  Receiving tracks
        are updated in place.
    cfg : TrackerConfig
    window : int
        Number of past moving-average vectors entering an update.
    next_track_id : int, optional
        Id of the first new track; defaults to one past the largest
        active id.

    Returns
    -------
    assignments : list of FaceTrack
        Track of each face, aligned with ``frame_obs``.
    new_tracks : list of FaceTrack
        Tracks opened by this frame, in face order.
    """
    frame_obs = list(frame_obs)
    tracks = sorted(active_tracks, key=lambda t: t.track_id)
    if next_track_id is None:
        next_track_id = max((t.track_id for t in tracks), default=-1) + 1

    matched = {}
    if frame_obs and tracks:
        dist = embedding_distance(
            [obs.embedding for obs in frame_obs],
            [t.wma for t in tracks],
            cfg.distance_metric,
        )
        candidates = [
            (dist[i, j], tracks[j].track_id, i, j)
            for i in range(len(frame_obs))
            for j in range(len(tracks))
            if dist[i, j] < cfg.threshold
        ]
        candidates.sort(key=lambda c: c[:3])
        used_tracks = set()
        for d, track_id, i, j in candidates:
            if i in matched or j in used_tracks:
                continue
            matched[i] = tracks[j]
            used_tracks.add(j)

    assignments = []
    new_tracks = []
    for i, obs in enumerate(frame_obs):
        track = matched.get(i)
        if track is None:
            track = FaceTrack(next_track_id)
            next_track_id += 1
            track.add(obs, np.array(obs.embedding, dtype=np.float64))
            new_tracks.append(track)
        else:
            wma = wma_update(obs.embedding, track.recent_history(window), cfg.alpha)
            track.add(obs, wma)
        assignments.append(track)
    return assignments, new_tracks


def build_tracks(video, cfg=None):
    """
    Partition every observation of ``video`` into per-person tracks.

    Parameters
    ----------
    video : VideoObservations
    cfg : TrackerConfig, optional

    Returns
    -------
    list of FaceTrack
        Ordered by track id, i.e. by first appearance.
    """
    if cfg is None:
        cfg = TrackerConfig()
    window = cfg.window(video.num_frames)
    tracks = []
    for frame_index, frame_obs in sorted(video.by_frame().items()):
        assignments, new_tracks = assign_frame(
            frame_obs, tracks, cfg, window=window, next_track_id=len(tracks))
        tracks.extend(new_tracks)
        log.debug(f"{video.video_id} frame {frame_index}: "
                  f"tracks {[t.track_id for t in assignments]}")
    log.debug(f"Video {video.video_id}: {len(video.observations)} faces grouped into {len(tracks)} tracks")
    return tracks


def _spans(frames):
    spans = []
    for f in frames:
        if spans and f == spans[-1][1] + 1:
            spans[-1][1] = f
        else:
            spans.append([f, f])
    return spans


def track_report(video, tracks):
    """
    Summaries of ``tracks`` suitable for one JSON line each.
    """
    report = []
    for track in tracks:
        frames = track.frames
        report.append({
            "video_id": video.video_id,
            "track_id": track.track_id,
            "num_observations": len(frames),
            "spans": _spans(frames),
            "frames": frames,
            "mean_fakeness": track.mean_fakeness(),
            "mean_area": float(np.mean([track.slots[f].area for f in frames])) / video.frame_dims.area,
        })
    return report
