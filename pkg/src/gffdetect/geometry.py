"""
Geometric characteristic of a face on a frame.

The characteristic of face ``i`` is its share of the frame area multiplied
by the summed shares of every face detected on that frame::

    g_i = a_i * sum_j a_j,    a_k = w_k * h_k / (W * H)

so a face matters more when it is large and when the frame is dominated by
faces.  Faces absent from a frame get 0.  Overlapping boxes are taken at
face value.
"""

from dataclasses import dataclass
import logging

import numpy as np

from .exceptions import BoxNotInFrameList


__all__ = ["GeometrySeries", "relative_areas", "geometric_feature", "geometry_series"]


log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass(frozen=True, eq=False)
class GeometrySeries:
    """
    Geometric characteristic of one track over a list of frames.

    Attributes
    ----------
    track_id : int
    frames : ndarray
        Frame indices the values are aligned with.
    values : ndarray
        One value per frame, 0 where the track has no face.
    """
    track_id: int
    frames: np.ndarray
    values: np.ndarray


def relative_areas(bboxes, frame_dims):
    """
    Share of the frame covered by each box.

    Parameters
    ----------
    bboxes : sequence of (x, y, w, h)
    frame_dims : FrameDims

    Returns
    -------
    ndarray
    """
    if len(bboxes) == 0:
        return np.zeros(0)
    boxes = np.asarray(bboxes, dtype=np.float64)
    return boxes[:, 2] * boxes[:, 3] / (float(frame_dims.width) * float(frame_dims.height))


def geometric_feature(face_bbox, all_bboxes_in_frame, frame_dims):
    """
    Geometric characteristic of one face.

    Parameters
    ----------
    face_bbox : (x, y, w, h)
        Box of the face of interest; must be one of ``all_bboxes_in_frame``.
    all_bboxes_in_frame : sequence of (x, y, w, h)
        Every face detected on the frame.
    frame_dims : FrameDims

    Returns
    -------
    float

    Examples
    --------
    >>> from gffdetect.ingest import FrameDims
    >>> boxes = [(0, 0, 50, 50), (50, 50, 50, 50)]
    >>> geometric_feature(boxes[0], boxes, FrameDims(100, 100))
    0.125
    """
    face = tuple(float(v) for v in face_bbox)
    boxes = [tuple(float(v) for v in b) for b in all_bboxes_in_frame]
    if face not in boxes:
        raise BoxNotInFrameList(f"Box {face} is not among the {len(boxes)} boxes of the frame")
    areas = relative_areas(boxes, frame_dims)
    return float(areas[boxes.index(face)] * areas.sum())


def geometry_series(track, video, sampled_frames, by_frame=None):
    """
    Geometric characteristic of ``track`` on each of ``sampled_frames``.

    Parameters
    ----------
    track : FaceTrack
    video : VideoObservations
    sampled_frames : sequence of int
        Frame indices, repeats allowed.
    by_frame : dict, optional
        ``video.by_frame()``, passed in to avoid regrouping per track.

    Returns
    -------
    GeometrySeries
    """
    if by_frame is None:
        by_frame = video.by_frame()
    frames = np.asarray(sampled_frames, dtype=np.int64)
    values = np.zeros(len(frames))
    cache = {}
    for k, frame in enumerate(frames.tolist()):
        obs = track.slots.get(frame)
        if obs is None:
            continue
        if frame not in cache:
            cache[frame] = relative_areas([o.bbox for o in by_frame[frame]], video.frame_dims)
        # F_t counts every face on the frame, not only tracked ones
        values[k] = obs.area / float(video.frame_dims.area) * cache[frame].sum()
    return GeometrySeries(track_id=track.track_id, frames=frames, values=values)
