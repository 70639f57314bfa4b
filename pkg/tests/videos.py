"""
Hand-built videos for the tests.
"""
import math

import numpy as np

from gffdetect.ingest import FrameDims, FaceObservation, VideoObservations


def unit(angle):
    """2-vector on the unit circle."""
    return [math.cos(angle), math.sin(angle)]


def face(frame, bbox, embedding, fakeness=0.5):
    return FaceObservation(frame, bbox, embedding, np.atleast_1d(fakeness))


def make_video(observations=(), num_frames=8, width=100, height=100, embedding_dim=2,
               fakeness_channels=1, label=None, video_id="v"):
    observations = sorted(observations, key=lambda obs: obs.frame_index)
    return VideoObservations(
        video_id=video_id,
        label=label,
        frame_dims=FrameDims(width, height),
        num_frames=num_frames,
        observations=observations,
        embedding_dim=embedding_dim,
        fakeness_channels=fakeness_channels,
    )


def two_person_video(num_frames=8, label=None):
    """
    A small low-fakeness face (track 0) and a large high-fakeness face
    (track 1), both present on every frame.
    """
    observations = []
    for t in range(num_frames):
        observations.append(face(t, (0, 0, 20, 20), unit(0.0), 0.1))
        observations.append(face(t, (50, 50, 40, 40), unit(math.pi / 2), 0.9))
    return make_video(observations, num_frames=num_frames, label=label)


def header_line(**changes):
    header = {
        "video_id": "v",
        "label": None,
        "width": 100,
        "height": 100,
        "num_frames": 4,
        "embedding_dim": 2,
        "fakeness_channels": 1,
    }
    header.update(changes)
    return header


def body_line(**changes):
    body = {"frame": 0, "x": 10, "y": 10, "w": 20, "h": 20, "embedding": [1.0, 0.0], "fakeness": [0.5]}
    body.update(changes)
    return body
