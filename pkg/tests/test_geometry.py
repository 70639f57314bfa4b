import pytest
from hypothesis import given, settings, strategies as st

from gffdetect.exceptions import BoxNotInFrameList
from gffdetect.geometry import relative_areas, geometric_feature, geometry_series
from gffdetect.ingest import FrameDims
from gffdetect.tracker import build_tracks

from oracles import geometry_reference
from videos import make_video, face, unit, two_person_video


def test_single_face_is_area_squared():
    box = (0, 0, 50, 20)
    assert geometric_feature(box, [box], FrameDims(100, 100)) == pytest.approx(0.1 ** 2)


def test_full_frame_face():
    box = (0, 0, 64, 48)
    assert geometric_feature(box, [box], FrameDims(64, 48)) == pytest.approx(1.0)


def test_box_must_be_listed():
    with pytest.raises(BoxNotInFrameList):
        geometric_feature((0, 0, 10, 10), [(0, 0, 20, 20)], FrameDims(100, 100))


def test_relative_areas_empty():
    assert relative_areas([], FrameDims(10, 10)).shape == (0,)


def test_larger_face_scores_higher():
    small, large = (0, 0, 10, 10), (40, 40, 50, 50)
    dims = FrameDims(100, 100)
    boxes = [small, large]
    assert geometric_feature(large, boxes, dims) > geometric_feature(small, boxes, dims)


def test_geometry_series_zero_where_absent():
    observations = [face(0, (0, 0, 10, 10), unit(0.0)), face(2, (0, 0, 20, 20), unit(0.0)),
                    face(2, (50, 50, 20, 20), unit(3.0))]
    video = make_video(observations, num_frames=4)
    track = build_tracks(video)[0]
    series = geometry_series(track, video, [0, 1, 2, 2])
    assert series.values.tolist() == pytest.approx([0.0001, 0.0, 0.0032, 0.0032])


def test_geometry_series_two_person_video():
    video = two_person_video(num_frames=4)
    tracks = build_tracks(video)
    series = geometry_series(tracks[1], video, [0, 3])
    # 0.16 * (0.04 + 0.16)
    assert series.values.tolist() == pytest.approx([0.032, 0.032])


box = st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(1, 50), st.integers(1, 50))


@given(st.lists(box, min_size=1, max_size=8), st.data())
@settings(max_examples=1000, deadline=None)
def test_matches_reference(boxes, data):
    target = data.draw(st.sampled_from(boxes))
    value = geometric_feature(target, boxes, FrameDims(100, 100))
    assert value == pytest.approx(geometry_reference(target, boxes, 100, 100))
    assert 0 < value
