import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gffdetect.exceptions import MalformedLine, MissingHeader, InvariantViolation, IoFailure, DataError
from gffdetect.ingest import (
    FaceObservation, parse_observations, write_observations, validate_video, read_video, write_video,
)

from videos import make_video, face, two_person_video, header_line, body_line


def stream(*trees):
    return "".join(json.dumps(t) + "\n" for t in trees)


def test_parse_minimal():
    video = parse_observations(stream(header_line(), body_line(), body_line(frame=2, x=50)))
    assert video.video_id == "v"
    assert video.label is None
    assert video.frame_dims.width == 100
    assert len(video) == 2
    obs = video.observations[1]
    assert obs.frame_index == 2
    assert obs.bbox == (50.0, 10.0, 20.0, 20.0)
    assert obs.embedding.tolist() == [1.0, 0.0]
    assert obs.fakeness.tolist() == [0.5]


def test_parse_header_only():
    video = parse_observations(stream(header_line(label=1)))
    assert video.label == 1
    assert video.observations == ()


def test_blank_lines_ignored():
    text = "\n" + stream(header_line()) + "\n   \n" + stream(body_line())
    assert len(parse_observations(text)) == 1


def test_parse_accepts_binary_file():
    data = stream(header_line(), body_line()).encode("utf-8")
    assert len(parse_observations(io.BytesIO(data))) == 1


def test_empty_stream():
    with pytest.raises(MissingHeader):
        parse_observations("")


def test_body_before_header():
    with pytest.raises(MissingHeader):
        parse_observations(stream(body_line(), header_line()))


@pytest.mark.parametrize("line", ["{not json", "[1, 2]", "17"])
def test_malformed_line(line):
    text = stream(header_line()) + line + "\n"
    with pytest.raises(MalformedLine) as err:
        parse_observations(text)
    assert err.value.line_no == 2


def test_invalid_utf8():
    data = stream(header_line()).encode("utf-8") + b"\xff\xfe\n"
    with pytest.raises(MalformedLine):
        parse_observations(data)


@pytest.mark.parametrize(
    "changes,field",
    [
        ({"frame": 4}, "frame"),
        ({"frame": -1}, "frame"),
        ({"w": 0}, "bbox"),
        ({"x": 90}, "bbox"),
        ({"embedding": [1.0]}, "embedding"),
        ({"fakeness": [1.5]}, "fakeness"),
        ({"fakeness": [0.5, 0.5]}, "fakeness"),
    ],
)
def test_invariant_violations(changes, field):
    with pytest.raises(InvariantViolation) as err:
        parse_observations(stream(header_line(), body_line(**changes)))
    assert err.value.field == field
    assert err.value.line_no == 2


def test_missing_body_field():
    body = body_line()
    del body["embedding"]
    with pytest.raises(InvariantViolation) as err:
        parse_observations(stream(header_line(), body))
    assert err.value.field == "embedding"


def test_unknown_header_field():
    with pytest.raises(InvariantViolation) as err:
        parse_observations(stream(header_line(fps=25)))
    assert err.value.line_no == 1


@pytest.mark.parametrize("label", [2, True, "fake"])
def test_bad_label(label):
    with pytest.raises(InvariantViolation) as err:
        parse_observations(stream(header_line(label=label)))
    assert err.value.field == "label"


def test_unsorted_frames():
    with pytest.raises(InvariantViolation) as err:
        parse_observations(stream(header_line(), body_line(frame=2), body_line(frame=1)))
    assert err.value.field == "frame"
    assert err.value.line_no == 3


def test_errors_are_data_errors():
    assert issubclass(InvariantViolation, DataError)
    assert issubclass(MalformedLine, ValueError)


def test_write_then_parse_is_identity():
    video = two_person_video(label=1)
    buff = io.BytesIO()
    size = write_observations(video, buff)
    assert size == len(buff.getvalue())
    buff.seek(0)
    assert parse_observations(buff) == video


def test_write_to_text_sink():
    video = two_person_video()
    buff = io.StringIO()
    write_observations(video, buff)
    assert parse_observations(buff.getvalue()) == video


def test_serialization_is_canonical():
    video = two_person_video()
    first, second = io.BytesIO(), io.BytesIO()
    write_observations(video, first)
    write_observations(parse_observations(first.getvalue()), second)
    assert first.getvalue() == second.getvalue()


def test_read_write_files(tmp_path):
    video = two_person_video()
    path = tmp_path / "v.jsonl"
    write_video(video, path)
    assert read_video(path) == video


def test_read_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        read_video(tmp_path / "missing.jsonl")


def test_observation_arrays_are_read_only():
    obs = face(0, (0, 0, 10, 10), [1.0, 0.0])
    with pytest.raises(ValueError):
        obs.embedding[0] = 2.0


def test_validate_video_in_memory():
    validate_video(two_person_video())
    bad = make_video([face(0, (95, 0, 10, 10), [1.0, 0.0])])
    with pytest.raises(InvariantViolation) as err:
        validate_video(bad)
    assert err.value.field == "bbox"


coordinate = st.integers(min_value=0, max_value=80)


@given(
    st.lists(
        st.tuples(st.integers(0, 9), coordinate, coordinate, st.integers(1, 20),
                  st.floats(-1, 1), st.floats(0, 1)),
        max_size=20,
    )
)
@settings(max_examples=50, deadline=None)
def test_roundtrip_property(rows):
    observations = [
        FaceObservation(frame, (x, y, side, side), [e, 1.0 - e], [p])
        for frame, x, y, side, e, p in rows
    ]
    video = make_video(observations, num_frames=10)
    buff = io.BytesIO()
    write_observations(video, buff)
    parsed = parse_observations(buff.getvalue())
    assert parsed == video
    assert all(np.array_equal(a.embedding, b.embedding) for a, b in zip(parsed.observations, video.observations))
