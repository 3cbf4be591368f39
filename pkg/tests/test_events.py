import pytest

from flowseg.events import (DEFAULT_GEOMETRY, Event, GeometryError,
                            OrderingError, ParseError, SensorGeometry,
                            decode_event, encode_event, load_stream,
                            save_stream, EventStream)


def test_decode_basic():
    e = decode_event("1000 12 34 1")
    assert e == Event(12, 34, 1000, 1)
    assert e.t_seconds == pytest.approx(1e-3)


def test_encode_decode_round_trip():
    e = Event(239, 179, 123456789, -1)
    assert decode_event(encode_event(e)) == e


def test_decode_rejects_bad_polarity():
    with pytest.raises(ParseError):
        decode_event("1000 12 34 0")
    with pytest.raises(ParseError):
        decode_event("1000 12 34 2")


def test_decode_rejects_malformed():
    with pytest.raises(ParseError):
        decode_event("1000 12 34")
    with pytest.raises(ParseError):
        decode_event("1000 12 x 1")
    with pytest.raises(ParseError):
        decode_event("-5 12 34 1")


def test_decode_checks_geometry():
    geom = SensorGeometry(240, 180)
    decode_event("0 239 179 1", geom)
    with pytest.raises(GeometryError):
        decode_event("0 240 0 1", geom)
    with pytest.raises(GeometryError):
        decode_event("0 0 180 1", geom)


def test_geometry_contains():
    assert DEFAULT_GEOMETRY == SensorGeometry(240, 180)
    assert DEFAULT_GEOMETRY.contains(0, 0)
    assert not DEFAULT_GEOMETRY.contains(-1, 0)


def test_load_stream_orders_and_bounds():
    lines = ["geometry 240 180", "10 5 5 1", "20 6 5 -1"]
    stream = load_stream(lines)
    assert len(stream) == 2
    assert stream.geometry == SensorGeometry(240, 180)
    assert stream.duration_seconds == pytest.approx(1e-5)

    with pytest.raises(OrderingError) as err:
        load_stream(["geometry 240 180", "20 5 5 1", "10 6 5 1"])
    assert err.value.index == 1


def test_save_load_round_trip(tmp_path):
    stream = EventStream(SensorGeometry(64, 48),
                         [Event(1, 2, 100, 1), Event(3, 4, 250, -1)])
    path = str(tmp_path / "events.txt")
    save_stream(stream, path)
    back = load_stream(path)
    assert back.geometry == stream.geometry
    assert back.events == stream.events
