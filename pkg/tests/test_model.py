import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occbench.errors import SchemaError, ScoreOutOfRange, UnknownClass, UnknownVideo, ValidationError
from occbench.model import (
    ActionTube,
    BoundingBox,
    dump_manifest,
    load_predictions,
    parse_manifest,
)


def _doc(videos=None, classes=("jump",)):
    if videos is None:
        videos = [_video("v1")]
    return {"dataset_id": "d", "class_list": list(classes), "videos": videos}


def _video(vid, tubes=None, w=64, h=48, n=10):
    if tubes is None:
        tubes = [{"tube_id": "t1", "class": "jump", "frames": {"0": [1, 2, 10, 12], "1": [2, 2, 11, 12], "2": [3, 2, 12, 12]}}]
    return {"video_id": vid, "width": w, "height": h, "frame_count": n, "frame_source": "f/{frame:03d}.png", "tubes": tubes}


def _bytes(doc):
    return json.dumps(doc).encode()


def test_minimal_manifest():
    m = parse_manifest(_bytes(_doc()))
    assert len(m.videos) == 1 and m.tube_count == 1
    tube = m.videos[0].tubes[0]
    assert tube.frame_indices == (0, 1, 2)
    assert tube.score is None and not tube.is_prediction


def test_box_past_frame_edge_is_located():
    doc = _doc([_video("v1", [{"tube_id": "t9", "class": "jump", "frames": {"0": [0, 0, 5, 5], "4": [10, 10, 64 + 5, 20]}}])])
    with pytest.raises(ValidationError) as err:
        parse_manifest(_bytes(doc))
    assert (err.value.video_id, err.value.tube_id, err.value.frame_index) == ("v1", "t9", 4)


def test_duplicate_video_id():
    with pytest.raises(ValidationError, match="duplicate video_id"):
        parse_manifest(_bytes(_doc([_video("a"), _video("a")])))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("class_list"),
        lambda d: d.update(extra=1),
        lambda d: d["videos"][0].update(fps=25),
        lambda d: d["videos"][0]["tubes"][0]["frames"].update({"x": [0, 0, 1, 1]}),
        lambda d: d["videos"][0]["tubes"][0]["frames"].update({"5": [0, 0, 1]}),
        lambda d: d["videos"][0].update(width="64"),
    ],
)
def test_schema_errors(mutate):
    doc = _doc()
    mutate(doc)
    with pytest.raises(SchemaError):
        parse_manifest(_bytes(doc))


def test_not_json():
    with pytest.raises(SchemaError):
        parse_manifest(b"{nope")
    with pytest.raises(SchemaError):
        parse_manifest(b"\xff\xfe")


def test_duplicate_frame_keys_rejected():
    raw = b'{"dataset_id":"d","class_list":["jump"],"videos":[{"video_id":"v","width":9,"height":9,"frame_count":3,' \
          b'"frame_source":"x","tubes":[{"tube_id":"t","class":"jump","frames":{"0":[0,0,1,1],"0":[0,0,2,2]}}]}]}'
    with pytest.raises(SchemaError, match="duplicate key"):
        parse_manifest(raw)


@pytest.mark.parametrize(
    "frames,msg",
    [
        ({}, "no frames"),
        ({"0": [5, 5, 5, 9]}, "degenerate"),
        ({"10": [0, 0, 1, 1]}, "frame_count"),
    ],
)
def test_invariant_violations(frames, msg):
    doc = _doc([_video("v1", [{"tube_id": "t", "class": "jump", "frames": frames}])])
    with pytest.raises(ValidationError, match=msg):
        parse_manifest(_bytes(doc))


def test_unknown_tube_class():
    doc = _doc([_video("v1", [{"tube_id": "t", "class": "swim", "frames": {"0": [0, 0, 1, 1]}}])])
    with pytest.raises(ValidationError, match="class_list"):
        parse_manifest(_bytes(doc))


def test_gaps_allowed_and_sorted():
    doc = _doc([_video("v1", [{"tube_id": "t", "class": "jump", "frames": {"7": [0, 0, 2, 2], "2": [0, 0, 1, 1]}}])])
    tube = parse_manifest(_bytes(doc)).videos[0].tubes[0]
    assert tube.frame_indices == (2, 7)


def test_box_area_half_open():
    assert BoundingBox(0, 0, 10, 10).area == 100


# -- predictions ----------------------------------------------------------------


@pytest.fixture()
def manifest():
    return parse_manifest(_bytes(_doc([_video("v1"), _video("v2")], classes=("jump", "run"))))


def _pred(vid, tid, score=0.5, cls="jump"):
    return {"video_id": vid, "tubes": [{"tube_id": tid, "class": cls, "score": score, "frames": {"0": [1, 1, 5, 5]}}]}


def test_empty_predictions(manifest):
    assert load_predictions(_bytes({"videos": []}), manifest) == {}


def test_score_out_of_range(manifest):
    with pytest.raises(ScoreOutOfRange):
        load_predictions(_bytes({"videos": [_pred("v1", "p", 1.2)]}), manifest)


def test_grouping_sizes(manifest):
    doc = {"dataset_id": "d", "videos": [_pred("v1", "a"), _pred("v2", "b"), _pred("v1", "c", cls="run")]}
    grouped = load_predictions(_bytes(doc), manifest)
    assert sorted(len(v) for v in grouped.values()) == [1, 2]
    assert [t.tube_id for t in grouped["v1"]] == ["a", "c"]
    assert all(t.is_prediction for tubes in grouped.values() for t in tubes)


def test_prediction_errors(manifest):
    with pytest.raises(UnknownVideo):
        load_predictions(_bytes({"videos": [_pred("v9", "a")]}), manifest)
    with pytest.raises(UnknownClass):
        load_predictions(_bytes({"videos": [_pred("v1", "a", cls="swim")]}), manifest)
    with pytest.raises(SchemaError):
        load_predictions(_bytes({"videos": [{"video_id": "v1", "tubes": [{"tube_id": "a", "class": "jump", "frames": {}}]}]}), manifest)


def test_manifest_with_scores_is_a_prediction_file(manifest):
    doc = json.loads(dump_manifest(manifest))
    for v in doc["videos"]:
        for t in v["tubes"]:
            t["score"] = 0.9
    grouped = load_predictions(_bytes(doc), manifest)
    assert set(grouped) == {"v1", "v2"}


# -- properties -------------------------------------------------------------------


@st.composite
def manifests(draw):
    n_videos = draw(st.integers(1, 3))
    videos = []
    for i in range(n_videos):
        w, h, n = draw(st.integers(8, 60)), draw(st.integers(8, 60)), draw(st.integers(1, 12))
        tubes = []
        for j in range(draw(st.integers(0, 3))):
            idxs = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
            frames = {}
            for t in idxs:
                x0 = draw(st.integers(0, w - 1))
                y0 = draw(st.integers(0, h - 1))
                frames[str(t)] = [x0, y0, draw(st.integers(x0 + 1, w)), draw(st.integers(y0 + 1, h))]
            tubes.append({"tube_id": f"t{j}", "class": draw(st.sampled_from(["a", "b"])), "frames": frames})
        videos.append({"video_id": f"v{i}", "width": w, "height": h, "frame_count": n, "frame_source": "x", "tubes": tubes})
    return {"dataset_id": "p", "class_list": ["a", "b"], "videos": videos}


@settings(max_examples=150, deadline=None)
@given(manifests())
def test_roundtrip(doc):
    m = parse_manifest(_bytes(doc))
    again = parse_manifest(dump_manifest(m))
    assert again == m


@settings(max_examples=150, deadline=None)
@given(manifests(), st.data())
def test_out_of_bounds_box_rejected(doc, data):
    tubes = [(v, t) for v in doc["videos"] for t in v["tubes"]]
    if not tubes:
        parse_manifest(_bytes(doc))
        return
    v, t = data.draw(st.sampled_from(tubes))
    key = data.draw(st.sampled_from(sorted(t["frames"])))
    overshoot = data.draw(st.integers(1, 20))
    if data.draw(st.booleans()):
        t["frames"][key][2] = v["width"] + overshoot
    else:
        t["frames"][key][3] = v["height"] + overshoot
    with pytest.raises(ValidationError) as err:
        parse_manifest(_bytes(doc))
    assert err.value.video_id == v["video_id"]


def test_tube_sorts_frames():
    t = ActionTube("t", "a", {3: BoundingBox(0, 0, 1, 1), 1: BoundingBox(0, 0, 1, 1)})
    assert t.frame_indices == (1, 3)
