import math

import pytest
from hypothesis import given, settings, strategies as st

from florasim.errors import (
    BadFilamentCount,
    BadSegment,
    CycleWithoutFusionMark,
    DisconnectedGraph,
    EmptyGraph,
    MissingRoot,
)
from florasim.scenarios import y_scaffold
from florasim.world import (
    LightSource,
    Region,
    StimulusField,
    build_scaffold,
    distance,
    nearest_segment,
    project_onto_segment,
    sample_stimulus,
)
from strategies import random_trees


def line(n_from, n_to, sid=0, filaments=1):
    return {"id": sid, "from": n_from, "to": n_to, "filaments": filaments}


def test_single_node_graph_is_valid():
    g = build_scaffold({"nodes": [{"id": 0, "pos": [0, 0, 0]}], "root": 0})
    assert g.leaves() == [0]
    assert not g.segments


def test_segment_length_comes_from_positions():
    g = build_scaffold(
        {"nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [0, 0, 100]}], "segments": [line(0, 1, filaments=8)], "root": 0}
    )
    assert g.segments[0].length == 100.0
    assert g.segments[0].filaments == 8


def test_y_scaffold_has_one_bifurcation():
    g = build_scaffold(y_scaffold())
    assert len(g.segments) == 3
    out_degree = {n: len(c) for n, c in g.children.items()}
    assert sorted(out_degree.values()) == [0, 0, 1, 2]


@pytest.mark.parametrize(
    "spec, error, ids",
    [
        ({"nodes": [{"id": 0, "pos": [0, 0, 0]}], "root": 5}, MissingRoot, (5,)),
        (
            {"nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [1, 0, 0]}], "segments": [line(0, 1, filaments=0)], "root": 0},
            BadFilamentCount,
            (0,),
        ),
        (
            {"nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [1, 0, 0]}, {"id": 2, "pos": [5, 0, 0]}], "segments": [line(0, 1)], "root": 0},
            DisconnectedGraph,
            (2,),
        ),
        (
            {
                "nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [1, 0, 0]}, {"id": 2, "pos": [0, 1, 0]}],
                "segments": [line(0, 1, 0), line(0, 2, 1), line(1, 2, 2)],
                "root": 0,
            },
            CycleWithoutFusionMark,
            (2,),
        ),
    ],
)
def test_invalid_specs_name_offending_ids(spec, error, ids):
    with pytest.raises(error) as info:
        build_scaffold(spec)
    assert info.value.ids == ids


def test_marked_fusion_edge_closes_a_loop():
    g = build_scaffold(
        {
            "nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [1, 0, 0]}, {"id": 2, "pos": [0, 1, 0]}],
            "segments": [line(0, 1, 0), line(0, 2, 1), {**line(1, 2, 2), "fusion": True}],
            "root": 0,
        }
    )
    assert [s.id for s in g.tree_segments()] == [0, 1]


def test_segment_pointing_at_root_is_rejected():
    with pytest.raises(BadSegment):
        build_scaffold({"nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [1, 0, 0]}], "segments": [line(1, 0)], "root": 0})


def test_explicit_length_must_match_geometry():
    spec = {"nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [10, 0, 0]}], "segments": [{**line(0, 1), "length": 11}], "root": 0}
    with pytest.raises(BadSegment):
        build_scaffold(spec)


def test_spec_round_trip():
    g = build_scaffold(y_scaffold())
    assert build_scaffold(g.to_spec()) == g


# -- stimulus -----------------------------------------------------------------


def test_ambient_only():
    field = StimulusField((), {"blue": 0.3})
    assert sample_stimulus(field, (5, 7, 9), "blue") == 0.3


def test_inverse_square_in_centimetres():
    field = StimulusField((LightSource((0, 0, 0), "blue", 4.0),))
    assert sample_stimulus(field, (20, 0, 0), "blue") == pytest.approx(1.0)


def test_sources_add_up():
    one = StimulusField((LightSource((0, 0, 0), "blue", 4.0),))
    two = StimulusField((LightSource((0, 0, 0), "blue", 4.0), LightSource((60, 0, 0), "blue", 4.0)))
    p = (30, 0, 0)
    assert sample_stimulus(two, p, "blue") == pytest.approx(2 * sample_stimulus(one, p, "blue"))


def test_other_kinds_are_ignored():
    field = StimulusField((LightSource((0, 0, 0), "far-red", 4.0),), {"blue": 0.1})
    assert sample_stimulus(field, (20, 0, 0), "blue") == 0.1


def test_clamp_near_source():
    field = StimulusField((LightSource((0, 0, 0), "blue", 1.0),))
    assert sample_stimulus(field, (0, 0, 0), "blue") == pytest.approx(1.0 / 0.04)
    assert sample_stimulus(field, (1, 0, 0), "blue") == pytest.approx(1.0 / 0.04)


def test_negative_intensity_rejected():
    with pytest.raises(ValueError):
        StimulusField((LightSource((0, 0, 0), "blue", -1.0),))


@given(st.floats(0, 500), st.floats(0, 500), st.floats(0, 100))
def test_stimulus_nonincreasing_with_distance(d1, d2, intensity):
    field = StimulusField((LightSource((0, 0, 0), "far-red", intensity),), {"far-red": 0.2})
    near, far = sorted((d1, d2))
    assert sample_stimulus(field, (near, 0, 0), "far-red") >= sample_stimulus(field, (far, 0, 0), "far-red")


@given(st.tuples(*[st.floats(-1e3, 1e3)] * 3))
def test_dark_source_leaves_ambient(point):
    field = StimulusField((LightSource((1, 2, 3), "blue", 0.0),), {"blue": 0.7})
    assert sample_stimulus(field, point, "blue") == 0.7


# -- regions ------------------------------------------------------------------


def test_region_clip_interval():
    r = Region("w", "window", (10, -1, -1), (20, 1, 1))
    assert r.clip((0, 0, 0), (40, 0, 0)) == pytest.approx((0.25, 0.5))
    assert r.clip((0, 5, 0), (40, 5, 0)) is None


def test_region_rejects_inverted_box():
    with pytest.raises(ValueError):
        Region("w", "window", (1, 0, 0), (0, 1, 1))


# -- nearest segment ----------------------------------------------------------


def two_segments():
    return build_scaffold(
        {
            "nodes": [{"id": 0, "pos": [0, 0, 0]}, {"id": 1, "pos": [100, 0, 0]}, {"id": 2, "pos": [0, 100, 0]}],
            "segments": [line(0, 1, 0), line(0, 2, 1)],
            "root": 0,
        }
    )


def test_point_on_midpoint():
    assert nearest_segment(two_segments(), (50, 0, 0)) == (0, 0.5, 0.0)


def test_projection_clamps_beyond_end():
    sid, t, d = nearest_segment(two_segments(), (130, 0, 0))
    assert (sid, t) == (0, 1.0)
    assert d == pytest.approx(30.0)


def test_equidistant_tie_goes_to_lowest_id():
    sid, _, _ = nearest_segment(two_segments(), (50, 50, 0))
    assert sid == 0


def test_empty_graph():
    g = build_scaffold({"nodes": [{"id": 0, "pos": [0, 0, 0]}], "root": 0})
    with pytest.raises(EmptyGraph):
        nearest_segment(g, (0, 0, 0))


@settings(max_examples=60, deadline=None)
@given(random_trees(max_nodes=51), st.tuples(*[st.floats(-300, 300)] * 3))
def test_nearest_segment_beats_every_endpoint(graph, point):
    if not graph.segments:
        return
    sid, t, d = nearest_segment(graph, point)
    assert 0.0 <= t <= 1.0
    brute = min(
        project_onto_segment(graph.nodes[s.src], graph.nodes[s.dst], point)[1] for s in graph.segments.values()
    )
    assert d == pytest.approx(brute, abs=1e-9)
    for n in graph.nodes.values():
        assert d <= distance(n, point) + 1e-9


def test_depth_and_paths():
    g = build_scaffold(y_scaffold())
    assert g.path_segments(3) == [0, 2]
    assert g.depth_mm(2, 0.5) == pytest.approx(125.0)
    assert g.subtree_leaf_counts()[0] == 2
    assert math.isclose(g.segments[1].length, 50.0)
