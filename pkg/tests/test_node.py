from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from florasim.errors import NoValidSamples
from florasim.node import (
    BEACON_DUTY,
    NeighborReading,
    NodeParams,
    RoboticNode,
    derive_neighbors,
    detect,
    filtered_reading,
    geometric_weights,
    policy_step,
    raw_ir_sample,
    sense_neighbors,
)

QUIET = NodeParams(sigma=0.0)


def node(nid="n", pos=(0, 0, 0), **kw):
    return RoboticNode(nid, pos, 0, **kw)


# -- IR sampling --------------------------------------------------------------


def test_no_tips_reads_noise_only():
    assert raw_ir_sample(node(), [], np.random.default_rng(0), QUIET) == (0.0, True)


def test_tip_at_two_centimetres():
    value, valid = raw_ir_sample(node(), [(20, 0, 0)], np.random.default_rng(0), QUIET)
    assert value == pytest.approx(1.0) and valid


def test_far_red_blinds_sensor_up_close():
    lit = node(led=(0.0, 1.0))
    assert raw_ir_sample(lit, [(1, 0, 0)], np.random.default_rng(0), QUIET)[1] is False
    assert raw_ir_sample(lit, [(3, 0, 0)], np.random.default_rng(0), QUIET)[1] is True
    assert raw_ir_sample(node(), [(1, 0, 0)], np.random.default_rng(0), QUIET)[1] is True


def test_nearest_tip_counts():
    value, _ = raw_ir_sample(node(), [(100, 0, 0), (0, 20, 0)], np.random.default_rng(0), QUIET)
    assert value == pytest.approx(1.0)


def test_one_draw_per_sample():
    a, b = np.random.default_rng(9), np.random.default_rng(9)
    raw_ir_sample(node(), [], a, QUIET)
    b.normal()
    assert a.random() == b.random()


# -- filter -------------------------------------------------------------------


def test_constant_buffer():
    assert filtered_reading([0.3] * 8, geometric_weights(8)) == pytest.approx(0.3)


def test_degenerate_weights_pick_newest():
    assert filtered_reading([5.0, 1.0, 9.0], (1.0, 0.0, 0.0)) == 5.0


def test_weighted_mean_newest_first():
    assert filtered_reading([1.0, 2.0, 3.0], (0.5, 0.3, 0.2)) == pytest.approx(1.7)


def test_invalid_samples_are_skipped():
    buf = [(1.0, True), (100.0, False), (3.0, True)]
    assert filtered_reading(buf, (0.5, 0.3, 0.2)) == pytest.approx((0.5 * 1 + 0.2 * 3) / 0.7)


def test_all_invalid():
    with pytest.raises(NoValidSamples):
        filtered_reading([(1.0, False)], (1.0,))
    with pytest.raises(NoValidSamples):
        filtered_reading([], (1.0,))


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.booleans()), min_size=1, max_size=8))
def test_filtered_within_valid_range(samples):
    valid = [v for v, ok in samples if ok]
    if not valid:
        return
    out = filtered_reading(samples, geometric_weights(8))
    assert min(valid) - 1e-9 <= out <= max(valid) + 1e-9


def test_default_weights():
    w = NodeParams().weights
    assert len(w) == 8
    assert sum(w) == pytest.approx(1.0, abs=1e-12)
    assert w[1] / w[0] == pytest.approx(0.7)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        NodeParams(N=2, weights=(0.5, 0.6))


# -- detection ----------------------------------------------------------------


def test_threshold_is_inclusive():
    assert detect(QUIET.threshold, QUIET)
    assert not detect(QUIET.threshold - 1e-12, QUIET)


def quiet_detect_at(d_cm):
    value, _ = raw_ir_sample(node(), [(d_cm * 10, 0, 0)], np.random.default_rng(0), QUIET)
    return detect(filtered_reading([value] * 8, QUIET.weights), QUIET)


def test_noise_free_detection_range():
    assert quiet_detect_at(4.0)
    assert not quiet_detect_at(10.0)


@given(st.floats(0.01, 30))
def test_noise_free_step_at_five_cm(d_cm):
    expected = d_cm <= 5.0 * (1 + 1e-12)
    if abs(d_cm - 5.0) > 1e-9:
        assert quiet_detect_at(d_cm) == expected


# -- photoresistors -----------------------------------------------------------


def test_dark_neighbours_read_zero():
    nodes = {"a": node("a", neighbors=("b",)), "b": node("b", (20, 0, 0))}
    r = sense_neighbors(nodes["a"], nodes, QUIET)
    assert [(x.neighbor, x.blue, x.far_red) for x in r] == [("b", 0.0, 0.0)]


def test_lit_neighbour_at_two_centimetres():
    nodes = {"a": node("a", neighbors=("b",)), "b": node("b", (20, 0, 0), led=(1.0, 0.0))}
    assert sense_neighbors(nodes["a"], nodes, QUIET)[0].blue == pytest.approx(0.25)


def test_readings_are_independent():
    nodes = {
        "a": node("a", neighbors=("b", "c")),
        "b": node("b", (20, 0, 0)),
        "c": node("c", (0, 30, 0), led=(1.0, 0.0)),
    }
    r = {x.neighbor: x.blue for x in sense_neighbors(nodes["a"], nodes, QUIET)}
    assert r["b"] == 0.0 and r["c"] > 0.0


def test_photoresistor_clamp():
    nodes = {"a": node("a", neighbors=("b",)), "b": node("b", (1, 0, 0), led=(0.0, 1.0))}
    assert sense_neighbors(nodes["a"], nodes, QUIET)[0].far_red == pytest.approx(1.0)


# -- policy -------------------------------------------------------------------


readings = st.lists(
    st.builds(NeighborReading, st.sampled_from(["a", "b", "c"]), st.floats(0, 5), st.floats(0, 5)), max_size=3
)


@given(st.booleans(), readings)
def test_idle_stays_dark(detection, rs):
    assert policy_step(node(role="idle"), detection, rs, "idle", QUIET) == (0.0, 0.0)


@given(st.booleans(), readings)
def test_repeller_only_on_detection(detection, rs):
    blue, far_red = policy_step(node(role="repeller"), detection, rs, "repeller", QUIET)
    assert blue == 0.0
    assert far_red == (1.0 if detection else 0.0)


@given(st.booleans(), readings)
def test_policy_is_a_function_of_local_inputs(detection, rs):
    n = node(role="attractor", neighbors=("a", "b", "c"), upstream=("a",))
    elsewhere = replace(n, position=(999, 999, 999), led=(1.0, 0.0), buffer=((3.0, True),))
    assert policy_step(n, detection, rs, "attractor", QUIET) == policy_step(elsewhere, detection, rs, "attractor", QUIET)


def test_attractor_beacon_from_downstream_neighbour():
    n = node(role="attractor", neighbors=("up", "down"), upstream=("up",))
    assert policy_step(n, False, [NeighborReading("down", 1.0, 0.0)], "attractor", QUIET) == (BEACON_DUTY, 0.0)
    assert policy_step(n, False, [NeighborReading("up", 1.0, 0.0)], "attractor", QUIET) == (1.0, 0.0)
    assert policy_step(n, False, [NeighborReading("up", 0.01, 0.0)], "attractor", QUIET) == (0.0, 0.0)


def test_three_node_relay_chain():
    # nodes 4 cm apart along the path; n1 closest to the root
    params = QUIET
    nodes = {
        "n1": node("n1", (0, 0, 0), role="attractor", neighbors=("n2",)),
        "n2": node("n2", (0, 0, 40), role="attractor", neighbors=("n1", "n3"), upstream=("n1",)),
        "n3": node("n3", (0, 0, 80), role="attractor", neighbors=("n2",), upstream=("n2",)),
    }
    lit_at = {}
    for tick in range(5):
        detections = {"n1": True, "n2": False, "n3": False}
        sensed = {nid: sense_neighbors(n, nodes, params) for nid, n in nodes.items()}
        commands = {nid: policy_step(n, detections[nid], sensed[nid], n.role, params) for nid, n in nodes.items()}
        nodes = {nid: replace(n, led=commands[nid]) for nid, n in nodes.items()}
        for nid, (blue, _) in commands.items():
            if blue == 1.0:
                lit_at.setdefault(nid, tick)
    assert lit_at["n1"] == 0
    assert lit_at["n2"] - lit_at["n1"] <= 2
    assert lit_at["n3"] - lit_at["n2"] <= 2


def test_neighbours_within_radius():
    nodes = [node("n10", (0, 0, 0)), node("n2", (0, 0, 40)), node("n3", (0, 0, 100))]
    assert derive_neighbors(nodes, 45) == {"n10": ("n2",), "n2": ("n10",), "n3": ()}


def test_node_rejects_bad_led():
    with pytest.raises(ValueError):
        node(led=(1.5, 0.0))
    with pytest.raises(ValueError):
        node(role="gardener")
