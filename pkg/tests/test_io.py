import json
import xml.etree.ElementTree as ET

import pytest

from florasim.config import config_from_dict
from florasim.engine import RunLog, log_header, run
from florasim.errors import MalformedLine
from florasim.render import COVERED, RenderOptions, render_svg
from florasim.runlog import read_log, write_log
from florasim.scenarios import benchmark_config, steering_config, y_scaffold

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def benchmark_run():
    config = benchmark_config()
    log, metrics, world = run(config)
    return config, log, metrics, world


# -- run logs -----------------------------------------------------------------


def test_empty_log_is_header_only():
    config = config_from_dict({"ticks": 1, "scaffold": y_scaffold()})
    text = write_log(RunLog(log_header(config), ()))
    assert text.count("\n") == 1
    assert read_log(text).records == ()


def test_three_ticks_three_lines():
    log, _, _ = run(steering_config(ticks=3))
    text = write_log(log)
    assert len(text.splitlines()) == 4
    assert read_log(text) == log


def test_header_has_digest_and_seed():
    log, _, _ = run(steering_config(seed=7, ticks=2))
    assert log.header["seed"] == 7
    assert len(log.header["config_digest"]) == 64
    assert "time" not in json.dumps(log.records)


def test_benchmark_log_rewrites_identically(benchmark_run):
    _, log, _, _ = benchmark_run
    text = write_log(log)
    assert write_log(read_log(text)) == text


def test_malformed_lines_are_located():
    log, _, _ = run(steering_config(ticks=3))
    lines = write_log(log).splitlines()
    with pytest.raises(MalformedLine) as info:
        read_log("\n".join(lines[:2] + ["{not json"] + lines[3:]))
    assert info.value.line_number == 3
    with pytest.raises(MalformedLine) as info:
        read_log("\n".join(lines[:1] + lines[2:]))
    assert info.value.line_number == 2
    with pytest.raises(MalformedLine) as info:
        read_log("")
    assert info.value.line_number == 1
    with pytest.raises(MalformedLine):
        read_log('{"format": "other"}\n')


# -- rendering ----------------------------------------------------------------


def test_empty_world_is_just_a_canvas():
    doc = ET.fromstring(render_svg(None))
    assert doc.tag == SVG + "svg"
    assert [el.get("id") for el in doc.iter() if el.get("id")] == ["canvas", "regions"]


def test_rendering_is_deterministic(benchmark_run):
    config, _, _, world = benchmark_run
    assert render_svg(world, config.regions) == render_svg(world, config.regions)


def _inside(x, y, rect):
    return rect[0] < x < rect[2] and rect[1] < y < rect[3]


def test_window_holds_no_green_strokes(benchmark_run):
    config, _, _, world = benchmark_run
    doc = ET.fromstring(render_svg(world, config.regions))
    win = doc.find(f".//{SVG}rect[@id='region-window']")
    x, y, w, h = (float(win.get(k)) for k in ("x", "y", "width", "height"))
    rect = (x, y, x + w, y + h)
    green = [el for el in doc.iter(SVG + "line") if el.get("stroke") == COVERED]
    assert green
    for el in green:
        x1, y1, x2, y2 = (float(el.get(k)) for k in ("x1", "y1", "x2", "y2"))
        for k in range(101):
            t = k / 100
            assert not _inside(x1 + (x2 - x1) * t, y1 + (y2 - y1) * t, rect), el.get("id")


def test_svg_groups_and_glyphs(benchmark_run):
    config, _, _, world = benchmark_run
    doc = ET.fromstring(render_svg(world, config.regions, RenderOptions(plane="xy")))
    groups = [g.get("id") for g in doc.findall(f"{SVG}g")]
    assert groups == ["regions", "scaffold", "nodes", "tips"]
    nodes = doc.findall(f".//{SVG}g[@id='nodes']/{SVG}circle")
    assert [n.get("id") for n in nodes] == [f"node-{nid}" for nid in world.nodes]
    classes = {r.get("class"): r.get("stroke") for r in doc.findall(f".//{SVG}g[@id='regions']/{SVG}rect")}
    assert classes["window"] == "#1f5fd0" and classes["damage"] == "#d02020"


def test_bad_plane():
    with pytest.raises(ValueError):
        RenderOptions(plane="zx")
