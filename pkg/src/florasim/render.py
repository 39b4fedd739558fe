"""Deterministic SVG snapshots of a world state."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

from .world import natural_key

COVERED = "#2e8b57"
BARE = "#9a9a9a"
REGION_STROKES = {"window": "#1f5fd0", "damage": "#d02020", "target": "#c8a000", "occupied-space": "#7a7a7a"}
_AXES = {"xz": (0, 2), "xy": (0, 1), "yz": (1, 2)}


@dataclass(frozen=True)
class RenderOptions:
    plane: str = "xz"
    scale: float = 2.0  # pixels per millimetre
    margin: float = 20.0  # pixels

    def __post_init__(self):
        if self.plane not in _AXES:
            raise ValueError(f"plane must be one of {sorted(_AXES)}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def _led_fill(blue: float, far_red: float) -> str:
    if blue <= 0 and far_red <= 0:
        return "#ffffff"
    r = round(160 * far_red)  # far-red reads as a dark red
    b = round(255 * blue)
    return f"#{r:02x}00{b:02x}"


def render_svg(world, regions=(), options: RenderOptions = RenderOptions()) -> str:
    """SVG 1.1 document of scaffold, plant cover, regions, nodes and tips.

    ``world`` may be ``None`` for an empty canvas. Elements are emitted in
    id order inside fixed groups so equal worlds give identical bytes.
    """
    i, j = _AXES[options.plane]
    pts = []
    if world is not None:
        pts += list(world.graph.nodes.values()) + [n.position for n in world.nodes.values()]
    for r in regions:
        pts += [r.lo, r.hi]
    if pts:
        u0, u1 = min(p[i] for p in pts), max(p[i] for p in pts)
        v0, v1 = min(p[j] for p in pts), max(p[j] for p in pts)
    else:
        u0 = u1 = v0 = v1 = 0.0
    s, m = options.scale, options.margin
    width, height = (u1 - u0) * s + 2 * m, (v1 - v0) * s + 2 * m

    def xy(p):
        return (m + (p[i] - u0) * s, m + (v1 - p[j]) * s)

    def num(x: float) -> str:
        text = f"{x:.3f}".rstrip("0").rstrip(".")
        return "0" if text == "-0" else text

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{num(width)}" height="{num(height)}" '
        f'viewBox="0 0 {num(width)} {num(height)}">',
        f'<rect id="canvas" x="0" y="0" width="{num(width)}" height="{num(height)}" fill="#ffffff"/>',
    ]

    out.append('<g id="regions" fill="none" stroke-width="2">')
    for r in sorted(regions, key=lambda r: natural_key(r.id)):
        (x0, y0), (x1, y1) = xy(r.lo), xy(r.hi)
        out.append(
            f'<rect id={quoteattr("region-" + r.id)} class={quoteattr(r.label)} x="{num(min(x0, x1))}" y="{num(min(y0, y1))}" '
            f'width="{num(abs(x1 - x0))}" height="{num(abs(y1 - y0))}" stroke="{REGION_STROKES[r.label]}"/>'
        )
    out.append("</g>")

    if world is not None:
        g = world.graph
        out.append('<g id="scaffold" stroke-linecap="round">')
        for sid, seg in g.segments.items():
            (x0, y0), (x1, y1) = xy(g.nodes[seg.src]), xy(g.nodes[seg.dst])
            dash = ' stroke-dasharray="4 3"' if seg.fusion else ""
            out.append(
                f'<line id="seg-{sid}" class="bare" x1="{num(x0)}" y1="{num(y0)}" x2="{num(x1)}" y2="{num(y1)}" '
                f'stroke="{BARE}" stroke-width="{num(1 + 0.25 * seg.filaments)}"{dash}/>'
            )
        for sid in sorted(world.body.spans):
            for k, (a, b) in enumerate(world.body.spans[sid]):
                (x0, y0), (x1, y1) = xy(g.point_at(sid, a)), xy(g.point_at(sid, b))
                out.append(
                    f'<line id="cov-{sid}-{k}" class="covered" x1="{num(x0)}" y1="{num(y0)}" x2="{num(x1)}" y2="{num(y1)}" '
                    f'stroke="{COVERED}" stroke-width="3"/>'
                )
        out.append("</g>")

        out.append('<g id="nodes" stroke="#000000" stroke-width="1">')
        for nid, n in world.nodes.items():
            x, y = xy(n.position)
            out.append(
                f'<circle id={quoteattr("node-" + nid)} class={quoteattr(n.role)} cx="{num(x)}" cy="{num(y)}" r="5" '
                f'fill="{_led_fill(*n.led)}"/>'
            )
        out.append("</g>")

        out.append(f'<g id="tips" fill="{COVERED}">')
        for t in sorted(world.tips, key=lambda t: t.id):
            if t.status == "removed":
                continue
            x, y = xy(g.point_at(t.segment, t.fraction))
            out.append(f'<circle id="tip-{t.id}" class="{t.status}" cx="{num(x)}" cy="{num(y)}" r="3"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
