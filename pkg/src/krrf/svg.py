"""SVG figure of a map, its targets and a multi-goal trajectory."""
from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Optional, Sequence

from .geom2d import World
from .guide import MultiGoalTrajectory

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#ff7f0e",
           "#7f7f7f")
SVG_NS = "http://www.w3.org/2000/svg"


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def build_svg(world: World, mgt: Optional[MultiGoalTrajectory], targets: Sequence, R_f: float,
              scale: float = 1.0) -> ET.Element:
    """The figure as an element tree; y grows upward as in the map frame."""
    xmin, ymin, xmax, ymax = world.bounds
    width, height = (xmax - xmin) * scale, (ymax - ymin) * scale

    def px(x, y):
        return (x - xmin) * scale, (ymax - y) * scale

    root = ET.Element("svg", {"xmlns": SVG_NS, "width": _fmt(width), "height": _fmt(height),
                              "viewBox": f"0 0 {_fmt(width)} {_fmt(height)}"})
    ET.SubElement(root, "rect", {"class": "bounds", "x": "0", "y": "0", "width": _fmt(width),
                                 "height": _fmt(height), "fill": "white", "stroke": "black", "stroke-width": "2"})
    obs = ET.SubElement(root, "g", {"class": "obstacles", "fill": "#404040"})
    for poly in world.obstacles:
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (px(x, y) for x, y in poly.vertices))
        ET.SubElement(obs, "polygon", {"points": pts})

    traj = ET.SubElement(root, "g", {"class": "trajectory", "fill": "none", "stroke-width": "1.5"})
    if mgt is not None:
        for k, leg in enumerate(mgt.legs):
            states = leg.trajectory.states()
            pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (px(s[0], s[1]) for s in states))
            ET.SubElement(traj, "polyline", {"class": "leg", "data-leg": str(k), "points": pts,
                                             "stroke": PALETTE[k % len(PALETTE)]})

    tg = ET.SubElement(root, "g", {"class": "targets"})
    rank = {}
    if mgt is not None:
        rank = {t: k for k, t in enumerate(mgt.order)}
    for idx, t in enumerate(targets):
        cx, cy = px(t[0], t[1])
        ET.SubElement(tg, "circle", {"class": "region", "cx": _fmt(cx), "cy": _fmt(cy), "r": _fmt(R_f * scale),
                                     "fill": "none", "stroke": "orange", "stroke-width": "1.5"})
        ET.SubElement(tg, "circle", {"cx": _fmt(cx), "cy": _fmt(cy), "r": "3", "fill": "orange"})
        label = ET.SubElement(tg, "text", {"x": _fmt(cx + 6), "y": _fmt(cy - 6), "font-size": "14",
                                           "font-family": "sans-serif"})
        label.text = f"{rank[idx] + 1}" if idx in rank else f"r{idx}"
    return root


def render_svg(world: World, mgt: Optional[MultiGoalTrajectory], targets: Sequence, R_f: float, path,
               scale: float = 1.0) -> None:
    """Write the figure; labels show each target's position in the tour."""
    tree = ET.ElementTree(build_svg(world, mgt, targets, R_f, scale))
    ET.indent(tree)
    with Path(path).open("wb") as fh:
        tree.write(fh, encoding="utf-8", xml_declaration=True)
