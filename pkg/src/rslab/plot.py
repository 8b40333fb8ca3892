"""Static SVG charts of PCS curves.

Each data point is a ``<circle>`` carrying its values as ``data-*`` attributes,
so the chart can be checked by parsing the file.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from collections import OrderedDict

from .harness import PcsCurvePoint

PANEL_W = 420
PANEL_H = 300
MARGIN = dict(left=55, right=15, top=30, bottom=45)
COLUMNS = 2
LEGEND_H = 30
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _group(points):
    panels: OrderedDict = OrderedDict()
    for p in points:
        panels.setdefault(p.instance_id, OrderedDict()).setdefault(p.policy_id, []).append(p)
    for series in panels.values():
        for pts in series.values():
            pts.sort(key=lambda q: q.T)
    return panels


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def render_svg(points: list[PcsCurvePoint]) -> str:
    """One line chart per instance: PCS against T with +/-1 SE whiskers."""
    if not points:
        raise ValueError("no rows")
    panels = _group(points)
    policies = list(OrderedDict.fromkeys(p.policy_id for p in points))
    colour = {pid: PALETTE[i % len(PALETTE)] for i, pid in enumerate(policies)}
    rows = (len(panels) + COLUMNS - 1) // COLUMNS
    cols = min(COLUMNS, len(panels))
    width = cols * PANEL_W
    height = rows * PANEL_H + LEGEND_H
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    svg.set("font-family", "sans-serif")
    svg.set("font-size", "11")
    ET.SubElement(svg, "rect", width=str(width), height=str(height), fill="white")

    legend = ET.SubElement(svg, "g", {"class": "legend"})
    for i, pid in enumerate(policies):
        x = 10 + i * 110
        item = ET.SubElement(legend, "g", {"class": "legend-item", "data-policy": pid})
        ET.SubElement(item, "line", {"stroke-width": "2"}, x1=str(x), y1="15",
                      x2=str(x + 20), y2="15", stroke=colour[pid])
        label = ET.SubElement(item, "text", x=str(x + 25), y="19")
        label.text = pid

    for idx, (instance_id, series) in enumerate(panels.items()):
        ox = (idx % COLUMNS) * PANEL_W
        oy = LEGEND_H + (idx // COLUMNS) * PANEL_H
        _panel(svg, instance_id, series, colour, ox, oy)
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"


def _panel(svg, instance_id, series, colour, ox, oy):
    g = ET.SubElement(svg, "g", {"class": "panel", "data-instance": instance_id})
    x0 = ox + MARGIN["left"]
    x1 = ox + PANEL_W - MARGIN["right"]
    y0 = oy + PANEL_H - MARGIN["bottom"]
    y1 = oy + MARGIN["top"]
    all_pts = [p for pts in series.values() for p in pts]
    t_lo = min(p.T for p in all_pts)
    t_hi = max(p.T for p in all_pts)
    v_lo = min(max(0.0, p.pcs_hat - p.std_err) for p in all_pts)
    v_hi = max(min(1.0, p.pcs_hat + p.std_err) for p in all_pts)
    if v_hi - v_lo < 1e-6:
        v_lo, v_hi = max(0.0, v_lo - 0.05), min(1.0, v_hi + 0.05)
        if v_hi - v_lo < 1e-6:
            v_lo, v_hi = 0.0, 1.0

    def sx(t):
        return x0 if t_hi == t_lo else x0 + (t - t_lo) / (t_hi - t_lo) * (x1 - x0)

    def sy(v):
        return y0 - (v - v_lo) / (v_hi - v_lo) * (y0 - y1)

    title = ET.SubElement(g, "text", x=_fmt((x0 + x1) / 2), y=_fmt(oy + 18))
    title.set("text-anchor", "middle")
    title.text = instance_id
    axes = ET.SubElement(g, "g", {"class": "axes", "stroke": "black"})
    ET.SubElement(axes, "line", x1=_fmt(x0), y1=_fmt(y0), x2=_fmt(x1), y2=_fmt(y0))
    ET.SubElement(axes, "line", x1=_fmt(x0), y1=_fmt(y0), x2=_fmt(x0), y2=_fmt(y1))
    for t in _ticks(t_lo, t_hi):
        ET.SubElement(axes, "line", x1=_fmt(sx(t)), y1=_fmt(y0), x2=_fmt(sx(t)), y2=_fmt(y0 + 4))
        lab = ET.SubElement(g, "text", x=_fmt(sx(t)), y=_fmt(y0 + 16))
        lab.set("text-anchor", "middle")
        lab.text = f"{t:g}"
    for v in _ticks(v_lo, v_hi):
        ET.SubElement(axes, "line", x1=_fmt(x0 - 4), y1=_fmt(sy(v)), x2=_fmt(x0), y2=_fmt(sy(v)))
        lab = ET.SubElement(g, "text", x=_fmt(x0 - 6), y=_fmt(sy(v) + 4))
        lab.set("text-anchor", "end")
        lab.text = f"{v:.3f}"
    xl = ET.SubElement(g, "text", x=_fmt((x0 + x1) / 2), y=_fmt(y0 + 32))
    xl.set("text-anchor", "middle")
    xl.text = "T"
    yl = ET.SubElement(g, "text", x=_fmt(ox + 12), y=_fmt((y0 + y1) / 2),
                       transform=f"rotate(-90 {_fmt(ox + 12)} {_fmt((y0 + y1) / 2)})")
    yl.set("text-anchor", "middle")
    yl.text = "PCS"

    for pid, pts in series.items():
        sg = ET.SubElement(g, "g", {"class": "series", "data-policy": pid, "stroke": colour[pid]})
        path = " ".join(f"{_fmt(sx(p.T))},{_fmt(sy(p.pcs_hat))}" for p in pts)
        ET.SubElement(sg, "polyline", points=path, fill="none")
        for p in pts:
            lo = max(0.0, p.pcs_hat - p.std_err)
            hi = min(1.0, p.pcs_hat + p.std_err)
            ET.SubElement(sg, "line", {"class": "whisker"}, x1=_fmt(sx(p.T)), y1=_fmt(sy(lo)),
                          x2=_fmt(sx(p.T)), y2=_fmt(sy(hi)))
            ET.SubElement(sg, "circle", {
                "class": "point",
                "cx": _fmt(sx(p.T)),
                "cy": _fmt(sy(p.pcs_hat)),
                "r": "2.5",
                "fill": colour[pid],
                "data-instance": p.instance_id,
                "data-policy": pid,
                "data-t": str(p.T),
                "data-pcs": "%.17g" % p.pcs_hat,
                "data-se": "%.17g" % p.std_err,
            })
