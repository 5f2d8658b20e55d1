"""Deterministic SVG output for heatmaps, term graphs and overlay belief maps.

Numbers are written with three decimals and attributes in a fixed order,
so identical inputs give identical bytes.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .space import BeliefSpace

SIZE = 800
MARGIN = 40
BACKGROUND = "#111111"
MESH = "#888888"
KNOWN_COLORS = {"nomad": "#ffffff", "flock": "#3cb44b", "stampede": "#e6194b"}
PALETTE = ("#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45", "#fabed4", "#469990")


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def group_colors(groups) -> dict[str, str]:
    out = {}
    spare = iter(PALETTE * 8)
    for g in groups:
        out[g] = KNOWN_COLORS.get(g) or next(spare)
    return out


def _open(width: int = SIZE, height: int = SIZE) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="{BACKGROUND}"/>',
    ]


def _legend(lines: list[str], entries: list[tuple[str, str]]):
    lines.append('<g id="legend">')
    for k, (name, color) in enumerate(entries):
        y = 20 + 18 * k
        lines.append(f'<circle cx="{_f(14)}" cy="{_f(y - 4)}" r="{_f(5)}" fill="{color}"/>')
        lines.append(f'<text x="26" y="{y}" fill="#dddddd" font-family="sans-serif" '
                     f'font-size="13">{escape(name)}</text>')
    lines.append("</g>")


def heatmap_svg(space: BeliefSpace, positions_by_group: dict[str, np.ndarray], title: str = "") -> str:
    """Agents over the cell grid; cell brightness counts agents (first two axes)."""
    cols = space.cells_per_axis
    rows = cols if space.dims >= 2 else 1
    counts = np.zeros((rows, cols), dtype=np.int64)
    all_pos = []
    for g, pos in positions_by_group.items():
        pos = np.asarray(pos, dtype=float).reshape(-1, space.dims)
        plane = pos[:, :2] if space.dims >= 2 else np.column_stack([pos[:, 0], np.zeros(len(pos))])
        all_pos.append((g, plane))
        cells = space.cells_of(pos)
        for c in cells:
            counts[(c[1] if space.dims >= 2 else 0), c[0]] += 1
    span = SIZE - 2 * MARGIN
    cw = span / cols
    ch = span / rows
    peak = max(int(counts.max()), 1)
    h = space.half_extent

    def to_px(p):
        x = MARGIN + (p[0] + h) / (2 * h) * span
        y = MARGIN + span - (p[1] + h) / (2 * h) * span if space.dims >= 2 else MARGIN + span / 2
        return x, y

    lines = _open()
    if title:
        lines.append(f'<title>{escape(title)}</title>')
    lines.append('<g id="cells">')
    for r in range(rows):
        for c in range(cols):
            level = counts[r, c] / peak
            shade = int(round(30 + 170 * level))
            y = MARGIN + span - (r + 1) * ch
            lines.append(f'<rect x="{_f(MARGIN + c * cw)}" y="{_f(y)}" width="{_f(cw)}" height="{_f(ch)}" '
                         f'fill="rgb({shade},{shade // 2},{255 - shade})" stroke="#000000" stroke-width="0.5"/>')
    lines.append("</g>")
    colors = group_colors([g for g, _ in all_pos])
    lines.append('<g id="agents">')
    for g, plane in all_pos:
        for p in plane:
            x, y = to_px(p)
            lines.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3.000" fill="{colors[g]}" '
                         f'stroke="#000000" stroke-width="0.5"/>')
    lines.append("</g>")
    _legend(lines, list(colors.items()))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _frame(xy: np.ndarray):
    lo = xy.min(axis=0)
    hi = xy.max(axis=0)
    extent = float(max((hi - lo).max(), 1e-9))
    span = SIZE - 2 * MARGIN
    center = (lo + hi) / 2

    def to_px(p):
        return (SIZE / 2 + (p[0] - center[0]) / extent * span,
                SIZE / 2 - (p[1] - center[1]) / extent * span)
    return to_px


def _radius(dwell: float, peak: float, r_max: float = 14.0) -> float:
    # disc area proportional to dwell
    return r_max * math.sqrt(dwell / peak) if peak > 0 else 0.0


def _opacity(v: float, lo: float, hi: float) -> float:
    # min-max normalized, never fully transparent
    return 1.0 if hi <= lo else 0.2 + 0.8 * (v - lo) / (hi - lo)


def graph_svg(graph: dict, color: str = "#ffffff", title: str = "") -> str:
    """Render a laid-out graph dict: disc area = mean dwell, opacity = unique visitors."""
    nodes = graph["nodes"]
    if not nodes or "x" not in nodes[0]:
        raise ValueError("graph has no layout")
    xy = np.array([[n["x"], n["y"]] for n in nodes])
    to_px = _frame(xy)
    where = {n["label"]: to_px((n["x"], n["y"])) for n in nodes}
    peak = max(n["mean_dwell"] for n in nodes)
    vis = [n["unique_visitors"] for n in nodes]
    lines = _open()
    if title:
        lines.append(f'<title>{escape(title)}</title>')
    lines.append('<g id="edges">')
    for e in graph["edges"]:
        (x0, y0), (x1, y1) = where[e["source"]], where[e["target"]]
        lines.append(f'<path d="M {_f(x0)} {_f(y0)} L {_f(x1)} {_f(y1)}" stroke="{MESH}" '
                     f'stroke-opacity="0.500" stroke-width="1.000" fill="none"/>')
    lines.append("</g>")
    lines.append('<g id="nodes">')
    for n in nodes:
        x, y = where[n["label"]]
        r = max(_radius(n["mean_dwell"], peak), 1.5)
        op = _opacity(n["unique_visitors"], min(vis), max(vis))
        lines.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{color}" '
                     f'fill-opacity="{_f(op)}"><title>{escape(n["label"])}</title></circle>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def overlay_svg(overlay: dict) -> str:
    """Layered belief map: gray mesh of base paths, base discs, then one layer per group.

    Each group's disc area follows its mean dwell per visitor at the node;
    opacity follows its unique visitor count.
    """
    nodes = overlay["nodes"]
    base_group = overlay.get("base_group", "base")
    groups = overlay["groups"]
    xy = np.array([[n["x"], n["y"]] for n in nodes])
    to_px = _frame(xy)
    where = {n["label"]: to_px((n["x"], n["y"])) for n in nodes}
    colors = group_colors([base_group, *groups])
    lines = _open()
    lines.append(f"<title>{escape('belief map: ' + base_group)}</title>")
    lines.append('<g id="mesh">')
    for e in overlay["edges"]:
        (x0, y0), (x1, y1) = where[e["source"]], where[e["target"]]
        lines.append(f'<polyline points="{_f(x0)},{_f(y0)} {_f(x1)},{_f(y1)}" stroke="{MESH}" '
                     f'stroke-opacity="0.250" stroke-width="0.750" fill="none"/>')
    lines.append("</g>")
    layers = [(base_group, "dwell_time", "unique_visitors")]
    layers += [(g, f"{g}_dwell_time", f"{g}_unique_visitors") for g in groups]
    for name, dwell_key, vis_key in layers:
        per_visit = [n[dwell_key] / n[vis_key] if n[vis_key] else 0.0 for n in nodes]
        peak = max(per_visit) if per_visit else 0.0
        vis = [n[vis_key] for n in nodes if n[vis_key]]
        lines.append(f"<g id={quoteattr('layer-' + name)}>")
        for n, dwell in zip(nodes, per_visit):
            if not n[vis_key]:
                continue
            x, y = where[n["label"]]
            r = max(_radius(dwell, peak), 1.0)
            op = _opacity(n[vis_key], min(vis), max(vis))
            lines.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{colors[name]}" '
                         f'fill-opacity="{_f(op * 0.8)}"/>')
        lines.append("</g>")
    _legend(lines, [(g, colors[g]) for g in [base_group, *groups]])
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
