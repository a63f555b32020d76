"""Top-down SVG 1.1 rendering of a scenario and an optional plan.

Left footsteps are blue rectangles, right ones red, each rotated by its yaw
and labelled with its step index. Output is byte-deterministic.
"""
from __future__ import annotations

import math
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .geom import convex_hull_2d

FOOT_LENGTH = 0.20
FOOT_WIDTH = 0.10
SCALE = 200.0  # px per metre
MARGIN = 0.3
COLORS = {"left": "blue", "right": "red"}


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _shade(z: float, zmin: float, zmax: float) -> str:
    t = 0.0 if zmax - zmin < 1e-9 else (z - zmin) / (zmax - zmin)
    g = int(round(215 - 95 * t))
    return f"#{g:02x}{g:02x}{g:02x}"


def render(surfaces, start=None, goal=None, steps=(), title: Optional[str] = None) -> str:
    """``surfaces``: list of (id, (n,3) vertices); ``start``: list of
    (effector, position, yaw); ``goal``: (k,3) points; ``steps``: list of
    (effector, position, yaw)."""
    pts = [np.asarray(v, float) for _, v in surfaces]
    allp = np.vstack(pts + [np.asarray(goal, float).reshape(-1, 3)] if goal is not None else pts)
    lo = allp[:, :2].min(axis=0) - MARGIN
    hi = allp[:, :2].max(axis=0) + MARGIN
    w, h = (hi - lo) * SCALE
    zs = allp[:, 2]

    def px(p):
        return (p[0] - lo[0]) * SCALE, (hi[1] - p[1]) * SCALE

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(w)}" height="{_f(h)}" '
        f'viewBox="0 0 {_f(w)} {_f(h)}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append('<rect x="0" y="0" width="100%" height="100%" fill="white"/>')
    out.append('<g id="surfaces">')
    # draw low surfaces first so higher ones stay visible
    for sid, v in sorted(surfaces, key=lambda s: (float(np.mean(np.asarray(s[1])[:, 2])), s[0])):
        v = np.asarray(v, float)
        poly = " ".join(f"{_f(a)},{_f(b)}" for a, b in map(px, v))
        fill = _shade(float(v[:, 2].mean()), zs.min(), zs.max())
        out.append(f'<polygon class="surface" data-id="{sid}" points="{poly}" fill="{fill}" '
                   'stroke="#555555" stroke-width="1"/>')
    out.append("</g>")

    def foot(effector, pos, yaw, cls):
        cx, cy = px(pos)
        lw, ww = FOOT_LENGTH * SCALE, FOOT_WIDTH * SCALE
        # screen y points down, so a counter-clockwise yaw is a negative rotation
        rot = -math.degrees(yaw)
        return (f'<rect class="{cls}" x="{_f(cx - lw / 2)}" y="{_f(cy - ww / 2)}" width="{_f(lw)}" '
                f'height="{_f(ww)}" transform="rotate({_f(rot)} {_f(cx)} {_f(cy)})"')

    if start:
        out.append('<g id="start">')
        for effector, pos, yaw in start:
            out.append(foot(effector, pos, yaw, "start") +
                       f' fill="none" stroke="{COLORS[effector]}" stroke-width="2" stroke-dasharray="4,3"/>')
        out.append("</g>")
    out.append('<g id="steps">')
    for i, (effector, pos, yaw) in enumerate(steps, start=1):
        out.append(foot(effector, pos, yaw, f"step {effector}") +
                   f' fill="{COLORS[effector]}" fill-opacity="0.6" stroke="black" stroke-width="0.5"/>')
        cx, cy = px(pos)
        out.append(f'<text x="{_f(cx)}" y="{_f(cy + 4)}" font-size="11" text-anchor="middle" '
                   f'font-family="sans-serif" fill="white">{i}</text>')
    out.append("</g>")
    if goal is not None:
        g = np.asarray(goal, float).reshape(-1, 3)
        out.append('<g id="goal">')
        if len(g) == 1:
            cx, cy = px(g[0])
            out.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="8" fill="none" stroke="green" stroke-width="3"/>')
            out.append(f'<path d="M {_f(cx - 6)} {_f(cy)} L {_f(cx + 6)} {_f(cy)} M {_f(cx)} {_f(cy - 6)} '
                       f'L {_f(cx)} {_f(cy + 6)}" stroke="green" stroke-width="2"/>')
        else:
            hull = convex_hull_2d(g[:, :2])
            poly = " ".join(f"{_f(a)},{_f(b)}" for a, b in (px((x, y)) for x, y in hull))
            out.append(f'<polygon points="{poly}" fill="green" fill-opacity="0.25" stroke="green" stroke-width="2"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_scenario(sc, plan_doc=None) -> str:
    """Convenience wrapper taking a Scenario and an optional PlanDocument."""
    surfaces = [(s.id, s.vertices) for s in sc.surfaces]
    start = [("left", sc.start.left.position, sc.start.left.yaw),
             ("right", sc.start.right.position, sc.start.right.yaw)]
    steps = []
    if plan_doc is not None:
        steps = [(s.effector, s.position, s.yaw) for s in plan_doc.steps]
    return render(surfaces, start, sc.goal.region.vertices, steps, title=sc.name)
