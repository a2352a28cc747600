"""Tiny log-log line plot writer producing a standalone SVG document."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f4e9c", "#c0392b", "#2e7d32", "#7b1fa2", "#ef6c00")


def _decades(lo, hi):
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_svg(series, title="", xlabel="t", ylabel="", width=640, height=420):
    """series: iterable of dicts with keys x, y, label and optional style
    ('line' or 'points').  Non-positive values are dropped."""
    clean = []
    for s in series:
        pts = [(math.log10(x), math.log10(y)) for x, y in zip(s["x"], s["y"]) if x > 0 and y > 0]
        if pts:
            clean.append((s, pts))
    ml, mr, mt, mb = 70, 20, 36, 50
    pw, ph = width - ml - mr, height - mt - mb
    if clean:
        xs = [p[0] for _, pts in clean for p in pts]
        ys = [p[1] for _, pts in clean for p in pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(u):
        return ml + (u - x0) / (x1 - x0) * pw

    def py(v):
        return mt + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for d in _decades(x0, x1):
        if x0 - 1e-9 <= d <= x1 + 1e-9:
            out.append(f'<line x1="{px(d):.2f}" y1="{mt}" x2="{px(d):.2f}" y2="{mt + ph}" stroke="#ddd"/>')
            out.append(f'<text x="{px(d):.2f}" y="{mt + ph + 16}" text-anchor="middle">1e{d}</text>')
    for d in _decades(y0, y1):
        if y0 - 1e-9 <= d <= y1 + 1e-9:
            out.append(f'<line x1="{ml}" y1="{py(d):.2f}" x2="{ml + pw}" y2="{py(d):.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{ml - 6}" y="{py(d) + 4:.2f}" text-anchor="end">1e{d}</text>')
    for k, (s, pts) in enumerate(clean):
        color = s.get("color", _COLORS[k % len(_COLORS)])
        if s.get("style", "line") == "points":
            for u, v in pts:
                out.append(f'<circle cx="{px(u):.2f}" cy="{py(v):.2f}" r="2.5" fill="{color}"/>')
        else:
            path = " ".join(f"{px(u):.2f},{py(v):.2f}" for u, v in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<rect x="{ml + pw - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{ml + pw - 135}" y="{ly}">{escape(str(s.get("label", "")))}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
