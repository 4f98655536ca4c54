"""Static SVG figures with deterministic bytes (fixed formatting, no metadata)."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .geometry import BilliardTable

W, H, PAD = 480, 480, 24
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _outline(ob, n=256) -> np.ndarray:
    t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    x, y = ob.frame_np(t)[:2]
    return np.column_stack([x, y])


class _View:
    def __init__(self, pts: np.ndarray):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = max(hi[0] - lo[0], hi[1] - lo[1], 1e-12)
        self.k = (W - 2 * PAD) / span
        self.lo = lo
        self.cx = (W - self.k * (hi[0] - lo[0])) / 2
        self.cy = (H - self.k * (hi[1] - lo[1])) / 2

    def __call__(self, p):
        x = self.cx + self.k * (p[0] - self.lo[0])
        y = H - (self.cy + self.k * (p[1] - self.lo[1]))
        return _f(x), _f(y)


def _header(title: str) -> list[str]:
    return ['<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">',
            f'<title>{title}</title>',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']


def _path(pts, view, closed=True, **attrs) -> str:
    d = " ".join(("M" if i == 0 else "L") + " ".join(view(p)) for i, p in enumerate(pts))
    if closed:
        d += " Z"
    a = " ".join(f'{k.replace("_", "-")}="{v}"' for k, v in attrs.items())
    return f'<path d="{d}" {a}/>'


def table_svg(table: BilliardTable, orbits: Sequence = ()) -> str:
    """Obstacle outlines, each a closed path, plus closed orbit polylines."""
    outlines = [_outline(table[i]) for i in range(1, table.m + 1)]
    view = _View(np.vstack(outlines))
    out = _header("billiard table")
    for i, pts in enumerate(outlines):
        out.append(_path(pts, view, fill="#e8e8e8", stroke="black", stroke_width="1.5",
                         **{"class": "obstacle", "data_symbol": str(i + 1)}))
        c = view(pts.mean(axis=0))
        out.append(f'<text x="{c[0]}" y="{c[1]}" font-size="14" text-anchor="middle">{i + 1}</text>')
    for k, orb in enumerate(orbits):
        verts = _orbit_vertices(table, orb)
        out.append(_path(verts, view, fill="none", stroke=COLORS[k % len(COLORS)],
                         stroke_width="1", **{"class": "orbit"}))
        for p in verts:
            x, y = view(p)
            out.append(f'<circle class="bounce" cx="{x}" cy="{y}" r="2.5" '
                       f'fill="{COLORS[k % len(COLORS)]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _orbit_vertices(table, orb) -> np.ndarray:
    pts = []
    for sym, t in zip(orb.word, orb.ts):
        x, y = table[sym].frame_np(np.array([float(t)]))[:2]
        pts.append((float(x[0]), float(y[0])))
    return np.array(pts)


def deficit_svg(ns: Sequence[int], deficits: Sequence[float], title: str = "deficit decay") -> str:
    """log10 |D_n| against n with a least-squares slope annotation."""
    ns = np.asarray(ns, dtype=float)
    ys = np.log10(np.abs(np.asarray(deficits, dtype=float)))
    slope, icpt = np.polyfit(ns, ys, 1) if len(ns) > 1 else (0.0, float(ys[0]))
    x0, x1 = ns.min(), max(ns.max(), ns.min() + 1)
    y0, y1 = math.floor(ys.min()), math.ceil(ys.max())
    if y1 == y0:
        y1 = y0 + 1
    L, R, T, B = 64, W - PAD, PAD, H - 48

    def px(n, y):
        return _f(L + (R - L) * (n - x0) / (x1 - x0)), _f(B - (B - T) * (y - y0) / (y1 - y0))

    out = _header(title)
    out.append(f'<line x1="{L}" y1="{B}" x2="{R}" y2="{B}" stroke="black"/>')
    out.append(f'<line x1="{L}" y1="{B}" x2="{L}" y2="{T}" stroke="black"/>')
    step = max(1, (y1 - y0) // 8)
    for e in range(y0, y1 + 1, step):
        x, y = px(x0, e)
        out.append(f'<text class="ytick" x="{L - 6}" y="{y}" font-size="10" '
                   f'text-anchor="end">1e{e}</text>')
    for n in ns:
        x, y = px(n, y0)
        out.append(f'<text class="xtick" x="{x}" y="{_f(B + 14)}" font-size="10" '
                   f'text-anchor="middle">{int(n)}</text>')
    a, b = px(x0, icpt + slope * x0), px(x1, icpt + slope * x1)
    out.append(f'<line class="fit" x1="{a[0]}" y1="{a[1]}" x2="{b[0]}" y2="{b[1]}" '
               f'stroke="#999" stroke-dasharray="4 3"/>')
    for n, y in zip(ns, ys):
        x, yy = px(n, y)
        out.append(f'<circle class="point" cx="{x}" cy="{yy}" r="3" fill="{COLORS[0]}"/>')
    out.append(f'<text class="slope" x="{R}" y="{T + 12}" font-size="12" text-anchor="end">'
               f'slope {slope:.6f} per n (log10 scale)</text>')
    out.append(f'<text x="{(L + R) // 2}" y="{H - 8}" font-size="12" text-anchor="middle">n</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
