"""Self-contained SVG line plots and heatmaps (no external assets)."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

WIDTH, HEIGHT = 1000, 600
MARGIN = dict(left=80, right=20, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _frame(title):
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", viewBox=f"0 0 {WIDTH} {HEIGHT}",
                     width=str(WIDTH), height=str(HEIGHT))
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    t = ET.SubElement(svg, "text", x=str(WIDTH // 2), y="24", fill="black")
    t.set("text-anchor", "middle")
    t.set("font-family", "sans-serif")
    t.set("font-size", "16")
    t.text = title
    return svg


def _plot_box():
    x0, y0 = MARGIN["left"], MARGIN["top"]
    return x0, y0, WIDTH - MARGIN["right"] - x0, HEIGHT - MARGIN["bottom"] - y0


def _label(svg, x, y, text, anchor="middle", size=12):
    t = ET.SubElement(svg, "text", x=f"{x:.1f}", y=f"{y:.1f}", fill="black")
    t.set("text-anchor", anchor)
    t.set("font-family", "sans-serif")
    t.set("font-size", str(size))
    t.text = text


def _axes(svg, xr, yr, xlabel, ylabel, logx):
    x0, y0, w, h = _plot_box()
    ET.SubElement(svg, "rect", x=str(x0), y=str(y0), width=str(w), height=str(h),
                  fill="none", stroke="black")
    xticks = _log_ticks(*xr) if logx else np.linspace(*xr, 6)
    for v in xticks:
        px = _map(v, xr, x0, w, logx)
        ET.SubElement(svg, "line", x1=f"{px:.1f}", y1=str(y0 + h), x2=f"{px:.1f}", y2=str(y0 + h + 5),
                      stroke="black")
        _label(svg, px, y0 + h + 20, f"{v:g}")
    for v in np.linspace(*yr, 6):
        py = y0 + h - _map(v, yr, 0, h, False)
        ET.SubElement(svg, "line", x1=str(x0 - 5), y1=f"{py:.1f}", x2=str(x0), y2=f"{py:.1f}",
                      stroke="black")
        _label(svg, x0 - 8, py + 4, f"{v:.4g}", anchor="end")
    _label(svg, x0 + w / 2, HEIGHT - 15, xlabel)
    t = ET.SubElement(svg, "text", x="20", y=f"{y0 + h / 2:.1f}", fill="black",
                      transform=f"rotate(-90 20 {y0 + h / 2:.1f})")
    t.set("text-anchor", "middle")
    t.set("font-family", "sans-serif")
    t.set("font-size", "12")
    t.text = ylabel


def _log_ticks(lo, hi):
    ticks = [10.0 ** k for k in range(int(np.floor(np.log10(lo))), int(np.ceil(np.log10(hi))) + 1)]
    return [v for v in ticks if lo <= v <= hi] or [lo, hi]


def _map(v, r, origin, span, logx):
    lo, hi = r
    if logx:
        v, lo, hi = np.log10(v), np.log10(lo), np.log10(hi)
    if hi == lo:
        return origin + span / 2
    return origin + (v - lo) / (hi - lo) * span


def line_plot(series, path, title="", xlabel="", ylabel="", logx=False, ylim=None):
    """Write ``series`` (a list of ``(label, x, y)``) as polylines."""
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series]) if series else np.zeros(0)
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series]) if series else np.zeros(0)
    if logx:
        xs = xs[xs > 0]
    xr = (float(xs.min()), float(xs.max())) if xs.size else (1.0, 10.0)
    finite = ys[np.isfinite(ys)]
    yr = ylim or ((float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0))
    svg = _frame(title)
    _axes(svg, xr, yr, xlabel, ylabel, logx)
    x0, y0, w, h = _plot_box()
    for i, (label, x, y) in enumerate(series):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        keep = np.isfinite(y) & ((x > 0) if logx else np.ones(x.size, bool))
        pts = []
        for xv, yv in zip(x[keep], np.clip(y[keep], *yr)):
            pts.append(f"{_map(xv, xr, x0, w, logx):.2f},{y0 + h - _map(yv, yr, 0, h, False):.2f}")
        color = PALETTE[i % len(PALETTE)]
        ET.SubElement(svg, "polyline", points=" ".join(pts), fill="none", stroke=color)
        _label(svg, x0 + w - 10, y0 + 20 + 16 * i, str(label), anchor="end")
        svg[-1].set("fill", color)
    _write(svg, path)


def heatmap(values, path, title="", xlabel="", ylabel="", extent=None, max_cells=(200, 120)):
    """Write a 2-D array (rows = y, low row at the bottom) as a grey-scale grid of rects."""
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    sy, sx = max(1, -(-ny // max_cells[1])), max(1, -(-nx // max_cells[0]))
    v = v[: ny - ny % sy or ny, : nx - nx % sx or nx]
    if sy > 1 or sx > 1:
        v = v[: (v.shape[0] // sy) * sy, : (v.shape[1] // sx) * sx]
        v = v.reshape(v.shape[0] // sy, sy, v.shape[1] // sx, sx).max(axis=(1, 3))
    finite = v[np.isfinite(v)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    extent = extent or (0.0, float(nx), 0.0, float(ny))
    svg = _frame(title)
    _axes(svg, extent[:2], extent[2:], xlabel, ylabel, False)
    x0, y0, w, h = _plot_box()
    rows, cols = v.shape
    cw, ch = w / cols, h / rows
    for r in range(rows):
        for c in range(cols):
            val = v[r, c]
            level = 0.0 if not np.isfinite(val) or hi == lo else (val - lo) / (hi - lo)
            g = int(round(255 * (1.0 - level)))
            ET.SubElement(svg, "rect", x=f"{x0 + c * cw:.2f}", y=f"{y0 + h - (r + 1) * ch:.2f}",
                          width=f"{cw + 0.05:.2f}", height=f"{ch + 0.05:.2f}",
                          fill=f"rgb({g},{g},{g})")
    _write(svg, path)


def _write(svg, path):
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
