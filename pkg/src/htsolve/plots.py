"""Deterministic SVG line plots with optional log axes.

No plotting dependency: the output is plain SVG text with fixed number
formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=78, right=150, top=36, bottom=56)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
MARKERS = ("circle", "square", "triangle", "diamond")


def _f(x):
    return f"{x:.2f}"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class Axis:
    def __init__(self, values, log, lo_px, hi_px):
        self.log = log
        vals = [v for v in values if math.isfinite(v) and (v > 0 or not log)]
        if not vals:
            lo, hi = (1.0, 10.0) if log else (0.0, 1.0)
        else:
            lo, hi = min(vals), max(vals)
        if log:
            lo, hi = 10.0 ** math.floor(math.log10(lo)), 10.0 ** math.ceil(math.log10(hi))
            if lo == hi:
                hi = lo * 10
        else:
            if lo == hi:
                lo, hi = lo - 0.5, hi + 0.5
            span = hi - lo
            lo, hi = lo - 0.05 * span, hi + 0.05 * span
        self.lo, self.hi = lo, hi
        self.lo_px, self.hi_px = lo_px, hi_px

    def _t(self, v):
        return math.log10(v) if self.log else v

    def __call__(self, v):
        a, b = self._t(self.lo), self._t(self.hi)
        return self.lo_px + (self._t(v) - a) / (b - a) * (self.hi_px - self.lo_px)

    def valid(self, v):
        return math.isfinite(v) and (v > 0 or not self.log)

    def ticks(self):
        if self.log:
            a, b = int(round(math.log10(self.lo))), int(round(math.log10(self.hi)))
            stride = max(1, (b - a) // 8)
            return [(10.0 ** e, f"1e{e}") for e in range(a, b + 1, stride)]
        n = 6
        step = _nice((self.hi - self.lo) / n)
        start = math.ceil(self.lo / step) * step
        out = []
        x = start
        while x <= self.hi + 1e-12 * step:
            out.append((x, f"{x:g}"))
            x += step
        return out


def _nice(x):
    e = math.floor(math.log10(x))
    m = x / 10 ** e
    m = 1 if m <= 1 else 2 if m <= 2 else 5 if m <= 5 else 10
    return m * 10 ** e


def _marker(kind, x, y, color):
    if kind == "circle":
        return f'<circle cx="{_f(x)}" cy="{_f(y)}" r="3.5" fill="{color}"/>'
    if kind == "square":
        return f'<rect x="{_f(x - 3.2)}" y="{_f(y - 3.2)}" width="6.40" height="6.40" fill="{color}"/>'
    if kind == "triangle":
        pts = f"{_f(x)},{_f(y - 4)} {_f(x - 4)},{_f(y + 3)} {_f(x + 4)},{_f(y + 3)}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    pts = f"{_f(x)},{_f(y - 4.5)} {_f(x + 4.5)},{_f(y)} {_f(x)},{_f(y + 4.5)} {_f(x - 4.5)},{_f(y)}"
    return f'<polygon points="{pts}" fill="{color}"/>'


def line_plot(series, title="", xlabel="", ylabel="", logx=False, logy=True):
    """SVG text for a list of series dicts.

    Each series has keys ``x``, ``y``, ``label`` and optionally ``line``
    (draw a polyline, default True) and ``markers`` (default True).
    """
    m = MARGIN
    xs = [v for s in series for v in s["x"]]
    ys = [v for s in series for v in s["y"]]
    ax = Axis(xs, logx, m["left"], WIDTH - m["right"])
    ay = Axis(ys, logy, HEIGHT - m["bottom"], m["top"])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    x0, x1 = m["left"], WIDTH - m["right"]
    y0, y1 = HEIGHT - m["bottom"], m["top"]
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               f'fill="none" stroke="black"/>')
    for v, lab in ax.ticks():
        px = ax(v)
        out.append(f'<line x1="{_f(px)}" y1="{y0}" x2="{_f(px)}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{_f(px)}" y="{y0 + 18}" text-anchor="middle">{_esc(lab)}</text>')
    for v, lab in ay.ticks():
        py = ay(v)
        out.append(f'<line x1="{x0 - 5}" y1="{_f(py)}" x2="{x0}" y2="{_f(py)}" stroke="black"/>')
        out.append(f'<line x1="{x0}" y1="{_f(py)}" x2="{x1}" y2="{_f(py)}" stroke="#dddddd"/>')
        out.append(f'<text x="{x0 - 8}" y="{_f(py + 4)}" text-anchor="end">{_esc(lab)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 14}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.2f})">{_esc(ylabel)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    for k, s in enumerate(series):
        color = COLORS[k % len(COLORS)]
        mk = MARKERS[(k // len(COLORS)) % len(MARKERS)] if s.get("marker") is None else s["marker"]
        pts = [(ax(x), ay(y)) for x, y in zip(s["x"], s["y"]) if ax.valid(x) and ay.valid(y)]
        if s.get("line", True) and len(pts) > 1:
            path = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
            dash = ' stroke-dasharray="5,3"' if s.get("dashed") else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        if s.get("markers", True):
            out.extend(_marker(mk, x, y, color) for x, y in pts)
        ly = y1 + 14 + 18 * k
        out.append(f'<line x1="{x1 + 12}" y1="{ly}" x2="{x1 + 32}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{x1 + 38}" y="{ly + 4}">{_esc(s.get("label", ""))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg):
    with open(path, "w") as fh:
        fh.write(svg)


def residual_figure(traces):
    """Residual norms (markers) and bounds (lines) against total inner iterations."""
    series = []
    for label, rows in traces:
        it = list(range(1, len(rows) + 1))
        series.append({"x": it, "y": [r["residual"] for r in rows], "label": f"{label} residual",
                       "line": False})
        series.append({"x": it, "y": [r["bound"] for r in rows], "label": f"{label} bound",
                       "markers": False, "marker": "circle"})
    for k in range(0, len(series), 2):
        series[k + 1]["_color"] = k
    return line_plot(series, "residual estimates and error bounds", "total inner iterations",
                     "norm", logx=False, logy=True)


def rank_figure(traces):
    """Iterate and intermediate ranks against the error bound."""
    series = []
    for label, rows in traces:
        series.append({"x": [r["bound"] for r in rows], "y": [r["max_rank_iterate"] for r in rows],
                       "label": f"{label} iterate"})
        series.append({"x": [r["bound"] for r in rows],
                       "y": [r["max_rank_intermediate"] for r in rows],
                       "label": f"{label} intermediate", "dashed": True})
    return line_plot(series, "maximum ranks", "error bound", "rank", logx=True, logy=False)


def ops_figure(traces):
    """Cumulative operation count against error reduction bound_0 / bound."""
    series = []
    for label, rows in traces:
        if not rows:
            series.append({"x": [], "y": [], "label": label})
            continue
        b0 = rows[0]["bound"]
        series.append({"x": [b0 / r["bound"] for r in rows], "y": [max(r["ops_cum"], 1) for r in rows],
                       "label": label})
    return line_plot(series, "operation count", "error reduction", "operations", logx=True, logy=True)
