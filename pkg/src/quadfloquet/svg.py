"""Minimal self-contained SVG line plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_W, _H = 720, 440
_L, _R, _T, _B = 80, 20, 30, 60


def _ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    return np.arange(np.ceil(lo / step) * step, hi + step * 1e-9, step)


def _num(x: float) -> str:
    return f"{x:.2f}"


def line_plot(series: list[tuple[str, np.ndarray, np.ndarray]], xlabel: str, ylabel: str, title: str = "") -> str:
    """Render ``(label, x, y)`` series as one SVG document string."""
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    pad = 0.05 * (y1 - y0) if y1 > y0 else 1.0
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = _W - _L - _R, _H - _T - _B
    px = lambda x: _L + (x - x0) / (x1 - x0) * pw
    py = lambda y: _T + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_L}" y="{_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        X = _num(px(v))
        out.append(f'<line x1="{X}" y1="{_T + ph}" x2="{X}" y2="{_T + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{_T + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        Y = _num(py(v))
        out.append(f'<line x1="{_L - 5}" y1="{Y}" x2="{_L}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{_L - 8}" y="{Y}" text-anchor="end" dominant-baseline="middle">{v:.3g}</text>')
    if y0 < 0 < y1:
        Y = _num(py(0.0))
        out.append(f'<line x1="{_L}" y1="{Y}" x2="{_L + pw}" y2="{Y}" stroke="#999" stroke-dasharray="4 3"/>')
    for k, (label, x, y) in enumerate(series):
        pts = " ".join(f"{_num(px(a))},{_num(py(b))}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        color = _COLORS[k % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = _T + 16 + 16 * k
        out.append(f'<line x1="{_L + pw - 170}" y1="{ly}" x2="{_L + pw - 150}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_L + pw - 145}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append(f'<text x="{_L + pw / 2}" y="{_H - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{_T + ph / 2}" text-anchor="middle" transform="rotate(-90 18 {_T + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{_L + pw / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
