"""SVG line charts of sweep results: accuracy (%) against distortion level."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .distortion import BLUR, NOISE
from .evaluation import CLEAN, SweepRow

TITLES = {NOISE: "Gaussian noise (sigma, 0-255 scale)", BLUR: "Gaussian blur (kernel size)"}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

W, H = 420, 300
LEFT, RIGHT, TOP, BOTTOM = 55, 20, 35, 45


def _panel(rows: list[SweepRow], family: str, models: list[str], x0: float) -> list[str]:
    levels = sorted({r.level for r in rows if r.family == family})
    lo, hi = levels[0], levels[-1]
    span = (hi - lo) or 1
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(level):
        return x0 + LEFT + (level - lo) / span * pw

    def py(acc):
        return TOP + (1 - acc) * ph

    out = [
        f'<text x="{x0 + W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(TITLES.get(family, family))}</text>',
        f'<rect x="{x0 + LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for pct in range(0, 101, 25):
        y = py(pct / 100)
        out.append(f'<line x1="{x0 + LEFT}" y1="{y:.1f}" x2="{x0 + LEFT + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{x0 + LEFT - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{pct}</text>')
    for level in levels:
        out.append(f'<text x="{px(level):.1f}" y="{TOP + ph + 15}" text-anchor="middle" font-size="10">{level}</text>')
    out.append(f'<text x="{x0 + 14}" y="{TOP + ph / 2:.1f}" font-size="11" transform="rotate(-90 {x0 + 14} {TOP + ph / 2:.1f})" text-anchor="middle">accuracy (%)</text>')
    for i, model in enumerate(models):
        pts = sorted((r.level, r.top1) for r in rows if r.family == family and r.model == model)
        if not pts:
            continue
        coords = " ".join(f"{px(lv):.2f},{py(acc):.2f}" for lv, acc in pts)
        color = COLORS[i % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
    return out


def render_svg(rows: list[SweepRow]) -> str:
    """One panel per distortion family, one polyline (Top-1 %) per model."""
    models = list(dict.fromkeys(r.model for r in rows))
    families = [f for f in dict.fromkeys(r.family for r in rows) if f != CLEAN]
    width = W * max(1, len(families))
    height = H + 20 * len(models)
    body = []
    for j, family in enumerate(families):
        body += _panel(rows, family, models, j * W)
    for i, model in enumerate(models):
        y = H + 20 * i
        clean = [r.top1 for r in rows if r.model == model and r.family == CLEAN]
        label = escape(model) + (f" (clean {100 * clean[0]:.1f}%)" if clean else "")
        body.append(f'<rect x="{LEFT}" y="{y}" width="14" height="4" fill="{COLORS[i % len(COLORS)]}"/>')
        body.append(f'<text x="{LEFT + 20}" y="{y + 6}" font-size="11">{label}</text>')
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">'
    )
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"
