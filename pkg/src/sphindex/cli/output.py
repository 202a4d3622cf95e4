"""Byte-stable CSV and minimal SVG output.

CSV is the authoritative output format: floats are written with ``repr`` so
identical runs produce identical bytes.  Every CSV gets a JSON sidecar with
the config hash, seed and library versions.  SVG plots are plain hand-rolled
line/scatter renderings with fixed formatting; they carry no timestamps or
random identifiers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True, default=str).encode()
    ).hexdigest()


def write_sidecar(path, config: dict, seed, command: str) -> None:
    import numpy
    import scipy

    import sphindex

    meta = {
        "command": command,
        "config_sha256": config_hash(config),
        "seed": seed,
        "sphindex_version": sphindex.__version__,
        "numpy_version": numpy.__version__,
        "scipy_version": scipy.__version__,
        "python_version": sys.version.split()[0],
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_PALETTE = ["#1f6fb4", "#d23f3f", "#2e8b57", "#8c50af", "#e08b2d", "#555555"]


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


class SvgChart:
    """Minimal line/scatter chart writer with linear or log axes."""

    def __init__(self, title="", xlabel="", ylabel="", width=760, height=480,
                 logx=False, logy=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.width = width
        self.height = height
        self.logx = logx
        self.logy = logy
        self.series = []   # (xs, ys, color, label, stroke_width, opacity)
        self.points = []   # (xs, ys, color, label)
        self._color_idx = 0

    def _next_color(self) -> str:
        color = _PALETTE[self._color_idx % len(_PALETTE)]
        self._color_idx += 1
        return color

    def add_line(self, xs, ys, label="", color=None, width=1.5, opacity=1.0):
        self.series.append((list(xs), list(ys), color or self._next_color(),
                            label, width, opacity))

    def add_points(self, xs, ys, label="", color=None):
        self.points.append((list(xs), list(ys), color or self._next_color(), label))

    def _transform(self, v, log):
        return math.log10(v) if log else v

    def _bounds(self):
        xs, ys = [], []
        for sx, sy, *_ in self.series + [(p[0], p[1]) for p in self.points]:
            for x, y in zip(sx, sy):
                if self.logx and x <= 0 or self.logy and y <= 0:
                    continue
                if math.isfinite(x) and math.isfinite(y):
                    xs.append(self._transform(x, self.logx))
                    ys.append(self._transform(y, self.logy))
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        padx = 0.04 * (x1 - x0)
        pady = 0.06 * (y1 - y0)
        return x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def write(self, path) -> None:
        left, right, top, bottom = 64, 20, 34, 48
        pw = self.width - left - right
        ph = self.height - top - bottom
        x0, x1, y0, y1 = self._bounds()

        def px(x):
            return left + (self._transform(x, self.logx) - x0) / (x1 - x0) * pw

        def py(y):
            return top + ph - (self._transform(y, self.logy) - y0) / (y1 - y0) * ph

        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{self.width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{self.title}</text>',
        ]
        # axes and ticks
        parts.append(
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
            f'stroke="#222" stroke-width="1"/>'
        )
        xticks = _nice_ticks(x0, x1)
        for t in xticks:
            xpix = left + (t - x0) / (x1 - x0) * pw
            label = f"1e{t:g}" if self.logx else f"{t:g}"
            parts.append(
                f'<line x1="{xpix:.1f}" y1="{top + ph}" x2="{xpix:.1f}" '
                f'y2="{top + ph + 4}" stroke="#222"/>'
            )
            parts.append(
                f'<text x="{xpix:.1f}" y="{top + ph + 17}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{label}</text>'
            )
        for t in _nice_ticks(y0, y1):
            ypix = top + ph - (t - y0) / (y1 - y0) * ph
            label = f"1e{t:g}" if self.logy else f"{t:g}"
            parts.append(
                f'<line x1="{left - 4}" y1="{ypix:.1f}" x2="{left}" y2="{ypix:.1f}" '
                f'stroke="#222"/>'
            )
            parts.append(
                f'<text x="{left - 7}" y="{ypix + 4:.1f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{label}</text>'
            )
        parts.append(
            f'<text x="{left + pw / 2:.1f}" y="{self.height - 10}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{self.xlabel}</text>'
        )
        parts.append(
            f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {top + ph / 2:.1f})">{self.ylabel}</text>'
        )
        # series
        for xs, ys, color, label, width, opacity in self.series:
            pts = " ".join(
                f"{px(x):.2f},{py(y):.2f}"
                for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y)
                and not (self.logx and x <= 0) and not (self.logy and y <= 0)
            )
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="{width}" stroke-opacity="{opacity}"/>'
            )
        for xs, ys, color, label in self.points:
            for x, y in zip(xs, ys):
                parts.append(
                    f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3.5" fill="{color}"/>'
                )
        # legend from labeled entries
        entries = []
        seen = set()
        for xs, ys, color, label, *_ in self.series:
            if label and label not in seen:
                entries.append((color, label))
                seen.add(label)
        for xs, ys, color, label in self.points:
            if label and label not in seen:
                entries.append((color, label))
                seen.add(label)
        for i, (color, label) in enumerate(entries):
            ly = top + 14 + 16 * i
            parts.append(
                f'<line x1="{left + pw - 130}" y1="{ly}" x2="{left + pw - 108}" '
                f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
            )
            parts.append(
                f'<text x="{left + pw - 102}" y="{ly + 4}" font-family="sans-serif" '
                f'font-size="11">{label}</text>'
            )
        parts.append("</svg>")
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text("\n".join(parts) + "\n")
