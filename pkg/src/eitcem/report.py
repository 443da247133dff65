"""CSV, SVG and provenance output for sweep reports.

Output bytes depend only on the report contents, so repeated runs of the
same sweep produce identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .experiments import ERROR_COLUMNS, SweepReport

COLORS = {"h1": "#1f77b4", "combined": "#ff7f0e", "l2": "#2ca02c", "rmap": "#d62728"}


def _fmt(x: float) -> str:
    return format(x, ".17g")


def csv_text(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("param",) + report.columns)
    for row in report.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list, list]:
    """Header and float rows of a report CSV."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def svg_text(report: SweepReport, width: int = 640, height: int = 440) -> str:
    """Log-log chart with one polyline per error column and slopes in the legend."""
    left, right, top, bottom = 70, 180, 20, 50
    pw, ph = width - left - right, height - top - bottom
    xs = [r[0] for r in report.rows]
    series = {c: report.column(c) for c in ERROR_COLUMNS}
    pos = [v for vals in series.values() for v in vals if v > 0]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    if xs and pos and all(x > 0 for x in xs):
        lx0, lx1 = math.log10(min(xs)), math.log10(max(xs))
        ly0, ly1 = math.log10(min(pos)), math.log10(max(pos))
        lx1 = lx1 if lx1 > lx0 else lx0 + 1
        ly1 = ly1 if ly1 > ly0 else ly0 + 1

        def px(x):
            return left + (math.log10(x) - lx0) / (lx1 - lx0) * pw

        def py(y):
            return top + ph - (math.log10(y) - ly0) / (ly1 - ly0) * ph

        for name, vals in series.items():
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, vals) if y > 0)
            out.append(f'<polyline class="series" data-column="{name}" points="{pts}" '
                       f'fill="none" stroke="{COLORS[name]}" stroke-width="1.5"/>')
        for d in range(math.floor(lx0), math.ceil(lx1) + 1):
            if lx0 - 1e-9 <= d <= lx1 + 1e-9:
                out.append(f'<text x="{px(10.0 ** d):.2f}" y="{top + ph + 18}" '
                           f'font-size="11" text-anchor="middle">1e{d}</text>')
        for d in range(math.floor(ly0), math.ceil(ly1) + 1):
            if ly0 - 1e-9 <= d <= ly1 + 1e-9:
                out.append(f'<text x="{left - 6}" y="{py(10.0 ** d):.2f}" '
                           f'font-size="11" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" font-size="13" '
               f'text-anchor="middle">{report.param_name}</text>')
    for i, name in enumerate(ERROR_COLUMNS):
        slope = report.slope(name)
        label = "n/a" if slope is None else f"{slope:.4f}"
        y = top + 20 + 22 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{y - 4}" x2="{left + pw + 32}" '
                   f'y2="{y - 4}" stroke="{COLORS[name]}" stroke-width="2"/>')
        out.append(f'<text class="slope" data-column="{name}" x="{left + pw + 38}" y="{y}" '
                   f'font-size="12">{name}: slope {label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def provenance_text(report: SweepReport) -> str:
    prov = dict(report.provenance)
    prov["slopes"] = {k: (None if v is None else {"slope": v.slope, "intercept": v.intercept,
                                                   "max_residual": v.max_residual,
                                                   "n_points": v.n_points})
                      for k, v in report.slopes.items()}
    return json.dumps(prov, indent=2, sort_keys=True, default=str) + "\n"


def emit_report(report: SweepReport, out_dir, fmt: str = "csv", stem: str = None) -> Path:
    """Write the report as ``csv``, ``svg`` or ``json`` (provenance); returns the path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"sweep_{report.kind}"
    text = {"csv": csv_text, "svg": svg_text, "json": provenance_text}
    if fmt not in text:
        raise ValueError(f"unknown report format {fmt!r}")
    suffix = "provenance.json" if fmt == "json" else fmt
    path = out_dir / f"{stem}.{suffix}"
    with open(path, "w", newline="") as f:
        f.write(text[fmt](report))
    return path
