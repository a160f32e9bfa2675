"""Deterministic CSV, JSON and self-contained SVG writers."""
from __future__ import annotations

import csv
import io
import json
import math
from html import escape
from pathlib import Path

import numpy as np

__all__ = ["fmt", "dumps", "write_text", "write_csv", "write_json", "heatmap_svg", "lines_svg", "checks_svg", "export"]


def fmt(x) -> str:
    """Render a number with 17 significant digits (round-trips a double)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        return f"{format(z.real, '.17g')}{'+' if z.imag >= 0 or math.isnan(z.imag) else '-'}{format(abs(z.imag), '.17g')}j"
    return format(float(x), ".17g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON with insertion-ordered keys and 17-digit floats; NaN and inf become null."""

    def enc(o, level):
        o = _plain(o)
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None or isinstance(o, bool):
            return json.dumps(o)
        if isinstance(o, int):
            return str(o)
        if isinstance(o, float):
            return fmt(o) if math.isfinite(o) else "null"
        if isinstance(o, complex):
            return enc({"re": o.real, "im": o.imag}, level)
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(_plain(v), (int, float, bool)) or _plain(v) is None for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        if hasattr(o, "to_dict"):
            return enc(o.to_dict(), level)
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return write_text(path, buf.getvalue())


def write_json(path, obj) -> Path:
    return write_text(path, dumps(obj))


# a short perceptually ordered palette, interpolated linearly
_PALETTE = np.array(
    [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], dtype=float
)


def _color(u: float) -> str:
    if not math.isfinite(u):
        return "#cccccc"
    u = min(max(u, 0.0), 1.0) * (len(_PALETTE) - 1)
    i = min(int(u), len(_PALETTE) - 2)
    rgb = _PALETTE[i] + (u - i) * (_PALETTE[i + 1] - _PALETTE[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _svg(width, height, body, title) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>\n'
    )
    return head + "".join(body) + "</svg>\n"


def heatmap_svg(path, xs, ys, Z, title: str = "") -> Path:
    """Cell map of ``Z[j, i]`` at ``(xs[i], ys[j])`` with a colour bar."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    Z = np.asarray(Z, dtype=float)
    left, top, pw, ph = 60, 30, 480, 300
    finite = Z[np.isfinite(Z)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    cw, chh = pw / xs.size, ph / ys.size
    body = []
    for j in range(ys.size):
        y = top + ph - (j + 1) * chh
        for i in range(xs.size):
            c = _color((Z[j, i] - lo) / span)
            body.append(f'<rect x="{left + i * cw:.2f}" y="{y:.2f}" width="{cw + 0.05:.2f}" height="{chh + 0.05:.2f}" fill="{c}"/>\n')
    body.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n')
    body.append(f'<text x="{left}" y="{top + ph + 15}">{fmt_short(xs[0])}</text>\n')
    body.append(f'<text x="{left + pw}" y="{top + ph + 15}" text-anchor="end">{fmt_short(xs[-1])}</text>\n')
    body.append(f'<text x="{left - 5}" y="{top + ph}" text-anchor="end">{fmt_short(ys[0])}</text>\n')
    body.append(f'<text x="{left - 5}" y="{top + 10}" text-anchor="end">{fmt_short(ys[-1])}</text>\n')
    bx = left + pw + 20
    for k in range(50):
        body.append(f'<rect x="{bx}" y="{top + ph - (k + 1) * ph / 50:.2f}" width="14" height="{ph / 50 + 0.05:.2f}" fill="{_color(k / 49)}"/>\n')
    body.append(f'<text x="{bx + 18}" y="{top + ph}">{fmt_short(lo)}</text>\n')
    body.append(f'<text x="{bx + 18}" y="{top + 10}">{fmt_short(hi)}</text>\n')
    return write_text(path, _svg(left + pw + 90, top + ph + 30, body, title))


def fmt_short(x) -> str:
    return format(float(x), ".4g")


_LINE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f")


def lines_svg(path, t, series: dict, title: str = "") -> Path:
    """One polyline per series, each rescaled to its own range (listed in the legend)."""
    t = np.asarray(t, dtype=float)
    left, top, pw, ph = 50, 30, 480, 300
    t0, t1 = float(t[0]), float(t[-1])
    tspan = (t1 - t0) or 1.0
    body = [f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>\n']
    for k, (name, vals) in enumerate(series.items()):
        v = np.real(np.asarray(vals, dtype=complex))
        lo, hi = float(np.min(v)), float(np.max(v))
        span = (hi - lo) or 1.0
        pts = " ".join(
            f"{left + pw * (ti - t0) / tspan:.2f},{top + ph - ph * (vi - lo) / span:.2f}" for ti, vi in zip(t, v)
        )
        color = _LINE_COLORS[k % len(_LINE_COLORS)]
        body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"><title>{escape(name)}</title></polyline>\n')
        body.append(
            f'<text x="{left + pw + 10}" y="{top + 12 + 14 * k}" fill="{color}">{escape(name)} [{fmt_short(lo)}, {fmt_short(hi)}]</text>\n'
        )
    body.append(f'<text x="{left}" y="{top + ph + 15}">t = {fmt_short(t0)}</text>\n')
    body.append(f'<text x="{left + pw}" y="{top + ph + 15}" text-anchor="end">t = {fmt_short(t1)}</text>\n')
    return write_text(path, _svg(left + pw + 260, top + ph + 30, body, title))


def checks_svg(path, checks, title: str = "") -> Path:
    """Table of checks, one row each, coloured by status."""
    rows = list(checks)
    width, top, rh = 760, 34, 18
    body = []
    for k, c in enumerate(rows):
        y = top + k * rh
        color = "#2ca02c" if c.passed else "#d62728"
        body.append(f'<rect x="10" y="{y}" width="12" height="12" fill="{color}"/>\n')
        body.append(f'<text x="30" y="{y + 10}">{escape(c.line())}</text>\n')
    return write_text(path, _svg(width, top + rh * max(len(rows), 1) + 10, body, title))


def export(obj, format: str, path) -> Path:
    """Write a report, scan or trace in one of ``csv``, ``json``, ``svg``."""
    format = str(format).lower()
    if format not in ("csv", "json", "svg"):
        raise ValueError(f"unknown export format {format!r}")
    if format == "json":
        return write_json(path, obj.to_dict() if hasattr(obj, "to_dict") else obj)
    method = getattr(obj, f"to_{format}", None)
    if method is None:
        raise ValueError(f"{type(obj).__name__} has no {format} rendering")
    method(path)
    return Path(path)
