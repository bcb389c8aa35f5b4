"""Artifact writing: atomic CSV/JSON files and small native SVG line charts."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from fractions import Fraction
from xml.sax.saxutils import escape

__all__ = [
    "write_text_atomic",
    "write_csv",
    "write_json",
    "to_jsonable",
    "config_hash",
    "svg_line_plot",
    "fraction_cells",
]


def write_text_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list, rows: list) -> None:
    """Comma-separated, header row, UTF-8, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([row.get(h, "") for h in header] if isinstance(row, dict) else row)
    write_text_atomic(path, buf.getvalue())


def to_jsonable(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = [to_jsonable(v) for v in obj]
        return sorted(items, key=repr) if isinstance(obj, (set, frozenset)) else items
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    return obj


def write_json(path: str, obj) -> None:
    write_text_atomic(path, json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(to_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def fraction_cells(x: Fraction) -> dict:
    """A rational as ``p/q`` plus its decimal rendering."""
    return {"exact_p_over_q": f"{x.numerator}/{x.denominator}", "decimal": repr(float(x))}


def svg_line_plot(xs, ys, title: str = "", xlabel: str = "n", ylabel: str = "value",
                  logy: bool = True, width: int = 480, height: int = 320) -> str:
    """A minimal line chart; nonpositive values are skipped on a log axis."""
    pts = [(float(x), float(y)) for x, y in zip(xs, ys) if not logy or float(y) > 0]
    m = 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             '<rect width="100%" height="100%" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
             f'<line x1="{m}" y1="{height - m}" x2="{width - m / 2}" y2="{height - m}" stroke="black"/>',
             f'<line x1="{m}" y1="{m / 2}" x2="{m}" y2="{height - m}" stroke="black"/>',
             f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
             f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="12" '
             f'transform="rotate(-90 14 {height / 2})">{escape(ylabel)}{" (log)" if logy else ""}</text>']
    if pts:
        tx = [p[0] for p in pts]
        ty = [math.log10(p[1]) if logy else p[1] for p in pts]
        x0, x1 = min(tx), max(tx)
        y0, y1 = min(ty), max(ty)
        if x1 == x0:
            x0, x1 = x0 - 1, x1 + 1
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1

        def sx(v):
            return m + (v - x0) / (x1 - x0) * (width - 1.5 * m)

        def sy(v):
            return height - m - (v - y0) / (y1 - y0) * (height - 1.5 * m)

        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(tx, ty))
        parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{coords}"/>')
        for a, b in zip(tx, ty):
            parts.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>')
        for v, label in ((y0, y0), (y1, y1)):
            text = f"1e{label:.2f}" if logy else f"{label:.3g}"
            parts.append(f'<text x="{m - 4}" y="{sy(v):.2f}" text-anchor="end" font-size="10">{text}</text>')
        for v in (x0, x1):
            parts.append(f'<text x="{sx(v):.2f}" y="{height - m + 14}" text-anchor="middle" '
                         f'font-size="10">{v:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
