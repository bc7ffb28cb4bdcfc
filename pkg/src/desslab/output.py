"""Deterministic CSV, JSON and SVG writers."""
from __future__ import annotations

import enum
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

CLIP = 1e6


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, enum.Enum):
        return str(v.value)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.9g}"
    return str(v)


def emit_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    """Write ``header`` then ``rows``; ``\\n`` line endings, 9 significant digits."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return format_value(v)
        return v
    return obj


def dumps_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_json(obj, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))
    return path


# -- heatmaps ---------------------------------------------------------------

_NEG = (33, 102, 172)
_MID = (247, 247, 247)
_POS = (178, 24, 43)


def _mix(c0, c1, t):
    return tuple(int(round(a + (b - a) * t)) for a, b in zip(c0, c1))


def diverging_color(t: float) -> str:
    """Map ``t`` in [-1, 1] onto blue, near-white, red."""
    t = min(1.0, max(-1.0, t))
    rgb = _mix(_MID, _POS, t) if t >= 0 else _mix(_MID, _NEG, -t)
    return "#%02x%02x%02x" % rgb


def emit_heatmap_svg(matrix, path, symmetric_scale: bool = True, cell_px: int = 12,
                     axis_labels=("", ""), block: Optional[int] = None,
                     title: str = "", clip: float = CLIP) -> Path:
    """Render a matrix as a grid of coloured cells.

    Rows are drawn top to bottom. When ``block`` is given, the first
    ``block`` rows (the ring block) are outlined solid and every multiple
    of ``block`` rows gets a dashed separator. Entries beyond ``clip``
    (including non-finite ones) are clipped and a note is added.
    """
    M = np.array(matrix, dtype=float, ndmin=2)
    n_rows, n_cols = M.shape
    bad = ~np.isfinite(M) | (np.abs(M) > clip)
    M = np.where(np.isnan(M), clip, M)
    M = np.clip(M, -clip, clip)

    if symmetric_scale:
        vmax = float(np.max(np.abs(M))) if M.size else 0.0
        scale = (lambda v: v / vmax) if vmax > 0 else (lambda v: 0.0)
    else:
        lo, hi = (float(M.min()), float(M.max())) if M.size else (0.0, 0.0)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        scale = (lambda v: (v - mid) / half) if half > 0 else (lambda v: 0.0)

    left, top = 40, 24 if title else 8
    width, height = n_cols * cell_px, n_rows * cell_px
    notes = 16 if bad.any() else 0
    W, H = left + width + 8, top + height + 24 + notes
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="16" font-family="sans-serif" font-size="12">{_esc(title)}</text>')
    out.append(f'<g transform="translate({left},{top})">')
    for i in range(n_rows):
        for j in range(n_cols):
            out.append(f'<rect x="{j * cell_px}" y="{i * cell_px}" width="{cell_px}" '
                       f'height="{cell_px}" fill="{diverging_color(scale(M[i, j]))}"/>')
    if block and block < n_rows:
        out.append(f'<rect class="ring-block" x="0" y="0" width="{width}" height="{block * cell_px}" '
                   f'fill="none" stroke="#1a9641" stroke-width="2"/>')
        for r in range(block, n_rows, block):
            out.append(f'<line class="block-sep" x1="0" y1="{r * cell_px}" x2="{width}" y2="{r * cell_px}" '
                       f'stroke="#1a9641" stroke-width="1" stroke-dasharray="4,3"/>')
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="none" stroke="#444444"/>')
    out.append("</g>")
    row_label, col_label = axis_labels
    if col_label:
        out.append(f'<text x="{left}" y="{top + height + 16}" font-family="sans-serif" '
                   f'font-size="11">{_esc(col_label)}</text>')
    if row_label:
        out.append(f'<text x="12" y="{top + height // 2}" font-family="sans-serif" font-size="11" '
                   f'transform="rotate(-90 12 {top + height // 2})">{_esc(row_label)}</text>')
    if bad.any():
        out.append(f'<text class="clip-note" x="{left}" y="{top + height + 32}" font-family="sans-serif" '
                   f'font-size="11">{int(bad.sum())} entries clipped at +/-{clip:g}</text>')
    out.append("</svg>")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
