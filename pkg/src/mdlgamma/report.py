"""Report writers: versioned JSON, CSV tables and log-log SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from pathlib import Path

import numpy as np

from . import __version__

FORMAT = "mdlgamma-report"
FORMAT_VERSION = 1


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def to_json(payload: dict, kind: str) -> str:
    """Serialise with a version header and sorted keys, so output is stable."""
    doc = {"format": FORMAT, "version": FORMAT_VERSION, "package_version": __version__,
           "kind": kind, "data": _plain(payload)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if doc.get("version", 0) > FORMAT_VERSION:
        raise ValueError(f"{path} has format version {doc['version']}, newer than {FORMAT_VERSION}")
    return doc


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def rows_to_csv(rows) -> str:
    """CSV text from a list of dicts.  Columns follow the first row's key order."""
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0].keys())
    for r in rows[1:]:
        cols += [k for k in r if k not in cols]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(k, "")) for k in cols])
    return buf.getvalue()


def loglog_svg(x, y, slope=None, intercept=None, title="", xlabel="h", ylabel="error",
               width=420, height=320) -> str:
    """Minimal log-log scatter plot with an optional fitted line and slope label."""
    lx = np.log10(np.asarray(x, dtype=float))
    ly = np.log10(np.asarray(y, dtype=float))
    pad = 50
    x0, x1 = lx.min(), lx.max()
    y0, y1 = ly.min(), ly.max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="11">'
           f'log10 {_esc(xlabel)}</text>',
           f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="11" '
           f'transform="rotate(-90 14 {height / 2:.1f})">log10 {_esc(ylabel)}</text>']
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3.5" fill="#1f4e9c"/>')
    if slope is not None and intercept is not None:
        ya = (slope * x0 * math.log(10) + intercept) / math.log(10)
        yb = (slope * x1 * math.log(10) + intercept) / math.log(10)
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(ya):.2f}" x2="{px(x1):.2f}" y2="{py(yb):.2f}" '
                   f'stroke="#b22222" stroke-dasharray="5,3"/>')
        out.append(f'<text x="{width - pad:.1f}" y="{pad - 8}" text-anchor="end" font-size="12">'
                   f'slope = {slope:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def output_dir(path=None) -> Path:
    """Resolve the output directory: explicit path, $MDLGAMMA_OUT, or ./mdlgamma_out."""
    p = Path(path or os.environ.get("MDLGAMMA_OUT") or "mdlgamma_out")
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_bundle(out, kind, payload, tables=None, fits=None):
    """Write <kind>.json, one CSV per table and one SVG per rate fit.  Returns written paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / f"{kind}.json"
    p.write_text(to_json(payload, kind), encoding="utf-8")
    paths.append(p)
    for name, rows in sorted((tables or {}).items()):
        p = out / f"{name}.csv"
        p.write_text(rows_to_csv(rows), encoding="utf-8")
        paths.append(p)
    for name, fit in sorted((fits or {}).items()):
        if fit is None:
            continue
        p = out / f"{name}.svg"
        p.write_text(loglog_svg(fit.x, fit.y, fit.slope, fit.intercept, title=name), encoding="utf-8")
        paths.append(p)
    return paths


def svgs_from_report(doc: dict, out):
    """Regenerate plots from a JSON protocol report."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fit in sorted(doc["data"].get("fits", {}).items()):
        if not fit:
            continue
        x, y = zip(*fit["points"])
        p = out / f"{name}.svg"
        p.write_text(loglog_svg(x, y, fit["slope"], fit["intercept"], title=name), encoding="utf-8")
        paths.append(p)
    return paths


def summary_lines(doc: dict):
    """One line per graded check of a protocol report."""
    lines = []
    for c in doc["data"].get("checks", []):
        flag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{flag}  {c['name']:<32s} {c['value']:.6g}  ({c['threshold']})")
    return lines
