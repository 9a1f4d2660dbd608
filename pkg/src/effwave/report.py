"""Persistence: JSON/CSV result files, run manifest and dependency-free SVG plots."""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from . import __version__

BANDS_HEADER_PREFIX = "theta"
ERRORS_HEADER = ["epsilon", "replicas", "t", "err_mean", "err_stderr"]
MASS_HEADER = ["t", "mass", "predicted", "residual"]
MANIFEST_KEYS = ("config_hash", "seed", "tool_version", "started_at", "wall_seconds")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def bands_rows(B) -> tuple[list[str], list[list]]:
    N = B.bands.shape[1]
    header = [BANDS_HEADER_PREFIX] + [f"lambda_{i + 1}" for i in range(N)]
    return header, [[float(t), *map(float, row)] for t, row in zip(B.thetas, B.bands)]


def write_report(report, out_dir, cfg=None, bands=None, started_at: str | None = None,
                 wall_seconds: float = 0.0) -> dict[str, Path]:
    """Write the fixed file set and return the paths.

    ``report`` may be a :class:`~effwave.harness.ConvergenceReport` or ``None``
    (an empty sweep: headers only).  ``report.json`` carries no timing, so
    repeated runs with the same inputs give identical bytes; the wall time and
    start timestamp live in ``manifest.json``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    paths = {name: out / name for name in
             ("report.json", "bands.csv", "errors.csv", "mass.csv", "manifest.json")}
    B = bands if bands is not None else getattr(report, "bands", None)
    if B is not None:
        header, rows = bands_rows(B)
    else:
        header, rows = [BANDS_HEADER_PREFIX], []
    _write_csv(paths["bands.csv"], header, rows)
    _write_csv(paths["errors.csv"], ERRORS_HEADER, report.error_rows() if report else [])
    mass_rows = report.results[-1].mass_rows if report and report.results else []
    _write_csv(paths["mass.csv"], MASS_HEADER, mass_rows)
    _write_text(paths["report.json"], dumps(report.to_dict() if report else {"results": []}))
    manifest = {
        "config_hash": cfg.config_hash() if cfg is not None else None,
        "seed": cfg.numerics.seed if cfg is not None else None,
        "tool_version": __version__,
        "started_at": started_at or _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "wall_seconds": float(wall_seconds),
    }
    _write_text(paths["manifest.json"], dumps(manifest))
    return paths


# ---------------------------------------------------------------------------
# SVG


def svg_line_plot(series: list[dict], title: str, xlabel: str, ylabel: str,
                  logx: bool = False, logy: bool = False, width: int = 480,
                  height: int = 320) -> str:
    """Self-contained SVG with one polyline (and optional markers) per series.

    Each series is ``{"x": [...], "y": [...], "label": str, "markers": bool}``.
    """
    margin = 50
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = [[(tx(a), ty(b)) for a, b in zip(s["x"], s["y"])
            if math.isfinite(a) and math.isfinite(b) and (a > 0 or not logx) and (b > 0 or not logy)]
           for s in series]
    allp = [p for ps in pts for p in ps]
    x0, x1 = (min(p[0] for p in allp), max(p[0] for p in allp)) if allp else (0.0, 1.0)
    y0, y1 = (min(p[1] for p in allp), max(p[1] for p in allp)) if allp else (0.0, 1.0)
    x1, y1 = (x1 if x1 > x0 else x0 + 1), (y1 if y1 > y0 else y0 + 1)

    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    ET.SubElement(svg, "text", x=str(width // 2), y="20", attrib={"text-anchor": "middle"}).text = title
    ET.SubElement(svg, "line", x1=str(margin), y1=str(height - margin), x2=str(width - margin),
                  y2=str(height - margin), stroke="black")
    ET.SubElement(svg, "line", x1=str(margin), y1=str(margin), x2=str(margin),
                  y2=str(height - margin), stroke="black")
    ET.SubElement(svg, "text", x=str(width // 2), y=str(height - 10),
                  attrib={"text-anchor": "middle"}).text = xlabel + (" (log10)" if logx else "")
    ET.SubElement(svg, "text", x="12", y=str(height // 2),
                  transform=f"rotate(-90 12 {height // 2})",
                  attrib={"text-anchor": "middle"}).text = ylabel + (" (log10)" if logy else "")
    for val, pos in ((x0, "start"), (x1, "end")):
        ET.SubElement(svg, "text", x=f"{sx(val):.1f}", y=str(height - margin + 15),
                      attrib={"text-anchor": pos, "font-size": "10"}).text = f"{val:.3g}"
    for val in (y0, y1):
        ET.SubElement(svg, "text", x=str(margin - 4), y=f"{sy(val):.1f}",
                      attrib={"text-anchor": "end", "font-size": "10"}).text = f"{val:.3g}"
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for i, (s, ps) in enumerate(zip(series, pts)):
        if not ps:
            continue
        col = colours[i % len(colours)]
        ET.SubElement(svg, "polyline", fill="none", stroke=col, attrib={"stroke-width": "1.5"},
                      points=" ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in ps))
        if s.get("markers"):
            for a, b in ps:
                ET.SubElement(svg, "circle", cx=f"{sx(a):.2f}", cy=f"{sy(b):.2f}", r="3", fill=col)
        ET.SubElement(svg, "text", x=str(width - margin + 2), y=str(margin + 14 * i),
                      fill=col, attrib={"font-size": "10"}).text = s.get("label", "")
    return ET.tostring(svg, encoding="unicode")


def emit_plot_data(report, out_dir, bands=None, notice=print) -> list[Path]:
    """Band diagram, log-log error against eps and mass-law residuals, where available."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    B = bands if bands is not None else getattr(report, "bands", None)
    if B is not None:
        series = [{"x": list(B.thetas), "y": list(B.bands[:, i]), "label": f"band {i + 1}"}
                  for i in range(B.bands.shape[1])]
        written.append(_save(out / "bands.svg", svg_line_plot(series, "Bloch bands", "theta",
                                                              "lambda")))
    else:
        notice("no band data: bands.svg skipped")
    results = getattr(report, "results", None) or []
    if results:
        eps = [r.eps for r in results]
        sup = [r.sup_mean for r in results]
        written.append(_save(out / "errors.svg", svg_line_plot(
            [{"x": eps, "y": sup, "label": "E sup_t error", "markers": True}],
            "factorization error", "epsilon", "error", logx=True, logy=True)))
        rows = results[-1].mass_rows
        if rows:
            written.append(_save(out / "mass.svg", svg_line_plot(
                [{"x": [r[0] for r in rows], "y": [r[3] for r in rows], "label": "residual"}],
                "mass-law residual", "t", "mass - predicted")))
        else:
            notice("no mass series: mass.svg skipped")
    else:
        notice("no sweep results: errors.svg and mass.svg skipped")
    return written


def _save(path: Path, text: str) -> Path:
    _write_text(path, text)
    return path
