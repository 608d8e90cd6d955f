"""Static curve artifacts: a CSV of samples plus an SVG polyline of the same samples."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import kernels
from .fibrancy import halfline_candidate
from .smoothcalc import check_epsilon, make_cutoff

CURVES = ("cutoff", "R", "section", "obstruction")


def curve_samples(curve: str, epsilon: float = 0.2, samples: int = 1001):
    """(header, columns) for one of :data:`CURVES`."""
    eps = check_epsilon(epsilon)
    if curve == "cutoff":
        t = np.linspace(-0.25, 1.25, samples)
        return ("t", "phi"), (t, make_cutoff(eps)(t))
    if curve == "R":
        theta = np.linspace(-0.5, 0.5, samples)
        _, c = kernels.circle_section(theta, eps)
        return ("theta", "R"), (theta, c[:, 1])
    if curve == "section":
        theta = np.linspace(-0.5, 0.5, samples)
        _, c = kernels.circle_section(theta, eps)
        return ("theta", "c0", "c1", "c2"), (theta, c[:, 0], c[:, 1], c[:, 2])
    if curve == "obstruction":
        t = np.linspace(-1.0, 1.0, samples)
        h = halfline_candidate()(np.repeat(t[:, None], 3, axis=1))[:, 0]
        return ("t", "h"), (t, h)
    raise ValueError(f"unknown curve {curve!r}; choose from {CURVES}")


def write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])


def svg_polylines(xs, ys_list, width: int = 480, height: int = 320, pad: int = 24,
                  title: str = "") -> str:
    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    allys = np.concatenate(ys_list)
    y0, y1 = float(allys.min()), float(allys.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = (width - 2 * pad) / (x1 - x0)
    sy = (height - 2 * pad) / (y1 - y0)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{pad}" y="{pad - 8}" font-size="12">{title}</text>')
    for k, ys in enumerate(ys_list):
        pts = " ".join(f"{pad + (x - x0) * sx:.2f},{height - pad - (y - y0) * sy:.2f}"
                       for x, y in zip(xs, ys))
        parts.append(f'<polyline fill="none" stroke="{colours[k % len(colours)]}" '
                     f'stroke-width="1.5" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(curve: str, path, epsilon: float = 0.2, samples: int = 1001) -> tuple:
    """Write ``<path>.csv`` and ``<path>.svg``; returns both paths."""
    header, cols = curve_samples(curve, epsilon, samples)
    base = Path(path)
    if base.suffix in (".csv", ".svg"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, svg_path = (base.parent / f"{base.name}.csv", base.parent / f"{base.name}.svg")
    write_csv(csv_path, header, cols)
    svg_path.write_text(svg_polylines(cols[0], list(cols[1:]), title=f"{curve} (eps={epsilon:g})"))
    return csv_path, svg_path
