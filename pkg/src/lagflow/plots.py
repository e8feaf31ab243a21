"""Minimal deterministic SVG emission for run records.

Hand-rolled polyline plots keep the artifact output dependency-free and
byte-stable across platforms: fixed canvas, fixed 6-significant-digit
coordinate formatting, no timestamps.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

__all__ = ["line_plot", "energy_plot", "timestep_plot", "density_plot", "support_plot"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 30, 50


def _fmt(v: float) -> str:
    return format(v, ".6g")


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=float)
    span = hi - lo
    if span <= 0:
        span = 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def _axes(title, xlabel, ylabel, xlo, xhi, ylo, yhi):
    parts = [
        f'<rect x="{_ML}" y="{_MT}" width="{_W-_ML-_MR}" height="{_H-_MT-_MB}" '
        'fill="none" stroke="black" stroke-width="1"/>',
        f'<text x="{_W//2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W//2}" y="{_H-12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_H//2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H//2})">{ylabel}</text>',
        f'<text x="{_ML}" y="{_H-_MB+16}" text-anchor="middle" font-size="10">{_fmt(xlo)}</text>',
        f'<text x="{_W-_MR}" y="{_H-_MB+16}" text-anchor="middle" font-size="10">{_fmt(xhi)}</text>',
        f'<text x="{_ML-6}" y="{_H-_MB}" text-anchor="end" font-size="10">{_fmt(ylo)}</text>',
        f'<text x="{_ML-6}" y="{_MT+10}" text-anchor="end" font-size="10">{_fmt(yhi)}</text>',
    ]
    return parts


def line_plot(path: Path, series, title: str, xlabel: str, ylabel: str,
              logy: bool = False) -> None:
    """Write a polyline plot; ``series`` is a list of (x, y, color) triples."""
    finite = []
    for xs, ys, _ in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if logy:
            ys = np.where(ys > 0, ys, np.nan)
            ys = np.log10(ys)
        keep = np.isfinite(xs) & np.isfinite(ys)
        finite.append((xs[keep], ys[keep]))
    xall = np.concatenate([f[0] for f in finite]) if finite else np.array([0.0, 1.0])
    yall = np.concatenate([f[1] for f in finite]) if finite else np.array([0.0, 1.0])
    if xall.size == 0:
        xall = np.array([0.0, 1.0])
        yall = np.array([0.0, 1.0])
    xlo, xhi = float(xall.min()), float(xall.max())
    ylo, yhi = float(yall.min()), float(yall.max())
    if yhi - ylo < 1e-300:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    body = _axes(title, xlabel, ("log10 " if logy else "") + ylabel, xlo, xhi, ylo, yhi)
    for (xs, ys), (_, _, color) in zip(finite, series):
        if xs.size == 0:
            continue
        px = _scale(xs, xlo, xhi, _ML, _W - _MR)
        py = _scale(ys, ylo, yhi, _H - _MB, _MT)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
    _write_svg(path, body)


def _write_svg(path: Path, body) -> None:
    path = Path(path)
    content = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
               f'viewBox="0 0 {_W} {_H}">',
               '<rect width="100%" height="100%" fill="white"/>'] + body + ["</svg>"]
    path.write_text("\n".join(content) + "\n", encoding="utf-8")


def energy_plot(path, times, energies) -> None:
    line_plot(path, [(times, energies, "#1f77b4")], "discrete energy", "t", "E_h")


def timestep_plot(path, times, taus, ratios) -> None:
    line_plot(path, [(times, taus, "#1f77b4"), (times, ratios, "#d62728")],
              "time step (blue) and ratio (red)", "t", "tau / ratio", logy=True)


def density_plot(path, positions, values) -> None:
    line_plot(path, [(positions, values, "#1f77b4")], "density", "x", "rho")


def support_plot(path, x, y, rho, circle_radius=None, level_frac: float = 1e-3) -> None:
    """Scatter of nodes above the support level plus an optional exact circle."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    rho = np.asarray(rho).ravel()
    level = level_frac * float(rho.max()) if rho.max() > 0 else math.inf
    keep = rho >= level
    lim = max(1.0, float(np.max(np.abs(np.concatenate([x, y])))))
    body = _axes("support (nodes above level)", "x", "y", -lim, lim, -lim, lim)
    px = _scale(x[keep], -lim, lim, _ML, _W - _MR)
    py = _scale(y[keep], -lim, lim, _H - _MB, _MT)
    for a, b in zip(px, py):
        body.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="1.1" fill="#1f77b4"/>')
    if circle_radius is not None:
        cx = _scale(np.array([0.0]), -lim, lim, _ML, _W - _MR)[0]
        cy = _scale(np.array([0.0]), -lim, lim, _H - _MB, _MT)[0]
        rxy = circle_radius / (2.0 * lim)
        rx = rxy * (_W - _ML - _MR)
        ry = rxy * (_H - _MT - _MB)
        body.append(f'<ellipse cx="{_fmt(cx)}" cy="{_fmt(cy)}" rx="{_fmt(rx)}" ry="{_fmt(ry)}" '
                    'fill="none" stroke="#2ca02c" stroke-dasharray="6 4" stroke-width="1.5"/>')
    _write_svg(path, body)
