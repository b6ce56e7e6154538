"""Self-contained SVG figures with the plotted numbers written alongside as CSV.

The SVG is emitted from a fixed template.  Data coordinates map to pixels by
``px = left + (x - x0) / (x1 - x0) * width`` and
``py = top + height - (y - y0) / (y1 - y0) * height`` (``log10`` applied first
on logarithmic axes); every number is printed with fixed precision and no
timestamps are embedded, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .errors import FormatError
from .kernel import EigenSpectrum
from .modes import TemporalMode, load_mode, overlap
from .reconstruct import ReconstructionResult, vacuum_band
from .sweep import read_rows

KINDS = ("spectrum_histogram", "eigenfunctions_overlay", "polar_mode", "infidelity_vs_nwf")
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 40, 60


@dataclass(frozen=True)
class ReportSpec:
    kind: str
    input: str
    output: str
    csv_output: Optional[str] = None
    target: Optional[str] = None
    n_mode_eff: Optional[float] = None
    z: float = 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FormatError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")

    @property
    def csv_path(self) -> str:
        return self.csv_output or str(Path(self.output).with_suffix(".csv"))


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, xlim, ylim, xlog=False, ylog=False):
        self.xlog, self.ylog = xlog, ylog
        self.x0, self.x1 = (math.log10(v) for v in xlim) if xlog else xlim
        self.y0, self.y1 = (math.log10(v) for v in ylim) if ylog else ylim
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.pw, self.ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(self, x):
        x = math.log10(x) if self.xlog else x
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        y = math.log10(y) if self.ylog else y
        return TOP + self.ph - (y - self.y0) / (self.y1 - self.y0) * self.ph

    def ticks(self, log, lo, hi):
        if log:
            return [10.0**k for k in range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)]
        step = 10 ** math.floor(math.log10((hi - lo) / 4))
        for m in (1, 2, 5, 10):
            if (hi - lo) / (m * step) <= 6:
                step *= m
                break
        start = math.ceil(lo / step) * step
        return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list:
    out = [f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{LEFT}" y="{TOP}" width="{ax.pw}" height="{ax.ph}" fill="none" stroke="black"/>']
    for t in ax.ticks(ax.xlog, ax.x0, ax.x1):
        x = ax.px(t)
        lab = f"1e{round(math.log10(t))}" if ax.xlog else f"{t:g}"
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP + ax.ph}" x2="{_fmt(x)}" y2="{TOP + ax.ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ax.ph + 18}" font-size="11" text-anchor="middle">{lab}</text>')
    for t in ax.ticks(ax.ylog, ax.y0, ax.y1):
        y = ax.py(t)
        lab = f"1e{round(math.log10(t))}" if ax.ylog else f"{t:g}"
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" font-size="11" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{W / 2}" y="{TOP - 14}" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{LEFT + ax.pw / 2}" y="{H - 18}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{TOP + ax.ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ax.ph / 2})">{escape(ylabel)}</text>')
    return out


def _polyline(ax, xs, ys, color, dash=False, width=1.5) -> str:
    pts = " ".join(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(xs, ys))
    d = ' stroke-dasharray="5,4"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{d}/>'


def _svg(elements: list) -> str:
    body = "\n".join(elements)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">\n{body}\n</svg>\n')


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _pad(lo, hi, frac=0.05):
    span = hi - lo or 1.0
    return lo - frac * span, hi + frac * span


# --------------------------------------------------------------------------
# figure kinds

def spectrum_histogram(spectrum: EigenSpectrum, n_mode_eff=None, z: float = 3.0):
    """Photon numbers per eigenmode with the shaded vacuum band ``+/- z sqrt(N_mode/N_wf)``."""
    if spectrum.n_wf < 1:
        raise FormatError("spectrum carries no waveform count; cannot draw the vacuum band")
    n_mode_eff = spectrum.grid.n_samp if n_mode_eff is None else n_mode_eff
    half = z * vacuum_band(n_mode_eff, spectrum.n_wf)
    nn = spectrum.photon_numbers
    idx = np.arange(1, len(nn) + 1)
    ax = _Axes((0.5, len(nn) + 0.5), _pad(min(nn.min(), -half), max(nn.max(), half)))
    els = _frame(ax, "Eigenvalue spectrum", "eigenmode index", "photon number n_i = (kappa_i - 1)/2")
    y_hi, y_lo = ax.py(half), ax.py(-half)
    els.append(f'<rect x="{LEFT}" y="{_fmt(y_hi)}" width="{ax.pw}" height="{_fmt(y_lo - y_hi)}" '
               f'fill="#999999" fill-opacity="0.3"/>')
    bw = ax.pw / len(nn) * 0.8
    y0 = ax.py(0.0)
    for i, v in zip(idx, nn):
        y = ax.py(v)
        els.append(f'<rect x="{_fmt(ax.px(i) - bw / 2)}" y="{_fmt(min(y, y0))}" width="{_fmt(bw)}" '
                   f'height="{_fmt(abs(y0 - y))}" fill="{COLORS[0]}"/>')
    rows = [(int(i), float(k), float(v), -half, half)
            for i, k, v in zip(idx, spectrum.eigenvalues, nn)]
    return _svg(els), _csv_text(("index", "eigenvalue", "photon_number", "band_lower", "band_upper"), rows)


def _align(target: TemporalMode, mode: TemporalMode) -> np.ndarray:
    """Target samples rotated by the global phase (and conjugation) that best
    matches ``mode``, for display only."""
    a, b = overlap(target, mode), overlap(target.conj(), mode)
    if abs(b) > abs(a):
        s, ov = np.conj(target.samples), b
    else:
        s, ov = target.samples, a
    return s * (ov / abs(ov) if abs(ov) > 0 else 1.0)


def eigenfunctions_overlay(result: ReconstructionResult, target: Optional[TemporalMode] = None):
    """Real and imaginary carriers of the reconstruction (solid) against the
    target's (dashed)."""
    f = result.candidate_plus
    t = f.grid.times
    tgt = None if target is None else _align(target, f)
    vals = [f.samples.real, f.samples.imag] + ([] if tgt is None else [tgt.real, tgt.imag])
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    ax = _Axes((t[0], t[-1]), _pad(lo, hi))
    els = _frame(ax, "Eigenfunctions", "time", "amplitude")
    els.append(_polyline(ax, t, f.samples.real, COLORS[0]))
    els.append(_polyline(ax, t, f.samples.imag, COLORS[1]))
    if tgt is not None:
        els.append(_polyline(ax, t, tgt.real, COLORS[0], dash=True))
        els.append(_polyline(ax, t, tgt.imag, COLORS[1], dash=True))
    nan = math.nan
    rows = [(float(t[k]), float(f.samples[k].real), float(f.samples[k].imag),
             nan if tgt is None else float(tgt[k].real), nan if tgt is None else float(tgt[k].imag))
            for k in range(len(t))]
    return _svg(els), _csv_text(("t", "re_measured", "im_measured", "re_target", "im_target"), rows)


def polar_mode(result: ReconstructionResult, target: Optional[TemporalMode] = None):
    """Parametric ``(Re f, Im f)`` curve of the reconstructed mode."""
    f = result.candidate_plus
    re, im = f.samples.real, f.samples.imag
    tgt = None if target is None else _align(target, f)
    lim = max(float(np.max(np.abs(re))), float(np.max(np.abs(im))),
              0.0 if tgt is None else float(np.max(np.abs(tgt)))) * 1.05 or 1.0
    ax = _Axes((-lim, lim), (-lim, lim))
    els = _frame(ax, "Temporal mode (polar)", "Re f", "Im f")
    els.append(_polyline(ax, re, im, COLORS[0]))
    if tgt is not None:
        els.append(_polyline(ax, tgt.real, tgt.imag, COLORS[3], dash=True))
    t = f.grid.times
    rows = [(k, float(t[k]), float(re[k]), float(im[k])) for k in range(len(t))]
    return _svg(els), _csv_text(("k", "t", "re", "im"), rows)


def infidelity_vs_nwf(rows: list):
    """Mean infidelity per sweep point with the complex-mode band shaded."""
    rows = [r for r in rows if r.n > 0]
    if not rows:
        raise FormatError("sweep has no rows with n > 0")
    groups = {}
    for r in rows:
        groups.setdefault(r.n, []).append(r)
    xs = [r.n_wf for r in rows]
    ys = [r.mean_infidelity for r in rows if r.mean_infidelity > 0]
    ys += [v for r in rows for v in r.predicted.complex_bounds]
    ax = _Axes((min(xs) / 1.5, max(xs) * 1.5), (min(ys) / 2, min(1.5, max(ys) * 2)), xlog=True, ylog=True)
    els = _frame(ax, "Infidelity versus number of waveforms", "N_wf", "infidelity")
    out = []
    for gi, (n, grp) in enumerate(sorted(groups.items())):
        color = COLORS[gi % len(COLORS)]
        grp = sorted(grp, key=lambda r: r.n_wf)
        lo = [max(r.predicted.complex_bounds[0], 10**ax.y0) for r in grp]
        hi = [min(r.predicted.complex_bounds[1], 10**ax.y1) for r in grp]
        gx = [r.n_wf for r in grp]
        pts = [f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(gx, hi)]
        pts += [f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}" for x, y in zip(gx[::-1], lo[::-1])]
        els.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        for r in grp:
            if r.mean_infidelity > 0:
                els.append(f'<circle cx="{_fmt(ax.px(r.n_wf))}" cy="{_fmt(ax.py(min(r.mean_infidelity, 10**ax.y1)))}" '
                           f'r="4" fill="{color}"/>')
            out.append((float(n), r.n_wf, r.mean_infidelity, r.std_infidelity,
                        r.predicted.complex_bounds[0], r.predicted.complex_bounds[1],
                        r.predicted.mean_infidelity_real))
        els.append(f'<text x="{W - RIGHT - 10}" y="{TOP + 16 + 14 * gi}" font-size="11" '
                   f'text-anchor="end" fill="{color}">n = {n:g}</text>')
    header = ("n", "n_wf", "mean_infidelity", "std_infidelity", "band_lower", "band_upper",
              "pred_mean_infidelity_real")
    return _svg(els), _csv_text(header, out)


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read {path} as JSON: {exc}") from exc


def emit_report(spec: ReportSpec) -> tuple:
    """Render ``spec`` and write the SVG plus its CSV; returns both paths."""
    target = load_mode(spec.target) if spec.target else None
    if spec.kind == "infidelity_vs_nwf":
        if not str(spec.input).lower().endswith(".csv"):
            raise FormatError("infidelity_vs_nwf needs a sweep CSV")
        svg, table = infidelity_vs_nwf(read_rows(spec.input))
    else:
        d = _load_json(spec.input)
        if spec.kind == "spectrum_histogram":
            if "eigenvalues" not in d:
                raise FormatError("spectrum_histogram needs a spectrum JSON")
            svg, table = spectrum_histogram(EigenSpectrum.from_dict(d), spec.n_mode_eff, spec.z)
        else:
            if "candidates" not in d:
                raise FormatError(f"{spec.kind} needs a reconstruction result JSON")
            result = ReconstructionResult.from_dict(d)
            fn = eigenfunctions_overlay if spec.kind == "eigenfunctions_overlay" else polar_mode
            svg, table = fn(result, target)
    Path(spec.output).write_text(svg)
    Path(spec.csv_path).write_text(table)
    return spec.output, spec.csv_path
