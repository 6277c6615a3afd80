"""Deterministic figure rendering: same CSV in, byte-identical image out.

No timestamps or random ids are embedded: SVG output uses a fixed hashsalt
and a stripped Date field, PNG output carries no creation date.  Each
figure footer quotes the config hash from the CSV metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .csvio import SchemaError, columns_as_floats, read_report

KINDS = ("triple-scaling", "drift-curve", "occupation", "tv-decay")

_RC = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "kcip-lab-plots",
}


class PlotError(ValueError):
    """Unusable figure request: bad kind, missing columns, empty data."""


@dataclass
class FigureSpec:
    """One figure request: input report(s), figure kind, output image."""

    kind: str
    inputs: list
    output: str
    fit_min: float | None = None
    fit_max: float | None = None
    options: dict = field(default_factory=dict)


def least_squares_slope(x, y):
    """Slope and its standard error for y against x, plain least squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2:
        raise PlotError("slope fit needs at least two points")
    coeffs, cov = np.polyfit(x, y, 1, cov=True) if len(x) > 2 else (
        np.polyfit(x, y, 1),
        np.full((2, 2), np.nan),
    )
    return float(coeffs[0]), float(np.sqrt(cov[0, 0])), float(coeffs[1])


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns summary values (fitted slope and so on).

    Raises PlotError before any file is written when the input is empty or
    lacks the needed columns.
    """
    if spec.kind not in KINDS:
        raise PlotError(f"unknown figure kind {spec.kind!r} (have {KINDS})")
    if not spec.inputs:
        raise PlotError("no input files given")
    reports = [read_report(path) for path in spec.inputs]
    for path, (_, _, rows) in zip(spec.inputs, reports):
        if not rows:
            raise PlotError(f"{path}: no data rows")
    renderer = {
        "triple-scaling": _render_triple_scaling,
        "drift-curve": _render_drift_curve,
        "occupation": _render_occupation,
        "tv-decay": _render_tv_decay,
    }[spec.kind]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            summary = renderer(ax, spec, reports)
            _footer(fig, reports)
            fig.savefig(spec.output, metadata=_image_metadata(spec.output))
        finally:
            plt.close(fig)
    summary["output"] = spec.output
    return summary


def _image_metadata(path):
    if str(path).lower().endswith(".svg"):
        return {"Date": None}
    return {"Software": "kcip-lab-plots"}


def _footer(fig, reports):
    hashes = sorted({meta.get("config_hash", "?") for meta, _, _ in reports})
    fig.text(
        0.99, 0.01, "config " + ",".join(hashes),
        ha="right", va="bottom", fontsize=7, color="0.4",
    )
    fig.tight_layout(rect=(0, 0.03, 1, 1))


def _fit_window(spec, xs):
    lo = spec.fit_min if spec.fit_min is not None else -np.inf
    hi = spec.fit_max if spec.fit_max is not None else np.inf
    return [i for i, x in enumerate(xs) if lo <= x <= hi]


def _render_triple_scaling(ax, spec, reports):
    meta, columns, rows = reports[0]
    data = columns_as_floats(columns, rows, ["n", "zeta_exact"])
    ns = [r[0] for r in data]
    zetas = [r[1] for r in data]
    keep = _fit_window(spec, ns)
    if len(keep) < 2:
        raise PlotError("fit range keeps fewer than two points")
    slope, slope_se, intercept = least_squares_slope(
        np.log([ns[i] for i in keep]), np.log([zetas[i] for i in keep])
    )
    ax.loglog(ns, zetas, "o", label="exact expected triple time")
    grid = np.array(sorted(ns))
    ax.loglog(
        grid,
        np.exp(intercept) * grid**slope,
        "-",
        label=f"fit: slope {slope:.3f} $\\pm$ {slope_se:.3f}",
    )
    if "asymptote" in columns:
        asym = [r[0] for r in columns_as_floats(columns, rows, ["asymptote"])]
        ax.loglog(ns, asym, "--", label="$n^3 / (c^2 m (m-1))$")
    ax.set_xlabel("n")
    ax.set_ylabel("expected triple time")
    ax.set_title("Triple-time scaling")
    ax.legend()
    return {"slope": slope, "slope_stderr": slope_se}


def _render_drift_curve(ax, spec, reports):
    for path, (meta, columns, rows) in zip(spec.inputs, reports):
        data = columns_as_floats(columns, rows, ["t", "mean_v", "stderr"])
        t = np.array([r[0] for r in data])
        mean = np.array([r[1] for r in data])
        err = np.array([r[2] for r in data])
        label = f"{meta.get('graph', path)} (c={meta.get('c', '?')})"
        ax.plot(t, mean, "-", label=label)
        ax.fill_between(t, mean - err, mean + err, alpha=0.25)
    ax.set_xlabel("t")
    ax.set_ylabel("mean particle count")
    ax.set_title("Particle-count drift from the all-ones start")
    ax.legend()
    return {"series": len(reports)}


def _render_occupation(ax, spec, reports):
    meta, columns, rows = reports[0]
    needed = ["class", "fraction"]
    for name in needed:
        if name not in columns:
            raise SchemaError(f"missing column {name!r}")
    totals = {}
    counts = {}
    for row in rows:
        label = row[columns.index("class")]
        totals[label] = totals.get(label, 0.0) + float(row[columns.index("fraction")])
        counts[label] = counts.get(label, 0) + 1
    labels = sorted(totals, key=lambda s: (s == "residual", s))
    means = [totals[k] / counts[k] for k in labels]
    ax.bar(range(len(labels)), means)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("particle class")
    ax.set_ylabel("mean occupation fraction")
    ax.set_title("Occupation fractions per class")
    return {"classes": len(labels), "fractions": dict(zip(labels, means))}


def _render_tv_decay(ax, spec, reports):
    for path, (meta, columns, rows) in zip(spec.inputs, reports):
        data = columns_as_floats(columns, rows, ["t", "d_t"])
        t = [r[0] for r in data]
        d = [r[1] for r in data]
        ax.semilogy(t, d, "-", label=f"{meta.get('graph', path)}")
    ax.axhline(0.25, color="0.5", linestyle=":", label="1/4")
    ax.set_xlabel("t")
    ax.set_ylabel("worst-start TV distance")
    ax.set_title("TV decay")
    ax.legend()
    return {"series": len(reports)}
