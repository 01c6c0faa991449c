"""Figure layouts.

Five layouts are supported, each driven purely by CSV inputs:

- ``spectrum_overlay``: channel-summed inelastic density vs momentum, one
  curve per input file.
- ``c2_panels``: one panel per delayed-coincidence column, one curve per
  input file.
- ``c3_stack``: heatmaps of a three-detector coincidence column, one row
  per input, plus a difference row when two inputs are given; the data
  rows share one color scale.
- ``detuning_map``: detuning x momentum heatmap with optional dashed pole
  loci assembled from per-detuning pole CSVs.
- ``pole_table``: rendered table of pole positions and residuals.

Rendering is deterministic: a fixed style, a fixed SVG hash salt, and
date-free metadata make the SVG output byte-stable across reruns.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FigureSpecError, check_consistent_modes, read_csv, read_meta

_STYLE = {
    "figure.dpi": 120,
    "svg.hashsalt": "giantatom-figures",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_SAVE_META = {"Date": None}


def _save(fig, out_dir: Path, name: str):
    written = []
    for ext in ("png", "svg"):
        path = out_dir / f"{name}.{ext}"
        fig.savefig(path, metadata=_SAVE_META if ext == "svg" else None,
                    bbox_inches="tight")
        written.append(path)
    plt.close(fig)
    return written


def _inputs(entry, key="inputs"):
    items = entry.get(key)
    if not items:
        raise FigureSpecError(f"layout {entry.get('layout')!r} needs {key!r}")
    return items


def render_spectrum_overlay(entry, out_dir: Path):
    items = _inputs(entry)
    check_consistent_modes([it["csv"] for it in items])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    span = 0.0
    for it in items:
        cols = read_csv(it["csv"])
        k = np.asarray(cols["k"])
        total = np.asarray(cols["s_inel_ch1"]) + np.asarray(
            cols["s_inel_ch2"])
        ax.plot(k, total, label=it.get("label", Path(it["csv"]).stem))
        span = max(span, float(np.abs(k).max()))
    ax.set_xlim(-span, span)
    ax.set_xlabel("k")
    ax.set_ylabel("inelastic density / flux$^2$")
    ax.legend()
    return _save(fig, out_dir, entry["name"])


def render_c2_panels(entry, out_dir: Path):
    items = _inputs(entry)
    check_consistent_modes([it["csv"] for it in items])
    loaded = [(it, read_csv(it["csv"])) for it in items]
    names = [c for c in loaded[0][1] if c.startswith("c2_")]
    if not names:
        raise FigureSpecError(f"no c2_* columns in {items[0]['csv']}")
    fig, axes = plt.subplots(1, len(names),
                             figsize=(3.2 * len(names), 3.0), squeeze=False)
    for ax, col in zip(axes[0], names):
        for it, cols in loaded:
            if col not in cols:
                raise FigureSpecError(
                    f"column {col!r} missing from {it['csv']}")
            ax.plot(cols["tau"], cols[col],
                    label=it.get("label", Path(it["csv"]).stem))
        ax.axhline(1.0, color="k", lw=0.6, ls=":")
        ax.set_xlabel(r"$\tau$")
        ax.set_title(col)
    axes[0][0].set_ylabel("normalized coincidence")
    axes[0][-1].legend()
    return _save(fig, out_dir, entry["name"])


def _c3_matrix(cols, column):
    tp = np.asarray(cols["tau_prime"])
    t = np.asarray(cols["tau"])
    vals = np.asarray(cols[column])
    taus = np.unique(t)
    n = taus.size
    if vals.size != n * n:
        raise FigureSpecError("three-detector CSV is not a full square grid")
    order = np.lexsort((t, tp))
    return taus, vals[order].reshape(n, n)


def render_c3_stack(entry, out_dir: Path):
    items = _inputs(entry)
    check_consistent_modes([it["csv"] for it in items])
    column = entry.get("column", "c3_111")
    mats = []
    for it in items:
        cols = read_csv(it["csv"])
        if column not in cols:
            raise FigureSpecError(f"column {column!r} missing from "
                                  f"{it['csv']}")
        mats.append((it, *_c3_matrix(cols, column)))
    n_rows = len(mats) + (1 if len(mats) == 2 else 0)
    fig, axes = plt.subplots(n_rows, 1, figsize=(4.0, 3.2 * n_rows),
                             squeeze=False)
    vmax = max(float(m.max()) for _, _, m in mats)
    for ax, (it, taus, mat) in zip(axes[:, 0], mats):
        im = ax.pcolormesh(taus, taus, mat, vmin=0.0, vmax=vmax,
                           shading="nearest")
        fig.colorbar(im, ax=ax)
        ax.set_title(it.get("label", Path(it["csv"]).stem))
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel(r"$\tau'$")
    if len(mats) == 2:
        ax = axes[-1, 0]
        diff = mats[0][2] - mats[1][2]
        lim = float(np.abs(diff).max()) or 1.0
        im = ax.pcolormesh(mats[0][1], mats[0][1], diff, cmap="RdBu_r",
                           vmin=-lim, vmax=lim, shading="nearest")
        fig.colorbar(im, ax=ax)
        ax.set_title("difference")
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel(r"$\tau'$")
    return _save(fig, out_dir, entry["name"])


def render_detuning_map(entry, out_dir: Path):
    cols = read_csv(entry["csv"])
    d = np.asarray(cols["detuning"])
    k = np.asarray(cols["k"])
    v = np.asarray(cols["s_inel_total"])
    dets = np.unique(d)
    ks = np.unique(k)
    if v.size != dets.size * ks.size:
        raise FigureSpecError("detuning CSV is not a full rectangular grid")
    order = np.lexsort((k, d))
    grid = v[order].reshape(dets.size, ks.size)
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    im = ax.pcolormesh(ks, dets, grid, shading="nearest")
    fig.colorbar(im, ax=ax, label="inelastic density / flux$^2$")
    for path in entry.get("pole_loci", []):
        pcols = read_csv(path)
        det = read_meta(path).get("config", {}).get("model", {}) \
            .get("detuning", 0.0)
        ax.plot(pcols["re_k"], [det] * len(pcols["re_k"]), "k--",
                lw=0.8, marker=".", ms=3)
    ax.set_xlabel("k")
    ax.set_ylabel(r"$\Delta$")
    return _save(fig, out_dir, entry["name"])


def render_pole_table(entry, out_dir: Path):
    cols = read_csv(entry["csv"])
    rows = list(zip(cols["re_k"], cols["im_k"], cols["residual"]))
    fig, ax = plt.subplots(figsize=(4.0, 0.5 + 0.3 * len(rows)))
    ax.axis("off")
    table = ax.table(
        cellText=[[f"{r:.6g}", f"{i:.6g}", f"{s:.2e}"] for r, i, s in rows],
        colLabels=["Re k", "Im k", "residual"], loc="center")
    table.scale(1.0, 1.3)
    return _save(fig, out_dir, entry["name"])


_LAYOUTS = {
    "spectrum_overlay": render_spectrum_overlay,
    "c2_panels": render_c2_panels,
    "c3_stack": render_c3_stack,
    "detuning_map": render_detuning_map,
    "pole_table": render_pole_table,
}


def render_spec(spec_path, out_dir) -> list:
    """Render every figure named in a spec file; returns written paths."""
    spec_path = Path(spec_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        with open(spec_path) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise FigureSpecError(f"cannot read figure spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FigureSpecError(f"figure spec is not valid JSON: {exc}") \
            from exc
    figures = spec.get("figures")
    if not isinstance(figures, list) or not figures:
        raise FigureSpecError("figure spec must contain a 'figures' list")

    base = spec_path.parent

    def _resolve(entry):
        out = dict(entry)
        for key in ("csv",):
            if key in out:
                out[key] = str((base / out[key]))
        if "inputs" in out:
            out["inputs"] = [dict(it, csv=str(base / it["csv"]))
                             for it in out["inputs"]]
        if "pole_loci" in out:
            out["pole_loci"] = [str(base / p) for p in out["pole_loci"]]
        return out

    written = []
    with plt.rc_context(_STYLE):
        for entry in figures:
            name = entry.get("name")
            layout = entry.get("layout")
            if not name or layout not in _LAYOUTS:
                raise FigureSpecError(
                    f"figure entry needs a name and a known layout "
                    f"(got name={name!r}, layout={layout!r}; known: "
                    f"{sorted(_LAYOUTS)})")
            written.extend(_LAYOUTS[layout](_resolve(entry), out_dir))
    return written
