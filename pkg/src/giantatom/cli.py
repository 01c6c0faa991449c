"""Command-line interface.

Subcommands compute one observable each from a strict JSON configuration
and write a deterministic CSV plus a JSON metadata sidecar into the output
directory.  Solved vertex tables are cached as binary files under
``<out>/cache`` keyed by a hash of everything they depend on.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure
(non-convergence, singular system, conservation violation, tail mismatch),
4 model degeneracy (undefined normalization, resolvent pole hit).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cache import cache_key, load_array, save_array
from .errors import (ConfigError, ConservationViolationError,
                     DegenerateNormalizationError, GiantAtomError,
                     GridTooCoarseError, NoConvergenceError,
                     PoleProximityError, SingularSystemError,
                     TailMismatchError)
from .model import (ModelParams, self_energy, self_energy_numeric)
from .numerics.grids import MomentumGrid
from .observables import (coherence2, coherence3, detuning_scan,
                          emitter_poles, spectral_density)
from .scattering import (build_pair_amplitudes, build_triple_amplitudes,
                         single_photon_s)
from .vertex import (F11Family, F12Table, MODES, VertexTable, solve_f11,
                     solve_f11_family, solve_f12)

_NUMERIC_FAILURES = (NoConvergenceError, SingularSystemError,
                     GridTooCoarseError, ConservationViolationError,
                     TailMismatchError)
_DEGENERACIES = (DegenerateNormalizationError, PoleProximityError)

_MODEL_KEYS = {"gamma", "leg_separation", "k0R_over_pi", "detuning",
               "gamma1_fraction"}
_NUMERICS_KEYS = {"k_max", "n_points", "mode", "workers", "f12_tol",
                  "family_span_factor", "family_max_step"}
_RUN_KEYS = {"flux", "tau_max", "n_tau", "channels", "triples",
             "detuning_min", "detuning_max", "n_detuning", "n_momentum",
             "check_power", "power_tol"}


def parse_config(path: str, overrides=()) -> dict:
    """Load and validate the JSON configuration, applying --set overrides."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")

    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        parts = dotted.split(".")
        if len(parts) != 2:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        section, key = parts
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        cfg.setdefault(section, {})[key] = value

    allowed = {"model": _MODEL_KEYS, "numerics": _NUMERICS_KEYS,
               "run": _RUN_KEYS}
    for section, body in cfg.items():
        if section not in allowed:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        unknown = set(body) - allowed[section]
        if unknown:
            raise ConfigError(
                f"unknown keys in {section!r}: {sorted(unknown)}")
    if "model" not in cfg:
        raise ConfigError("config must contain a 'model' section")
    return cfg


def build_model(cfg: dict) -> ModelParams:
    m = cfg.get("model", {})
    try:
        gamma = float(m.get("gamma", 1.0))
        leg = float(m.get("leg_separation", 0.0))
        k0r_over_pi = float(m.get("k0R_over_pi", 0.0))
        detuning = float(m.get("detuning", 0.0))
        frac = float(m.get("gamma1_fraction", 0.5))
        phase = (k0r_over_pi * math.pi) % (2.0 * math.pi)
        return ModelParams(gamma=gamma, leg_separation=leg,
                           carrier_phase=phase, detuning=detuning,
                           gamma1_fraction=frac)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def build_grid(cfg: dict) -> MomentumGrid:
    n = cfg.get("numerics", {})
    try:
        return MomentumGrid(float(n.get("k_max", 40.0)),
                            int(n.get("n_points", 1601)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid lattice parameters: {exc}") from exc


def get_mode(cfg: dict) -> str:
    mode = cfg.get("numerics", {}).get("mode", "exact")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    return mode


# ---------------------------------------------------------------------------
# Cached solves
# ---------------------------------------------------------------------------


def _cached_table0(params, grid, mode, cache_dir) -> VertexTable:
    key = cache_key(params, grid, mode, "f11-e0")
    hit = load_array(cache_dir, key)
    if hit is not None:
        return VertexTable(params, grid, 0.0, mode, hit)
    table = solve_f11(params, grid, 0.0, mode)
    save_array(cache_dir, key, table.smooth)
    return table


def _cached_family(params, grid, mode, cache_dir, cfg) -> F11Family:
    num = cfg.get("numerics", {})
    span = float(num.get("family_span_factor", 2.0))
    step = num.get("family_max_step")
    workers = num.get("workers")
    extra = {"span": span, "step": step}
    key = cache_key(params, grid, mode, "f11-family", extra)
    ekey = cache_key(params, grid, mode, "f11-family-energies", extra)
    cols = load_array(cache_dir, key)
    energies = load_array(cache_dir, ekey)
    if cols is not None and energies is not None:
        return F11Family(params, grid, mode, energies.real, cols)
    fam = solve_f11_family(params, grid, mode, span_factor=span,
                           max_step=None if step is None else float(step),
                           workers=None if workers is None else int(workers))
    save_array(cache_dir, key, fam.columns)
    save_array(cache_dir, ekey, fam.energies.astype(complex))
    return fam


def _cached_f12(params, grid, family, table0, mode, cache_dir,
                cfg) -> F12Table:
    tol = float(cfg.get("numerics", {}).get("f12_tol", 1e-6))
    key = cache_key(params, grid, mode, "f12-e0", {"tol": tol})
    hit = load_array(cache_dir, key)
    if hit is not None:
        return F12Table(params, grid, mode, hit, 0.0)
    table = solve_f12(params, grid, family, table0, mode, tol=tol)
    save_array(cache_dir, key, table.values)
    return table


# ---------------------------------------------------------------------------
# Deterministic output
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_meta(path: Path, cfg: dict, mode: str, wall_time: float,
               extra: dict = None) -> None:
    meta = {
        "tool": "giantatom",
        "version": __version__,
        "mode": mode,
        "config": cfg,
        "wall_time_s": wall_time,
    }
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_spectrum(cfg, out_dir, cache_dir) -> dict:
    params = build_model(cfg)
    grid = build_grid(cfg)
    mode = get_mode(cfg)
    run = cfg.get("run", {})
    flux = float(run.get("flux", 1.0))
    table0 = _cached_table0(params, grid, mode, cache_dir)
    amp = build_pair_amplitudes(params, table0)
    spec = spectral_density(params, amp, flux,
                            check=bool(run.get("check_power", True)),
                            tol=float(run.get("power_tol", 1e-3)))
    rows = zip(grid.nodes, spec.s_inel[1], spec.s_inel[2])
    write_csv(out_dir / "spectrum.csv", ["k", "s_inel_ch1", "s_inel_ch2"],
              rows)
    return {
        "power_residual": spec.residual,
        "elastic_weight_ch1": spec.elastic_weight[1],
        "elastic_weight_ch2": spec.elastic_weight[2],
        "csv": "spectrum.csv",
    }


def cmd_g2(cfg, out_dir, cache_dir) -> dict:
    params = build_model(cfg)
    grid = build_grid(cfg)
    mode = get_mode(cfg)
    run = cfg.get("run", {})
    tau_max = float(run.get("tau_max", 10.0))
    n_tau = int(run.get("n_tau", 201))
    pairs = [tuple(p) for p in run.get("channels", [[1, 1], [2, 2]])]
    taus = np.linspace(0.0, tau_max, n_tau)
    table0 = _cached_table0(params, grid, mode, cache_dir)
    amp = build_pair_amplitudes(params, table0)
    cols = {pair: coherence2(params, amp, taus, pair) for pair in pairs}
    header = ["tau"] + [f"c2_{a}{b}" for a, b in pairs]
    rows = zip(taus, *[cols[p] for p in pairs])
    write_csv(out_dir / "g2.csv", header, rows)
    return {"csv": "g2.csv"}


def cmd_g3(cfg, out_dir, cache_dir) -> dict:
    params = build_model(cfg)
    grid = build_grid(cfg)
    mode = get_mode(cfg)
    run = cfg.get("run", {})
    tau_max = float(run.get("tau_max", 10.0))
    n_tau = int(run.get("n_tau", 201))
    triples = [tuple(t) for t in run.get("triples", [[1, 1, 1]])]
    taus = np.linspace(0.0, tau_max, n_tau)
    table0 = _cached_table0(params, grid, mode, cache_dir)
    family = _cached_family(params, grid, mode, cache_dir, cfg)
    f12 = _cached_f12(params, grid, family, table0, mode, cache_dir, cfg)
    amp = build_triple_amplitudes(params, family, table0, f12, mode)
    mats = {t: coherence3(params, amp, taus, t) for t in triples}
    header = ["tau_prime", "tau"] + [f"c3_{a}{b}{c}" for a, b, c in triples]
    ii, jj = np.meshgrid(np.arange(n_tau), np.arange(n_tau), indexing="ij")
    rows = zip(taus[ii.ravel()], taus[jj.ravel()],
               *[mats[t][ii.ravel(), jj.ravel()] for t in triples])
    write_csv(out_dir / "g3.csv", header, rows)
    return {"csv": "g3.csv", "f12_residual": f12.residual}


def cmd_poles(cfg, out_dir, cache_dir) -> dict:
    params = build_model(cfg)
    poles = emitter_poles(params, branches=(-2, -1, 0, 1, 2))
    from .model import inverse_dressed_green
    rows = [(z.real, z.imag, abs(inverse_dressed_green(params, z)))
            for z in poles]
    write_csv(out_dir / "poles.csv", ["re_k", "im_k", "residual"], rows)
    return {"csv": "poles.csv", "n_poles": len(poles)}


def cmd_detuning_scan(cfg, out_dir, cache_dir) -> dict:
    params = build_model(cfg)
    run = cfg.get("run", {})
    dmin = float(run.get("detuning_min", -5.0))
    dmax = float(run.get("detuning_max", 5.0))
    nd = int(run.get("n_detuning", 41))
    nk = int(run.get("n_momentum", 401))
    grid = build_grid(cfg)
    detunings = np.linspace(dmin, dmax, nd)
    momenta = np.linspace(-grid.k_max, grid.k_max, nk)
    smap = detuning_scan(params, detunings, momenta, grid=grid,
                         mode=get_mode(cfg))
    ii, jj = np.meshgrid(np.arange(nd), np.arange(nk), indexing="ij")
    rows = zip(detunings[ii.ravel()], momenta[jj.ravel()], smap.ravel())
    write_csv(out_dir / "detuning_scan.csv",
              ["detuning", "k", "s_inel_total"], rows)
    return {"csv": "detuning_scan.csv"}


def cmd_validate(cfg, out_dir, cache_dir) -> dict:
    """Internal consistency battery; raises on failure."""
    params = build_model(cfg)
    grid = build_grid(cfg)
    mode = get_mode(cfg)
    report = {}

    # Single-photon unitarity on the lattice.
    worst = 0.0
    for k in np.linspace(-grid.k_max, grid.k_max, 101):
        smat = np.array([[single_photon_s(params, float(k), a, b)
                          for b in (1, 2)] for a in (1, 2)])
        worst = max(worst, float(np.abs(smat.conj().T @ smat
                                        - np.eye(2)).max()))
    report["unitarity_defect"] = worst
    if worst > 1e-10:
        raise ConservationViolationError(
            f"power balance defect {worst:.3e} exceeds tolerance",
            residual=worst)

    # Closed-form self-energy against direct quadrature.
    worst = 0.0
    for eps in (0.0, 0.7 * params.gamma, -2.0 * params.gamma):
        closed = self_energy(params, eps)
        numeric = self_energy_numeric(params, eps)
        worst = max(worst, abs(closed - numeric))
    report["self_energy_defect"] = worst
    if worst > 1e-6:
        raise NoConvergenceError(
            f"validation battery residual {worst:.3e} out of tolerance",
            residuals=[worst])

    # Two-photon power balance.
    table0 = _cached_table0(params, grid, mode, cache_dir)
    amp = build_pair_amplitudes(params, table0)
    spec = spectral_density(params, amp, 1.0, check=True,
                            tol=float(cfg.get("run", {})
                                      .get("power_tol", 1e-3)))
    report["power_residual"] = spec.residual
    with open(out_dir / "validate.csv", "w", newline="\n") as fh:
        fh.write("metric,value\n")
        for name in sorted(report):
            fh.write(f"{name},{_fmt(report[name])}\n")
    report["csv"] = "validate.csv"
    return report


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "g2": cmd_g2,
    "g3": cmd_g3,
    "poles": cmd_poles,
    "detuning-scan": cmd_detuning_scan,
    "validate": cmd_validate,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="giantatom",
        description="Few-photon scattering observables for a two-leg "
                    "emitter with delayed feedback.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="JSON configuration file")
        sp.add_argument("--out", default=".",
                        help="output directory (created if missing)")
        sp.add_argument("--mode", default=None, choices=MODES,
                        help="override numerics.mode")
        sp.add_argument("--workers", type=int, default=None,
                        help="override numerics.workers")
        sp.add_argument("--set", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", dest="overrides",
                        help="override one config entry (JSON value)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides)
        if args.mode is not None:
            cfg.setdefault("numerics", {})["mode"] = args.mode
        if args.workers is not None:
            cfg.setdefault("numerics", {})["workers"] = args.workers
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        cache_dir = out_dir / "cache"
        t0 = time.monotonic()
        extra = _COMMANDS[args.command](cfg, out_dir, cache_dir)
        wall = time.monotonic() - t0
        mode = get_mode(cfg)
        stem = extra.get("csv", f"{args.command}.csv").rsplit(".", 1)[0] \
            if args.command != "validate" else "validate"
        write_meta(out_dir / f"{stem}.meta.json", cfg, mode, wall, extra)
        print(f"{args.command}: ok ({wall:.2f}s)")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERIC_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except _DEGENERACIES as exc:
        print(f"degenerate model point: {exc}", file=sys.stderr)
        return 4
    except GiantAtomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
