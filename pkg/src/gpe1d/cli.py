"""Command-line drivers: ``gpe1d {evolve,groundstate,dispersion,quench,solitons} <cfg>``.

Every driver writes its artifacts under the configured output directory
(``--output`` overrides it) together with ``metadata.json``.  Failures exit
nonzero and print one JSON line ``{"error": category, ...}`` on stderr:

    0 ok, 2 configuration, 3 numerical divergence, 4 I/O, 5 fit/convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from importlib import metadata as _md
from pathlib import Path

import numpy as np

from . import __version__
from .bogoliubov import DispersionConfig, analytic_dispersion, measure_dispersion, sound_wave_estimate
from .config import RunConfig, parse_config
from .dynamics import EvolutionConfig, LambdaSchedule, MemorySink, evolve, ground_state_ite
from .errors import ConfigError, GPEError, OutputError
from .grid import ComplexField
from .io import (CSVObservableSink, DensitySink, SnapshotDirSink, emit_heatmap,
                 read_snapshot, write_snapshot)
from .model import ModelParams, stationarity_residual
from .states import (SolitonSpec, ThermalSpec, _soliton_product, gray_soliton,
                     periodicity_defect, plane_wave, thermal_sample,
                     thermalization_check, two_soliton_state, uniform_state)
from .tracking import track_solitons

__all__ = ["main", "build_parser", "initial_state", "model_params",
           "run_evolve", "run_groundstate", "run_dispersion", "run_quench", "run_solitons"]


# ---------------------------------------------------------------- helpers

def model_params(cfg: RunConfig) -> ModelParams:
    return ModelParams(coupling=cfg.coupling, potential=cfg.potential,
                       mu_offset=cfg.mu, lam=cfg.lam)


def initial_state(cfg: RunConfig, seed: int | None = None) -> tuple[ComplexField, dict]:
    """Build the configured initial field; returns it with descriptive metadata."""
    ini = cfg.initial
    grid = cfg.grid
    p = model_params(cfg)
    seed = ini["seed"] if seed is None else seed
    info = {"kind": ini["kind"]}
    kind = ini["kind"]
    if kind == "uniform":
        psi = uniform_state(grid)
    elif kind == "plane_wave":
        psi = plane_wave(grid, ini["mode"])
    elif kind == "solitons":
        specs = [SolitonSpec(x, b) for x, b in zip(ini["positions"], ini["speed_fractions"])]
        if len(specs) == 1:
            psi = gray_soliton(grid, p, specs[0])
        elif len(specs) == 2:
            psi = two_soliton_state(grid, p, *specs, match_phase=ini["match_phase"])
        else:
            values, _ = _soliton_product(grid, p, sorted(specs, key=lambda s: s.position),
                                         ini["match_phase"])
            psi = ComplexField(grid, values)
        info["periodicity_defect"] = periodicity_defect(grid, p, specs)
        info["match_phase"] = ini["match_phase"]
    elif kind == "thermal":
        spec = ThermalSpec(ini["temperature"], ini["mode_cutoff"], seed, ini["condensate_fraction"])
        psi = thermal_sample(grid, p, spec)
        info.update(temperature=spec.temperature, mode_cutoff=spec.mode_cutoff,
                    condensate_fraction=spec.condensate_fraction)
    elif kind == "file":
        psi, header = read_snapshot(ini["path"])
        if psi.grid != grid:
            raise ConfigError(f"initial-state file {ini['path']} is on a different grid",
                              key="initial.path")
        info["path"] = ini["path"]
        info["file_time"] = header.time
    else:  # pragma: no cover - the parser rejects other kinds
        raise ConfigError(f"unknown initial kind {kind!r}", key="initial.kind")
    if ini["noise"] > 0:
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((grid.n_points, 2)) @ np.array([1.0, 1j])
        values = psi.values + ini["noise"] * z / math.sqrt(grid.length)
        values = values / math.sqrt(np.vdot(values, values).real * grid.spacing)
        psi = ComplexField(grid, values)
        info["noise"] = ini["noise"]
    info["seed"] = seed
    return psi, info


def _versions() -> dict:
    out = {"gpe1d": __version__, "python": platform.python_version()}
    for name in ("numpy", "scipy", "numba", "pyfftw"):
        try:
            out[name] = _md.version(name)
        except _md.PackageNotFoundError:
            out[name] = None
    return out


def _outdir(cfg: RunConfig, override) -> Path:
    path = Path(override) if override else cfg.output_directory
    if path is None:
        raise ConfigError("no output directory: set output.directory or pass --output",
                          key="output.directory")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write_json(path: Path, obj) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, default=_jsonable)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"writing {path} failed: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _metadata(command: str, cfg: RunConfig, started: float, results: dict) -> dict:
    return {
        "command": command,
        "config": cfg.to_dict(),
        "config_text": cfg.raw,
        "defaults_used": cfg.defaults_used,
        "versions": _versions(),
        "wall_time_s": time.perf_counter() - started,
        "results": results,
    }


def _require_schedule(cfg: RunConfig) -> LambdaSchedule:
    if cfg.schedule is None:
        raise ConfigError("this command needs integration.t_end or integration.stage_durations",
                          key="integration.t_end")
    return cfg.schedule


def _evolution_config(cfg: RunConfig) -> EvolutionConfig:
    return EvolutionConfig(dt=cfg.dt, snapshot_stride=cfg.snapshot_stride,
                           observable_stride=cfg.observable_stride,
                           renormalize=cfg.renormalize)


def _run_with_outputs(cfg, psi0, out: Path, prefix: str = ""):
    """Evolve and bind the standard sinks to files under ``out``."""
    schedule = _require_schedule(cfg)
    p = model_params(cfg)
    mem = MemorySink()
    dens = DensitySink()
    sinks = [mem, dens]
    csv_sink = None
    if "csv" in cfg.formats:
        csv_sink = CSVObservableSink(out / f"{prefix}observables.csv")
        sinks.append(csv_sink)
    if "gpf" in cfg.formats:
        sinks.append(SnapshotDirSink(out / f"{prefix}snapshots"))
    try:
        final = evolve(psi0, p, cfg.dynamics, schedule, _evolution_config(cfg), sinks)
    finally:
        if csv_sink is not None:
            csv_sink.close()
    if "gpf" in cfg.formats:
        write_snapshot(final, path=out / f"{prefix}final.gpf",
                       time=schedule.total_duration, lam=schedule.stages[-1][1])
    heat = None
    if cfg.heatmap and len(dens.snapshots) >= 2:
        heat = emit_heatmap(dens.snapshots, out / f"{prefix}density")
        heat = {k: v for k, v in heat.items() if k not in ("times", "lambdas")}
    return final, mem, dens, heat


def _norm_drift(mem: MemorySink) -> float:
    n = mem.column("norm")
    return float(np.max(np.abs(n - n[0])) / n[0])


# ---------------------------------------------------------------- drivers

def run_evolve(cfg: RunConfig, out: Path) -> dict:
    psi0, info = initial_state(cfg)
    final, mem, _dens, heat = _run_with_outputs(cfg, psi0, out)
    f = mem.column("free_energy")
    return {
        "initial": info,
        "records": len(mem.records),
        "relative_norm_drift": _norm_drift(mem),
        "free_energy_start": float(f[0]),
        "free_energy_end": float(f[-1]),
        "final_stationarity_residual": stationarity_residual(final, model_params(cfg)),
        "heatmap": heat,
    }


def run_groundstate(cfg: RunConfig, out: Path) -> dict:
    psi0, info = initial_state(cfg)
    p = model_params(cfg).replace(mu_offset=0.0)
    iters = [0]

    def count(it, *_):
        iters[0] = it

    psi, mu = ground_state_ite(psi0, p, tol=cfg.tol, max_iters=cfg.max_iters, callback=count)
    residual = stationarity_residual(psi, p.replace(mu_offset=mu))
    if "gpf" in cfg.formats:
        write_snapshot(psi, path=out / "groundstate.gpf")
    if "csv" in cfg.formats:
        rho = np.abs(psi.values) ** 2
        try:
            with open(out / "groundstate.csv", "w") as fh:
                fh.write("x,re,im,density\n")
                for x, v, r in zip(psi.grid.x, psi.values, rho):
                    fh.write(f"{x!r},{v.real!r},{v.imag!r},{r!r}\n")
        except OSError as exc:
            raise OutputError(f"writing groundstate.csv failed: {exc}") from exc
    print(f"mu = {mu:.12g}  residual = {residual:.3e}  iterations = {iters[0]}")
    return {"initial": info, "mu": mu, "residual": residual, "iterations": iters[0]}


def _dispersion_row(args):
    m, p, dcfg = args
    point, fit = measure_dispersion(m, p, dcfg, return_fit=True)
    ref = analytic_dispersion(point.k, p, 1.0 / dcfg.length)
    return m, point, ref, fit.residual


def run_dispersion(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    d = cfg.dispersion
    p = model_params(cfg)
    dcfg = DispersionConfig(n_points=cfg.grid.n_points, length=cfg.grid.length,
                            amplitude=d["amplitude"], t_end=d["t_end"], dt=None if cfg.dt_auto else cfg.dt,
                            samples=d["samples"], fit_tolerance=d["fit_tolerance"])
    jobs = [(m, p, dcfg) for m in d["modes"]]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_dispersion_row, jobs))
    else:
        rows = [_dispersion_row(j) for j in jobs]
    gn0 = p.coupling / cfg.grid.length
    header = ("k,re_omega,im_omega,analytic_re_omega,analytic_im_omega,residual,"
              "sound_estimate_re,sound_estimate_im")
    lines = [header]
    table = []
    print(f"{'m':>3} {'k':>10} {'Re w':>14} {'Im w':>12} {'Re w (lin.)':>14} "
          f"{'Im w (lin.)':>12} {'Im w (sound)':>12} {'rel.err':>9}")
    for m, pt, ref, res in rows:
        snd = sound_wave_estimate(pt.k, gn0, p.lam)
        rel = abs(pt.omega - ref.omega) / abs(ref.omega)
        lines.append(",".join(repr(float(v)) for v in (
            pt.k, pt.omega.real, pt.omega.imag, ref.omega.real, ref.omega.imag, res,
            snd.real, snd.imag)))
        print(f"{m:>3} {pt.k:>10.4f} {pt.omega.real:>14.6f} {pt.omega.imag:>12.6f} "
              f"{ref.omega.real:>14.6f} {ref.omega.imag:>12.6f} {snd.imag:>12.6f} {rel:>9.2e}")
        table.append({"m": m, "k": pt.k, "omega": pt.omega, "analytic": ref.omega,
                      "sound_estimate": snd, "fit_residual": res, "relative_error": rel})
    try:
        (out / "dispersion.csv").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"writing dispersion.csv failed: {exc}") from exc
    return {"lambda": p.lam, "gn0": gn0, "points": table}


def _stage_bounds(schedule: LambdaSchedule) -> list[tuple[float, float]]:
    bounds, t = [], 0.0
    for duration, _ in schedule.stages:
        bounds.append((t, t + duration))
        t += duration
    return bounds


def run_quench(cfg: RunConfig, out: Path) -> dict:
    """Thermal start, then stages (T_TH, 0), (T_DIS, lambda), (T_SOL, 0).

    Per seed: the ground-mode occupation before the dissipative stage (mean
    over the first stage), after it (mean over the last stage) and the free
    energy change across it.
    """
    schedule = _require_schedule(cfg)
    if cfg.initial["kind"] != "thermal":
        raise ConfigError("quench needs initial.kind = thermal", key="initial.kind")
    if len(schedule.stages) != 3:
        raise ConfigError("quench needs three stages (thermalize, dissipate, relax)",
                          key="integration.stage_durations")
    (t0, t1), (_, t2), _ = _stage_bounds(schedule)
    per_seed = []
    for seed in cfg.initial["seeds"]:
        psi0, info = initial_state(cfg, seed)
        _final, mem, _dens, _heat = _run_with_outputs(cfg, psi0, out, prefix=f"seed{seed}_")
        t = mem.column("t")
        occ = mem.column("ground_mode_occ")
        f = mem.column("free_energy")
        eps = 1e-12 * max(t2, 1.0)
        pre = t <= t1 + eps
        post = t >= t2 - eps
        thermal = None
        if pre.sum() >= 100:
            rep = thermalization_check([r for r, k in zip(mem.records, pre) if k])
            thermal = {"mean": rep.mean, "variance": rep.variance,
                       "stationary": rep.stationary, "standard_error": rep.standard_error}
        i1 = int(np.argmin(np.abs(t - t1)))
        i2 = int(np.argmin(np.abs(t - t2)))
        stage_f = f[i1:i2 + 1]
        per_seed.append({
            "seed": seed,
            "occ_pre_mean": float(occ[pre].mean()),
            "occ_post_mean": float(occ[post].mean()),
            "free_energy_stage_start": float(f[i1]),
            "free_energy_stage_end": float(f[i2]),
            "free_energy_monotone": bool(np.all(np.diff(stage_f) <= 1e-10 * np.abs(stage_f[:-1]))),
            "relative_norm_drift": _norm_drift(mem),
            "thermalization": thermal,
        })
    pre_med = float(np.median([s["occ_pre_mean"] for s in per_seed]))
    post_med = float(np.median([s["occ_post_mean"] for s in per_seed]))
    lines = ["seed,occ_pre_mean,occ_post_mean,free_energy_stage_start,free_energy_stage_end"]
    for s in per_seed:
        lines.append(f"{s['seed']},{s['occ_pre_mean']!r},{s['occ_post_mean']!r},"
                     f"{s['free_energy_stage_start']!r},{s['free_energy_stage_end']!r}")
    try:
        (out / "quench_summary.csv").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"writing quench_summary.csv failed: {exc}") from exc
    print(f"median ground-mode occupation: before {pre_med:.4f}, after {post_med:.4f} "
          f"({len(per_seed)} seeds)")
    return {
        "stage_bounds": _stage_bounds(schedule),
        "seeds": per_seed,
        "median_occ_pre": pre_med,
        "median_occ_post": post_med,
        "condensed": post_med > pre_med,
        "free_energy_decreased_all": all(
            s["free_energy_stage_end"] < s["free_energy_stage_start"] for s in per_seed),
    }


def run_solitons(cfg: RunConfig, out: Path) -> dict:
    if cfg.initial["kind"] != "solitons":
        raise ConfigError("solitons needs initial.kind = solitons", key="initial.kind")
    count = len(cfg.initial["positions"])
    psi0, info = initial_state(cfg)
    final, mem, dens, heat = _run_with_outputs(cfg, psi0, out)
    track = track_solitons(dens.snapshots, count=count)
    lines = ["t," + ",".join(f"x{i}" for i in range(count)) + ","
             + ",".join(f"min_density{i}" for i in range(count)) + ",mean_density"]
    for i, t in enumerate(track.times):
        vals = [t, *track.positions[i], *track.depths[i], track.mean_density[i]]
        lines.append(",".join(repr(float(v)) for v in vals))
    try:
        (out / "tracks.csv").write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OutputError(f"writing tracks.csv failed: {exc}") from exc
    rho_final = np.abs(final.values) ** 2
    result = {
        "initial": info,
        "relative_norm_drift": _norm_drift(mem),
        "tracked_snapshots": int(track.times.size),
        "snapshots": len(dens.snapshots),
        "final_min_density_ratio": float(rho_final.min() / rho_final.mean()),
        "final_stationarity_residual": stationarity_residual(final, model_params(cfg)),
        "heatmap": heat,
    }
    if track.times.size:
        result["max_position_drift"] = float(np.max(np.abs(track.positions - track.positions[0])))
        result["min_density_ratio_start"] = (track.depths[0] / track.mean_density[0]).tolist()
        result["min_density_ratio_end_tracked"] = (track.depths[-1] / track.mean_density[-1]).tolist()
    print(f"tracked {track.times.size}/{len(dens.snapshots)} snapshots; final min/mean density "
          f"{result['final_min_density_ratio']:.3e}")
    return result


# ---------------------------------------------------------------- entry point

_DRIVERS = {
    "evolve": (run_evolve, "integrate the configured initial state through its stages"),
    "groundstate": (run_groundstate, "imaginary-time relaxation to the ground state"),
    "dispersion": (run_dispersion, "measure complex mode frequencies of the uniform state"),
    "quench": (run_quench, "thermal start, dissipative quench, free relaxation (multi-seed)"),
    "solitons": (run_solitons, "two-soliton evolution with notch tracking"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpe1d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gpe1d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_fn, help_text) in _DRIVERS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="run configuration file")
        sp.add_argument("-o", "--output", help="output directory (overrides output.directory)")
        if name == "dispersion":
            sp.add_argument("--workers", type=int, default=1, help="parallel k-point workers")
    return parser


def _error_line(exc: BaseException, category: str) -> str:
    payload = {"error": category, "type": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "key", "step", "time", "stage", "residual", "iterations"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    return json.dumps(payload, default=str)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = parse_config(args.config)
        out = _outdir(cfg, args.output)
        fn = _DRIVERS[args.command][0]
        kwargs = {"workers": args.workers} if args.command == "dispersion" else {}
        results = fn(cfg, out, **kwargs)
        _write_json(out / "metadata.json", _metadata(args.command, cfg, started, results))
    except GPEError as exc:
        print(_error_line(exc, exc.category), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(_error_line(exc, OutputError.category), file=sys.stderr)
        return OutputError.exit_code
    return 0


def main_exit() -> None:
    """Console-script entry point."""
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_exit()
