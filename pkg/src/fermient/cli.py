"""Command-line front end: ``fermient {toy-sweep,scatter,compare}``.

Exit codes: 0 success, 2 configuration error, 3 stability refusal.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import (
    EntanglementSeries,
    NotConvergedError,
    NotStationaryWarning,
    formation_time,
    ho_projection,
    stationary_value,
    write_projection_csv,
)
from .config import ConfigError, RunSettings, load_config
from .core import WaveFn2P, antisymmetrize, norm
from .dynamics import (
    ScatteringConfig,
    StabilityError,
    energy_expectation,
    ho_eigenstate,
    initial_state,
    propagate,
    read_wavefunction_dump,
    write_wavefunction_dump,
)
from .spin import spatial_blocks, spin_entropies, spin_vne
from .toy import sweep_alpha, write_sweep_csv

__all__ = ["main", "run_toy_sweep", "run_scatter", "run_compare", "EXIT_OK", "EXIT_CONFIG", "EXIT_STABILITY"]

EXIT_OK, EXIT_CONFIG, EXIT_STABILITY = 0, 2, 3
TIMING_COLUMNS = ("t_fs", "spin", "ek_mev", "le_seconds", "vne_seconds")


def _header(settings: RunSettings, *extra: str) -> list[str]:
    return [f"fermient {__version__}", f"config_hash {settings.config_hash}",
            f"mode {settings.mode}", *extra]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _tag(ek: float) -> str:
    return f"ek{ek:g}"


def run_toy_sweep(settings: RunSettings, out: Path) -> list[Path]:
    n_pairs = settings.get("run", "n_pairs")
    n_points = settings.get("run", "n_points")
    table = sweep_alpha(n_pairs, n_points)
    csv_path = out / "toy_sweep.csv"
    write_sweep_csv(table, csv_path, _header(settings, f"n_pairs {n_pairs}", f"n_points {n_points}"))
    meta = out / "toy_sweep.meta.json"
    _write_json(meta, {"mode": settings.mode, "version": __version__, "config_hash": settings.config_hash,
                       "n_pairs": n_pairs, "n_points": n_points, "rows": int(len(table))})
    return [csv_path, meta]


def _summary(series: EntanglementSeries, measure: str, settings: RunSettings) -> tuple[list[str], dict]:
    tail = settings.get("run", "tail_fraction")
    delta = settings.get("run", "formation_delta")
    info: dict = {"measure": measure}
    if len(series) < 10:
        return [f"summary {measure}: fewer than 10 records, no stationary value"], info
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotStationaryWarning)
        res = stationary_value(series, tail, measure)
    info.update(stationary=res.mean, stationary_std=res.std, is_stationary=res.is_stationary)
    lines = [f"summary {measure}: stationary {res.mean:.12g} std {res.std:.6g} "
             f"{'stationary' if res.is_stationary else 'not stationary'}"]
    try:
        tf = formation_time(series, delta, tail, measure)
        info["formation_time_fs"] = tf
        lines.append(f"summary {measure}: formation_time_fs {tf:.12g}")
    except NotConvergedError:
        info["formation_time_fs"] = None
        lines.append(f"summary {measure}: formation_time_fs not converged")
    return lines, info


class _Checkpoint:
    """State dump plus the series recorded so far, for resuming a run."""

    def __init__(self, out: Path, ek: float):
        self.dir = out / "checkpoints"
        self.state_path = self.dir / f"{_tag(ek)}.wf2p"
        self.meta_path = self.dir / f"{_tag(ek)}.json"

    def exists(self) -> bool:
        return self.state_path.exists() and self.meta_path.exists()

    def save(self, state: WaveFn2P, t: float, series: dict, extra: dict) -> None:
        self.dir.mkdir(exist_ok=True)
        write_wavefunction_dump(self.state_path, state, t)
        recs = {s.value: [[r.t, r.le, r.vne] for r in ser.records] for s, ser in series.items()}
        _write_json(self.meta_path, {"time_fs": t, "records": recs, **extra})

    def load(self, cfg: ScatteringConfig):
        amp, t = read_wavefunction_dump(self.state_path, cfg.grid)
        meta = json.loads(self.meta_path.read_text())
        return amp, t, meta


def _scatter_one(settings: RunSettings, ek: float, out: Path, threads: int | None,
                 snapshots: bool, resume: bool, vne: bool, timing: list | None, stem: str):
    cfg = settings.scattering(ek)
    n_modes = cfg.grid.size
    spins = settings.spins
    series = {s: EntanglementSeries(s, ek, n_modes) for s in spins}
    ckpt = _Checkpoint(out, ek)
    every = settings.get("numerics", "checkpoint_every")
    snap_dir = out / "snapshots"
    if snapshots:
        snap_dir.mkdir(exist_ok=True)

    psi0 = initial_state(cfg)
    e0 = energy_expectation(psi0, cfg)
    start, state, skip_first = 0.0, psi0, False
    if resume and ckpt.exists():
        amp, start, meta = ckpt.load(cfg)
        if meta.get("config_hash") != settings.config_hash:
            raise ConfigError("checkpoint was written by a different configuration")
        state = WaveFn2P(cfg.grid, amp)
        for s in spins:
            for t, le, vn in meta["records"][s.value]:
                series[s].append(t, le, vn)
        skip_first = True
    done_steps = int(round(start / cfg.dt))
    run_cfg = replace(cfg, n_steps=cfg.n_steps - done_steps)
    count = [done_steps // cfg.snapshot_stride]

    def on_snapshot(t: float, wf: WaveFn2P) -> None:
        nonlocal skip_first
        if skip_first:
            skip_first = False
            return
        blocks = spatial_blocks(wf)
        for s in spins:
            if timing is None:
                le = spin_entropies(blocks, s)
                vn = spin_vne(blocks, s) if vne else None
            else:
                # each path starts from fresh blocks so both pay for their Gram products
                t0 = time.perf_counter()
                le = spin_entropies(spatial_blocks(wf), s)
                t1 = time.perf_counter()
                vn = spin_vne(spatial_blocks(wf), s)
                t2 = time.perf_counter()
                timing.append((t, s.value, ek, t1 - t0, t2 - t1))
            series[s].append(t, le, vn)
        if snapshots:
            write_wavefunction_dump(snap_dir / f"{_tag(ek)}_t{t:09.2f}.wf2p", wf, t)
        if every and t > 0:
            count[0] += 1
            if count[0] % every == 0:
                ckpt.save(wf, t, series, {"config_hash": settings.config_hash})

    final = propagate(state, run_cfg, on_snapshot, start_time=start, workers=threads)

    written = []
    run_info = {"ek_mev": ek, "n_pairs": n_modes, "energy_initial_mev": e0,
                "energy_final_mev": energy_expectation(final, cfg), "norm_final": norm(final),
                "launch_distance_nm": cfg.launch_distance, "coulomb_softening_nm": cfg.coulomb_softening,
                "series": {}}
    measures = ("le_norm", "vne_norm") if settings.mode == "compare" else ("le",)
    for s, ser in series.items():
        footer, infos = [], []
        for m in measures:
            lines, info = _summary(ser, m, settings)
            footer += lines
            infos.append(info)
        path = out / f"{stem}_{s.value}_{_tag(ek)}.csv"
        ser.write_csv(path, _header(settings, f"spin {s.value}", f"ek_mev {ek:g}", f"n_pairs {n_modes}"),
                      footer)
        written.append(path)
        run_info["series"][s.value] = infos

    levels = settings.get("trap", "projection_levels")
    if settings.mode == "scatter" and levels:
        anti = antisymmetrize(final)
        for nx, ny in levels:
            pm = ho_projection(anti, ho_eigenstate(cfg, nx, ny), (nx, ny))
            path = out / f"gamma_{nx}_{ny}_{_tag(ek)}.csv"
            write_projection_csv(pm, path, _header(settings, f"level {nx} {ny}", f"ek_mev {ek:g}",
                                                   f"t_fs {run_cfg.n_steps * cfg.dt + start:g}"))
            written.append(path)
            run_info.setdefault("populations", {})[f"{nx} {ny}"] = pm.population
    return written, run_info


def _preflight(settings: RunSettings) -> None:
    for ek in settings.kinetic_energies:
        settings.scattering(ek).check_stability(2)


def _run_dynamics(settings: RunSettings, out: Path, threads: int | None, snapshots: bool,
                  resume: bool, stem: str, vne: bool, timing: list | None) -> list[Path]:
    _preflight(settings)
    written, runs = [], []
    for ek in settings.kinetic_energies:
        paths, info = _scatter_one(settings, ek, out, threads, snapshots, resume, vne, timing, stem)
        written += paths
        runs.append(info)
    meta = out / f"{stem}.meta.json"
    _write_json(meta, {"mode": settings.mode, "version": __version__, "config_hash": settings.config_hash,
                       "config": settings.values, "threads": threads, "runs": runs})
    return written + [meta]


def run_scatter(settings: RunSettings, out: Path, threads: int | None = None,
                snapshots: bool = False, resume: bool = False) -> list[Path]:
    vne = settings.get("run", "vne")
    return _run_dynamics(settings, out, threads, snapshots, resume, "scatter", vne, None)


def run_compare(settings: RunSettings, out: Path, threads: int | None = None,
                snapshots: bool = False, resume: bool = False) -> list[Path]:
    """Scatter run with both measures and per-snapshot timings of each path.

    The timing CSV holds wall-clock numbers and is the one output that is not
    reproducible byte for byte.
    """
    timing: list = []
    written = _run_dynamics(settings, out, threads, snapshots, resume, "compare", True, timing)
    path = out / "timing.csv"
    with open(path, "w", newline="\n") as fh:
        for line in _header(settings, "wall-clock seconds per snapshot"):
            fh.write(f"# {line}\n")
        fh.write(",".join(TIMING_COLUMNS) + "\n")
        for t, spin, ek, le_s, vn_s in timing:
            fh.write(f"{t:.12g},{spin},{ek:g},{le_s:.6e},{vn_s:.6e}\n")
    return written + [path]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (defaults used when omitted)")
    common.add_argument("--out", default="out", help="output directory (created if missing)")
    common.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    common.add_argument("--snapshots", action="store_true", help="dump every snapshot as a binary WF2P file")
    common.add_argument("--resume", action="store_true", help="continue from checkpoints in the output directory")
    parser = argparse.ArgumentParser(prog="fermient", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fermient {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("toy-sweep", parents=[common], help="normalized LE and vNE of the analytic state over alpha")
    sub.add_parser("scatter", parents=[common], help="entanglement time series of a scattering run")
    sub.add_parser("compare", parents=[common], help="normalized LE vs vNE with per-snapshot timings")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        settings = load_config(args.config, args.mode)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.mode == "toy-sweep":
            paths = run_toy_sweep(settings, out)
        elif args.mode == "scatter":
            paths = run_scatter(settings, out, args.threads, args.snapshots, args.resume)
        else:
            paths = run_compare(settings, out, args.threads, args.snapshots, args.resume)
    except StabilityError as exc:
        print(f"refusing to start: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
