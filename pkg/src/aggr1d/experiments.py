"""Experiment drivers behind the CLI subcommands.

Each driver takes a validated :class:`SimConfig`, runs the relevant
engines, writes CSV artifacts plus a JSON run manifest into the run
directory, and returns an in-memory result object.  CSV contents are a
pure function of the config (runtimes live only in the manifest), so
repeated runs of the same config produce bit-identical CSV files.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import time as _time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fv, particles
from .config import ConfigError, SimConfig
from .initial import sample_particles
from .measure import DiscreteMeasure, wasserstein1, write_atoms_csv

__all__ = [
    "RunArtifacts",
    "CompareResult",
    "ConvergenceRow",
    "ConvergenceReport",
    "cmd_simulate",
    "cmd_particles",
    "cmd_compare",
    "cmd_converge",
]


@dataclass
class RunArtifacts:
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


@dataclass
class CompareResult:
    times: list[float]
    w1: list[float]
    artifacts: RunArtifacts


@dataclass
class ConvergenceRow:
    dx: float
    n_cells: int
    w1_error: float
    runtime_s: float


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    ratios: list[float]
    artifacts: RunArtifacts | None = None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(cfg: SimConfig, command: str, out_dir: Path, files: list[Path], summary: dict) -> RunArtifacts:
    manifest = {
        "command": command,
        "label": cfg.label,
        "config": cfg.to_dict(),
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in sorted(files)],
        "summary": summary,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunArtifacts(out_dir=out_dir, files=sorted(files) + [path], manifest=manifest)


def _run_dir(cfg: SimConfig, suffix: str = "") -> Path:
    d = Path(cfg.output_dir) / (cfg.label + suffix)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _initial_for_fv(cfg: SimConfig):
    if cfg.initial.is_atomic:
        return cfg.initial.atoms
    return cfg.initial.density


def _write_snapshot_csv(path: Path, m: DiscreteMeasure, grid: fv.Grid) -> Path:
    """Cell-centered snapshot: ``x,rho`` rows over the full grid."""
    rho = np.zeros(grid.n_cells)
    if m.n_atoms:
        idx = np.rint((m.positions - grid.x_min) / grid.dx).astype(int)
        rho[idx] = m.masses / grid.dx
    lines = ["x,rho"]
    for x, r in zip(grid.centers, rho):
        lines.append(f"{x:.17g},{r:.17g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def cmd_simulate(cfg: SimConfig) -> RunArtifacts:
    """Run the finite-volume scheme; write snapshots, diagnostics and manifest."""
    cfg.validate()
    out = _run_dir(cfg)
    grid = cfg.make_grid()
    pot = cfg.make_potential()
    law = cfg.make_law()
    state0 = fv.project_initial(_initial_for_fv(cfg), grid)
    t0 = _time.perf_counter()
    snapshots, diag = fv.run(state0, pot, law, cfg.mode, cfg.t_end, cfg.gamma, cfg.sample_times)
    runtime = _time.perf_counter() - t0
    files = []
    for k, (t, m) in enumerate(snapshots):
        files.append(_write_snapshot_csv(out / f"snapshot_{k:03d}_t{t:.6f}.csv", m, grid))
    diag_path = out / "diagnostics.csv"
    diag.write_csv(diag_path)
    files.append(diag_path)
    summary = {
        "runtime_s": runtime,
        "steps": diag.step_index[-1],
        "final_mass": diag.mass[-1],
        "final_support_cells": diag.support_cells[-1],
        "max_abs_velocity": max(diag.max_abs_a),
    }
    return _write_manifest(cfg, "simulate", out, files, summary)


def _particle_system(cfg: SimConfig, n: int) -> particles.ParticleSystem:
    x, m = sample_particles(cfg.initial, n, cfg.domain)
    law = cfg.make_law() if cfg.mode == "nonlinear" else None
    return particles.ParticleSystem(x=x, m=m, time=0.0, mode=cfg.mode, pot=cfg.make_potential(), law=law)


def cmd_particles(cfg: SimConfig) -> RunArtifacts:
    """Sticky-particle run on atomic initial data, with trajectory logging."""
    cfg.validate()
    if not cfg.initial.is_atomic:
        raise ConfigError("the particles command requires atomic initial data")
    out = _run_dir(cfg)
    ps = _particle_system(cfg, n=cfg.initial.atoms.n_atoms)
    log = particles.TrajectoryLog()
    log.record(0.0, "sample", particles.snapshot(ps))
    times = sorted({float(t) for t in cfg.sample_times if 0.0 < t <= cfg.t_end} | ({cfg.t_end} if cfg.t_end > 0 else set()))
    t0 = _time.perf_counter()
    for t in times:
        ps = particles.advance_to(ps, t, log)
        log.record(t, "sample", particles.snapshot(ps))
    runtime = _time.perf_counter() - t0
    traj_path = out / "trajectory.csv"
    lines = ["time,event,positions_then_masses"]
    for ev in log.events:
        vals = [f"{v:.17g}" for v in ev.snapshot.positions] + [f"{v:.17g}" for v in ev.snapshot.masses]
        lines.append(",".join([f"{ev.time:.17g}", ev.kind] + vals))
    traj_path.write_text("\n".join(lines) + "\n")
    final_path = write_atoms_csv(particles.snapshot(ps), out / "final_atoms.csv")
    merges = [ev for ev in log.events if ev.kind == "merge"]
    summary = {
        "runtime_s": runtime,
        "n_initial": cfg.initial.atoms.n_atoms,
        "n_final": ps.n,
        "n_merge_events": len(merges),
        "final_mass": ps.total_mass,
    }
    return _write_manifest(cfg, "particles", out, [traj_path, final_path], summary)


def cmd_compare(cfg: SimConfig) -> CompareResult:
    """Scheme vs particle oracle: W1 between snapshots at shared sample times."""
    cfg.validate()
    out = _run_dir(cfg)
    times = sorted({0.0, float(cfg.t_end)} | {float(t) for t in cfg.sample_times if 0.0 <= t <= cfg.t_end})
    grid = cfg.make_grid()
    pot = cfg.make_potential()
    law = cfg.make_law()
    state0 = fv.project_initial(_initial_for_fv(cfg), grid)
    t0 = _time.perf_counter()
    fv_snaps, _ = fv.run(state0, pot, law, cfg.mode, cfg.t_end, cfg.gamma, times)
    ps = _particle_system(cfg, n=cfg.compare_particles)
    series = []
    for t, fv_m in fv_snaps:
        ps = particles.advance_to(ps, t)
        series.append((t, wasserstein1(fv_m, particles.snapshot(ps))))
    runtime = _time.perf_counter() - t0
    path = out / "w1_compare.csv"
    lines = ["time,w1"] + [f"{t:.17g},{w:.17g}" for t, w in series]
    path.write_text("\n".join(lines) + "\n")
    summary = {
        "runtime_s": runtime,
        "oracle_particles": ps.n,
        "w1_initial": series[0][1],
        "w1_final": series[-1][1],
    }
    artifacts = _write_manifest(cfg, "compare", out, [path], summary)
    return CompareResult(times=[t for t, _ in series], w1=[w for _, w in series], artifacts=artifacts)


def _max_workers(n_jobs: int) -> int:
    cap = os.environ.get("AGGR_THREADS", "").strip()
    if cap:
        try:
            return max(1, min(n_jobs, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"AGGR_THREADS must be an integer: {cap!r}") from exc
    return max(1, min(n_jobs, os.cpu_count() or 1))


def cmd_converge(cfg: SimConfig) -> ConvergenceReport:
    """Grid-refinement study against a particle oracle at t_end.

    Levels must be at least three, increasing, each dividing the next;
    levels run concurrently (``AGGR_THREADS`` caps the pool).
    """
    cfg.validate()
    levels = list(cfg.levels)
    if len(levels) < 3:
        raise ConfigError("converge needs at least three refinement levels")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("refinement levels must be strictly increasing")
    if any(b % a for a, b in zip(levels, levels[1:])):
        raise ConfigError("each refinement level must divide the next")
    out = _run_dir(cfg)
    pot = cfg.make_potential()
    law = cfg.make_law()

    oracle = _particle_system(cfg, n=cfg.converge_particles)
    oracle = particles.advance_to(oracle, cfg.t_end)
    oracle_final = particles.snapshot(oracle)

    def run_level(n_cells: int) -> ConvergenceRow:
        t0 = _time.perf_counter()
        grid = cfg.make_grid(n_cells)
        state0 = fv.project_initial(_initial_for_fv(cfg), grid)
        snaps, _ = fv.run(state0, pot, law, cfg.mode, cfg.t_end, cfg.gamma, [cfg.t_end])
        err = wasserstein1(snaps[-1][1], oracle_final)
        return ConvergenceRow(dx=grid.dx, n_cells=n_cells, w1_error=err, runtime_s=_time.perf_counter() - t0)

    with concurrent.futures.ThreadPoolExecutor(max_workers=_max_workers(len(levels))) as pool:
        rows = list(pool.map(run_level, levels))
    rows.sort(key=lambda r: r.dx, reverse=True)
    ratios = [b.w1_error / a.w1_error for a, b in zip(rows, rows[1:])]
    path = out / "convergence.csv"
    lines = ["dx,n_cells,w1_error,ratio"]
    for i, r in enumerate(rows):
        ratio = "" if i == 0 else f"{ratios[i - 1]:.17g}"
        lines.append(f"{r.dx:.17g},{r.n_cells},{r.w1_error:.17g},{ratio}")
    path.write_text("\n".join(lines) + "\n")
    summary = {
        "oracle_particles": cfg.converge_particles,
        "runtimes_s": {str(r.n_cells): r.runtime_s for r in rows},
        "w1_errors": {str(r.n_cells): r.w1_error for r in rows},
        "ratios": ratios,
    }
    artifacts = _write_manifest(cfg, "converge", out, [path], summary)
    return ConvergenceReport(rows=rows, ratios=ratios, artifacts=artifacts)
