"""Command-line front end.

    drivenchain <config-path | preset-name> [--workers K] [--oracle-check] [--out DIR]

Exit status: 0 on success, 1 on configuration errors (nothing is written),
2 on numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import Experiment, RunConfig, parse_config, preset_names, preset_text
from .dynamics import ORACLE_DT_FACTOR, Method, Trajectory, evolve
from .errors import ConfigError, NumericalError
from .experiments import (
    FIG5_RATES,
    FIG5_TRACE_RATES,
    FIG7_RATES,
    coherence_vs_visibility,
    dephasing_scan,
    disorder_scan,
    frequency_grid,
    long_chain_run,
    merge_comb,
    sweep_amplitude,
    sweep_frequency,
)
from .hamiltonian import omega_fastest
from .observables import SweepCurve, init_single_excitation

UNITS = "angular frequencies and rates in rad/ns, times in ns, hbar = 1"


class Output:
    """One CSV table plus its metadata sidecar."""

    def __init__(self, stem: str, columns: dict[str, np.ndarray], meta: dict):
        self.stem = stem
        self.columns = columns
        self.meta = meta

    def csv_text(self) -> str:
        names = list(self.columns)
        cols = [np.asarray(self.columns[n], dtype=float) for n in names]
        lines = [",".join(names)]
        for row in zip(*cols):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def _curve_output(stem: str, curve: SweepCurve, extra: dict | None = None) -> Output:
    columns = {curve.parameter: curve.grid, curve.value_name: curve.values, **curve.columns}
    meta = {"curve": curve.metadata, "checks": _check_summary(curve.point_metadata), **(extra or {})}
    return Output(stem, columns, meta)


def _check_summary(points: list[dict]) -> dict:
    if not points:
        return {}
    return {
        "max_trace_error": max(p["max_trace_error"] for p in points),
        "max_hermiticity_error": max(p["max_hermiticity_error"] for p in points),
        "min_eigenvalue": min(p["min_eigenvalue"] for p in points),
        "eigenvalue_checks": sum(p["eigenvalue_checks"] for p in points),
        "points": len(points),
    }


def _rate_tag(rate: float) -> str:
    return repr(float(rate))


def _run_evolve(cfg: RunConfig) -> list[Output]:
    chain, source = cfg.chain, cfg.sweep["source"]
    rho0 = init_single_excitation(chain.n_sites, source)
    tr = evolve(rho0, chain, cfg.noise, cfg.integrator, cfg.sweep["include_h2"])
    columns = {"time": tr.times}
    for k in range(1, chain.n_sites + 1):
        columns[f"population_{k}"] = tr.population(k)
    columns["coherence_sum"] = tr.coherence
    if cfg.oracle_check:
        icfg = replace(cfg.integrator, method=Method.ORACLE, dt_max=ORACLE_DT_FACTOR / omega_fastest(chain), sample_stride=None)
        ref = evolve(rho0, chain, cfg.noise, icfg, cfg.sweep["include_h2"])
        if ref.times.shape != tr.times.shape or not np.allclose(ref.times, tr.times, rtol=0, atol=1e-9):
            raise ConfigError("oracle check needs the default sampling (leave sample_stride unset)")
        columns["oracle_abs_diff"] = np.abs(ref.populations - tr.populations).max(axis=1)
    checks = tr.metadata["checks"]
    return [Output(cfg.name, columns, {"trajectory": {k: v for k, v in tr.metadata.items() if k != "checks"}, "checks": checks})]


def _trace_output(stem: str, tr: Trajectory, n_sites: int) -> Output:
    columns = {"time": tr.times}
    for k in range(1, n_sites + 1):
        columns[f"population_{k}"] = tr.population(k)
    columns["coherence_sum"] = tr.coherence
    return Output(stem, columns, {"checks": tr.metadata["checks"]})


def _require_no(cfg: RunConfig, what: str, value: float) -> None:
    if value != 0.0:
        raise ConfigError(f"{cfg.experiment.value} requires {what} = 0")


def _no_oracle(cfg: RunConfig) -> None:
    if cfg.oracle_check:
        raise ConfigError(f"oracle check is not available for experiment {cfg.experiment.value}")


def execute(cfg: RunConfig) -> list[Output]:
    """Run the configured experiment and return its tables (nothing is written)."""
    sw, chain, icfg, workers = cfg.sweep, cfg.chain, cfg.integrator, cfg.workers
    exp = cfg.experiment
    if exp is Experiment.EVOLVE:
        return _run_evolve(cfg)
    if exp is Experiment.SWEEP_AMPLITUDE:
        curve = sweep_amplitude(
            chain,
            cfg.noise,
            icfg,
            sw.get("grid"),
            sw["resonant"],
            sw["include_h2"],
            workers,
            sw["source"],
            sw.get("target"),
            cfg.oracle_check,
        )
        return [_curve_output(cfg.name, curve)]
    if exp is Experiment.SWEEP_FREQUENCY:
        grid = sw.get("grid")
        if grid is None:
            grid = frequency_grid(chain.omega[0], comb=sw["merge_comb"])
        elif sw["merge_comb"]:
            grid = merge_comb(grid, chain.omega[0])
        curve = sweep_frequency(chain, cfg.noise, icfg, grid, workers, sw.get("lock"), cfg.oracle_check)
        return [_curve_output(cfg.name, curve)]
    if exp is Experiment.DISORDER_SCAN:
        _require_no(cfg, "gamma_deph", cfg.noise.gamma_deph)
        _require_no(cfg, "gamma_diss", cfg.noise.gamma_diss)
        z = chain.e_ac / chain.omega_drive if chain.e_ac else 1.2
        curve = disorder_scan(chain, icfg, sw.get("grid"), icfg.t_end, z, workers, cfg.oracle_check)
        return [_curve_output(cfg.name, curve)]
    if exp is Experiment.DEPHASING_SCAN:
        _no_oracle(cfg)
        _require_no(cfg, "gamma_diss", cfg.noise.gamma_diss)
        rates = sw.get("rates", np.array(FIG5_RATES))
        trace_rates = sw.get("trace_rates", np.array(FIG5_TRACE_RATES))
        z_values = sw.get("z_values", np.array([0.0, 1.2]))
        scan = dephasing_scan(
            chain, icfg, z_values, rates, sw.get("grid"), trace_rates, workers, cfg.noise.deph_form.value
        )
        outs = [_curve_output(f"{cfg.name}_gdeph_{_rate_tag(r)}", c) for r, c in scan.curves.items()]
        for (z, r), tr in scan.traces.items():
            outs.append(_trace_output(f"{cfg.name}_trace_z_{_rate_tag(z)}_gdeph_{_rate_tag(r)}", tr, chain.n_sites))
        return outs
    if exp is Experiment.COHERENCE_VISIBILITY:
        _no_oracle(cfg)
        _require_no(cfg, "gamma_diss", cfg.noise.gamma_diss)
        curve = coherence_vs_visibility(chain, icfg, sw.get("rates"), sw.get("grid"), workers, cfg.noise.deph_form.value)
        return [_curve_output(cfg.name, curve)]
    if exp is Experiment.LONG_CHAIN:
        _no_oracle(cfg)
        _require_no(cfg, "gamma_deph", cfg.noise.gamma_deph)
        rates = sw.get("rates", np.array(FIG7_RATES))
        curves = long_chain_run(chain, icfg, sw.get("grid"), rates, icfg.t_end, workers)
        return [_curve_output(f"{cfg.name}_gdiss_{_rate_tag(r)}", c) for r, c in curves.items()]
    raise ConfigError(f"unhandled experiment {exp.value}")  # pragma: no cover


def _meta(cfg: RunConfig, out: Output, wall: float) -> dict:
    return {
        "units": UNITS,
        "tool": "drivenchain",
        "version": __version__,
        "experiment": cfg.experiment.value,
        "wall_time_s": wall,
        "config": cfg.raw,
        "resolved": {
            "chain": asdict(cfg.chain),
            "noise": {**asdict(cfg.noise), "deph_form": cfg.noise.deph_form.value},
            "integrator": {**asdict(cfg.integrator), "method": cfg.integrator.method.value},
            "sweep": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in cfg.sweep.items()},
            "workers": cfg.workers,
            "oracle_check": cfg.oracle_check,
        },
        "columns": list(out.columns),
        **out.meta,
    }


def write_outputs(cfg: RunConfig, outputs: list[Output], wall: float) -> list[Path]:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for out in outputs:
        csv_path = cfg.output_dir / f"{out.stem}.csv"
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(out.csv_text())
        with open(cfg.output_dir / f"{out.stem}.meta", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_meta(cfg, out, wall), fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        paths.append(csv_path)
    return paths


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write its files; returns the process exit code."""
    start = time.perf_counter()
    try:
        outputs = execute(cfg)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    for path in write_outputs(cfg, outputs, time.perf_counter() - start):
        print(path)
    return 0


def load(source: str) -> tuple[str, Path | None]:
    """Config text from a file path, or from a shipped preset of that name."""
    path = Path(source)
    if path.is_file():
        return path.read_text(encoding="utf-8"), None
    if source in preset_names():
        return preset_text(source), None
    raise ConfigError(f"no config file {source!r} and no preset of that name ({', '.join(preset_names())})")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="drivenchain", description="Driven dissipative qubit chain simulator.")
    parser.add_argument("config", help="config file path or preset name")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (overrides the config)")
    parser.add_argument("--oracle-check", action="store_true", help="add an oracle_abs_diff column")
    parser.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
    args = parser.parse_args(argv)
    try:
        text, base = load(args.config)
        cfg = parse_config(text, base)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be at least 1")
            cfg = replace(cfg, workers=args.workers)
        if args.oracle_check:
            cfg = replace(cfg, oracle_check=True)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
