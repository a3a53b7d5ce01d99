"""Scenario runner and data emitter.

Verbs: ``run`` (snapshots, probe traces, manifest), ``compare`` (diff two
runs), ``table`` (splitting-error table), ``stats`` (gate counts).  All
tabular output is CSV with a one-line header, ``.`` decimal, no locale;
floats are written with ``repr`` so identical configs and seeds give
byte-identical files.  Exit codes: 0 ok, 2 bad configuration, 3 numerically
infeasible recovery.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
from scipy.linalg import expm

from . import __version__
from .circuit import circuit_to_json, gate_stats
from .errors import ConfigError, IndeterminateSignError, QmaxwellError, RecoveryInfeasibleError
from .grid import Component, FieldLayout, FieldState, component_name, pack_initial_condition, qubit_count
from .lifting import PRegister, evolve_lifted_exact, hermitian_split, initial_lifted_state, recover_solution
from .measure import (
    ProbeRequest,
    apply_offset,
    magnitude_at,
    pipeline_state,
    signed_field_at,
    unit_offset_state,
)
from .operators import SparseOperator, apply_weights, assemble_generator, skew_defect, symmetrizing_weights
from .oracle import exact_evolution, snapshot, trotter_error_table
from .scenarios import SCENARIO_NAMES, build_scenario
from .trotter import TrotterRunner, emit_trotter_circuit

BACKENDS = ("oracle", "lifted-exact", "circuit")


@dataclass
class RunConfig:
    scenario: str = "2d-empty"
    nx: int | None = None
    ny: int | None = None
    nz: int | None = None
    dt: float | None = None
    steps: int | None = None
    n_a: int = 1
    p_min: float = -np.pi
    p_max: float = np.pi
    offset_c: float = 1.0
    backend: str = "circuit"
    probes: list = field(default_factory=list)
    probe_every: int = 1
    snapshot_times: list | None = None
    outdir: str | None = None
    shots: int | None = None
    seed: int = 0
    weighted: bool = True
    recovery_mode: str = "single"

    def validate(self):
        if self.scenario not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.steps is not None and self.steps < 0:
            raise ConfigError("steps must be nonnegative")
        if self.n_a < 1:
            raise ConfigError("n_a must be at least 1")
        if self.offset_c <= 0:
            raise ConfigError("offset must be positive")
        if self.probe_every < 1:
            raise ConfigError("probe_every must be at least 1")
        return self


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """JSON config file with flag overrides; flags win."""
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data).validate()


def _parse_probes(items) -> list[ProbeRequest]:
    out = []
    for item in items:
        if isinstance(item, str):
            parts = item.split(":")
            if len(parts) not in (3, 4):
                raise ConfigError(f"probe {item!r} must be comp:i:j[:k]")
            comp, idx = parts[0], [int(p) for p in parts[1:]]
        else:
            comp, idx = item[0], [int(p) for p in item[1:]]
        while len(idx) < 3:
            idx.append(0)
        out.append(ProbeRequest(component_name(comp), *idx))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_grid_csv(path: Path, array: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in array:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _snapshot_files(outdir: Path, state: FieldState, time: float) -> list[str]:
    spec = state.layout.spec
    files = []
    for comp in state.layout.components:
        if spec.dim == 2:
            name = f"{comp.value}_T{time:g}.csv"
            _write_grid_csv(outdir / name, snapshot(state, comp))
            files.append(name)
        else:
            centers = {"xy": spec.nz // 2, "xz": spec.ny // 2, "yz": spec.nx // 2}
            for plane, idx in centers.items():
                name = f"{comp.value}_T{time:g}_{plane}{idx}.csv"
                _write_grid_csv(outdir / name, snapshot(state, comp, plane, idx))
                files.append(name)
    return files


class _ProbeWriter:
    HEADER = "time,component,i,j,k,value,magnitude,sign,shots\n"

    def __init__(self, path: Path):
        self.path = path
        self.fh = open(path, "w")
        self.fh.write(self.HEADER)

    def row(self, time, probe: ProbeRequest, value, magnitude, sign, shots):
        self.fh.write(
            f"{_fmt(time)},{probe.component.value},{probe.i},{probe.j},{probe.k},"
            f"{_fmt(value)},{_fmt(magnitude)},{sign},{shots}\n"
        )

    def reading(self, time, probe: ProbeRequest, pipe, shots, rng):
        """One probe row; an indeterminate shot-mode sign gives value=nan, sign=0."""
        try:
            r = signed_field_at(probe, pipe, shots, rng)
            self.row(time, probe, r.value, r.magnitude, r.sign, r.shots_used)
        except IndeterminateSignError:
            layout = pipe.layout
            flat = layout.flat_index(probe.component, probe.i, probe.j, probe.k)
            est = magnitude_at(
                pipe.psi, flat, pipe.ancilla_index, pipe.system_dim,
                pipe.probe_scale(flat), shots, rng,
            )
            self.row(time, probe, float("nan"), est.value, 0, est.shots_used)

    def close(self):
        self.fh.close()


def _resolve_outdir(config: RunConfig) -> Path:
    if config.outdir:
        out = Path(config.outdir)
    else:
        root = os.environ.get("QMAXWELL_OUTPUT_ROOT", "runs")
        out = Path(root) / config.scenario
    out.mkdir(parents=True, exist_ok=True)
    return out


def execute_run(config: RunConfig) -> dict:
    """Run one scenario and write its artifacts; returns the manifest."""
    scenario = build_scenario(config.scenario, config.nx, config.ny, config.nz)
    spec = scenario.spec
    dt = config.dt if config.dt is not None else scenario.dt
    steps = config.steps if config.steps is not None else scenario.steps
    snap_times = (
        tuple(config.snapshot_times)
        if config.snapshot_times is not None
        else scenario.snapshot_times
    )
    snap_times = tuple(t for t in snap_times if t <= steps * dt + 1e-9)
    probes = _parse_probes(config.probes)
    outdir = _resolve_outdir(config)
    rng = np.random.default_rng(config.seed)

    a = assemble_generator(spec)
    layout = FieldLayout(spec)
    u0 = pack_initial_condition(spec, list(scenario.impulses))
    weights = symmetrizing_weights(spec) if config.weighted else None
    reg = PRegister(config.n_a, config.p_min, config.p_max)

    manifest = {
        "scenario": scenario.name,
        "config": asdict(config),
        "dt": dt,
        "steps": steps,
        "seed": config.seed,
        "versions": {
            "qmaxwell": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "grid": {"nx": spec.nx, "ny": spec.ny, "nz": spec.nz, "dim": spec.dim},
        "system_qubits": qubit_count(spec),
        "ancilla_qubits": config.n_a,
        "skew_defect": skew_defect(a),
        "artifacts": [],
    }

    writer = _ProbeWriter(outdir / "probes.csv") if probes else None
    snapshots_written = []

    if config.backend == "oracle":
        for t in snap_times:
            state = exact_evolution(a, u0, t)
            snapshots_written += _snapshot_files(outdir, state, t)
        if writer:
            for s in range(0, steps + 1, config.probe_every):
                state = exact_evolution(a, u0, s * dt)
                for p in probes:
                    v = state.at(p.component, p.i, p.j, p.k)
                    writer.row(s * dt, p, v, abs(v), 1 if v >= 0 else -1, "exact")
    elif config.backend == "lifted-exact":
        pair = hermitian_split(a if weights is None else apply_weights(a, weights))
        u_vec = u0.values if weights is None else weights * u0.values
        lift = initial_lifted_state(u_vec, reg)
        manifest["skew_defect_used"] = skew_defect(
            SparseOperator.from_scipy((pair.h1 + 1j * pair.h2).real)
        )
        for t in snap_times:
            v = evolve_lifted_exact(pair, reg, lift.values, t)
            rec = recover_solution(v, reg, pair, t, norm=lift.norm, mode=config.recovery_mode)
            if weights is not None:
                rec = rec / weights
            state = FieldState(values=rec, layout=layout, time=t)
            snapshots_written += _snapshot_files(outdir, state, t)
        if writer:
            for s in range(0, steps + 1, config.probe_every):
                t = s * dt
                v = evolve_lifted_exact(pair, reg, lift.values, t)
                rec = recover_solution(v, reg, pair, t, norm=lift.norm, mode=config.recovery_mode)
                if weights is not None:
                    rec = rec / weights
                state = FieldState(values=rec, layout=layout, time=t)
                for p in probes:
                    val = state.at(p.component, p.i, p.j, p.k)
                    writer.row(t, p, val, abs(val), 1 if val >= 0 else -1, "exact")
    else:  # circuit
        reference = ProbeRequest(
            scenario.impulses[0][0], *scenario.center
        )
        sim_u0 = u0
        if probes:
            sim_u0 = apply_offset(u0, reference.component, config.offset_c)
        runner = TrotterRunner.from_generator(
            a, sim_u0, reg, dt, layout, check_norm=False, weights=weights
        )
        manifest["blocks_per_step"] = {
            "skew_part": len(runner.h2_blocks),
            "symmetric_part": len(runner.h1_blocks),
        }
        step_stats = gate_stats(runner.step_circuit)
        manifest["gate_stats_per_step"] = step_stats
        response0 = unit_offset_state(layout, reference.component)
        response_static = not a.matvec(response0.values).any()
        stepper = None
        response = response0
        snap_set = {round(t / dt) for t in snap_times}
        if 0 in snap_set:
            snapshots_written += _snapshot_files(outdir, runner.recover(), 0.0)
        if writer and probes:
            pipe = pipeline_state(runner, config.offset_c, response0, reference)
            for p in probes:
                writer.reading(0.0, p, pipe, config.shots, rng)
        for s in range(1, steps + 1):
            runner.advance(1)
            t = runner.time
            need_probe = writer and (s % config.probe_every == 0)
            need_snap = s in snap_set
            if not (need_probe or need_snap):
                continue
            if not response_static:
                if stepper is None:
                    if layout.state_len > 4096:
                        raise ConfigError(
                            "offset response stepping needs a dense propagator; "
                            "grid too large"
                        )
                    stepper = expm(a.tocsr().toarray() * dt)
                    response_values = response0.values.copy()
                    response_step = 0
                while response_step < s:
                    response_values = stepper @ response_values
                    response_step += 1
                response = FieldState(values=response_values, layout=layout, time=t)
            else:
                response = FieldState(values=response0.values, layout=layout, time=t)
            if need_snap:
                snapshots_written += _snapshot_files(outdir, runner.recover(), t)
            if need_probe:
                pipe = pipeline_state(runner, config.offset_c, response, reference)
                for p in probes:
                    writer.reading(t, p, pipe, config.shots, rng)

    if writer:
        writer.close()
        manifest["artifacts"].append("probes.csv")
    manifest["artifacts"].extend(sorted(set(snapshots_written)))
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def execute_table(config: RunConfig, dts, times) -> Path:
    scenario = build_scenario(config.scenario, config.nx, config.ny, config.nz)
    spec = scenario.spec
    a = assemble_generator(spec)
    u0 = pack_initial_condition(spec, list(scenario.impulses))
    weights = symmetrizing_weights(spec) if config.weighted else None
    reg = PRegister(config.n_a, config.p_min, config.p_max)
    outdir = _resolve_outdir(config)

    # Error rows against the exact flow, in the original (unweighted) variables.
    from .oracle import ErrorRow, ErrorTable, component_errors

    layout = FieldLayout(spec)
    rows = []
    for dt in dts:
        runner = TrotterRunner.from_generator(
            a, u0, reg, dt, layout, check_norm=False, weights=weights
        )
        for t_target in sorted(times):
            steps = round(t_target / dt)
            if abs(steps * dt - t_target) > 1e-9:
                raise ConfigError(f"time {t_target} is not a multiple of dt={dt}")
            runner.advance(steps - runner.steps_done)
            rows.append(
                ErrorRow(
                    time=t_target,
                    dt=dt,
                    errors=component_errors(runner.recover(), exact_evolution(a, u0, t_target)),
                )
            )
    table = ErrorTable(components=layout.components, rows=tuple(rows))
    table.check_monotone()
    path = outdir / "error_table.csv"
    table.to_csv(path)
    return path


def execute_stats(config: RunConfig) -> dict:
    scenario = build_scenario(config.scenario, config.nx, config.ny, config.nz)
    spec = scenario.spec
    dt = config.dt if config.dt is not None else scenario.dt
    steps = config.steps if config.steps is not None else scenario.steps
    a = assemble_generator(spec)
    weights = symmetrizing_weights(spec) if config.weighted else None
    if weights is not None:
        a = apply_weights(a, weights)
    pair = hermitian_split(a)
    from .bell import compile_blocks
    from .trotter import order_blocks

    reg = PRegister(config.n_a, config.p_min, config.p_max)
    c = emit_trotter_circuit(
        order_blocks(compile_blocks(pair.h1, dt)),
        order_blocks(compile_blocks(pair.h2, dt)),
        reg,
        dt,
        steps,
        metadata={"scenario": scenario.name},
    )
    stats = gate_stats(c)
    stats["steps"] = steps
    stats["n_qubits"] = c.n_qubits
    outdir = _resolve_outdir(config)
    (outdir / "gate_stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    return stats


def _read_csv_rows(path: Path) -> list[list[str]]:
    lines = path.read_text().splitlines()
    return [line.split(",") for line in lines]


def execute_compare(dir_a: str, dir_b: str, outdir: str | None) -> dict:
    pa, pb = Path(dir_a), Path(dir_b)
    try:
        ma = json.loads((pa / "manifest.json").read_text())
        mb = json.loads((pb / "manifest.json").read_text())
    except OSError as e:
        raise ConfigError(f"cannot read manifests: {e}") from e
    if ma["grid"] != mb["grid"] or ma["scenario"] != mb["scenario"]:
        raise ConfigError("runs have mismatching scenario or layout")
    out = Path(outdir) if outdir else pa / "compare"
    out.mkdir(parents=True, exist_ok=True)
    report = {"scenario": ma["scenario"], "snapshots": {}, "probes": None}
    common = sorted(
        set(ma["artifacts"]) & set(mb["artifacts"]) - {"probes.csv"}
    )
    with open(out / "diff.csv", "w") as fh:
        fh.write("artifact,l2,linf\n")
        for name in common:
            arr_a = np.loadtxt(pa / name, delimiter=",", ndmin=2)
            arr_b = np.loadtxt(pb / name, delimiter=",", ndmin=2)
            d = arr_a - arr_b
            l2, linf = float(np.linalg.norm(d)), float(np.max(np.abs(d))) if d.size else 0.0
            report["snapshots"][name] = {"l2": l2, "linf": linf}
            fh.write(f"{name},{_fmt(l2)},{_fmt(linf)}\n")
    if "probes.csv" in ma["artifacts"] and "probes.csv" in mb["artifacts"]:
        rows_a = _read_csv_rows(pa / "probes.csv")[1:]
        rows_b = _read_csv_rows(pb / "probes.csv")[1:]
        keyed_b = {tuple(r[:5]): r for r in rows_b}
        with open(out / "probes_overlay.csv", "w") as fh:
            fh.write("time,component,i,j,k,value_a,value_b\n")
            worst = 0.0
            for r in rows_a:
                other = keyed_b.get(tuple(r[:5]))
                if other is None:
                    continue
                fh.write(",".join(r[:5]) + f",{r[5]},{other[5]}\n")
                worst = max(worst, abs(float(r[5]) - float(other[5])))
            report["probes"] = {"linf": worst}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--scenario", choices=SCENARIO_NAMES)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--nz", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--n-a", dest="n_a", type=int)
    p.add_argument("--p-min", dest="p_min", type=float)
    p.add_argument("--p-max", dest="p_max", type=float)
    p.add_argument("--offset", dest="offset_c", type=float)
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--probes", nargs="*", help="probe specs comp:i:j[:k]")
    p.add_argument("--probe-every", dest="probe_every", type=int)
    p.add_argument("--snapshot-times", dest="snapshot_times", nargs="*", type=float)
    p.add_argument("--outdir")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--unweighted", action="store_true", help="skip the skew-restoring similarity scaling")
    p.add_argument("--recovery-mode", dest="recovery_mode", choices=("single", "lsq"))


def _config_from_args(args) -> RunConfig:
    overrides = {
        k: getattr(args, k, None)
        for k in RunConfig.__dataclass_fields__
        if k != "weighted"
    }
    if getattr(args, "unweighted", False):
        overrides["weighted"] = False
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qmaxwell", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run a scenario and write artifacts")
    _add_common_flags(p_run)
    p_table = sub.add_parser("table", help="splitting-error table over (dt, T)")
    _add_common_flags(p_table)
    p_table.add_argument("--dts", nargs="+", type=float, default=[0.1, 0.01])
    p_table.add_argument("--times", nargs="+", type=float, default=[8.0, 16.0, 24.0])
    p_stats = sub.add_parser("stats", help="gate counts for the scenario circuit")
    _add_common_flags(p_stats)
    p_cmp = sub.add_parser("compare", help="diff two run directories")
    p_cmp.add_argument("run_a")
    p_cmp.add_argument("run_b")
    p_cmp.add_argument("--outdir")
    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            manifest = execute_run(_config_from_args(args))
            print(json.dumps({k: manifest[k] for k in ("scenario", "artifacts")}, indent=2))
        elif args.verb == "table":
            path = execute_table(_config_from_args(args), args.dts, args.times)
            print(path)
        elif args.verb == "stats":
            print(json.dumps(execute_stats(_config_from_args(args)), indent=2, sort_keys=True))
        else:
            report = execute_compare(args.run_a, args.run_b, args.outdir)
            print(json.dumps(report, indent=2, sort_keys=True))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except RecoveryInfeasibleError as e:
        print(f"numerically infeasible: {e}", file=sys.stderr)
        return 3
    except QmaxwellError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
