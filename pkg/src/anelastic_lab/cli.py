"""Command-line interface of the laboratory.

Every subcommand reads the plain-text configuration (defaults, optional
file, dotted-key overrides), runs deterministically for a given
configuration and seed, and writes CSV/plain-text artifacts with floats
printed at 17 significant digits.  Exit codes: 0 success, 2 validation
failure, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import acoustic as ac
from . import configio
from .anelastic import init_anelastic, run_anelastic, smoothness_monitor
from .grids import CFLError, DomainError, lp_norm
from .harness import (
    SweepError,
    SweepPlan,
    acoustic_ansatz,
    audit_quarantine_time,
    sweep_epsilon,
)
from .helmholtz import SolverError
from .hydrostatics import build_profile, export_profile_csv, flatness_report, static_residual
from .params import ParameterError
from .primitive import (
    DataError,
    SolverFailure,
    init_ill_prepared,
    run_primitive,
    write_checkpoint,
)
from .relative_energy import (
    RelEnergyReport,
    rei_audit,
    residual_pressure_value,
    uniform_bounds_report,
)

FMT = "%.17g"


def _fmt(x: float) -> str:
    return FMT % x


def _write_rows(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _setup(args):
    cfg = configio.load_config(args.config, args.set)
    outdir = args.output or cfg["output.dir"]
    os.makedirs(outdir, exist_ok=True)
    return cfg, outdir


def cmd_profile(args) -> int:
    cfg, outdir = _setup(args)
    grid = configio.grid_from(cfg)
    params = configio.params_from(cfg)
    spec = configio.potential_from(cfg)
    prof = build_profile(spec, params, grid)
    export_profile_csv(prof, os.path.join(outdir, "profile.csv"))
    rep = flatness_report(spec, grid, params)
    residual = static_residual(prof, grid)
    text = rep.text() + f"\nstatic residual (max norm)    = {residual:.17g}\n"
    with open(os.path.join(outdir, "flatness.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def cmd_simulate_primitive(args) -> int:
    cfg, outdir = _setup(args)
    grid = configio.grid_from(cfg)
    params = configio.params_from(cfg)
    prof = build_profile(configio.potential_from(cfg), params, grid)
    data = configio.data_from(cfg)
    init = init_ill_prepared(data, prof, params, grid)
    times = np.linspace(0.0, params.horizon, configio.get_int(cfg, "run.samples"))
    traj = run_primitive(init, prof, params, grid, times)
    rows = zip(
        traj.times,
        traj.energy,
        traj.dissipation,
        traj.mass,
        traj.mass - traj.mass[0] + traj.outer_mass_flux + traj.sponge_mass,
    )
    _write_rows(
        os.path.join(outdir, "diagnostics.csv"),
        ["t", "energy", "dissipation", "mass", "mass_defect"],
        rows,
    )
    write_checkpoint(os.path.join(outdir, "final_state.bin"), traj.states[-1], grid, params)
    print(
        f"simulate-primitive: steps={traj.step_count} "
        f"E0={traj.energy[0]:.17g} E_end={traj.energy[-1]:.17g}"
    )
    return 0


def cmd_simulate_anelastic(args) -> int:
    cfg, outdir = _setup(args)
    grid = configio.grid_from(cfg)
    if not grid.radial and not args.experimental:
        raise ConfigUsageError(
            "cartesian anelastic runs are experimental; pass --experimental"
        )
    params = configio.params_from(cfg)
    prof = build_profile(configio.potential_from(cfg), params, grid)
    data = configio.data_from(cfg)
    if grid.radial:
        v0 = data.u0_field(grid, params.eps)
    else:
        from .helmholtz import StaggeredVector

        rng = np.random.default_rng(configio.get_int(cfg, "run.seed"))
        n = grid.n
        v0 = StaggeredVector(
            0.1 * rng.standard_normal((n + 1, n, n)),
            0.1 * rng.standard_normal((n, n + 1, n)),
            0.1 * rng.standard_normal((n, n, n + 1)),
        )
    theta20 = 1.0 + data.theta2_field(grid, params.eps)
    state = init_anelastic(v0, theta20, prof, grid)
    traj = run_anelastic(
        state, prof, grid, params.horizon, n_samples=configio.get_int(cfg, "run.samples")
    )
    monitor = smoothness_monitor(traj, grid)
    rows = zip(
        traj.times,
        traj.divergence_defects,
        monitor.surrogates["velocity"],
        monitor.surrogates["pressure"],
        monitor.surrogates["density"],
    )
    _write_rows(
        os.path.join(outdir, "anelastic.csv"),
        ["t", "div_defect", "s_velocity", "s_pressure", "s_density"],
        rows,
    )
    print(
        f"simulate-anelastic: samples={traj.times.size} "
        f"max-div-defect={np.max(traj.divergence_defects):.17g} "
        f"blowup={monitor.any_blowup}"
    )
    return 0


def _acoustic_setup(cfg):
    grid = configio.grid_from(cfg)
    params = configio.params_from(cfg)
    prof = build_profile(configio.potential_from(cfg), params, grid)
    op = ac.assemble_operator(prof)
    return grid, params, prof, op


def cmd_simulate_acoustic(args) -> int:
    cfg, outdir = _setup(args)
    grid, params, prof, op = _acoustic_setup(cfg)
    data = configio.data_from(cfg)
    from .helmholtz import project

    rho1, v0, _ = data.limit_fields(grid)
    _, phi0 = project(v0, prof, grid)
    s0, phi0d = ac.regularize_data(op, rho1, phi0, configio.get_float(cfg, "acoustic.delta"))
    traj = ac.evolve_acoustic(
        ac.AcousticState(s=s0, phi=phi0d),
        op,
        params.eps,
        params.horizon,
        n_samples=configio.get_int(cfg, "run.samples"),
    )
    rows = []
    for t, st, energy in zip(traj.times, traj.states, traj.energies):
        rows.append((t, energy, lp_norm(st.s, 2.0, grid), lp_norm(st.phi, 2.0, grid)))
    _write_rows(
        os.path.join(outdir, "acoustic.csv"), ["t", "energy", "s_l2", "phi_l2"], rows
    )
    drift = np.max(np.abs(traj.energies - traj.energies[0]))
    print(
        f"simulate-acoustic: E0={traj.energies[0]:.17g} "
        f"max-energy-drift={drift:.17g}"
    )
    return 0


def cmd_spectrum(args) -> int:
    cfg, outdir = _setup(args)
    _, _, _, op = _acoustic_setup(cfg)
    _write_rows(
        os.path.join(outdir, "spectrum.csv"),
        ["k", "lambda"],
        ((k, lam) for k, lam in enumerate(op.evals)),
    )
    print(f"spectrum: {op.evals.size} eigenvalues, range [{op.evals[0]:.17g}, {op.evals[-1]:.17g}]")
    return 0


def _windowed_datum(cfg, grid, op):
    data = configio.data_from(cfg)
    delta = configio.get_float(cfg, "acoustic.delta")
    window = ac.FrequencyWindow(delta)
    h = ac.functional_calculus(op, window, data.rho1.field(grid))
    norm = op.norm(h)
    if norm == 0.0:
        raise DataError("windowed datum vanishes; widen the window or the data")
    return window, h / norm


def cmd_decay(args) -> int:
    cfg, outdir = _setup(args)
    grid, params, prof, op = _acoustic_setup(cfg)
    window, h = _windowed_datum(cfg, grid, op)
    t_star = ac.crossing_time(prof, grid)
    ppp = configio.get_int(cfg, "acoustic.points_per_period")
    radius = configio.get_float(cfg, "acoustic.ball_radius")
    m1 = ac.measure_local_decay(op, window, radius, h, t_star, ppp)
    m2 = ac.measure_local_decay(op, window, radius, h, 2.0 * t_star, ppp)
    _write_rows(os.path.join(outdir, "decay.csv"), ["t", "localized_sq_norm"], zip(m2.times, m2.series))
    ratio = m2.value / m1.value if m1.value > 0 else np.inf
    print(
        f"decay: T*={t_star:.17g} measure(T*)={m1.value:.17g} "
        f"measure(2T*)={m2.value:.17g} saturation-ratio={ratio:.17g}"
    )
    return 0


def cmd_strichartz(args) -> int:
    cfg, outdir = _setup(args)
    p = args.p if args.p is not None else configio.get_float(cfg, "acoustic.p")
    q = args.q if args.q is not None else configio.get_float(cfg, "acoustic.q")
    if not ac.admissible_pair(p, q):
        raise ConfigUsageError(
            f"(p, q) = ({p:g}, {q:g}) violates the wave admissibility 1/p + 3/q = 1/2"
        )
    grid, params, prof, op = _acoustic_setup(cfg)
    window, h = _windowed_datum(cfg, grid, op)
    t_star = ac.crossing_time(prof, grid)
    meas = ac.measure_strichartz(
        op, window, h, p, q, t_star, configio.get_int(cfg, "acoustic.points_per_period")
    )
    _write_rows(os.path.join(outdir, "strichartz.csv"), ["t", "lq_norm"], zip(meas.times, meas.series))
    print(
        f"strichartz: p={p:g} q={q:g} value={meas.value:.17g} "
        f"data-l2={meas.data_l2:.17g} constant-estimate={meas.ratio:.17g}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg, outdir = _setup(args)
    grid = configio.grid_from(cfg)
    plan = SweepPlan(
        eps_list=configio.eps_list_from(cfg, args.eps),
        data=configio.data_from(cfg),
        potential=configio.potential_from(cfg),
        params=configio.params_from(cfg),
        grid=grid,
        n_samples=configio.get_int(cfg, "sweep.samples"),
        beta=configio.get_float(cfg, "sweep.beta"),
    )
    try:
        report = sweep_epsilon(plan)
    except SweepError as exc:
        if exc.partial is not None:
            exc.partial.write_csv(outdir)
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return 3
    report.write_csv(outdir)
    text = report.summary_text()
    with open(os.path.join(outdir, "summary.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


def cmd_audit_rei(args) -> int:
    cfg, outdir = _setup(args)
    grid = configio.grid_from(cfg)
    params = configio.params_from(cfg)
    prof = build_profile(configio.potential_from(cfg), params, grid)
    data = configio.data_from(cfg)
    delta = configio.get_float(cfg, "acoustic.delta")
    horizon = min(params.horizon, audit_quarantine_time(prof, grid, params))
    omega_max = (2.0 / delta) / params.eps
    dt_s = (2.0 * np.pi / omega_max) / 24.0
    times = np.linspace(0.0, horizon, int(np.ceil(horizon / dt_s)) + 1)
    init = init_ill_prepared(data, prof, params, grid)
    traj = run_primitive(init, prof, params, grid, times)
    sol = acoustic_ansatz(data, prof, grid, params.eps, delta)
    zero = lambda t: np.zeros(grid.field_shape)  # noqa: E731
    rep = rei_audit(traj, sol, zero, params, grid)
    raw = rei_audit(traj, sol, zero, params, grid, form="raw", tolerance=rep.tolerance)
    raw_pert = rei_audit(
        traj, sol, zero, params, grid, form="raw", u_scale=1.1, tolerance=rep.tolerance
    )
    run_record = RelEnergyReport(
        audit=rep,
        bounds=uniform_bounds_report(traj, prof, params, grid),
        residual_pressure=residual_pressure_value(
            traj, grid.default_compact_radius, configio.get_float(cfg, "sweep.beta"), grid
        ),
    )
    rows = zip(
        rep.times,
        rep.lhs,
        rep.rhs_groups["velocity"],
        rep.rhs_groups["pressure"],
        rep.rhs_groups["background"],
        rep.rhs_groups["acoustic_source"],
        rep.rhs_groups["theta"],
        rep.defect,
    )
    _write_rows(
        os.path.join(outdir, "rei.csv"),
        ["t", "lhs", "rhs_velocity", "rhs_pressure", "rhs_background",
         "rhs_acoustic_source", "rhs_theta", "defect"],
        rows,
    )
    text = (
        run_record.summary_text()
        + f"\nraw ansatz max-defect      = {raw.max_defect:.17g}"
        + f"\nraw perturbed max-defect   = {raw_pert.max_defect:.17g}"
        + f"\nperturbed strictly larger  = {raw_pert.max_defect > raw.max_defect}"
    )
    with open(os.path.join(outdir, "rei_summary.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)
    return 0 if rep.passed else 3


def cmd_report(args) -> int:
    cfg, outdir = _setup(args)
    found = False
    for name in sorted(os.listdir(outdir)):
        if name.endswith(".txt"):
            found = True
            print(f"== {name}")
            with open(os.path.join(outdir, name)) as fh:
                print(fh.read(), end="")
    for name in sorted(os.listdir(outdir)):
        if name.endswith(".csv"):
            found = True
            with open(os.path.join(outdir, name)) as fh:
                n_rows = sum(1 for _ in fh) - 1
            print(f"== {name}: {n_rows} data rows")
    if not found:
        print(f"report: no artifacts in {outdir}")
    return 0


class ConfigUsageError(ValueError):
    """CLI-level validation failure."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anelastic-lab",
        description="Numerical laboratory for a gravitationally stratified "
        "low-Mach limit and its anelastic target system",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="configuration file (key = value with [sections])")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override one configuration entry (repeatable)",
        )
        p.add_argument("--output", help="output directory (default from config)")

    for name, fn in (
        ("profile", cmd_profile),
        ("simulate-primitive", cmd_simulate_primitive),
        ("simulate-anelastic", cmd_simulate_anelastic),
        ("simulate-acoustic", cmd_simulate_acoustic),
        ("spectrum", cmd_spectrum),
        ("decay", cmd_decay),
        ("strichartz", cmd_strichartz),
        ("sweep", cmd_sweep),
        ("audit-rei", cmd_audit_rei),
        ("report", cmd_report),
    ):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)
        if name == "simulate-anelastic":
            p.add_argument("--experimental", action="store_true",
                           help="allow the cartesian nontrivial-velocity mode")
        if name == "strichartz":
            p.add_argument("--p", type=float, default=None)
            p.add_argument("--q", type=float, default=None)
        if name == "sweep":
            p.add_argument("--eps", default=None, help="comma-separated descending list")
    return parser


VALIDATION_ERRORS = (
    configio.ConfigError,
    ConfigUsageError,
    DomainError,
    ParameterError,
    DataError,
    ValueError,
)
SOLVER_ERRORS = (SolverError, SolverFailure, CFLError, ac.EigensolverError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except VALIDATION_ERRORS as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
