"""Epsilon-sweep orchestration and the desk-scale convergence report.

One sweep runs the primitive solver for every eps in a strictly
decreasing list with data, potential, grid and the Reynolds exponent
held fixed, then measures the three limit norms

    N1(eps) = sup_t || rho - rho0 ||          (essential L2 + residual L^gamma)
    N2(eps) = sup_t || Theta - 1 ||_{L^2}     (and its eps^2-rescaled variant)
    N3(eps) = int_0^T || sqrt(rho/rho0) u - V ||^2_{L^2(K)} dt

against the radial closed-form limit (V = 0 and frozen temperature),
together with the uniform-bound constants and the residual pressure
integral.  The decreasing trend of N1 and N3 with fitted positive slopes
is the desk-scale shadow of the convergence statement; N2 is reported in
both readings because the limit temperature can be interpreted at the
unit level or at the eps^2 perturbation level.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .grids import DomainError, EssResCutoff, Grid, ess_res_split, lp_norm
from .helmholtz import project
from .hydrostatics import PotentialSpec, StaticProfile, build_profile
from .params import ScalingParams
from .primitive import (
    IllPreparedData,
    PrimitiveTrajectory,
    init_ill_prepared,
    run_primitive,
)
from .relative_energy import (
    BoundsReport,
    constants_spread,
    fit_eps_slope,
    residual_pressure_value,
    uniform_bounds_report,
)

FMT = "%.17g"


class SweepError(RuntimeError):
    """A sweep member failed; carries the partial report."""

    def __init__(self, message: str, partial: "ConvergenceReport | None"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SweepPlan:
    """Sweep inputs: shared data and scaling template, descending eps list."""

    eps_list: tuple
    data: IllPreparedData
    potential: PotentialSpec
    params: ScalingParams
    grid: Grid
    n_samples: int = 65
    beta: float = 0.5
    k_radius: float | None = None

    def __post_init__(self) -> None:
        eps = np.asarray(self.eps_list, dtype=float)
        if eps.size < 2:
            raise DomainError("a sweep needs at least two eps values")
        if np.any(eps <= 0.0) or np.any(np.diff(eps) >= 0.0):
            raise DomainError("eps list must be strictly decreasing and positive")


@dataclass
class CaseResult:
    eps: float
    prof: StaticProfile
    traj: PrimitiveTrajectory
    bounds: BoundsReport
    n1: float
    n2a: float
    n2b: float
    n3: float
    r12: float


class ExactRadialReference:
    """Closed-form limit trajectory in radial geometry: V = 0, frozen T."""

    def __init__(self, theta20: np.ndarray, prof: StaticProfile, grid: Grid):
        self.grid = grid
        self.theta = theta20
        self.density = prof.rho0 / np.where(theta20 > 0.0, theta20, 1.0)
        self._zero = np.zeros(grid.field_shape)

    def velocity(self, t: float) -> np.ndarray:
        del t
        return self._zero

    def temperature(self, t: float) -> np.ndarray:
        del t
        return self.theta


def limit_norms(
    traj: PrimitiveTrajectory,
    prof: StaticProfile,
    params: ScalingParams,
    grid: Grid,
    reference: ExactRadialReference,
    cutoff: EssResCutoff,
) -> tuple[float, float, float, float]:
    """(N1, N2a, N2b, N3) for one run against the limit reference."""
    n1 = 0.0
    n2a = 0.0
    n2b = 0.0
    for t, state in zip(traj.times, traj.states):
        drho = state.rho - prof.rho0
        ess, res = ess_res_split(drho, state.q, cutoff)
        n1 = max(n1, lp_norm(ess, 2.0, grid) + lp_norm(res, params.gamma, grid))
        dtheta = state.theta - 1.0
        n2a = max(n2a, lp_norm(dtheta, 2.0, grid))
        n2b = max(
            n2b,
            lp_norm(dtheta / params.eps**2 - reference.temperature(t), 2.0, grid),
        )
    n3 = float(traj.n3_integral[-1])
    return n1, n2a, n2b, n3


def run_case(plan: SweepPlan, eps: float) -> CaseResult:
    params = plan.params.with_eps(eps)
    grid = plan.grid
    prof = build_profile(plan.potential, params, grid)
    cutoff = EssResCutoff.from_profile(prof)
    init = init_ill_prepared(plan.data, prof, params, grid)
    times = np.linspace(0.0, params.horizon, plan.n_samples)
    k_radius = plan.k_radius if plan.k_radius is not None else grid.default_compact_radius
    traj = run_primitive(init, prof, params, grid, times, k_radius=k_radius)
    bounds = uniform_bounds_report(traj, prof, params, grid, cutoff)
    reference = ExactRadialReference(plan.data.theta2_field(grid, 0.0), prof, grid)
    n1, n2a, n2b, n3 = limit_norms(traj, prof, params, grid, reference, cutoff)
    r12 = residual_pressure_value(traj, k_radius, plan.beta, grid, cutoff)
    return CaseResult(
        eps=eps, prof=prof, traj=traj, bounds=bounds,
        n1=n1, n2a=n2a, n2b=n2b, n3=n3, r12=r12,
    )


@dataclass
class ConvergenceReport:
    eps_list: np.ndarray
    n1: np.ndarray
    n2a: np.ndarray
    n2b: np.ndarray
    n3: np.ndarray
    r12: np.ndarray
    bounds: list
    n1_slope: float = np.nan
    n3_slope: float = np.nan
    r12_slope: float = np.nan
    cases: list = field(default_factory=list)

    def finalize(self) -> None:
        for name in ("n1", "n2a", "n2b", "n3", "r12"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DomainError(f"non-finite entries in convergence norm {name}")
        self.n1_slope = fit_eps_slope(self.eps_list, self.n1)
        self.n3_slope = fit_eps_slope(self.eps_list, self.n3)
        self.r12_slope = fit_eps_slope(self.eps_list, self.r12)

    @property
    def n1_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.n1) < 0.0))

    @property
    def n3_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.n3) < 0.0))

    @property
    def n2a_constants(self) -> np.ndarray:
        return self.n2a / self.eps_list**2

    def bound_spreads(self) -> dict:
        keys = ("r2", "r3", "r4", "r5", "r6", "r7", "r8")
        return {k: constants_spread(self.bounds, k) for k in keys}

    def summary_text(self) -> str:
        lines = ["eps      N1          N2a         N2b         N3          r12"]
        for j, eps in enumerate(self.eps_list):
            lines.append(
                f"{eps:<8.4g} {self.n1[j]:<11.5g} {self.n2a[j]:<11.5g} "
                f"{self.n2b[j]:<11.5g} {self.n3[j]:<11.5g} {self.r12[j]:<11.5g}"
            )
        lines.append(
            f"N1 decreasing={self.n1_decreasing} slope={self.n1_slope:.4g}; "
            f"N3 decreasing={self.n3_decreasing} slope={self.n3_slope:.4g}"
        )
        consts = ", ".join(f"{c:.5g}" for c in self.n2a_constants)
        lines.append(f"N2a/eps^2 constants: {consts}")
        lines.append(f"r12 slope: {self.r12_slope:.4g}")
        spreads = ", ".join(f"{k}={v:.3g}" for k, v in self.bound_spreads().items())
        lines.append(f"bound-constant spreads: {spreads}")
        return "\n".join(lines)

    def write_csv(self, outdir: str) -> None:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "convergence.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "n1", "n2a", "n2b", "n3", "r12"])
            for j, eps in enumerate(self.eps_list):
                w.writerow(
                    FMT % v
                    for v in (eps, self.n1[j], self.n2a[j], self.n2b[j], self.n3[j], self.r12[j])
                )
        with open(os.path.join(outdir, "bounds.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            keys = ("r2", "r3", "r4", "r5", "r6", "r7", "r8")
            w.writerow(["eps"] + [f"const_{k}" for k in keys])
            for eps, rep in zip(self.eps_list, self.bounds):
                w.writerow([FMT % eps] + [FMT % rep.constants[k] for k in keys])


def sweep_epsilon(plan: SweepPlan, keep_cases: bool = False) -> ConvergenceReport:
    """Run the whole sweep; a member failure aborts with the partial report."""
    results: list[CaseResult] = []
    for eps in plan.eps_list:
        try:
            results.append(run_case(plan, eps))
        except Exception as exc:
            partial = _assemble(results, keep_cases) if results else None
            raise SweepError(f"sweep failed at eps={eps}: {exc}", partial) from exc
    return _assemble(results, keep_cases)


def _assemble(results: list, keep_cases: bool) -> ConvergenceReport:
    report = ConvergenceReport(
        eps_list=np.array([r.eps for r in results]),
        n1=np.array([r.n1 for r in results]),
        n2a=np.array([r.n2a for r in results]),
        n2b=np.array([r.n2b for r in results]),
        n3=np.array([r.n3 for r in results]),
        r12=np.array([r.r12 for r in results]),
        bounds=[r.bounds for r in results],
        cases=results if keep_cases else [],
    )
    if report.eps_list.size >= 2:
        report.finalize()
    return report


def acoustic_ansatz(
    data: IllPreparedData,
    prof: StaticProfile,
    grid: Grid,
    eps: float,
    delta: float,
):
    """Regularized acoustic solution for the relative-energy ansatz.

    The initial perturbation density is the limit profile of the data and
    the initial potential solves the weighted Poisson problem of the limit
    velocity; both are regularized at parameter delta before evolution.
    """
    from .acoustic import (
        AcousticState,
        assemble_operator,
        regularize_data,
        spectral_solution,
    )

    rho1, v0, _ = data.limit_fields(grid)
    _, phi0 = project(v0, prof, grid)
    op = assemble_operator(prof)
    s0, phi0d = regularize_data(op, rho1, phi0, delta)
    return spectral_solution(op, AcousticState(s=s0, phi=phi0d), eps)


def audit_quarantine_time(prof: StaticProfile, grid: Grid, params: ScalingParams) -> float:
    """Horizon before the fastest wave reaches the sponge on the eps clock.

    The primitive run absorbs outgoing waves in the sponge while the
    acoustic reference reflects at the outer wall, so relative-energy
    comparisons are quarantined to the window where neither device has
    acted; 0.85 covers the head start of the data's spatial support.
    """
    c_max = float(np.max(np.sqrt(prof.dp)))
    return 0.85 * grid.r_sponge * params.eps / c_max
