"""Explicit finite-volume solver for the scaled compressible system.

Conservative variables are (rho, rho u, rho Theta) on the radial grid.
Convection uses Rusanov fluxes whose dissipation acts on the deviation
from the static state, so the hydrostatic background is an exact discrete
fixed point; pressure gradient and gravity are paired through the same
face interpolants, with gravity written as (rho/rho0) times the static
pressure gradient, which cancels the pressure term identically at
equilibrium.  The viscous stress enters at strength eps**alpha; for a
radial (curl-free) velocity it reduces to (4/3 + lam) grad(div u).  An
outer sponge relaxes everything toward the static far field.

Time stepping is forward Euler under an acoustic CFL constraint
dt <= cfl * eps * h / max wave speed; the 1/eps step count is the price
of keeping the energy audit free of splitting errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import (
    CFLError,
    DomainError,
    Grid,
    integrate,
    radial_divergence,
    radial_gradient,
    smoothstep,
)
from .hydrostatics import StaticProfile
from .params import ScalingParams

RHO_FLOOR = 1.0e-12
VACUUM_CUT = 1.0e-10


class DataError(ValueError):
    """Initial data violate a structural requirement (e.g. positivity)."""


class SolverFailure(RuntimeError):
    """The update produced an inadmissible state; carries the last state."""

    def __init__(self, message: str, state: "PrimitiveState"):
        super().__init__(message)
        self.state = state


@dataclass
class PrimitiveState:
    """Conservative fields at one time level."""

    rho: np.ndarray
    mom: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def validate(self) -> None:
        for name, f in (("rho", self.rho), ("mom", self.mom), ("q", self.q)):
            if not np.all(np.isfinite(f)):
                raise SolverFailure(f"non-finite entries in {name} at t={self.t}", self)
        if np.any(self.rho < 0.0) or np.any(self.q < 0.0):
            raise SolverFailure(f"negative density data at t={self.t}", self)

    @property
    def velocity(self) -> np.ndarray:
        return self.mom / np.maximum(self.rho, RHO_FLOOR)

    @property
    def theta(self) -> np.ndarray:
        """Potential temperature, set to one on the vacuum set."""
        th = self.q / np.maximum(self.rho, RHO_FLOOR)
        return np.where(self.rho < VACUUM_CUT, 1.0, th)

    def copy(self) -> "PrimitiveState":
        return PrimitiveState(self.rho.copy(), self.mom.copy(), self.q.copy(), self.t)


@dataclass(frozen=True)
class GaussianBump:
    """Radial Gaussian amplitude * exp(-((r - center)/width)**2)."""

    amplitude: float
    width: float
    center: float = 0.0

    @classmethod
    def from_mass(cls, mass: float, width: float) -> "GaussianBump":
        amplitude = mass / (np.pi**1.5 * width**3)
        return cls(amplitude=amplitude, width=width)

    def field(self, grid: Grid) -> np.ndarray:
        r = grid.radii
        return self.amplitude * np.exp(-(((r - self.center) / self.width) ** 2))

    def radial_derivative(self, grid: Grid) -> np.ndarray:
        r = grid.radii
        return self.field(grid) * (-2.0 * (r - self.center) / self.width**2)


ZERO_BUMP = GaussianBump(amplitude=0.0, width=1.0)


@dataclass(frozen=True)
class IllPreparedData:
    """Ill-prepared initial perturbations and their limit profiles.

    The density and temperature perturbations are Gaussian bumps; the
    velocity is the gradient of a Gaussian potential, so it carries no
    weighted-solenoidal part and feeds the acoustic field only.  The
    optional eps_extra bump is added to the density perturbation scaled
    by eps, modelling a family that converges to its limit as eps -> 0.
    """

    rho1: GaussianBump = ZERO_BUMP
    vel_potential: GaussianBump = ZERO_BUMP
    theta2: GaussianBump = ZERO_BUMP
    rho1_eps_extra: GaussianBump = ZERO_BUMP
    linf_bound: float | None = None
    l1_bound: float | None = None

    def rho1_field(self, grid: Grid, eps: float) -> np.ndarray:
        return self.rho1.field(grid) + eps * self.rho1_eps_extra.field(grid)

    def u0_field(self, grid: Grid, eps: float) -> np.ndarray:
        del eps
        return self.vel_potential.radial_derivative(grid)

    def theta2_field(self, grid: Grid, eps: float) -> np.ndarray:
        del eps
        return self.theta2.field(grid)

    def limit_fields(self, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.rho1.field(grid),
            self.vel_potential.radial_derivative(grid),
            self.theta2.field(grid),
        )

    def check_bounds(self, grid: Grid, eps: float) -> None:
        if self.linf_bound is None and self.l1_bound is None:
            return
        from .grids import lp_norm

        f = self.rho1_field(grid, eps)
        if self.linf_bound is not None and lp_norm(f, np.inf, grid) > self.linf_bound:
            raise DataError("rho1 family exceeds its declared L^inf bound")
        if self.l1_bound is not None and lp_norm(f, 1.0, grid) > self.l1_bound:
            raise DataError("rho1 family exceeds its declared L^1 bound")


def init_ill_prepared(
    data: IllPreparedData, prof: StaticProfile, params: ScalingParams, grid: Grid
) -> PrimitiveState:
    """Assemble rho = rho0 + eps rho1, u = u0, Theta = 1 + eps^2 theta2."""
    eps = params.eps
    rho = prof.rho0 + eps * data.rho1_field(grid, eps)
    if np.any(rho <= 0.0):
        raise DataError("initial density is not positive everywhere")
    theta = 1.0 + eps**2 * data.theta2_field(grid, eps)
    if np.any(theta <= 0.0):
        raise DataError("initial potential temperature is not positive")
    u = data.u0_field(grid, eps)
    state = PrimitiveState(rho=rho, mom=rho * u, q=rho * theta, t=0.0)
    state.validate()
    return state


class PrimitiveAux:
    """Static per-run data: face interpolants, sponge, ghost state."""

    def __init__(self, prof: StaticProfile, params: ScalingParams, grid: Grid):
        if not grid.radial:
            raise DomainError("the primitive solver runs in radial mode")
        self.prof = prof
        self.params = params
        self.grid = grid
        gamma = params.gamma
        h = grid.h

        ghost_r = grid.r_max + 0.5 * h
        self.rho0_ghost = float(prof.rho0_at(np.array([ghost_r]))[0])

        p0 = prof.rho0**gamma
        p0_ghost = self.rho0_ghost**gamma
        self.p0_faces = self._pressure_faces(p0, p0_ghost)
        self.grad_p0 = np.diff(self.p0_faces) / h

        span = grid.r_max - grid.r_sponge
        self.sigma = (5.0 / params.horizon) * smoothstep(
            (grid.centers - grid.r_sponge) / span
        )
        self.visc_coef = params.eps**params.alpha * (4.0 * params.mu / 3.0 + params.lam)
        self.face_r2 = grid.faces**2

    def _pressure_faces(self, p_cells: np.ndarray, p_ghost: float) -> np.ndarray:
        out = np.empty(self.grid.n + 1)
        out[0] = p_cells[0]  # mirror ghost across r = 0
        out[1:-1] = 0.5 * (p_cells[:-1] + p_cells[1:])
        out[-1] = 0.5 * (p_cells[-1] + p_ghost)
        return out

    def pressure_gradient(self, q: np.ndarray) -> np.ndarray:
        gamma = self.params.gamma
        p = q**gamma
        pf = self._pressure_faces(p, self.rho0_ghost**gamma)
        return np.diff(pf) / self.grid.h


def sound_speed(state: PrimitiveState, params: ScalingParams) -> np.ndarray:
    """Scaled characteristic speed sqrt(p'(q) Theta) / eps."""
    gamma = params.gamma
    q = np.maximum(state.q, 0.0)
    c2 = gamma * q ** (gamma - 1.0) * state.theta
    return np.sqrt(np.maximum(c2, 0.0)) / params.eps


def suggested_dt(
    state: PrimitiveState,
    prof: StaticProfile,
    params: ScalingParams,
    grid: Grid,
    cfl: float = 0.4,
    aux: PrimitiveAux | None = None,
) -> float:
    aux = aux or PrimitiveAux(prof, params, grid)
    speed = np.abs(state.velocity) + sound_speed(state, params)
    dt_hyp = cfl * grid.h / float(np.max(speed))
    rho_min = float(np.min(np.maximum(state.rho, RHO_FLOOR)))
    dt_visc = (
        cfl * 0.5 * grid.h**2 * rho_min / aux.visc_coef if aux.visc_coef > 0 else np.inf
    )
    sig_max = float(np.max(aux.sigma))
    dt_sponge = 0.5 / sig_max if sig_max > 0 else np.inf
    return min(dt_hyp, dt_visc, dt_sponge)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _muscl_edges(dev: np.ndarray, ghost: float) -> tuple[np.ndarray, np.ndarray]:
    """Limited left/right deviation states at the faces 1..n."""
    ext = np.concatenate([dev[:1], dev, [ghost]])  # mirror inner, static outer
    slopes = _minmod(ext[1:-1] - ext[:-2], ext[2:] - ext[1:-1])
    left = dev + 0.5 * slopes
    right = np.append(dev[1:] - 0.5 * slopes[1:], ghost)
    return left, right


def _rusanov_fluxes(state, aux, muscl: bool = False):
    """Face fluxes for (rho, mom, q); dissipation acts on static deviations.

    Returns arrays of length n+1; the face at r = 0 carries no flux.  With
    muscl, deviations from the static state are reconstructed with limited
    slopes around the face-interpolated background, which keeps the static
    state an exact fixed point while reducing the convective dissipation.
    """
    prof, params, grid = aux.prof, aux.params, aux.grid
    u = state.velocity
    c = sound_speed(state, params)

    rho0 = prof.rho0
    if muscl:
        rho0_face = 0.5 * (rho0 + np.append(rho0[1:], aux.rho0_ghost))
        drho_l, drho_r = _muscl_edges(state.rho - rho0, 0.0)
        dmom_l, dmom_r = _muscl_edges(state.mom, 0.0)
        dq_l, dq_r = _muscl_edges(state.q - rho0, 0.0)
        rho_l, rho_r = rho0_face + drho_l, rho0_face + drho_r
        mom_l, mom_r = dmom_l, dmom_r
        q_l, q_r = rho0_face + dq_l, rho0_face + dq_r
        u_l = mom_l / np.maximum(rho_l, RHO_FLOOR)
        u_r = mom_r / np.maximum(rho_r, RHO_FLOOR)
        gamma = params.gamma
        c_l = np.sqrt(np.maximum(gamma * q_l**gamma / np.maximum(rho_l, RHO_FLOOR), 0.0)) / params.eps
        c_r = np.sqrt(np.maximum(gamma * q_r**gamma / np.maximum(rho_r, RHO_FLOOR), 0.0)) / params.eps
    else:
        # left/right states for the faces 1..n; face n sees the static ghost
        mom_l, mom_r = state.mom, np.append(state.mom[1:], 0.0)
        q_l, q_r = state.q, np.append(state.q[1:], aux.rho0_ghost)
        u_l, u_r = u, np.append(u[1:], 0.0)
        c_l, c_r = c, np.append(c[1:], sound_speed_scalar(aux.rho0_ghost, params))
        drho_l = state.rho - rho0
        drho_r = np.append(state.rho[1:] - rho0[1:], 0.0)
        dq_l = state.q - rho0
        dq_r = np.append(state.q[1:] - rho0[1:], 0.0)

    a = np.maximum(np.abs(u_l) + c_l, np.abs(u_r) + c_r)

    f_rho = 0.5 * (mom_l + mom_r) - 0.5 * a * (drho_r - drho_l)
    f_mom = 0.5 * (mom_l * u_l + mom_r * u_r) - 0.5 * a * (mom_r - mom_l)
    f_q = 0.5 * (q_l * u_l + q_r * u_r) - 0.5 * a * (dq_r - dq_l)

    zeros = np.zeros(1)
    return (
        np.concatenate([zeros, f_rho]),
        np.concatenate([zeros, f_mom]),
        np.concatenate([zeros, f_q]),
    )


def sound_speed_scalar(q0: float, params: ScalingParams) -> float:
    gamma = params.gamma
    return float(np.sqrt(gamma * q0 ** (gamma - 1.0)) / params.eps)


def _face_divergence(u: np.ndarray, grid: Grid) -> np.ndarray:
    """div u at faces: (r^2 u) difference of the neighbor cells.

    The origin face uses the odd-symmetry limit 3 u'(0); the outer face
    copies its neighbor.
    """
    r = grid.centers
    out = np.empty(grid.n + 1)
    r2u = r * r * u
    out[1:-1] = np.diff(r2u) / (grid.h * grid.faces[1:-1] ** 2)
    out[0] = 3.0 * u[0] / r[0]
    out[-1] = out[-2]
    return out


def step_primitive(
    state: PrimitiveState,
    prof: StaticProfile,
    params: ScalingParams,
    dt: float,
    grid: Grid,
    aux: PrimitiveAux | None = None,
    cfl: float = 0.4,
    muscl: bool = False,
) -> PrimitiveState:
    """One conservative forward-Euler update; rejects oversized steps."""
    aux = aux or PrimitiveAux(prof, params, grid)
    limit = suggested_dt(state, prof, params, grid, cfl=cfl, aux=aux)
    if dt > limit * (1.0 + 1.0e-9):
        raise CFLError(f"dt = {dt:.3e} exceeds the stability limit {limit:.3e}")

    w = grid.weights
    area = grid.face_areas
    f_rho, f_mom, f_q = _rusanov_fluxes(state, aux, muscl=muscl)

    rho_new = state.rho - dt * np.diff(area * f_rho) / w
    mom_new = state.mom - dt * np.diff(area * f_mom) / w
    q_new = state.q - dt * np.diff(area * f_q) / w

    # pressure/gravity pairing: gravity is (rho/rho0) times the static
    # pressure gradient, so the static state cancels exactly
    eps2 = params.eps**2
    mom_new -= (dt / eps2) * (
        aux.pressure_gradient(state.q) - (state.rho / prof.rho0) * aux.grad_p0
    )

    # viscous force (4/3 + lam) eps^alpha d/dr (div u)
    if aux.visc_coef > 0.0:
        d_faces = _face_divergence(state.velocity, grid)
        mom_new += dt * aux.visc_coef * np.diff(d_faces) / grid.h

    # sponge relaxation toward the static far field
    sig = aux.sigma
    rho_new -= dt * sig * (state.rho - prof.rho0)
    mom_new -= dt * sig * state.mom
    q_new -= dt * sig * (state.q - prof.rho0)

    out = PrimitiveState(rho=rho_new, mom=mom_new, q=q_new, t=state.t + dt)
    if np.any(out.rho <= 0.0) or np.any(out.q <= 0.0):
        raise SolverFailure(f"nonpositive density after update at t={out.t}", out)
    if not (np.all(np.isfinite(out.rho)) and np.all(np.isfinite(out.mom)) and np.all(np.isfinite(out.q))):
        raise SolverFailure(f"non-finite state after update at t={out.t}", out)
    return out


def enthalpy(z: np.ndarray, gamma: float) -> np.ndarray:
    """H(Z) = Z**gamma / (gamma - 1), the pressure potential."""
    return z**gamma / (gamma - 1.0)


def total_energy(
    state: PrimitiveState, prof: StaticProfile, params: ScalingParams, grid: Grid
) -> float:
    """Scaled total energy relative to the static state.

    E = int [ rho |u|^2 / 2 + (H(q) - H'(rho0)(rho - rho0) - H(rho0)) / eps^2 ].
    """
    gamma = params.gamma
    kin = 0.5 * state.rho * state.velocity**2
    dh0 = gamma * prof.rho0 ** (gamma - 1.0) / (gamma - 1.0)
    bracket = enthalpy(state.q, gamma) - dh0 * (state.rho - prof.rho0) - enthalpy(
        prof.rho0, gamma
    )
    return integrate(kin + bracket / params.eps**2, grid)


def viscous_dissipation_rate(
    state: PrimitiveState, params: ScalingParams, grid: Grid
) -> float:
    """eps^alpha int S(grad u) : grad u for the radial velocity field."""
    u = state.velocity
    du = radial_gradient(u, grid, parity="odd")
    d = radial_divergence(u, grid)
    dens = params.mu * (4.0 / 3.0) * (du - u / grid.centers) ** 2 + params.lam * d**2
    return params.eps**params.alpha * integrate(dens, grid)


@dataclass
class PrimitiveTrajectory:
    """Sampled states plus per-run conservation and energy bookkeeping."""

    grid: Grid
    prof: StaticProfile
    params: ScalingParams
    times: np.ndarray
    states: list
    energy: np.ndarray
    dissipation: np.ndarray  # cumulative viscous dissipation at samples
    mass: np.ndarray
    q_mass: np.ndarray
    sponge_mass: np.ndarray  # cumulative sponge mass sink at samples
    sponge_q: np.ndarray
    outer_mass_flux: np.ndarray  # cumulative convective outflow at samples
    outer_q_flux: np.ndarray
    n3_integral: np.ndarray  # cumulative int ||sqrt(rho/rho0) u||^2_{L2(K)} dt
    k_radius: float
    step_count: int = 0


def run_primitive(
    init: PrimitiveState,
    prof: StaticProfile,
    params: ScalingParams,
    grid: Grid,
    sample_times: np.ndarray,
    k_radius: float | None = None,
    cfl: float = 0.4,
    keep_states: bool = True,
    muscl: bool = False,
) -> PrimitiveTrajectory:
    """Advance to every sample time, accumulating diagnostics each step."""
    init.validate()
    aux = PrimitiveAux(prof, params, grid)
    sample_times = np.asarray(sample_times, dtype=float)
    if sample_times[0] != 0.0 or np.any(np.diff(sample_times) <= 0.0):
        raise DomainError("sample times must start at 0 and increase")
    k_radius = grid.default_compact_radius if k_radius is None else k_radius
    k_mask = grid.ball_mask(k_radius)
    w_k = grid.weights[k_mask]
    rho0_k = prof.rho0[k_mask]
    area_out = grid.face_areas[-1]

    state = init.copy()
    states = [state.copy()] if keep_states else [state.copy()]
    energies = [total_energy(state, prof, params, grid)]
    masses = [integrate(state.rho, grid)]
    q_masses = [integrate(state.q, grid)]
    diss = [0.0]
    sp_mass = [0.0]
    sp_q = [0.0]
    out_mass = [0.0]
    out_q = [0.0]
    n3 = [0.0]

    diss_acc = sp_mass_acc = sp_q_acc = out_mass_acc = out_q_acc = n3_acc = 0.0
    nsteps = 0
    sig_w = aux.sigma * grid.weights

    def n3_rate(s: PrimitiveState) -> float:
        u = s.velocity[k_mask]
        return float(np.sum(s.rho[k_mask] / rho0_k * u * u * w_k))

    for target in sample_times[1:]:
        while state.t < target - 1.0e-13:
            dt = min(suggested_dt(state, prof, params, grid, cfl=cfl, aux=aux), target - state.t)
            rate_d0 = viscous_dissipation_rate(state, params, grid)
            rate_n0 = n3_rate(state)
            f_rho, _, f_q = _rusanov_fluxes(state, aux, muscl=muscl)
            out_mass_acc += dt * area_out * f_rho[-1]
            out_q_acc += dt * area_out * f_q[-1]
            sp_mass_acc += dt * float(np.sum(sig_w * (state.rho - prof.rho0)))
            sp_q_acc += dt * float(np.sum(sig_w * (state.q - prof.rho0)))
            state = step_primitive(state, prof, params, dt, grid, aux=aux, cfl=cfl, muscl=muscl)
            diss_acc += 0.5 * dt * (rate_d0 + viscous_dissipation_rate(state, params, grid))
            n3_acc += 0.5 * dt * (rate_n0 + n3_rate(state))
            nsteps += 1
        if keep_states:
            states.append(state.copy())
        energies.append(total_energy(state, prof, params, grid))
        masses.append(integrate(state.rho, grid))
        q_masses.append(integrate(state.q, grid))
        diss.append(diss_acc)
        sp_mass.append(sp_mass_acc)
        sp_q.append(sp_q_acc)
        out_mass.append(out_mass_acc)
        out_q.append(out_q_acc)
        n3.append(n3_acc)

    return PrimitiveTrajectory(
        grid=grid,
        prof=prof,
        params=params,
        times=sample_times,
        states=states,
        energy=np.array(energies),
        dissipation=np.array(diss),
        mass=np.array(masses),
        q_mass=np.array(q_masses),
        sponge_mass=np.array(sp_mass),
        sponge_q=np.array(sp_q),
        outer_mass_flux=np.array(out_mass),
        outer_q_flux=np.array(out_q),
        n3_integral=np.array(n3),
        k_radius=k_radius,
        step_count=nsteps,
    )


CHECKPOINT_MAGIC = "anelastic-lab-checkpoint v1"


def write_checkpoint(
    path: str, state: PrimitiveState, grid: Grid, params: ScalingParams
) -> None:
    """Binary state dump with a small text header describing grid and params."""
    header = "\n".join(
        [
            CHECKPOINT_MAGIC,
            f"geometry {grid.geometry}",
            f"n {grid.n}",
            f"r_max {grid.r_max:.17g}",
            f"r_sponge {grid.r_sponge:.17g}",
            f"eps {params.eps:.17g}",
            f"alpha {params.alpha:.17g}",
            f"gamma {params.gamma:.17g}",
            f"lam {params.lam:.17g}",
            f"mu {params.mu:.17g}",
            f"rho_bar {params.rho_bar:.17g}",
            f"time {state.t:.17g}",
            "fields rho mom q",
        ]
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii") + b"\n\x00")
        for f in (state.rho, state.mom, state.q):
            fh.write(np.ascontiguousarray(f, dtype=np.float64).tobytes())


def read_checkpoint(path: str) -> tuple[PrimitiveState, dict]:
    """Load a checkpoint; returns the state and the parsed header entries."""
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.index(b"\x00")
    header_lines = blob[:sep].decode("ascii").strip().split("\n")
    if header_lines[0] != CHECKPOINT_MAGIC:
        raise DataError(f"not a checkpoint file: {path}")
    meta = {}
    for line in header_lines[1:]:
        key, _, value = line.partition(" ")
        meta[key] = value
    n = int(meta["n"])
    count = n if meta["geometry"] == "radial" else n**3
    raw = np.frombuffer(blob[sep + 1 :], dtype=np.float64)
    if raw.size != 3 * count:
        raise DataError("checkpoint payload size does not match its header")
    shape = (n,) if meta["geometry"] == "radial" else (n, n, n)
    rho, mom, q = (raw[i * count : (i + 1) * count].reshape(shape).copy() for i in range(3))
    state = PrimitiveState(rho=rho, mom=mom, q=q, t=float(meta["time"]))
    return state, meta


@dataclass(frozen=True)
class CappedPower:
    """b(Y) = Y**power up to cap, blended C^1 to a constant beyond.

    The derivative is continuous with compact support, as the renormalized
    transport identity requires.
    """

    power: float
    cap: float
    blend_width: float

    def __post_init__(self) -> None:
        if self.cap <= 0.0 or self.blend_width <= 0.0:
            raise DomainError("cap and blend_width must be positive")

    def b(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        yc = np.minimum(y, self.cap)
        base = yc**self.power
        slope = self.power * self.cap ** (self.power - 1.0)
        x = np.clip((y - self.cap) / self.blend_width, 0.0, 1.0)
        return base + slope * self.blend_width * x * (1.0 - 0.5 * x)

    def db(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        inside = self.power * np.minimum(y, self.cap) ** (self.power - 1.0)
        slope = self.power * self.cap ** (self.power - 1.0)
        x = (y - self.cap) / self.blend_width
        blend = slope * np.clip(1.0 - x, 0.0, 1.0)
        return np.where(y <= self.cap, inside, np.where(x < 1.0, blend, 0.0))


@dataclass
class RenormReport:
    """Renormalized-transport defect series and its normalization."""

    mid_times: np.ndarray
    defects: np.ndarray
    max_defect: float


def renorm_check(traj: PrimitiveTrajectory, b_fam: CappedPower, grid: Grid) -> RenormReport:
    """Measure the renormalized transport identity for b along a run.

    Between consecutive samples the report compares d/dt int b(q) against
    int (b - b' q) div u, charging the sponge sink and the outer boundary
    convection to the budget; the residue is normalized by int |b|.
    """
    prof, params = traj.prof, traj.params
    aux = PrimitiveAux(prof, params, grid)
    sig_w = aux.sigma * grid.weights
    area_out = grid.face_areas[-1]

    def pieces(state: PrimitiveState):
        bq = b_fam.b(state.q)
        dbq = b_fam.db(state.q)
        u = state.velocity
        total_b = integrate(bq, grid)
        rhs = integrate((bq - dbq * state.q) * radial_divergence(u, grid), grid)
        sponge = float(np.sum(sig_w * dbq * (state.q - prof.rho0)))
        q_face = 0.5 * (state.q[-1] + aux.rho0_ghost)
        flux = area_out * float(b_fam.b(np.array([q_face]))[0]) * 0.5 * u[-1]
        norm = integrate(np.abs(bq), grid)
        return total_b, rhs, sponge, flux, norm

    vals = [pieces(s) for s in traj.states]
    mids, defects = [], []
    for k in range(len(traj.times) - 1):
        dt = traj.times[k + 1] - traj.times[k]
        b0, rhs0, sp0, fl0, n0 = vals[k]
        b1, rhs1, sp1, fl1, n1 = vals[k + 1]
        rate = (b1 - b0) / dt
        defect = rate + 0.5 * (sp0 + sp1) + 0.5 * (fl0 + fl1) - 0.5 * (rhs0 + rhs1)
        defects.append(abs(defect) / max(0.5 * (n0 + n1), 1.0e-300))
        mids.append(0.5 * (traj.times[k] + traj.times[k + 1]))
    defects = np.array(defects)
    return RenormReport(
        mid_times=np.array(mids), defects=defects, max_defect=float(np.max(defects))
    )
