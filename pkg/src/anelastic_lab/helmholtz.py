"""Weighted Helmholtz decomposition v = H[v] + grad(Phi).

The potential solves div(rho0 grad Phi) = div(rho0 v) with decay at the
outer boundary (homogeneous Dirichlet there) and regularity at the
origin.  Everything is discretized in flux form with rho0 at faces by
harmonic means, which keeps the weighted Laplacian symmetric positive
definite in the quadrature inner product; the same operator is reused by
the acoustic module.  Linear solves use Jacobi-preconditioned conjugate
gradients with a tolerance fixed ahead of every physics tolerance.

In radial mode every admissible field is a discrete gradient, so H[v]
vanishes identically up to the solver tolerance; the geometry admits no
nontrivial weighted-solenoidal radial field.  The cartesian mode stores
vector fields on a staggered (face) layout, which makes the discrete
divergence exactly the negative adjoint of the discrete gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grids import DomainError, FieldAlignmentError, Grid

DEFAULT_TOL = 1.0e-10


class SolverError(RuntimeError):
    """Iterative solve failed to reach its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class StaggeredVector:
    """Cartesian vector field on cell faces (MAC layout)."""

    fx: np.ndarray
    fy: np.ndarray
    fz: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "StaggeredVector":
        return cls(
            np.zeros((n + 1, n, n)), np.zeros((n, n + 1, n)), np.zeros((n, n, n + 1))
        )

    def copy(self) -> "StaggeredVector":
        return StaggeredVector(self.fx.copy(), self.fy.copy(), self.fz.copy())

    def axpy(self, a: float, other: "StaggeredVector") -> "StaggeredVector":
        return StaggeredVector(
            self.fx + a * other.fx, self.fy + a * other.fy, self.fz + a * other.fz
        )

    def scale(self, a: float) -> "StaggeredVector":
        return StaggeredVector(a * self.fx, a * self.fy, a * self.fz)

    def max_abs(self) -> float:
        return max(
            float(np.max(np.abs(self.fx))),
            float(np.max(np.abs(self.fy))),
            float(np.max(np.abs(self.fz))),
        )


class RadialWeightedLaplacian:
    """Flux-form div(rho0 grad .) on a radial grid, Dirichlet at r_max.

    Face 0 sits at r = 0 and carries no flux (zero area); the outer face
    enforces Phi(r_max) = 0 through a half-cell gradient.
    """

    def __init__(self, grid: Grid, rho0_faces: np.ndarray):
        if not grid.radial:
            raise DomainError("RadialWeightedLaplacian needs a radial grid")
        self.grid = grid
        self.rho_faces = rho0_faces
        h = grid.h
        cond = grid.face_areas * rho0_faces / h
        cond[0] = 0.0
        cond[-1] *= 2.0  # half-cell Dirichlet closure at the outer face
        self.cond = cond
        self.weights = grid.weights

    def apply(self, phi: np.ndarray) -> np.ndarray:
        self.grid.check_aligned(phi)
        flux = np.empty(self.grid.n + 1)
        flux[0] = 0.0
        flux[1:-1] = self.cond[1:-1] * (phi[1:] - phi[:-1])
        flux[-1] = self.cond[-1] * (0.0 - phi[-1])
        return (flux[1:] - flux[:-1]) / self.weights

    def diagonal(self) -> np.ndarray:
        return -(self.cond[:-1] + self.cond[1:]) / self.weights

    def gradient_faces(self, phi: np.ndarray) -> np.ndarray:
        """Discrete grad(Phi) on faces, with the Dirichlet outer closure."""
        h = self.grid.h
        out = np.empty(self.grid.n + 1)
        out[0] = 0.0
        out[1:-1] = (phi[1:] - phi[:-1]) / h
        out[-1] = -2.0 * phi[-1] / h
        return out

    def divergence_faces(self, u_faces: np.ndarray) -> np.ndarray:
        """(1/w) difference of area-weighted face values (plain divergence)."""
        au = self.grid.face_areas * u_faces
        return (au[1:] - au[:-1]) / self.weights

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Face measure making the divergence the negative gradient adjoint."""
        w = self.grid.face_areas * self.grid.h
        w[-1] *= 0.5
        return w

    def dense(self) -> np.ndarray:
        n = self.grid.n
        mat = np.zeros((n, n))
        c, w = self.cond, self.weights
        idx = np.arange(n)
        mat[idx, idx] = -(c[:-1] + c[1:]) / w
        mat[idx[:-1], idx[:-1] + 1] = c[1:-1] / w[:-1]
        mat[idx[1:], idx[1:] - 1] = c[1:-1] / w[1:]
        return mat


class CartesianWeightedLaplacian:
    """Flux-form div(rho0 grad .) on the cartesian box, Dirichlet outside."""

    def __init__(self, grid: Grid, rho0: np.ndarray):
        if grid.radial:
            raise DomainError("CartesianWeightedLaplacian needs a cartesian grid")
        grid.check_aligned(rho0)
        self.grid = grid
        self.rho0 = rho0
        self.h = grid.h
        self.rho_faces = tuple(self._face_rho(rho0, axis) for axis in range(3))
        # boundary faces get the half-cell factor in the conductance; the
        # face density itself stays the plain cell value
        self.cond = []
        for axis in range(3):
            c = self.rho_faces[axis] / self.h**2
            first = [slice(None)] * 3
            first[axis] = 0
            last = [slice(None)] * 3
            last[axis] = -1
            c[tuple(first)] *= 2.0
            c[tuple(last)] *= 2.0
            self.cond.append(c)
        self.cond = tuple(self.cond)

    def _face_rho(self, rho: np.ndarray, axis: int) -> np.ndarray:
        n = self.grid.n
        shape = [n, n, n]
        shape[axis] = n + 1
        out = np.empty(shape)
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        inner = [slice(None)] * 3
        lo[axis] = slice(0, n - 1)
        hi[axis] = slice(1, n)
        inner[axis] = slice(1, n)
        a = rho[tuple(lo)]
        b = rho[tuple(hi)]
        out[tuple(inner)] = 2.0 * a * b / (a + b)
        first = [slice(None)] * 3
        last = [slice(None)] * 3
        first[axis] = 0
        last[axis] = n
        cell_first = [slice(None)] * 3
        cell_last = [slice(None)] * 3
        cell_first[axis] = 0
        cell_last[axis] = n - 1
        out[tuple(first)] = rho[tuple(cell_first)]
        out[tuple(last)] = rho[tuple(cell_last)]
        return out

    def apply(self, phi: np.ndarray) -> np.ndarray:
        self.grid.check_aligned(phi)
        out = np.zeros_like(phi)
        for axis in range(3):
            c = self.cond[axis]
            dphi = np.diff(phi, axis=axis)
            inner = [slice(None)] * 3
            inner[axis] = slice(1, -1)
            flux = np.zeros_like(c)
            flux[tuple(inner)] = c[tuple(inner)] * dphi
            first = [slice(None)] * 3
            first[axis] = 0
            last = [slice(None)] * 3
            last[axis] = -1
            cell_first = [slice(None)] * 3
            cell_first[axis] = 0
            cell_last = [slice(None)] * 3
            cell_last[axis] = -1
            flux[tuple(first)] = c[tuple(first)] * phi[tuple(cell_first)]
            flux[tuple(last)] = c[tuple(last)] * (0.0 - phi[tuple(cell_last)])
            out += np.diff(flux, axis=axis)
        return out

    def diagonal(self) -> np.ndarray:
        out = np.zeros(self.grid.field_shape)
        for axis in range(3):
            c = self.cond[axis]
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            out -= c[tuple(lo)] + c[tuple(hi)]
        return out

    def gradient(self, phi: np.ndarray) -> StaggeredVector:
        parts = []
        for axis in range(3):
            c = self.cond[axis]
            g = np.zeros_like(c)
            inner = [slice(None)] * 3
            inner[axis] = slice(1, -1)
            g[tuple(inner)] = np.diff(phi, axis=axis) / self.h
            first = [slice(None)] * 3
            first[axis] = 0
            last = [slice(None)] * 3
            last[axis] = -1
            cell_first = [slice(None)] * 3
            cell_first[axis] = 0
            cell_last = [slice(None)] * 3
            cell_last[axis] = -1
            g[tuple(first)] = 2.0 * phi[tuple(cell_first)] / self.h
            g[tuple(last)] = -2.0 * phi[tuple(cell_last)] / self.h
            parts.append(g)
        return StaggeredVector(*parts)

    def rho_times(self, v: StaggeredVector) -> StaggeredVector:
        return StaggeredVector(
            self.rho_faces[0] * v.fx,
            self.rho_faces[1] * v.fy,
            self.rho_faces[2] * v.fz,
        )

    def divergence(self, v: StaggeredVector) -> np.ndarray:
        """Compact divergence of a face field (values outside the box are 0)."""
        out = np.diff(v.fx, axis=0) / self.h
        out += np.diff(v.fy, axis=1) / self.h
        out += np.diff(v.fz, axis=2) / self.h
        return out

    def face_weights(self, axis: int) -> np.ndarray:
        w = np.full(self.cond[axis].shape, self.h**3)
        first = [slice(None)] * 3
        first[axis] = 0
        last = [slice(None)] * 3
        last[axis] = -1
        w[tuple(first)] = 0.5 * self.h**3
        w[tuple(last)] = 0.5 * self.h**3
        return w

    def face_inner(self, a: StaggeredVector, b: StaggeredVector) -> float:
        total = 0.0
        for axis, (pa, pb) in enumerate(((a.fx, b.fx), (a.fy, b.fy), (a.fz, b.fz))):
            total += float(np.sum(pa * pb * self.face_weights(axis)))
        return total


@dataclass
class WeightedPoissonProblem:
    """div(rho0 grad Phi) = rhs with decay at r_max and regularity at r = 0."""

    rho0: np.ndarray
    rhs: np.ndarray
    tol: float = DEFAULT_TOL
    max_iterations: int = 50_000


def _cg(apply_a, rhs, dot, diag, tol, maxiter):
    """Preconditioned CG for SPD apply_a; returns (x, relative residual, iters)."""
    rhs_norm = np.sqrt(dot(rhs, rhs))
    x = np.zeros_like(rhs)
    if rhs_norm == 0.0:
        return x, 0.0, 0
    r = rhs.copy()
    z = r / diag
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, maxiter + 1):
        ap = apply_a(p)
        alpha = rz / dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        res = np.sqrt(dot(r, r)) / rhs_norm
        if res <= tol:
            return x, res, it
        z = r / diag
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, res, maxiter


def _solve(op, rhs: np.ndarray, tol: float, maxiter: int) -> np.ndarray:
    """Solve op.apply(phi) = rhs (op negative definite) by CG on -op."""
    grid = op.grid
    w = grid.weights

    def dot(a, b):
        return float(np.sum(a * b * w))

    diag = -op.diagonal()
    phi, res, it = _cg(lambda v: -op.apply(v), -rhs, dot, diag, tol, maxiter)
    if res > tol:
        raise SolverError(
            f"weighted Poisson solve stalled at relative residual {res:.3e} "
            f"after {it} iterations",
            residual=res,
            iterations=it,
        )
    return phi


def solve_weighted_poisson(problem: WeightedPoissonProblem, grid: Grid) -> np.ndarray:
    """Solve the weighted Poisson problem; Phi is pinned to 0 at the boundary."""
    grid.check_aligned(problem.rho0, problem.rhs)
    if np.any(problem.rho0 <= 0.0):
        raise DomainError("coefficient rho0 must be strictly positive")
    if not np.all(np.isfinite(problem.rhs)):
        raise FieldAlignmentError("right-hand side contains non-finite entries")
    op = _operator_for(grid, problem.rho0)
    return _solve(op, problem.rhs, problem.tol, problem.max_iterations)


def _operator_for(grid: Grid, rho0: np.ndarray):
    if grid.radial:
        r = rho0
        faces = np.empty(grid.n + 1)
        faces[1:-1] = 2.0 * r[:-1] * r[1:] / (r[:-1] + r[1:])
        faces[0] = r[0]
        faces[-1] = r[-1]
        return RadialWeightedLaplacian(grid, faces)
    return CartesianWeightedLaplacian(grid, rho0)


def centers_to_faces(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Interpolate a cell-centered radial vector component to faces.

    The face at r = 0 vanishes by odd symmetry; the outer face averages
    against a zero far-field ghost.
    """
    grid.check_aligned(v)
    out = np.empty(grid.n + 1)
    out[0] = 0.0
    out[1:-1] = 0.5 * (v[:-1] + v[1:])
    out[-1] = 0.5 * v[-1]
    return out


def faces_to_centers(v_faces: np.ndarray, grid: Grid) -> np.ndarray:
    return 0.5 * (v_faces[:-1] + v_faces[1:])


def project_radial_faces(
    v_faces: np.ndarray, prof, tol: float = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted projection of a radial face field; returns (H[v], Phi).

    The radial geometry admits no nontrivial weighted-solenoidal field, so
    H[v] is zero up to the solver tolerance.
    """
    grid = prof.grid
    op = RadialWeightedLaplacian(grid, prof.face_rho0)
    rhs = (np.diff(grid.face_areas * prof.face_rho0 * v_faces)) / grid.weights
    phi = _solve(op, rhs, tol, 50_000)
    h_faces = v_faces - op.gradient_faces(phi)
    return h_faces, phi


def project(v, prof, grid: Grid, tol: float = DEFAULT_TOL):
    """Weighted Helmholtz projection; returns (H[v], Phi).

    Radial mode takes and returns cell-centered radial components;
    cartesian mode takes and returns StaggeredVector fields.
    """
    if grid.radial:
        grid.check_aligned(v)
        v_faces = centers_to_faces(v, grid)
        h_faces, phi = project_radial_faces(v_faces, prof, tol)
        return faces_to_centers(h_faces, grid), phi
    op = CartesianWeightedLaplacian(grid, prof.rho0)
    rhs = op.divergence(op.rho_times(v))
    phi = _solve(op, rhs, tol, 50_000)
    grad = op.gradient(phi)
    return v.axpy(-1.0, grad), phi
