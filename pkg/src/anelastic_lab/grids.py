"""Grids, quadrature, norms and the essential/residual splitting.

Two geometry modes are supported.  The radial mode stores fields as
functions of r = |x| on cells of width h = r_max / n with 3D spherical
quadrature weights 4*pi*r_i**2*h; vector fields carry the radial component
only.  The cartesian mode is a low resolution box [-r_max, r_max]**3 used
for experiments that need a nontrivial solenoidal velocity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class FieldAlignmentError(ValueError):
    """A field array does not match the grid it is used with."""


class DomainError(ValueError):
    """An argument lies outside the admissible domain of an operation."""


class CFLError(RuntimeError):
    """Requested time step exceeds a stability limit; the step is rejected."""


def smoothstep(x: np.ndarray | float) -> np.ndarray | float:
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 in between."""
    t = np.clip(x, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class Grid:
    """Uniform grid in radial-3D or cartesian-3D mode.

    In radial mode the n cells cover (0, r_max) with centers (i + 1/2) h,
    h = r_max / n.  In cartesian mode the n**3 cells cover the box of
    half-width r_max, so h = 2 r_max / n per axis.  r_sponge marks where
    the absorbing sponge of the evolution codes starts.
    """

    geometry: str
    n: int
    r_max: float
    r_sponge: float

    def __post_init__(self) -> None:
        if self.geometry not in ("radial", "cartesian"):
            raise DomainError(f"unknown geometry {self.geometry!r}")
        if self.n < 4:
            raise DomainError("need at least 4 cells per axis")
        if not 0.0 < self.r_sponge < self.r_max:
            raise DomainError("require 0 < r_sponge < r_max")

    @property
    def radial(self) -> bool:
        return self.geometry == "radial"

    @cached_property
    def h(self) -> float:
        if self.radial:
            return self.r_max / self.n
        return 2.0 * self.r_max / self.n

    @cached_property
    def field_shape(self) -> tuple[int, ...]:
        return (self.n,) if self.radial else (self.n, self.n, self.n)

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell-center coordinates along one axis (radial: along r)."""
        if self.radial:
            return (np.arange(self.n) + 0.5) * self.h
        return -self.r_max + (np.arange(self.n) + 0.5) * self.h

    @cached_property
    def radii(self) -> np.ndarray:
        """|x| at every cell center, shaped like a field."""
        if self.radial:
            return self.centers
        x = self.centers
        xx, yy, zz = np.meshgrid(x, x, x, indexing="ij")
        return np.sqrt(xx * xx + yy * yy + zz * zz)

    @cached_property
    def faces(self) -> np.ndarray:
        """Radial face positions i*h, i = 0..n (radial mode only)."""
        if not self.radial:
            raise DomainError("faces are a radial-mode concept")
        return np.arange(self.n + 1) * self.h

    @cached_property
    def face_areas(self) -> np.ndarray:
        if not self.radial:
            raise DomainError("face_areas are a radial-mode concept")
        return 4.0 * np.pi * self.faces**2

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weight of every cell (the discrete volume element)."""
        if self.radial:
            return 4.0 * np.pi * self.centers**2 * self.h
        w = np.empty(self.field_shape)
        w.fill(self.h**3)
        return w

    @cached_property
    def volume(self) -> float:
        return float(np.sum(self.weights))

    def check_aligned(self, *fields: np.ndarray) -> None:
        for f in fields:
            if np.shape(f) != self.field_shape:
                raise FieldAlignmentError(
                    f"field of shape {np.shape(f)} on grid of shape {self.field_shape}"
                )

    def ball_mask(self, radius: float) -> np.ndarray:
        return self.radii <= radius

    @property
    def default_compact_radius(self) -> float:
        """Radius of the default compact set K, kept away from the sponge."""
        return 0.5 * self.r_sponge


def integrate(f: np.ndarray, grid: Grid) -> float:
    """Quadrature of a scalar field over the truncated domain."""
    grid.check_aligned(f)
    return float(np.sum(f * grid.weights))


def lp_norm(f: np.ndarray, p: float, grid: Grid, radius: float | None = None) -> float:
    """L^p norm with the 3D volume measure, optionally restricted to a ball.

    p = np.inf gives the max norm over the (possibly restricted) cells.
    """
    grid.check_aligned(f)
    if p != np.inf and p < 1.0:
        raise DomainError(f"lp_norm needs p >= 1 or p = inf, got {p}")
    a = np.abs(f)
    w = grid.weights
    if radius is not None:
        mask = grid.ball_mask(radius)
        a = a[mask]
        w = np.broadcast_to(w, grid.field_shape)[mask]
    if p == np.inf:
        return float(np.max(a)) if a.size else 0.0
    return float(np.sum(a**p * w) ** (1.0 / p))


def weighted_inner(u: np.ndarray, v: np.ndarray, prof) -> float:
    """Scalar product with density rho0 / p'(rho0), the acoustic weight."""
    g = prof.grid
    g.check_aligned(u, v)
    return float(np.sum(u * v * prof.inner_weight * g.weights))


@dataclass(frozen=True)
class EssResCutoff:
    """C^1 cutoff chi(Y): one on [y_lo, y_hi], zero outside the widened band.

    y_lo and y_hi are half the minimum and twice the maximum of the static
    density; width sets the smoothstep transition on both sides.
    """

    y_lo: float
    y_hi: float
    width: float

    def __post_init__(self) -> None:
        if not 0.0 < self.y_lo < self.y_hi:
            raise DomainError("require 0 < y_lo < y_hi")
        if not 0.0 < self.width < self.y_lo:
            raise DomainError("transition width must lie in (0, y_lo)")

    @classmethod
    def from_profile(cls, prof, width_fraction: float = 0.1) -> "EssResCutoff":
        y_lo = 0.5 * prof.rho_min
        y_hi = 2.0 * prof.rho_max
        return cls(y_lo=y_lo, y_hi=y_hi, width=width_fraction * y_lo)

    def chi(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        up = smoothstep((y - (self.y_lo - self.width)) / self.width)
        down = smoothstep(((self.y_hi + self.width) - y) / self.width)
        # exactly one on the plateau regardless of rounding in the shoulders
        return np.where((y >= self.y_lo) & (y <= self.y_hi), 1.0, np.minimum(up, down))

    __call__ = chi


def ess_res_split(
    f: np.ndarray, weight: np.ndarray, cut: EssResCutoff
) -> tuple[np.ndarray, np.ndarray]:
    """Split f into the essential part chi(weight) f and the residual rest."""
    if np.shape(f) != np.shape(weight):
        raise FieldAlignmentError("field and weight shapes differ")
    chi = cut.chi(weight)
    ess = chi * f
    res = (1.0 - chi) * f
    return ess, res


def radial_gradient(f: np.ndarray, grid: Grid, parity: str = "even") -> np.ndarray:
    """Centered d/dr of a radial cell field.

    The ghost below r = 0 mirrors the first cell (even fields) or negates
    it (odd fields); the outer cell uses a one-sided difference.
    """
    if not grid.radial:
        raise DomainError("radial_gradient needs a radial grid")
    grid.check_aligned(f)
    sign = 1.0 if parity == "even" else -1.0
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * grid.h)
    out[0] = (f[1] - sign * f[0]) / (2.0 * grid.h)
    out[-1] = (f[-1] - f[-2]) / grid.h
    return out


def radial_divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    """(1/r^2) d/dr (r^2 v) of a radial (odd) vector component.

    Flux form over the exact shell volumes: wide stencils lose consistency
    near the origin where 1/r^2 amplifies their truncation error, while
    face fluxes over (4 pi / 3)(r_out^3 - r_in^3) reproduce linear fields
    exactly at every cell.
    """
    if not grid.radial:
        raise DomainError("radial_divergence needs a radial grid")
    grid.check_aligned(v)
    faces = grid.faces
    v_f = np.empty(grid.n + 1)
    v_f[0] = 0.0  # odd symmetry at the origin
    v_f[1:-1] = 0.5 * (v[:-1] + v[1:])
    v_f[-1] = 1.5 * v[-1] - 0.5 * v[-2]
    shell = (4.0 * np.pi / 3.0) * np.diff(faces**3)
    return np.diff(grid.face_areas * v_f) / shell
