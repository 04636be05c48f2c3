"""Grids, wavefunction storage, elementary states, and inner products.

Conventions used throughout the package:

* hbar = mass = 1 unless stated otherwise (overridable where it matters).
* A 1D axis with ``n`` points covers ``[lo, hi)``: point ``j`` sits at
  ``lo + j*dx`` with ``dx = (hi - lo)/n``.  The right endpoint is not
  stored; periodic transforms wrap there, hard walls place a zero node
  there.
* 2D grids are tensor products of two axes; arrays are indexed
  ``values[ix, iy]``.
* Amplitudes carry dimension length^(-dims/2) so that
  ``sum(|psi|^2) * dV == 1`` for a normalized state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, GridSpecError, ResolutionError


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Axis:
    """One uniformly spaced coordinate axis."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise GridSpecError(f"axis needs n >= 16, got n={self.n}")
        if not _is_power_of_two(self.n):
            raise GridSpecError(
                f"axis point count must be a power of two "
                f"(spectral transforms require it), got n={self.n}"
            )
        if not self.hi > self.lo:
            raise GridSpecError(f"axis needs hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def extent(self) -> float:
        return self.hi - self.lo

    @property
    def points(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.n)

    @property
    def nyquist(self) -> float:
        """Largest representable wavenumber, pi/dx."""
        return np.pi / self.dx


@dataclass(frozen=True)
class Grid:
    """A 1D or 2D rectangular grid (tensor product of axes)."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if len(self.axes) not in (1, 2):
            raise GridSpecError(f"grids are 1D or 2D, got {len(self.axes)} axes")

    @property
    def dims(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n for ax in self.axes)

    @property
    def dv(self) -> float:
        """Volume element (dx, or dx*dy)."""
        out = 1.0
        for ax in self.axes:
            out *= ax.dx
        return out

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcastable to ``shape``."""
        if self.dims == 1:
            return (self.axes[0].points,)
        x = self.axes[0].points[:, None]
        y = self.axes[1].points[None, :]
        return (x, y)

    def contains(self, q) -> bool:
        """True if configuration point(s) q lie inside [lo, hi) on every axis.

        Accepts a scalar (1D), a length-dims point, or an (m, dims) batch.
        """
        q = np.asarray(q, dtype=float).reshape(-1, self.dims)
        for d, ax in enumerate(self.axes):
            if np.any(q[:, d] < ax.lo) or np.any(q[:, d] >= ax.hi):
                return False
        return True


def make_grid(lo: float, hi: float, n: int) -> Grid:
    """Build a 1D grid on [lo, hi) with n (power of two, >= 16) points."""
    return Grid(axes=(Axis(float(lo), float(hi), int(n)),))


def tensor_grid(ax0: Grid, ax1: Grid) -> Grid:
    """Tensor product of two 1D grids: axis 0 indexes the first factor."""
    if ax0.dims != 1 or ax1.dims != 1:
        raise GridSpecError("tensor_grid takes two 1D grids")
    return Grid(axes=(ax0.axes[0], ax1.axes[0]))


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitude field on a grid.

    Amplitude arrays are frozen after construction; every operation
    returns a new instance, so values are safe to share across workers.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise GridMismatchError(
                f"amplitude shape {vals.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise ValueError("wavefunction amplitudes must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def dims(self) -> int:
        return self.grid.dims


@dataclass(frozen=True)
class Potential:
    """Real potential on a grid.

    ``infinite_well`` is represented by the Dirichlet boundary treatment in
    the propagator (walls at both ends of axis 0), never by large finite
    values; its sampled ``values`` are the interior potential (zero by
    default).
    """

    kind: str  # "free" | "infinite_well" | "harmonic" | "grid_sampled"
    grid: Grid
    values: np.ndarray = field(repr=False)
    well_size: Optional[float] = None
    omega: Optional[float] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise GridMismatchError("potential shape does not match grid")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def free_potential(grid: Grid) -> Potential:
    return Potential(kind="free", grid=grid, values=np.zeros(grid.shape))


def infinite_well(grid: Grid) -> Potential:
    """Hard-wall well spanning the full extent of axis 0.

    Walls sit at ``lo`` (grid point 0) and ``hi`` (the unstored right
    endpoint); amplitudes vanish identically at both.
    """
    return Potential(
        kind="infinite_well",
        grid=grid,
        values=np.zeros(grid.shape),
        well_size=grid.axes[0].extent,
    )


def harmonic_potential(grid: Grid, omega: float, center: float = 0.0,
                       mass: float = 1.0) -> Potential:
    if grid.dims != 1:
        raise GridSpecError("harmonic_potential is 1D; sample 2D potentials directly")
    x = grid.axes[0].points
    v = 0.5 * mass * omega**2 * (x - center) ** 2
    return Potential(kind="harmonic", grid=grid, values=v, omega=omega)


def sampled_potential(grid: Grid, values: np.ndarray) -> Potential:
    return Potential(kind="grid_sampled", grid=grid, values=values)


# ---------------------------------------------------------------------------
# Elementary states


def gaussian_packet(grid: Grid, x0: float, sigma: float, k0: float) -> WaveFunction:
    """Normalized Gaussian packet exp(-(x-x0)^2/(4 sigma^2)) * exp(i k0 x).

    ``sigma`` is the position-density standard deviation.  Guards reject
    under-resolved packets: silent aliasing would corrupt every downstream
    run, so these are errors rather than warnings.
    """
    if grid.dims != 1:
        raise GridSpecError("gaussian_packet builds 1D states; combine via product_state")
    ax = grid.axes[0]
    if not (ax.lo <= x0 < ax.hi):
        raise GridSpecError(f"packet center x0={x0} outside grid [{ax.lo}, {ax.hi})")
    if sigma < 4 * ax.dx:
        raise ResolutionError(
            f"sigma={sigma:g} under-resolved: the bound sigma >= 4*dx "
            f"= {4 * ax.dx:g} is violated"
        )
    if abs(k0) > 0.5 * ax.nyquist:
        raise ResolutionError(
            f"k0={k0:g} too fast: the bound |k0| <= pi/(2*dx) "
            f"= {0.5 * ax.nyquist:g} is violated"
        )
    x = ax.points
    vals = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2)) * np.exp(1j * k0 * x)
    return normalize(WaveFunction(grid=grid, values=vals))


def plane_wave(grid: Grid, k: float) -> WaveFunction:
    """Normalized grid-commensurate plane wave exp(i k x) (periodic axes)."""
    if grid.dims != 1:
        raise GridSpecError("plane_wave is 1D")
    x = grid.axes[0].points
    return normalize(WaveFunction(grid=grid, values=np.exp(1j * k * x)))


def well_eigenstate(grid: Grid, mode: int) -> WaveFunction:
    """Hard-wall well eigenstate sin(mode*pi*(x-lo)/L) on axis 0."""
    ax = grid.axes[0]
    if not 1 <= mode <= ax.n - 1:
        raise GridSpecError(f"well mode must be in [1, {ax.n - 1}]")
    x = ax.points
    vals = np.sin(mode * np.pi * (x - ax.lo) / ax.extent)
    if grid.dims == 2:
        vals = np.broadcast_to(vals[:, None], grid.shape).copy()
    return normalize(WaveFunction(grid=grid, values=vals))


def product_state(a: WaveFunction, b: WaveFunction) -> WaveFunction:
    """2D product state a(x)*b(y) from two 1D factors."""
    if a.dims != 1 or b.dims != 1:
        raise GridSpecError("product_state takes two 1D states")
    grid = tensor_grid(a.grid, b.grid)
    return WaveFunction(grid=grid, values=np.outer(a.values, b.values))


def superpose(coeffs, states) -> WaveFunction:
    """Normalized pointwise linear combination of same-grid states.

    For orthonormal inputs the post-normalization branch weights equal
    |c_i|^2 / sum|c|^2.
    """
    coeffs = [complex(c) for c in coeffs]
    states = list(states)
    if len(coeffs) != len(states) or not states:
        raise ValueError("superpose needs matching, nonempty coeffs and states")
    if all(c == 0 for c in coeffs):
        raise ValueError("superpose: all coefficients are zero")
    grid = states[0].grid
    for s in states[1:]:
        if s.grid != grid:
            raise GridMismatchError("superpose: states live on different grids")
    total = np.zeros(grid.shape, dtype=np.complex128)
    for c, s in zip(coeffs, states):
        total = total + c * s.values
    return normalize(WaveFunction(grid=grid, values=total))


# ---------------------------------------------------------------------------
# Quadrature and expectations


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """<a|b> as a Riemann sum (spectrally accurate for smooth states)."""
    if a.grid != b.grid:
        raise GridMismatchError("inner_product: states live on different grids")
    return complex(np.sum(np.conj(a.values) * b.values) * a.grid.dv)


def density(psi: WaveFunction) -> np.ndarray:
    """Position-space probability density |psi|^2."""
    return np.abs(psi.values) ** 2


def norm(psi: WaveFunction) -> float:
    return float(np.sqrt(np.sum(np.abs(psi.values) ** 2) * psi.grid.dv))


def normalize(psi: WaveFunction) -> WaveFunction:
    n = norm(psi)
    if n == 0.0:
        raise ValueError("cannot normalize the zero function")
    return WaveFunction(grid=psi.grid, values=psi.values / n)


def expectation_position(psi: WaveFunction):
    """Mean position; scalar in 1D, per-axis array in 2D."""
    rho = density(psi) * psi.grid.dv
    total = rho.sum()
    if psi.dims == 1:
        return float(np.sum(psi.grid.axes[0].points * rho) / total)
    x, y = psi.grid.meshes()
    return np.array([
        float(np.sum(x * rho) / total),
        float(np.sum(y * rho) / total),
    ])


def expectation_momentum(psi: WaveFunction):
    """Mean momentum, computed spectrally on the periodic extension."""
    if psi.dims == 1:
        ax = psi.grid.axes[0]
        k = 2 * np.pi * sfft.fftfreq(ax.n, ax.dx)
        spec = np.abs(sfft.fft(psi.values)) ** 2
        return float(np.sum(k * spec) / np.sum(spec))
    out = []
    for d, ax in enumerate(psi.grid.axes):
        k = 2 * np.pi * sfft.fftfreq(ax.n, ax.dx)
        spec = np.abs(sfft.fft(psi.values, axis=d)) ** 2
        marg = spec.sum(axis=1 - d)
        out.append(float(np.sum(k * marg) / np.sum(marg)))
    return np.array(out)
