"""Spectral transform helpers shared by the propagator and the guidance law.

Axis boundary types:

* ``periodic`` — plain FFT; modes are the usual fftfreq lattice.
* ``dirichlet`` — hard wall at both axis ends.  The stored grid holds the
  left wall (point 0, amplitude identically zero) and ``n - 1`` interior
  points; the right wall is the unstored endpoint.  Transforms are DST-I
  over the interior slice, which diagonalizes the kinetic term with
  eigenfunctions sin(k*pi*(x-lo)/extent), k = 1..n-1.

Only axis 0 may be dirichlet: the single hard-walled degree of freedom in
this package is the system axis, while environment axes are periodic.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .errors import SchemeError
from .grids import Grid

_WORKERS = 1


def set_workers(n: int) -> None:
    """Set the thread count handed to scipy.fft (results are bitwise
    independent of this value; it only affects speed)."""
    global _WORKERS
    _WORKERS = max(1, int(n))


def get_workers() -> int:
    return _WORKERS


def boundaries_for_scheme(scheme: str, dims: int) -> tuple[str, ...]:
    if scheme == "split_step_periodic":
        return ("periodic",) * dims
    if scheme == "sine_spectral_dirichlet":
        return ("dirichlet",) + ("periodic",) * (dims - 1)
    raise SchemeError(f"unknown scheme {scheme!r}")


def periodic_wavenumbers(n: int, dx: float) -> np.ndarray:
    return 2 * np.pi * sfft.fftfreq(n, dx)


def dirichlet_wavenumbers(n: int, extent: float) -> np.ndarray:
    """Mode wavenumbers k*pi/extent for k = 1..n-1 (n-1 interior modes)."""
    return np.pi * np.arange(1, n) / extent


def mode_wavenumbers(grid: Grid, boundaries) -> tuple[np.ndarray, ...]:
    out = []
    for ax, b in zip(grid.axes, boundaries):
        if b == "periodic":
            out.append(periodic_wavenumbers(ax.n, ax.dx))
        elif b == "dirichlet":
            out.append(dirichlet_wavenumbers(ax.n, ax.extent))
        else:
            raise SchemeError(f"unknown boundary {b!r}")
    return tuple(out)


def kinetic_energies(grid: Grid, boundaries, hbar: float, masses) -> np.ndarray:
    """Kinetic eigenvalues hbar^2 k^2 / (2 m) on the mode lattice."""
    ks = mode_wavenumbers(grid, boundaries)
    if grid.dims == 1:
        return hbar**2 * ks[0] ** 2 / (2.0 * masses[0])
    ex = hbar**2 * ks[0] ** 2 / (2.0 * masses[0])
    ey = hbar**2 * ks[1] ** 2 / (2.0 * masses[1])
    return ex[:, None] + ey[None, :]


def to_modes(values: np.ndarray, boundaries) -> np.ndarray:
    """Forward transform to the kinetic eigenbasis.

    Dirichlet axes drop the wall row (index 0) and return n-1 mode rows.
    """
    out = values
    for axis, b in enumerate(boundaries):
        if b == "dirichlet":
            if axis != 0:
                raise SchemeError("dirichlet boundaries supported on axis 0 only")
            out = sfft.dst(out[1:, ...], type=1, axis=0, norm="ortho",
                           workers=_WORKERS)
        else:
            out = sfft.fft(out, axis=axis, norm="ortho", workers=_WORKERS)
    return out


def from_modes(coeffs: np.ndarray, boundaries, shape) -> np.ndarray:
    """Inverse of :func:`to_modes`; restores the zero wall row."""
    out = coeffs
    for axis in reversed(range(len(boundaries))):
        b = boundaries[axis]
        if b == "dirichlet":
            interior = sfft.idst(out, type=1, axis=0, norm="ortho",
                                 workers=_WORKERS)
            full = np.zeros(shape, dtype=np.complex128)
            full[1:, ...] = interior
            out = full
        else:
            out = sfft.ifft(out, axis=axis, norm="ortho", workers=_WORKERS)
    return np.ascontiguousarray(out)


def gradient(values: np.ndarray, grid: Grid, boundaries) -> tuple[np.ndarray, ...]:
    """Spectral gradient, one array per axis.

    Periodic axes differentiate with ik in Fourier space.  The dirichlet
    axis differentiates the odd periodic extension (period 2*extent), which
    is exact for states in the sine basis.
    """
    grads = []
    for axis, (ax, b) in enumerate(zip(grid.axes, boundaries)):
        if b == "periodic":
            k = periodic_wavenumbers(ax.n, ax.dx)
            kshape = [1] * values.ndim
            kshape[axis] = ax.n
            spec = sfft.fft(values, axis=axis, workers=_WORKERS)
            spec *= 1j * k.reshape(kshape)
            grads.append(sfft.ifft(spec, axis=axis, workers=_WORKERS))
        else:
            if axis != 0:
                raise SchemeError("dirichlet boundaries supported on axis 0 only")
            n = ax.n
            ext_shape = (2 * n,) + values.shape[1:]
            ext = np.zeros(ext_shape, dtype=np.complex128)
            ext[:n, ...] = values
            ext[n + 1:, ...] = -values[:0:-1, ...]
            k = periodic_wavenumbers(2 * n, ax.dx)
            kshape = [1] * values.ndim
            kshape[0] = 2 * n
            spec = sfft.fft(ext, axis=0, workers=_WORKERS)
            spec *= 1j * k.reshape(kshape)
            dext = sfft.ifft(spec, axis=0, workers=_WORKERS)
            grads.append(np.ascontiguousarray(dext[:n, ...]))
    return tuple(grads)


def kinetic_apply(values: np.ndarray, grid: Grid, boundaries, hbar: float,
                  masses) -> np.ndarray:
    """Apply the kinetic operator (for energy expectations)."""
    energies = kinetic_energies(grid, boundaries, hbar, masses)
    return from_modes(energies * to_modes(values, boundaries), boundaries,
                      grid.shape)
