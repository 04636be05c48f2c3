"""Unitary time evolution on periodic domains and in the hard-wall well.

The stepper is symmetric Strang splitting (half-kinetic, potential,
half-kinetic), spectrally exact in space.  With a vanishing potential the
splitting degenerates to a single kinetic phase, so hard-wall well runs are
exact in time as well.  Between stored snapshots the steps are fused
(adjacent half-kinetic phases combined), which halves the transform count
without changing the math.

Timelines expose "windows" — consecutive snapshot pairs plus cached
spectral gradients — which is the interface trajectory integration
consumes.  Window interpolation works in a frame co-rotating at the
conserved mean energy: the later snapshot is phase-aligned with the earlier
one before blending, so linear-in-time interpolation only has to resolve
the energy *spread*, not the absolute phase rotation.  Velocities are
invariant under the global phase, so this changes nothing physical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import spectral
from .errors import CommensurabilityError, GridMismatchError, SchemeError
from .grids import Grid, Potential, WaveFunction, norm

SCHEMES = ("split_step_periodic", "sine_spectral_dirichlet")


@dataclass(frozen=True)
class PropagatorSpec:
    """Scheme, step size, potential, and optional 2D coupling term."""

    scheme: str
    dt: float
    potential: Potential
    interaction: Optional[np.ndarray] = None
    hbar: float = 1.0
    masses: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SchemeError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise SchemeError(f"dt must be positive, got {self.dt}")
        dims = self.potential.grid.dims
        if self.potential.kind == "infinite_well" and self.scheme != "sine_spectral_dirichlet":
            raise SchemeError(
                "infinite_well potential requires the sine_spectral_dirichlet "
                "scheme (a periodic kinetic step would wrap packets around)"
            )
        if self.scheme == "sine_spectral_dirichlet" and self.potential.kind not in (
            "infinite_well",
            "grid_sampled",
        ):
            raise SchemeError(
                "sine_spectral_dirichlet expects a hard-wall well "
                "(or a sampled interior potential)"
            )
        if self.interaction is not None:
            if dims != 2:
                raise SchemeError("interaction terms require a 2D grid")
            if np.asarray(self.interaction).shape != self.potential.grid.shape:
                raise GridMismatchError("interaction not sampled on the potential grid")
        if len(self.masses) != dims:
            raise SchemeError(
                f"need one mass per axis: got {len(self.masses)} for dims={dims}"
            )

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    @property
    def boundaries(self) -> tuple[str, ...]:
        return spectral.boundaries_for_scheme(self.scheme, self.grid.dims)


class _Stepper:
    """Cached phase tables for repeated stepping under one spec."""

    def __init__(self, spec: PropagatorSpec):
        self.spec = spec
        self.grid = spec.grid
        self.boundaries = spec.boundaries
        self.energies = spectral.kinetic_energies(
            self.grid, self.boundaries, spec.hbar, spec.masses
        )
        v = np.asarray(spec.potential.values, dtype=np.float64)
        if spec.interaction is not None:
            v = v + np.asarray(spec.interaction, dtype=np.float64)
        self.pot = None if not np.any(v) else v
        self.half_kinetic = np.exp(-0.5j * self.energies * spec.dt / spec.hbar)
        self.full_kinetic = np.exp(-1.0j * self.energies * spec.dt / spec.hbar)
        self.pot_phase = (
            None if self.pot is None else np.exp(-1.0j * self.pot * spec.dt / spec.hbar)
        )

    def advance(self, values: np.ndarray, n_steps: int) -> np.ndarray:
        """Advance by n_steps with fused adjacent half-kinetic phases."""
        if n_steps == 0:
            return values.copy()
        b, shape = self.boundaries, self.grid.shape
        if self.pot_phase is None:
            modes = spectral.to_modes(values, b)
            phase = np.exp(
                -1.0j * self.energies * (n_steps * self.spec.dt) / self.spec.hbar
            )
            return spectral.from_modes(modes * phase, b, shape)
        modes = spectral.to_modes(values, b)
        modes = modes * self.half_kinetic
        out = spectral.from_modes(modes, b, shape)
        out *= self.pot_phase
        for _ in range(n_steps - 1):
            modes = spectral.to_modes(out, b)
            modes *= self.full_kinetic
            out = spectral.from_modes(modes, b, shape)
            out *= self.pot_phase
        modes = spectral.to_modes(out, b)
        modes *= self.half_kinetic
        return spectral.from_modes(modes, b, shape)


def _check_state(psi: WaveFunction, spec: PropagatorSpec) -> None:
    if psi.grid != spec.grid:
        raise GridMismatchError("state and propagator live on different grids")
    n = norm(psi)
    if abs(n - 1.0) > 1e-6:
        raise ValueError(f"propagation expects a normalized state (norm={n})")


def step(psi: WaveFunction, spec: PropagatorSpec) -> WaveFunction:
    """One symmetric split step (half-kinetic, potential, half-kinetic)."""
    _check_state(psi, spec)
    return WaveFunction(grid=psi.grid, values=_Stepper(spec).advance(psi.values, 1))


def energy_expectation(psi: WaveFunction, spec: PropagatorSpec) -> float:
    """<H> = <K> + <V> for the spec's Hamiltonian."""
    kin = spectral.kinetic_apply(
        psi.values, psi.grid, spec.boundaries, spec.hbar, spec.masses
    )
    e = np.sum(np.conj(psi.values) * kin).real * psi.grid.dv
    v = np.asarray(spec.potential.values, dtype=np.float64)
    if spec.interaction is not None:
        v = v + np.asarray(spec.interaction)
    e += float(np.sum(v * np.abs(psi.values) ** 2) * psi.grid.dv)
    return float(e)


def _step_count(t_final: float, dt: float) -> int:
    steps = t_final / dt
    n = int(round(steps))
    if n < 0 or abs(steps - n) > 1e-9 * max(1.0, abs(steps)):
        raise CommensurabilityError(
            f"t_final={t_final} is not an integer multiple of dt={dt}"
        )
    return n


def _snapshot_steps(n_steps: int, stride: int) -> list[int]:
    if stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    marks = list(range(0, n_steps + 1, stride))
    if marks[-1] != n_steps:
        marks.append(n_steps)
    return marks


@dataclass
class Window:
    """One snapshot-to-snapshot interval with cached field data.

    ``rot`` is the co-rotating phase factor applied to the later snapshot
    when blending; ``max_abs2`` feeds the node guard.
    """

    index: int
    t0: float
    t1: float
    values0: np.ndarray
    values1: np.ndarray
    grads0: tuple[np.ndarray, ...]
    grads1: tuple[np.ndarray, ...]
    rot: complex
    grid: Grid
    boundaries: tuple[str, ...]
    hbar: float
    masses: tuple[float, ...]
    max_abs2: float


class _WindowFactory:
    """Builds consecutive windows, reusing the shared snapshot gradients."""

    def __init__(self, grid, boundaries, hbar, masses, mean_energy):
        self.grid = grid
        self.boundaries = boundaries
        self.hbar = hbar
        self.masses = masses
        self.mean_energy = mean_energy
        self._prev = None  # (t, values, grads, max_abs2)

    def push(self, index: int, t: float, values: np.ndarray) -> Optional[Window]:
        grads = spectral.gradient(values, self.grid, self.boundaries)
        mx = float(np.max(np.abs(values) ** 2))
        prev, self._prev = self._prev, (t, values, grads, mx)
        if prev is None:
            return None
        t0, v0, g0, m0 = prev
        rot = complex(np.exp(1j * self.mean_energy * (t - t0) / self.hbar))
        return Window(
            index=index,
            t0=t0,
            t1=t,
            values0=v0,
            values1=values,
            grads0=g0,
            grads1=grads,
            rot=rot,
            grid=self.grid,
            boundaries=self.boundaries,
            hbar=self.hbar,
            masses=self.masses,
            max_abs2=max(m0, mx),
        )


@dataclass
class Timeline:
    """Stored snapshots of one propagation, a deterministic function of
    (initial state, spec, t_final, stride)."""

    spec: PropagatorSpec
    times: np.ndarray
    states: list[WaveFunction]
    mean_energy: float = field(default=0.0)

    @property
    def grid(self) -> Grid:
        return self.spec.grid

    @property
    def final(self) -> WaveFunction:
        return self.states[-1]

    def state_at(self, t: float) -> WaveFunction:
        idx = np.nonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))[0]
        if idx.size == 0:
            raise KeyError(f"time {t} is not a stored snapshot")
        return self.states[int(idx[0])]

    def windows(self) -> Iterator[Window]:
        factory = _WindowFactory(
            self.grid,
            self.spec.boundaries,
            self.spec.hbar,
            self.spec.masses,
            self.mean_energy,
        )
        for i, (t, st) in enumerate(zip(self.times, self.states)):
            w = factory.push(i, float(t), st.values)
            if w is not None:
                yield w


def evolve(
    psi: WaveFunction,
    spec: PropagatorSpec,
    t_final: float,
    snapshot_stride: int = 1,
) -> Timeline:
    """Propagate to t_final, storing snapshots every ``snapshot_stride``
    steps plus the final state."""
    _check_state(psi, spec)
    n_steps = _step_count(t_final, spec.dt)
    marks = _snapshot_steps(n_steps, snapshot_stride)
    stepper = _Stepper(spec)
    times = [0.0]
    states = [psi]
    values = psi.values
    for prev, mark in zip(marks[:-1], marks[1:]):
        values = stepper.advance(values, mark - prev)
        times.append(mark * spec.dt)
        states.append(WaveFunction(grid=psi.grid, values=values))
    return Timeline(
        spec=spec,
        times=np.asarray(times),
        states=states,
        mean_energy=energy_expectation(psi, spec),
    )


def evolve_2d_coupled(
    psi: WaveFunction,
    spec: PropagatorSpec,
    t_final: float,
    snapshot_stride: int = 1,
) -> Timeline:
    """2D system-environment evolution; the coupling rides in
    ``spec.interaction``."""
    if psi.dims != 2:
        raise SchemeError("evolve_2d_coupled requires a 2D state")
    return evolve(psi, spec, t_final, snapshot_stride)


def stream_windows(
    psi: WaveFunction,
    spec: PropagatorSpec,
    t_final: float,
    snapshot_stride: int,
    t_offset: float = 0.0,
    index_offset: int = 0,
    mean_energy: Optional[float] = None,
) -> Iterator[Window]:
    """Propagate while holding only two snapshots in memory.

    Yields the same Window sequence as ``evolve(...).windows()`` (identical
    numerics), which keeps large 2D runs within memory budget.  ``t_offset``
    and ``index_offset`` let callers stitch consecutive evolution phases
    into one window stream.
    """
    _check_state(psi, spec)
    n_steps = _step_count(t_final, spec.dt)
    marks = _snapshot_steps(n_steps, snapshot_stride)
    stepper = _Stepper(spec)
    if mean_energy is None:
        mean_energy = energy_expectation(psi, spec)
    factory = _WindowFactory(
        spec.grid, spec.boundaries, spec.hbar, spec.masses, mean_energy
    )
    factory.push(index_offset, t_offset, psi.values)
    values = psi.values
    for j, (prev, mark) in enumerate(zip(marks[:-1], marks[1:]), start=1):
        values = stepper.advance(values, mark - prev)
        w = factory.push(index_offset + j, t_offset + mark * spec.dt, values)
        if w is not None:
            yield w


# ---------------------------------------------------------------------------
# Diagnostics


def norm_drift(timeline: Timeline) -> float:
    """Max |norm - 1| over stored snapshots."""
    return max(abs(norm(s) - 1.0) for s in timeline.states)


def energy_series(timeline: Timeline) -> np.ndarray:
    return np.array([energy_expectation(s, timeline.spec) for s in timeline.states])


def energy_drift(timeline: Timeline) -> float:
    """Max relative drift of <H> over the timeline."""
    e = energy_series(timeline)
    scale = max(abs(e[0]), 1e-30)
    return float(np.max(np.abs(e - e[0])) / scale)


def ehrenfest_residual(timeline: Timeline) -> float:
    """Max |d<x>/dt - <p>/m| across snapshots, finite-differenced.

    A diagnostic for free/harmonic potentials, where the relation holds
    exactly in the continuum.  2D timelines are checked per axis.
    """
    from .grids import expectation_momentum, expectation_position

    xs = np.array([np.atleast_1d(expectation_position(s)) for s in timeline.states])
    ps = np.array([np.atleast_1d(expectation_momentum(s)) for s in timeline.states])
    ts = timeline.times
    masses = np.asarray(timeline.spec.masses)
    worst = 0.0
    for a in range(xs.shape[1]):
        dxdt = np.diff(xs[:, a]) / np.diff(ts)
        pmid = 0.5 * (ps[1:, a] + ps[:-1, a]) / masses[a]
        worst = max(worst, float(np.max(np.abs(dxdt - pmid))))
    return worst
