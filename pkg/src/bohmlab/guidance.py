"""Velocity-field evaluation and trajectory transport.

The law of motion is first order: v = (hbar/m) Im(grad psi / psi), one
component per configuration-space axis.  Trajectories are integrated with
classical RK4 through the field obtained by bilinear interpolation in
space and linear interpolation in time between stored snapshots (in the
mean-energy co-rotating frame, see propagators).

Near nodes the field is singular; where |psi(q)|^2 < eps_node * max|psi|^2
the velocity is clamped in magnitude and the evaluation flagged.  The
integrator also halves its step (up to 8 times) whenever the guard fires
or a step would move a particle more than one cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import spectral
from .errors import CommensurabilityError, TrajectoryExitError
from .grids import Grid, WaveFunction, density
from .propagators import Timeline, Window

MAX_HALVINGS = 8


# ---------------------------------------------------------------------------
# Interpolation


def _axis_terms(ax, boundary, x, grad_mode):
    """Neighbor indices and weights for linear interpolation along one axis.

    Past the last stored point a dirichlet axis has a zero wall node for
    amplitudes and a clamped value for gradients (the wall-adjacent cell
    carries negligible equilibrium mass either way).
    """
    f = (x - ax.lo) / ax.dx
    f = np.clip(f, 0.0, ax.n - 1e-9)
    i0 = f.astype(np.int64)
    w1 = f - i0
    i1 = i0 + 1
    if boundary == "periodic":
        i1 = np.where(i1 >= ax.n, 0, i1)
        s1 = 1.0
    else:
        over = i1 >= ax.n
        if grad_mode:
            i1 = np.where(over, ax.n - 1, i1)
            s1 = 1.0
        else:
            i1 = np.where(over, 0, i1)
            s1 = np.where(over, 0.0, 1.0)
    return i0, i1, w1, s1


def _gather(values, grid: Grid, boundaries, qs, grad_mode=False):
    """Bilinear interpolation of a grid array at points qs (m, dims)."""
    if grid.dims == 1:
        i0, i1, w, s1 = _axis_terms(grid.axes[0], boundaries[0], qs[:, 0], grad_mode)
        return values[i0] * (1.0 - w) + values[i1] * (s1 * w)
    ax0, ax1 = grid.axes
    j0, j1, u, su = _axis_terms(ax0, boundaries[0], qs[:, 0], grad_mode)
    k0, k1, v, sv = _axis_terms(ax1, boundaries[1], qs[:, 1], grad_mode)
    w00 = (1.0 - u) * (1.0 - v)
    w01 = (1.0 - u) * (sv * v)
    w10 = (su * u) * (1.0 - v)
    w11 = (su * u) * (sv * v)
    return (
        values[j0, k0] * w00
        + values[j0, k1] * w01
        + values[j1, k0] * w10
        + values[j1, k1] * w11
    )


class _WindowField:
    """Space-time interpolated guidance field over one snapshot window."""

    def __init__(self, window: Window, eps_node: float, v_max: float):
        self.w = window
        self.eps_node = eps_node
        self.v_max = v_max
        self.dxs = np.array([ax.dx for ax in window.grid.axes])
        self.coef = np.array([window.hbar / m for m in window.masses])
        self.floor = eps_node * window.max_abs2

    def velocity(self, qs, t):
        """Velocities (m, dims) and node-guard flags (m,) at time t."""
        w = self.w
        span = w.t1 - w.t0
        a = 0.0 if span == 0 else np.clip((t - w.t0) / span, 0.0, 1.0)
        psi = (1.0 - a) * _gather(w.values0, w.grid, w.boundaries, qs) + (
            a * w.rot
        ) * _gather(w.values1, w.grid, w.boundaries, qs)
        dens = np.abs(psi) ** 2
        flagged = dens < self.floor
        denom = np.where(dens > 0.0, psi, 1.0)
        v = np.empty_like(qs)
        for d in range(qs.shape[1]):
            g = (1.0 - a) * _gather(
                w.grads0[d], w.grid, w.boundaries, qs, grad_mode=True
            ) + (a * w.rot) * _gather(
                w.grads1[d], w.grid, w.boundaries, qs, grad_mode=True
            )
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                v[:, d] = self.coef[d] * np.imag(g / denom)
        v = np.nan_to_num(v, nan=0.0, posinf=self.v_max, neginf=-self.v_max)
        if np.any(flagged):
            speed = np.sqrt(np.sum(v[flagged] ** 2, axis=1))
            scale = np.where(speed > self.v_max, self.v_max / np.maximum(speed, 1e-300), 1.0)
            v[flagged] *= scale[:, None]
        return v, flagged


def velocity_field(
    psi: WaveFunction,
    q,
    hbar: float = 1.0,
    masses=None,
    eps_node: float = 1e-12,
    v_max: Optional[float] = None,
    boundaries=None,
):
    """Guidance velocity at configuration point(s) q for a single state.

    Returns ``(v, flagged)``; for a single point v has shape (dims,).
    ``boundaries`` defaults to periodic on every axis; pass
    ``("dirichlet",)`` (etc.) for hard-wall states so the spectral gradient
    respects the walls.
    """
    grid = psi.grid
    if boundaries is None:
        boundaries = ("periodic",) * grid.dims
    if masses is None:
        masses = (1.0,) * grid.dims
    qs = np.asarray(q, dtype=float).reshape(-1, grid.dims)
    if not grid.contains(qs):
        raise ValueError("configuration point outside the grid")
    grads = spectral.gradient(psi.values, grid, boundaries)
    mx = float(np.max(np.abs(psi.values) ** 2))
    window = Window(
        index=0,
        t0=0.0,
        t1=0.0,
        values0=psi.values,
        values1=psi.values,
        grads0=grads,
        grads1=grads,
        rot=1.0,
        grid=grid,
        boundaries=tuple(boundaries),
        hbar=hbar,
        masses=tuple(masses),
        max_abs2=mx,
    )
    clamp = v_max if v_max is not None else np.inf
    field = _WindowField(window, eps_node, clamp)
    v, flagged = field.velocity(qs, 0.0)
    single = np.asarray(q).ndim <= 1
    if single:
        return v[0], bool(flagged[0])
    return v, flagged


# ---------------------------------------------------------------------------
# Trajectory containers


@dataclass
class Trajectory:
    """Time-stamped samples of one particle's configuration."""

    id: int
    times: np.ndarray
    positions: np.ndarray  # (n_samples, dims)
    velocities: np.ndarray
    regularized: np.ndarray  # node guard engaged at the sample


@dataclass
class Ensemble:
    """Trajectories sharing one time axis, plus the provenance needed to
    reproduce them (seed, driving timeline identifier)."""

    times: np.ndarray
    positions: np.ndarray  # (n_traj, n_samples, dims)
    velocities: np.ndarray
    regularized: np.ndarray  # (n_traj, n_samples)
    seed: int
    psi_ref: str
    node_flag_rate: float = 0.0

    @property
    def n_traj(self) -> int:
        return self.positions.shape[0]

    @property
    def dims(self) -> int:
        return self.positions.shape[2]

    def trajectories(self) -> list[Trajectory]:
        return [
            Trajectory(
                id=i,
                times=self.times,
                positions=self.positions[i],
                velocities=self.velocities[i],
                regularized=self.regularized[i],
            )
            for i in range(self.n_traj)
        ]

    def sample_index(self, t: float) -> int:
        idx = np.nonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))[0]
        if idx.size == 0:
            raise KeyError(f"time {t} is not a sampled instant")
        return int(idx[0])


# ---------------------------------------------------------------------------
# RK4 through the interpolated field


def _rk4_batch(field: _WindowField, qs, t, h, dxs):
    v1, f1 = field.velocity(qs, t)
    v2, f2 = field.velocity(qs + (0.5 * h) * v1, t + 0.5 * h)
    v3, f3 = field.velocity(qs + (0.5 * h) * v2, t + 0.5 * h)
    v4, f4 = field.velocity(qs + h * v3, t + h)
    qn = qs + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    flagged = f1 | f2 | f3 | f4
    vmax = np.max(np.abs(np.stack([v1, v2, v3, v4])), axis=0)
    cfl = np.any(vmax * h > dxs[None, :], axis=1)
    return qn, flagged, cfl


def _advance_refined(field, qs, t, h, dxs, depth):
    """One step of size h for all rows, recursively halving wherever the
    node guard or the one-cell-per-step bound trips."""
    qn, flagged, cfl = _rk4_batch(field, qs, t, h, dxs)
    trouble = flagged | cfl
    if depth >= MAX_HALVINGS or not np.any(trouble):
        return qn, flagged
    sub = qs[trouble]
    q_mid, fa = _advance_refined(field, sub, t, 0.5 * h, dxs, depth + 1)
    q_end, fb = _advance_refined(field, q_mid, t + 0.5 * h, 0.5 * h, dxs, depth + 1)
    qn[trouble] = q_end
    flagged[trouble] = fa | fb
    return qn, flagged


def integrate_ensemble(
    windows: Iterable[Window],
    q0: np.ndarray,
    dt_traj: float,
    eps_node: float = 1e-12,
    seed: int = 0,
    psi_ref: str = "",
    on_sample: Optional[Callable] = None,
) -> Ensemble:
    """Transport an ensemble through a window stream.

    ``q0`` has shape (n_traj, dims).  Samples are recorded at snapshot
    boundaries; ``on_sample(index, t, qs, vs, flags, window)`` is invoked at
    each of them with the current window still in scope (window.values1 is
    the state at the sample).  dt_traj must divide every window span.
    """
    qs = np.array(q0, dtype=float)
    if qs.ndim == 1:
        qs = qs[:, None]
    times, pos, vel, reg = [], [], [], []
    flag_evals = 0
    total_evals = 0
    grid = None
    first = True
    v_max = None
    for w in windows:
        if first:
            grid = w.grid
            dxs = np.array([ax.dx for ax in grid.axes])
            v_max = float(np.min(dxs)) / dt_traj
            field0 = _WindowField(w, eps_node, v_max)
            v0, f0 = field0.velocity(qs, w.t0)
            times.append(w.t0)
            pos.append(qs.copy())
            vel.append(v0)
            reg.append(f0)
            if on_sample is not None:
                on_sample(w.index - 1, w.t0, qs, v0, f0, w)
            first = False
        span = w.t1 - w.t0
        n_sub = int(round(span / dt_traj))
        if n_sub < 1 or abs(span - n_sub * dt_traj) > 1e-9 * max(span, dt_traj):
            raise CommensurabilityError(
                f"dt_traj={dt_traj} does not divide the snapshot interval {span}"
            )
        h = span / n_sub
        field = _WindowField(w, eps_node, v_max)
        for j in range(n_sub):
            t = w.t0 + j * h
            qs, stepped_flags = _advance_refined(field, qs, t, h, dxs, 0)
            flag_evals += int(np.count_nonzero(stepped_flags))
            total_evals += qs.shape[0]
            if not grid.contains(qs):
                bad = ~np.array(
                    [grid.contains(qs[i]) for i in range(qs.shape[0])]
                )
                i = int(np.nonzero(bad)[0][0])
                raise TrajectoryExitError(i, t + h, qs[i].tolist())
        v1, f1 = field.velocity(qs, w.t1)
        times.append(w.t1)
        pos.append(qs.copy())
        vel.append(v1)
        reg.append(f1)
        if on_sample is not None:
            on_sample(w.index, w.t1, qs, v1, f1, w)
    if grid is None:
        raise ValueError("integrate_ensemble needs at least one window")
    return Ensemble(
        times=np.asarray(times),
        positions=np.transpose(np.stack(pos), (1, 0, 2)),
        velocities=np.transpose(np.stack(vel), (1, 0, 2)),
        regularized=np.transpose(np.stack(reg), (1, 0)),
        seed=seed,
        psi_ref=psi_ref,
        node_flag_rate=(flag_evals / total_evals) if total_evals else 0.0,
    )


def integrate_trajectory(
    timeline: Timeline, q0, dt_traj: float, eps_node: float = 1e-12
) -> Trajectory:
    """Integrate a single trajectory through a stored timeline."""
    q0 = np.asarray(q0, dtype=float).reshape(1, -1)
    ens = integrate_ensemble(timeline.windows(), q0, dt_traj, eps_node=eps_node)
    return ens.trajectories()[0]


# ---------------------------------------------------------------------------
# Quantum-equilibrium sampling


def substream(seed: int, *path: int) -> np.random.Generator:
    """Deterministic RNG substream keyed by (seed, path...); trajectory i
    uses substream(seed, i), so results cannot depend on worker order."""
    return np.random.default_rng([int(seed)] + [int(p) for p in path])


def _inverse_cdf_cells(cell_masses: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map uniforms to fractional cell coordinates by inverse CDF with
    piecewise-constant density inside cells."""
    cum = np.concatenate([[0.0], np.cumsum(cell_masses)])
    total = cum[-1]
    targets = u * total
    j = np.searchsorted(cum, targets, side="right") - 1
    j = np.clip(j, 0, cell_masses.size - 1)
    mass_j = cell_masses[j]
    frac = np.where(mass_j > 0, (targets - cum[j]) / np.maximum(mass_j, 1e-300), 0.5)
    return j + np.clip(frac, 0.0, 1.0 - 1e-12)


def sample_quantum_equilibrium(psi: WaveFunction, n: int, seed: int) -> np.ndarray:
    """Draw n configuration points from |psi|^2, shape (n, dims).

    1D uses inverse-CDF directly; 2D samples axis 0 from the marginal and
    axis 1 from the conditional slice at the sampled column.  Each point
    draws from its own (seed, id) substream.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rho = density(psi)
    grid = psi.grid
    us = np.array([substream(seed, i).uniform(size=grid.dims) for i in range(n)])
    ax0 = grid.axes[0]
    if grid.dims == 1:
        cells = _inverse_cdf_cells(rho * ax0.dx, us[:, 0])
        return (ax0.lo + cells * ax0.dx)[:, None]
    ax1 = grid.axes[1]
    marginal = rho.sum(axis=1) * grid.dv
    cx = _inverse_cdf_cells(marginal, us[:, 0])
    x = ax0.lo + cx * ax0.dx
    cols = np.clip(cx.astype(np.int64), 0, ax0.n - 1)
    y = np.empty(n)
    for i in range(n):
        cy = _inverse_cdf_cells(rho[cols[i], :] * ax1.dx, us[i, 1:2])
        y[i] = ax1.lo + cy[0] * ax1.dx
    return np.column_stack([x, y])


# ---------------------------------------------------------------------------
# Distribution diagnostics


def grid_cdf(cell_density: np.ndarray, ax) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative distribution at cell edges for a sampled density."""
    masses = cell_density * ax.dx
    cum = np.concatenate([[0.0], np.cumsum(masses)])
    cum /= cum[-1]
    edges = ax.lo + ax.dx * np.arange(ax.n + 1)
    return edges, cum


def ks_distance(samples: np.ndarray, cell_density: np.ndarray, ax) -> float:
    """One-sample Kolmogorov-Smirnov distance against a grid density."""
    edges, cum = grid_cdf(cell_density, ax)
    s = np.sort(np.asarray(samples, dtype=float))
    f = np.interp(s, edges, cum)
    n = s.size
    i = np.arange(n)
    return float(max(np.max(f - i / n), np.max((i + 1) / n - f)))


def equivariance_check(ensemble: Ensemble, psi_t: WaveFunction, t: float):
    """KS distance between ensemble positions at t and |psi_t|^2.

    Returns a float in 1D and a per-axis array in 2D (marginals).
    """
    k = ensemble.sample_index(t)
    qs = ensemble.positions[:, k, :]
    rho = density(psi_t)
    grid = psi_t.grid
    if grid.dims == 1:
        return ks_distance(qs[:, 0], rho, grid.axes[0])
    out = []
    for d in range(2):
        marg = rho.sum(axis=1 - d) * grid.axes[1 - d].dx
        out.append(ks_distance(qs[:, d], marg, grid.axes[d]))
    return np.array(out)


def ordering_checks(ensemble: Ensemble) -> tuple[int, int]:
    """No-crossing audit for 1D ensembles.

    Sorts trajectories by initial position and counts adjacent-pair order
    inversions across all samples.  Returns (violations, checks); the
    first-order guidance law forbids any violation.
    """
    q = ensemble.positions[:, :, 0]
    order = np.argsort(q[:, 0], kind="stable")
    sorted_q = q[order]
    diffs = np.diff(sorted_q, axis=0)
    violations = int(np.count_nonzero(diffs < 0))
    checks = diffs.size
    return violations, checks
