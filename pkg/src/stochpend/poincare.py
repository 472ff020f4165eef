"""Stroboscopic (Poincare) sections of the noise-driven pendulum.

The driving noise has period tau in law, so the natural discrete-time
picture samples orbits at t = 0 mod tau.  Sections are taken exactly on
trajectory grid nodes -- tau must be an integer multiple of the step h,
enforced rather than interpolated -- so section states are bitwise equal
to the corresponding trajectory states.

The empirical section statistics realize three qualitative claims about
the driven flow:

* section clouds from spread initial data fill the phase cylinder up to
  a remainder set by the coupling amplitudes (occupancy histograms);
* sections started at a stable averaged equilibrium concentrate on it as
  the amplitudes shrink (distance percentiles, common random numbers);
* points launched on an averaged separatrix disperse transversally with
  the amplitude (an exploratory probe; no quantitative splitting claim).

Distances live on the phase cylinder: angular difference modulo 2 pi
combined with the momentum difference in quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bifurcation import UNSTABLE, Equilibrium, find_equilibria
from .dynamics import (
    LambdaPoint,
    NoiseAmplitudes,
    PendulumParams,
    Trajectory,
    averaged_hamiltonian,
    effective_potential,
    exact_flow_ensemble,
    wrap_angle,
)
from .errors import ConfigError
from .rng import ensemble_seeds
from .rpsde import NoiseChannelConfig, PathGrid, grid_for_periods, simulate_pair_ensemble

PairConfig = tuple[NoiseChannelConfig, NoiseChannelConfig]


@dataclass
class StroboscopicSection:
    """Orbit states at integer multiples of the noise period."""

    tau: float
    times: np.ndarray
    theta: np.ndarray            # unwrapped, bitwise equal to trajectory states
    p: np.ndarray
    seed: int | None = None
    source: str | None = None

    @property
    def theta_wrapped(self) -> np.ndarray:
        return wrap_angle(self.theta)


@dataclass
class FillReport:
    """Occupancy of a phase-plane grid by section points."""

    counts: np.ndarray
    theta_edges: np.ndarray
    p_edges: np.ndarray
    occupancy: float
    band_edges: np.ndarray | None = None
    band_occupancy: np.ndarray | None = None

    def as_dict(self) -> dict:
        d = {"occupancy": self.occupancy}
        if self.band_edges is not None:
            d["band_edges"] = self.band_edges.tolist()
            d["band_occupancy"] = self.band_occupancy.tolist()
        return d


@dataclass
class ConcentrationReport:
    """Section-point spread around a stable averaged equilibrium."""

    equilibrium: Equilibrium
    sigma_levels: list[tuple[float, float]]
    radii: np.ndarray            # 95th-percentile cylinder distance per level
    ensemble_n: int
    horizon_periods: int

    def as_dict(self) -> dict:
        return {
            "equilibrium_theta": self.equilibrium.theta,
            "sigma_levels": [list(s) for s in self.sigma_levels],
            "radii": self.radii.tolist(),
            "ensemble_n": self.ensemble_n,
            "horizon_periods": self.horizon_periods,
        }


@dataclass
class SplittingReport:
    """Transverse dispersion of section points launched on a separatrix."""

    lam: LambdaPoint
    saddle: Equilibrium
    sigma_levels: list[tuple[float, float]]
    spreads: np.ndarray          # 95th percentile of |Hbar - Hbar_sep| per level
    n_points: int

    def as_dict(self) -> dict:
        return {
            "lambda": [self.lam.lambda1, self.lam.lambda2],
            "saddle_theta": self.saddle.theta,
            "sigma_levels": [list(s) for s in self.sigma_levels],
            "spreads": self.spreads.tolist(),
            "n_points": self.n_points,
        }


def section_stride(tau: float, grid: PathGrid, rtol: float = 1e-9) -> int:
    """Grid steps per period; errors unless tau is a multiple of h."""
    k = round(tau / grid.h)
    if k < 1 or abs(k * grid.h - tau) > rtol * max(1.0, tau):
        raise ConfigError(
            f"tau = {tau} is not an integer multiple of the step h = {grid.h}")
    return k


def stroboscope(traj: Trajectory, tau: float) -> StroboscopicSection:
    """Section of a trajectory at t = t0 + n tau, exactly on grid nodes."""
    k = section_stride(tau, traj.grid)
    times = traj.grid.times()[::k]
    return StroboscopicSection(tau=tau, times=times,
                               theta=traj.theta[::k], p=traj.p[::k])


def cylinder_distance(theta_a, p_a, theta_b, p_b) -> np.ndarray:
    """sqrt(dtheta^2 + dp^2) with the angular difference taken modulo 2 pi."""
    dtheta = wrap_angle(np.asarray(theta_a) - np.asarray(theta_b))
    dp = np.asarray(p_a) - np.asarray(p_b)
    return np.sqrt(dtheta**2 + dp**2)


def plane_fill_density(sections: list[StroboscopicSection],
                       theta_box: tuple[float, float] = (-np.pi, np.pi),
                       p_box: tuple[float, float] = (-3.0, 3.0),
                       grid: tuple[int, int] = (64, 64),
                       lam: LambdaPoint | None = None,
                       params: PendulumParams | None = None,
                       bands: int = 8) -> FillReport:
    """Fraction of phase-plane grid cells visited by section points.

    When ``lam`` and ``params`` are given, points are additionally binned
    by their averaged energy and the occupancy is reported per band, so
    fills at different coupling levels can be compared energy by energy.
    """
    if grid[0] < 16 or grid[1] < 16:
        raise ValueError("occupancy grid must be at least 16x16")
    if sections:
        theta = np.concatenate([s.theta_wrapped for s in sections])
        p = np.concatenate([s.p for s in sections])
    else:
        theta = np.empty(0)
        p = np.empty(0)
    theta_edges = np.linspace(*theta_box, grid[0] + 1)
    p_edges = np.linspace(*p_box, grid[1] + 1)
    counts, _, _ = np.histogram2d(theta, p, bins=[theta_edges, p_edges])
    occupancy = float((counts > 0).mean())
    band_edges = band_occ = None
    if lam is not None and params is not None and len(theta):
        energy = averaged_hamiltonian(theta, p, lam, params)
        band_edges = np.linspace(energy.min(), energy.max(), bands + 1)
        band_occ = np.empty(bands)
        for b in range(bands):
            hi_inc = energy <= band_edges[b + 1] if b == bands - 1 \
                else energy < band_edges[b + 1]
            sel = (energy >= band_edges[b]) & hi_inc
            cb, _, _ = np.histogram2d(theta[sel], p[sel],
                                      bins=[theta_edges, p_edges])
            band_occ[b] = (cb > 0).mean()
    return FillReport(counts=counts, theta_edges=theta_edges, p_edges=p_edges,
                      occupancy=occupancy, band_edges=band_edges,
                      band_occupancy=band_occ)


def _section_cloud(pair_config: PairConfig, amps: NoiseAmplitudes,
                   params: PendulumParams, theta0: np.ndarray, p0: np.ndarray,
                   seeds: np.ndarray, horizon_periods: int,
                   steps_per_period: int, burn_in_periods: int = 0,
                   chunk: int = 500) -> tuple[np.ndarray, np.ndarray]:
    """Section points (theta, p) for an ensemble; shape (n_sections, m)."""
    cfg1, cfg2 = pair_config
    tau = cfg1.drift.tau
    total = burn_in_periods + horizon_periods
    full_grid = grid_for_periods(tau, total, steps_per_period)
    start = burn_in_periods * steps_per_period
    sub_grid = PathGrid(t0=full_grid.t0 + start * full_grid.h,
                        h=full_grid.h, n=full_grid.n - start)
    m = len(seeds)
    n_sections = horizon_periods + 1
    out_theta = np.empty((n_sections, m))
    out_p = np.empty((n_sections, m))
    for lo in range(0, m, chunk):
        sel = seeds[lo:lo + chunk]
        x1, x2 = simulate_pair_ensemble(cfg1, cfg2, full_grid, sel)
        th, p, _ = exact_flow_ensemble(
            np.broadcast_to(theta0, (len(sel),)) if np.ndim(theta0) == 0 else theta0[lo:lo + chunk],
            np.broadcast_to(p0, (len(sel),)) if np.ndim(p0) == 0 else p0[lo:lo + chunk],
            x1[:, start:], x2[:, start:], sub_grid, params, amps,
            record_every=steps_per_period, with_energy=False)
        out_theta[:, lo:lo + len(sel)] = th
        out_p[:, lo:lo + len(sel)] = p
    return out_theta, out_p


def equilibrium_concentration(e0: Equilibrium,
                              sigma_levels: list[tuple[float, float]],
                              ensemble_n: int, horizon_periods: int,
                              pair_config: PairConfig,
                              params: PendulumParams = PendulumParams(),
                              steps_per_period: int = 1000,
                              master_seed: int = 0,
                              chunk: int = 500) -> ConcentrationReport:
    """95th-percentile section distance from a stable averaged equilibrium.

    Orbits start at (e0.theta, 0); the same seeds drive every sigma level,
    so the per-level radii are directly comparable.
    """
    if e0.kind != "stable":
        raise ValueError("concentration is measured around a stable equilibrium")
    seeds = ensemble_seeds(master_seed, ensemble_n)
    radii = np.empty(len(sigma_levels))
    for i, (sg1, sg2) in enumerate(sigma_levels):
        amps = NoiseAmplitudes(sg1, sg2)
        th, p = _section_cloud(pair_config, amps, params,
                               np.float64(e0.theta), np.float64(0.0), seeds,
                               horizon_periods, steps_per_period, chunk=chunk)
        dist = cylinder_distance(th, p, e0.theta, 0.0)
        radii[i] = np.percentile(dist, 95.0)
    return ConcentrationReport(equilibrium=e0, sigma_levels=list(sigma_levels),
                               radii=radii, ensemble_n=ensemble_n,
                               horizon_periods=horizon_periods)


def separatrix_initial_states(lam: LambdaPoint, params: PendulumParams,
                              n_points: int) -> tuple[np.ndarray, np.ndarray, Equilibrium]:
    """States on the averaged separatrix through the highest saddle.

    Momenta are energy-matched: p = +-l sqrt(2 (Hbar_sep - Ubar(theta)))
    on the admissible theta range, alternating branch signs.
    """
    eqs = find_equilibria(lam, params)
    saddles = [e for e in eqs if e.kind == UNSTABLE]
    if not saddles:
        raise ValueError(f"no saddle equilibrium at {lam}")
    saddle = max(saddles, key=lambda e: e.potential)
    h_sep = saddle.potential
    theta_grid = np.linspace(-np.pi, np.pi, 4 * n_points, endpoint=False)
    margin = effective_potential(theta_grid, lam, params)
    admissible = h_sep - margin >= 0.0
    theta_adm = theta_grid[admissible]
    if len(theta_adm) == 0:
        theta_adm = np.array([saddle.theta])
    take = np.linspace(0, len(theta_adm) - 1, n_points).round().astype(int)
    theta0 = theta_adm[take]
    gap = np.maximum(h_sep - effective_potential(theta0, lam, params), 0.0)
    p0 = params.l * np.sqrt(2.0 * gap)
    p0[1::2] *= -1.0
    return theta0, p0, saddle


def separatrix_splitting_probe(lam: LambdaPoint,
                               sigma_levels: list[tuple[float, float]],
                               n_points: int, pair_config: PairConfig,
                               params: PendulumParams = PendulumParams(),
                               horizon_periods: int = 10,
                               steps_per_period: int = 1000,
                               master_seed: int = 0,
                               chunk: int = 500) -> SplittingReport:
    """Transverse spread of section points launched on an averaged separatrix.

    The spread per level is the 95th percentile of |Hbar - Hbar_sep| over
    all section points; the averaged energy offset is the natural
    transverse coordinate near a separatrix.  Diagnostic only.
    """
    theta0, p0, saddle = separatrix_initial_states(lam, params, n_points)
    seeds = ensemble_seeds(master_seed, n_points)
    spreads = np.empty(len(sigma_levels))
    for i, (sg1, sg2) in enumerate(sigma_levels):
        amps = NoiseAmplitudes(sg1, sg2)
        th, p = _section_cloud(pair_config, amps, params, theta0, p0, seeds,
                               horizon_periods, steps_per_period, chunk=chunk)
        offset = np.abs(averaged_hamiltonian(th, p, lam, params) - saddle.potential)
        spreads[i] = np.percentile(offset, 95.0)
    return SplittingReport(lam=lam, saddle=saddle, sigma_levels=list(sigma_levels),
                           spreads=spreads, n_points=n_points)
