"""Hamiltonian mechanics of the noise-driven pendulum.

A pendulum of rod length l (unit bob mass) hangs from a suspension point
whose position is perturbed by two integrated noise channels with
couplings sigma_1 (horizontal) and sigma_2 (vertical).  With the coupling
shorthand

    S(theta, t) = sigma_1 xi_1(t) cos(theta) + sigma_2 xi_2(t) sin(theta),

the conjugate momentum and Hamiltonian are

    p = l^2 thetadot + l S,
    H = p^2 / (2 l^2) - p S / l + S^2 / 2 - g l cos(theta),

where additive terms independent of theta have been dropped.  Averaging
the quadratic noise term over time replaces xi_i xi_j by their long-run
moments C_1, C_2, C_12 and yields the deterministic system

    Hbar = p^2 / (2 l^2) + Ubar(theta),
    Ubar = Lambda_1 cos(2 theta) + Lambda_2 sin(2 theta) - g l cos(theta).

Two conventions map (sigma, C) to (Lambda_1, Lambda_2):

* ``derived`` (default): Lambda_1 = (sigma_1^2 C_1 - sigma_2^2 C_2) / 4,
  so Hbar equals the pointwise ensemble mean of H's quadratic part (up to
  the retained additive constant);
* ``paper``: Lambda_1 = (sigma_1^2 C_1 - sigma_2^2 C_2) / 2, the factor
  printed in the source material.

Lambda_2 = sigma_1 sigma_2 C_12 / 2 under both conventions.

The exact flow treats the noise paths as an exogenous signal (a random
ODE), integrated with a fixed-step classical Runge-Kutta scheme on the
noise grid; the averaged flow uses kick-drift-kick leapfrog, which keeps
Hbar bounded.  Angles are unwrapped reals throughout; wrapping to
(-pi, pi] happens only at presentation level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError
from .rpsde import ErgodicStats, PathGrid, PathSample

CONVENTIONS = ("derived", "paper")


@dataclass(frozen=True)
class PendulumParams:
    """Rod length and gravity; bob mass is fixed at 1."""

    l: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if not (self.l > 0 and math.isfinite(self.l)):
            raise ValueError(f"l must be positive, got {self.l}")
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ValueError(f"g must be positive, got {self.g}")


@dataclass(frozen=True)
class NoiseAmplitudes:
    """Coupling amplitudes of the two noise channels."""

    sigma1: float
    sigma2: float

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("sigma amplitudes must be >= 0")
        if not (math.isfinite(self.sigma1) and math.isfinite(self.sigma2)):
            raise ValueError("sigma amplitudes must be finite")


@dataclass(frozen=True)
class PhaseState:
    theta: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.p)):
            raise ValueError("phase state must be finite")


@dataclass(frozen=True)
class LambdaPoint:
    """Coefficients of the cos(2 theta) / sin(2 theta) terms of Ubar."""

    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda1) and math.isfinite(self.lambda2)):
            raise ValueError("lambda coefficients must be finite")


@dataclass
class Trajectory:
    """Integrated orbit on a uniform grid, with the energy along it."""

    grid: PathGrid
    theta: np.ndarray
    p: np.ndarray
    energy: np.ndarray | None = None


@dataclass
class BobEmbedding:
    """Cartesian bob position and velocity reconstructed from an orbit."""

    grid: PathGrid
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray


def wrap_angle(theta):
    """Wrap angles to the interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


def noise_coupling(theta, xi1, xi2, amps: NoiseAmplitudes):
    """S = sigma_1 xi_1 cos(theta) + sigma_2 xi_2 sin(theta)."""
    theta = np.asarray(theta, dtype=float)
    return amps.sigma1 * np.asarray(xi1) * np.cos(theta) + \
        amps.sigma2 * np.asarray(xi2) * np.sin(theta)


def momentum_from_velocity(theta, theta_dot, xi1, xi2,
                           params: PendulumParams, amps: NoiseAmplitudes):
    """p = l^2 thetadot + l S."""
    S = noise_coupling(theta, xi1, xi2, amps)
    return params.l**2 * np.asarray(theta_dot, dtype=float) + params.l * S


def velocity_from_momentum(theta, p, xi1, xi2,
                           params: PendulumParams, amps: NoiseAmplitudes):
    """thetadot = p / l^2 - S / l; exact inverse of momentum_from_velocity."""
    S = noise_coupling(theta, xi1, xi2, amps)
    return np.asarray(p, dtype=float) / params.l**2 - S / params.l


def exact_hamiltonian(theta, p, xi1, xi2,
                      params: PendulumParams, amps: NoiseAmplitudes):
    """H = p^2/(2 l^2) - p S / l + S^2/2 - g l cos(theta)."""
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(p, dtype=float)
    l, g = params.l, params.g
    S = noise_coupling(theta, xi1, xi2, amps)
    return p**2 / (2.0 * l**2) - p * S / l + 0.5 * S**2 - g * l * np.cos(theta)


def hamiltonian_partials(theta, p, xi1, xi2,
                         params: PendulumParams, amps: NoiseAmplitudes):
    """Analytic (dH/dtheta, dH/dp)."""
    theta = np.asarray(theta, dtype=float)
    p = np.asarray(p, dtype=float)
    l, g = params.l, params.g
    s1x = amps.sigma1 * np.asarray(xi1)
    s2x = amps.sigma2 * np.asarray(xi2)
    ct, st = np.cos(theta), np.sin(theta)
    S = s1x * ct + s2x * st
    Sp = -s1x * st + s2x * ct  # dS/dtheta
    dH_dtheta = -p * Sp / l + S * Sp + g * l * st
    dH_dp = p / l**2 - S / l
    return dH_dtheta, dH_dp


def instantaneous_potential(theta, xi1, xi2, params: PendulumParams,
                            amps: NoiseAmplitudes, convention: str = "derived"):
    """Potential part of H before averaging, as a cos/sin(2 theta) form.

    ``derived`` keeps the additive constant so the result equals
    S^2/2 - g l cos(theta) exactly; ``paper`` uses the printed
    cos(2 theta) coefficient (sigma_1^2 xi_1^2 - sigma_2^2 xi_2^2)/2 and
    drops the constant.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    theta = np.asarray(theta, dtype=float)
    l, g = params.l, params.g
    q1 = (amps.sigma1 * np.asarray(xi1)) ** 2
    q2 = (amps.sigma2 * np.asarray(xi2)) ** 2
    cross = amps.sigma1 * amps.sigma2 * np.asarray(xi1) * np.asarray(xi2)
    c2t, s2t = np.cos(2.0 * theta), np.sin(2.0 * theta)
    gravity = -g * l * np.cos(theta)
    if convention == "derived":
        return 0.25 * (q1 - q2) * c2t + 0.5 * cross * s2t + gravity + 0.25 * (q1 + q2)
    return 0.5 * (q1 - q2) * c2t + 0.5 * cross * s2t + gravity


def effective_potential(theta, lam: LambdaPoint, params: PendulumParams):
    """Ubar = Lambda_1 cos(2 theta) + Lambda_2 sin(2 theta) - g l cos(theta)."""
    theta = np.asarray(theta, dtype=float)
    return lam.lambda1 * np.cos(2.0 * theta) + lam.lambda2 * np.sin(2.0 * theta) \
        - params.g * params.l * np.cos(theta)


def effective_potential_dtheta(theta, lam: LambdaPoint, params: PendulumParams):
    """Ubar' = -2 Lambda_1 sin(2 theta) + 2 Lambda_2 cos(2 theta) + g l sin(theta)."""
    theta = np.asarray(theta, dtype=float)
    return -2.0 * lam.lambda1 * np.sin(2.0 * theta) \
        + 2.0 * lam.lambda2 * np.cos(2.0 * theta) \
        + params.g * params.l * np.sin(theta)


def effective_potential_d2theta(theta, lam: LambdaPoint, params: PendulumParams):
    """Ubar'' = -4 Lambda_1 cos(2 theta) - 4 Lambda_2 sin(2 theta) + g l cos(theta)."""
    theta = np.asarray(theta, dtype=float)
    return -4.0 * lam.lambda1 * np.cos(2.0 * theta) \
        - 4.0 * lam.lambda2 * np.sin(2.0 * theta) \
        + params.g * params.l * np.cos(theta)


def averaged_hamiltonian(theta, p, lam: LambdaPoint, params: PendulumParams):
    """Hbar = p^2/(2 l^2) + Ubar(theta)."""
    p = np.asarray(p, dtype=float)
    return p**2 / (2.0 * params.l**2) + effective_potential(theta, lam, params)


def lambda_from_stats(amps: NoiseAmplitudes, stats: ErgodicStats,
                      convention: str = "derived") -> LambdaPoint:
    """Map (sigma, C) estimates to the effective-potential coefficients."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    factor = 0.25 if convention == "derived" else 0.5
    lambda1 = factor * (amps.sigma1**2 * stats.c1 - amps.sigma2**2 * stats.c2)
    lambda2 = 0.5 * amps.sigma1 * amps.sigma2 * stats.c12
    return LambdaPoint(lambda1=lambda1, lambda2=lambda2)


def _as_state(initial) -> tuple[float, float]:
    if isinstance(initial, PhaseState):
        return initial.theta, initial.p
    theta, p = initial
    return float(theta), float(p)


def _rk4_rhs(theta, p, x1, x2, l, g, s1, s2):
    ct, st = np.cos(theta), np.sin(theta)
    sx1 = s1 * x1
    sx2 = s2 * x2
    S = sx1 * ct + sx2 * st
    Sp = -sx1 * st + sx2 * ct
    dtheta = p / (l * l) - S / l
    dp = p * Sp / l - S * Sp - g * l * st
    return dtheta, dp


def exact_flow_ensemble(theta0, p0, xi1: np.ndarray, xi2: np.ndarray,
                        grid: PathGrid, params: PendulumParams,
                        amps: NoiseAmplitudes,
                        record_every: int = 1,
                        with_energy: bool = True):
    """Classical 4th-order integration of the noise-driven flow.

    ``theta0``/``p0`` may be scalars or arrays of shape (m,); ``xi1``/``xi2``
    are value arrays of shape (n+1,) or (m, n+1) on ``grid``.  The noise
    is linearly interpolated inside each grid cell (the midpoint value is
    the endpoint average).  Returns (theta, p, energy) arrays whose last
    axis runs over the recorded grid nodes 0, record_every, 2*record_every,
    ...; ``energy`` is None when ``with_energy`` is false.

    Raises :class:`BlowUpError` with the offending step index if the state
    leaves the finite range.
    """
    if grid.n % record_every:
        raise ValueError("record_every must divide grid.n")
    l, g = params.l, params.g
    s1, s2 = amps.sigma1, amps.sigma2
    h = grid.h
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    batch = np.broadcast_shapes(np.shape(theta0), np.shape(p0),
                                xi1.shape[:-1], xi2.shape[:-1])
    theta = np.broadcast_to(np.asarray(theta0, dtype=float), batch).copy()
    p = np.broadcast_to(np.asarray(p0, dtype=float), batch).copy()
    n_rec = grid.n // record_every + 1
    out_theta = np.empty((n_rec,) + batch)
    out_p = np.empty((n_rec,) + batch)
    out_theta[0] = theta
    out_p[0] = p
    for k in range(grid.n):
        xa1, xb1 = xi1[..., k], xi1[..., k + 1]
        xa2, xb2 = xi2[..., k], xi2[..., k + 1]
        xm1 = 0.5 * (xa1 + xb1)
        xm2 = 0.5 * (xa2 + xb2)
        k1t, k1p = _rk4_rhs(theta, p, xa1, xa2, l, g, s1, s2)
        k2t, k2p = _rk4_rhs(theta + 0.5 * h * k1t, p + 0.5 * h * k1p, xm1, xm2, l, g, s1, s2)
        k3t, k3p = _rk4_rhs(theta + 0.5 * h * k2t, p + 0.5 * h * k2p, xm1, xm2, l, g, s1, s2)
        k4t, k4p = _rk4_rhs(theta + h * k3t, p + h * k3p, xb1, xb2, l, g, s1, s2)
        theta = theta + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if not (np.isfinite(theta).all() and np.isfinite(p).all()):
            raise BlowUpError(k + 1)
        if (k + 1) % record_every == 0:
            idx = (k + 1) // record_every
            out_theta[idx] = theta
            out_p[idx] = p
    energy = None
    if with_energy:
        # per-node noise values, axis-aligned with the (n_rec,) + batch outputs
        x1r = np.moveaxis(xi1[..., ::record_every], -1, 0)
        x2r = np.moveaxis(xi2[..., ::record_every], -1, 0)
        x1r = x1r.reshape(x1r.shape + (1,) * (out_theta.ndim - x1r.ndim))
        x2r = x2r.reshape(x2r.shape + (1,) * (out_theta.ndim - x2r.ndim))
        energy = exact_hamiltonian(out_theta, out_p, x1r, x2r, params, amps)
    return out_theta, out_p, energy


def exact_flow(initial, pair: tuple[PathSample, PathSample],
               params: PendulumParams, amps: NoiseAmplitudes) -> Trajectory:
    """Integrate one orbit driven by a simulated noise pair."""
    p1, p2 = pair
    if p1.grid != p2.grid:
        raise ValueError("paths must share one grid")
    theta0, p0 = _as_state(initial)
    th, p, en = exact_flow_ensemble(theta0, p0, p1.values, p2.values,
                                    p1.grid, params, amps)
    return Trajectory(grid=p1.grid, theta=th, p=p, energy=en)


def averaged_flow(initial, lam: LambdaPoint, params: PendulumParams,
                  h: float, n: int) -> Trajectory:
    """Kick-drift-kick leapfrog integration of the averaged system."""
    if h <= 0:
        raise ValueError("h must be positive")
    theta0, p0 = _as_state(initial)
    l2 = params.l**2
    theta = np.empty(n + 1)
    p = np.empty(n + 1)
    theta[0], p[0] = theta0, p0
    th, mom = theta0, p0
    for k in range(n):
        mom_half = mom - 0.5 * h * effective_potential_dtheta(th, lam, params)
        th = th + h * mom_half / l2
        mom = mom_half - 0.5 * h * effective_potential_dtheta(th, lam, params)
        if not (math.isfinite(th) and math.isfinite(mom)):
            raise BlowUpError(k + 1)
        theta[k + 1], p[k + 1] = th, mom
    grid = PathGrid(t0=0.0, h=h, n=n)
    energy = averaged_hamiltonian(theta, p, lam, params)
    return Trajectory(grid=grid, theta=theta, p=p, energy=energy)


def bob_embedding(traj: Trajectory, pair: tuple[PathSample, PathSample],
                  params: PendulumParams, amps: NoiseAmplitudes) -> BobEmbedding:
    """Cartesian bob coordinates: rod geometry plus integrated noise drift.

    The channel integrals are accumulated with the trapezoid rule on the
    shared grid.
    """
    p1, p2 = pair
    if p1.grid != traj.grid or p2.grid != traj.grid:
        raise ValueError("trajectory and paths must share one grid")
    l = params.l
    h = traj.grid.h
    int1 = np.concatenate([[0.0], np.cumsum(0.5 * h * (p1.values[:-1] + p1.values[1:]))])
    int2 = np.concatenate([[0.0], np.cumsum(0.5 * h * (p2.values[:-1] + p2.values[1:]))])
    x = l * np.sin(traj.theta) + amps.sigma1 * int1
    y = -l * np.cos(traj.theta) + amps.sigma2 * int2
    theta_dot = velocity_from_momentum(traj.theta, traj.p, p1.values, p2.values,
                                       params, amps)
    vx = l * theta_dot * np.cos(traj.theta) + amps.sigma1 * p1.values
    vy = l * theta_dot * np.sin(traj.theta) + amps.sigma2 * p2.values
    return BobEmbedding(grid=traj.grid, x=x, y=y, vx=vx, vy=vy)
