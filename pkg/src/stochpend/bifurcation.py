"""Equilibria and bifurcation atlas of the averaged pendulum.

Equilibria of the averaged system sit at the critical points of the
effective potential Ubar; their stability follows the sign of Ubar''.
In the (Lambda_1, Lambda_2) plane two curves separate the two portrait
types (with l = g = 1):

* Gamma_1, the degenerate-equilibrium locus, parametrized by
  (Lambda_1, Lambda_2) = (cos^3(t)/2 - 3 cos(t)/4, sin^3(t)/2), a closed
  curve with cusps at (+-1/4, 0) through (0, +-1/2);
* Gamma_2, the ray {Lambda_1 > 1/4, Lambda_2 = 0}, where the two
  potential wells have equal depth.

Inside Gamma_1 (region Pi_1) the potential has one minimum and one
maximum; outside (region Pi_2) two of each.  Crossing Gamma_2 the two
wells exchange depth.  Which pair of equilibria the equal-value test on
Gamma_2 compares was fixed by a limit experiment: approaching
(Lambda_1, Lambda_2) = (0.5, 0) along Lambda_2 -> 0, the equal-value pair
is the stable pair (the wells born when the bottom equilibrium splits at
Lambda_1 = 1/4), not the two maxima, whose values differ by 2 g l.  The
mirror locus where the two maxima have equal value is the Lambda_1 < -1/4
half of the axis, which the quadrant-reduced atlas does not draw; the
region classifier therefore tests well depths only.

Root finding uses a uniform sign scan plus bisection (derivative-free,
guaranteed brackets).  Double roots of Ubar' -- the hallmark of points on
Gamma_1 -- produce no sign change, so the scan is augmented with the
critical points of Ubar' (roots of Ubar''): any such point where |Ubar'|
is negligibly small is a degenerate equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    LambdaPoint,
    NoiseAmplitudes,
    PendulumParams,
    averaged_hamiltonian,
    effective_potential,
    effective_potential_d2theta,
    effective_potential_dtheta,
)
from .rpsde import PathSample

STABLE = "stable"
UNSTABLE = "unstable"
DEGENERATE = "degenerate"

PI1 = "pi1"
PI2 = "pi2"
BOUNDARY = "boundary"

#: Ubar'' band, relative to the problem magnitude, inside which an
#: equilibrium counts as degenerate.
DEGEN_TOL = 1e-9
#: |Ubar'| acceptance band for double-root candidates found via Ubar''.
_DOUBLE_ROOT_TOL = 1e-10
#: Exclusion radius (rad) between a double-root candidate and simple roots.
_DOUBLE_ROOT_RADIUS = 1e-4
#: Equal-well-depth band for the region classifier.
EQUAL_VALUE_TOL = 1e-9

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Equilibrium:
    theta: float
    kind: str
    potential: float
    second_derivative: float


@dataclass(frozen=True)
class Gamma2Ray:
    """The ray {Lambda_1 > min_lambda1, Lambda_2 = 0}."""

    min_lambda1: float = 0.25
    lambda2_tol: float = 1e-12

    def contains(self, lam: LambdaPoint) -> bool:
        return lam.lambda1 > self.min_lambda1 and abs(lam.lambda2) <= self.lambda2_tol


@dataclass
class AtlasCurves:
    gamma1: np.ndarray
    gamma2: Gamma2Ray


@dataclass
class ScanResult:
    """Corner labels and boundary cells of a parameter-plane scan."""

    lambda1_corners: np.ndarray
    lambda2_corners: np.ndarray
    labels: np.ndarray            # corner labels, shape (n1, n2), values PI1/PI2/BOUNDARY
    boundary_cells: np.ndarray    # cell centers (k, 2)
    step: float


@dataclass
class PhasePortrait:
    """Averaged-energy values on a phase-plane grid plus separatrix data."""

    theta: np.ndarray
    p: np.ndarray
    hbar: np.ndarray              # shape (len(p), len(theta))
    equilibria: list[Equilibrium]
    separatrix_levels: list[float]


@dataclass
class LambdaTrace:
    """Instantaneous effective-potential coefficients along a noise pair."""

    times: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray


def _problem_scale(lam: LambdaPoint, params: PendulumParams) -> float:
    return max(1.0, abs(lam.lambda1) + abs(lam.lambda2) + params.g * params.l)


def _bisect_roots(f, lo: np.ndarray, hi: np.ndarray, tol: float, iters: int = 48) -> np.ndarray:
    """Vectorized bisection on brackets with f(lo) f(hi) < 0."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        take_left = flo * fmid <= 0.0
        hi = np.where(take_left, mid, hi)
        lo = np.where(take_left, lo, mid)
        flo = np.where(take_left, flo, fmid)
        if np.all(hi - lo < tol):
            break
    return 0.5 * (lo + hi)


def _periodic_roots(f, grid_n: int, tol: float) -> np.ndarray:
    """All simple roots of a 2pi-periodic function on [0, 2pi)."""
    theta = np.linspace(0.0, _TWO_PI, grid_n, endpoint=False)
    vals = f(theta)
    vals_next = np.roll(vals, -1)
    exact = theta[vals == 0.0]
    change = (vals * vals_next < 0.0)
    lo = theta[change]
    hi = lo + _TWO_PI / grid_n
    roots = _bisect_roots(f, lo, hi, tol) if len(lo) else np.empty(0)
    return np.sort(np.concatenate([exact, roots]))


def _dedupe_periodic(thetas: np.ndarray, radius: float) -> np.ndarray:
    if len(thetas) == 0:
        return thetas
    thetas = np.sort(np.mod(thetas, _TWO_PI))
    keep = [thetas[0]]
    for t in thetas[1:]:
        if t - keep[-1] > radius:
            keep.append(t)
    # wrap-around duplicate: first and last may be the same root mod 2pi
    if len(keep) > 1 and (keep[0] + _TWO_PI) - keep[-1] <= radius:
        keep.pop()
    return np.asarray(keep)


def find_equilibria(lam: LambdaPoint, params: PendulumParams,
                    grid_n: int = 4096, tol: float = 1e-12) -> list[Equilibrium]:
    """All critical points of Ubar on [0, 2pi), classified by Ubar''.

    Simple roots come from a sign scan of Ubar' refined by bisection;
    degenerate (double) roots are recovered from the critical points of
    Ubar' where |Ubar'| vanishes to rounding.  At least two equilibria
    always exist; finding fewer raises.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")

    def du(theta):
        return effective_potential_dtheta(theta, lam, params)

    def d2u(theta):
        return effective_potential_d2theta(theta, lam, params)

    scale = _problem_scale(lam, params)
    roots = _periodic_roots(du, grid_n, tol)
    roots = _dedupe_periodic(roots, 10.0 * tol)

    # double roots: critical points of Ubar' with negligible |Ubar'|
    crit = _periodic_roots(d2u, grid_n, tol)
    for c in crit:
        if abs(du(c)) <= _DOUBLE_ROOT_TOL * scale:
            if len(roots) == 0 or np.min(np.abs(np.mod(roots - c + np.pi, _TWO_PI) - np.pi)) > _DOUBLE_ROOT_RADIUS:
                roots = np.sort(np.append(roots, np.mod(c, _TWO_PI)))

    if len(roots) < 2:
        raise RuntimeError(
            f"found {len(roots)} equilibria at {lam}; at least 2 must exist")

    degen_band = DEGEN_TOL * scale
    out = []
    for theta in roots:
        upp = float(d2u(theta))
        if abs(upp) < degen_band:
            kind = DEGENERATE
        elif upp > 0:
            kind = STABLE
        else:
            kind = UNSTABLE
        out.append(Equilibrium(theta=float(theta), kind=kind,
                               potential=float(effective_potential(theta, lam, params)),
                               second_derivative=upp))
    return out


def classify_region(lam: LambdaPoint, params: PendulumParams,
                    grid_n: int = 4096, tol: float = 1e-12,
                    equal_tol: float = EQUAL_VALUE_TOL) -> str:
    """Label a parameter point PI1, PI2 or BOUNDARY.

    PI1: exactly 2 non-degenerate equilibria.  PI2: exactly 4, with the
    two wells at distinct depths.  BOUNDARY: any degenerate equilibrium
    (on Gamma_1) or equal well depths (on Gamma_2), within tolerance.
    """
    eqs = find_equilibria(lam, params, grid_n=grid_n, tol=tol)
    if any(e.kind == DEGENERATE for e in eqs):
        return BOUNDARY
    if len(eqs) == 2:
        return PI1
    if len(eqs) == 4:
        wells = sorted(e.potential for e in eqs if e.kind == STABLE)
        if len(wells) != 2:
            return BOUNDARY
        if abs(wells[1] - wells[0]) <= equal_tol * _problem_scale(lam, params):
            return BOUNDARY
        return PI2
    return BOUNDARY


def gamma1_curve(samples: int) -> np.ndarray:
    """Degenerate-equilibrium curve sampled on a uniform parameter grid.

    Points (Lambda_1, Lambda_2) = (cos^3 t / 2 - 3 cos t / 4, sin^3 t / 2)
    for t uniform over [0, 2pi); valid for l = g = 1.
    """
    if samples < 16:
        raise ValueError("samples must be >= 16")
    t = np.linspace(0.0, _TWO_PI, samples, endpoint=False)
    ct, st = np.cos(t), np.sin(t)
    return np.column_stack([ct**3 / 2.0 - 3.0 * ct / 4.0, st**3 / 2.0])


def gamma2_ray() -> Gamma2Ray:
    """Equal-well-depth ray {Lambda_1 > 0.25, Lambda_2 = 0} (l = g = 1)."""
    return Gamma2Ray()


def atlas_curves(samples: int = 512) -> AtlasCurves:
    return AtlasCurves(gamma1=gamma1_curve(samples), gamma2=gamma2_ray())


def numeric_bifurcation_scan(lambda1_range: tuple[float, float],
                             lambda2_range: tuple[float, float],
                             step: float, params: PendulumParams,
                             grid_n: int = 1024) -> ScanResult:
    """Locate the bifurcation set by region labels alone.

    Every corner of a uniform cell grid is labeled by
    :func:`classify_region`; cells whose corners disagree (or touch a
    BOUNDARY corner) approximate the bifurcation set without using the
    analytic curve formulas.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n1 = int(round((lambda1_range[1] - lambda1_range[0]) / step)) + 1
    n2 = int(round((lambda2_range[1] - lambda2_range[0]) / step)) + 1
    l1 = lambda1_range[0] + step * np.arange(n1)
    l2 = lambda2_range[0] + step * np.arange(n2)
    codes = np.empty((n1, n2), dtype=np.int8)
    code_of = {PI1: 0, PI2: 1, BOUNDARY: 2}
    for i, a in enumerate(l1):
        for j, b in enumerate(l2):
            codes[i, j] = code_of[classify_region(LambdaPoint(a, b), params,
                                                  grid_n=grid_n)]
    c00 = codes[:-1, :-1]
    c10 = codes[1:, :-1]
    c01 = codes[:-1, 1:]
    c11 = codes[1:, 1:]
    disagree = ~((c00 == c10) & (c00 == c01) & (c00 == c11))
    touches_boundary = (c00 == 2) | (c10 == 2) | (c01 == 2) | (c11 == 2)
    mask = disagree | touches_boundary
    ii, jj = np.nonzero(mask)
    centers = np.column_stack([l1[ii] + 0.5 * step, l2[jj] + 0.5 * step])
    labels = np.empty((n1, n2), dtype=object)
    for name, code in code_of.items():
        labels[codes == code] = name
    return ScanResult(lambda1_corners=l1, lambda2_corners=l2, labels=labels,
                      boundary_cells=centers, step=step)


def phase_portrait(lam: LambdaPoint, params: PendulumParams,
                   theta_range: tuple[float, float] = (-np.pi, np.pi),
                   p_range: tuple[float, float] = (-3.0, 3.0),
                   grid: tuple[int, int] = (129, 129)) -> PhasePortrait:
    """Averaged-energy grid plus equilibria and separatrix levels.

    The separatrix levels are the Ubar values of the unstable equilibria;
    contouring at those levels draws the separatrices.
    """
    if grid[0] < 32 or grid[1] < 32:
        raise ValueError("portrait grid must be at least 32x32")
    theta = np.linspace(*theta_range, grid[0])
    p = np.linspace(*p_range, grid[1])
    hbar = averaged_hamiltonian(theta[None, :], p[:, None], lam, params)
    eqs = find_equilibria(lam, params)
    levels = sorted(e.potential for e in eqs if e.kind == UNSTABLE)
    return PhasePortrait(theta=theta, p=p, hbar=hbar, equilibria=eqs,
                         separatrix_levels=levels)


def perturbed_lambda_trace(pair: tuple[PathSample, PathSample],
                           amps: NoiseAmplitudes,
                           convention: str = "derived") -> LambdaTrace:
    """Instantaneous (Lambda_1, Lambda_2) read off the noise values.

    Time-averaging the trace reproduces the coefficients obtained from
    ergodic statistics; the scatter of the trace around that mean is the
    random shift of the bifurcation point seen by the frozen-time system.
    """
    if convention not in ("derived", "paper"):
        raise ValueError("convention must be 'derived' or 'paper'")
    factor = 0.25 if convention == "derived" else 0.5
    p1, p2 = pair
    if p1.grid != p2.grid:
        raise ValueError("paths must share one grid")
    q1 = (amps.sigma1 * p1.values) ** 2
    q2 = (amps.sigma2 * p2.values) ** 2
    lambda1 = factor * (q1 - q2)
    lambda2 = 0.5 * amps.sigma1 * amps.sigma2 * p1.values * p2.values
    return LambdaTrace(times=p1.grid.times(), lambda1=lambda1, lambda2=lambda2)
