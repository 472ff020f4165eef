"""Deterministic CSV/JSON exports.

All floats are written with 17 significant digits (lossless round trip),
JSON objects with sorted keys and fixed separators, and lines with
explicit newline endings, so identical inputs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .bifurcation import AtlasCurves, PhasePortrait, ScanResult
from .dynamics import BobEmbedding, Trajectory
from .poincare import FillReport, StroboscopicSection
from .rpsde import PathSample


def fmt(x) -> str:
    return format(float(x), ".17g")


def _write_rows(path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_pair_csv(path, pair: tuple[PathSample, PathSample]) -> None:
    """Noise pair as ``t,xi1,xi2``."""
    p1, p2 = pair
    times = p1.grid.times()
    _write_rows(path, "t,xi1,xi2",
                ((fmt(t), fmt(a), fmt(b))
                 for t, a, b in zip(times, p1.values, p2.values)))


def write_trajectory_csv(path, traj: Trajectory, energy_label: str = "H") -> None:
    """Orbit as ``t,theta,p,<energy_label>``."""
    times = traj.grid.times()
    energy = traj.energy if traj.energy is not None else np.full(len(times), np.nan)
    _write_rows(path, f"t,theta,p,{energy_label}",
                ((fmt(t), fmt(th), fmt(p), fmt(e))
                 for t, th, p, e in zip(times, traj.theta, traj.p, energy)))


def write_embedding_csv(path, emb: BobEmbedding) -> None:
    """Bob position as ``t,x,y``."""
    times = emb.grid.times()
    _write_rows(path, "t,x,y",
                ((fmt(t), fmt(x), fmt(y))
                 for t, x, y in zip(times, emb.x, emb.y)))


def write_section_csv(path, section: StroboscopicSection) -> None:
    """Section as ``n,theta_wrapped,p``."""
    wrapped = section.theta_wrapped
    _write_rows(path, "n,theta_wrapped,p",
                ((str(n), fmt(th), fmt(p))
                 for n, (th, p) in enumerate(zip(wrapped, section.p))))


def write_histogram_csv(path, report: FillReport) -> None:
    """Occupancy histogram as ``theta_bin,p_bin,count``."""
    rows = []
    counts = report.counts
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            rows.append((str(i), str(j), str(int(counts[i, j]))))
    _write_rows(path, "theta_bin,p_bin,count", rows)


def write_scan_csv(path, scan: ScanResult) -> None:
    """Corner labels as ``lambda1,lambda2,label``."""
    rows = []
    for i, a in enumerate(scan.lambda1_corners):
        for j, b in enumerate(scan.lambda2_corners):
            rows.append((fmt(a), fmt(b), scan.labels[i, j]))
    _write_rows(path, "lambda1,lambda2,label", rows)


def write_portrait_csv(path, portrait: PhasePortrait) -> None:
    """Energy grid as ``theta,p,Hbar``."""
    rows = []
    for j, p in enumerate(portrait.p):
        for i, th in enumerate(portrait.theta):
            rows.append((fmt(th), fmt(p), fmt(portrait.hbar[j, i])))
    _write_rows(path, "theta,p,Hbar", rows)


def portrait_sidecar(portrait: PhasePortrait) -> dict:
    return {
        "equilibria": [
            {"theta": e.theta, "kind": e.kind, "potential": e.potential,
             "second_derivative": e.second_derivative}
            for e in portrait.equilibria
        ],
        "separatrix_levels": list(portrait.separatrix_levels),
    }


def write_atlas_json(path, atlas: AtlasCurves) -> None:
    write_json(path, {
        "gamma1": [[float(a), float(b)] for a, b in atlas.gamma1],
        "gamma2": {"min_lambda1": atlas.gamma2.min_lambda1},
    })


def sha256_of(path) -> str:
    import hashlib
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
