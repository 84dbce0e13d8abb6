"""Radar figures of merit and the radar-only covariance design.

The estimation-accuracy metric is the Cramer-Rao bound of the target angle as
a function of the transmit covariance; the spatial metric is the transmit
beampattern a(theta)^H R a(theta) and its normalized mean square error against
a reference pattern.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import (
    ArrayGeometry,
    complex_normal,
    steering_derivative,
    steering_vector,
)

__all__ = [
    "RadarScene",
    "BeamPattern",
    "RadarOnlyDesign",
    "crb",
    "crb_general",
    "beampattern",
    "default_angle_grid",
    "beampattern_nmse",
    "simulate_echo",
    "design_radar_only",
]

N_GRID_DEFAULT = 721  # 0.25 degree resolution over [-90, 90]


@dataclass(frozen=True)
class RadarScene:
    """Point target: angle, echo SNR (linear) and complex reflection gain."""

    theta: float
    snr: float = 1.0
    reflection: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if abs(self.theta) > np.pi / 2 + 1e-12:
            raise ValueError("target angle must satisfy |theta| <= pi/2")
        if self.snr <= 0:
            raise ValueError("echo snr must be positive")


@dataclass(frozen=True)
class BeamPattern:
    angles: np.ndarray  # radians
    gains: np.ndarray  # a(theta)^H R a(theta), real

    def to_csv(self, path: Path | str) -> None:
        """Write angle_deg, gain_linear, gain_db rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["angle_deg", "gain_linear", "gain_db"])
            gains_db = 10.0 * np.log10(np.maximum(self.gains, 1e-30))
            for ang, lin, db in zip(np.degrees(self.angles), self.gains, gains_db):
                writer.writerow([repr(float(ang)), repr(float(lin)), repr(float(db))])


def _check_hermitian(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=complex)
    scale = max(1.0, np.abs(cov).max())
    if np.abs(cov - cov.conj().T).max() > 1e-9 * scale:
        raise ValueError("covariance must be Hermitian")
    return 0.5 * (cov + cov.conj().T)


def crb(geom: ArrayGeometry, scene: RadarScene, cov: np.ndarray) -> float:
    """Angle-estimation bound 1 / (2 SNR ||a'(theta)||^2 a^H R a).

    Returns +inf when the target direction is unilluminated (a^H R a = 0).
    """
    cov = _check_hermitian(cov)
    a = steering_vector(geom, scene.theta)
    da = steering_derivative(geom, scene.theta)
    illum = float(np.real(a.conj() @ cov @ a))
    if illum <= 0.0:
        return float("inf")
    return 1.0 / (2.0 * scene.snr * float(np.sum(np.abs(da) ** 2)) * illum)


def crb_general(geom: ArrayGeometry, scene: RadarScene, cov: np.ndarray) -> float:
    """Full trace-form bound with A = a a^H and its angle derivative.

    Agrees with :func:`crb` on rank-1 covariances; on higher-rank covariances
    the extra cross terms make this form smaller (never larger).
    """
    cov = _check_hermitian(cov)
    a = steering_vector(geom, scene.theta)
    da = steering_derivative(geom, scene.theta)
    big_a = np.outer(a, a.conj())
    big_ad = np.outer(da, a.conj()) + np.outer(a, da.conj())
    t_aa = float(np.real(np.trace(big_a.conj().T @ big_a @ cov)))
    t_dd = float(np.real(np.trace(big_ad.conj().T @ big_ad @ cov)))
    t_da = complex(np.trace(big_ad.conj().T @ big_a @ cov))
    denom = t_dd * t_aa - abs(t_da) ** 2
    if denom <= 0.0 or t_aa <= 0.0:
        return float("inf")
    return t_aa / (2.0 * scene.snr * denom)


def default_angle_grid(n_points: int = N_GRID_DEFAULT) -> np.ndarray:
    return np.linspace(-np.pi / 2, np.pi / 2, n_points)


def beampattern(
    geom: ArrayGeometry, cov: np.ndarray, grid: np.ndarray | None = None
) -> BeamPattern:
    """Transmit power toward each grid angle, a(theta)^H R a(theta)."""
    cov = _check_hermitian(cov)
    if grid is None:
        grid = default_angle_grid()
    offsets = geom.element_offsets
    phases = 2.0 * np.pi * offsets[None, :] * geom.spacing * np.sin(grid)[:, None]
    steer = np.exp(1j * phases)  # (n_angles, n_tx)
    gains = np.real(np.einsum("at,ts,as->a", steer.conj(), cov, steer))
    return BeamPattern(angles=np.asarray(grid, float), gains=gains)


def beampattern_nmse(strict: BeamPattern, tradeoff: BeamPattern) -> float:
    """Trapezoid-quadrature mismatch integral over the common angle grid,
    normalized by the strict pattern's energy."""
    if strict.angles.shape != tradeoff.angles.shape or np.abs(
        strict.angles - tradeoff.angles
    ).max() > 1e-12:
        raise ValueError("beampatterns must share the same angle grid")
    num = np.trapezoid((strict.gains - tradeoff.gains) ** 2, strict.angles)
    den = np.trapezoid(strict.gains**2, strict.angles)
    if den <= 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(num / den)


def simulate_echo(
    geom: ArrayGeometry,
    scene: RadarScene,
    time_samples: np.ndarray,
    noise_var: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Point-target returns zeta * a(theta) a(theta)^H x(n) plus receiver noise."""
    x = np.asarray(time_samples, dtype=complex)
    a = steering_vector(geom, scene.theta)
    reflect = np.outer(a, a.conj())
    y = scene.reflection * (x @ reflect.T)
    if noise_var > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_var > 0")
        y = y + np.sqrt(noise_var) * complex_normal(rng, y.shape)
    return y


@dataclass(frozen=True)
class RadarOnlyDesign:
    """Covariance that concentrates the whole budget on the target direction."""

    covariance: np.ndarray  # (n_tx, n_tx) Hermitian PSD, trace = total power
    achieved_crb: float


def design_radar_only(
    geom: ArrayGeometry, scene: RadarScene, total_power: float
) -> RadarOnlyDesign:
    """Minimum-CRB covariance under the trace/Hermitian/PSD constraints.

    Maximizing a^H R a over {R PSD, trace R = P} is solved exactly by the
    rank-1 covariance (P/n_tx) a a^H, which attains a^H R a = P * n_tx.
    """
    if total_power <= 0:
        raise ValueError("total_power must be positive")
    a = steering_vector(geom, scene.theta)
    cov = (total_power / geom.n_tx) * np.outer(a, a.conj())
    cov = 0.5 * (cov + cov.conj().T)
    return RadarOnlyDesign(covariance=cov, achieved_crb=crb(geom, scene, cov))
