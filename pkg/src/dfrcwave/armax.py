"""Waveform design that splits the transmit budget between a water-filled
communication covariance and the radar covariance, then tunes the
per-subcarrier radar share to maximize the achievable rate.

The rate optimization runs over the simplex weight vector omega via SQP with
an analytic gradient; the final precoders realize the split covariance
approximately, and both the ideal (covariance-level) and actual
(precoder-induced) rates are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import (
    CovarianceSet,
    FreqChannel,
    PrecoderSet,
    SystemConfig,
    _hermitize,
    covariance_from_precoders,
)
from .radar import RadarOnlyDesign
from .solvers import SqpResult, sqp_minimize, waterfill

__all__ = [
    "CommOnlyDesign",
    "TradeoffDesign2",
    "design_comm_only",
    "rate_logdet",
    "make_weight_problem",
    "design_tradeoff2",
    "ideal_vs_actual_rate",
]


@dataclass(frozen=True)
class CommOnlyDesign:
    """Per-subcarrier right-singular-vector precoders with water-filled powers."""

    precoders: PrecoderSet
    covariances: CovarianceSet
    rate: float


@dataclass(frozen=True)
class TradeoffDesign2:
    rho2: float
    omega: np.ndarray  # simplex weights of the radar share over subcarriers
    r_split: tuple[np.ndarray, np.ndarray]  # aggregate (R1, R2), trace rho2/1-rho2 P_T
    precoders: PrecoderSet  # combined precoders after the power back-off
    covariances: CovarianceSet  # target split covariances (the "ideal" design)
    rate_ideal: float
    rate_actual: float
    sqp: SqpResult
    recon_residual: float  # max_k || induced radar part - R_f2(k) ||_F
    power_scale: float  # scalar back-off keeping the induced power in budget


def _check_channel(config: SystemConfig, chan: FreqChannel) -> None:
    if (chan.n_sc, chan.n_rx, chan.n_tx) != (config.n_sc, config.n_rx, config.n_tx):
        raise ValueError("channel dimensions do not match the system config")


def rate_logdet(
    chan: FreqChannel, cov: CovarianceSet | np.ndarray, noise_var: float
) -> float:
    """Achievable rate (1/N) sum_k log2 det(I + H(k) R_f(k) H^H(k) / s2)."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    freq = cov.freq_domain if isinstance(cov, CovarianceSet) else np.asarray(cov)
    h = chan.per_subcarrier
    n_sc, n_rx = h.shape[0], h.shape[1]
    inner = np.eye(n_rx) + h @ freq @ h.conj().swapaxes(1, 2) / noise_var
    inner = 0.5 * (inner + inner.conj().swapaxes(1, 2))
    _, logdet = np.linalg.slogdet(inner)
    return float(np.sum(np.real(logdet)) / (n_sc * math.log(2.0)))


def design_comm_only(
    chan: FreqChannel, budget: float, noise_var: float
) -> CommOnlyDesign:
    """Capacity-optimal design: joint water-filling over every eigenmode of
    every subcarrier, with (1/N^2) sum_k tr(W P W^H) equal to ``budget``."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    h = chan.per_subcarrier
    n_sc = h.shape[0]
    _, sing, vh = np.linalg.svd(h, full_matrices=False)
    if not np.any(sing > 0):
        raise ValueError("channel is identically zero")
    wf = waterfill(np.square(sing).ravel(), noise_var, n_sc**2 * budget)
    powers = wf.powers.reshape(sing.shape)
    precoders = vh.conj().swapaxes(1, 2)  # V(k): orthonormal columns
    pset = PrecoderSet(precoders=precoders, stream_powers=powers)
    covs = covariance_from_precoders(pset)
    return CommOnlyDesign(
        precoders=pset,
        covariances=covs,
        rate=rate_logdet(chan, covs, noise_var),
    )


def make_weight_problem(
    chan: FreqChannel,
    comm_freq: np.ndarray,
    radar_part: np.ndarray,
    noise_var: float,
) -> tuple[Callable, Callable]:
    """Objective and analytic gradient of the radar-share weight problem.

    objective(w) = -(1/N) sum_k log2 det(M_k(w)),
    M_k(w) = I + H(k)(R_f1(k) + w_k N^2 R2)H^H(k)/s2;
    d/dw_k = -(N / (s2 ln 2)) tr(M_k^{-1} H R2 H^H).
    """
    h = chan.per_subcarrier
    n_sc, n_rx = h.shape[0], h.shape[1]
    hh = h.conj().swapaxes(1, 2)
    eye = np.eye(n_rx)
    base = eye + h @ np.asarray(comm_freq) @ hh / noise_var
    base = 0.5 * (base + base.conj().swapaxes(1, 2))
    bump = (n_sc**2 / noise_var) * (h @ np.asarray(radar_part) @ hh)
    bump = 0.5 * (bump + bump.conj().swapaxes(1, 2))
    ln2 = math.log(2.0)

    def objective(omega: np.ndarray) -> float:
        m = base + omega[:, None, None] * bump
        _, logdet = np.linalg.slogdet(m)
        return float(-np.sum(np.real(logdet)) / (n_sc * ln2))

    def gradient(omega: np.ndarray) -> np.ndarray:
        m = base + omega[:, None, None] * bump
        inv = np.linalg.inv(m)
        traces = np.real(np.einsum("kij,kji->k", inv, bump))
        return -traces / (n_sc * ln2)

    return objective, gradient


def design_tradeoff2(
    chan: FreqChannel,
    radar: RadarOnlyDesign,
    rho2: float,
    config: SystemConfig,
    *,
    sqp_tol: float = 1e-6,
    sqp_max_iterations: int = 40,
    sqp_method: str = "bfgs",
) -> TradeoffDesign2:
    """Split-covariance design: water-filled communication part with budget
    rho2 P_T, radar part (1 - rho2) R_d weighted over subcarriers by the
    rate-optimal simplex vector, realized by combined precoders."""
    _check_channel(config, chan)
    if not 0.0 < rho2 <= 1.0:
        raise ValueError("rho2 must lie in (0, 1]")
    noise_var = config.noise_var
    p_t = config.total_power
    n = config.n_sc

    comm = design_comm_only(chan, rho2 * p_t, noise_var)
    if rho2 == 1.0:
        # pure communications: the radar part vanishes and the water-filling
        # precoders realize the covariance exactly, so ideal equals actual
        uniform = np.full(n, 1.0 / n)
        sqp = SqpResult(
            x=uniform,
            objective=-comm.rate,
            objective_trace=np.asarray([-comm.rate]),
            step_norms=np.zeros(0),
            n_iterations=0,
            converged=True,
        )
        n_tx = config.n_tx
        return TradeoffDesign2(
            rho2=1.0,
            omega=uniform,
            r_split=(comm.covariances.time_domain, np.zeros((n_tx, n_tx))),
            precoders=comm.precoders,
            covariances=comm.covariances,
            rate_ideal=comm.rate,
            rate_actual=comm.rate,
            sqp=sqp,
            recon_residual=0.0,
            power_scale=1.0,
        )

    radar_cov = _hermitize(np.asarray(radar.covariance, dtype=complex))
    r2 = (1.0 - rho2) * radar_cov
    objective, gradient = make_weight_problem(
        chan, comm.covariances.freq_domain, r2, noise_var
    )
    sqp = sqp_minimize(
        objective, n, sqp_tol, sqp_max_iterations, gradient=gradient, method=sqp_method
    )
    omega = sqp.x

    w1 = comm.precoders.precoders
    p1 = comm.precoders.stream_powers
    n_streams = p1.shape[1]
    ratio = (1.0 - rho2) / rho2
    w2 = np.zeros_like(w1)
    recon = 0.0
    for k in range(n):
        rf2 = omega[k] * n**2 * r2
        evals, evecs = np.linalg.eigh((1.0 / ratio) * rf2)
        order = np.argsort(evals)[::-1][:n_streams]
        roots = np.sqrt(np.maximum(evals[order], 0.0))
        inv_root = np.zeros(n_streams)
        funded = p1[k] > 0
        inv_root[funded] = 1.0 / np.sqrt(p1[k][funded])
        w2[k] = evecs[:, order] * (roots * inv_root)[None, :]
        induced2 = ratio * (w2[k] * p1[k][None, :]) @ w2[k].conj().T
        recon = max(recon, float(np.linalg.norm(induced2 - rf2)))
    combined = w1 + math.sqrt(ratio) * w2

    induced_power = PrecoderSet(
        precoders=combined, stream_powers=p1
    ).total_power()
    gamma = 1.0
    if induced_power > p_t:  # cross terms inflated the power: back off
        gamma = math.sqrt(p_t / induced_power)
    pset = PrecoderSet(precoders=gamma * combined, stream_powers=p1)

    freq_ideal = comm.covariances.freq_domain + omega[:, None, None] * (n**2) * r2
    covs = CovarianceSet(
        time_domain=freq_ideal.sum(axis=0) / n**2, freq_domain=freq_ideal
    )
    return TradeoffDesign2(
        rho2=rho2,
        omega=omega,
        r_split=(comm.covariances.time_domain, r2),
        precoders=pset,
        covariances=covs,
        rate_ideal=rate_logdet(chan, covs, noise_var),
        rate_actual=rate_logdet(
            chan, covariance_from_precoders(pset), noise_var
        ),
        sqp=sqp,
        recon_residual=recon,
        power_scale=gamma,
    )


def ideal_vs_actual_rate(
    chan: FreqChannel, design: TradeoffDesign2, noise_var: float
) -> tuple[float, float]:
    """Rate of the split covariance vs. rate induced by the final precoders."""
    ideal = rate_logdet(chan, design.covariances, noise_var)
    actual = rate_logdet(
        chan, covariance_from_precoders(design.precoders), noise_var
    )
    return ideal, actual
