"""Waveform designs that trade angle-estimation accuracy against
inter-stream interference at the communication receiver.

The strict design reproduces the radar covariance exactly (up to a tiny
diagonal ridge) on every subcarrier while choosing the subcarrier power
split and the semi-unitary factor that minimize residual interference. The
relaxed design then blends each strict precoder with the interference-free
solution under a per-subcarrier power cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    CovarianceSet,
    FreqChannel,
    PrecoderSet,
    SystemConfig,
    _hermitize,
)
from .radar import RadarOnlyDesign
from .solvers import SimplexQpProblem, SolverError, solve_opp, solve_simplex_qp

__all__ = [
    "StrictDesign",
    "TradeoffDesign1",
    "design_strict",
    "design_tradeoff1",
    "tradeoff1_precoder",
    "isi_power",
    "rate_isi",
]

RIDGE_SCALE = 1e-8  # diagonal loading relative to the mean covariance eigenvalue


def _check_channel(config: SystemConfig, chan: FreqChannel) -> None:
    if (chan.n_sc, chan.n_rx, chan.n_tx) != (config.n_sc, config.n_rx, config.n_tx):
        raise ValueError("channel dimensions do not match the system config")


@dataclass(frozen=True)
class StrictDesign:
    """Covariance-exact design: R_f(k) = alpha_k N^2 R_d on every subcarrier."""

    alphas: np.ndarray  # simplex split of the budget over subcarriers
    precoders: PrecoderSet
    covariances: CovarianceSet
    isi_value: float  # expected residual interference of the design
    reconstruction_error: float  # max_k || W W^H - R_f(k)/E_s ||_F


@dataclass(frozen=True)
class TradeoffDesign1:
    rho1: float
    precoders: PrecoderSet
    multipliers: np.ndarray  # per-subcarrier power-cap multiplier
    isi_value: float


def isi_power(
    chan: FreqChannel, precoders: PrecoderSet, symbols: np.ndarray | None = None
) -> float:
    """Residual interference sum_k ||H(k)W(k)S(k) - S(k)||^2.

    With ``symbols`` omitted, returns the expectation over symbols with
    per-stream powers taken from the precoder set.
    """
    h = chan.per_subcarrier
    w = precoders.precoders
    n_rx = h.shape[1]
    resid = h @ w - np.eye(n_rx)[None, :, :]
    if symbols is not None:
        symbols = np.asarray(symbols, dtype=complex)
        out = np.einsum("krs,ks->kr", resid, symbols)
        return float(np.sum(np.abs(out) ** 2))
    per_stream = np.sum(np.abs(resid) ** 2, axis=1)
    return float(np.sum(precoders.stream_powers * per_stream))


def rate_isi(
    chan: FreqChannel,
    precoders: PrecoderSet,
    stream_powers: np.ndarray | None = None,
    noise_var: float = 1.0,
) -> float:
    """Achievable rate treating residual interference as noise.

    Per stream i the useful power is its own symbol power and everything
    leaking through row i of (H W - I) counts as interference:
    (1/N) sum_k sum_i log2(1 + p_i / (sum_j p_j |(HW - I)_{ij}|^2 + s2)).
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    h = chan.per_subcarrier
    w = precoders.precoders
    n_sc, n_rx = h.shape[0], h.shape[1]
    if stream_powers is None:
        powers = precoders.stream_powers
    else:
        powers = np.broadcast_to(
            np.asarray(stream_powers, dtype=float), (n_sc, n_rx)
        )
    resid = h @ w - np.eye(n_rx)[None, :, :]
    interference = np.einsum("krj,kj->kr", np.abs(resid) ** 2, powers)
    sinr = powers / (interference + noise_var)
    return float(np.sum(np.log2(1.0 + sinr)) / n_sc)


def design_strict(
    chan: FreqChannel, radar: RadarOnlyDesign, config: SystemConfig
) -> StrictDesign:
    """Minimum-interference precoders whose covariance matches the radar one.

    The subcarrier split solves the separable quadratic surrogate
    sum_k || a_k M_k - I ||_F^2 over the probability simplex, with
    M_k = (N^2/E_s) H(k) R_d H(k)^H; the per-subcarrier factor is the
    orthogonal-Procrustes optimum for the resulting covariance root.
    """
    _check_channel(config, chan)
    radar_cov = _hermitize(np.asarray(radar.covariance, dtype=complex))
    n = config.n_sc
    es = config.symbol_energy
    h = chan.per_subcarrier

    m_k = (n**2 / es) * np.einsum("krt,ts,kus->kru", h, radar_cov, h.conj())
    a_coef = np.sum(np.abs(m_k) ** 2, axis=(1, 2))
    b_coef = np.real(np.trace(m_k, axis1=1, axis2=2))

    def surrogate(alpha: np.ndarray) -> float:
        return float(a_coef @ alpha**2 - 2.0 * (b_coef @ alpha))

    alphas = solve_simplex_qp(SimplexQpProblem(objective=surrogate, dimension=n))

    precoders = np.zeros((n, config.n_tx, config.n_rx), dtype=complex)
    recon_err = 0.0
    eye = np.eye(config.n_tx)
    for k in range(n):
        if alphas[k] <= 0.0:
            continue  # dark subcarrier: nothing is transmitted here
        gamma = (alphas[k] * n**2 / es) * radar_cov
        gamma_tr = float(np.real(np.trace(gamma)))
        delta = RIDGE_SCALE * gamma_tr / config.n_tx
        try:
            chol = np.linalg.cholesky(gamma + delta * eye)
        except np.linalg.LinAlgError as exc:
            raise SolverError("covariance root factorization failed") from exc
        factor = solve_opp(chol.conj().T @ h[k].conj().T)
        w = chol @ factor
        w *= math.sqrt(gamma_tr / float(np.sum(np.abs(w) ** 2)))
        precoders[k] = w
        recon_err = max(recon_err, float(np.linalg.norm(w @ w.conj().T - gamma)))

    stream_powers = np.full((n, config.n_rx), es)
    pset = PrecoderSet(precoders=precoders, stream_powers=stream_powers)
    freq = alphas[:, None, None] * (n**2 * radar_cov)[None, :, :]
    covs = CovarianceSet(time_domain=freq.sum(axis=0) / n**2, freq_domain=freq)
    return StrictDesign(
        alphas=alphas,
        precoders=pset,
        covariances=covs,
        isi_value=isi_power(chan, pset),
        reconstruction_error=recon_err,
    )


def tradeoff1_precoder(
    h: np.ndarray,
    w_strict: np.ndarray,
    rho1: float,
    budget: float | None = None,
) -> tuple[np.ndarray, float]:
    """Single-subcarrier blend of the covariance-exact precoder with the
    interference-free one.

    Solves min rho1 ||H W - I||^2 + (1 - rho1) ||W - W_strict||^2 subject to
    ||W||_F^2 <= budget (the strict precoder's power by default). Returns the
    precoder and the power-cap multiplier. rho1 = 0 returns the strict
    precoder unchanged; rho1 = 1 with a slack cap returns the zero-forcing
    solution (pseudo-inverse for wide channels).
    """
    if not 0.0 <= rho1 <= 1.0:
        raise ValueError("rho1 must lie in [0, 1]")
    h = np.asarray(h, dtype=complex)
    w_strict = np.asarray(w_strict, dtype=complex)
    if budget is None:
        budget = float(np.sum(np.abs(w_strict) ** 2))
    if rho1 == 0.0:
        return w_strict.copy(), 0.0
    if budget <= 1e-15:
        return np.zeros_like(w_strict), math.inf

    gram = rho1 * (h.conj().T @ h)
    rhs = rho1 * h.conj().T + (1.0 - rho1) * w_strict
    eye = np.eye(h.shape[1])

    def candidate(lam: float) -> np.ndarray:
        shift = 1.0 - rho1 + lam
        if shift <= 0.0:  # rho1 = 1 at lam = 0: limiting zero-forcing solution
            return np.linalg.pinv(h)
        return np.linalg.solve(gram + shift * eye, rhs)

    def power(w: np.ndarray) -> float:
        return float(np.sum(np.abs(w) ** 2))

    w0 = candidate(0.0)
    if power(w0) <= budget * (1.0 + 1e-12):
        return w0, 0.0
    hi = 1.0
    for _ in range(200):
        if power(candidate(hi)) <= budget:
            break
        hi *= 2.0
    else:
        raise SolverError("power-cap bisection bracket failed to close")
    lo = 0.0
    for _ in range(90):  # ||W(lam)||^2 decreases monotonically in lam
        mid = 0.5 * (lo + hi)
        if power(candidate(mid)) > budget:
            lo = mid
        else:
            hi = mid
    return candidate(hi), hi


def design_tradeoff1(
    chan: FreqChannel, strict: StrictDesign, rho1: float, config: SystemConfig
) -> TradeoffDesign1:
    """Apply the per-subcarrier blend to every strict precoder."""
    _check_channel(config, chan)
    h = chan.per_subcarrier
    base = strict.precoders.precoders
    precoders = np.zeros_like(base)
    multipliers = np.zeros(config.n_sc)
    for k in range(config.n_sc):
        precoders[k], multipliers[k] = tradeoff1_precoder(h[k], base[k], rho1)
    pset = PrecoderSet(
        precoders=precoders, stream_powers=strict.precoders.stream_powers.copy()
    )
    return TradeoffDesign1(
        rho1=rho1,
        precoders=pset,
        multipliers=multipliers,
        isi_value=isi_power(chan, pset),
    )
