"""Domain types and the MIMO-OFDM signal model.

Conventions used throughout the package:

* ``n_tx`` transmit antennas, ``n_rx < n_tx`` receive antennas, ``n_sc``
  subcarriers, cyclic prefix of ``n_cp`` samples.
* The OFDM synthesis uses the 1/N-scaled IDFT,
  ``x(n) = (1/N) sum_k X(k) exp(j 2 pi n k / N)``, so the receiver-side
  unscaled DFT recovers ``X(k)`` exactly.
* Per-subcarrier transmit covariances are ``R_f(k) = W(k) P_S(k) W(k)^H`` and
  the time-domain covariance seen by the radar is their 1/N^2-scaled sum,
  ``R = (1/N^2) sum_k R_f(k)``.  The total transmit power is ``trace(R)``.
* Every stochastic operation takes an explicit seed or Generator; seeds are
  expanded with ``SeedSequence`` spawn keys so trials get independent streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "SystemConfig",
    "ArrayGeometry",
    "FreqChannel",
    "CovarianceSet",
    "PrecoderSet",
    "OfdmFrame",
    "rng_from",
    "complex_normal",
    "noise_var_from_snr_db",
    "steering_vector",
    "steering_derivative",
    "modulate_frame",
    "demodulate_frame",
    "propagate_time",
    "receive_freq",
    "covariance_from_precoders",
    "rayleigh_channel",
    "tap_channel",
    "save_channel",
    "load_channel",
]

HERMITIAN_TOL = 1e-12
PSD_EIG_TOL = -1e-10
COV_IDENTITY_TOL = 1e-10
POWER_TOL = 1e-9


def rng_from(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator for (seed, *stream) so every draw is replayable."""
    if seed < 0:
        raise ValueError("seed must be a nonnegative integer")
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream)))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian with unit variance, E|z|^2 = 1.

    Box-Muller form: sqrt(-log U1) * exp(j 2 pi U2) gives |z|^2 ~ Exp(1).
    """
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    u1 = np.maximum(u1, np.finfo(float).tiny)  # rng.random() can return 0.0
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)


def noise_var_from_snr_db(snr_db: float, total_power: float = 1.0) -> float:
    """Noise variance for a given SNR in dB under SNR = P_T / sigma_Z^2."""
    return total_power * 10.0 ** (-snr_db / 10.0)


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters shared by both design strategies."""

    n_tx: int
    n_rx: int
    n_sc: int
    n_cp: int
    total_power: float = 1.0
    noise_var: float = 1.0
    antenna_spacing: float = 0.5
    symbol_energy: float = 1.0

    def __post_init__(self) -> None:
        if min(self.n_tx, self.n_rx, self.n_sc) <= 0:
            raise ValueError("n_tx, n_rx and n_sc must be positive")
        if self.n_rx >= self.n_tx:
            raise ValueError("n_rx must be smaller than n_tx")
        if self.n_cp < 0:
            raise ValueError("n_cp must be nonnegative")
        for name in ("total_power", "noise_var", "antenna_spacing", "symbol_energy"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def geometry(self) -> "ArrayGeometry":
        return ArrayGeometry(n_tx=self.n_tx, spacing=self.antenna_spacing)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array, phase-referenced to the array center."""

    n_tx: int
    spacing: float = 0.5

    def __post_init__(self) -> None:
        if self.n_tx <= 0:
            raise ValueError("n_tx must be positive")
        if self.spacing <= 0:
            raise ValueError("spacing must be positive")

    @property
    def element_offsets(self) -> np.ndarray:
        """Element positions in units of spacing, antisymmetric about 0."""
        i = np.arange(1, self.n_tx + 1)
        return (2 * i - 1 - self.n_tx) / 2.0


def steering_vector(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Array response a(theta); entry i is exp(j 2 pi d_i spacing sin(theta))."""
    if abs(theta) > np.pi / 2 + 1e-12:
        raise ValueError("theta must satisfy |theta| <= pi/2")
    phase = 2.0 * np.pi * geom.element_offsets * geom.spacing * np.sin(theta)
    return np.exp(1j * phase)


def steering_derivative(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Entry-wise analytic derivative of steering_vector with respect to theta."""
    a = steering_vector(geom, theta)
    return 1j * 2.0 * np.pi * geom.element_offsets * geom.spacing * np.cos(theta) * a


# ---------------------------------------------------------------------------
# OFDM frames and time-domain propagation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OfdmFrame:
    """One OFDM symbol: frequency-domain loads and CP-extended time samples."""

    freq_symbols: np.ndarray  # (n_sc, n_streams)
    time_samples: np.ndarray  # (n_sc + n_cp, n_streams)
    n_cp: int


def modulate_frame(freq_symbols: np.ndarray, n_cp: int) -> OfdmFrame:
    """1/N-scaled IDFT of the subcarrier loads plus cyclic prefix."""
    freq_symbols = np.asarray(freq_symbols, dtype=complex)
    if freq_symbols.ndim != 2:
        raise ValueError("freq_symbols must be a 2-D array (n_sc, n_streams)")
    if n_cp < 0:
        raise ValueError("n_cp must be nonnegative")
    n_sc = freq_symbols.shape[0]
    if n_cp > n_sc:
        raise ValueError("cyclic prefix cannot exceed the symbol length")
    body = np.fft.ifft(freq_symbols, axis=0)  # ifft carries the 1/N factor
    if n_cp:
        time = np.concatenate([body[n_sc - n_cp:], body], axis=0)
    else:
        time = body
    return OfdmFrame(freq_symbols=freq_symbols, time_samples=time, n_cp=n_cp)


def demodulate_frame(time_samples: np.ndarray, n_cp: int) -> np.ndarray:
    """Drop the cyclic prefix and apply the unscaled DFT."""
    return np.fft.fft(np.asarray(time_samples, dtype=complex)[n_cp:], axis=0)


def propagate_time(frame: OfdmFrame, taps: np.ndarray) -> tuple[np.ndarray, bool]:
    """Noise-free linear convolution of the frame with MIMO channel taps.

    ``taps`` has shape (n_taps, n_rx, n_tx).  Returns the full convolution
    output of length n_samples + n_taps - 1 together with a flag marking the
    result as noise-free; callers add receiver noise themselves.
    """
    taps = np.asarray(taps, dtype=complex)
    if taps.ndim != 3:
        raise ValueError("taps must have shape (n_taps, n_rx, n_tx)")
    n_taps = taps.shape[0]
    if n_taps > frame.n_cp + 1:
        raise ValueError(
            f"channel needs {n_taps} taps but the cyclic prefix only covers "
            f"{frame.n_cp + 1}; inter-symbol contamination would break the model"
        )
    x = frame.time_samples
    n_samples = x.shape[0]
    n_rx = taps.shape[1]
    y = np.zeros((n_samples + n_taps - 1, n_rx), dtype=complex)
    for lag in range(n_taps):
        y[lag:lag + n_samples] += x @ taps[lag].T
    return y, True


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreqChannel:
    """Per-subcarrier channel matrices H(k), optionally backed by time taps."""

    per_subcarrier: np.ndarray  # (n_sc, n_rx, n_tx)
    time_taps: np.ndarray | None = None  # (n_taps, n_rx, n_tx)
    seed: int | None = None

    @property
    def n_sc(self) -> int:
        return self.per_subcarrier.shape[0]

    @property
    def n_rx(self) -> int:
        return self.per_subcarrier.shape[1]

    @property
    def n_tx(self) -> int:
        return self.per_subcarrier.shape[2]

    def validate(self) -> None:
        if self.per_subcarrier.ndim != 3:
            raise ValueError("per_subcarrier must have shape (n_sc, n_rx, n_tx)")
        if self.time_taps is not None:
            spectrum = np.fft.fft(self.time_taps, n=self.n_sc, axis=0)
            scale = max(np.abs(spectrum).max(), 1.0)
            err = np.abs(spectrum - self.per_subcarrier).max() / scale
            if err > 1e-10:
                raise ValueError(
                    f"per-subcarrier matrices disagree with the tap DFT (rel err {err:.2e})"
                )


def rayleigh_channel(config: SystemConfig, seed: int, *stream: int) -> FreqChannel:
    """i.i.d. unit-variance complex Gaussian H(k) per subcarrier."""
    rng = rng_from(seed, *stream)
    h = complex_normal(rng, (config.n_sc, config.n_rx, config.n_tx))
    return FreqChannel(per_subcarrier=h, seed=seed)


def tap_channel(config: SystemConfig, n_taps: int, seed: int, *stream: int) -> FreqChannel:
    """Tap-based channel with a uniform power-delay profile summing to unit power."""
    if n_taps < 1:
        raise ValueError("n_taps must be at least 1")
    if n_taps > config.n_cp + 1:
        raise ValueError("n_taps must not exceed n_cp + 1")
    rng = rng_from(seed, *stream)
    taps = complex_normal(rng, (n_taps, config.n_rx, config.n_tx)) / np.sqrt(n_taps)
    spectrum = np.fft.fft(taps, n=config.n_sc, axis=0)
    return FreqChannel(per_subcarrier=spectrum, time_taps=taps, seed=seed)


def save_channel(chan: FreqChannel, path: Path | str) -> None:
    """Persist a channel realization to JSON with exact float round-trip."""
    entries = []
    for k in range(chan.n_sc):
        flat = chan.per_subcarrier[k].reshape(-1)
        entries.append([[float(z.real), float(z.imag)] for z in flat])
    payload = {
        "n_tx": chan.n_tx,
        "n_rx": chan.n_rx,
        "n_sc": chan.n_sc,
        "seed": chan.seed,
        "entries": entries,
    }
    Path(path).write_text(json.dumps(payload))


def load_channel(path: Path | str) -> FreqChannel:
    payload = json.loads(Path(path).read_text())
    n_sc, n_rx, n_tx = payload["n_sc"], payload["n_rx"], payload["n_tx"]
    h = np.empty((n_sc, n_rx, n_tx), dtype=complex)
    for k, flat in enumerate(payload["entries"]):
        arr = np.asarray(flat, dtype=float)
        h[k] = (arr[:, 0] + 1j * arr[:, 1]).reshape(n_rx, n_tx)
    return FreqChannel(per_subcarrier=h, seed=payload["seed"])


# ---------------------------------------------------------------------------
# covariances and precoders
# ---------------------------------------------------------------------------


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m.conj(), -1, -2))


@dataclass(frozen=True)
class CovarianceSet:
    """Time-domain covariance R and the per-subcarrier R_f(k) it aggregates."""

    time_domain: np.ndarray  # (n_tx, n_tx)
    freq_domain: np.ndarray  # (n_sc, n_tx, n_tx)

    @property
    def n_sc(self) -> int:
        return self.freq_domain.shape[0]

    def validate(self, expected_trace: float | None = None) -> None:
        mats = np.concatenate([self.time_domain[None], self.freq_domain], axis=0)
        herm = np.abs(mats - np.swapaxes(mats.conj(), -1, -2)).max()
        scale = max(1.0, np.abs(mats).max())
        if herm > HERMITIAN_TOL * scale:
            raise ValueError(f"covariance not Hermitian (residual {herm:.2e})")
        eigmin = min(np.linalg.eigvalsh(_hermitize(m)).min() for m in mats)
        if eigmin < PSD_EIG_TOL * scale:
            raise ValueError(f"covariance not PSD (min eigenvalue {eigmin:.2e})")
        n_sc = self.n_sc
        aggregate = self.freq_domain.sum(axis=0) / n_sc**2
        err = np.abs(aggregate - self.time_domain).max()
        if err > COV_IDENTITY_TOL * scale:
            raise ValueError(
                f"time covariance disagrees with the 1/N^2-scaled subcarrier sum ({err:.2e})"
            )
        if expected_trace is not None:
            tr = float(np.trace(self.time_domain).real)
            if abs(tr - expected_trace) > POWER_TOL:
                raise ValueError(
                    f"trace(R) = {tr!r} but the design should use {expected_trace!r}"
                )


@dataclass(frozen=True)
class PrecoderSet:
    """Per-subcarrier precoders W(k) with diagonal stream powers P_S(k).

    ``stream_powers`` stores the diagonals, shape (n_sc, n_rx).
    """

    precoders: np.ndarray  # (n_sc, n_tx, n_rx)
    stream_powers: np.ndarray  # (n_sc, n_rx)

    @property
    def n_sc(self) -> int:
        return self.precoders.shape[0]

    @property
    def n_tx(self) -> int:
        return self.precoders.shape[1]

    @property
    def n_rx(self) -> int:
        return self.precoders.shape[2]

    def total_power(self) -> float:
        """(1/N^2) sum_k trace(W(k) P_S(k) W(k)^H)."""
        col_norms = np.sum(np.abs(self.precoders) ** 2, axis=1)  # (n_sc, n_rx)
        return float(np.sum(col_norms * self.stream_powers)) / self.n_sc**2

    def validate(self, power_budget: float | None = None) -> None:
        if self.precoders.ndim != 3 or self.stream_powers.ndim != 2:
            raise ValueError("precoders must be (n_sc, n_tx, n_rx), powers (n_sc, n_rx)")
        if self.stream_powers.shape != (self.n_sc, self.n_rx):
            raise ValueError("stream_powers shape disagrees with precoders")
        if self.stream_powers.min() < 0:
            raise ValueError("stream powers must be nonnegative")
        if power_budget is not None and self.total_power() > power_budget + POWER_TOL:
            raise ValueError(
                f"total power {self.total_power()!r} exceeds the budget {power_budget!r}"
            )


def covariance_from_precoders(precoders: PrecoderSet) -> CovarianceSet:
    """R_f(k) = W(k) P_S(k) W(k)^H and the 1/N^2-scaled aggregate R."""
    w = precoders.precoders
    scaled = w * precoders.stream_powers[:, None, :]
    rf = _hermitize(scaled @ np.swapaxes(w.conj(), -1, -2))
    r = _hermitize(rf.sum(axis=0) / precoders.n_sc**2)
    return CovarianceSet(time_domain=r, freq_domain=rf)


def receive_freq(
    chan: FreqChannel,
    precoders: PrecoderSet,
    symbols: np.ndarray,
    noise_var: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-subcarrier received vectors Y(k) = H(k) W(k) S(k) + Z(k)."""
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape != (chan.n_sc, precoders.n_rx):
        raise ValueError("symbols must have shape (n_sc, n_rx)")
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    tx = np.einsum("ktr,kr->kt", precoders.precoders, symbols)
    y = np.einsum("krt,kt->kr", chan.per_subcarrier, tx)
    if noise_var > 0:
        if rng is None:
            raise ValueError("an rng is required when noise_var > 0")
        y = y + np.sqrt(noise_var) * complex_normal(rng, y.shape)
    return y
