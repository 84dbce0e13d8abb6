"""Monte-Carlo experiment driver: SER/rate sweeps over SNR and trade-off
factor, beampattern and CRB reports, and SQP convergence traces.

Determinism is a hard contract here: every random stream derives from
(seed, purpose, trial) so that channels, symbols and noise are common across
strategies, factors and SNR points, and output CSVs are byte-identical for a
fixed config regardless of the worker count.
"""

from __future__ import annotations

import dataclasses
import json
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import armax as _armax
from . import isi_min as _isi
from .model import (
    FreqChannel,
    PrecoderSet,
    SystemConfig,
    complex_normal,
    covariance_from_precoders,
    noise_var_from_snr_db,
    rayleigh_channel,
    rng_from,
)
from .radar import (
    BeamPattern,
    RadarOnlyDesign,
    RadarScene,
    beampattern,
    beampattern_nmse,
    crb,
    design_radar_only,
)
from .solvers import SolverError, SqpResult, write_sqp_trace

__all__ = [
    "Strategy",
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "ExperimentResult",
    "BeampatternReport",
    "run_ser_sweep",
    "run_tradeoff_sweep",
    "run_beampattern_report",
    "run_sqp_convergence",
    "design_outcome",
    "simulate_frames",
]

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2.0)

MAX_RESAMPLES = 3
LOW_CONFIDENCE_ERRORS = 100  # fewer observed errors than this flags the row

RESULT_COLUMNS = (
    "strategy",
    "rho",
    "snr_db",
    "ser",
    "rate_bits_per_sc_use",
    "rate_ideal",
    "nmse",
    "normalized_crb",
    "sqp_iterations",
    "low_confidence",
    "rate_gap_min",
)

RATE_COLUMNS = (
    "strategy",
    "rho",
    "snr_db",
    "rate_bits_per_sc_use",
    "rate_ideal",
    "rate_gap_min",
)


class Strategy(str, Enum):
    ISI_MIN_STRICT = "isi_min_strict"
    ISI_MIN_TRADEOFF = "isi_min_tradeoff"
    ARMAX_TRADEOFF = "armax_tradeoff"
    COMM_ONLY = "comm_only"
    RADAR_ONLY = "radar_only"


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


_DATA_STRATEGIES = (
    Strategy.ISI_MIN_STRICT,
    Strategy.ISI_MIN_TRADEOFF,
    Strategy.ARMAX_TRADEOFF,
    Strategy.COMM_ONLY,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: strategies x trade-off factors x SNR grid."""

    system: SystemConfig
    scene: RadarScene
    strategy: tuple[Strategy, ...]
    tradeoff_factors: tuple[float, ...] = ()
    snr_db_list: tuple[float, ...] = (20.0,)
    n_trials: int = 50
    n_symbols: int = 200
    seed: int = 1
    output_dir: Path = Path("out")

    def __post_init__(self) -> None:
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.strategy:
            raise ConfigError("at least one strategy is required")
        if self.n_trials < 1 or self.n_symbols < 1:
            raise ConfigError("n_trials and n_symbols must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must be nonempty")
        for strat in self.strategy:
            if strat == Strategy.ISI_MIN_TRADEOFF:
                if any(not 0.0 <= r <= 1.0 for r in self.tradeoff_factors):
                    raise ConfigError("isi_min_tradeoff factors must lie in [0, 1]")
                if not self.tradeoff_factors:
                    raise ConfigError("isi_min_tradeoff requires tradeoff_factors")
            if strat == Strategy.ARMAX_TRADEOFF:
                if any(not 0.0 < r <= 1.0 for r in self.tradeoff_factors):
                    raise ConfigError("armax_tradeoff factors must lie in (0, 1]")
                if not self.tradeoff_factors:
                    raise ConfigError("armax_tradeoff requires tradeoff_factors")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {
            "system",
            "scene",
            "strategy",
            "tradeoff_factors",
            "snr_db_list",
            "n_trials",
            "n_symbols",
            "seed",
            "output_dir",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "strategy" not in raw:
            raise ConfigError("config requires a 'strategy' entry")
        sys_raw = dict(raw.get("system", {}))
        sys_known = {
            "n_tx",
            "n_rx",
            "n_sc",
            "n_cp",
            "total_power",
            "antenna_spacing",
            "symbol_energy",
        }
        sys_unknown = set(sys_raw) - sys_known
        if sys_unknown:
            raise ConfigError(f"unknown system keys: {sorted(sys_unknown)}")
        try:
            system = SystemConfig(
                n_tx=int(sys_raw.get("n_tx", 20)),
                n_rx=int(sys_raw.get("n_rx", 10)),
                n_sc=int(sys_raw.get("n_sc", 16)),
                n_cp=int(sys_raw.get("n_cp", 4)),
                total_power=float(sys_raw.get("total_power", 1.0)),
                antenna_spacing=float(sys_raw.get("antenna_spacing", 0.5)),
                symbol_energy=float(sys_raw.get("symbol_energy", 1.0)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        scene_raw = dict(raw.get("scene", {}))
        scene_unknown = set(scene_raw) - {"theta_deg", "snr"}
        if scene_unknown:
            raise ConfigError(f"unknown scene keys: {sorted(scene_unknown)}")
        try:
            scene = RadarScene(
                theta=math.radians(float(scene_raw.get("theta_deg", 0.0))),
                snr=float(scene_raw.get("snr", 1.0)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        strat_raw = raw["strategy"]
        if isinstance(strat_raw, str):
            strat_raw = [strat_raw]
        try:
            strategies = tuple(Strategy(s) for s in strat_raw)
        except ValueError as exc:
            raise ConfigError(f"unknown strategy: {exc}") from exc
        return cls(
            system=system,
            scene=scene,
            strategy=strategies,
            tradeoff_factors=tuple(
                float(r) for r in raw.get("tradeoff_factors", ())
            ),
            snr_db_list=tuple(float(s) for s in raw.get("snr_db_list", (20.0,))),
            n_trials=int(raw.get("n_trials", 50)),
            n_symbols=int(raw.get("n_symbols", 200)),
            seed=int(raw.get("seed", 1)),
            output_dir=Path(raw.get("output_dir", "out")),
        )

    @classmethod
    def from_json(cls, path: Path | str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "system": {
                "n_tx": self.system.n_tx,
                "n_rx": self.system.n_rx,
                "n_sc": self.system.n_sc,
                "n_cp": self.system.n_cp,
                "total_power": self.system.total_power,
                "antenna_spacing": self.system.antenna_spacing,
                "symbol_energy": self.system.symbol_energy,
            },
            "scene": {
                "theta_deg": math.degrees(self.scene.theta),
                "snr": self.scene.snr,
            },
            "strategy": [s.value for s in self.strategy],
            "tradeoff_factors": list(self.tradeoff_factors),
            "snr_db_list": list(self.snr_db_list),
            "n_trials": self.n_trials,
            "n_symbols": self.n_symbols,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
        }


@dataclass(frozen=True)
class ResultRow:
    strategy: str
    rho: float
    snr_db: float
    ser: float
    rate_bits_per_sc_use: float
    rate_ideal: float
    nmse: float
    normalized_crb: float
    sqp_iterations: int
    low_confidence: bool
    rate_gap_min: float
    wall_time_ms: float  # not serialized: timing must not break determinism


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ResultRow, ...]
    resampled_trials: int = 0

    def to_csv(self, path: Path | str, columns: tuple[str, ...] = RESULT_COLUMNS) -> None:
        lines = [",".join(columns)]
        for row in self.rows:
            cells = []
            for col in columns:
                value = getattr(row, col)
                if isinstance(value, bool):
                    cells.append(str(int(value)))
                elif isinstance(value, float):
                    cells.append(repr(value))
                else:
                    cells.append(str(value))
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# frame-level simulation


def _slice_qpsk(values: np.ndarray) -> np.ndarray:
    """Map complex decisions to QPSK indices by quadrant."""
    re = values.real >= 0
    im = values.imag >= 0
    return np.where(im, np.where(re, 0, 1), np.where(re, 3, 2))


def simulate_frames(
    chan: FreqChannel,
    precoders: PrecoderSet,
    symbol_indices: np.ndarray,
    unit_noise: np.ndarray,
    noise_var: float,
    receiver: str = "slice",
    equalizer_powers: np.ndarray | None = None,
) -> tuple[int, int]:
    """Run QPSK frames through the precoded channel; return (errors, decisions).

    ``symbol_indices`` has shape (n_frames, n_sc, n_streams) and ``unit_noise``
    (n_frames, n_sc, n_rx); noise is scaled by sqrt(noise_var) so the same
    draws serve every SNR point. The "slice" receiver makes per-antenna
    decisions (interference-free designs aim at H W = I); "mmse" applies a
    per-subcarrier linear equalizer assuming symbol powers
    ``equalizer_powers``. Zero-power streams carry no symbols and are
    excluded from the count.
    """
    h = chan.per_subcarrier
    w = precoders.precoders
    powers = precoders.stream_powers
    effective = h @ w  # (n_sc, n_rx, n_streams)
    amps = np.sqrt(powers)
    sent = amps[None, :, :] * QPSK[symbol_indices]
    received = np.einsum("krs,fks->fkr", effective, sent)
    if noise_var > 0:
        received = received + math.sqrt(noise_var) * unit_noise
    counted = powers > 0
    if receiver == "slice":
        estimates = received
    elif receiver == "mmse":
        p_eq = powers if equalizer_powers is None else equalizer_powers
        n_sc, n_rx, n_streams = effective.shape
        gains = np.zeros((n_sc, n_streams, n_rx), dtype=complex)
        eye = np.eye(n_rx)
        for k in range(n_sc):
            a = effective[k]
            pa = p_eq[k][None, :] * a  # A P_eq, shape (n_rx, n_streams)
            cov = pa @ a.conj().T + noise_var * eye
            gains[k] = (p_eq[k][:, None] * a.conj().T) @ np.linalg.inv(cov)
        estimates = np.einsum("ksr,fkr->fks", gains, received)
    else:
        raise ValueError("receiver must be 'slice' or 'mmse'")
    decisions = _slice_qpsk(estimates)
    errors = int(np.sum((decisions != symbol_indices) & counted[None, :, :]))
    total = int(symbol_indices.shape[0] * counted.sum())
    return errors, total


# ---------------------------------------------------------------------------
# per-trial jobs


@dataclass
class _Job:
    precoders: PrecoderSet
    receiver: str
    equalizer_powers: np.ndarray | None
    rate: float
    rate_ideal: float
    nmse: float
    normalized_crb: float
    sqp_iterations: int
    rate_gap: float


def _factors_for(strategy: Strategy, config: ExperimentConfig) -> tuple[float, ...]:
    if strategy == Strategy.ISI_MIN_STRICT:
        return (0.0,)
    if strategy == Strategy.COMM_ONLY:
        return (1.0,)
    if strategy == Strategy.RADAR_ONLY:
        return (0.0,)
    return config.tradeoff_factors


def grid_keys(config: ExperimentConfig) -> list[tuple[str, float, float]]:
    """Deterministic row order: strategy, then factor, then SNR."""
    keys = []
    for strategy in config.strategy:
        for rho in _factors_for(strategy, config):
            for snr in config.snr_db_list:
                keys.append((strategy.value, rho, snr))
    return keys


def _radar_metrics(
    config: ExperimentConfig,
    radar: RadarOnlyDesign,
    strict_pattern: BeamPattern,
    cov_time: np.ndarray,
) -> tuple[float, float]:
    geom = config.system.geometry
    pattern = beampattern(geom, cov_time)
    nmse = beampattern_nmse(strict_pattern, pattern)
    crb_norm = crb(geom, config.scene, cov_time) / radar.achieved_crb
    return nmse, crb_norm


def _build_trial_jobs(
    config: ExperimentConfig,
    chan: FreqChannel,
    radar: RadarOnlyDesign,
    strict_pattern: BeamPattern,
) -> dict[tuple[str, float, float], _Job]:
    """All designs a trial needs, validated before any simulation."""
    sys0 = config.system
    p_t = sys0.total_power
    jobs: dict[tuple[str, float, float], _Job] = {}
    strict = None
    if (
        Strategy.ISI_MIN_STRICT in config.strategy
        or Strategy.ISI_MIN_TRADEOFF in config.strategy
    ):
        strict = _isi.design_strict(chan, radar, sys0)
        strict.covariances.validate(expected_trace=p_t)
        strict.precoders.validate(power_budget=p_t)

    for strategy in config.strategy:
        for rho in _factors_for(strategy, config):
            if strategy == Strategy.ISI_MIN_STRICT:
                nmse, crb_norm = _radar_metrics(
                    config, radar, strict_pattern, strict.covariances.time_domain
                )
                for snr in config.snr_db_list:
                    noise_var = noise_var_from_snr_db(snr, p_t)
                    rate = _isi.rate_isi(chan, strict.precoders, None, noise_var)
                    jobs[(strategy.value, rho, snr)] = _Job(
                        precoders=strict.precoders,
                        receiver="slice",
                        equalizer_powers=None,
                        rate=rate,
                        rate_ideal=rate,
                        nmse=nmse,
                        normalized_crb=crb_norm,
                        sqp_iterations=0,
                        rate_gap=0.0,
                    )
            elif strategy == Strategy.ISI_MIN_TRADEOFF:
                design = _isi.design_tradeoff1(chan, strict, rho, sys0)
                design.precoders.validate(power_budget=p_t)
                induced = covariance_from_precoders(design.precoders)
                induced.validate()
                nmse, crb_norm = _radar_metrics(
                    config, radar, strict_pattern, induced.time_domain
                )
                for snr in config.snr_db_list:
                    noise_var = noise_var_from_snr_db(snr, p_t)
                    rate = _isi.rate_isi(chan, design.precoders, None, noise_var)
                    jobs[(strategy.value, rho, snr)] = _Job(
                        precoders=design.precoders,
                        receiver="slice",
                        equalizer_powers=None,
                        rate=rate,
                        rate_ideal=rate,
                        nmse=nmse,
                        normalized_crb=crb_norm,
                        sqp_iterations=0,
                        rate_gap=0.0,
                    )
            elif strategy == Strategy.COMM_ONLY:
                for snr in config.snr_db_list:
                    noise_var = noise_var_from_snr_db(snr, p_t)
                    design = _armax.design_comm_only(chan, p_t, noise_var)
                    design.precoders.validate(power_budget=p_t)
                    design.covariances.validate(expected_trace=p_t)
                    nmse, crb_norm = _radar_metrics(
                        config, radar, strict_pattern, design.covariances.time_domain
                    )
                    jobs[(strategy.value, rho, snr)] = _Job(
                        precoders=design.precoders,
                        receiver="mmse",
                        equalizer_powers=design.precoders.stream_powers,
                        rate=design.rate,
                        rate_ideal=design.rate,
                        nmse=nmse,
                        normalized_crb=crb_norm,
                        sqp_iterations=0,
                        rate_gap=0.0,
                    )
            elif strategy == Strategy.ARMAX_TRADEOFF:
                for snr in config.snr_db_list:
                    noise_var = noise_var_from_snr_db(snr, p_t)
                    sys_snr = dataclasses.replace(sys0, noise_var=noise_var)
                    design = _armax.design_tradeoff2(chan, radar, rho, sys_snr)
                    design.precoders.validate(power_budget=p_t)
                    design.covariances.validate(expected_trace=p_t)
                    nmse, crb_norm = _radar_metrics(
                        config, radar, strict_pattern, design.covariances.time_domain
                    )
                    jobs[(strategy.value, rho, snr)] = _Job(
                        precoders=design.precoders,
                        receiver="mmse",
                        equalizer_powers=design.precoders.stream_powers / rho,
                        rate=design.rate_actual,
                        rate_ideal=design.rate_ideal,
                        nmse=nmse,
                        normalized_crb=crb_norm,
                        sqp_iterations=design.sqp.n_iterations,
                        rate_gap=design.rate_ideal - design.rate_actual,
                    )
            elif strategy == Strategy.RADAR_ONLY:
                raise ConfigError(
                    "radar_only carries no data streams; use run_beampattern_report"
                )
    return jobs


@dataclass
class _KeyStats:
    errors: int = 0
    decisions: int = 0
    rate_sum: float = 0.0
    rate_ideal_sum: float = 0.0
    nmse_sum: float = 0.0
    crb_norm_sum: float = 0.0
    sqp_iterations: int = 0
    rate_gap_min: float = math.inf
    wall_time_ms: float = 0.0

    def merge(self, other: "_KeyStats") -> None:
        self.errors += other.errors
        self.decisions += other.decisions
        self.rate_sum += other.rate_sum
        self.rate_ideal_sum += other.rate_ideal_sum
        self.nmse_sum += other.nmse_sum
        self.crb_norm_sum += other.crb_norm_sum
        self.sqp_iterations = max(self.sqp_iterations, other.sqp_iterations)
        self.rate_gap_min = min(self.rate_gap_min, other.rate_gap_min)
        self.wall_time_ms += other.wall_time_ms


def _run_trial(
    config: ExperimentConfig, trial: int
) -> tuple[dict[tuple[str, float, float], _KeyStats], int]:
    """Design + simulate one channel realization; resample on design failure."""
    started = time.perf_counter()
    geom = config.system.geometry
    radar = design_radar_only(geom, config.scene, config.system.total_power)
    strict_pattern = beampattern(geom, radar.covariance)

    jobs = None
    resamples = 0
    for attempt in range(MAX_RESAMPLES + 1):
        chan = rayleigh_channel(config.system, config.seed, 0, trial, attempt)
        try:
            jobs = _build_trial_jobs(config, chan, radar, strict_pattern)
            break
        except (SolverError, np.linalg.LinAlgError):
            resamples += 1
    else:
        raise SolverError(
            f"trial {trial}: design failed after {MAX_RESAMPLES} channel resamples"
        )

    n_streams = min(config.system.n_rx, config.system.n_tx)
    symbol_rng = rng_from(config.seed, 1, trial)
    symbol_indices = symbol_rng.integers(
        0, 4, size=(config.n_symbols, config.system.n_sc, n_streams)
    )
    noise_rng = rng_from(config.seed, 2, trial)
    unit_noise = complex_normal(
        noise_rng, (config.n_symbols, config.system.n_sc, config.system.n_rx)
    )

    stats: dict[tuple[str, float, float], _KeyStats] = {}
    for key, job in jobs.items():
        tick = time.perf_counter()
        noise_var = noise_var_from_snr_db(key[2], config.system.total_power)
        errors, decisions = simulate_frames(
            chan,
            job.precoders,
            symbol_indices[:, :, : job.precoders.stream_powers.shape[1]],
            unit_noise,
            noise_var,
            receiver=job.receiver,
            equalizer_powers=job.equalizer_powers,
        )
        stats[key] = _KeyStats(
            errors=errors,
            decisions=decisions,
            rate_sum=job.rate,
            rate_ideal_sum=job.rate_ideal,
            nmse_sum=job.nmse,
            crb_norm_sum=job.normalized_crb,
            sqp_iterations=job.sqp_iterations,
            rate_gap_min=job.rate_gap if key[0] == Strategy.ARMAX_TRADEOFF.value else 0.0,
            wall_time_ms=(time.perf_counter() - tick) * 1e3,
        )
    # charge the shared design time to the first key to keep totals honest
    if stats:
        first = next(iter(stats.values()))
        first.wall_time_ms += (time.perf_counter() - started) * 1e3 - sum(
            s.wall_time_ms for s in stats.values()
        )
    return stats, resamples


def _trial_worker(args: tuple[ExperimentConfig, int]):
    return _run_trial(*args)


def _run_grid(config: ExperimentConfig, threads: int) -> ExperimentResult:
    keys = grid_keys(config)
    totals: dict[tuple[str, float, float], _KeyStats] = {k: _KeyStats() for k in keys}
    resampled = 0
    trials = range(config.n_trials)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_trial_worker, [(config, t) for t in trials]))
    else:
        outcomes = [_run_trial(config, t) for t in trials]
    for stats, resamples in outcomes:  # trial order fixes the reduction order
        resampled += resamples
        for key, stat in stats.items():
            totals[key].merge(stat)

    rows = []
    for key in keys:
        stat = totals[key]
        ser = stat.errors / stat.decisions if stat.decisions else 0.0
        rows.append(
            ResultRow(
                strategy=key[0],
                rho=key[1],
                snr_db=key[2],
                ser=ser,
                rate_bits_per_sc_use=stat.rate_sum / config.n_trials,
                rate_ideal=stat.rate_ideal_sum / config.n_trials,
                nmse=stat.nmse_sum / config.n_trials,
                normalized_crb=stat.crb_norm_sum / config.n_trials,
                sqp_iterations=stat.sqp_iterations,
                low_confidence=stat.errors < LOW_CONFIDENCE_ERRORS,
                rate_gap_min=(
                    stat.rate_gap_min if math.isfinite(stat.rate_gap_min) else 0.0
                ),
                wall_time_ms=stat.wall_time_ms,
            )
        )
    return ExperimentResult(rows=tuple(rows), resampled_trials=resampled)


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        return out.stdout.strip() if out.returncode == 0 else "unknown"
    except OSError:
        return "unknown"


def _write_manifest(
    config: ExperimentConfig, out_dir: Path, extra: dict | None = None
) -> None:
    manifest = {
        "config": config.to_dict(),
        "git_describe": _git_describe(),
        "package": "dfrcwave",
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_out(config: ExperimentConfig) -> Path:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def run_ser_sweep(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """SER and rate against SNR for every configured strategy and factor."""
    for strat in config.strategy:
        if strat not in _DATA_STRATEGIES:
            raise ConfigError(f"{strat.value} carries no data streams")
    out_dir = _prepare_out(config)
    result = _run_grid(config, threads)
    result.to_csv(out_dir / "fig1_ser.csv")
    result.to_csv(out_dir / "fig2_rate.csv", columns=RATE_COLUMNS)
    _write_manifest(config, out_dir, {"resampled_trials": result.resampled_trials})
    return result


def run_tradeoff_sweep(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """SER and rate against the trade-off factor at fixed SNR points."""
    for strat in config.strategy:
        if strat not in _DATA_STRATEGIES:
            raise ConfigError(f"{strat.value} carries no data streams")
    out_dir = _prepare_out(config)
    result = _run_grid(config, threads)
    result.to_csv(out_dir / "fig3_ser.csv")
    result.to_csv(out_dir / "fig4_rate.csv", columns=RATE_COLUMNS)
    _write_manifest(config, out_dir, {"resampled_trials": result.resampled_trials})
    return result


@dataclass(frozen=True)
class BeampatternReport:
    patterns: dict[str, BeamPattern]  # label -> trial-0 pattern
    table: ExperimentResult  # trial-averaged NMSE / normalized CRB rows


def run_beampattern_report(config: ExperimentConfig, threads: int = 1) -> BeampatternReport:
    """Beampatterns for the strict design and each trade-off factor, with
    trial-averaged NMSE and normalized-CRB columns (SER fields unused)."""
    out_dir = _prepare_out(config)
    geom = config.system.geometry
    radar = design_radar_only(geom, config.scene, config.system.total_power)
    strict_pattern = beampattern(geom, radar.covariance)
    snr0 = config.snr_db_list[0]
    noise_var = noise_var_from_snr_db(snr0, config.system.total_power)
    sys_snr = dataclasses.replace(config.system, noise_var=noise_var)

    patterns: dict[str, BeamPattern] = {"radar_only": strict_pattern}
    keys: list[tuple[str, float]] = []
    sums: dict[tuple[str, float], list[float]] = {}
    for strategy in config.strategy:
        if strategy == Strategy.RADAR_ONLY:
            continue
        for rho in _factors_for(strategy, config):
            keys.append((strategy.value, rho))
            sums[(strategy.value, rho)] = [0.0, 0.0]

    for trial in range(config.n_trials):
        chan = rayleigh_channel(config.system, config.seed, 0, trial, 0)
        strict = None
        if (
            Strategy.ISI_MIN_STRICT in config.strategy
            or Strategy.ISI_MIN_TRADEOFF in config.strategy
        ):
            strict = _isi.design_strict(chan, radar, config.system)
        for strategy, rho in keys:
            if strategy == Strategy.ISI_MIN_STRICT.value:
                cov_time = strict.covariances.time_domain
            elif strategy == Strategy.ISI_MIN_TRADEOFF.value:
                design = _isi.design_tradeoff1(chan, strict, rho, config.system)
                cov_time = covariance_from_precoders(design.precoders).time_domain
            elif strategy == Strategy.COMM_ONLY.value:
                design = _armax.design_comm_only(chan, config.system.total_power, noise_var)
                cov_time = design.covariances.time_domain
            else:
                design = _armax.design_tradeoff2(chan, radar, rho, sys_snr)
                cov_time = design.covariances.time_domain
            nmse, crb_norm = _radar_metrics(config, radar, strict_pattern, cov_time)
            sums[(strategy, rho)][0] += nmse
            sums[(strategy, rho)][1] += crb_norm
            if trial == 0:
                label = f"{strategy}_rho{rho:g}"
                patterns[label] = beampattern(geom, cov_time)

    rows = []
    for strategy, rho in keys:
        nmse_mean = sums[(strategy, rho)][0] / config.n_trials
        crb_mean = sums[(strategy, rho)][1] / config.n_trials
        rows.append(
            ResultRow(
                strategy=strategy,
                rho=rho,
                snr_db=snr0,
                ser=0.0,
                rate_bits_per_sc_use=0.0,
                rate_ideal=0.0,
                nmse=nmse_mean,
                normalized_crb=crb_mean,
                sqp_iterations=0,
                low_confidence=False,
                rate_gap_min=0.0,
                wall_time_ms=0.0,
            )
        )
    table = ExperimentResult(rows=tuple(rows))
    for label, pattern in patterns.items():
        pattern.to_csv(out_dir / f"beampattern_{label}.csv")
    table.to_csv(out_dir / "fig8_nmse.csv", columns=("strategy", "rho", "nmse"))
    table.to_csv(
        out_dir / "fig9_crb.csv", columns=("strategy", "rho", "normalized_crb")
    )
    _write_manifest(config, out_dir)
    return BeampatternReport(patterns=patterns, table=table)


def run_sqp_convergence(config: ExperimentConfig, threads: int = 1) -> dict[float, SqpResult]:
    """Weight-optimization traces for each factor on the trial-0 channel."""
    if Strategy.ARMAX_TRADEOFF not in config.strategy:
        raise ConfigError("sqp traces require the armax_tradeoff strategy")
    out_dir = _prepare_out(config)
    geom = config.system.geometry
    radar = design_radar_only(geom, config.scene, config.system.total_power)
    chan = rayleigh_channel(config.system, config.seed, 0, 0, 0)
    noise_var = noise_var_from_snr_db(config.snr_db_list[0], config.system.total_power)
    sys_snr = dataclasses.replace(config.system, noise_var=noise_var)
    traces: dict[float, SqpResult] = {}
    summary = ["rho,iterations,converged,objective"]
    for rho in config.tradeoff_factors:
        design = _armax.design_tradeoff2(chan, radar, rho, sys_snr)
        traces[rho] = design.sqp
        write_sqp_trace(design.sqp, out_dir / f"sqp_trace_rho{rho:g}.csv")
        summary.append(
            f"{rho:g},{design.sqp.n_iterations},{int(design.sqp.converged)},"
            f"{design.sqp.objective!r}"
        )
    (out_dir / "sqp_summary.csv").write_text("\n".join(summary) + "\n")
    _write_manifest(config, out_dir)
    return traces


# ---------------------------------------------------------------------------
# single-design export


def _complex_to_lists(arr: np.ndarray) -> dict:
    return {"re": np.real(arr).tolist(), "im": np.imag(arr).tolist()}


def design_outcome(
    config: ExperimentConfig, strategy: Strategy, rho: float
) -> dict:
    """One design on the trial-0 channel, serialized for the CLI."""
    geom = config.system.geometry
    radar = design_radar_only(geom, config.scene, config.system.total_power)
    strict_pattern = beampattern(geom, radar.covariance)
    chan = rayleigh_channel(config.system, config.seed, 0, 0, 0)
    noise_var = noise_var_from_snr_db(
        config.snr_db_list[0], config.system.total_power
    )
    out: dict = {"strategy": strategy.value, "rho": rho, "seed": config.seed}
    if strategy == Strategy.RADAR_ONLY:
        out["covariance"] = _complex_to_lists(radar.covariance)
        out["achieved_crb"] = radar.achieved_crb
        return out
    if strategy in (Strategy.ISI_MIN_STRICT, Strategy.ISI_MIN_TRADEOFF):
        strict = _isi.design_strict(chan, radar, config.system)
        if strategy == Strategy.ISI_MIN_STRICT:
            pset = strict.precoders
            cov_time = strict.covariances.time_domain
            out["alphas"] = strict.alphas.tolist()
        else:
            design = _isi.design_tradeoff1(chan, strict, rho, config.system)
            pset = design.precoders
            cov_time = covariance_from_precoders(pset).time_domain
            out["alphas"] = strict.alphas.tolist()
            out["multipliers"] = list(design.multipliers)
        nmse, crb_norm = _radar_metrics(config, radar, strict_pattern, cov_time)
        out["precoders"] = _complex_to_lists(pset.precoders)
        out["achieved_crb"] = crb(geom, config.scene, cov_time)
        out["normalized_crb"] = crb_norm
        out["nmse"] = nmse
        return out
    if strategy == Strategy.COMM_ONLY:
        design = _armax.design_comm_only(chan, config.system.total_power, noise_var)
        out["precoders"] = _complex_to_lists(design.precoders.precoders)
        out["stream_powers"] = design.precoders.stream_powers.tolist()
        out["rate"] = design.rate
        return out
    sys_snr = dataclasses.replace(config.system, noise_var=noise_var)
    design = _armax.design_tradeoff2(chan, radar, rho, sys_snr)
    comm = _armax.design_comm_only(chan, rho * config.system.total_power, noise_var)
    w = design.precoders.precoders
    if design.rho2 < 1.0:
        ratio = math.sqrt((1.0 - design.rho2) / design.rho2)
        w2 = (w / design.power_scale - comm.precoders.precoders) / ratio
    else:
        w2 = np.zeros_like(w)
    nmse, crb_norm = _radar_metrics(
        config, radar, strict_pattern, design.covariances.time_domain
    )
    out["omega"] = design.omega.tolist()
    out["w1"] = _complex_to_lists(comm.precoders.precoders)
    out["w2"] = _complex_to_lists(w2)
    out["w"] = _complex_to_lists(w)
    out["stream_powers"] = design.precoders.stream_powers.tolist()
    out["rate_ideal"] = design.rate_ideal
    out["rate_actual"] = design.rate_actual
    out["achieved_crb"] = crb(geom, config.scene, design.covariances.time_domain)
    out["normalized_crb"] = crb_norm
    out["nmse"] = nmse
    out["power_scale"] = design.power_scale
    return out
