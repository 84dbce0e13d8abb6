"""Waveform design and Monte-Carlo evaluation for MIMO-OFDM systems that
serve radar sensing and communication from one transmit array.

Two design families are provided: interference-energy minimization against a
fixed radar covariance (with a per-subcarrier trade-off relaxation), and
achievable-rate maximization with a covariance split steered by a
sequential-quadratic-programming weight search.
"""

from .armax import (
    CommOnlyDesign,
    TradeoffDesign2,
    design_comm_only,
    design_tradeoff2,
    ideal_vs_actual_rate,
    make_weight_problem,
    rate_logdet,
)
from .harness import (
    BeampatternReport,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    ResultRow,
    Strategy,
    design_outcome,
    run_beampattern_report,
    run_ser_sweep,
    run_sqp_convergence,
    run_tradeoff_sweep,
    simulate_frames,
)
from .isi_min import (
    StrictDesign,
    TradeoffDesign1,
    design_strict,
    design_tradeoff1,
    isi_power,
    rate_isi,
    tradeoff1_precoder,
)
from .model import (
    ArrayGeometry,
    CovarianceSet,
    FreqChannel,
    OfdmFrame,
    PrecoderSet,
    SystemConfig,
    complex_normal,
    covariance_from_precoders,
    demodulate_frame,
    load_channel,
    modulate_frame,
    noise_var_from_snr_db,
    propagate_time,
    rayleigh_channel,
    receive_freq,
    rng_from,
    save_channel,
    steering_derivative,
    steering_vector,
    tap_channel,
)
from .radar import (
    BeamPattern,
    RadarOnlyDesign,
    RadarScene,
    beampattern,
    beampattern_nmse,
    crb,
    crb_general,
    default_angle_grid,
    design_radar_only,
    simulate_echo,
)
from .solvers import (
    SimplexQpProblem,
    SolverError,
    SqpResult,
    SqpState,
    WaterfillResult,
    solve_opp,
    solve_qp_active_set,
    solve_simplex_qp,
    sqp_minimize,
    waterfill,
    write_sqp_trace,
)

__version__ = "0.1.0"
