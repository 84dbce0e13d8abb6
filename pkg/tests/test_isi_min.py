"""Tests for the interference-minimization design family."""

import numpy as np
import pytest

from dfrcwave import (
    PrecoderSet,
    SystemConfig,
    complex_normal,
    design_radar_only,
    design_strict,
    design_tradeoff1,
    isi_power,
    rate_isi,
    rayleigh_channel,
    rng_from,
    tradeoff1_precoder,
)
from dfrcwave.model import FreqChannel

from oracles import random_semiunitary, simplex_lattice_min


# ============================================================================
# INTERFERENCE POWER AND THE SINR RATE
# ============================================================================


class TestIsiPower:
    def test_zero_for_perfect_inverse(self, rng):
        n, n_sc = 3, 4
        h = complex_normal(rng, (n_sc, n, n))
        w = np.linalg.inv(h)
        chan = FreqChannel(per_subcarrier=h, seed=0)
        pset = PrecoderSet(precoders=w, stream_powers=np.ones((n_sc, n)))
        assert isi_power(chan, pset) == pytest.approx(0.0, abs=1e-18)

    def test_expectation_matches_monte_carlo(self, rng):
        n_sc, n_tx, n_rx = 3, 3, 2
        cfg = SystemConfig(n_tx=n_tx, n_rx=n_rx, n_sc=n_sc, n_cp=1)
        chan = rayleigh_channel(cfg, 9)
        w = complex_normal(rng, (n_sc, n_tx, n_rx))
        pset = PrecoderSet(precoders=w, stream_powers=np.full((n_sc, n_rx), 1.3))
        expected = isi_power(chan, pset)
        total = 0.0
        n_draws = 20_000
        for _ in range(n_draws):
            s = np.sqrt(1.3) * np.exp(
                2j * np.pi * rng.integers(0, 4, (n_sc, n_rx)) / 4
            )
            total += isi_power(chan, pset, symbols=s)
        assert total / n_draws == pytest.approx(expected, rel=0.05)

    def test_symbol_form_direct(self, rng):
        n_sc, n = 2, 2
        h = complex_normal(rng, (n_sc, n, n))
        w = complex_normal(rng, (n_sc, n, n))
        s = complex_normal(rng, (n_sc, n))
        chan = FreqChannel(per_subcarrier=h, seed=0)
        pset = PrecoderSet(precoders=w, stream_powers=np.ones((n_sc, n)))
        direct = sum(
            np.linalg.norm((h[k] @ w[k] - np.eye(n)) @ s[k]) ** 2 for k in range(n_sc)
        )
        assert isi_power(chan, pset, symbols=s) == pytest.approx(direct, rel=1e-12)


class TestRateIsi:
    def test_interference_free_closed_form(self, rng):
        """W = H^{-1} leaves sinr = p / s2 on every stream."""
        n, n_sc = 2, 4
        h = complex_normal(rng, (n_sc, n, n))
        chan = FreqChannel(per_subcarrier=h, seed=0)
        pset = PrecoderSet(
            precoders=np.linalg.inv(h), stream_powers=np.full((n_sc, n), 2.0)
        )
        rate = rate_isi(chan, pset, None, noise_var=0.5)
        assert rate == pytest.approx(n * np.log2(1.0 + 4.0), rel=1e-12)

    def test_matches_monte_carlo_interference(self, rng):
        """Estimate the per-stream leakage power from random QPSK draws and
        feed it through the same SINR map."""
        n_sc, n_tx, n_rx = 2, 3, 2
        cfg = SystemConfig(n_tx=n_tx, n_rx=n_rx, n_sc=n_sc, n_cp=1)
        chan = rayleigh_channel(cfg, 21)
        w = 0.3 * complex_normal(rng, (n_sc, n_tx, n_rx))
        p = 1.7
        pset = PrecoderSet(precoders=w, stream_powers=np.full((n_sc, n_rx), p))
        noise_var = 0.4

        resid = chan.per_subcarrier @ w - np.eye(n_rx)
        n_draws = 100_000
        qpsk = np.exp(2j * np.pi * (rng.integers(0, 4, (n_draws, n_sc, n_rx)) / 4 + 1 / 8))
        s = np.sqrt(p) * qpsk
        leak = np.einsum("krs,fks->fkr", resid, s)
        est = np.mean(np.abs(leak) ** 2, axis=0)

        rate_mc = float(np.sum(np.log2(1.0 + p / (est + noise_var)))) / n_sc
        assert rate_isi(chan, pset, None, noise_var) == pytest.approx(rate_mc, rel=0.02)


# ============================================================================
# STRICT DESIGN
# ============================================================================


class TestStrictDesign:
    def test_single_subcarrier_gets_everything(self, broadside_scene):
        cfg = SystemConfig(n_tx=4, n_rx=2, n_sc=1, n_cp=0)
        chan = rayleigh_channel(cfg, 3)
        radar = design_radar_only(cfg.geometry, broadside_scene, cfg.total_power)
        design = design_strict(chan, radar, cfg)
        np.testing.assert_allclose(design.alphas, [1.0], atol=1e-12)

    def test_identical_channels_share_uniformly(self, broadside_scene):
        cfg = SystemConfig(n_tx=4, n_rx=2, n_sc=4, n_cp=2)
        h0 = complex_normal(rng_from(8), (cfg.n_rx, cfg.n_tx))
        chan = FreqChannel(
            per_subcarrier=np.broadcast_to(h0, (4, cfg.n_rx, cfg.n_tx)).copy(), seed=8
        )
        radar = design_radar_only(cfg.geometry, broadside_scene, cfg.total_power)
        design = design_strict(chan, radar, cfg)
        np.testing.assert_allclose(design.alphas, 0.25, atol=1e-7)

    def test_alphas_solve_the_surrogate(self, broadside_scene):
        """Compare against lattice search on independently rebuilt coefficients."""
        cfg = SystemConfig(n_tx=3, n_rx=2, n_sc=4, n_cp=2)
        chan = rayleigh_channel(cfg, 77)
        radar = design_radar_only(cfg.geometry, broadside_scene, cfg.total_power)
        design = design_strict(chan, radar, cfg)
        h = chan.per_subcarrier
        m = (cfg.n_sc**2 / cfg.symbol_energy) * np.einsum(
            "krt,ts,kus->kru", h, radar.covariance, h.conj()
        )
        a = np.array([np.linalg.norm(m[k]) ** 2 for k in range(cfg.n_sc)])
        b = np.array([np.trace(m[k]).real for k in range(cfg.n_sc)])

        def f(alpha):
            return float(a @ alpha**2 - 2.0 * b @ alpha)

        _, f_grid = simplex_lattice_min(f, cfg.n_sc, resolution=2e-3, coarse=0.05)
        f_ours = f(design.alphas)
        assert f_ours <= f_grid + 1e-9
        assert abs(f_grid - f_ours) <= 0.02 * max(1.0, abs(f_ours))

    def test_covariance_reconstruction(self, small_system, small_channel, small_radar):
        """W P W^H tracks alpha_k N^2 R_d up to the factorization ridge."""
        design = design_strict(small_channel, small_radar, small_system)
        n_sc = small_system.n_sc
        e_s = small_system.symbol_energy
        worst = 0.0
        for k in range(n_sc):
            target = design.alphas[k] * n_sc**2 * small_radar.covariance
            got = e_s * design.precoders.precoders[k] @ design.precoders.precoders[
                k
            ].conj().T
            worst = max(worst, np.linalg.norm(got - target))
        ridge = 1e-8
        bound = 10.0 * ridge * small_system.n_tx * n_sc**2
        assert worst <= bound
        assert design.reconstruction_error <= bound

    def test_full_power_budget(self, small_system, small_channel, small_radar):
        design = design_strict(small_channel, small_radar, small_system)
        assert design.precoders.total_power() == pytest.approx(
            small_system.total_power, abs=1e-9
        )
        design.covariances.validate(expected_trace=small_system.total_power)

    def test_factor_maximizes_channel_correlation(
        self, small_system, small_channel, small_radar, rng
    ):
        """Among semi-unitary factors of the same covariance root, the chosen
        one has the largest matched term Re tr(H(k) W(k))."""
        design = design_strict(small_channel, small_radar, small_system)
        gamma = design.alphas[:, None, None] * (
            small_system.n_sc**2 / small_system.symbol_energy
        ) * small_radar.covariance
        h = small_channel.per_subcarrier

        def correlation(precoders):
            return sum(
                np.trace(h[k] @ precoders[k]).real for k in range(small_system.n_sc)
            )

        base = correlation(design.precoders.precoders)
        for _ in range(50):
            w = np.empty_like(design.precoders.precoders)
            for k in range(small_system.n_sc):
                ridge = 1e-8 * np.trace(gamma[k]).real / small_system.n_tx
                chol = np.linalg.cholesky(
                    gamma[k] + max(ridge, 1e-30) * np.eye(small_system.n_tx)
                )
                w[k] = chol @ random_semiunitary(
                    rng, small_system.n_tx, small_system.n_rx
                )
            assert base >= correlation(w) - 1e-6 * max(1.0, abs(base))


# ============================================================================
# TRADE-OFF DESIGN
# ============================================================================


class TestTradeoff1:
    def test_rho_zero_returns_strict(self, small_system, small_channel, small_radar):
        strict = design_strict(small_channel, small_radar, small_system)
        design = design_tradeoff1(small_channel, strict, 0.0, small_system)
        np.testing.assert_array_equal(
            design.precoders.precoders, strict.precoders.precoders
        )

    def test_rho_one_inverts_square_channel(self, rng):
        """With full comm weight and enough budget the precoder is H^{-1}."""
        n = 3
        h = complex_normal(rng, (n, n))
        h = h / np.linalg.norm(np.linalg.inv(h)) * 3.0  # inverse power 9
        w_strict = complex_normal(rng, (n, n))
        w_strict *= np.sqrt(10.0) / np.linalg.norm(w_strict)
        w, lam = tradeoff1_precoder(h, w_strict, 1.0)
        np.testing.assert_allclose(w, np.linalg.inv(h), atol=1e-8)
        assert lam == pytest.approx(0.0)

    def test_budget_zero_silences_subcarrier(self, rng):
        h = complex_normal(rng, (2, 3))
        w, lam = tradeoff1_precoder(h, np.zeros((3, 2)), 0.7)
        np.testing.assert_array_equal(w, 0.0)

    def test_per_subcarrier_power_cap(self, small_system, small_channel, small_radar):
        strict = design_strict(small_channel, small_radar, small_system)
        for rho in (0.3, 0.6, 0.9):
            design = design_tradeoff1(small_channel, strict, rho, small_system)
            for k in range(small_system.n_sc):
                cap = np.linalg.norm(strict.precoders.precoders[k]) ** 2
                got = np.linalg.norm(design.precoders.precoders[k]) ** 2
                assert got <= cap * (1.0 + 1e-9)
            assert np.all(np.asarray(design.multipliers) >= 0.0)

    def test_isi_decreases_with_rho(self, small_system, small_channel, small_radar):
        strict = design_strict(small_channel, small_radar, small_system)
        values = [
            design_tradeoff1(small_channel, strict, rho, small_system).isi_value
            for rho in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        assert all(b <= a * (1.0 + 1e-9) + 1e-9 for a, b in zip(values, values[1:]))

    def test_stationarity_of_weighted_objective(
        self, small_system, small_channel, small_radar, rng
    ):
        """Power-feasible perturbations never improve the blended objective."""
        strict = design_strict(small_channel, small_radar, small_system)
        rho = 0.55
        design = design_tradeoff1(small_channel, strict, rho, small_system)
        h = small_channel.per_subcarrier
        k = 2
        w_d = strict.precoders.precoders[k]
        w_star = design.precoders.precoders[k]
        budget = np.linalg.norm(w_d) ** 2

        def objective(w):
            comm = np.linalg.norm(h[k] @ w - np.eye(small_system.n_rx)) ** 2
            return rho * comm + (1.0 - rho) * np.linalg.norm(w - w_d) ** 2

        base = objective(w_star)
        for _ in range(60):
            d = complex_normal(rng, w_star.shape)
            w = w_star + 1e-4 * d
            power = np.linalg.norm(w) ** 2
            if power > budget:
                w *= np.sqrt(budget / power)
            assert objective(w) >= base - 1e-9 * max(1.0, abs(base))

    def test_invalid_rho_rejected(self, small_system, small_channel, small_radar):
        strict = design_strict(small_channel, small_radar, small_system)
        with pytest.raises(ValueError):
            design_tradeoff1(small_channel, strict, 1.2, small_system)

    def test_rate_improves_with_rho(self, small_system, small_channel, small_radar):
        strict = design_strict(small_channel, small_radar, small_system)
        rates = []
        for rho in (0.0, 0.5, 1.0):
            design = design_tradeoff1(small_channel, strict, rho, small_system)
            rates.append(rate_isi(small_channel, design.precoders, None, 0.1))
        assert rates[0] < rates[1] < rates[2]
