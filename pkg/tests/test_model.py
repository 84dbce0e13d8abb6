"""Tests for the system model: geometry, OFDM framing, channels, covariances."""

import numpy as np
import pytest

from dfrcwave import (
    ArrayGeometry,
    CovarianceSet,
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

from oracles import circular_convolve


# ============================================================================
# RNG AND CONFIG
# ============================================================================


class TestRngStreams:
    def test_same_stream_reproduces(self):
        a = rng_from(7, 0, 3).standard_normal(5)
        b = rng_from(7, 0, 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = rng_from(7, 0, 3).standard_normal(5)
        b = rng_from(7, 0, 4).standard_normal(5)
        c = rng_from(7, 1, 3).standard_normal(5)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_complex_normal_moments(self):
        z = complex_normal(rng_from(11), (200_000,))
        assert abs(z.mean()) < 0.01
        assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02
        # circular symmetry: real and imaginary parts carry half the power each
        assert abs(np.var(z.real) - 0.5) < 0.01

    def test_noise_var_from_snr(self):
        assert noise_var_from_snr_db(10.0, 1.0) == pytest.approx(0.1)
        assert noise_var_from_snr_db(0.0, 2.0) == pytest.approx(2.0)


class TestSystemConfig:
    def test_rejects_more_streams_than_antennas(self):
        with pytest.raises(ValueError):
            SystemConfig(n_tx=2, n_rx=4, n_sc=8, n_cp=2)

    def test_rejects_bad_power(self):
        with pytest.raises(ValueError):
            SystemConfig(n_tx=4, n_rx=2, n_sc=8, n_cp=2, total_power=0.0)

    def test_geometry_offsets_centered(self, small_system):
        offs = small_system.geometry.element_offsets
        assert offs.sum() == pytest.approx(0.0)
        np.testing.assert_allclose(np.diff(offs), 1.0)


# ============================================================================
# STEERING VECTORS
# ============================================================================


class TestSteering:
    def test_broadside_is_all_ones(self):
        geom = ArrayGeometry(n_tx=6, spacing=0.5)
        np.testing.assert_allclose(steering_vector(geom, 0.0), np.ones(6))

    def test_unit_norm_squared(self):
        geom = ArrayGeometry(n_tx=5, spacing=0.5)
        a = steering_vector(geom, 0.7)
        assert np.vdot(a, a).real == pytest.approx(5.0)

    def test_derivative_orthogonal_to_steering(self):
        # centered element offsets make a^H da vanish at every angle
        geom = ArrayGeometry(n_tx=8, spacing=0.5)
        for theta in (-1.1, -0.3, 0.0, 0.4, 1.2):
            a = steering_vector(geom, theta)
            da = steering_derivative(geom, theta)
            assert abs(np.vdot(a, da)) < 1e-12

    def test_derivative_matches_finite_difference(self):
        geom = ArrayGeometry(n_tx=4, spacing=0.5)
        theta, h = 0.37, 1e-7
        fd = (steering_vector(geom, theta + h) - steering_vector(geom, theta - h)) / (
            2 * h
        )
        np.testing.assert_allclose(steering_derivative(geom, theta), fd, atol=1e-6)


# ============================================================================
# OFDM FRAMING AND CP PROPAGATION
# ============================================================================


class TestOfdm:
    def test_modulate_demodulate_roundtrip(self, rng):
        x = complex_normal(rng, (16, 3))
        frame = modulate_frame(x, 4)
        np.testing.assert_allclose(demodulate_frame(frame.time_samples, 4), x, atol=1e-12)

    def test_prefix_copies_tail(self, rng):
        x = complex_normal(rng, (8, 2))
        frame = modulate_frame(x, 3)
        np.testing.assert_array_equal(frame.time_samples[:3], frame.time_samples[-3:])

    def test_prefix_longer_than_symbol_rejected(self, rng):
        with pytest.raises(ValueError):
            modulate_frame(complex_normal(rng, (4, 1)), 5)

    def test_too_many_taps_rejected(self, rng):
        frame = modulate_frame(complex_normal(rng, (8, 2)), 2)
        taps = complex_normal(rng, (4, 2, 2))
        with pytest.raises(ValueError):
            propagate_time(frame, taps)

    def test_cp_turns_taps_into_per_subcarrier_products(self, rng):
        """Time-domain propagation with CP equals H(k)X(k) per subcarrier."""
        cfg = SystemConfig(n_tx=3, n_rx=2, n_sc=16, n_cp=5)
        chan = tap_channel(cfg, 4, 99)
        x = complex_normal(rng, (cfg.n_sc, cfg.n_tx))
        frame = modulate_frame(x, cfg.n_cp)
        y_time, noise_free = propagate_time(frame, chan.time_taps)
        assert noise_free
        y_freq = demodulate_frame(y_time[: cfg.n_cp + cfg.n_sc], cfg.n_cp)
        expected = np.einsum("krt,kt->kr", chan.per_subcarrier, x)
        np.testing.assert_allclose(y_freq, expected, atol=1e-10)

    def test_scalar_circular_convolution_reference(self, rng):
        """Single-antenna CP removal reproduces the direct circular convolution."""
        n_sc, n_cp = 12, 4
        taps = complex_normal(rng, (3,))
        x = complex_normal(rng, (n_sc, 1))
        frame = modulate_frame(x, n_cp)
        y, _ = propagate_time(frame, taps[:, None, None])
        body = y[n_cp : n_cp + n_sc, 0]
        direct = circular_convolve(np.fft.ifft(x[:, 0]), taps)
        np.testing.assert_allclose(body, direct, atol=1e-12)


# ============================================================================
# CHANNELS
# ============================================================================


class TestChannels:
    def test_tap_channel_validates(self):
        cfg = SystemConfig(n_tx=3, n_rx=2, n_sc=8, n_cp=3)
        tap_channel(cfg, 3, 5).validate()

    def test_tap_spectrum_is_dft_of_taps(self):
        cfg = SystemConfig(n_tx=3, n_rx=2, n_sc=8, n_cp=3)
        chan = tap_channel(cfg, 2, 5)
        manual = np.fft.fft(chan.time_taps, n=cfg.n_sc, axis=0)
        np.testing.assert_allclose(chan.per_subcarrier, manual, atol=1e-12)

    def test_rayleigh_statistics(self):
        cfg = SystemConfig(n_tx=16, n_rx=8, n_sc=64, n_cp=4)
        h = rayleigh_channel(cfg, 3).per_subcarrier
        assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.05

    def test_save_load_roundtrip_exact(self, small_system, tmp_path):
        chan = rayleigh_channel(small_system, 17)
        path = tmp_path / "chan.json"
        save_channel(chan, path)
        loaded = load_channel(path)
        np.testing.assert_array_equal(loaded.per_subcarrier, chan.per_subcarrier)
        assert loaded.seed == chan.seed


# ============================================================================
# COVARIANCES AND PRECODERS
# ============================================================================


class TestCovarianceSet:
    def _consistent_set(self, rng, n_sc=4, n=3, trace=None):
        w = complex_normal(rng, (n_sc, n, n))
        freq = w @ w.conj().swapaxes(1, 2)
        if trace is not None:
            total = np.trace(freq.sum(axis=0)).real / n_sc**2
            freq *= trace / total
        time = freq.sum(axis=0) / n_sc**2
        return CovarianceSet(time_domain=time, freq_domain=freq)

    def test_valid_set_passes(self, rng):
        self._consistent_set(rng, trace=1.0).validate(expected_trace=1.0)

    def test_detects_time_freq_mismatch(self, rng):
        cs = self._consistent_set(rng)
        bad = CovarianceSet(time_domain=cs.time_domain * 1.01, freq_domain=cs.freq_domain)
        with pytest.raises(ValueError):
            bad.validate()

    def test_detects_non_hermitian(self, rng):
        cs = self._consistent_set(rng)
        freq = cs.freq_domain.copy()
        freq[0, 0, 1] += 1.0
        with pytest.raises(ValueError):
            CovarianceSet(time_domain=cs.time_domain, freq_domain=freq).validate()

    def test_detects_indefinite(self, rng):
        cs = self._consistent_set(rng)
        freq = cs.freq_domain.copy()
        freq[0] -= 10.0 * np.eye(freq.shape[1])
        time = freq.sum(axis=0) / freq.shape[0] ** 2
        with pytest.raises(ValueError):
            CovarianceSet(time_domain=time, freq_domain=freq).validate()

    def test_detects_trace_mismatch(self, rng):
        cs = self._consistent_set(rng, trace=1.0)
        with pytest.raises(ValueError):
            cs.validate(expected_trace=2.0)


class TestPrecoderSet:
    def test_total_power_matches_covariance_trace(self, rng):
        n_sc, n_tx, n_rx = 5, 4, 2
        w = complex_normal(rng, (n_sc, n_tx, n_rx))
        p = rng.uniform(0.1, 2.0, size=(n_sc, n_rx))
        pset = PrecoderSet(precoders=w, stream_powers=p)
        covs = covariance_from_precoders(pset)
        assert pset.total_power() == pytest.approx(
            np.trace(covs.time_domain).real, rel=1e-12
        )

    def test_validate_budget(self, rng):
        w = complex_normal(rng, (2, 3, 2))
        pset = PrecoderSet(precoders=w, stream_powers=np.ones((2, 2)))
        with pytest.raises(ValueError):
            pset.validate(power_budget=pset.total_power() * 0.5)
        pset.validate(power_budget=pset.total_power() + 1e-9)

    def test_covariance_from_precoders_identity(self, rng):
        """R_f(k) = W(k) P_S(k) W^H(k) and R = (1/N^2) sum_k R_f(k)."""
        n_sc, n_tx, n_rx = 3, 4, 2
        w = complex_normal(rng, (n_sc, n_tx, n_rx))
        p = rng.uniform(0.5, 1.5, size=(n_sc, n_rx))
        covs = covariance_from_precoders(PrecoderSet(precoders=w, stream_powers=p))
        for k in range(n_sc):
            direct = w[k] @ np.diag(p[k]) @ w[k].conj().T
            np.testing.assert_allclose(covs.freq_domain[k], direct, atol=1e-12)
        np.testing.assert_allclose(
            covs.time_domain, covs.freq_domain.sum(axis=0) / n_sc**2, atol=1e-12
        )
        covs.validate()


class TestReceiveFreq:
    def test_noise_free_is_exact_product(self, small_system, small_channel, rng):
        n_rx = small_system.n_rx
        w = complex_normal(rng, (small_system.n_sc, small_system.n_tx, n_rx))
        pset = PrecoderSet(
            precoders=w, stream_powers=np.ones((small_system.n_sc, n_rx))
        )
        s = complex_normal(rng, (small_system.n_sc, n_rx))
        y = receive_freq(small_channel, pset, s, 0.0, rng)
        expected = np.einsum(
            "krt,kts,ks->kr", small_channel.per_subcarrier, w, s
        )
        np.testing.assert_allclose(y, expected, atol=1e-12)

    def test_noise_variance_scales(self, small_system, small_channel):
        n_rx = small_system.n_rx
        w = np.zeros((small_system.n_sc, small_system.n_tx, n_rx))
        pset = PrecoderSet(precoders=w, stream_powers=np.ones((small_system.n_sc, n_rx)))
        s = np.zeros((small_system.n_sc, n_rx))
        draws = []
        gen = rng_from(5)
        for _ in range(400):
            y = receive_freq(small_channel, pset, s, 0.25, gen)
            draws.append(np.abs(y) ** 2)
        assert np.mean(draws) == pytest.approx(0.25, rel=0.1)
