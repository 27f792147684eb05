"""Unit tests for the DSP primitives, checked against independent oracles."""
from __future__ import annotations

import numpy as np
import pytest

from n2s.dsp import (
    AudioClip,
    ConfigError,
    InvalidInputError,
    MelConfig,
    MelSpectrogram,
    analytic_envelope,
    bandpass_filter,
    laplacian,
    load_wav,
    mel_spectrogram,
    resample,
    save_wav,
)

RATE = 16000


def tone(freq, duration=1.0, rate=RATE, amp=0.5):
    t = np.arange(int(duration * rate)) / rate
    return amp * np.sin(2 * np.pi * freq * t)


class TestMelSpectrogram:
    def test_silence_hits_log_floor(self):
        cfg = MelConfig()
        mel = mel_spectrogram(AudioClip(np.zeros(RATE), RATE), cfg)
        assert np.all(mel.values == np.log(cfg.log_floor))

    def test_frame_count_formula(self):
        mel = mel_spectrogram(AudioClip(np.zeros(RATE), RATE), MelConfig(hop=320))
        assert mel.n_frames == 1 + 16000 // 320 == 51

    def test_pure_tone_peaks_in_nearest_band(self):
        # Independent filterbank-construction oracle: recompute band centers
        # from the HTK mel formula and pick the one nearest 1 kHz.
        cfg = MelConfig()
        n_mels, fmin, fmax = cfg.n_mels, cfg.fmin, cfg.fmax

        def hz_to_mel(f):
            return 2595.0 * np.log10(1.0 + f / 700.0)

        def mel_to_hz(m):
            return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

        mel_edges = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
        centers_hz = mel_to_hz(mel_edges[1:-1])
        expected_band = int(np.argmin(np.abs(centers_hz - 1000.0)))

        mel = mel_spectrogram(AudioClip(tone(1000.0, 1.0), RATE), cfg)
        interior = mel.values[2:-2]
        assert np.all(np.argmax(interior, axis=1) == expected_band)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0, 0.2, RATE)
        a = mel_spectrogram(AudioClip(x, RATE)).values
        b = mel_spectrogram(AudioClip(x.copy(), RATE)).values
        assert np.array_equal(a, b)

    def test_empty_audio_rejected(self):
        with pytest.raises(InvalidInputError):
            mel_spectrogram(AudioClip(np.zeros(0), RATE))

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            mel_spectrogram(AudioClip(np.zeros(RATE), RATE), MelConfig(hop=2048))
        with pytest.raises(ConfigError):
            mel_spectrogram(AudioClip(np.zeros(RATE), RATE), MelConfig(fmax=16000.0))


def laplacian_nested_loop_oracle(x: np.ndarray) -> np.ndarray:
    """Direct nested-loop 2-D convolution with the 5-point kernel, zero padded."""
    kernel = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]
    rows, cols = x.shape
    out = np.empty_like(x)
    for i in range(rows):
        for j in range(cols):
            acc = None
            for di in range(3):
                for dj in range(3):
                    ii, jj = i + di - 1, j + dj - 1
                    v = x[ii, jj] if 0 <= ii < rows and 0 <= jj < cols else 0.0
                    term = kernel[di][dj] * v
                    acc = term if acc is None else acc + term
            out[i, j] = acc
    return out


class TestLaplacian:
    def test_constant_matrix(self):
        c = 3.25
        out = laplacian(np.full((6, 8), c))
        assert np.all(out[1:-1, 1:-1] == 0.0)
        # zero padding: corner keeps 2 of 4 neighbors, edges keep 3
        assert out[0, 0] == -2 * c
        assert out[0, 3] == -c

    def test_impulse_response(self):
        x = np.zeros((5, 5))
        x[2, 2] = 1.0
        out = laplacian(x)
        expected = np.zeros((5, 5))
        expected[2, 2] = -4.0
        expected[1, 2] = expected[3, 2] = expected[2, 1] = expected[2, 3] = 1.0
        assert np.array_equal(out, expected)

    def test_matches_nested_loop_oracle_bitwise(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 1, (4, 6))
        assert np.array_equal(laplacian(x), laplacian_nested_loop_oracle(x))

    def test_linearity(self):
        rng = np.random.default_rng(12)
        x = rng.normal(0, 1, (7, 9))
        y = rng.normal(0, 1, (7, 9))
        a, b = 2.5, -0.75
        lhs = laplacian(a * x + b * y)
        rhs = a * laplacian(x) + b * laplacian(y)
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_accepts_mel_input(self):
        mel = mel_spectrogram(AudioClip(tone(500.0, 0.5), RATE))
        out = laplacian(mel)
        assert out.shape == mel.values.shape


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


class TestBandpass:
    def test_zero_in_zero_out(self):
        out = bandpass_filter(np.zeros(2048), 1000.0, 70.0, 150.0)
        assert np.allclose(out, 0.0)

    def test_passband_tone_preserved(self):
        t = np.arange(4000) / 1000.0
        x = np.sin(2 * np.pi * 100.0 * t)
        y = bandpass_filter(x, 1000.0, 70.0, 150.0)
        sl = slice(1000, 3000)  # steady-state region
        assert abs(rms(y[sl]) - rms(x[sl])) / rms(x[sl]) < 0.12

    def test_stopband_tone_rejected(self):
        t = np.arange(4000) / 1000.0
        x = np.sin(2 * np.pi * 10.0 * t)
        y = bandpass_filter(x, 1000.0, 70.0, 150.0)
        assert rms(y[1000:3000]) <= 0.01 * rms(x[1000:3000])

    def test_stopband_attenuation_40db(self):
        t = np.arange(8000) / 1000.0
        for freq in (35.0, 300.0):
            x = np.sin(2 * np.pi * freq * t)
            y = bandpass_filter(x, 1000.0, 70.0, 150.0)
            atten = 20 * np.log10(rms(x[2000:6000]) / max(rms(y[2000:6000]), 1e-300))
            assert atten >= 40.0, f"{freq} Hz only attenuated {atten:.1f} dB"

    def test_zero_phase(self):
        # Cross-correlation peak between passband input and output sits at lag 0.
        t = np.arange(4000) / 1000.0
        x = np.sin(2 * np.pi * 100.0 * t)
        y = bandpass_filter(x, 1000.0, 70.0, 150.0)
        xc = np.correlate(y[500:3500], x[500:3500], mode="full")
        assert int(np.argmax(xc)) == len(xc) // 2

    def test_linearity(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 1, 3000)
        y = rng.normal(0, 1, 3000)
        lhs = bandpass_filter(2.0 * x + 3.0 * y, 1000.0, 70.0, 150.0)
        rhs = 2.0 * bandpass_filter(x, 1000.0, 70.0, 150.0) + 3.0 * bandpass_filter(
            y, 1000.0, 70.0, 150.0
        )
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_invalid_band_rejected(self):
        with pytest.raises(ConfigError):
            bandpass_filter(np.zeros(100), 1000.0, 150.0, 70.0)
        with pytest.raises(ConfigError):
            bandpass_filter(np.zeros(100), 200.0, 70.0, 150.0)


class TestAnalyticEnvelope:
    def test_sine_envelope_is_amplitude(self):
        a = 0.7
        x = a * np.sin(2 * np.pi * 50.0 * np.arange(8000) / 1000.0)
        env = analytic_envelope(x)
        interior = env[1000:7000]
        assert np.max(np.abs(interior - a)) / a < 0.02

    def test_zero_signal(self):
        assert np.allclose(analytic_envelope(np.zeros(512)), 0.0)

    def test_tracks_slow_modulation(self):
        rate = 1000.0
        t = np.arange(10000) / rate
        m = 1.0 + 0.5 * np.sin(2 * np.pi * 1.0 * t)  # slow positive modulator
        x = 0.4 * m * np.sin(2 * np.pi * 100.0 * t)
        env = analytic_envelope(x)
        interior = slice(1500, 8500)
        target = 0.4 * m[interior]
        assert np.max(np.abs(env[interior] - target) / target) < 0.05

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        env = analytic_envelope(rng.normal(0, 1, 4096))
        assert np.all(env >= 0)


class TestResample:
    def test_identity_is_bitwise(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0, 1, 777)
        assert np.array_equal(resample(x, 400.0, 400.0), x)

    def test_constant_preserved(self):
        x = np.full(1600, 0.321)
        y = resample(x, 400.0, 50.0)
        # polyphase filter transient spans ~10 output samples per edge
        assert np.max(np.abs(y[25:-25] - 0.321)) < 1e-6

    def test_length_formula(self):
        assert len(resample(np.zeros(400), 400.0, 50.0)) == 50
        assert len(resample(np.zeros(441), 400.0, 50.0)) == round(441 * 50 / 400)
        assert len(resample(np.zeros(16000), 16000.0, 10000.0)) == 10000

    def test_round_trip_preserves_band_limited_signal(self):
        rng = np.random.default_rng(6)
        rate_a, rate_b = 400.0, 50.0
        # content below 0.8 * min(A, B)/2 = 20 Hz
        t = np.arange(4000) / rate_a
        x = np.zeros_like(t)
        for f, amp, ph in [(3.0, 1.0, 0.3), (8.5, 0.5, 1.1), (17.0, 0.25, 2.0)]:
            x += amp * np.sin(2 * np.pi * f * t + ph)
        y = resample(resample(x, rate_a, rate_b), rate_b, rate_a)
        sl = slice(400, 3600)
        err = np.linalg.norm(y[sl] - x[sl]) / np.linalg.norm(x[sl])
        assert err < 1e-2


class TestWavIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        clip = AudioClip(np.clip(rng.normal(0, 0.2, RATE), -1, 1), RATE)
        path = tmp_path / "clip.wav"
        save_wav(path, clip)
        loaded = load_wav(path)
        assert loaded.rate == RATE
        assert len(loaded.samples) == RATE
        assert np.max(np.abs(loaded.samples - clip.samples)) < 1.0 / 32000

    def test_load_resamples_foreign_rate(self, tmp_path):
        clip = AudioClip(tone(440.0, 0.5, rate=8000), 8000)
        path = tmp_path / "clip8k.wav"
        save_wav(path, clip)
        loaded = load_wav(path, target_rate=16000)
        assert loaded.rate == 16000
        assert len(loaded.samples) == 8000

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            AudioClip(np.array([0.0, np.nan]), RATE)
