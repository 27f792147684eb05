"""Deterministic signal-processing primitives shared by the whole pipeline.

Everything in this module is a pure function over immutable numpy inputs:
mel-spectrograms, the discrete Laplacian, zero-phase band-pass filtering,
analytic envelopes and band-limited resampling.  Conventions that matter
downstream (frame counts, padding, filter order) are fixed here once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

__all__ = [
    "AudioClip",
    "MelConfig",
    "MelSpectrogram",
    "InvalidInputError",
    "ConfigError",
    "mel_filterbank",
    "mel_spectrogram",
    "laplacian",
    "bandpass_filter",
    "analytic_envelope",
    "resample",
    "load_wav",
    "save_wav",
]


class InvalidInputError(ValueError):
    """Raised when runtime data violates an operation precondition."""


class ConfigError(ValueError):
    """Raised when a configuration object violates its invariants."""


# -----------------------------
# Domain types
# -----------------------------
@dataclass(frozen=True)
class AudioClip:
    """Mono waveform. ``samples`` are dimensionless amplitudes, nominally in [-1, 1]."""

    samples: np.ndarray
    rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise InvalidInputError(f"audio must be mono 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("audio contains non-finite samples")
        if int(self.rate) <= 0:
            raise InvalidInputError(f"sample rate must be positive, got {self.rate}")
        object.__setattr__(self, "rate", int(self.rate))

    @property
    def duration(self) -> float:
        return len(self.samples) / self.rate


@dataclass(frozen=True)
class MelConfig:
    """Mel analysis parameters.

    Frames are taken under zero center padding (fft_size // 2 zeros on each
    side), so a clip of N samples yields ``1 + N // hop`` frames.  Band
    energies come from the power spectrum through a triangular (HTK-scale)
    filterbank, floored at ``log_floor`` before the log.
    """

    fft_size: int = 1024
    hop: int = 320
    window: int = 1024
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5

    def validate(self, rate: int | None = None) -> None:
        if not (0 < self.hop <= self.window <= self.fft_size):
            raise ConfigError(
                f"need 0 < hop <= window <= fft_size, got {self.hop}/{self.window}/{self.fft_size}"
            )
        if not (0 <= self.fmin < self.fmax):
            raise ConfigError(f"need 0 <= fmin < fmax, got {self.fmin}/{self.fmax}")
        if rate is not None and self.fmax > rate / 2:
            raise ConfigError(f"fmax {self.fmax} above Nyquist for rate {rate}")
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")


@dataclass(frozen=True)
class MelSpectrogram:
    """Frames x n_mels matrix of log band energies."""

    values: np.ndarray
    frame_rate: float
    config: MelConfig = field(default_factory=MelConfig)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]


# -----------------------------
# Mel spectrogram
# -----------------------------
def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(rate: int, fft_size: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size // 2 + 1), peak weight 1."""
    n_bins = fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * rate / fft_size
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def mel_band_centers(rate: int, fft_size: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    """Center frequency (Hz) of each mel band."""
    edges = _mel_to_hz(np.linspace(_hz_to_mel(fmin), _hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def _hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_power(samples: np.ndarray, cfg: MelConfig) -> np.ndarray:
    """Power spectrogram, shape (1 + N // hop, fft_size // 2 + 1).

    Zero center padding; periodic Hann window of cfg.window samples,
    zero-padded to fft_size before the FFT.
    """
    x = np.asarray(samples, dtype=np.float64)
    pad = cfg.fft_size // 2
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])
    n_frames = 1 + len(x) // cfg.hop
    win = _hann_periodic(cfg.window)
    frames = np.empty((n_frames, cfg.fft_size))
    for t in range(n_frames):
        start = t * cfg.hop
        frame = np.zeros(cfg.fft_size)
        frame[: cfg.window] = xp[start:start + cfg.window] * win
        frames[t] = frame
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real ** 2 + spec.imag ** 2)


def mel_spectrogram(audio: AudioClip, cfg: MelConfig | None = None) -> MelSpectrogram:
    """Log mel-spectrogram of a clip; deterministic, entries >= log(log_floor)."""
    cfg = cfg or MelConfig()
    if len(audio.samples) == 0:
        raise InvalidInputError("cannot analyze empty audio")
    cfg.validate(audio.rate)
    power = stft_power(audio.samples, cfg)
    fb = mel_filterbank(audio.rate, cfg.fft_size, cfg.n_mels, cfg.fmin, cfg.fmax)
    energy = power @ fb.T
    values = np.log(np.maximum(energy, cfg.log_floor))
    return MelSpectrogram(values=values, frame_rate=audio.rate / cfg.hop, config=cfg)


# -----------------------------
# Discrete Laplacian
# -----------------------------
_LAPLACIAN_KERNEL = ((0.0, 1.0, 0.0), (1.0, -4.0, 1.0), (0.0, 1.0, 0.0))


def laplacian(mel: MelSpectrogram | np.ndarray) -> np.ndarray:
    """2-D Laplacian filter under zero padding; output shape equals input shape.

    Taps are accumulated in kernel row-major order so the result is bitwise
    identical to a direct nested-loop convolution in float64.
    """
    values = mel.values if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise InvalidInputError(f"laplacian needs a non-empty 2-D matrix, got shape {values.shape}")
    values = values.astype(np.float64, copy=False)
    padded = np.zeros((values.shape[0] + 2, values.shape[1] + 2))
    padded[1:-1, 1:-1] = values
    out = None
    for di in range(3):
        for dj in range(3):
            k = _LAPLACIAN_KERNEL[di][dj]
            term = k * padded[di:di + values.shape[0], dj:dj + values.shape[1]]
            out = term if out is None else out + term
    return out


# -----------------------------
# Band-pass filtering
# -----------------------------
def bandpass_filter(signal: np.ndarray, rate: float, low: float, high: float) -> np.ndarray:
    """Zero-phase band-pass: 4th-order Butterworth applied forward-backward."""
    if not (0 < low < high < rate / 2):
        raise ConfigError(f"need 0 < low < high < rate/2, got {low}/{high} at rate {rate}")
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] == 0:
        raise InvalidInputError("cannot filter empty signal")
    sos = sps.butter(4, [low, high], btype="bandpass", fs=rate, output="sos")
    return sps.sosfiltfilt(sos, x, axis=-1)


# -----------------------------
# Analytic envelope
# -----------------------------
def analytic_envelope(signal: np.ndarray) -> np.ndarray:
    """Magnitude of the analytic signal (frequency-domain Hilbert construction)."""
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] == 0:
        raise InvalidInputError("cannot take envelope of empty signal")
    return np.abs(sps.hilbert(x, axis=-1))


# -----------------------------
# Resampling
# -----------------------------
def resample(signal: np.ndarray, from_rate: float, to_rate: float) -> np.ndarray:
    """Band-limited polyphase resampling; output length = round(len * to/from)."""
    if from_rate <= 0 or to_rate <= 0:
        raise ConfigError("rates must be positive")
    x = np.asarray(signal, dtype=np.float64)
    if from_rate == to_rate:
        return x.copy()
    frac = Fraction(to_rate).limit_denominator(10**6) / Fraction(from_rate).limit_denominator(10**6)
    up, down = frac.numerator, frac.denominator
    y = sps.resample_poly(x, up, down, axis=-1)
    target = int(round(x.shape[-1] * to_rate / from_rate))
    if y.shape[-1] > target:
        y = y[..., :target]
    elif y.shape[-1] < target:
        pad = [(0, 0)] * (y.ndim - 1) + [(0, target - y.shape[-1])]
        y = np.pad(y, pad, mode="edge")
    return y


# -----------------------------
# WAV I/O (16-bit PCM mono)
# -----------------------------
def load_wav(path, target_rate: int = 16000) -> AudioClip:
    """Load a mono 16-bit PCM WAV; resample to target_rate if needed."""
    from scipy.io import wavfile

    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32767.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483647.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise InvalidInputError(f"{path}: unsupported WAV dtype {data.dtype}")
    if rate != target_rate:
        samples = resample(samples, rate, target_rate)
        rate = target_rate
    return AudioClip(samples=samples, rate=rate)


def save_wav(path, audio: AudioClip) -> None:
    """Write 16-bit PCM mono little-endian WAV, clipping to [-1, 1]."""
    from scipy.io import wavfile

    clipped = np.clip(audio.samples, -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    wavfile.write(path, audio.rate, pcm)
