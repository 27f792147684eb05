"""Extended short-time objective intelligibility (ESTOI).

Both signals are resampled to 10 kHz, silent frames are removed by an
energy VAD on the clean signal, and one-third-octave band envelopes are
compared over 384 ms segments after joint row/column normalization.
Scores fall in [-1, 1]; identical signals score 1.
"""
from __future__ import annotations

import numpy as np

from n2s.dsp import AudioClip, InvalidInputError, resample

ANALYSIS_RATE = 10000
FRAME_LEN = 256
FRAME_HOP = 128
FFT_SIZE = 512
N_BANDS = 15
LOWEST_CENTER_HZ = 150.0
SEGMENT_FRAMES = 30
DYN_RANGE_DB = 40.0
_EPS = 1e-20

__all__ = ["estoi"]


def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frame(x: np.ndarray) -> np.ndarray:
    n = (len(x) - FRAME_LEN) // FRAME_HOP + 1
    if n < 1:
        return np.empty((0, FRAME_LEN))
    idx = np.arange(FRAME_LEN)[None, :] + FRAME_HOP * np.arange(n)[:, None]
    return x[idx]


def _remove_silent_frames(clean: np.ndarray, degraded: np.ndarray):
    """Drop frames whose clean-signal energy is more than 40 dB below the peak.

    Kept frames are overlap-added back into time signals so the later STFT
    sees a contiguous active region.
    """
    win = _hann(FRAME_LEN)
    cf = _frame(clean) * win
    df = _frame(degraded) * win
    energy_db = 20.0 * np.log10(np.linalg.norm(cf, axis=1) + _EPS)
    mask = energy_db > energy_db.max() - DYN_RANGE_DB
    cf, df = cf[mask], df[mask]
    out_len = FRAME_LEN + FRAME_HOP * (len(cf) - 1) if len(cf) else 0
    c_out = np.zeros(out_len)
    d_out = np.zeros(out_len)
    norm = np.zeros(out_len)
    for i in range(len(cf)):
        sl = slice(i * FRAME_HOP, i * FRAME_HOP + FRAME_LEN)
        c_out[sl] += cf[i]
        d_out[sl] += df[i]
        norm[sl] += win
    norm[norm < _EPS] = 1.0
    return c_out / norm, d_out / norm


def _third_octave_matrix(rate: int) -> np.ndarray:
    """Boolean selection matrix (N_BANDS x FFT bins) for one-third-octave bands."""
    bin_freqs = np.arange(FFT_SIZE // 2 + 1) * rate / FFT_SIZE
    centers = LOWEST_CENTER_HZ * 2.0 ** (np.arange(N_BANDS) / 3.0)
    lo = centers * 2.0 ** (-1.0 / 6.0)
    hi = centers * 2.0 ** (1.0 / 6.0)
    return ((bin_freqs[None, :] >= lo[:, None]) & (bin_freqs[None, :] < hi[:, None])).astype(float)


def _band_envelopes(x: np.ndarray, band_matrix: np.ndarray) -> np.ndarray:
    frames = _frame(x) * _hann(FRAME_LEN)
    spec = np.fft.rfft(frames, n=FFT_SIZE, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    return np.sqrt(power @ band_matrix.T)  # frames x bands


def _normalize_rows_then_cols(seg: np.ndarray) -> np.ndarray:
    seg = seg - seg.mean(axis=1, keepdims=True)
    seg = seg / np.maximum(np.linalg.norm(seg, axis=1, keepdims=True), _EPS)
    seg = seg - seg.mean(axis=0, keepdims=True)
    seg = seg / np.maximum(np.linalg.norm(seg, axis=0, keepdims=True), _EPS)
    return seg


def estoi(clean: AudioClip, degraded: AudioClip) -> float:
    """Intelligibility of ``degraded`` with respect to ``clean``, in [-1, 1]."""
    if clean.rate != degraded.rate:
        raise InvalidInputError(f"sample rate mismatch: {clean.rate} vs {degraded.rate}")
    if len(clean.samples) != len(degraded.samples):
        raise InvalidInputError(
            f"length mismatch: {len(clean.samples)} vs {len(degraded.samples)}"
        )
    if len(clean.samples) == 0:
        raise InvalidInputError("cannot score empty audio")
    if clean.duration < SEGMENT_FRAMES * FRAME_HOP / ANALYSIS_RATE:
        raise InvalidInputError(
            f"clip too short for ESTOI: {clean.duration:.3f} s < 0.384 s"
        )

    x = clean.samples
    y = degraded.samples
    if clean.rate != ANALYSIS_RATE:
        x = resample(x, clean.rate, ANALYSIS_RATE)
        y = resample(y, degraded.rate, ANALYSIS_RATE)
    x, y = _remove_silent_frames(x, y)

    band_matrix = _third_octave_matrix(ANALYSIS_RATE)
    ex = _band_envelopes(x, band_matrix)
    ey = _band_envelopes(y, band_matrix)
    n_frames = ex.shape[0]
    if n_frames < SEGMENT_FRAMES:
        raise InvalidInputError(
            f"only {n_frames} active frames after VAD; need >= {SEGMENT_FRAMES}"
        )

    scores = np.empty(n_frames - SEGMENT_FRAMES + 1)
    for m in range(len(scores)):
        seg_x = _normalize_rows_then_cols(ex[m:m + SEGMENT_FRAMES].T)
        seg_y = _normalize_rows_then_cols(ey[m:m + SEGMENT_FRAMES].T)
        scores[m] = float((seg_x * seg_y).sum()) / SEGMENT_FRAMES
    return float(np.clip(scores.mean(), -1.0, 1.0))
