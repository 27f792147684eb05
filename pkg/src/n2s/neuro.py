"""Neural-recording preprocessing.

Raw rasters become feature-rate envelope sequences in three steps:
band-pass to the high-gamma range (70-150 Hz), analytic envelope, and
band-limited downsampling to the speech feature rate.  Speech-responsive
electrodes are then selected with a one-sided paired t-test comparing
post-onset against pre-onset response, Bonferroni corrected across
electrodes.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import special

from n2s.dsp import (
    ConfigError,
    InvalidInputError,
    analytic_envelope,
    bandpass_filter,
    resample,
)

HIGH_GAMMA_BAND = (70.0, 150.0)
N2SR_MAGIC = b"N2SR"

__all__ = [
    "TrialMarker",
    "NeuralRecording",
    "NeuralFeatureSequence",
    "ElectrodeTestResult",
    "extract_high_gamma",
    "paired_t_one_sided",
    "select_responsive_electrodes",
    "slice_trials",
    "write_recording",
    "read_recording",
]


# -----------------------------
# Domain types
# -----------------------------
@dataclass(frozen=True)
class TrialMarker:
    trial_id: str
    onset_sample: int
    duration_samples: int
    transcript_phonemes: tuple[str, ...] = ()


@dataclass(frozen=True)
class NeuralRecording:
    """Electrodes x time raster with trial onset markers."""

    raster: np.ndarray
    rate: float
    trials: tuple[TrialMarker, ...] = ()

    def __post_init__(self):
        raster = np.asarray(self.raster, dtype=np.float64)
        object.__setattr__(self, "raster", raster)
        object.__setattr__(self, "trials", tuple(self.trials))
        if raster.ndim != 2:
            raise InvalidInputError(f"raster must be electrodes x time, got {raster.shape}")
        if self.rate <= 0:
            raise InvalidInputError("rate must be positive")
        onsets = [t.onset_sample for t in self.trials]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise InvalidInputError("trial onsets must be strictly increasing")
        if any(not (0 <= t.onset_sample < raster.shape[1]) for t in self.trials):
            raise InvalidInputError("trial onset outside raster")

    @property
    def n_electrodes(self) -> int:
        return self.raster.shape[0]

    @property
    def trial_onsets(self) -> list[int]:
        return [t.onset_sample for t in self.trials]

    @property
    def trial_ids(self) -> list[str]:
        return [t.trial_id for t in self.trials]


@dataclass(frozen=True)
class NeuralFeatureSequence:
    """Feature-rate envelopes, time x electrodes, values >= 0."""

    values: np.ndarray
    frame_rate: float
    electrode_ids: tuple[int, ...]

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_electrodes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ElectrodeTestResult:
    electrode_id: int
    t_value: float
    p_value: float
    selected: bool


# -----------------------------
# Preprocessing
# -----------------------------
def extract_high_gamma(
    rec: NeuralRecording, target_rate: float, zscore: bool = False
) -> NeuralFeatureSequence:
    """High-gamma envelope per electrode, downsampled to the feature rate.

    Per electrode: band-pass 70-150 Hz (zero phase), analytic envelope,
    band-limited resample.  All electrodes are retained; selection is a
    separate step.  Resampling can ring slightly negative, so envelopes are
    clipped at zero to keep the nonnegativity contract.
    """
    if rec.rate <= 2 * HIGH_GAMMA_BAND[1]:
        raise ConfigError(
            f"recording rate {rec.rate} too low for the {HIGH_GAMMA_BAND} Hz band"
        )
    filtered = bandpass_filter(rec.raster, rec.rate, *HIGH_GAMMA_BAND)
    env = analytic_envelope(filtered)
    down = resample(env, rec.rate, target_rate)
    values = np.maximum(down.T, 0.0)
    if zscore:
        mean = values.mean(axis=0, keepdims=True)
        std = values.std(axis=0, keepdims=True)
        values = (values - mean) / np.maximum(std, 1e-12)
    return NeuralFeatureSequence(
        values=values,
        frame_rate=target_rate,
        electrode_ids=tuple(range(rec.n_electrodes)),
    )


# -----------------------------
# Paired one-sided t-test
# -----------------------------
def student_t_sf(t: float, dof: int) -> float:
    """Upper-tail probability of Student's t via the regularized incomplete beta."""
    if not math.isfinite(t):
        return 0.0 if t > 0 else 1.0
    x = dof / (dof + t * t)
    half_tail = 0.5 * float(special.betainc(dof / 2.0, 0.5, x))
    return half_tail if t >= 0 else 1.0 - half_tail


def paired_t_one_sided(post_means, pre_means) -> tuple[float, float]:
    """Test whether paired differences post - pre are positive on average.

    Returns (t, p) with the sample-sd (n-1) convention.  Degenerate
    zero-variance differences give p = 0 when the mean is positive and
    p = 1 otherwise.
    """
    post = np.asarray(post_means, dtype=np.float64)
    pre = np.asarray(pre_means, dtype=np.float64)
    if post.shape != pre.shape or post.ndim != 1:
        raise InvalidInputError("post/pre must be 1-D sequences of equal length")
    n = len(post)
    if n < 2:
        raise InvalidInputError(f"need at least 2 paired samples, got {n}")
    d = post - pre
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean > 0:
            return math.inf, 0.0
        return (0.0 if mean == 0 else -math.inf), 1.0
    t = mean / (sd / math.sqrt(n))
    return t, student_t_sf(t, n - 1)


def select_responsive_electrodes(
    feat: NeuralFeatureSequence,
    onsets,
    alpha: float = 0.01,
    pre_window_ms: tuple[float, float] = (-200.0, 0.0),
    post_window_ms: tuple[float, float] = (400.0, 600.0),
) -> list[ElectrodeTestResult]:
    """Per-electrode paired t-test of post- vs pre-onset mean envelope.

    ``onsets`` are frame indices.  Window edges in ms are converted to
    frames by rounding toward the window interior, so at 50 Hz the
    defaults become frames -10..0 and 20..30 relative to onset.  Selection
    threshold is Bonferroni corrected: p < alpha / n_electrodes.
    """
    onsets = [int(o) for o in onsets]
    if len(onsets) < 2:
        raise InvalidInputError("need at least 2 trials for the paired test")

    def window_frames(window_ms):
        lo = math.ceil(window_ms[0] / 1000.0 * feat.frame_rate)
        hi = math.floor(window_ms[1] / 1000.0 * feat.frame_rate)
        return lo, hi

    pre_lo, pre_hi = window_frames(pre_window_ms)
    post_lo, post_hi = window_frames(post_window_ms)
    for i, onset in enumerate(onsets):
        if onset + pre_lo < 0 or onset + post_hi >= feat.n_frames:
            raise InvalidInputError(
                f"trial {i} at frame {onset} lacks a full pre/post window"
            )

    n_e = feat.n_electrodes
    pre_means = np.stack(
        [feat.values[o + pre_lo:o + pre_hi + 1].mean(axis=0) for o in onsets]
    )  # trials x electrodes
    post_means = np.stack(
        [feat.values[o + post_lo:o + post_hi + 1].mean(axis=0) for o in onsets]
    )
    threshold = alpha / n_e
    results = []
    for e in range(n_e):
        t, p = paired_t_one_sided(post_means[:, e], pre_means[:, e])
        results.append(
            ElectrodeTestResult(
                electrode_id=feat.electrode_ids[e],
                t_value=t,
                p_value=p,
                selected=bool(p < threshold),
            )
        )
    return results


def slice_trials(feat: NeuralFeatureSequence, onsets, durations) -> list[np.ndarray]:
    """Cut per-trial windows out of a feature sequence.

    ``onsets`` are frame indices, ``durations`` seconds; each slice has
    round(duration * frame_rate) frames.
    """
    out = []
    for i, (onset, dur) in enumerate(zip(onsets, durations)):
        onset = int(onset)
        n = int(round(dur * feat.frame_rate))
        if n <= 0:
            raise InvalidInputError(f"trial {i}: non-positive duration {dur}")
        if onset < 0 or onset + n > feat.n_frames:
            raise InvalidInputError(
                f"trial {i}: slice [{onset}, {onset + n}) outside 0..{feat.n_frames}"
            )
        out.append(feat.values[onset:onset + n].copy())
    return out


# -----------------------------
# N2SR recording file format
# -----------------------------
def write_recording(path, rec: NeuralRecording) -> None:
    """Write the bit-exact N2SR container: magic, header length, JSON header,
    then electrode-major float32 little-endian raster."""
    header = {
        "electrodes": rec.n_electrodes,
        "rate": rec.rate,
        "samples": rec.raster.shape[1],
        "trials": [
            {
                "id": t.trial_id,
                "onset_sample": t.onset_sample,
                "duration_samples": t.duration_samples,
                "transcript_phonemes": list(t.transcript_phonemes),
            }
            for t in rec.trials
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = rec.raster.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(N2SR_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_recording(path) -> NeuralRecording:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != N2SR_MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}, expected {N2SR_MAGIC!r}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        n_e, n_s = header["electrodes"], header["samples"]
        raw = fh.read(n_e * n_s * 4)
    if len(raw) != n_e * n_s * 4:
        raise InvalidInputError(f"{path}: truncated raster payload")
    raster = np.frombuffer(raw, dtype="<f4").reshape(n_e, n_s).astype(np.float64)
    trials = tuple(
        TrialMarker(
            trial_id=t["id"],
            onset_sample=int(t["onset_sample"]),
            duration_samples=int(t["duration_samples"]),
            transcript_phonemes=tuple(t.get("transcript_phonemes", ())),
        )
        for t in header.get("trials", [])
    )
    return NeuralRecording(raster=raster, rate=header["rate"], trials=trials)
