"""Objective evaluation of reconstructed speech.

Fidelity is scored as mel-spectral MSE, intelligibility as ESTOI, and
transcription accuracy as phoneme error rate against a pluggable
recognizer.  All metric computations are pure and thread-safe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from n2s.dsp import AudioClip, InvalidInputError, MelConfig, mel_spectrogram
from n2s.metrics.estoi import estoi

__all__ = [
    "PhonemeSequence",
    "EvalReport",
    "TrialScore",
    "mel_mse",
    "estoi",
    "per",
    "kde",
    "silverman_bandwidth",
]


@dataclass(frozen=True)
class PhonemeSequence:
    """Ordered phoneme labels from a fixed closed alphabet; may be empty."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)


@dataclass
class TrialScore:
    trial_id: str
    mel_mse: float
    estoi: float
    per: float | None = None


@dataclass
class EvalReport:
    """Per-trial scores plus across-trial summary statistics."""

    trials: list[TrialScore] = field(default_factory=list)

    def summary(self) -> dict:
        out = {}
        for key in ("mel_mse", "estoi", "per"):
            vals = [getattr(t, key) for t in self.trials if getattr(t, key) is not None]
            if vals:
                out[f"{key}_mean"] = float(np.mean(vals))
                out[f"{key}_std"] = float(np.std(vals))
        return out

    def to_dict(self) -> dict:
        return {
            "trials": [
                {"id": t.trial_id, "mel_mse": t.mel_mse, "estoi": t.estoi, "per": t.per}
                for t in self.trials
            ],
            "summary": self.summary(),
        }


def _match_length(samples: np.ndarray, n: int) -> np.ndarray:
    if len(samples) >= n:
        return samples[:n]
    return np.concatenate([samples, np.zeros(n - len(samples))])


def mel_mse(reference: AudioClip, estimate: AudioClip, cfg: MelConfig | None = None) -> float:
    """Mean squared difference of the two log-mel matrices.

    The estimate is truncated or silence-padded to the reference length
    before analysis so both matrices share a frame count.
    """
    if reference.rate != estimate.rate:
        raise InvalidInputError(
            f"sample rate mismatch: {reference.rate} vs {estimate.rate}"
        )
    cfg = cfg or MelConfig()
    est = AudioClip(_match_length(estimate.samples, len(reference.samples)), estimate.rate)
    ref_mel = mel_spectrogram(reference, cfg).values
    est_mel = mel_spectrogram(est, cfg).values
    return float(np.mean((ref_mel - est_mel) ** 2))


def per(reference: PhonemeSequence, hypothesis: PhonemeSequence) -> float:
    """Phoneme error rate: Levenshtein distance over reference length.

    Unit costs for insertion, deletion and substitution; the raw rate is
    reported, so values above 1 are possible for long hypotheses.
    """
    ref = reference.labels if isinstance(reference, PhonemeSequence) else tuple(reference)
    hyp = hypothesis.labels if isinstance(hypothesis, PhonemeSequence) else tuple(hypothesis)
    if len(ref) == 0:
        raise InvalidInputError("reference phoneme sequence must be non-empty")
    return levenshtein(ref, hyp) / len(ref)


def levenshtein(a, b) -> int:
    """Minimal number of single-symbol edits turning ``a`` into ``b``."""
    a, b = tuple(a), tuple(b)
    prev = list(range(len(b) + 1))
    for i, sym_a in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, sym_b in enumerate(b, start=1):
            cost = 0 if sym_a == sym_b else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[len(b)]


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule-of-thumb bandwidth for a Gaussian KDE."""
    x = np.asarray(samples, dtype=np.float64)
    n = len(x)
    if n < 2:
        return 1.0
    std = float(np.std(x, ddof=1))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    scale = min(std, iqr / 1.349) if iqr > 0 else std
    if scale <= 0:
        return 1.0
    return 0.9 * scale * n ** (-0.2)


def kde(samples, bandwidth: float | None = None, grid=None) -> np.ndarray:
    """Gaussian-kernel density estimate evaluated at the grid points."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise InvalidInputError("kde needs at least one sample")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
    if bandwidth <= 0:
        raise InvalidInputError(f"bandwidth must be positive, got {bandwidth}")
    if grid is None:
        lo, hi = x.min() - 4 * bandwidth, x.max() + 4 * bandwidth
        grid = np.linspace(lo, hi, 256)
    g = np.asarray(grid, dtype=np.float64)
    z = (g[:, None] - x[None, :]) / bandwidth
    dens = np.exp(-0.5 * z ** 2).sum(axis=1) / (len(x) * bandwidth * math.sqrt(2.0 * math.pi))
    return dens
