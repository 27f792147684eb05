"""Desk-scale experimental substrate: synthetic speech and simulated ECoG.

``synth_speech`` renders phoneme-labeled formant speech; ``simulate_ecog``
turns a clip into a multi-electrode recording whose responsive channels
carry a softplus-nonlinear, lagged mix of the clip's mel energy as
amplitude modulation of a high-gamma carrier, on top of pink background
noise.  ``build_dataset`` writes a seeded, split, fully reproducible
corpus: WAVs, N2SR recordings, and a JSON manifest.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal as sps

from n2s.dsp import (
    AudioClip,
    ConfigError,
    InvalidInputError,
    MelConfig,
    bandpass_filter,
    mel_spectrogram,
    resample,
    save_wav,
)
from n2s.neuro import NeuralRecording, TrialMarker, write_recording

SILENCE = "SIL"

__all__ = [
    "Phoneme",
    "SyntheticCorpusConfig",
    "EcogSimConfig",
    "DatasetManifest",
    "default_alphabet",
    "synth_speech",
    "simulate_ecog",
    "build_dataset",
]


@dataclass(frozen=True)
class Phoneme:
    """Rendering recipe for one symbol.

    Vowels list (frequency, bandwidth, amplitude) formant triples driven by
    a harmonic source; fricatives shape white noise into (low, high) bands.
    """

    name: str
    kind: str  # "vowel" | "fricative" | "silence"
    formants: tuple[tuple[float, float, float], ...] = ()
    noise_band: tuple[float, float] | None = None
    level: float = 0.2


def default_alphabet() -> tuple[Phoneme, ...]:
    return (
        Phoneme(SILENCE, "silence", level=0.0),
        Phoneme("AA", "vowel", formants=((730, 90, 1.0), (1090, 110, 0.6), (2440, 170, 0.2))),
        Phoneme("EH", "vowel", formants=((530, 80, 1.0), (1840, 140, 0.5), (2480, 180, 0.2))),
        Phoneme("IY", "vowel", formants=((270, 60, 1.0), (2290, 180, 0.5), (3010, 200, 0.25))),
        Phoneme("UW", "vowel", formants=((300, 70, 1.0), (870, 100, 0.5), (2240, 160, 0.12))),
        Phoneme("S", "fricative", noise_band=(4500, 7500), level=0.12),
        Phoneme("SH", "fricative", noise_band=(1800, 4000), level=0.14),
    )


@dataclass(frozen=True)
class SyntheticCorpusConfig:
    n_utterances: int = 200
    phonemes_per_utterance: tuple[int, int] = (30, 40)
    rate: int = 16000
    seed: int = 0
    alphabet: tuple[Phoneme, ...] = field(default_factory=default_alphabet)

    def __post_init__(self):
        if self.n_utterances < 1:
            raise ConfigError("n_utterances must be >= 1")
        lo, hi = self.phonemes_per_utterance
        if not (1 <= lo <= hi):
            raise ConfigError(f"bad phonemes_per_utterance range ({lo}, {hi})")


@dataclass(frozen=True)
class EcogSimConfig:
    n_electrodes: int = 32
    n_responsive: int = 8
    raw_rate: float = 400.0
    lag_range_ms: tuple[float, float] = (20.0, 60.0)
    noise_level: float = 0.5
    onset_gain: float = 1.0
    carrier_band: tuple[float, float] = (90.0, 130.0)
    bands_per_electrode: int = 12
    drive_gain: float = 1.0
    drive_threshold: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.n_responsive <= self.n_electrodes):
            raise ConfigError("need 0 < n_responsive <= n_electrodes")
        if self.raw_rate <= 2 * self.carrier_band[1]:
            raise ConfigError("raw_rate must exceed twice the carrier band top")
        if self.lag_range_ms[0] < 0:
            raise ConfigError("lags must be nonnegative")
        if self.noise_level < 0 or self.onset_gain < 0:
            raise ConfigError("noise_level and onset_gain must be nonnegative")

    def responsive_ids(self) -> tuple[int, ...]:
        rng = np.random.default_rng([self.seed, 0xE1EC])
        ids = rng.choice(self.n_electrodes, size=self.n_responsive, replace=False)
        return tuple(sorted(int(i) for i in ids))


# -----------------------------
# Speech synthesis
# -----------------------------
def _resonator_sos(freq: float, bw: float, rate: int) -> np.ndarray:
    r = math.exp(-math.pi * bw / rate)
    theta = 2.0 * math.pi * freq / rate
    # two-pole resonator normalized to unit gain at the resonance frequency
    b0 = (1.0 - r) * math.sqrt(1.0 - 2.0 * r * math.cos(2.0 * theta) + r * r)
    return np.array([[b0, 0.0, 0.0, 1.0, -2.0 * r * math.cos(theta), r * r]])


def _render_segment(ph: Phoneme, n: int, rate: int, f0: float, rng) -> np.ndarray:
    if ph.kind == "silence":
        return np.zeros(n)
    if ph.kind == "vowel":
        period = max(int(round(rate / f0)), 2)
        source = np.zeros(n)
        source[::period] = 1.0
        # -6 dB/oct source tilt keeps the upper formants natural
        source = sps.lfilter([1.0], [1.0, -0.9], source)
        seg = np.zeros(n)
        for freq, bw, amp in ph.formants:
            seg += amp * sps.sosfilt(_resonator_sos(freq, bw, rate), source)
        seg += 0.01 * rng.normal(0.0, 1.0, n)  # aspiration floor
    elif ph.kind == "fricative":
        noise = rng.normal(0.0, 1.0, n)
        seg = bandpass_filter(noise, rate, *ph.noise_band)
    else:
        raise ConfigError(f"unknown phoneme kind {ph.kind!r}")
    rms = math.sqrt(float(np.mean(seg**2)))
    if rms > 0:
        seg = seg * (ph.level / rms)
    fade = min(int(0.008 * rate), n // 2)
    if fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
        seg[:fade] *= ramp
        seg[-fade:] *= ramp[::-1]
    return seg


def synth_speech(
    labels, cfg: SyntheticCorpusConfig, hop: int | None = None
) -> tuple[AudioClip, list[str]]:
    """Render a phoneme sequence to audio plus frame-level labels.

    Segments last 120-220 ms (seeded), voiced phonemes are formant-filtered
    harmonic sources, fricatives are band-shaped noise; the result is peak
    normalized to 0.9.  Frame labels align with the mel hop: label t covers
    the frame centered at sample t * hop, and the label count matches the
    mel frame count 1 + N // hop.
    """
    labels = list(labels)
    if not labels:
        raise InvalidInputError("cannot synthesize an empty phoneme sequence")
    by_name = {p.name: p for p in cfg.alphabet}
    unknown = [l for l in labels if l not in by_name]
    if unknown:
        raise ConfigError(f"phonemes not in alphabet: {unknown}")
    hop = hop or MelConfig().hop
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    f0 = rng.uniform(100.0, 140.0)
    pieces = []
    spans = []  # (start_sample, end_sample, label)
    cursor = 0
    for lab in labels:
        dur = rng.uniform(0.12, 0.22)
        n = int(round(dur * cfg.rate))
        jitter = f0 * (1.0 + rng.uniform(-0.05, 0.05))
        pieces.append(_render_segment(by_name[lab], n, cfg.rate, jitter, rng))
        spans.append((cursor, cursor + n, lab))
        cursor += n
    samples = np.concatenate(pieces)
    peak = float(np.max(np.abs(samples)))
    if peak > 0:
        samples = samples * (0.9 / peak)
    clip = AudioClip(samples=samples, rate=cfg.rate)

    n_frames = 1 + len(samples) // hop
    frame_labels = []
    span_idx = 0
    for t in range(n_frames):
        center = min(t * hop, len(samples) - 1)
        while span_idx + 1 < len(spans) and center >= spans[span_idx][1]:
            span_idx += 1
        frame_labels.append(spans[span_idx][2])
    return clip, frame_labels


# -----------------------------
# ECoG simulation
# -----------------------------
def _pink_noise(n: int, rng) -> np.ndarray:
    """1/f-power noise with unit RMS via FFT shaping."""
    white = rng.normal(0.0, 1.0, n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0)
    shape = np.zeros_like(freqs)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    pink = np.fft.irfft(spec * shape, n=n)
    rms = float(np.sqrt(np.mean(pink**2)))
    return pink / rms if rms > 0 else pink


def _flat_carrier(n: int, band: tuple[float, float], rate: float, rng) -> np.ndarray:
    """Band-limited noise carrier with its envelope flattened to ~1 so the
    modulation envelope survives high-gamma extraction."""
    noise = rng.normal(0.0, 1.0, n)
    bp = bandpass_filter(noise, rate, *band)
    env = np.abs(sps.hilbert(bp))
    return bp / np.maximum(env, 1e-9)


def simulate_ecog(audio: AudioClip, cfg: EcogSimConfig) -> NeuralRecording:
    """Simulate one listening trial for a clip.

    Responsive electrodes carry softplus(mixing . mel(x), lagged) plus an
    exponentially decaying onset transient, amplitude-modulating a
    constant-envelope carrier inside the high-gamma band; every electrode
    receives pink background noise scaled by noise_level.  The stimulus
    onset falls at a seeded offset of at least one second.
    """
    if audio.rate != 16000:
        raise InvalidInputError(f"simulator expects 16 kHz audio, got {audio.rate}")
    rng = np.random.default_rng([cfg.seed, 0xEC06])
    raw_rate = cfg.raw_rate
    mel = mel_spectrogram(audio)
    activity = mel.values - math.log(mel.config.log_floor)  # >= 0, silence -> 0
    n_bands = activity.shape[1]

    onset_offset = rng.uniform(1.0, 1.5)
    onset_sample = int(round(onset_offset * raw_rate))
    n_speech = int(round(audio.duration * raw_rate))
    tail = int(round(0.5 * raw_rate))
    n_total = onset_sample + n_speech + tail

    responsive = set(cfg.responsive_ids())
    mix_rng = np.random.default_rng([cfg.seed, 0x313A])
    raster = np.empty((cfg.n_electrodes, n_total))
    t_speech = np.arange(n_speech) / raw_rate
    for e in range(cfg.n_electrodes):
        chan_rng = np.random.default_rng([cfg.seed, 0xC4A, e])
        trace = cfg.noise_level * _pink_noise(n_total, chan_rng)
        # mixing weights are drawn for every electrode to keep the stream
        # layout independent of which ids happen to be responsive
        bands = mix_rng.choice(n_bands, size=min(cfg.bands_per_electrode, n_bands), replace=False)
        weights = mix_rng.uniform(0.5, 1.5, size=len(bands))
        weights = weights / weights.sum()
        lag_ms = mix_rng.uniform(*cfg.lag_range_ms)
        if e in responsive:
            drive = activity[:, bands] @ weights  # feature-rate drive
            drive = resample(drive, mel.frame_rate, raw_rate)[:n_speech]
            if len(drive) < n_speech:
                drive = np.pad(drive, (0, n_speech - len(drive)), mode="edge")
            lag = int(round(lag_ms / 1000.0 * raw_rate))
            drive = np.concatenate([np.full(lag, drive[0]), drive])[:n_speech]
            response = np.logaddexp(0.0, cfg.drive_gain * (drive - cfg.drive_threshold))
            response = response + cfg.onset_gain * np.exp(-t_speech / 0.15)
            carrier = _flat_carrier(n_total, cfg.carrier_band, raw_rate, chan_rng)
            envelope = np.zeros(n_total)
            envelope[onset_sample:onset_sample + n_speech] = response
            trace = trace + envelope * carrier
        raster[e] = trace
    marker = TrialMarker(
        trial_id="trial",
        onset_sample=onset_sample,
        duration_samples=n_speech,
        transcript_phonemes=(),
    )
    return NeuralRecording(raster=raster, rate=raw_rate, trials=(marker,))


# -----------------------------
# Dataset assembly
# -----------------------------
@dataclass
class DatasetManifest:
    trials: list[dict]
    configs: dict

    def ids_for_split(self, split: str) -> list[str]:
        return [t["id"] for t in self.trials if t["split"] == split]

    def trials_for_split(self, split: str) -> list[dict]:
        return [t for t in self.trials if t["split"] == split]

    def to_dict(self) -> dict:
        return {"trials": self.trials, "configs": self.configs}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        data = json.loads(Path(path).read_text())
        return cls(trials=data["trials"], configs=data["configs"])


def split_sizes(n: int, split: tuple[float, float, float]) -> tuple[int, int, int]:
    """Trial counts for (train, val, test): non-train splits get the rounded
    share, train takes the remainder."""
    if abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {split}")
    n_val = int(math.floor(n * split[1] + 0.5))
    n_test = int(math.floor(n * split[2] + 0.5))
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ConfigError("split leaves no training trials")
    return n_train, n_val, n_test


def utterance_seed(base_seed: int, index: int) -> int:
    return base_seed * 100003 + index


def build_dataset(
    corpus_cfg: SyntheticCorpusConfig,
    sim_cfg: EcogSimConfig,
    out_dir,
    split: tuple[float, float, float] = (0.7, 0.2, 0.1),
) -> DatasetManifest:
    """Generate the full desk corpus on disk and return its manifest.

    Per trial: a WAV, an N2SR recording, and a manifest row carrying the
    phoneme transcript and split assignment.  Seeded shuffle; every trial
    lands in exactly one split.
    """
    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    rec_dir = out_dir / "n2sr"
    try:
        wav_dir.mkdir(parents=True, exist_ok=True)
        rec_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOError(f"cannot create dataset directories under {out_dir}: {exc}") from exc

    n = corpus_cfg.n_utterances
    n_train, n_val, n_test = split_sizes(n, split)
    order_rng = np.random.default_rng([corpus_cfg.seed, 0x59117])
    order = order_rng.permutation(n)
    split_of = {}
    for pos, idx in enumerate(order):
        if pos < n_train:
            split_of[int(idx)] = "train"
        elif pos < n_train + n_val:
            split_of[int(idx)] = "val"
        else:
            split_of[int(idx)] = "test"

    content = [p.name for p in corpus_cfg.alphabet if p.kind != "silence"]
    lo, hi = corpus_cfg.phonemes_per_utterance
    trials = []
    for i in range(n):
        useed = utterance_seed(corpus_cfg.seed, i)
        lab_rng = np.random.default_rng([useed, 0x1AB])
        n_ph = int(lab_rng.integers(lo, hi + 1))
        labels = [content[int(k)] for k in lab_rng.integers(0, len(content), n_ph)]
        clip, frame_labels = synth_speech(labels, replace(corpus_cfg, seed=useed))
        rec = simulate_ecog(clip, replace(sim_cfg, seed=useed))
        trial_id = f"trial_{i:04d}"
        marker = replace(rec.trials[0], trial_id=trial_id, transcript_phonemes=tuple(labels))
        rec = NeuralRecording(raster=rec.raster, rate=rec.rate, trials=(marker,))
        wav_path = wav_dir / f"{trial_id}.wav"
        rec_path = rec_dir / f"{trial_id}.n2sr"
        try:
            save_wav(wav_path, clip)
            write_recording(rec_path, rec)
        except OSError as exc:
            raise IOError(f"failed writing trial files for {trial_id}: {exc}") from exc
        trials.append(
            {
                "id": trial_id,
                "wav": str(wav_path.relative_to(out_dir)),
                "n2sr": str(rec_path.relative_to(out_dir)),
                "phonemes": labels,
                "frame_labels": frame_labels,
                "split": split_of[i],
                "seed": useed,
                "duration": clip.duration,
            }
        )
    manifest = DatasetManifest(
        trials=trials,
        configs={
            "corpus": _jsonable(asdict(corpus_cfg)),
            "ecog": _jsonable(asdict(sim_cfg)),
            "split": list(split),
            "responsive_electrodes": list(sim_cfg.responsive_ids()),
        },
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj
