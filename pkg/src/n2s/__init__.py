"""n2s: neural-to-speech reconstruction at desk scale.

A two-phase pipeline: a GAN speech autoencoder is pre-trained on an audio
corpus, then a lightweight recurrent adaptor learns to map preprocessed
neural recordings into the autoencoder's feature space so the frozen
generator reconstructs intelligible speech.  Ships with a deterministic
corpus/ECoG simulator and objective evaluation (mel MSE, ESTOI, PER).
"""

from n2s.dsp import AudioClip, MelConfig, MelSpectrogram, mel_spectrogram

__version__ = "0.1.0"

__all__ = ["AudioClip", "MelConfig", "MelSpectrogram", "mel_spectrogram", "__version__"]
