"""Auralization, noise injection at a target SNR, and source waveforms.

The received signal at each microphone is the source waveform convolved
with that microphone's room impulse response, optionally degraded by
independent white Gaussian noise scaled per channel to a prescribed SNR.
Source waveforms come either from a directory of mono WAV files or from a
built-in speech-like generator (pink noise with a slow syllabic amplitude
modulation) so the full pipeline runs without any external corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import fftconvolve, resample_poly

from .rir import DEFAULT_FS, SPEED_OF_SOUND, simulate_rir
from .scenes import Scene


class SilentChannelError(ValueError):
    """A channel has zero power; SNR scaling is undefined."""


class CorpusError(RuntimeError):
    """The configured WAV corpus is unusable (missing, empty, bad format)."""


@dataclass(eq=False)
class MultichannelSignal:
    """M equal-length sample sequences at rate fs, shape (M, n)."""

    channels: np.ndarray
    fs: int

    def __post_init__(self):
        ch = np.atleast_2d(np.asarray(self.channels, dtype=float))
        if ch.ndim != 2:
            raise ValueError("channels must be a 2-D (M, n) array")
        self.channels = ch

    @property
    def m(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


def auralize(
    scene: Scene,
    source_signal: np.ndarray,
    fs: int = DEFAULT_FS,
    *,
    max_order: int | None = None,
    c: float = SPEED_OF_SOUND,
) -> MultichannelSignal:
    """Convolve the source signal with every microphone's RIR.

    All channels share the source's time origin, so inter-channel delays
    are carried entirely by the RIR tap positions. ``max_order=0`` gives
    direct-path-only (anechoic) channels.
    """
    sig = np.asarray(source_signal, dtype=float).ravel()
    if sig.size == 0:
        raise ValueError("source signal is empty")
    channels = []
    for mic in scene.mics.positions:
        rir = simulate_rir(scene.room, scene.source.position, mic, fs, max_order=max_order, c=c)
        channels.append(fftconvolve(sig, rir.taps))
    return MultichannelSignal(np.vstack(channels), fs)


def add_noise(signals: MultichannelSignal, snr_db: float, rng_seed) -> MultichannelSignal:
    """Add independent white Gaussian noise per channel at the given SNR.

    ``snr_db=math.inf`` is the no-noise sentinel and returns an unchanged
    copy. Noise draws are seeded and consumed channel by channel in order.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return MultichannelSignal(signals.channels.copy(), signals.fs)
    rng = np.random.default_rng(rng_seed)
    out = np.empty_like(signals.channels)
    for k in range(signals.m):
        x = signals.channels[k]
        power = float(np.mean(x**2))
        if power <= 0.0:
            raise SilentChannelError(f"channel {k} has zero power")
        sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
        out[k] = x + sigma * rng.standard_normal(x.size)
    return MultichannelSignal(out, signals.fs)


@dataclass(frozen=True)
class SourceSignalConfig:
    """Where source waveforms come from.

    With ``corpus_dir`` set, files are drawn (seeded) from the mono WAVs in
    that directory; otherwise a synthetic speech-like signal is generated:
    pink-filtered Gaussian noise amplitude-modulated at ``syllable_rate_hz``,
    with a second-order spectral roll-off above ``spectral_rolloff_hz``
    mimicking the high-frequency decay of speech (None keeps plain pink).
    """

    corpus_dir: str | None = None
    syllable_rate_hz: float = 4.0
    modulation_depth: float = 0.8
    spectral_rolloff_hz: float | None = 1000.0


def provide_source_signal(
    config: SourceSignalConfig,
    duration: float,
    fs: int = DEFAULT_FS,
    rng_seed=0,
) -> np.ndarray:
    """One source waveform of exactly round(duration * fs) samples."""
    return provide_source_signal_with_id(config, duration, fs, rng_seed)[0]


def provide_source_signal_with_id(
    config: SourceSignalConfig,
    duration: float,
    fs: int = DEFAULT_FS,
    rng_seed=0,
) -> tuple[np.ndarray, str]:
    """Like :func:`provide_source_signal` but also names the waveform.

    Synthetic signals have zero mean and unit RMS. Corpus files pass
    through unmodified apart from format normalization (int16 -> [-1, 1]
    float), resampling to fs when rates differ, tiling when shorter than
    the requested duration, and truncation to it.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = int(round(duration * fs))
    rng = np.random.default_rng(rng_seed)

    if config.corpus_dir is None:
        return _synthetic_speech_like(n, fs, rng, config), f"synthetic:{_seed_repr(rng_seed)}"

    paths = sorted(Path(config.corpus_dir).glob("*.wav"))
    if not paths:
        raise CorpusError(f"no .wav files in {config.corpus_dir!r}")
    path = paths[int(rng.integers(len(paths)))]
    sig, file_fs = read_wav_mono(path)
    if sig.size == 0:
        raise CorpusError(f"{path} is empty")
    if file_fs != fs:
        sig = resample_poly(sig, fs, file_fs)
    if sig.size < n:
        sig = np.tile(sig, int(np.ceil(n / sig.size)))
    return sig[:n].astype(float), path.name


def _synthetic_speech_like(
    n: int, fs: int, rng: np.random.Generator, config: SourceSignalConfig
) -> np.ndarray:
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spectrum[0] = 0.0
    spectrum[1:] /= np.sqrt(freqs[1:])
    if config.spectral_rolloff_hz is not None:
        spectrum /= 1.0 + (freqs / config.spectral_rolloff_hz) ** 2
    pink = np.fft.irfft(spectrum, n)

    t = np.arange(n) / fs
    phase = rng.uniform(0.0, 2.0 * np.pi)
    depth = config.modulation_depth
    envelope = (1.0 - depth) + depth * 0.5 * (
        1.0 + np.sin(2.0 * np.pi * config.syllable_rate_hz * t + phase)
    )
    sig = pink * envelope
    sig = sig - sig.mean()
    return sig / np.sqrt(np.mean(sig**2))


def _seed_repr(rng_seed) -> str:
    if np.isscalar(rng_seed):
        return str(rng_seed)
    return "-".join(str(int(s)) for s in np.asarray(rng_seed).ravel())


def read_wav_mono(path) -> tuple[np.ndarray, int]:
    """Load a mono WAV as float64 in [-1, 1]. PCM16 and float32 only."""
    fs, data = wavfile.read(path)
    if data.ndim != 1:
        raise CorpusError(f"{path}: expected mono, got shape {data.shape}")
    if data.dtype == np.int16:
        return data.astype(float) / 32768.0, int(fs)
    if data.dtype == np.float32 or data.dtype == np.float64:
        return data.astype(float), int(fs)
    raise CorpusError(f"{path}: unsupported sample format {data.dtype}")


def write_wav(path, samples: np.ndarray, fs: int) -> None:
    """Write one channel as a 32-bit float WAV."""
    wavfile.write(path, fs, np.asarray(samples, dtype=np.float32))
