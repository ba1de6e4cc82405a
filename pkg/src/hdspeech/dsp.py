"""MFCC front end: framing, mel filterbank, DCT and regression deltas."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct, rfft

N_CEPS = 13
N_DELTA_ORDERS = 3
FEATURE_DIM = N_CEPS * (1 + N_DELTA_ORDERS)


class AudioError(ValueError):
    pass


@dataclass(frozen=True)
class AudioSegment:
    samples: np.ndarray
    sample_rate: int
    speaker_id: str = ""
    utterance_index: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise AudioError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FeatureMatrix:
    frames: np.ndarray
    frame_shift: float = 0.010
    frame_length: float = 0.025

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def slice(self, start: int, end: int) -> "FeatureMatrix":
        return FeatureMatrix(self.frames[start:end], self.frame_shift, self.frame_length)


@dataclass(frozen=True)
class MfccConfig:
    frame_length: float = 0.025
    frame_shift: float = 0.010
    n_filters: int = 23
    low_freq: float = 20.0
    high_freq: float | None = None  # None -> Nyquist
    n_ceps: int = N_CEPS
    log_floor: float = 1e-10
    delta_orders: int = N_DELTA_ORDERS
    delta_window: int = 2


def hz_to_mel(f):
    return 1127.0 * np.log1p(np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * np.expm1(np.asarray(m, dtype=float) / 1127.0)


def mel_filterbank(n_filters: int, n_fft: int, sample_rate: int, low: float, high: float) -> np.ndarray:
    """Triangular filters equally spaced on the mel scale, shape (n_filters, n_fft//2 + 1)."""
    edges = np.linspace(hz_to_mel(low), hz_to_mel(high), n_filters + 2)
    bin_mel = hz_to_mel(np.arange(n_fft // 2 + 1) * sample_rate / n_fft)
    left, centre, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mel - left) / (centre - left)
    down = (right - bin_mel) / (right - centre)
    return np.clip(np.minimum(up, down), 0.0, None)


def frame_signal(samples: np.ndarray, window: int, shift: int) -> np.ndarray:
    n_frames = (len(samples) - window) // shift + 1
    idx = np.arange(window)[None, :] + shift * np.arange(n_frames)[:, None]
    return samples[idx]


def append_deltas(base: np.ndarray, orders: int = N_DELTA_ORDERS, window: int = 2) -> np.ndarray:
    """Concatenate `base` with `orders` successive regression deltas.

    Each order applies d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2) to the
    previous order, replicating the first and last frames at the edges.
    """
    base = np.asarray(base, dtype=float)
    if base.ndim != 2 or base.shape[0] < 1:
        raise ValueError("base must be a non-empty 2-D array")
    if orders < 1:
        raise ValueError("orders must be >= 1")
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    out = [base]
    current = base
    for _ in range(orders):
        padded = np.concatenate([np.repeat(current[:1], window, axis=0), current,
                                 np.repeat(current[-1:], window, axis=0)])
        t = current.shape[0]
        delta = np.zeros_like(current)
        for n in range(1, window + 1):
            delta += n * (padded[window + n:window + n + t] - padded[window - n:window - n + t])
        current = delta / denom
        out.append(current)
    return np.concatenate(out, axis=1)


def base_mfcc(samples: np.ndarray, sample_rate: int, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    window = int(round(cfg.frame_length * sample_rate))
    shift = int(round(cfg.frame_shift * sample_rate))
    frames = frame_signal(samples, window, shift) * np.hamming(window)
    n_fft = 1 << (window - 1).bit_length()
    power = np.abs(rfft(frames, n=n_fft, axis=1)) ** 2
    high = cfg.high_freq if cfg.high_freq is not None else sample_rate / 2.0
    fbank = mel_filterbank(cfg.n_filters, n_fft, sample_rate, cfg.low_freq, high)
    log_mel = np.log(np.maximum(power @ fbank.T, cfg.log_floor))
    return dct(log_mel, type=2, norm="ortho", axis=1)[:, :cfg.n_ceps]


def extract_mfcc(audio: AudioSegment, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    samples = np.asarray(audio.samples, dtype=float)
    if audio.sample_rate < 8000:
        raise AudioError(f"sample rate {audio.sample_rate} Hz below 8 kHz")
    if not np.all(np.isfinite(samples)):
        raise AudioError("corrupt audio")
    if len(samples) < int(round(cfg.frame_length * audio.sample_rate)):
        raise AudioError("utterance too short")
    feats = append_deltas(base_mfcc(samples, audio.sample_rate, cfg), cfg.delta_orders, cfg.delta_window)
    return FeatureMatrix(feats, cfg.frame_shift, cfg.frame_length)


def read_wav(path, expected_rate: int | None = None) -> tuple[np.ndarray, int]:
    """Read 16-bit mono PCM, scaled to [-1, 1]."""
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1:
            raise AudioError(f"{path}: expected mono audio")
        if w.getsampwidth() != 2:
            raise AudioError(f"{path}: expected 16-bit PCM")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    if expected_rate is not None and rate != expected_rate:
        raise AudioError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    return np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0, rate


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())
