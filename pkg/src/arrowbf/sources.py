"""Built-in source material so scenes can be generated without external corpora.

The target is speech-shaped noise gated by a syllable-rate envelope; the
interferer is a music-like mix of harmonic notes and a slow chirp.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, sosfilt


def speech_shaped_noise(duration: float, sample_rate: float, rng: np.random.Generator) -> np.ndarray:
    n = int(round(duration * sample_rate))
    x = rng.standard_normal(n)
    # long-term speech spectrum: band 100 Hz - 5 kHz with a gentle high-frequency tilt
    sos = butter(2, [100.0, min(5000.0, 0.45 * sample_rate)], btype="bandpass",
                 fs=sample_rate, output="sos")
    x = sosfilt(sos, x)
    tilt = butter(1, 800.0, btype="lowpass", fs=sample_rate, output="sos")
    x = 0.7 * sosfilt(tilt, x) + 0.3 * x

    # syllables of 80-300 ms separated by short pauses
    env = np.zeros(n)
    t = int(rng.uniform(0.0, 0.05) * sample_rate)
    while t < n:
        length = int(rng.uniform(0.08, 0.3) * sample_rate)
        seg = np.hanning(length) ** 0.5 * rng.uniform(0.4, 1.0)
        end = min(n, t + length)
        env[t:end] = seg[:end - t]
        t = end + int(rng.uniform(0.02, 0.15) * sample_rate)
    y = x * env
    return y / (np.max(np.abs(y)) + 1e-12) * 0.5


def music_like(duration: float, sample_rate: float, rng: np.random.Generator) -> np.ndarray:
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    y = np.zeros(n)
    pos = 0
    while pos < n:
        length = int(rng.uniform(0.25, 0.8) * sample_rate)
        end = min(n, pos + length)
        tt = t[pos:end] - t[pos]
        f0 = 110.0 * 2.0 ** (rng.integers(0, 36) / 12.0)
        vib = 1.0 + 0.005 * np.sin(2 * np.pi * 5.5 * tt)
        note = np.zeros(end - pos)
        for h in range(1, 7):
            if h * f0 * 1.01 >= 0.45 * sample_rate:
                break
            note += (0.6 ** (h - 1)) * np.sin(2 * np.pi * h * f0 * np.cumsum(vib) / sample_rate
                                              + rng.uniform(0, 2 * np.pi))
        attack = np.minimum(1.0, tt / 0.02)
        note *= attack * np.exp(-tt / rng.uniform(0.3, 1.0))
        y[pos:end] += note
        pos = end
    f_start, f_end = rng.uniform(200.0, 600.0), rng.uniform(2000.0, 0.4 * sample_rate)
    phase = 2 * np.pi * (f_start * t + 0.5 * (f_end - f_start) / max(duration, 1e-9) * t ** 2)
    y += 0.3 * np.sin(phase)
    y += 0.05 * rng.standard_normal(n)
    return y / (np.max(np.abs(y)) + 1e-12) * 0.5


def insert_clip(clip: np.ndarray, total_length: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Place ``clip`` at a random offset inside a zero signal of ``total_length``."""
    if clip.size > total_length:
        raise ValueError("clip longer than the target length")
    offset = int(rng.integers(0, total_length - clip.size + 1))
    out = np.zeros(total_length)
    out[offset:offset + clip.size] = clip
    return out, offset
