"""WAV and JSON file helpers with atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.io import wavfile

WAV_FORMATS = ("float32", "pcm16")


def _atomic(path, write, mode="wb"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path, text: str):
    _atomic(path, lambda fh: fh.write(text), mode="w")


def write_json(path, obj):
    """Deterministic JSON (fixed key order as given, repr floats)."""
    write_text(path, json.dumps(obj, indent=1) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_wav(path, data: np.ndarray, sample_rate: float, fmt: str = "float32"):
    """Write (T,) or (M, T) audio. ``pcm16`` clips to [-1, 1)."""
    if fmt not in WAV_FORMATS:
        raise ValueError(f"unknown wav format {fmt!r}; use one of {WAV_FORMATS}")
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 2:
        x = x.T  # scipy wants (T, M)
    if fmt == "pcm16":
        out = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        out = x.astype(np.float32)
    rate = int(round(sample_rate))
    _atomic(path, lambda fh: wavfile.write(fh, rate, out))


def read_wav(path) -> tuple[np.ndarray, int]:
    """Audio as float64 (M, T) plus the sample rate; PCM is scaled to [-1, 1)."""
    rate, x = wavfile.read(path)
    if x.dtype == np.int16:
        x = x.astype(np.float64) / 32768.0
    elif x.dtype == np.int32:
        x = x.astype(np.float64) / 2147483648.0
    elif x.dtype == np.uint8:
        x = (x.astype(np.float64) - 128.0) / 128.0
    else:
        x = x.astype(np.float64)
    x = x[:, None] if x.ndim == 1 else x
    return np.ascontiguousarray(x.T), int(rate)


def read_mono(path) -> tuple[np.ndarray, int]:
    x, rate = read_wav(path)
    if x.shape[0] != 1:
        raise ValueError(f"{path}: expected a mono file, got {x.shape[0]} channels")
    return x[0], rate
