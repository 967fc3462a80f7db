"""Short-time Fourier analysis and weighted overlap-add synthesis.

Frame ``l`` covers samples ``[l * hop, l * hop + window_length)``; there is no
centering or edge padding. Spectra are one-sided (``fft_size // 2 + 1`` bins).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

__all__ = [
    "WindowSpec",
    "MultichannelWaveform",
    "Spectrogram",
    "frame_count",
    "stft",
    "istft",
    "istft_adjoint",
]

_WSUM_FLOOR = 1e-10


WINDOW_KINDS = ("hamming", "hann", "blackman", "boxcar")


@dataclass(frozen=True)
class WindowSpec:
    """Analysis parameters. Defaults are a 25 ms / 10 ms Hamming pair at 16 kHz."""

    window_length: int = 400
    hop_length: int = 160
    fft_size: int = 512
    window_kind: str = "hamming"

    def __post_init__(self):
        if min(self.window_length, self.hop_length, self.fft_size) <= 0:
            raise ValueError("window parameters must be positive")
        if not self.hop_length <= self.window_length <= self.fft_size:
            raise ValueError(
                "need hop_length <= window_length <= fft_size, got "
                f"{self.hop_length}/{self.window_length}/{self.fft_size}"
            )
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}, got {self.window_kind!r}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window(self) -> np.ndarray:
        return _window(self.window_kind, self.window_length).copy()

    def bin_frequencies(self, sample_rate: float) -> np.ndarray:
        return np.arange(self.num_bins) * sample_rate / self.fft_size

    def to_dict(self) -> dict:
        return {
            "window_length": self.window_length,
            "hop_length": self.hop_length,
            "fft_size": self.fft_size,
            "window_kind": self.window_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(**d)


@lru_cache(maxsize=16)
def _window(kind: str, length: int) -> np.ndarray:
    # periodic (fftbins=True) variant
    w = get_window(kind, length, fftbins=True).astype(np.float64)
    w.flags.writeable = False
    return w


@lru_cache(maxsize=16)
def _synthesis_gain(spec: WindowSpec, num_frames: int, length: int) -> np.ndarray:
    """Per-sample ``w / sum(w^2)`` factors used by WOLA, shape (L, window_length)."""
    w = _window(spec.window_kind, spec.window_length)
    hop, wl = spec.hop_length, spec.window_length
    total = max(length, (num_frames - 1) * hop + wl)
    wsum = np.zeros(total)
    for l in range(num_frames):
        wsum[l * hop:l * hop + wl] += w * w
    inv = np.zeros_like(wsum)
    covered = wsum > _WSUM_FLOOR
    inv[covered] = 1.0 / wsum[covered]
    idx = np.arange(num_frames)[:, None] * hop + np.arange(wl)[None, :]
    gain = w[None, :] * inv[idx]
    gain.flags.writeable = False
    return gain


@dataclass
class MultichannelWaveform:
    """Real signal of shape (M, T) with its sample rate."""

    data: np.ndarray
    sample_rate: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2 or data.shape[0] < 1:
            raise ValueError(f"expected (M, T) samples, got shape {data.shape}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.data = data

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class Spectrogram:
    """Complex STFT of shape (M, L, F).

    ``length`` is the number of time samples the synthesis should return and
    ``sample_rate`` is carried through for the inverse.
    """

    data: np.ndarray
    spec: WindowSpec = field(default_factory=WindowSpec)
    sample_rate: float = 16000.0
    length: int | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise ValueError(f"expected (M, L, F) spectrogram, got shape {data.shape}")
        if data.shape[2] != self.spec.num_bins:
            raise ValueError(
                f"spectrogram has {data.shape[2]} bins, window spec implies {self.spec.num_bins}"
            )
        if data.shape[1] < 1:
            raise ValueError("spectrogram has no frames")
        self.data = data.astype(np.complex128, copy=False)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_bins(self) -> int:
        return self.data.shape[2]


def frame_count(signal_length: int, spec: WindowSpec) -> int:
    """Number of full analysis frames that fit in ``signal_length`` samples."""
    if signal_length < spec.window_length:
        raise ValueError(
            f"signal too short: {signal_length} samples < window of {spec.window_length}"
        )
    return (signal_length - spec.window_length) // spec.hop_length + 1


def stft(x: MultichannelWaveform | np.ndarray, spec: WindowSpec = WindowSpec(),
         sample_rate: float | None = None) -> Spectrogram:
    """Forward STFT of a real (M, T) or (T,) signal."""
    if not isinstance(x, MultichannelWaveform):
        x = MultichannelWaveform(x, sample_rate or 16000.0)
    num_frames = frame_count(x.num_samples, spec)
    frames = sliding_window_view(x.data, spec.window_length, axis=-1)
    frames = frames[:, ::spec.hop_length][:, :num_frames]
    windowed = frames * _window(spec.window_kind, spec.window_length)
    data = np.fft.rfft(windowed, n=spec.fft_size, axis=-1)
    return Spectrogram(data, spec, x.sample_rate, x.num_samples)


def istft(X: Spectrogram) -> MultichannelWaveform:
    """WOLA inverse: synthesis window equal to the analysis window, normalized by
    the overlapped squared-window sum. Samples no frame covers come out as zero."""
    spec = X.spec
    if not isinstance(X, Spectrogram):
        raise TypeError("istft expects a Spectrogram")
    M, L, F = X.data.shape
    if F != spec.num_bins:
        raise ValueError("bin count does not match window spec")
    length = X.length if X.length is not None else (L - 1) * spec.hop_length + spec.window_length
    frames = np.fft.irfft(X.data, n=spec.fft_size, axis=-1)[..., :spec.window_length]
    frames = frames * _synthesis_gain(spec, L, length)
    out = _overlap_add(frames, spec.hop_length, max(length, (L - 1) * spec.hop_length + spec.window_length))
    return MultichannelWaveform(out[:, :length], X.sample_rate)


def _overlap_add(frames: np.ndarray, hop: int, total: int) -> np.ndarray:
    M, L, wl = frames.shape
    out = np.zeros((M, total))
    if wl % hop == 0:
        # fast path: fold the frame into hop-sized chunks
        k = wl // hop
        chunks = frames.reshape(M, L, k, hop)
        for j in range(k):
            out[:, j * hop:(j + L) * hop] += chunks[:, :, j, :].reshape(M, L * hop)
    else:
        for l in range(L):
            out[:, l * hop:l * hop + wl] += frames[:, l]
    return out


def istft_adjoint(g: np.ndarray, spec: WindowSpec, num_frames: int) -> np.ndarray:
    """Adjoint of :func:`istft` as a real-linear map, applied to a time gradient.

    For a real loss ``J(istft(X))`` with time-domain gradient ``g`` (shape (T,)),
    returns ``dJ/dRe(X) + 1j * dJ/dIm(X)`` of shape (L, F). Imaginary parts of
    the DC and Nyquist bins are dropped by the inverse real FFT, so their
    gradient is zero.
    """
    g = np.asarray(g, dtype=np.float64)
    T = g.shape[-1]
    hop, wl, n = spec.hop_length, spec.window_length, spec.fft_size
    needed = (num_frames - 1) * hop + wl
    if T < needed:
        g = np.concatenate([g, np.zeros(needed - T)])
    frames = sliding_window_view(g, wl)[::hop][:num_frames]
    frames = frames * _synthesis_gain(spec, num_frames, T)
    G = np.fft.rfft(frames, n=n, axis=-1) / n
    G[:, 1:(n + 1) // 2] *= 2.0
    G[:, 0] = G[:, 0].real
    if n % 2 == 0:
        G[:, -1] = G[:, -1].real
    return G
