"""Beampattern-based DOA estimation and frame-level localization accuracy."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .losses import VadMask
from .room import SPEED_OF_SOUND, ArrayGeometry, steering_vectors
from .stft import WindowSpec

ACCURACY_THRESHOLD_DEG = 15.0


@dataclass(frozen=True)
class AngularGrid:
    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64).reshape(-1)
        if a.size == 0:
            raise ValueError("angular grid is empty")
        if np.any(a <= 0) or np.any(a >= 180):
            raise ValueError("grid angles must lie in (0, 180) degrees")
        if np.any(np.diff(a) <= 0):
            raise ValueError("grid angles must be strictly increasing")
        object.__setattr__(self, "angles", a)

    @classmethod
    def fine(cls) -> "AngularGrid":
        return cls(np.arange(30.0, 151.0, 1.0))

    @classmethod
    def coarse(cls) -> "AngularGrid":
        return cls(np.arange(30.0, 151.0, 15.0))

    @classmethod
    def named(cls, name: str) -> "AngularGrid":
        if name == "fine":
            return cls.fine()
        if name == "coarse":
            return cls.coarse()
        raise ValueError(f"unknown grid {name!r}; use 'fine' or 'coarse'")

    def __len__(self):
        return self.angles.size


@dataclass
class Beampattern:
    angles: np.ndarray
    values: np.ndarray
    per_frame: np.ndarray | None = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["angle_deg", "value"])
            for a, v in zip(self.angles, self.values):
                w.writerow([repr(float(a)), repr(float(v))])


@dataclass
class DoaEstimate:
    theta_hat: float
    per_frame: np.ndarray | None = None
    truth: float | None = None

    @property
    def error(self) -> float | None:
        return None if self.truth is None else abs(self.theta_hat - self.truth)


def _active(vad) -> np.ndarray:
    return vad.active if isinstance(vad, VadMask) else np.asarray(vad, dtype=bool).reshape(-1)


def _response_magnitudes(W: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-angle mean over bins of ``|W^H a_theta|``.

    ``W`` is (F, M) -> result (A,); ``W`` is (L, F, M) -> result (A, L).
    """
    if W.ndim == 2:
        return np.abs(np.einsum("fm,afm->af", np.conj(W), A)).mean(axis=-1)
    out = np.empty((A.shape[0], W.shape[0]))
    Wc = np.conj(W)
    for i in range(A.shape[0]):
        out[i] = np.abs(np.einsum("lfm,fm->lf", Wc, A[i])).mean(axis=-1)
    return out


def beampattern(W, grid: AngularGrid, vad, array: ArrayGeometry,
                spec: WindowSpec = WindowSpec(), sample_rate: float = 16000.0,
                c: float = SPEED_OF_SOUND) -> Beampattern:
    """Mean ``|W^H a_theta|`` over speech-active frames and all bins."""
    Wv = np.asarray(getattr(W, "values", W), dtype=np.complex128)
    act = _active(vad)
    if not act.any():
        raise ValueError("no active frames")
    A = steering_vectors(grid.angles, array, spec, c, sample_rate)
    if Wv.shape[-2:] != A.shape[1:]:
        raise ValueError(f"weights {Wv.shape} do not match steering vectors {A.shape[1:]}")
    if Wv.ndim == 2:
        return Beampattern(grid.angles, _response_magnitudes(Wv, A))
    if Wv.shape[0] != act.size:
        raise ValueError(f"weights have {Wv.shape[0]} frames, VAD has {act.size}")
    per_frame = _response_magnitudes(Wv[act], A)
    return Beampattern(grid.angles, per_frame.mean(axis=1), per_frame)


def estimate_doa(bp: Beampattern, truth: float | None = None) -> DoaEstimate:
    """Beampattern peak; ties go to the smallest angle."""
    if bp.values.size == 0:
        raise ValueError("empty beampattern")
    # argmax returns the first maximum, i.e. the smallest angle on an ascending grid
    return DoaEstimate(float(bp.angles[int(np.argmax(bp.values))]), truth=truth)


def per_frame_doa(W, grid: AngularGrid, vad, array: ArrayGeometry,
                  spec: WindowSpec = WindowSpec(), sample_rate: float = 16000.0,
                  c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Beampattern peak for each speech-active frame (inactive frames are skipped)."""
    Wv = np.asarray(getattr(W, "values", W), dtype=np.complex128)
    act = _active(vad)
    if not act.any():
        return np.empty(0)
    A = steering_vectors(grid.angles, array, spec, c, sample_rate)
    if Wv.ndim == 2:
        theta = grid.angles[int(np.argmax(_response_magnitudes(Wv, A)))]
        return np.full(int(act.sum()), theta)
    if Wv.shape[0] != act.size:
        raise ValueError(f"weights have {Wv.shape[0]} frames, VAD has {act.size}")
    per_frame = _response_magnitudes(Wv[act], A)
    return grid.angles[np.argmax(per_frame, axis=0)]


def localization_accuracy(estimates, truth: float,
                          threshold: float = ACCURACY_THRESHOLD_DEG) -> float:
    """Percentage of frames whose angle error is strictly below ``threshold``."""
    est = np.asarray(estimates, dtype=np.float64).reshape(-1)
    if est.size == 0:
        raise ValueError("no frame estimates to score")
    hits = int(np.count_nonzero(np.abs(est - truth) < threshold))
    return 100.0 * hits / est.size
