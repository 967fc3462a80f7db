"""Filter-and-sum beamforming, direct weight optimization and an MVDR reference."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .losses import LossProblem, LossWeights, VadMask, loss_and_grad
from .room import ArrayGeometry, SPEED_OF_SOUND, steering_vectors
from .stft import Spectrogram, WindowSpec

logger = logging.getLogger(__name__)

WEIGHTS_FORMAT = "arrowbf-weights"


@dataclass
class BeamWeights:
    """Complex weights, (F, M) when shared across frames or (L, F, M) per frame."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim not in (2, 3):
            raise ValueError(f"weights must be (F, M) or (L, F, M), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("weights contain non-finite values")
        self.values = v

    @property
    def time_varying(self) -> bool:
        return self.values.ndim == 3

    @property
    def num_bins(self) -> int:
        return self.values.shape[-2]

    @property
    def num_mics(self) -> int:
        return self.values.shape[-1]

    def per_frame(self, num_frames: int) -> np.ndarray:
        if self.time_varying:
            return self.values
        return np.broadcast_to(self.values, (num_frames,) + self.values.shape)

    def save(self, path, spec: WindowSpec | None = None, **extra):
        """Write a JSON tensor file (path or text stream); identical weights
        give identical bytes."""
        v = self.values
        header = {
            "format": WEIGHTS_FORMAT,
            "version": 1,
            "num_mics": self.num_mics,
            "num_bins": self.num_bins,
            "num_frames": v.shape[0] if self.time_varying else None,
            "time_varying": self.time_varying,
            "window": spec.to_dict() if spec is not None else None,
        }
        header.update(extra)
        header["real"] = v.real.ravel().tolist()
        header["imag"] = v.imag.ravel().tolist()
        if hasattr(path, "write"):
            json.dump(header, path)
            return
        with open(path, "w") as fh:
            json.dump(header, fh)

    @classmethod
    def load(cls, path) -> tuple["BeamWeights", dict]:
        with open(path) as fh:
            d = json.load(fh)
        if d.get("format") != WEIGHTS_FORMAT:
            raise ValueError(f"{path} is not a weights file")
        shape = (d["num_bins"], d["num_mics"])
        if d["time_varying"]:
            shape = (d["num_frames"],) + shape
        values = np.asarray(d.pop("real")) + 1j * np.asarray(d.pop("imag"))
        return cls(values.reshape(shape)), d


@dataclass
class OptimizerConfig:
    learning_rate: float = 1e-3
    max_iters: int = 500
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    init: str = "reference_selector"
    init_theta: float | None = None
    seed: int = 0
    alpha: float = 0.5
    beta: float = 0.5
    time_varying: bool = False
    patience: int = 25
    min_improvement: float = 1e-6

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init not in ("reference_selector", "delay_and_sum", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "delay_and_sum" and self.init_theta is None:
            raise ValueError("delay_and_sum init needs init_theta")
        LossWeights(self.alpha, self.beta)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta)


@dataclass
class DistortionlessReport:
    per_bin: np.ndarray
    mean: float
    max: float


@dataclass
class OptimizationTrace:
    """Combined loss at every evaluated iterate and the running best."""

    loss: np.ndarray
    best: np.ndarray
    best_iteration: int
    stopped_early: bool = False
    breakdowns: list = field(default_factory=list, repr=False)


class Adam:
    """Adam on real parameter arrays (complex weights are passed as real views)."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def apply_beamformer(W, Y: Spectrogram) -> Spectrogram:
    """Filter-and-sum output ``sum_m conj(W_m) Y_m`` as a one-channel spectrogram."""
    W = W if isinstance(W, BeamWeights) else BeamWeights(W)
    M, L, F = Y.data.shape
    if W.num_mics != M or W.num_bins != F:
        raise ValueError(f"weights (F={W.num_bins}, M={W.num_mics}) do not match spectrogram (M={M}, F={F})")
    if W.time_varying and W.values.shape[0] != L:
        raise ValueError(f"weights have {W.values.shape[0]} frames, spectrogram has {L}")
    if W.time_varying:
        out = np.einsum("lfm,mlf->lf", np.conj(W.values), Y.data)
    else:
        out = np.einsum("fm,mlf->lf", np.conj(W.values), Y.data)
    return Spectrogram(out[None], Y.spec, Y.sample_rate, Y.length)


def initial_weights(cfg: OptimizerConfig, num_bins: int, num_mics: int, num_frames: int,
                    array: ArrayGeometry | None = None, spec: WindowSpec = WindowSpec(),
                    sample_rate: float = 16000.0) -> np.ndarray:
    ref = array.reference_index if array is not None else 0
    if cfg.init == "reference_selector":
        W = np.zeros((num_bins, num_mics), dtype=np.complex128)
        W[:, ref] = 1.0
    elif cfg.init == "delay_and_sum":
        if array is None:
            raise ValueError("delay_and_sum init needs the array geometry")
        W = steering_vectors([cfg.init_theta], array, spec, SPEED_OF_SOUND, sample_rate)[0] / num_mics
    else:
        rng = np.random.default_rng(cfg.seed)
        W = (rng.standard_normal((num_bins, num_mics))
             + 1j * rng.standard_normal((num_bins, num_mics))) / math.sqrt(2 * num_mics)
    if cfg.time_varying:
        W = np.repeat(W[None], num_frames, axis=0)
    return W


def optimize_weights(scene, cfg: OptimizerConfig = OptimizerConfig(),
                     spec: WindowSpec = WindowSpec(), problem: LossProblem | None = None,
                     keep_breakdowns: bool = False,
                     array: ArrayGeometry | None = None) -> tuple[BeamWeights, OptimizationTrace]:
    """Minimize the combined loss over the beamforming weights with Adam.

    Returns the lowest-loss iterate seen and the loss trace. ``max_iters`` Adam
    steps are taken unless the best loss improves by less than
    ``min_improvement`` over ``patience`` consecutive iterations. ``scene`` may
    be None when ``problem`` is given; ``array`` then supplies the geometry
    for delay-and-sum initialization.
    """
    if problem is None:
        problem = LossProblem.from_scene(scene, spec)
    weights = cfg.weights
    if array is None:
        array = getattr(scene, "array", None)
    W = initial_weights(cfg, problem.num_bins, problem.num_mics, problem.num_frames,
                        array, problem.spec, problem.sample_rate)
    params = W.view(np.float64)
    opt = Adam(cfg.learning_rate, cfg.betas[0], cfg.betas[1], cfg.eps)

    losses, best_curve, kept = [], [], []
    best, best_W, best_it = math.inf, W.copy(), 0
    stopped = False
    for it in range(cfg.max_iters + 1):
        bd, grad = loss_and_grad(problem, W, weights)
        if not math.isfinite(bd.combined) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(
                f"non-finite loss or gradient at iteration {it}: loss={bd.combined}, "
                f"si_snr={bd.si_snr_loss}, arrow={bd.arrow_loss}"
            )
        losses.append(bd.combined)
        if keep_breakdowns:
            kept.append(bd)
        if bd.combined < best:
            best, best_W, best_it = bd.combined, W.copy(), it
        best_curve.append(best)
        if it == cfg.max_iters:
            break
        if it >= cfg.patience and best_curve[it - cfg.patience] - best < cfg.min_improvement:
            stopped = True
            logger.debug("early stop at iteration %d", it)
            break
        opt.step(params, np.ascontiguousarray(grad).view(np.float64))
    trace = OptimizationTrace(np.asarray(losses), np.asarray(best_curve), best_it, stopped, kept)
    return BeamWeights(best_W), trace


def noise_scm(Y: np.ndarray, vad) -> np.ndarray:
    """Spatial covariance (F, M, M) of the mixture over speech-absent frames."""
    inactive = ~(vad.active if isinstance(vad, VadMask) else np.asarray(vad, dtype=bool))
    if not inactive.any():
        raise ValueError("need at least one speech-absent frame for the noise SCM")
    Yn = Y[:, inactive, :]
    return np.einsum("mlf,nlf->fmn", Yn, np.conj(Yn)) / Yn.shape[1]


def mvdr_oracle(Y, rtf_s, vad, diagonal_loading: float | None = 1e-6) -> BeamWeights:
    """``W = Phi^-1 R / (R^H Phi^-1 R)`` per bin with ``Phi`` the loaded noise SCM.

    ``diagonal_loading`` is relative: ``delta * trace(Phi) / M`` is added to
    the diagonal.
    """
    Ydata = Y.data if isinstance(Y, Spectrogram) else np.asarray(Y)
    R = np.asarray(getattr(rtf_s, "values", rtf_s), dtype=np.complex128)
    if diagonal_loading is not None and diagonal_loading < 0:
        raise ValueError("diagonal loading must be >= 0")
    phi = noise_scm(Ydata, vad)
    M = phi.shape[-1]
    if diagonal_loading:
        load = diagonal_loading * np.real(np.trace(phi, axis1=1, axis2=2)) / M
        phi = phi + load[:, None, None] * np.eye(M)[None]
    try:
        u = np.linalg.solve(phi, R[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("noise SCM is singular even after loading") from exc
    den = np.sum(np.conj(R) * u, axis=-1)
    if not np.all(np.isfinite(u)) or np.any(np.abs(den) < 1e-300):
        raise np.linalg.LinAlgError("noise SCM is singular even after loading")
    return BeamWeights(u / den[:, None])


def distortionless_residual(W, rtf_s, eta: float = 1.0, vad=None) -> DistortionlessReport:
    """Per-bin ``|W^H R_s - eta|``, averaged over active frames for per-frame weights."""
    Wv = np.asarray(getattr(W, "values", W), dtype=np.complex128)
    R = np.asarray(getattr(rtf_s, "values", rtf_s), dtype=np.complex128)
    if Wv.shape[-2:] != R.shape:
        raise ValueError(f"weights {Wv.shape} do not match RTF {R.shape}")
    z = np.sum(np.conj(Wv) * R, axis=-1)
    res = np.abs(z - eta)
    if res.ndim == 2:
        if vad is not None:
            mask = vad.active if isinstance(vad, VadMask) else np.asarray(vad, dtype=bool)
            res = res[mask] if mask.any() else res
        res = res.mean(axis=0)
    return DistortionlessReport(res, float(res.mean()), float(res.max()))
