"""SI-SNR and ARROW losses with analytic weight gradients.

Gradients with respect to complex weights follow the convention
``dL/dRe(W) + 1j * dL/dIm(W)``, i.e. the steepest-ascent direction of the real
loss when ``W`` is viewed as a pair of real arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .stft import Spectrogram, WindowSpec, frame_count, istft, istft_adjoint, stft

__all__ = [
    "SI_SNR_EPS",
    "VadMask",
    "LossWeights",
    "LossBreakdown",
    "LossProblem",
    "si_snr",
    "si_snr_loss",
    "si_snr_loss_grad",
    "arrow_loss",
    "arrow_loss_grad",
    "combined_loss",
    "grad_combined_loss",
    "loss_and_grad",
    "compute_vad",
]

SI_SNR_EPS = 1e-8
_DB = 10.0 / math.log(10.0)


@dataclass
class VadMask:
    active: np.ndarray

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=bool).reshape(-1)

    @property
    def num_active(self) -> int:
        return int(self.active.sum())

    @property
    def num_inactive(self) -> int:
        return int(self.active.size - self.active.sum())

    def __len__(self):
        return self.active.size


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass
class LossBreakdown:
    si_snr_loss: float
    arrow_target_term: float
    arrow_interferer_term: float
    arrow_loss: float
    combined: float
    eta: float
    alpha: float
    beta: float


def _as_vad(vad) -> VadMask:
    return vad if isinstance(vad, VadMask) else VadMask(vad)


def _weights_array(W) -> np.ndarray:
    return np.asarray(getattr(W, "values", W), dtype=np.complex128)


# ---------------------------------------------------------------------------
# SI-SNR


def _si_snr_parts(s_hat: np.ndarray, s: np.ndarray):
    s_hat = np.asarray(s_hat, dtype=np.float64).reshape(-1)
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    if s_hat.shape != s.shape:
        raise ValueError(f"length mismatch: {s_hat.size} vs {s.size}")
    ss = float(s @ s)
    if ss <= 0:
        raise ValueError("SI-SNR reference signal is all zero")
    p = float(s_hat @ s)
    a = float(s_hat @ s_hat)
    return s_hat, s, ss, p, a


def _residual_energy(s_hat, s, eta) -> float:
    # direct form; a - p^2/ss cancels badly near a perfect estimate
    e = s_hat - eta * s
    return float(e @ e)


def si_snr_loss(s_hat, s, eps: float = SI_SNR_EPS) -> tuple[float, float]:
    """Negative scale-invariant SNR in dB and the projection gain ``eta``.

    Both energies are floored by ``eps * ||s_hat||^2`` so the loss stays in
    ``[-L_max, L_max]`` with ``L_max = 10 log10((1 + eps) / eps)`` and is
    exactly invariant to rescaling ``s_hat``. An all-zero estimate gets
    ``L_max``.
    """
    s_hat, s, ss, p, a = _si_snr_parts(s_hat, s)
    eta = p / ss
    if a == 0.0:
        return _DB * math.log((1.0 + eps) / eps), 0.0
    target = p * p / ss
    residual = _residual_energy(s_hat, s, eta)
    loss = -_DB * (math.log(target + eps * a) - math.log(residual + eps * a))
    return loss, eta


def si_snr(s_hat, s, eps: float = SI_SNR_EPS) -> float:
    """SI-SNR in dB (higher is better)."""
    return -si_snr_loss(s_hat, s, eps)[0]


def si_snr_loss_grad(s_hat, s, eps: float = SI_SNR_EPS) -> tuple[float, float, np.ndarray]:
    """``si_snr_loss`` plus its gradient with respect to ``s_hat``."""
    s_hat, s, ss, p, a = _si_snr_parts(s_hat, s)
    eta = p / ss
    if a == 0.0:
        return _DB * math.log((1.0 + eps) / eps), 0.0, np.zeros_like(s_hat)
    target = p * p / ss
    residual = _residual_energy(s_hat, s, eta)
    num = target + eps * a
    den = residual + eps * a
    loss = -_DB * (math.log(num) - math.log(den))
    d_target = 2.0 * eta * s
    d_num = d_target + 2.0 * eps * s_hat
    d_den = 2.0 * s_hat - d_target + 2.0 * eps * s_hat
    grad = -_DB * (d_num / num - d_den / den)
    return loss, eta, grad


# ---------------------------------------------------------------------------
# ARROW


def _responses(W: np.ndarray, R: np.ndarray) -> np.ndarray:
    """``W^H R`` per bin (shared W, shape (F,)) or per frame and bin (L, F)."""
    return np.sum(np.conj(W) * R, axis=-1)


def _check_dims(W: np.ndarray, rtf_s: np.ndarray, rtf_n: np.ndarray, vad: VadMask):
    if rtf_s.shape != rtf_n.shape:
        raise ValueError(f"RTF shapes differ: {rtf_s.shape} vs {rtf_n.shape}")
    if W.shape[-2:] != rtf_s.shape:
        raise ValueError(f"weights {W.shape} do not match RTFs {rtf_s.shape}")
    if W.ndim == 3 and W.shape[0] != len(vad):
        raise ValueError(f"weights have {W.shape[0]} frames, VAD has {len(vad)}")
    if W.ndim not in (2, 3):
        raise ValueError(f"weights must be (F, M) or (L, F, M), got {W.shape}")


def _frame_sums(per_bin: np.ndarray, mask: np.ndarray) -> float:
    """Sum over masked frames and all bins. Shared weights give a (F,) array
    that is identical on every frame."""
    if per_bin.ndim == 1:
        return float(mask.sum()) * float(np.sum(per_bin))
    return float(np.sum(per_bin[mask]))


def arrow_loss(W, rtf_s, rtf_n, vad, alpha: float = 0.5) -> tuple[float, float, float]:
    """Returns ``(loss, target_term, interferer_term)``.

    The target term averages ``|Im(W^H R_s)|`` over speech-active frames and
    all bins; the interferer term averages ``|Re(W^H R_n)| + |Im(W^H R_n)|``
    over speech-absent frames. An empty frame set contributes zero.
    """
    W = _weights_array(W)
    Rs = np.asarray(getattr(rtf_s, "values", rtf_s), dtype=np.complex128)
    Rn = np.asarray(getattr(rtf_n, "values", rtf_n), dtype=np.complex128)
    vad = _as_vad(vad)
    _check_dims(W, Rs, Rn, vad)
    F = Rs.shape[0]
    act = vad.active
    Lp, Lia = vad.num_active, vad.num_inactive

    target = 0.0
    if Lp:
        zs = _responses(W, Rs)
        target = _frame_sums(np.abs(zs.imag), act) / (Lp * F)
    interferer = 0.0
    if Lia:
        zn = _responses(W, Rn)
        interferer = _frame_sums(np.abs(zn.real) + np.abs(zn.imag), ~act) / (Lia * F)
    return alpha * target + (1.0 - alpha) * interferer, target, interferer


def arrow_loss_grad(W, rtf_s, rtf_n, vad, alpha: float = 0.5):
    """Gradients of the ARROW target and interferer terms (already weighted by
    ``alpha`` and ``1 - alpha``), each conformal with ``W``. The subgradient
    of ``|x|`` at 0 is taken as 0."""
    W = _weights_array(W)
    Rs = np.asarray(getattr(rtf_s, "values", rtf_s), dtype=np.complex128)
    Rn = np.asarray(getattr(rtf_n, "values", rtf_n), dtype=np.complex128)
    vad = _as_vad(vad)
    _check_dims(W, Rs, Rn, vad)
    F = Rs.shape[0]
    act = vad.active
    Lp, Lia = vad.num_active, vad.num_inactive

    g_target = np.zeros_like(W)
    g_interf = np.zeros_like(W)
    if Lp and alpha:
        zs = _responses(W, Rs)
        # d|Im z| -> dz-gradient j sign(Im z); chain through z = W^H R gives conj(.) R
        coef = -1j * np.sign(zs.imag)
        if W.ndim == 2:
            g_target = (alpha * Lp / (Lp * F)) * coef[:, None] * Rs
        else:
            g_target = (alpha / (Lp * F)) * (coef * act[:, None])[..., None] * Rs[None]
    if Lia and alpha != 1.0:
        zn = _responses(W, Rn)
        coef = np.sign(zn.real) - 1j * np.sign(zn.imag)
        if W.ndim == 2:
            g_interf = ((1.0 - alpha) * Lia / (Lia * F)) * coef[:, None] * Rn
        else:
            g_interf = ((1.0 - alpha) / (Lia * F)) * (coef * ~act[:, None])[..., None] * Rn[None]
    return g_target, g_interf


# ---------------------------------------------------------------------------
# scene-level objective


@dataclass
class LossProblem:
    """Everything the combined objective needs for one scene.

    ``Y`` is the (M, L, F) mixture STFT; ``reference`` is the time-domain
    target after an STFT round trip, so estimate and reference share the same
    synthesis.
    """

    Y: np.ndarray
    reference: np.ndarray
    rtf_s: np.ndarray
    rtf_n: np.ndarray
    vad: VadMask
    spec: WindowSpec
    sample_rate: float
    length: int

    @classmethod
    def from_scene(cls, scene, spec: WindowSpec = WindowSpec()) -> "LossProblem":
        Y = stft(scene.mixture, spec)
        S = stft(scene.target, spec, scene.sample_rate)
        reference = istft(S).data[0]
        return cls(
            Y=Y.data,
            reference=reference,
            rtf_s=np.asarray(getattr(scene.rtf_s, "values", scene.rtf_s)),
            rtf_n=np.asarray(getattr(scene.rtf_n, "values", scene.rtf_n)),
            vad=_as_vad(scene.vad),
            spec=spec,
            sample_rate=scene.sample_rate,
            length=scene.mixture.num_samples,
        )

    def __post_init__(self):
        # (F, L, M) copy so shared-weight products become batched matmuls
        self._Yt = np.ascontiguousarray(self.Y.transpose(2, 1, 0))

    @property
    def num_mics(self) -> int:
        return self.Y.shape[0]

    @property
    def num_frames(self) -> int:
        return self.Y.shape[1]

    @property
    def num_bins(self) -> int:
        return self.Y.shape[2]

    def enhance(self, W) -> np.ndarray:
        """Filter-and-sum output ``W^H Y`` with shape (L, F)."""
        W = _weights_array(W)
        if W.ndim == 2:
            return (self._Yt @ np.conj(W)[:, :, None])[..., 0].T
        return np.einsum("lfm,mlf->lf", np.conj(W), self.Y, optimize=True)

    def synthesize(self, S_hat: np.ndarray) -> np.ndarray:
        spec = Spectrogram(S_hat[None], self.spec, self.sample_rate, self.length)
        return istft(spec).data[0]

    def output(self, W) -> np.ndarray:
        return self.synthesize(self.enhance(W))


def combined_loss(problem: LossProblem, W, weights: LossWeights = LossWeights()) -> LossBreakdown:
    """``beta * SI-SNR loss + (1 - beta) * ARROW loss`` for weights ``W``."""
    s_hat = problem.output(W)
    l_si, eta = si_snr_loss(s_hat, problem.reference)
    l_ar, t, i = arrow_loss(W, problem.rtf_s, problem.rtf_n, problem.vad, weights.alpha)
    return LossBreakdown(
        si_snr_loss=l_si,
        arrow_target_term=t,
        arrow_interferer_term=i,
        arrow_loss=l_ar,
        combined=weights.beta * l_si + (1.0 - weights.beta) * l_ar,
        eta=eta,
        alpha=weights.alpha,
        beta=weights.beta,
    )


def _si_snr_weight_grad(problem: LossProblem, W: np.ndarray, s_hat: np.ndarray):
    loss, eta, g_time = si_snr_loss_grad(s_hat, problem.reference)
    G = istft_adjoint(g_time, problem.spec, problem.num_frames)
    # S_hat = sum_m conj(W_m) Y_m  =>  dL/dW = conj(dL/dS_hat) * Y
    if W.ndim == 2:
        g = (np.conj(G).T[:, None, :] @ problem._Yt)[:, 0, :]
    else:
        g = np.einsum("lf,mlf->lfm", np.conj(G), problem.Y, optimize=True)
    return loss, eta, g


def loss_and_grad(problem: LossProblem, W, weights: LossWeights = LossWeights(),
                  per_term: bool = False):
    """Combined loss breakdown and its gradient in one pass.

    With ``per_term=True`` the third return value maps ``"si_snr"``,
    ``"arrow_target"`` and ``"arrow_interferer"`` to the unweighted-by-beta
    gradient of each component.
    """
    W = _weights_array(W)
    s_hat = problem.output(W)
    l_si, eta, g_si = _si_snr_weight_grad(problem, W, s_hat)
    l_ar, t, i = arrow_loss(W, problem.rtf_s, problem.rtf_n, problem.vad, weights.alpha)
    g_t, g_i = arrow_loss_grad(W, problem.rtf_s, problem.rtf_n, problem.vad, weights.alpha)
    b = weights.beta
    grad = b * g_si + (1.0 - b) * (g_t + g_i)
    breakdown = LossBreakdown(l_si, t, i, l_ar, b * l_si + (1.0 - b) * l_ar, eta,
                              weights.alpha, b)
    if per_term:
        return breakdown, grad, {"si_snr": g_si, "arrow_target": g_t, "arrow_interferer": g_i}
    return breakdown, grad


def grad_combined_loss(problem: LossProblem, W, weights: LossWeights = LossWeights()) -> np.ndarray:
    return loss_and_grad(problem, W, weights)[1]


# ---------------------------------------------------------------------------
# VAD


def compute_vad(clean_target, spec: WindowSpec = WindowSpec(), threshold_db: float = 40.0) -> VadMask:
    """Energy-gate VAD on the analysis frames of a clean signal.

    A frame is active when its energy is within ``threshold_db`` of the
    loudest frame. An all-zero signal is entirely inactive.
    """
    x = np.asarray(clean_target, dtype=np.float64).reshape(-1)
    L = frame_count(x.size, spec)
    frames = sliding_window_view(x, spec.window_length)[::spec.hop_length][:L]
    energy = np.einsum("ij,ij->i", frames, frames)
    peak = energy.max()
    if peak <= 0:
        return VadMask(np.zeros(L, dtype=bool))
    return VadMask(energy > peak * 10.0 ** (-threshold_db / 10.0))
