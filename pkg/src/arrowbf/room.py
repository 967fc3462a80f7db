"""Shoebox room simulation: image-source RIRs, RTFs, steering vectors, mixtures.

Angles are in degrees and measured from the array axis, which points from the
last microphone towards microphone 0; 90 degrees is broadside. Sources in polar
form live in the half-plane on the room side of the array.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import butter, fftconvolve, sosfilt

from .stft import MultichannelWaveform, WindowSpec, frame_count

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
SINC_TAPS = 81
DEFAULT_EARLY_WINDOW = 0.016
# all image gains share one sign, so their low-frequency content piles up
# coherently in the tail; a gentle high-pass removes it
DC_BLOCK_HZ = 20.0

# 24 ln(10), the Sabine constant numerator
_SABINE = 24.0 * math.log(10.0)


@dataclass(frozen=True)
class RoomSpec:
    dimensions: tuple[float, float, float] = (6.0, 5.0, 3.0)
    t60: float = 0.0
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        if len(self.dimensions) != 3 or min(self.dimensions) <= 0:
            raise ValueError(f"room dimensions must be three positive lengths, got {self.dimensions}")
        if self.t60 < 0:
            raise ValueError("t60 must be >= 0")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dimensions
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dimensions
        return 2.0 * (lx * ly + lx * lz + ly * lz)

    def absorption(self) -> float:
        """Uniform wall absorption from Sabine's formula (0 for an anechoic room)."""
        if self.t60 == 0:
            return 1.0
        alpha = _SABINE * self.volume / (self.speed_of_sound * self.surface * self.t60)
        if alpha > 1.0:
            raise ValueError(
                f"absorption out of range: t60={self.t60} s needs alpha={alpha:.3f} > 1 "
                f"in a {self.dimensions} room"
            )
        return alpha

    def reflection_coefficient(self) -> float:
        """Uniform wall reflection coefficient whose image-source decay has this t60.

        Sabine's absorption decides feasibility and seeds the search; the
        coefficient is then tuned so the simulated energy decay matches t60.
        """
        alpha = self.absorption()
        if self.t60 == 0:
            return 0.0
        return _calibrated_beta(self, math.sqrt(1.0 - alpha))

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        dims = np.asarray(self.dimensions)
        return bool(np.all(p > margin) and np.all(p < dims - margin))


@dataclass
class ArrayGeometry:
    """Microphone positions (M, 3) in meters plus the reference channel."""

    mic_positions: np.ndarray
    reference_index: int = 0

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError(f"mic_positions must be (M, 3), got {pos.shape}")
        if not 0 <= self.reference_index < pos.shape[0]:
            raise ValueError(f"reference_index {self.reference_index} out of range for {pos.shape[0]} mics")
        self.mic_positions = pos

    @classmethod
    def ula(cls, num_mics: int = 4, spacing: float = 0.08,
            center=(3.0, 1.0, 1.5), reference_index: int = 0) -> "ArrayGeometry":
        """Uniform linear array along x; microphone 0 sits at the +x end."""
        if num_mics < 1 or spacing <= 0:
            raise ValueError("need num_mics >= 1 and spacing > 0")
        offsets = ((num_mics - 1) / 2.0 - np.arange(num_mics)) * spacing
        pos = np.tile(np.asarray(center, dtype=float), (num_mics, 1))
        pos[:, 0] += offsets
        return cls(pos, reference_index)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.mic_positions.mean(axis=0)

    def axis(self) -> np.ndarray:
        """Unit vector from the last microphone towards microphone 0."""
        if self.num_mics == 1:
            return np.array([1.0, 0.0, 0.0])
        v = self.mic_positions[0] - self.mic_positions[-1]
        return v / np.linalg.norm(v)

    def broadside(self) -> np.ndarray:
        """In-plane unit normal (z cross axis); polar sources lie on this side."""
        n = np.cross([0.0, 0.0, 1.0], self.axis())
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ValueError("vertical arrays have no horizontal broadside direction")
        return n / norm

    def ula_spacing(self, tol: float = 1e-9) -> float:
        """Inter-element spacing; raises ValueError if the geometry is not a ULA."""
        if self.num_mics == 1:
            return 0.0
        steps = np.diff(self.mic_positions, axis=0)
        d = np.linalg.norm(steps[0])
        if d <= tol or not np.allclose(steps, steps[0], atol=tol, rtol=0):
            raise ValueError("steering vectors are defined for uniform linear arrays only")
        return float(d)

    def to_dict(self) -> dict:
        return {"mic_positions": self.mic_positions.tolist(), "reference_index": self.reference_index}

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayGeometry":
        return cls(np.asarray(d["mic_positions"]), int(d["reference_index"]))


@dataclass
class SourcePlacement:
    position: np.ndarray
    angle: float | None = None
    radius: float | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)

    @classmethod
    def polar(cls, angle: float, radius: float, array: ArrayGeometry) -> "SourcePlacement":
        th = math.radians(angle)
        pos = array.center + radius * (math.cos(th) * array.axis() + math.sin(th) * array.broadside())
        return cls(pos, float(angle), float(radius))

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "angle": self.angle, "radius": self.radius}

    @classmethod
    def from_dict(cls, d: dict) -> "SourcePlacement":
        return cls(np.asarray(d["position"]), d.get("angle"), d.get("radius"))


@dataclass
class ImpulseResponse:
    """Per-microphone RIR taps (M, K).

    ``direct_delays`` holds the fractional direct-path delay per mic in
    samples, when known.
    """

    taps: np.ndarray
    sample_rate: float
    direct_delays: np.ndarray | None = None
    reference_index: int = 0

    def __post_init__(self):
        self.taps = np.atleast_2d(np.asarray(self.taps, dtype=np.float64))
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("impulse response has non-finite taps")
        if self.direct_delays is not None:
            self.direct_delays = np.asarray(self.direct_delays, dtype=np.float64)

    @property
    def num_mics(self) -> int:
        return self.taps.shape[0]

    def arrivals(self) -> np.ndarray:
        if self.direct_delays is not None:
            return self.direct_delays
        return np.argmax(np.abs(self.taps), axis=1).astype(np.float64)


@dataclass
class TransferVector:
    """Per-bin complex array response, shape (F, M)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 2:
            raise ValueError(f"transfer vector must be (F, M), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("transfer vector has non-finite entries")
        self.values = v

    @property
    def num_bins(self) -> int:
        return self.values.shape[0]

    @property
    def num_mics(self) -> int:
        return self.values.shape[1]


@dataclass
class SceneSample:
    """One synthesized scene. ``target`` is the clean target image (direct path
    plus early reflections) at the reference microphone."""

    mixture: MultichannelWaveform
    target: np.ndarray
    rtf_s: TransferVector
    rtf_n: TransferVector
    vad: np.ndarray
    sir: float
    snr: float
    array: ArrayGeometry
    target_placement: SourcePlacement | None = None
    interferer_placement: SourcePlacement | None = None
    t60: float = 0.0
    seed: int | None = None
    target_image: np.ndarray | None = field(default=None, repr=False)
    interferer_image: np.ndarray | None = field(default=None, repr=False)
    noise: np.ndarray | None = field(default=None, repr=False)

    @property
    def sample_rate(self) -> float:
        return self.mixture.sample_rate

    @property
    def reference_index(self) -> int:
        return self.array.reference_index


# ---------------------------------------------------------------------------
# image-source method


def _axis_images(src: float, length: float, mic_min: float, mic_max: float, reach: float):
    """Image coordinates and reflection counts along one axis.

    Image ``(1 - 2q) * src + 2 n L`` reflects ``|n - q| + |n|`` times.
    """
    n_max = int(math.ceil((reach + abs(mic_max) + abs(mic_min)) / (2.0 * length))) + 1
    n = np.arange(-n_max, n_max + 1)
    coords = np.concatenate([src + 2 * n * length, -src + 2 * n * length])
    counts = np.concatenate([np.abs(n) + np.abs(n), np.abs(n - 1) + np.abs(n)])
    lo, hi = mic_min - reach, mic_max + reach
    keep = (coords >= lo) & (coords <= hi)
    return coords[keep], counts[keep]


def _stamp(out: np.ndarray, delays: np.ndarray, gains: np.ndarray, chunk: int = 40000):
    """Add ``gains`` at fractional ``delays`` with a Hann-windowed sinc kernel."""
    half = SINC_TAPS // 2
    K = out.shape[0]
    offs = np.arange(-half, half + 1)
    for start in range(0, delays.size, chunk):
        d = delays[start:start + chunk]
        g = gains[start:start + chunk]
        n0 = np.rint(d).astype(np.int64)
        idx = n0[:, None] + offs[None, :]
        t = idx - d[:, None]
        kernel = 0.5 * (1.0 + np.cos(2.0 * np.pi * t / SINC_TAPS)) * np.sinc(t)
        vals = kernel * g[:, None]
        valid = (idx >= 0) & (idx < K)
        out += np.bincount(idx[valid], weights=vals[valid], minlength=K)[:K]


def _image_lattice(room: RoomSpec, src: np.ndarray, mics: np.ndarray, reach: float):
    """All image positions within ``reach`` of the microphones along every
    axis, with their reflection orders."""
    per_axis = [
        _axis_images(src[k], room.dimensions[k], mics[:, k].min(), mics[:, k].max(), reach)
        for k in range(3)
    ]
    (xs, cx), (ys, cy), (zs, cz) = per_axis
    gx, gy, gz = np.meshgrid(np.arange(xs.size), np.arange(ys.size), np.arange(zs.size), indexing="ij")
    gx, gy, gz = gx.ravel(), gy.ravel(), gz.ravel()
    order = cx[gx] + cy[gy] + cz[gz]
    images = np.stack([xs[gx], ys[gy], zs[gz]], axis=1)
    return images, order


@lru_cache(maxsize=64)
def _calibrated_beta(room: RoomSpec, beta0: float, sample_rate: float = 8000.0) -> float:
    """Bisection on the reflection coefficient so that the Schroeder T60 of the
    image-source energy envelope (canonical source/mic pair) equals ``room.t60``."""
    dims = np.asarray(room.dimensions)
    src = dims * np.array([0.35, 0.4, 0.45])
    mic = dims * np.array([0.6, 0.55, 0.5])
    duration = 1.5 * room.t60
    K = int(duration * sample_rate)
    images, order = _image_lattice(room, src, mic[None], duration * room.speed_of_sound)
    dist = np.linalg.norm(images - mic, axis=1)
    n = np.floor(dist / room.speed_of_sound * sample_rate).astype(np.int64)
    keep = n < K
    n, order, dist = n[keep], order[keep], dist[keep]
    # energy per (reflection order, time bin); beta only enters as beta^(2 k)
    hist = np.zeros((int(order.max()) + 1, K))
    np.add.at(hist, (order, n), 1.0 / dist ** 2)
    ks = np.arange(hist.shape[0])[:, None]

    def t60_of(beta: float) -> float:
        try:
            return _edc_t60(np.sum(hist * beta ** (2.0 * ks), axis=0), sample_rate)
        except ValueError:
            return 0.0

    lo, hi = 0.0, 1.0
    beta = beta0
    for _ in range(60):
        if t60_of(beta) > room.t60:
            hi = beta
        else:
            lo = beta
        beta = 0.5 * (lo + hi)
        if hi - lo < 1e-9:
            break
    return beta


def generate_rir(room: RoomSpec, source: SourcePlacement, array: ArrayGeometry,
                 sample_rate: float = 16000.0, max_order: int | None = None,
                 duration: float | None = None) -> ImpulseResponse:
    """Image-source RIRs from ``source`` to every microphone.

    Reflections are kept while their arrival falls inside ``duration`` seconds
    (default: the room's t60, at least long enough for the direct path) and,
    if given, their reflection order is at most ``max_order``. Reverberant
    responses are high-passed at ``DC_BLOCK_HZ``. An anechoic room (t60 = 0)
    yields the direct path only.
    """
    src = source.position
    if not room.contains(src):
        raise ValueError(f"source {src.tolist()} is outside the room {room.dimensions}")
    for p in array.mic_positions:
        if not room.contains(p):
            raise ValueError(f"microphone {p.tolist()} is outside the room {room.dimensions}")
    beta = room.reflection_coefficient()
    c = room.speed_of_sound
    mics = array.mic_positions
    direct = np.linalg.norm(mics - src, axis=1)
    direct_delays = direct / c * sample_rate

    if duration is None:
        duration = room.t60
    tail = SINC_TAPS // 2 + 1
    num_taps = int(max(math.ceil(duration * sample_rate), math.ceil(direct_delays.max()))) + tail
    if beta == 0.0:
        max_order = 0
    reach = num_taps / sample_rate * c

    images, order = _image_lattice(room, src, mics, reach)
    if max_order is not None:
        keep = order <= max_order
        images, order = images[keep], order[keep]
    refl = beta ** order.astype(np.float64)

    taps = np.zeros((array.num_mics, num_taps))
    for m in range(array.num_mics):
        dist = np.linalg.norm(images - mics[m], axis=1)
        delay = dist / c * sample_rate
        keep = delay < num_taps - 1
        _stamp(taps[m], delay[keep], refl[keep] / (4.0 * np.pi * dist[keep]))
    if beta > 0.0:
        sos = butter(2, DC_BLOCK_HZ, btype="highpass", fs=sample_rate, output="sos")
        taps = sosfilt(sos, taps, axis=-1)
    logger.debug("rir: %d images, %d taps, beta=%.4f", images.shape[0], num_taps, beta)
    return ImpulseResponse(taps, sample_rate, direct_delays, array.reference_index)


def direct_path_taps(taps: np.ndarray, onset: float = 0.5) -> np.ndarray:
    """Index of the direct-path peak per microphone, measured from the taps.

    The direct path is the first arrival, not necessarily the largest one:
    coincident floor and ceiling images can outweigh a direct path whose
    energy is split across two taps. We take the first tap above ``onset``
    times the channel maximum and return the local peak that follows it.
    """
    h = np.abs(np.atleast_2d(taps))
    out = np.empty(h.shape[0], dtype=np.int64)
    for m, row in enumerate(h):
        first = int(np.argmax(row >= onset * row.max()))
        out[m] = first + int(np.argmax(row[first:first + 3]))
    return out


def _edc_t60(energy: np.ndarray, sample_rate: float, fit_db=(-5.0, -25.0)) -> float:
    edc = np.cumsum(energy[::-1])[::-1]
    if edc[0] <= 0:
        raise ValueError("empty impulse response")
    edc_db = 10.0 * np.log10(np.maximum(edc / edc[0], 1e-300))
    hi, lo = fit_db
    i0 = int(np.argmax(edc_db <= hi))
    i1 = int(np.argmax(edc_db <= lo))
    if i1 <= i0 + 1:
        raise ValueError("decay does not span the fit range")
    t = np.arange(i0, i1) / sample_rate
    slope, _ = np.polyfit(t, edc_db[i0:i1], 1)
    return -60.0 / slope


def schroeder_t60(taps: np.ndarray, sample_rate: float, fit_db=(-5.0, -25.0)) -> float:
    """Reverberation time from a line fit to the backward-integrated energy
    decay between ``fit_db`` levels, extrapolated to -60 dB."""
    h = np.asarray(taps, dtype=np.float64)
    return _edc_t60(h * h, sample_rate, fit_db)


# ---------------------------------------------------------------------------
# transfer functions


def _dtft_bins(x: np.ndarray, fft_size: int) -> np.ndarray:
    """DTFT of the rows of ``x`` sampled at the ``fft_size``-point bin frequencies."""
    K = x.shape[-1]
    factor = max(1, math.ceil(K / fft_size))
    spec = np.fft.rfft(x, n=fft_size * factor, axis=-1)
    return spec[..., ::factor][..., :fft_size // 2 + 1]


def compute_rtf(rir: ImpulseResponse, array: ArrayGeometry | None = None,
                spec: WindowSpec = WindowSpec(),
                early_window: float = DEFAULT_EARLY_WINDOW) -> TransferVector:
    """RTFs from the early part of each RIR.

    Each mic's RIR is cut ``early_window`` seconds after its direct-path
    arrival (plus the interpolation kernel's half width), then
    ``H_m(f) / H_ref(f)`` is taken at the STFT bin frequencies.
    """
    ref = array.reference_index if array is not None else rir.reference_index
    taps = rir.taps
    if not np.any(taps[ref]):
        raise ValueError("reference RIR is all zero")
    if not np.any(taps):
        raise ValueError("RIR is all zero")
    fs = rir.sample_rate
    ends = np.ceil(rir.arrivals() + early_window * fs).astype(int) + SINC_TAPS // 2 + 1
    trunc = np.zeros_like(taps)
    for m, e in enumerate(ends):
        trunc[m, :e] = taps[m, :e]
    H = _dtft_bins(trunc, spec.fft_size)
    href = H[ref]
    mag = np.abs(href)
    floor = 1e-12 * mag.max()
    small = mag < floor
    if np.any(small):
        logger.warning("reference transfer function below floor at %d bins", int(small.sum()))
        phase = np.where(mag > 0, href / np.where(mag > 0, mag, 1.0), 1.0)
        href = np.where(small, floor * phase, href)
    rtf = (H / href[None, :]).T
    rtf[:, ref] = 1.0
    return TransferVector(rtf)


def steering_vectors(thetas, array: ArrayGeometry, spec: WindowSpec = WindowSpec(),
                     c: float = SPEED_OF_SOUND, sample_rate: float = 16000.0) -> np.ndarray:
    """Plane-wave steering vectors for several angles, shape (A, F, M)."""
    d = array.ula_spacing()
    th = np.radians(np.atleast_1d(np.asarray(thetas, dtype=np.float64)))
    freqs = spec.bin_frequencies(sample_rate)
    m = np.arange(array.num_mics) - array.reference_index
    tau = m[None, :] * d * np.cos(th)[:, None] / c
    return np.exp(-2j * np.pi * freqs[None, :, None] * tau[:, None, :])


def steering_vector(theta: float, array: ArrayGeometry, spec: WindowSpec = WindowSpec(),
                    c: float = SPEED_OF_SOUND, sample_rate: float = 16000.0) -> TransferVector:
    """Free-field plane-wave steering vector ``exp(-j 2 pi f m d cos(theta) / c)``."""
    if not 0.0 <= theta <= 180.0:
        raise ValueError(f"theta must lie in [0, 180] degrees, got {theta}")
    return TransferVector(steering_vectors([theta], array, spec, c, sample_rate)[0])


# ---------------------------------------------------------------------------
# scenes


@dataclass
class SceneConfig:
    """Placement rules for target/interferer pairs."""

    angle_range: tuple[float, float] = (30.0, 150.0)
    radius_range: tuple[float, float] = (0.75, 2.1)
    min_separation: float = 15.0
    grid_mode: bool = False
    grid_step: float = 15.0
    max_retries: int = 1000

    def grid_angles(self) -> np.ndarray:
        lo, hi = self.angle_range
        return np.arange(lo, hi + 1e-9, self.grid_step)


def sample_scene(rng_seed, config: SceneConfig = SceneConfig(),
                 array: ArrayGeometry | None = None,
                 room: RoomSpec | None = None) -> tuple[SourcePlacement, SourcePlacement]:
    """Draw a target and an interferer placement satisfying ``config``."""
    array = array if array is not None else ArrayGeometry.ula()
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    lo, hi = config.angle_range
    r_lo, r_hi = config.radius_range
    if config.grid_mode:
        grid = config.grid_angles()
    for _ in range(config.max_retries):
        if config.grid_mode:
            if grid.size < 2:
                break
            i, j = rng.choice(grid.size, size=2, replace=False)
            angles = (float(grid[i]), float(grid[j]))
        else:
            angles = tuple(float(a) for a in rng.uniform(lo, hi, size=2))
        radii = rng.uniform(r_lo, r_hi, size=2)
        if abs(angles[0] - angles[1]) < config.min_separation:
            continue
        target = SourcePlacement.polar(angles[0], float(radii[0]), array)
        interferer = SourcePlacement.polar(angles[1], float(radii[1]), array)
        if room is not None and not (room.contains(target.position) and room.contains(interferer.position)):
            continue
        return target, interferer
    raise ValueError(f"could not satisfy placement constraints after {config.max_retries} tries")


def _convolve(signal: np.ndarray, taps: np.ndarray) -> np.ndarray:
    T = signal.shape[-1]
    return fftconvolve(signal[None, :], taps, axes=-1)[:, :T]


def _power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def synthesize_mixture(target: np.ndarray, interferer: np.ndarray,
                       rir_s: ImpulseResponse, rir_n: ImpulseResponse,
                       sir: float, snr: float, seed=None,
                       array: ArrayGeometry | None = None,
                       spec: WindowSpec = WindowSpec(),
                       early_window: float = DEFAULT_EARLY_WINDOW,
                       vad_threshold_db: float = 40.0) -> SceneSample:
    """Mix a target and an interferer through their RIRs at a given SIR and SNR.

    SIR compares the reverberant target and interferer images at the reference
    microphone; SNR compares the target image to white sensor noise there.
    ``snr = inf`` adds no noise.
    """
    from .losses import compute_vad

    target = np.asarray(target, dtype=np.float64)
    interferer = np.asarray(interferer, dtype=np.float64)
    if target.ndim != 1 or target.shape != interferer.shape:
        raise ValueError("target and interferer must be mono signals of equal length")
    if rir_s.sample_rate != rir_n.sample_rate:
        raise ValueError("RIR sample rates differ")
    if array is None:
        M = rir_s.num_mics
        array = ArrayGeometry.ula(M, reference_index=rir_s.reference_index)
    ref = array.reference_index
    fs = rir_s.sample_rate

    xs = _convolve(target, rir_s.taps)
    xn = _convolve(interferer, rir_n.taps)
    ps, pn = _power(xs[ref]), _power(xn[ref])
    if ps <= 0 or pn <= 0:
        raise ValueError("cannot set SIR against zero-power source")
    xn *= math.sqrt(ps / (pn * 10.0 ** (sir / 10.0)))

    rng = np.random.default_rng(seed)
    if math.isinf(snr) and snr > 0:
        noise = np.zeros_like(xs)
    else:
        noise = rng.standard_normal(xs.shape)
        noise *= math.sqrt(ps / (_power(noise[ref]) * 10.0 ** (snr / 10.0)))
    y = xs + xn + noise

    end = int(math.ceil(rir_s.arrivals()[ref] + early_window * fs)) + SINC_TAPS // 2 + 1
    clean = _convolve(target, rir_s.taps[ref:ref + 1, :end])[0]

    rtf_s = compute_rtf(rir_s, array, spec, early_window)
    rtf_n = compute_rtf(rir_n, array, spec, early_window)
    vad = compute_vad(clean, spec, vad_threshold_db)
    assert vad.active.size == frame_count(target.size, spec)
    return SceneSample(
        mixture=MultichannelWaveform(y, fs),
        target=clean,
        rtf_s=rtf_s,
        rtf_n=rtf_n,
        vad=vad.active,
        sir=float(sir),
        snr=float(snr),
        array=array,
        seed=seed if isinstance(seed, (int, type(None))) else None,
        target_image=xs,
        interferer_image=xn,
        noise=noise,
    )


def measured_ratios(scene: SceneSample) -> tuple[float, float]:
    """(SIR, SNR) in dB actually present at the reference microphone."""
    ref = scene.reference_index
    ps = _power(scene.target_image[ref])
    sir = 10.0 * math.log10(ps / _power(scene.interferer_image[ref]))
    pv = _power(scene.noise[ref])
    snr = math.inf if pv == 0 else 10.0 * math.log10(ps / pv)
    return sir, snr
