"""Experiment runner behind the command-line tool.

Every scene derives its randomness from ``SeedSequence([seed, index])``, so
outputs do not depend on the worker count or on which scenes ran before.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .beamforming import BeamWeights, distortionless_residual, optimize_weights
from .config import ConfigError, ExperimentConfig
from .localization import (AngularGrid, beampattern, estimate_doa, localization_accuracy,
                           per_frame_doa)
from .losses import LossProblem, LossWeights, VadMask, combined_loss, loss_and_grad, si_snr
from .room import (ArrayGeometry, RoomSpec, SceneConfig, SceneSample, SourcePlacement,
                   generate_rir, measured_ratios, sample_scene, synthesize_mixture)
from .sources import insert_clip, music_like, speech_shaped_noise
from .stft import MultichannelWaveform, WindowSpec, istft, stft
from .wavio import read_json, read_mono, read_wav, write_json, write_text, write_wav

logger = logging.getLogger(__name__)

SCENE_FORMAT = "arrowbf-scene"
MANIFEST_FORMAT = "arrowbf-manifest"
REPORT_FORMAT = "arrowbf-report"
METRICS = ("input_si_snr", "output_si_snr", "si_snr_improvement",
           "distortionless_residual", "doa_error", "accuracy")


class InputError(ConfigError):
    """Missing or inconsistent input files (exit code 1)."""


def _map(func, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    return buf.getvalue()


def _complex_to_json(x: np.ndarray) -> dict:
    return {"real": x.real.tolist(), "imag": x.imag.tolist()}


def _complex_from_json(d: dict) -> np.ndarray:
    return np.asarray(d["real"], dtype=np.float64) + 1j * np.asarray(d["imag"], dtype=np.float64)


def _report_config(cfg: ExperimentConfig) -> dict:
    d = cfg.to_dict()
    d.pop("workers")  # results must not depend on it
    return d


# ---------------------------------------------------------------------------
# simulate


def _source_clip(directory, seconds: float, fs: int, rng: np.random.Generator, synth) -> np.ndarray:
    n = int(round(seconds * fs))
    if directory is None:
        return synth(seconds, fs, rng)
    files = sorted(Path(directory).glob("*.wav"))
    if not files:
        raise InputError(f"no .wav files in source directory {directory}")
    x, rate = read_mono(files[int(rng.integers(len(files)))])
    if rate != fs:
        g = math.gcd(int(rate), int(fs))
        x = resample_poly(x, fs // g, rate // g)
    if x.size >= n:
        start = int(rng.integers(0, x.size - n + 1))
        return x[start:start + n]
    return np.pad(x, (0, n - x.size))


def scene_conditions(cfg: ExperimentConfig, index: int, rng: np.random.Generator):
    """(t60, SIR, SNR) for scene ``index``: t60 and SIR cycle through their
    lists so every cell is covered; SNR is drawn at random."""
    nt = len(cfg.t60)
    t60 = cfg.t60[index % nt]
    sir = cfg.sir[(index // nt) % len(cfg.sir)]
    snr = float(cfg.snr[int(rng.integers(len(cfg.snr)))])
    return t60, sir, snr


def build_scene(cfg: ExperimentConfig, index: int) -> tuple[SceneSample, dict]:
    """Synthesize scene ``index`` of the experiment."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    t60, sir, snr = scene_conditions(cfg, index, rng)
    room = cfg.room_spec(t60)
    array = cfg.array.geometry()
    try:
        tp, ip = sample_scene(rng, cfg.scene.placement(), array, room)
    except ValueError as exc:
        raise ConfigError(f"scene {index}: {exc}") from None
    fs = cfg.sample_rate
    sc = cfg.scene
    speech = _source_clip(sc.source_dir, sc.speech_seconds, fs, rng, speech_shaped_noise)
    target, offset = insert_clip(speech, int(round(sc.clip_seconds * fs)), rng)
    interferer = _source_clip(sc.interferer_dir, sc.clip_seconds, fs, rng, music_like)
    rir_s = generate_rir(room, tp, array, fs)
    rir_n = generate_rir(room, ip, array, fs)
    noise_seed = int(rng.integers(2 ** 63))
    scene = synthesize_mixture(target, interferer, rir_s, rir_n, sir, snr, seed=noise_seed,
                               array=array, spec=cfg.stft, early_window=sc.early_window,
                               vad_threshold_db=sc.vad_threshold_db)
    scene.target_placement, scene.interferer_placement, scene.t60 = tp, ip, t60
    scene.seed = noise_seed
    return scene, {"speech_offset": offset}


def scene_sidecar(scene: SceneSample, scene_id: str, cfg: ExperimentConfig, files: dict,
                  wav_scale: float = 1.0, extra: dict | None = None) -> dict:
    msir, msnr = measured_ratios(scene)
    d = {
        "format": SCENE_FORMAT,
        "version": 1,
        "id": scene_id,
        "seed": scene.seed,
        "sample_rate": scene.sample_rate,
        "num_samples": scene.mixture.num_samples,
        "t60": scene.t60,
        "sir": scene.sir,
        "snr": scene.snr,
        "measured_sir": msir,
        "measured_snr": msnr,
        "room": {"dimensions": list(cfg.room.dimensions), "speed_of_sound": cfg.room.speed_of_sound},
        "array": scene.array.to_dict(),
        "window": cfg.stft.to_dict(),
        "early_window": cfg.scene.early_window,
        "target": scene.target_placement.to_dict() if scene.target_placement else None,
        "interferer": scene.interferer_placement.to_dict() if scene.interferer_placement else None,
        "vad": [int(v) for v in np.asarray(scene.vad, dtype=bool)],
        "rtf_s": _complex_to_json(scene.rtf_s.values),
        "rtf_n": _complex_to_json(scene.rtf_n.values),
        "wav_scale": wav_scale,
        "files": files,
    }
    d.update(extra or {})
    return d


def _simulate_one(cfg: ExperimentConfig, out_dir: str, index: int) -> dict:
    scene, extra = build_scene(cfg, index)
    scene_id = f"scene_{index:04d}"
    files = {"mixture": f"{scene_id}.wav", "target": f"{scene_id}_target.wav"}
    out = Path(out_dir)
    mix, tgt = scene.mixture.data, scene.target
    scale = 1.0
    if cfg.scene.wav_format == "pcm16":
        peak = max(float(np.max(np.abs(mix))), float(np.max(np.abs(tgt))))
        scale = max(1.0, peak / 0.99)
    write_wav(out / files["mixture"], mix / scale, scene.sample_rate, cfg.scene.wav_format)
    write_wav(out / files["target"], tgt / scale, scene.sample_rate, cfg.scene.wav_format)
    write_json(out / f"{scene_id}.json", scene_sidecar(scene, scene_id, cfg, files, scale, extra))
    logger.info("simulated %s (t60=%.2f, SIR=%g, SNR=%g)", scene_id, scene.t60, scene.sir, scene.snr)
    return {"id": scene_id, "sidecar": f"{scene_id}.json", "t60": scene.t60,
            "sir": scene.sir, "snr": scene.snr}


def run_simulate(cfg: ExperimentConfig, out_dir) -> dict:
    """Write ``cfg.num_scenes`` scenes (WAVs + JSON sidecars) and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = _map(partial(_simulate_one, cfg, str(out)), range(cfg.num_scenes), cfg.workers)
    manifest = {"format": MANIFEST_FORMAT, "version": 1, "seed": cfg.seed,
                "num_scenes": len(entries), "config": _report_config(cfg), "scenes": entries}
    write_json(out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# loading scenes back


@dataclass
class LoadedScene:
    scene_id: str
    sidecar: dict
    problem: LossProblem
    array: ArrayGeometry
    mixture: np.ndarray
    sample_rate: int
    speed_of_sound: float
    truth: float | None = None
    t60: float | None = None
    sir: float | None = None
    snr: float | None = None

    @property
    def vad(self) -> VadMask:
        return self.problem.vad

    @property
    def spec(self) -> WindowSpec:
        return self.problem.spec


def read_sidecar(path) -> dict:
    p = Path(path)
    if p.suffix.lower() == ".wav" and p.with_suffix(".json").is_file():
        p = p.with_suffix(".json")
    if not p.is_file():
        raise InputError(
            f"scene sidecar {p} not found; run `arrowbf simulate` first and pass the "
            f".json file written next to each scene WAV"
        )
    d = read_json(p)
    if d.get("format") != SCENE_FORMAT:
        raise InputError(f"{p} is not a scene sidecar")
    return d


def load_scene(path) -> LoadedScene:
    """Rebuild the loss problem of a simulated scene from its sidecar and WAVs."""
    p = Path(path)
    d = read_sidecar(p)
    base = (p if p.suffix.lower() == ".json" else p.with_suffix(".json")).parent
    for key in ("rtf_s", "rtf_n", "vad", "files"):
        if key not in d:
            raise InputError(f"sidecar {p} has no {key!r}; regenerate it with `arrowbf simulate`")
    try:
        mix, rate = read_wav(base / d["files"]["mixture"])
        tgt, trate = read_wav(base / d["files"]["target"])
    except FileNotFoundError as exc:
        raise InputError(f"{exc.filename} not found; the sidecar and its WAVs must stay together") from None
    if rate != d["sample_rate"] or trate != rate:
        raise InputError(f"{p}: WAV sample rate does not match the sidecar")
    scale = float(d.get("wav_scale", 1.0))
    mix, tgt = mix * scale, tgt[0] * scale
    spec = WindowSpec.from_dict(d["window"])
    array = ArrayGeometry.from_dict(d["array"])
    rtf_s, rtf_n = _complex_from_json(d["rtf_s"]), _complex_from_json(d["rtf_n"])
    vad = VadMask(np.asarray(d["vad"], dtype=bool))
    if mix.shape[0] != array.num_mics or rtf_s.shape != (spec.num_bins, array.num_mics):
        raise InputError(f"{p}: channel count or RTF shape does not match the array")
    Y = stft(MultichannelWaveform(mix, rate), spec)
    if Y.data.shape[1] != len(vad):
        raise InputError(f"{p}: VAD has {len(vad)} frames, the mixture has {Y.data.shape[1]}")
    reference = istft(stft(tgt, spec, rate)).data[0]
    problem = LossProblem(Y.data, reference, rtf_s, rtf_n, vad, spec, rate, mix.shape[1])
    target = d.get("target") or {}
    room = d.get("room") or {}
    return LoadedScene(d["id"], d, problem, array, mix, rate,
                       float(room.get("speed_of_sound", 343.0)), target.get("angle"),
                       d.get("t60"), d.get("sir"), d.get("snr"))


# ---------------------------------------------------------------------------
# enhance


def _tag(alpha, beta) -> str:
    a = "none" if alpha is None else f"{alpha:.2f}"
    return f"a{a}_b{beta:.2f}"


def enhance_scene(scene: LoadedScene, cfg: ExperimentConfig, alpha: float, beta: float):
    """Optimize weights for one scene. Returns (weights, trace, breakdown)."""
    opt = cfg.optimizer.build(alpha, beta, seed=cfg.seed)
    W, trace = optimize_weights(None, opt, scene.spec, problem=scene.problem, array=scene.array)
    bd = combined_loss(scene.problem, W, opt.weights)
    return W, trace, bd


def _enhance_one(cfg: ExperimentConfig, out_dir: str, alpha: float, beta: float, path: str) -> dict:
    scene = load_scene(path)
    W, trace, bd = enhance_scene(scene, cfg, alpha, beta)
    out = Path(out_dir)
    stem = f"{scene.scene_id}_{_tag(alpha, beta)}"
    buf = io.StringIO()
    W.save(buf, scene.spec, scene=scene.scene_id, alpha=alpha, beta=beta,
           best_iteration=trace.best_iteration, best_loss=float(trace.best[-1]))
    write_text(out / f"{stem}_weights.json", buf.getvalue())
    enhanced = scene.problem.output(W)
    write_wav(out / f"{stem}_enhanced.wav", enhanced, scene.sample_rate, "float32")
    rows = [(i, repr(float(l)), repr(float(b))) for i, (l, b) in enumerate(zip(trace.loss, trace.best))]
    write_text(out / f"{stem}_trace.csv", _csv_text(["iteration", "loss", "best"], rows))
    return {"id": scene.scene_id, "weights": f"{stem}_weights.json",
            "enhanced": f"{stem}_enhanced.wav", "trace": f"{stem}_trace.csv",
            "initial_loss": float(trace.loss[0]), "best_loss": float(trace.best[-1]),
            "iterations": int(trace.loss.size - 1)}


def scene_paths_from(inputs) -> list[Path]:
    """Expand manifest files into their sidecar paths; pass sidecars through."""
    paths = []
    for item in inputs:
        p = Path(item)
        if p.is_file() and p.suffix.lower() == ".json":
            d = read_json(p)
            if d.get("format") == MANIFEST_FORMAT:
                paths.extend(p.parent / e["sidecar"] for e in d["scenes"])
                continue
        paths.append(p)
    return paths


def run_enhance(scene_paths, cfg: ExperimentConfig, out_dir,
                alpha: float | None = None, beta: float | None = None) -> list[dict]:
    """Optimize weights per scene; writes weights JSON, enhanced WAV and loss trace CSV."""
    alpha = cfg.alpha[0] if alpha is None else alpha
    beta = cfg.beta[0] if beta is None else beta
    paths = scene_paths_from(scene_paths)
    for p in paths:
        read_sidecar(p)  # fail early with the remediation hint
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    func = partial(_enhance_one, cfg, str(out_dir), alpha, beta)
    return _map(func, [str(p) for p in paths], cfg.workers)


# ---------------------------------------------------------------------------
# localize


def run_localize(weights_path, sidecar_path, grid: str = "fine", out_dir=None) -> dict:
    """DOA record for a weights file; writes ``<stem>_doa.json`` and
    ``<stem>_beampattern.csv`` when ``out_dir`` is given."""
    wp = Path(weights_path)
    if not wp.is_file():
        raise InputError(f"weights file {wp} not found; produce one with `arrowbf enhance`")
    try:
        W, header = BeamWeights.load(wp)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{wp}: {exc}") from None
    d = read_sidecar(sidecar_path)
    array = ArrayGeometry.from_dict(d["array"])
    spec = WindowSpec.from_dict(d["window"])
    fs = d["sample_rate"]
    c = float((d.get("room") or {}).get("speed_of_sound", 343.0))
    if "vad" in d:
        vad = np.asarray(d["vad"], dtype=bool)
    else:
        vad = np.ones(W.values.shape[0] if W.time_varying else 1, dtype=bool)
    ag = AngularGrid.named(grid)
    try:
        bp = beampattern(W, ag, vad, array, spec, fs, c)
        frames = per_frame_doa(W, ag, vad, array, spec, fs, c)
    except ValueError as exc:
        raise InputError(f"weights {wp.name} and sidecar do not match: {exc}") from None
    truth = (d.get("target") or {}).get("angle")
    est = estimate_doa(bp, truth)
    record = {"theta_hat": est.theta_hat, "grid": grid, "weights": wp.name,
              "scene": d.get("id"), "per_frame": [float(x) for x in frames]}
    if truth is not None:
        record["truth"] = float(truth)
        record["error"] = est.error
        record["accuracy"] = localization_accuracy(frames, truth) if frames.size else None
    if out_dir is not None:
        out = Path(out_dir)
        stem = wp.stem[:-len("_weights")] if wp.stem.endswith("_weights") else wp.stem
        write_json(out / f"{stem}_doa.json", record)
        rows = [(repr(float(a)), repr(float(v))) for a, v in zip(bp.angles, bp.values)]
        write_text(out / f"{stem}_beampattern.csv", _csv_text(["angle_deg", "value"], rows))
    return record


# ---------------------------------------------------------------------------
# evaluate


@dataclass
class MetricsReport:
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    config: dict | None = None

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "version": 1, "config": self.config,
                "records": self.records, "aggregates": self.aggregates}


def _variants(cfg: ExperimentConfig):
    out = [("arrow", a, b) for a in cfg.alpha for b in cfg.beta]
    if cfg.baseline:
        # beta = 1 leaves only the SI-SNR term, so alpha plays no role
        out.append(("baseline", None, 1.0))
    return out


def scene_metrics(scene: LoadedScene, W: BeamWeights, eta: float, grid: AngularGrid) -> dict:
    problem = scene.problem
    ref_sel = np.zeros((problem.num_bins, problem.num_mics), dtype=np.complex128)
    ref_sel[:, scene.array.reference_index] = 1.0
    si_in = si_snr(problem.output(ref_sel), problem.reference)
    si_out = si_snr(problem.output(W), problem.reference)
    resid = distortionless_residual(W, problem.rtf_s, eta, problem.vad).mean
    m = {"input_si_snr": si_in, "output_si_snr": si_out, "si_snr_improvement": si_out - si_in,
         "distortionless_residual": resid, "doa_estimate": None, "doa_error": None, "accuracy": None}
    if problem.vad.num_active:
        args = (W, grid, problem.vad, scene.array, problem.spec, scene.sample_rate, scene.speed_of_sound)
        est = estimate_doa(beampattern(*args), scene.truth)
        m["doa_estimate"] = est.theta_hat
        if scene.truth is not None:
            m["doa_error"] = est.error
            m["accuracy"] = localization_accuracy(per_frame_doa(*args), scene.truth)
    return m


def _evaluate_scene(cfg: ExperimentConfig, path: str) -> list[dict]:
    variants = _variants(cfg)
    try:
        scene = load_scene(path)
    except Exception as exc:  # recorded per scene, the run goes on
        logger.error("scene %s failed to load: %s", path, exc)
        return [_failed(Path(path).stem, None, v, exc) for v in variants]
    grid = AngularGrid.named(cfg.grid)
    rows = []
    for kind, alpha, beta in variants:
        base = {"scene": scene.scene_id, "t60": scene.t60, "sir": scene.sir, "snr": scene.snr,
                "variant": kind, "alpha": alpha, "beta": beta}
        try:
            W, trace, bd = enhance_scene(scene, cfg, 0.5 if alpha is None else alpha, beta)
            base.update(scene_metrics(scene, W, bd.eta, grid))
            base.update({"best_loss": float(trace.best[-1]), "iterations": int(trace.loss.size - 1),
                         "error": None})
        except Exception as exc:
            logger.error("scene %s (%s) failed: %s", scene.scene_id, _tag(alpha, beta), exc)
            base.update(_failed(scene.scene_id, scene, (kind, alpha, beta), exc))
        rows.append(base)
    return rows


def _failed(scene_id, scene, variant, exc) -> dict:
    kind, alpha, beta = variant
    row = {"scene": scene_id, "t60": getattr(scene, "t60", None), "sir": getattr(scene, "sir", None),
           "snr": getattr(scene, "snr", None), "variant": kind, "alpha": alpha, "beta": beta}
    row.update({k: None for k in ("input_si_snr", "output_si_snr", "si_snr_improvement",
                                  "distortionless_residual", "doa_estimate", "doa_error",
                                  "accuracy", "best_loss", "iterations")})
    row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def aggregate(records: list[dict]) -> list[dict]:
    """Per (variant, alpha, beta, SIR, t60) cell means of the per-scene metrics.

    Arrow cells also carry the paired baseline means over the same SIR/t60.
    """
    def key_of(r):
        return (r["variant"], r["alpha"], r["beta"], r["sir"], r["t60"])

    def sort_key(k):
        return tuple((v is None, v if v is not None else 0) for v in k)

    cells = {}
    for r in records:
        cells.setdefault(key_of(r), []).append(r)
    out = []
    for key in sorted(cells, key=sort_key):
        rows = cells[key]
        ok = [r for r in rows if r.get("error") is None]
        cell = dict(zip(("variant", "alpha", "beta", "sir", "t60"), key))
        cell["count"] = len(ok)
        cell["failures"] = len(rows) - len(ok)
        for m in METRICS:
            cell[f"{m}_mean"] = _mean(r[m] for r in ok)
        if key[0] == "arrow":
            base = [r for r in records if r["variant"] == "baseline" and r["sir"] == key[3]
                    and r["t60"] == key[4] and r.get("error") is None]
            cell["baseline_si_snr_improvement_mean"] = _mean(r["si_snr_improvement"] for r in base)
            cell["baseline_accuracy_mean"] = _mean(r["accuracy"] for r in base)
        out.append(cell)
    return out


def _table(dicts: list[dict]) -> str:
    if not dicts:
        return ""
    header = list(dicts[0])
    for d in dicts[1:]:
        header += [k for k in d if k not in header]
    rows = [[repr(v) if isinstance(v, float) else v for v in (d.get(k) for k in header)] for d in dicts]
    return _csv_text(header, rows)


def run_evaluate(manifest_path, cfg: ExperimentConfig, out_dir=None) -> MetricsReport:
    """Enhance every manifest scene for each (alpha, beta) cell and score it.

    Writes ``report.json``, ``report_scenes.csv`` and ``report_aggregates.csv``
    into ``out_dir`` when given.
    """
    mp = Path(manifest_path)
    if not mp.is_file():
        raise InputError(f"manifest {mp} not found; create one with `arrowbf simulate`")
    manifest = read_json(mp)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise InputError(f"{mp} is not a scene manifest")
    paths = [str(mp.parent / e["sidecar"]) for e in manifest["scenes"]]
    per_scene = _map(partial(_evaluate_scene, cfg), paths, cfg.workers)
    records = [r for rows in per_scene for r in rows]
    report = MetricsReport(records, aggregate(records), _report_config(cfg))
    if out_dir is not None:
        out = Path(out_dir)
        write_json(out / "report.json", report.to_dict())
        write_text(out / "report_scenes.csv", _table(records))
        write_text(out / "report_aggregates.csv", _table(report.aggregates))
    return report


# ---------------------------------------------------------------------------
# gradient check

CHECK_TERMS = ("si_snr", "arrow_target", "arrow_interferer", "combined")


def _check_scene(rng: np.random.Generator, t60: float, duration: float = 1.0,
                 fs: int = 16000) -> SceneSample:
    room = RoomSpec(t60=t60)
    array = ArrayGeometry.ula()
    tp, ip = sample_scene(rng, SceneConfig(), array, room)
    n = int(round(duration * fs))
    target, _ = insert_clip(speech_shaped_noise(0.6 * duration, fs, rng), n, rng)
    interferer = music_like(duration, fs, rng)
    sir = float(rng.uniform(-5.0, 10.0))
    snr = float(rng.choice([20.0, 25.0, 30.0]))
    return synthesize_mixture(target, interferer, generate_rir(room, tp, array, fs, duration=0.1),
                              generate_rir(room, ip, array, fs, duration=0.1), sir, snr,
                              seed=int(rng.integers(2 ** 31)), array=array)


def _term_values(problem: LossProblem, W, weights: LossWeights) -> np.ndarray:
    bd = combined_loss(problem, W, weights)
    return np.array([bd.si_snr_loss, weights.alpha * bd.arrow_target_term,
                     (1.0 - weights.alpha) * bd.arrow_interferer_term, bd.combined])


def _kink_signs(problem: LossProblem, W) -> np.ndarray:
    """Signs of every quantity under an absolute value in the ARROW loss."""
    zs = np.sum(np.conj(W) * problem.rtf_s, axis=-1)
    zn = np.sum(np.conj(W) * problem.rtf_n, axis=-1)
    act = problem.vad.active
    if W.ndim == 3:
        zs, zn = zs[act], zn[~act]
    return np.concatenate([np.sign(zs.imag).ravel(), np.sign(zn.real).ravel(),
                           np.sign(zn.imag).ravel()])


def run_losscheck(seed: int = 0, num_scenes: int = 20, num_directions: int = 20,
                  step: float = 1e-6, tolerance: float = 1e-4,
                  sign_flip: str | None = None) -> dict:
    """Central-difference check of every loss term's analytic gradient.

    For each random scene, random weights and random directions ``D`` with
    unit-variance complex entries,
    the directional derivative ``Re(sum(conj(G) * D))`` is compared with
    ``(f(W + hD) - f(W - hD)) / 2h``. Directions whose segment crosses a kink
    of the ARROW absolute values are redrawn and counted (as are weights
    too close to a kink for any direction to avoid it). ``sign_flip`` names a
    term whose analytic gradient is negated, as a negative control.
    """
    if sign_flip is not None and sign_flip not in CHECK_TERMS[:3]:
        raise ConfigError(f"sign_flip must be one of {CHECK_TERMS[:3]}")
    scenes = []
    worst = dict.fromkeys(CHECK_TERMS, 0.0)
    for i in range(num_scenes):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        t60 = 0.0 if i % 2 == 0 else 0.2
        time_varying = i % 4 == 3
        problem = LossProblem.from_scene(_check_scene(rng, t60))
        alpha, beta = (float(x) for x in rng.uniform(0.05, 0.95, size=2))
        weights = LossWeights(alpha, beta)
        shape = (problem.num_bins, problem.num_mics)
        if time_varying:
            shape = (problem.num_frames,) + shape
        # the difference quotient is only meaningful if no |.| kink of the
        # ARROW terms lies between W - hD and W + hD: such directions are
        # redrawn, and weights sitting too close to a kink are redrawn too
        redrawn, redrawn_weights = 0, 0
        for _ in range(10):
            W = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2 * problem.num_mics)
            dirs, misses = [], 0
            while len(dirs) < num_directions and misses < 20 * (len(dirs) + 1):
                # unit-variance entries: each weight moves by about ``step``
                D = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
                if np.array_equal(_kink_signs(problem, W + step * D), _kink_signs(problem, W - step * D)):
                    dirs.append(D)
                else:
                    misses += 1
            redrawn += misses
            if len(dirs) == num_directions:
                break
            redrawn_weights += 1
        else:
            raise FloatingPointError("could not find kink-free directions for the gradient check")
        _, _, g = loss_and_grad(problem, W, weights, per_term=True)
        if sign_flip is not None:
            g[sign_flip] = -g[sign_flip]
        grads = [g["si_snr"], g["arrow_target"], g["arrow_interferer"],
                 beta * g["si_snr"] + (1.0 - beta) * (g["arrow_target"] + g["arrow_interferer"])]
        errs = np.zeros((num_directions, len(CHECK_TERMS)))
        for k, D in enumerate(dirs):
            numeric = (_term_values(problem, W + step * D, weights)
                       - _term_values(problem, W - step * D, weights)) / (2.0 * step)
            analytic = np.array([np.real(np.vdot(gr, D)) for gr in grads])
            errs[k] = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-12)
        scene_max = dict(zip(CHECK_TERMS, (float(x) for x in errs.max(axis=0))))
        for t in CHECK_TERMS:
            worst[t] = max(worst[t], scene_max[t])
        scenes.append({"index": i, "t60": t60, "alpha": alpha, "beta": beta,
                       "time_varying": time_varying, "redrawn_directions": redrawn,
                       "redrawn_weights": redrawn_weights,
                       "max_relative_error": scene_max})
    passed = all(v < tolerance for v in worst.values())
    return {"seed": seed, "num_scenes": num_scenes, "num_directions": num_directions,
            "step": step, "tolerance": tolerance, "sign_flip": sign_flip,
            "max_relative_error": worst, "passed": passed, "scenes": scenes}
