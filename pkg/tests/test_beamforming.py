import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arrowbf.beamforming import (Adam, BeamWeights, OptimizerConfig, apply_beamformer,
                                 distortionless_residual, initial_weights, mvdr_oracle, noise_scm,
                                 optimize_weights)
from arrowbf.losses import LossProblem, LossWeights, arrow_loss, loss_and_grad
from arrowbf.stft import Spectrogram, WindowSpec

SPEC = WindowSpec()


def _cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _spectrogram(data):
    return Spectrogram(np.asarray(data, complex), SPEC, 16000.0, None)


@pytest.fixture(scope="module")
def problem(anechoic_scene):
    return LossProblem.from_scene(anechoic_scene)


# --- apply_beamformer ------------------------------------------------------------


def test_selector_weights_pass_reference(rng):
    Y = _spectrogram(_cplx(rng, 4, 6, 257))
    W = np.zeros((257, 4), complex)
    W[:, 2] = 1
    np.testing.assert_array_equal(apply_beamformer(W, Y).data[0], Y.data[2])
    assert not np.any(apply_beamformer(np.zeros((257, 4)), Y).data)


def test_two_mic_hand_value():
    Y = np.zeros((2, 1, 257), complex)
    Y[0], Y[1] = 1.0, 1j
    W = np.tile([1.0, 1j], (257, 1))
    np.testing.assert_allclose(apply_beamformer(W, _spectrogram(Y)).data, 2.0)


def test_apply_dimension_mismatch(rng):
    Y = _spectrogram(_cplx(rng, 4, 6, 257))
    with pytest.raises(ValueError):
        apply_beamformer(np.ones((257, 3)), Y)
    with pytest.raises(ValueError):
        apply_beamformer(np.ones((5, 257, 4)), Y)


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=10, allow_nan=False),
       st.booleans())
def test_apply_linearity(seed, c, per_frame):
    rng = np.random.default_rng(seed)
    Y1, Y2 = _cplx(rng, 3, 4, 257), _cplx(rng, 3, 4, 257)
    shape = (4, 257, 3) if per_frame else (257, 3)
    W1, W2 = _cplx(rng, *shape), _cplx(rng, *shape)

    def out(W, Y):
        return apply_beamformer(W, _spectrogram(Y)).data

    np.testing.assert_allclose(out(W1 + c * W2, Y1), out(W1, Y1) + np.conj(c) * out(W2, Y1),
                               atol=1e-9)
    np.testing.assert_allclose(out(W1, Y1 + c * Y2), out(W1, Y1) + c * out(W1, Y2), atol=1e-9)


def test_apply_matches_problem_enhance(problem):
    rng = np.random.default_rng(2)
    W = _cplx(rng, problem.num_bins, problem.num_mics)
    Y = Spectrogram(problem.Y, problem.spec, problem.sample_rate, problem.length)
    np.testing.assert_allclose(apply_beamformer(W, Y).data[0], problem.enhance(W), atol=1e-12)


# --- MVDR and residuals -------------------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 1e-6, 1e-2]))
def test_mvdr_is_distortionless(seed, loading):
    rng = np.random.default_rng(seed)
    Y = _cplx(rng, 4, 20, 257)
    vad = np.arange(20) < 8
    R = _cplx(rng, 257, 4)
    R[:, 0] = 1
    W = mvdr_oracle(_spectrogram(Y), R, vad, loading)
    rep = distortionless_residual(W, R, 1.0)
    assert rep.max < 1e-10
    target = arrow_loss(W, R, R, np.ones(1, bool), alpha=1.0)[1]
    assert target < 1e-10


def test_mvdr_white_noise_is_matched_filter(rng):
    # orthogonal noise frames make the SCM exactly sigma^2 I
    sigma, M = 0.7, 4
    Y = np.zeros((M, M + 3, 257), complex)
    for m in range(M):
        Y[m, m] = sigma * math.sqrt(M)
    Y[:, M:] = _cplx(rng, M, 3, 257)
    vad = np.arange(M + 3) >= M
    np.testing.assert_allclose(noise_scm(Y, vad), np.broadcast_to(sigma**2 * np.eye(M), (257, M, M)),
                               atol=1e-14)
    R = _cplx(rng, 257, M)
    W = mvdr_oracle(Y, R, vad, diagonal_loading=0.0).values
    expect = R / np.sum(np.abs(R) ** 2, axis=1, keepdims=True)
    np.testing.assert_allclose(W, expect, atol=1e-12)


def test_mvdr_errors(rng):
    Y = _cplx(rng, 2, 5, 257)
    R = _cplx(rng, 257, 2)
    with pytest.raises(ValueError, match="speech-absent"):
        mvdr_oracle(Y, R, np.ones(5, bool))
    with pytest.raises(ValueError):
        mvdr_oracle(Y, R, np.zeros(5, bool), diagonal_loading=-1.0)
    with pytest.raises(np.linalg.LinAlgError):
        mvdr_oracle(np.zeros((2, 5, 257), complex), R, np.zeros(5, bool), diagonal_loading=0.0)


def test_zero_weights_residual_is_one(rng):
    rep = distortionless_residual(np.zeros((257, 4)), _cplx(rng, 257, 4), 1.0)
    np.testing.assert_array_equal(rep.per_bin, 1.0)
    assert rep.mean == rep.max == 1.0


def test_residual_per_frame_uses_active_frames(rng):
    R = _cplx(rng, 5, 2)
    W = np.zeros((3, 5, 2), complex)
    W[1] = R / np.sum(np.abs(R) ** 2, axis=1, keepdims=True)
    rep = distortionless_residual(W, R, 1.0, vad=[False, True, False])
    assert rep.max < 1e-12


# --- optimization --------------------------------------------------------------------


def test_adam_minimizes_quadratic():
    x = np.array([3.0, -2.0])
    opt = Adam(lr=0.05)
    for _ in range(500):
        opt.step(x, 2 * x)
    assert np.all(np.abs(x) < 1e-2)


def test_initializations(anechoic_scene):
    arr = anechoic_scene.array
    W = initial_weights(OptimizerConfig(), 257, 4, 10, arr)
    assert np.all(W[:, 0] == 1) and not np.any(W[:, 1:])
    W = initial_weights(OptimizerConfig(init="delay_and_sum", init_theta=90.0), 257, 4, 10, arr)
    np.testing.assert_allclose(W, 0.25)
    W = initial_weights(OptimizerConfig(time_varying=True), 257, 4, 10, arr)
    assert W.shape == (10, 257, 4)
    a = initial_weights(OptimizerConfig(init="random", seed=3), 257, 4, 10)
    b = initial_weights(OptimizerConfig(init="random", seed=3), 257, 4, 10)
    np.testing.assert_array_equal(a, b)


def test_optimizer_config_errors():
    for kw in (dict(learning_rate=0), dict(max_iters=0), dict(init="zeros"),
               dict(init="delay_and_sum"), dict(alpha=1.5)):
        with pytest.raises(ValueError):
            OptimizerConfig(**kw)


@pytest.fixture(scope="module")
def short_run(problem, anechoic_scene):
    cfg = OptimizerConfig(max_iters=60)
    return optimize_weights(None, cfg, problem=problem, array=anechoic_scene.array)


def test_best_trace_non_increasing(short_run):
    W, trace = short_run
    assert np.all(np.diff(trace.best) <= 0)
    assert trace.best[-1] <= trace.loss[0]
    assert trace.best[-1] == trace.loss[trace.best_iteration]


def test_returned_weights_have_best_loss(short_run, problem):
    W, trace = short_run
    bd, _ = loss_and_grad(problem, W, LossWeights(0.5, 0.5))
    assert bd.combined == pytest.approx(trace.best[-1], rel=1e-12)


def test_optimization_is_deterministic(short_run, problem, anechoic_scene):
    W, trace = short_run
    W2, trace2 = optimize_weights(None, OptimizerConfig(max_iters=60), problem=problem,
                                  array=anechoic_scene.array)
    np.testing.assert_array_equal(W.values, W2.values)
    np.testing.assert_array_equal(trace.loss, trace2.loss)


def test_time_varying_optimization(problem, anechoic_scene):
    W, trace = optimize_weights(None, OptimizerConfig(max_iters=10, time_varying=True),
                                problem=problem, array=anechoic_scene.array)
    assert W.time_varying and W.values.shape == (problem.num_frames, problem.num_bins, 4)
    assert trace.best[-1] <= trace.loss[0]


def test_early_stopping(problem, anechoic_scene):
    cfg = OptimizerConfig(max_iters=400, learning_rate=1e-9, patience=5, min_improvement=1e-3)
    _, trace = optimize_weights(None, cfg, problem=problem, array=anechoic_scene.array)
    assert trace.stopped_early and trace.loss.size == 6


def test_gradient_direction_continuous_in_beta(problem):
    W = initial_weights(OptimizerConfig(), problem.num_bins, problem.num_mics, problem.num_frames)
    _, g1 = loss_and_grad(problem, W, LossWeights(0.5, 1.0))
    _, g2 = loss_and_grad(problem, W, LossWeights(0.5, 0.999))
    cos = np.real(np.vdot(g1, g2)) / (np.linalg.norm(g1) * np.linalg.norm(g2))
    assert math.degrees(math.acos(min(1.0, cos))) < 5.0


# --- weight files ----------------------------------------------------------------------


@pytest.mark.parametrize("shape", [(257, 4), (3, 257, 4)])
def test_weights_round_trip(tmp_path, shape):
    W = BeamWeights(_cplx(np.random.default_rng(0), *shape))
    W.save(tmp_path / "w.json", SPEC, scene="x")
    back, meta = BeamWeights.load(tmp_path / "w.json")
    np.testing.assert_array_equal(back.values, W.values)
    assert meta["scene"] == "x" and meta["window"] == SPEC.to_dict()
    buf = io.StringIO()
    W.save(buf, SPEC, scene="x")
    assert buf.getvalue() == (tmp_path / "w.json").read_text()


def test_weights_validation(tmp_path):
    with pytest.raises(ValueError):
        BeamWeights(np.ones(4))
    with pytest.raises(ValueError):
        BeamWeights(np.full((2, 2), np.nan))
    (tmp_path / "bad.json").write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        BeamWeights.load(tmp_path / "bad.json")
