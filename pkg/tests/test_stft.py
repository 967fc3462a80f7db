import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from arrowbf.stft import MultichannelWaveform, Spectrogram, WindowSpec, frame_count, istft, stft

SPEC = WindowSpec()


def _interior(x, spec=SPEC):
    return x[..., spec.window_length:-spec.window_length]


def test_default_spec_matches_25ms_10ms_at_16k():
    assert (SPEC.window_length, SPEC.hop_length, SPEC.fft_size) == (400, 160, 512)
    assert SPEC.num_bins == 257


@pytest.mark.parametrize("kw", [
    dict(hop_length=0), dict(window_length=600), dict(hop_length=500),
    dict(window_kind="kaiser"), dict(fft_size=-1),
])
def test_window_spec_rejects_bad_fields(kw):
    with pytest.raises(ValueError):
        WindowSpec(**kw)


def test_periodic_hamming():
    w = SPEC.window()
    n = np.arange(400)
    np.testing.assert_allclose(w, 0.54 - 0.46 * np.cos(2 * np.pi * n / 400), atol=1e-15)


@pytest.mark.parametrize("n, expected", [(400, 1), (560, 2), (96000, 598)])
def test_frame_count(n, expected):
    assert frame_count(n, SPEC) == expected
    assert frame_count(n, SPEC) == (n - 400) // 160 + 1


def test_too_short_signal():
    with pytest.raises(ValueError, match="signal too short"):
        frame_count(399, SPEC)
    with pytest.raises(ValueError, match="signal too short"):
        stft(np.zeros(100), SPEC)


def test_zeros_give_zero_spectrogram():
    X = stft(np.zeros(16000), SPEC)
    assert X.data.shape == (1, 98, 257)
    assert not np.any(X.data)
    assert not np.any(istft(X).data)


def test_six_second_clip_frames():
    X = stft(np.zeros((4, 96000)), SPEC)
    assert X.data.shape == (4, 598, 257)


@pytest.mark.parametrize("k", [8, 32, 100, 200, 240])
def test_bin_center_sinusoid_peaks_at_its_bin(k):
    fs = 16000
    n = np.arange(4000)
    x = np.cos(2 * np.pi * k * fs / 512 * n / fs + 0.3)
    X = stft(x, SPEC, fs)
    assert np.all(np.argmax(np.abs(X.data[0]), axis=-1) == k)


def test_frames_match_direct_dft(rng):
    # independent route: explicit DFT sum of one zero-padded windowed frame
    x = rng.standard_normal(2000)
    X = stft(x, SPEC)
    l = 3
    seg = x[l * 160:l * 160 + 400] * SPEC.window()
    n = np.arange(400)
    for k in (0, 7, 128, 256):
        direct = np.sum(seg * np.exp(-2j * np.pi * k * n / 512))
        assert abs(X.data[0, l, k] - direct) < 1e-10


def test_single_bin_burst_is_localized(rng):
    L, l, k = 10, 4, 20
    data = np.zeros((1, L, 257), dtype=complex)
    data[0, l, k] = 3.0 - 1.0j
    length = (L - 1) * 160 + 400
    y = istft(Spectrogram(data, SPEC, 16000, length)).data[0]
    start, stop = l * 160, l * 160 + 400
    assert not np.any(y[:start]) and not np.any(y[stop:])
    # expected: windowed cosine from the inverse DFT, divided by the overlapped squared-window sum
    w = SPEC.window()
    norm = np.zeros(length)
    for i in range(L):
        norm[i * 160:i * 160 + 400] += w ** 2
    n = np.arange(400)
    burst = 2.0 / 512 * np.real((3.0 - 1.0j) * np.exp(2j * np.pi * k * n / 512))
    np.testing.assert_allclose(y[start:stop], w * burst / norm[start:stop], atol=1e-13)


def test_istft_rejects_bad_bins():
    with pytest.raises(ValueError):
        Spectrogram(np.zeros((1, 3, 100), dtype=complex), SPEC)


def test_round_trip_keeps_length_and_is_real(rng):
    x = rng.standard_normal((2, 5003))
    y = istft(stft(x, SPEC))
    assert y.data.shape == x.shape
    assert y.data.dtype == np.float64


@given(arrays(np.float64, (3, 2500), elements=st.floats(-1e3, 1e3)))
def test_round_trip_interior(x):
    y = istft(stft(x, SPEC)).data
    xi, yi = _interior(x), _interior(y)
    # error is relative to the whole signal: a loud edge sample leaves rounding
    # residue in frames that reach into a near-silent interior
    norm = np.linalg.norm(x)
    if norm > 0:
        assert np.linalg.norm(yi - xi) / norm < 1e-6
    else:
        assert np.linalg.norm(yi) < 1e-9


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2 ** 31 - 1))
def test_linearity(a, b, seed):
    r = np.random.default_rng(seed)
    x, y = r.standard_normal((2, 1200))
    lhs = stft(a * x + b * y, SPEC).data
    rhs = a * stft(x, SPEC).data + b * stft(y, SPEC).data
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    assert np.max(np.abs(lhs - rhs)) / scale < 1e-10


@given(st.sampled_from([(256, 64, 256), (400, 160, 512), (320, 160, 512), (512, 128, 1024)]))
def test_round_trip_other_specs(params):
    spec = WindowSpec(*params)
    x = np.random.default_rng(0).standard_normal(8000)
    y = istft(stft(x, spec)).data[0]
    xi, yi = _interior(x, spec), _interior(y, spec)
    assert np.linalg.norm(yi - xi) / np.linalg.norm(xi) < 1e-6


def test_waveform_validation():
    with pytest.raises(ValueError):
        MultichannelWaveform(np.zeros((2, 10)), 0)
    with pytest.raises(ValueError):
        MultichannelWaveform(np.zeros((0, 10)), 16000)


def test_spec_dict_round_trip():
    spec = WindowSpec(320, 80, 512)
    assert WindowSpec.from_dict(spec.to_dict()) == spec
