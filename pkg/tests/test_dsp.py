import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal

from ecgsynth.dsp import (
    condition_leads, default_bandpass, design_bandpass, filtfilt, zscore,
)
from ecgsynth.errors import (
    InvalidBand, NonFiniteInput, TooShort, ZeroVariance,
)

FS = 500.0
T = np.arange(5000) / FS
CENTRAL = slice(500, 4500)


def direct_response(b, a, f, fs=FS):
    """Evaluate H(e^jw) straight from the polynomials (independent oracle)."""
    z = np.exp(1j * 2 * np.pi * np.asarray(f, float) / fs)
    num = sum(c * z ** -k for k, c in enumerate(b))
    den = sum(c * z ** -k for k, c in enumerate(a))
    return num / den


@pytest.fixture(scope="module")
def bp():
    return default_bandpass(FS)


def test_matches_reference_design(bp):
    sos_ref = signal.butter(4, [0.5, 40], btype="band", fs=FS, output="sos")
    f = np.linspace(0.0, 250.0, 2001)
    _, h_ref = signal.sosfreqz(sos_ref, worN=f, fs=FS)
    np.testing.assert_allclose(np.abs(bp.response(f, FS)), np.abs(h_ref), atol=1e-9)
    b_ref, a_ref = signal.butter(4, [0.5, 40], btype="band", fs=FS)
    np.testing.assert_allclose(bp.a, a_ref, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(bp.b, b_ref, rtol=1e-6, atol=1e-15)


def test_polynomial_and_sections_agree(bp):
    # the ba form is ill-conditioned near z = 1, so compare in the passband
    f = np.linspace(2.0, 200.0, 200)
    np.testing.assert_allclose(np.abs(direct_response(bp.b, bp.a, f)),
                               np.abs(bp.response(f, FS)), atol=1e-6)


@pytest.mark.parametrize("f", [0.5, 40.0])
def test_cutoffs_are_minus_3db(bp, f):
    assert abs(abs(bp.response([f], FS)[0]) - 1 / np.sqrt(2)) < 1e-6


def test_blocks_dc_and_nyquist(bp):
    h = np.abs(bp.response([0.0, FS / 2], FS))
    assert h[0] < 1e-6 and h[1] < 1e-6


def test_unity_at_geometric_centre(bp):
    f0 = np.sqrt(0.5 * 40)
    assert abs(abs(bp.response([f0], FS)[0]) - 1) < 1e-3
    assert abs(abs(direct_response(bp.b, bp.a, [f0])[0]) - 1) < 1e-3


def test_stable(bp):
    assert np.all(np.abs(np.roots(bp.a)) < 1)
    assert len(bp.a) == len(bp.b) == 9


@pytest.mark.parametrize("low,high", [(40, 0.5), (0, 40), (0.5, 250), (0.5, 300)])
def test_invalid_band(low, high):
    with pytest.raises(InvalidBand):
        design_bandpass(4, low, high, FS)


def test_constant_is_rejected(bp):
    assert np.abs(filtfilt(bp, np.full(5000, 5.0))).max() < 1e-3


def test_5hz_passes(bp):
    y = filtfilt(bp, np.sin(2 * np.pi * 5 * T))
    assert abs(np.abs(y[CENTRAL]).max() - 1.0) < 0.01


def test_half_hz_is_squared_cutoff(bp):
    y = filtfilt(bp, np.sin(2 * np.pi * 0.5 * T))
    assert abs(np.abs(y[CENTRAL]).max() - 0.5) < 0.02


def test_effective_response_is_squared(bp):
    # middle 4 s: end kinks of a non-periodic sine ring for a while at 25+ Hz
    for f in (1.0, 3.0, 25.0, 45.0):
        y = filtfilt(bp, np.sin(2 * np.pi * f * T))
        expected = abs(bp.response([f], FS)[0]) ** 2
        assert abs(np.abs(y[1500:3500]).max() - expected) < 0.01


def test_agrees_with_reference_forward_backward(bp, rng):
    x = rng.normal(0, 1, 5000).cumsum() * 0.01 + rng.normal(0, 0.2, 5000)
    sos = signal.butter(4, [0.5, 40], btype="band", fs=FS, output="sos")
    ref = signal.sosfiltfilt(sos, x, padtype="odd", padlen=x.size - 1)
    ref_rev = signal.sosfiltfilt(sos, x[::-1], padtype="odd", padlen=x.size - 1)[::-1]
    np.testing.assert_allclose(filtfilt(bp, x), 0.5 * (ref + ref_rev), atol=1e-8)


def test_impulse_response_is_symmetric(bp):
    x = np.zeros(2001)
    x[1000] = 1.0
    y = filtfilt(bp, x)
    np.testing.assert_allclose(y, y[::-1], atol=1e-12)
    assert np.argmax(y) == 1000


def test_length_preserved(bp):
    assert filtfilt(bp, np.ones(100)).shape == (100,)


def test_too_short(bp):
    with pytest.raises(TooShort):
        filtfilt(bp, np.ones(27))
    filtfilt(bp, np.ones(28))


def test_non_finite(bp):
    x = np.ones(100)
    x[4] = np.nan
    with pytest.raises(NonFiniteInput):
        filtfilt(bp, x)


signals = arrays(np.float64, 300, elements=st.floats(-10, 10, allow_nan=False))


@given(signals, signals, st.floats(-5, 5), st.floats(-5, 5))
def test_linearity(x, y, a, b):
    bp = default_bandpass(FS)
    lhs = filtfilt(bp, a * x + b * y)
    rhs = a * filtfilt(bp, x) + b * filtfilt(bp, y)
    scale = max(1.0, np.abs(lhs).max())
    assert np.abs(lhs - rhs).max() <= 1e-9 * scale


@given(signals)
def test_time_reversal(x):
    bp = default_bandpass(FS)
    np.testing.assert_allclose(filtfilt(bp, x[::-1]), filtfilt(bp, x)[::-1],
                               atol=1e-9 * max(1.0, np.abs(x).max()))


def test_composite_tone_power():
    from ecgsynth.validate import tone_power_change
    change = tone_power_change()
    assert change[0.1] >= 0.98
    assert change[60.0] >= 0.95
    assert abs(change[10.0]) <= 0.02


def test_zscore_example():
    out, mu, sigma = zscore([1.0, 2.0, 3.0])
    np.testing.assert_allclose(out, [-1.22474, 0, 1.22474], atol=1e-5)
    assert mu == 2.0 and abs(sigma - 0.81650) < 1e-5


def test_zscore_uses_population_std(rng):
    x = rng.normal(3, 2, 50)
    _, _, sigma = zscore(x)
    assert sigma == pytest.approx(np.std(x, ddof=0))


@given(arrays(np.float64, st.integers(2, 500), elements=st.floats(-1e3, 1e3)))
def test_zscore_idempotent_and_normalized(x):
    if np.std(x) < 1e-6:
        return
    once, _, _ = zscore(x)
    twice, mu, sigma = zscore(once)
    np.testing.assert_allclose(twice, once, atol=1e-9)
    assert abs(once.mean()) < 1e-9
    assert abs(once.std() - 1) < 1e-6


def test_zero_variance():
    with pytest.raises(ZeroVariance):
        zscore([4.0, 4.0, 4.0])


def test_zscore_too_short():
    with pytest.raises(TooShort):
        zscore([1.0])


def test_condition_leads_invariants(rng):
    x = rng.normal(0, 0.3, (12, 5000)) + np.sin(2 * np.pi * 1.2 * T)
    out, mus, sigmas = condition_leads(x, FS)
    assert out.shape == (12, 5000)
    assert np.abs(out.mean(axis=1)).max() < 1e-9
    assert np.abs(out.std(axis=1) - 1).max() < 1e-6
    assert all(s > 0 for s in sigmas) and len(mus) == 12


def test_condition_leads_flags_flat_lead(rng):
    x = rng.normal(0, 1, (12, 5000))
    x[4] = 2.0
    with pytest.raises(ZeroVariance, match="lead 4"):
        condition_leads(x, FS)
