"""Signal conditioning: Butterworth band-pass, zero-phase filtering, z-score."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import sosfilt

from .errors import (
    InvalidBand,
    NonFiniteInput,
    TooShort,
    UnstableResult,
    ZeroVariance,
)

BAND_ORDER = 4
BAND_LOW_HZ = 0.5
BAND_HIGH_HZ = 40.0
ZERO_VARIANCE_MV = 1e-12


@dataclass(frozen=True)
class FilterCoefficients:
    """Transfer function as polynomials ``b``/``a`` plus the equivalent
    cascade of second-order ``sections`` (rows ``b0 b1 b2 a0 a1 a2``).

    The sections are what gets applied: with poles this close to z = 1 the
    single high-order polynomial loses ~1e-5 of magnitude accuracy.
    """
    b: np.ndarray
    a: np.ndarray
    sections: np.ndarray

    def response(self, freqs_hz, fs_hz: float) -> np.ndarray:
        """Complex frequency response of the section cascade at ``freqs_hz``."""
        zinv = np.exp(-1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / fs_hz)
        h = np.ones_like(zinv)
        for sec in self.sections:
            h = h * (np.polyval(sec[2::-1], zinv) / np.polyval(sec[:2:-1], zinv))
        return h


def design_bandpass(order: int = BAND_ORDER, low_hz: float = BAND_LOW_HZ,
                    high_hz: float = BAND_HIGH_HZ,
                    fs_hz: float = 500.0) -> FilterCoefficients:
    """Digital Butterworth band-pass of prototype order ``order``.

    The analog low-pass prototype is shifted to a band-pass around the
    prewarped edges and mapped to the z-plane with the bilinear transform,
    so the -3 dB points land exactly on ``low_hz`` and ``high_hz``.  The
    result has ``2 * order + 1`` coefficients in each polynomial.
    """
    if not 0 < low_hz < high_hz < fs_hz / 2:
        raise InvalidBand(
            f"need 0 < low < high < fs/2, got {low_hz}, {high_hz}, fs={fs_hz}")
    if order < 1:
        raise InvalidBand(f"order must be positive, got {order}")

    k = np.arange(order)
    proto_poles = np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))

    fs2 = 2.0 * fs_hz
    w_lo = fs2 * np.tan(np.pi * low_hz / fs_hz)
    w_hi = fs2 * np.tan(np.pi * high_hz / fs_hz)
    bw = w_hi - w_lo
    w0_sq = w_lo * w_hi

    # s^2 - p*bw*s + w0^2 = 0 for every prototype pole p
    half = proto_poles * bw / 2
    disc = np.sqrt(half ** 2 - w0_sq)
    s_poles = np.concatenate([half + disc, half - disc])
    s_gain = bw ** order          # order zeros at s = 0

    z_poles = (fs2 + s_poles) / (fs2 - s_poles)
    z_zeros = np.concatenate([np.ones(order), -np.ones(order)])
    z_gain = s_gain * np.real(np.prod(fs2 - np.zeros(order)) / np.prod(fs2 - s_poles))

    if not np.all(np.abs(z_poles) < 1.0):
        raise UnstableResult("designed filter has poles on or outside |z| = 1")
    b = z_gain * np.real(np.poly(z_zeros))
    a = np.real(np.poly(z_poles))
    b, a = b / a[0], a / a[0]

    # each conjugate pole pair gets one zero at z = 1 and one at z = -1
    upper = np.sort_complex(z_poles[z_poles.imag > 0])
    if len(upper) != order:
        raise UnstableResult("expected complex-conjugate pole pairs")
    sections = np.array([[1.0, 0.0, -1.0, 1.0, -2.0 * q.real, abs(q) ** 2]
                         for q in upper])
    sections[0, :3] *= z_gain
    return FilterCoefficients(b, a, sections)


@lru_cache(maxsize=8)
def default_bandpass(fs_hz: float = 500.0) -> FilterCoefficients:
    """The generator's 0.5-40 Hz order-4 band-pass, designed once per rate."""
    return design_bandpass(BAND_ORDER, BAND_LOW_HZ, BAND_HIGH_HZ, fs_hz)


def steady_state(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Initial delay-line state equal to the step response's steady state.

    Solves ``(I - A) z = B`` for the transposed direct-form II realisation.
    """
    n = max(len(a), len(b))
    a = np.pad(np.asarray(a, float), (0, n - len(a)))
    b = np.pad(np.asarray(b, float), (0, n - len(b)))
    if n == 1:
        return np.zeros(0)
    companion = np.zeros((n - 1, n - 1))
    companion[0, :] = -a[1:]
    companion[1:, :-1] += np.eye(n - 2)
    rhs = b[1:] - a[1:] * b[0]
    return np.linalg.solve(np.eye(n - 1) - companion.T, rhs)


def sections_steady_state(sections: np.ndarray) -> np.ndarray:
    """Per-section steady states for a unit step into the cascade."""
    zi = np.empty((len(sections), 2))
    scale = 1.0
    for i, sec in enumerate(sections):
        zi[i] = scale * steady_state(sec[:3], sec[3:])
        scale *= sec[:3].sum() / sec[3:].sum()
    return zi


def _odd_extend(x: np.ndarray, n: int) -> np.ndarray:
    left = 2 * x[0] - x[n:0:-1]
    right = 2 * x[-1] - x[-2:-n - 2:-1]
    return np.concatenate([left, x, right])


def _forward_backward(sections, zi, x, edge):
    ext = _odd_extend(x, edge)
    y, _ = sosfilt(sections, ext, zi=zi * ext[0])
    y = y[::-1]
    y, _ = sosfilt(sections, y, zi=zi * y[0])
    return y[::-1][edge:-edge]


def filtfilt(coeffs: FilterCoefficients, x) -> np.ndarray:
    """Zero-phase forward-backward filtering of a 1-D signal.

    Both ends are padded with an odd reflection of the whole signal
    (``len(x) - 1`` samples) so the slow high-pass transient decays before
    reaching the retained span, and each pass starts from the steady state
    scaled to its first sample.  The result is averaged with the
    time-reversed run, which makes the operator commute exactly with time
    reversal.  Signals must be longer than ``3 * len(coeffs.a)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("filtfilt expects a 1-D signal")
    min_len = 3 * max(len(coeffs.a), len(coeffs.b))
    if x.size <= min_len:
        raise TooShort(f"signal of {x.size} samples needs more than {min_len}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("signal contains NaN or inf")

    zi = sections_steady_state(coeffs.sections)
    edge = x.size - 1
    fwd = _forward_backward(coeffs.sections, zi, x, edge)
    rev = _forward_backward(coeffs.sections, zi, x[::-1], edge)[::-1]
    return 0.5 * (fwd + rev)


def zscore(x) -> tuple[np.ndarray, float, float]:
    """Return ``((x - mean) / std, mean, std)`` using the population std."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise TooShort("z-score needs at least 2 samples")
    mu = float(x.mean())
    centered = x - mu
    sigma = float(np.sqrt(np.mean(centered ** 2)))
    if sigma < ZERO_VARIANCE_MV:
        raise ZeroVariance(f"standard deviation {sigma:g} below {ZERO_VARIANCE_MV}")
    out = centered / sigma
    # second centering pass keeps |mean| at rounding level for long leads
    out -= out.mean()
    return out, mu, sigma


def condition_leads(values_mv: np.ndarray, fs_hz: float = 500.0):
    """Filter then normalize every lead.

    Returns ``(normalized, mus, sigmas)``; raises :class:`ZeroVariance` naming
    the first flat lead.
    """
    coeffs = default_bandpass(float(fs_hz))
    out = np.empty_like(values_mv, dtype=np.float64)
    mus, sigmas = [], []
    for i, lead in enumerate(values_mv):
        try:
            out[i], mu, sigma = zscore(filtfilt(coeffs, lead))
        except ZeroVariance as exc:
            raise ZeroVariance(f"lead {i}: {exc}") from None
        mus.append(mu)
        sigmas.append(sigma)
    return out, np.array(mus), np.array(sigmas)
